//! Canonical RLE mask files, strict overlap rejection and lenient resolution.
//!
//! Run with `cargo run -p zsba --example rle_masks`.

use std::path::Path;

use zsba::mask::{rle_decode, rle_encode};
use zsba::{MaskSet, OverlapPolicy};

fn main() -> zsba::Result<()> {
    let pixels = [true, true, false, false];
    let counts = rle_encode(&pixels);
    println!("{pixels:?} -> {counts:?}");
    assert_eq!(rle_decode("m", &counts, 4)?, pixels);

    // "facade" covers the whole top row and a window sits inside it.
    let json = r#"{"width":4,"height":2,"masks":[
        {"id":"facade","rle":[0,6,2]},
        {"id":"window","rle":[1,2,5]}]}"#;

    match MaskSet::from_json(json, Path::new("nested.json"), OverlapPolicy::Strict) {
        Err(e) => println!("strict: {e}"),
        Ok(_) => unreachable!("masks overlap"),
    }

    let lenient = MaskSet::from_json(json, Path::new("nested.json"), OverlapPolicy::Lenient)?;
    println!("lenient keeps {} mask(s):", lenient.len());
    for m in lenient.masks() {
        println!("  {} area {} rle {:?}", m.id, m.area(), rle_encode(&m.pixels));
    }
    println!("re-encoded: {}", lenient.to_json());
    Ok(())
}
