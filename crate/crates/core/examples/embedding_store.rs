//! Writing and reading a ZSBA embedding file and looking vectors up by the
//! fixed key schema.
//!
//! Run with `cargo run -p zsba --example embedding_store`.

use zsba::store::{image_key, text_key};
use zsba::{cosine_sim, load_embeddings, write_embeddings, Embedding, EmbeddingBackend, EmbeddingStore};

fn main() -> zsba::Result<()> {
    let mut store = EmbeddingStore::new(3)?;
    store.insert(text_key("a photo of a window"), Embedding::new(vec![0.0, 1.0, 0.0])?)?;
    store.insert(text_key("a photo of a door"), Embedding::new(vec![0.0, 0.0, 1.0])?)?;
    store.insert(image_key("house_001", None), Embedding::new(vec![0.3, 0.6, 0.2])?)?;
    store.insert(
        image_key("house_001", Some("m0")),
        Embedding::new(vec![0.1, 0.9, 0.05])?,
    )?;

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("embeddings.zsba");
    write_embeddings(&store, &path)?;
    let bytes = std::fs::read(&path).expect("just written");
    println!(
        "{} records, dimension {}, {} bytes",
        store.len(),
        store.dimension(),
        bytes.len()
    );
    println!("header: {:02x?}", &bytes[..16]);

    let loaded = load_embeddings(&path)?;
    assert_eq!(loaded.to_bytes(), bytes);
    for key in loaded.keys() {
        println!("  {key}");
    }

    let masked = loaded.image_embedding("house_001", Some("m0"))?;
    for prompt in ["a photo of a window", "a photo of a door"] {
        let sim = cosine_sim(&masked, &loaded.text_embedding(prompt)?)?;
        println!("sim(m0, {prompt:?}) = {sim:.4}");
    }
    match loaded.text_embedding("a photo of a roof") {
        Err(e) => println!("lookup of an unexported prompt: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
