//! Facade parsing: label category-agnostic masks by embedding similarity and
//! paint the labels into a segmentation map.
//!
//! Run with `cargo run -p zsba --example segment_facade [OUT_DIR]`.

use std::path::PathBuf;

use zsba::netpbm::{colorize, save_pgm, save_ppm};
use zsba::synthetic::Fixture;
use zsba::{compose_segmentation, report_to_table, score_masks, segmentation_report, UnlabeledPolicy, UNLABELED};

fn main() -> zsba::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let fixture = Fixture::buildings();
    let task = &fixture.segment_task;

    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for case in &fixture.segment_cases {
        let scores = score_masks(&case.image_id, &case.masks, task, &fixture.store)?;
        for (mask, (row, &label)) in case.masks.masks().iter().zip(scores.rows().iter().zip(scores.labels())) {
            println!(
                "{} / {}: {} px -> {} {:?}",
                case.image_id,
                mask.id,
                mask.area(),
                task.categories()[label].name,
                row.as_slice()
                    .iter()
                    .map(|s| (s * 1000.0).round() / 1000.0)
                    .collect::<Vec<_>>()
            );
        }
        let map = compose_segmentation(&case.masks, &scores)?;
        for y in 0..map.height() {
            let row: String = (0..map.width())
                .map(|x| match map.get(x, y) {
                    UNLABELED => '.',
                    l => char::from(b'0' + l),
                })
                .collect();
            println!("    {row}");
        }
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(|e| zsba::Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            save_pgm(&map, dir.join(format!("{}.pgm", case.image_id)))?;
            save_ppm(&colorize(&map), dir.join(format!("{}.ppm", case.image_id)))?;
        }
        preds.push(map);
        truths.push(case.truth.clone());
    }

    let report = segmentation_report(&preds, &truths, task, UnlabeledPolicy::CountAsMiss)?;
    print!("\n{}", report_to_table(&report));
    Ok(())
}
