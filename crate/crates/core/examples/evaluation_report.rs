//! Accuracy and IoU reports: micro/macro averages, dataset-level mIoU,
//! merging partial reports and rendering tables.
//!
//! Run with `cargo run -p zsba --example evaluation_report`.

use zsba::metrics::ConfusionMatrix;
use zsba::{
    report_to_table, segmentation_report, EvalReport, SegmentationMap, TaskKind, TaskSpec, UnlabeledPolicy, UNLABELED,
};

fn main() -> zsba::Result<()> {
    let floors = TaskSpec::new(
        "num_floors",
        TaskKind::Classification,
        "a photo of a {} house",
        ["one-story", "two-story", "three-story"],
    )?;

    // Two shards evaluated separately, e.g. by two workers.
    let mut shards = [ConfusionMatrix::new(3), ConfusionMatrix::new(3)];
    for (truth, pred, n, shard) in [(0, 0, 40, 0), (0, 1, 8, 0), (1, 1, 12, 0), (1, 0, 9, 1), (2, 1, 3, 1)] {
        for _ in 0..n {
            shards[shard].add(truth, Some(pred))?;
        }
    }
    let [shard_a, shard_b] = shards;
    let a = EvalReport::from_confusion(&floors, shard_a)?;
    let b = EvalReport::from_confusion(&floors, shard_b)?;
    let merged = a.merge(&b, &floors)?;
    print!("{}", report_to_table(&merged));

    let facade = TaskSpec::new(
        "facade",
        TaskKind::Segmentation,
        "a photo of a {}",
        ["roof", "facade", "window", "door"],
    )?;
    let gt = SegmentationMap::new(4, 2, vec![0, 0, 0, 0, 1, 2, 2, UNLABELED])?;
    let pred = SegmentationMap::new(4, 2, vec![0, 0, 1, UNLABELED, 1, 2, 3, 1])?;
    let report = segmentation_report(&[pred], &[gt], &facade, UnlabeledPolicy::CountAsMiss)?;
    print!("\n{}", report_to_table(&report));
    println!("\n{}", report.to_json());
    Ok(())
}
