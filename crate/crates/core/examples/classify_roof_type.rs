//! Zero-shot roof-type classification over a synthetic embedding store.
//!
//! Run with `cargo run -p zsba --example classify_roof_type`.

use zsba::synthetic::Fixture;
use zsba::vocabulary::presets;
use zsba::{classification_report, classify_batch, report_to_table, DatasetManifest, Sample};

fn main() -> zsba::Result<()> {
    let fixture = Fixture::buildings();
    let task = presets::get(presets::ROOF_TYPE).expect("bundled preset");

    println!("task `{}` ({}):", task.task_id(), task.route());
    for prompt in task.prompts() {
        println!("  prompt: {prompt}");
    }

    let samples = fixture
        .classify_labels
        .iter()
        .map(|(id, label)| Sample::labeled(id.clone(), *label))
        .collect();
    let manifest = DatasetManifest::new(&task, samples)?;

    let outcome = classify_batch(&manifest, &task, &fixture.store, 2)?;
    for r in &outcome.results {
        let scores: Vec<String> = r.scores.as_slice().iter().map(|s| format!("{s:+.3}")).collect();
        println!("{:<10} -> {:<7} [{}]", r.image_id, r.predicted_name, scores.join(", "));
    }

    let report = classification_report(&outcome.results, &manifest, &task)?;
    print!("\n{}", report_to_table(&report));
    Ok(())
}
