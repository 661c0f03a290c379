//! Driving the `zsba` command line in-process over a fixture written to disk:
//! validate, classify, segment, then re-render the saved report.
//!
//! Run with `cargo run -p zsba --example cli_end_to_end`.

use zsba::cli::run;
use zsba::synthetic::Fixture;

fn zsba(args: &[&str]) -> i32 {
    let argv = std::iter::once("zsba").chain(args.iter().copied());
    run(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

fn main() -> zsba::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let paths = Fixture::buildings().write(dir.path())?;
    let p = |p: &std::path::Path| p.to_str().expect("utf-8 path").to_owned();
    let (tasks, emb, masks) = (p(&paths.tasks), p(&paths.embeddings), p(&paths.masks_dir));
    let (cm, sm) = (p(&paths.classify_manifest), p(&paths.segment_manifest));
    let (cout, sout) = (p(&dir.path().join("out_classify")), p(&dir.path().join("out_segment")));

    println!("== validate");
    let code = zsba(&[
        "validate",
        "--tasks",
        &tasks,
        "--task-id",
        "facade",
        "--embeddings",
        &emb,
        "--manifest",
        &sm,
        "--masks-dir",
        &masks,
    ]);
    println!("exit {code}\n");

    println!("== classify");
    let code = zsba(&[
        "classify",
        "--tasks",
        &tasks,
        "--task-id",
        "roof_type",
        "--embeddings",
        &emb,
        "--manifest",
        &cm,
        "--out",
        &cout,
        "--workers",
        "4",
    ]);
    println!("exit {code}");
    print!(
        "{}",
        std::fs::read_to_string(dir.path().join("out_classify/results.jsonl")).unwrap_or_default()
    );

    println!("\n== segment");
    let code = zsba(&[
        "segment",
        "--tasks",
        &tasks,
        "--task-id",
        "facade",
        "--embeddings",
        &emb,
        "--manifest",
        &sm,
        "--masks-dir",
        &masks,
        "--out",
        &sout,
        "--overlay",
    ]);
    println!("exit {code}\n");

    println!("== report");
    let report = format!("{sout}/report.json");
    zsba(&["report", &report]);
    Ok(())
}
