//! The `zsba` command line: `classify`, `segment`, `validate` and `report`.
//!
//! Exit status: 0 success, 1 usage, 2 I/O or format error, 3 validation
//! failure, 4 run completed with per-sample failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::classify::{classify_batch, SampleFailure};
use crate::error::{Error, Result};
use crate::manifest::{load_manifest, DatasetManifest};
use crate::mask::{load_masks, MaskDir, OverlapPolicy};
use crate::metrics::{
    accumulate_maps, classification_report, report_to_table, ConfusionMatrix, EvalReport, UnlabeledPolicy,
};
use crate::netpbm::{colorize, encode_pgm, encode_ppm, load_pgm};
use crate::segment::segment_batch;
use crate::store::{image_key, load_embeddings, text_key, EmbeddingStore};
use crate::vocabulary::{find_task, load_tasks, presets, TaskKind, TaskSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "zsba", version, about = "Zero-shot building attribute extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify every manifest image and score against ground truth if present
    Classify(RunArgs),
    /// Label precomputed masks and write one PGM label map per image
    Segment(RunArgs),
    /// Check formats, key coverage and mask invariants without running
    Validate(RunArgs),
    /// Re-render a saved report.json as a table
    Report {
        /// Path to a report.json written by classify or segment
        report: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Task file (defaults to the presets in $ZSBA_DATA_DIR)
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long)]
    task_id: Option<String>,
    /// ZSBA embedding file
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Directory of <image_id>.json mask files
    #[arg(long)]
    masks_dir: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reject overlapping masks (default)
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Resolve overlapping masks in favour of the larger mask
    #[arg(long)]
    lenient: bool,
    /// Leave pixels predicted as unlabeled out of the evaluation
    #[arg(long)]
    ignore_unlabeled: bool,
    /// Also write a palette-colored PPM per image
    #[arg(long)]
    overlay: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

/// Resolved inputs of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tasks: PathBuf,
    pub task_id: Option<String>,
    pub embeddings: Option<PathBuf>,
    pub masks_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub overlap: OverlapPolicy,
    pub unlabeled: UnlabeledPolicy,
    pub overlay: bool,
    pub workers: usize,
}

impl From<RunArgs> for RunConfig {
    fn from(a: RunArgs) -> Self {
        RunConfig {
            tasks: a.tasks.unwrap_or_else(presets::tasks_path),
            task_id: a.task_id,
            embeddings: a.embeddings,
            masks_dir: a.masks_dir,
            manifest: a.manifest,
            out: a.out,
            overlap: if a.lenient {
                OverlapPolicy::Lenient
            } else {
                OverlapPolicy::Strict
            },
            unlabeled: if a.ignore_unlabeled {
                UnlabeledPolicy::Ignore
            } else {
                UnlabeledPolicy::CountAsMiss
            },
            overlay: a.overlay,
            workers: a.workers.max(1),
        }
    }
}

/// A fatal run error and the exit status it maps to.
struct Fatal(i32, String);

impl From<Error> for Fatal {
    fn from(e: Error) -> Self {
        Fatal(e.exit_code(), e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Fatal {
    Fatal(EXIT_USAGE, msg.into())
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> std::result::Result<&'a T, Fatal> {
    v.as_ref()
        .ok_or_else(|| usage(format!("missing required flag --{flag}")))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Classify(a) => cmd_classify(&a.into(), stdout, stderr),
        Command::Segment(a) => cmd_segment(&a.into(), stdout, stderr),
        Command::Validate(a) => cmd_validate(&a.into(), stdout),
        Command::Report { report } => cmd_report(&report, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(Fatal(code, msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            code
        }
    }
}

fn load_task(config: &RunConfig, kind: TaskKind) -> std::result::Result<TaskSpec, Fatal> {
    let task_id = required(&config.task_id, "task-id")?;
    let tasks = load_tasks(&config.tasks)?;
    let task = find_task(&tasks, task_id)?.clone();
    task.expect_kind(kind)?;
    Ok(task)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn failures_jsonl(failures: &[SampleFailure]) -> String {
    failures
        .iter()
        .map(|f| json!({"image_id": f.image_id, "error": f.error.to_string()}).to_string() + "\n")
        .collect()
}

fn report_failures(failures: &[SampleFailure], stderr: &mut dyn Write) {
    for f in failures {
        let _ = writeln!(stderr, "sample `{}` failed: {}", f.image_id, f.error);
    }
}

fn finish(
    out: &Path,
    report: Option<&EvalReport>,
    failures: &[SampleFailure],
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> std::result::Result<i32, Fatal> {
    if let Some(r) = report {
        write_file(&out.join("report.json"), (r.to_json() + "\n").as_bytes())?;
        let _ = stdout.write_all(report_to_table(r).as_bytes());
    }
    if !failures.is_empty() {
        write_file(&out.join("failures.jsonl"), failures_jsonl(failures).as_bytes())?;
        report_failures(failures, stderr);
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn cmd_classify(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::result::Result<i32, Fatal> {
    let out = required(&config.out, "out")?;
    let task = load_task(config, TaskKind::Classification)?;
    let store = load_embeddings(required(&config.embeddings, "embeddings")?)?;
    let manifest = load_manifest(required(&config.manifest, "manifest")?, &task)?;

    let outcome = classify_batch(&manifest, &task, &store, config.workers)?;
    let report = if manifest.has_ground_truth() {
        match classification_report(&outcome.results, &manifest, &task) {
            Ok(r) => Some(r),
            Err(Error::EmptyDataset) => {
                let _ = writeln!(stderr, "warning: no labeled sample was classified; no report written");
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };

    create_dir(out)?;
    let lines: String = outcome
        .results
        .iter()
        .map(|r| serde_json::to_string(r).expect("results serialize") + "\n")
        .collect();
    write_file(&out.join("results.jsonl"), lines.as_bytes())?;
    finish(out, report.as_ref(), &outcome.failures, stdout, stderr)
}

fn cmd_segment(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::result::Result<i32, Fatal> {
    let out = required(&config.out, "out")?;
    let masks_dir = required(&config.masks_dir, "masks-dir")?;
    let task = load_task(config, TaskKind::Segmentation)?;
    let store = load_embeddings(required(&config.embeddings, "embeddings")?)?;
    let manifest = load_manifest(required(&config.manifest, "manifest")?, &task)?;

    let source = MaskDir::new(masks_dir, config.overlap);
    let mut outcome = segment_batch(&manifest, &task, &store, &source, config.workers)?;

    let mut confusion = ConfusionMatrix::new(task.len());
    let mut evaluated = 0usize;
    for seg in &outcome.results {
        let Some(gt_path) = manifest.get(&seg.image_id).and_then(|s| s.gt_map_path.as_ref()) else {
            continue;
        };
        let mut single = ConfusionMatrix::new(task.len());
        match load_pgm(gt_path).and_then(|gt| accumulate_maps(&mut single, &seg.map, &gt, config.unlabeled)) {
            Ok(()) => {
                confusion.merge(&single)?;
                evaluated += 1;
            }
            Err(error) => outcome.failures.push(SampleFailure {
                image_id: seg.image_id.clone(),
                error,
            }),
        }
    }
    let report = if evaluated > 0 {
        match EvalReport::from_confusion(&task, confusion) {
            Ok(r) => Some(r),
            Err(Error::EmptyDataset) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let order: Vec<&str> = manifest.samples().iter().map(|s| s.image_id.as_str()).collect();
    outcome
        .failures
        .sort_by_key(|f| order.iter().position(|id| *id == f.image_id));

    create_dir(out)?;
    for seg in &outcome.results {
        write_file(&out.join(format!("{}.pgm", seg.image_id)), &encode_pgm(&seg.map))?;
        if config.overlay {
            write_file(
                &out.join(format!("{}.ppm", seg.image_id)),
                &encode_ppm(&colorize(&seg.map)),
            )?;
        }
    }
    finish(out, report.as_ref(), &outcome.failures, stdout, stderr)
}

fn cmd_report(path: &Path, stdout: &mut dyn Write) -> std::result::Result<i32, Fatal> {
    let report = EvalReport::load(path)?;
    let _ = stdout.write_all(report_to_table(&report).as_bytes());
    Ok(EXIT_OK)
}

/// Validation checklist accumulator.
struct Checklist<'a> {
    out: &'a mut dyn Write,
    failed: usize,
    passed: usize,
}

impl Checklist<'_> {
    fn check<T>(&mut self, name: &str, result: Result<T>) -> Option<T> {
        match result {
            Ok(v) => {
                self.pass(name);
                Some(v)
            }
            Err(e) => {
                self.fail(name, &e.to_string());
                None
            }
        }
    }

    fn pass(&mut self, name: &str) {
        self.passed += 1;
        let _ = writeln!(self.out, "[ok]   {name}");
    }

    fn fail(&mut self, name: &str, detail: &str) {
        self.failed += 1;
        let _ = writeln!(self.out, "[FAIL] {name}: {detail}");
    }

    fn keys(&mut self, name: &str, store: &EmbeddingStore, keys: &[String]) {
        let mut bad = 0;
        for key in keys {
            match store.get(key) {
                None => {
                    bad += 1;
                    self.fail(name, &format!("missing key `{key}`"));
                }
                Some(e) if e.is_zero() => {
                    bad += 1;
                    self.fail(name, &format!("key `{key}` holds a zero vector"));
                }
                Some(_) => {}
            }
        }
        if bad == 0 {
            self.pass(&format!("{name} ({} keys)", keys.len()));
        }
    }
}

fn cmd_validate(config: &RunConfig, stdout: &mut dyn Write) -> std::result::Result<i32, Fatal> {
    let mut list = Checklist {
        out: stdout,
        failed: 0,
        passed: 0,
    };
    let verdict = |list: &Checklist| {
        let code = if list.failed == 0 { EXIT_OK } else { EXIT_VALIDATION };
        (code, format!("{} passed, {} failed", list.passed, list.failed))
    };

    let tasks_name = format!("task file {}", config.tasks.display());
    let Some(tasks) = list.check(&tasks_name, load_tasks(&config.tasks)) else {
        let (code, summary) = verdict(&list);
        let _ = writeln!(list.out, "{summary}");
        return Ok(code);
    };
    let selected: Vec<TaskSpec> = match &config.task_id {
        Some(id) => list
            .check(&format!("task `{id}`"), find_task(&tasks, id).cloned())
            .into_iter()
            .collect(),
        None => tasks.clone(),
    };

    let store = config
        .embeddings
        .as_ref()
        .and_then(|p| list.check(&format!("embeddings {}", p.display()), load_embeddings(p)));

    if let Some(store) = &store {
        for task in &selected {
            let keys: Vec<String> = task.prompts().iter().map(|p| text_key(p)).collect();
            list.keys(&format!("prompt embeddings for `{}`", task.task_id()), store, &keys);
        }
    }

    let single = (selected.len() == 1).then(|| &selected[0]);
    let manifest: Option<(DatasetManifest, &TaskSpec)> = match (&config.manifest, single) {
        (Some(path), Some(task)) => list
            .check(&format!("manifest {}", path.display()), load_manifest(path, task))
            .map(|m| (m, task)),
        (Some(path), None) => {
            list.fail(
                &format!("manifest {}", path.display()),
                "--task-id is required to validate a manifest",
            );
            None
        }
        (None, _) => None,
    };

    if let Some((manifest, task)) = &manifest {
        match task.task_kind() {
            TaskKind::Classification => {
                if let Some(store) = &store {
                    let keys: Vec<String> = manifest
                        .samples()
                        .iter()
                        .map(|s| image_key(&s.image_id, None))
                        .collect();
                    list.keys("image embeddings for manifest samples", store, &keys);
                }
            }
            TaskKind::Segmentation => validate_segmentation(&mut list, config, manifest, store.as_ref()),
        }
    }

    let (code, summary) = verdict(&list);
    let _ = writeln!(list.out, "{summary}");
    Ok(code)
}

fn validate_segmentation(
    list: &mut Checklist,
    config: &RunConfig,
    manifest: &DatasetManifest,
    store: Option<&EmbeddingStore>,
) {
    let Some(masks_dir) = &config.masks_dir else {
        list.fail("mask files", "--masks-dir is required for segmentation manifests");
        return;
    };
    let source = MaskDir::new(masks_dir, config.overlap);
    for sample in manifest.samples() {
        let path = source.path_for(&sample.image_id);
        let Some(masks) = list.check(&format!("masks {}", path.display()), load_masks(&path, config.overlap)) else {
            continue;
        };
        if let Some(store) = store {
            let keys: Vec<String> = masks
                .masks()
                .iter()
                .map(|m| image_key(&sample.image_id, Some(&m.id)))
                .collect();
            list.keys(
                &format!("masked-image embeddings for `{}`", sample.image_id),
                store,
                &keys,
            );
        }
        if let Some(gt_path) = &sample.gt_map_path {
            let name = format!("ground truth {}", gt_path.display());
            let checked = load_pgm(gt_path).and_then(|gt| {
                if (gt.width(), gt.height()) == (masks.width(), masks.height()) {
                    Ok(())
                } else {
                    Err(Error::ShapeMismatch(format!(
                        "ground truth is {}x{}, masks are {}x{}",
                        gt.width(),
                        gt.height(),
                        masks.width(),
                        masks.height()
                    )))
                }
            });
            list.check(&name, checked);
        }
    }
}
