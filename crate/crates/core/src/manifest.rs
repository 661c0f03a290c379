//! Labeled (or unlabeled) sample lists driving batch runs and evaluation.
//!
//! ```json
//! {"task_id": "roof_type",
//!  "samples": [{"image_id": "house_001", "ground_truth": "hipped"},
//!              {"image_id": "house_002", "ground_truth": 0},
//!              {"image_id": "house_003"}]}
//! ```
//!
//! Segmentation manifests use `"gt_map": "<path to P5 PGM>"` instead of
//! `ground_truth`; relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::vocabulary::{TaskKind, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub image_id: String,
    pub ground_truth: Option<usize>,
    pub gt_map_path: Option<PathBuf>,
}

impl Sample {
    pub fn unlabeled(image_id: impl Into<String>) -> Self {
        Sample {
            image_id: image_id.into(),
            ground_truth: None,
            gt_map_path: None,
        }
    }

    pub fn labeled(image_id: impl Into<String>, ground_truth: usize) -> Self {
        Sample {
            ground_truth: Some(ground_truth),
            ..Sample::unlabeled(image_id)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    task_id: String,
    samples: Vec<Sample>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelRecord {
    Index(usize),
    Name(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    image_id: String,
    #[serde(default)]
    ground_truth: Option<LabelRecord>,
    #[serde(default)]
    gt_map: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    task_id: String,
    samples: Vec<SampleRecord>,
}

/// Image ids double as file stems for mask inputs and map outputs.
pub fn check_image_id(id: &str) -> Result<()> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\', '\0']) {
        return Err(Error::Manifest(format!("image id {id:?} is not a valid file stem")));
    }
    Ok(())
}

impl DatasetManifest {
    /// Checks ids and labels against `task`.
    pub fn new(task: &TaskSpec, samples: Vec<Sample>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &samples {
            check_image_id(&s.image_id)?;
            if !seen.insert(s.image_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate image id `{}`", s.image_id)));
            }
            match (task.task_kind(), s.ground_truth, &s.gt_map_path) {
                (_, Some(label), _) if label >= task.len() => {
                    return Err(Error::Manifest(format!(
                        "sample `{}`: ground truth {label} out of range for {} categories",
                        s.image_id,
                        task.len()
                    )))
                }
                (TaskKind::Classification, _, Some(_)) => {
                    return Err(Error::Manifest(format!(
                        "sample `{}`: gt_map given for a classification task",
                        s.image_id
                    )))
                }
                (TaskKind::Segmentation, Some(_), _) => {
                    return Err(Error::Manifest(format!(
                        "sample `{}`: ground_truth index given for a segmentation task",
                        s.image_id
                    )))
                }
                _ => {}
            }
        }
        Ok(DatasetManifest {
            task_id: task.task_id().to_owned(),
            samples,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.image_id == image_id)
    }

    pub fn has_ground_truth(&self) -> bool {
        self.samples
            .iter()
            .any(|s| s.ground_truth.is_some() || s.gt_map_path.is_some())
    }

    /// Parses a manifest; `base_dir` anchors relative `gt_map` paths.
    pub fn parse(json: &str, origin: &Path, base_dir: &Path, task: &TaskSpec) -> Result<Self> {
        let file: ManifestFile = serde_json::from_str(json).map_err(|e| Error::parse(origin, &e))?;
        if file.task_id != task.task_id() {
            return Err(Error::Manifest(format!(
                "manifest is for task `{}`, not `{}`",
                file.task_id,
                task.task_id()
            )));
        }
        let samples = file
            .samples
            .into_iter()
            .map(|r| {
                let ground_truth = match r.ground_truth {
                    None => None,
                    Some(LabelRecord::Index(i)) => Some(i),
                    Some(LabelRecord::Name(name)) => Some(
                        task.category_by_name(&name)
                            .ok_or_else(|| {
                                Error::Manifest(format!("sample `{}`: unknown category `{name}`", r.image_id))
                            })?
                            .index,
                    ),
                };
                Ok(Sample {
                    image_id: r.image_id,
                    ground_truth,
                    gt_map_path: r.gt_map.map(|p| base_dir.join(p)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DatasetManifest::new(task, samples)
    }
}

pub fn load_manifest(path: impl AsRef<Path>, task: &TaskSpec) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    DatasetManifest::parse(&text, path, base, task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocabulary::presets;

    #[test]
    fn parses_names_indices_and_missing_labels() {
        let roof = presets::get(presets::ROOF_TYPE).unwrap();
        let json = r#"{"task_id":"roof_type","samples":[
            {"image_id":"a","ground_truth":"hipped"},
            {"image_id":"b","ground_truth":2},
            {"image_id":"c"}]}"#;
        let m = DatasetManifest::parse(json, Path::new("m.json"), Path::new("/d"), &roof).unwrap();
        let labels: Vec<_> = m.samples().iter().map(|s| s.ground_truth).collect();
        assert_eq!(labels, [Some(1), Some(2), None]);
        assert!(m.has_ground_truth());
    }

    #[test]
    fn resolves_gt_maps_relative_to_manifest() {
        let facade = presets::get(presets::FACADE).unwrap();
        let json = r#"{"task_id":"facade","samples":[{"image_id":"a","gt_map":"gt/a.pgm"}]}"#;
        let m = DatasetManifest::parse(json, Path::new("m.json"), Path::new("/data"), &facade).unwrap();
        assert_eq!(m.samples()[0].gt_map_path.as_deref(), Some(Path::new("/data/gt/a.pgm")));
    }

    #[test]
    fn structural_errors() {
        let roof = presets::get(presets::ROOF_TYPE).unwrap();
        let cases = [
            r#"{"task_id":"facade","samples":[]}"#,
            r#"{"task_id":"roof_type","samples":[{"image_id":"a"},{"image_id":"a"}]}"#,
            r#"{"task_id":"roof_type","samples":[{"image_id":"a","ground_truth":3}]}"#,
            r#"{"task_id":"roof_type","samples":[{"image_id":"a","ground_truth":"conical"}]}"#,
            r#"{"task_id":"roof_type","samples":[{"image_id":"../a"}]}"#,
            r#"{"task_id":"roof_type","samples":[{"image_id":"a","gt_map":"x.pgm"}]}"#,
        ];
        for c in cases {
            let err = DatasetManifest::parse(c, Path::new("m"), Path::new("."), &roof).unwrap_err();
            assert!(matches!(err, Error::Manifest(_)), "{c}: {err:?}");
        }
    }
}
