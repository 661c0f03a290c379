//! Accuracy and IoU reporting.
//!
//! Both report kinds are derived from a [`ConfusionMatrix`] (ground truth by
//! row, prediction by column). Reports carry their matrix, so two reports
//! over disjoint samples merge by adding counts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::ClassificationResult;
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::segment::{SegmentationMap, UNLABELED};
use crate::vocabulary::{TaskKind, TaskSpec};

/// How predicted-unlabeled pixels on labeled ground truth are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlabeledPolicy {
    /// Count as a false negative for the true class; no false positive is charged.
    #[default]
    CountAsMiss,
    /// Drop the pixel from evaluation.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[truth][predicted]`.
    counts: Vec<Vec<u64>>,
    /// Per true class, samples predicted as unlabeled.
    unlabeled: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; num_classes]; num_classes],
            unlabeled: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    /// Records one observation; `predicted = None` means unlabeled.
    pub fn add(&mut self, truth: usize, predicted: Option<usize>) -> Result<()> {
        let n = self.num_classes();
        for label in std::iter::once(truth).chain(predicted) {
            if label >= n {
                return Err(Error::LabelOutOfRange { label, categories: n });
            }
        }
        match predicted {
            Some(p) => self.counts[truth][p] += 1,
            None => self.unlabeled[truth] += 1,
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes() != self.num_classes() {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge {}-class and {}-class matrices",
                self.num_classes(),
                other.num_classes()
            )));
        }
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (c, x) in row.iter_mut().zip(o) {
                *c += x;
            }
        }
        for (u, x) in self.unlabeled.iter_mut().zip(&other.unlabeled) {
            *u += x;
        }
        Ok(())
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn unlabeled(&self, truth: usize) -> u64 {
        self.unlabeled[truth]
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    /// Ground-truth occurrences of `class`, including unlabeled predictions.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum::<u64>() + self.unlabeled[class]
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.num_classes()).map(|k| self.support(k)).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.num_classes()).map(|k| self.true_positives(k)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetric {
    pub name: String,
    /// Samples (classification) or pixels (segmentation) of this class in ground truth.
    pub count: u64,
    /// Accuracy or IoU in percent. `None` for a class with no ground-truth
    /// samples (accuracy) or with an empty union (IoU).
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_id: String,
    pub kind: TaskKind,
    pub per_class: Vec<ClassMetric>,
    /// Pooled accuracy over all samples (pixel accuracy for segmentation).
    pub micro_average: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_average: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_iou: Option<f64>,
    pub confusion: ConfusionMatrix,
}

/// Mean of the present values; `None` if there are none.
pub fn unweighted_mean(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Weighted mean of `values`; `None` if the weights sum to zero.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    (total > 0.0).then(|| values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total)
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64 * 100.0)
}

impl EvalReport {
    pub fn from_confusion(task: &TaskSpec, confusion: ConfusionMatrix) -> Result<Self> {
        if confusion.num_classes() != task.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}-class matrix for a {}-category task",
                confusion.num_classes(),
                task.len()
            )));
        }
        let micro_average = percent(confusion.correct(), confusion.total()).ok_or(Error::EmptyDataset)?;
        let per_class: Vec<ClassMetric> = task
            .categories()
            .iter()
            .map(|c| {
                let k = c.index;
                let support = confusion.support(k);
                let tp = confusion.true_positives(k);
                let value = match task.task_kind() {
                    TaskKind::Classification => percent(tp, support),
                    TaskKind::Segmentation => {
                        let fp = confusion.predicted(k) - tp;
                        let fn_ = support - tp;
                        let union = tp + fp + fn_;
                        (union > 0).then(|| tp as f64 / union as f64 * 100.0)
                    }
                };
                ClassMetric {
                    name: c.name.clone(),
                    count: support,
                    value,
                }
            })
            .collect();
        let mean = unweighted_mean(&per_class.iter().map(|c| c.value).collect::<Vec<_>>());
        let (macro_average, mean_iou) = match task.task_kind() {
            TaskKind::Classification => (mean, None),
            TaskKind::Segmentation => (None, mean),
        };
        Ok(EvalReport {
            task_id: task.task_id().to_owned(),
            kind: task.task_kind(),
            per_class,
            micro_average,
            macro_average,
            mean_iou,
            confusion,
        })
    }

    /// The class-averaged figure: macro accuracy or mIoU.
    pub fn class_mean(&self) -> Option<f64> {
        self.macro_average.or(self.mean_iou)
    }

    /// Report over the union of two disjoint sample sets.
    pub fn merge(&self, other: &EvalReport, task: &TaskSpec) -> Result<EvalReport> {
        let mut confusion = self.confusion.clone();
        confusion.merge(&other.confusion)?;
        EvalReport::from_confusion(task, confusion)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, &e))
    }
}

/// Per-class and averaged accuracy of `results` against the manifest's labels.
///
/// Samples without ground truth are skipped; classes without samples are
/// reported as absent and left out of the macro average.
pub fn classification_report(
    results: &[ClassificationResult],
    manifest: &DatasetManifest,
    task: &TaskSpec,
) -> Result<EvalReport> {
    let truth: HashMap<&str, Option<usize>> = manifest
        .samples()
        .iter()
        .map(|s| (s.image_id.as_str(), s.ground_truth))
        .collect();
    let mut confusion = ConfusionMatrix::new(task.len());
    for r in results {
        let gt = truth
            .get(r.image_id.as_str())
            .ok_or_else(|| Error::UnknownSample(r.image_id.clone()))?;
        if let Some(gt) = gt {
            confusion.add(*gt, Some(r.predicted_index))?;
        }
    }
    EvalReport::from_confusion(task, confusion)
}

/// Accumulates one predicted/ground-truth map pair into `confusion`.
pub fn accumulate_maps(
    confusion: &mut ConfusionMatrix,
    pred: &SegmentationMap,
    gt: &SegmentationMap,
    policy: UnlabeledPolicy,
) -> Result<()> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        if g == UNLABELED {
            continue;
        }
        match (p, policy) {
            (UNLABELED, UnlabeledPolicy::Ignore) => {}
            (UNLABELED, UnlabeledPolicy::CountAsMiss) => confusion.add(g.into(), None)?,
            _ => confusion.add(g.into(), Some(p.into()))?,
        }
    }
    Ok(())
}

/// Dataset-level IoU: one confusion matrix accumulated over every pixel of
/// every pair. Ground-truth sentinel pixels are ignored. The mean runs over
/// classes that occur in ground truth or prediction.
pub fn segmentation_report(
    pred_maps: &[SegmentationMap],
    gt_maps: &[SegmentationMap],
    task: &TaskSpec,
    policy: UnlabeledPolicy,
) -> Result<EvalReport> {
    if pred_maps.len() != gt_maps.len() {
        return Err(Error::LengthMismatch {
            left: pred_maps.len(),
            right: gt_maps.len(),
        });
    }
    let mut confusion = ConfusionMatrix::new(task.len());
    for (p, g) in pred_maps.iter().zip(gt_maps) {
        accumulate_maps(&mut confusion, p, g, policy)?;
    }
    EvalReport::from_confusion(task, confusion)
}

fn fmt_percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.1}"))
}

/// Plain-text table: one row per class, then the averaged rows.
pub fn report_to_table(report: &EvalReport) -> String {
    let (count_head, value_head, footers) = match report.kind {
        TaskKind::Classification => (
            "# Images",
            "Accuracy (%)",
            vec![
                ("Micro-Average", Some(report.micro_average)),
                ("Macro-Average", report.macro_average),
            ],
        ),
        TaskKind::Segmentation => (
            "# Pixels",
            "IoU (%)",
            vec![
                ("Pixel Accuracy", Some(report.micro_average)),
                ("Mean", report.mean_iou),
            ],
        ),
    };
    let rows: Vec<(String, String, String)> = report
        .per_class
        .iter()
        .map(|c| (c.name.clone(), c.count.to_string(), fmt_percent(c.value)))
        .chain(
            footers
                .into_iter()
                .map(|(name, v)| (name.to_owned(), String::new(), fmt_percent(v))),
        )
        .collect();
    let w0 = rows
        .iter()
        .map(|r| r.0.len())
        .chain([report.task_id.len()])
        .max()
        .unwrap_or(0);
    let w1 = rows
        .iter()
        .map(|r| r.1.len())
        .chain([count_head.len()])
        .max()
        .unwrap_or(0);
    let w2 = rows
        .iter()
        .map(|r| r.2.len())
        .chain([value_head.len()])
        .max()
        .unwrap_or(0);
    let rule = format!("{}\n", "-".repeat(w0 + w1 + w2 + 6));

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<w0$} | {:>w1$} | {:>w2$}",
        report.task_id, count_head, value_head
    );
    out.push_str(&rule);
    let n = report.per_class.len();
    for (i, (a, b, c)) in rows.iter().enumerate() {
        if i == n {
            out.push_str(&rule);
        }
        let _ = writeln!(out, "{a:<w0$} | {b:>w1$} | {c:>w2$}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Sample;
    use crate::similarity::ScoreVector;

    fn two_class() -> TaskSpec {
        TaskSpec::new("ab", TaskKind::Classification, "{}", ["A", "B"]).unwrap()
    }

    fn result(id: &str, pred: usize) -> ClassificationResult {
        ClassificationResult {
            image_id: id.into(),
            task_id: "ab".into(),
            predicted_index: pred,
            predicted_name: String::new(),
            scores: ScoreVector::new(vec![]),
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn hand_counted_accuracy() {
        let task = two_class();
        let samples = vec![
            Sample::labeled("a1", 0),
            Sample::labeled("a2", 0),
            Sample::labeled("a3", 0),
            Sample::labeled("b1", 1),
            Sample::unlabeled("u"),
        ];
        let manifest = DatasetManifest::new(&task, samples).unwrap();
        let results = [
            result("a1", 0),
            result("a2", 0),
            result("a3", 0),
            result("b1", 0),
            result("u", 1),
        ];
        let r = classification_report(&results, &manifest, &task).unwrap();
        assert_eq!(r.per_class[0].value, Some(100.0));
        assert_eq!(r.per_class[1].value, Some(0.0));
        assert!(close(r.micro_average, 75.0));
        assert!(close(r.macro_average.unwrap(), 50.0));

        let table = report_to_table(&r);
        assert!(table.contains("Micro-Average"));
        assert!(table.contains("75.0"));
        assert!(table.contains("50.0"));
        assert_eq!(table.lines().count(), 2 + 2 + 1 + 2);
    }

    #[test]
    fn all_correct_is_perfect() {
        let task = two_class();
        let manifest = DatasetManifest::new(&task, vec![Sample::labeled("a", 0), Sample::labeled("b", 1)]).unwrap();
        let r = classification_report(&[result("a", 0), result("b", 1)], &manifest, &task).unwrap();
        assert_eq!(r.micro_average, 100.0);
        assert_eq!(r.macro_average, Some(100.0));
    }

    #[test]
    fn absent_class_is_excluded_from_macro() {
        let task = TaskSpec::new("abc", TaskKind::Classification, "{}", ["A", "B", "C"]).unwrap();
        let manifest = DatasetManifest::new(&task, vec![Sample::labeled("a", 0), Sample::labeled("b", 1)]).unwrap();
        let r = classification_report(&[result("a", 0), result("b", 0)], &manifest, &task).unwrap();
        assert_eq!(r.per_class[2].value, None);
        assert!(close(r.macro_average.unwrap(), 50.0));
        assert!(report_to_table(&r)
            .lines()
            .any(|l| l.starts_with("C ") && l.ends_with(" -")));
    }

    #[test]
    fn error_paths() {
        let task = two_class();
        let manifest = DatasetManifest::new(&task, vec![Sample::unlabeled("a")]).unwrap();
        assert!(matches!(
            classification_report(&[result("zz", 0)], &manifest, &task),
            Err(Error::UnknownSample(_))
        ));
        assert!(matches!(
            classification_report(&[result("a", 0)], &manifest, &task),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            classification_report(&[], &manifest, &task),
            Err(Error::EmptyDataset)
        ));

        let seg = TaskSpec::new("s", TaskKind::Segmentation, "{}", ["x"]).unwrap();
        let a = SegmentationMap::new(2, 1, vec![0, 0]).unwrap();
        let b = SegmentationMap::new(1, 2, vec![0, 0]).unwrap();
        assert!(matches!(
            segmentation_report(std::slice::from_ref(&a), &[], &seg, UnlabeledPolicy::default()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            segmentation_report(std::slice::from_ref(&a), &[b], &seg, UnlabeledPolicy::default()),
            Err(Error::ShapeMismatch(_))
        ));
        let bad = SegmentationMap::new(2, 1, vec![0, 7]).unwrap();
        assert!(matches!(
            segmentation_report(&[bad], &[a], &seg, UnlabeledPolicy::default()),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn iou_hand_confusion() {
        let task = TaskSpec::new("s", TaskKind::Segmentation, "{}", ["zero", "one"]).unwrap();
        let gt = SegmentationMap::new(2, 2, vec![0; 4]).unwrap();
        let pred = SegmentationMap::new(2, 2, vec![0, 0, 1, 1]).unwrap();
        let r = segmentation_report(&[pred], std::slice::from_ref(&gt), &task, UnlabeledPolicy::CountAsMiss).unwrap();
        assert_eq!(r.per_class[0].value, Some(50.0));
        assert_eq!(r.per_class[1].value, Some(0.0));
        assert_eq!(r.mean_iou, Some(25.0));

        let r = segmentation_report(
            std::slice::from_ref(&gt),
            std::slice::from_ref(&gt),
            &task,
            UnlabeledPolicy::CountAsMiss,
        )
        .unwrap();
        assert_eq!(r.mean_iou, Some(100.0));
    }

    #[test]
    fn sentinel_handling() {
        let task = TaskSpec::new("s", TaskKind::Segmentation, "{}", ["zero", "one"]).unwrap();
        let gt = SegmentationMap::new(4, 1, vec![0, 0, 1, UNLABELED]).unwrap();
        let pred = SegmentationMap::new(4, 1, vec![0, UNLABELED, 1, 1]).unwrap();
        let r = segmentation_report(
            std::slice::from_ref(&pred),
            std::slice::from_ref(&gt),
            &task,
            UnlabeledPolicy::CountAsMiss,
        )
        .unwrap();
        // zero: tp 1, fn 1 (unlabeled) -> 50; one: tp 1 -> 100 (gt sentinel pixel ignored)
        assert_eq!(r.per_class[0].value, Some(50.0));
        assert_eq!(r.per_class[1].value, Some(100.0));
        assert_eq!(r.confusion.unlabeled(0), 1);
        assert!(close(r.micro_average, 200.0 / 3.0));

        let r = segmentation_report(&[pred], &[gt], &task, UnlabeledPolicy::Ignore).unwrap();
        assert_eq!(r.mean_iou, Some(100.0));
    }

    #[test]
    fn reference_table_arithmetic() {
        // year built, six buckets
        let acc = [38.7, 0.8, 12.8, 46.3, 0.1, 0.0];
        let counts = [30198.0, 10485.0, 20519.0, 13537.0, 19178.0, 5944.0];
        let opt: Vec<_> = acc.iter().map(|&v| Some(v)).collect();
        assert!((unweighted_mean(&opt).unwrap() - 16.4).abs() <= 0.15);
        assert!((weighted_mean(&acc, &counts).unwrap() - 20.7).abs() <= 0.15);
        // floor count on the held-out region
        assert!((unweighted_mean(&[Some(77.6), Some(74.0), Some(50.0)]).unwrap() - 67.2).abs() <= 0.15);
    }

    #[test]
    fn report_json_round_trip() {
        let task = two_class();
        let manifest = DatasetManifest::new(&task, vec![Sample::labeled("a", 1)]).unwrap();
        let r = classification_report(&[result("a", 1)], &manifest, &task).unwrap();
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
