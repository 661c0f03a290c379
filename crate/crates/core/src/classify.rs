//! Zero-shot image classification: score an image embedding against every
//! rendered category prompt and keep the best match.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::parallel::map_ordered;
use crate::similarity::{score_against, Embedding, ScoreVector};
use crate::store::EmbeddingBackend;
use crate::vocabulary::{TaskKind, TaskSpec};

/// One JSON-lines record of a classification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub image_id: String,
    pub task_id: String,
    pub predicted_index: usize,
    pub predicted_name: String,
    pub scores: ScoreVector,
}

/// A sample that could not be processed, with the reason.
#[derive(Debug)]
pub struct SampleFailure {
    pub image_id: String,
    pub error: Error,
}

#[derive(Debug)]
pub struct BatchOutcome<T> {
    /// Successful outputs in manifest order.
    pub results: Vec<T>,
    /// Per-sample failures in manifest order.
    pub failures: Vec<SampleFailure>,
}

impl<T> Default for BatchOutcome<T> {
    fn default() -> Self {
        BatchOutcome {
            results: Vec::new(),
            failures: Vec::new(),
        }
    }
}

/// Text embeddings of the task's rendered prompts, in category order.
pub fn prompt_embeddings(task: &TaskSpec, backend: &dyn EmbeddingBackend) -> Result<Vec<Embedding>> {
    task.prompts().iter().map(|p| backend.text_embedding(p)).collect()
}

fn classify_with(
    image_id: &str,
    image_emb: &Embedding,
    task: &TaskSpec,
    prompt_embs: &[Embedding],
) -> Result<ClassificationResult> {
    let scores = score_against(image_emb, prompt_embs)?;
    let predicted_index = scores.argmax()?;
    Ok(ClassificationResult {
        image_id: image_id.to_owned(),
        task_id: task.task_id().to_owned(),
        predicted_index,
        predicted_name: task.categories()[predicted_index].name.clone(),
        scores,
    })
}

pub fn classify_image(
    image_id: &str,
    image_emb: &Embedding,
    task: &TaskSpec,
    backend: &dyn EmbeddingBackend,
) -> Result<ClassificationResult> {
    task.expect_kind(TaskKind::Classification)?;
    classify_with(image_id, image_emb, task, &prompt_embeddings(task, backend)?)
}

/// Classifies every manifest sample from its full-image embedding.
///
/// Prompt resolution failures are fatal; per-sample failures are collected.
/// Results come back in manifest order regardless of `workers`.
pub fn classify_batch(
    manifest: &DatasetManifest,
    task: &TaskSpec,
    backend: &dyn EmbeddingBackend,
    workers: usize,
) -> Result<BatchOutcome<ClassificationResult>> {
    task.expect_kind(TaskKind::Classification)?;
    if manifest.task_id() != task.task_id() {
        return Err(Error::Manifest(format!(
            "manifest is for task `{}`, not `{}`",
            manifest.task_id(),
            task.task_id()
        )));
    }
    let prompt_embs = prompt_embeddings(task, backend)?;
    let outputs = map_ordered(manifest.samples(), workers, |s| {
        backend
            .image_embedding(&s.image_id, None)
            .and_then(|e| classify_with(&s.image_id, &e, task, &prompt_embs))
    });
    let mut outcome = BatchOutcome::default();
    for (sample, out) in manifest.samples().iter().zip(outputs) {
        match out {
            Ok(r) => outcome.results.push(r),
            Err(error) => outcome.failures.push(SampleFailure {
                image_id: sample.image_id.clone(),
                error,
            }),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Sample;
    use crate::store::{image_key, text_key, EmbeddingStore};
    use crate::vocabulary::presets;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn roof_store(vecs: [&[f32]; 3]) -> (TaskSpec, EmbeddingStore) {
        let task = presets::get(presets::ROOF_TYPE).unwrap();
        let mut store = EmbeddingStore::new(vecs[0].len()).unwrap();
        for (p, v) in task.prompts().iter().zip(vecs) {
            store.insert(text_key(p), emb(v)).unwrap();
        }
        (task, store)
    }

    #[test]
    fn self_match_wins_with_unit_score() {
        let (task, store) = roof_store([&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let r = classify_image("x", &emb(&[0.0, 1.0, 0.0]), &task, &store).unwrap();
        assert_eq!(r.predicted_name, "hipped");
        assert_eq!(r.scores.as_slice()[1], 1.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn tie_resolves_to_lowest_index() {
        let (task, store) = roof_store([&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0]]);
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let r = classify_image("x", &emb(&[h, h]), &task, &store).unwrap();
        let expect = [0.7071, 0.7071, -0.7071];
        for (s, e) in r.scores.as_slice().iter().zip(expect) {
            assert!((s - e).abs() < 1e-4, "{s} vs {e}");
        }
        assert_eq!(r.predicted_index, 0);
        assert_eq!(r.predicted_name, "gabled");
    }

    #[test]
    fn segmentation_task_is_rejected() {
        let task = presets::get(presets::FACADE).unwrap();
        let store = EmbeddingStore::new(2).unwrap();
        assert!(matches!(
            classify_image("x", &emb(&[1.0, 0.0]), &task, &store),
            Err(Error::WrongTaskKind { .. })
        ));
    }

    #[test]
    fn missing_prompt_is_reported_by_key() {
        let (task, mut store) = roof_store([&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0]]);
        store.remove(&text_key(&task.prompts()[2]));
        match classify_image("x", &emb(&[1.0, 0.0]), &task, &store) {
            Err(Error::MissingKey(k)) => assert_eq!(k, "text::a photo of a building with a flat roof"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn batch_isolates_failures() {
        let (task, mut store) = roof_store([&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0]]);
        store.insert(image_key("a", None), emb(&[1.0, 0.1])).unwrap();
        store.insert(image_key("c", None), emb(&[0.1, 1.0])).unwrap();
        let samples = ["a", "b", "c"].map(Sample::unlabeled).to_vec();
        let manifest = DatasetManifest::new(&task, samples).unwrap();
        for workers in [1, 3] {
            let out = classify_batch(&manifest, &task, &store, workers).unwrap();
            let ids: Vec<_> = out.results.iter().map(|r| r.image_id.as_str()).collect();
            assert_eq!(ids, ["a", "c"]);
            assert_eq!(out.results[1].predicted_name, "hipped");
            assert_eq!(out.failures.len(), 1);
            assert_eq!(out.failures[0].image_id, "b");
            assert!(matches!(out.failures[0].error, Error::MissingKey(_)));
        }

        let empty = DatasetManifest::new(&task, vec![]).unwrap();
        let out = classify_batch(&empty, &task, &store, 1).unwrap();
        assert!(out.results.is_empty() && out.failures.is_empty());
    }

    #[test]
    fn result_json_field_order() {
        let r = ClassificationResult {
            image_id: "a".into(),
            task_id: "t".into(),
            predicted_index: 1,
            predicted_name: "hipped".into(),
            scores: ScoreVector::new(vec![0.25, 0.5]),
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"image_id":"a","task_id":"t","predicted_index":1,"predicted_name":"hipped","scores":[0.25,0.5]}"#
        );
    }
}
