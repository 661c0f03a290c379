//! Hand-constructed fixtures whose answers are known analytically.
//!
//! Category prompts embed to basis vectors `e_k`. An image (or masked image)
//! of category `c` embeds to `2·e_c` plus a small off-axis component, so its
//! cosine with `e_c` strictly exceeds its cosine with every other prompt.
//! This lets every stage run end to end without model weights.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, MaskSet, OverlapPolicy};
use crate::netpbm::save_pgm;
use crate::segment::{SegmentationMap, UNLABELED};
use crate::similarity::Embedding;
use crate::store::{image_key, text_key, write_embeddings, EmbeddingStore};
use crate::vocabulary::{presets, tasks_to_json, TaskSpec};

pub const DIMENSION: usize = 8;

/// Unit basis vector `e_k` in `dim` dimensions.
pub fn basis(dim: usize, k: usize) -> Embedding {
    let mut v = vec![0.0f32; dim];
    v[k] = 1.0;
    Embedding::new(v).expect("basis vectors are finite")
}

/// An embedding whose nearest basis direction is `target`; `variant` moves
/// the off-axis component so distinct samples get distinct vectors.
pub fn embedding_near(dim: usize, target: usize, variant: usize) -> Embedding {
    let mut v = vec![0.0f32; dim];
    v[target] = 2.0;
    let spare = dim - 1;
    let off = (target + 1 + variant % spare) % dim;
    v[off] += 0.25 + 0.05 * (variant % 4) as f32;
    Embedding::new(v).expect("finite by construction")
}

/// Inserts `text::<prompt>` = `e_k` for every category of `task`.
pub fn insert_prompts(store: &mut EmbeddingStore, task: &TaskSpec) -> Result<()> {
    for (k, p) in task.prompts().iter().enumerate() {
        let key = text_key(p);
        if !store.contains_key(&key) {
            store.insert(key, basis(store.dimension(), k))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SegmentationCase {
    pub image_id: String,
    pub masks: MaskSet,
    /// Category of each mask, in mask order.
    pub mask_labels: Vec<usize>,
    pub truth: SegmentationMap,
}

/// A classification task with labeled images and a segmentation task with
/// masked images, sharing one embedding store.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub classify_task: TaskSpec,
    pub segment_task: TaskSpec,
    pub store: EmbeddingStore,
    /// `(image_id, true category)` per classification image.
    pub classify_labels: Vec<(String, usize)>,
    pub segment_cases: Vec<SegmentationCase>,
}

/// Where [`Fixture::write`] put each input.
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub root: PathBuf,
    pub tasks: PathBuf,
    pub embeddings: PathBuf,
    pub classify_manifest: PathBuf,
    pub segment_manifest: PathBuf,
    pub masks_dir: PathBuf,
}

fn rect_mask(id: &str, width: usize, height: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> BinaryMask {
    let pixels = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x0..x1).contains(&x) && (y0..y1).contains(&y)))
        .collect();
    BinaryMask {
        id: id.to_owned(),
        pixels,
    }
}

impl Fixture {
    /// Builds a fixture from explicit labels and mask layouts.
    ///
    /// `layouts` holds `(image_id, width, height, [(mask_id, x0, x1, y0, y1, label)])`.
    #[allow(clippy::type_complexity)]
    pub fn build(
        classify_task: TaskSpec,
        segment_task: TaskSpec,
        classify_labels: &[(&str, usize)],
        layouts: &[(&str, usize, usize, Vec<(&str, usize, usize, usize, usize, usize)>)],
    ) -> Result<Self> {
        let mut store = EmbeddingStore::new(DIMENSION)?;
        insert_prompts(&mut store, &classify_task)?;
        insert_prompts(&mut store, &segment_task)?;

        for (i, (id, label)) in classify_labels.iter().enumerate() {
            store.insert(image_key(id, None), embedding_near(DIMENSION, *label, i))?;
        }

        let mut segment_cases = Vec::new();
        for (id, width, height, rects) in layouts {
            let masks: Vec<BinaryMask> = rects
                .iter()
                .map(|&(m, x0, x1, y0, y1, _)| rect_mask(m, *width, *height, x0, x1, y0, y1))
                .collect();
            let mask_labels: Vec<usize> = rects.iter().map(|r| r.5).collect();
            let mut truth = vec![UNLABELED; width * height];
            for (mask, &label) in masks.iter().zip(&mask_labels) {
                for (t, _) in truth.iter_mut().zip(&mask.pixels).filter(|(_, &p)| p) {
                    *t = label as u8;
                }
            }
            store.insert(image_key(id, None), embedding_near(DIMENSION, mask_labels[0], 0))?;
            for (j, (mask, &label)) in masks.iter().zip(&mask_labels).enumerate() {
                store.insert(image_key(id, Some(&mask.id)), embedding_near(DIMENSION, label, j))?;
            }
            segment_cases.push(SegmentationCase {
                image_id: (*id).to_owned(),
                masks: MaskSet::new(*width, *height, masks, OverlapPolicy::Strict)?,
                mask_labels,
                truth: SegmentationMap::new(*width, *height, truth)?,
            });
        }

        Ok(Fixture {
            classify_task,
            segment_task,
            store,
            classify_labels: classify_labels.iter().map(|(i, l)| ((*i).to_owned(), *l)).collect(),
            segment_cases,
        })
    }

    /// Roof type over six images, facade parsing over two 6×4 images with
    /// three masks each (some pixels left uncovered).
    pub fn buildings() -> Self {
        let roof = presets::get(presets::ROOF_TYPE).expect("preset");
        let facade = presets::get(presets::FACADE).expect("preset");
        let labels = [
            ("house_001", 0),
            ("house_002", 1),
            ("house_003", 2),
            ("house_004", 0),
            ("house_005", 1),
            ("house_006", 2),
        ];
        // facade categories: roof 0, facade 1, window 2, door 3
        let layouts = [
            (
                "facade_a",
                6,
                4,
                vec![("m0", 0, 6, 0, 1, 0), ("m1", 0, 4, 1, 3, 1), ("m2", 4, 6, 1, 3, 2)],
            ),
            (
                "facade_b",
                6,
                4,
                vec![("m0", 0, 6, 0, 1, 1), ("m1", 0, 2, 1, 4, 3), ("m2", 3, 6, 1, 3, 2)],
            ),
        ];
        Fixture::build(roof, facade, &labels, &layouts).expect("fixture is consistent")
    }

    /// Every store key a classify or segment run over this fixture reads.
    pub fn required_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self
            .classify_task
            .prompts()
            .iter()
            .chain(self.segment_task.prompts().iter())
            .map(|p| text_key(p))
            .collect();
        keys.extend(self.classify_labels.iter().map(|(id, _)| image_key(id, None)));
        for case in &self.segment_cases {
            keys.extend(
                case.masks
                    .masks()
                    .iter()
                    .map(|m| image_key(&case.image_id, Some(&m.id))),
            );
        }
        keys.sort();
        keys.dedup();
        keys
    }

    /// Writes tasks, embeddings, manifests, mask files and ground-truth maps under `root`.
    pub fn write(&self, root: &Path) -> Result<FixturePaths> {
        let io = |p: &Path, e| Error::io(p, e);
        let masks_dir = root.join("masks");
        let gt_dir = root.join("gt");
        for d in [root, masks_dir.as_path(), gt_dir.as_path()] {
            std::fs::create_dir_all(d).map_err(|e| io(d, e))?;
        }
        let paths = FixturePaths {
            root: root.to_owned(),
            tasks: root.join("tasks.json"),
            embeddings: root.join("embeddings.zsba"),
            classify_manifest: root.join("classify_manifest.json"),
            segment_manifest: root.join("segment_manifest.json"),
            masks_dir,
        };
        let write = |p: &Path, s: String| std::fs::write(p, s).map_err(|e| io(p, e));

        write(
            &paths.tasks,
            tasks_to_json(&[self.classify_task.clone(), self.segment_task.clone()]),
        )?;
        write_embeddings(&self.store, &paths.embeddings)?;

        let samples: Vec<_> = self
            .classify_labels
            .iter()
            .map(|(id, l)| json!({"image_id": id, "ground_truth": self.classify_task.categories()[*l].name}))
            .collect();
        write(
            &paths.classify_manifest,
            json!({"task_id": self.classify_task.task_id(), "samples": samples}).to_string(),
        )?;

        let mut samples = Vec::new();
        for case in &self.segment_cases {
            write(
                &paths.masks_dir.join(format!("{}.json", case.image_id)),
                case.masks.to_json(),
            )?;
            save_pgm(&case.truth, gt_dir.join(format!("{}.pgm", case.image_id)))?;
            samples.push(json!({"image_id": case.image_id, "gt_map": format!("gt/{}.pgm", case.image_id)}));
        }
        write(
            &paths.segment_manifest,
            json!({"task_id": self.segment_task.task_id(), "samples": samples}).to_string(),
        )?;
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::{argmax_index, score_against};

    #[test]
    fn near_embeddings_point_at_their_target() {
        let vocab: Vec<_> = (0..4).map(|k| basis(DIMENSION, k)).collect();
        for target in 0..4 {
            for variant in 0..10 {
                let s = score_against(&embedding_near(DIMENSION, target, variant), &vocab).unwrap();
                assert_eq!(argmax_index(s.as_slice()).unwrap(), target);
            }
        }
    }

    #[test]
    fn buildings_fixture_shape() {
        let f = Fixture::buildings();
        assert_eq!(f.classify_labels.len(), 6);
        assert_eq!(f.segment_cases.len(), 2);
        assert!(f.segment_cases.iter().all(|c| c.masks.len() == 3));
        assert!(f.required_keys().iter().all(|k| f.store.contains_key(k)));
        let mut seen: Vec<_> = f.segment_cases.iter().flat_map(|c| c.mask_labels.clone()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen, [0, 1, 2, 3]);
    }
}
