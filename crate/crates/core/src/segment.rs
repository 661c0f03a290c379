//! Zero-shot semantic segmentation by mask captioning.
//!
//! Each category-agnostic mask is labeled with the category whose prompt
//! embedding is most similar to the masked-image embedding, then the labels
//! are painted back onto the pixel grid. Since masks never overlap, labeling
//! once per mask gives the same map as a per-pixel argmax over covering
//! masks.

use crate::classify::{prompt_embeddings, BatchOutcome, SampleFailure};
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::mask::{BinaryMask, MaskSet, MaskSource};
use crate::parallel::map_ordered;
use crate::similarity::{score_against, ScoreVector};
use crate::store::EmbeddingBackend;
use crate::vocabulary::{TaskKind, TaskSpec};

/// Label value for pixels no mask covers.
pub const UNLABELED: u8 = 255;

/// Categories addressable by an 8-bit map with a reserved sentinel.
pub const MAX_CATEGORIES: usize = UNLABELED as usize;

/// An 8-bit RGB image, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or(Error::InvalidDimensions { width, height })?;
        if pixels.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height}x3 image needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Zeroes every pixel outside `mask`.
pub fn apply_mask(image: &RasterImage, mask: &BinaryMask) -> Result<RasterImage> {
    let n = image.width * image.height;
    if mask.pixels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mask.pixels.len(),
        });
    }
    let pixels = image
        .pixels
        .chunks_exact(3)
        .zip(&mask.pixels)
        .flat_map(|(px, &keep)| if keep { [px[0], px[1], px[2]] } else { [0; 3] })
        .collect();
    Ok(RasterImage {
        width: image.width,
        height: image.height,
        pixels,
    })
}

/// Mask-by-category similarity rows and each mask's winning category.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskScores {
    rows: Vec<ScoreVector>,
    labels: Vec<usize>,
}

impl MaskScores {
    /// Builds from per-mask rows, which must share one non-zero width.
    pub fn from_rows(rows: Vec<ScoreVector>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(Error::ShapeMismatch(format!(
                    "score rows of length {} and {}",
                    first.len(),
                    bad.len()
                )));
            }
        }
        let labels = rows.iter().map(ScoreVector::argmax).collect::<Result<_>>()?;
        Ok(MaskScores { rows, labels })
    }

    pub fn rows(&self) -> &[ScoreVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-pixel category indices with [`UNLABELED`] as the sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl SegmentationMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if width.checked_mul(height) != Some(labels.len()) {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} map needs {} labels, got {}",
                width.saturating_mul(height),
                labels.len()
            )));
        }
        Ok(SegmentationMap { width, height, labels })
    }

    pub fn unlabeled(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![UNLABELED; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == UNLABELED).count()
    }
}

fn check_label_capacity(task: &TaskSpec) -> Result<()> {
    if task.len() > MAX_CATEGORIES {
        return Err(Error::TooManyCategories(task.len()));
    }
    Ok(())
}

/// Similarity of every mask's masked-image embedding to every category prompt.
pub fn score_masks(
    image_id: &str,
    masks: &MaskSet,
    task: &TaskSpec,
    backend: &dyn EmbeddingBackend,
) -> Result<MaskScores> {
    task.expect_kind(TaskKind::Segmentation)?;
    check_label_capacity(task)?;
    let prompt_embs = prompt_embeddings(task, backend)?;
    score_masks_with(image_id, masks, backend, &prompt_embs)
}

fn score_masks_with(
    image_id: &str,
    masks: &MaskSet,
    backend: &dyn EmbeddingBackend,
    prompt_embs: &[crate::similarity::Embedding],
) -> Result<MaskScores> {
    let rows = masks
        .masks()
        .iter()
        .map(|m| {
            let e = backend.image_embedding(image_id, Some(&m.id))?;
            score_against(&e, prompt_embs)
        })
        .collect::<Result<Vec<_>>>()?;
    MaskScores::from_rows(rows)
}

/// Paints each mask's winning label onto its pixels; uncovered pixels stay [`UNLABELED`].
pub fn compose_segmentation(masks: &MaskSet, scores: &MaskScores) -> Result<SegmentationMap> {
    if scores.len() != masks.len() {
        return Err(Error::RowCountMismatch {
            rows: scores.len(),
            masks: masks.len(),
        });
    }
    let mut labels = vec![UNLABELED; masks.width() * masks.height()];
    for (mask, &label) in masks.masks().iter().zip(scores.labels()) {
        if label >= MAX_CATEGORIES {
            return Err(Error::TooManyCategories(label + 1));
        }
        for (out, _) in labels.iter_mut().zip(&mask.pixels).filter(|(_, &p)| p) {
            *out = label as u8;
        }
    }
    SegmentationMap::new(masks.width(), masks.height(), labels)
}

pub fn segment_image(
    image_id: &str,
    masks: &MaskSet,
    task: &TaskSpec,
    backend: &dyn EmbeddingBackend,
) -> Result<SegmentationMap> {
    compose_segmentation(masks, &score_masks(image_id, masks, task, backend)?)
}

/// A segmented manifest sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedImage {
    pub image_id: String,
    pub map: SegmentationMap,
}

/// Segments every manifest sample with masks from `source`.
///
/// Prompt resolution failures are fatal; per-image failures (missing masks,
/// overlapping masks, missing masked-image embeddings) are collected.
pub fn segment_batch(
    manifest: &DatasetManifest,
    task: &TaskSpec,
    backend: &dyn EmbeddingBackend,
    source: &dyn MaskSource,
    workers: usize,
) -> Result<BatchOutcome<SegmentedImage>> {
    task.expect_kind(TaskKind::Segmentation)?;
    check_label_capacity(task)?;
    let prompt_embs = prompt_embeddings(task, backend)?;
    let outputs = map_ordered(manifest.samples(), workers, |s| {
        let masks = source.masks(&s.image_id)?;
        let scores = score_masks_with(&s.image_id, &masks, backend, &prompt_embs)?;
        compose_segmentation(&masks, &scores)
    });
    let mut outcome = BatchOutcome::default();
    for (sample, out) in manifest.samples().iter().zip(outputs) {
        match out {
            Ok(map) => outcome.results.push(SegmentedImage {
                image_id: sample.image_id.clone(),
                map,
            }),
            Err(error) => outcome.failures.push(SampleFailure {
                image_id: sample.image_id.clone(),
                error,
            }),
        }
    }
    Ok(outcome)
}
