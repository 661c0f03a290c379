//! Zero-shot building attribute extraction.
//!
//! Images are classified, and category-agnostic masks are labeled, by
//! matching image embeddings against text embeddings of task vocabulary
//! prompts. Encoders and mask generators run elsewhere; this crate consumes
//! their outputs (ZSBA embedding files and RLE mask files) and provides the
//! matching, composition and evaluation on top.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod classify;
pub mod cli;
pub mod error;
pub mod manifest;
pub mod mask;
pub mod metrics;
pub mod netpbm;
mod parallel;
pub mod segment;
pub mod similarity;
pub mod store;
pub mod synthetic;
pub mod vocabulary;

pub use classify::{classify_batch, classify_image, BatchOutcome, ClassificationResult, SampleFailure};
pub use error::{Error, Result};
pub use manifest::{load_manifest, DatasetManifest, Sample};
pub use mask::{load_masks, BinaryMask, MaskDir, MaskSet, MaskSource, OverlapPolicy};
pub use metrics::{classification_report, report_to_table, segmentation_report, EvalReport, UnlabeledPolicy};
pub use segment::{
    apply_mask, compose_segmentation, score_masks, segment_batch, segment_image, MaskScores, RasterImage,
    SegmentationMap, UNLABELED,
};
pub use similarity::{argmax_index, cosine_sim, l2_normalize, score_against, Embedding, ScoreVector};
pub use store::{load_embeddings, write_embeddings, EmbeddingBackend, EmbeddingStore};
pub use vocabulary::{load_tasks, TaskKind, TaskSpec};
