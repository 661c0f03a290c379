//! Category-agnostic binary masks and their run-length encoded JSON form.
//!
//! Mask file:
//!
//! ```json
//! {"width": 4, "height": 2, "masks": [{"id": "m0", "rle": [0, 4, 4]}]}
//! ```
//!
//! RLE counts are row-major and alternate zero-runs and one-runs, starting
//! with a (possibly empty) zero-run. Counts sum to `width * height` and no
//! run after the first is empty.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do when two masks claim the same pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapPolicy {
    /// Reject the mask set.
    #[default]
    Strict,
    /// Give each contested pixel to the largest claiming mask (lowest index
    /// on equal area) and drop masks left empty.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub id: String,
    /// Row-major, `width * height` entries.
    pub pixels: Vec<bool>,
}

impl BinaryMask {
    pub fn area(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }
}

/// Canonical run-length encoding of a row-major pixel sequence.
pub fn rle_encode(pixels: &[bool]) -> Vec<u64> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for &p in pixels {
        if p == current {
            run += 1;
        } else {
            counts.push(run);
            current = p;
            run = 1;
        }
    }
    if run > 0 || counts.is_empty() {
        counts.push(run);
    }
    counts
}

/// Decodes canonical RLE `counts` into exactly `len` pixels.
pub fn rle_decode(mask_id: &str, counts: &[u64], len: usize) -> Result<Vec<bool>> {
    let total = counts
        .iter()
        .try_fold(0u64, |acc, &c| acc.checked_add(c))
        .unwrap_or(u64::MAX);
    if total != len as u64 {
        return Err(Error::RleLengthMismatch {
            mask_id: mask_id.to_owned(),
            expected: len as u64,
            found: total,
        });
    }
    if let Some(pos) = counts.iter().skip(1).position(|&c| c == 0) {
        return Err(Error::NonCanonicalRle {
            mask_id: mask_id.to_owned(),
            reason: format!("empty run at position {}", pos + 1),
        });
    }
    let mut pixels = Vec::with_capacity(len);
    for (i, &c) in counts.iter().enumerate() {
        pixels.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
    }
    Ok(pixels)
}

/// Non-overlapping masks over a `width × height` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    width: usize,
    height: usize,
    masks: Vec<BinaryMask>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskFile {
    width: usize,
    height: usize,
    masks: Vec<MaskRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRecord {
    id: String,
    rle: Vec<u64>,
}

impl MaskSet {
    pub fn new(width: usize, height: usize, masks: Vec<BinaryMask>, policy: OverlapPolicy) -> Result<Self> {
        let n = pixel_count(width, height)?;
        let mut ids = HashSet::new();
        for m in &masks {
            if !ids.insert(m.id.as_str()) {
                return Err(Error::DuplicateMaskId(m.id.clone()));
            }
            if m.pixels.len() != n {
                return Err(Error::RleLengthMismatch {
                    mask_id: m.id.clone(),
                    expected: n as u64,
                    found: m.pixels.len() as u64,
                });
            }
            if m.area() == 0 {
                return Err(Error::EmptyMask(m.id.clone()));
            }
        }
        let masks = match policy {
            OverlapPolicy::Strict => {
                check_disjoint(width, &masks)?;
                masks
            }
            OverlapPolicy::Lenient => resolve_overlaps(n, masks),
        };
        Ok(MaskSet { width, height, masks })
    }

    /// A set with no masks.
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        pixel_count(width, height)?;
        Ok(MaskSet {
            width,
            height,
            masks: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn masks(&self) -> &[BinaryMask] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Index of the mask covering each pixel, if any.
    pub fn owners(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.width * self.height];
        for (j, m) in self.masks.iter().enumerate() {
            for (o, _) in owner.iter_mut().zip(&m.pixels).filter(|(_, &p)| p) {
                *o = Some(j);
            }
        }
        owner
    }

    pub fn from_json(json: &str, origin: &Path, policy: OverlapPolicy) -> Result<Self> {
        let file: MaskFile = serde_json::from_str(json).map_err(|e| Error::parse(origin, &e))?;
        let n = pixel_count(file.width, file.height)?;
        let masks = file
            .masks
            .into_iter()
            .map(|r| {
                let pixels = rle_decode(&r.id, &r.rle, n)?;
                Ok(BinaryMask { id: r.id, pixels })
            })
            .collect::<Result<Vec<_>>>()?;
        MaskSet::new(file.width, file.height, masks, policy)
    }

    pub fn to_json(&self) -> String {
        let file = MaskFile {
            width: self.width,
            height: self.height,
            masks: self
                .masks
                .iter()
                .map(|m| MaskRecord {
                    id: m.id.clone(),
                    rle: rle_encode(&m.pixels),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("mask records always serialize")
    }
}

fn pixel_count(width: usize, height: usize) -> Result<usize> {
    match width.checked_mul(height) {
        Some(n) if width > 0 && height > 0 => Ok(n),
        _ => Err(Error::InvalidDimensions { width, height }),
    }
}

fn check_disjoint(width: usize, masks: &[BinaryMask]) -> Result<()> {
    let Some(first) = masks.first() else {
        return Ok(());
    };
    let mut owner: Vec<Option<usize>> = vec![None; first.pixels.len()];
    for (j, m) in masks.iter().enumerate() {
        for (px, _) in m.pixels.iter().enumerate().filter(|(_, &p)| p) {
            if let Some(prev) = owner[px] {
                return Err(Error::OverlappingMasks {
                    first: masks[prev].id.clone(),
                    second: m.id.clone(),
                    x: px % width,
                    y: px / width,
                });
            }
            owner[px] = Some(j);
        }
    }
    Ok(())
}

fn resolve_overlaps(n: usize, mut masks: Vec<BinaryMask>) -> Vec<BinaryMask> {
    let areas: Vec<usize> = masks.iter().map(BinaryMask::area).collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut contested = 0usize;
    for (j, m) in masks.iter().enumerate() {
        for (px, _) in m.pixels.iter().enumerate().filter(|(_, &p)| p) {
            owner[px] = match owner[px] {
                None => Some(j),
                Some(prev) => {
                    contested += 1;
                    // Earlier masks win equal-area contests.
                    if areas[j] > areas[prev] {
                        Some(j)
                    } else {
                        Some(prev)
                    }
                }
            };
        }
    }
    if contested == 0 {
        return masks;
    }
    warn!("lenient mode: reassigned {contested} contested pixel claims to the larger mask");
    for (j, m) in masks.iter_mut().enumerate() {
        for (p, o) in m.pixels.iter_mut().zip(&owner) {
            *p = *p && *o == Some(j);
        }
    }
    masks.retain(|m| {
        let keep = m.area() > 0;
        if !keep {
            warn!("lenient mode: mask `{}` lost all its pixels and was dropped", m.id);
        }
        keep
    });
    masks
}

pub fn load_masks(path: impl AsRef<Path>, policy: OverlapPolicy) -> Result<MaskSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MaskSet::from_json(&text, path, policy)
}

/// Per-image source of mask sets.
pub trait MaskSource: Sync {
    fn masks(&self, image_id: &str) -> Result<MaskSet>;
}

/// Reads `<dir>/<image_id>.json`.
#[derive(Debug, Clone)]
pub struct MaskDir {
    pub dir: PathBuf,
    pub policy: OverlapPolicy,
}

impl MaskDir {
    pub fn new(dir: impl Into<PathBuf>, policy: OverlapPolicy) -> Self {
        MaskDir {
            dir: dir.into(),
            policy,
        }
    }

    pub fn path_for(&self, image_id: &str) -> PathBuf {
        self.dir.join(format!("{image_id}.json"))
    }
}

impl MaskSource for MaskDir {
    fn masks(&self, image_id: &str) -> Result<MaskSet> {
        load_masks(self.path_for(image_id), self.policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(id: &str, bits: &[u8]) -> BinaryMask {
        BinaryMask {
            id: id.into(),
            pixels: bits.iter().map(|&b| b == 1).collect(),
        }
    }

    #[test]
    fn decode_definitional_example() {
        assert_eq!(rle_decode("m", &[0, 2, 2], 4).unwrap(), [true, true, false, false]);
        assert_eq!(rle_encode(&[true, true, false, false]), [0, 2, 2]);
        assert_eq!(rle_encode(&[false, false, true, false]), [2, 1, 1]);
        assert_eq!(rle_encode(&[false; 3]), [3]);
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(
            rle_decode("m3", &[1, 2], 4),
            Err(Error::RleLengthMismatch {
                expected: 4,
                found: 3,
                ..
            })
        ));
        assert!(matches!(
            rle_decode("m", &[1, 0, 3], 4),
            Err(Error::NonCanonicalRle { .. })
        ));
        assert!(matches!(
            rle_decode("m", &[u64::MAX, 2], 4),
            Err(Error::RleLengthMismatch { .. })
        ));
    }

    #[test]
    fn strict_rejects_overlap() {
        let json = r#"{"width":2,"height":2,"masks":[{"id":"a","rle":[0,2,2]},{"id":"b","rle":[1,1,2]}]}"#;
        match MaskSet::from_json(json, Path::new("m.json"), OverlapPolicy::Strict) {
            Err(Error::OverlappingMasks { first, second, x, y }) => {
                assert_eq!((first.as_str(), second.as_str(), x, y), ("a", "b", 1, 0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lenient_gives_pixel_to_larger_mask() {
        let big = mask("big", &[1, 1, 1, 0]);
        let small = mask("small", &[0, 0, 1, 1]);
        let set = MaskSet::new(2, 2, vec![small, big], OverlapPolicy::Lenient).unwrap();
        assert_eq!(set.masks()[0], mask("small", &[0, 0, 0, 1]));
        assert_eq!(set.masks()[1], mask("big", &[1, 1, 1, 0]));

        // Fully nested smaller mask disappears.
        let inner = mask("inner", &[1, 0, 0, 0]);
        let outer = mask("outer", &[1, 1, 0, 0]);
        let set = MaskSet::new(2, 2, vec![inner, outer], OverlapPolicy::Lenient).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.masks()[0].id, "outer");

        // Equal areas: the earlier mask keeps the pixel.
        let a = mask("a", &[1, 1, 0, 0]);
        let b = mask("b", &[0, 1, 1, 0]);
        let set = MaskSet::new(2, 2, vec![a, b], OverlapPolicy::Lenient).unwrap();
        assert_eq!(set.masks()[1], mask("b", &[0, 0, 1, 0]));
    }

    #[test]
    fn invariant_violations() {
        assert!(matches!(
            MaskSet::new(2, 1, vec![mask("e", &[0, 0])], OverlapPolicy::Strict),
            Err(Error::EmptyMask(_))
        ));
        assert!(matches!(
            MaskSet::new(
                2,
                1,
                vec![mask("a", &[1, 0]), mask("a", &[0, 1])],
                OverlapPolicy::Strict
            ),
            Err(Error::DuplicateMaskId(_))
        ));
        assert!(matches!(MaskSet::empty(0, 3), Err(Error::InvalidDimensions { .. })));
        let json = r#"{"width":2,"height":2,"masks":[{"id":"a","rle":[0,2]}]}"#;
        assert!(matches!(
            MaskSet::from_json(json, Path::new("m"), OverlapPolicy::Strict),
            Err(Error::RleLengthMismatch { .. })
        ));
        assert!(matches!(
            MaskSet::from_json("{\"width\":2}", Path::new("m"), OverlapPolicy::Strict),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn owners_and_json_round_trip() {
        let set = MaskSet::new(
            3,
            1,
            vec![mask("a", &[1, 0, 0]), mask("b", &[0, 0, 1])],
            OverlapPolicy::Strict,
        )
        .unwrap();
        assert_eq!(set.owners(), [Some(0), None, Some(1)]);
        let back = MaskSet::from_json(&set.to_json(), Path::new("x"), OverlapPolicy::Strict).unwrap();
        assert_eq!(back, set);
    }

    proptest! {
        #[test]
        fn rle_round_trip(pixels in proptest::collection::vec(any::<bool>(), 1..200)) {
            let counts = rle_encode(&pixels);
            prop_assert_eq!(counts.iter().sum::<u64>(), pixels.len() as u64);
            prop_assert!(counts.iter().skip(1).all(|&c| c > 0));
            let decoded = rle_decode("m", &counts, pixels.len()).unwrap();
            prop_assert_eq!(&decoded, &pixels);
            prop_assert_eq!(rle_encode(&decoded), counts);
        }
    }
}
