//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.

#![allow(dead_code)]

use std::path::Path;

use rand::Rng;

/// Plain cosine similarity, straight from the definition.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Per-pixel label oracle: collect the score rows of every mask covering the
/// pixel and take the argmax over categories (first maximum wins). Pixels
/// covered by no mask get 255.
pub fn brute_force_labels(width: usize, height: usize, masks: &[Vec<bool>], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let px = y * width + x;
            let mut best: Option<(f64, usize)> = None;
            for (j, m) in masks.iter().enumerate() {
                if !m[px] {
                    continue;
                }
                for (k, &r) in rows[j].iter().enumerate() {
                    if best.is_none_or(|(b, _)| r > b) {
                        best = Some((r, k));
                    }
                }
            }
            out.push(best.map_or(255, |(_, k)| k as u8));
        }
    }
    out
}

/// ZSBA bytes assembled by hand.
pub fn zsba_bytes(dim: u32, records: &[(String, Vec<f32>)]) -> Vec<u8> {
    let mut b = b"ZSBA".to_vec();
    for v in [1u32, dim, records.len() as u32] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for (k, vals) in records {
        b.extend_from_slice(&(k.len() as u32).to_le_bytes());
        b.extend_from_slice(k.as_bytes());
        for v in vals {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

/// Random non-overlapping masks: each pixel is given to one of `n_masks`
/// masks or left uncovered; masks that end up empty are dropped.
pub fn random_partition<R: Rng>(rng: &mut R, width: usize, height: usize, n_masks: usize) -> Vec<Vec<bool>> {
    let owner: Vec<Option<usize>> = (0..width * height)
        .map(|_| {
            let o = rng.gen_range(0..=n_masks);
            (o < n_masks).then_some(o)
        })
        .collect();
    (0..n_masks)
        .map(|j| owner.iter().map(|o| *o == Some(j)).collect::<Vec<bool>>())
        .filter(|m| m.iter().any(|&p| p))
        .collect()
}

pub fn random_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    }
}

pub fn path_str(p: &Path) -> String {
    p.to_str().expect("utf-8 temp path").to_owned()
}

/// Runs the CLI in-process, returning (exit code, stdout, stderr).
pub fn zsba(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("zsba").chain(args.iter().copied());
    let code = zsba::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
