//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use widthtopo::morphology::erode;
use widthtopo::{NeighborhoodSpec, ScalarField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of connected components of `mask` (row-major, `width` columns),
/// with 4- or 8-connectivity.
pub fn count_components(mask: &[bool], width: usize, height: usize, eight: bool) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = ((i / width) as isize, (i % width) as isize);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= height as isize || nc >= width as isize {
                        continue;
                    }
                    let j = nr as usize * width + nc as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    count
}

/// Betti numbers of `{field >= t}`: 4-connected foreground components and
/// holes, the bounded 8-connected components of the background.
pub fn flood_betti(field: &ScalarField, t: f64) -> [usize; 2] {
    let (w, h) = field.shape();
    let fg: Vec<bool> = field.values().iter().map(|&v| v >= t).collect();
    let b0 = count_components(&fg, w, h, false);
    // pad with a background frame so the exterior is one component
    let (pw, ph) = (w + 2, h + 2);
    let mut bg = vec![true; pw * ph];
    for r in 0..h {
        for c in 0..w {
            bg[(r + 1) * pw + c + 1] = !fg[r * w + c];
        }
    }
    let b1 = count_components(&bg, pw, ph, true) - 1;
    [b0, b1]
}

/// Euler characteristic of the 4-connected cubical complex of `{field >= t}`
/// (pixels as vertices, adjacent pairs as edges, 2x2 blocks as squares).
pub fn euler_characteristic(field: &ScalarField, t: f64) -> i64 {
    let (w, h) = field.shape();
    let on = |r: usize, c: usize| field.at(r, c) >= t;
    let mut chi = 0i64;
    for r in 0..h {
        for c in 0..w {
            if !on(r, c) {
                continue;
            }
            chi += 1;
            if c + 1 < w && on(r, c + 1) {
                chi -= 1;
            }
            if r + 1 < h && on(r + 1, c) {
                chi -= 1;
            }
            if r + 1 < h && c + 1 < w && on(r, c + 1) && on(r + 1, c) && on(r + 1, c + 1) {
                chi += 1;
            }
        }
    }
    chi
}

/// Random field with at most `levels` distinct values.
pub fn quantized_field(rng: &mut impl Rng, width: usize, height: usize, levels: usize) -> ScalarField {
    let palette: Vec<f64> = (0..levels).map(|_| rng.random::<f64>()).collect();
    ScalarField::from_fn(width, height, |_, _| palette[rng.random_range(0..levels)])
}

/// Random field whose values are pairwise distinct.
pub fn distinct_field(rng: &mut impl Rng, width: usize, height: usize) -> ScalarField {
    let n = width * height;
    let mut ranks: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ranks.swap(i, rng.random_range(0..=i));
    }
    let jitter: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.5).collect();
    ScalarField::from_vec(width, height, (0..n).map(|i| (ranks[i] as f64 + jitter[i]) / n as f64).collect()).unwrap()
}

pub fn binarize(field: &ScalarField, t: f64) -> ScalarField {
    field.map(|v| if v >= t { 1.0 } else { 0.0 })
}

/// 4-connected components of the 0.5-binarized field after one erosion by
/// a 3x3 square.
pub fn components_after_erosion(field: &ScalarField) -> usize {
    let eroded = erode(&binarize(field, 0.5), NeighborhoodSpec::square(1));
    let (w, h) = eroded.shape();
    count_components(&eroded.threshold(0.5), w, h, false)
}

pub fn components(field: &ScalarField) -> usize {
    let (w, h) = field.shape();
    count_components(&field.threshold(0.5), w, h, false)
}
