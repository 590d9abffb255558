//! Truncated Gaussian-mixture pairwise weights
//! `w(x, y) = sum_l omega0_l exp(-|I(x) - I(y)|^2 / alpha1_l - |x - y|^2 / alpha2_l)
//!          + omega1_l exp(-|x - y|^2 / alpha3_l)`,
//! set to zero when `|x - y|_inf > window`.

use crate::error::{Error, Result};
use crate::grid::{PixelIndex, ScalarField};
use crate::par;

/// One mixture component: an appearance kernel and a smoothness kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelComponent {
    pub omega0: f64,
    pub omega1: f64,
    /// Intensity bandwidth of the appearance kernel.
    pub alpha1: f64,
    /// Spatial bandwidth of the appearance kernel.
    pub alpha2: f64,
    /// Spatial bandwidth of the smoothness kernel.
    pub alpha3: f64,
}

impl KernelComponent {
    /// Spatial Gaussian only (`omega0 = 0`, `omega1 = 1`).
    pub fn gaussian(alpha3: f64) -> Self {
        Self {
            omega0: 0.0,
            omega1: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3,
        }
    }

    #[inline]
    fn eval(&self, di2: f64, d2: f64) -> f64 {
        let mut w = 0.0;
        if self.omega0 != 0.0 {
            w += self.omega0 * (-di2 / self.alpha1 - d2 / self.alpha2).exp();
        }
        if self.omega1 != 0.0 {
            w += self.omega1 * (-d2 / self.alpha3).exp();
        }
        w
    }
}

pub const DEFAULT_WINDOW: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightModel {
    pub components: Vec<KernelComponent>,
    pub window: usize,
}

impl WeightModel {
    pub fn new(components: Vec<KernelComponent>, window: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("weight model needs at least one component".into()));
        }
        if window == 0 {
            return Err(Error::Config("weights.window must be at least 1".into()));
        }
        for c in &components {
            if c.omega0 < 0.0 || c.omega1 < 0.0 {
                return Err(Error::Config("omega0 and omega1 must be nonnegative".into()));
            }
            if !(c.alpha1 > 0.0 && c.alpha2 > 0.0 && c.alpha3 > 0.0) {
                return Err(Error::Config("alpha1, alpha2 and alpha3 must be positive".into()));
            }
        }
        Ok(Self { components, window })
    }

    /// `w(x, y)` evaluated directly on `image`.
    pub fn weight(&self, image: &ScalarField, x: PixelIndex, y: PixelIndex) -> f64 {
        let dr = x.row.abs_diff(y.row);
        let dc = x.col.abs_diff(y.col);
        if dr.max(dc) > self.window {
            return 0.0;
        }
        let d2 = (dr * dr + dc * dc) as f64;
        let di = image.get(x) - image.get(y);
        self.components.iter().map(|c| c.eval(di * di, d2)).sum()
    }
}

/// Dense per-pixel stencils of `w` over the `(2R+1)^2` window.
#[derive(Clone, Debug)]
pub struct PairwiseWeights {
    width: usize,
    height: usize,
    window: usize,
    /// `stencil[i * span^2 + k]` is the weight from pixel `i` to its `k`-th
    /// offset; zero outside the image.
    stencil: Vec<f64>,
    row_sums: Vec<f64>,
}

impl PairwiseWeights {
    pub fn new(model: &WeightModel, image: &ScalarField) -> Self {
        let (w, h) = image.shape();
        let r = model.window;
        let span = 2 * r + 1;
        let per = span * span;
        let v = image.values();
        let mut stencil = vec![0.0; w * h * per];
        for (i, chunk) in stencil.chunks_mut(per).enumerate() {
            let (row, col) = (i / w, i % w);
            for (k, slot) in chunk.iter_mut().enumerate() {
                let (dr, dc) = ((k / span) as isize - r as isize, (k % span) as isize - r as isize);
                let (yr, yc) = (row as isize + dr, col as isize + dc);
                if yr < 0 || yc < 0 || yr >= h as isize || yc >= w as isize {
                    continue;
                }
                let j = yr as usize * w + yc as usize;
                let d2 = (dr * dr + dc * dc) as f64;
                let di = v[i] - v[j];
                *slot = model.components.iter().map(|c| c.eval(di * di, d2)).sum();
            }
        }
        let mut weights = Self {
            width: w,
            height: h,
            window: r,
            stencil,
            row_sums: Vec::new(),
        };
        weights.row_sums = weights.apply(&vec![1.0; w * h]);
        weights
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// `w(x, y)` from the stencil.
    pub fn get(&self, x: PixelIndex, y: PixelIndex) -> f64 {
        let r = self.window as isize;
        let dr = y.row as isize - x.row as isize;
        let dc = y.col as isize - x.col as isize;
        if dr.abs() > r || dc.abs() > r {
            return 0.0;
        }
        let span = 2 * self.window + 1;
        let k = (dr + r) as usize * span + (dc + r) as usize;
        self.stencil[x.linear(self.width) * span * span + k]
    }

    /// `sum_y w(x, y)` for every `x`.
    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// `(W f)(x) = sum_y w(x, y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        assert_eq!(f.len(), w * h);
        let r = self.window;
        let span = 2 * r + 1;
        let per = span * span;
        par::map_indices(w * h, |i| {
            let (row, col) = (i / w, i % w);
            let weights = &self.stencil[i * per..(i + 1) * per];
            let r0 = row.saturating_sub(r);
            let r1 = (row + r).min(h - 1);
            let c0 = col.saturating_sub(r);
            let c1 = (col + r).min(w - 1);
            let mut acc = 0.0;
            for yr in r0..=r1 {
                let krow = (yr + r - row) * span;
                for yc in c0..=c1 {
                    acc += weights[krow + yc + r - col] * f[yr * w + yc];
                }
            }
            acc
        })
    }
}
