//! Pixel grids, the simplex-constrained segmentation type and neighborhood geometry.
//!
//! Every field is stored row-major. The linear index `row * width + col` is the
//! global tie-break order used by the persistence sweep, the critical-set
//! ordering and every deterministic traversal in the crate.

use crate::error::{Error, Result};

/// Per-pixel tolerance on `sum_l u_l(x) = 1` for [`SoftSegmentation`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A pixel location. Rows grow downwards, columns to the right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelIndex {
    pub row: usize,
    pub col: usize,
}

impl PixelIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn from_linear(linear: usize, width: usize) -> Self {
        Self {
            row: linear / width,
            col: linear % width,
        }
    }

    #[inline]
    pub fn linear(self, width: usize) -> usize {
        self.row * width + self.col
    }
}

/// A finite real value per pixel on a `width x height` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    /// Builds a field from row-major values.
    pub fn from_vec(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyField);
        }
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: (width, height),
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                pixel: PixelIndex::from_linear(pos, width),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        assert!(value.is_finite());
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a field by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                let v = f(row, col);
                assert!(v.is_finite(), "non-finite value at ({row}, {col})");
                values.push(v);
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the raw values. Callers must keep them finite.
    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, p: PixelIndex) -> f64 {
        self.values[p.linear(self.width)]
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, p: PixelIndex, value: f64) {
        let w = self.width;
        self.values[p.linear(w)] = value;
    }

    pub fn contains(&self, p: PixelIndex) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn pixel(&self, linear: usize) -> PixelIndex {
        PixelIndex::from_linear(linear, self.width)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.len(),
            });
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Binary mask `value >= threshold`.
    pub fn threshold(&self, threshold: f64) -> Vec<bool> {
        self.values.iter().map(|&v| v >= threshold).collect()
    }

    pub fn clamp(&mut self, lo: f64, hi: f64) {
        for v in &mut self.values {
            *v = v.clamp(lo, hi);
        }
    }
}

/// `L >= 2` channels of identical shape whose per-pixel values lie on the
/// probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftSegmentation {
    channels: Vec<ScalarField>,
}

impl SoftSegmentation {
    /// Validates the simplex invariant at [`SIMPLEX_TOLERANCE`].
    pub fn new(channels: Vec<ScalarField>) -> Result<Self> {
        let seg = Self::from_channels_unchecked(channels)?;
        seg.check_simplex(SIMPLEX_TOLERANCE)?;
        Ok(seg)
    }

    pub(crate) fn from_channels_unchecked(channels: Vec<ScalarField>) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::TooFewChannels(channels.len()));
        }
        for c in &channels[1..] {
            channels[0].check_same_shape(c)?;
        }
        Ok(Self { channels })
    }

    pub fn num_classes(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ScalarField] {
        &self.channels
    }

    pub fn channel(&self, l: usize) -> &ScalarField {
        &self.channels[l]
    }

    pub fn into_channels(self) -> Vec<ScalarField> {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    /// Largest per-pixel deviation of the channel sum from one, and the
    /// first pixel that violates `tol` (if any).
    pub fn check_simplex(&self, tol: f64) -> Result<()> {
        let n = self.channels[0].len();
        for i in 0..n {
            let mut sum = 0.0;
            for c in &self.channels {
                let v = c.values()[i];
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(self.simplex_violation(i, sum));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tol {
                return Err(self.simplex_violation(i, sum));
            }
        }
        Ok(())
    }

    fn simplex_violation(&self, i: usize, sum: f64) -> Error {
        Error::SimplexViolation {
            pixel: self.channels[0].pixel(i),
            sum,
        }
    }

    /// Per-pixel index of the largest channel (ties to the lowest class).
    pub fn argmax(&self) -> Vec<usize> {
        let n = self.channels[0].len();
        (0..n)
            .map(|i| {
                let mut best = 0;
                for (l, c) in self.channels.iter().enumerate().skip(1) {
                    if c.values()[i] > self.channels[best].values()[i] {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }
}

/// Renormalizes nonnegative channels so each pixel sums to one. Pixels where
/// every channel is zero become uniform `1/L`.
pub fn project_simplex(channels: Vec<ScalarField>) -> Result<SoftSegmentation> {
    let mut seg = SoftSegmentation::from_channels_unchecked(channels)?;
    let l = seg.channels.len();
    let n = seg.channels[0].len();
    for c in &seg.channels {
        if let Some(pos) = c.values().iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeChannel {
                pixel: c.pixel(pos),
            });
        }
    }
    for i in 0..n {
        let sum: f64 = seg.channels.iter().map(|c| c.values()[i]).sum();
        for c in &mut seg.channels {
            let v = &mut c.values_mut()[i];
            *v = if sum > 0.0 { *v / sum } else { 1.0 / l as f64 };
        }
    }
    Ok(seg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborhoodShape {
    /// Chebyshev ball: the `(2r+1) x (2r+1)` window.
    Square,
    /// Euclidean ball: offsets with `dr^2 + dc^2 <= r^2`.
    Disc,
}

impl std::str::FromStr for NeighborhoodShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "square" => Ok(Self::Square),
            "disc" => Ok(Self::Disc),
            other => Err(format!("unknown neighborhood shape {other:?} (expected square or disc)")),
        }
    }
}

/// The structuring element `B(x, r)`, clipped at the image border.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborhoodSpec {
    pub shape: NeighborhoodShape,
    pub radius: usize,
}

impl NeighborhoodSpec {
    pub const fn square(radius: usize) -> Self {
        Self {
            shape: NeighborhoodShape::Square,
            radius,
        }
    }

    pub const fn disc(radius: usize) -> Self {
        Self {
            shape: NeighborhoodShape::Disc,
            radius,
        }
    }

    #[inline]
    fn admits(&self, dr: isize, dc: isize) -> bool {
        match self.shape {
            NeighborhoodShape::Square => true,
            NeighborhoodShape::Disc => {
                let r = self.radius as isize;
                dr * dr + dc * dc <= r * r
            }
        }
    }

    /// Calls `f(linear)` for every pixel of `B(center, r)` in ascending linear
    /// order.
    #[inline]
    pub fn for_each(&self, center: PixelIndex, width: usize, height: usize, mut f: impl FnMut(usize)) {
        let r = self.radius;
        let r0 = center.row.saturating_sub(r);
        let r1 = (center.row + r).min(height - 1);
        let c0 = center.col.saturating_sub(r);
        let c1 = (center.col + r).min(width - 1);
        for row in r0..=r1 {
            let dr = row as isize - center.row as isize;
            for col in c0..=c1 {
                let dc = col as isize - center.col as isize;
                if self.admits(dr, dc) {
                    f(row * width + col);
                }
            }
        }
    }

    /// Linear indices of `B(center, r)` in ascending order.
    pub fn linear_indices(&self, center: PixelIndex, width: usize, height: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity((2 * self.radius + 1).pow(2));
        self.for_each(center, width, height, |i| out.push(i));
        out
    }
}

/// Pixels of `B(x, r)` clipped at the border, sorted by linear index.
/// Always contains `x` itself.
pub fn neighborhood(x: PixelIndex, spec: NeighborhoodSpec, width: usize, height: usize) -> Vec<PixelIndex> {
    debug_assert!(x.row < height && x.col < width);
    spec.linear_indices(x, width, height)
        .into_iter()
        .map(|i| PixelIndex::from_linear(i, width))
        .collect()
}
