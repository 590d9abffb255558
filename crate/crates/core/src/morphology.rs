//! Flat grayscale morphology and its entropy-regularized smooth counterpart.
//!
//! The smooth dilation at `x` is the log-sum-exp
//! `eps * ln sum_{y in B(x,r)} exp(u(y) / eps)`, which equals
//! `<k_M, u> - eps <k_M, ln k_M>` for the softmax kernel `k_M`. It lies in
//! `[max, max + eps ln n]` where `n = |B(x,r)|`. Smooth erosion is defined
//! as `-dilation(-u)` and is evaluated with exactly the same floating-point
//! operations on the negated values.
//!
//! Sums over the structuring element are unweighted (unit pixel area) and the
//! element is clipped at the image border.

use crate::grid::{NeighborhoodSpec, PixelIndex, ScalarField};
use crate::par;

/// Smoothing strength and structuring element for the soft operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothParams {
    pub epsilon: f64,
    pub nb: NeighborhoodSpec,
}

impl SmoothParams {
    pub fn new(epsilon: f64, nb: NeighborhoodSpec) -> Self {
        assert!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive");
        Self { epsilon, nb }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMode {
    /// Softmin kernel `k_m`, weights `exp(-u/eps)`.
    Min,
    /// Softmax kernel `k_M`, weights `exp(u/eps)`.
    Max,
}

impl KernelMode {
    #[inline]
    fn sign(self) -> f64 {
        match self {
            Self::Max => 1.0,
            Self::Min => -1.0,
        }
    }
}

fn window_fold(field: &ScalarField, nb: NeighborhoodSpec, pick: fn(f64, f64) -> f64, init: f64) -> ScalarField {
    let (w, h) = field.shape();
    let v = field.values();
    let out = par::map_indices(field.len(), |i| {
        let mut acc = init;
        nb.for_each(PixelIndex::from_linear(i, w), w, h, |j| acc = pick(acc, v[j]));
        acc
    });
    ScalarField::from_vec(w, h, out).expect("window fold preserves shape")
}

/// Per-pixel minimum over `B(x, r)`.
pub fn erode(field: &ScalarField, nb: NeighborhoodSpec) -> ScalarField {
    window_fold(field, nb, f64::min, f64::INFINITY)
}

/// Per-pixel maximum over `B(x, r)`.
pub fn dilate(field: &ScalarField, nb: NeighborhoodSpec) -> ScalarField {
    window_fold(field, nb, f64::max, f64::NEG_INFINITY)
}

/// `u - erode(u)`.
pub fn internal_gradient(field: &ScalarField, nb: NeighborhoodSpec) -> ScalarField {
    field.zip_map(&erode(field, nb), |u, e| u - e).unwrap()
}

/// `dilate(u) - u`.
pub fn external_gradient(field: &ScalarField, nb: NeighborhoodSpec) -> ScalarField {
    dilate(field, nb).zip_map(field, |d, u| d - u).unwrap()
}

/// Shifted log-sum-exp of `sign * u` over the window: returns
/// `(shift, sum)` with `shift = max(sign * u)` and
/// `sum = sum exp((sign * u - shift) / eps)`, so that the soft maximum of
/// `sign * u` is `shift + eps * ln(sum)`.
#[inline]
fn shifted_lse(values: &[f64], window: &[usize], sign: f64, eps: f64) -> (f64, f64) {
    let shift = window
        .iter()
        .map(|&j| sign * values[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let sum = window
        .iter()
        .map(|&j| ((sign * values[j] - shift) / eps).exp())
        .sum();
    (shift, sum)
}

#[inline]
pub(crate) fn soft_extremum_in(values: &[f64], window: &[usize], mode: KernelMode, eps: f64) -> f64 {
    let sign = mode.sign();
    let (shift, sum) = shifted_lse(values, window, sign, eps);
    sign * (shift + eps * sum.ln())
}

/// Softmax (`Max`) or softmin (`Min`) weights of `u / eps` over `B(x, r)`,
/// as `(pixel, weight)` in ascending linear order. Weights sum to one.
pub fn smooth_kernel(field: &ScalarField, x: PixelIndex, params: &SmoothParams, mode: KernelMode) -> Vec<(PixelIndex, f64)> {
    let (w, h) = field.shape();
    let window = params.nb.linear_indices(x, w, h);
    kernel_weights(field.values(), &window, mode, params.epsilon)
        .into_iter()
        .zip(&window)
        .map(|(k, &j)| (PixelIndex::from_linear(j, w), k))
        .collect()
}

pub(crate) fn kernel_weights(values: &[f64], window: &[usize], mode: KernelMode, eps: f64) -> Vec<f64> {
    let sign = mode.sign();
    let (shift, sum) = shifted_lse(values, window, sign, eps);
    window
        .iter()
        .map(|&j| ((sign * values[j] - shift) / eps).exp() / sum)
        .collect()
}

/// `<k_M, u> - eps <k_M, ln k_M>` over `B(x, r)`, evaluated as a shifted
/// log-sum-exp.
pub fn smooth_dilation_value(field: &ScalarField, x: PixelIndex, params: &SmoothParams) -> f64 {
    let (w, h) = field.shape();
    let window = params.nb.linear_indices(x, w, h);
    soft_extremum_in(field.values(), &window, KernelMode::Max, params.epsilon)
}

/// `<k_m, u> + eps <k_m, ln k_m>` over `B(x, r)`; equals
/// `-smooth_dilation_value(-u, x)` bit for bit.
pub fn smooth_erosion_value(field: &ScalarField, x: PixelIndex, params: &SmoothParams) -> f64 {
    let (w, h) = field.shape();
    let window = params.nb.linear_indices(x, w, h);
    soft_extremum_in(field.values(), &window, KernelMode::Min, params.epsilon)
}

fn smooth_field(field: &ScalarField, params: &SmoothParams, mode: KernelMode) -> ScalarField {
    let (w, h) = field.shape();
    let v = field.values();
    let out = par::map_indices(field.len(), |i| {
        let window = params.nb.linear_indices(PixelIndex::from_linear(i, w), w, h);
        let soft = soft_extremum_in(v, &window, mode, params.epsilon);
        match mode {
            KernelMode::Max => soft - v[i],
            KernelMode::Min => v[i] - soft,
        }
    });
    ScalarField::from_vec(w, h, out).expect("smooth gradient preserves shape")
}

/// Smooth dilation minus `u`. Tends to [`external_gradient`] as `eps -> 0`,
/// from above, with gap at most `eps ln |B(x,r)|`.
pub fn smooth_external_gradient(field: &ScalarField, params: &SmoothParams) -> ScalarField {
    smooth_field(field, params, KernelMode::Max)
}

/// `u` minus smooth erosion. Tends to [`internal_gradient`] as `eps -> 0`.
pub fn smooth_internal_gradient(field: &ScalarField, params: &SmoothParams) -> ScalarField {
    smooth_field(field, params, KernelMode::Min)
}
