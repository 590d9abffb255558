//! Persistence energies.
//!
//! For a target Betti number `beta_k` the diagram splits into encouraged pairs
//! (the `beta_k` most persistent, counting the essential pair) and penalized
//! pairs (the rest). The plain energy per dimension is
//! `sum_penalized (b - d) - sum_encouraged (b - d)`, i.e.
//! `2 B(beta_k) - B(0)` with `B` the tail bar sum.
//!
//! The width-aware version replaces each critical value by a smooth dilation
//! at the birth pixel and a smooth erosion at the death pixel. Only the pixel
//! sets are frozen; the soft kernels follow the field being evaluated.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{PixelIndex, ScalarField};
use crate::morphology::{kernel_weights, soft_extremum_in, KernelMode, SmoothParams};
use crate::persistence::{compute_superlevel_persistence, critical_sets, write_pair_row, CriticalSplit, PersistenceDiagram, PersistencePair, CSV_HEADER};

/// Dimension weights, target Betti numbers and the soft-extremum setup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopoParams {
    pub mu: [f64; 2],
    pub beta: [usize; 2],
    pub smooth: SmoothParams,
    /// Penalized pairs shorter than this are left alone. Zero keeps every
    /// pair.
    pub min_persistence: f64,
}

impl TopoParams {
    pub fn new(mu: [f64; 2], beta: [usize; 2], smooth: SmoothParams) -> Self {
        Self {
            mu,
            beta,
            smooth,
            min_persistence: 0.0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.mu.iter().any(|&m| m != 0.0)
    }
}

/// Birth/death pixels captured from the diagram of a reference field, split
/// per dimension into encouraged and penalized pairs.
///
/// The same pixel may occur in several pairs (a saddle can end more than one
/// component in degenerate inputs); contributions then add up.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrozenCriticalSets {
    width: usize,
    height: usize,
    dims: [CriticalSplit; 2],
}

impl FrozenCriticalSets {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dims: Default::default(),
        }
    }

    pub fn from_diagram(diagram: &PersistenceDiagram, beta: [usize; 2]) -> Self {
        Self {
            width: diagram.width(),
            height: diagram.height(),
            dims: [critical_sets(diagram, 0, beta[0]), critical_sets(diagram, 1, beta[1])],
        }
    }

    /// Recomputes the diagram of `field` and splits it.
    pub fn capture(field: &ScalarField, beta: [usize; 2]) -> Self {
        Self::from_diagram(&compute_superlevel_persistence(field), beta)
    }

    /// As [`capture`](Self::capture), then drops penalized pairs shorter than
    /// `params.min_persistence`.
    pub fn capture_for(field: &ScalarField, params: &TopoParams) -> Self {
        let mut sets = Self::capture(field, params.beta);
        if params.min_persistence > 0.0 {
            for d in &mut sets.dims {
                d.penalized.retain(|p| p.persistence() >= params.min_persistence);
            }
        }
        sets
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn dim(&self, k: usize) -> &CriticalSplit {
        &self.dims[k]
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().all(|d| d.encouraged.is_empty() && d.penalized.is_empty())
    }

    pub fn num_pairs(&self) -> usize {
        self.dims.iter().map(|d| d.encouraged.len() + d.penalized.len()).sum()
    }

    /// `(pair, sign)` over all frozen pairs: `+1` penalized, `-1` encouraged.
    fn signed_pairs(&self) -> impl Iterator<Item = (&PersistencePair, f64)> + '_ {
        self.dims.iter().flat_map(|d| {
            d.penalized
                .iter()
                .map(|p| (p, 1.0))
                .chain(d.encouraged.iter().map(|p| (p, -1.0)))
        })
    }

    /// Diagram CSV rows with a trailing `encouraged` column.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER},encouraged\n");
        for d in &self.dims {
            for (list, flag) in [(&d.encouraged, true), (&d.penalized, false)] {
                for p in list {
                    write_pair_row(&mut out, p);
                    out.pop();
                    let _ = writeln!(out, ",{flag}");
                }
            }
        }
        out
    }

    fn check_shape(&self, field: &ScalarField) -> Result<()> {
        if field.shape() != (self.width, self.height) {
            return Err(Error::ShapeMismatch {
                expected: (self.width, self.height),
                found: field.len(),
            });
        }
        Ok(())
    }
}

/// Sum of `b - d` over finite dimension-`k` pairs ranked after the first
/// `beta` (the essential pair occupies rank one in dimension 0).
pub fn bar_energy(diagram: &PersistenceDiagram, k: usize, beta: usize) -> f64 {
    critical_sets(diagram, k, beta)
        .penalized
        .iter()
        .map(PersistencePair::persistence)
        .sum()
}

/// `sum_k mu_k (2 B(beta_k) - B(0))` on a fresh diagram of `field`, i.e.
/// penalized minus encouraged persistence. Penalized pairs below
/// `min_persistence` are skipped.
pub fn ph_energy(field: &ScalarField, params: &TopoParams) -> f64 {
    FrozenCriticalSets::capture_for(field, params)
        .signed_pairs()
        .map(|(p, s)| params.mu[p.dim] * s * p.persistence())
        .sum()
}

fn death_pixel(p: &PersistencePair) -> PixelIndex {
    p.death_pixel.expect("finite pairs carry a death pixel")
}

/// Frozen-set surrogate: for each pair, smooth dilation at the birth pixel
/// minus smooth erosion at the death pixel, signed `+mu_k` if penalized and
/// `-mu_k` if encouraged.
pub fn surrogate_energy(field: &ScalarField, frozen: &FrozenCriticalSets, params: &TopoParams) -> Result<f64> {
    frozen.check_shape(field)?;
    let (w, h) = field.shape();
    let v = field.values();
    let eps = params.smooth.epsilon;
    let nb = params.smooth.nb;
    let mut total = 0.0;
    for (k, d) in frozen.dims.iter().enumerate() {
        if params.mu[k] == 0.0 {
            continue;
        }
        let mut dim_sum = 0.0;
        for (list, sign) in [(&d.penalized, 1.0), (&d.encouraged, -1.0)] {
            for p in list {
                let birth = soft_extremum_in(v, &nb.linear_indices(p.birth_pixel, w, h), KernelMode::Max, eps);
                let death = soft_extremum_in(v, &nb.linear_indices(death_pixel(p), w, h), KernelMode::Min, eps);
                dim_sum += sign * (birth - death);
            }
        }
        total += params.mu[k] * dim_sum;
    }
    Ok(total)
}

/// Gradient of [`surrogate_energy`] with the frozen sets held fixed:
/// `mu_k * s * (k_M(y, .) - k_m(z, .))` summed over pairs `(y, z)` with sign
/// `s`.
pub fn surrogate_gradient(field: &ScalarField, frozen: &FrozenCriticalSets, params: &TopoParams) -> Result<ScalarField> {
    frozen.check_shape(field)?;
    let (w, h) = field.shape();
    let v = field.values();
    let eps = params.smooth.epsilon;
    let nb = params.smooth.nb;
    let mut grad = vec![0.0; field.len()];
    for (pair, sign) in frozen.signed_pairs() {
        let scale = params.mu[pair.dim] * sign;
        if scale == 0.0 {
            continue;
        }
        for (mode, center, s) in [(KernelMode::Max, pair.birth_pixel, 1.0), (KernelMode::Min, death_pixel(pair), -1.0)] {
            let window = nb.linear_indices(center, w, h);
            for (k, &j) in kernel_weights(v, &window, mode, eps).iter().zip(&window) {
                grad[j] += scale * s * k;
            }
        }
    }
    ScalarField::from_vec(w, h, grad)
}

/// Limit of [`surrogate_gradient`] as `eps -> 0` with the mass placed on the
/// critical pixels themselves: `+mu_k s` at births, `-mu_k s` at deaths.
pub fn ph_gradient(frozen: &FrozenCriticalSets, params: &TopoParams) -> ScalarField {
    let (w, h) = frozen.shape();
    let mut grad = ScalarField::zeros(w, h);
    for (pair, sign) in frozen.signed_pairs() {
        let scale = params.mu[pair.dim] * sign;
        let b = pair.birth_pixel;
        let d = death_pixel(pair);
        grad.set(b, grad.get(b) + scale);
        grad.set(d, grad.get(d) - scale);
    }
    grad
}

/// Width-aware energy of `field` with its own critical sets, returned for
/// reuse in a gradient step.
pub fn wt_energy(field: &ScalarField, params: &TopoParams) -> (f64, FrozenCriticalSets) {
    let frozen = FrozenCriticalSets::capture_for(field, params);
    let value = surrogate_energy(field, &frozen, params).expect("sets captured from the same field");
    (value, frozen)
}

/// Which energy a driver minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyVariant {
    /// Plain persistence energy, gradient only at critical pixels.
    Ph,
    /// Width-aware energy, gradient spread over the structuring element.
    Wt,
}

impl std::str::FromStr for EnergyVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ph" => Ok(Self::Ph),
            "wt" => Ok(Self::Wt),
            other => Err(format!("unknown energy variant {other:?} (expected ph or wt)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grid::NeighborhoodSpec;

    fn params(mu: [f64; 2], beta: [usize; 2], eps: f64, r: usize) -> TopoParams {
        TopoParams::new(mu, beta, SmoothParams::new(eps, NeighborhoodSpec::square(r)))
    }

    const S: f64 = 1.0 / 255.0;

    #[test]
    fn bar_energy_on_staircase_diagram() {
        let d = compute_superlevel_persistence(&fixtures::staircase());
        // finite dim-0 bars: 178 and 2 (in units of 1/255); essential first
        assert!((bar_energy(&d, 0, 0) - 180.0 * S).abs() < 1e-12);
        assert!((bar_energy(&d, 0, 1) - 180.0 * S).abs() < 1e-12);
        assert!((bar_energy(&d, 0, 2) - 2.0 * S).abs() < 1e-12);
        assert_eq!(bar_energy(&d, 0, 3), 0.0);
        assert_eq!(bar_energy(&d, 1, 2), 0.0);
        assert!((bar_energy(&d, 1, 1) - 25.0 * S).abs() < 1e-12);
    }

    #[test]
    fn ph_energy_on_staircase_diagram() {
        let f = fixtures::staircase();
        let p1 = params([1.0, 0.0], [1, 0], 0.0625, 1);
        assert!((ph_energy(&f, &p1) - 180.0 * S).abs() < 1e-12);
        let p2 = params([1.0, 0.0], [2, 0], 0.0625, 1);
        assert!((ph_energy(&f, &p2) - (2.0 * 2.0 - 180.0) * S).abs() < 1e-12);
    }

    #[test]
    fn ph_energy_matches_bar_identity() {
        let f = fixtures::staircase();
        let d = compute_superlevel_persistence(&f);
        for beta in [[0, 0], [1, 0], [2, 1], [3, 2], [1, 1]] {
            let p = params([0.7, 1.3], beta, 0.0625, 1);
            let expect: f64 = (0..2)
                .map(|k| p.mu[k] * (2.0 * bar_energy(&d, k, beta[k]) - bar_energy(&d, k, 0)))
                .sum();
            assert!((ph_energy(&f, &p) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn persistence_floor_drops_short_penalized_pairs() {
        let f = fixtures::staircase();
        let mut p = params([1.0, 0.0], [1, 0], 0.0625, 1);
        p.min_persistence = 10.0 * S;
        let sets = FrozenCriticalSets::capture_for(&f, &p);
        assert_eq!(sets.dim(0).penalized.len(), 1);
        assert!((ph_energy(&f, &p) - 178.0 * S).abs() < 1e-12);
    }

    #[test]
    fn constant_field_energies_vanish() {
        let f = ScalarField::filled(6, 6, 0.4);
        let p = params([1.0, 1.0], [1, 0], 0.0625, 2);
        assert_eq!(ph_energy(&f, &p), 0.0);
        let (e, sets) = wt_energy(&f, &p);
        assert_eq!(e, 0.0);
        assert!(sets.is_empty());
    }

    #[test]
    fn empty_sets_give_zero_gradient() {
        let f = ScalarField::from_fn(5, 5, |r, c| (r * 5 + c) as f64 / 25.0);
        let p = params([1.0, 1.0], [1, 0], 0.0625, 2);
        let sets = FrozenCriticalSets::empty(5, 5);
        assert_eq!(surrogate_energy(&f, &sets, &p).unwrap(), 0.0);
        assert!(surrogate_gradient(&f, &sets, &p).unwrap().values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let sets = FrozenCriticalSets::empty(4, 4);
        let p = params([1.0, 0.0], [1, 0], 0.0625, 1);
        let f = ScalarField::zeros(5, 4);
        assert!(matches!(surrogate_energy(&f, &sets, &p), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn small_eps_gradient_concentrates_at_window_argmax() {
        // one penalized pair: peaks at cols 0 and 4, valley at col 2
        let f = ScalarField::from_vec(5, 1, vec![0.9, 0.3, 0.1, 0.4, 0.6]).unwrap();
        let p = params([1.0, 0.0], [1, 0], 1e-3, 1);
        let sets = FrozenCriticalSets::capture(&f, p.beta);
        assert_eq!(sets.dim(0).penalized.len(), 1);
        let g = surrogate_gradient(&f, &sets, &p).unwrap();
        // birth pixel (0,4) is its window max; death pixel (0,1)? check both ends
        let pair = sets.dim(0).penalized[0];
        assert_eq!(pair.birth_pixel, PixelIndex::new(0, 4));
        assert!((g.at(0, 4) - 1.0).abs() < 1e-9);
        let dp = pair.death_pixel.unwrap();
        assert!((g.get(dp) + 1.0).abs() < 1e-9);
        let mass: f64 = g.values().iter().map(|x| x.abs()).sum();
        assert!((mass - 2.0).abs() < 1e-9);
    }

    #[test]
    fn surrogate_at_reference_matches_wt_energy() {
        let f = fixtures::staircase();
        let p = params([1.0, 0.5], [1, 1], 0.0625, 2);
        let (e, sets) = wt_energy(&f, &p);
        assert_eq!(surrogate_energy(&f, &sets, &p).unwrap(), e);
    }

    #[test]
    fn wt_tends_to_ph_for_small_eps() {
        // With a one-pixel element the soft extrema reduce to the critical
        // values; wider elements tend to the hard dilation/erosion instead.
        let f = fixtures::staircase();
        for beta in [[1, 0], [2, 1], [3, 2]] {
            let p = params([1.0, 1.0], beta, 1e-4, 0);
            let (wt, _) = wt_energy(&f, &p);
            let ph = ph_energy(&f, &p);
            assert!((wt - ph).abs() < 1e-12, "{wt} vs {ph}");
        }
    }

    #[test]
    fn wt_tends_to_hard_morphology_bars() {
        let f = fixtures::staircase();
        let nb = NeighborhoodSpec::square(1);
        let p = TopoParams::new([1.0, 1.0], [1, 0], SmoothParams::new(1e-4, nb));
        let (wt, sets) = wt_energy(&f, &p);
        let dil = crate::morphology::dilate(&f, nb);
        let ero = crate::morphology::erode(&f, nb);
        let hard: f64 = sets
            .signed_pairs()
            .map(|(pair, s)| s * (dil.get(pair.birth_pixel) - ero.get(death_pixel(pair))))
            .sum();
        let bound = 2.0 * sets.num_pairs() as f64 * 1e-4 * 9f64.ln();
        assert!((wt - hard).abs() <= bound, "{wt} vs {hard}");
    }

    #[test]
    fn only_encouraged_pairs_give_nonpositive_energy() {
        let f = fixtures::staircase();
        let p = params([1.0, 0.0], [3, 0], 0.0625, 2);
        let (e, sets) = wt_energy(&f, &p);
        assert!(sets.dim(0).penalized.is_empty());
        assert!(e < 0.0);
    }

    #[test]
    fn ph_gradient_is_unit_mass() {
        let f = fixtures::staircase();
        let p = params([1.0, 0.0], [1, 0], 0.0625, 2);
        let sets = FrozenCriticalSets::capture(&f, p.beta);
        let g = ph_gradient(&sets, &p);
        assert_eq!(g.at(5, 4), -1.0);
        assert_eq!(g.at(4, 2), -1.0);
        assert_eq!(g.at(5, 5), 1.0);
        assert_eq!(g.at(5, 3), 1.0);
        assert_eq!(g.values().iter().filter(|&&x| x != 0.0).count(), 4);
    }

    #[test]
    fn critical_csv_has_encouraged_column() {
        let p = params([1.0, 1.0], [2, 1], 0.0625, 1);
        let sets = FrozenCriticalSets::capture(&fixtures::staircase(), p.beta);
        let csv = sets.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().ends_with(",essential,encouraged"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.iter().filter(|r| r.ends_with(",true")).count(), 2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = ScalarField::from_fn(8, 7, |r, c| (((r * 8 + c) * 37) % 56) as f64 / 56.0 + 0.001 * r as f64);
        let p = params([1.0, 0.7], [1, 0], 0.0625, 2);
        let sets = FrozenCriticalSets::capture(&f, p.beta);
        assert!(!sets.is_empty());
        let g = surrogate_gradient(&f, &sets, &p).unwrap();
        let h = 1e-6;
        for i in 0..f.len() {
            let mut plus = f.clone();
            plus.values_mut()[i] += h;
            let mut minus = f.clone();
            minus.values_mut()[i] -= h;
            let fd = (surrogate_energy(&plus, &sets, &p).unwrap() - surrogate_energy(&minus, &sets, &p).unwrap()) / (2.0 * h);
            assert!((fd - g.values()[i]).abs() <= 1e-5 * fd.abs().max(1e-3), "pixel {i}: {fd} vs {}", g.values()[i]);
        }
    }
}
