//! Direct minimization of a persistence energy over an image with AdamW.
//!
//! Each iteration recomputes the diagram of the current image, takes one
//! AdamW step on the frozen-set energy and clamps the image back to `[0, 1]`.
//!
//! The iteration has no natural fixed point once small pairs start to appear
//! (every step spawns a few), so the driver can stop once the image binarized
//! at [`BINARIZE_THRESHOLD`] has had the target Betti numbers for a number of
//! consecutive iterations.

use crate::adamw::{AdamWParams, AdamWState};
use crate::energy::{ph_energy, ph_gradient, surrogate_gradient, wt_energy, EnergyVariant, FrozenCriticalSets, TopoParams};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::persistence::{betti_at_threshold, compute_superlevel_persistence};

pub const BINARIZE_THRESHOLD: f64 = 0.5;

pub struct DirectMinimizer {
    field: ScalarField,
    params: TopoParams,
    variant: EnergyVariant,
    state: AdamWState,
}

impl DirectMinimizer {
    pub fn new(field: ScalarField, params: TopoParams, adamw: AdamWParams, variant: EnergyVariant) -> Result<Self> {
        if let Some(i) = field.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { pixel: field.pixel(i) });
        }
        let state = AdamWState::new(adamw, field.len());
        Ok(Self {
            field,
            params,
            variant,
            state,
        })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn iterations(&self) -> u64 {
        self.state.steps()
    }

    /// Energy of the current image under the selected variant.
    pub fn energy(&self) -> f64 {
        match self.variant {
            EnergyVariant::Ph => ph_energy(&self.field, &self.params),
            EnergyVariant::Wt => wt_energy(&self.field, &self.params).0,
        }
    }

    /// Takes one step and returns the energy of the image before it.
    pub fn step(&mut self) -> Result<f64> {
        let (energy, grad) = match self.variant {
            EnergyVariant::Ph => {
                let frozen = FrozenCriticalSets::capture_for(&self.field, &self.params);
                (ph_energy(&self.field, &self.params), ph_gradient(&frozen, &self.params))
            }
            EnergyVariant::Wt => {
                let (e, frozen) = wt_energy(&self.field, &self.params);
                (e, surrogate_gradient(&self.field, &frozen, &self.params)?)
            }
        };
        self.state.step(&mut self.field, &grad)?;
        self.field.clamp(0.0, 1.0);
        Ok(energy)
    }

    /// Whether the binarized image has the target Betti number in every
    /// dimension with a nonzero weight.
    pub fn meets_target(&self) -> bool {
        meets_target(&self.field, &self.params)
    }
}

pub fn meets_target(field: &ScalarField, params: &TopoParams) -> bool {
    let d = compute_superlevel_persistence(field);
    (0..2)
        .filter(|&k| params.mu[k] != 0.0)
        .all(|k| betti_at_threshold(&d, BINARIZE_THRESHOLD, k) == params.beta[k])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop after this many consecutive iterations meeting the target.
    /// `None` always runs `max_iters`.
    pub target_patience: Option<usize>,
}

impl MinimizeOptions {
    pub fn fixed(iters: usize) -> Self {
        Self {
            max_iters: iters,
            target_patience: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeOutcome {
    pub field: ScalarField,
    /// Energy before each step, then the final energy.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Whether the patience condition fired.
    pub stopped_at_target: bool,
}

/// Runs the driver. `on_iter(i, field)` is called after step `i` (from 1).
pub fn minimize_energy(
    field: &ScalarField,
    params: &TopoParams,
    adamw: AdamWParams,
    options: MinimizeOptions,
    variant: EnergyVariant,
    mut on_iter: impl FnMut(usize, &ScalarField),
) -> Result<MinimizeOutcome> {
    let mut driver = DirectMinimizer::new(field.clone(), *params, adamw, variant)?;
    let mut trace = Vec::with_capacity(options.max_iters + 1);
    let mut streak = 0;
    let mut stopped_at_target = false;
    for i in 1..=options.max_iters {
        trace.push(driver.step()?);
        on_iter(i, driver.field());
        if let Some(patience) = options.target_patience {
            streak = if driver.meets_target() { streak + 1 } else { 0 };
            if streak >= patience {
                stopped_at_target = true;
                break;
            }
        }
    }
    trace.push(driver.energy());
    Ok(MinimizeOutcome {
        iterations: trace.len() - 1,
        field: driver.into_field(),
        trace,
        stopped_at_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NeighborhoodSpec;
    use crate::morphology::SmoothParams;

    fn params() -> TopoParams {
        TopoParams::new([1.0, 0.0], [1, 0], SmoothParams::new(0.0625, NeighborhoodSpec::square(2)))
    }

    #[test]
    fn satisfied_field_stays_put() {
        // one solid block: nothing to penalize
        let f = ScalarField::from_fn(12, 12, |r, c| if (3..9).contains(&r) && (3..9).contains(&c) { 0.95 } else { 0.05 });
        for variant in [EnergyVariant::Ph, EnergyVariant::Wt] {
            let out = minimize_energy(&f, &params(), AdamWParams::DIRECT, MinimizeOptions::fixed(100), variant, |_, _| {}).unwrap();
            assert_eq!(out.trace.len(), 101);
            assert!(out.trace.iter().all(|&e| e == out.trace[0]));
            assert!(meets_target(&out.field, &params()));
            assert_eq!(out.field.threshold(0.5), f.threshold(0.5));
        }
    }

    #[test]
    fn iterates_stay_in_unit_range() {
        let f = crate::fixtures::two_blob();
        let mut seen = 0;
        minimize_energy(&f, &params(), AdamWParams::DIRECT, MinimizeOptions::fixed(20), EnergyVariant::Wt, |_, x| {
            seen += 1;
            assert!(x.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        })
        .unwrap();
        assert_eq!(seen, 20);
    }

    #[test]
    fn patience_stops_early_on_satisfied_input() {
        let f = ScalarField::from_fn(8, 8, |r, c| if r < 4 && c < 4 { 0.9 } else { 0.1 });
        let opts = MinimizeOptions {
            max_iters: 100,
            target_patience: Some(3),
        };
        let out = minimize_energy(&f, &params(), AdamWParams::DIRECT, opts, EnergyVariant::Wt, |_, _| {}).unwrap();
        assert!(out.stopped_at_target);
        assert_eq!(out.iterations, 3);
        assert_eq!(out.trace.len(), 4);
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut f = ScalarField::zeros(2, 2);
        f.values_mut()[3] = f64::INFINITY;
        assert!(DirectMinimizer::new(f, params(), AdamWParams::DIRECT, EnergyVariant::Ph).is_err());
    }
}
