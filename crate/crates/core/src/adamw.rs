//! AdamW with decoupled weight decay, operating on whole fields.

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWParams {
    /// Learning rate.
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamWParams {
    pub const DIRECT: Self = Self::with(0.01, 0.01);
    pub const SOLVER: Self = Self::with(0.01, 0.003);

    /// Standard moment decay rates (0.9, 0.999) and `eps = 1e-8`.
    pub const fn with(weight_decay: f64, lr: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for AdamWParams {
    fn default() -> Self {
        Self::DIRECT
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState {
    params: AdamWParams,
    m: Vec<f64>,
    s: Vec<f64>,
    t: u64,
}

impl AdamWState {
    pub fn new(params: AdamWParams, len: usize) -> Self {
        Self {
            params,
            m: vec![0.0; len],
            s: vec![0.0; len],
            t: 0,
        }
    }

    pub fn params(&self) -> &AdamWParams {
        &self.params
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.s
    }

    /// One update of `param` in place. The gradient must be finite and have
    /// the same shape as `param`; on error nothing is modified.
    pub fn step(&mut self, param: &mut ScalarField, grad: &ScalarField) -> Result<()> {
        param.check_same_shape(grad)?;
        if param.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: (param.width(), param.height()),
                found: self.m.len(),
            });
        }
        if let Some(i) = grad.values().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite { pixel: grad.pixel(i) });
        }
        let AdamWParams {
            lr,
            weight_decay,
            beta1,
            beta2,
            eps,
        } = self.params;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let decay = 1.0 - lr * weight_decay;
        for (((x, &g), m), s) in param
            .values_mut()
            .iter_mut()
            .zip(grad.values())
            .zip(&mut self.m)
            .zip(&mut self.s)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *s = beta2 * *s + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let s_hat = *s / c2;
            *x = decay * *x - lr * m_hat / (s_hat.sqrt() + eps);
        }
        Ok(())
    }
}
