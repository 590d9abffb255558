//! Nonlocal soft threshold dynamics with an optional topological prior on one
//! channel.
//!
//! The segmentation `u` lives on the probability simplex per pixel. The
//! energy is `F + S + R (+ T)` with fidelity `F = -<o, u>`, entropy
//! `S = gamma <u, ln u>`, the concave nonlocal term `R = <u, N(u)>` and a
//! topological energy `T` on an auxiliary copy `v` of channel `l*`, coupled
//! to `u` through a bounded dual `q`:
//!
//! 1. `q <- clamp(q + v - u_l*, -1, 1)`
//! 2. `v <- AdamW(v, grad T(v) + eta q)` with critical sets from the current `v`
//! 3. `u <- softmax((o - p(u) + eta q_bar) / gamma)` with `p = grad R`
//!
//! Step 3 linearizes `R` (concave-convex procedure), so with `eta = 0` each
//! iteration does not increase `F + S + R`.
//!
//! The run stops once `|u' - u|_inf < tol` and, when `eta > 0`, also
//! `|q' - q|_inf < tol`.

use crate::adamw::{AdamWParams, AdamWState};
use crate::energy::{surrogate_energy, surrogate_gradient, FrozenCriticalSets, TopoParams};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, SoftSegmentation, SIMPLEX_TOLERANCE};

use super::weights::{PairwiseWeights, WeightModel};

/// Symmetric positive semi-definite class coupling matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    n: usize,
    data: Vec<f64>,
}

impl Coupling {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// Validates squareness, symmetry and positive semi-definiteness.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config("zeta must be a square matrix".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("zeta entries must be finite".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::Config("zeta must be symmetric".into()));
                }
            }
        }
        if !is_psd(&data, n) {
            return Err(Error::Config("zeta must be positive semi-definite".into()));
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// LDL^T without pivoting, tolerating zero pivots whose column is also zero.
fn is_psd(a: &[f64], n: usize) -> bool {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let mut l = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = a[j * n + j];
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k] * d[k];
        }
        if dj < -tol {
            return false;
        }
        d[j] = dj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k] * d[k];
            }
            if dj.abs() <= tol {
                if s.abs() > tol {
                    return false;
                }
                l[i * n + j] = 0.0;
            } else {
                l[i * n + j] = s / dj;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Per-class weights of the nonlocal term; one value is broadcast.
    pub lambda: Vec<f64>,
    pub gamma: f64,
    pub zeta: Option<Coupling>,
    pub eta: f64,
    pub topo: TopoParams,
    pub adamw: AdamWParams,
    pub topo_channel: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub v_init_steps: usize,
    /// Recompute the critical sets of `v` every this many iterations.
    pub recompute_every: usize,
}

impl SolverConfig {
    pub const DEFAULT_MAX_ITERS: usize = 300;
    pub const DEFAULT_TOL: f64 = 1e-4;
    pub const DEFAULT_V_INIT_STEPS: usize = 25;

    pub fn new(lambda: f64, gamma: f64, eta: f64, topo: TopoParams) -> Self {
        Self {
            lambda: vec![lambda],
            gamma,
            zeta: None,
            eta,
            topo,
            adamw: AdamWParams::SOLVER,
            topo_channel: 1,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
            v_init_steps: Self::DEFAULT_V_INIT_STEPS,
            recompute_every: 1,
        }
    }

    /// Per-class `lambda` for `classes` channels.
    pub fn lambda_for(&self, classes: usize) -> Result<Vec<f64>> {
        match self.lambda.len() {
            1 => Ok(vec![self.lambda[0]; classes]),
            n if n == classes => Ok(self.lambda.clone()),
            n => Err(Error::Config(format!("lambda has {n} entries for {classes} classes"))),
        }
    }

    pub fn coupling_for(&self, classes: usize) -> Result<Coupling> {
        match &self.zeta {
            None => Ok(Coupling::identity(classes)),
            Some(z) if z.size() == classes => Ok(z.clone()),
            Some(z) => Err(Error::Config(format!("zeta is {0}x{0} for {classes} classes", z.size()))),
        }
    }

    fn validate(&self, classes: usize) -> Result<()> {
        if classes < 2 {
            return Err(Error::TooFewChannels(classes));
        }
        if self.lambda_for(classes)?.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::Config("eta must be nonnegative".into()));
        }
        if self.topo_channel >= classes {
            return Err(Error::Config(format!(
                "topo_channel {} out of range for {classes} classes",
                self.topo_channel
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.recompute_every == 0 {
            return Err(Error::Config("recompute_every must be at least 1".into()));
        }
        self.coupling_for(classes)?;
        Ok(())
    }
}

/// `W u_l` for every channel.
fn apply_channels(w: &PairwiseWeights, u: &[ScalarField]) -> Vec<Vec<f64>> {
    u.iter().map(|c| w.apply(c.values())).collect()
}

fn fields(width: usize, height: usize, data: Vec<Vec<f64>>) -> Vec<ScalarField> {
    data.into_iter()
        .map(|v| ScalarField::from_vec(width, height, v).expect("operator output is finite"))
        .collect()
}

fn nonlocal_from(wu: &[Vec<f64>], row_sums: &[f64], lambda: &[f64], zeta: &Coupling) -> Vec<Vec<f64>> {
    let classes = wu.len();
    (0..classes)
        .map(|l| {
            (0..row_sums.len())
                .map(|x| {
                    let s: f64 = (0..classes).map(|m| zeta.get(l, m) * (row_sums[x] - wu[m][x])).sum();
                    lambda[l] * s
                })
                .collect()
        })
        .collect()
}

fn subgradient_from(wu: &[Vec<f64>], row_sums: &[f64], lambda: &[f64], zeta: &Coupling) -> Vec<Vec<f64>> {
    let classes = wu.len();
    let mut p = nonlocal_from(wu, row_sums, lambda, zeta);
    for (l, pl) in p.iter_mut().enumerate() {
        for (x, px) in pl.iter_mut().enumerate() {
            let back: f64 = (0..classes).map(|m| lambda[m] * zeta.get(m, l) * wu[m][x]).sum();
            *px -= back;
        }
    }
    p
}

/// `[N(u)]_l(x) = lambda_l sum_m zeta_lm sum_y w(x, y) (1 - u_m(y))`.
pub fn nonlocal_n(u: &SoftSegmentation, w: &PairwiseWeights, lambda: &[f64], zeta: &Coupling) -> Vec<ScalarField> {
    let wu = apply_channels(w, u.channels());
    fields(u.width(), u.height(), nonlocal_from(&wu, w.row_sums(), lambda, zeta))
}

/// Gradient of `R(u) = <u, N(u)>`:
/// `p_l = lambda_l sum_m zeta_lm W(1 - u_m) - sum_m lambda_m zeta_ml W u_m`,
/// which is `lambda sum_m zeta_lm W(1 - 2 u_m)` for symmetric `zeta` and a
/// single `lambda`.
pub fn subgradient_p(u: &SoftSegmentation, w: &PairwiseWeights, lambda: &[f64], zeta: &Coupling) -> Vec<ScalarField> {
    let wu = apply_channels(w, u.channels());
    fields(u.width(), u.height(), subgradient_from(&wu, w.row_sums(), lambda, zeta))
}

/// `<u, N(u)>`.
pub fn nonlocal_energy(u: &SoftSegmentation, w: &PairwiseWeights, lambda: &[f64], zeta: &Coupling) -> f64 {
    let wu = apply_channels(w, u.channels());
    inner(u.channels(), &nonlocal_from(&wu, w.row_sums(), lambda, zeta))
}

fn inner(u: &[ScalarField], n: &[Vec<f64>]) -> f64 {
    compensated_sum(
        u.iter()
            .zip(n)
            .flat_map(|(a, b)| a.values().iter().zip(b).map(|(x, y)| x * y)),
    )
}

/// `clamp(q + v - u, -1, 1)`.
pub fn dual_q_update(q: &ScalarField, v: &ScalarField, u: &ScalarField) -> ScalarField {
    let (w, h) = q.shape();
    let out = q
        .values()
        .iter()
        .zip(v.values())
        .zip(u.values())
        .map(|((q, v), u)| (q + v - u).clamp(-1.0, 1.0))
        .collect();
    ScalarField::from_vec(w, h, out).expect("dual update preserves shape")
}

/// One AdamW step on `T(v) + eta <q, v>` with the critical sets frozen.
pub fn v_update(
    v: &mut ScalarField,
    q: &ScalarField,
    frozen: &FrozenCriticalSets,
    topo: &TopoParams,
    state: &mut AdamWState,
    eta: f64,
) -> Result<()> {
    q.check_same_shape(v)?;
    let mut grad = surrogate_gradient(v, frozen, topo)?;
    for (g, &qx) in grad.values_mut().iter_mut().zip(q.values()) {
        *g += eta * qx;
    }
    state.step(v, &grad)
}

/// `softmax((o - p + eta q_bar) / gamma)` per pixel, where `q_bar` carries
/// `q` in channel `channel` and zero elsewhere.
pub fn u_update(o: &[ScalarField], p: &[ScalarField], q: &ScalarField, eta: f64, gamma: f64, channel: usize) -> SoftSegmentation {
    let classes = o.len();
    let logits: Vec<Vec<f64>> = (0..classes)
        .map(|l| {
            o[l].values()
                .iter()
                .zip(p[l].values())
                .zip(q.values())
                .map(|((o, p), q)| {
                    let bias = if l == channel { eta * q } else { 0.0 };
                    (o - p + bias) / gamma
                })
                .collect()
        })
        .collect();
    softmax_channels(q.width(), q.height(), &logits)
}

fn softmax_channels(width: usize, height: usize, logits: &[Vec<f64>]) -> SoftSegmentation {
    let n = width * height;
    let mut out = vec![vec![0.0; n]; logits.len()];
    for x in 0..n {
        let shift = logits.iter().map(|c| c[x]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (l, c) in logits.iter().enumerate() {
            let e = (c[x] - shift).exp();
            out[l][x] = e;
            total += e;
        }
        for ch in &mut out {
            ch[x] /= total;
        }
    }
    SoftSegmentation::from_channels_unchecked(fields(width, height, out)).expect("channels share one shape")
}

/// `o_l(x) = -(I(x) - c_l)^2 / sigma^2`.
pub fn unary_features(image: &ScalarField, means: &[f64], sigma: f64) -> Vec<ScalarField> {
    let s2 = sigma * sigma;
    means
        .iter()
        .map(|&c| image.map(|v| -(v - c) * (v - c) / s2))
        .collect()
}

/// One row of the iterate log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub energy_f: f64,
    pub energy_s: f64,
    pub energy_r: f64,
    pub energy_t: f64,
    /// `|v - u_l*|_1`.
    pub l1_gap: f64,
    pub delta_u_inf: f64,
}

pub const LOG_HEADER: &str = "iter,energy_F,energy_S,energy_R,energy_T,l1_gap,delta_u_inf";

pub fn log_to_csv(log: &[IterRecord]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iter, r.energy_f, r.energy_s, r.energy_r, r.energy_t, r.l1_gap, r.delta_u_inf
        ));
    }
    out
}

/// State handed to an observer after every iteration.
pub struct IterateView<'a> {
    pub iter: usize,
    pub u: &'a SoftSegmentation,
    pub v: &'a ScalarField,
    pub q: &'a ScalarField,
}

#[derive(Clone, Debug)]
pub struct SolverOutput {
    pub u: SoftSegmentation,
    pub v: ScalarField,
    pub q: ScalarField,
    pub log: Vec<IterRecord>,
    pub converged: bool,
}

const LN_FLOOR: f64 = 1e-12;

fn fidelity_energy(o: &[ScalarField], u: &SoftSegmentation) -> f64 {
    -compensated_sum(
        o.iter()
            .zip(u.channels())
            .flat_map(|(o, u)| o.values().iter().zip(u.values()).map(|(a, b)| a * b)),
    )
}

fn entropy_energy(u: &SoftSegmentation, gamma: f64) -> f64 {
    gamma
        * compensated_sum(
            u.channels()
                .iter()
                .flat_map(|c| c.values().iter().map(|&x| x * x.max(LN_FLOOR).ln())),
        )
}

/// `F + S + R` for `u`, the quantity that the iteration decreases when the
/// coupling is off.
pub fn segmentation_energy(o: &[ScalarField], u: &SoftSegmentation, w: &PairwiseWeights, lambda: &[f64], zeta: &Coupling, gamma: f64) -> f64 {
    fidelity_energy(o, u) + entropy_energy(u, gamma) + nonlocal_energy(u, w, lambda, zeta)
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_dual(q: &ScalarField) -> Result<()> {
    match q.values().iter().position(|v| !(v.abs() <= 1.0)) {
        Some(i) => Err(Error::DualOutOfRange {
            pixel: q.pixel(i),
            value: q.values()[i],
        }),
        None => Ok(()),
    }
}

pub fn run_topo_nlstd(o: &[ScalarField], image: &ScalarField, model: &WeightModel, config: &SolverConfig) -> Result<SolverOutput> {
    run_topo_nlstd_with(o, image, model, config, |_| {})
}

/// As [`run_topo_nlstd`], calling `observe` after each iteration.
pub fn run_topo_nlstd_with(
    o: &[ScalarField],
    image: &ScalarField,
    model: &WeightModel,
    config: &SolverConfig,
    mut observe: impl FnMut(&IterateView<'_>),
) -> Result<SolverOutput> {
    let classes = o.len();
    config.validate(classes)?;
    for f in o {
        image.check_same_shape(f)?;
        if let Some(i) = f.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { pixel: f.pixel(i) });
        }
    }
    let lambda = config.lambda_for(classes)?;
    let zeta = config.coupling_for(classes)?;
    let (width, height) = image.shape();
    let weights = PairwiseWeights::new(model, image);
    let topo = &config.topo;
    let ch = config.topo_channel;
    let eta = config.eta;

    let logits: Vec<Vec<f64>> = o.iter().map(|f| f.values().to_vec()).collect();
    let mut u = softmax_channels(width, height, &logits);
    u.check_simplex(SIMPLEX_TOLERANCE)?;

    let mut state = AdamWState::new(config.adamw, width * height);
    let mut v = u.channel(ch).clone();
    let mut frozen = if topo.is_active() {
        FrozenCriticalSets::capture_for(u.channel(ch), topo)
    } else {
        FrozenCriticalSets::empty(width, height)
    };
    let zero_q = ScalarField::zeros(width, height);
    for _ in 0..config.v_init_steps {
        v_update(&mut v, &zero_q, &frozen, topo, &mut state, 0.0)?;
    }
    let mut q = dual_q_update(&zero_q, &v, u.channel(ch));

    let mut wu = apply_channels(&weights, u.channels());
    let mut log = Vec::new();
    let mut converged = false;
    for iter in 1..=config.max_iters {
        let next_q = dual_q_update(&q, &v, u.channel(ch));
        check_dual(&next_q)?;
        let delta_q = max_abs_diff(next_q.values(), q.values());
        q = next_q;

        if topo.is_active() && (iter - 1) % config.recompute_every == 0 {
            frozen = FrozenCriticalSets::capture_for(&v, topo);
        }
        v_update(&mut v, &q, &frozen, topo, &mut state, eta)?;

        let p = fields(width, height, subgradient_from(&wu, weights.row_sums(), &lambda, &zeta));
        let next = u_update(o, &p, &q, eta, config.gamma, ch);
        next.check_simplex(SIMPLEX_TOLERANCE)?;

        let delta = next
            .channels()
            .iter()
            .zip(u.channels())
            .map(|(a, b)| max_abs_diff(a.values(), b.values()))
            .fold(0.0, f64::max);
        u = next;
        wu = apply_channels(&weights, u.channels());

        let energy_t = if topo.is_active() {
            surrogate_energy(&v, &frozen, topo)?
        } else {
            0.0
        };
        let l1_gap = compensated_sum(v.values().iter().zip(u.channel(ch).values()).map(|(a, b)| (a - b).abs()));
        log.push(IterRecord {
            iter,
            energy_f: fidelity_energy(o, &u),
            energy_s: entropy_energy(&u, config.gamma),
            energy_r: inner(u.channels(), &nonlocal_from(&wu, weights.row_sums(), &lambda, &zeta)),
            energy_t,
            l1_gap,
            delta_u_inf: delta,
        });
        observe(&IterateView {
            iter,
            u: &u,
            v: &v,
            q: &q,
        });
        // u alone can freeze (saturated softmax) while q is still building up
        if delta < config.tol && (eta == 0.0 || delta_q < config.tol) {
            converged = true;
            break;
        }
    }
    Ok(SolverOutput {
        u,
        v,
        q,
        log,
        converged,
    })
}
