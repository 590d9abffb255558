//! TOML run configuration.
//!
//! ```toml
//! [topo]
//! epsilon = 0.0625
//! r = 3
//! mu0 = 1.0
//! mu1 = 1.0
//! beta0 = 1
//! beta1 = 0
//! # shape = "square"        # or "disc"
//! # min_persistence = 0.0
//!
//! [adamw]
//! nu = 0.01                 # weight decay
//! tau = 0.003               # learning rate
//!
//! [minimize]                # optional, direct minimizer only
//! iters = 500
//! # patience = 10
//!
//! [nlstd]                   # segmentation only
//! lambda = 0.5              # or one value per class
//! gamma = 0.3
//! eta = 3.0
//! # zeta = [[1.0, 0.0], [0.0, 1.0]]
//! # topo_channel = 1
//! # max_iters = 300
//! # tol = 1e-4
//! # v_init_steps = 25
//! # recompute_every = 1
//!
//! [weights]                 # segmentation only; arrays give one mixture component each
//! omega0 = 10.0
//! omega1 = 10.0
//! alpha1 = 1.0
//! alpha2 = 3.0
//! alpha3 = 3.0
//! # window = 7
//! ```

use toml::{Table, Value};

use crate::adamw::AdamWParams;
use crate::energy::TopoParams;
use crate::error::{Error, Result};
use crate::grid::{NeighborhoodShape, NeighborhoodSpec};
use crate::minimize::MinimizeOptions;
use crate::morphology::SmoothParams;
use crate::nlstd::{Coupling, KernelComponent, SolverConfig, WeightModel};

pub const DEFAULT_MINIMIZE_ITERS: usize = 500;

#[derive(Clone, Debug)]
pub struct Config {
    root: Table,
}

struct Section<'a> {
    name: &'a str,
    table: &'a Table,
}

fn missing(key: String) -> Error {
    Error::Config(format!("missing key `{key}`"))
}

fn invalid(key: String, what: &str) -> Error {
    Error::Config(format!("`{key}` must be {what}"))
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn raw(&self, key: &str) -> Result<&'a Value> {
        self.table.get(key).ok_or_else(|| missing(self.path(key)))
    }

    fn float(&self, key: &str) -> Result<f64> {
        as_float(self.raw(key)?).ok_or_else(|| invalid(self.path(key), "a number"))
    }

    fn opt_float(&self, key: &str) -> Result<Option<f64>> {
        self.table.get(key).map(|_| self.float(key)).transpose()
    }

    fn uint(&self, key: &str) -> Result<usize> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(invalid(self.path(key), "a nonnegative integer")),
        }
    }

    fn opt_uint(&self, key: &str) -> Result<Option<usize>> {
        self.table.get(key).map(|_| self.uint(key)).transpose()
    }

    /// A number or an array of numbers.
    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(items) if !items.is_empty() => items
                .iter()
                .map(as_float)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| invalid(self.path(key), "a number or an array of numbers")),
            v => as_float(v)
                .map(|f| vec![f])
                .ok_or_else(|| invalid(self.path(key), "a number or an array of numbers")),
        }
    }

    fn matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        let Some(v) = self.table.get(key) else {
            return Ok(None);
        };
        let bad = || invalid(self.path(key), "an array of numeric arrays");
        let Value::Array(rows) = v else { return Err(bad()) };
        rows.iter()
            .map(|row| match row {
                Value::Array(items) => items.iter().map(as_float).collect::<Option<Vec<_>>>().ok_or_else(bad),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        Ok(Self { root })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn section<'a>(&'a self, name: &'a str) -> Result<Section<'a>> {
        self.opt_section(name)?.ok_or_else(|| missing(name.to_string()))
    }

    fn opt_section<'a>(&'a self, name: &'a str) -> Result<Option<Section<'a>>> {
        match self.root.get(name) {
            None => Ok(None),
            Some(Value::Table(table)) => Ok(Some(Section { name, table })),
            Some(_) => Err(invalid(name.to_string(), "a table")),
        }
    }

    pub fn topo(&self) -> Result<TopoParams> {
        let s = self.section("topo")?;
        let epsilon = s.float("epsilon")?;
        if !(epsilon > 0.0) {
            return Err(invalid(s.path("epsilon"), "positive"));
        }
        let radius = s.uint("r")?;
        let shape = match s.table.get("shape") {
            None => NeighborhoodShape::Square,
            Some(Value::String(name)) => name
                .parse()
                .map_err(|_| invalid(s.path("shape"), "\"square\" or \"disc\""))?,
            Some(_) => return Err(invalid(s.path("shape"), "a string")),
        };
        let mu = [s.float("mu0")?, s.float("mu1")?];
        if mu.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Config("topo weights mu0 and mu1 must be nonnegative".into()));
        }
        let beta = [s.uint("beta0")?, s.uint("beta1")?];
        let nb = NeighborhoodSpec { shape, radius };
        let mut params = TopoParams::new(mu, beta, SmoothParams::new(epsilon, nb));
        if let Some(floor) = s.opt_float("min_persistence")? {
            if !(floor >= 0.0) {
                return Err(invalid(s.path("min_persistence"), "nonnegative"));
            }
            params.min_persistence = floor;
        }
        Ok(params)
    }

    pub fn adamw(&self) -> Result<AdamWParams> {
        let s = self.section("adamw")?;
        let mut p = AdamWParams::with(s.float("nu")?, s.float("tau")?);
        if let Some(v) = s.opt_float("rho1")? {
            p.beta1 = v;
        }
        if let Some(v) = s.opt_float("rho2")? {
            p.beta2 = v;
        }
        if let Some(v) = s.opt_float("eps")? {
            p.eps = v;
        }
        if !(p.lr > 0.0) || !(p.weight_decay >= 0.0) || !(0.0..1.0).contains(&p.beta1) || !(0.0..1.0).contains(&p.beta2) || !(p.eps > 0.0) {
            return Err(Error::Config("adamw parameters out of range".into()));
        }
        Ok(p)
    }

    pub fn minimize_options(&self) -> Result<MinimizeOptions> {
        let Some(s) = self.opt_section("minimize")? else {
            return Ok(MinimizeOptions::fixed(DEFAULT_MINIMIZE_ITERS));
        };
        Ok(MinimizeOptions {
            max_iters: s.opt_uint("iters")?.unwrap_or(DEFAULT_MINIMIZE_ITERS),
            target_patience: match s.opt_uint("patience")? {
                Some(0) => return Err(invalid(s.path("patience"), "at least 1")),
                p => p,
            },
        })
    }

    pub fn weight_model(&self) -> Result<WeightModel> {
        let s = self.section("weights")?;
        let keys = ["omega0", "omega1", "alpha1", "alpha2", "alpha3"];
        let cols = keys.map(|k| s.floats(k));
        let cols: Vec<Vec<f64>> = cols.into_iter().collect::<Result<_>>()?;
        let n = cols.iter().map(Vec::len).max().unwrap_or(1);
        for (k, c) in keys.iter().zip(&cols) {
            if c.len() != 1 && c.len() != n {
                return Err(invalid(s.path(k), &format!("a number or an array of {n} numbers")));
            }
        }
        let at = |c: &Vec<f64>, i: usize| if c.len() == 1 { c[0] } else { c[i] };
        let components = (0..n)
            .map(|i| KernelComponent {
                omega0: at(&cols[0], i),
                omega1: at(&cols[1], i),
                alpha1: at(&cols[2], i),
                alpha2: at(&cols[3], i),
                alpha3: at(&cols[4], i),
            })
            .collect();
        let window = s.opt_uint("window")?.unwrap_or(crate::nlstd::weights::DEFAULT_WINDOW);
        WeightModel::new(components, window)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let topo = self.topo()?;
        let adamw = self.adamw()?;
        let s = self.section("nlstd")?;
        let mut cfg = SolverConfig::new(1.0, s.float("gamma")?, s.float("eta")?, topo);
        cfg.lambda = s.floats("lambda")?;
        cfg.adamw = adamw;
        if let Some(rows) = s.matrix("zeta")? {
            cfg.zeta = Some(Coupling::from_rows(rows)?);
        }
        if let Some(v) = s.opt_uint("topo_channel")? {
            cfg.topo_channel = v;
        }
        if let Some(v) = s.opt_uint("max_iters")? {
            cfg.max_iters = v;
        }
        if let Some(v) = s.opt_float("tol")? {
            cfg.tol = v;
        }
        if let Some(v) = s.opt_uint("v_init_steps")? {
            cfg.v_init_steps = v;
        }
        if let Some(v) = s.opt_uint("recompute_every")? {
            cfg.recompute_every = v;
        }
        Ok(cfg)
    }
}
