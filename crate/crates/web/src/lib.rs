//! Browser bindings for the demo page: step a direct minimizer on the
//! two-blob image, look at the energy gradient around a saddle for varying
//! smoothing, and read Betti numbers off a persistence diagram.

use wasm_bindgen::prelude::*;
use widthtopo::adamw::AdamWParams;
use widthtopo::energy::{ph_gradient, surrogate_gradient, EnergyVariant, FrozenCriticalSets, TopoParams};
use widthtopo::minimize::DirectMinimizer;
use widthtopo::morphology::{erode, SmoothParams};
use widthtopo::persistence::{betti_at_threshold, compute_superlevel_persistence, PersistenceDiagram};
use widthtopo::{fixtures, NeighborhoodSpec, ScalarField};

fn smooth(epsilon: f64, radius: usize) -> Result<SmoothParams, JsError> {
    if !(epsilon > 0.0) || radius > 8 {
        return Err(JsError::new("epsilon must be positive and radius at most 8"));
    }
    Ok(SmoothParams::new(epsilon, NeighborhoodSpec::square(radius)))
}

fn components(field: &ScalarField) -> usize {
    betti_at_threshold(&compute_superlevel_persistence(field), 0.5, 0)
}

/// Direct minimization of one component on the two-blob image.
#[wasm_bindgen]
pub struct Minimizer {
    inner: DirectMinimizer,
}

#[wasm_bindgen]
impl Minimizer {
    /// `variant` is `"wt"` or `"ph"`.
    #[wasm_bindgen(constructor)]
    pub fn new(variant: &str, epsilon: f64, radius: usize) -> Result<Minimizer, JsError> {
        let variant: EnergyVariant = variant.parse().map_err(|e: String| JsError::new(&e))?;
        let mut params = TopoParams::new([1.0, 0.0], [1, 0], smooth(epsilon, radius)?);
        params.min_persistence = 0.1;
        let inner = DirectMinimizer::new(fixtures::two_blob(), params, AdamWParams::DIRECT, variant)
            .map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Self { inner })
    }

    pub fn width(&self) -> usize {
        self.inner.field().width()
    }

    pub fn height(&self) -> usize {
        self.inner.field().height()
    }

    pub fn iterations(&self) -> u32 {
        self.inner.iterations() as u32
    }

    /// Runs `n` steps and returns the energy before the last one.
    pub fn step(&mut self, n: usize) -> Result<f64, JsError> {
        let mut energy = self.inner.energy();
        for _ in 0..n {
            energy = self.inner.step().map_err(|e| JsError::new(&e.to_string()))?;
        }
        Ok(energy)
    }

    /// Row-major pixel values in `[0, 1]`.
    pub fn pixels(&self) -> Vec<f64> {
        self.inner.field().values().to_vec()
    }

    /// Components of the image binarized at 0.5.
    pub fn components(&self) -> usize {
        components(self.inner.field())
    }

    /// Components left after eroding the binarized image with a 3x3 square.
    pub fn components_after_erosion(&self) -> usize {
        let bin = self.inner.field().map(|v| if v >= 0.5 { 1.0 } else { 0.0 });
        components(&erode(&bin, NeighborhoodSpec::square(1)))
    }

    pub fn target_met(&self) -> bool {
        self.inner.meets_target()
    }
}

/// Negative energy gradient on the single-saddle image, asking for one
/// component. `epsilon = 0` gives the unsmoothed variant.
#[wasm_bindgen]
pub fn saddle_gradient(epsilon: f64, radius: usize) -> Result<Vec<f64>, JsError> {
    let field = fixtures::single_saddle();
    let grad = if epsilon == 0.0 {
        let params = TopoParams::new([1.0, 0.0], [1, 0], smooth(1.0, 0)?);
        ph_gradient(&FrozenCriticalSets::capture_for(&field, &params), &params)
    } else {
        let params = TopoParams::new([1.0, 0.0], [1, 0], smooth(epsilon, radius)?);
        let frozen = FrozenCriticalSets::capture_for(&field, &params);
        surrogate_gradient(&field, &frozen, &params).map_err(|e| JsError::new(&e.to_string()))?
    };
    Ok(grad.values().iter().map(|g| -g).collect())
}

#[wasm_bindgen]
pub fn saddle_image() -> Vec<f64> {
    fixtures::single_saddle().values().to_vec()
}

#[wasm_bindgen]
pub fn saddle_width() -> usize {
    fixtures::single_saddle().width()
}

/// Persistence diagram of one of the bundled images.
#[wasm_bindgen]
pub struct Diagram {
    field: ScalarField,
    diagram: PersistenceDiagram,
}

#[wasm_bindgen]
impl Diagram {
    /// `name` is `"staircase"`, `"two-blob"` or `"saddle"`.
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str) -> Result<Diagram, JsError> {
        let field = match name {
            "staircase" => fixtures::staircase(),
            "two-blob" => fixtures::two_blob(),
            "saddle" => fixtures::single_saddle(),
            other => return Err(JsError::new(&format!("unknown image `{other}`"))),
        };
        let diagram = compute_superlevel_persistence(&field);
        Ok(Self { field, diagram })
    }

    pub fn width(&self) -> usize {
        self.field.width()
    }

    pub fn pixels(&self) -> Vec<f64> {
        self.field.values().to_vec()
    }

    /// Flat `[dim, birth, death, ...]`; essential pairs have death `-1`.
    pub fn pairs(&self) -> Vec<f64> {
        self.diagram
            .pairs()
            .iter()
            .flat_map(|p| [p.dim as f64, p.birth, if p.essential { -1.0 } else { p.death }])
            .collect()
    }

    /// `[beta0, beta1]` of the superlevel set at `t`.
    pub fn betti(&self, t: f64) -> Vec<u32> {
        [0, 1].iter().map(|&k| betti_at_threshold(&self.diagram, t, k) as u32).collect()
    }
}
