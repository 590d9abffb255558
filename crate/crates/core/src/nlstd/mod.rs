//! Nonlocal soft threshold dynamics segmentation with a topological prior.

pub mod loss;
pub mod solver;
pub mod weights;

pub use loss::{dice_loss, metrics, topo_loss, MetricsReport};
pub use solver::{
    dual_q_update, log_to_csv, nonlocal_energy, nonlocal_n, run_topo_nlstd, run_topo_nlstd_with, segmentation_energy,
    subgradient_p, u_update, unary_features, v_update, Coupling, IterRecord, IterateView, SolverConfig, SolverOutput,
};
pub use weights::{KernelComponent, PairwiseWeights, WeightModel};
