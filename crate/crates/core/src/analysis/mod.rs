//! Spectral estimates and the experiment drivers built on them.

mod bounds;
mod divided;
pub mod spectral;
mod trace;

use serde::{Deserialize, Serialize};

pub use bounds::{
    block_reduction, centered_gram, centered_range, classify, doubling_grid, frame_bound_sequence, threshold_sweep,
    transition_bracket, BlockReduction, FrameBoundReport, SpectralMethod, Verdict, DEGENERATE_FACTOR,
    INTERLACING_SLACK, RESOLUTION_FLOOR, STABLE_RTOL,
};
pub use divided::{
    condition_numbers, conditioning_comparison, dd_fourier_coefficient, dd_threshold_check, ClusteredSetup,
    ConditioningPoint, DdThresholdReport, MIN_PAIR_SEPARATION, RAW_OVERFLOW_DELTA,
};
pub use spectral::{extreme_eigenvalues, ExtremeEigen, SampledFactor};
pub use trace::{
    default_trace_window, defect_decay_fit, defect_majorant, density_chain_check, run_trace_experiment, DefectDecay,
    DensityChainReport, DensityChainRow, TraceExperiment, MIN_DECAY_POINTS, TRACE_AGREEMENT_RTOL, TRACE_BOUND_SLACK,
};

/// Results over a one-parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub parameter: String,
    pub grid: Vec<f64>,
    pub points: Vec<T>,
    pub metadata: SweepMetadata,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub family: String,
    pub d: usize,
    pub seed: Option<u64>,
}
