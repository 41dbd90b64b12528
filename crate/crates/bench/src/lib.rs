//! Fixtures shared by the benchmarks.

use inghamlab::exponents::FamilySpec;
use inghamlab::gram::{ExponentialSystem, IntervalSpec};
use inghamlab::{DirectionAssignment, DividedDifferenceBasis};

/// Perturbed lattice `{k + ε_k}` for `|k| ≤ n` with random directions in `ℂ^d`.
pub fn perturbed_system(n: i64, d: usize) -> ExponentialSystem {
    let family = FamilySpec::PerturbedLattice { spacing: 1.0, window: (-n, n), max_perturbation: 0.3 }
        .generate(1)
        .expect("valid spec");
    let u = DirectionAssignment::random(&family, d, 2).expect("valid d");
    ExponentialSystem::new(family, u).expect("matching window")
}

/// Clustered pairs `{3j, 3j + δ}` for `|j| ≤ n`, chained with `γ′ = 1`, `M = 2`.
pub fn clustered_basis(n: i64, delta: f64) -> DividedDifferenceBasis {
    let family = FamilySpec::ClusteredPairs { spacing: 3.0, delta, window: (-n, n), offset: 0.0 }
        .generate(0)
        .expect("valid spec");
    DividedDifferenceBasis::new(family, 1.0, 2).expect("chains")
}

pub fn unit_interval_2pi() -> IntervalSpec {
    IntervalSpec::new(0.0, 2.0 * std::f64::consts::PI).expect("nonempty")
}
