use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectral::hermitian_extremes;
use super::{SweepMetadata, SweepResult};
use crate::basisfuncs::{DirectionAssignment, DividedDifferenceBasis};
use crate::exponents::FamilySpec;
use crate::gram::{assemble_gram, DividedDifferenceSystem, ExponentialSystem, IntervalSpec};
use crate::quadrature::{QuadratureRule, DEFAULT_ORDER};
use crate::{Error, Result, C64};

/// Pairs with `|ω_k − γ_n|` below this are skipped (the product vanishes).
pub const MIN_PAIR_SEPARATION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdThresholdReport {
    pub pairs: usize,
    /// `max |∫_I f_k e^{−iγ_n t} dt|·|ω_k − γ_n|`.
    pub empirical_c: f64,
    /// `(k, n)` attaining the maximum.
    pub argmax: (i64, i64),
    /// Same maximum restricted to the farther half of the distances.
    pub far_field_c: f64,
    pub finite: bool,
}

/// `∫_I f_k(t) e^{−iγ t} dt` by panelled Gauss–Legendre.
pub fn dd_fourier_coefficient(basis: &DividedDifferenceBasis, p: usize, gamma: f64, interval: &IntervalSpec) -> Result<C64> {
    let nodes = basis.nodes(p);
    let speed = (nodes[0] - gamma).abs().max((nodes[nodes.len() - 1] - gamma).abs());
    let rule = QuadratureRule::panels(interval.a(), interval.b(), speed, DEFAULT_ORDER, 2 + basis.order(p))?;
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| basis.eval(p, t) * C64::from_polar(w, -gamma * t))
        .sum())
}

/// Empirical constant of the integration-by-parts bound over every basis
/// function against `γ_n = 2πn/|I|` for `n ∈ n_range`.
pub fn dd_threshold_check(
    basis: &DividedDifferenceBasis,
    interval: &IntervalSpec,
    n_range: std::ops::RangeInclusive<i64>,
) -> Result<DdThresholdReport> {
    let family = basis.family();
    let step = 2.0 * PI / interval.length();
    let pairs: Vec<(usize, i64)> = (0..basis.len())
        .flat_map(|p| n_range.clone().map(move |n| (p, n)))
        .filter(|&(p, n)| (family.exponents()[p] - step * n as f64).abs() >= MIN_PAIR_SEPARATION)
        .collect();
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no (k, n) pairs to sample".into()));
    }
    let values: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(p, n)| {
            let gamma = step * n as f64;
            let dist = (family.exponents()[p] - gamma).abs();
            dd_fourier_coefficient(basis, p, gamma, interval).map(|z| (dist, z.norm() * dist))
        })
        .collect::<Result<_>>()?;
    let (imax, empirical_c) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &(_, v))| if v > acc.1 { (i, v) } else { acc });
    let far = values.iter().map(|v| v.0).fold(0.0, f64::max) / 2.0;
    let far_field_c = values.iter().filter(|v| v.0 >= far).map(|v| v.1).fold(0.0, f64::max);
    let (p, n) = pairs[imax];
    Ok(DdThresholdReport {
        pairs: pairs.len(),
        empirical_c,
        argmax: (family.index_of(p), n),
        far_field_c,
        finite: values.iter().all(|v| v.1.is_finite()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningPoint {
    pub delta: f64,
    /// `λ_max/λ_min` of the raw exponential Gram; `None` reports overflow.
    pub raw_condition: Option<f64>,
    /// Same for the `L²`-normalized divided-difference Gram, with the time
    /// origin at the interval midpoint.
    pub dd_condition: f64,
    /// Same with the time origin at `t = 0`.
    pub dd_condition_origin_zero: f64,
}

/// Below this `δ` the raw Gram is reported as overflow without solving.
pub const RAW_OVERFLOW_DELTA: f64 = 1e-8;

/// Shape of a clustered-pairs experiment: pairs `(s·j + offset, s·j + offset + δ)`
/// for `j` in `window`, chained with `(γ′, M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredSetup {
    pub spacing: f64,
    pub window: (i64, i64),
    #[serde(default)]
    pub offset: f64,
    pub gamma_prime: f64,
    pub m: usize,
}

impl ClusteredSetup {
    pub fn basis(&self, delta: f64) -> Result<DividedDifferenceBasis> {
        let family = FamilySpec::ClusteredPairs {
            spacing: self.spacing,
            delta,
            window: self.window,
            offset: self.offset,
        }
        .generate(0)?;
        DividedDifferenceBasis::new(family, self.gamma_prime, self.m)
    }
}

pub fn condition_numbers(setup: &ClusteredSetup, interval: &IntervalSpec, delta: f64) -> Result<ConditioningPoint> {
    let basis = setup.basis(delta)?;
    let family = basis.family().clone();
    let scalar = DirectionAssignment::constant(&family, 1, 1)?;
    let raw_condition = if delta < RAW_OVERFLOW_DELTA {
        None
    } else {
        let g = assemble_gram(&ExponentialSystem::new(family, scalar.clone())?, interval)?;
        let e = hermitian_extremes(g.entries())?;
        (e.min > 0.0).then(|| e.max / e.min)
    };
    let dd = DividedDifferenceSystem::raw(basis, scalar)?;
    let condition = |origin: f64| -> Result<f64> {
        let sys = dd.clone().with_origin(origin).normalize(interval)?;
        let e = hermitian_extremes(assemble_gram(&sys, interval)?.entries())?;
        if !(e.min > 0.0) {
            return Err(Error::NearSingular { min_eigenvalue: e.min, norm: e.max });
        }
        Ok(e.max / e.min)
    };
    Ok(ConditioningPoint {
        delta,
        raw_condition,
        dd_condition: condition(interval.midpoint())?,
        dd_condition_origin_zero: condition(0.0)?,
    })
}

/// Condition numbers over a grid of cluster widths (listed in any order the
/// caller likes, but strictly monotone).
pub fn conditioning_comparison(
    setup: &ClusteredSetup,
    interval: &IntervalSpec,
    deltas: &[f64],
) -> Result<SweepResult<ConditioningPoint>> {
    if deltas.is_empty() {
        return Err(Error::invalid("delta grid is empty"));
    }
    if deltas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("delta grid not increasing"));
    }
    let points = deltas
        .par_iter()
        .map(|&delta| condition_numbers(setup, interval, delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        parameter: "delta".into(),
        grid: deltas.to_vec(),
        points,
        metadata: SweepMetadata {
            family: format!("clustered-pairs spacing={} window={:?}", setup.spacing, setup.window),
            d: 1,
            seed: None,
        },
    })
}
