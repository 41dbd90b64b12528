use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectral::{hermitian_extremes, ExtremeEigen, SampledFactor};
use super::{SweepMetadata, SweepResult};
use crate::basisfuncs::DirectionAssignment;
use crate::exponents::{ExponentFamily, Partition};
use crate::gram::{assemble_gram, ExponentialSystem, GramMatrix, IntervalSpec};
use crate::{max_entry_modulus, CMatrix, Error, Result, C64};

/// Largest relative change of `λ_min` per step still counted as stable.
pub const STABLE_RTOL: f64 = 0.05;
/// `λ_min(last) ≤ DEGENERATE_FACTOR·λ_min(first)` counts as degenerating.
pub const DEGENERATE_FACTOR: f64 = 0.1;
/// `λ_min ≤ RESOLUTION_FLOOR·λ_max` is treated as numerically zero.
pub const RESOLUTION_FLOOR: f64 = 1e-8;
/// Slack allowed in the interlacing checks.
pub const INTERLACING_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Degenerating,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Degenerating => "degenerating",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// How extreme eigenvalues are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    /// Dense eigensolve of the assembled Gram matrix; `λ_min` is resolved
    /// down to about `10⁻¹⁵‖G‖`.
    Dense,
    /// Singular values of the sampled square root; `λ_min` is resolved down
    /// to about `10⁻³⁰‖G‖`. Residuals are still checked against the closed
    /// form Gram matrix.
    #[default]
    Factored,
}

impl fmt::Display for SpectralMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectralMethod::Dense => "dense",
            SpectralMethod::Factored => "factored",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBoundReport {
    /// Truncation parameters `N`; truncation `N` keeps the `2N+1` centered functions.
    pub truncations: Vec<usize>,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    /// Largest eigenpair residual `‖Gv − λv‖` seen.
    pub max_residual: f64,
    pub interval_length: f64,
    pub method: SpectralMethod,
    pub verdict: Verdict,
}

impl FrameBoundReport {
    /// Largest violation of `λ_min` nonincreasing / `λ_max` nondecreasing.
    pub fn interlacing_violation(&self) -> f64 {
        let lo = self.lambda_min.windows(2).map(|w| w[1] - w[0]);
        let hi = self.lambda_max.windows(2).map(|w| w[0] - w[1]);
        lo.chain(hi).fold(0.0, f64::max)
    }

    pub fn interlacing_holds(&self) -> bool {
        let scale = self.lambda_max.iter().copied().fold(1.0, f64::max);
        self.interlacing_violation() <= INTERLACING_SLACK * scale
    }
}

/// Stability rule on a sequence of truncations.
///
/// Degenerating when the last `λ_min` fell to a tenth of the first one or
/// below the resolution floor. Stable when `λ_min` moved by at most 5% on
/// each of the last two steps (three or more truncations needed).
pub fn classify(lambda_min: &[f64], lambda_max: &[f64]) -> Verdict {
    let (Some(&first), Some(&last)) = (lambda_min.first(), lambda_min.last()) else {
        return Verdict::Indeterminate;
    };
    let top = lambda_max.last().copied().unwrap_or(0.0);
    if last <= RESOLUTION_FLOOR * top || (lambda_min.len() >= 2 && last <= DEGENERATE_FACTOR * first) {
        return Verdict::Degenerating;
    }
    let n = lambda_min.len();
    if n >= 3
        && lambda_min[n - 3..]
            .windows(2)
            .all(|w| (w[1] - w[0]).abs() <= STABLE_RTOL * w[0])
    {
        return Verdict::Stable;
    }
    Verdict::Indeterminate
}

/// Positions `c−N ..= c+N` around the window center.
pub fn centered_range(family: &ExponentFamily, n: usize) -> Result<Range<usize>> {
    let c = family.center_position();
    if n > c || c + n >= family.len() {
        return Err(Error::invalid(format!(
            "truncation N = {n} needs {} exponents around the center, window has {}",
            2 * n + 1,
            family.len()
        )));
    }
    Ok(c - n..c + n + 1)
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::invalid("truncation grid is empty"));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("truncation grid not increasing"));
    }
    Ok(())
}

/// Extreme eigenvalues of the centered truncations of `family` on `interval`.
pub fn frame_bound_sequence(
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    interval: &IntervalSpec,
    n_grid: &[usize],
    method: SpectralMethod,
) -> Result<FrameBoundReport> {
    check_grid(n_grid)?;
    let n_max = *n_grid.last().expect("nonempty");
    let outer = centered_range(family, n_max)?;
    let positions: Vec<usize> = outer.collect();
    let system = ExponentialSystem::new(family.clone(), directions.clone())?.select(&positions)?;
    let gram = assemble_gram(&system, interval)?;
    let block = |n: usize| n_max - n..n_max + n + 1;
    let extremes: Vec<ExtremeEigen> = match method {
        SpectralMethod::Dense => n_grid
            .par_iter()
            .map(|&n| hermitian_extremes(&principal(gram.entries(), block(n))))
            .collect::<Result<_>>()?,
        SpectralMethod::Factored => {
            let factor = SampledFactor::new(&system, interval)?;
            n_grid
                .par_iter()
                .map(|&n| factor.extremes(block(n), Some(&principal(gram.entries(), block(n)))))
                .collect::<Result<_>>()?
        }
    };
    let lambda_min: Vec<f64> = extremes.iter().map(|e| e.min).collect();
    let lambda_max: Vec<f64> = extremes.iter().map(|e| e.max).collect();
    let verdict = classify(&lambda_min, &lambda_max);
    Ok(FrameBoundReport {
        truncations: n_grid.to_vec(),
        max_residual: extremes
            .iter()
            .map(|e| e.residual_min.max(e.residual_max))
            .fold(0.0, f64::max),
        lambda_min,
        lambda_max,
        interval_length: interval.length(),
        method,
        verdict,
    })
}

fn principal(m: &CMatrix, r: Range<usize>) -> CMatrix {
    let n = r.len();
    m.view((r.start, r.start), (n, n)).into_owned()
}

/// `{N/8, N/4, N/2, N}` with duplicates and zeros removed.
pub fn doubling_grid(n_max: usize) -> Vec<usize> {
    let mut g: Vec<usize> = [n_max / 8, n_max / 4, n_max / 2, n_max].into_iter().filter(|&n| n > 0).collect();
    g.dedup();
    g
}

/// Frame-bound reports over interval lengths `(0, L)`.
pub fn threshold_sweep(
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    lengths: &[f64],
    n_grid: &[usize],
    method: SpectralMethod,
    seed: Option<u64>,
) -> Result<SweepResult<FrameBoundReport>> {
    if lengths.is_empty() {
        return Err(Error::invalid("length grid is empty"));
    }
    if lengths.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("length grid not increasing"));
    }
    let points = lengths
        .par_iter()
        .map(|&len| {
            let interval = IntervalSpec::with_length(len)?;
            frame_bound_sequence(family, directions, &interval, n_grid, method)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        parameter: "interval_length".into(),
        grid: lengths.to_vec(),
        points,
        metadata: SweepMetadata { family: family.label().to_string(), d: directions.d(), seed },
    })
}

/// `(last degenerating length, first stable length after it)`.
pub fn transition_bracket(sweep: &SweepResult<FrameBoundReport>) -> Option<(f64, f64)> {
    let first_stable = sweep.points.iter().position(|p| p.verdict == Verdict::Stable)?;
    let last_degen = sweep.points[..first_stable]
        .iter()
        .rposition(|p| p.verdict == Verdict::Degenerating)?;
    Some((sweep.grid[last_degen], sweep.grid[first_stable]))
}

/// Vector Gram of a partition-aligned system against the direct sum of the
/// per-class scalar Grams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReduction {
    /// `max |G_vec − ⊕_j G_j|` entrywise.
    pub residual: f64,
    pub vector: ExtremeEigen,
    /// Extremes of each class Gram, class `j` at index `j − 1`.
    pub classes: Vec<ExtremeEigen>,
    /// `2π·D⁺(Ω_j)` per class.
    pub class_thresholds: Vec<f64>,
}

impl BlockReduction {
    /// Distance between the vector extremes and min/max over classes.
    pub fn reduction_gap(&self) -> f64 {
        let lo = self.classes.iter().map(|e| e.min).fold(f64::INFINITY, f64::min);
        let hi = self.classes.iter().map(|e| e.max).fold(f64::NEG_INFINITY, f64::max);
        (self.vector.min - lo).abs().max((self.vector.max - hi).abs())
    }
}

pub fn block_reduction(family: &ExponentFamily, partition: &Partition, interval: &IntervalSpec) -> Result<BlockReduction> {
    let directions = DirectionAssignment::from_partition(partition)?;
    let vector = assemble_gram(&ExponentialSystem::new(family.clone(), directions)?, interval)?;
    let mut direct = CMatrix::from_element(family.len(), family.len(), C64::new(0.0, 0.0));
    let mut classes = Vec::with_capacity(partition.d);
    for j in 1..=partition.d {
        let members = partition.members(j);
        if members.is_empty() {
            continue;
        }
        let sub = family.select(format!("{} class {j}", family.label()), &members)?;
        let scalar = DirectionAssignment::constant(&sub, 1, 1)?;
        let g = assemble_gram(&ExponentialSystem::new(sub, scalar)?, interval)?;
        for (a, &p) in members.iter().enumerate() {
            for (b, &q) in members.iter().enumerate() {
                direct[(p, q)] = g.entries()[(a, b)];
            }
        }
        classes.push(hermitian_extremes(g.entries())?);
    }
    let residual = max_entry_modulus(&(vector.entries() - &direct));
    Ok(BlockReduction {
        residual,
        vector: hermitian_extremes(vector.entries())?,
        classes,
        class_thresholds: partition
            .class_densities
            .iter()
            .map(|dj| 2.0 * std::f64::consts::PI * dj)
            .collect(),
    })
}

/// Gram of the centered truncation `N`, handy for export.
pub fn centered_gram(
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    interval: &IntervalSpec,
    n: usize,
) -> Result<GramMatrix> {
    let positions: Vec<usize> = centered_range(family, n)?.collect();
    assemble_gram(&ExponentialSystem::new(family.clone(), directions.clone())?.select(&positions)?, interval)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::exponents::{build_sharpness_partition, FamilySpec};

    fn integers(n: i64) -> ExponentFamily {
        FamilySpec::lattice(1.0, -n, n).generate(0).unwrap()
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(classify(&[1.0, 1.0, 1.0], &[2.0; 3]), Verdict::Stable);
        assert_eq!(classify(&[1.0, 0.9, 0.89], &[2.0; 3]), Verdict::Indeterminate);
        assert_eq!(classify(&[1.0, 0.5, 0.09], &[2.0; 3]), Verdict::Degenerating);
        assert_eq!(classify(&[1e-9], &[1.0]), Verdict::Degenerating);
        assert_eq!(classify(&[1.0, 1.0], &[1.0, 1.0]), Verdict::Indeterminate);
        assert_eq!(classify(&[], &[]), Verdict::Indeterminate);
    }

    #[test]
    fn parseval_sequence() {
        let f = integers(32);
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
        for method in [SpectralMethod::Dense, SpectralMethod::Factored] {
            let rep = frame_bound_sequence(&f, &u, &i, &[4, 8, 16, 32], method).unwrap();
            for (lo, hi) in rep.lambda_min.iter().zip(&rep.lambda_max) {
                assert!((lo - 2.0 * PI).abs() < 1e-10 && (hi - 2.0 * PI).abs() < 1e-10);
            }
            assert_eq!(rep.verdict, Verdict::Stable);
        }
    }

    #[test]
    fn truncation_must_fit_window() {
        let f = integers(5);
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
        assert!(frame_bound_sequence(&f, &u, &i, &[6], SpectralMethod::Dense).is_err());
        assert!(frame_bound_sequence(&f, &u, &i, &[3, 2], SpectralMethod::Dense).is_err());
    }

    #[test]
    fn doubling_grid_shapes() {
        assert_eq!(doubling_grid(128), vec![16, 32, 64, 128]);
        assert_eq!(doubling_grid(4), vec![1, 2, 4]);
    }

    #[test]
    fn even_odd_blocks() {
        let f = integers(10);
        let p = build_sharpness_partition(&f, 2, 0.5).unwrap();
        let r = block_reduction(&f, &p, &IntervalSpec::new(0.0, 2.0 * PI).unwrap()).unwrap();
        assert!(r.residual < 1e-12);
        assert!(r.reduction_gap() < 1e-9);
        assert_eq!(r.class_thresholds.len(), 2);
        assert!((r.class_thresholds[0] - PI).abs() < 1e-12);
    }
}
