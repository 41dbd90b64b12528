//! Exponent families on a finite index window.
//!
//! A family stores real exponents `ω_k` for a contiguous range of integer
//! indices `k`. Everything here is exact over the finite window; quantities
//! that are limits for infinite sequences (the upper density) are estimated by
//! fitting over a radius grid.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative slack used when comparing exponent differences against thresholds.
const GAP_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRecord", into = "FamilyRecord")]
pub struct ExponentFamily {
    label: String,
    first_index: i64,
    exponents: Vec<f64>,
}

/// Structured text record of a family: `{label, first_index, exponents}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FamilyRecord {
    label: String,
    #[serde(default)]
    first_index: i64,
    exponents: Vec<f64>,
}

impl TryFrom<FamilyRecord> for ExponentFamily {
    type Error = Error;

    fn try_from(rec: FamilyRecord) -> Result<Self> {
        ExponentFamily::new(rec.label, rec.first_index, rec.exponents)
    }
}

impl From<ExponentFamily> for FamilyRecord {
    fn from(f: ExponentFamily) -> Self {
        FamilyRecord { label: f.label, first_index: f.first_index, exponents: f.exponents }
    }
}

impl ExponentFamily {
    pub fn new(label: impl Into<String>, first_index: i64, exponents: Vec<f64>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::invalid("exponent family must be nonempty"));
        }
        if let Some(position) = exponents.iter().position(|w| !w.is_finite()) {
            return Err(Error::Unsorted { position });
        }
        if let Some(i) = exponents.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Unsorted { position: i + 1 });
        }
        Ok(Self { label: label.into(), first_index, exponents })
    }

    /// Family indexed from zero.
    pub fn explicit(label: impl Into<String>, exponents: Vec<f64>) -> Result<Self> {
        Self::new(label, 0, exponents)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.exponents.len() as i64 - 1
    }

    pub fn index_range(&self) -> RangeInclusive<i64> {
        self.first_index..=self.last_index()
    }

    /// Position in the backing vector of index `k`.
    pub fn position(&self, k: i64) -> Option<usize> {
        let p = k.checked_sub(self.first_index)?;
        (p >= 0 && (p as usize) < self.exponents.len()).then_some(p as usize)
    }

    pub fn index_of(&self, position: usize) -> i64 {
        self.first_index + position as i64
    }

    pub fn get(&self, k: i64) -> Option<f64> {
        self.position(k).map(|p| self.exponents[p])
    }

    /// `ω_last − ω_first`.
    pub fn span(&self) -> f64 {
        self.exponents[self.exponents.len() - 1] - self.exponents[0]
    }

    /// Position of the middle element of the window.
    pub fn center_position(&self) -> usize {
        self.exponents.len() / 2
    }

    /// Every exponent multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        Self::new(
            format!("{}*{c}", self.label),
            self.first_index,
            self.exponents.iter().map(|w| w * c).collect(),
        )
    }

    /// The contiguous sub-window of positions `range`, keeping indices.
    pub fn window(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > self.len() {
            return Err(Error::invalid(format!(
                "window {range:?} outside family of length {}",
                self.len()
            )));
        }
        Self::new(
            self.label.clone(),
            self.index_of(range.start),
            self.exponents[range].to_vec(),
        )
    }

    /// Exponents at the given positions, reindexed from zero.
    pub fn select(&self, label: impl Into<String>, positions: &[usize]) -> Result<Self> {
        Self::explicit(label, positions.iter().map(|&p| self.exponents[p]).collect())
    }

    /// Positions `k` with `|ω_k − y| < r`.
    pub fn positions_within(&self, y: f64, r: f64) -> Vec<usize> {
        self.exponents
            .iter()
            .enumerate()
            .filter(|(_, w)| (*w - y).abs() < r)
            .map(|(p, _)| p)
            .collect()
    }
}

/// Generator description `{kind, params}`; the seed is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `ω_k = offset + k·spacing` for `k` in `window`.
    Lattice {
        spacing: f64,
        window: (i64, i64),
        #[serde(default)]
        offset: f64,
    },
    /// Lattice points moved by independent uniform draws in `[−p, p]`.
    PerturbedLattice {
        spacing: f64,
        window: (i64, i64),
        max_perturbation: f64,
    },
    /// Pairs `{offset + n·spacing, offset + n·spacing + δ}` for `n` in `window`.
    ClusteredPairs {
        spacing: f64,
        delta: f64,
        window: (i64, i64),
        #[serde(default)]
        offset: f64,
    },
    Explicit {
        exponents: Vec<f64>,
        #[serde(default)]
        first_index: i64,
    },
}

impl FamilySpec {
    pub fn lattice(spacing: f64, lo: i64, hi: i64) -> Self {
        FamilySpec::Lattice { spacing, window: (lo, hi), offset: 0.0 }
    }

    pub fn generate(&self, seed: u64) -> Result<ExponentFamily> {
        let check_window = |(lo, hi): (i64, i64)| {
            if lo > hi {
                Err(Error::invalid(format!("empty window [{lo}, {hi}]")))
            } else {
                Ok(())
            }
        };
        let check_spacing = |s: f64| {
            if s > 0.0 && s.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("spacing must be positive, got {s}")))
            }
        };
        match *self {
            FamilySpec::Lattice { spacing, window, offset } => {
                check_spacing(spacing)?;
                check_window(window)?;
                let ex = (window.0..=window.1).map(|k| offset + k as f64 * spacing).collect();
                ExponentFamily::new(format!("lattice(h={spacing},off={offset})"), window.0, ex)
            }
            FamilySpec::PerturbedLattice { spacing, window, max_perturbation } => {
                check_spacing(spacing)?;
                check_window(window)?;
                if !(0.0..0.5 * spacing).contains(&max_perturbation) {
                    return Err(Error::invalid(format!(
                        "max perturbation {max_perturbation} must lie in [0, spacing/2)"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ex = (window.0..=window.1)
                    .map(|k| {
                        let p = if max_perturbation > 0.0 {
                            rng.random_range(-max_perturbation..=max_perturbation)
                        } else {
                            0.0
                        };
                        k as f64 * spacing + p
                    })
                    .collect();
                ExponentFamily::new(
                    format!("perturbed-lattice(h={spacing},p={max_perturbation},seed={seed})"),
                    window.0,
                    ex,
                )
            }
            FamilySpec::ClusteredPairs { spacing, delta, window, offset } => {
                check_spacing(spacing)?;
                check_window(window)?;
                if !(delta > 0.0 && delta < spacing) {
                    return Err(Error::invalid(format!(
                        "cluster offset {delta} must lie in (0, spacing)"
                    )));
                }
                let ex = (window.0..=window.1)
                    .flat_map(|n| {
                        let base = offset + n as f64 * spacing;
                        [base, base + delta]
                    })
                    .collect();
                ExponentFamily::new(
                    format!("clustered-pairs(h={spacing},delta={delta})"),
                    2 * window.0,
                    ex,
                )
            }
            FamilySpec::Explicit { ref exponents, first_index } => {
                ExponentFamily::new("explicit", first_index, exponents.clone())
            }
        }
    }
}

/// Gap statistics of a finite window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Minimal consecutive difference; `None` for a single exponent (no pairs).
    pub gamma: Option<f64>,
    pub satisfies_strict_gap: bool,
    /// Single-exponent window: the strict gap holds vacuously.
    pub degenerate: bool,
    pub m: usize,
    /// `min_k (ω_{k+M} − ω_k)/M`; `None` when the window has at most `M` elements.
    pub gamma_prime: Option<f64>,
    pub satisfies_weak_gap: Option<bool>,
}

impl GapReport {
    /// Whether `ω_{k+M} − ω_k ≥ M·threshold` on the whole window.
    pub fn weak_gap_holds_at(&self, threshold: f64) -> Option<bool> {
        self.gamma_prime
            .map(|g| g >= threshold - GAP_RTOL * threshold.abs().max(1.0))
    }

    pub fn insufficient_data(&self) -> bool {
        self.gamma_prime.is_none()
    }
}

pub fn validate_gaps(family: &ExponentFamily, m: usize) -> Result<GapReport> {
    if m == 0 {
        return Err(Error::invalid("M must be a positive integer"));
    }
    let ex = family.exponents();
    let gamma = ex.windows(2).map(|w| w[1] - w[0]).reduce(f64::min);
    let degenerate = gamma.is_none();
    let satisfies_strict_gap = gamma.is_none_or(|g| g > 0.0);
    let gamma_prime = (ex.len() > m).then(|| {
        (0..ex.len() - m)
            .map(|k| (ex[k + m] - ex[k]) / m as f64)
            .fold(f64::INFINITY, f64::min)
    });
    Ok(GapReport {
        gamma,
        satisfies_strict_gap,
        degenerate,
        m,
        gamma_prime,
        satisfies_weak_gap: gamma_prime.map(|g| g > 0.0),
    })
}

/// A maximal run of consecutive exponents with successive differences `< γ′`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    /// Index of the first exponent of the chain.
    pub start: i64,
    pub len: usize,
    /// The chain touches the window edge, so one bounding gap is unobserved.
    pub boundary_incomplete: bool,
}

impl Chain {
    pub fn indices(&self) -> RangeInclusive<i64> {
        self.start..=self.start + self.len as i64 - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDecomposition {
    pub chains: Vec<Chain>,
    pub gamma_prime: f64,
    pub m: usize,
}

impl ChainDecomposition {
    /// Chain containing index `k` and the position of `k` inside it.
    pub fn locate(&self, k: i64) -> Option<(&Chain, usize)> {
        let i = self.chains.partition_point(|c| c.start + c.len as i64 <= k);
        let c = self.chains.get(i)?;
        (c.start <= k).then(|| (c, (k - c.start) as usize))
    }
}

pub fn detect_chains(family: &ExponentFamily, gamma_prime: f64, m: usize) -> Result<ChainDecomposition> {
    if !(gamma_prime > 0.0) {
        return Err(Error::invalid("gamma' must be positive"));
    }
    if m == 0 {
        return Err(Error::invalid("M must be a positive integer"));
    }
    let ex = family.exponents();
    let mut chains = Vec::new();
    let mut start = 0usize;
    for p in 1..=ex.len() {
        let breaks = p == ex.len() || ex[p] - ex[p - 1] >= gamma_prime;
        if breaks {
            let len = p - start;
            let chain = Chain {
                start: family.index_of(start),
                len,
                boundary_incomplete: start == 0 || p == ex.len(),
            };
            if len > m {
                return Err(Error::WeakGapViolated { start: chain.start, len, m });
            }
            chains.push(chain);
            start = p;
        }
    }
    Ok(ChainDecomposition { chains, gamma_prime, m })
}

/// `n⁺(r)`: the largest number of exponents in a closed interval of length `r`.
///
/// The supremum over positions is attained with the left endpoint on an
/// exponent, so a two-pointer sweep is exact.
pub fn counting_function(family: &ExponentFamily, r: f64) -> usize {
    if !(r >= 0.0) {
        return 0;
    }
    let ex = family.exponents();
    let mut best = 0;
    let mut hi = 0;
    for lo in 0..ex.len() {
        if hi < lo {
            hi = lo;
        }
        while hi < ex.len() && ex[hi] - ex[lo] <= r {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
    pub dplus_estimate: f64,
    /// Intercept of the fitted line.
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// Positions in `radii` used for the fit.
    pub fit_window: std::ops::Range<usize>,
}

/// Estimates the upper density by the least-squares slope of `n⁺(r)` against
/// `r` over the upper half of the radius grid.
pub fn estimate_density(family: &ExponentFamily, r_grid: &[f64]) -> Result<DensityEstimate> {
    if let Some(r) = r_grid.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::invalid(format!("radius {r} must be positive")));
    }
    let span = family.span();
    if let Some(r) = r_grid.iter().find(|r| **r > span * (1.0 + GAP_RTOL)) {
        return Err(Error::invalid(format!("radius {r} exceeds window span {span}")));
    }
    let fit_window = r_grid.len() / 2..r_grid.len();
    if fit_window.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "density fit needs at least 3 points in the upper half of the grid, got {}",
            fit_window.len()
        )));
    }
    let counts: Vec<usize> = r_grid.iter().map(|&r| counting_function(family, r)).collect();
    let xs = &r_grid[fit_window.clone()];
    let ys: Vec<f64> = counts[fit_window.clone()].iter().map(|&c| c as f64).collect();
    let (slope, intercept, residual) = linear_fit(xs, &ys)?;
    Ok(DensityEstimate {
        radii: r_grid.to_vec(),
        counts,
        dplus_estimate: slope.max(0.0),
        intercept,
        residual,
        fit_window,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns the RMS residual too.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("fit abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok((slope, intercept, (ss / n).sqrt()))
}

/// Assignment of every exponent in the window to one of `d` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub d: usize,
    pub first_index: i64,
    /// Class label in `1..=d` per position.
    pub class_of: Vec<usize>,
    pub target_alpha: f64,
    /// Period, in lattice points, of the class pattern.
    pub period: usize,
    /// Exact upper density of each class (index `j − 1` for class `j`).
    pub class_densities: Vec<f64>,
}

impl Partition {
    pub fn class_of_index(&self, k: i64) -> Option<usize> {
        let p = k.checked_sub(self.first_index)?;
        usize::try_from(p).ok().and_then(|p| self.class_of.get(p).copied())
    }

    /// Positions belonging to class `j`.
    pub fn members(&self, j: usize) -> Vec<usize> {
        self.class_of
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == j)
            .map(|(p, _)| p)
            .collect()
    }

    pub fn max_class_density(&self) -> f64 {
        self.class_densities.iter().copied().fold(0.0, f64::max)
    }
}

/// Largest period tried when matching `alpha` exactly.
pub const MAX_PARTITION_PERIOD: usize = 64;

/// Splits a lattice family into `d` classes whose largest upper density is
/// `alpha`, for `D⁺/d ≤ alpha ≤ D⁺`.
///
/// Per period of `P` lattice points a run of `c` consecutive points goes to
/// class 1 and the remaining `P − c` are dealt round-robin to classes
/// `2..=d`. The smallest `P ≤ MAX_PARTITION_PERIOD` with `c/P = alpha/D⁺`
/// is used; otherwise `P = MAX_PARTITION_PERIOD` and `c = ⌈P·alpha/D⁺⌉`.
pub fn build_sharpness_partition(family: &ExponentFamily, d: usize, alpha: f64) -> Result<Partition> {
    if d == 0 {
        return Err(Error::invalid("d must be a positive integer"));
    }
    let spacing = lattice_spacing(family).ok_or(Error::NotPeriodic)?;
    let dplus = 1.0 / spacing;
    let (lo, hi) = (dplus / d as f64, dplus);
    let tol = GAP_RTOL * dplus;
    if !(alpha >= lo - tol && alpha <= hi + tol) {
        return Err(Error::AlphaOutOfRange { alpha, lo, hi });
    }
    let ratio = (alpha / dplus).clamp(1.0 / d as f64, 1.0);
    let (period, run) = (1..=MAX_PARTITION_PERIOD)
        .find_map(|p| {
            let c = (ratio * p as f64).round();
            ((c / p as f64 - ratio).abs() <= 1e-9).then_some((p, c as usize))
        })
        .unwrap_or_else(|| {
            let p = MAX_PARTITION_PERIOD;
            (p, ((ratio * p as f64).ceil() as usize).min(p))
        });

    let class_of: Vec<usize> = family
        .index_range()
        .map(|k| {
            let residue = k.rem_euclid(period as i64) as usize;
            if residue < run || d == 1 {
                1
            } else {
                2 + (residue - run) % (d - 1)
            }
        })
        .collect();

    let mut per_period = vec![0usize; d];
    for residue in 0..period {
        let c = if residue < run || d == 1 { 0 } else { 1 + (residue - run) % (d - 1) };
        per_period[c] += 1;
    }
    let class_densities = per_period
        .iter()
        .map(|&c| c as f64 / (period as f64 * spacing))
        .collect();

    Ok(Partition {
        d,
        first_index: family.first_index(),
        class_of,
        target_alpha: alpha,
        period,
        class_densities,
    })
}

/// Common spacing if the family is an arithmetic progression of lattice
/// points `k·h + c` indexed by `k`.
fn lattice_spacing(family: &ExponentFamily) -> Option<f64> {
    let ex = family.exponents();
    if ex.len() < 2 {
        return None;
    }
    let h = (ex[ex.len() - 1] - ex[0]) / (ex.len() - 1) as f64;
    if !(h > 0.0) {
        return None;
    }
    let ok = ex
        .iter()
        .enumerate()
        .all(|(p, &w)| (w - (ex[0] + p as f64 * h)).abs() <= 1e-9 * h.max(w.abs()));
    ok.then_some(h)
}
