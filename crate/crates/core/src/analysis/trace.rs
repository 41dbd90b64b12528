//! Trace bookkeeping for `S = P_r ∘ Q_{r+R}` restricted to `V_r`, where
//! `V_r = span{e_k : |ω_k − y| < r}` and `W_{r+R}` is spanned by the Fourier
//! grid functions with `|γ_n − y| < r + R`.

use std::f64::consts::PI;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::basisfuncs::DirectionAssignment;
use crate::exponents::{linear_fit, ExponentFamily};
use crate::gram::{assemble_gram, cross_inner, dual_family, ExponentialSystem, FourierGrid, FunctionSystem, IntervalSpec};
use crate::quadrature::DEFAULT_ORDER;
use crate::{CMatrix, Error, Result, C64};

/// Absolute slack in `|tr S| ≤ d·Card(Γ)`.
pub const TRACE_BOUND_SLACK: f64 = 1e-6;
/// Relative (to `Card(Ω_r)`) agreement required between the two trace routes.
pub const TRACE_AGREEMENT_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceExperiment {
    pub y: f64,
    pub r: f64,
    pub big_r: f64,
    pub d: usize,
    pub card_omega_r: usize,
    pub card_gamma: usize,
    /// `tr(G⁻¹X)` with `X[j][k] = (Q e_k, e_j)`.
    #[serde(with = "complex_pair")]
    pub trace_s: C64,
    /// `Card(Ω_r) + Σ_k ((Q − Id) e_k, φ_k)`.
    #[serde(with = "complex_pair")]
    pub trace_decomposed: C64,
    /// `‖(Q − Id) e_k‖` per `k ∈ Ω_r`.
    pub defect_norms: Vec<f64>,
    /// `‖φ_k‖` of the dual basis in `V_r`.
    pub dual_norms: Vec<f64>,
    pub biorthogonality_residual: f64,
}

impl TraceExperiment {
    pub fn trace_bound(&self) -> f64 {
        (self.d * self.card_gamma) as f64
    }

    pub fn trace_bound_holds(&self) -> bool {
        self.trace_s.norm() <= self.trace_bound() + TRACE_BOUND_SLACK
    }

    pub fn trace_disagreement(&self) -> f64 {
        (self.trace_s - self.trace_decomposed).norm()
    }

    pub fn traces_agree(&self) -> bool {
        self.trace_disagreement() <= TRACE_AGREEMENT_RTOL * self.card_omega_r as f64
    }

    pub fn max_defect(&self) -> f64 {
        self.defect_norms.iter().copied().fold(0.0, f64::max)
    }
}

/// Subsystem `{e_k : |ω_k − y| < r}`.
fn local_system(family: &ExponentFamily, directions: &DirectionAssignment, y: f64, r: f64) -> Result<ExponentialSystem> {
    let positions = family.positions_within(y, r);
    if positions.is_empty() {
        return Err(Error::InsufficientData(format!("no exponent within {r} of {y}")));
    }
    ExponentialSystem::new(family.clone(), directions.clone())?.select(&positions)
}

/// `A[k][p] = (e_k, f_p)` and the defects `‖e_k‖² − Σ_p |A[k][p]|²`.
fn grid_coefficients(system: &ExponentialSystem, grid: &FourierGrid, interval: &IntervalSpec) -> Result<(CMatrix, Vec<f64>)> {
    let a = if grid.is_empty() {
        CMatrix::zeros(system.len(), 0)
    } else {
        cross_inner(system, grid, interval, DEFAULT_ORDER)?
    };
    let len = interval.length();
    let defects = (0..system.len())
        .map(|k| {
            let captured: f64 = a.row(k).iter().map(|z| z.norm_sqr()).sum();
            let own: f64 = system.directions().at(k).iter().map(|z| z.norm_sqr()).sum::<f64>() * len;
            (own - captured).max(0.0).sqrt()
        })
        .collect();
    Ok((a, defects))
}

pub fn run_trace_experiment(
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    interval: &IntervalSpec,
    y: f64,
    r: f64,
    big_r: f64,
) -> Result<TraceExperiment> {
    if !(r > 0.0 && big_r > 0.0 && y.is_finite()) {
        return Err(Error::invalid(format!("need r > 0, R > 0 and finite y (got y={y}, r={r}, R={big_r})")));
    }
    let system = local_system(family, directions, y, r)?;
    let d = directions.d();
    let grid = FourierGrid::ball(*interval, y, r + big_r, d)?;
    let gram = assemble_gram(&system, interval)?;
    let dual = dual_family(&gram)?;
    let (a, defect_norms) = grid_coefficients(&system, &grid, interval)?;
    let n = system.len();

    // X[j][k] = (Q e_k, e_j) = Σ_p A[k][p]·conj(A[j][p])
    let x = a.conjugate() * a.transpose();
    let chol = Cholesky::new(gram.entries().clone())
        .ok_or_else(|| Error::Numerical("Cholesky factorization of V_r Gram failed".into()))?;
    let s = chol.solve(&x);
    let trace_s = s.trace();

    // Φ[k][p] = (φ_k, f_p) = Σ_l C[l][k]·A[l][p]
    let c = &dual.coefficients;
    let phi = c.transpose() * &a;
    let ge = gram.entries();
    let mut correction = C64::new(0.0, 0.0);
    for k in 0..n {
        let q_part: C64 = (0..a.ncols()).map(|p| a[(k, p)] * phi[(k, p)].conj()).sum();
        // (e_k, φ_k) = Σ_l conj(C[l][k])·(e_k, e_l) = Σ_l conj(C[l][k])·G[l][k]
        let id_part: C64 = (0..n).map(|l| c[(l, k)].conj() * ge[(l, k)]).sum();
        correction += q_part - id_part;
    }

    Ok(TraceExperiment {
        y,
        r,
        big_r,
        d,
        card_omega_r: n,
        card_gamma: grid.frequency_count(),
        trace_s,
        trace_decomposed: C64::new(n as f64, 0.0) + correction,
        defect_norms,
        dual_norms: dual.norms,
        biorthogonality_residual: dual.biorthogonality_residual,
    })
}

/// `y` at the window center and the largest `r` that keeps `margin`
/// exponents outside `Ω_r` on both sides.
pub fn default_trace_window(family: &ExponentFamily, margin: usize) -> Result<(f64, f64)> {
    let ex = family.exponents();
    if ex.len() < 2 * margin + 1 {
        return Err(Error::InsufficientData(format!("window of {} exponents is too small for margin {margin}", ex.len())));
    }
    let y = ex[family.center_position()];
    let r = (y - ex[margin]).min(ex[ex.len() - 1 - margin] - y);
    if !(r > 0.0) {
        return Err(Error::InsufficientData("margin leaves no room around the center".into()));
    }
    Ok((y, r))
}

/// `8d/|I|·Σ_{n≥0} (2πn/|I| + R)⁻²`, summed over 10⁶ terms plus an integral
/// tail that bounds the remainder from above.
pub fn defect_majorant(d: usize, length: f64, big_r: f64) -> f64 {
    const TERMS: usize = 1_000_000;
    let step = 2.0 * PI / length;
    // summed from the small end upward: fewer rounding losses
    let head: f64 = (0..TERMS).rev().map(|n| (step * n as f64 + big_r).powi(-2)).sum();
    // Σ_{n≥N} f(n) ≤ ∫_{N−1}^∞ f for decreasing f
    let tail = 1.0 / (step * (step * (TERMS - 1) as f64 + big_r));
    8.0 * d as f64 / length * (head + tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectDecay {
    pub radii: Vec<f64>,
    /// `max_k ‖(Q_{r+R} − Id) e_k‖` per `R`.
    pub max_defect: Vec<f64>,
    pub majorant: Vec<f64>,
    /// Log-log fit; absent when every defect is numerically zero.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub degenerate: bool,
}

impl DefectDecay {
    pub fn majorant_holds(&self) -> bool {
        self.max_defect
            .iter()
            .zip(&self.majorant)
            .all(|(d, m)| d * d <= *m)
    }

    pub fn describe_fit(&self) -> String {
        match (self.slope, self.intercept) {
            (Some(s), Some(c)) => format!("slope {s:.6}, intercept {c:.6}"),
            _ => "degenerate: zero defect".into(),
        }
    }
}

/// Minimum number of `R` values in a decay fit.
pub const MIN_DECAY_POINTS: usize = 4;
/// `defect² ≤ ZERO_DEFECT_RTOL·|I|` is treated as zero.
pub const ZERO_DEFECT_RTOL: f64 = 1e-12;

pub fn defect_decay_fit(
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    interval: &IntervalSpec,
    y: f64,
    r: f64,
    r_grid: &[f64],
) -> Result<DefectDecay> {
    if r_grid.len() < MIN_DECAY_POINTS {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least {MIN_DECAY_POINTS} values of R, got {}",
            r_grid.len()
        )));
    }
    if r_grid.iter().any(|v| !(*v > 0.0)) || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("R grid must be positive and increasing"));
    }
    if r_grid[r_grid.len() - 1] < 10.0 * r_grid[0] {
        return Err(Error::InsufficientData("R grid must span at least one decade".into()));
    }
    let system = local_system(family, directions, y, r)?;
    let d = directions.d();
    let mut max_defect = Vec::with_capacity(r_grid.len());
    for &big_r in r_grid {
        let grid = FourierGrid::ball(*interval, y, r + big_r, d)?;
        let (_, defects) = grid_coefficients(&system, &grid, interval)?;
        max_defect.push(defects.into_iter().fold(0.0, f64::max));
    }
    let majorant = r_grid.iter().map(|&big_r| defect_majorant(d, interval.length(), big_r)).collect();
    let degenerate = max_defect.iter().all(|v| v * v <= ZERO_DEFECT_RTOL * interval.length());
    let (slope, intercept) = if degenerate {
        (None, None)
    } else {
        let xs: Vec<f64> = r_grid.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = max_defect.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
        let (s, c, _) = linear_fit(&xs, &ys)?;
        (Some(s), Some(c))
    };
    Ok(DefectDecay { radii: r_grid.to_vec(), max_defect, majorant, slope, intercept, degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityChainRow {
    pub r: f64,
    pub card_omega_r: usize,
    pub card_gamma: usize,
    /// `Σ_k ‖(Q−Id)e_k‖·‖φ_k‖ / Card(Γ)`.
    pub epsilon: f64,
    /// `Card(Ω_r) ≤ (d + ε)·Card(Γ)`.
    pub holds: bool,
    /// `π·(Card(Ω_r)/(d+ε) − 1)/(r+R)`: lower bound on `|I|` implied by the
    /// counting inequality at this `r`, using `Card(Γ) ≤ |I|(r+R)/π + 1`.
    pub finite_length_bound: f64,
    /// `2π·(Card(Ω_r)/2r)/(d+ε)`, the same bound with densities in place of counts.
    pub asymptotic_length_bound: f64,
    /// `finite_length_bound ≤ |I|`.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityChainReport {
    pub y: f64,
    pub big_r: f64,
    pub d: usize,
    pub interval_length: f64,
    pub rows: Vec<DensityChainRow>,
}

pub fn density_chain_check(
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    interval: &IntervalSpec,
    y: f64,
    r_grid: &[f64],
    big_r: f64,
) -> Result<DensityChainReport> {
    if r_grid.is_empty() || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("r grid must be nonempty and increasing"));
    }
    let d = directions.d();
    let len = interval.length();
    let rows = r_grid
        .iter()
        .map(|&r| {
            let t = run_trace_experiment(family, directions, interval, y, r, big_r)?;
            let spill: f64 = t.defect_norms.iter().zip(&t.dual_norms).map(|(a, b)| a * b).sum();
            let card_gamma = t.card_gamma.max(1) as f64;
            let epsilon = spill / card_gamma;
            let omega = t.card_omega_r as f64;
            let factor = d as f64 + epsilon;
            let finite_length_bound = PI * (omega / factor - 1.0) / (r + big_r);
            Ok(DensityChainRow {
                r,
                card_omega_r: t.card_omega_r,
                card_gamma: t.card_gamma,
                epsilon,
                holds: omega <= factor * t.card_gamma as f64 * (1.0 + 1e-12),
                finite_length_bound,
                asymptotic_length_bound: 2.0 * PI * (omega / (2.0 * r)) / factor,
                consistent: finite_length_bound <= len * (1.0 + 1e-12),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityChainReport { y, big_r, d, interval_length: len, rows })
}

pub(crate) mod complex_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::C64;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}
