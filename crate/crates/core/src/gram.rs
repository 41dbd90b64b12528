//! Inner products in `L²(I, ℂ^d)`, Gram matrices, Fourier grids, dual
//! families and orthogonal projections.
//!
//! Inner products are linear in the first argument:
//! `(f, g) = ∫_I Σ_c f_c(t)·conj(g_c(t)) dt`.
//! Gram matrices use `G[k][n] = (e_n, e_k)` so that `x*Gx = ‖Σ x_k e_k‖²`.

use std::f64::consts::PI;

use nalgebra::Cholesky;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::spectral::hermitian_extremes;
use crate::basisfuncs::{basis_vector, CoefficientVector, DirectionAssignment, DividedDifferenceBasis};
use crate::exponents::ExponentFamily;
use crate::quadrature::{QuadratureRule, DEFAULT_ORDER};
use crate::{CMatrix, Error, Result, C64};

/// Near-singularity threshold: `λ_min ≤ NEAR_SINGULAR_RTOL·‖G‖`.
pub const NEAR_SINGULAR_RTOL: f64 = 1e-10;

/// Bounded observation interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRecord", into = "IntervalRecord")]
pub struct IntervalSpec {
    a: f64,
    b: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalRecord {
    a: f64,
    b: f64,
}

impl TryFrom<IntervalRecord> for IntervalSpec {
    type Error = Error;

    fn try_from(r: IntervalRecord) -> Result<Self> {
        IntervalSpec::new(r.a, r.b)
    }
}

impl From<IntervalSpec> for IntervalRecord {
    fn from(i: IntervalSpec) -> Self {
        IntervalRecord { a: i.a, b: i.b }
    }
}

impl IntervalSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::invalid(format!("interval ({a}, {b}) must satisfy a < b")));
        }
        Ok(Self { a, b })
    }

    /// `(0, length)`.
    pub fn with_length(length: f64) -> Result<Self> {
        Self::new(0.0, length)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
}

/// `∫_I e^{iθt} dt`, written as `e^{iθc}·2 sin(θh)/θ` about the midpoint `c`
/// with half-length `h`, which has no cancellation for any `θ`.
pub fn exp_inner_closed_form(theta: f64, interval: &IntervalSpec) -> C64 {
    let len = interval.length();
    let c = interval.midpoint();
    let phase = C64::from_polar(1.0, theta * c);
    if (theta * len).abs() <= 1e-8 {
        // sinc(x) = 1 − x²/6 + …, x ≤ 5·10⁻⁹
        return phase * len;
    }
    phase * (2.0 * (0.5 * theta * len).sin() / theta)
}

/// A function `scale·U·e^{iωt}`.
#[derive(Debug, Clone, Copy)]
pub struct Atom<'a> {
    pub frequency: f64,
    pub scale: f64,
    pub direction: &'a [C64],
}

/// A finite list of functions `I → ℂ^d`.
pub trait FunctionSystem: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimension `d` of the value space.
    fn dim(&self) -> usize;

    /// Writes the value of function `i` at `t` into `out` (length `dim`).
    fn eval_into(&self, i: usize, t: f64, out: &mut [C64]);

    /// Range `[lo, hi]` covering all frequencies present in the functions.
    fn frequency_range(&self) -> (f64, f64);

    /// Largest polynomial degree multiplying an exponential.
    fn poly_degree(&self) -> usize {
        0
    }

    /// Closed form of function `i` when it is a pure exponential.
    fn atom(&self, _i: usize) -> Option<Atom<'_>> {
        None
    }

    /// Whether the functions are orthonormal in `L²(interval)`.
    fn is_orthonormal_on(&self, _interval: &IntervalSpec) -> bool {
        false
    }

    fn describe(&self) -> String;
}

/// Vector exponentials `e_k(t) = U_k e^{iω_k t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialSystem {
    family: ExponentFamily,
    directions: DirectionAssignment,
}

impl ExponentialSystem {
    pub fn new(family: ExponentFamily, directions: DirectionAssignment) -> Result<Self> {
        directions.check_matches(&family)?;
        Ok(Self { family, directions })
    }

    pub fn family(&self) -> &ExponentFamily {
        &self.family
    }

    pub fn directions(&self) -> &DirectionAssignment {
        &self.directions
    }

    /// Subsystem on window positions `positions`.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        Self::new(
            self.family.select(self.family.label().to_string(), positions)?,
            self.directions.select(positions)?,
        )
    }
}

impl FunctionSystem for ExponentialSystem {
    fn len(&self) -> usize {
        self.family.len()
    }

    fn dim(&self) -> usize {
        self.directions.d()
    }

    fn eval_into(&self, i: usize, t: f64, out: &mut [C64]) {
        let z = C64::from_polar(1.0, self.family.exponents()[i] * t);
        for (o, u) in out.iter_mut().zip(self.directions.at(i)) {
            *o = u * z;
        }
    }

    fn frequency_range(&self) -> (f64, f64) {
        let ex = self.family.exponents();
        (ex[0], ex[ex.len() - 1])
    }

    fn atom(&self, i: usize) -> Option<Atom<'_>> {
        Some(Atom {
            frequency: self.family.exponents()[i],
            scale: 1.0,
            direction: self.directions.at(i),
        })
    }

    fn describe(&self) -> String {
        format!("exponential[{}; d={}; n={}]", self.family.label(), self.dim(), self.len())
    }
}

/// Divided-difference functions `U_k f_k(t − c)`, optionally normalized in
/// `L²(I)`.
///
/// The time origin `c` defaults to 0. Since `e^{iω(t−c)} = e^{−iωc}e^{iωt}`,
/// moving it keeps the span of every chain; it only changes which basis of
/// that span is used.
#[derive(Debug, Clone, PartialEq)]
pub struct DividedDifferenceSystem {
    basis: DividedDifferenceBasis,
    directions: DirectionAssignment,
    origin: f64,
    scales: Vec<f64>,
    normalized: bool,
}

impl DividedDifferenceSystem {
    pub fn raw(basis: DividedDifferenceBasis, directions: DirectionAssignment) -> Result<Self> {
        directions.check_matches(basis.family())?;
        let scales = vec![1.0; basis.len()];
        Ok(Self { basis, directions, origin: 0.0, scales, normalized: false })
    }

    /// Each `f_k` divided by its `L²(I)` norm.
    pub fn normalized(basis: DividedDifferenceBasis, directions: DirectionAssignment, interval: &IntervalSpec) -> Result<Self> {
        Self::raw(basis, directions)?.normalize(interval)
    }

    /// Same functions evaluated at `t − origin`; drops any normalization.
    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self.scales.fill(1.0);
        self.normalized = false;
        self
    }

    /// Rescales every function to unit norm on `interval`.
    pub fn normalize(mut self, interval: &IntervalSpec) -> Result<Self> {
        self.scales.fill(1.0);
        let norms: Vec<f64> = (0..self.len())
            .map(|p| dd_inner_at(&self, p, p, interval, DEFAULT_ORDER).map(|z| z.re.max(0.0).sqrt()))
            .collect::<Result<_>>()?;
        if let Some(p) = norms.iter().position(|n| !(*n > 0.0)) {
            return Err(Error::Numerical(format!("divided difference at position {p} vanishes on I")));
        }
        self.scales = norms.iter().map(|n| 1.0 / n).collect();
        self.normalized = true;
        Ok(self)
    }

    pub fn basis(&self) -> &DividedDifferenceBasis {
        &self.basis
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    fn value(&self, p: usize, t: f64) -> C64 {
        self.basis.eval(p, t - self.origin) * self.scales[p]
    }
}

impl FunctionSystem for DividedDifferenceSystem {
    fn len(&self) -> usize {
        self.basis.len()
    }

    fn dim(&self) -> usize {
        self.directions.d()
    }

    fn eval_into(&self, i: usize, t: f64, out: &mut [C64]) {
        let z = self.value(i, t);
        for (o, u) in out.iter_mut().zip(self.directions.at(i)) {
            *o = u * z;
        }
    }

    fn frequency_range(&self) -> (f64, f64) {
        let ex = self.basis.family().exponents();
        (ex[0], ex[ex.len() - 1])
    }

    fn poly_degree(&self) -> usize {
        self.basis.chains().chains.iter().map(|c| c.len - 1).max().unwrap_or(0)
    }

    fn atom(&self, i: usize) -> Option<Atom<'_>> {
        (self.basis.order(i) == 0 && self.origin == 0.0).then(|| Atom {
            frequency: self.basis.family().exponents()[i],
            scale: self.scales[i],
            direction: self.directions.at(i),
        })
    }

    fn describe(&self) -> String {
        format!(
            "divided-difference[{}; d={}; n={}; gamma'={}; M={}; origin={}; normalized={}]",
            self.basis.family().label(),
            self.dim(),
            self.len(),
            self.basis.chains().gamma_prime,
            self.basis.chains().m,
            self.origin,
            self.normalized
        )
    }
}

/// Orthonormal grid `f_{n,j}(t) = |I|^{-1/2} E_j e^{iγ_n t}`, `γ_n = 2πn/|I|`.
///
/// Function `i` corresponds to `n = n_lo + i / d`, `j = 1 + i % d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierGrid {
    interval: IntervalSpec,
    n_lo: i64,
    count: usize,
    d: usize,
    axes: Vec<Vec<C64>>,
}

impl FourierGrid {
    /// Grid over `n ∈ [n_lo, n_hi]` (empty when `n_hi < n_lo`).
    pub fn new(interval: IntervalSpec, n_lo: i64, n_hi: i64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("direction space dimension must be positive"));
        }
        let count = if n_hi >= n_lo { (n_hi - n_lo + 1) as usize } else { 0 };
        let axes = (1..=d).map(|j| basis_vector(d, j)).collect();
        Ok(Self { interval, n_lo, count, d, axes })
    }

    /// `{n : |γ_n − y| < radius}` (strict).
    pub fn ball(interval: IntervalSpec, y: f64, radius: f64, d: usize) -> Result<Self> {
        let step = 2.0 * PI / interval.length();
        let lo = ((y - radius) / step).floor() as i64 - 1;
        let hi = ((y + radius) / step).ceil() as i64 + 1;
        let inside: Vec<i64> = (lo..=hi)
            .filter(|&n| (Self::gamma_on(&interval, n) - y).abs() < radius)
            .collect();
        match (inside.first(), inside.last()) {
            (Some(&a), Some(&b)) => Self::new(interval, a, b, d),
            _ => Self::new(interval, 0, -1, d),
        }
    }

    fn gamma_on(interval: &IntervalSpec, n: i64) -> f64 {
        2.0 * PI * n as f64 / interval.length()
    }

    pub fn gamma(&self, n: i64) -> f64 {
        Self::gamma_on(&self.interval, n)
    }

    pub fn interval(&self) -> &IntervalSpec {
        &self.interval
    }

    /// Grid indices `n` covered.
    pub fn indices(&self) -> std::ops::Range<i64> {
        self.n_lo..self.n_lo + self.count as i64
    }

    /// Number of distinct frequencies, i.e. `Card(Γ)`.
    pub fn frequency_count(&self) -> usize {
        self.count
    }

    /// `(n, j)` of function `i`.
    pub fn label(&self, i: usize) -> (i64, usize) {
        (self.n_lo + (i / self.d) as i64, 1 + i % self.d)
    }
}

impl FunctionSystem for FourierGrid {
    fn len(&self) -> usize {
        self.count * self.d
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn eval_into(&self, i: usize, t: f64, out: &mut [C64]) {
        let (n, j) = self.label(i);
        out.fill(C64::new(0.0, 0.0));
        out[j - 1] = C64::from_polar(self.interval.length().powf(-0.5), self.gamma(n) * t);
    }

    fn frequency_range(&self) -> (f64, f64) {
        if self.count == 0 {
            return (0.0, 0.0);
        }
        (self.gamma(self.n_lo), self.gamma(self.n_lo + self.count as i64 - 1))
    }

    fn atom(&self, i: usize) -> Option<Atom<'_>> {
        let (n, j) = self.label(i);
        Some(Atom {
            frequency: self.gamma(n),
            scale: self.interval.length().powf(-0.5),
            direction: &self.axes[j - 1],
        })
    }

    fn is_orthonormal_on(&self, interval: &IntervalSpec) -> bool {
        *interval == self.interval
    }

    fn describe(&self) -> String {
        format!("fourier-grid[n={:?}; d={}]", self.indices(), self.d)
    }
}

fn h_inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// Quadrature rule adequate for products `a_i·conj(b_j)`.
fn product_rule(a: &dyn FunctionSystem, b: &dyn FunctionSystem, interval: &IntervalSpec, order: usize) -> Result<QuadratureRule> {
    let (alo, ahi) = a.frequency_range();
    let (blo, bhi) = b.frequency_range();
    let speed = (ahi - blo).abs().max((alo - bhi).abs());
    let poly = a.poly_degree() + b.poly_degree();
    QuadratureRule::panels(interval.a(), interval.b(), speed, order, 2 + poly)
}

/// Matrix whose column `i` stacks `√w_q·f_i(t_q)` over nodes `q` and
/// components; `S_aᵀ·conj(S_b)` is then the cross inner-product matrix.
pub fn sample_matrix(system: &dyn FunctionSystem, rule: &QuadratureRule) -> CMatrix {
    let d = system.dim();
    let rows = rule.len() * d;
    let columns: Vec<Vec<C64>> = (0..system.len())
        .into_par_iter()
        .map(|i| {
            let mut col = vec![C64::new(0.0, 0.0); rows];
            for (q, (&t, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                let slot = &mut col[q * d..(q + 1) * d];
                system.eval_into(i, t, slot);
                let sw = w.sqrt();
                slot.iter_mut().for_each(|z| *z *= sw);
            }
            col
        })
        .collect();
    CMatrix::from_fn(rows, system.len(), |r, c| columns[c][r])
}

/// `M[i][j] = (a_i, b_j)` in `L²(I, ℂ^d)`. Closed form when both systems are
/// pure exponentials, panelled Gauss–Legendre otherwise.
pub fn cross_inner(a: &dyn FunctionSystem, b: &dyn FunctionSystem, interval: &IntervalSpec, order: usize) -> Result<CMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let closed = (0..a.len()).all(|i| a.atom(i).is_some()) && (0..b.len()).all(|j| b.atom(j).is_some());
    if closed {
        let rows: Vec<Vec<C64>> = (0..a.len())
            .into_par_iter()
            .map(|i| {
                let ai = a.atom(i).expect("checked");
                (0..b.len())
                    .map(|j| {
                        let bj = b.atom(j).expect("checked");
                        let dir = h_inner(ai.direction, bj.direction);
                        if dir == C64::new(0.0, 0.0) {
                            return dir;
                        }
                        dir * (ai.scale * bj.scale) * exp_inner_closed_form(ai.frequency - bj.frequency, interval)
                    })
                    .collect()
            })
            .collect();
        return Ok(CMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]));
    }
    let rule = product_rule(a, b, interval, order)?;
    let sa = sample_matrix(a, &rule);
    let sb = sample_matrix(b, &rule);
    Ok(sa.transpose() * sb.conjugate())
}

/// Hermitian Gram matrix of a system on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: CMatrix,
    descriptor: String,
}

impl GramMatrix {
    /// Wraps a matrix, checking it is square.
    pub fn from_entries(entries: CMatrix, descriptor: impl Into<String>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        Ok(Self { entries, descriptor: descriptor.into() })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Leading principal block on positions `range`.
    pub fn principal(&self, range: std::ops::Range<usize>) -> Self {
        let n = range.len();
        Self {
            entries: self.entries.view((range.start, range.start), (n, n)).into_owned(),
            descriptor: format!("{} [{:?}]", self.descriptor, range),
        }
    }

    pub fn to_record(&self) -> GramRecord {
        GramRecord {
            descriptor: self.descriptor.clone(),
            size: self.size(),
            entries: (0..self.size())
                .map(|i| (0..self.size()).map(|j| [self.entries[(i, j)].re, self.entries[(i, j)].im]).collect())
                .collect(),
        }
    }
}

/// Structured text form: complex entries as `[re, im]` pairs, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramRecord {
    pub descriptor: String,
    pub size: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<GramRecord> for GramMatrix {
    type Error = Error;

    fn try_from(r: GramRecord) -> Result<Self> {
        if r.entries.len() != r.size || r.entries.iter().any(|row| row.len() != r.size) {
            return Err(Error::invalid("Gram record is not square"));
        }
        let m = CMatrix::from_fn(r.size, r.size, |i, j| C64::new(r.entries[i][j][0], r.entries[i][j][1]));
        GramMatrix::from_entries(m, r.descriptor)
    }
}

/// `G[k][n] = (e_n, e_k)`; only the upper triangle is computed and mirrored,
/// so the result is exactly Hermitian.
pub fn assemble_gram(system: &dyn FunctionSystem, interval: &IntervalSpec) -> Result<GramMatrix> {
    assemble_gram_with_order(system, interval, DEFAULT_ORDER)
}

pub fn assemble_gram_with_order(system: &dyn FunctionSystem, interval: &IntervalSpec, order: usize) -> Result<GramMatrix> {
    if system.is_empty() {
        return Err(Error::invalid("system has no functions"));
    }
    let m = cross_inner(system, system, interval, order)?;
    let n = m.nrows();
    let g = CMatrix::from_fn(n, n, |k, j| match k.cmp(&j) {
        std::cmp::Ordering::Equal => C64::new(m[(k, k)].re, 0.0),
        std::cmp::Ordering::Less => m[(k, j)].conj(),
        std::cmp::Ordering::Greater => m[(j, k)],
    });
    GramMatrix::from_entries(g, system.describe())
}

/// `(e_k, e_n) = (U_k, U_n)_H ∫_I e^{i(ω_k − ω_n)t} dt` for indices `k`, `n`.
pub fn vector_inner(
    k: i64,
    n: i64,
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    interval: &IntervalSpec,
) -> Result<C64> {
    directions.check_matches(family)?;
    let pk = family.position(k).ok_or_else(|| Error::invalid(format!("index {k} outside window")))?;
    let pn = family.position(n).ok_or_else(|| Error::invalid(format!("index {n} outside window")))?;
    let dir = h_inner(directions.at(pk), directions.at(pn));
    let w = family.exponents();
    Ok(dir * exp_inner_closed_form(w[pk] - w[pn], interval))
}

/// `(U_k f_k, U_n f_n)` by panelled Gauss–Legendre with `quad_order` nodes per
/// panel; panels follow the pair's frequency spread.
pub fn dd_inner_quadrature(
    k: i64,
    n: i64,
    basis: &DividedDifferenceBasis,
    directions: &DirectionAssignment,
    interval: &IntervalSpec,
    quad_order: usize,
) -> Result<C64> {
    let pk = basis.family().position(k).ok_or_else(|| Error::invalid(format!("index {k} outside window")))?;
    let pn = basis.family().position(n).ok_or_else(|| Error::invalid(format!("index {n} outside window")))?;
    let sys = DividedDifferenceSystem::raw(basis.clone(), directions.clone())?;
    dd_inner_at(&sys, pk, pn, interval, quad_order)
}

fn dd_inner_at(sys: &DividedDifferenceSystem, pk: usize, pn: usize, interval: &IntervalSpec, order: usize) -> Result<C64> {
    let dir = h_inner(sys.directions.at(pk), sys.directions.at(pn));
    if dir == C64::new(0.0, 0.0) {
        return Ok(dir);
    }
    let nk = sys.basis.nodes(pk);
    let nn = sys.basis.nodes(pn);
    let speed = (nk[nk.len() - 1] - nn[0]).abs().max((nk[0] - nn[nn.len() - 1]).abs());
    let poly = sys.basis.order(pk) + sys.basis.order(pn);
    let rule = QuadratureRule::panels(interval.a(), interval.b(), speed, order, 2 + poly)?;
    let s: C64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| sys.value(pk, t) * sys.value(pn, t).conj() * w)
        .sum();
    Ok(dir * s)
}

/// `x*Gx`.
pub fn energy_quadratic_form(g: &GramMatrix, coeffs: &CoefficientVector) -> Result<f64> {
    if coeffs.len() != g.size() {
        return Err(Error::DimensionMismatch { expected: g.size(), got: coeffs.len() });
    }
    let x = nalgebra::DVector::from_column_slice(coeffs.values());
    let e = (x.adjoint() * g.entries() * &x)[(0, 0)];
    Ok(e.re.max(0.0))
}

/// Dual basis `φ_k = Σ_j (G⁻¹)[j][k] e_j` inside the span.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalFamily {
    /// `G⁻¹`; column `k` holds the coordinates of `φ_k`.
    pub coefficients: CMatrix,
    /// `‖φ_k‖ = sqrt((G⁻¹)[k][k])`.
    pub norms: Vec<f64>,
    /// `max |(e_j, φ_k) − δ_jk|`.
    pub biorthogonality_residual: f64,
}

pub fn dual_family(g: &GramMatrix) -> Result<BiorthogonalFamily> {
    let ext = hermitian_extremes(g.entries())?;
    if ext.min <= NEAR_SINGULAR_RTOL * ext.max {
        return Err(Error::NearSingular { min_eigenvalue: ext.min, norm: ext.max });
    }
    let n = g.size();
    let chol = Cholesky::new(g.entries().clone()).ok_or(Error::NearSingular {
        min_eigenvalue: ext.min,
        norm: ext.max,
    })?;
    let inv = chol.solve(&CMatrix::identity(n, n));
    // symmetrize: the exact inverse is Hermitian
    let coefficients = CMatrix::from_fn(n, n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)].conj()));
    let norms = (0..n).map(|k| coefficients[(k, k)].re.max(0.0).sqrt()).collect();
    // (e_j, φ_k) = Σ_l conj(C[l][k]) G[l][j]
    let bi = coefficients.adjoint() * g.entries();
    let biorthogonality_residual = (0..n)
        .flat_map(|k| (0..n).map(move |j| (k, j)))
        .map(|(k, j)| (bi[(k, j)] - if k == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).norm())
        .fold(0.0, f64::max);
    Ok(BiorthogonalFamily { coefficients, norms, biorthogonality_residual })
}

/// Coefficients of the orthogonal projection of every source function onto
/// `span(target)`: column `s` holds `c` with `P(src_s) = Σ_t c_t target_t`.
pub fn project_coefficients(target: &dyn FunctionSystem, sources: &dyn FunctionSystem, interval: &IntervalSpec) -> Result<CMatrix> {
    // b[t][s] = (src_s, target_t)
    let b = cross_inner(sources, target, interval, DEFAULT_ORDER)?.transpose();
    if target.is_orthonormal_on(interval) {
        return Ok(b);
    }
    let g = assemble_gram(target, interval)?;
    let ext = hermitian_extremes(g.entries())?;
    if ext.min <= NEAR_SINGULAR_RTOL * ext.max {
        return Err(Error::NearSingular { min_eigenvalue: ext.min, norm: ext.max });
    }
    let chol = Cholesky::new(g.into_entries()).ok_or(Error::NearSingular {
        min_eigenvalue: ext.min,
        norm: ext.max,
    })?;
    Ok(chol.solve(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::FamilySpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn integers(lo: i64, hi: i64) -> ExponentFamily {
        FamilySpec::lattice(1.0, lo, hi).generate(0).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let unit = IntervalSpec::new(0.0, 1.0).unwrap();
        assert!((exp_inner_closed_form(0.0, &unit) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(exp_inner_closed_form(2.0 * PI, &unit).norm() < 1e-15);
        let half = IntervalSpec::new(0.0, PI).unwrap();
        assert!((exp_inner_closed_form(1.0, &half) - c(0.0, 2.0)).norm() < 1e-15);
        // tiny-θ branch agrees with the sinc form at the same θ
        let i = IntervalSpec::new(1.0, 3.0).unwrap();
        let theta: f64 = 4.9e-9;
        let sinc = C64::from_polar(2.0 * (theta * 1.0).sin() / theta, theta * 2.0);
        assert!((exp_inner_closed_form(theta, &i) - sinc).norm() < 1e-15);
    }

    #[test]
    fn interval_validation() {
        assert!(IntervalSpec::new(1.0, 1.0).is_err());
        assert!(IntervalSpec::new(2.0, 1.0).is_err());
        assert!(IntervalSpec::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn interval_serde_validates() {
        let i = IntervalSpec::new(-1.0, 2.5).unwrap();
        let s = serde_json::to_string(&i).unwrap();
        assert_eq!(serde_json::from_str::<IntervalSpec>(&s).unwrap(), i);
        assert!(serde_json::from_str::<IntervalSpec>(r#"{"a":1,"b":0}"#).is_err());
    }

    #[test]
    fn vector_inner_examples() {
        let f = ExponentFamily::explicit("x", vec![0.0, 1.0, 2.5]).unwrap();
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let i = IntervalSpec::new(0.0, PI).unwrap();
        assert!((vector_inner(2, 2, &f, &u, &i).unwrap() - c(PI, 0.0)).norm() < 1e-15);
        assert!((vector_inner(1, 0, &f, &u, &i).unwrap() - c(0.0, 2.0)).norm() < 1e-15);
        let orth = DirectionAssignment::new(
            2,
            0,
            vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
        )
        .unwrap();
        assert_eq!(vector_inner(0, 1, &f, &orth, &i).unwrap(), c(0.0, 0.0));
        assert!(vector_inner(0, 7, &f, &u, &i).is_err());
    }

    #[test]
    fn integer_gram_is_scaled_identity() {
        let f = integers(-6, 6);
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let sys = ExponentialSystem::new(f, u).unwrap();
        let g = assemble_gram(&sys, &IntervalSpec::new(0.0, 2.0 * PI).unwrap()).unwrap();
        let want = CMatrix::identity(13, 13) * c(2.0 * PI, 0.0);
        assert!(crate::max_entry_modulus(&(g.entries() - want)) < 1e-10);
    }

    #[test]
    fn single_function_gram() {
        let f = ExponentFamily::explicit("x", vec![3.0]).unwrap();
        let u = DirectionAssignment::constant(&f, 2, 2).unwrap();
        let sys = ExponentialSystem::new(f, u).unwrap();
        let g = assemble_gram(&sys, &IntervalSpec::new(0.0, 1.5).unwrap()).unwrap();
        assert_eq!(g.size(), 1);
        assert!((g.entries()[(0, 0)] - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dd_inner_singleton_reduces_to_exponential() {
        let f = ExponentFamily::explicit("x", vec![0.0, 1.0, 2.0]).unwrap();
        let basis = DividedDifferenceBasis::new(f.clone(), 0.5, 1).unwrap();
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let i = IntervalSpec::new(0.0, 2.0).unwrap();
        let v = dd_inner_quadrature(1, 1, &basis, &u, &i, 16).unwrap();
        assert!((v - c(2.0, 0.0)).norm() < 1e-10);
        let v = dd_inner_quadrature(0, 2, &basis, &u, &i, 16).unwrap();
        let want = exp_inner_closed_form(-2.0, &i);
        assert!((v - want).norm() < 1e-12);
    }

    #[test]
    fn dd_inner_orthogonal_directions_vanish() {
        let f = ExponentFamily::explicit("x", vec![0.0, 1e-3]).unwrap();
        let basis = DividedDifferenceBasis::new(f.clone(), 0.5, 2).unwrap();
        let u = DirectionAssignment::new(
            2,
            0,
            vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]],
        )
        .unwrap();
        let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
        assert_eq!(dd_inner_quadrature(0, 1, &basis, &u, &i, 16).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn fourier_ball_uses_strict_inequality() {
        let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
        // γ_n = n; |n| < 3 excludes ±3
        let g = FourierGrid::ball(i, 0.0, 3.0, 2).unwrap();
        assert_eq!(g.indices(), -2..3);
        assert_eq!(g.len(), 10);
        assert_eq!(g.label(3), (-1, 2));
        let empty = FourierGrid::ball(i, 0.5, 0.25, 1).unwrap();
        assert_eq!(empty.len(), 0);
    }

    #[test]
    fn fourier_grid_is_orthonormal() {
        let i = IntervalSpec::new(-0.3, 2.9).unwrap();
        let g = FourierGrid::new(i, -5, 5, 2).unwrap();
        let gram = assemble_gram(&g, &i).unwrap();
        assert!(crate::max_entry_modulus(&(gram.entries() - CMatrix::identity(22, 22))) < 1e-12);
    }

    #[test]
    fn dual_family_examples() {
        let f = integers(-3, 3);
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let sys = ExponentialSystem::new(f, u).unwrap();
        let g = assemble_gram(&sys, &IntervalSpec::new(0.0, 2.0 * PI).unwrap()).unwrap();
        let dual = dual_family(&g).unwrap();
        for k in 0..7 {
            assert!((dual.norms[k] - (2.0 * PI).powf(-0.5)).abs() < 1e-12);
            assert!((dual.coefficients[(k, k)] - c(1.0 / (2.0 * PI), 0.0)).norm() < 1e-12);
        }
        assert!(dual.biorthogonality_residual < 1e-12);

        let dup = ExponentFamily::explicit("dup", vec![1.0, 1.0]).unwrap();
        let u = DirectionAssignment::constant(&dup, 1, 1).unwrap();
        let g = assemble_gram(&ExponentialSystem::new(dup, u).unwrap(), &IntervalSpec::new(0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(dual_family(&g), Err(Error::NearSingular { .. })));
    }

    #[test]
    fn dual_family_two_by_two_matches_direct_inverse() {
        let f = ExponentFamily::explicit("x", vec![0.0, 1.0]).unwrap();
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let i = IntervalSpec::new(0.0, PI).unwrap();
        let g = assemble_gram(&ExponentialSystem::new(f, u).unwrap(), &i).unwrap();
        // G[k][n] = (e_n, e_k): G[0][1] = (e_1, e_0) = 2i
        let s = c(0.0, 2.0);
        let m = [[c(PI, 0.0), s], [s.conj(), c(PI, 0.0)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let dual = dual_family(&g).unwrap();
        for (r, row) in inv.iter().enumerate() {
            for (col, want) in row.iter().enumerate() {
                assert!((dual.coefficients[(r, col)] - want).norm() < 1e-12);
            }
        }
        assert!(dual.biorthogonality_residual < 1e-12);
    }

    #[test]
    fn projection_onto_own_grid_function_is_identity() {
        let i = IntervalSpec::new(0.0, 3.0).unwrap();
        let g = FourierGrid::new(i, 2, 2, 1).unwrap();
        let p = project_coefficients(&g, &g, &i).unwrap();
        assert!((p[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn projection_onto_non_orthonormal_target_reproduces_members() {
        let i = IntervalSpec::new(0.0, 2.0).unwrap();
        let f = ExponentFamily::explicit("x", vec![0.0, 0.7, 2.0]).unwrap();
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let sys = ExponentialSystem::new(f, u).unwrap();
        let p = project_coefficients(&sys, &sys, &i).unwrap();
        assert!(crate::max_entry_modulus(&(p - CMatrix::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn gram_record_round_trip() {
        let f = ExponentFamily::explicit("x", vec![0.0, 0.5]).unwrap();
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let g = assemble_gram(&ExponentialSystem::new(f, u).unwrap(), &IntervalSpec::new(0.0, 1.0).unwrap()).unwrap();
        let back = GramMatrix::try_from(g.to_record()).unwrap();
        assert_eq!(back, g);
    }
}
