//! System functions: vector exponentials `U_k e^{iω_k t}`, their coefficient
//! sums, and divided differences of `ω ↦ e^{iωt}` over exponent chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exponents::{build_sharpness_partition, detect_chains, ChainDecomposition, ExponentFamily, Partition};
use crate::quadrature::{SimplexRule, DEFAULT_ORDER};
use crate::{Error, Result, C64};

/// Unit-norm tolerance for direction vectors.
pub const UNIT_TOL: f64 = 1e-12;

/// Node sub-ranges narrower than `COALESCENCE_RTOL·max(1, |t|)` are evaluated
/// by simplex quadrature instead of the Newton recurrence.
pub const COALESCENCE_RTOL: f64 = 1e-4;

#[inline]
fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Unit vectors `U_k ∈ ℂ^d`, one per index of a family window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionAssignment {
    d: usize,
    first_index: i64,
    #[serde(with = "complex_rows")]
    directions: Vec<Vec<C64>>,
}

impl DirectionAssignment {
    pub fn new(d: usize, first_index: i64, directions: Vec<Vec<C64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("direction space dimension must be positive"));
        }
        for (p, u) in directions.iter().enumerate() {
            if u.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: u.len() });
            }
            let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::invalid(format!(
                    "direction at position {p} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self { d, first_index, directions })
    }

    /// Every exponent gets the standard basis vector `E_axis` (1-based).
    pub fn constant(family: &ExponentFamily, d: usize, axis: usize) -> Result<Self> {
        if axis == 0 || axis > d {
            return Err(Error::invalid(format!("axis {axis} outside 1..={d}")));
        }
        let e = basis_vector(d, axis);
        Self::new(d, family.first_index(), vec![e; family.len()])
    }

    /// `U_k = E_j` whenever `ω_k` belongs to class `j`.
    pub fn from_partition(partition: &Partition) -> Result<Self> {
        let dirs = partition
            .class_of
            .iter()
            .map(|&j| basis_vector(partition.d, j))
            .collect();
        Self::new(partition.d, partition.first_index, dirs)
    }

    /// Independent random unit vectors, deterministic in `seed`.
    pub fn random(family: &ExponentFamily, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs = (0..family.len())
            .map(|_| loop {
                let v: Vec<C64> = (0..d)
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n > 1e-3 {
                    break v.into_iter().map(|z| z / n).collect();
                }
            })
            .collect();
        Self::new(d, family.first_index(), dirs)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Direction at window position `p`.
    pub fn at(&self, p: usize) -> &[C64] {
        &self.directions[p]
    }

    pub fn get(&self, k: i64) -> Option<&[C64]> {
        let p = usize::try_from(k.checked_sub(self.first_index)?).ok()?;
        self.directions.get(p).map(Vec::as_slice)
    }

    /// Restriction to window positions `positions` (reindexed from zero).
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        Self::new(self.d, 0, positions.iter().map(|&p| self.directions[p].clone()).collect())
    }

    pub fn check_matches(&self, family: &ExponentFamily) -> Result<()> {
        if self.first_index != family.first_index() || self.len() != family.len() {
            return Err(Error::IndexMismatch(format!(
                "directions cover {}..{} but family covers {:?}",
                self.first_index,
                self.first_index + self.len() as i64,
                family.index_range()
            )));
        }
        Ok(())
    }
}

pub(crate) fn basis_vector(d: usize, axis: usize) -> Vec<C64> {
    let mut e = vec![C64::new(0.0, 0.0); d];
    e[axis - 1] = C64::new(1.0, 0.0);
    e
}

/// How to attach directions to a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectionsRule {
    /// All exponents share `E_axis`.
    Constant {
        d: usize,
        #[serde(default = "one")]
        axis: usize,
    },
    /// Sharpness partition with max class density `alpha`; class `j ↦ E_j`.
    Partition { d: usize, alpha: f64 },
    /// Seeded random unit vectors.
    Random { d: usize },
}

fn one() -> usize {
    1
}

impl Default for DirectionsRule {
    fn default() -> Self {
        DirectionsRule::Constant { d: 1, axis: 1 }
    }
}

impl DirectionsRule {
    pub fn d(&self) -> usize {
        match *self {
            DirectionsRule::Constant { d, .. }
            | DirectionsRule::Partition { d, .. }
            | DirectionsRule::Random { d } => d,
        }
    }

    /// Resolves the rule on `family`; partition rules also return the partition.
    pub fn assign(&self, family: &ExponentFamily, seed: u64) -> Result<(DirectionAssignment, Option<Partition>)> {
        match *self {
            DirectionsRule::Constant { d, axis } => Ok((DirectionAssignment::constant(family, d, axis)?, None)),
            DirectionsRule::Partition { d, alpha } => {
                let p = build_sharpness_partition(family, d, alpha)?;
                Ok((DirectionAssignment::from_partition(&p)?, Some(p)))
            }
            DirectionsRule::Random { d } => Ok((DirectionAssignment::random(family, d, seed)?, None)),
        }
    }
}

/// Coefficients `x_k` over a family window with cached `Σ|x_k|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    first_index: i64,
    values: Vec<C64>,
    square_sum: f64,
}

impl CoefficientVector {
    pub fn new(first_index: i64, values: Vec<C64>) -> Self {
        let square_sum = values.iter().map(|z| z.norm_sqr()).sum();
        Self { first_index, values, square_sum }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn square_sum(&self) -> f64 {
        self.square_sum
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `U·e^{iωt}`.
pub fn eval_exponential(omega: f64, u: &[C64], t: f64) -> Vec<C64> {
    let z = cis(omega * t);
    u.iter().map(|c| c * z).collect()
}

/// `x(t) = Σ_k x_k U_k e^{iω_k t}` over the window.
pub fn eval_sum(
    family: &ExponentFamily,
    directions: &DirectionAssignment,
    coeffs: &CoefficientVector,
    t: f64,
) -> Result<Vec<C64>> {
    directions.check_matches(family)?;
    if coeffs.first_index != family.first_index() || coeffs.len() != family.len() {
        return Err(Error::IndexMismatch("coefficients and family windows differ".into()));
    }
    let mut out = vec![C64::new(0.0, 0.0); directions.d()];
    for (p, (&w, &x)) in family.exponents().iter().zip(coeffs.values()).enumerate() {
        let z = x * cis(w * t);
        for (o, u) in out.iter_mut().zip(directions.at(p)) {
            *o += u * z;
        }
    }
    Ok(out)
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::invalid("divided difference needs at least one node"));
    }
    if let Some(position) = nodes.iter().position(|w| !w.is_finite()) {
        return Err(Error::Unsorted { position });
    }
    if let Some(i) = nodes.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Unsorted { position: i + 1 });
    }
    Ok(())
}

/// Divided difference `[ω_1, …, ω_r]` of `ω ↦ e^{iωt}` for nondecreasing nodes.
///
/// Uses the Newton recurrence on well separated sub-ranges, the confluent
/// value `(it)^{r−1} e^{iωt}/(r−1)!` for equal nodes, and the
/// Hermite–Genocchi simplex integral for sub-ranges narrower than the
/// coalescence threshold.
pub fn divided_difference(nodes: &[f64], t: f64) -> Result<C64> {
    check_nodes(nodes)?;
    Ok(dd_sorted(nodes, t))
}

pub(crate) fn dd_sorted(nodes: &[f64], t: f64) -> C64 {
    let r = nodes.len();
    if r == 1 {
        return cis(nodes[0] * t);
    }
    let threshold = COALESCENCE_RTOL * t.abs().max(1.0);
    let spread = nodes[r - 1] - nodes[0];
    if spread == 0.0 {
        return confluent(nodes[0], r, t);
    }
    if spread < threshold {
        return hermite_genocchi_unchecked(nodes, t, DEFAULT_ORDER);
    }
    let mut table: Vec<C64> = nodes.iter().map(|&w| cis(w * t)).collect();
    for level in 1..r {
        for i in 0..r - level {
            let j = i + level;
            let gap = nodes[j] - nodes[i];
            table[i] = if gap == 0.0 {
                confluent(nodes[i], level + 1, t)
            } else if gap < threshold {
                hermite_genocchi_unchecked(&nodes[i..=j], t, DEFAULT_ORDER)
            } else {
                (table[i + 1] - table[i]) / gap
            };
        }
    }
    table[0]
}

fn confluent(omega: f64, r: usize, t: f64) -> C64 {
    let fact: f64 = (1..r).map(|k| k as f64).product();
    C64::new(0.0, t).powu((r - 1) as u32) * cis(omega * t) / fact
}

/// Plain Newton recurrence for pairwise distinct nodes in any order, with no
/// coalescence handling. Exposed for symmetry checks.
pub fn newton_divided_difference(nodes: &[f64], t: f64) -> Result<C64> {
    if nodes.is_empty() {
        return Err(Error::invalid("divided difference needs at least one node"));
    }
    let r = nodes.len();
    let mut table: Vec<C64> = nodes.iter().map(|&w| cis(w * t)).collect();
    for level in 1..r {
        for i in 0..r - level {
            let gap = nodes[i + level] - nodes[i];
            if gap == 0.0 {
                return Err(Error::invalid("Newton recurrence needs distinct nodes"));
            }
            table[i] = (table[i + 1] - table[i]) / gap;
        }
    }
    Ok(table[0])
}

/// Iterated-integral form
/// `(it)^{r−1} ∫_{1≥s_1≥…≥s_{r−1}≥0} exp(i[ω_1 + Σ_j s_j(ω_{j+1} − ω_j)]t) ds`
/// evaluated by tensor Gauss–Legendre quadrature on the collapsed simplex.
/// Nodes may come in any order.
pub fn divided_difference_hermite_genocchi(nodes: &[f64], t: f64, quad_order: usize) -> Result<C64> {
    if nodes.is_empty() {
        return Err(Error::invalid("divided difference needs at least one node"));
    }
    if quad_order < 2 {
        return Err(Error::invalid("quadrature order must be at least 2"));
    }
    if nodes.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("nodes must be finite"));
    }
    Ok(hermite_genocchi_unchecked(nodes, t, quad_order))
}

fn hermite_genocchi_unchecked(nodes: &[f64], t: f64, order: usize) -> C64 {
    let r = nodes.len();
    if r == 1 {
        return cis(nodes[0] * t);
    }
    let rule = SimplexRule::cached(r - 1, order).expect("order validated by caller");
    let diffs: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let sum: C64 = rule
        .iter()
        .map(|(s, w)| {
            let rel: f64 = s.iter().zip(&diffs).map(|(s, d)| s * d).sum();
            cis(rel * t) * w
        })
        .sum();
    C64::new(0.0, t).powu((r - 1) as u32) * cis(nodes[0] * t) * sum
}

/// Central difference `(DD(t+h) − DD(t−h))/(2h)` in the time variable.
pub fn dd_derivative(nodes: &[f64], t: f64, h: f64) -> Result<C64> {
    check_nodes(nodes)?;
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    Ok((dd_sorted(nodes, t + h) - dd_sorted(nodes, t - h)) / (2.0 * h))
}

/// Default central-difference step `10⁻⁵·max(1, |t|)`.
pub fn default_fd_step(t: f64) -> f64 {
    1e-5 * t.abs().max(1.0)
}

/// Majorant of `|[μ_1, …, μ_r]'(t)|`:
/// `(r−1)t^{r−2}/(r−1)! + (|μ_r−μ_{r−1}| + … + |μ_2−μ_1| + |μ_1|)·t^{r−1}/(r−1)!`,
/// evaluated at `|t|`.
pub fn dd_derivative_bound(nodes: &[f64], t: f64) -> f64 {
    let r = nodes.len();
    if r == 0 {
        return 0.0;
    }
    let t = t.abs();
    let fact: f64 = (1..r).map(|k| k as f64).product();
    let first = if r >= 2 { (r - 1) as f64 * t.powi(r as i32 - 2) / fact } else { 0.0 };
    let variation: f64 = nodes.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() + nodes[0].abs();
    first + variation * t.powi(r as i32 - 1) / fact
}

/// Per-index divided-difference functions `f_ℓ = [ω_m, …, ω_ℓ]` where `ω_m`
/// starts the chain containing `ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividedDifferenceBasis {
    family: ExponentFamily,
    chains: ChainDecomposition,
    /// Window position of the chain start, per position.
    chain_start: Vec<usize>,
}

impl DividedDifferenceBasis {
    pub fn new(family: ExponentFamily, gamma_prime: f64, m: usize) -> Result<Self> {
        let chains = detect_chains(&family, gamma_prime, m)?;
        Ok(Self::from_chains(family, chains))
    }

    pub fn from_chains(family: ExponentFamily, chains: ChainDecomposition) -> Self {
        let mut chain_start = Vec::with_capacity(family.len());
        for c in &chains.chains {
            let start = family.position(c.start).expect("chain inside window");
            chain_start.extend(std::iter::repeat_n(start, c.len));
        }
        Self { family, chains, chain_start }
    }

    pub fn family(&self) -> &ExponentFamily {
        &self.family
    }

    pub fn chains(&self) -> &ChainDecomposition {
        &self.chains
    }

    pub fn len(&self) -> usize {
        self.family.len()
    }

    pub fn is_empty(&self) -> bool {
        self.family.is_empty()
    }

    /// Nodes `ω_m, …, ω_ℓ` of the function at window position `p`.
    pub fn nodes(&self, p: usize) -> &[f64] {
        &self.family.exponents()[self.chain_start[p]..=p]
    }

    /// Divided-difference order, i.e. the position inside the chain.
    pub fn order(&self, p: usize) -> usize {
        p - self.chain_start[p]
    }

    /// Nodes shifted by the last one: `ω_m − ω_ℓ, …, 0`.
    pub fn relative_nodes(&self, p: usize) -> Vec<f64> {
        let last = self.family.exponents()[p];
        self.nodes(p).iter().map(|w| w - last).collect()
    }

    pub fn eval(&self, p: usize, t: f64) -> C64 {
        dd_sorted(self.nodes(p), t)
    }
}

/// Serde helper: complex vectors as lists of `[re, im]` pairs.
pub(crate) mod complex_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::C64;

    pub fn serialize<S: Serializer>(rows: &[Vec<C64>], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<Vec<[f64; 2]>> = rows
            .iter()
            .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<C64>>, D::Error> {
        let pairs = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect())
    }
}
