//! Gauss–Legendre rules: single, composite (panelled) and on the ordered
//! simplex `1 ≥ s_1 ≥ … ≥ s_n ≥ 0`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::{Error, Result};

/// Default number of Gauss–Legendre points per panel (and per simplex axis).
pub const DEFAULT_ORDER: usize = 16;

/// Maximal phase, in radians, swept by the fastest oscillation over one panel.
pub const PANEL_PHASE: f64 = PI / 4.0;

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are roots of `P_n`, found by Newton iteration on the three-term
    /// recurrence from the Tricomi initial guesses.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Gauss–Legendre order must be at least 1"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Shared, lazily built rule of order `n`.
    pub fn cached(n: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&n) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::new(n)?);
        cache
            .lock()
            .expect("quadrature cache poisoned")
            .entry(n)
            .or_insert_with(|| Arc::clone(&rule));
        Ok(rule)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<T, F>(&self, a: f64, b: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        self.mapped(a, b)
            .fold(T::default(), |acc, (x, w)| acc + f(x) * w)
    }
}

/// Returns `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A flat list of nodes and weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Composite Gauss–Legendre rule on `[a, b]` whose panels each sweep at
    /// most [`PANEL_PHASE`] radians of a phase moving at `phase_speed`
    /// rad/unit. At least `min_panels` panels are used.
    pub fn panels(a: f64, b: f64, phase_speed: f64, order: usize, min_panels: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::invalid(format!("empty integration range [{a}, {b}]")));
        }
        if order < 2 {
            return Err(Error::invalid("quadrature order must be at least 2"));
        }
        let sweep = phase_speed.abs() * (b - a);
        let count = ((sweep / PANEL_PHASE).ceil() as usize).max(min_panels).max(1);
        let gl = GaussLegendre::cached(order)?;
        let h = (b - a) / count as f64;
        let mut nodes = Vec::with_capacity(count * order);
        let mut weights = Vec::with_capacity(count * order);
        for p in 0..count {
            let lo = a + p as f64 * h;
            let hi = if p + 1 == count { b } else { lo + h };
            for (x, w) in gl.mapped(lo, hi) {
                nodes.push(x);
                weights.push(w);
            }
        }
        Ok(Self { nodes, weights })
    }

    /// Single global Gauss–Legendre rule on `[a, b]` that integrates
    /// `t^p e^{iθt}` to double precision for `|θ| ≤ phase_speed` and
    /// `p ≤ poly_degree`.
    pub fn global(a: f64, b: f64, phase_speed: f64, poly_degree: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::invalid(format!("empty integration range [{a}, {b}]")));
        }
        // e^{iκx} on [-1, 1] needs Chebyshev degree about κ + O(κ^{1/3}).
        let kappa = 0.5 * phase_speed.abs() * (b - a);
        let degree = kappa + 10.0 * kappa.cbrt() + 40.0 + poly_degree as f64;
        let n = ((degree + 1.0) / 2.0).ceil() as usize;
        let gl = GaussLegendre::cached(n.max(8))?;
        let (nodes, weights) = gl.mapped(a, b).unzip();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor Gauss–Legendre rule on the ordered simplex
/// `{1 ≥ s_1 ≥ s_2 ≥ … ≥ s_dim ≥ 0}` (volume `1/dim!`), built by the
/// collapsed map `s_j = u_1 ⋯ u_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexRule {
    dim: usize,
    /// Row-major, `dim` coordinates per point.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SimplexRule {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid("quadrature order must be at least 2"));
        }
        if dim == 0 {
            return Ok(Self { dim, points: Vec::new(), weights: vec![1.0] });
        }
        let gl = GaussLegendre::cached(order)?;
        let (u, wu): (Vec<f64>, Vec<f64>) = gl.mapped(0.0, 1.0).unzip();
        let total = order.pow(dim as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut digits = vec![0usize; dim];
        for _ in 0..total {
            let mut s = 1.0;
            let mut w = 1.0;
            for (j, &dj) in digits.iter().enumerate() {
                // Jacobian of s_j = s_{j-1} u_j contributes u_j^{dim-1-j}.
                w *= wu[dj] * u[dj].powi((dim - 1 - j) as i32);
                s *= u[dj];
                points.push(s);
            }
            weights.push(w);
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < order {
                    break;
                }
                *d = 0;
            }
        }
        Ok(Self { dim, points, weights })
    }

    /// Shared, lazily built rule.
    pub fn cached(dim: usize, order: usize) -> Result<Arc<Self>> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<SimplexRule>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().expect("simplex cache poisoned").get(&(dim, order)) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::new(dim, order)?);
        cache
            .lock()
            .expect("simplex cache poisoned")
            .entry((dim, order))
            .or_insert_with(|| Arc::clone(&rule));
        Ok(rule)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        let dim = self.dim;
        self.weights.iter().enumerate().map(move |(i, &w)| {
            let p: &[f64] = if dim == 0 { &[] } else { &self.points[i * dim..(i + 1) * dim] };
            (p, w)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 33] {
            let gl = GaussLegendre::new(n).unwrap();
            for p in 0..(2 * n) {
                let got: f64 = gl.integrate(0.0, 1.0, |x| x.powi(p as i32));
                let want = 1.0 / (p as f64 + 1.0);
                assert!((got - want).abs() < 1e-14, "n={n} p={p}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn large_rules_have_sane_weights() {
        let gl = GaussLegendre::new(600).unwrap();
        let sum: f64 = gl.weights().iter().sum();
        assert!((sum - 2.0).abs() < 1e-13);
        assert!(gl.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_order_is_rejected() {
        assert!(GaussLegendre::new(0).is_err());
        assert!(QuadratureRule::panels(0.0, 1.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn panel_count_tracks_phase() {
        let rule = QuadratureRule::panels(0.0, 2.0 * PI, 10.0, 4, 1).unwrap();
        // 10 rad/unit over 2π sweeps 20π rad, i.e. 80 panels of π/4.
        assert_eq!(rule.len(), 80 * 4);
    }

    #[test]
    fn simplex_rule_has_correct_volume_and_moments() {
        for dim in 1..=4 {
            let rule = SimplexRule::new(dim, 8).unwrap();
            let vol: f64 = rule.iter().map(|(_, w)| w).sum();
            let fact: f64 = (1..=dim).map(|k| k as f64).product();
            assert!((vol - 1.0 / fact).abs() < 1e-14);
            for (p, _) in rule.iter() {
                assert!(p.windows(2).all(|w| w[0] >= w[1]));
                assert!(p.iter().all(|&s| (0.0..=1.0).contains(&s)));
            }
        }
        // ∫∫_{1≥s1≥s2≥0} s1 s2 = 1/8.
        let rule = SimplexRule::new(2, 6).unwrap();
        let m: f64 = rule.iter().map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((m - 0.125).abs() < 1e-14);
    }
}
