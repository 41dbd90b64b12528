//! Reference computations that share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use inghamlab::C64;

/// Gauss–Legendre on [-1, 1] by Golub–Welsch: nodes are eigenvalues of the
/// Jacobi matrix, weights `2·v_0²` from the normalized eigenvectors.
pub fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Neumaier-compensated complex accumulator.
#[derive(Default, Clone, Copy)]
pub struct Compensated {
    sum: C64,
    carry: C64,
}

impl Compensated {
    pub fn add(&mut self, z: C64) {
        self.sum = C64::new(step(self.sum.re, z.re, &mut self.carry.re), step(self.sum.im, z.im, &mut self.carry.im));
    }

    pub fn value(&self) -> C64 {
        self.sum + self.carry
    }
}

fn step(s: f64, x: f64, c: &mut f64) -> f64 {
    let t = s + x;
    *c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
    t
}

/// Composite Golub–Welsch rule of `order` points on `panels` equal panels.
pub fn composite<F: Fn(f64) -> C64>(a: f64, b: f64, panels: usize, order: usize, f: F) -> C64 {
    let (x, w) = golub_welsch(order);
    let h = (b - a) / panels as f64;
    let mut acc = Compensated::default();
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc.add(f(mid + 0.5 * h * xi) * (0.5 * h * wi));
        }
    }
    acc.value()
}

/// `∫_a^b e^{iθt} dt` by a 32-point rule with one panel per period of the
/// integrand. The phase is taken relative to the midpoint to keep the
/// argument of `cis` small.
pub fn exp_integral_quadrature(theta: f64, a: f64, b: f64) -> C64 {
    let panels = ((theta.abs() * (b - a) / (2.0 * PI)).ceil() as usize).max(1);
    let c = 0.5 * (a + b);
    let inner = composite(a - c, b - c, panels, 32, |s| C64::from_polar(1.0, theta * s));
    C64::from_polar(1.0, theta * c) * inner
}

/// `∫_a^b t^p e^{iθt} dt` exactly: `θ = 0` by the power rule, otherwise by
/// the integration-by-parts recursion (stable for `|θ|·(b−a) ≳ p`).
pub fn moment(p: u32, theta: f64, a: f64, b: f64) -> C64 {
    if theta == 0.0 {
        let q = p as i32 + 1;
        return C64::new((b.powi(q) - a.powi(q)) / q as f64, 0.0);
    }
    let it = C64::new(0.0, theta);
    let edge = |t: f64, k: u32| C64::from_polar(t.powi(k as i32), theta * t);
    let mut prev = (edge(b, 0) - edge(a, 0)) / it;
    for k in 1..=p {
        prev = (edge(b, k) - edge(a, k)) / it - prev * (k as f64) / it;
    }
    prev
}

/// Jacobi rotation eigenvalues of a real symmetric matrix.
pub fn jacobi_eigenvalues(mut m: DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}
