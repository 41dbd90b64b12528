mod oracle;

use std::f64::consts::PI;

use inghamlab::basisfuncs::{eval_sum, CoefficientVector, DirectionAssignment, DividedDifferenceBasis};
use inghamlab::exponents::{build_sharpness_partition, ExponentFamily, FamilySpec};
use inghamlab::gram::{
    assemble_gram, cross_inner, dd_inner_quadrature, dual_family, energy_quadratic_form, exp_inner_closed_form,
    project_coefficients, vector_inner, DividedDifferenceSystem, ExponentialSystem, FourierGrid, FunctionSystem,
    IntervalSpec,
};
use inghamlab::{max_entry_modulus, CMatrix, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn golub_welsch_reproduces_library_rule() {
    let (x, w) = oracle::golub_welsch(24);
    let lib = inghamlab::quadrature::GaussLegendre::new(24).unwrap();
    for i in 0..24 {
        assert!((x[i] - lib.nodes()[i]).abs() < 1e-14);
        assert!((w[i] - lib.weights()[i]).abs() < 1e-14);
    }
}

#[test]
fn closed_form_matches_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let a = rng.random_range(-5.0..5.0);
        let len = rng.random_range(0.2..12.0);
        let theta = rng.random_range(-200.0..200.0) / len;
        let exact = exp_inner_closed_form(theta, &IntervalSpec::new(a, a + len).unwrap());
        let q = oracle::exp_integral_quadrature(theta, a, a + len);
        worst = worst.max((exact - q).norm() / len);
    }
    assert!(worst < 1e-13, "{worst:e}");
}

#[test]
fn vector_inner_factorizes() {
    let f = ExponentFamily::explicit("x", vec![-1.0, 0.3, 2.0]).unwrap();
    let u = DirectionAssignment::random(&f, 3, 5).unwrap();
    let i = IntervalSpec::new(-0.5, 2.0).unwrap();
    for k in 0..3i64 {
        for n in 0..3i64 {
            let (pk, pn) = (k as usize, n as usize);
            let dir: C64 = u.at(pk).iter().zip(u.at(pn)).map(|(a, b)| a * b.conj()).sum();
            let theta = f.exponents()[pk] - f.exponents()[pn];
            let want = dir * oracle::exp_integral_quadrature(theta, -0.5, 2.0);
            assert!((vector_inner(k, n, &f, &u, &i).unwrap() - want).norm() < 1e-13);
        }
    }
}

#[test]
fn parseval_gram_is_exact_multiple_of_identity() {
    let f = FamilySpec::lattice(1.0, -64, 64).generate(0).unwrap();
    let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
    let g = assemble_gram(&ExponentialSystem::new(f, u).unwrap(), &IntervalSpec::new(0.0, 2.0 * PI).unwrap()).unwrap();
    let want = CMatrix::identity(129, 129) * c(2.0 * PI, 0.0);
    assert!(max_entry_modulus(&(g.entries() - want)) < 1e-10);
}

#[test]
fn block_identity_for_even_odd_partition() {
    let f = FamilySpec::lattice(1.0, -12, 12).generate(0).unwrap();
    let p = build_sharpness_partition(&f, 2, 0.5).unwrap();
    let u = DirectionAssignment::from_partition(&p).unwrap();
    let i = IntervalSpec::new(0.0, 1.3 * PI).unwrap();
    let g = assemble_gram(&ExponentialSystem::new(f.clone(), u).unwrap(), &i).unwrap();
    for a in 0..f.len() {
        for b in 0..f.len() {
            let same = p.class_of[a] == p.class_of[b];
            let want = if same {
                oracle::exp_integral_quadrature(f.exponents()[b] - f.exponents()[a], 0.0, 1.3 * PI)
            } else {
                c(0.0, 0.0)
            };
            assert!((g.entries()[(a, b)] - want).norm() < 1e-12, "({a}, {b})");
        }
    }
}

#[test]
fn energy_matches_time_domain_on_clustered_family() {
    let f = FamilySpec::ClusteredPairs { spacing: 2.0, delta: 1e-3, window: (-3, 3), offset: 0.1 }
        .generate(0)
        .unwrap();
    let u = DirectionAssignment::random(&f, 2, 9).unwrap();
    let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
    let g = assemble_gram(&ExponentialSystem::new(f.clone(), u.clone()).unwrap(), &i).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x: Vec<C64> = (0..f.len()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let coeffs = CoefficientVector::new(f.first_index(), x);
        let e = energy_quadratic_form(&g, &coeffs).unwrap();
        let t = oracle::composite(0.0, 2.0 * PI, 40, 32, |t| {
            let v = eval_sum(&f, &u, &coeffs, t).unwrap();
            c(v.iter().map(|z| z.norm_sqr()).sum(), 0.0)
        });
        assert!((e - t.re).abs() <= 1e-8 * t.re, "{e} vs {}", t.re);
    }
    let wrong = CoefficientVector::new(0, vec![c(1.0, 0.0)]);
    assert!(energy_quadratic_form(&g, &wrong).is_err());
}

#[test]
fn dd_inner_against_double_order_oracle() {
    let f = ExponentFamily::explicit("pair", vec![0.0, 1e-3]).unwrap();
    let b = DividedDifferenceBasis::new(f.clone(), 0.5, 2).unwrap();
    let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
    let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
    let v = dd_inner_quadrature(1, 1, &b, &u, &i, 16).unwrap();
    // f = (e^{iδt} − 1)/δ, |f|² = (2 − 2cos δt)/δ²
    let d: f64 = 1e-3;
    let want = oracle::composite(0.0, 2.0 * PI, 8, 32, |t| c((2.0 * (d * t / 2.0).sin() / d).powi(2), 0.0));
    assert!(v.im.abs() < 1e-14 && v.re > 0.0);
    assert!((v.re - want.re).abs() < 1e-10 * want.re);
    // δ → 0 limit: ∫ t² = (2π)³/3
    assert!((v.re - (2.0 * PI).powi(3) / 3.0).abs() < 1e-3 * v.re);
}

#[test]
fn confluent_limit_of_dd_gram() {
    // pairs {3j, 3j + δ}: the DD Gram tends to the Gram of {e^{iωt}, it·e^{iωt}}
    let omegas = [-3.0, 0.0, 3.0];
    let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
    let limit = |p: usize, q: usize| {
        // function p: ω = omegas[p/2], degree p%2, with factor i^{deg}
        let (wp, dp) = (omegas[p / 2], (p % 2) as u32);
        let (wq, dq) = (omegas[q / 2], (q % 2) as u32);
        // G[p][q] = (f_q, f_p) = ∫ (it)^{dq} conj((it)^{dp}) e^{i(wq − wp)t}
        let phase = c(0.0, 1.0).powu(dq) * c(0.0, -1.0).powu(dp);
        phase * oracle::moment(dp + dq, wq - wp, 0.0, 2.0 * PI)
    };
    let mut errors = Vec::new();
    for delta in [1e-4, 1e-6, 1e-8] {
        let ex: Vec<f64> = omegas.iter().flat_map(|&w| [w, w + delta]).collect();
        let f = ExponentFamily::explicit("pairs", ex).unwrap();
        let b = DividedDifferenceBasis::new(f.clone(), 1.0, 2).unwrap();
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let g = assemble_gram(&DividedDifferenceSystem::raw(b, u).unwrap(), &i).unwrap();
        let err = (0..6)
            .flat_map(|p| (0..6).map(move |q| (p, q)))
            .map(|(p, q)| (g.entries()[(p, q)] - limit(p, q)).norm())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors[2] < 1e-6, "{errors:?}");
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn eq5_bound_on_fourier_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    for _ in 0..1000 {
        let a = rng.random_range(-3.0..3.0);
        let len = rng.random_range(0.5..10.0);
        let i = IntervalSpec::new(a, a + len).unwrap();
        let omega = rng.random_range(-50.0..50.0);
        let n = rng.random_range(-60i64..60);
        let grid = FourierGrid::new(i, n, n, 1).unwrap();
        let gamma = grid.gamma(n);
        if (omega - gamma).abs() < 1e-12 {
            continue;
        }
        let f = ExponentFamily::explicit("w", vec![omega]).unwrap();
        let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
        let e = ExponentialSystem::new(f, u).unwrap();
        let v = cross_inner(&e, &grid, &i, 16).unwrap()[(0, 0)].norm();
        if v > 2.0 * len.powf(-0.5) / (omega - gamma).abs() * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn projection_onto_grid_matches_parseval_tail() {
    // e(t) = e^{0.5it} on (0, 2π): |(e, f_n)|² = (2/|n − 0.5|)²/(2π)
    let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
    let f = ExponentFamily::explicit("half", vec![0.5]).unwrap();
    let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
    let e = ExponentialSystem::new(f, u).unwrap();
    for big_n in [4i64, 16, 64] {
        let grid = FourierGrid::new(i, -big_n, big_n, 1).unwrap();
        let coeffs = project_coefficients(&grid, &e, &i).unwrap();
        let captured: f64 = coeffs.column(0).iter().map(|z| z.norm_sqr()).sum();
        let defect2 = 2.0 * PI - captured;
        let m = 20000i64;
        let head: f64 = (-m..=m)
            .filter(|n| n.abs() > big_n)
            .map(|n| 4.0 / ((n as f64 - 0.5).powi(2) * 2.0 * PI))
            .sum();
        // Σ_{n>M} 1/(n ∓ 1/2)² = 1/M, 1/(M + 1) up to O(M⁻³)
        let tail = head + 4.0 / (2.0 * PI) * (1.0 / m as f64 + 1.0 / (m + 1) as f64);
        assert!((defect2 - tail).abs() < 1e-9 * tail + 1e-12, "N={big_n}: {defect2} vs {tail}");
    }
}

#[test]
fn dual_family_on_perturbed_lattice() {
    let f = FamilySpec::PerturbedLattice { spacing: 1.0, window: (-10, 10), max_perturbation: 0.2 }
        .generate(4)
        .unwrap();
    let u = DirectionAssignment::random(&f, 2, 4).unwrap();
    let g = assemble_gram(&ExponentialSystem::new(f, u).unwrap(), &IntervalSpec::new(0.0, 2.5 * PI).unwrap()).unwrap();
    let dual = dual_family(&g).unwrap();
    assert!(dual.biorthogonality_residual < 1e-8);
    let prod = g.entries() * &dual.coefficients;
    assert!(max_entry_modulus(&(prod - CMatrix::identity(21, 21))) < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembled_grams_are_hermitian_psd(
        seed in 0u64..1000,
        d in 1usize..4,
        len in 0.5f64..15.0,
        a in -5.0f64..5.0,
        pert in 0.0f64..0.45,
    ) {
        let f = FamilySpec::PerturbedLattice { spacing: 1.0, window: (-8, 8), max_perturbation: pert }
            .generate(seed)
            .unwrap();
        let u = DirectionAssignment::random(&f, d, seed).unwrap();
        let g = assemble_gram(&ExponentialSystem::new(f, u).unwrap(), &IntervalSpec::new(a, a + len).unwrap()).unwrap();
        let m = g.entries();
        let asym = max_entry_modulus(&(m - m.adjoint()));
        prop_assert!(asym <= 1e-12 * max_entry_modulus(m));
        for k in 0..m.nrows() {
            prop_assert!((m[(k, k)].re - len).abs() < 1e-12 * len && m[(k, k)].im == 0.0);
        }
        let e = inghamlab::extreme_eigenvalues(&g).unwrap();
        prop_assert!(e.min >= -1e-8 * e.max);
    }

    #[test]
    fn fourier_grid_orthonormal_and_projection_idempotent(
        a in -4.0f64..4.0,
        len in 0.3f64..9.0,
        lo in -20i64..0,
        span in 1i64..20,
        d in 1usize..4,
    ) {
        let i = IntervalSpec::new(a, a + len).unwrap();
        let grid = FourierGrid::new(i, lo, lo + span, d).unwrap();
        let g = assemble_gram(&grid, &i).unwrap();
        prop_assert!(max_entry_modulus(&(g.entries() - CMatrix::identity(grid.len(), grid.len()))) < 1e-12);
        // project a source once, rebuild, project again
        let f = ExponentFamily::explicit("s", vec![-1.3, 0.37 * len]).unwrap();
        let u = DirectionAssignment::random(&f, d, 1).unwrap();
        let src = ExponentialSystem::new(f, u).unwrap();
        let p1 = project_coefficients(&grid, &src, &i).unwrap();
        // P(P src) has grid coefficients p1 again, since P restricted to W is the identity
        let p2 = g.entries().transpose() * &p1;
        prop_assert!(max_entry_modulus(&(p2 - &p1)) <= 1e-12);
    }
}

#[test]
fn normalized_dd_system_has_unit_diagonal() {
    let f = FamilySpec::ClusteredPairs { spacing: 3.0, delta: 1e-3, window: (-2, 2), offset: 0.0 }
        .generate(0)
        .unwrap();
    let b = DividedDifferenceBasis::new(f.clone(), 1.0, 2).unwrap();
    let u = DirectionAssignment::constant(&f, 1, 1).unwrap();
    let i = IntervalSpec::new(0.0, 2.0 * PI).unwrap();
    for origin in [0.0, PI] {
        let sys = DividedDifferenceSystem::raw(b.clone(), u.clone()).unwrap().with_origin(origin).normalize(&i).unwrap();
        let g = assemble_gram(&sys, &i).unwrap();
        for k in 0..sys.len() {
            assert!((g.entries()[(k, k)].re - 1.0).abs() < 1e-12);
        }
    }
}
