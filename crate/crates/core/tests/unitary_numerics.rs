mod common;

use std::f64::consts::PI;

use common::{cx, dense_of, expm_taylor, max_diff, random_dense_traceless, random_hermitian, rng, M};
use pauligeo::geometry::{curve_length, PenaltyMetric};
use pauligeo::sampling::{haar_special_unitary, RngStream};
use pauligeo::unitary::{
    bch_hamiltonian, dyson_propagate, dyson_propagate_with, su_exp, su_log, su_log_with_guard, uniform_grid, Stepper,
};
use pauligeo::{Error, HermitianCoeffs, PauliString, UnitaryCurve, UnitaryMatrix};
use rand::Rng;

fn h(terms: &[(&str, f64)]) -> HermitianCoeffs {
    HermitianCoeffs::from_text_terms(terms).unwrap()
}

fn spectral_radius(m: &M) -> f64 {
    m.clone().symmetric_eigenvalues().iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

/// Normalized Hilbert-Schmidt norm of a coefficient map.
fn coeff_norm(a: &HermitianCoeffs) -> f64 {
    a.iter().map(|(_, c)| c * c).fold(0.0, |s, x| s + x).sqrt()
}

#[test]
fn exp_matches_taylor_oracle() {
    let mut r = rng(10);
    for _ in 0..50 {
        let n = r.random_range(1..=3);
        let x = random_hermitian(&mut r, n, 4);
        let t = r.random_range(-2.0..2.0);
        let u = su_exp(&x, t).unwrap();
        assert!(max_diff(u.matrix(), &expm_taylor(&dense_of(&x), t)) < 1e-12);
        assert!(u.unitarity_defect() < 1e-12);
    }
}

#[test]
fn log_inverts_exp_inside_branch() {
    let mut r = rng(11);
    for _ in 0..300 {
        let n = r.random_range(1..=4);
        let x = random_dense_traceless(&mut r, n);
        let rad = spectral_radius(&dense_of(&x));
        let x = x.scaled(r.random_range(0.0..1.0) * (PI - 0.01) / rad);
        let back = su_log(&su_exp(&x, 1.0).unwrap()).unwrap();
        let hs = (dense_of(&back) - dense_of(&x)).norm();
        assert!(hs < 1e-9, "n={n} hs={hs}");
    }
}

#[test]
fn minus_identity_is_a_branch_error() {
    for n in 1..=3 {
        let z: String = std::iter::once('Z').chain(std::iter::repeat('I').take(n - 1)).collect();
        let u = su_exp(&h(&[(z.as_str(), PI)]), 1.0).unwrap();
        match su_log(&u) {
            Err(Error::BranchViolation { phase, .. }) => assert!((phase.abs() - PI).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn haar_samples_are_exponentials() {
    let root = RngStream::new(12);
    let mut checked = 0;
    for i in 0..400u64 {
        let u = UnitaryMatrix::new(haar_special_unitary(4, &root.substream(i))).unwrap();
        let q = match su_log_with_guard(&u, 1e-3) {
            Ok(q) => q,
            Err(Error::BranchViolation { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        assert!(max_diff(&expm_taylor(&dense_of(&q), 1.0), u.matrix()) < 1e-8);
        checked += 1;
        if checked == 200 {
            break;
        }
    }
    assert_eq!(checked, 200);
}

/// `i d/de [exp(-i(Q + e Qdot)) exp(iQ)]` at `e = 0`, by a central difference.
fn frame_change_oracle(q: &HermitianCoeffs, qdot: &HermitianCoeffs) -> M {
    let (dq, dd) = (dense_of(q), dense_of(qdot));
    let eps = 1e-4;
    let plus = expm_taylor(&(&dq + &dd * cx(eps, 0.0)), 1.0);
    let minus = expm_taylor(&(&dq - &dd * cx(eps, 0.0)), 1.0);
    (plus - minus) * expm_taylor(&dq, -1.0) * cx(0.0, 1.0 / (2.0 * eps))
}

#[test]
fn bch_matches_frame_change_oracle() {
    let mut r = rng(13);
    for _ in 0..100 {
        let n = r.random_range(1..=3);
        let q = random_dense_traceless(&mut r, n);
        let qdot = random_dense_traceless(&mut r, n);
        let q = q.scaled(r.random_range(0.0..0.5) / coeff_norm(&q));
        let qdot = qdot.scaled(r.random_range(0.0..0.5) / coeff_norm(&qdot));
        let series = bch_hamiltonian(&q, &qdot, 12).unwrap();
        let err = max_diff(&dense_of(&series), &frame_change_oracle(&q, &qdot));
        assert!(err < 1e-6, "n={n} err={err}");
    }
}

#[test]
fn bch_commuting_pairs_are_exact() {
    let pairs = [
        (h(&[("ZI", 0.4)]), h(&[("IZ", 0.3), ("ZZ", -0.2)])),
        (h(&[("XX", 0.5), ("YY", 0.1)]), h(&[("ZZ", 0.25)])),
        (h(&[("XZY", 0.3)]), h(&[("XZY", -0.1), ("III", 0.0)])),
    ];
    for (q, qdot) in &pairs {
        for order in [0, 1, 12, 20] {
            assert_eq!(bch_hamiltonian(q, qdot, order).unwrap(), *qdot);
        }
    }
}

#[test]
fn bch_first_order_example_and_linearity() {
    let (a, b) = (0.3, 0.7);
    let got = bch_hamiltonian(&h(&[("Z", a)]), &h(&[("X", b)]), 1).unwrap();
    assert!(got.axpy(-1.0, &h(&[("X", b), ("Y", a * b)])).max_abs() < 1e-15);

    let mut r = rng(14);
    let q = random_hermitian(&mut r, 2, 3);
    let (u, v) = (random_hermitian(&mut r, 2, 3), random_hermitian(&mut r, 2, 3));
    for order in [0, 3, 12] {
        let lhs = bch_hamiltonian(&q, &u.scaled(2.0).axpy(-0.5, &v), order).unwrap();
        let rhs = bch_hamiltonian(&q, &u, order)
            .unwrap()
            .scaled(2.0)
            .axpy(-0.5, &bch_hamiltonian(&q, &v, order).unwrap());
        assert!(lhs.axpy(-1.0, &rhs).max_abs() < 1e-12);
    }
}

#[test]
fn dyson_constant_and_commuting_schedules() {
    let h0 = h(&[("XY", 0.6), ("ZI", -0.4), ("IX", 0.2)]);
    let grid = uniform_grid(0.0, 2.0, 40);
    let curve = dyson_propagate(|_| Ok(h0.clone()), &grid).unwrap();
    for (l, u) in grid.iter().zip(curve.points()) {
        assert!(u.max_abs_diff(&su_exp(&h0, *l).unwrap()) < 1e-8);
    }

    let grid = uniform_grid(0.0, 2.0, 200);
    let z = "Z".parse::<PauliString>().unwrap();
    let f = |l: f64| (3.0 * l).cos() + l;
    let integral = |l: f64| (3.0 * l).sin() / 3.0 + l * l / 2.0;
    let curve = dyson_propagate(|l| Ok(HermitianCoeffs::single(z, f(l))), &grid).unwrap();
    for (l, u) in grid.iter().zip(curve.points()) {
        let exact = su_exp(&HermitianCoeffs::single(z, integral(*l)), 1.0).unwrap();
        assert!(u.max_abs_diff(&exact) < 1e-8);
    }
}

#[test]
fn dyson_piecewise_product() {
    let grid = uniform_grid(0.0, 2.0, 20);
    let curve = dyson_propagate(
        |l| Ok(if l < 1.0 { h(&[("Z", 1.0)]) } else { h(&[("X", 1.0)]) }),
        &grid,
    )
    .unwrap();
    let expect = su_exp(&h(&[("X", 1.0)]), 1.0)
        .unwrap()
        .mul(&su_exp(&h(&[("Z", 1.0)]), 1.0).unwrap());
    assert!(curve.endpoint().max_abs_diff(&expect) < 1e-8);
}

/// Classical RK4 on `U' = -i H U` with dense matrices.
fn rk4_oracle(schedule: impl Fn(f64) -> M, end: f64, steps: usize, dim: usize) -> M {
    let rhs = |l: f64, u: &M| schedule(l) * u * cx(0.0, -1.0);
    let dt = end / steps as f64;
    let mut u = M::identity(dim, dim);
    for s in 0..steps {
        let l = s as f64 * dt;
        let k1 = rhs(l, &u);
        let k2 = rhs(l + dt / 2.0, &(&u + &k1 * cx(dt / 2.0, 0.0)));
        let k3 = rhs(l + dt / 2.0, &(&u + &k2 * cx(dt / 2.0, 0.0)));
        let k4 = rhs(l + dt, &(&u + &k3 * cx(dt, 0.0)));
        u += (k1 + k2 * cx(2.0, 0.0) + k3 * cx(2.0, 0.0) + k4) * cx(dt / 6.0, 0.0);
    }
    u
}

#[test]
fn dyson_step_halving() {
    let schedule = |l: f64| h(&[("XI", l.cos()), ("ZZ", (2.0 * l).sin()), ("IY", 0.3 + l * l)]);
    let reference = rk4_oracle(|l| dense_of(&schedule(l)), 1.5, 20_000, 4);
    for (stepper, ratio) in [(Stepper::Midpoint, 4.0), (Stepper::CommutatorFree4, 4.0)] {
        let err = |m: usize| {
            let curve = dyson_propagate_with(|l| Ok(schedule(l)), &uniform_grid(0.0, 1.5, m), stepper).unwrap();
            max_diff(curve.endpoint().matrix(), &reference)
        };
        let (coarse, fine) = (err(16), err(32));
        assert!(coarse / fine >= ratio, "{stepper:?}: {coarse} -> {fine}");
    }
}

#[test]
fn lengths_are_right_invariant() {
    let mut r = rng(15);
    let metric = PenaltyMetric::standard(2).unwrap();
    let root = RngStream::new(16);
    for i in 0..20u64 {
        let a = random_hermitian(&mut r, 2, 3);
        let b = random_hermitian(&mut r, 2, 3);
        let curve = UnitaryCurve::sample(0.0, 1.0, 1000, |l| {
            Ok(su_exp(&a, l)?.mul(&su_exp(&b, l * l)?))
        })
        .unwrap();
        let w = UnitaryMatrix::new(haar_special_unitary(4, &root.substream(i))).unwrap();
        let l0 = curve_length(&metric, &curve).unwrap();
        let l1 = curve_length(&metric, &curve.right_translate(&w)).unwrap();
        assert!((l0 - l1).abs() < 1e-6 * l0.max(1.0), "{l0} vs {l1}");
    }
}
