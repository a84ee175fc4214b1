use nalgebra::DMatrix;
use proptest::prelude::*;

use fpfunnel::config::ScenarioConfig;
use fpfunnel::control::{funnel_input, FunnelSpec, FUNNEL_GUARD};
use fpfunnel::eigen::jacobi_eigen;
use fpfunnel::hermite::{basis_size, graded_indices, hermite_eval, hermite_orthogonality, log_hermite_norm_sq};
use fpfunnel::spectral::SpectralSolver;
use fpfunnel::{Backend, BasisTable, BoxRule, Disturbance, Error, MultiIndex, Nonlinearity, OuModel, QuadratureRule, Scenario};

/// Symmetric positive definite `A A^T + 0.2 I`.
fn spd(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |v| {
        let a = DMatrix::from_row_slice(dim, dim, &v);
        &a * a.transpose() + DMatrix::identity(dim, dim) * 0.2
    })
}

fn model(dim: usize) -> impl Strategy<Value = OuModel> {
    (0.05f64..2.0, spd(dim)).prop_map(|(c, g)| OuModel::new(c, g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermite_three_term_recurrence(n in 1usize..30, x in -4.0f64..4.0) {
        let lhs = hermite_eval(n + 1, x);
        let rhs = 2.0 * x * hermite_eval(n, x) - 2.0 * n as f64 * hermite_eval(n - 1, x);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn hermite_orthogonality_off_diagonal(n in 0usize..20, m in 0usize..20) {
        let rule = QuadratureRule::new(1, 24);
        let v = hermite_orthogonality(n, m, &rule).unwrap();
        let scale = (0.5 * (log_hermite_norm_sq(n) + log_hermite_norm_sq(m))).exp();
        if n == m {
            prop_assert!((v / scale - 1.0).abs() < 1e-10);
        } else {
            prop_assert!(v.abs() / scale < 1e-10);
        }
    }

    #[test]
    fn multi_index_lower_plus_round_trip(entries in prop::collection::vec(0usize..6, 1..4), k in 0usize..3) {
        let dim = entries.len();
        let k = k % dim;
        let a = MultiIndex::new(entries);
        let up = a.plus(&MultiIndex::unit(dim, k));
        prop_assert_eq!(up.order(), a.order() + 1);
        prop_assert_eq!(up.lower(k), Some(a));
    }

    #[test]
    fn basis_positions_and_lowering(dim in 1usize..4, k in 0usize..7) {
        let m = OuModel::new(0.5, DMatrix::identity(dim, dim)).unwrap();
        let b = BasisTable::new(&m, k);
        prop_assert_eq!(b.len(), basis_size(dim, k));
        prop_assert_eq!(b.indices(), &graded_indices(dim, k)[..]);
        for (i, alpha) in b.indices().iter().enumerate() {
            prop_assert_eq!(b.position(alpha), Some(i));
            for j in 0..dim {
                let expect = alpha.lower(j).map(|l| b.position(&l).unwrap());
                prop_assert_eq!(b.lowered(i, j), expect);
            }
        }
        prop_assert!(b.indices().windows(2).all(|w| w[0].order() <= w[1].order()));
    }

    #[test]
    fn jacobi_reconstructs(g in spd(3)) {
        let e = jacobi_eigen(&g);
        let v = &e.eigenvectors;
        let back = v * DMatrix::from_diagonal(&e.eigenvalues) * v.transpose();
        prop_assert!((back - &g).amax() < 1e-12);
        prop_assert!((v.transpose() * v - DMatrix::identity(3, 3)).amax() < 1e-12);
        prop_assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hermite_coordinates_round_trip(m in model(2), x in prop::collection::vec(-3.0f64..3.0, 2)) {
        let mut y = vec![0.0; 2];
        let mut back = vec![0.0; 2];
        m.to_hermite_coords(&x, &mut y);
        m.from_hermite_coords(&y, &mut back);
        prop_assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
        // phi = |y|^2
        prop_assert!((m.phi(&x) - (y[0] * y[0] + y[1] * y[1])).abs() < 1e-10 * (1.0 + m.phi(&x)));
    }

    #[test]
    fn stationary_covariance_is_c_gamma_inverse(m in model(2)) {
        let inv = m.gamma().clone().try_inverse().unwrap();
        prop_assert!((m.stationary_covariance() - inv * m.c()).amax() < 1e-10);
    }

    #[test]
    fn zero_mass_disturbance_keeps_beta0(
        beta in prop::collection::vec(-1.0f64..1.0, 21),
        u in -5.0f64..5.0,
        t in 0.0f64..10.0,
    ) {
        let m = OuModel::from_rows(0.1, &[vec![1.0]]).unwrap();
        let d = Disturbance::Dipole { amplitude: 3.0, omega: 4.0, width: 3.0, axis: 0 };
        let s = SpectralSolver::new(m, Nonlinearity::Identity, 20, d, &BoxRule::for_projection(1, &[])).unwrap();
        let mut out = vec![0.0; 21];
        s.rhs(t, &beta, &[u], &mut out);
        prop_assert!(out[0].abs() < 1e-14);
    }

    #[test]
    fn unforced_rhs_is_pure_decay(m in model(2), beta in prop::collection::vec(-1.0f64..1.0, 28)) {
        let c = m.c();
        let s = SpectralSolver::new(m, Nonlinearity::Identity, 6, Disturbance::None, &BoxRule::for_projection(2, &[])).unwrap();
        let mut out = vec![0.0; 28];
        s.rhs(0.0, &beta, &[0.0, 0.0], &mut out);
        for a in 0..28 {
            let expect = -c * s.basis().eigenvalues()[a] * beta[a];
            prop_assert!((out[a] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn funnel_input_is_finite_inside_and_aborts_outside(t in 0.0f64..10.0, e in -20.0f64..20.0) {
        let spec = FunnelSpec::standard();
        let level = spec.phi.eval(t) * e.abs();
        match funnel_input(t, &[e], &[0.0], &spec) {
            Ok(u) => {
                prop_assert!(level * level < FUNNEL_GUARD);
                prop_assert!(u[0].is_finite());
            }
            Err(Error::FunnelViolation { .. }) => prop_assert!(level * level >= FUNNEL_GUARD),
            Err(other) => prop_assert!(false, "unexpected {other:?}"),
        }
    }

    #[test]
    fn nonlinearities_are_linearly_bounded(level in 0.1f64..5.0, gain in -3.0f64..3.0, v in -50.0f64..50.0) {
        for g in [Nonlinearity::Identity, Nonlinearity::Scaled { gain }, Nonlinearity::Saturating { level }] {
            let out = g.apply(&[v])[0];
            prop_assert!(out.abs() <= g.bound() * (1.0 + v.abs()) + 1e-12);
        }
    }
}

/// `||p(t)||_h` under the disturbed funnel loop settles into a periodic regime:
/// the sup over `[20, 40]` does not exceed the sup over `[0, 20]`.
#[test]
fn weighted_norm_stays_bounded() {
    let mut cfg = ScenarioConfig::tracking_disturbed();
    cfg.solver.horizon = 40.0;
    let rec = Scenario::new(cfg).unwrap().run(Backend::Spectral).unwrap();
    let s = &rec.series;
    let sup = |lo: f64, hi: f64| {
        s.t.iter()
            .zip(&s.h_norm)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(_, h)| *h)
            .fold(0.0, f64::max)
    };
    let (early, late) = (sup(0.0, 20.0), sup(20.0, 40.0));
    assert!(early.is_finite() && late <= 1.01 * early, "early {early}, late {late}");
}
