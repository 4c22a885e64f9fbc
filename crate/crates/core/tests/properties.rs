use num_complex::Complex64 as C64;
use pevo_core::norms::{gs_norm, GevreyNormSpec};
use pevo_core::quantizer::apply_left;
use pevo_core::symbols::lambda::LambdaLattice;
use pevo_core::{bracket_h, spectral_derivative, GevreyConfig, Grid, StateVector, SymbolGrid};
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(8.0, 64, 4.0).unwrap()
}

fn state() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b)), 64)
}

/// Random spectrum supported on the dealiased band.
fn band_limited(g: &Grid, coeffs: &[C64]) -> StateVector {
    let edge = g.band_edge();
    let spec = coeffs.iter().zip(g.xi_nodes()).map(|(c, &xi)| if xi.abs() <= edge { *c } else { C64::new(0.0, 0.0) }).collect();
    StateVector::from_spectrum(g, spec).unwrap()
}

fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
    let scale = b.iter().map(|z| z.norm()).fold(1.0, f64::max);
    a.iter().zip(b).all(|(p, q)| (p - q).norm() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(u in state()) {
        let g = grid();
        let s = StateVector::new(&g, u.clone()).unwrap();
        let (a, b) = (g.l2_norm(&u), g.l2_norm_spectral(s.spectrum()));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        let back = StateVector::from_spectrum(&g, s.spectrum().to_vec()).unwrap();
        prop_assert!(close(back.values(), &u, 1e-13));
    }

    #[test]
    fn derivatives_compose(c in state(), j in 1u32..3, k in 1u32..3) {
        let u = band_limited(&grid(), &c);
        let twice = spectral_derivative(&spectral_derivative(&u, j), k);
        prop_assert!(close(twice.values(), spectral_derivative(&u, j + k).values(), 1e-10));
    }

    #[test]
    fn bracket_bounds(xi in -1e4..1e4f64, h in 0.5..50.0f64, step in 0.0..10.0f64) {
        let b = bracket_h(xi, h);
        prop_assert!(b >= xi.abs().max(h) && b <= xi.abs() + h);
        prop_assert!(bracket_h(xi.abs() + step, h) >= b);
        prop_assert_eq!(b, bracket_h(-xi, h));
    }

    #[test]
    fn left_quantization_is_linear(u in state(), v in state(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let g = grid();
        let p = SymbolGrid::from_fn(&g, 1.0, 0.0, |x, xi| C64::new((0.5 * x).sin() * xi, 1.0 / (1.0 + x * x))).unwrap();
        let (su, sv) = (StateVector::new(&g, u.clone()).unwrap(), StateVector::new(&g, v.clone()).unwrap());
        let mixed: Vec<C64> = u.iter().zip(&v).map(|(x, y)| x * a + y * C64::new(0.0, b)).collect();
        let lhs = apply_left(&p, &StateVector::new(&g, mixed).unwrap()).unwrap();
        let (pu, pv) = (apply_left(&p, &su).unwrap(), apply_left(&p, &sv).unwrap());
        let rhs: Vec<C64> = pu.values().iter().zip(pv.values()).map(|(x, y)| x * a + y * C64::new(0.0, b)).collect();
        prop_assert!(close(lhs.values(), &rhs, 1e-11));
    }

    #[test]
    fn gevrey_weight_dominates_l2(xi in -200.0..200.0f64, m in 0.0..3.0f64, rho in 0.0..2.0f64, theta in 1.1..4.0f64) {
        let spec = GevreyNormSpec { m, rho, theta, h: 1.0 };
        prop_assert!(spec.weight(xi) >= 1.0);
    }

    #[test]
    fn gs_norm_monotone(c in state(), rho in 0.0..1.0f64, extra in 0.0..1.0f64, m in 0.0..2.0f64) {
        let u = band_limited(&grid(), &c);
        let base = GevreyNormSpec { m, rho, theta: 2.0, h: 1.0 };
        let n0 = gs_norm(&u, &base).unwrap();
        let wider = GevreyNormSpec { rho: rho + extra, ..base };
        let smoother = GevreyNormSpec { m: m + extra, ..base };
        prop_assert!(gs_norm(&u, &wider).unwrap() >= n0);
        prop_assert!(gs_norm(&u, &smoother).unwrap() >= n0);
        let l2 = gs_norm(&u, &GevreyNormSpec::l2()).unwrap();
        prop_assert!((l2 - u.l2_norm()).abs() <= 1e-12 * l2.max(1e-300));
    }

    #[test]
    fn xi_nodes_ordered_and_symmetric(log_n in 3u32..9, l in 1.0..40.0f64) {
        let n = 1usize << log_n;
        let g = Grid::new(l, n, 1.0).unwrap();
        let xi = g.xi_nodes();
        prop_assert!(xi.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(xi[n / 2], 0.0);
        for j in 1..n / 2 {
            prop_assert!((xi[n / 2 + j] + xi[n / 2 - j]).abs() < 1e-12 * g.xi_max());
        }
        prop_assert!((-xi[0] - g.xi_max()).abs() < 1e-12 * g.xi_max());
    }

    #[test]
    fn lambda_vanishes_at_low_frequency_and_origin(x in -20.0..20.0f64, xi in -200.0..200.0f64) {
        let cfg = GevreyConfig { h: 4.0, ..GevreyConfig::kdv3() };
        let lat = LambdaLattice::new(&cfg, 1.0, &[x, 0.0], &[xi, 0.5 * cfg.h], 0).unwrap();
        for k in 1..cfg.p {
            prop_assert_eq!(lat.value(k, 0, 1), 0.0);
            prop_assert_eq!(lat.value(k, 1, 0), 0.0);
        }
    }

    #[test]
    fn lambda_is_odd_in_x(x in 0.0..20.0f64, xi in -200.0..200.0f64) {
        let cfg = GevreyConfig { h: 4.0, ..GevreyConfig::kdv3() };
        let lat = LambdaLattice::new(&cfg, 1.0, &[x, -x], &[xi], 0).unwrap();
        for k in 1..cfg.p {
            let (a, b) = (lat.value(k, 0, 0), lat.value(k, 1, 0));
            prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
