use num_complex::Complex64;
use proptest::prelude::*;

use gdnls::conserved::conserved_set;
use gdnls::numerics::spectral::shift;
use gdnls::numerics::{Field, Grid};
use gdnls::soliton::{elliptic_residual, SolitonParams};
use gdnls::virial::{i_composite, Cutoff};

fn bump(g: &Grid, a: f64, b: f64, k: f64, x0: f64) -> Field {
    Field::from_fn(g, |x| {
        let e = (-(x - x0) * (x - x0) / 4.0).exp();
        Complex64::new(a, b) * e * Complex64::from_polar(1.0, k * x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conserved_quantities_ignore_phase_and_grid_shifts(
        a in 0.1f64..2.0, b in -1.0f64..1.0, k in -2.0f64..2.0, x0 in -3.0f64..3.0,
        alpha in 0.0f64..6.3, m in 0i32..200, sigma in 1.05f64..1.95,
    ) {
        let g = Grid::new(20.0, 512).unwrap();
        let u = bump(&g, a, b, k, x0);
        let v = shift(&u, m as f64 * g.dx()).scale(Complex64::from_polar(1.0, alpha));
        let (p, q) = (conserved_set(&u, sigma).unwrap(), conserved_set(&v, sigma).unwrap());
        let tol = 1e-11 * (1.0 + p.m + p.e.abs() + p.j.abs());
        prop_assert!((p.m - q.m).abs() < tol && (p.p - q.p).abs() < tol);
        prop_assert!((p.e - q.e).abs() < tol && (p.j - q.j).abs() < tol);
    }

    #[test]
    fn cutoff_is_odd_monotone_and_bounded(r in 0.5f64..8.0, x in -40.0f64..40.0) {
        let g = Grid::new(20.0, 64).unwrap();
        let c = Cutoff::new(r, &g).unwrap();
        let (v, d1, _) = c.eval(x);
        prop_assert_eq!(c.eval(-x).0, -v);
        prop_assert!((0.0..=1.0).contains(&d1));
        prop_assert!(v.abs() <= 1.5 * r * (1.0 + 1e-15));
        prop_assert!(c.eval(x + 1e-3).0 >= v);
        if x.abs() <= r {
            prop_assert_eq!(v, x);
        }
    }

    #[test]
    fn virial_functional_is_gauge_invariant(alpha in 0.0f64..6.3, y in -2.0f64..2.0, lam in -0.01f64..0.01) {
        let g = Grid::new(20.0, 512).unwrap();
        let c = Cutoff::new(4.0, &g).unwrap();
        let u = bump(&g, 1.0, 0.5, 0.7, 0.4);
        let a = i_composite(&u, y, lam, 1.0, 3.0, &c).unwrap().2;
        let b = i_composite(&u.scale(Complex64::from_polar(1.0, alpha)), y, lam, 1.0, 3.0, &c).unwrap().2;
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn soliton_residual_small_across_domain(sigma in 0.6f64..1.95, omega in 0.3f64..3.0, z in -0.8f64..0.8) {
        let p = SolitonParams::new(sigma, omega, 2.0 * z * omega.sqrt()).unwrap();
        let r = elliptic_residual(&p, &p.auto_grid(4096).unwrap()).unwrap();
        prop_assert!(r < 1e-8, "{:?}: {}", p, r);
    }
}
