//! Randomised properties of the closed forms, solver and report formatting.

use nalgebra::DVector;
use proptest::prelude::*;

use harnack_lab::closed_forms::{lambda_min, CounterexampleParams, SupersolutionParams};
use harnack_lab::constants::{alpha, ln_gamma_bar};
use harnack_lab::fd_solver::{solve, BoundaryCondition, GridState, SolveOptions};
use harnack_lab::report::fmt_real;
use harnack_lab::Params;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn barrier_residual_nonnegative(n in 2usize..5, p in 1.2f64..3.0, q in 1.2f64..1.9,
                                    z in 0.01f64..0.99, t in 0.01f64..2.0) {
        let params = Params::new(n, p, q).unwrap();
        let sp = SupersolutionParams::new(params, lambda_min(&params).unwrap(), 1.0, DVector::zeros(n), 0.0).unwrap();
        let res = sp.residual(z, t).unwrap();
        let scale = sp.radial_jet(z, t).unwrap().u_t.abs().max(1.0);
        prop_assert!(res >= -1e-9 * scale, "residual {res}");
    }

    #[test]
    fn counterexample_solves_equation(n in 2usize..6, frac in 0.05f64..0.95, r in 0.05f64..3.0, t in -2.0f64..2.0) {
        // p between 1 and the supercritical threshold 2n/(n+1)
        let p = 1.0 + frac * (2.0 * n as f64 / (n as f64 + 1.0) - 1.0);
        let ce = CounterexampleParams::new(n, p).unwrap();
        let rel = ce.residual(r, t).unwrap().abs() / ce.radial_jet(r, t).u_t.abs();
        prop_assert!(rel < 1e-8, "relative residual {rel}");
    }

    #[test]
    fn alpha_in_unit_interval(ln_mu in 0.7f64..30.0, q in 1.001f64..1.999) {
        let a = alpha(ln_mu.exp(), q).unwrap();
        prop_assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn gamma_bar_monotone_in_lambda(ln_l in 0.0f64..500.0, dl in 0.1f64..10.0, q in 1.1f64..1.95) {
        let a = ln_gamma_bar(ln_l, 0.1, 4.0, q).unwrap();
        let b = ln_gamma_bar(ln_l + dl, 0.1, 4.0, q).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn reals_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
        prop_assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn radial_solve_stays_within_data_bounds(amps in proptest::collection::vec(-0.3f64..0.3, 1..5), q in 1.3f64..2.0) {
        let params = Params::new(2, 2.0, q).unwrap();
        let f = move |r: f64| 1.0 + amps.iter().enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * std::f64::consts::PI * r).cos()).sum::<f64>();
        let state = GridState::radial_from_fn(params, 24, 1.0, 0.0, &f).unwrap();
        let frozen = f.clone();
        let bc = BoundaryCondition::function(move |pos, _| frozen(pos.norm()));
        let traj = solve(&state, &bc, 0.005, &SolveOptions::default()).unwrap();
        let (lo, hi) = (state.min(), state.max());
        for &v in traj.last().values() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
