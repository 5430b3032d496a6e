mod common;

use common::{brownian, disc, line};
use dynkin_core::game::{
    double_obstacle_oracle, double_obstacle_residual, fixed_point_defect, iterate_game, sandwich_violation,
    solve_game_with_cost, GameConfig, GameProblem,
};
use dynkin_core::linalg::RelaxationConfig;
use dynkin_core::obstacle::RelaxationStart;
use dynkin_core::ScalarField;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_games_are_consistent(
        b in -0.4f64..0.4,
        lo_amp in 0.05f64..0.6,
        gap in 0.0f64..0.3,
        freq in 0.5f64..5.0,
        shift in -3.0f64..3.0,
    ) {
        // 15 × 20 = 300 nodes
        let d = disc(brownian(b, 0.7, 0.3), line(-1.0, 1.0, 15, 1.0, 19));
        let g = ScalarField::from_fn(d.grid(), |t, x| lo_amp * (freq * x[0] + shift).sin() - 0.05 * t);
        let h = ScalarField::from_fn(d.grid(), |t, x| {
            lo_amp * (freq * x[0] + shift).sin() - 0.05 * t + gap + 0.2 * (x[0] * x[0])
        });
        let prob = GameProblem::new(&d, g, h, None, None).unwrap();
        let cfg = GameConfig::default();
        let sol = iterate_game(&d, &prob, &cfg).unwrap();
        prop_assert!(sandwich_violation(&sol.w_bar, prob.g(), prob.h()) <= 1e-9);
        for r in &sol.history {
            prop_assert!(r.phi_increment_min >= -1e-9 && r.psi_increment_min >= -1e-9);
        }
        let oracle = double_obstacle_oracle(&d, &prob, RelaxationStart::Previous, &RelaxationConfig::default()).unwrap();
        prop_assert!(sol.w_bar.max_abs_diff(&oracle) < 1e-6);
        prop_assert!(double_obstacle_residual(&d, &prob, &oracle).unwrap() <= 1e-9);
        prop_assert!(fixed_point_defect(&d, &prob, &sol, &cfg).unwrap() < cfg.outer_tol);
        // masks are disjoint wherever g < h
        for k in 0..d.grid().n_time() {
            for i in 0..d.grid().n_space() {
                if prob.h().get(k, i) - prob.g().get(k, i) > 2.0 * sol.contact_tol {
                    prop_assert!(!(sol.stop_region_sigma.get(k, i) && sol.stop_region_tau.get(k, i)));
                }
            }
        }
    }
}

#[test]
fn symmetric_cost_game_is_clamped_pure_cost_value() {
    let (alpha, c, rate) = (0.4, 0.3, 0.25);
    let d = disc(brownian(0.0, 0.8, alpha), line(-1.0, 1.0, 21, 2.0, 20));
    let g = ScalarField::constant(d.grid(), -c);
    let h = ScalarField::constant(d.grid(), c);
    let f = ScalarField::constant(d.grid(), rate);
    let prob = GameProblem::new(&d, g, h, Some(f), None).unwrap();
    let sol = solve_game_with_cost(&d, &prob, &GameConfig::default()).unwrap();
    let t_max = d.grid().t_max();
    for (k, &t) in d.grid().t_nodes().iter().enumerate() {
        let pure = rate / alpha * (1.0 - (-alpha * (t_max - t)).exp());
        let expected = pure.clamp(-c, c);
        for &w in sol.w_bar.slice(k) {
            assert!((w - expected).abs() < 1e-6, "t={t}: {w} vs {expected}");
        }
    }
}

#[test]
fn oracle_starts_agree() {
    let d = disc(brownian(0.2, 0.6, 0.2), line(-1.0, 1.0, 41, 1.0, 20));
    let g = ScalarField::from_fn(d.grid(), |_, x| (0.1 - x[0]).max(0.0));
    let h = g.map(|v| v + 0.03);
    let prob = GameProblem::new(&d, g, h, Some(ScalarField::from_fn(d.grid(), |_, x| 0.1 * x[0])), None).unwrap();
    let cfg = RelaxationConfig::default();
    let a = double_obstacle_oracle(&d, &prob, RelaxationStart::Lower, &cfg).unwrap();
    let b = double_obstacle_oracle(&d, &prob, RelaxationStart::Upper, &cfg).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-6);
    let sol = solve_game_with_cost(&d, &prob, &GameConfig::default()).unwrap();
    assert!(sol.w_bar.max_abs_diff(&a) < 1e-6);
}
