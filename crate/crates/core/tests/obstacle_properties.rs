mod common;

use common::{brownian, disc, gbm, line};
use dynkin_core::forms::resolvent_apply;
use dynkin_core::linalg::RelaxationConfig;
use dynkin_core::obstacle::{
    obstacle_oracle, solve_obstacle, solve_obstacle_with_cost, solve_obstacle_with_source, solve_penalized,
    vi_residual_check, PenaltyConfig,
};
use dynkin_core::ScalarField;
use proptest::prelude::*;

fn wavy_obstacle(grid: &dynkin_core::SpaceTimeGrid, amp: f64, freq: f64, shift: f64) -> ScalarField {
    ScalarField::from_fn(grid, |t, x| amp * (freq * x[0] + shift).sin() - 0.1 * t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dominance_monotonicity_and_oracle(
        b in -0.5f64..0.5,
        a in 0.3f64..1.2,
        amp in 0.1f64..1.0,
        freq in 0.5f64..6.0,
        shift in -3.0f64..3.0,
    ) {
        let d = disc(brownian(b, a, 0.4), line(-1.0, 1.0, 25, 1.0, 12));
        let g = wavy_obstacle(d.grid(), amp, freq, shift);
        let cfg = PenaltyConfig::default();
        let sol = solve_obstacle(&d, &g, &cfg).unwrap();
        // value ≥ g up to 1e-9 everywhere
        prop_assert!(sol.value.min_diff(&g) >= -1e-9);
        // penalized solutions increase as ε decreases
        let coarse = solve_penalized(&d, &g, 1e-2, &cfg).unwrap();
        let fine = solve_penalized(&d, &g, 1e-4, &cfg).unwrap();
        prop_assert!(fine.min_diff(&coarse) >= -1e-9);
        prop_assert!(sol.value.min_diff(&fine) >= -1e-9);
        let oracle = obstacle_oracle(&d, &g, &RelaxationConfig::default()).unwrap();
        prop_assert!(sol.value.max_abs_diff(&oracle) < 1e-6);
        // contact mask only where the value is within tolerance of g
        for k in 0..d.grid().n_time() {
            for i in 0..d.grid().n_space() {
                if sol.contact_mask.get(k, i) {
                    prop_assert!((sol.value.get(k, i) - g.get(k, i)).abs() <= sol.contact_tol);
                }
            }
        }
    }

    #[test]
    fn minimal_among_constant_supersolutions(
        amp in 0.1f64..1.0,
        freq in 0.5f64..6.0,
        shift in -3.0f64..3.0,
    ) {
        // a constant c ≥ max g⁺ is a discrete α-potential, so it bounds the value
        let d = disc(brownian(0.2, 0.7, 0.3), line(-1.0, 1.0, 21, 1.0, 10));
        let g = wavy_obstacle(d.grid(), amp, freq, shift);
        let c = g.max_abs();
        let w = ScalarField::constant(d.grid(), c).zip_map(&g, f64::max);
        let sol = solve_obstacle(&d, &g, &PenaltyConfig::default()).unwrap();
        prop_assert!(w.min_diff(&sol.value) >= -1e-9);
    }

    #[test]
    fn vi_holds_against_random_admissible_fields(seed in 0u64..1000) {
        let d = disc(brownian(0.3, 0.8, 0.5), line(-1.0, 1.0, 21, 1.0, 10));
        let g = ScalarField::from_fn(d.grid(), |t, x| (0.2 - x[0]).max(0.0) + 0.05 * t);
        let sol = solve_obstacle(&d, &g, &PenaltyConfig::default()).unwrap();
        prop_assert!(vi_residual_check(&d, &sol.value, &g, None, 20, seed) >= -1e-8);
    }
}

#[test]
fn vi_residual_on_the_identity_is_zero() {
    let d = disc(brownian(0.3, 0.8, 0.5), line(-1.0, 1.0, 21, 1.0, 10));
    let g = ScalarField::from_fn(d.grid(), |_, x| (0.2 - x[0]).max(0.0));
    let sol = solve_obstacle(&d, &g, &PenaltyConfig::default()).unwrap();
    let worst = vi_residual_check(&d, &sol.value, &g, None, 0, 1);
    assert!(worst.abs() < 1e-12, "{worst}");
}

#[test]
fn put_free_boundary_rises_towards_strike() {
    let d = disc(gbm(0.06, 0.2, 0.06), line(0.2, 3.0, 141, 1.0, 100));
    let g = ScalarField::from_fn(d.grid(), |_, x| (1.0 - x[0]).max(0.0));
    let sol = solve_obstacle(&d, &g, &PenaltyConfig::default()).unwrap();
    let nodes = d.grid().axes()[0].nodes().to_vec();
    let mut prev = 0.0;
    for k in 0..d.grid().n_time() - 1 {
        // below the strike the contact set is an interval from the left edge;
        // far out of the money g = 0 and the value is within contact_tol of it
        let below = nodes.iter().filter(|&&x| x < 1.0).count();
        let mask = &sol.contact_mask.slice(k)[..below];
        let edge = mask.iter().position(|&b| !b).unwrap();
        assert!(mask[edge..].iter().all(|&b| !b), "slice {k} not an interval");
        let s = nodes[edge - 1];
        assert!(s >= prev - 1e-12, "free boundary decreased at slice {k}");
        assert!(s < 1.0);
        prev = s;
    }
}

#[test]
fn holding_cost_closed_form() {
    let (alpha, c) = (0.3, 0.5);
    let d = disc(brownian(0.1, 0.6, alpha), line(-1.0, 1.0, 21, 2.0, 25));
    let g = ScalarField::zeros(d.grid());
    let f = ScalarField::constant(d.grid(), c);
    let sol = solve_obstacle_with_cost(&d, &g, &f, &PenaltyConfig::default()).unwrap();
    let t_max = d.grid().t_max();
    for (k, &t) in d.grid().t_nodes().iter().enumerate() {
        let exact = c / alpha * (1.0 - (-alpha * (t_max - t)).exp());
        for &u in sol.value.slice(k) {
            if exact > 0.0 {
                approx::assert_relative_eq!(u, exact, max_relative = 1e-6);
            } else {
                assert_eq!(u, 0.0);
            }
        }
    }
}

#[test]
fn direct_and_reduced_holding_cost_agree() {
    let d = disc(gbm(0.06, 0.2, 0.06), line(0.2, 3.0, 71, 1.0, 50));
    let g = ScalarField::from_fn(d.grid(), |_, x| (1.0 - x[0]).max(0.0));
    let f = ScalarField::from_fn(d.grid(), |t, x| 0.02 * (1.0 + t) * (x[0] - 0.9));
    let cfg = PenaltyConfig::default();
    let reduced = solve_obstacle_with_cost(&d, &g, &f, &cfg).unwrap();
    let direct = solve_obstacle_with_source(&d, &g, &f, &cfg).unwrap();
    let gap = reduced.value.max_abs_diff(&direct.value);
    assert!(gap < 1e-8, "{gap}");
    let r = resolvent_apply(&d, &f).unwrap();
    assert!(reduced.value.min_diff(&g.zip_map(&r, f64::max)) >= -1e-9);
}
