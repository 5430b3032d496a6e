//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs the shipped configs at their full sizes and path counts.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dynkin_core::game::{double_obstacle_oracle, sandwich_violation};
use dynkin_core::linalg::RelaxationConfig;
use dynkin_core::obstacle::{
    obstacle_oracle, solve_obstacle, solve_obstacle_with_cost, solve_obstacle_with_source, solve_penalized,
    vi_residual_check, RelaxationStart,
};
use dynkin_core::ScalarField;
use dynkin_vi::pipeline::{verify_fields, Fields, Prepared, VerifyReport};
use dynkin_vi::ProblemConfig;

const SHIPPED: [&str; 6] = ["put", "cost_put", "cost", "game_put", "symmetric_game", "put2d"];

fn config(name: &str, out: &Path) -> ProblemConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"));
    let mut cfg = ProblemConfig::load(&path).expect("shipped config loads");
    cfg.output.dir = out.join(name);
    cfg
}

fn prepared(name: &str, out: &Path) -> Prepared {
    Prepared::new(config(name, out)).expect("shipped config prepares")
}

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: usize, title: &'static str, f: impl FnOnce() -> (bool, String)) -> Line {
    let t0 = Instant::now();
    let (pass, detail) = f();
    let line = Line {
        id,
        title,
        pass,
        detail,
        elapsed: t0.elapsed(),
    };
    println!(
        "criterion {:>2} [{}] {}: {} ({:.2} s)",
        line.id,
        if line.pass { "PASS" } else { "FAIL" },
        line.title,
        line.detail,
        line.elapsed.as_secs_f64()
    );
    line
}

/// Cox-Ross-Rubinstein tree for an American put, independent of the PDE
/// code path.
fn binomial_american_put(s0: f64, strike: f64, rate: f64, vol: f64, t: f64, steps: usize) -> f64 {
    let dt = t / steps as f64;
    let u = (vol * dt.sqrt()).exp();
    let d = 1.0 / u;
    let growth = (rate * dt).exp();
    let p = (growth - d) / (u - d);
    let disc = 1.0 / growth;
    let mut v: Vec<f64> = (0..=steps)
        .map(|j| (strike - s0 * u.powi(j as i32) * d.powi((steps - j) as i32)).max(0.0))
        .collect();
    for n in (0..steps).rev() {
        for j in 0..=n {
            let s = s0 * u.powi(j as i32) * d.powi((n - j) as i32);
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            v[j] = cont.max(strike - s);
        }
    }
    v[0]
}

fn c1_penalty_monotonicity(out: &Path) -> (bool, String) {
    let t0 = Instant::now();
    let prep = prepared("put", out);
    let cfg = &prep.cfg.penalty;
    let levels: Vec<ScalarField> = cfg
        .eps_schedule
        .iter()
        .map(|&eps| solve_penalized(&prep.disc, &prep.g, eps, cfg).expect("penalized solve"))
        .collect();
    let worst_decrease = levels
        .windows(2)
        .map(|w| w[1].min_diff(&w[0]))
        .fold(f64::INFINITY, f64::min);
    let last_delta = levels[levels.len() - 1].max_abs_diff(&levels[levels.len() - 2]);
    let runtime = t0.elapsed().as_secs_f64();
    (
        worst_decrease >= -1e-9 && last_delta < 1e-7 && runtime < 30.0,
        format!(
            "{} eps levels, min nodewise increase {worst_decrease:.3e} (>= -1e-9), last delta {last_delta:.3e} (< 1e-7), {runtime:.2} s (< 30 s)",
            levels.len()
        ),
    )
}

fn c2_dominance_and_vi(out: &Path) -> (bool, String) {
    let mut worst_dom = f64::INFINITY;
    let mut worst_vi = f64::INFINITY;
    for name in ["put", "cost_put", "put2d"] {
        let prep = prepared(name, out);
        let sol = prep.solve_stopping().expect("solve");
        worst_dom = worst_dom.min(sol.value.min_diff(&prep.g));
        worst_vi = worst_vi.min(vi_residual_check(&prep.disc, &sol.value, &prep.g, prep.f.as_ref(), 100, 2024));
    }
    (
        worst_dom >= -1e-9 && worst_vi >= -1e-8,
        format!("min(value - g) {worst_dom:.3e} (>= -1e-9), vi_residual_check over 100 trials {worst_vi:.3e} (>= -1e-8)"),
    )
}

fn c3_oracle(out: &Path) -> (bool, String) {
    let t0 = Instant::now();
    let relax = RelaxationConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, nodes) in [("put", Some(141)), ("put", Some(1001)), ("put", Some(10001)), ("put2d", None)] {
        let mut cfg = config(name, out);
        if let Some(n) = nodes {
            cfg.grid.axes[0].nodes = n;
        }
        let shape: Vec<String> = cfg.grid.axes.iter().map(|a| a.nodes.to_string()).collect();
        let prep = Prepared::new(cfg).expect("prepare");
        let sol = solve_obstacle(&prep.disc, &prep.g, &prep.cfg.penalty).expect("solve");
        let oracle = obstacle_oracle(&prep.disc, &prep.g, &relax).expect("oracle");
        let d = sol.value.max_abs_diff(&oracle);
        pass &= d <= 1e-6;
        parts.push(format!("{}x{}: {d:.2e}", shape.join("x"), prep.grid().n_time()));
    }
    let runtime = t0.elapsed().as_secs_f64();
    pass &= runtime < 120.0;
    (pass, format!("max |penalty - relaxation| {} (<= 1e-6), {runtime:.1} s (< 120 s)", parts.join(", ")))
}

fn c4_binomial(out: &Path) -> (bool, String) {
    let prep = prepared("put", out);
    let sol = prep.solve_stopping().expect("solve");
    let v = sol.value.interpolate(prep.grid(), 0.0, &[1.0]);
    let tree = binomial_american_put(1.0, 1.0, 0.06, 0.2, 1.0, 10_000);
    let diff = (v - tree).abs();
    (diff <= 5e-3, format!("solver {v:.6}, binomial(1e4) {tree:.6}, |diff| {diff:.2e} (<= 5e-3)"))
}

fn c5_c6(report: &VerifyReport) -> ((bool, String), (bool, String)) {
    let stopping: Vec<_> = report.points.iter().filter_map(|p| p.stopping.as_ref()).collect();
    let matches: Vec<String> = stopping
        .iter()
        .map(|s| {
            let m = &s.value_match;
            format!(
                "x={}: |{:.5}-{:.5}|={:.1e}/{:.1e}",
                m.start.x[0],
                m.estimate.mean,
                m.solver_value,
                (m.estimate.mean - m.solver_value).abs(),
                m.bound
            )
        })
        .collect();
    let c5 = stopping.len() >= 5 && report.n_paths >= 100_000 && stopping.iter().all(|s| s.value_match.pass);
    let checks: Vec<_> = stopping.iter().flat_map(|s| &s.suboptimality).collect();
    let worst = checks
        .iter()
        .map(|c| c.diff_mean - c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let c6 = !checks.is_empty() && checks.iter().all(|c| c.pass);
    (
        (c5, format!("{} paths, {}", report.n_paths, matches.join("; "))),
        (
            c6,
            format!(
                "{} perturbed policies over {} start points, max (J - value - bound) {worst:.2e} (<= 0)",
                checks.len(),
                stopping.len()
            ),
        ),
    )
}

fn c7_game(out: &Path) -> (bool, String) {
    let prep = prepared("game_put", out);
    let sol = prep.solve_game().expect("game solve");
    let h = prep.h.as_ref().unwrap();
    let sandwich = sandwich_violation(&sol.w_bar, &prep.g, h);
    let mono = sol
        .history
        .iter()
        .map(|r| r.phi_increment_min.min(r.psi_increment_min))
        .fold(f64::INFINITY, f64::min);
    let prob = prep.game.as_ref().unwrap();
    let oracle = double_obstacle_oracle(&prep.disc, prob, RelaxationStart::Previous, &RelaxationConfig::default())
        .expect("oracle");
    let od = sol.w_bar.max_abs_diff(&oracle);
    let sym = prepared("symmetric_game", out);
    let sym_w = sym.solve_game().expect("symmetric solve").w_bar.max_abs();
    (
        sandwich <= 1e-9 && mono >= -1e-9 && od <= 1e-6 && sym_w <= 1e-6,
        format!(
            "sandwich violation {sandwich:.2e} (<= 1e-9), min iterate increment {mono:.2e} (>= -1e-9) over {} iterations, |w - oracle| {od:.2e} (<= 1e-6), symmetric |w| {sym_w:.2e} (<= 1e-6)",
            sol.iterations
        ),
    )
}

fn c8_saddle(report: &VerifyReport) -> (bool, String) {
    let saddles: Vec<_> = report.points.iter().filter_map(|p| p.saddle.as_ref()).collect();
    let min_side = saddles
        .iter()
        .map(|s| s.sigma_side.len().min(s.tau_side.len()))
        .min()
        .unwrap_or(0);
    let all: Vec<_> = saddles.iter().flat_map(|s| s.sigma_side.iter().chain(&s.tau_side)).collect();
    let worst = all.iter().map(|c| c.diff_mean - c.bound).fold(f64::NEG_INFINITY, f64::max);
    let pass = !saddles.is_empty()
        && min_side >= 8
        && report.n_paths >= 100_000
        && saddles.iter().all(|s| s.pass);
    (
        pass,
        format!(
            "{} start points, >= {min_side} perturbations per side, {} inequalities on common random numbers with {} paths, max (diff - bound) {worst:.2e} (<= 0), value match {}",
            saddles.len(),
            all.len(),
            report.n_paths,
            saddles.iter().all(|s| s.value_match.pass)
        ),
    )
}

fn c9_cost(out: &Path) -> (bool, String) {
    let prep = prepared("cost_put", out);
    let f = prep.f.as_ref().unwrap();
    let direct = solve_obstacle_with_source(&prep.disc, &prep.g, f, &prep.cfg.penalty).expect("direct");
    let reduced = solve_obstacle_with_cost(&prep.disc, &prep.g, f, &prep.cfg.penalty).expect("reduced");
    let dr = direct.value.max_abs_diff(&reduced.value);

    let prep = prepared("cost", out);
    let sol = prep.solve_stopping().expect("closed-form case");
    let grid = prep.grid();
    let alpha = prep.cfg.model.alpha;
    let c = 1.0;
    let t_max = grid.t_max();
    let mut worst_rel: f64 = 0.0;
    for (k, &t) in grid.t_nodes().iter().enumerate() {
        let exact = c / alpha * (1.0 - (-alpha * (t_max - t)).exp());
        for &u in sol.value.slice(k) {
            let err = if exact > 0.0 { (u - exact).abs() / exact } else { u.abs() };
            worst_rel = worst_rel.max(err);
        }
    }
    (
        dr <= 1e-8 && worst_rel <= 1e-6,
        format!("|direct - reduced| {dr:.2e} (<= 1e-8), closed form c/alpha(1-e^(-alpha(T-t))) max relative error {worst_rel:.2e} (<= 1e-6)"),
    )
}

fn c10(reports: &[(&str, VerifyReport)]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in reports {
        let sm: Vec<_> = r.points.iter().flat_map(|p| &p.supermartingale).collect();
        let sm_ok = !sm.is_empty() && sm.iter().all(|s| s.report.pass);
        let mg_ok = r.points.iter().flat_map(|p| &p.martingale).all(|m| m.pass);
        let flagged = r.negative_control.as_ref().is_some_and(|n| n.flagged);
        pass &= sm_ok && mg_ok && flagged;
        parts.push(format!(
            "{name}: {} checks {}, control {}",
            sm.len(),
            if sm_ok && mg_ok { "ok" } else { "VIOLATED" },
            if flagged { "flagged" } else { "NOT flagged" }
        ));
    }
    (pass, parts.join("; "))
}

fn verify(name: &'static str, out: &Path) -> (&'static str, VerifyReport) {
    let prep = prepared(name, out);
    let fields = Fields::from_solution(prep.solve().expect("solve"));
    (name, verify_fields(&prep, &fields, false, true).expect("verify"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let out: PathBuf = tmp.path().to_path_buf();
    let mut lines = vec![
        timed(1, "penalty monotonicity", || c1_penalty_monotonicity(&out)),
        timed(2, "obstacle dominance and VI residual", || c2_dominance_and_vi(&out)),
        timed(3, "penalty vs relaxation oracle", || c3_oracle(&out)),
        timed(4, "binomial-tree put", || c4_binomial(&out)),
    ];
    let t0 = Instant::now();
    let put = verify("put", &out);
    let put_time = t0.elapsed();
    let ((p5, d5), (p6, d6)) = c5_c6(&put.1);
    lines.push(timed(5, "MC value with contact region", || {
        (p5 && put_time.as_secs_f64() < 120.0, format!("{d5}, verify {:.1} s (< 120 s)", put_time.as_secs_f64()))
    }));
    lines.push(timed(6, "suboptimality of perturbed policies", || (p6, d6)));
    lines.push(timed(7, "game sandwich, monotone iteration, uniqueness", || c7_game(&out)));
    let game = verify("game_put", &out);
    lines.push(timed(8, "saddle inequalities", || c8_saddle(&game.1)));
    lines.push(timed(9, "holding-cost reduction", || c9_cost(&out)));
    let mut reports = vec![put, game];
    for name in SHIPPED {
        if !reports.iter().any(|(n, _)| *n == name) {
            reports.push(verify(name, &out));
        }
    }
    lines.push(timed(10, "supermartingale structure and negative control", || c10(&reports)));
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        lines.len() - failed.len(),
        lines.len(),
        if failed.is_empty() { String::new() } else { format!(", failing {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
