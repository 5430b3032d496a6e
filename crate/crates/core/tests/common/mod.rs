#![allow(dead_code)]

use dynkin_core::{Axis, DensityMode, DensitySpec, Discretization, DiffusionModel, DiffusionSpec, DriftSpec, SpaceTimeGrid};

/// 1D Brownian motion with drift `b`, volatility `a` and discount `alpha`.
pub fn brownian(b: f64, a: f64, alpha: f64) -> DiffusionModel {
    DiffusionModel::new(
        1,
        DriftSpec::Constant { b: vec![b] },
        DiffusionSpec::Constant { a: vec![vec![a]] },
        alpha,
        DensityMode::ClosedForm,
    )
    .unwrap()
}

/// Geometric Brownian motion with the power density `x^{2r/σ² − 2}`.
pub fn gbm(rate: f64, vol: f64, alpha: f64) -> DiffusionModel {
    DiffusionModel::new(
        1,
        DriftSpec::Gbm { rate: vec![rate] },
        DiffusionSpec::Gbm { vol: vec![vol] },
        alpha,
        DensityMode::UserSupplied(DensitySpec::Power {
            exponents: vec![2.0 * rate / (vol * vol) - 2.0],
        }),
    )
    .unwrap()
}

pub fn line(lo: f64, hi: f64, nodes: usize, t_max: f64, steps: usize) -> SpaceTimeGrid {
    SpaceTimeGrid::uniform(t_max, steps, vec![Axis::uniform(lo, hi, nodes).unwrap()]).unwrap()
}

pub fn disc(model: DiffusionModel, grid: SpaceTimeGrid) -> Discretization {
    Discretization::new(model, grid).unwrap()
}
