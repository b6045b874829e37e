//! Hyperparameter sweep presets.

use hems_core::domain::{DiscomfortShape, NoiseConfig, TrainConfig};
use serde::Serialize;

use crate::config::SweepPreset;

/// One named configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub name: String,
    pub config: TrainConfig,
}

fn point(name: impl Into<String>, config: TrainConfig) -> SweepPoint {
    SweepPoint {
        name: name.into(),
        config,
    }
}

/// Every parameter moved to each of its two alternatives while the others
/// keep the base values.
pub fn parameter_search(base: &TrainConfig) -> Vec<SweepPoint> {
    let b = || base.clone();
    let mut out = Vec::with_capacity(16);
    for batch in [100, 150] {
        out.push(point(format!("batch={batch}"), TrainConfig { batch, ..b() }));
    }
    for buffer in [20_000, 30_000] {
        out.push(point(format!("buffer={buffer}"), TrainConfig { buffer, ..b() }));
    }
    for (lr_actor, lr_critic) in [(5e-4, 5e-3), (5e-5, 5e-4)] {
        out.push(point(
            format!("lr={lr_actor};{lr_critic}"),
            TrainConfig { lr_actor, lr_critic, ..b() },
        ));
    }
    out.push(point("noise=gaussian(0.2)", TrainConfig { noise: NoiseConfig::Gaussian { sigma: 0.2 }, ..b() }));
    out.push(point(
        "noise=ou(0.1)",
        TrainConfig { noise: NoiseConfig::ou(base.noise.sigma()), ..b() },
    ));
    for tau in [0.005, 0.0005] {
        out.push(point(format!("tau={tau}"), TrainConfig { tau, ..b() }));
    }
    let mut c = b();
    c.weights.discomfort_weight = 0.04;
    out.push(point("discomfort_weight=0.04", c));
    let mut c = b();
    c.weights.discomfort_shape = DiscomfortShape::Linear;
    out.push(point("discomfort=linear", c));
    for hidden in [(200, 400), (400, 800)] {
        out.push(point(format!("hidden={};{}", hidden.0, hidden.1), TrainConfig { hidden, ..b() }));
    }
    for penalty in [0.0, 1.0] {
        let mut c = b();
        c.weights.penalty_weight = penalty;
        out.push(point(format!("penalty_weight={penalty}"), c));
    }
    out
}

/// Full factorial grid over batch size, learning rates, Gaussian noise scale
/// and network size, three values each.
pub fn grid_search(base: &TrainConfig) -> Vec<SweepPoint> {
    let mut out = Vec::with_capacity(81);
    for batch in [120, 100, 150] {
        for (lr_actor, lr_critic) in [(1e-4, 1e-3), (5e-4, 5e-3), (5e-5, 5e-4)] {
            for sigma in [0.1, 0.2, 0.4] {
                for hidden in [(300, 600), (200, 400), (250, 500)] {
                    out.push(point(
                        format!(
                            "batch={batch},lr={lr_actor};{lr_critic},sigma={sigma},hidden={};{}",
                            hidden.0, hidden.1
                        ),
                        TrainConfig {
                            batch,
                            lr_actor,
                            lr_critic,
                            noise: NoiseConfig::Gaussian { sigma },
                            hidden,
                            ..base.clone()
                        },
                    ));
                }
            }
        }
    }
    out
}

pub fn points(preset: SweepPreset, base: &TrainConfig) -> Vec<SweepPoint> {
    match preset {
        SweepPreset::Parameter => parameter_search(base),
        SweepPreset::Grid => grid_search(base),
    }
}

/// Outcome of one configuration over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub stage: usize,
    pub name: String,
    pub seeds: usize,
    pub mean_eval: f64,
    pub best_eval: f64,
    pub mean_test: f64,
    pub best_eval_test: f64,
}

/// Indices of the `top` rows with the highest mean evaluation profit.
pub fn top_by_mean_eval(rows: &[SweepRow], top: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| rows[b].mean_eval.total_cmp(&rows[a].mean_eval).then(a.cmp(&b)));
    idx.truncate(top);
    idx
}
