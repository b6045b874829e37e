//! Benchmark and agent metrics assembled into one row per household.

use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{bail, Result};
use hems_core::control::{potential_realized, MetricsRow};
use hems_core::dataio::Role;
use hems_core::ddpg::{best_by_eval, SeedRun};

pub const REPORT_HEADER: [&str; 11] = [
    "household",
    "lower_rbpm",
    "upper_mpc",
    "potential",
    "drl_mean",
    "drl_best_eval",
    "realized_mean_pct",
    "realized_best_eval_pct",
    "discomfort_mean_pp",
    "discomfort_best_eval_pp",
    "seeds",
];

/// Test-split figures of one household in €/day, percent and percentage
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub household: String,
    pub lower: f64,
    pub upper: f64,
    pub drl_mean: Option<f64>,
    pub drl_best_eval: Option<f64>,
    pub realized_mean: Option<f64>,
    pub realized_best_eval: Option<f64>,
    pub discomfort_mean: Option<f64>,
    pub discomfort_best_eval: Option<f64>,
    pub seeds: usize,
}

impl ReportRow {
    pub fn potential(&self) -> f64 {
        self.upper - self.lower
    }
}

fn find(rows: &[&MetricsRow], policy: &str, split: Role) -> Option<f64> {
    rows.iter()
        .find(|r| r.policy == policy && r.split == split)
        .map(|r| r.profit_per_day)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Builds report rows from the metrics of any number of runs.
pub fn build(metrics: &[MetricsRow]) -> Result<Vec<ReportRow>> {
    let mut by_household: BTreeMap<&str, Vec<&MetricsRow>> = BTreeMap::new();
    for m in metrics {
        by_household.entry(&m.household).or_default().push(m);
    }
    let mut out = Vec::new();
    for (household, rows) in by_household {
        let (Some(lower), Some(upper)) = (find(&rows, "rbpm", Role::Test), find(&rows, "mpc", Role::Test)) else {
            bail!("household {household}: rbpm and mpc test metrics are both required");
        };
        let mut seeds: BTreeMap<u64, (Option<f64>, Option<&MetricsRow>)> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.policy == "ddpg") {
            let Some(seed) = r.seed else { continue };
            let e = seeds.entry(seed).or_default();
            match r.split {
                Role::Eval => e.0 = Some(r.profit_per_day),
                Role::Test => e.1 = Some(r),
                Role::Train => {}
            }
        }
        let runs: Vec<(SeedRun, Option<f64>)> = seeds
            .into_iter()
            .filter_map(|(seed, (eval, test))| {
                let (eval, test) = (eval?, test?);
                Some((
                    SeedRun {
                        seed,
                        eval_profit_per_day: eval,
                        test_profit_per_day: test.profit_per_day,
                        test_discomfort: test.discomfort,
                    },
                    test.discomfort,
                ))
            })
            .collect();
        let plain: Vec<SeedRun> = runs.iter().map(|(r, _)| r.clone()).collect();
        let best = best_by_eval(&plain).map(|i| &plain[i]);
        let drl_mean = mean(&plain.iter().map(|r| r.test_profit_per_day).collect::<Vec<_>>());
        let discomforts: Vec<f64> = runs.iter().filter_map(|(_, d)| *d).collect();
        let realized = |p: Option<f64>| -> Result<Option<f64>> {
            p.map(|p| potential_realized(p, lower, upper).map(|r| r.fraction))
                .transpose()
                .map_err(Into::into)
        };
        out.push(ReportRow {
            household: household.to_string(),
            lower,
            upper,
            drl_mean,
            drl_best_eval: best.map(|b| b.test_profit_per_day),
            realized_mean: realized(drl_mean)?,
            realized_best_eval: realized(best.map(|b| b.test_profit_per_day))?,
            discomfort_mean: mean(&discomforts),
            discomfort_best_eval: best.and_then(|b| b.test_discomfort),
            seeds: plain.len(),
        });
    }
    Ok(out)
}

fn money(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{:.0}", 100.0 * v)).unwrap_or_default()
}

/// Two decimals for €/day and percentage points, whole percent for the
/// realized potential.
pub fn write<W: Write>(writer: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.household.clone(),
            money(Some(r.lower)),
            money(Some(r.upper)),
            money(Some(r.potential())),
            money(r.drl_mean),
            money(r.drl_best_eval),
            pct(r.realized_mean),
            pct(r.realized_best_eval),
            money(r.discomfort_mean),
            money(r.discomfort_best_eval),
            r.seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
