//! Policies, rollouts and evaluation metrics.

use std::io::Write;
use std::ops::Range;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::dataio::Role;
use crate::domain::{Action, SimState, TechnicalSpec};
use crate::env::{build_state, step, EnvParams, StepOutcome};
use crate::error::{Error, Result};
use crate::timeline::Timeline;

/// Maps a state to target SoCs.
pub trait Policy {
    fn act(&mut self, state: &SimState, spec: &TechnicalSpec) -> Action;
}

impl<F> Policy for F
where
    F: FnMut(&SimState, &TechnicalSpec) -> Action,
{
    fn act(&mut self, state: &SimState, spec: &TechnicalSpec) -> Action {
        self(state, spec)
    }
}

/// Rule-based BESS control with power-mode EV charging.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rbpm;

impl Policy for Rbpm {
    fn act(&mut self, state: &SimState, spec: &TechnicalSpec) -> Action {
        rbpm_action(state, spec)
    }
}

/// EV target always 1; BESS target 1 while PV exceeds demand plus the
/// planned EV load, otherwise 0.
pub fn rbpm_action(state: &SimState, spec: &TechnicalSpec) -> Action {
    let planned_ev = crate::env::ev_charge(
        1.0,
        state.soc_ev_kwh,
        spec.ev_capacity_kwh,
        spec.ev_charger_power_kw,
        state.connected,
    );
    let surplus = state.pv_kwh - state.demand_kwh - planned_ev;
    Action::new(if surplus > 0.0 { 1.0 } else { 0.0 }, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub timestamp: NaiveDateTime,
    pub state: SimState,
    pub action: Action,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone)]
pub struct RolloutResult {
    pub trace: Vec<TraceStep>,
    pub total_profit: f64,
    pub total_reward: f64,
    pub days: f64,
    pub profit_per_day: f64,
    /// Mean shortfall in percentage points; `None` without completed
    /// transactions.
    pub discomfort_score: Option<f64>,
    pub transaction_count: usize,
    pub final_soc_b_kwh: f64,
}

/// Runs `policy` over the hours in `range`, starting with `initial_soc_b`.
pub fn rollout<P: Policy + ?Sized>(
    timeline: &Timeline,
    range: Range<usize>,
    policy: &mut P,
    params: &EnvParams,
    initial_soc_b: f64,
) -> Result<RolloutResult> {
    rollout_segments(timeline, std::slice::from_ref(&range), policy, params, initial_soc_b)
}

/// Runs `policy` over consecutive segments of one role, carrying the BESS
/// SoC from each segment into the next.
pub fn rollout_segments<P: Policy + ?Sized>(
    timeline: &Timeline,
    ranges: &[Range<usize>],
    policy: &mut P,
    params: &EnvParams,
    initial_soc_b: f64,
) -> Result<RolloutResult> {
    let mut trace = Vec::with_capacity(ranges.iter().map(|r| r.len()).sum());
    let mut soc_b = initial_soc_b;
    for range in ranges {
        if range.end > timeline.len() || range.start >= range.end {
            return Err(Error::Invalid(format!(
                "rollout range {range:?} outside timeline of {} hours",
                timeline.len()
            )));
        }
        let mut state = build_state(timeline, range.start, soc_b, None);
        for t in range.clone() {
            let action = policy.act(&state, &params.spec);
            let outcome = step(&state, &action, &timeline.next_context(t), params)?;
            trace.push(TraceStep {
                timestamp: timeline.hours[t].timestamp,
                state,
                action,
                outcome,
            });
            state = outcome.next_state;
        }
        soc_b = state.soc_b_kwh;
    }
    Ok(summarize(trace, params, soc_b))
}

fn summarize(trace: Vec<TraceStep>, params: &EnvParams, final_soc_b: f64) -> RolloutResult {
    let total_profit: f64 = trace
        .iter()
        .map(|s| s.outcome.flows.profit(&params.tariff))
        .sum();
    let total_reward: f64 = trace.iter().map(|s| s.outcome.reward).sum();
    let days = trace.len() as f64 / 24.0;
    let outcomes: Vec<StepOutcome> = trace.iter().map(|s| s.outcome).collect();
    let transaction_count = outcomes.iter().filter(|o| o.disconnect_now).count();
    RolloutResult {
        profit_per_day: if days > 0.0 { total_profit / days } else { 0.0 },
        discomfort_score: discomfort_score(&outcomes),
        total_profit,
        total_reward,
        days,
        transaction_count,
        final_soc_b_kwh: final_soc_b,
        trace,
    }
}

/// Mean charging shortfall at disconnect, in percentage points.
pub fn discomfort_score(outcomes: &[StepOutcome]) -> Option<f64> {
    let shortfalls: Vec<f64> = outcomes.iter().filter_map(|o| o.shortfall_pp).collect();
    (!shortfalls.is_empty()).then(|| shortfalls.iter().sum::<f64>() / shortfalls.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialRealized {
    pub fraction: f64,
    /// The benchmarks coincide, so there is nothing to realize.
    pub zero_potential: bool,
}

pub const POTENTIAL_EPS: f64 = 1e-9;

/// Share of the gap between the lower and upper benchmark closed by a
/// policy, clamped to [0, 1].
pub fn potential_realized(policy: f64, rbpm: f64, mpc: f64) -> Result<PotentialRealized> {
    let potential = mpc - rbpm;
    if potential < -POTENTIAL_EPS {
        return Err(Error::BenchmarkOrder { mpc, rbpm });
    }
    if potential <= POTENTIAL_EPS {
        return Ok(PotentialRealized {
            fraction: 0.0,
            zero_potential: true,
        });
    }
    Ok(PotentialRealized {
        fraction: ((policy - rbpm) / potential).clamp(0.0, 1.0),
        zero_potential: false,
    })
}

pub const TRACE_HEADER: [&str; 11] = [
    "t", "pv", "demand", "d_ev", "b_c", "b_d", "purchase", "feedin", "soc_b", "soc_ev", "reward",
];

/// Writes the per-step trace. SoCs are end-of-hour values, with the EV SoC
/// taken before any external top-up.
pub fn write_trace_csv<W: Write>(writer: W, trace: &[TraceStep]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for s in trace {
        let f = &s.outcome.flows;
        w.write_record([
            s.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            s.state.pv_kwh.to_string(),
            s.state.demand_kwh.to_string(),
            f.ev_charge_kwh.to_string(),
            f.bess_charge_kwh.to_string(),
            f.bess_discharge_kwh.to_string(),
            f.grid_purchase_kwh.to_string(),
            f.grid_feedin_kwh.to_string(),
            s.outcome.bess_soc_end_kwh.to_string(),
            s.outcome.ev_soc_end_kwh.to_string(),
            s.outcome.reward.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub household: String,
    pub policy: String,
    pub seed: Option<u64>,
    pub split: Role,
    pub profit_per_day: f64,
    pub discomfort: Option<f64>,
    pub potential_realized: Option<f64>,
}

pub fn write_metrics_csv<W: Write>(writer: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "household",
            "policy",
            "seed",
            "split",
            "profit_per_day",
            "discomfort",
            "potential_realized",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{
        ChargingTransaction, HourStep, HouseholdSeries, RewardWeights, Tariff,
    };
    use chrono::{Duration, NaiveDate};

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, 3, 8)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    fn household(pv: impl Fn(usize) -> f64, demand: f64, txs: Vec<ChargingTransaction>) -> Timeline {
        let series = HouseholdSeries {
            household_id: "t".into(),
            steps: (0..48)
                .map(|h| HourStep {
                    timestamp: t0() + Duration::hours(h as i64),
                    pv_kwh: pv(h),
                    demand_kwh: demand,
                })
                .collect(),
            transactions: txs,
            spec: TechnicalSpec::reference_household("01").unwrap(),
        };
        Timeline::new(&series).unwrap()
    }

    fn params() -> EnvParams {
        EnvParams {
            spec: TechnicalSpec::reference_household("01").unwrap(),
            tariff: Tariff::reference(),
            weights: RewardWeights::default(),
        }
    }

    fn tx(start_h: i64, hours: i64, energy: f64) -> ChargingTransaction {
        ChargingTransaction {
            id: format!("tx{start_h}"),
            start: t0() + Duration::hours(start_h),
            end: t0() + Duration::hours(start_h + hours),
            energy_kwh: energy,
            start_soc_kwh: None,
        }
    }

    #[test]
    fn rbpm_rule_branches() {
        let spec = params().spec;
        let tl = household(|_| 5.0, 1.0, vec![]);
        let s = build_state(&tl, 12, 0.0, None);
        assert_eq!(rbpm_action(&s, &spec), Action::new(1.0, 1.0));
        let tl = household(|_| 0.0, 1.0, vec![]);
        let s = build_state(&tl, 12, 3.0, None);
        assert_eq!(rbpm_action(&s, &spec), Action::new(0.0, 1.0));
    }

    #[test]
    fn power_mode_charges_at_full_power_on_arrival() {
        // 60 % SoC at 8:00 on a 48.25 kWh car
        let energy = 0.4 * 48.25;
        let tl = household(|_| 0.0, 0.5, vec![tx(8, 6, energy)]);
        let res = rollout(&tl, 0..24, &mut Rbpm, &params(), 0.0).unwrap();
        assert!((res.trace[8].outcome.flows.ev_charge_kwh - 11.0).abs() < 1e-12);
        assert!((res.trace[9].outcome.flows.ev_charge_kwh - (energy - 11.0)).abs() < 1e-9);
        assert_eq!(res.discomfort_score, Some(0.0));
        assert_eq!(res.transaction_count, 1);
    }

    #[test]
    fn empty_household_has_zero_profit() {
        let tl = household(|_| 0.0, 0.0, vec![]);
        let res = rollout(&tl, 0..48, &mut Rbpm, &params(), 0.0).unwrap();
        assert_eq!(res.profit_per_day, 0.0);
        assert_eq!(res.discomfort_score, None);
    }

    #[test]
    fn rbpm_without_pv_never_charges_bess() {
        let tl = household(|_| 0.0, 0.7, vec![tx(3, 5, 20.0)]);
        let res = rollout(&tl, 0..48, &mut Rbpm, &params(), 4.0).unwrap();
        assert!(res.trace.iter().all(|s| s.outcome.flows.bess_charge_kwh == 0.0));
    }

    fn with_shortfall(pp: Option<f64>) -> StepOutcome {
        let tl = household(|_| 0.0, 0.0, vec![]);
        let s = build_state(&tl, 0, 0.0, None);
        StepOutcome {
            next_state: s,
            flows: Default::default(),
            reward: 0.0,
            disconnect_now: pp.is_some(),
            ev_soc_end_kwh: 0.0,
            bess_soc_end_kwh: 0.0,
            shortfall_pp: pp,
        }
    }

    #[test]
    fn discomfort_examples() {
        assert_eq!(discomfort_score(&[with_shortfall(Some(0.0)), with_shortfall(None)]), Some(0.0));
        let one = discomfort_score(&[with_shortfall(Some(100.0 * (1.0 - 0.99)))]).unwrap();
        assert!((one - 1.0).abs() < 1e-9);
        let two = discomfort_score(&[with_shortfall(Some(5.0)), with_shortfall(Some(0.0))]);
        assert_eq!(two, Some(2.5));
        assert_eq!(discomfort_score(&[with_shortfall(None)]), None);
    }

    #[test]
    fn potential_examples() {
        assert_eq!(potential_realized(0.49, 0.22, 0.49).unwrap().fraction, 1.0);
        assert_eq!(potential_realized(-2.31, -2.24, -2.23).unwrap().fraction, 0.0);
        let p = potential_realized(-4.04, -4.17, -3.82).unwrap().fraction;
        assert!((p - 0.38).abs() <= 0.05, "{p}");
        let z = potential_realized(1.0, 1.0, 1.0).unwrap();
        assert!(z.zero_potential && z.fraction == 0.0);
        assert!(potential_realized(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn potential_is_scale_invariant() {
        let (rbpm, d_pol, d_mpc) = (-3.0, 0.4, 1.1);
        let base = potential_realized(rbpm + d_pol, rbpm, rbpm + d_mpc).unwrap().fraction;
        for k in [0.1, 2.0, 17.0] {
            let f = potential_realized(rbpm + k * d_pol, rbpm, rbpm + k * d_mpc)
                .unwrap()
                .fraction;
            assert!((f - base).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![MetricsRow {
            household: "01".into(),
            policy: "rbpm".into(),
            seed: None,
            split: Role::Test,
            profit_per_day: 0.22,
            discomfort: Some(1.37),
            potential_realized: None,
        }];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "household,policy,seed,split,profit_per_day,discomfort,potential_realized\n"
        ));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), rows);
    }
}
