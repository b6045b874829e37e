//! Full-information benchmark: one linear program per segment over the
//! same dynamics as [`crate::env`].
//!
//! The environment only discharges the BESS into residual demand and only
//! charges it from residual PV. Hours where the mode is fixed by the data
//! are constrained accordingly. For the remaining hours, stored energy left
//! at the end of a segment is valued between the feed-in price and the
//! feed-in price divided by the charging efficiency, which makes exporting
//! battery energy unattractive without making PV storage more attractive
//! than feed-in. A vanishing bonus on early discharge breaks ties toward the
//! environment's greedy discharge. Neither term enters the reported profit.

use std::ops::Range;

use crate::control::{rollout_segments, Policy, RolloutResult};
use crate::domain::{Action, SimState, Tariff, TechnicalSpec};
use crate::env::EnvParams;
use crate::error::{Error, Result};
use crate::lp::{LpProblem, Relation};
use crate::timeline::Timeline;

/// Per-kWh magnitude of the early-discharge tie-break.
pub const TIE_BREAK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlannedStep {
    pub bess_charge_kwh: f64,
    pub bess_discharge_kwh: f64,
    pub ev_charge_kwh: f64,
    pub grid_purchase_kwh: f64,
    pub grid_feedin_kwh: f64,
    /// Unmet EV energy bought externally at disconnect.
    pub external_ev_kwh: f64,
    pub soc_b_end_kwh: f64,
    pub soc_ev_end_kwh: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct StepVars {
    b_c: usize,
    b_d: usize,
    x_p: usize,
    x_f: usize,
    soc_b: usize,
    d_ev: Option<usize>,
    soc_ev: Option<usize>,
    slack: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct LpModel {
    pub problem: LpProblem,
    pub range: Range<usize>,
    pub initial_soc_b_kwh: f64,
    /// Value per kWh assigned to the final BESS SoC.
    pub terminal_value: f64,
    pub tariff: Tariff,
    vars: Vec<StepVars>,
}

impl LpModel {
    pub fn transaction_terminals(&self) -> usize {
        self.vars.iter().filter(|v| v.slack.is_some()).count()
    }
}

/// Stored-energy value that deters battery export without favoring
/// storage over feed-in.
pub fn terminal_value(tariff: &Tariff, spec: &TechnicalSpec) -> f64 {
    (tariff.price_sell * (1.0 + 1.0 / spec.bess_efficiency) / 2.0).max(1e-6)
}

pub fn build_lp(
    timeline: &Timeline,
    range: Range<usize>,
    tariff: &Tariff,
    initial_soc_b_kwh: f64,
) -> Result<LpModel> {
    if range.start >= range.end || range.end > timeline.len() {
        return Err(Error::Invalid(format!(
            "LP range {range:?} outside timeline of {} hours",
            timeline.len()
        )));
    }
    let spec = &timeline.spec;
    let loss = 1.0 - spec.bess_standing_loss_per_hour;
    let eta = spec.bess_efficiency;
    let horizon = range.len() as f64;
    let inf = f64::INFINITY;
    let mut p = LpProblem::new();
    let mut vars: Vec<StepVars> = Vec::with_capacity(range.len());

    for (k, t) in range.clone().enumerate() {
        let ctx = &timeline.hours[t];
        let surplus_before_ev = ctx.pv_kwh - ctx.demand_kwh;
        let deficit_mode = surplus_before_ev <= 0.0;
        let surplus_mode = !deficit_mode && ctx.ev.is_none();

        let bess_in_cap = if deficit_mode { 0.0 } else { spec.bess_power_kw };
        let bess_out_cap = if surplus_mode { 0.0 } else { spec.bess_power_kw };
        let b_c = p.add_var(0.0, bess_in_cap, 0.0);
        let b_d = p.add_var(0.0, bess_out_cap, -TIE_BREAK * (horizon - k as f64) / horizon);
        let x_p = p.add_var(0.0, if surplus_mode { 0.0 } else { inf }, tariff.price_buy);
        let x_f = p.add_var(0.0, if deficit_mode { 0.0 } else { inf }, -tariff.price_sell);
        let soc_b = p.add_var(0.0, spec.bess_capacity_kwh, 0.0);

        let (d_ev, soc_ev, slack) = match ctx.ev {
            None => (None, None, None),
            Some(ev) => {
                let d = p.add_var(0.0, spec.ev_charger_power_kw, 0.0);
                let s = p.add_var(0.0, spec.ev_capacity_kwh, 0.0);
                let chained = k > 0 && !ev.arrival && vars[k - 1].soc_ev.is_some();
                if chained {
                    let prev = vars[k - 1].soc_ev.expect("checked");
                    p.add_row(&[(s, 1.0), (prev, -1.0), (d, -1.0)], Relation::Eq, 0.0);
                } else {
                    p.add_row(&[(s, 1.0), (d, -1.0)], Relation::Eq, ev.soc_kwh);
                }
                let slack = (ev.countdown == 0).then(|| {
                    let v = p.add_var(0.0, inf, tariff.price_buy);
                    p.add_row(&[(s, 1.0), (v, 1.0)], Relation::Eq, spec.ev_capacity_kwh);
                    v
                });
                (Some(d), Some(s), slack)
            }
        };

        let mut bal = vec![(b_c, 1.0), (b_d, -1.0), (x_f, 1.0), (x_p, -1.0)];
        if let Some(d) = d_ev {
            bal.push((d, 1.0));
        }
        p.add_row(&bal, Relation::Eq, surplus_before_ev);

        if k == 0 {
            p.add_row(
                &[(soc_b, 1.0), (b_c, -eta), (b_d, 1.0)],
                Relation::Eq,
                loss * initial_soc_b_kwh,
            );
        } else {
            p.add_row(
                &[(soc_b, 1.0), (vars[k - 1].soc_b, -loss), (b_c, -eta), (b_d, 1.0)],
                Relation::Eq,
                0.0,
            );
        }
        vars.push(StepVars {
            b_c,
            b_d,
            x_p,
            x_f,
            soc_b,
            d_ev,
            soc_ev,
            slack,
        });
    }
    let terminal_value = terminal_value(tariff, spec);
    let last = vars.last().expect("non-empty range").soc_b;
    p.set_cost(last, -terminal_value);

    Ok(LpModel {
        problem: p,
        range,
        initial_soc_b_kwh,
        terminal_value,
        tariff: *tariff,
        vars,
    })
}

#[derive(Debug, Clone)]
pub struct MpcSchedule {
    pub range: Range<usize>,
    pub steps: Vec<PlannedStep>,
    /// Grid and external cash flow of the schedule.
    pub profit: f64,
    pub initial_soc_b_kwh: f64,
    pub final_soc_b_kwh: f64,
    pub iterations: usize,
    pub max_residual: f64,
}

pub fn solve_lp(model: &LpModel) -> Result<MpcSchedule> {
    let sol = model.problem.solve()?;
    let x = |j: usize| sol.x[j].max(0.0);
    let steps: Vec<PlannedStep> = model
        .vars
        .iter()
        .map(|v| PlannedStep {
            bess_charge_kwh: x(v.b_c),
            bess_discharge_kwh: x(v.b_d),
            ev_charge_kwh: v.d_ev.map_or(0.0, x),
            grid_purchase_kwh: x(v.x_p),
            grid_feedin_kwh: x(v.x_f),
            external_ev_kwh: v.slack.map_or(0.0, x),
            soc_b_end_kwh: x(v.soc_b),
            soc_ev_end_kwh: v.soc_ev.map(x),
        })
        .collect();
    let t = &model.tariff;
    let profit = steps
        .iter()
        .map(|s| {
            t.price_sell * s.grid_feedin_kwh
                - t.price_buy * (s.grid_purchase_kwh + s.external_ev_kwh)
        })
        .sum();
    Ok(MpcSchedule {
        range: model.range.clone(),
        final_soc_b_kwh: steps.last().map_or(model.initial_soc_b_kwh, |s| s.soc_b_end_kwh),
        initial_soc_b_kwh: model.initial_soc_b_kwh,
        steps,
        profit,
        iterations: sol.iterations,
        max_residual: sol.max_residual,
    })
}

pub fn plan(
    timeline: &Timeline,
    range: Range<usize>,
    tariff: &Tariff,
    initial_soc_b_kwh: f64,
) -> Result<MpcSchedule> {
    solve_lp(&build_lp(timeline, range, tariff, initial_soc_b_kwh)?)
}

#[derive(Debug, Clone)]
pub struct MpcResult {
    pub segments: Vec<MpcSchedule>,
    pub total_profit: f64,
    pub days: f64,
    pub profit_per_day: f64,
}

/// Solves one LP per segment, starting with an empty BESS and carrying the
/// planned final SoC into the next segment.
pub fn mpc_profit(timeline: &Timeline, ranges: &[Range<usize>], tariff: &Tariff) -> Result<MpcResult> {
    let mut soc = 0.0;
    let mut segments = Vec::with_capacity(ranges.len());
    for r in ranges {
        let s = plan(timeline, r.clone(), tariff, soc)?;
        soc = s.final_soc_b_kwh;
        segments.push(s);
    }
    let total_profit: f64 = segments.iter().map(|s| s.profit).sum();
    let days = ranges.iter().map(|r| r.len()).sum::<usize>() as f64 / 24.0;
    Ok(MpcResult {
        segments,
        total_profit,
        days,
        profit_per_day: if days > 0.0 { total_profit / days } else { 0.0 },
    })
}

/// Turns a planned schedule back into environment actions.
#[derive(Debug, Clone)]
pub struct SchedulePolicy<'a> {
    steps: Vec<&'a PlannedStep>,
    next: usize,
}

impl<'a> SchedulePolicy<'a> {
    pub fn new(schedules: &'a [MpcSchedule]) -> Self {
        Self {
            steps: schedules.iter().flat_map(|s| s.steps.iter()).collect(),
            next: 0,
        }
    }
}

impl Policy for SchedulePolicy<'_> {
    fn act(&mut self, state: &SimState, spec: &TechnicalSpec) -> Action {
        let Some(plan) = self.steps.get(self.next) else {
            return Action::new(0.0, 1.0);
        };
        self.next += 1;
        let target_ev = if !state.connected
            || plan.ev_charge_kwh >= spec.ev_charger_power_kw - 1e-9
            || plan.soc_ev_end_kwh.is_some_and(|s| s >= spec.ev_capacity_kwh - 1e-9)
        {
            1.0
        } else {
            (state.soc_ev_kwh + plan.ev_charge_kwh) / spec.ev_capacity_kwh
        };
        let residual = state.pv_kwh - state.demand_kwh - plan.ev_charge_kwh;
        let target_bess = if plan.bess_charge_kwh <= 1e-12 {
            0.0
        } else if plan.bess_charge_kwh >= residual.min(spec.bess_power_kw) - 1e-9 {
            1.0
        } else {
            ((1.0 - spec.bess_standing_loss_per_hour) * state.soc_b_kwh
                + spec.bess_efficiency * plan.bess_charge_kwh)
                / spec.bess_capacity_kwh
        };
        Action::new(target_bess, target_ev)
    }
}

/// Replays planned schedules through the environment with the same SoC
/// chaining as [`mpc_profit`].
pub fn replay(timeline: &Timeline, result: &MpcResult, params: &EnvParams) -> Result<RolloutResult> {
    let ranges: Vec<Range<usize>> = result.segments.iter().map(|s| s.range.clone()).collect();
    let initial = result.segments.first().map_or(0.0, |s| s.initial_soc_b_kwh);
    rollout_segments(
        timeline,
        &ranges,
        &mut SchedulePolicy::new(&result.segments),
        params,
        initial,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{rollout, Rbpm};
    use crate::domain::{ChargingTransaction, HourStep, HouseholdSeries, RewardWeights};
    use chrono::{Duration, NaiveDate, NaiveDateTime};

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, 6, 7)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    fn timeline(
        hours: usize,
        pv: impl Fn(usize) -> f64,
        demand: impl Fn(usize) -> f64,
        txs: Vec<ChargingTransaction>,
    ) -> Timeline {
        let series = HouseholdSeries {
            household_id: "m".into(),
            steps: (0..hours)
                .map(|h| HourStep {
                    timestamp: t0() + Duration::hours(h as i64),
                    pv_kwh: pv(h),
                    demand_kwh: demand(h),
                })
                .collect(),
            transactions: txs,
            spec: TechnicalSpec::with_devices(6.75, 3.3, 40.0, 8.0),
        };
        Timeline::new(&series).unwrap()
    }

    fn solar(h: usize) -> f64 {
        let x = (h % 24) as f64;
        (8.0 * (1.0 - ((x - 12.0) / 5.0).powi(2))).max(0.0)
    }

    fn params(tl: &Timeline) -> EnvParams {
        EnvParams {
            spec: tl.spec,
            tariff: Tariff::reference(),
            weights: RewardWeights::default(),
        }
    }

    fn commute(day: i64) -> ChargingTransaction {
        ChargingTransaction {
            id: format!("c{day}"),
            start: t0() + Duration::hours(24 * day + 6),
            end: t0() + Duration::hours(24 * day + 16),
            energy_kwh: 20.0,
            start_soc_kwh: None,
        }
    }

    #[test]
    fn structure_counts() {
        let tl = timeline(24, |_| 0.0, |_| 1.0, vec![commute(0)]);
        let m = build_lp(&tl, 0..24, &Tariff::reference(), 0.0).unwrap();
        assert_eq!(m.transaction_terminals(), 1);
        // five grid/BESS variables per hour, two EV variables per connected
        // hour, one slack
        assert_eq!(m.problem.num_vars(), 24 * 5 + 10 * 2 + 1);
        let tl = timeline(24, |_| 0.0, |_| 1.0, vec![]);
        let m = build_lp(&tl, 0..24, &Tariff::reference(), 0.0).unwrap();
        assert_eq!(m.transaction_terminals(), 0);
        assert_eq!(m.problem.num_vars(), 24 * 5);
    }

    #[test]
    fn no_pv_no_ev_never_charges() {
        let tl = timeline(48, |_| 0.0, |h| 0.5 + (h % 5) as f64 * 0.3, vec![]);
        let s = plan(&tl, 0..48, &Tariff::reference(), 3.0).unwrap();
        assert!(s.steps.iter().all(|p| p.bess_charge_kwh == 0.0));
    }

    #[test]
    fn upper_bounds_rbpm_and_replays() {
        let tl = timeline(72, solar, |h| 0.4 + 0.3 * ((h % 24) >= 17) as u8 as f64, vec![
            commute(0),
            commute(1),
            commute(2),
        ]);
        let p = params(&tl);
        let res = mpc_profit(&tl, &[0..72], &p.tariff).unwrap();
        let rbpm = rollout(&tl, 0..72, &mut Rbpm, &p, 0.0).unwrap();
        assert!(res.total_profit >= rbpm.total_profit - 1e-9);
        assert!(res.segments[0].max_residual <= 1e-7);
        let replayed = replay(&tl, &res, &p).unwrap();
        assert!(
            (replayed.total_profit - res.total_profit).abs() < 1e-6,
            "{} vs {}",
            replayed.total_profit,
            res.total_profit
        );
        for s in &res.segments[0].steps {
            assert!(s.grid_purchase_kwh * s.grid_feedin_kwh < 1e-12);
        }
    }

    #[test]
    fn chaining_carries_soc() {
        let tl = timeline(48, solar, |_| 0.5, vec![]);
        let res = mpc_profit(&tl, &[0..24, 24..48], &Tariff::reference()).unwrap();
        assert_eq!(res.segments[1].initial_soc_b_kwh, res.segments[0].final_soc_b_kwh);
        assert_eq!(res.days, 2.0);
    }
}
