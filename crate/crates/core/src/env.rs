//! The deterministic household MDP.
//!
//! Flows are resolved in priority order within each hour: PV serves the
//! household first, the EV charges toward its target, the BESS charges from
//! residual PV toward its target or discharges into residual demand, and the
//! grid balances whatever remains.

use crate::domain::{
    hour_encoding, season_of, Action, DiscomfortShape, EnergyFlows, RewardWeights, SimState,
    Tariff, TechnicalSpec,
};
use crate::error::{Error, Result};
use crate::timeline::{HourContext, Timeline};
use chrono::Timelike;

/// Static parameters of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvParams {
    pub spec: TechnicalSpec,
    pub tariff: Tariff,
    pub weights: RewardWeights,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: SimState,
    pub flows: EnergyFlows,
    pub reward: f64,
    pub disconnect_now: bool,
    /// EV SoC at the end of the hour before any external top-up; equals the
    /// capacity while disconnected.
    pub ev_soc_end_kwh: f64,
    pub bess_soc_end_kwh: f64,
    /// Charging shortfall in percentage points, set at disconnect.
    pub shortfall_pp: Option<f64>,
}

/// Energy drawn by the EV charger toward `target_ev`.
pub fn ev_charge(
    target_ev: f64,
    soc_ev_kwh: f64,
    ev_capacity_kwh: f64,
    charger_power_kw: f64,
    connected: bool,
) -> f64 {
    if !connected {
        return 0.0;
    }
    charger_power_kw
        .min(target_ev * ev_capacity_kwh - soc_ev_kwh)
        .max(0.0)
}

/// Energy drawn from residual PV into the BESS. The stored amount is
/// `efficiency × drawn`, so the request is inflated by `1 / efficiency` to
/// land on the target.
pub fn bess_charge(residual_pv: f64, target_bess: f64, soc_b_kwh: f64, spec: &TechnicalSpec) -> f64 {
    let room = target_bess * spec.bess_capacity_kwh
        - (1.0 - spec.bess_standing_loss_per_hour) * soc_b_kwh;
    residual_pv
        .min(spec.bess_power_kw)
        .min(room / spec.bess_efficiency)
        .max(0.0)
}

/// Energy released by the BESS into residual demand, bounded by the
/// inverter and by the charge left after this hour's standing loss.
pub fn bess_discharge(residual_demand: f64, soc_b_kwh: f64, spec: &TechnicalSpec) -> f64 {
    residual_demand
        .min(spec.bess_power_kw)
        .min((1.0 - spec.bess_standing_loss_per_hour) * soc_b_kwh)
        .max(0.0)
}

/// Grid purchase and feed-in closing the energy balance.
pub fn balance(
    pv: f64,
    demand: f64,
    ev_charge: f64,
    bess_charge: f64,
    bess_discharge: f64,
) -> Result<(f64, f64)> {
    if bess_charge > 0.0 && bess_discharge > 0.0 {
        return Err(Error::SimultaneousCharge {
            charge: bess_charge,
            discharge: bess_discharge,
        });
    }
    let net = demand + ev_charge + bess_charge - pv - bess_discharge;
    Ok((net.max(0.0), (-net).max(0.0)))
}

/// Virtual discomfort cost for an EV leaving at `soc_ev_fraction`.
pub fn discomfort_cost(soc_ev_fraction: f64, weights: &RewardWeights) -> f64 {
    let shortfall_pp = 100.0 * (1.0 - soc_ev_fraction);
    match weights.discomfort_shape {
        DiscomfortShape::Quadratic => weights.discomfort_weight * shortfall_pp * shortfall_pp,
        DiscomfortShape::Linear => weights.discomfort_weight * shortfall_pp,
    }
}

/// Step reward: grid and external cash flow minus discomfort at disconnect
/// minus the penalty for EV targets below 1 while no EV is present.
pub fn reward(
    flows: &EnergyFlows,
    soc_ev_fraction: f64,
    disconnect_now: bool,
    action: &Action,
    connected: bool,
    tariff: &Tariff,
    weights: &RewardWeights,
) -> f64 {
    let mut r = flows.profit(tariff);
    if disconnect_now {
        r -= discomfort_cost(soc_ev_fraction, weights);
    }
    if !connected {
        r -= weights.penalty_weight * (1.0 - action.target_ev);
    }
    r
}

/// State at hour `t`. `soc_ev_kwh` overrides the interpolated EV SoC while
/// connected; disconnected hours always report a full EV.
pub fn build_state(timeline: &Timeline, t: usize, soc_b_kwh: f64, soc_ev_kwh: Option<f64>) -> SimState {
    state_from_context(&timeline.hours[t], &timeline.spec, soc_b_kwh, soc_ev_kwh)
}

pub fn state_from_context(
    ctx: &HourContext,
    spec: &TechnicalSpec,
    soc_b_kwh: f64,
    soc_ev_kwh: Option<f64>,
) -> SimState {
    let (hour_cos, hour_sin) = hour_encoding(ctx.timestamp.hour());
    let (connected, countdown_h, soc_ev) = match ctx.ev {
        Some(ev) => (true, ev.countdown, soc_ev_kwh.unwrap_or(ev.soc_kwh)),
        None => (false, -1, spec.ev_capacity_kwh),
    };
    SimState {
        soc_b_kwh,
        soc_ev_kwh: soc_ev.clamp(0.0, spec.ev_capacity_kwh),
        connected,
        countdown_h,
        hour_cos,
        hour_sin,
        season: season_of(ctx.timestamp),
        demand_kwh: ctx.demand_kwh,
        pv_kwh: ctx.pv_kwh,
    }
}

/// Applies `action` in `state` and moves to the hour described by `next`.
pub fn step(
    state: &SimState,
    action: &Action,
    next: &HourContext,
    params: &EnvParams,
) -> Result<StepOutcome> {
    let spec = &params.spec;
    let action = Action::new(action.target_bess, action.target_ev);
    let d_ev = ev_charge(
        action.target_ev,
        state.soc_ev_kwh,
        spec.ev_capacity_kwh,
        spec.ev_charger_power_kw,
        state.connected,
    );
    let residual = state.pv_kwh - state.demand_kwh - d_ev;
    let (b_c, b_d) = if residual > 0.0 {
        (bess_charge(residual, action.target_bess, state.soc_b_kwh, spec), 0.0)
    } else {
        (0.0, bess_discharge(-residual, state.soc_b_kwh, spec))
    };
    let (purchase, feedin) = balance(state.pv_kwh, state.demand_kwh, d_ev, b_c, b_d)?;

    let soc_b_next = ((1.0 - spec.bess_standing_loss_per_hour) * state.soc_b_kwh
        + spec.bess_efficiency * b_c
        - b_d)
        .clamp(0.0, spec.bess_capacity_kwh);
    let ev_soc_end = if state.connected {
        (state.soc_ev_kwh + d_ev).min(spec.ev_capacity_kwh)
    } else {
        spec.ev_capacity_kwh
    };

    let disconnect_now = state.disconnect_now();
    let ev_fraction = ev_soc_end / spec.ev_capacity_kwh;
    let (external, shortfall_pp) = if disconnect_now {
        (
            (spec.ev_capacity_kwh - ev_soc_end).max(0.0),
            Some(100.0 * (1.0 - ev_fraction)),
        )
    } else {
        (0.0, None)
    };
    let flows = EnergyFlows {
        ev_charge_kwh: d_ev,
        bess_charge_kwh: b_c,
        bess_discharge_kwh: b_d,
        grid_purchase_kwh: purchase,
        grid_feedin_kwh: feedin,
        external_ev_kwh: external,
    };
    let r = reward(
        &flows,
        ev_fraction,
        disconnect_now,
        &action,
        state.connected,
        &params.tariff,
        &params.weights,
    );
    if !r.is_finite() {
        return Err(Error::NonFinite("reward".into()));
    }

    let continuing = state.connected && !disconnect_now;
    let soc_ev_next = match next.ev {
        Some(_) if continuing => Some(ev_soc_end),
        _ => None,
    };
    let next_state = state_from_context(next, spec, soc_b_next, soc_ev_next);
    Ok(StepOutcome {
        next_state,
        flows,
        reward: r,
        disconnect_now,
        ev_soc_end_kwh: ev_soc_end,
        bess_soc_end_kwh: soc_b_next,
        shortfall_pp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TechnicalSpec;
    use chrono::NaiveDate;

    fn spec() -> TechnicalSpec {
        TechnicalSpec::reference_household("01").unwrap()
    }

    fn params() -> EnvParams {
        EnvParams {
            spec: spec(),
            tariff: Tariff::reference(),
            weights: RewardWeights::default(),
        }
    }

    fn ctx(pv: f64, demand: f64) -> HourContext {
        HourContext {
            timestamp: NaiveDate::from_ymd_opt(2021, 6, 1)
                .unwrap()
                .and_hms_opt(12, 0, 0)
                .unwrap(),
            pv_kwh: pv,
            demand_kwh: demand,
            ev: None,
        }
    }

    #[test]
    fn ev_charge_examples() {
        assert_eq!(ev_charge(1.0, 30.0, 48.25, 11.0, false), 0.0);
        assert_eq!(ev_charge(1.0, 30.0, 48.25, 11.0, true), 11.0);
        assert_eq!(ev_charge(0.5, 30.0, 48.25, 11.0, true), 0.0);
    }

    #[test]
    fn bess_charge_examples() {
        let mut s = spec();
        s.bess_standing_loss_per_hour = 0.0;
        assert_eq!(bess_charge(2.0, 1.0, 0.0, &s), 2.0);
        assert_eq!(bess_charge(5.0, 1.0, 0.0, &s), 3.3);
        assert_eq!(bess_charge(5.0, 0.5, 3.375, &s), 0.0);
        // the target term is inflated by 1/efficiency
        let b = bess_charge(5.0, 1.0, 6.0, &s);
        assert!((b - 0.75 / 0.95).abs() < 1e-12);
    }

    #[test]
    fn bess_discharge_examples() {
        let s = spec();
        assert_eq!(bess_discharge(8.27, 6.0, &s), 3.3);
        assert_eq!(bess_discharge(5.0, 0.0, &s), 0.0);
        assert_eq!(bess_discharge(1.0, 5.0, &s), 1.0);
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance(10.0, 2.0, 0.0, 3.0, 0.0).unwrap(), (0.0, 5.0));
        let (p, f) = balance(0.0, 2.0, 11.0, 0.0, 3.3).unwrap();
        assert!((p - 9.7).abs() < 1e-12 && f == 0.0);
        assert_eq!(balance(0.0, 0.0, 0.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
        assert!(balance(1.0, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights::default();
        let t = Tariff::reference();
        let a = Action::new(0.0, 1.0);
        assert_eq!(reward(&EnergyFlows::default(), 1.0, false, &a, true, &t, &w), 0.0);
        let r = reward(&EnergyFlows::default(), 0.9, true, &a, true, &t, &w);
        assert!((r + 1.0).abs() < 1e-9);
        let feed = EnergyFlows {
            grid_feedin_kwh: 10.0,
            ..Default::default()
        };
        assert!((reward(&feed, 1.0, false, &a, true, &t, &w) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn idle_disconnected_step_penalty() {
        let p = params();
        let s = state_from_context(&ctx(0.0, 0.0), &p.spec, 0.0, None);
        let out = step(&s, &Action::new(0.0, 1.0), &ctx(0.0, 0.0), &p).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.flows, EnergyFlows::default());
        let out = step(&s, &Action::new(0.0, 0.0), &ctx(0.0, 0.0), &p).unwrap();
        assert!((out.reward + 0.1).abs() < 1e-12);
    }

    #[test]
    fn pv_surplus_charges_bess_then_feeds_in() {
        let mut p = params();
        p.spec.bess_capacity_kwh = 6.75;
        let s = state_from_context(&ctx(5.0, 1.0), &p.spec, 0.0, None);
        let out = step(&s, &Action::new(1.0, 1.0), &ctx(0.0, 0.0), &p).unwrap();
        assert!((out.flows.bess_charge_kwh - 3.3).abs() < 1e-12);
        assert!((out.flows.grid_feedin_kwh - 0.7).abs() < 1e-12);
        assert_eq!(out.flows.grid_purchase_kwh, 0.0);
        assert!((out.next_state.soc_b_kwh - 0.95 * 3.3).abs() < 1e-12);
    }

    #[test]
    fn standing_loss_over_idle_hour() {
        let p = params();
        let s = state_from_context(&ctx(0.0, 0.0), &p.spec, 6.75, None);
        let out = step(&s, &Action::new(1.0, 1.0), &ctx(0.0, 0.0), &p).unwrap();
        assert!((out.next_state.soc_b_kwh - 6.749_797_5).abs() < 1e-9);
    }

    #[test]
    fn disconnected_state_features() {
        let p = params();
        let s = state_from_context(&ctx(1.0, 1.0), &p.spec, 2.0, Some(3.0));
        assert_eq!(s.countdown_h, -1);
        assert_eq!(s.features(&p.spec)[1], 1.0);
        let midnight = HourContext {
            timestamp: NaiveDate::from_ymd_opt(2021, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            ..ctx(0.0, 0.0)
        };
        let s = state_from_context(&midnight, &p.spec, 0.0, None);
        assert_eq!((s.hour_cos, s.hour_sin), (1.0, 0.0));
        assert_eq!(s.season, 0);
    }
}
