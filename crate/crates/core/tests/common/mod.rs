#![allow(dead_code)]

use std::collections::HashMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use hems_core::domain::{
    ChargingTransaction, HourStep, HouseholdSeries, SimState, Tariff, TechnicalSpec,
};
use hems_core::env::{state_from_context, step, EnvParams};
use hems_core::domain::{Action, RewardWeights};
use hems_core::timeline::Timeline;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn t0() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2021, 5, 3)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

pub struct Toy {
    pub timeline: Timeline,
    pub tariff: Tariff,
    pub grid: f64,
}

impl Toy {
    pub fn params(&self) -> EnvParams {
        EnvParams {
            spec: self.timeline.spec,
            tariff: self.tariff,
            weights: RewardWeights::default(),
        }
    }
}

/// Small instance whose flows all land on a 0.1 kWh grid: half-efficient
/// lossless battery, data and EV energies on a 0.2 kWh grid.
pub fn toy_instance(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hours = rng.gen_range(6..=24usize);
    let spec = TechnicalSpec {
        bess_capacity_kwh: 0.1 * rng.gen_range(8..=20) as f64,
        bess_power_kw: 0.2 * rng.gen_range(1..=4) as f64,
        bess_efficiency: 0.5,
        bess_standing_loss_per_hour: 0.0,
        ev_capacity_kwh: 0.2 * rng.gen_range(5..=12) as f64,
        ev_charger_power_kw: 0.2 * rng.gen_range(1..=4) as f64,
        pv_peak_usable_kw: 2.0,
    };
    let sunny = rng.gen_bool(0.7);
    let steps = (0..hours)
        .map(|h| HourStep {
            timestamp: t0() + Duration::hours(h as i64),
            pv_kwh: if sunny { 0.2 * rng.gen_range(0..=8) as f64 } else { 0.0 },
            demand_kwh: 0.2 * rng.gen_range(0..=5) as f64,
        })
        .collect();
    let mut transactions = Vec::new();
    let mut cursor = rng.gen_range(0..hours / 2);
    for i in 0..rng.gen_range(0..=2) {
        if cursor + 1 >= hours {
            break;
        }
        let len = rng.gen_range(1..=(hours - cursor).min(8));
        let fifths = (spec.ev_capacity_kwh * 5.0).round() as i64;
        transactions.push(ChargingTransaction {
            id: format!("toy{i}"),
            start: t0() + Duration::hours(cursor as i64),
            end: t0() + Duration::hours((cursor + len) as i64),
            energy_kwh: 0.2 * rng.gen_range(0..=fifths) as f64,
            start_soc_kwh: None,
        });
        cursor += len + rng.gen_range(0..3);
    }
    let price_buy = 0.01 * rng.gen_range(25..=50) as f64;
    let price_sell = 0.01 * rng.gen_range(0..=20) as f64;
    let series = HouseholdSeries {
        household_id: format!("toy{seed}"),
        steps,
        transactions,
        spec,
    };
    Toy {
        timeline: Timeline::new(&series).unwrap(),
        tariff: Tariff::new(price_buy, price_sell).unwrap(),
        grid: 0.1,
    }
}

/// Exhaustive dynamic program over environment transitions with targets
/// restricted to grid levels (EV targets on every second level). Maximizes grid and external cash flow.
pub fn dp_optimum(toy: &Toy, initial_soc_b: f64) -> f64 {
    let params = toy.params();
    let tl = &toy.timeline;
    let state = state_from_context(&tl.hours[0], &tl.spec, initial_soc_b, None);
    let mut memo = HashMap::new();
    dp_value(tl, &params, toy.grid, 0, state, &mut memo)
}

fn level(v: f64, grid: f64) -> usize {
    let l = (v / grid).round();
    assert!((v - l * grid).abs() < 1e-6, "value {v} is off the grid");
    l as usize
}

fn dp_value(
    tl: &Timeline,
    params: &EnvParams,
    grid: f64,
    k: usize,
    state: SimState,
    memo: &mut HashMap<(usize, usize, usize), f64>,
) -> f64 {
    if k == tl.len() {
        return 0.0;
    }
    let spec = &params.spec;
    let ib = level(state.soc_b_kwh, grid);
    let ie = if state.connected { level(state.soc_ev_kwh, grid) } else { 0 };
    if let Some(&v) = memo.get(&(k, ib, ie)) {
        return v;
    }
    let nb = level(spec.bess_capacity_kwh, grid);
    let ne = level(spec.ev_capacity_kwh, grid);
    let b_levels = ib..=nb;
    let e_levels: Vec<usize> = if state.connected {
        (ie..=ne).step_by(2).collect()
    } else {
        vec![ne]
    };
    let next = tl.next_context(k);
    let mut best = f64::NEG_INFINITY;
    for lb in b_levels {
        for &le in &e_levels {
            let action = Action::new(
                lb as f64 * grid / spec.bess_capacity_kwh,
                le as f64 * grid / spec.ev_capacity_kwh,
            );
            let out = step(&state, &action, &next, params).unwrap();
            let v = out.flows.profit(&params.tariff)
                + dp_value(tl, params, grid, k + 1, out.next_state, memo);
            best = best.max(v);
        }
    }
    memo.insert((k, ib, ie), best);
    best
}

/// One randomized transition: device spec, state, action and next hour.
pub struct StepCase {
    pub params: EnvParams,
    pub state: SimState,
    pub action: Action,
    pub next: hems_core::timeline::HourContext,
}

pub fn random_step_case<R: Rng>(rng: &mut R) -> StepCase {
    let spec = TechnicalSpec {
        bess_capacity_kwh: rng.gen_range(0.5..20.0),
        bess_power_kw: rng.gen_range(0.5..6.0),
        bess_efficiency: rng.gen_range(0.7..=1.0),
        bess_standing_loss_per_hour: rng.gen_range(0.0..1e-3),
        ev_capacity_kwh: rng.gen_range(10.0..90.0),
        ev_charger_power_kw: rng.gen_range(2.0..22.0),
        pv_peak_usable_kw: 10.0,
    };
    let connected = rng.gen_bool(0.5);
    let ctx = hems_core::timeline::HourContext {
        timestamp: t0() + Duration::hours(rng.gen_range(0..24 * 365)),
        pv_kwh: if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..10.0) },
        demand_kwh: rng.gen_range(0.0..5.0),
        ev: connected.then(|| hems_core::timeline::EvHour {
            span: 0,
            countdown: rng.gen_range(0..24),
            soc_kwh: rng.gen_range(0.0..=spec.ev_capacity_kwh),
            arrival: false,
        }),
    };
    let extreme = |rng: &mut R| match rng.gen_range(0..4) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen_range(0.0..=1.0),
    };
    let soc_b = match rng.gen_range(0..4) {
        0 => 0.0,
        1 => spec.bess_capacity_kwh,
        _ => rng.gen_range(0.0..=spec.bess_capacity_kwh),
    };
    let state = state_from_context(&ctx, &spec, soc_b, None);
    let target_bess = extreme(rng);
    let target_ev = extreme(rng);
    let action = Action::new(target_bess, target_ev);
    let next = hems_core::timeline::HourContext {
        timestamp: ctx.timestamp + Duration::hours(1),
        ..ctx
    };
    StepCase {
        params: EnvParams {
            spec,
            tariff: Tariff::reference(),
            weights: RewardWeights::default(),
        },
        state,
        action,
        next,
    }
}

/// Largest balance residual of the step, or a description of the first
/// violated physical invariant.
pub fn check_physics(case: &StepCase) -> Result<f64, String> {
    let o = step(&case.state, &case.action, &case.next, &case.params).map_err(|e| e.to_string())?;
    let f = o.flows;
    let s = &case.state;
    let spec = &case.params.spec;
    let residual = (s.pv_kwh + f.grid_purchase_kwh + f.bess_discharge_kwh
        - s.demand_kwh
        - f.ev_charge_kwh
        - f.bess_charge_kwh
        - f.grid_feedin_kwh)
        .abs();
    let nonneg = [
        f.ev_charge_kwh,
        f.bess_charge_kwh,
        f.bess_discharge_kwh,
        f.grid_purchase_kwh,
        f.grid_feedin_kwh,
        f.external_ev_kwh,
    ];
    if nonneg.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(format!("negative or non-finite flow {f:?}"));
    }
    if f.grid_purchase_kwh * f.grid_feedin_kwh != 0.0 {
        return Err(format!("simultaneous purchase and feed-in {f:?}"));
    }
    if f.bess_charge_kwh * f.bess_discharge_kwh != 0.0 {
        return Err(format!("simultaneous BESS charge and discharge {f:?}"));
    }
    if f.bess_charge_kwh > spec.bess_power_kw + 1e-12 || f.bess_discharge_kwh > spec.bess_power_kw + 1e-12 {
        return Err(format!("BESS power exceeded {f:?}"));
    }
    if f.ev_charge_kwh > spec.ev_charger_power_kw + 1e-12 {
        return Err(format!("charger power exceeded {f:?}"));
    }
    let raw_soc_b = (1.0 - spec.bess_standing_loss_per_hour) * s.soc_b_kwh
        + spec.bess_efficiency * f.bess_charge_kwh
        - f.bess_discharge_kwh;
    if raw_soc_b < -1e-9 || raw_soc_b > spec.bess_capacity_kwh + 1e-9 {
        return Err(format!("BESS SoC {raw_soc_b} outside [0, {}]", spec.bess_capacity_kwh));
    }
    if o.ev_soc_end_kwh < -1e-9 || o.ev_soc_end_kwh > spec.ev_capacity_kwh + 1e-9 {
        return Err(format!("EV SoC {} out of bounds", o.ev_soc_end_kwh));
    }
    let n = &o.next_state;
    if !(0.0..=spec.bess_capacity_kwh).contains(&n.soc_b_kwh)
        || !(0.0..=spec.ev_capacity_kwh).contains(&n.soc_ev_kwh)
    {
        return Err(format!("next state out of bounds {n:?}"));
    }
    Ok(residual)
}
