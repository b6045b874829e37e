//! WebAssembly bindings for the browser demo. Every export takes plain
//! numbers or JSON and returns JSON; the `*_json` functions hold the logic
//! so that it can be tested natively.

use chrono::{NaiveDate, Timelike};
use hems_core::analysis::synthesize;
use hems_core::control::{rollout, Rbpm, RolloutResult};
use hems_core::dataio::{generate, GeneratorConfig};
use hems_core::domain::{Action, HouseholdSeries, SimState, Tariff, TechnicalSpec};
use hems_core::env::{state_from_context, step, EnvParams};
use hems_core::mpc::{mpc_profit, replay};
use hems_core::timeline::{EvHour, HourContext, Timeline};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

fn household(seed: u64, synth: bool) -> Result<HouseholdSeries, String> {
    let base = generate(&GeneratorConfig::commuter(), seed).map_err(|e| e.to_string())?;
    if synth {
        synthesize(&base).map_err(|e| e.to_string())
    } else {
        Ok(base)
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub household: String,
    pub days: usize,
    pub transactions: usize,
    pub pv_kwh: f64,
    pub demand_kwh: f64,
    pub ev_kwh: f64,
    pub spec: TechnicalSpec,
}

pub fn summary_json(seed: u64, synth: bool) -> Result<String, String> {
    let s = household(seed, synth)?;
    let summary = Summary {
        household: s.household_id.clone(),
        days: s.days(),
        transactions: s.transactions.len(),
        pv_kwh: s.steps.iter().map(|h| h.pv_kwh).sum(),
        demand_kwh: s.steps.iter().map(|h| h.demand_kwh).sum(),
        ev_kwh: s.transactions.iter().map(|t| t.energy_kwh).sum(),
        spec: s.spec,
    };
    serde_json::to_string(&summary).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct HourRow {
    pub hour: u32,
    pub pv: f64,
    pub demand: f64,
    pub ev: f64,
    pub bess_charge: f64,
    pub bess_discharge: f64,
    pub purchase: f64,
    pub feedin: f64,
    pub soc_b: f64,
    pub connected: bool,
}

#[derive(Debug, Serialize)]
pub struct DayRun {
    pub profit: f64,
    pub purchase: f64,
    pub feedin: f64,
    pub external: f64,
    pub hours: Vec<HourRow>,
}

impl DayRun {
    fn new(r: &RolloutResult) -> Self {
        let sum = |f: fn(&hems_core::domain::EnergyFlows) -> f64| {
            r.trace.iter().map(|s| f(&s.outcome.flows)).sum()
        };
        Self {
            profit: r.total_profit,
            purchase: sum(|f| f.grid_purchase_kwh),
            feedin: sum(|f| f.grid_feedin_kwh),
            external: sum(|f| f.external_ev_kwh),
            hours: r
                .trace
                .iter()
                .map(|s| {
                    let f = &s.outcome.flows;
                    HourRow {
                        hour: s.timestamp.hour(),
                        pv: s.state.pv_kwh,
                        demand: s.state.demand_kwh,
                        ev: f.ev_charge_kwh,
                        bess_charge: f.bess_charge_kwh,
                        bess_discharge: f.bess_discharge_kwh,
                        purchase: f.grid_purchase_kwh,
                        feedin: f.grid_feedin_kwh,
                        soc_b: s.outcome.bess_soc_end_kwh,
                        connected: s.state.connected,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DayComparison {
    pub date: String,
    pub rbpm: DayRun,
    pub mpc: DayRun,
}

/// Rule-based and LP control over one day (0-based day of year), both
/// starting with an empty battery.
pub fn compare_day_json(
    seed: u64,
    synth: bool,
    day: usize,
    price_buy: f64,
    price_sell: f64,
) -> Result<String, String> {
    let tariff = Tariff::new(price_buy, price_sell).map_err(|e| e.to_string())?;
    let s = household(seed, synth)?;
    let timeline = Timeline::new(&s).map_err(|e| e.to_string())?;
    let days = timeline.len() / 24;
    if day >= days {
        return Err(format!("day must lie in 0..{days}"));
    }
    let range = day * 24..(day + 1) * 24;
    let params = EnvParams {
        spec: timeline.spec,
        tariff,
        weights: Default::default(),
    };
    let rbpm = rollout(&timeline, range.clone(), &mut Rbpm, &params, 0.0).map_err(|e| e.to_string())?;
    let plan = mpc_profit(&timeline, std::slice::from_ref(&range), &tariff).map_err(|e| e.to_string())?;
    let mpc = replay(&timeline, &plan, &params).map_err(|e| e.to_string())?;
    let out = DayComparison {
        date: timeline.hours[range.start].timestamp.date().to_string(),
        rbpm: DayRun::new(&rbpm),
        mpc: DayRun::new(&mpc),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// One hour of the environment, described by the user.
#[derive(Debug, Clone, Deserialize)]
pub struct StepInput {
    pub hour: u32,
    pub pv: f64,
    pub demand: f64,
    pub soc_b: f64,
    pub connected: bool,
    pub soc_ev: f64,
    pub countdown: i32,
    pub target_bess: f64,
    pub target_ev: f64,
}

#[derive(Debug, Serialize)]
pub struct StepOutput {
    pub flows: hems_core::domain::EnergyFlows,
    pub reward: f64,
    pub profit: f64,
    pub soc_b_end: f64,
    pub soc_ev_end: f64,
    pub shortfall_pp: Option<f64>,
    pub state: SimState,
}

/// Applies one action of the commuter household's devices at the
/// reference tariff.
pub fn env_step_json(input: &str) -> Result<String, String> {
    let i: StepInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    let spec = GeneratorConfig::commuter().spec;
    if i.hour > 23 || !(i.pv >= 0.0 && i.demand >= 0.0) {
        return Err("hour must lie in 0..24 and energies must be non-negative".into());
    }
    if i.connected && i.countdown < 0 {
        return Err("a connected EV needs a countdown of at least 0".into());
    }
    let t = NaiveDate::from_ymd_opt(2021, 6, 1)
        .and_then(|d| d.and_hms_opt(i.hour, 0, 0))
        .ok_or("invalid hour")?;
    let ev = |countdown: i32, arrival: bool| EvHour {
        span: 0,
        countdown,
        soc_kwh: i.soc_ev,
        arrival,
    };
    let ctx = HourContext {
        timestamp: t,
        pv_kwh: i.pv,
        demand_kwh: i.demand,
        ev: i.connected.then(|| ev(i.countdown, false)),
    };
    let state = state_from_context(
        &ctx,
        &spec,
        i.soc_b.clamp(0.0, spec.bess_capacity_kwh),
        Some(i.soc_ev),
    );
    let next = HourContext {
        ev: (i.connected && i.countdown > 0).then(|| ev(i.countdown - 1, false)),
        ..ctx.after()
    };
    let tariff = Tariff::reference();
    let params = EnvParams {
        spec,
        tariff,
        weights: Default::default(),
    };
    let o = step(&state, &Action::new(i.target_bess, i.target_ev), &next, &params)
        .map_err(|e| e.to_string())?;
    let out = StepOutput {
        flows: o.flows,
        reward: o.reward,
        profit: o.flows.profit(&tariff),
        soc_b_end: o.bess_soc_end_kwh,
        soc_ev_end: o.ev_soc_end_kwh,
        shortfall_pp: o.shortfall_pp,
        state,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Key figures of the generated household.
#[wasm_bindgen]
pub fn household_summary(seed: u64, synth: bool) -> Result<String, JsValue> {
    js(summary_json(seed, synth))
}

/// Rule-based versus LP schedule of one day.
#[wasm_bindgen]
pub fn compare_day(seed: u64, synth: bool, day: usize, price_buy: f64, price_sell: f64) -> Result<String, JsValue> {
    js(compare_day_json(seed, synth, day, price_buy, price_sell))
}

/// One environment step from a JSON state and action.
#[wasm_bindgen]
pub fn env_step(input: &str) -> Result<String, JsValue> {
    js(env_step_json(input))
}
