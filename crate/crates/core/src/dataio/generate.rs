//! Seeded synthetic households for demos and experiments.

use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{ChargingTransaction, HourStep, HouseholdSeries, TechnicalSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub household_id: String,
    pub year: i32,
    pub days: usize,
    /// Clear-sky output around noon in midsummer.
    pub pv_peak_kw: f64,
    pub base_load_kw: f64,
    pub evening_load_kw: f64,
    pub ev_arrival_hour: u32,
    pub ev_duration_h: u32,
    pub ev_energy_kwh: f64,
    /// A transaction starts on every `ev_every_days`-th day, beginning
    /// with day index `ev_first_day`.
    pub ev_every_days: usize,
    pub ev_first_day: usize,
    pub spec: TechnicalSpec,
}

impl GeneratorConfig {
    /// Car at home from 06:00 for ten hours on alternate days, needing
    /// 20 kWh each time; 8 kW PV; 6.75 kWh / 3.3 kW battery.
    pub fn commuter() -> Self {
        Self {
            household_id: "commuter".into(),
            year: 2021,
            days: 365,
            pv_peak_kw: 8.0,
            base_load_kw: 0.3,
            evening_load_kw: 0.6,
            ev_arrival_hour: 6,
            ev_duration_h: 10,
            ev_energy_kwh: 20.0,
            ev_every_days: 2,
            ev_first_day: 1,
            spec: TechnicalSpec::with_devices(6.75, 3.3, 40.0, 8.0),
        }
    }
}

/// Clear-sky shape in [0, 1] for the hour starting at `hour` on day-of-year
/// `doy`, evaluated at the middle of the hour.
fn clear_sky(doy: u32, hour: u32) -> f64 {
    let season = (2.0 * PI * (doy as f64 - 172.0) / 365.0).cos();
    let day_length = 12.0 + 4.0 * season;
    let sunrise = 12.5 - day_length / 2.0;
    let x = hour as f64 + 0.5 - sunrise;
    if x <= 0.0 || x >= day_length {
        return 0.0;
    }
    let amplitude = 0.55 + 0.45 * season;
    amplitude * (PI * x / day_length).sin()
}

pub fn generate(config: &GeneratorConfig, seed: u64) -> Result<HouseholdSeries> {
    config.spec.validate()?;
    if config.days == 0 || config.ev_every_days == 0 || config.ev_duration_h == 0 {
        return Err(Error::Invalid(
            "days, ev_every_days and ev_duration_h must be positive".into(),
        ));
    }
    if config.ev_energy_kwh > config.spec.ev_capacity_kwh {
        return Err(Error::EnergyExceedsCapacity {
            energy: config.ev_energy_kwh,
            capacity: config.spec.ev_capacity_kwh,
        });
    }
    let start = NaiveDate::from_ymd_opt(config.year, 1, 1)
        .ok_or_else(|| Error::Invalid(format!("invalid year {}", config.year)))?
        .and_hms_opt(0, 0, 0)
        .expect("midnight");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");

    let mut steps = Vec::with_capacity(config.days * 24);
    for d in 0..config.days {
        let day = start + Duration::days(d as i64);
        let doy = day.ordinal();
        let cloud: f64 = rng.gen_range(0.25..1.0);
        let winter = 1.0 + 0.2 * (2.0 * PI * doy as f64 / 365.0).cos();
        for h in 0..24u32 {
            let pv = config.pv_peak_kw
                * clear_sky(doy, h)
                * cloud
                * (1.0 + 0.08 * jitter.sample(&mut rng));
            let profile = match h {
                6..=8 => 0.5,
                17..=21 => config.evening_load_kw,
                _ => 0.0,
            };
            let demand = (config.base_load_kw + profile) * winter
                + 0.05 * jitter.sample(&mut rng);
            steps.push(HourStep {
                timestamp: day + Duration::hours(h as i64),
                pv_kwh: round4(pv.max(0.0)),
                demand_kwh: round4(demand.max(0.05)),
            });
        }
    }

    let end = start + Duration::days(config.days as i64);
    let transactions = (config.ev_first_day..config.days)
        .step_by(config.ev_every_days)
        .map(|d| {
            let s = start + Duration::days(d as i64) + Duration::hours(config.ev_arrival_hour as i64);
            ChargingTransaction {
                id: format!("ev{d:03}"),
                start: s,
                end: s + Duration::hours(config.ev_duration_h as i64),
                energy_kwh: config.ev_energy_kwh,
                start_soc_kwh: None,
            }
        })
        .filter(|t| t.end <= end)
        .collect();

    Ok(HouseholdSeries {
        household_id: config.household_id.clone(),
        steps,
        transactions,
        spec: config.spec,
    })
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}
