//! Measurement ingestion and preparation of hourly household data.

mod files;
mod generate;
mod ingest;
mod resample;
mod split;

pub use files::{
    read_hourly_csv, read_household, read_transactions_csv, write_hourly_csv, write_household,
    write_transactions_csv, HOURLY_HEADER, TRANSACTION_HEADER,
};
pub use generate::{generate, GeneratorConfig};
pub use ingest::{
    by_household, derive_transactions, ingest, RawMeasurement, MEASUREMENT_HEADER,
};
pub use resample::{fill_gaps, resample_hourly, to_hour_steps, HourlyRecord, Resampled};
pub use split::{split, Role, Segment, SplitConfig, SplitPlan};

use crate::domain::ChargingTransaction;
use crate::error::{Error, Result};

/// Largest per-transaction energy, used as the usable EV capacity.
pub fn infer_ev_capacity(transactions: &[ChargingTransaction]) -> Result<f64> {
    transactions
        .iter()
        .map(|t| t.energy_kwh)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))))
        .ok_or(Error::Empty("transaction list"))
}

/// Largest 15-minute PV reading in kW.
pub fn infer_pv_peak(raw: &[RawMeasurement]) -> Result<f64> {
    raw.iter()
        .map(|r| r.pv_w / 1000.0)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))))
        .ok_or(Error::Empty("measurement series"))
}

/// SoC at plug-in such that charging to full consumes exactly the observed
/// energy.
pub fn start_soc(energy_kwh: f64, ev_capacity_kwh: f64) -> Result<f64> {
    if energy_kwh > ev_capacity_kwh + 1e-9 {
        return Err(Error::EnergyExceedsCapacity {
            energy: energy_kwh,
            capacity: ev_capacity_kwh,
        });
    }
    Ok((ev_capacity_kwh - energy_kwh).max(0.0))
}

/// Start SoC as a fraction of capacity, `1 - energy / capacity`.
pub fn start_soc_fraction(energy_kwh: f64, ev_capacity_kwh: f64) -> Result<f64> {
    Ok(start_soc(energy_kwh, ev_capacity_kwh)? / ev_capacity_kwh)
}

/// SoC at the start of each connected hour plus the value after the final
/// hour (`hours + 1` points), linear between `start` and `end`.
pub fn interpolate_ev_soc(start: f64, end: f64, hours: usize) -> Vec<f64> {
    if hours == 0 {
        return vec![start];
    }
    let step = (end - start) / hours as f64;
    (0..=hours)
        .map(|k| if k == hours { end } else { start + step * k as f64 })
        .collect()
}
