//! On-disk layout of a prepared household: `hourly.csv`,
//! `transactions.csv` and `spec.json` in one directory.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::ingest::{column_map, format_timestamp, parse_field, parse_timestamp};
use crate::domain::{ChargingTransaction, HourStep, HouseholdSeries, TechnicalSpec};
use crate::error::{Error, Result};

pub const HOURLY_HEADER: [&str; 3] = ["timestamp", "pv_kwh", "demand_kwh"];
pub const TRANSACTION_HEADER: [&str; 5] =
    ["household_id", "transaction_id", "start", "end", "energy_kwh"];

pub fn read_hourly_csv<R: Read>(reader: R) -> Result<Vec<HourStep>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let cols = column_map(rdr.headers()?, HOURLY_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let raw = rec.get(cols[0]).unwrap_or("");
        let timestamp = parse_timestamp(raw).ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid timestamp `{raw}`"),
        })?;
        let pv_kwh: f64 = parse_field(&rec, cols[1], "pv_kwh", line)?;
        let demand_kwh: f64 = parse_field(&rec, cols[2], "demand_kwh", line)?;
        if !(pv_kwh >= 0.0 && demand_kwh >= 0.0) {
            return Err(Error::Parse {
                line,
                message: "energies must be non-negative".into(),
            });
        }
        out.push(HourStep {
            timestamp,
            pv_kwh,
            demand_kwh,
        });
    }
    Ok(out)
}

pub fn write_hourly_csv<W: Write>(writer: W, steps: &[HourStep]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HOURLY_HEADER)?;
    for s in steps {
        w.write_record([
            format_timestamp(s.timestamp),
            s.pv_kwh.to_string(),
            s.demand_kwh.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(household_id, transaction)` pairs.
pub fn read_transactions_csv<R: Read>(reader: R) -> Result<Vec<(String, ChargingTransaction)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let cols = column_map(rdr.headers()?, TRANSACTION_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts = |idx: usize| {
            let raw = rec.get(cols[idx]).unwrap_or("");
            parse_timestamp(raw).ok_or_else(|| Error::Parse {
                line,
                message: format!("invalid timestamp `{raw}`"),
            })
        };
        let start = ts(2)?;
        let end = ts(3)?;
        let energy_kwh: f64 = parse_field(&rec, cols[4], "energy_kwh", line)?;
        if end <= start || !(energy_kwh >= 0.0) {
            return Err(Error::Parse {
                line,
                message: "transaction needs end > start and energy >= 0".into(),
            });
        }
        out.push((
            rec.get(cols[0]).unwrap_or("").trim().to_string(),
            ChargingTransaction {
                id: rec.get(cols[1]).unwrap_or("").trim().to_string(),
                start,
                end,
                energy_kwh,
                start_soc_kwh: None,
            },
        ));
    }
    Ok(out)
}

pub fn write_transactions_csv<W: Write>(
    writer: W,
    household_id: &str,
    txs: &[ChargingTransaction],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRANSACTION_HEADER)?;
    for t in txs {
        w.write_record([
            household_id.to_string(),
            t.id.clone(),
            format_timestamp(t.start),
            format_timestamp(t.end),
            t.energy_kwh.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_household(dir: &Path, series: &HouseholdSeries) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_hourly_csv(fs::File::create(dir.join("hourly.csv"))?, &series.steps)?;
    write_transactions_csv(
        fs::File::create(dir.join("transactions.csv"))?,
        &series.household_id,
        &series.transactions,
    )?;
    let spec = serde_json::to_string_pretty(&SpecFile {
        household_id: series.household_id.clone(),
        spec: series.spec,
    })?;
    fs::write(dir.join("spec.json"), spec + "\n")?;
    Ok(())
}

pub fn read_household(dir: &Path) -> Result<HouseholdSeries> {
    let spec: SpecFile = serde_json::from_str(&fs::read_to_string(dir.join("spec.json"))?)?;
    spec.spec.validate()?;
    let steps = read_hourly_csv(fs::File::open(dir.join("hourly.csv"))?)?;
    let transactions = read_transactions_csv(fs::File::open(dir.join("transactions.csv"))?)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    Ok(HouseholdSeries {
        household_id: spec.household_id,
        steps,
        transactions,
        spec: spec.spec,
    })
}

#[derive(serde::Serialize, serde::Deserialize)]
struct SpecFile {
    household_id: String,
    #[serde(flatten)]
    spec: TechnicalSpec,
}
