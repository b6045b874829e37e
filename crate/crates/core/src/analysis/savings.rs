use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::control::TraceStep;
use crate::dataio::HourlyRecord;
use crate::domain::Tariff;
use crate::error::Result;
use crate::timeline::TxSpan;

/// kg CO₂ per kWh of grid electricity.
pub const EMISSION_FACTOR_KG_PER_KWH: f64 = 0.45;

/// EV charging and grid exchange of one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourFlows {
    pub timestamp: NaiveDateTime,
    pub ev_kwh: f64,
    pub purchase_kwh: f64,
    pub feedin_kwh: f64,
}

impl HourFlows {
    /// The part of the purchase attributable to EV charging.
    pub fn ev_purchase_kwh(&self) -> f64 {
        self.ev_kwh.min(self.purchase_kwh)
    }
}

pub fn flows_from_trace(trace: &[TraceStep]) -> Vec<HourFlows> {
    trace
        .iter()
        .map(|s| HourFlows {
            timestamp: s.timestamp,
            ev_kwh: s.outcome.flows.ev_charge_kwh,
            purchase_kwh: s.outcome.flows.grid_purchase_kwh,
            feedin_kwh: s.outcome.flows.grid_feedin_kwh,
        })
        .collect()
}

/// Grid exchange of measured data without a battery: the net of total load
/// and PV.
pub fn flows_from_records(records: &[HourlyRecord]) -> Vec<HourFlows> {
    records
        .iter()
        .map(|r| {
            let net = r.load_kwh - r.pv_kwh;
            HourFlows {
                timestamp: r.timestamp,
                ev_kwh: r.ev_kwh,
                purchase_kwh: net.max(0.0),
                feedin_kwh: (-net).max(0.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionSavings {
    pub transaction_id: String,
    pub start: NaiveDateTime,
    pub ev_purchase_kwh: f64,
    pub feedin_kwh: f64,
    pub savings_kwh: f64,
}

/// Grid purchase that could have been covered by concurrent feed-in, per
/// transaction. `offset` is the hour index of `flows[0]`; transactions not
/// fully covered by `flows` are skipped.
pub fn grid_savings(flows: &[HourFlows], offset: usize, spans: &[TxSpan]) -> Vec<TransactionSavings> {
    spans
        .iter()
        .filter(|s| s.start >= offset && s.end <= offset + flows.len())
        .map(|s| {
            let hours = &flows[s.start - offset..s.end - offset];
            let ev_purchase: f64 = hours.iter().map(HourFlows::ev_purchase_kwh).sum();
            let feedin: f64 = hours.iter().map(|h| h.feedin_kwh).sum();
            TransactionSavings {
                transaction_id: s.id.clone(),
                start: hours[0].timestamp,
                ev_purchase_kwh: ev_purchase,
                feedin_kwh: feedin,
                savings_kwh: ev_purchase.min(feedin),
            }
        })
        .collect()
}

/// Monthly savings and grid consumption of one household, keyed by month.
pub fn household_monthly(
    savings: &[TransactionSavings],
    flows: &[HourFlows],
) -> BTreeMap<u32, (f64, f64)> {
    let mut out: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for f in flows {
        out.entry(f.timestamp.month()).or_default().1 += f.purchase_kwh;
    }
    for s in savings {
        out.entry(s.start.month()).or_default().0 += s.savings_kwh;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySavings {
    pub month: u32,
    pub households: usize,
    pub mean_wh: f64,
    pub std_wh: f64,
    pub mean_pct: f64,
}

/// Mean, sample standard deviation and mean share of grid consumption of
/// monthly savings across households.
pub fn monthly_report(households: &[BTreeMap<u32, (f64, f64)>]) -> Vec<MonthlySavings> {
    let mut by_month: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for h in households {
        for (&m, &v) in h {
            by_month.entry(m).or_default().push(v);
        }
    }
    by_month
        .into_iter()
        .map(|(month, v)| {
            let n = v.len() as f64;
            let wh: Vec<f64> = v.iter().map(|(s, _)| s * 1000.0).collect();
            let mean = wh.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (wh.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let pct: Vec<f64> = v
                .iter()
                .map(|&(s, c)| if c > 0.0 { 100.0 * s / c } else { 0.0 })
                .collect();
            MonthlySavings {
                month,
                households: v.len(),
                mean_wh: mean,
                std_wh: std,
                mean_pct: pct.iter().sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn write_monthly_report<W: Write>(writer: W, rows: &[MonthlySavings]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["month", "households", "mean_wh", "std_wh", "mean_pct"])?;
    for r in rows {
        w.write_record([
            format!("{:02}", r.month),
            r.households.to_string(),
            r.mean_wh.to_string(),
            r.std_wh.to_string(),
            r.mean_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Yearly savings of an average household: the sum of monthly means.
pub fn annual_kwh(rows: &[MonthlySavings]) -> f64 {
    rows.iter().map(|r| r.mean_wh).sum::<f64>() / 1000.0
}

/// Money and emissions avoided by `kwh` of grid purchase.
pub fn annualize_savings(kwh: f64, price_buy: f64, emission_factor: f64) -> (f64, f64) {
    (kwh * price_buy, kwh * emission_factor)
}

/// Value of moving `kwh` from grid purchase to self-consumed surplus: the
/// purchase is avoided and the feed-in forgone.
pub fn purchase_shift_value(kwh: f64, tariff: &Tariff) -> f64 {
    kwh * (tariff.price_buy - tariff.price_sell)
}
