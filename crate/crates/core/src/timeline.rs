//! Hour-indexed view of a household: exogenous data plus EV presence.

use chrono::{Duration, NaiveDateTime};

use crate::dataio::interpolate_ev_soc;
use crate::domain::{ChargingTransaction, HouseholdSeries, TechnicalSpec};
use crate::error::{Error, Result};

/// EV presence during one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvHour {
    /// Index into [`Timeline::spans`].
    pub span: usize,
    /// Hours until disconnect; 0 in the final connected hour.
    pub countdown: i32,
    /// Linearly interpolated SoC at the start of this hour.
    pub soc_kwh: f64,
    /// First connected hour of the transaction.
    pub arrival: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourContext {
    pub timestamp: NaiveDateTime,
    pub pv_kwh: f64,
    pub demand_kwh: f64,
    pub ev: Option<EvHour>,
}

impl HourContext {
    /// Context for the hour after a series ends, with no EV attached.
    pub fn after(&self) -> HourContext {
        HourContext {
            timestamp: self.timestamp + Duration::hours(1),
            pv_kwh: 0.0,
            demand_kwh: 0.0,
            ev: None,
        }
    }
}

/// A transaction expressed in hour indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TxSpan {
    pub id: String,
    /// First connected hour.
    pub start: usize,
    /// Exclusive end hour; the final connected hour is `end - 1`.
    pub end: usize,
    pub start_soc_kwh: f64,
    pub end_soc_kwh: f64,
}

impl TxSpan {
    pub fn hours(&self) -> usize {
        self.end - self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start..self.end).contains(&t)
    }
}

#[derive(Debug, Clone)]
pub struct Timeline {
    pub household_id: String,
    pub spec: TechnicalSpec,
    pub hours: Vec<HourContext>,
    pub spans: Vec<TxSpan>,
}

impl Timeline {
    pub fn new(series: &HouseholdSeries) -> Result<Self> {
        let start = series.start().ok_or(Error::Empty("household series"))?;
        let spec = series.spec;
        let mut hours: Vec<HourContext> = series
            .steps
            .iter()
            .map(|s| HourContext {
                timestamp: s.timestamp,
                pv_kwh: s.pv_kwh,
                demand_kwh: s.demand_kwh,
                ev: None,
            })
            .collect();

        let mut txs: Vec<&ChargingTransaction> = series.transactions.iter().collect();
        txs.sort_by_key(|t| t.start);
        let mut spans = Vec::with_capacity(txs.len());
        for tx in txs {
            let s = (tx.first_hour() - start).num_hours();
            let e = (tx.end_hour() - start).num_hours();
            if s < 0 || e as usize > hours.len() || e <= s {
                return Err(Error::Invalid(format!(
                    "transaction {} outside the series range",
                    tx.id
                )));
            }
            let start_soc = match tx.start_soc_kwh {
                Some(v) => v,
                None => crate::dataio::start_soc(tx.energy_kwh, spec.ev_capacity_kwh)?,
            };
            let end_soc = (start_soc + tx.energy_kwh).min(spec.ev_capacity_kwh);
            let (s, e) = (s as usize, e as usize);
            let idx = spans.len();
            let socs = interpolate_ev_soc(start_soc, end_soc, e - s);
            for (k, t) in (s..e).enumerate() {
                if hours[t].ev.is_some() {
                    return Err(Error::Invalid(format!(
                        "transaction {} overlaps another transaction",
                        tx.id
                    )));
                }
                hours[t].ev = Some(EvHour {
                    span: idx,
                    countdown: (e - 1 - t) as i32,
                    soc_kwh: socs[k],
                    arrival: t == s,
                });
            }
            spans.push(TxSpan {
                id: tx.id.clone(),
                start: s,
                end: e,
                start_soc_kwh: start_soc,
                end_soc_kwh: end_soc,
            });
        }
        Ok(Self {
            household_id: series.household_id.clone(),
            spec,
            hours,
            spans,
        })
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    /// Context of hour `t + 1`, or a disconnected filler past the end.
    pub fn next_context(&self, t: usize) -> HourContext {
        self.hours
            .get(t + 1)
            .copied()
            .unwrap_or_else(|| self.hours[t].after())
    }

    /// The span active at hour `t`, if any.
    pub fn span_at(&self, t: usize) -> Option<&TxSpan> {
        self.hours[t].ev.map(|e| &self.spans[e.span])
    }

    /// Spans lying completely within `[start, end)`.
    pub fn spans_within(&self, start: usize, end: usize) -> impl Iterator<Item = &TxSpan> {
        self.spans
            .iter()
            .filter(move |s| s.start >= start && s.end <= end)
    }
}
