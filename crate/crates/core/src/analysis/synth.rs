use chrono::{Duration, NaiveDate, Timelike};

use super::behavior::{hour_of_day, SurplusWindow};
use crate::domain::{validate_household, ChargingTransaction, HouseholdSeries, TechnicalSpec};
use crate::error::{Error, Result};

pub const PV_SCALE: f64 = 1.5;
pub const SYNTH_BESS_KWH: f64 = 6.75;
pub const SYNTH_BESS_KW: f64 = 3.3;
/// Duplicates that would start inside the surplus window move to this hour.
pub const SHIFTED_START_HOUR: u32 = 7;

/// High-potential variant of a household: PV ×1.5, every transaction
/// duplicated into the nearest free day, and the smallest battery.
pub fn synthesize(base: &HouseholdSeries) -> Result<HouseholdSeries> {
    let violations = validate_household(base);
    if let Some(v) = violations.first() {
        return Err(Error::Invalid(format!("base household: {v}")));
    }
    let (Some(start), Some(end)) = (base.start(), base.end()) else {
        return Err(Error::Empty("household series"));
    };
    let window = SurplusWindow::default();

    let mut originals = base.transactions.clone();
    originals.sort_by_key(|t| t.start);
    let mut placed = originals.clone();
    let mut start_days: Vec<NaiveDate> = originals.iter().map(|t| t.start.date()).collect();
    let first_day = start.date();
    let last_day = (end - Duration::seconds(1)).date();

    for tx in &originals {
        let mut candidate_start = tx.start;
        if (window.start_h..window.end_h).contains(&hour_of_day(tx.start)) {
            candidate_start = tx
                .start
                .with_hour(SHIFTED_START_HOUR)
                .expect("valid hour");
        }
        let duration = tx.end - tx.start;
        let span_days = (last_day - first_day).num_days();
        let mut found = None;
        for dist in 1..=span_days {
            for delta in [dist, -dist] {
                let s = candidate_start + Duration::days(delta);
                let dup = ChargingTransaction {
                    id: format!("{}-dup", tx.id),
                    start: s,
                    end: s + duration,
                    energy_kwh: tx.energy_kwh,
                    start_soc_kwh: tx.start_soc_kwh,
                };
                let inside = dup.start >= start && dup.end <= end;
                if inside
                    && !start_days.contains(&s.date())
                    && placed.iter().all(|p| !p.overlaps(&dup))
                {
                    found = Some(dup);
                    break;
                }
            }
            if found.is_some() {
                break;
            }
        }
        let dup = found.ok_or_else(|| Error::CalendarFull(tx.id.clone()))?;
        start_days.push(dup.start.date());
        placed.push(dup);
    }
    placed.sort_by_key(|t| t.start);

    let spec = TechnicalSpec {
        bess_capacity_kwh: SYNTH_BESS_KWH,
        bess_power_kw: SYNTH_BESS_KW,
        pv_peak_usable_kw: base.spec.pv_peak_usable_kw * PV_SCALE,
        ..base.spec
    };
    let out = HouseholdSeries {
        household_id: format!("{}-synth", base.household_id),
        steps: base
            .steps
            .iter()
            .map(|s| crate::domain::HourStep {
                pv_kwh: s.pv_kwh * PV_SCALE,
                ..*s
            })
            .collect(),
        transactions: placed,
        spec,
    };
    if let Some(v) = validate_household(&out).first() {
        return Err(Error::Invalid(format!("synthesized household: {v}")));
    }
    Ok(out)
}
