use chrono::{Duration, NaiveDateTime};

use super::ingest::{format_timestamp, RawMeasurement};
use crate::domain::{floor_hour, HourStep};
use crate::error::{Error, Result};

/// Hourly energies of one household. `load_kwh` includes the EV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyRecord {
    pub timestamp: NaiveDateTime,
    pub pv_kwh: f64,
    pub load_kwh: f64,
    pub ev_kwh: f64,
}

/// Hourly channels `[pv, load, ev]` with `None` for incomplete hours.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub start: NaiveDateTime,
    pub values: Vec<Option<[f64; 3]>>,
}

/// Averages the four quarter-hour powers of each hour into kWh. Hours
/// without exactly four readings are left as gaps.
pub fn resample_hourly(raw: &[RawMeasurement]) -> Result<Resampled> {
    let first = raw.first().ok_or(Error::Empty("measurement series"))?;
    let last = raw.last().expect("non-empty");
    let start = floor_hour(first.timestamp);
    let hours = (floor_hour(last.timestamp) - start).num_hours() as usize + 1;
    let mut sums = vec![[0.0f64; 3]; hours];
    let mut counts = vec![0u8; hours];
    for r in raw {
        let h = (floor_hour(r.timestamp) - start).num_hours();
        if h < 0 {
            return Err(Error::Invalid("measurements are not sorted".into()));
        }
        let h = h as usize;
        sums[h][0] += r.pv_w;
        sums[h][1] += r.load_w;
        sums[h][2] += r.ev_w;
        counts[h] = counts[h].saturating_add(1);
    }
    let values = sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| (c == 4).then(|| s.map(|w| w / 4.0 / 1000.0)))
        .collect();
    Ok(Resampled { start, values })
}

/// Fills gaps of at most `max_gap_h` hours per channel by quadratic
/// interpolation through the two flanking hours and the nearest further
/// valid hour, clamped at zero. Longer or unbounded gaps are errors.
pub fn fill_gaps(series: &Resampled, max_gap_h: usize) -> Result<Vec<HourlyRecord>> {
    let vals = &series.values;
    let n = vals.len();
    let mut filled: Vec<[f64; 3]> = vals.iter().map(|v| v.unwrap_or([0.0; 3])).collect();
    let ts = |i: usize| series.start + Duration::hours(i as i64);
    let mut i = 0;
    while i < n {
        if vals[i].is_some() {
            i += 1;
            continue;
        }
        let gap_start = i;
        while i < n && vals[i].is_none() {
            i += 1;
        }
        let gap_len = i - gap_start;
        if gap_start == 0 || i == n {
            return Err(Error::UnboundedGap(format_timestamp(ts(gap_start))));
        }
        if gap_len > max_gap_h {
            return Err(Error::GapTooLong {
                start: format_timestamp(ts(gap_start)),
                hours: gap_len,
                max: max_gap_h,
            });
        }
        let left = gap_start - 1;
        let right = i;
        let third = if left >= 1 && vals[left - 1].is_some() {
            Some(left - 1)
        } else if right + 1 < n && vals[right + 1].is_some() {
            Some(right + 1)
        } else {
            None
        };
        for ch in 0..3 {
            let mut pts = vec![
                (left as f64, filled[left][ch]),
                (right as f64, filled[right][ch]),
            ];
            if let Some(k) = third {
                pts.push((k as f64, filled[k][ch]));
            }
            for t in gap_start..right {
                filled[t][ch] = lagrange(&pts, t as f64).max(0.0);
            }
        }
    }
    Ok(filled
        .into_iter()
        .enumerate()
        .map(|(i, [pv, load, ev])| HourlyRecord {
            timestamp: ts(i),
            pv_kwh: pv,
            load_kwh: load,
            ev_kwh: ev,
        })
        .collect())
}

fn lagrange(pts: &[(f64, f64)], x: f64) -> f64 {
    pts.iter()
        .enumerate()
        .map(|(i, &(xi, yi))| {
            let basis: f64 = pts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &(xj, _))| (x - xj) / (xi - xj))
                .product();
            yi * basis
        })
        .sum()
}

/// Household demand excludes the EV charger: `max(0, load - ev)`.
pub fn to_hour_steps(records: &[HourlyRecord]) -> Vec<HourStep> {
    records
        .iter()
        .map(|r| HourStep {
            timestamp: r.timestamp,
            pv_kwh: r.pv_kwh,
            demand_kwh: (r.load_kwh - r.ev_kwh).max(0.0),
        })
        .collect()
}
