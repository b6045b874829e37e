use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::ChargingTransaction;

pub const MAX_DURATION_H: f64 = 48.0;
pub const MIN_DURATION_H: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub total: usize,
    pub too_long: usize,
    pub too_short: usize,
    pub kept: usize,
}

impl FilterStats {
    pub fn pct_too_long(&self) -> f64 {
        pct(self.too_long, self.total)
    }

    pub fn pct_too_short(&self) -> f64 {
        pct(self.too_short, self.total)
    }
}

fn pct(part: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * part as f64 / total as f64
    }
}

/// Drops transactions longer than 48 h or shorter than 30 min.
pub fn filter_transactions(txs: &[ChargingTransaction]) -> (Vec<ChargingTransaction>, FilterStats) {
    let mut stats = FilterStats {
        total: txs.len(),
        too_long: 0,
        too_short: 0,
        kept: 0,
    };
    let kept: Vec<ChargingTransaction> = txs
        .iter()
        .filter(|t| {
            let d = t.duration_hours();
            if d > MAX_DURATION_H {
                stats.too_long += 1;
                false
            } else if d < MIN_DURATION_H {
                stats.too_short += 1;
                false
            } else {
                true
            }
        })
        .cloned()
        .collect();
    stats.kept = kept.len();
    (kept, stats)
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn hour_of_day(t: NaiveDateTime) -> f64 {
    t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserChargingProfile {
    pub household_id: String,
    pub mean_start_hour: f64,
    pub mean_end_hour: f64,
    pub mean_duration_h: f64,
    pub transaction_count: usize,
}

impl UserChargingProfile {
    /// Plain means of start hour, end hour and duration; `None` without
    /// transactions.
    pub fn from_transactions(household_id: &str, txs: &[ChargingTransaction]) -> Option<Self> {
        if txs.is_empty() {
            return None;
        }
        let n = txs.len() as f64;
        let mean = |f: &dyn Fn(&ChargingTransaction) -> f64| txs.iter().map(f).sum::<f64>() / n;
        Some(Self {
            household_id: household_id.to_string(),
            mean_start_hour: mean(&|t| hour_of_day(t.start)),
            mean_end_hour: mean(&|t| hour_of_day(t.end)),
            mean_duration_h: mean(&|t| t.duration_hours()),
            transaction_count: txs.len(),
        })
    }

    pub fn features(&self) -> Vec<f64> {
        vec![self.mean_start_hour, self.mean_end_hour, self.mean_duration_h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizability {
    Optimizable,
    NotOptimizable,
}

/// Daily window of typical PV surplus, in hours of day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurplusWindow {
    pub start_h: f64,
    pub end_h: f64,
}

impl Default for SurplusWindow {
    fn default() -> Self {
        Self {
            start_h: 8.0,
            end_h: 16.0,
        }
    }
}

/// A transaction can be shifted into PV surplus when it starts outside the
/// window but is still connected during some window.
pub fn classify_optimizable(tx: &ChargingTransaction, window: SurplusWindow) -> Optimizability {
    let start_h = hour_of_day(tx.start);
    if (window.start_h..window.end_h).contains(&start_h) {
        return Optimizability::NotOptimizable;
    }
    let mut day = tx.start.date().and_hms_opt(0, 0, 0).expect("midnight");
    while day < tx.end {
        let w_start = day + Duration::seconds((window.start_h * 3600.0) as i64);
        let w_end = day + Duration::seconds((window.end_h * 3600.0) as i64);
        if tx.start < w_end && w_start < tx.end {
            return Optimizability::Optimizable;
        }
        day += Duration::days(1);
    }
    Optimizability::NotOptimizable
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn tx(start: (u32, u32, u32), end: (u32, u32, u32)) -> ChargingTransaction {
        let at = |(d, h, m): (u32, u32, u32)| {
            NaiveDate::from_ymd_opt(2021, 4, d)
                .unwrap()
                .and_hms_opt(h, m, 0)
                .unwrap()
        };
        ChargingTransaction {
            id: "t".into(),
            start: at(start),
            end: at(end),
            energy_kwh: 10.0,
            start_soc_kwh: None,
        }
    }

    #[test]
    fn filter_boundaries() {
        let txs = vec![
            tx((1, 0, 0), (3, 0, 0)),
            tx((1, 0, 0), (3, 0, 1)),
            tx((1, 0, 0), (1, 0, 30)),
            tx((1, 0, 0), (1, 0, 29)),
        ];
        let (kept, stats) = filter_transactions(&txs);
        assert_eq!(kept.len(), 2);
        assert_eq!((stats.too_long, stats.too_short), (1, 1));
        assert_eq!(stats.pct_too_long(), 25.0);
        let (same, s) = filter_transactions(&kept);
        assert_eq!(same, kept);
        assert_eq!(s.kept, s.total);
    }

    #[test]
    fn classification_examples() {
        let w = SurplusWindow::default();
        use Optimizability::*;
        assert_eq!(classify_optimizable(&tx((1, 10, 0), (1, 14, 0)), w), NotOptimizable);
        assert_eq!(classify_optimizable(&tx((1, 22, 0), (2, 5, 0)), w), NotOptimizable);
        assert_eq!(classify_optimizable(&tx((1, 6, 0), (1, 12, 0)), w), Optimizable);
        assert_eq!(classify_optimizable(&tx((1, 17, 0), (2, 9, 0)), w), Optimizable);
        assert_eq!(classify_optimizable(&tx((1, 6, 0), (1, 8, 0)), w), NotOptimizable);
    }

    #[test]
    fn profile_means() {
        let txs = vec![tx((1, 8, 0), (1, 12, 0)), tx((2, 10, 30), (2, 20, 30))];
        let p = UserChargingProfile::from_transactions("h", &txs).unwrap();
        assert_eq!(p.mean_start_hour, 9.25);
        assert_eq!(p.mean_end_hour, 16.25);
        assert_eq!(p.mean_duration_h, 7.0);
        assert!(UserChargingProfile::from_transactions("h", &[]).is_none());
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), Some(2.5));
    }
}
