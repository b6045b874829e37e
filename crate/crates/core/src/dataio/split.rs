use std::fmt;
use std::ops::Range;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::{HouseholdSeries, SplitDays};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Eval,
    Test,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Train, Role::Eval, Role::Test];
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Eval => "eval",
            Role::Test => "test",
        })
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "eval" => Ok(Role::Eval),
            "test" => Ok(Role::Test),
            _ => Err(Error::Invalid(format!("unknown split role `{s}`"))),
        }
    }
}

/// `[start, end)` at midnight boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub role: Role,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl Segment {
    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize
    }

    pub fn hour_range(&self, series_start: NaiveDateTime) -> Range<usize> {
        let s = (self.start - series_start).num_hours() as usize;
        let e = (self.end - series_start).num_hours() as usize;
        s..e
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub days: SplitDays,
    /// Nominal segment lengths in days for train, eval and test.
    pub segment_days: [usize; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            days: SplitDays::default(),
            segment_days: [15, 5, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitPlan {
    pub segments: Vec<Segment>,
}

impl SplitPlan {
    pub fn days(&self, role: Role) -> usize {
        self.segments
            .iter()
            .filter(|s| s.role == role)
            .map(Segment::days)
            .sum()
    }

    pub fn of_role(&self, role: Role) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.role == role)
    }

    /// Hour ranges of all segments with `role`, in order.
    pub fn hour_ranges(&self, role: Role, series_start: NaiveDateTime) -> Vec<Range<usize>> {
        self.of_role(role)
            .map(|s| s.hour_range(series_start))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Lists every broken plan invariant for `series`.
    pub fn check(&self, series: &HouseholdSeries, days: &SplitDays) -> Vec<String> {
        let mut problems = Vec::new();
        let (Some(start), Some(end)) = (series.start(), series.end()) else {
            return vec!["empty series".into()];
        };
        let mut cursor = start;
        for seg in &self.segments {
            if seg.start != cursor {
                problems.push(format!("segment starting {} leaves a gap or overlap", seg.start));
            }
            if seg.start.hour() != 0 || seg.end.hour() != 0 {
                problems.push(format!("segment {} .. {} not at midnight", seg.start, seg.end));
            }
            if seg.end <= seg.start {
                problems.push(format!("empty segment at {}", seg.start));
            }
            cursor = seg.end;
        }
        if cursor != end {
            problems.push(format!("plan ends at {cursor}, data ends at {end}"));
        }
        for (role, want) in [
            (Role::Train, days.train),
            (Role::Eval, days.eval),
            (Role::Test, days.test),
        ] {
            let got = self.days(role);
            if got != want {
                problems.push(format!("{role} has {got} days, expected {want}"));
            }
        }
        for seg in self.segments.iter().skip(1) {
            let b = seg.start;
            for tx in &series.transactions {
                if tx.first_hour() < b && b < tx.end_hour() {
                    problems.push(format!("transaction {} straddles {}", tx.id, b));
                }
            }
        }
        problems
    }
}

/// Repeating train/eval/test segments at midnight. A boundary that would
/// cut an EV transaction moves to the next free midnight; the role's later
/// segments absorb the difference so day totals stay exact.
pub fn split(series: &HouseholdSeries, config: &SplitConfig) -> Result<SplitPlan> {
    let start = series.start().ok_or(Error::Empty("household series"))?;
    if start.hour() != 0 || series.steps.len() % 24 != 0 {
        return Err(Error::SplitInfeasible(
            "series must start at midnight and cover whole days".into(),
        ));
    }
    let days = series.days();
    if config.days.total() != days {
        return Err(Error::SplitInfeasible(format!(
            "configured {} days but data covers {days}",
            config.days.total()
        )));
    }
    if config.segment_days.iter().any(|&d| d == 0) {
        return Err(Error::SplitInfeasible("segment length must be positive".into()));
    }

    let mut blocked = vec![false; days + 1];
    for tx in &series.transactions {
        let s = (tx.first_hour() - start).num_hours();
        let e = (tx.end_hour() - start).num_hours();
        for (d, b) in blocked.iter_mut().enumerate().skip(1).take(days - 1) {
            let h = 24 * d as i64;
            if s < h && h < e {
                *b = true;
            }
        }
    }

    let mut remaining = [config.days.train, config.days.eval, config.days.test];
    let mut segments = Vec::new();
    let mut cur = 0usize;
    let mut next_role = 0usize;
    while cur < days {
        let mut placed = None;
        for k in 0..3 {
            let r = (next_role + k) % 3;
            if remaining[r] == 0 {
                continue;
            }
            if let Some(end) = place(cur, config.segment_days[r], remaining[r], days, &blocked) {
                placed = Some((r, end));
                break;
            }
        }
        let (r, end) = placed.ok_or_else(|| {
            let day = start + Duration::days(cur as i64);
            Error::SplitInfeasible(format!("no valid boundary after {day}"))
        })?;
        segments.push(Segment {
            role: Role::ALL[r],
            start: start + Duration::days(cur as i64),
            end: start + Duration::days(end as i64),
        });
        remaining[r] -= end - cur;
        cur = end;
        next_role = r + 1;
    }
    Ok(SplitPlan { segments })
}

fn place(cur: usize, nominal: usize, quota: usize, days: usize, blocked: &[bool]) -> Option<usize> {
    let limit = cur + quota;
    let end = cur + nominal.min(quota);
    if end == days || !blocked[end] {
        return Some(end);
    }
    if let Some(e) = (end + 1..=limit).find(|&e| e == days || !blocked[e]) {
        return Some(e);
    }
    (cur + 1..end).rev().find(|&e| !blocked[e])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ChargingTransaction, HourStep, TechnicalSpec};
    use chrono::NaiveDate;

    fn series(txs: Vec<ChargingTransaction>) -> HouseholdSeries {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        HouseholdSeries {
            household_id: "s".into(),
            steps: (0..8760)
                .map(|h| HourStep {
                    timestamp: start + Duration::hours(h),
                    pv_kwh: 0.0,
                    demand_kwh: 0.0,
                })
                .collect(),
            transactions: txs,
            spec: TechnicalSpec::with_devices(6.75, 3.3, 40.0, 8.0),
        }
    }

    fn overnight(day: i64) -> ChargingTransaction {
        let base = NaiveDate::from_ymd_opt(2021, 1, 1)
            .unwrap()
            .and_hms_opt(20, 0, 0)
            .unwrap();
        ChargingTransaction {
            id: format!("n{day}"),
            start: base + Duration::days(day),
            end: base + Duration::days(day) + Duration::hours(11),
            energy_kwh: 10.0,
            start_soc_kwh: None,
        }
    }

    #[test]
    fn plain_year_repeats_nominal_pattern() {
        let s = series(vec![]);
        let plan = split(&s, &SplitConfig::default()).unwrap();
        let lens: Vec<(Role, usize)> = plan.segments.iter().map(|g| (g.role, g.days())).collect();
        for (i, chunk) in lens.chunks(3).take(12).enumerate() {
            assert_eq!(
                chunk,
                &[(Role::Train, 15), (Role::Eval, 5), (Role::Test, 10)],
                "cycle {i}"
            );
        }
        assert_eq!(lens[36..], [(Role::Test, 5)]);
        assert!(plan.check(&s, &SplitDays::default()).is_empty());
        assert_eq!(plan.days(Role::Train) + plan.days(Role::Eval) + plan.days(Role::Test), 365);
    }

    #[test]
    fn straddling_transaction_defers_boundary() {
        // day 14 evening to day 15 morning crosses the first nominal boundary
        let s = series(vec![overnight(14)]);
        let plan = split(&s, &SplitConfig::default()).unwrap();
        assert_eq!(plan.segments[0].days(), 16);
        assert_eq!(plan.segments[1].role, Role::Eval);
        assert!(plan.check(&s, &SplitDays::default()).is_empty());
    }

    #[test]
    fn many_overnight_transactions_still_exact() {
        let txs = (0..364).step_by(3).map(overnight).collect();
        let s = series(txs);
        let plan = split(&s, &SplitConfig::default()).unwrap();
        assert_eq!(plan.check(&s, &SplitDays::default()), Vec::<String>::new());
    }

    #[test]
    fn wrong_day_total_is_an_error() {
        let mut s = series(vec![]);
        s.steps.truncate(24 * 300);
        assert!(split(&s, &SplitConfig::default()).is_err());
    }

    #[test]
    fn plan_json_round_trip() {
        let s = series(vec![]);
        let plan = split(&s, &SplitConfig::default()).unwrap();
        let text = plan.to_json().unwrap();
        assert!(text.contains("\"role\": \"train\""));
        assert_eq!(SplitPlan::from_json(&text).unwrap(), plan);
    }
}
