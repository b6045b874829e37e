use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Duration, NaiveDateTime, Timelike};

use crate::domain::ChargingTransaction;
use crate::error::{Error, Result};

pub const MEASUREMENT_HEADER: [&str; 6] = [
    "timestamp",
    "household_id",
    "pv_w",
    "load_w",
    "ev_w",
    "transaction_id",
];

/// One 15-minute reading. `load_w` is the total household load including
/// the EV charger.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMeasurement {
    pub timestamp: NaiveDateTime,
    pub household_id: String,
    pub pv_w: f64,
    pub load_w: f64,
    pub ev_w: f64,
    pub transaction_id: Option<String>,
}

pub(crate) fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    let s = s.trim().trim_end_matches('Z');
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub(crate) fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Column positions resolved from a header row; rejects unknown and
/// missing names.
pub(crate) fn column_map<const N: usize>(
    header: &csv::StringRecord,
    expected: [&str; N],
) -> Result<[usize; N]> {
    let mut pos = [usize::MAX; N];
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        match expected.iter().position(|e| *e == name) {
            Some(j) => pos[j] = i,
            None => return Err(Error::UnknownColumn(name.to_string())),
        }
    }
    for (j, p) in pos.iter().enumerate() {
        if *p == usize::MAX {
            return Err(Error::MissingColumn(expected[j].to_string()));
        }
    }
    Ok(pos)
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} from `{raw}`"),
    })
}

/// Parses a measurement CSV and returns records sorted by household and
/// timestamp.
pub fn ingest<R: Read>(reader: R) -> Result<Vec<RawMeasurement>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let cols = column_map(rdr.headers()?, MEASUREMENT_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts_raw = rec.get(cols[0]).unwrap_or("");
        let timestamp = parse_timestamp(ts_raw).ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid timestamp `{ts_raw}`"),
        })?;
        if timestamp.minute() % 15 != 0 || timestamp.second() != 0 {
            return Err(Error::Parse {
                line,
                message: format!("timestamp {timestamp} is off the 15-minute grid"),
            });
        }
        let household_id = rec.get(cols[1]).unwrap_or("").trim().to_string();
        if household_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty household_id".into(),
            });
        }
        let pv_w: f64 = parse_field(&rec, cols[2], "pv_w", line)?;
        let load_w: f64 = parse_field(&rec, cols[3], "load_w", line)?;
        let ev_w: f64 = parse_field(&rec, cols[4], "ev_w", line)?;
        for (name, v) in [("pv_w", pv_w), ("load_w", load_w), ("ev_w", ev_w)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: format!("{name} must be a non-negative number, got {v}"),
                });
            }
        }
        let tid = rec.get(cols[5]).unwrap_or("").trim();
        out.push(RawMeasurement {
            timestamp,
            household_id,
            pv_w,
            load_w,
            ev_w,
            transaction_id: (!tid.is_empty()).then(|| tid.to_string()),
        });
    }
    out.sort_by(|a, b| {
        a.household_id
            .cmp(&b.household_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok(out)
}

/// Groups sorted records by household id.
pub fn by_household(raw: Vec<RawMeasurement>) -> BTreeMap<String, Vec<RawMeasurement>> {
    let mut map: BTreeMap<String, Vec<RawMeasurement>> = BTreeMap::new();
    for r in raw {
        map.entry(r.household_id.clone()).or_default().push(r);
    }
    map
}

const SLOT: i64 = 15;

/// Recovers charging transactions of one household from its readings.
///
/// Uses the `transaction_id` column when any reading carries one, otherwise
/// contiguous runs of `ev_w > 0`.
pub fn derive_transactions(raw: &[RawMeasurement]) -> Vec<ChargingTransaction> {
    let slot = Duration::minutes(SLOT);
    if raw.iter().any(|r| r.transaction_id.is_some()) {
        let mut groups: BTreeMap<&str, (NaiveDateTime, NaiveDateTime, f64)> = BTreeMap::new();
        for r in raw {
            if let Some(id) = r.transaction_id.as_deref() {
                let e = groups
                    .entry(id)
                    .or_insert((r.timestamp, r.timestamp, 0.0));
                e.0 = e.0.min(r.timestamp);
                e.1 = e.1.max(r.timestamp);
                e.2 += r.ev_w / 4000.0;
            }
        }
        let mut txs: Vec<ChargingTransaction> = groups
            .into_iter()
            .map(|(id, (s, e, kwh))| ChargingTransaction {
                id: id.to_string(),
                start: s,
                end: e + slot,
                energy_kwh: kwh,
                start_soc_kwh: None,
            })
            .collect();
        txs.sort_by_key(|t| t.start);
        return txs;
    }

    let mut txs = Vec::new();
    let mut run: Option<(NaiveDateTime, NaiveDateTime, f64)> = None;
    for r in raw {
        let contiguous = run.is_some_and(|(_, last, _)| r.timestamp - last == slot);
        if r.ev_w > 0.0 {
            match run.as_mut() {
                Some(cur) if contiguous => {
                    cur.1 = r.timestamp;
                    cur.2 += r.ev_w / 4000.0;
                }
                _ => {
                    if let Some((s, e, kwh)) = run.take() {
                        txs.push((s, e, kwh));
                    }
                    run = Some((r.timestamp, r.timestamp, r.ev_w / 4000.0));
                }
            }
        } else if let Some((s, e, kwh)) = run.take() {
            txs.push((s, e, kwh));
        }
    }
    if let Some(cur) = run {
        txs.push(cur);
    }
    txs.into_iter()
        .enumerate()
        .map(|(i, (s, e, kwh))| ChargingTransaction {
            id: format!("run{i}"),
            start: s,
            end: e + slot,
            energy_kwh: kwh,
            start_soc_kwh: None,
        })
        .collect()
}
