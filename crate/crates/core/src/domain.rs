//! Shared value types for households, devices, tariffs and the MDP.
//!
//! Energies are kWh at one-hour resolution, so a power limit in kW equals the
//! energy it can move in one step. Prices are euros per kWh.

use std::f64::consts::PI;
use std::fmt;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed purchase and feed-in prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub price_buy: f64,
    pub price_sell: f64,
}

impl Tariff {
    pub fn new(price_buy: f64, price_sell: f64) -> Result<Self> {
        let t = Self {
            price_buy,
            price_sell,
        };
        t.validate()?;
        Ok(t)
    }

    /// Average 2023 prices used for all profit figures: 0.40 / 0.08 €/kWh.
    pub const fn reference() -> Self {
        Self {
            price_buy: 0.40,
            price_sell: 0.08,
        }
    }

    /// Prices quoted for the single-day comparison: 0.41 / 0.09 €/kWh.
    pub const fn day_study() -> Self {
        Self {
            price_buy: 0.41,
            price_sell: 0.09,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.price_sell >= 0.0 && self.price_buy > self.price_sell) {
            return Err(Error::Invalid(format!(
                "tariff requires price_buy > price_sell >= 0, got {} / {}",
                self.price_buy, self.price_sell
            )));
        }
        Ok(())
    }
}

impl Default for Tariff {
    fn default() -> Self {
        Self::reference()
    }
}

/// Device limits and efficiencies of one household.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechnicalSpec {
    pub bess_capacity_kwh: f64,
    pub bess_power_kw: f64,
    pub bess_efficiency: f64,
    /// Fraction of the stored energy lost per hour.
    pub bess_standing_loss_per_hour: f64,
    pub ev_capacity_kwh: f64,
    pub ev_charger_power_kw: f64,
    pub pv_peak_usable_kw: f64,
}

pub const DEFAULT_BESS_EFFICIENCY: f64 = 0.95;
/// 0.003 % of the SoC per hour.
pub const DEFAULT_STANDING_LOSS: f64 = 0.003 / 100.0;
pub const DEFAULT_CHARGER_KW: f64 = 11.0;

impl TechnicalSpec {
    /// Spec with the shared efficiency, standing-loss and charger defaults.
    pub fn with_devices(
        bess_capacity_kwh: f64,
        bess_power_kw: f64,
        ev_capacity_kwh: f64,
        pv_peak_usable_kw: f64,
    ) -> Self {
        Self {
            bess_capacity_kwh,
            bess_power_kw,
            bess_efficiency: DEFAULT_BESS_EFFICIENCY,
            bess_standing_loss_per_hour: DEFAULT_STANDING_LOSS,
            ev_capacity_kwh,
            ev_charger_power_kw: DEFAULT_CHARGER_KW,
            pv_peak_usable_kw,
        }
    }

    /// Technical setup of the nine reference households (ids "01".."09").
    pub fn reference_household(id: &str) -> Option<Self> {
        REFERENCE_HOUSEHOLDS
            .iter()
            .find(|(hid, ..)| *hid == id)
            .map(|&(_, cap, rate, ev, pv)| Self::with_devices(cap, rate, ev, pv))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bess_capacity_kwh", self.bess_capacity_kwh),
            ("bess_power_kw", self.bess_power_kw),
            ("bess_efficiency", self.bess_efficiency),
            ("ev_capacity_kwh", self.ev_capacity_kwh),
            ("ev_charger_power_kw", self.ev_charger_power_kw),
            ("pv_peak_usable_kw", self.pv_peak_usable_kw),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.bess_efficiency > 1.0 {
            return Err(Error::Invalid(format!(
                "bess_efficiency must be <= 1, got {}",
                self.bess_efficiency
            )));
        }
        let loss = self.bess_standing_loss_per_hour;
        if !(0.0..1.0).contains(&loss) {
            return Err(Error::Invalid(format!(
                "standing loss must lie in [0, 1), got {loss}"
            )));
        }
        Ok(())
    }
}

/// (id, BESS kWh, inverter kW, EV kWh, usable PV peak kW)
pub const REFERENCE_HOUSEHOLDS: [(&str, f64, f64, f64, f64); 9] = [
    ("01", 6.75, 3.3, 48.25, 9.30),
    ("02", 9.00, 3.3, 36.27, 8.02),
    ("03", 9.00, 3.3, 45.51, 9.55),
    ("04", 9.90, 4.6, 78.99, 13.28),
    ("05", 9.00, 4.6, 37.21, 7.91),
    ("06", 13.50, 4.6, 35.82, 12.63),
    ("07", 10.80, 3.3, 36.52, 8.98),
    ("08", 9.00, 3.3, 45.28, 9.46),
    ("09", 6.75, 3.3, 21.94, 8.09),
];

/// One hour of exogenous household data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourStep {
    pub timestamp: NaiveDateTime,
    pub pv_kwh: f64,
    pub demand_kwh: f64,
}

/// One contiguous EV plug-in window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingTransaction {
    pub id: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub energy_kwh: f64,
    #[serde(default)]
    pub start_soc_kwh: Option<f64>,
}

impl ChargingTransaction {
    pub fn duration_hours(&self) -> f64 {
        (self.end - self.start).num_seconds() as f64 / 3600.0
    }

    /// First connected hour (the hour containing `start`).
    pub fn first_hour(&self) -> NaiveDateTime {
        floor_hour(self.start)
    }

    /// Exclusive end hour: the EV is connected during every hour that
    /// intersects `[start, end)`.
    pub fn end_hour(&self) -> NaiveDateTime {
        let f = floor_hour(self.end);
        if f == self.end {
            f
        } else {
            f + Duration::hours(1)
        }
    }

    pub fn overlaps(&self, other: &ChargingTransaction) -> bool {
        self.first_hour() < other.end_hour() && other.first_hour() < self.end_hour()
    }
}

pub fn floor_hour(t: NaiveDateTime) -> NaiveDateTime {
    t.date().and_hms_opt(t.hour(), 0, 0).expect("valid hour")
}

/// Hourly series and EV transactions of one household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdSeries {
    pub household_id: String,
    pub steps: Vec<HourStep>,
    pub transactions: Vec<ChargingTransaction>,
    pub spec: TechnicalSpec,
}

impl HouseholdSeries {
    pub fn start(&self) -> Option<NaiveDateTime> {
        self.steps.first().map(|s| s.timestamp)
    }

    /// Exclusive end of the covered range.
    pub fn end(&self) -> Option<NaiveDateTime> {
        self.steps.last().map(|s| s.timestamp + Duration::hours(1))
    }

    pub fn hour_index(&self, t: NaiveDateTime) -> Option<usize> {
        let start = self.start()?;
        let h = (t - start).num_hours();
        (h >= 0 && (h as usize) < self.steps.len()).then_some(h as usize)
    }

    pub fn days(&self) -> usize {
        self.steps.len() / 24
    }
}

/// A violated invariant found by [`validate_household`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Gap {
        after: NaiveDateTime,
        next: NaiveDateTime,
    },
    NegativeValue {
        at: NaiveDateTime,
        channel: &'static str,
    },
    EmptyTransaction(String),
    NegativeEnergy(String),
    EnergyAboveCapacity {
        id: String,
        energy: f64,
        capacity: f64,
    },
    Overlap(String, String),
    OutOfRange(String),
    BadSpec(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Gap { after, next } => {
                write!(f, "gap in hourly steps between {after} and {next}")
            }
            Violation::NegativeValue { at, channel } => write!(f, "negative {channel} at {at}"),
            Violation::EmptyTransaction(id) => write!(f, "transaction {id} ends before it starts"),
            Violation::NegativeEnergy(id) => write!(f, "transaction {id} has negative energy"),
            Violation::EnergyAboveCapacity {
                id,
                energy,
                capacity,
            } => write!(
                f,
                "transaction {id} charges {energy} kWh, above EV capacity {capacity} kWh"
            ),
            Violation::Overlap(a, b) => write!(f, "transactions {a} and {b} overlap"),
            Violation::OutOfRange(id) => {
                write!(f, "transaction {id} lies outside the step range")
            }
            Violation::BadSpec(msg) => write!(f, "technical spec: {msg}"),
        }
    }
}

/// Checks every invariant of a household and lists the violations.
pub fn validate_household(series: &HouseholdSeries) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Err(e) = series.spec.validate() {
        out.push(Violation::BadSpec(e.to_string()));
    }
    for w in series.steps.windows(2) {
        if w[1].timestamp - w[0].timestamp != Duration::hours(1) {
            out.push(Violation::Gap {
                after: w[0].timestamp,
                next: w[1].timestamp,
            });
        }
    }
    for s in &series.steps {
        if !(s.pv_kwh >= 0.0) {
            out.push(Violation::NegativeValue {
                at: s.timestamp,
                channel: "pv_kwh",
            });
        }
        if !(s.demand_kwh >= 0.0) {
            out.push(Violation::NegativeValue {
                at: s.timestamp,
                channel: "demand_kwh",
            });
        }
    }
    let (start, end) = match (series.start(), series.end()) {
        (Some(s), Some(e)) => (s, e),
        _ => (NaiveDateTime::MAX, NaiveDateTime::MIN),
    };
    for tx in &series.transactions {
        if tx.end <= tx.start {
            out.push(Violation::EmptyTransaction(tx.id.clone()));
        }
        if !(tx.energy_kwh >= 0.0) {
            out.push(Violation::NegativeEnergy(tx.id.clone()));
        }
        if tx.energy_kwh > series.spec.ev_capacity_kwh + 1e-9 {
            out.push(Violation::EnergyAboveCapacity {
                id: tx.id.clone(),
                energy: tx.energy_kwh,
                capacity: series.spec.ev_capacity_kwh,
            });
        }
        if tx.start < start || tx.end > end {
            out.push(Violation::OutOfRange(tx.id.clone()));
        }
    }
    let mut sorted: Vec<&ChargingTransaction> = series.transactions.iter().collect();
    sorted.sort_by_key(|t| t.start);
    for w in sorted.windows(2) {
        if w[0].overlaps(w[1]) {
            out.push(Violation::Overlap(w[0].id.clone(), w[1].id.clone()));
        }
    }
    out
}

/// Meteorological season: Dec–Feb = 0, Mar–May = 1, Jun–Aug = 2, Sep–Nov = 3.
pub fn season_of(t: NaiveDateTime) -> u8 {
    ((t.month() % 12) / 3) as u8
}

/// Cosine/sine encoding of the hour of day.
pub fn hour_encoding(hour: u32) -> (f64, f64) {
    let angle = 2.0 * PI * f64::from(hour) / 24.0;
    (angle.cos(), angle.sin())
}

/// Inverse of [`hour_encoding`].
pub fn hour_from_encoding(cos: f64, sin: f64) -> u32 {
    let angle = sin.atan2(cos).rem_euclid(2.0 * PI);
    ((angle * 24.0 / (2.0 * PI)).round() as u32) % 24
}

/// The 8-feature MDP state plus the kWh-denominated SoCs behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub soc_b_kwh: f64,
    /// Equals the EV capacity whenever the EV is disconnected.
    pub soc_ev_kwh: f64,
    pub connected: bool,
    /// Whole hours until disconnect; -1 while disconnected.
    pub countdown_h: i32,
    pub hour_cos: f64,
    pub hour_sin: f64,
    pub season: u8,
    pub demand_kwh: f64,
    pub pv_kwh: f64,
}

pub const STATE_DIM: usize = 8;
pub const ACTION_DIM: usize = 2;

impl SimState {
    /// True when the EV leaves at the end of the current hour.
    pub fn disconnect_now(&self) -> bool {
        self.connected && self.countdown_h == 0
    }

    pub fn ev_fraction(&self, spec: &TechnicalSpec) -> f64 {
        if self.connected {
            self.soc_ev_kwh / spec.ev_capacity_kwh
        } else {
            1.0
        }
    }

    /// Raw (unnormalized) feature vector in MDP order.
    pub fn features(&self, spec: &TechnicalSpec) -> [f64; STATE_DIM] {
        [
            self.soc_b_kwh / spec.bess_capacity_kwh,
            self.ev_fraction(spec),
            f64::from(self.countdown_h),
            self.hour_cos,
            self.hour_sin,
            f64::from(self.season),
            self.demand_kwh,
            self.pv_kwh,
        ]
    }
}

/// Target-SoC fractions for the BESS and the EV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub target_bess: f64,
    pub target_ev: f64,
}

impl Action {
    pub fn new(target_bess: f64, target_ev: f64) -> Self {
        Self {
            target_bess: target_bess.clamp(0.0, 1.0),
            target_ev: target_ev.clamp(0.0, 1.0),
        }
    }

    /// Maps a saturated actor output in [-1, 1]² to targets in [0, 1]².
    pub fn from_unit_interval(raw: [f64; 2]) -> Self {
        Self::new((raw[0] + 1.0) / 2.0, (raw[1] + 1.0) / 2.0)
    }

    pub fn as_array(&self) -> [f64; ACTION_DIM] {
        [self.target_bess, self.target_ev]
    }
}

/// Resolved flows of one step, all non-negative kWh.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyFlows {
    pub ev_charge_kwh: f64,
    pub bess_charge_kwh: f64,
    pub bess_discharge_kwh: f64,
    pub grid_purchase_kwh: f64,
    pub grid_feedin_kwh: f64,
    /// Unmet EV demand bought externally at disconnect.
    pub external_ev_kwh: f64,
}

impl EnergyFlows {
    /// Share of the grid purchase attributed to EV charging.
    pub fn ev_grid_purchase(&self) -> f64 {
        self.ev_charge_kwh.min(self.grid_purchase_kwh)
    }

    /// Grid-exchange profit including the external top-up.
    pub fn profit(&self, tariff: &Tariff) -> f64 {
        tariff.price_sell * self.grid_feedin_kwh
            - tariff.price_buy * (self.grid_purchase_kwh + self.external_ev_kwh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscomfortShape {
    /// weight × shortfall², shortfall in percentage points.
    #[default]
    Quadratic,
    /// weight × shortfall, shortfall in percentage points.
    Linear,
}

/// Weights of the virtual cost terms in the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub discomfort_weight: f64,
    pub penalty_weight: f64,
    #[serde(default)]
    pub discomfort_shape: DiscomfortShape,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            discomfort_weight: 0.01,
            penalty_weight: 0.1,
            discomfort_shape: DiscomfortShape::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseConfig {
    Gaussian { sigma: f64 },
    OrnsteinUhlenbeck { sigma: f64, theta: f64, mu: f64 },
}

impl NoiseConfig {
    pub fn ou(sigma: f64) -> Self {
        NoiseConfig::OrnsteinUhlenbeck {
            sigma,
            theta: 0.15,
            mu: 0.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseConfig::Gaussian { sigma } | NoiseConfig::OrnsteinUhlenbeck { sigma, .. } => sigma,
        }
    }
}

/// Train/eval/test day totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDays {
    pub train: usize,
    pub eval: usize,
    pub test: usize,
}

impl SplitDays {
    pub fn total(&self) -> usize {
        self.train + self.eval + self.test
    }
}

impl Default for SplitDays {
    fn default() -> Self {
        Self {
            train: 180,
            eval: 60,
            test: 125,
        }
    }
}

/// DDPG hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub episode_len_h: usize,
    pub batch: usize,
    pub buffer: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub tau: f64,
    pub gamma: f64,
    pub hidden: (usize, usize),
    pub noise: NoiseConfig,
    pub weights: RewardWeights,
    pub seed_count: usize,
    pub split_days: SplitDays,
}

impl TrainConfig {
    /// Reference parameter settings.
    pub fn paper() -> Self {
        Self {
            episodes: 1001,
            episode_len_h: 72,
            batch: 120,
            buffer: 24_000,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            tau: 1e-3,
            gamma: 0.99,
            hidden: (300, 600),
            noise: NoiseConfig::Gaussian { sigma: 0.1 },
            weights: RewardWeights::default(),
            seed_count: 40,
            split_days: SplitDays::default(),
        }
    }

    /// Reference settings with the smaller 250;500 networks.
    pub fn tuned() -> Self {
        Self {
            hidden: (250, 500),
            ..Self::paper()
        }
    }

    pub fn learning_passes(&self) -> usize {
        self.episodes * self.episode_len_h
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("episodes", self.episodes),
            ("episode_len_h", self.episode_len_h),
            ("batch", self.batch),
            ("buffer", self.buffer),
            ("hidden.0", self.hidden.0),
            ("hidden.1", self.hidden.1),
            ("seed_count", self.seed_count),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.batch > self.buffer {
            return Err(Error::Invalid("batch larger than buffer".into()));
        }
        for (name, v) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic)] {
            if !(v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Invalid("gamma must lie in (0, 1)".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Invalid("tau must lie in (0, 1)".into()));
        }
        if !(self.noise.sigma() >= 0.0) {
            return Err(Error::Invalid("noise sigma must be non-negative".into()));
        }
        if self.weights.discomfort_weight < 0.0 || self.weights.penalty_weight < 0.0 {
            return Err(Error::Invalid("reward weights must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::paper()
    }
}
