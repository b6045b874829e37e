//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter};
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hems_core::analysis::{
    annual_kwh, annualize_savings, best_k, elbow_sweep, filter_transactions, flows_from_records,
    grid_savings, household_monthly, monthly_report, synthesize, write_cluster_report,
    write_monthly_report, FilterStats, UserChargingProfile, EMISSION_FACTOR_KG_PER_KWH,
};
use hems_core::control::{
    potential_realized, rollout_segments, write_metrics_csv, write_trace_csv, MetricsRow, Rbpm,
    RolloutResult, TraceStep,
};
use hems_core::dataio::{
    by_household, derive_transactions, fill_gaps, generate as generate_household, infer_ev_capacity,
    infer_pv_peak, ingest as read_measurements, read_household, read_transactions_csv,
    resample_hourly, split as split_household, to_hour_steps, write_household, GeneratorConfig,
    HourlyRecord, RawMeasurement, Role, SplitConfig, SplitPlan,
};
use hems_core::ddpg::{self, write_training_log, MultiSeedResult, TrainedAgent};
use hems_core::domain::{
    validate_household, ChargingTransaction, HouseholdSeries, Tariff, TechnicalSpec, TrainConfig,
    DEFAULT_CHARGER_KW,
};
use hems_core::env::EnvParams;
use hems_core::mpc::{mpc_profit, replay};
use hems_core::timeline::Timeline;
use serde::Serialize;

use crate::config::{ExperimentConfig, SweepPreset};
use crate::sweep::{self, SweepRow};
use crate::{
    AnalyzeArgs, Common, EvaluateArgs, GenerateArgs, IngestArgs, PolicyKind, ReportArgs, RunArgs,
    SweepArgs, TraceDayArgs, TrainArgs,
};

/// Bad or missing input that the user has to fix; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Analysis fallback BESS for households without a reference setup.
const FALLBACK_BESS: (f64, f64) = (6.75, 3.3);
const KMEANS_RESTARTS: usize = 10;

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) if !p.exists() => Err(usage(format!("config file {} not found", p.display()))),
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let out = cfg.out_dir(common.out.as_deref());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    if !path.exists() {
        return Err(usage(format!("{} not found", path.display())));
    }
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// A household directory with its timeline and split.
struct Household {
    timeline: Timeline,
    plan: SplitPlan,
    origin: chrono::NaiveDateTime,
}

impl Household {
    fn ranges(&self, role: Role) -> Vec<Range<usize>> {
        self.plan.hour_ranges(role, self.origin)
    }

    fn id(&self) -> &str {
        &self.timeline.household_id
    }
}

fn household_dir(run: &RunArgs, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = run
        .data
        .clone()
        .or_else(|| cfg.data.first().cloned())
        .ok_or_else(|| usage("no household given; pass --data or set `data` in the config"))?;
    if !dir.join("spec.json").is_file() {
        return Err(usage(format!(
            "{} is not a household directory (spec.json missing)",
            dir.display()
        )));
    }
    Ok(dir)
}

fn load_series(run: &RunArgs, cfg: &ExperimentConfig) -> Result<HouseholdSeries> {
    let dir = household_dir(run, cfg)?;
    read_household(&dir).with_context(|| format!("reading household {}", dir.display()))
}

fn load_household(run: &RunArgs, cfg: &ExperimentConfig) -> Result<Household> {
    let series = load_series(run, cfg)?;
    let plan = split_household(
        &series,
        &SplitConfig {
            days: cfg.split_days(),
            ..SplitConfig::default()
        },
    )
    .context("splitting household")?;
    let timeline = Timeline::new(&series)?;
    let origin = series.start().ok_or_else(|| anyhow!("empty household"))?;
    Ok(Household {
        timeline,
        plan,
        origin,
    })
}

fn train_config(cfg: &ExperimentConfig, preset: Option<crate::config::Preset>, episodes: Option<usize>) -> Result<TrainConfig> {
    let mut c = cfg.train_config(preset);
    c.split_days = cfg.split_days();
    if let Some(e) = episodes {
        c.episodes = e;
    }
    c.validate().map_err(|e| usage(format!("invalid training configuration: {e}")))?;
    Ok(c)
}

fn params(h: &Household, tariff: Tariff) -> EnvParams {
    EnvParams {
        spec: h.timeline.spec,
        tariff,
        weights: Default::default(),
    }
}

fn run_rbpm(h: &Household, role: Role, tariff: Tariff) -> Result<RolloutResult> {
    Ok(rollout_segments(&h.timeline, &h.ranges(role), &mut Rbpm, &params(h, tariff), 0.0)?)
}

fn run_mpc(h: &Household, role: Role, tariff: Tariff) -> Result<RolloutResult> {
    let plan = mpc_profit(&h.timeline, &h.ranges(role), &tariff)?;
    Ok(replay(&h.timeline, &plan, &params(h, tariff))?)
}

fn metrics_row(h: &Household, policy: &str, seed: Option<u64>, split: Role, r: &RolloutResult) -> MetricsRow {
    MetricsRow {
        household: h.id().to_string(),
        policy: policy.into(),
        seed,
        split,
        profit_per_day: r.profit_per_day,
        discomfort: r.discomfort_score,
        potential_realized: None,
    }
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let out = out_dir(&args.common, &cfg)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let config = GeneratorConfig {
        days: args.days,
        ..GeneratorConfig::commuter()
    };
    let mut series = generate_household(&config, seed).map_err(|e| usage(e.to_string()))?;
    if args.synth {
        series = synthesize(&series)?;
    }
    let dir = out.join(&series.household_id);
    write_household(&dir, &series)?;
    println!(
        "{}: {} days, {} transactions -> {}",
        series.household_id,
        series.days(),
        series.transactions.len(),
        dir.display()
    );
    Ok(())
}

/// Hourly records and transactions of one measured household.
struct Measured {
    id: String,
    raw: Vec<RawMeasurement>,
    records: Vec<HourlyRecord>,
    transactions: Vec<ChargingTransaction>,
}

fn read_measured(
    data: &Path,
    transactions: Option<&Path>,
    max_gap_h: usize,
) -> Result<Vec<Measured>> {
    let raw = read_measurements(open(data)?).with_context(|| format!("reading {}", data.display()))?;
    let mut external: Option<BTreeMap<String, Vec<ChargingTransaction>>> = None;
    if let Some(p) = transactions {
        let mut map: BTreeMap<String, Vec<ChargingTransaction>> = BTreeMap::new();
        for (hh, tx) in read_transactions_csv(open(p)?).with_context(|| format!("reading {}", p.display()))? {
            map.entry(hh).or_default().push(tx);
        }
        external = Some(map);
    }
    let mut out = Vec::new();
    for (id, raw) in by_household(raw) {
        let resampled = resample_hourly(&raw)?;
        let records = fill_gaps(&resampled, max_gap_h).with_context(|| format!("household {id}"))?;
        let transactions = match &external {
            Some(map) => map.get(&id).cloned().unwrap_or_default(),
            None => derive_transactions(&raw),
        };
        out.push(Measured {
            id,
            raw,
            records,
            transactions,
        });
    }
    Ok(out)
}

/// Reference setup when known, otherwise BESS from `bess` and EV and PV
/// inferred from the measurements.
fn measured_spec(
    m: &Measured,
    bess: Option<(f64, f64)>,
    charger_kw: Option<f64>,
) -> Result<Option<TechnicalSpec>> {
    if let Some(spec) = TechnicalSpec::reference_household(&m.id) {
        return Ok(Some(spec));
    }
    let Some((cap, rate)) = bess else {
        return Ok(None);
    };
    let ev = infer_ev_capacity(&m.transactions).with_context(|| format!("household {}", m.id))?;
    let pv = infer_pv_peak(&m.raw)?;
    let mut spec = TechnicalSpec::with_devices(cap, rate, ev, pv.max(1e-3));
    spec.ev_charger_power_kw = charger_kw.unwrap_or(DEFAULT_CHARGER_KW);
    spec.validate()?;
    Ok(Some(spec))
}

pub fn ingest(args: IngestArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let out = out_dir(&args.common, &cfg)?;
    let bess = match (args.bess_kwh, args.bess_kw) {
        (Some(c), Some(r)) => Some((c, r)),
        (None, None) => None,
        _ => return Err(usage("--bess-kwh and --bess-kw go together")),
    };
    for m in read_measured(&args.data, args.transactions.as_deref(), args.max_gap_h)? {
        let spec = measured_spec(&m, bess, args.charger_kw)?.ok_or_else(|| {
            usage(format!(
                "household {} has no reference setup; pass --bess-kwh and --bess-kw",
                m.id
            ))
        })?;
        let series = HouseholdSeries {
            household_id: m.id.clone(),
            steps: to_hour_steps(&m.records),
            transactions: m.transactions,
            spec,
        };
        if let Some(v) = validate_household(&series).first() {
            bail!("household {}: {v}", m.id);
        }
        let dir = out.join(&m.id);
        write_household(&dir, &series)?;
        println!(
            "{}: {} hours, {} transactions -> {}",
            m.id,
            series.steps.len(),
            series.transactions.len(),
            dir.display()
        );
    }
    Ok(())
}

pub fn split(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let h = load_household(&args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let path = out.join("split.json");
    fs::write(&path, h.plan.to_json()? + "\n")?;
    for role in Role::ALL {
        println!("{role}: {} days in {} segments", h.plan.days(role), h.plan.of_role(role).count());
    }
    println!("-> {}", path.display());
    Ok(())
}

pub fn benchmark(args: RunArgs, kind: PolicyKind) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let tariff = cfg.tariff(args.common.tariff)?;
    let h = load_household(&args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let mut rows = Vec::new();
    for role in [Role::Eval, Role::Test] {
        let r = match kind {
            PolicyKind::Rbpm => run_rbpm(&h, role, tariff)?,
            PolicyKind::Mpc => run_mpc(&h, role, tariff)?,
            PolicyKind::Ddpg => unreachable!("benchmarks only"),
        };
        println!("{} {role}: {:.4} €/day", kind.name(), r.profit_per_day);
        write_trace_csv(create(&out.join(format!("trace_{}_{role}.csv", kind.name())))?, &r.trace)?;
        rows.push(metrics_row(&h, kind.name(), None, role, &r));
    }
    write_metrics_csv(create(&out.join(format!("metrics_{}.csv", kind.name())))?, &rows)?;
    Ok(())
}

fn progress(seed: u64, episodes: usize) -> impl FnMut(&ddpg::EpisodeLog) {
    let every = (episodes / 10).max(1);
    move |e| {
        if (e.episode + 1) % every == 0 || e.episode + 1 == episodes {
            eprintln!(
                "seed {seed} episode {}/{episodes}: mean reward {:.4}, critic loss {:.3e}",
                e.episode + 1,
                e.mean_reward,
                e.critic_loss
            );
        }
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args.run.common)?;
    let tariff = cfg.tariff(args.run.common.tariff)?;
    let mut config = train_config(&cfg, args.preset, args.episodes)?;
    if let Some(n) = args.seeds {
        if n == 0 {
            return Err(usage("--seeds must be positive"));
        }
        config.seed_count = n;
    }
    let h = load_household(&args.run, &cfg)?;
    let out = out_dir(&args.run.common, &cfg)?;
    fs::create_dir_all(out.join("agents"))?;
    fs::create_dir_all(out.join("logs"))?;
    let base = args.seed.or(cfg.seed).unwrap_or(0);
    let ranges = h.ranges(Role::Train);
    for i in 0..config.seed_count as u64 {
        let seed = base + i;
        let agent = ddpg::train_with(&h.timeline, &ranges, &config, tariff, seed, progress(seed, config.episodes))?;
        let path = out.join("agents").join(format!("seed_{seed}.json"));
        agent.save(create(&path)?)?;
        write_training_log(create(&out.join("logs").join(format!("train_seed_{seed}.csv")))?, &agent.log)?;
        println!("seed {seed} -> {}", path.display());
    }
    Ok(())
}

fn load_agent(path: &Path) -> Result<TrainedAgent> {
    TrainedAgent::load(open(path)?).with_context(|| format!("loading agent {}", path.display()))
}

fn agent_files(explicit: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if !explicit.is_empty() {
        return Ok(explicit.to_vec());
    }
    let dir = out.join("agents");
    let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if files.is_empty() {
        return Err(usage(format!("no agents given and none found in {}", dir.display())));
    }
    files.sort();
    Ok(files)
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = load_config(&args.run.common)?;
    let tariff = cfg.tariff(args.run.common.tariff)?;
    let h = load_household(&args.run, &cfg)?;
    let out = out_dir(&args.run.common, &cfg)?;
    let files = agent_files(&args.agent, &out)?;

    let bounds: Vec<(Role, f64, f64)> = [Role::Eval, Role::Test]
        .into_iter()
        .map(|role| Ok((role, run_rbpm(&h, role, tariff)?.profit_per_day, run_mpc(&h, role, tariff)?.profit_per_day)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for path in &files {
        let agent = load_agent(path)?;
        let mut profits = [0.0; 2];
        let mut test_discomfort = None;
        for (i, &(role, lower, upper)) in bounds.iter().enumerate() {
            let r = ddpg::evaluate(&agent, &h.timeline, &h.ranges(role), tariff)?;
            let mut row = metrics_row(&h, "ddpg", Some(agent.seed), role, &r);
            row.potential_realized = potential_realized(r.profit_per_day, lower, upper)
                .ok()
                .filter(|p| !p.zero_potential)
                .map(|p| p.fraction);
            rows.push(row);
            profits[i] = r.profit_per_day;
            if role == Role::Test {
                test_discomfort = r.discomfort_score;
            }
        }
        println!("seed {}: eval {:.4} €/day, test {:.4} €/day", agent.seed, profits[0], profits[1]);
        runs.push(ddpg::SeedRun {
            seed: agent.seed,
            eval_profit_per_day: profits[0],
            test_profit_per_day: profits[1],
            test_discomfort,
        });
    }
    if let Some(best) = ddpg::best_by_eval(&runs) {
        println!("best by eval: seed {} ({:.4} €/day on test)", runs[best].seed, runs[best].test_profit_per_day);
    }
    write_metrics_csv(create(&out.join("metrics_ddpg.csv"))?, &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct AnalysisSummary {
    households: usize,
    filter: FilterStats,
    pct_too_long: f64,
    pct_too_short: f64,
    best_k: Option<usize>,
    annual_savings_kwh: f64,
    annual_savings_eur: f64,
    annual_savings_kg_co2: f64,
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let tariff = cfg.tariff(args.common.tariff)?;
    let out = out_dir(&args.common, &cfg)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);

    let mut totals = FilterStats { total: 0, too_long: 0, too_short: 0, kept: 0 };
    let mut profiles = Vec::new();
    let mut monthly = Vec::new();
    for m in read_measured(&args.data, args.transactions.as_deref(), 5)? {
        let (kept, stats) = filter_transactions(&m.transactions);
        totals.total += stats.total;
        totals.too_long += stats.too_long;
        totals.too_short += stats.too_short;
        totals.kept += stats.kept;
        if let Some(p) = UserChargingProfile::from_transactions(&m.id, &kept) {
            profiles.push(p);
        }
        if kept.is_empty() {
            continue;
        }
        let filtered = Measured { transactions: kept, ..m };
        let spec = measured_spec(&filtered, Some(FALLBACK_BESS), None)?.expect("fallback BESS");
        let series = HouseholdSeries {
            household_id: filtered.id.clone(),
            steps: to_hour_steps(&filtered.records),
            transactions: filtered.transactions,
            spec,
        };
        let timeline = Timeline::new(&series).with_context(|| format!("household {}", filtered.id))?;
        let flows = flows_from_records(&filtered.records);
        let savings = grid_savings(&flows, 0, &timeline.spans);
        monthly.push(household_monthly(&savings, &flows));
    }

    let mut w = csv::Writer::from_writer(create(&out.join("profiles.csv"))?);
    w.write_record(["household", "mean_start", "mean_end", "mean_duration", "transactions"])?;
    for p in &profiles {
        w.write_record([
            p.household_id.clone(),
            p.mean_start_hour.to_string(),
            p.mean_end_hour.to_string(),
            p.mean_duration_h.to_string(),
            p.transaction_count.to_string(),
        ])?;
    }
    w.flush()?;

    let mut k = None;
    if profiles.len() >= 2 {
        let (sweep, results) = elbow_sweep(&profiles, args.k_max.max(2), KMEANS_RESTARTS, seed)?;
        let mut w = csv::Writer::from_writer(create(&out.join("elbow.csv"))?);
        for p in &sweep {
            w.serialize(p)?;
        }
        w.flush()?;
        k = best_k(&sweep);
        if let Some(k) = k {
            write_cluster_report(create(&out.join("clusters.csv"))?, &profiles, &results[k - 1])?;
        }
    } else {
        eprintln!("fewer than two charging profiles; clustering skipped");
    }

    let report = monthly_report(&monthly);
    write_monthly_report(create(&out.join("savings_monthly.csv"))?, &report)?;
    let kwh = annual_kwh(&report);
    let (eur, kg) = annualize_savings(kwh, tariff.price_buy, EMISSION_FACTOR_KG_PER_KWH);
    let summary = AnalysisSummary {
        households: monthly.len(),
        filter: totals,
        pct_too_long: totals.pct_too_long(),
        pct_too_short: totals.pct_too_short(),
        best_k: k,
        annual_savings_kwh: kwh,
        annual_savings_eur: eur,
        annual_savings_kg_co2: kg,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(out.join("analysis.json"), text.clone() + "\n")?;
    println!("{text}");
    Ok(())
}

pub fn synth(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let base = load_series(&args, &cfg)?;
    let out = out_dir(&args.common, &cfg)?;
    let series = synthesize(&base)?;
    let dir = out.join(&series.household_id);
    write_household(&dir, &series)?;
    println!(
        "{}: {} transactions, BESS {} kWh -> {}",
        series.household_id,
        series.transactions.len(),
        series.spec.bess_capacity_kwh,
        dir.display()
    );
    Ok(())
}

fn sweep_row(stage: usize, name: &str, r: &MultiSeedResult) -> SweepRow {
    let n = r.runs.len() as f64;
    SweepRow {
        stage,
        name: name.to_string(),
        seeds: r.runs.len(),
        mean_eval: r.runs.iter().map(|s| s.eval_profit_per_day).sum::<f64>() / n,
        best_eval: r.best().eval_profit_per_day,
        mean_test: r.mean_test_profit_per_day(),
        best_eval_test: r.best().test_profit_per_day,
    }
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(&args.run.common)?;
    let preset = args.sweep.or(cfg.sweep.preset).unwrap_or(SweepPreset::Parameter);
    let base = train_config(&cfg, args.preset, args.episodes)?;
    let points = sweep::points(preset, &base);
    if args.list {
        for p in &points {
            println!("{}", p.name);
        }
        return Ok(());
    }
    let seeds = args.seeds.or(cfg.sweep.seeds).unwrap_or(10);
    let top = args.top.or(cfg.sweep.top).unwrap_or(4);
    let final_seeds = args.final_seeds.or(cfg.sweep.final_seeds).unwrap_or(40);
    if seeds == 0 || final_seeds == 0 {
        return Err(usage("seed counts must be positive"));
    }
    let tariff = cfg.tariff(args.run.common.tariff)?;
    let h = load_household(&args.run, &cfg)?;
    let out = out_dir(&args.run.common, &cfg)?;
    let base_seed = args.seed.or(cfg.seed).unwrap_or(0);

    let run_point = |stage: usize, p: &sweep::SweepPoint, n: usize| -> Result<SweepRow> {
        let config = TrainConfig { seed_count: n, ..p.config.clone() };
        let r = ddpg::multi_seed(&h.timeline, &h.plan, &config, tariff, base_seed, |_| {})?;
        let row = sweep_row(stage, &p.name, &r);
        eprintln!(
            "stage {stage} {}: mean eval {:.4}, mean test {:.4} €/day",
            p.name, row.mean_eval, row.mean_test
        );
        Ok(row)
    };
    let mut rows = Vec::new();
    for p in &points {
        rows.push(run_point(1, p, seeds)?);
    }
    if preset == SweepPreset::Grid {
        let first = rows.clone();
        for i in sweep::top_by_mean_eval(&first, top) {
            rows.push(run_point(2, &points[i], final_seeds)?);
        }
    }
    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let out = out_dir(&args.common, &cfg)?;
    let mut metrics = Vec::new();
    for dir in &args.run {
        if !dir.is_dir() {
            return Err(usage(format!("run directory {} not found", dir.display())));
        }
        for policy in ["rbpm", "mpc", "ddpg"] {
            let path = dir.join(format!("metrics_{policy}.csv"));
            if path.exists() {
                metrics.extend(
                    hems_core::control::read_metrics_csv(open(&path)?)
                        .with_context(|| format!("reading {}", path.display()))?,
                );
            }
        }
    }
    if metrics.is_empty() {
        return Err(usage("no metrics_*.csv files in the given run directories"));
    }
    let rows = crate::report::build(&metrics).map_err(|e| usage(e.to_string()))?;
    crate::report::write(create(&out.join("report.csv"))?, &rows)?;
    crate::report::write(io::stdout().lock(), &rows)?;
    Ok(())
}

pub fn trace_day(args: TraceDayArgs) -> Result<()> {
    let cfg = load_config(&args.run.common)?;
    let tariff = cfg.tariff(args.run.common.tariff)?;
    let h = load_household(&args.run, &cfg)?;
    let out = out_dir(&args.run.common, &cfg)?;
    let midnight = args.date.and_hms_opt(0, 0, 0).expect("midnight");
    let t = (midnight - h.origin).num_hours();
    if t < 0 || t as usize >= h.timeline.len() {
        return Err(usage(format!("{} lies outside the household data", args.date)));
    }
    let t = t as usize;
    let role = h
        .plan
        .segments
        .iter()
        .find(|s| s.hour_range(h.origin).contains(&t))
        .map(|s| s.role)
        .ok_or_else(|| usage(format!("{} is not part of any split segment", args.date)))?;
    let result = match args.policy {
        PolicyKind::Rbpm => run_rbpm(&h, role, tariff)?,
        PolicyKind::Mpc => run_mpc(&h, role, tariff)?,
        PolicyKind::Ddpg => {
            let path = args.agent.as_deref().ok_or_else(|| usage("--policy ddpg needs --agent"))?;
            ddpg::evaluate(&load_agent(path)?, &h.timeline, &h.ranges(role), tariff)?
        }
    };
    let day: Vec<TraceStep> = result
        .trace
        .into_iter()
        .filter(|s| s.timestamp.date() == args.date)
        .collect();
    let path = out.join(format!("trace_{}_{}.csv", args.policy.name(), args.date));
    write_trace_csv(create(&path)?, &day)?;
    let sum = |f: fn(&TraceStep) -> f64| day.iter().map(f).sum::<f64>();
    let purchase = sum(|s| s.outcome.flows.grid_purchase_kwh);
    let feedin = sum(|s| s.outcome.flows.grid_feedin_kwh);
    let profit: f64 = day.iter().map(|s| s.outcome.flows.profit(&tariff)).sum();
    println!(
        "{} {} ({role}): purchase {purchase:.3} kWh, feed-in {feedin:.3} kWh, profit {profit:.4} € -> {}",
        args.policy.name(),
        args.date,
        path.display()
    );
    Ok(())
}
