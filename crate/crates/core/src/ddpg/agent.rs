use std::io::{Read, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{soft_update, Adam, Mlp, OutputActivation};
use super::noise::NoiseProcess;
use super::replay::{Normalizer, ReplayBuffer, Transition};
use crate::control::{rollout_segments, Policy, RolloutResult};
use crate::dataio::{Role, SplitPlan};
use crate::domain::{Action, SimState, Tariff, TechnicalSpec, TrainConfig, ACTION_DIM, STATE_DIM};
use crate::env::{build_state, step, EnvParams};
use crate::error::{Error, Result};
use crate::timeline::Timeline;

const CRITIC_IN: usize = STATE_DIM + ACTION_DIM;
/// Attempts before episode sampling gives up.
pub const MAX_EPISODE_ATTEMPTS: usize = 1000;
pub const CHECKPOINT_FORMAT: &str = "hems-ddpg";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const TRAINING_LOG_HEADER: [&str; 4] = ["episode", "mean_reward", "critic_loss", "actor_objective"];

/// Maps a raw actor output in [−1, 1] to a target in [0, 1].
pub fn to_target(raw: f64) -> f64 {
    (raw.clamp(-1.0, 1.0) + 1.0) / 2.0
}

/// Online and target networks with their optimizers.
#[derive(Debug, Clone)]
pub struct Networks {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl Networks {
    pub fn new<R: Rng + ?Sized>(config: &TrainConfig, rng: &mut R) -> Self {
        let (l1, l2) = config.hidden;
        let actor = Mlp::new(&[STATE_DIM, l1, l2, ACTION_DIM], OutputActivation::Tanh, rng);
        let critic = Mlp::new(&[CRITIC_IN, l1, l2, 1], OutputActivation::Linear, rng);
        Self {
            actor_opt: Adam::new(&actor, config.lr_actor),
            critic_opt: Adam::new(&critic, config.lr_critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        }
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        soft_update(&self.actor, &mut self.actor_target, tau)?;
        soft_update(&self.critic, &mut self.critic_target, tau)
    }
}

/// A mini-batch laid out as row-major matrices with normalized states.
#[derive(Debug, Clone)]
pub struct Batch {
    pub len: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
}

impl Batch {
    pub fn new(items: &[&Transition], normalizer: &Normalizer) -> Self {
        let mut b = Batch {
            len: items.len(),
            states: Vec::with_capacity(items.len() * STATE_DIM),
            actions: Vec::with_capacity(items.len() * ACTION_DIM),
            rewards: Vec::with_capacity(items.len()),
            next_states: Vec::with_capacity(items.len() * STATE_DIM),
        };
        for t in items {
            b.states.extend(normalizer.apply(&t.state));
            b.actions.extend(t.action);
            b.rewards.push(t.reward);
            b.next_states.extend(normalizer.apply(&t.next_state));
        }
        b
    }
}

fn critic_input(states: &[f64], actions: &[f64]) -> Vec<f64> {
    states
        .chunks_exact(STATE_DIM)
        .zip(actions.chunks_exact(ACTION_DIM))
        .flat_map(|(s, a)| s.iter().chain(a).copied())
        .collect()
}

/// Actor outputs mapped to targets in [0, 1].
fn policy_targets(actor: &Mlp, states: &[f64], len: usize) -> Vec<f64> {
    actor.forward(states, len).into_iter().map(to_target).collect()
}

/// Mean-squared Bellman error of the online critic and its gradient.
pub fn critic_gradient(nets: &Networks, batch: &Batch, gamma: f64) -> (f64, Mlp) {
    let k = batch.len;
    let next_actions = policy_targets(&nets.actor_target, &batch.next_states, k);
    let next_q = nets
        .critic_target
        .forward(&critic_input(&batch.next_states, &next_actions), k);
    let cache = nets
        .critic
        .forward_cached(&critic_input(&batch.states, &batch.actions), k);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(k);
    for ((q, r), qn) in cache.output().iter().zip(&batch.rewards).zip(&next_q) {
        let err = q - (r + gamma * qn);
        loss += err * err;
        grad.push(2.0 * err / k as f64);
    }
    let mut grads = nets.critic.zeros_like();
    nets.critic.backward(&cache, &grad, Some(&mut grads));
    (loss / k as f64, grads)
}

/// Negative mean Q of the actor's own actions and its gradient with respect
/// to the actor parameters; the critic is held fixed.
pub fn actor_gradient(nets: &Networks, batch: &Batch) -> (f64, Mlp) {
    let k = batch.len;
    let actor_cache = nets.actor.forward_cached(&batch.states, k);
    let actions: Vec<f64> = actor_cache.output().iter().map(|&a| (a + 1.0) / 2.0).collect();
    let critic_cache = nets
        .critic
        .forward_cached(&critic_input(&batch.states, &actions), k);
    let objective = -critic_cache.output().iter().sum::<f64>() / k as f64;
    let grad_q = vec![-1.0 / k as f64; k];
    let grad_in = nets.critic.backward(&critic_cache, &grad_q, None);
    let grad_actions: Vec<f64> = grad_in
        .chunks_exact(CRITIC_IN)
        .flat_map(|row| row[STATE_DIM..].iter().map(|g| 0.5 * g))
        .collect();
    let mut grads = nets.actor.zeros_like();
    nets.actor.backward(&actor_cache, &grad_actions, Some(&mut grads));
    (objective, grads)
}

pub fn critic_update(nets: &mut Networks, batch: &Batch, gamma: f64) -> Result<f64> {
    let (loss, grads) = critic_gradient(nets, batch, gamma);
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite(format!("critic loss {loss}")));
    }
    nets.critic_opt.step(&mut nets.critic, &grads);
    Ok(loss)
}

pub fn actor_update(nets: &mut Networks, batch: &Batch) -> Result<f64> {
    let (objective, grads) = actor_gradient(nets, batch);
    if !objective.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite(format!("actor objective {objective}")));
    }
    nets.actor_opt.step(&mut nets.actor, &grads);
    Ok(objective)
}

/// Actor action for a normalized state plus optional raw-scale noise.
pub fn select_action(actor: &Mlp, state: &[f64; STATE_DIM], noise: Option<[f64; ACTION_DIM]>) -> Action {
    let raw = actor.forward(state, 1);
    let n = noise.unwrap_or([0.0; ACTION_DIM]);
    Action::new(to_target(raw[0] + n[0]), to_target(raw[1] + n[1]))
}

/// An `h`-hour window inside one training range whose final hour does not
/// cut a transaction short. Windows ending inside a transaction move later
/// to include its end; windows that cannot move are redrawn.
pub fn sample_episode<R: Rng + ?Sized>(
    timeline: &Timeline,
    ranges: &[Range<usize>],
    h: usize,
    rng: &mut R,
) -> Result<Range<usize>> {
    let usable: Vec<&Range<usize>> = ranges.iter().filter(|r| r.len() >= h && h > 0).collect();
    if usable.is_empty() {
        return Err(Error::Invalid(format!("no training range spans {h} hours")));
    }
    let total: usize = usable.iter().map(|r| r.len() - h + 1).sum();
    for _ in 0..MAX_EPISODE_ATTEMPTS {
        let mut pick = rng.gen_range(0..total);
        let range = usable
            .iter()
            .find(|r| {
                let n = r.len() - h + 1;
                if pick < n {
                    true
                } else {
                    pick -= n;
                    false
                }
            })
            .expect("pick lies within total");
        let start = range.start + pick;
        if let Some(window) = adjust_window(timeline, range, start..start + h) {
            return Ok(window);
        }
    }
    Err(Error::EpisodeSampling(MAX_EPISODE_ATTEMPTS))
}

/// Applies the end-of-transaction shift rule to a candidate window.
pub fn adjust_window(timeline: &Timeline, range: &Range<usize>, window: Range<usize>) -> Option<Range<usize>> {
    match timeline.span_at(window.end - 1) {
        Some(span) if span.end > window.end => {
            let shift = span.end - window.end;
            (span.end <= range.end).then(|| window.start + shift..span.end)
        }
        _ => Some(window),
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub critic_loss: f64,
    pub actor_objective: f64,
}

pub fn write_training_log<W: Write>(writer: W, log: &[EpisodeLog]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(TRAINING_LOG_HEADER)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// A trained actor with everything needed to act and to be reloaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAgent {
    pub config: TrainConfig,
    pub seed: u64,
    pub normalizer: Normalizer,
    pub actor: Mlp,
    pub critic: Mlp,
    #[serde(skip)]
    pub log: Vec<EpisodeLog>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    agent: TrainedAgent,
}

impl TrainedAgent {
    pub fn policy(&self) -> AgentPolicy<'_> {
        AgentPolicy { agent: self }
    }

    pub fn act(&self, state: &SimState, spec: &TechnicalSpec) -> Action {
        select_action(&self.actor, &self.normalizer.apply(&state.features(spec)), None)
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        let cp = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            agent: self.clone(),
        };
        serde_json::to_writer(writer, &cp)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_reader(reader)?;
        if cp.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", cp.format)));
        }
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} not supported (expected {CHECKPOINT_VERSION})",
                cp.version
            )));
        }
        let a = cp.agent;
        let (l1, l2) = a.config.hidden;
        if a.actor.sizes() != [STATE_DIM, l1, l2, ACTION_DIM]
            || a.critic.sizes() != [CRITIC_IN, l1, l2, 1]
        {
            return Err(Error::Checkpoint("network shapes do not match the config".into()));
        }
        if !a.actor.is_finite() || !a.critic.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(a)
    }
}

/// Noise-free actor as a rollout policy.
#[derive(Debug, Clone, Copy)]
pub struct AgentPolicy<'a> {
    agent: &'a TrainedAgent,
}

impl Policy for AgentPolicy<'_> {
    fn act(&mut self, state: &SimState, spec: &TechnicalSpec) -> Action {
        self.agent.act(state, spec)
    }
}

/// Training state of one seed.
#[derive(Debug, Clone)]
pub struct Learner<'a> {
    pub timeline: &'a Timeline,
    pub ranges: Vec<Range<usize>>,
    pub config: TrainConfig,
    pub params: EnvParams,
    pub seed: u64,
    pub nets: Networks,
    pub buffer: ReplayBuffer,
    pub normalizer: Normalizer,
    pub noise: NoiseProcess,
    rng: ChaCha8Rng,
}

/// Networks with targets as exact copies and a buffer filled by uniformly
/// random actions on sampled episodes.
pub fn init<'a>(
    timeline: &'a Timeline,
    train_ranges: &[Range<usize>],
    config: &TrainConfig,
    tariff: Tariff,
    seed: u64,
) -> Result<Learner<'a>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nets = Networks::new(config, &mut rng);
    let params = EnvParams {
        spec: timeline.spec,
        tariff,
        weights: config.weights,
    };
    let mut buffer = ReplayBuffer::new(config.buffer);
    while !buffer.is_full() {
        let window = sample_episode(timeline, train_ranges, config.episode_len_h, &mut rng)?;
        let soc_b = rng.gen_range(0.0..=timeline.spec.bess_capacity_kwh);
        let mut state = build_state(timeline, window.start, soc_b, None);
        for t in window {
            let action = Action::new(rng.gen(), rng.gen());
            let outcome = step(&state, &action, &timeline.next_context(t), &params)?;
            buffer.push(transition(&state, &action, outcome.reward, &outcome.next_state, &params.spec));
            state = outcome.next_state;
            if buffer.is_full() {
                break;
            }
        }
    }
    let normalizer = Normalizer::fit(&buffer)?;
    Ok(Learner {
        timeline,
        ranges: train_ranges.to_vec(),
        config: config.clone(),
        params,
        seed,
        nets,
        buffer,
        normalizer,
        noise: NoiseProcess::new(config.noise),
        rng,
    })
}

fn transition(s: &SimState, a: &Action, reward: f64, next: &SimState, spec: &TechnicalSpec) -> Transition {
    Transition {
        state: s.features(spec),
        action: [a.target_bess, a.target_ev],
        reward,
        next_state: next.features(spec),
    }
}

impl Learner<'_> {
    /// Critic update, actor update and soft target updates on one batch.
    pub fn learn(&mut self) -> Result<(f64, f64)> {
        let items = self.buffer.sample(self.config.batch, &mut self.rng)?;
        let batch = Batch::new(&items, &self.normalizer);
        let loss = critic_update(&mut self.nets, &batch, self.config.gamma)?;
        let objective = actor_update(&mut self.nets, &batch)?;
        self.nets.soft_update(self.config.tau)?;
        Ok((loss, objective))
    }

    /// One training episode: noisy inference and one learning pass per hour.
    pub fn episode(&mut self, index: usize) -> Result<EpisodeLog> {
        let window = sample_episode(self.timeline, &self.ranges, self.config.episode_len_h, &mut self.rng)?;
        let soc_b = self.rng.gen_range(0.0..=self.params.spec.bess_capacity_kwh);
        let mut state = build_state(self.timeline, window.start, soc_b, None);
        self.noise.reset();
        let steps = window.len() as f64;
        let (mut reward, mut loss, mut objective) = (0.0, 0.0, 0.0);
        for t in window {
            let features = self.normalizer.apply(&state.features(&self.params.spec));
            let noise = self.noise.sample(&mut self.rng);
            let action = select_action(&self.nets.actor, &features, Some(noise));
            let outcome = step(&state, &action, &self.timeline.next_context(t), &self.params)?;
            self.buffer.push(transition(
                &state,
                &action,
                outcome.reward,
                &outcome.next_state,
                &self.params.spec,
            ));
            let (l, o) = self.learn()?;
            reward += outcome.reward;
            loss += l;
            objective += o;
            state = outcome.next_state;
        }
        Ok(EpisodeLog {
            episode: index,
            mean_reward: reward / steps,
            critic_loss: loss / steps,
            actor_objective: objective / steps,
        })
    }

    pub fn agent(&self, log: Vec<EpisodeLog>) -> TrainedAgent {
        TrainedAgent {
            config: self.config.clone(),
            seed: self.seed,
            normalizer: self.normalizer.clone(),
            actor: self.nets.actor.clone(),
            critic: self.nets.critic.clone(),
            log,
        }
    }
}

/// Trains one agent for `config.episodes` episodes.
pub fn train(
    timeline: &Timeline,
    train_ranges: &[Range<usize>],
    config: &TrainConfig,
    tariff: Tariff,
    seed: u64,
) -> Result<TrainedAgent> {
    train_with(timeline, train_ranges, config, tariff, seed, |_| {})
}

/// [`train`] with a callback after every episode.
pub fn train_with(
    timeline: &Timeline,
    train_ranges: &[Range<usize>],
    config: &TrainConfig,
    tariff: Tariff,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<TrainedAgent> {
    let mut learner = init(timeline, train_ranges, config, tariff, seed)?;
    let mut log = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        let row = learner.episode(e)?;
        on_episode(&row);
        log.push(row);
    }
    Ok(learner.agent(log))
}

/// Noise-free rollout over consecutive ranges, starting with an empty BESS.
pub fn evaluate(
    agent: &TrainedAgent,
    timeline: &Timeline,
    ranges: &[Range<usize>],
    tariff: Tariff,
) -> Result<RolloutResult> {
    let params = EnvParams {
        spec: timeline.spec,
        tariff,
        weights: agent.config.weights,
    };
    rollout_segments(timeline, ranges, &mut agent.policy(), &params, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub eval_profit_per_day: f64,
    pub test_profit_per_day: f64,
    pub test_discomfort: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MultiSeedResult {
    pub runs: Vec<SeedRun>,
    pub agents: Vec<TrainedAgent>,
    /// Index of the run with the highest evaluation profit.
    pub best_eval: usize,
}

impl MultiSeedResult {
    pub fn mean_test_profit_per_day(&self) -> f64 {
        self.runs.iter().map(|r| r.test_profit_per_day).sum::<f64>() / self.runs.len() as f64
    }

    pub fn best(&self) -> &SeedRun {
        &self.runs[self.best_eval]
    }

    pub fn best_agent(&self) -> &TrainedAgent {
        &self.agents[self.best_eval]
    }
}

/// Index of the largest evaluation profit; ties keep the earliest run.
pub fn best_by_eval(runs: &[SeedRun]) -> Option<usize> {
    runs.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
            Some((_, v)) if v >= r.eval_profit_per_day => best,
            _ => Some((i, r.eval_profit_per_day)),
        })
        .map(|(i, _)| i)
}

/// Trains `config.seed_count` agents with seeds `base_seed + i`, evaluates
/// each on the eval and test roles, and selects by evaluation profit.
pub fn multi_seed(
    timeline: &Timeline,
    plan: &SplitPlan,
    config: &TrainConfig,
    tariff: Tariff,
    base_seed: u64,
    mut on_seed: impl FnMut(&SeedRun),
) -> Result<MultiSeedResult> {
    if config.seed_count == 0 {
        return Err(Error::Invalid("seed_count must be positive".into()));
    }
    let origin = timeline
        .hours
        .first()
        .ok_or(Error::Empty("timeline"))?
        .timestamp;
    let train_ranges = plan.hour_ranges(Role::Train, origin);
    let eval_ranges = plan.hour_ranges(Role::Eval, origin);
    let test_ranges = plan.hour_ranges(Role::Test, origin);
    let mut runs = Vec::with_capacity(config.seed_count);
    let mut agents = Vec::with_capacity(config.seed_count);
    for i in 0..config.seed_count as u64 {
        let seed = base_seed + i;
        let agent = train(timeline, &train_ranges, config, tariff, seed)?;
        let eval = evaluate(&agent, timeline, &eval_ranges, tariff)?;
        let test = evaluate(&agent, timeline, &test_ranges, tariff)?;
        let run = SeedRun {
            seed,
            eval_profit_per_day: eval.profit_per_day,
            test_profit_per_day: test.profit_per_day,
            test_discomfort: test.discomfort_score,
        };
        on_seed(&run);
        runs.push(run);
        agents.push(agent);
    }
    let best_eval = best_by_eval(&runs).expect("at least one run");
    Ok(MultiSeedResult {
        runs,
        agents,
        best_eval,
    })
}
