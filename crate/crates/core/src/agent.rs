//! DQN training with an intrinsic-fear penalty on the Q-learning target.
//!
//! One environment step drives, in order: epsilon-greedy acting, replay
//! storage, episode labeling when the episode ends, one Q-network update on a
//! replay mini-batch, and one fear-model update on a balanced danger/safe
//! batch. With `lambda = 0` and fear training off this is plain DQN.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{Action, EnvError, Environment};
use crate::fear::FearModel;
use crate::memory::{FearBuffers, ReplayBuffer, Transition, DEFAULT_REPLAY_CAPACITY, DEFAULT_STATE_STORE_CAPACITY};
use crate::numerics::{squared_error, AdamConfig, AdamState, Gradients, Head, MlpParams, NumericsError, Shape};
use crate::seeding::component_rng;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn at(&self, t: u64) -> f64 {
        if self.decay_steps == 0 || t >= self.decay_steps {
            return self.end;
        }
        let frac = t as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Fear factor.
    pub lambda: f64,
    /// Fear radius in steps.
    pub fear_radius: usize,
    /// Steps over which the fear factor ramps from 0 to `lambda`.
    pub phase_in: u64,
    pub epsilon: EpsilonSchedule,
    pub batch_size: usize,
    pub fear_batch_size: usize,
    pub hidden: usize,
    pub q_learning_rate: f64,
    pub fear_learning_rate: f64,
    pub episodes: usize,
    /// Hard cap on environment steps across the whole run.
    pub max_total_steps: u64,
    pub replay_capacity: usize,
    pub state_store_capacity: usize,
    /// Train the fear model (off for the plain DQN baseline).
    pub train_fear: bool,
    /// Discount the bootstrap term of the fear-penalized target.
    pub discount_in_target: bool,
    pub seed: u64,
}

impl AgentConfig {
    pub fn adventure_seeker() -> Self {
        Self {
            gamma: 0.99,
            lambda: 40.0,
            fear_radius: 5,
            phase_in: 1000,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_steps: 20_000,
            },
            batch_size: 32,
            fear_batch_size: 32,
            hidden: 128,
            q_learning_rate: 1e-3,
            fear_learning_rate: 1e-3,
            episodes: 300,
            max_total_steps: u64::MAX,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            state_store_capacity: DEFAULT_STATE_STORE_CAPACITY,
            train_fear: true,
            discount_in_target: true,
            seed: 0,
        }
    }

    /// Cart-Pole pays 1 per surviving step, so any fear factor above 1 can
    /// make an early fall look better than staying up while the fear model
    /// still flags most states.
    pub fn cartpole() -> Self {
        Self {
            lambda: 1.0,
            fear_radius: 20,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_steps: 5_000,
            },
            episodes: 500,
            ..Self::adventure_seeker()
        }
    }

    /// Same configuration with intrinsic fear switched off.
    pub fn baseline(&self) -> Self {
        Self {
            lambda: 0.0,
            train_fear: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if self.phase_in == 0 {
            return bad("fear phase-in length must be positive");
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.fear_batch_size == 0 {
            return bad("batch sizes must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive");
        }
        if !(self.q_learning_rate > 0.0 && self.fear_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.replay_capacity == 0 || self.state_store_capacity == 0 {
            return bad("buffer capacities must be positive");
        }
        Ok(())
    }
}

/// Fear factor after `t` steps: `min(lambda, lambda * t / k_lambda)`.
pub fn fear_factor_at(t: u64, lambda: f64, k_lambda: u64) -> f64 {
    lambda.min(lambda * t as f64 / k_lambda as f64)
}

/// Greedy action, lowest index on ties.
pub fn greedy_action(q_values: &[f64]) -> Action {
    let mut best = 0;
    for (i, &v) in q_values.iter().enumerate().skip(1) {
        if v > q_values[best] {
            best = i;
        }
    }
    Action::from_index(best).expect("two-action Q head")
}

pub fn select_action<R: Rng + ?Sized>(
    q: &MlpParams,
    s: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<Action, NumericsError> {
    if rng.random::<f64>() < epsilon {
        return Ok(Action::ALL[rng.random_range(0..Action::ALL.len())]);
    }
    Ok(greedy_action(&q.forward(s)?))
}

/// How a target is built; fixed for one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub lambda_t: f64,
    pub gamma: f64,
    pub discount_in_target: bool,
}

/// Fear-penalized TD target.
///
/// Catastrophic transitions get `r - lambda_t`. Every other transition,
/// including one cut off by the step cap, bootstraps:
/// `r + gamma * max Q(s', .) - lambda_t * F(s')`.
pub fn compute_target(tr: &Transition, q: &MlpParams, fear: &FearModel, spec: TargetSpec) -> Result<f64, NumericsError> {
    Ok(target_with_score(tr, q, fear, spec)?.0)
}

/// Target plus the fear score that went into it (`None` when unused).
fn target_with_score(
    tr: &Transition,
    q: &MlpParams,
    fear: &FearModel,
    spec: TargetSpec,
) -> Result<(f64, Option<f64>), NumericsError> {
    if tr.catastrophe {
        return Ok((tr.r - spec.lambda_t, None));
    }
    let next_q = q.forward(&tr.s_next)?;
    let max_next = next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let discount = if spec.discount_in_target { spec.gamma } else { 1.0 };
    let mut y = tr.r + discount * max_next;
    let mut score = None;
    if spec.lambda_t != 0.0 {
        let f = fear.score(&tr.s_next)?;
        y -= spec.lambda_t * f;
        score = Some(f);
    }
    Ok((y, score))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub loss: f64,
    /// Mean fear score over the batch's bootstrapped targets, if fear was used.
    pub mean_fear: Option<f64>,
}

/// Mean squared Bellman error over `batch` with `targets` held fixed.
pub fn q_batch_loss_and_grad(
    q: &MlpParams,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<(f64, Gradients), NumericsError> {
    let mut grads = Gradients::zeros(q.shape());
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut loss = 0.0;
    let mut upstream = vec![0.0; q.shape().output];
    for (tr, &y) in batch.iter().zip(targets) {
        let cache = q.forward_cached(&tr.s)?;
        let a = tr.a.index();
        let (l, d) = squared_error(cache.output[a], y);
        loss += l * scale;
        upstream.iter_mut().for_each(|u| *u = 0.0);
        upstream[a] = d;
        q.accumulate_from_logits(&tr.s, &cache, &upstream, scale, &mut grads)?;
    }
    Ok((loss, grads))
}

/// One Adam step on the batch's mean squared Bellman error. Targets are
/// computed first from the current network and fear model and treated as
/// constants.
pub fn dqn_update(
    q: &mut MlpParams,
    opt: &mut AdamState,
    batch: &[&Transition],
    fear: &FearModel,
    spec: TargetSpec,
) -> Result<UpdateStats, NumericsError> {
    let mut targets = Vec::with_capacity(batch.len());
    let mut fear_sum = 0.0;
    let mut fear_n = 0usize;
    for tr in batch {
        let (y, f) = target_with_score(tr, q, fear, spec)?;
        targets.push(y);
        if let Some(f) = f {
            fear_sum += f;
            fear_n += 1;
        }
    }
    let (loss, grads) = q_batch_loss_and_grad(q, batch, &targets)?;
    if !batch.is_empty() {
        opt.step(q, &grads)?;
    }
    Ok(UpdateStats {
        loss,
        mean_fear: (fear_n > 0).then(|| fear_sum / fear_n as f64),
    })
}

mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Episode length.
    pub steps: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    #[serde(with = "bool_as_int")]
    pub catastrophe: bool,
    pub mean_q_loss: f64,
    pub mean_fear_loss: f64,
    pub mean_fear_score: f64,
}

pub const METRICS_HEADER: &str = "episode,steps,return,catastrophe,mean_q_loss,mean_fear_loss,mean_fear_score";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainMetrics {
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainMetrics {
    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.steps).sum()
    }

    pub fn catastrophes(&self) -> usize {
        self.episodes.iter().filter(|e| e.catastrophe).count()
    }

    /// Catastrophes among episodes with index in `range`.
    pub fn catastrophes_in(&self, range: std::ops::Range<usize>) -> usize {
        self.episodes
            .iter()
            .filter(|e| range.contains(&e.episode) && e.catastrophe)
            .count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        if self.episodes.is_empty() {
            w.write_record(METRICS_HEADER.split(','))?;
        }
        for e in &self.episodes {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(input);
        let episodes = r.deserialize().collect::<Result<Vec<EpisodeRecord>, _>>()?;
        Ok(Self { episodes })
    }
}

#[derive(Default)]
struct Running {
    sum: f64,
    n: usize,
}

impl Running {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }
}

/// Everything one training run owns.
pub struct Agent {
    pub config: AgentConfig,
    pub q: MlpParams,
    pub q_opt: AdamState,
    pub fear: FearModel,
    pub replay: ReplayBuffer,
    pub fear_buffers: FearBuffers,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    fear_rng: ChaCha8Rng,
    steps: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, state_dim: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let seed = config.seed;
        let shape = Shape::new(state_dim, config.hidden, Action::ALL.len());
        let q = MlpParams::init(shape, Head::Identity, &mut component_rng(seed, "init/q"));
        let fear = FearModel::new(
            state_dim,
            config.hidden,
            AdamConfig::with_alpha(config.fear_learning_rate),
            &mut component_rng(seed, "init/fear"),
        );
        Ok(Self {
            q_opt: AdamState::new(shape, AdamConfig::with_alpha(config.q_learning_rate)),
            q,
            fear,
            replay: ReplayBuffer::new(config.replay_capacity),
            fear_buffers: FearBuffers::new(config.state_store_capacity),
            explore_rng: component_rng(seed, "explore"),
            replay_rng: component_rng(seed, "sample/replay"),
            fear_rng: component_rng(seed, "sample/fear"),
            steps: 0,
            config,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn act(&mut self, s: &[f64]) -> Result<Action, AgentError> {
        let eps = self.config.epsilon.at(self.steps);
        Ok(select_action(&self.q, s, eps, &mut self.explore_rng)?)
    }

    /// Run one episode to termination (or until the step budget runs out).
    pub fn run_episode(&mut self, env: &mut dyn Environment, episode: usize) -> Result<EpisodeRecord, AgentError> {
        let mut s = env.reset();
        let mut visited = vec![s.clone()];
        let mut ret = 0.0;
        let mut length = 0;
        let mut catastrophe = false;
        let mut q_loss = Running::default();
        let mut fear_loss = Running::default();
        let mut fear_score = Running::default();
        while self.steps < self.config.max_total_steps {
            let a = self.act(&s)?;
            let step = env.step(a)?;
            self.steps += 1;
            length += 1;
            ret += step.reward;
            self.replay.push(Transition {
                s: s.clone(),
                a,
                r: step.reward,
                s_next: step.next_state.clone(),
                terminal: step.terminal,
                catastrophe: step.catastrophe,
            });
            if step.terminal {
                catastrophe = step.catastrophe;
                self.fear_buffers
                    .record_episode(&visited, step.catastrophe, self.config.fear_radius);
            }

            if self.replay.len() >= self.config.batch_size {
                let spec = TargetSpec {
                    lambda_t: fear_factor_at(self.steps, self.config.lambda, self.config.phase_in),
                    gamma: self.config.gamma,
                    discount_in_target: self.config.discount_in_target,
                };
                let batch = self
                    .replay
                    .sample(self.config.batch_size, &mut self.replay_rng)
                    .expect("replay holds at least one batch");
                let stats = dqn_update(&mut self.q, &mut self.q_opt, &batch, &self.fear, spec)?;
                q_loss.add(stats.loss);
                if let Some(f) = stats.mean_fear {
                    fear_score.add(f);
                }
            }
            if self.config.train_fear {
                if let Some(batch) = self
                    .fear_buffers
                    .sample_batch(self.config.fear_batch_size, &mut self.fear_rng)
                {
                    fear_loss.add(self.fear.train_step(&batch)?);
                }
            }

            if step.terminal {
                break;
            }
            s = step.next_state;
            visited.push(s.clone());
        }
        Ok(EpisodeRecord {
            episode,
            steps: length,
            episode_return: ret,
            catastrophe,
            mean_q_loss: q_loss.mean(),
            mean_fear_loss: fear_loss.mean(),
            mean_fear_score: fear_score.mean(),
        })
    }
}

/// Train for `config.episodes` episodes (or until `max_total_steps`).
pub fn train(env: &mut dyn Environment, config: &AgentConfig) -> Result<(TrainMetrics, Agent), AgentError> {
    let mut agent = Agent::new(config.clone(), env.state_dim())?;
    let mut metrics = TrainMetrics::default();
    for episode in 0..config.episodes {
        if agent.steps >= config.max_total_steps {
            break;
        }
        metrics.episodes.push(agent.run_episode(env, episode)?);
    }
    Ok((metrics, agent))
}
