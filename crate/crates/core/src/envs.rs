//! Episodic toy environments: Adventure Seeker and Cart-Pole.
//!
//! Both report catastrophe as a terminal flag distinct from ordinary
//! termination (the step cap), so downstream labeling can tell a fall from a
//! survived episode.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::seeding::component_rng;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid action {0}: expected -1 or +1")]
    InvalidAction(i64),
    #[error("unknown environment `{0}` (expected `adventure-seeker` or `cartpole`)")]
    UnknownEnv(String),
    #[error("step called on a finished episode; call reset first")]
    EpisodeOver,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Binary action, `-1` (left) or `+1` (right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Left, Action::Right];

    pub fn sign(self) -> f64 {
        match self {
            Action::Left => -1.0,
            Action::Right => 1.0,
        }
    }

    /// Network output index: `-1 -> 0`, `+1 -> 1`.
    pub fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        match i {
            0 => Some(Action::Left),
            1 => Some(Action::Right),
            _ => None,
        }
    }
}

impl TryFrom<i64> for Action {
    type Error = EnvError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Action::Left),
            1 => Ok(Action::Right),
            other => Err(EnvError::InvalidAction(other)),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sign() as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub catastrophe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    AdventureSeeker,
    CartPole,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::AdventureSeeker => "adventure-seeker",
            EnvId::CartPole => "cartpole",
        }
    }

    /// Fresh environment whose noise stream derives from `seed`.
    pub fn make(self, seed: u64) -> Box<dyn Environment + Send> {
        match self {
            EnvId::AdventureSeeker => Box::new(AdventureSeeker::new(seed)),
            EnvId::CartPole => Box::new(CartPole::new(seed)),
        }
    }
}

impl FromStr for EnvId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adventure-seeker" => Ok(EnvId::AdventureSeeker),
            "cartpole" => Ok(EnvId::CartPole),
            other => Err(EnvError::UnknownEnv(other.to_string())),
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub trait Environment {
    fn id(&self) -> EnvId;
    fn state_dim(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: Action) -> Result<StepResult, EnvError>;
}

// ---------------------------------------------------------------------------
// Adventure Seeker

pub const ADVENTURE_START_LOW: f64 = 0.25;
pub const ADVENTURE_START_HIGH: f64 = 0.75;
pub const ADVENTURE_MOVE: f64 = 0.01;
pub const ADVENTURE_NOISE_STD: f64 = 0.01;
/// Steps after which a surviving episode ends without catastrophe.
pub const ADVENTURE_STEP_CAP: usize = 1000;

/// Start position for a unit draw `u` in `[0, 1]`.
pub fn adventure_start(u: f64) -> f64 {
    ADVENTURE_START_LOW + (ADVENTURE_START_HIGH - ADVENTURE_START_LOW) * u
}

/// One transition with explicit noise `eta`. Reward is the pre-move height.
pub fn adventure_transition(s: f64, action: Action, eta: f64) -> StepResult {
    let next = s + ADVENTURE_MOVE * action.sign() + eta;
    let catastrophe = !(0.0..=1.0).contains(&next);
    StepResult {
        next_state: vec![next],
        reward: s,
        terminal: catastrophe,
        catastrophe,
    }
}

/// Player on a hill sloping up to the right; falling off either edge is the
/// catastrophe.
#[derive(Debug, Clone)]
pub struct AdventureSeeker {
    position: f64,
    steps: usize,
    step_cap: usize,
    done: bool,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
}

impl AdventureSeeker {
    pub fn new(seed: u64) -> Self {
        Self::with_step_cap(seed, ADVENTURE_STEP_CAP)
    }

    pub fn with_step_cap(seed: u64, step_cap: usize) -> Self {
        Self {
            position: 0.5,
            steps: 0,
            step_cap,
            done: true,
            rng: component_rng(seed, "env/adventure-seeker"),
            noise: Normal::new(0.0, ADVENTURE_NOISE_STD).expect("valid std"),
        }
    }

    pub fn position(&self) -> f64 {
        self.position
    }
}

impl Environment for AdventureSeeker {
    fn id(&self) -> EnvId {
        EnvId::AdventureSeeker
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Vec<f64> {
        self.position = adventure_start(self.rng.random::<f64>());
        self.steps = 0;
        self.done = false;
        vec![self.position]
    }

    fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let eta = self.noise.sample(&mut self.rng);
        let mut out = adventure_transition(self.position, action, eta);
        self.steps += 1;
        self.position = out.next_state[0];
        if !out.terminal && self.steps >= self.step_cap {
            out.terminal = true;
        }
        self.done = out.terminal;
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Cart-Pole

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const CARTPOLE_STEP_CAP: usize = 200;
pub const CARTPOLE_INIT_BOUND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub v: f64,
    pub theta: f64,
    pub omega: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.v, self.theta, self.omega]
    }

    /// Map four unit draws in `[0, 1]` to the initial box `[-0.05, 0.05]^4`.
    pub fn from_unit(u: [f64; 4]) -> Self {
        let m = |u: f64| -CARTPOLE_INIT_BOUND + 2.0 * CARTPOLE_INIT_BOUND * u;
        Self {
            x: m(u[0]),
            v: m(u[1]),
            theta: m(u[2]),
            omega: m(u[3]),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.x.abs() > X_THRESHOLD || self.theta.abs() > THETA_THRESHOLD
    }
}

/// One explicit-Euler step of the cart-pole equations of motion.
pub fn cartpole_dynamics(s: CartPoleState, action: Action) -> CartPoleState {
    let total_mass = CART_MASS + POLE_MASS;
    let pole_mass_length = POLE_MASS * POLE_HALF_LENGTH;
    let force = FORCE_MAG * action.sign();
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pole_mass_length * s.omega * s.omega * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;
    CartPoleState {
        x: s.x + TAU * s.v,
        v: s.v + TAU * x_acc,
        theta: s.theta + TAU * s.omega,
        omega: s.omega + TAU * theta_acc,
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    state: CartPoleState,
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        Self {
            state: CartPoleState::from_unit([0.5; 4]),
            steps: 0,
            done: true,
            rng: component_rng(seed, "env/cartpole"),
        }
    }

    /// Start an episode from an explicit state.
    pub fn reset_to(&mut self, state: CartPoleState) -> Vec<f64> {
        self.state = state;
        self.steps = 0;
        self.done = false;
        state.to_vec()
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }
}

impl Environment for CartPole {
    fn id(&self) -> EnvId {
        EnvId::CartPole
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Vec<f64> {
        let u: [f64; 4] = std::array::from_fn(|_| self.rng.random::<f64>());
        self.reset_to(CartPoleState::from_unit(u))
    }

    fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        self.state = cartpole_dynamics(self.state, action);
        self.steps += 1;
        let catastrophe = self.state.is_failed();
        let capped = !catastrophe && self.steps >= CARTPOLE_STEP_CAP;
        self.done = catastrophe || capped;
        Ok(StepResult {
            next_state: self.state.to_vec(),
            // the falling transition earns nothing
            reward: if catastrophe { 0.0 } else { 1.0 },
            terminal: self.done,
            catastrophe,
        })
    }
}

// ---------------------------------------------------------------------------
// Trajectory dumps

/// CSV writer for `episode, t, s0..sN, action, reward, terminal, catastrophe`.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W, state_dim: usize) -> Result<Self, EnvError> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec!["episode".to_string(), "t".to_string()];
        header.extend((0..state_dim).map(|i| format!("s{i}")));
        header.extend(["action", "reward", "terminal", "catastrophe"].map(String::from));
        inner.write_record(&header)?;
        Ok(Self { inner })
    }

    pub fn record(
        &mut self,
        episode: usize,
        t: usize,
        state: &[f64],
        action: Action,
        step: &StepResult,
    ) -> Result<(), EnvError> {
        let mut row = vec![episode.to_string(), t.to_string()];
        row.extend(state.iter().map(|x| x.to_string()));
        row.push(action.to_string());
        row.push(step.reward.to_string());
        row.push(u8::from(step.terminal).to_string());
        row.push(u8::from(step.catastrophe).to_string());
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, EnvError> {
        self.inner.flush().map_err(csv::Error::from)?;
        self.inner
            .into_inner()
            .map_err(|e| EnvError::Csv(csv::Error::from(e.into_error())))
    }
}
