//! Exact tabular machinery for checking the intrinsic-fear return guarantees
//! on small MDPs: dynamic programming, stationary distributions, the
//! occupancy-measure linear program, fear shaping with lookup-table
//! classifiers, and the evaluated inequality chains.

pub mod bounds;
pub mod lookup;
pub mod occupancy;
pub mod simplex;
pub mod solve;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

pub use bounds::{
    sweep_gamma_plan, verify_theorem1, verify_theorem1_range_scaled, verify_theorem2, BoundReport, Check,
    Theorem2Input,
};
pub use lookup::{corrupt_lookup, hoeffding_radius, shape_with_fear, Corruption, LookupFear};
pub use occupancy::{occupancy_lp, OccupancyMeasure, OccupancySolution};
pub use solve::{
    average_return, discounted_average_return, policy_evaluation, stationary_distribution, value_iteration,
};

/// Tolerance on transition-row sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stationary distribution is not unique: closed classes {classes:?}")]
    NotUnichain { classes: Vec<Vec<usize>> },
    #[error("discount {0} requires the average-reward path")]
    DiscountTooLarge(f64),
    #[error("singular linear system")]
    Singular,
    #[error("occupancy LP failed: {0}")]
    Lp(#[from] simplex::LpError),
}

/// Finite MDP with a designated danger zone.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `T[s][a][s']`, flattened.
    transitions: Vec<f64>,
    /// `R[s][a]`, flattened.
    rewards: Vec<f64>,
    pub gamma: f64,
    pub danger: Vec<bool>,
}

impl TabularMdp {
    /// Validated constructor. Rewards must lie in `[0, 1]`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        danger: Vec<bool>,
    ) -> Result<Self, TheoryError> {
        let mdp = Self::new_unchecked_rewards(n_states, n_actions, transitions, rewards, gamma, danger)?;
        if let Some(r) = mdp.rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(TheoryError::InvalidMdp(format!("reward {r} outside [0, 1]")));
        }
        Ok(mdp)
    }

    /// Constructor for shaped MDPs: rewards need only be finite.
    pub fn new_unchecked_rewards(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        danger: Vec<bool>,
    ) -> Result<Self, TheoryError> {
        let bad = |m: String| Err(TheoryError::InvalidMdp(m));
        if n_states == 0 || n_actions == 0 {
            return bad("need at least one state and one action".into());
        }
        if transitions.len() != n_states * n_actions * n_states {
            return bad(format!("transition tensor has {} entries", transitions.len()));
        }
        if rewards.len() != n_states * n_actions {
            return bad(format!("reward matrix has {} entries", rewards.len()));
        }
        if danger.len() != n_states {
            return bad(format!("danger mask has {} entries", danger.len()));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return bad(format!("discount {gamma} outside [0, 1]"));
        }
        for (k, row) in transitions.chunks_exact(n_states).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0)) {
                return bad(format!("negative transition probability in row {k}"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return bad(format!("row {k} sums to {sum}"));
            }
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return bad("non-finite reward".into());
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            gamma,
            danger,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn reward_range(&self) -> (f64, f64) {
        let lo = self.rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Copy with rewards replaced (dynamics and danger zone kept).
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self, TheoryError> {
        Self::new_unchecked_rewards(
            self.n_states,
            self.n_actions,
            self.transitions.clone(),
            rewards,
            self.gamma,
            self.danger.clone(),
        )
    }

    /// State-to-state matrix `P[s][s'] = sum_a pi(a|s) T(s'|s,a)`, row-major.
    pub fn chain(&self, policy: &Policy) -> Vec<f64> {
        let n = self.n_states;
        let mut p = vec![0.0; n * n];
        for s in 0..n {
            for a in 0..self.n_actions {
                let w = policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                for (dst, t) in p[s * n..(s + 1) * n].iter_mut().zip(self.transition_row(s, a)) {
                    *dst += w * t;
                }
            }
        }
        p
    }

    /// Expected one-step reward under `policy`.
    pub fn policy_rewards(&self, policy: &Policy) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| (0..self.n_actions).map(|a| policy.prob(s, a) * self.reward(s, a)).sum())
            .collect()
    }
}

/// Stationary policy `pi(a|s)`, stored as an `S x A` row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self { n_actions, probs }
    }

    pub fn from_probs(probs: Vec<f64>, n_actions: usize) -> Result<Self, TheoryError> {
        if n_actions == 0 || probs.len() % n_actions != 0 {
            return Err(TheoryError::InvalidArgument("policy shape".into()));
        }
        for row in probs.chunks_exact(n_actions) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(TheoryError::InvalidArgument("policy rows must be distributions".into()));
            }
        }
        Ok(Self { n_actions, probs })
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    /// Action chosen with certainty in each state, if the policy is deterministic.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        self.probs
            .chunks_exact(self.n_actions)
            .map(|row| row.iter().position(|&p| p == 1.0))
            .collect()
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<(), TheoryError> {
        if self.n_actions != mdp.n_actions || self.n_states() != mdp.n_states {
            return Err(TheoryError::InvalidArgument("policy does not match MDP shape".into()));
        }
        Ok(())
    }
}

/// Random MDP: Dirichlet(1) transition rows, uniform `[0, 1]` rewards and a
/// danger zone of one or two uniformly chosen states.
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, gamma: f64) -> TabularMdp {
    let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let row: Vec<f64> = (0..n_states).map(|_| Exp1.sample(rng)).collect();
        let sum: f64 = row.iter().sum();
        transitions.extend(row.iter().map(|x: &f64| x / sum));
    }
    let rewards = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let mut danger = vec![false; n_states];
    let size = rng.random_range(1..=2usize).min(n_states);
    let mut marked = 0;
    while marked < size {
        let s = rng.random_range(0..n_states);
        if !danger[s] {
            danger[s] = true;
            marked += 1;
        }
    }
    fix_row_sums(&mut transitions, n_states);
    TabularMdp::new(n_states, n_actions, transitions, rewards, gamma, danger).expect("generated MDP is valid")
}

/// Random instance with `2 <= S <= 6` states and `1 <= A <= 3` actions.
pub fn random_small_mdp<R: Rng + ?Sized>(rng: &mut R, gamma: f64) -> TabularMdp {
    let s = rng.random_range(2..=6);
    let a = rng.random_range(1..=3);
    random_mdp(rng, s, a, gamma)
}

/// Push rounding residue into the largest entry so each row sums to one.
fn fix_row_sums(transitions: &mut [f64], n_states: usize) {
    for row in transitions.chunks_exact_mut(n_states) {
        let sum: f64 = row.iter().sum();
        let (imax, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        row[imax] += 1.0 - sum;
    }
}

/// Uniformly random stochastic policy (Dirichlet(1) rows).
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> Policy {
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let row: Vec<f64> = (0..n_actions).map(|_| Exp1.sample(rng)).collect();
        let sum: f64 = row.iter().sum();
        probs.extend(row.iter().map(|x: &f64| x / sum));
    }
    Policy { n_actions, probs }
}
