//! Lookup-table fear models and their corruption.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{TabularMdp, TheoryError};

/// Per-state fear values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupFear {
    values: Vec<f64>,
}

impl LookupFear {
    pub fn new(values: Vec<f64>) -> Result<Self, TheoryError> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(TheoryError::InvalidArgument(format!("fear value {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    /// Indicator of the MDP's danger zone.
    pub fn indicator(mdp: &TabularMdp) -> Self {
        Self {
            values: mdp.danger.iter().map(|&d| f64::from(u8::from(d))).collect(),
        }
    }

    pub fn constant(n_states: usize, value: f64) -> Result<Self, TheoryError> {
        Self::new(vec![value; n_states])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max_s |F(s) - G(s)|`.
    pub fn max_deviation(&self, other: &LookupFear) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `R'(s, a) = R(s, a) - penalty * f(s)`, dynamics unchanged.
pub fn shape_with_fear(mdp: &TabularMdp, fear: &LookupFear, penalty: f64) -> Result<TabularMdp, TheoryError> {
    if !(penalty >= 0.0) {
        return Err(TheoryError::InvalidArgument(format!("penalty {penalty} must be nonnegative")));
    }
    if fear.len() != mdp.n_states() {
        return Err(TheoryError::InvalidArgument("fear table length".into()));
    }
    let a_n = mdp.n_actions();
    let rewards = mdp
        .rewards()
        .iter()
        .enumerate()
        .map(|(k, r)| r - penalty * fear.values[k / a_n])
        .collect();
    mdp.with_rewards(rewards)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Corruption {
    /// Replace each entry `f` by `1 - f` with this probability.
    Flip(f64),
    /// Replace each entry by the mean of this many Bernoulli(f) draws.
    Estimate(u64),
}

pub fn corrupt_lookup<R: Rng + ?Sized>(
    fear: &LookupFear,
    mode: Corruption,
    rng: &mut R,
) -> Result<LookupFear, TheoryError> {
    let values = match mode {
        Corruption::Flip(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(TheoryError::InvalidArgument(format!("flip probability {p}")));
            }
            fear.values
                .iter()
                .map(|&f| if rng.random::<f64>() < p { 1.0 - f } else { f })
                .collect()
        }
        Corruption::Estimate(n) => {
            if n == 0 {
                return Err(TheoryError::InvalidArgument("estimate needs at least one draw".into()));
            }
            fear.values
                .iter()
                .map(|&f| {
                    let hits = Binomial::new(n, f).expect("f in [0, 1]").sample(rng);
                    hits as f64 / n as f64
                })
                .collect()
        }
    };
    Ok(LookupFear { values })
}

/// Deviation radius `sqrt(ln(N / delta) / N(s))` for a lookup entry seen
/// `visits` times by time step `horizon`.
pub fn hoeffding_radius(horizon: u64, visits: u64, delta: f64) -> f64 {
    ((horizon as f64 / delta).ln() / visits as f64).sqrt()
}
