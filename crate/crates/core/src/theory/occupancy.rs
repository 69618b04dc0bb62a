//! Average-reward optimization over state-action occupancy measures.

use super::simplex::{maximize_lexicographic, StandardLp};
use super::{Policy, TabularMdp, TheoryError};

/// Pivot tolerance for the occupancy program.
const LP_TOL: f64 = 1e-11;

/// Stationary state-action distribution, `mu[s * A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    pub n_actions: usize,
    pub mu: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.mu[s * self.n_actions + a]
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        self.mu.chunks_exact(self.n_actions).map(|row| row.iter().sum()).collect()
    }

    /// `sum_{s,a} mu(s, a) R(s, a)`.
    pub fn value(&self, rewards: &[f64]) -> f64 {
        self.mu.iter().zip(rewards).map(|(m, r)| m * r).sum()
    }

    /// Mass on states flagged in `mask`.
    pub fn mass_on(&self, mask: &[bool]) -> f64 {
        self.state_marginal().iter().zip(mask).filter(|(_, d)| **d).map(|(m, _)| m).sum()
    }

    /// Largest violation of nonnegativity, normalization or flow balance.
    pub fn feasibility_gap(&self, mdp: &TabularMdp) -> f64 {
        let n = mdp.n_states();
        let a_n = mdp.n_actions();
        let mut gap = self.mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max);
        gap = gap.max((self.mu.iter().sum::<f64>() - 1.0).abs());
        let marginal = self.state_marginal();
        for t in 0..n {
            let inflow: f64 = (0..n)
                .flat_map(|s| (0..a_n).map(move |a| (s, a)))
                .map(|(s, a)| self.get(s, a) * mdp.transition_row(s, a)[t])
                .sum();
            gap = gap.max((marginal[t] - inflow).abs());
        }
        gap
    }

    /// `pi(a|s) = mu(s, a) / sum_a mu(s, a)`; states without mass take action 0.
    pub fn policy(&self) -> Policy {
        let mut probs = Vec::with_capacity(self.mu.len());
        for row in self.mu.chunks_exact(self.n_actions) {
            let total: f64 = row.iter().sum();
            if total > 1e-12 {
                probs.extend(row.iter().map(|m| m / total));
            } else {
                probs.push(1.0);
                probs.extend(std::iter::repeat_n(0.0, self.n_actions - 1));
            }
        }
        Policy::from_probs(probs, self.n_actions).expect("normalized rows")
    }
}

#[derive(Debug, Clone)]
pub struct OccupancySolution {
    /// Optimal long-run average reward.
    pub eta_star: f64,
    pub measure: OccupancyMeasure,
    pub policy: Policy,
    /// Danger-zone mass of the chosen optimum (the smallest among optima).
    pub danger_mass: f64,
}

/// Maximize average reward over the occupancy polytope. Among optimal
/// measures the one with least mass on `mdp.danger` is returned.
pub fn occupancy_lp(mdp: &TabularMdp) -> Result<OccupancySolution, TheoryError> {
    let n = mdp.n_states();
    let a_n = mdp.n_actions();
    let vars = n * a_n;
    let mut a = Vec::with_capacity(n + 1);
    for t in 0..n {
        let mut row = vec![0.0; vars];
        for s in 0..n {
            for act in 0..a_n {
                let k = s * a_n + act;
                row[k] -= mdp.transition_row(s, act)[t];
                if s == t {
                    row[k] += 1.0;
                }
            }
        }
        a.push(row);
    }
    a.push(vec![1.0; vars]);
    let mut b = vec![0.0; n];
    b.push(1.0);

    let reward = mdp.rewards().to_vec();
    let danger: Vec<f64> = (0..vars).map(|k| if mdp.danger[k / a_n] { -1.0 } else { 0.0 }).collect();
    let sol = maximize_lexicographic(&StandardLp { a, b }, &[reward, danger], LP_TOL)?;

    let measure = OccupancyMeasure { n_actions: a_n, mu: sol.x };
    Ok(OccupancySolution {
        eta_star: measure.value(mdp.rewards()),
        danger_mass: measure.mass_on(&mdp.danger),
        policy: measure.policy(),
        measure,
    })
}
