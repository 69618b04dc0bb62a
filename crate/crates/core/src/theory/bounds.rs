//! Evaluated inequality chains for the fear-shaping return guarantees.

use std::fmt::Write as _;
use std::io;

use super::lookup::{shape_with_fear, LookupFear};
use super::occupancy::occupancy_lp;
use super::solve::{policy_evaluation, stationary_distribution, value_iteration};
use super::{Policy, TabularMdp, TheoryError};

/// Slack tolerance for the average-reward chain.
pub const THEOREM1_TOL: f64 = 1e-8;
/// Tolerance for the nonnegativity of the return loss.
pub const LOSS_TOL: f64 = 1e-9;
/// Tolerance for the decomposition bounds.
pub const DECOMPOSITION_TOL: f64 = 1e-8;
/// Value-iteration stopping threshold used by the checks.
pub const VI_TOL: f64 = 1e-12;

/// One evaluated inequality `lhs <= rhs` or `lhs >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Positive when the inequality holds strictly.
    pub slack: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_least(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tol,
        }
    }

    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundReport {
    pub title: String,
    /// Named scalars computed along the way (not gated).
    pub quantities: Vec<(String, f64)>,
    pub checks: Vec<Check>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn quantity(&self, name: &str) -> Option<f64> {
        self.quantities.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Smallest slack across checks.
    pub fn min_slack(&self) -> f64 {
        self.checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.title);
        for (name, v) in &self.quantities {
            let _ = writeln!(out, "  {name} = {v:.12}");
        }
        for c in &self.checks {
            let verdict = if c.pass { "ok" } else { "FAILED" };
            let _ = writeln!(
                out,
                "  [{verdict}] {}: lhs {:.12} rhs {:.12} slack {:.3e}",
                c.name, c.lhs, c.rhs, c.slack
            );
        }
        out
    }

    /// One row per check: `name,lhs,rhs,slack,pass`.
    pub fn write_csv<W: io::Write>(&self, out: W, header: bool) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if header {
            w.write_record(["name", "lhs", "rhs", "slack", "pass"])?;
        }
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                format!("{:e}", c.lhs),
                format!("{:e}", c.rhs),
                format!("{:e}", c.slack),
                u8::from(c.pass).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Average-reward chain with indicator fear on the danger zone and penalty
/// `lambda`.
pub fn verify_theorem1(mdp: &TabularMdp, lambda: f64) -> Result<BoundReport, TheoryError> {
    theorem1_with_penalty(mdp, lambda, lambda)
}

/// As [`verify_theorem1`], with the penalty scaled by the reward range
/// `R_max - R_min`.
pub fn verify_theorem1_range_scaled(mdp: &TabularMdp, lambda: f64) -> Result<BoundReport, TheoryError> {
    let (lo, hi) = mdp.reward_range();
    theorem1_with_penalty(mdp, lambda, lambda * (hi - lo))
}

fn theorem1_with_penalty(mdp: &TabularMdp, lambda: f64, penalty: f64) -> Result<BoundReport, TheoryError> {
    let fear = LookupFear::indicator(mdp);
    let shaped = shape_with_fear(mdp, &fear, penalty)?;
    let best = occupancy_lp(mdp)?;
    let feared = occupancy_lp(&shaped)?;

    let eta_best = best.eta_star;
    let eps = best.danger_mass;
    let eta_feared = feared.measure.value(mdp.rewards());
    let eta_feared_shaped = feared.measure.value(shaped.rewards());
    let floor = eta_best - penalty * eps;

    let tol = THEOREM1_TOL;
    Ok(BoundReport {
        title: format!("average-reward chain, lambda = {lambda}"),
        quantities: vec![
            ("lambda".into(), lambda),
            ("penalty".into(), penalty),
            ("epsilon".into(), eps),
            ("eta_optimal".into(), eta_best),
            ("eta_feared".into(), eta_feared),
            ("eta_feared_shaped".into(), eta_feared_shaped),
            ("eta_floor".into(), floor),
        ],
        checks: vec![
            Check::at_least("optimal >= feared", eta_best, eta_feared, tol),
            Check::at_least("feared >= feared shaped", eta_feared, eta_feared_shaped, tol),
            Check::at_least("feared shaped >= optimal - penalty*epsilon", eta_feared_shaped, floor, tol),
        ],
    })
}

/// Inputs of the discounted imperfect-classifier check.
#[derive(Debug, Clone)]
pub struct Theorem2Input<'a> {
    pub mdp: &'a TabularMdp,
    pub fear: &'a LookupFear,
    pub fear_hat: &'a LookupFear,
    pub gamma: f64,
    pub gamma_plan: f64,
    pub lambda: f64,
    /// Weighting over states; the stationary distribution of the planned
    /// policy when absent.
    pub start: Option<&'a [f64]>,
}

/// Rewards `(R - lambda f + lambda) / (1 + lambda)`, which lie in `[0, 1]`
/// and rank policies exactly as `R - lambda f` does.
fn normalized_shaping(mdp: &TabularMdp, fear: &LookupFear, lambda: f64) -> Result<TabularMdp, TheoryError> {
    let shaped = shape_with_fear(mdp, fear, lambda)?;
    let rewards = shaped.rewards().iter().map(|r| (r + lambda) / (1.0 + lambda)).collect();
    mdp.with_rewards(rewards)
}

/// Planned policy and measured return loss, in normalized reward units.
struct Theorem2Core {
    loss: f64,
    first: Vec<f64>,
    second: Vec<f64>,
}

fn theorem2_core(input: &Theorem2Input<'_>) -> Result<Theorem2Core, TheoryError> {
    let Theorem2Input {
        mdp,
        fear,
        fear_hat,
        gamma,
        gamma_plan,
        lambda,
        start,
    } = *input;
    if !(0.0..1.0).contains(&gamma) {
        return Err(TheoryError::InvalidArgument(format!("discount {gamma} must lie in [0, 1)")));
    }
    if !(0.0..=gamma).contains(&gamma_plan) {
        return Err(TheoryError::InvalidArgument(format!(
            "planning discount {gamma_plan} must lie in [0, {gamma}]"
        )));
    }
    let true_mdp = normalized_shaping(mdp, fear, lambda)?;
    let plan_mdp = normalized_shaping(mdp, fear_hat, lambda)?;
    let a_n = mdp.n_actions();

    let (_, opt_actions) = value_iteration(&true_mdp, gamma, VI_TOL)?;
    let (_, plan_actions) = value_iteration(&plan_mdp, gamma_plan, VI_TOL)?;
    let opt = Policy::deterministic(&opt_actions, a_n);
    let plan = Policy::deterministic(&plan_actions, a_n);

    let v_opt = policy_evaluation(&true_mdp, &opt, gamma)?;
    let v_opt_plan_discount = policy_evaluation(&true_mdp, &opt, gamma_plan)?;
    let v_plan = policy_evaluation(&true_mdp, &plan, gamma)?;

    let weights = match start {
        Some(w) if w.len() == mdp.n_states() => w.to_vec(),
        Some(_) => return Err(TheoryError::InvalidArgument("start distribution length".into())),
        None => stationary_distribution(mdp, &plan)?,
    };
    let loss = (1.0 - gamma)
        * weights
            .iter()
            .zip(v_opt.iter().zip(&v_plan))
            .map(|(w, (a, b))| w * (a - b))
            .sum::<f64>();
    let first = v_opt.iter().zip(&v_opt_plan_discount).map(|(a, b)| a - b).collect();
    let second = v_opt_plan_discount.iter().zip(&v_plan).map(|(a, b)| a - b).collect();
    Ok(Theorem2Core { loss, first, second })
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Discounted return loss from planning with `fear_hat` at `gamma_plan`,
/// checked against its two-term decomposition.
///
/// Shaped rewards are rescaled into `[0, 1]` before the comparison, so the
/// effective penalty is `lambda / (1 + lambda)`; the unscaled loss is
/// `1 + lambda` times the reported one.
pub fn verify_theorem2(input: &Theorem2Input<'_>) -> Result<BoundReport, TheoryError> {
    let core = theorem2_core(input)?;
    let Theorem2Input {
        fear,
        fear_hat,
        gamma,
        gamma_plan,
        lambda,
        ..
    } = *input;
    let lambda_norm = lambda / (1.0 + lambda);
    let deviation = fear.max_deviation(fear_hat);

    let first_max = max_of(&core.first);
    let second_max = max_of(&core.second);
    let horizon_bound = (gamma - gamma_plan) / ((1.0 - gamma_plan) * (1.0 - gamma));
    let classifier_bound = 2.0 * lambda_norm * deviation / (1.0 - gamma_plan);
    let classifier_bound_loose = 2.0 * lambda * deviation / (1.0 - gamma_plan);
    let loss_bound = (1.0 - gamma) * (horizon_bound + classifier_bound);
    let loss_bound_plan_prefactor = (1.0 - gamma_plan) * (horizon_bound + classifier_bound);

    let mut checks = vec![
        Check::at_least("loss >= 0", core.loss, 0.0, LOSS_TOL),
        Check::at_most("horizon term <= horizon bound", first_max, horizon_bound, DECOMPOSITION_TOL),
        Check::at_most(
            "classifier term <= 2 lambda' dev / (1 - gamma_plan)",
            second_max,
            classifier_bound,
            DECOMPOSITION_TOL,
        ),
        Check::at_most(
            "classifier term <= 2 lambda dev / (1 - gamma_plan)",
            second_max,
            classifier_bound_loose,
            DECOMPOSITION_TOL,
        ),
        Check::at_most("loss <= (1 - gamma) * decomposition bound", core.loss, loss_bound, DECOMPOSITION_TOL),
    ];
    let per_state_gap = core.first.iter().zip(&core.second).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most(
        "per-state gap <= horizon bound + classifier bound",
        per_state_gap,
        horizon_bound + classifier_bound,
        DECOMPOSITION_TOL,
    ));

    Ok(BoundReport {
        title: format!("discounted classifier bound, gamma = {gamma}, gamma_plan = {gamma_plan}, lambda = {lambda}"),
        quantities: vec![
            ("loss".into(), core.loss),
            ("loss_unscaled".into(), core.loss * (1.0 + lambda)),
            ("lambda_normalized".into(), lambda_norm),
            ("max_fear_deviation".into(), deviation),
            ("horizon_term_max".into(), first_max),
            ("classifier_term_max".into(), second_max),
            ("horizon_bound".into(), horizon_bound),
            ("classifier_bound".into(), classifier_bound),
            ("loss_bound".into(), loss_bound),
            ("loss_bound_plan_prefactor".into(), loss_bound_plan_prefactor),
        ],
        checks,
    })
}

/// Measured loss at each planning discount in `grid`, and the minimizer.
/// Ties within `1e-12` go to the larger planning discount.
pub fn sweep_gamma_plan(
    input: &Theorem2Input<'_>,
    grid: &[f64],
) -> Result<(f64, Vec<(f64, f64)>), TheoryError> {
    if grid.is_empty() {
        return Err(TheoryError::InvalidArgument("empty planning-discount grid".into()));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &g in grid {
        let core = theorem2_core(&Theorem2Input { gamma_plan: g, ..input.clone() })?;
        curve.push((g, core.loss));
    }
    let mut best = curve[0];
    for &(g, l) in &curve[1..] {
        if l < best.1 - 1e-12 || (l <= best.1 + 1e-12 && g > best.0) {
            best = (g, l);
        }
    }
    Ok((best.0, curve))
}
