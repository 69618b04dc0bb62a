//! Dynamic programming and Markov-chain quantities on a [`TabularMdp`].

use nalgebra::{DMatrix, DVector};

use super::{Policy, TabularMdp, TheoryError};

/// Optimal discounted values by value iteration, stopping once the sup-norm
/// change between sweeps is at most `tol`. The greedy policy breaks ties
/// toward the lowest action index.
pub fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64) -> Result<(Vec<f64>, Vec<usize>), TheoryError> {
    if gamma >= 1.0 {
        return Err(TheoryError::DiscountTooLarge(gamma));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(TheoryError::InvalidArgument(format!("discount {gamma}")));
    }
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    loop {
        let (next, _) = bellman_sweep(mdp, gamma, &v);
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta <= tol {
            break;
        }
    }
    let (_, policy) = bellman_sweep(mdp, gamma, &v);
    Ok((v, policy))
}

fn q_value(mdp: &TabularMdp, gamma: f64, v: &[f64], s: usize, a: usize) -> f64 {
    let future: f64 = mdp.transition_row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
    mdp.reward(s, a) + gamma * future
}

fn bellman_sweep(mdp: &TabularMdp, gamma: f64, v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    (0..mdp.n_states())
        .map(|s| {
            let mut best = (q_value(mdp, gamma, v, s, 0), 0);
            for a in 1..mdp.n_actions() {
                let q = q_value(mdp, gamma, v, s, a);
                if q > best.0 {
                    best = (q, a);
                }
            }
            best
        })
        .unzip()
}

/// Exact discounted values of `policy` from `(I - gamma P) V = r`.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &Policy, gamma: f64) -> Result<Vec<f64>, TheoryError> {
    policy.check_against(mdp)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(TheoryError::DiscountTooLarge(gamma));
    }
    let n = mdp.n_states();
    let p = DMatrix::from_row_slice(n, n, &mdp.chain(policy));
    let a = DMatrix::identity(n, n) - p * gamma;
    let r = DVector::from_vec(mdp.policy_rewards(policy));
    let v = a.lu().solve(&r).ok_or(TheoryError::Singular)?;
    Ok(v.iter().copied().collect())
}

/// Closed communicating classes of a chain given row-major `p`.
pub fn closed_classes(p: &[f64], n: usize) -> Vec<Vec<usize>> {
    let mut reach = vec![false; n * n];
    for i in 0..n {
        reach[i * n + i] = true;
        for j in 0..n {
            if p[i * n + j] > 0.0 {
                reach[i * n + j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i * n + k] {
                for j in 0..n {
                    if reach[k * n + j] {
                        reach[i * n + j] = true;
                    }
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; n];
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i * n + j] && reach[j * n + i]).collect();
        class.iter().for_each(|&j| seen[j] = true);
        // closed iff nothing reachable from it lies outside
        let closed = (0..n).all(|j| !reach[i * n + j] || class.contains(&j));
        if closed {
            classes.push(class);
        }
    }
    classes
}

/// Stationary distribution of the chain induced by `policy`.
///
/// Fails when the chain has more than one closed class, since the
/// distribution is then not unique.
pub fn stationary_distribution(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>, TheoryError> {
    policy.check_against(mdp)?;
    let n = mdp.n_states();
    let p = mdp.chain(policy);
    let classes = closed_classes(&p, n);
    if classes.len() != 1 {
        return Err(TheoryError::NotUnichain { classes });
    }
    // omega^T (I - P) = 0 with one equation swapped for sum(omega) = 1
    let pm = DMatrix::from_row_slice(n, n, &p);
    let mut a = (DMatrix::identity(n, n) - pm).transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let w = a.lu().solve(&b).ok_or(TheoryError::Singular)?;
    // transient states carry no mass; clear round-off
    Ok(w.iter().map(|x| if x.abs() < 1e-15 { 0.0 } else { x.max(0.0) }).collect())
}

/// Long-run average reward `sum_s omega(s) sum_a pi(a|s) R(s, a)`.
pub fn average_return(mdp: &TabularMdp, policy: &Policy) -> Result<f64, TheoryError> {
    let omega = stationary_distribution(mdp, policy)?;
    Ok(omega.iter().zip(mdp.policy_rewards(policy)).map(|(w, r)| w * r).sum())
}

/// Normalized discounted return `(1 - gamma) * start . V`.
pub fn discounted_average_return(
    mdp: &TabularMdp,
    policy: &Policy,
    gamma: f64,
    start: &[f64],
) -> Result<f64, TheoryError> {
    if start.len() != mdp.n_states() {
        return Err(TheoryError::InvalidArgument("start distribution length".into()));
    }
    let v = policy_evaluation(mdp, policy, gamma)?;
    Ok((1.0 - gamma) * start.iter().zip(&v).map(|(p, x)| p * x).sum::<f64>())
}
