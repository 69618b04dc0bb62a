//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, and exits non-zero if any failed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use intrinsic_fear::agent::{fear_factor_at, q_batch_loss_and_grad, train, AgentConfig, TrainMetrics};
use intrinsic_fear::envs::{adventure_start, adventure_transition, Action, EnvId};
use intrinsic_fear::fear::FearModel;
use intrinsic_fear::memory::{label_episode, Transition};
use intrinsic_fear::numerics::{squared_error, AdamConfig, Head, MlpParams, Shape};
use intrinsic_fear::par::{map_indexed, Execution};
use intrinsic_fear::seeding::indexed_rng;
use intrinsic_fear::theory::{
    average_return, corrupt_lookup, hoeffding_radius, occupancy_lp, policy_evaluation, random_mdp, random_policy,
    random_small_mdp, stationary_distribution, value_iteration, verify_theorem1, verify_theorem2, Corruption,
    LookupFear, Policy, TabularMdp, Theorem2Input,
};

const SEED: u64 = 20_240;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn theorem1_chain() -> Outcome {
    let start = Instant::now();
    let lambdas = [0.1, 1.0, 10.0];
    let reports = map_indexed(Execution::Parallel, 200, |i| {
        let mut rng = indexed_rng(SEED, "acceptance/theorem1", i as u64);
        let mdp = random_small_mdp(&mut rng, 0.9);
        verify_theorem1(&mdp, lambdas[i % 3])
    });
    let mut worst = f64::INFINITY;
    let mut passed = 0;
    for r in &reports {
        match r {
            Ok(r) => {
                let slack = r.min_slack();
                worst = worst.min(slack);
                if r.checks.iter().all(|c| c.slack >= -1e-8) {
                    passed += 1;
                }
            }
            Err(e) => eprintln!("theorem1 instance failed to solve: {e}"),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        passed == 200 && within(elapsed, 120),
        format!("{passed}/200 chains hold, smallest slack {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn occupancy_oracle() -> Outcome {
    let start = Instant::now();
    let results = map_indexed(Execution::Parallel, 100, |i| {
        let mut rng = indexed_rng(SEED, "acceptance/occupancy", i as u64);
        let s = rng.random_range(2..=6);
        let a = rng.random_range(1..=3);
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let sol = occupancy_lp(&mdp).ok()?;
        let gap = (average_return(&mdp, &sol.policy).ok()? - sol.eta_star).abs();
        let feasible = sol.measure.feasibility_gap(&mdp);
        let mut best_random = f64::NEG_INFINITY;
        for _ in 0..200 {
            let pi = random_policy(&mut rng, s, a);
            best_random = best_random.max(average_return(&mdp, &pi).ok()?);
        }
        Some((gap, feasible, sol.eta_star - best_random))
    });
    let mut ok = 0;
    let (mut worst_gap, mut worst_feas, mut worst_margin) = (0.0f64, 0.0f64, f64::INFINITY);
    for r in results.iter().flatten() {
        let (gap, feas, margin) = *r;
        worst_gap = worst_gap.max(gap);
        worst_feas = worst_feas.max(feas);
        worst_margin = worst_margin.min(margin);
        if gap <= 1e-6 && feas <= 1e-9 && margin >= -1e-9 {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ok == 100 && within(elapsed, 60),
        format!(
            "{ok}/100 instances; max |eta* - eta(pi)| {worst_gap:.2e}, max flow gap {worst_feas:.2e}, \
             min margin over random policies {worst_margin:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn theorem2_decomposition() -> Outcome {
    let start = Instant::now();
    let gamma = 0.9;
    let lambdas = [0.1, 1.0, 10.0];
    let results = map_indexed(Execution::Parallel, 100, |i| {
        let mut rng = indexed_rng(SEED, "acceptance/theorem2", i as u64);
        let mdp = random_small_mdp(&mut rng, gamma);
        let fear = LookupFear::indicator(&mdp);
        let fear_hat = corrupt_lookup(&fear, Corruption::Flip(0.2), &mut rng).ok()?;
        let mut out = Vec::new();
        for gp in [0.5 * gamma, 0.9 * gamma, gamma] {
            let input = Theorem2Input {
                mdp: &mdp,
                fear: &fear,
                fear_hat: &fear_hat,
                gamma,
                gamma_plan: gp,
                lambda: lambdas[i % 3],
                start: None,
            };
            out.push(verify_theorem2(&input).ok()?);
        }
        Some(out)
    });
    let mut cases = 0;
    let mut ok = 0;
    let (mut min_loss, mut horizon_slack, mut classifier_slack) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for group in results.iter().flatten() {
        for r in group {
            cases += 1;
            let loss = r.quantity("loss").unwrap();
            let h = r.check("horizon term <= horizon bound").unwrap().slack;
            let c = r.check("classifier term <= 2 lambda dev / (1 - gamma_plan)").unwrap().slack;
            min_loss = min_loss.min(loss);
            horizon_slack = horizon_slack.min(h);
            classifier_slack = classifier_slack.min(c);
            if loss >= -1e-9 && h >= -1e-8 && c >= -1e-8 {
                ok += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        cases == 300 && ok == 300 && within(elapsed, 120),
        format!(
            "{ok}/300 cases; min L {min_loss:.2e}, min horizon slack {horizon_slack:.2e}, \
             min classifier slack {classifier_slack:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn lookup_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let deterministic: Vec<f64> = (0..50).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
    let f = LookupFear::new(deterministic).unwrap();
    let recovered = corrupt_lookup(&f, Corruption::Estimate(1), &mut rng).unwrap() == f;

    let delta = 0.05;
    let mut detail = format!("one-visit recovery {}", if recovered { "exact" } else { "INEXACT" });
    let mut all = recovered;
    for n in [10u64, 100, 1000] {
        let radius = hoeffding_radius(n, n, delta);
        let mut inside = 0;
        for _ in 0..1000 {
            let p = rng.random::<f64>();
            let truth = LookupFear::new(vec![p]).unwrap();
            let est = corrupt_lookup(&truth, Corruption::Estimate(n), &mut rng).unwrap();
            if (est.values()[0] - p).abs() <= radius {
                inside += 1;
            }
        }
        all &= inside as f64 >= (1.0 - delta) * 1000.0;
        detail.push_str(&format!("; N(s)={n}: {inside}/1000 within {radius:.3}"));
    }
    outcome(all, detail)
}

fn train_seeds(env: EnvId, config: &AgentConfig, seeds: &[u64]) -> Vec<TrainMetrics> {
    map_indexed(Execution::Parallel, seeds.len(), |i| {
        let seed = seeds[i];
        let mut e = env.make(seed);
        let cfg = AgentConfig { seed, ..config.clone() };
        train(e.as_mut(), &cfg).expect("training runs").0
    })
}

const RL_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn adventure_seeker() -> Outcome {
    let start = Instant::now();
    let cfg = AgentConfig::adventure_seeker();
    let fear = train_seeds(EnvId::AdventureSeeker, &cfg, &RL_SEEDS);
    let base = train_seeds(EnvId::AdventureSeeker, &cfg.baseline(), &RL_SEEDS);
    let fear_late: Vec<usize> = fear.iter().map(|m| m.catastrophes_in(100..300)).collect();
    let base_last: Vec<usize> = base.iter().map(|m| m.catastrophes_in(200..300)).collect();
    let fear_clean = fear_late.iter().filter(|c| **c == 0).count();
    let base_dying = base_last.iter().filter(|c| **c >= 1).count();
    outcome(
        fear_clean >= 3 && base_dying >= 3,
        format!(
            "IF catastrophes in episodes 100-299 per seed {fear_late:?} ({fear_clean}/5 clean); \
             baseline in final 100 {base_last:?} ({base_dying}/5 dying), {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn final_mean_length(m: &TrainMetrics, last: usize) -> f64 {
    let tail = &m.episodes[m.episodes.len() - last..];
    tail.iter().map(|e| e.steps as f64).sum::<f64>() / last as f64
}

fn cartpole() -> Outcome {
    let start = Instant::now();
    let cfg = AgentConfig::cartpole();
    let fear = train_seeds(EnvId::CartPole, &cfg, &RL_SEEDS);
    let base = train_seeds(EnvId::CartPole, &cfg.baseline(), &RL_SEEDS);
    let pairs: Vec<(f64, f64)> = fear
        .iter()
        .zip(&base)
        .map(|(f, b)| (final_mean_length(f, 50), final_mean_length(b, 50)))
        .collect();
    let wins = pairs.iter().filter(|(f, b)| f >= b).count();
    let shown: Vec<String> = pairs.iter().map(|(f, b)| format!("{f:.1} vs {b:.1}")).collect();
    outcome(
        wins >= 3,
        format!(
            "final-50 mean length IF vs baseline [{}]; IF >= baseline in {wins}/5 (lambda {}), {:.0}s",
            shown.join(", "),
            cfg.lambda,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6)
}

/// Largest relative error between `grad` and central differences of `loss`.
fn grad_check(params: &MlpParams, grad: &[f64], loss: impl Fn(&MlpParams) -> f64) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..params.shape().num_params() {
        let mut plus = params.clone();
        plus.as_mut_slice()[k] += h;
        let mut minus = params.clone();
        minus.as_mut_slice()[k] -= h;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        worst = worst.max(rel_err(fd, grad[k]));
    }
    worst
}

fn random_shape(rng: &mut ChaCha8Rng, output: usize) -> Shape {
    Shape::new(rng.random_range(1..=4), rng.random_range(1..=8), output)
}

fn numerical_hygiene() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut net_worst, mut fear_worst, mut q_worst) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        // network backward through a random linear functional
        let head = if i % 2 == 0 { Head::Identity } else { Head::Logistic };
        let out = rng.random_range(1..=3);
        let p = MlpParams::init(random_shape(&mut rng, out), head, &mut rng);
        let x: Vec<f64> = (0..p.shape().input).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = p.backward(&x, &up).unwrap();
        let f = |q: &MlpParams| q.forward(&x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        net_worst = net_worst.max(grad_check(&p, g.as_slice(), f));

        // fear model cross-entropy
        let shape = random_shape(&mut rng, 1);
        let model = FearModel::new(shape.input, shape.hidden, AdamConfig::default(), &mut rng);
        let states: Vec<Vec<f64>> =
            (0..6).map(|_| (0..shape.input).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let batch: Vec<(&[f64], f64)> = states.iter().enumerate().map(|(j, s)| (&s[..], (j % 2) as f64)).collect();
        let (_, g) = model.batch_loss_and_grad(&batch).unwrap();
        let f = |q: &MlpParams| {
            let m = FearModel { params: q.clone(), opt: model.opt.clone() };
            m.batch_loss_and_grad(&batch).unwrap().0
        };
        fear_worst = fear_worst.max(grad_check(&model.params, g.as_slice(), f));

        // Q-network squared Bellman error with fixed targets
        let input = rng.random_range(1..=4);
        let q = MlpParams::init(Shape::new(input, rng.random_range(1..=8), 2), Head::Identity, &mut rng);
        let transitions: Vec<Transition> = (0..5)
            .map(|_| Transition {
                s: (0..input).map(|_| rng.random_range(-1.0..1.0)).collect(),
                a: Action::from_index(rng.random_range(0..2)).unwrap(),
                r: rng.random_range(-1.0..1.0),
                s_next: vec![0.0; input],
                terminal: false,
                catastrophe: false,
            })
            .collect();
        let batch: Vec<&Transition> = transitions.iter().collect();
        let targets: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, g) = q_batch_loss_and_grad(&q, &batch, &targets).unwrap();
        let f = |p: &MlpParams| q_batch_loss_and_grad(p, &batch, &targets).unwrap().0;
        q_worst = q_worst.max(grad_check(&q, g.as_slice(), f));
    }

    let trivial = trivial_examples();
    let failed: Vec<&str> = trivial.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let pass = net_worst < 1e-4 && fear_worst < 1e-4 && q_worst < 1e-4 && failed.is_empty();
    outcome(
        pass,
        format!(
            "max relative gradient error: network {net_worst:.1e}, fear {fear_worst:.1e}, Q loss {q_worst:.1e} \
             (100 instances each); {}/{} exact examples{}",
            trivial.len() - failed.len(),
            trivial.len(),
            if failed.is_empty() { String::new() } else { format!(", failing {failed:?}") }
        ),
    )
}

fn one_state(r: f64) -> TabularMdp {
    TabularMdp::new(1, 1, vec![1.0], vec![r], 0.5, vec![false]).unwrap()
}

fn trivial_examples() -> Vec<(&'static str, bool)> {
    let zero = MlpParams::zeros(Shape::new(3, 4, 2), Head::Identity);
    let zero_logistic = MlpParams::zeros(Shape::new(3, 4, 1), Head::Logistic);
    let cycle = TabularMdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0], 0.5, vec![false; 2]).unwrap();
    let swap = TabularMdp::new(2, 1, vec![0.7, 0.3, 0.3, 0.7], vec![1.0, 0.0], 0.5, vec![false; 2]).unwrap();
    let absorbing =
        TabularMdp::new(2, 1, vec![0.5, 0.5, 0.0, 1.0], vec![0.0, 0.0], 0.5, vec![false; 2]).unwrap();
    let pick = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], 0.5, vec![false]).unwrap();
    let states: Vec<usize> = (1..=10).collect();
    let pi1 = Policy::deterministic(&[0, 0], 1);
    let v_cycle = policy_evaluation(&cycle, &pi1, 0.5).unwrap();
    let w_swap = stationary_distribution(&swap, &pi1).unwrap();
    let step = adventure_transition(0.5, Action::Right, 0.0);
    vec![
        ("zero network outputs zero", zero.forward(&[1.0, -2.0, 3.0]).unwrap() == vec![0.0, 0.0]),
        ("zero logistic network outputs one half", zero_logistic.forward(&[1.0, 2.0, 3.0]).unwrap() == vec![0.5]),
        ("squared error at target is zero", squared_error(1.5, 1.5).0 == 0.0),
        ("adventure start bounds", adventure_start(0.0) == 0.25 && adventure_start(0.5) == 0.5),
        ("adventure step from 0.5", (step.next_state[0] - 0.51).abs() < 1e-15 && step.reward == 0.5 && !step.terminal),
        ("fear factor ramp", fear_factor_at(0, 40.0, 1000) == 0.0 && fear_factor_at(2000, 40.0, 1000) == 40.0),
        ("no-catastrophe episode is all safe", label_episode(&states, false, 5).1.len() == 10),
        ("short catastrophic episode is all danger", label_episode(&states[..3], true, 5).0.len() == 3),
        (
            "value of a geometric series",
            (value_iteration(&one_state(1.0), 0.5, 1e-14).unwrap().0[0] - 2.0).abs() < 1e-12,
        ),
        ("zero reward zero value", value_iteration(&one_state(0.0), 0.5, 1e-14).unwrap().0 == vec![0.0]),
        (
            "two-state cycle values",
            (v_cycle[0] - 4.0 / 3.0).abs() < 1e-12 && (v_cycle[1] - 2.0 / 3.0).abs() < 1e-12,
        ),
        ("symmetric chain is uniform", (w_swap[0] - 0.5).abs() < 1e-12 && (w_swap[1] - 0.5).abs() < 1e-12),
        (
            "absorbing state takes all mass",
            stationary_distribution(&absorbing, &pi1).unwrap() == vec![0.0, 1.0],
        ),
        ("single-state LP picks the paying action", {
            let sol = occupancy_lp(&pick).unwrap();
            (sol.eta_star - 1.0).abs() < 1e-12 && (sol.measure.get(0, 1) - 1.0).abs() < 1e-12
        }),
    ]
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 average-reward chain on 200 random MDPs", theorem1_chain),
        ("2 occupancy LP agrees with policy evaluation", occupancy_oracle),
        ("3 imperfect-classifier decomposition", theorem2_decomposition),
        ("4 lookup classifier consistency", lookup_consistency),
        ("5 adventure seeker stops dying", adventure_seeker),
        ("6 cart-pole direction", cartpole),
        ("7 numerical hygiene", numerical_hygiene),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/7 criteria passed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
