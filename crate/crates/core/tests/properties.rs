use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use intrinsic_fear::agent::{compute_target, fear_factor_at, greedy_action, TargetSpec};
use intrinsic_fear::envs::{adventure_transition, cartpole_dynamics, Action, CartPoleState};
use intrinsic_fear::fear::FearModel;
use intrinsic_fear::memory::{label_episode, FearBuffers, RingStore, Transition};
use intrinsic_fear::numerics::{
    bce, sigmoid, squared_error, AdamConfig, AdamState, Head, MlpParams, Shape,
};
use intrinsic_fear::theory::{
    average_return, occupancy_lp, random_mdp, random_policy, shape_with_fear, stationary_distribution,
    verify_theorem1, LookupFear,
};

fn net(seed: u64, head: Head) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MlpParams::init(Shape::new(3, 6, 2), head, &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logistic_head_stays_in_unit_interval(seed in any::<u64>(), x in prop::collection::vec(-50.0..50.0f64, 3)) {
        let p = net(seed, Head::Logistic);
        for y in p.forward(&x).unwrap() {
            prop_assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn sigmoid_is_monotone(a in -40.0..40.0f64, b in -40.0..40.0f64) {
        if a <= b {
            prop_assert!(sigmoid(a) <= sigmoid(b));
        }
    }

    #[test]
    fn losses_are_nonnegative(p in -10.0..10.0f64, y in -10.0..10.0f64, q in 0.001..0.999f64, label in 0u8..2) {
        prop_assert!(squared_error(p, y).0 >= 0.0);
        prop_assert!(bce(q, f64::from(label)).unwrap().0 >= 0.0);
    }

    #[test]
    fn adam_is_deterministic(seed in any::<u64>(), g in prop::collection::vec(-5.0..5.0f64, 1..4)) {
        let shape = Shape::new(3, 6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = MlpParams::init(shape, Head::Identity, &mut rng);
        let mut b = a.clone();
        let (mut oa, mut ob) = (AdamState::new(shape, AdamConfig::default()), AdamState::new(shape, AdamConfig::default()));
        for &v in &g {
            let grads = a.backward(&[0.3, -0.2, 0.9], &[v, -v]).unwrap();
            oa.step(&mut a, &grads).unwrap();
            ob.step(&mut b, &grads).unwrap();
        }
        prop_assert_eq!(a.as_slice(), b.as_slice());
        prop_assert!(oa.second_moments().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn labeling_partitions_episode(n in 0usize..60, k_r in 0usize..30, catastrophe in any::<bool>()) {
        let states: Vec<usize> = (0..n).collect();
        let (danger, safe) = label_episode(&states, catastrophe, k_r);
        prop_assert_eq!(danger.len() + safe.len(), n);
        let mut joined: Vec<usize> = safe.to_vec();
        joined.extend_from_slice(danger);
        joined.sort_unstable();
        prop_assert_eq!(&joined, &states);
        if !catastrophe {
            prop_assert!(danger.is_empty());
        } else {
            prop_assert_eq!(danger.len(), n.min(k_r));
        }
    }

    #[test]
    fn fear_batches_are_balanced(n_danger in 1usize..40, n_safe in 1usize..40, k in 1usize..64, seed in any::<u64>()) {
        let mut buffers = FearBuffers::new(1000);
        let episode: Vec<Vec<f64>> = (0..n_danger + n_safe).map(|i| vec![i as f64]).collect();
        buffers.record_episode(&episode, true, n_danger);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = buffers.sample_batch(k, &mut rng).unwrap();
        prop_assert_eq!(batch.len(), k);
        let ones = batch.iter().filter(|(_, y)| *y == 1.0).count();
        prop_assert_eq!(ones, k.div_ceil(2));
    }

    #[test]
    fn ring_store_keeps_most_recent(cap in 1usize..20, n in 0usize..60) {
        let mut store = RingStore::new(cap);
        for i in 0..n {
            store.push(i);
        }
        prop_assert_eq!(store.len(), n.min(cap));
        let kept: Vec<usize> = store.iter().copied().collect();
        let expected: Vec<usize> = (n.saturating_sub(cap)..n).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn fear_factor_is_monotone_and_capped(t1 in 0u64..10_000, t2 in 0u64..10_000, lambda in 0.0..100.0f64, k in 1u64..5000) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(fear_factor_at(lo, lambda, k) <= fear_factor_at(hi, lambda, k));
        prop_assert!(fear_factor_at(hi, lambda, k) <= lambda);
    }

    #[test]
    fn fear_never_raises_target(seed in any::<u64>(), r in -1.0..1.0f64, lambda in 0.0..50.0f64, s in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = MlpParams::init(Shape::new(1, 8, 2), Head::Identity, &mut rng);
        let fear = FearModel::new(1, 8, AdamConfig::default(), &mut rng);
        let tr = Transition { s: vec![s], a: Action::Left, r, s_next: vec![s], terminal: false, catastrophe: false };
        let spec = TargetSpec { lambda_t: lambda, gamma: 0.9, discount_in_target: true };
        let plain = compute_target(&tr, &q, &fear, TargetSpec { lambda_t: 0.0, ..spec }).unwrap();
        prop_assert!(compute_target(&tr, &q, &fear, spec).unwrap() <= plain + 1e-12);
    }

    #[test]
    fn greedy_picks_a_maximum(q in prop::collection::vec(-5.0..5.0f64, 2)) {
        let a = greedy_action(&q);
        prop_assert!(q.iter().all(|v| *v <= q[a.index()]));
    }

    #[test]
    fn adventure_step_is_bounded(s in 0.0..1.0f64, eta in -0.05..0.05f64, right in any::<bool>()) {
        let a = if right { Action::Right } else { Action::Left };
        let r = adventure_transition(s, a, eta);
        prop_assert!((r.next_state[0] - s).abs() <= 0.01 + eta.abs() + 1e-12);
        prop_assert_eq!(r.reward, s);
        prop_assert_eq!(r.catastrophe, !(0.0..=1.0).contains(&r.next_state[0]));
    }

    #[test]
    fn cartpole_push_sign_orders_velocity(x in -1.0..1.0f64, v in -1.0..1.0f64, th in -0.2..0.2f64, w in -1.0..1.0f64) {
        let s = CartPoleState { x, v, theta: th, omega: w };
        let right = cartpole_dynamics(s, Action::Right);
        let left = cartpole_dynamics(s, Action::Left);
        prop_assert!(right.v > left.v);
        prop_assert_eq!(right.x, left.x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn occupancy_is_feasible_and_consistent(seed in any::<u64>(), s in 2usize..7, a in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let sol = occupancy_lp(&mdp).unwrap();
        prop_assert!(sol.measure.feasibility_gap(&mdp) <= 1e-9);
        prop_assert!((average_return(&mdp, &sol.policy).unwrap() - sol.eta_star).abs() <= 1e-6);
    }

    #[test]
    fn average_chain_holds(seed in any::<u64>(), s in 2usize..7, a in 1usize..4, lambda in 0.0..20.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let report = verify_theorem1(&mdp, lambda).unwrap();
        prop_assert!(report.passed(), "{}", report.to_text());
    }

    #[test]
    fn constant_fear_shifts_optimum(seed in any::<u64>(), s in 2usize..7, a in 1usize..4, c in 0.0..1.0f64, lambda in 0.0..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let shaped = shape_with_fear(&mdp, &LookupFear::constant(s, c).unwrap(), lambda).unwrap();
        let base = occupancy_lp(&mdp).unwrap();
        let moved = occupancy_lp(&shaped).unwrap();
        prop_assert!((moved.eta_star - (base.eta_star - lambda * c)).abs() <= 1e-8);
        let recovered = average_return(&mdp, &moved.policy).unwrap();
        prop_assert!((recovered - base.eta_star).abs() <= 1e-8);
    }

    #[test]
    fn stationary_is_a_distribution(seed in any::<u64>(), s in 2usize..7, a in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng, s, a, 0.9);
        let pi = random_policy(&mut rng, s, a);
        let w = stationary_distribution(&mdp, &pi).unwrap();
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }
}
