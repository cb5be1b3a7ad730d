use hlmdp::learning::{rng_for, run_trial, Caps, LearningRateSchedule, QLearner, Sampling, TaskModel, ZLearner};
use hlmdp::solver::{direct_solve, value_of, value_iteration};
use hlmdp::{embed_traditional_mdp, optimal_policy, Lmdp};
use rand::Rng as _;

fn chain() -> Lmdp {
    Lmdp::with_state_rewards(2, 1.0, &[(0, 0, 0.5), (0, 1, 0.5)], vec![-1.0, 0.0], &[(1, 0.0)]).unwrap()
}

/// n×n random-walk grid with a self-loop, cost 1 per step and the goal in
/// the last corner.
fn grid(n: usize) -> Lmdp {
    let goal = n * n - 1;
    let mut edges = Vec::new();
    for s in 0..goal {
        let (x, y) = (s % n, s / n);
        let mut succ = vec![s];
        if x > 0 {
            succ.push(s - 1);
        }
        if x + 1 < n {
            succ.push(s + 1);
        }
        if y > 0 {
            succ.push(s - n);
        }
        if y + 1 < n {
            succ.push(s + n);
        }
        let p = 1.0 / succ.len() as f64;
        edges.extend(succ.into_iter().map(|t| (s, t, p)));
    }
    let mut rewards = vec![-1.0; n * n];
    rewards[goal] = 0.0;
    Lmdp::with_state_rewards(n * n, 1.0, &edges, rewards, &[(goal, 0.0)]).unwrap()
}

#[test]
fn naive_z_converges_on_chain() {
    let schedule = LearningRateSchedule::new(100.0).unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let mut rng = rng_for(seed, 0);
        let mut learner = ZLearner::new(TaskModel::new(chain()).unwrap(), Sampling::Passive);
        let mut transitions = 0;
        let mut trial = 0;
        let mut reached = false;
        while transitions < 10_000 && !reached {
            let caps = Caps { max_steps: 10_000 - transitions };
            transitions += run_trial(&mut learner, 0, &schedule, trial, caps, &mut rng, |_, _| {}).unwrap().steps;
            reached = (learner.table.get(0) - 0.225399).abs() <= 0.01;
            trial += 1;
        }
        hits += usize::from(reached);
    }
    assert!(hits >= 9, "{hits}/10 seeds converged");
}

#[test]
fn z_and_q_learning_agree_on_grid() {
    let m = grid(5);
    let z = direct_solve(&m).unwrap();
    let policy = optimal_policy(&m, &z).unwrap();
    let v_star = value_of(&z, 1.0).unwrap();
    let mdp = embed_traditional_mdp(&m, &policy).unwrap();
    let (v_vi, _) = value_iteration(&mdp, 1e-12, 100_000).unwrap();
    for s in 0..25 {
        assert!((v_vi[s] - v_star[s]).abs() < 1e-6);
    }

    let mut rng = rng_for(7, 0);
    let mut zl = ZLearner::new(TaskModel::new(m.clone()).unwrap(), Sampling::Estimated);
    let mut ql = QLearner::new(mdp, 0.3);
    let zs = LearningRateSchedule::new(2_000.0).unwrap();
    let qs = LearningRateSchedule::new(100.0).unwrap();
    let caps = Caps { max_steps: 10_000 };
    for trial in 0..300_000 {
        let start = rng.gen_range(0..24);
        run_trial(&mut zl, start, &zs, trial, caps, &mut rng, |_, _| {}).unwrap();
        let start = rng.gen_range(0..24);
        run_trial(&mut ql, start, &qs, trial, caps, &mut rng, |_, _| {}).unwrap();
    }
    let vz = zl.table.values(1.0);
    let vq = ql.table.values();
    let gap = (0..25).map(|s| (vz[s] - vq[s]).abs()).fold(0.0, f64::max);
    assert!(gap <= 0.05, "Z vs Q gap {gap}");
}
