use criterion::{criterion_group, criterion_main, Criterion};
use hlmdp::experiment::{run_seed, Domain, ExperimentConfig, Method};
use hlmdp::learning::{rng_for, run_trial, Caps, LearningRateSchedule, QLearner, Sampling, TaskModel, ZLearner};
use hlmdp::{direct_solve, embed_traditional_mdp, optimal_policy};
use hlmdp_bench::grid;

fn trials(c: &mut Criterion) {
    let m = grid(10, 1.0);
    let schedule = LearningRateSchedule::new(100.0).unwrap();
    let caps = Caps { max_steps: 10_000 };
    c.bench_function("z_is_100_trials_grid10", |b| {
        b.iter(|| {
            let mut l = ZLearner::new(TaskModel::new(m.clone()).unwrap(), Sampling::Estimated);
            let mut rng = rng_for(0, 0);
            for t in 0..100 {
                run_trial(&mut l, 0, &schedule, t, caps, &mut rng, |_, _| {}).unwrap();
            }
        })
    });
    let z = direct_solve(&m).unwrap();
    let mdp = embed_traditional_mdp(&m, &optimal_policy(&m, &z).unwrap()).unwrap();
    c.bench_function("q_g_100_trials_grid10", |b| {
        b.iter(|| {
            let mut l = QLearner::new(mdp.clone(), 0.1);
            let mut rng = rng_for(0, 0);
            for t in 0..100 {
                run_trial(&mut l, 0, &schedule, t, caps, &mut rng, |_, _| {}).unwrap();
            }
        })
    });
}

fn experiments(c: &mut Criterion) {
    let mut g = c.benchmark_group("experiment");
    g.sample_size(10);
    for method in [Method::ZIs, Method::ZIsIl, Method::QGIl] {
        let cfg = ExperimentConfig {
            domain: Domain::TaxiNavigate,
            layout: "open15".into(),
            method,
            c: 1000.0,
            trials: 200,
            ..Default::default()
        };
        g.bench_function(format!("taxi15_navigate_{method}"), |b| b.iter(|| run_seed(&cfg, 0).unwrap()));
    }
    let agv = ExperimentConfig {
        domain: Domain::AgvThroughput,
        layout: "reference".into(),
        method: Method::ZIs,
        trials: 50,
        ..Default::default()
    };
    g.bench_function("agv_50k_steps", |b| b.iter(|| run_seed(&agv, 0).unwrap()));
    g.finish();
}

criterion_group!(benches, trials, experiments);
criterion_main!(benches);
