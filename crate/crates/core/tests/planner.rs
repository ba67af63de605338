use keybench::env::{EnvConfig, PianoEnv};
use keybench::hands::ACTION_DIM;
use keybench::planner::{control_loop, improve, rollout_cost, NominalPlan, Planner, PlannerConfig, SplineKind};
use keybench::songs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scale_env() -> PianoEnv {
    PianoEnv::new(EnvConfig::default(), songs::C_MAJOR_SCALE, &songs::c_major_scale()).unwrap()
}

fn random_plan(rng: &mut ChaCha8Rng, config: &PlannerConfig) -> NominalPlan {
    let points = (0..config.spline_points)
        .map(|_| (0..ACTION_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    NominalPlan::new(points, config.horizon, config.spline).unwrap()
}

#[test]
fn improve_never_increases_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let template = scale_env();
    let kinds = [SplineKind::Zero, SplineKind::Linear, SplineKind::Cubic];
    for trial in 0..300 {
        let config = PlannerConfig {
            candidates: rng.random_range(1..6),
            sigma: [1e-6, 0.05, 0.5, 2.0][trial % 4],
            spline_points: rng.random_range(2..5),
            spline: kinds[trial % 3],
            ..PlannerConfig::default()
        };
        let mut env = template.clone();
        env.reset(0);
        for _ in 0..rng.random_range(0..env.num_frames()) {
            let a: Vec<f64> = (0..ACTION_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect();
            env.step(&a).unwrap();
        }
        let nominal = if rng.random_bool(0.3) {
            config.initial_plan().unwrap()
        } else {
            random_plan(&mut rng, &config)
        };
        let before = rollout_cost(&env, &nominal, &config).unwrap().total;
        let mut stream = ChaCha8Rng::seed_from_u64(rng.random());
        let step = improve(&nominal, &env, &config, &mut stream, None, trial % 2 == 0).unwrap();
        assert_eq!(step.nominal_cost, before);
        assert!(step.cost <= before, "trial {trial}: {} > {before}", step.cost);
        assert_eq!(rollout_cost(&env, &step.plan, &config).unwrap().total, step.cost);
    }
}

#[test]
fn improve_is_independent_of_parallelism() {
    let env = {
        let mut e = scale_env();
        e.reset(0);
        e
    };
    let config = PlannerConfig::default();
    let nominal = config.initial_plan().unwrap();
    let seq = improve(&nominal, &env, &config, &mut ChaCha8Rng::seed_from_u64(4), None, false).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let par = pool
        .install(|| improve(&nominal, &env, &config, &mut ChaCha8Rng::seed_from_u64(4), None, true))
        .unwrap();
    assert_eq!(seq, par);
}

fn single_note_trace(threads: usize) -> Vec<keybench::env::TraceRecord> {
    let mut env = PianoEnv::new(EnvConfig::default(), songs::SINGLE_NOTE, &songs::single_note()).unwrap();
    let config = PlannerConfig {
        iterations: 3,
        seed: 9,
        threads,
        ..PlannerConfig::default()
    };
    control_loop(&mut env, &config).unwrap().0
}

#[test]
fn fixed_seed_trace_is_reproducible() {
    let reference = single_note_trace(1);
    assert_eq!(reference.len(), 20);
    assert_eq!(single_note_trace(1), reference);
    assert_eq!(single_note_trace(3), reference);
    assert_eq!(single_note_trace(0), reference);
}

#[test]
fn different_seeds_give_different_traces() {
    let mut env = PianoEnv::new(EnvConfig::default(), songs::SINGLE_NOTE, &songs::single_note()).unwrap();
    let a = control_loop(
        &mut env,
        &PlannerConfig {
            iterations: 2,
            seed: 1,
            ..PlannerConfig::default()
        },
    )
    .unwrap()
    .0;
    let b = control_loop(
        &mut env,
        &PlannerConfig {
            iterations: 2,
            seed: 2,
            ..PlannerConfig::default()
        },
    )
    .unwrap()
    .0;
    assert_ne!(a, b);
}

#[test]
fn zero_iterations_execute_the_zero_plan() {
    let mut env = scale_env();
    let config = PlannerConfig {
        iterations: 0,
        ..PlannerConfig::default()
    };
    let (trace, report) = control_loop(&mut env, &config).unwrap();
    assert!(trace.iter().all(|r| r.action.iter().all(|a| *a == 0.0)));
    assert_eq!(report.f1, 0.0);
}

#[test]
fn budget_stops_iterations_early() {
    let mut env = scale_env();
    env.reset(0);
    let mut planner = Planner::new(PlannerConfig {
        iterations: 1_000_000,
        budget: Some(0.02),
        ..PlannerConfig::default()
    })
    .unwrap();
    let action = planner.plan_step(&env).unwrap();
    assert_eq!(action.len(), ACTION_DIM);
    assert!(planner.last_iterations >= 1 && planner.last_iterations < 1_000_000);
}

#[test]
fn planner_plays_the_single_note() {
    let mut env = PianoEnv::new(EnvConfig::default(), songs::SINGLE_NOTE, &songs::single_note()).unwrap();
    let config = PlannerConfig {
        iterations: 20,
        ..PlannerConfig::default()
    };
    let (_, report) = control_loop(&mut env, &config).unwrap();
    assert!(report.f1 > 0.5, "f1 {}", report.f1);
}
