//! Acceptance criteria 1-10. Prints one `criterion N: PASS|FAIL ...` line
//! per criterion and exits non-zero when any fails.
//!
//! Criterion 7 trains three policies for 1000 episodes each and dominates
//! the runtime of this target.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clap::Parser;
use tdcr_bench::checks::{jacobian_finite_difference, null_space_projection};
use tdcr_bench::{run, Cli, WorkbenchConfig};
use tdcr_core::control::{
    actuator_command, inner_loop_step, modification_factor, GainSet, InnerLoopParams, InnerLoopState, MtjThresholds,
    ReachableSurface,
};
use tdcr_core::evaluation::{compare_slack_strategies, evaluate_run, max_deviation, rmse, GainSource, Trajectory};
use tdcr_core::learning::{
    check_actor_gradients, check_critic_gradients, ddpg_train, gain_penalty, reward, Environment, Policy,
    GRADIENT_TOLERANCE,
};
use tdcr_core::numerics::{Vec3, Vec6};
use tdcr_core::plant::{Plant, PlantParams, TendonTensions};

/// Outcome of one criterion: pass flag and a one-line summary.
type Verdict = (bool, String);

fn criterion_01_jacobian_oracle() -> Verdict {
    let config = WorkbenchConfig::default();
    let start = Instant::now();
    let r = jacobian_finite_difference(&config.geometry, 100, 1).unwrap();
    let elapsed = start.elapsed();
    let passed = r.worst < 1e-5 && elapsed < Duration::from_secs(5);
    (passed, format!("100 poses, worst relative error {:.2e}, {:.2?}", r.worst, elapsed))
}

fn criterion_02_null_space_suite() -> Verdict {
    let config = WorkbenchConfig::default();
    let results = null_space_projection(&config.geometry, 1000, 2).unwrap();
    let passed = results.iter().all(|r| r.worst < 1e-9);
    let worst = results.iter().map(|r| format!("{} {:.2e}", r.name, r.worst)).collect::<Vec<_>>().join(", ");
    (passed, format!("1000 poses: {worst}"))
}

fn criterion_03_slack_strategies_on_circle() -> Verdict {
    let config = WorkbenchConfig::default();
    let plant = Plant::new(config.geometry.clone(), config.plant.clone()).unwrap();
    let trajectory = Trajectory::Circle;
    let start = Instant::now();
    let runs = compare_slack_strategies(
        &plant,
        &config.controller,
        &config.strategies,
        &trajectory,
        config.baseline_gains(),
        config.eval_duration_for(&trajectory),
    );
    let elapsed = start.elapsed();
    let results: Vec<_> = runs.iter().map(|r| r.result.as_ref().expect("strategy run completes")).collect();
    let mut deviation: f64 = 0.0;
    for a in &results {
        for b in &results {
            deviation = deviation.max(max_deviation(&a.positions, &b.positions).unwrap());
        }
    }
    let tensions: Vec<f64> = results.iter().map(|r| r.metrics.max_tension).collect();
    let ordered = tensions.windows(2).all(|w| w[0] <= w[1]);
    let passed = deviation < 1e-9 && ordered && elapsed < Duration::from_secs(30);
    (passed, format!("deviation {deviation:.2e} m, max tensions {tensions:.4?} N, {elapsed:.2?}"))
}

fn criterion_04_mtj_properties_and_regulation() -> Verdict {
    let t = MtjThresholds { error: Vec3::new(0.01, 0.02, 0.05), error_rate: Vec3::new(0.1, 0.3, 0.7) };
    let at_limit = modification_factor(&t.error, &Vec3::zeros(), &t);
    let at_both = modification_factor(&t.error, &t.error_rate, &t);
    let factor_exact = at_limit.iter().all(|k| (k - (-1.0f64).exp()).abs() < 1e-12)
        && at_both.iter().all(|k| (k - (-2.0f64).exp()).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let factor_in_range = (0..10_000).all(|_| {
        let e = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let edot = Vec3::from_fn(|_, _| rng.gen_range(-10.0..10.0));
        modification_factor(&e, &edot, &t).iter().all(|k| *k > 0.0 && *k <= 1.0)
    });

    let config = WorkbenchConfig::default();
    let closed_loop = config.closed_loop().unwrap();
    let gains = config.baseline_gains();
    let surface = ReachableSurface::new(&closed_loop.plant, &closed_loop.controller.slack, 0.2, 512).unwrap();
    let steps = (10.0 / closed_loop.controller.dt).round() as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let radius = 0.2 * rng.gen::<f64>().sqrt();
        let azimuth = rng.gen_range(-PI..PI);
        let target = Vec3::new(radius * azimuth.cos(), radius * azimuth.sin(), surface.height(radius).unwrap());
        let mut state = closed_loop.reset(TendonTensions::zeros()).unwrap();
        for _ in 0..steps {
            state = closed_loop.step(&state, &target, &gains).unwrap().0;
        }
        worst = worst.max((target - state.plant.position).norm());
    }
    let passed = factor_exact && factor_in_range && worst < 1e-3;
    (passed, format!(
            "factor identities {factor_exact}, factor in (0, 1] {factor_in_range}, worst error after 10 s over 20 setpoints {worst:.2e} m"
        ))
}

fn criterion_05_reward_brute_force() -> Verdict {
    // Every assignment of three levels to (Kp, Ki, Kd) covers all strict
    // orderings and all ties.
    let levels = [0.5, 1.0, 2.0];
    let mut mismatches = 0;
    let mut zero_iff = true;
    for kp in levels {
        for ki in levels {
            for kd in levels {
                let mut expected = 0;
                for (a, b) in [(kp, ki), (kp, kd), (ki, kd)] {
                    if !(a > b) {
                        expected += 1;
                    }
                }
                let gains = GainSet::uniform(kp, ki, kd);
                if gain_penalty(&gains) != 3 * expected {
                    mismatches += 1;
                }
                // One axis varied, the other two ordered.
                let mut mixed = GainSet::uniform(3.0, 2.0, 1.0);
                mixed.kp.x = kp;
                mixed.ki.x = ki;
                mixed.kd.x = kd;
                if gain_penalty(&mixed) != expected {
                    mismatches += 1;
                }
                for e in [Vec3::zeros(), Vec3::new(1e-3, 0.0, 0.0), Vec3::new(0.0, -0.2, 0.1)] {
                    let r = reward(&e, &mixed);
                    zero_iff &= (r == 0.0) == (e == Vec3::zeros() && expected == 0);
                    zero_iff &= r <= 0.0;
                }
            }
        }
    }
    let passed = mismatches == 0 && zero_iff;
    (passed, format!("27 orderings with ties, {mismatches} mismatches, zero iff exact and penalty-free: {zero_iff}"))
}

fn criterion_06_gradient_oracle() -> Verdict {
    let width = WorkbenchConfig::default().train.hidden_width;
    let mut actor: f64 = 0.0;
    let mut critic: f64 = 0.0;
    for seed in 0..10 {
        actor = actor.max(check_actor_gradients(seed, width).unwrap());
        critic = critic.max(check_critic_gradients(seed, width).unwrap());
    }
    let passed = actor < GRADIENT_TOLERANCE && critic < GRADIENT_TOLERANCE;
    (passed, format!("10 minibatches, worst relative error actor {actor:.2e}, critic {critic:.2e}"))
}

fn criterion_07_learning_progress() -> Verdict {
    let base = WorkbenchConfig::default();
    let trajectory = Trajectory::Circle;
    let duration = base.eval_duration_for(&trajectory);
    let start = Instant::now();
    let mut window_gain = Vec::new();
    let mut improvements = Vec::new();
    for seed in 0..3 {
        let config = WorkbenchConfig { seed, ..base.clone() };
        let train = config.train_config();
        let closed_loop = config.closed_loop().unwrap();
        let outcome = ddpg_train(&train, closed_loop.clone()).unwrap();
        let log = &outcome.log;
        let n = log.episodes.len();
        let w = train.running_mean_window.min(n);
        let first = log.window_mean(0, w).unwrap();
        let last = log.window_mean(n - w, w).unwrap();
        window_gain.push((first, last));

        let env = Environment::new(closed_loop.clone(), train.env.clone(), train.gain_ranges).unwrap();
        let policy = Policy::new(outcome.agent.actor.clone(), train.gain_ranges, env.scaling).unwrap();
        let baseline =
            evaluate_run(&closed_loop, &trajectory, GainSource::Fixed(config.baseline_gains()), duration).unwrap();
        let learned = evaluate_run(&closed_loop, &trajectory, GainSource::Policy(&policy), duration).unwrap();
        let improvement = if learned.metrics.failure.is_none() {
            1.0 - learned.metrics.rmse / baseline.metrics.rmse
        } else {
            f64::NEG_INFINITY
        };
        println!(
            "  seed {seed}: return window {first:.3} -> {last:.3}, rmse baseline {:.3e} policy {:.3e} ({:.1}%)",
            baseline.metrics.rmse,
            learned.metrics.rmse,
            100.0 * improvement
        );
        improvements.push(improvement);
    }
    let elapsed = start.elapsed();
    let progress = window_gain.iter().any(|(first, last)| last > first);
    let tracking = improvements.iter().all(|i| *i >= 0.25);
    let passed = progress && tracking && elapsed < Duration::from_secs(30 * 60);
    let percent: Vec<String> = improvements.iter().map(|i| format!("{:.1}%", 100.0 * i)).collect();
    (
        passed,
        format!(
            "return improves (best of 3) {progress}, circle rmse improvement per seed [{}], {elapsed:.0?}",
            percent.join(", ")
        ),
    )
}

fn run_cli(args: &[&str]) {
    let mut sink = Vec::new();
    let cli = Cli::try_parse_from(std::iter::once("tdcr-bench").chain(args.iter().copied())).unwrap();
    run(&cli, &mut sink).unwrap();
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

fn criterion_08_determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let dirs = [root.path().join("a"), root.path().join("b")];
    for dir in &dirs {
        let out = dir.to_str().unwrap();
        run_cli(&["train", "--seed", "7", "--out", out, "--set", "train.episodes=60"]);
        let snapshot = dir.join("snapshot.json");
        run_cli(&["eval", "--seed", "7", "--out", out, "--snapshot", snapshot.to_str().unwrap()]);
    }
    let files = [
        "snapshot.json",
        "training_log.csv",
        "eval_circle_baseline.csv",
        "eval_circle_policy.csv",
        "eval_circle_metrics.json",
    ];
    let differing: Vec<&str> = files.iter().copied().filter(|f| read(&dirs[0], f) != read(&dirs[1], f)).collect();
    let passed = differing.is_empty();
    (passed, format!("train + eval twice with seed 7, differing artifacts {differing:?}"))
}

fn criterion_09_inner_loop_cascade() -> Verdict {
    let params = PlantParams::default();
    assert!(params.tension_time_constant > 0.0);
    let plant = Plant::new(WorkbenchConfig::default().geometry, params.clone()).unwrap();
    let inner = InnerLoopParams::default();
    let dt = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let initial = TendonTensions(Vec6::from_fn(|_, _| rng.gen_range(0.0..20.0)));
        let desired = TendonTensions(Vec6::from_fn(|_, _| rng.gen_range(1.0..0.8 * params.max_tension)));
        let mut s = plant.settle(initial).unwrap();
        let mut state = InnerLoopState::default();
        for _ in 0..(1.0 / dt) as usize {
            let (rate, next, _) = inner_loop_step(&desired, &s.tensions, &state, &inner, dt);
            state = next;
            s = plant.step(&actuator_command(&rate, &inner), &s, dt).unwrap();
        }
        worst = worst.max((s.tensions.0 - desired.0).abs().component_div(&desired.0).max());
    }
    let passed = worst < 1e-3;
    (passed, format!("20 random steps, worst relative tension error after 1 s {worst:.2e}"))
}

fn criterion_10_rmse_metric() -> Verdict {
    let three_four_five = rmse(&[Vec3::new(3e-3, 4e-3, 0.0); 7]).unwrap();
    let zeros = rmse(&[Vec3::zeros(); 5]).unwrap();
    let a = 0.25;
    let alternating =
        rmse(&[Vec3::new(a, 0.0, 0.0), Vec3::new(0.0, a, 0.0), Vec3::new(a, 0.0, 0.0), Vec3::new(0.0, a, 0.0)])
            .unwrap();
    let empty = rmse(&[]).is_err();
    let passed = three_four_five == 5e-3 && zeros == 0.0 && alternating == a && empty;
    (
        passed,
        format!("3-4-5 case {three_four_five:e}, zeros {zeros}, alternating {alternating}, empty rejected {empty}"),
    )
}

fn main() -> std::process::ExitCode {
    let criteria: [(u32, fn() -> Verdict); 10] = [
        (1, criterion_01_jacobian_oracle),
        (2, criterion_02_null_space_suite),
        (3, criterion_03_slack_strategies_on_circle),
        (4, criterion_04_mtj_properties_and_regulation),
        (5, criterion_05_reward_brute_force),
        (6, criterion_06_gradient_oracle),
        (7, criterion_07_learning_progress),
        (8, criterion_08_determinism),
        (9, criterion_09_inner_loop_cascade),
        (10, criterion_10_rmse_metric),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let (passed, detail) = match std::panic::catch_unwind(check) {
            Ok(v) => v,
            Err(_) => (false, "panicked".to_string()),
        };
        failed += !passed as usize;
        println!("criterion {n}: {} {detail}", if passed { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        std::process::ExitCode::SUCCESS
    } else {
        std::process::ExitCode::FAILURE
    }
}
