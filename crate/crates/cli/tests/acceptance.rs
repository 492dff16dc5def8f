//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails when
//! any criterion fails. Set `PIRL_ACCEPTANCE=1,4` to run a subset.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pirl_cli::closed_loop::drive;
use pirl_cli::collect::collect;
use pirl_cli::eval::eval;
use pirl_cli::model::Model;
use pirl_cli::train::{train, TrainRequest};
use pirl_cli::Method;
use pirl_core::config::Config;
use pirl_core::datasets::synthetic::{sequential, single_task, two_task, SyntheticConfig};
use pirl_core::demos::DistanceWeights;
use pirl_core::irl::{
    ed, evaluate_records, evd, log_likelihood, maxent_gradient, normalized_distances, opd,
    policy_distribution, train_lirl, LirlConfig,
};
use pirl_core::nn::{
    attention_slot_distances, bootstrap_history, policy_net_gradient, predict, tan_gradient,
    train_policy_net, train_tan, Architecture, HistorySlot, NetDims, NnConfig, PolicyInput,
    PolicyNet, Tan, TanConfig, TanDims, TanSample, Tensor,
};
use pirl_core::planner::{Policy, PolicySet, Waypoint, K};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- oracles

fn random_set(rng: &mut ChaCha8Rng, n: usize, points: usize) -> PolicySet {
    let policies = (0..n)
        .map(|_| Policy {
            features: (0..K).map(|_| rng.random_range(0.0..4.0)).collect(),
            waypoints: (0..points)
                .map(|j| Waypoint {
                    t: j as f64 * 0.5,
                    x: rng.random_range(-20.0..20.0),
                    y: rng.random_range(-5.0..5.0),
                    yaw: rng.random_range(-3.0..3.0),
                    v: rng.random_range(0.0..20.0),
                })
                .collect(),
            ..Default::default()
        })
        .collect();
    PolicySet {
        policies,
        ..Default::default()
    }
}

fn random_theta(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..K).map(|_| rng.random_range(0.0..1.5)).collect()
}

fn reward(p: &Policy, theta: &[f64]) -> f64 {
    -(0..K).map(|i| theta[i] * p.features[i]).sum::<f64>()
}

fn oracle_probabilities(set: &PolicySet, theta: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = set
        .policies
        .iter()
        .map(|p| reward(p, theta).exp())
        .collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

fn oracle_normalized(set: &PolicySet, demo: usize, w: &DistanceWeights) -> Vec<f64> {
    let d: Vec<f64> = set
        .policies
        .iter()
        .map(|p| {
            let mut sum = 0.0;
            for (a, b) in p.waypoints.iter().zip(&set.policies[demo].waypoints) {
                let dyaw = (a.yaw - b.yaw).sin().atan2((a.yaw - b.yaw).cos());
                sum += w.pos * ((a.x - b.x).powi(2) + (a.y - b.y).powi(2))
                    + w.yaw * dyaw * dyaw
                    + w.v * (a.v - b.v).powi(2);
            }
            sum.sqrt() / p.waypoints.len() as f64
        })
        .collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    d.iter()
        .map(|x| if max > 0.0 { x / max } else { 0.0 })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .chain(b)
        .map(|x| x * x)
        .fold(0.0, f64::max)
        .sqrt()
        .max(1e-12);
    diff / scale
}

fn central_difference(base: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..base.len())
        .map(|i| {
            let mut x = base.to_vec();
            x[i] += h;
            let up = f(&x);
            x[i] -= 2.0 * h;
            (up - f(&x)) / (2.0 * h)
        })
        .collect()
}

// ---------------------------------------------------------------- criteria

fn gradient_fidelity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let set = random_set(&mut rng, n, 3);
        let demo = rng.random_range(0..n);
        let theta = random_theta(&mut rng);
        let g = maxent_gradient(&set, demo, &theta).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..K)
            .map(|i| {
                let (mut a, mut b) = (theta.clone(), theta.clone());
                a[i] += h;
                b[i] -= h;
                (log_likelihood(&set, demo, &a).unwrap() - log_likelihood(&set, demo, &b).unwrap())
                    / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&g, &fd));
    }

    let cfg = SyntheticConfig {
        policies: 6,
        control_points: 3,
        ..Default::default()
    };
    let records = two_task(2, 5, &cfg);
    let dims = NetDims {
        policies: 6,
        control_points: 3,
        kernel: 2,
        encoder_channels: [3, 4],
        context: 4,
        attention_channels: 2,
        attention_hidden: 3,
        head_hidden: 5,
        policy_conv_channels: 3,
        ..Default::default()
    };
    let w = DistanceWeights::default();
    let mut net = PolicyNet::new(Architecture::Pacnn, dims, 11).unwrap();
    let mut flat = net.params.flat();
    let gamma = net.params.index("att.gamma").unwrap();
    let offset: usize = net.params.tensors()[..gamma].iter().map(Tensor::len).sum();
    flat[offset] = 0.8;
    net.params.set_flat(&flat).unwrap();
    let mut net_worst = 0.0f64;
    for r in &records {
        let analytic = policy_net_gradient(&net, r, 0.3, &w).unwrap().gradient;
        let numeric = central_difference(&flat, |x| {
            let mut p = net.clone();
            p.params.set_flat(x).unwrap();
            let input = PolicyInput::from_set(&r.set, &p.dims).unwrap();
            let out = p.forward(&input).unwrap();
            let d = normalized_distances(&r.set, r.demo.index, &w).unwrap();
            let att = attention_slot_distances(&input.slots, &d).unwrap();
            let a = out.attention.unwrap();
            -log_likelihood(&r.set, r.demo.index, &out.theta).unwrap()
                + 0.3 * a.iter().zip(&att).map(|(x, y)| x * y).sum::<f64>()
        });
        net_worst = net_worst.max(rel_err(&analytic, &numeric));
    }

    let tan = Tan::new(
        TanDims {
            history: 3,
            context: 4,
            hidden: 3,
            fc_hidden: 4,
        },
        21,
    )
    .unwrap();
    let history: Vec<HistorySlot> = (0..3)
        .map(|_| HistorySlot {
            context: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            theta: (0..K).map(|_| rng.random_range(0.0..2.0)).collect(),
        })
        .collect();
    let target = &records[0];
    let sample = TanSample {
        history: history.clone(),
        target: 0,
    };
    let analytic = tan_gradient(&tan, &sample, target).unwrap().gradient;
    let numeric = central_difference(&tan.params.flat(), |x| {
        let mut t = tan.clone();
        t.params.set_flat(x).unwrap();
        -log_likelihood(
            &target.set,
            target.demo.index,
            &t.forward(&history).unwrap().theta,
        )
        .unwrap()
    });
    let tan_err = rel_err(&analytic, &numeric);
    ensure(
        worst < 1e-6 && net_worst < 1e-4 && tan_err < 1e-4,
        format!("max-ent rel err {worst:.1e}, PACNN {net_worst:.1e}, TAN {tan_err:.1e}"),
    )
}

fn metric_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let w = DistanceWeights::default();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=24);
        let set = random_set(&mut rng, n, 13);
        let demo = rng.random_range(0..n);
        let theta = random_theta(&mut rng);
        let p = oracle_probabilities(&set, &theta);
        let dist = policy_distribution(&set, &theta).unwrap();
        for (a, b) in dist.probabilities.iter().zip(&p) {
            worst = worst.max((a - b).abs());
        }
        let vd = reward(&set.policies[demo], &theta);
        let expected: f64 = set
            .policies
            .iter()
            .zip(&p)
            .map(|(pi, q)| q * reward(pi, &theta))
            .sum();
        worst = worst.max(
            (evd(&set, demo, &theta).unwrap().unwrap() - (vd - expected).abs() / vd.abs()).abs(),
        );
        let d = oracle_normalized(&set, demo, &w);
        let ed_oracle: f64 = p.iter().zip(&d).map(|(q, x)| q * x).sum();
        worst = worst.max((ed(&set, demo, &theta, &w).unwrap() - ed_oracle).abs());
        let best = (0..n).fold(0, |b, i| {
            if reward(&set.policies[i], &theta) > reward(&set.policies[b], &theta) {
                i
            } else {
                b
            }
        });
        worst = worst.max((opd(&set, demo, &theta, &w).unwrap() - d[best]).abs());
    }

    let dims = NetDims {
        policies: 16,
        ..Default::default()
    };
    let net = PolicyNet::new(Architecture::Pacnn, dims, 3).unwrap();
    let tan = Tan::new(
        TanDims {
            context: dims.context,
            ..Default::default()
        },
        4,
    )
    .unwrap();
    let simplex = |v: &[f64]| {
        v.iter().all(|x| x.is_finite() && *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9
    };
    let mut violations = 0;
    let mut slots = Vec::new();
    for step in 0..1000 {
        let n = rng.random_range(1..=32);
        let points = rng.random_range(1..=13);
        let mut set = random_set(&mut rng, n, points);
        let mut theta = random_theta(&mut rng);
        if step % 5 == 0 {
            theta.iter_mut().for_each(|t| *t *= 200.0);
        }
        if n > 1 && step % 7 == 0 {
            set.policies[1] = set.policies[0].clone();
        }
        let demo = rng.random_range(0..n);
        let dist = policy_distribution(&set, &theta).unwrap();
        let e = ed(&set, demo, &theta, &w).unwrap();
        let o = opd(&set, demo, &theta, &w).unwrap();
        let nd = normalized_distances(&set, demo, &w).unwrap();
        let ok = simplex(&dist.probabilities)
            && (0.0..=1.0 + 1e-12).contains(&e)
            && (0.0..=1.0).contains(&o)
            && nd.iter().all(|x| (0.0..=1.0).contains(x))
            && maxent_gradient(&set, demo, &theta)
                .unwrap()
                .iter()
                .all(|g| g.is_finite());
        violations += usize::from(!ok);

        if step % 10 == 0 {
            let synthetic = two_task(
                1,
                step as u64,
                &SyntheticConfig {
                    policies: n,
                    ..Default::default()
                },
            );
            let out = net.infer(&synthetic[0].set).unwrap();
            violations += usize::from(!simplex(out.attention.as_ref().unwrap()));
            slots.push(HistorySlot {
                context: out.context,
                theta: out.theta,
            });
            let mix = tan
                .forward(&bootstrap_history(&slots, 10).unwrap())
                .unwrap();
            violations +=
                usize::from(!simplex(&mix.weights) || mix.theta.iter().any(|t| !t.is_finite()));
        }
    }
    ensure(
        worst < 1e-12 && violations == 0,
        format!(
            "max oracle deviation {worst:.1e}, {violations} invariant violations in 1000 steps"
        ),
    )
}

fn single_context_convergence() -> Check {
    let records = single_task(200, 3, &SyntheticConfig::default());
    let config = LirlConfig::default();
    let w = DistanceWeights::default();
    let run = train_lirl(&records, &[], &config, 1, &w).unwrap();
    let before = evaluate_records(&records, |_| config.initial_theta.clone(), &w).unwrap();
    let after = evaluate_records(&records, |_| run.theta.theta.clone(), &w).unwrap();
    let gain = after.demo_probability / before.demo_probability;
    let ratio = after.ed / before.ed;
    ensure(
        config.epochs <= 200 && gain >= 5.0 && ratio <= 0.5,
        format!(
            "p(demo) x{gain:.1}, ED {:.3} -> {:.3} (x{ratio:.2}) in {} epochs",
            before.ed, after.ed, config.epochs
        ),
    )
}

fn multi_context_separation() -> Check {
    let w = DistanceWeights::default();
    let cfg = SyntheticConfig::default();
    let nn = NnConfig {
        epochs: 40,
        lambda_att: 0.0,
        ..Default::default()
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=3u64 {
        let train = two_task(200, seed, &cfg);
        let test = two_task(100, seed + 100, &cfg);
        let lirl = train_lirl(&train, &[], &LirlConfig::default(), seed, &w).unwrap();
        let pacnn = train_policy_net(Architecture::Pacnn, &train, &[], &nn, seed, &w).unwrap();
        let out = predict(&pacnn.net, &test).unwrap();
        let e_lirl = evaluate_records(&test, |_| lirl.theta.theta.clone(), &w)
            .unwrap()
            .ed;
        let e_pacnn = evaluate_records(&test, |i| out[i].theta.clone(), &w)
            .unwrap()
            .ed;
        ok &= e_pacnn < e_lirl;
        lines.push(format!(
            "seed {seed}: PACNN {e_pacnn:.3} vs LIRL {e_lirl:.3}"
        ));
    }
    ensure(ok, format!("mean ED {}", lines.join(", ")))
}

fn attention_semantics() -> Check {
    let w = DistanceWeights::default();
    let cfg = SyntheticConfig::default();
    let train = two_task(200, 1, &cfg);
    let val = two_task(100, 101, &cfg);
    let nn = NnConfig {
        epochs: 120,
        ..Default::default()
    };
    let run = train_policy_net(Architecture::Pacnn, &train, &[], &nn, 1, &w).unwrap();
    let mut better = 0;
    for r in &val {
        let input = PolicyInput::from_set(&r.set, &run.net.dims).unwrap();
        let a = run.net.forward(&input).unwrap().attention.unwrap();
        let d = attention_slot_distances(
            &input.slots,
            &normalized_distances(&r.set, r.demo.index, &w).unwrap(),
        )
        .unwrap();
        let attended: f64 = a.iter().zip(&d).map(|(x, y)| x * y).sum();
        let real = input.slots.iter().filter(|s| s.is_some()).count() as f64;
        let uniform = d.iter().sum::<f64>() / real;
        better += usize::from(attended < uniform);
    }
    let share = better as f64 / val.len() as f64;
    ensure(
        share >= 0.8,
        format!(
            "attended distance below uniform on {:.0}% of {} validation cycles",
            share * 100.0,
            val.len()
        ),
    )
}

fn temporal_persistence() -> Check {
    let w = DistanceWeights::default();
    let cfg = SyntheticConfig::default();
    let h = 10;
    let switches = [100, 200];
    let train = sequential(600, &[150, 300, 450], 0, 1, &cfg);
    let test = sequential(300, &switches, 0, 101, &cfg);
    let nn = NnConfig {
        epochs: 40,
        ..Default::default()
    };
    let pacnn = train_policy_net(Architecture::Pacnn, &train, &[], &nn, 1, &w).unwrap();
    let tan = train_tan(&train, &pacnn.net, &TanConfig::default(), 1)
        .unwrap()
        .tan;
    let out = predict(&pacnn.net, &test).unwrap();
    let slots: Vec<HistorySlot> = out
        .iter()
        .map(|o| HistorySlot {
            context: o.context.clone(),
            theta: o.theta.clone(),
        })
        .collect();
    // Mixture for cycle t + 1 from the history ending at cycle t.
    let mixed: Vec<(Vec<f64>, Vec<f64>)> = (0..test.len())
        .map(|t| {
            let m = tan
                .forward(&bootstrap_history(&slots[..=t], h).unwrap())
                .unwrap();
            (m.weights, m.theta)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let near_switch = |t: usize| t < h || switches.iter().any(|&s| t + 1 >= s && t < s + h);
    let mut worst = 0.0f64;
    for t in 1..test.len() {
        if near_switch(t) || near_switch(t - 1) {
            continue;
        }
        let diff: Vec<f64> = mixed[t]
            .1
            .iter()
            .zip(&mixed[t - 1].1)
            .map(|(a, b)| a - b)
            .collect();
        worst = worst.max(norm(&diff) / norm(&mixed[t - 1].1));
    }
    let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    let mut recent = 0;
    let mut total = 0;
    for &s in &switches {
        for m in &mixed[s..s + h] {
            total += 1;
            recent += usize::from(argmax(&m.0) == h - 1);
        }
    }
    ensure(
        worst < 0.05 && recent == total,
        format!(
            "max relative change {:.2}% in stationary segments; newest slot is the argmax on {recent}/{total} post-switch cycles",
            worst * 100.0
        ),
    )
}

// ---------------------------------------------------------------- simulation

const SIM_CONFIG: &str = r#"
[collect]
train_laps = [101, 102, 103, 104, 105, 106]
val_laps = [107]
test_laps = [108]

[nn]
epochs = 60
"#;

struct Simulation {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: Config,
    ptacnn: Model,
    elapsed: Duration,
}

fn simulation() -> Simulation {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = Config::from_toml(SIM_CONFIG).unwrap();
    collect(&config, 7, &root.join("data")).unwrap();
    let manifest = root.join("data/training.json");
    let request = TrainRequest {
        config: &config,
        manifest: &manifest,
        sequence: None,
        method: Method::PtacnnS,
        history: 10,
        seed: 1,
        out: &root.join("ptacnn"),
    };
    train(&request).unwrap();
    let ptacnn = Model::load(&root.join("ptacnn")).unwrap();
    Simulation {
        _dir: dir,
        root,
        config,
        ptacnn,
        elapsed: started.elapsed(),
    }
}

fn demonstration_floor(sim: &Simulation) -> Check {
    let manifest = sim.root.join("data/training.json");
    let expert = sim.root.join("data/expert.json");
    let mut models = vec![sim.ptacnn.clone()];
    for (method, epochs) in [
        (Method::Lirl, 0),
        (Method::Cnn1d, 10),
        (Method::BiCnn1d, 10),
        (Method::Pacnn, 10),
    ] {
        let mut config = sim.config.clone();
        config.nn.epochs = epochs;
        let out = sim.root.join(method.name());
        train(&TrainRequest {
            config: &config,
            manifest: &manifest,
            sequence: None,
            method,
            history: 10,
            seed: 1,
            out: &out,
        })
        .unwrap();
        models.push(Model::load(&out).unwrap());
    }
    let mut lines = Vec::new();
    let mut ok = true;
    for model in &models {
        let out = sim.root.join(format!("eval-{}", model.method().name()));
        let summary = eval(&sim.config, &expert, model, 10, &out).unwrap().summary;
        let floor = summary.demonstration_floor.unwrap_or(0.0);
        ok &= floor >= 0.95;
        lines.push(format!("{} {:.1}%", model.method(), floor * 100.0));
    }
    ensure(
        ok,
        format!(
            "optimal policy at or beyond the demonstration's odometry distance: {}",
            lines.join(", ")
        ),
    )
}

fn closed_loop_competence(sim: &Simulation) -> Check {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=3u64 {
        let lap = drive(&sim.config, &sim.ptacnn, seed, 10, 400)
            .unwrap()
            .summary;
        ok &= lap.success() && lap.checkpoint_hits.len() == 4 && lap.stops_satisfied.len() == 2;
        lines.push(format!(
            "seed {seed}: {}/4 checkpoints, {}/2 stops, {} collisions, {} cycles",
            lap.checkpoint_hits.iter().filter(|h| **h).count(),
            lap.stops_satisfied.iter().filter(|s| **s).count(),
            lap.collisions,
            lap.cycles
        ));
    }
    let total = sim.elapsed + started.elapsed();
    ok &= total < Duration::from_secs(30 * 60);
    let policies = sim
        .config
        .planner
        .branching
        .pow(sim.config.planner.depth as u32);
    ensure(
        ok && policies == 256 && sim.config.scenario.vehicle_count == 3,
        format!(
            "{}; {policies} policies per cycle; {:.0} s including collection and training",
            lines.join("; "),
            total.as_secs_f64()
        ),
    )
}

fn pirl(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_pirl"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "pirl {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn run_pipeline(root: &Path, model: &Path) {
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    let synth = s(root.join("synthetic.toml"));
    std::fs::write(&synth, "[collect]\nkind = \"two-task\"\ncycles = 40\nswitches = [15, 30]\n\n[nn]\nepochs = 3\n\n[lirl]\nepochs = 5\n\n[tan]\nepochs = 2\n").unwrap();
    let sim = s(root.join("sim.toml"));
    std::fs::write(
        &sim,
        "[collect]\ncycles = 20\ntrain_laps = [101]\nval_laps = []\ntest_laps = [102]\n",
    )
    .unwrap();
    let data = s(root.join("synthetic"));
    pirl(&["collect", "--config", &synth, "--seed", "4", "--out", &data]);
    for method in ["lirl", "bi1dcnn", "ptacnn+s"] {
        let m = s(root.join(format!("model-{method}")));
        let e = s(root.join(format!("eval-{method}")));
        pirl(&[
            "train",
            "--config",
            &synth,
            "--manifest",
            &format!("{data}/training.json"),
            "--method",
            method,
            "--seed",
            "2",
            "--out",
            &m,
        ]);
        pirl(&[
            "eval",
            "--config",
            &synth,
            "--manifest",
            &format!("{data}/expert.json"),
            "--model",
            &m,
            "--out",
            &e,
        ]);
    }
    let runs: Vec<String> = ["lirl", "bi1dcnn", "ptacnn+s"]
        .iter()
        .map(|m| s(root.join(format!("eval-{m}"))))
        .collect();
    let mut report = vec!["report"];
    report.extend(runs.iter().map(String::as_str));
    let rep = s(root.join("report"));
    report.extend(["--out", rep.as_str()]);
    pirl(&report);
    pirl(&[
        "collect",
        "--config",
        &sim,
        "--seed",
        "3",
        "--out",
        &s(root.join("sim")),
    ]);
    pirl(&[
        "closedloop",
        "--model",
        model.to_str().unwrap(),
        "--seed",
        "2",
        "--cycles",
        "12",
        "--out",
        &s(root.join("loop")),
    ]);
}

fn determinism(sim: &Simulation) -> Check {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let model = sim.root.join("ptacnn");
    run_pipeline(a.path(), &model);
    run_pipeline(b.path(), &model);
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let differing: Vec<String> = ta
        .iter()
        .filter(|(p, bytes)| tb.get(*p) != Some(*bytes))
        .map(|(p, _)| p.display().to_string())
        .collect();
    ensure(
        ta.len() > 30 && ta.len() == tb.len() && differing.is_empty(),
        format!(
            "{} files from collect, train, eval, report and closedloop; differing: {differing:?}",
            ta.len()
        ),
    )
}

// ---------------------------------------------------------------- runner

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("PIRL_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |n: usize| selected.as_ref().is_none_or(|s| s.contains(&n));
    let mut failures = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if !wanted(n) {
            return;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {n} {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {n} {name} ({secs:.1} s): {detail}");
            }
        }
    };
    report(1, "gradient fidelity", &mut gradient_fidelity);
    report(2, "distribution and metric oracles", &mut metric_oracles);
    report(
        3,
        "single-context convergence",
        &mut single_context_convergence,
    );
    report(4, "multi-context separation", &mut multi_context_separation);
    report(5, "attention semantics", &mut attention_semantics);
    report(
        6,
        "temporal persistence and switching",
        &mut temporal_persistence,
    );
    if [7, 8, 9].into_iter().any(wanted) {
        let sim = simulation();
        report(7, "demonstration floor", &mut || demonstration_floor(&sim));
        report(8, "closed-loop task competence", &mut || {
            closed_loop_competence(&sim)
        });
        report(9, "determinism", &mut || determinism(&sim));
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
