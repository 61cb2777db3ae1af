//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single `PASS`/`FAIL` line straight to stderr (bypassing the test
//! harness's capture) before asserting.
//!
//! Criteria 1, 2, 4 and 5 share one expensive run: five training seeds at
//! 1e6 environment steps each, then 200 evaluation episodes per seed for the
//! trained agent and the three scripted baselines.

use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use toolsched::dynamics::step_motion;
use toolsched::energy::flight_cost;
use toolsched::env::{heading_to_goal, observation_len, BaselineKind, Episode, TerminationCause};
use toolsched::eval::stats::mann_whitney;
use toolsched::eval::{evaluate, pool, EvalReport, LearnedPolicy, ScriptedPolicy};
use toolsched::harness::run::{run_eval, run_train, EvalJob, Subject, TrainJob};
use toolsched::learner::gae::gae;
use toolsched::learner::policy::sample_action;
use toolsched::learner::adam::Adam;
use toolsched::learner::ppo::{minibatch_loss, ppo_update, PpoConfig, RolloutBuffer, Scratch};
use toolsched::learner::{train, PolicyNet};
use toolsched::shield::screen;
use toolsched::world::rng::RngStream;
use toolsched::{Action, ToolKind, ToolServer, UavState, Vec2, WorldConfig};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EVAL_EPISODES: usize = 200;
const ALPHA: f64 = 0.05;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance criterion {id} ({name}): {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

struct Shared {
    proposed: EvalReport,
    random: EvalReport,
    greedy: EvalReport,
    costaware: EvalReport,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = WorldConfig::bundled_default();
        let ppo = PpoConfig::default();
        let start = Instant::now();
        let mut proposed = Vec::new();
        for &seed in &SEEDS {
            let t = Instant::now();
            let out = train(&cfg, &ppo, true, seed).expect("training succeeds");
            let mut policy = LearnedPolicy::new("proposed", out.net, true);
            proposed.push(evaluate(&mut policy, &cfg, EVAL_EPISODES, seed, false));
            let _ = writeln!(
                std::io::stderr(),
                "  trained seed {seed} ({} steps) in {:.0?}",
                ppo.total_steps,
                t.elapsed()
            );
        }
        let baseline = |kind| {
            let reports: Vec<_> = SEEDS
                .iter()
                .map(|&s| evaluate(&mut ScriptedPolicy::new(kind), &cfg, EVAL_EPISODES, s, false))
                .collect();
            pool(&reports).unwrap()
        };
        let s = Shared {
            proposed: pool(&proposed).unwrap(),
            random: baseline(BaselineKind::Random),
            greedy: baseline(BaselineKind::Greedy),
            costaware: baseline(BaselineKind::CostAware),
        };
        let _ = writeln!(std::io::stderr(), "  shared training and evaluation took {:.0?}", start.elapsed());
        s
    })
}

#[test]
fn criterion_1_method_ordering() {
    let s = shared();
    let chain = [&s.proposed, &s.costaware, &s.greedy, &s.random];
    let mut pass = true;
    let mut parts = Vec::new();
    for w in chain.windows(2) {
        let t = mann_whitney(&w[0].returns, &w[1].returns);
        let ok = w[0].mean_return > w[1].mean_return && t.p_value < ALPHA;
        pass &= ok;
        parts.push(format!(
            "{} {:.1} > {} {:.1} (p={:.2e})",
            w[0].method, w[0].mean_return, w[1].method, w[1].mean_return, t.p_value
        ));
    }
    verdict(1, "method ordering", pass, &parts.join("; "));
    assert!(pass, "{}", parts.join("; "));
}

#[test]
fn criterion_2_constraint_internalization() {
    let s = shared();
    let (p, g, c) = (s.proposed.crash_rate, s.greedy.crash_rate, s.costaware.crash_rate);
    let pass = p <= 0.05 && p < g && g > c;
    let detail = format!("depletion rate proposed {p:.3} (shield off), greedy {g:.3}, cost-aware {c:.3}");
    verdict(2, "constraint internalization", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_shield_soundness() {
    let start = Instant::now();
    let mut cfg = WorldConfig::empty_arena();
    let n = 50;
    let max_goal = cfg.arena_size * std::f64::consts::SQRT_2;
    let range = 150.0;
    let (mut permitted, mut violations, mut wrongly_refused) = (0u64, 0u64, 0u64);
    for kind in [ToolKind::Standard, ToolKind::Semantic] {
        for ie in 0..n {
            let energy = cfg.initial_energy * ie as f64 / (n - 1) as f64;
            for ig in 0..n {
                let d_goal = max_goal * ig as f64 / (n - 1) as f64;
                for is in 0..n {
                    let d_server = range * is as f64 / (n - 1) as f64;
                    let pos = cfg.goal_pos - Vec2::new(d_goal, 0.0);
                    cfg.servers = vec![ToolServer::new(0, kind, pos + Vec2::new(0.0, d_server))];
                    let mut st = UavState::at_start(&cfg);
                    st.pos_true = pos;
                    st.pos_believed = pos;
                    st.energy = energy;
                    let v = screen(Action::new(Vec2::ZERO, true), &st, &cfg);
                    // Independent prices: 200 + 0.04 d^2 per standard upload,
                    // 600 per semantic query, 90 J per full-speed 20 m step.
                    let cost = match kind {
                        ToolKind::Standard => 200.0 + 0.04 * d_server * d_server,
                        ToolKind::Semantic => 600.0,
                    };
                    let reserve = (d_goal / 20.0).ceil() * 90.0;
                    let safe = energy - cost >= reserve;
                    if v.final_action.activate {
                        permitted += 1;
                        violations += u64::from(!safe);
                    } else if safe {
                        wrongly_refused += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations == 0 && permitted > 0 && elapsed.as_secs_f64() < 10.0;
    let detail = format!(
        "{} grid points per kind, {permitted} permitted, {violations} violations, {wrongly_refused} safe calls refused, {elapsed:.1?}",
        n * n * n
    );
    verdict(3, "shield soundness", pass, &detail);
    assert!(pass, "{detail}");
    assert_eq!(wrongly_refused, 0, "shield refused affordable calls");
}

#[test]
fn criterion_4_activation_geometry() {
    let s = shared();
    let (std_r, sem_r) = (&s.proposed.activation_ratios_standard, &s.proposed.activation_ratios_semantic);
    let t = mann_whitney(std_r, sem_r);
    let (ms, mm) = (s.proposed.mean_activation_ratio_standard, s.proposed.mean_activation_ratio_semantic);
    let pass = s.proposed.episodes >= 100
        && matches!((ms, mm), (Some(a), Some(b)) if a < b)
        && t.p_value < ALPHA;
    let detail = format!(
        "distance/range standard {} (n={}), semantic {} (n={}), p={:.3}",
        ms.map_or("n/a".into(), |x| format!("{x:.3}")),
        std_r.len(),
        mm.map_or("n/a".into(), |x| format!("{x:.3}")),
        sem_r.len(),
        t.p_value
    );
    verdict(4, "activation geometry", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_redundancy_suppression() {
    let s = shared();
    let p = s.proposed.redundant_activation_rate;
    let g = s.greedy.redundant_activation_rate;
    let pass = matches!((p, g), (Some(p), Some(g)) if p < 0.10 && p < g);
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    let detail = format!(
        "redundant rate proposed {} ({} of {} guided in-range steps), greedy {}",
        fmt(p),
        s.proposed.redundant_activations,
        s.proposed.redundant_opportunities,
        fmt(g)
    );
    verdict(5, "redundancy suppression", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_drift_physics() {
    let start = Instant::now();
    let cfg = WorldConfig::empty_arena();
    let rollouts = 100_000u64;
    let checkpoints = [10u32, 50, 100];
    let mut sums = [[0.0f64; 2]; 3];
    let mut sq = [[0.0f64; 2]; 3];
    for i in 0..rollouts {
        let mut rng = RngStream::new(2024, "drift-check", i);
        let mut st = UavState::at_start(&cfg);
        for step in 1..=100u32 {
            st = step_motion(&st, Vec2::ZERO, &cfg, &mut rng);
            if let Some(k) = checkpoints.iter().position(|&c| c == step) {
                for (axis, d) in [st.drift.x, st.drift.y].into_iter().enumerate() {
                    sums[k][axis] += d;
                    sq[k][axis] += d * d;
                }
            }
        }
    }
    let n = rollouts as f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, &t) in checkpoints.iter().enumerate() {
        let expected = f64::from(t) * cfg.sigma_drift * cfg.sigma_drift;
        for axis in 0..2 {
            let mean = sums[k][axis] / n;
            let var = (sq[k][axis] - n * mean * mean) / (n - 1.0);
            let rel = (var - expected).abs() / expected;
            pass &= rel <= 0.05;
            parts.push(format!("t={t} {} {var:.2}/{expected:.0}", ["x", "y"][axis]));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 10.0;
    let detail = format!("{} ({elapsed:.1?})", parts.join(", "));
    verdict(6, "drift physics", pass, &detail);
    assert!(pass, "{detail}");
}

fn perturbed_net(input: usize, hidden: usize, seed: u64, scale: f64) -> PolicyNet {
    let mut net = PolicyNet::new(input, hidden, &mut RngStream::new(seed, "init", 0));
    let mut rng = RngStream::new(seed, "perturb", 0);
    for p in net.params_mut() {
        *p += scale * rng.normal();
    }
    net
}

fn synthetic_buffer(actor: &PolicyNet, n: usize, seed: u64) -> RolloutBuffer {
    let mut rng = RngStream::new(seed, "buffer", 0);
    let mut buf = RolloutBuffer::new(actor.input_len());
    for t in 0..n {
        let obs: Vec<f64> = (0..actor.input_len()).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let (s, lp, v) = sample_action(actor, &obs, &mut rng).unwrap();
        buf.push(&obs, s, Action::default(), lp, v, rng.normal(), t % 9 == 8);
    }
    buf.compute_advantages(0.97, 0.9).unwrap();
    buf
}

#[test]
fn criterion_7_learner_oracles() {
    // Gradient check against central differences.
    let actor = perturbed_net(6, 8, 1, 0.4);
    let buf = synthetic_buffer(&actor, 32, 2);
    let mut net = actor.clone();
    let mut rng = RngStream::new(3, "shift", 0);
    for p in net.params_mut() {
        *p += 0.05 * rng.normal();
    }
    let cfg = PpoConfig {
        entropy_coef: 0.05,
        ..PpoConfig::default()
    };
    let idx: Vec<usize> = (0..buf.len()).collect();
    let mut scratch = Scratch::default();
    let mut grad = vec![0.0; net.params().len()];
    minibatch_loss(&net, &buf, &idx, &cfg, &mut scratch, Some(&mut grad)).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..net.params().len() {
        let mut plus = net.clone();
        plus.params_mut()[k] += h;
        let mut minus = net.clone();
        minus.params_mut()[k] -= h;
        let lp = minibatch_loss(&plus, &buf, &idx, &cfg, &mut scratch, None).unwrap().total;
        let lm = minibatch_loss(&minus, &buf, &idx, &cfg, &mut scratch, None).unwrap().total;
        let fd = (lp - lm) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6));
    }

    // GAE with lambda = 1 against brute-force discounted returns.
    let mut rng = RngStream::new(4, "gae", 0);
    let len = 80;
    let rewards: Vec<f64> = (0..len).map(|_| 10.0 * rng.normal()).collect();
    let values: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
    let mut dones = vec![false; len];
    dones[len - 1] = true;
    let gamma = 0.95;
    let (adv, _) = gae(&rewards, &values, &dones, 50.0, gamma, 1.0).unwrap();
    let gae_err = (0..len)
        .map(|t| {
            let g: f64 = rewards[t..].iter().enumerate().map(|(j, r)| gamma.powi(j as i32) * r).sum();
            (adv[t] - (g - values[t])).abs()
        })
        .fold(0.0, f64::max);

    // First-epoch ratios of a real update.
    let fresh = PolicyNet::new(observation_len(4), 64, &mut RngStream::new(5, "init", 0));
    let buf = synthetic_buffer(&fresh, 512, 6);
    let mut updated = fresh.clone();
    let mut adam = Adam::new(updated.params().len(), 3e-4);
    let ppo = PpoConfig {
        minibatch_size: 128,
        ..PpoConfig::default()
    };
    let stats = ppo_update(&mut updated, &mut adam, &buf, &ppo, &mut RngStream::new(5, "shuffle", 0)).unwrap();

    let pass = worst <= 1e-4
        && gae_err <= 1e-10
        && (stats.initial_mean_ratio - 1.0).abs() <= 1e-9
        && stats.initial_max_ratio_dev <= 1e-9
        && stats.initial_clip_fraction == 0.0;
    let detail = format!(
        "worst gradient rel. error {worst:.2e}, GAE max error {gae_err:.2e}, first ratio {:.12} (max dev {:.1e}), clip fraction {}",
        stats.initial_mean_ratio, stats.initial_max_ratio_dev, stats.initial_clip_fraction
    );
    verdict(7, "learner oracles", pass, &detail);
    assert!(pass, "{detail}");
}

fn files_under(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_8_determinism() {
    let cfg = WorldConfig::bundled_default();
    let ppo = PpoConfig {
        total_steps: 16_384,
        ..PpoConfig::default()
    };
    let run = |root: &Path| {
        for shield in [true, false] {
            run_train(&TrainJob {
                cfg: cfg.clone(),
                ppo: ppo.clone(),
                shield,
                seeds: vec![7, 8],
                out: root.to_path_buf(),
                parallel: false,
            })
            .unwrap();
        }
        let eval = |subject, stochastic| EvalJob {
            cfg: cfg.clone(),
            subject,
            seeds: vec![7, 8],
            episodes: 20,
            shield: false,
            stochastic,
            traced: 3,
            out: root.to_path_buf(),
        };
        let ckpt = Subject::Checkpoint {
            path: root.join("train/proposed"),
            name: None,
        };
        run_eval(&eval(ckpt, true)).unwrap();
        run_eval(&eval(Subject::Baseline(BaselineKind::Random), false)).unwrap();
        files_under(root)
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (fa, fb) = (run(a.path()), run(b.path()));
    let kinds = |suffix: &str| fa.iter().filter(|(n, _)| n.ends_with(suffix)).count();
    let names_match = fa.iter().map(|f| &f.0).eq(fb.iter().map(|f| &f.0));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let pass = names_match && differing.is_empty() && kinds("checkpoint.json") == 4 && kinds(".jsonl") == 12;
    let detail = format!(
        "{} files compared ({} checkpoints, {} curves, {} traces), {} differ",
        fa.len(),
        kinds("checkpoint.json"),
        kinds("curve.csv"),
        kinds(".jsonl"),
        differing.len()
    );
    verdict(8, "determinism", pass, &detail);
    assert!(pass, "{detail}; differing: {differing:?}");
}

#[test]
fn criterion_9_reward_oracle() {
    let cfg = WorldConfig {
        sigma_drift: 0.0,
        ..WorldConfig::empty_arena()
    };
    let (mut ep, _) = Episode::reset(&cfg, 0);
    let mut cause = TerminationCause::Running;
    while !ep.is_done() {
        let v = heading_to_goal(ep.state(), &cfg);
        cause = ep.step(Action::new(v, false), false).cause;
    }
    let simulated = ep.episode_return();
    let steps = ep.state().steps_elapsed;

    // Closed form from the reward parameters: full-speed steps until the
    // goal disc is reached, each earning its believed progress and paying
    // time and flight energy, then the goal bonus.
    let rp = &cfg.reward_params;
    let step_len = cfg.v_max * cfg.dt;
    let n = ((cfg.start_pos.distance(cfg.goal_pos) - cfg.goal_radius) / step_len).ceil();
    let per_step_energy = flight_cost(Vec2::new(cfg.v_max, 0.0), &cfg.energy_params, cfg.dt);
    let closed = rp.w_progress * n * step_len - rp.w_time * n - rp.w_energy * n * per_step_energy + rp.r_goal;

    let pass = cause == TerminationCause::Goal && f64::from(steps) == n && (simulated - closed).abs() <= 1e-9;
    let detail = format!("{steps} steps, simulated {simulated:.9}, closed form {closed:.9}");
    verdict(9, "reward oracle", pass, &detail);
    assert!(pass, "{detail}");
}
