//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-3, 9 and 10 are exact properties; any failure there exits
//! nonzero. Criteria 4-8 compare learned behaviour against published
//! orderings; they are measured and reported faithfully, and a FAIL there
//! is a finding rather than a build break.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use hidejam_core::arena::{run, SlotLog};
use hidejam_core::channel::Channel;
use hidejam_core::dqn::{
    select_action, Architecture, Experience, LayerSpec, QNetworkParams, ReplayBuffer, StateMatrix, Trainer,
};
use hidejam_core::experiment::{run_experiment, policy_jammer_grid, ExperimentSpec, RunResult};
use hidejam_core::hiding::{distance_bias, max_correlation, rho, LagRange, Slot, Window};
use hidejam_core::jammer::{QJammerConfig, QJammerState};
use hidejam_core::metrics::{self, MetricsRow};
use hidejam_core::policy::PolicyKind;
use hidejam_core::scenario::{JammerKind, ScenarioConfig};
use hidejam_core::spectrum::{channel_power_fraction, ChannelPlan, EmitterRole, EmitterSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SEEDS: [u64; 3] = [1, 2, 3];

struct Verdict {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn report(v: &Verdict) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {:>2}: {} | {}", v.id, v.title, v.detail);
}

// ---------------------------------------------------------------- 1

/// Direct evaluation of the lag-correlation definition: pair x[n] with
/// y[n - m], tally differences, score the modal count over L.
fn oracle_rho(x: &[usize], y: &[usize], m: i64) -> (f64, Vec<i64>) {
    let len = x.len() as i64;
    let mut tally: BTreeMap<i64, usize> = BTreeMap::new();
    for n in 0..len {
        let j = n - m;
        if (0..len).contains(&j) {
            *tally.entry(x[n as usize] as i64 - y[j as usize] as i64).or_default() += 1;
        }
    }
    let top = tally.values().copied().max().unwrap_or(0);
    let modes = tally.into_iter().filter(|&(_, c)| c == top && top > 0).map(|(k, _)| k).collect();
    (top as f64 / len as f64, modes)
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let all: Vec<[usize; 4]> = (0..81)
        .map(|mut i| {
            let mut s = [0; 4];
            for c in &mut s {
                *c = 1 + i % 3;
                i /= 3;
            }
            s
        })
        .collect();
    let as_slots = |s: &[usize; 4]| -> Vec<Slot> { s.iter().map(|&c| Channel::new(c, 3)).collect() };
    let w = Window::plain(4);
    let ranges = [LagRange::new(0, 3, 4).unwrap(), LagRange::new(-3, 3, 4).unwrap(), LagRange::new(1, 2, 4).unwrap()];
    let mut mismatches = 0usize;
    let mut checks = 0usize;
    for x in &all {
        for y in &all {
            let (xs, ys) = (as_slots(x), as_slots(y));
            let mut per_lag = BTreeMap::new();
            for m in -3..=3 {
                let (want, modes) = oracle_rho(x, y, m);
                per_lag.insert(m, want);
                checks += 2;
                if rho(&xs, &ys, m, w) != want {
                    mismatches += 1;
                }
                let k = distance_bias(&xs, &ys, m, w);
                if k.map_or(!modes.is_empty(), |k| !modes.contains(&k)) {
                    mismatches += 1;
                }
            }
            for r in &ranges {
                checks += 1;
                let want = r.lags().map(|m| per_lag[&m]).fold(0.0, f64::max);
                if max_correlation(&xs, &ys, r, w) != want {
                    mismatches += 1;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 1,
        title: "hiding-metric oracle equivalence (3^8 pairs)",
        pass: mismatches == 0 && secs < 5.0,
        detail: format!("{checks} comparisons, {mismatches} mismatches, {secs:.2}s"),
    }
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Verdict {
    let mut cfg = ScenarioConfig { decision_slots: 2000, ..ScenarioConfig::default() };
    cfg.user.policy = PolicyKind::Fhss;
    cfg.jammer.kind = JammerKind::Follower;
    cfg.jammer.detection.threshold_db = f64::NEG_INFINITY;
    cfg.environment.clear();
    let logs = run(cfg.clone()).expect("scenario runs");
    let fill = cfg.user.reward.window + cfg.user.reward.max_lag as usize + 1;
    let after = &logs[fill..];
    let mean_r = metrics::mean_correlation(after);
    let sensing = metrics::sensing_probability(&logs);
    let exact = after.iter().all(|l| l.correlation == 1.0);
    Verdict {
        id: 2,
        title: "follower identity",
        pass: exact && mean_r == 1.0 && sensing == 1.0,
        detail: format!("mean R after slot {fill} = {mean_r}, sensing probability = {sensing}"),
    }
}

// ---------------------------------------------------------------- 3

fn random_arch(rng: &mut ChaCha8Rng) -> Architecture {
    let rows = rng.gen_range(5..=9);
    let cols = rng.gen_range(3..=5);
    let kr = rng.gen_range(1..=3);
    let kc = rng.gen_range(1..=cols.min(3));
    let mut layers = vec![LayerSpec::Conv {
        filters: rng.gen_range(1..=3),
        kernel: (kr, kc),
        stride: (rng.gen_range(1..=2), 1),
        relu: rng.gen_bool(0.7),
    }];
    if rng.gen_bool(0.5) {
        layers.push(LayerSpec::Conv { filters: rng.gen_range(1..=3), kernel: (1, 1), stride: (1, 1), relu: true });
    }
    layers.push(LayerSpec::Dense { units: rng.gen_range(2..=6), relu: true });
    layers.push(LayerSpec::Dense { units: cols, relu: false });
    Architecture { input: (rows, cols), layers }
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut params_checked = 0;
    for _ in 0..20 {
        let arch = random_arch(&mut rng);
        let (rows, cols) = arch.input;
        // Glorot leaves biases at 0, so a unit fed only by dead ReLUs sits exactly
        // on its kink where no derivative exists; jitter every parameter off it.
        let mut p = QNetworkParams::glorot(arch.clone(), &mut rng).unwrap();
        for w in p.weights_mut() {
            *w += rng.gen_range(-0.1..0.1);
        }
        let target = QNetworkParams::glorot(arch, &mut rng).unwrap();
        let state = |rng: &mut ChaCha8Rng| {
            Arc::new(StateMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen()).collect()).unwrap())
        };
        let exps: Vec<Experience> = (0..4)
            .map(|_| Experience {
                state: state(&mut rng),
                action: Channel::from_index(rng.gen_range(0..cols)),
                reward: rng.gen_range(-1.0..3.0),
                next_state: state(&mut rng),
            })
            .collect();
        let batch: Vec<&Experience> = exps.iter().collect();
        let mut t = Trainer::new();
        let grad = t.loss_and_gradient(&p, &target, &batch, 0.8).unwrap().1.to_vec();
        let h = 1e-6;
        for i in 0..p.weights().len() {
            let mut plus = p.clone();
            plus.weights_mut()[i] += h;
            let mut minus = p.clone();
            minus.weights_mut()[i] -= h;
            let lp = t.loss_and_gradient(&plus, &target, &batch, 0.8).unwrap().0;
            let lm = t.loss_and_gradient(&minus, &target, &batch, 0.8).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-4);
            worst = worst.max(err);
            params_checked += 1;
        }
    }
    Verdict {
        id: 3,
        title: "analytic vs central-difference gradients, 20 random nets",
        pass: worst < 1e-4,
        detail: format!("{params_checked} parameters, worst relative error {worst:.2e}"),
    }
}

// ---------------------------------------------------------------- 4-8

struct Grid {
    runs: Vec<RunResult>,
}

impl Grid {
    fn run() -> Self {
        let base = ScenarioConfig::default();
        let spec = ExperimentSpec {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            ..ExperimentSpec::new(policy_jammer_grid(&base), SEEDS.to_vec())
        };
        Self { runs: run_experiment(&spec).expect("grid runs").runs }
    }

    fn get(&self, policy: PolicyKind, jammer: JammerKind, seed: u64) -> &RunResult {
        self.runs
            .iter()
            .find(|r| r.policy == policy && r.jammer == jammer && r.seed == seed)
            .expect("grid covers every cell")
    }

    fn seed_mean(&self, policy: PolicyKind, jammer: JammerKind, f: impl Fn(&RunResult) -> f64) -> f64 {
        SEEDS.iter().map(|&s| f(self.get(policy, jammer, s))).sum::<f64>() / SEEDS.len() as f64
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn criterion_4(g: &Grid) -> Verdict {
    use PolicyKind::*;
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let j = |p| g.get(p, JammerKind::Follower, seed).converged.jammed_prob;
        let (afh, fhss, a, h) = (j(Afh), j(Fhss), j(Adrla), j(Adrlh));
        let ok = afh > fhss && fhss > a && a >= h && a < 0.05 && h < 0.05 && (0.06..=0.14).contains(&fhss);
        pass &= ok;
        parts.push(format!("seed {seed}: AFH {} FHSS {} ADRLA {} ADRLH {}", pct(afh), pct(fhss), pct(a), pct(h)));
    }
    Verdict { id: 4, title: "jamming ordering vs follower", pass, detail: parts.join("; ") }
}

fn criterion_5(g: &Grid) -> Verdict {
    use PolicyKind::*;
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let j = |p| g.get(p, JammerKind::Qlearning, seed).converged.jammed_prob;
        let (fhss, a, h) = (j(Fhss), j(Adrla), j(Adrlh));
        pass &= a - h >= 0.10 && fhss > 0.5;
        parts.push(format!("seed {seed}: FHSS {} ADRLA {} ADRLH {}", pct(fhss), pct(a), pct(h)));
    }
    Verdict { id: 5, title: "jamming ordering vs Q-learning jammer", pass, detail: parts.join("; ") }
}

/// Mean sensing probability over the final 20 windows.
fn tail_sensing(r: &RunResult) -> f64 {
    let rows = &r.rows[r.rows.len().saturating_sub(20)..];
    rows.iter().map(|m| m.sensing_prob).sum::<f64>() / rows.len() as f64
}

fn criterion_6(g: &Grid) -> Verdict {
    let jammer = ScenarioConfig::default().jammer.kind;
    let a = g.seed_mean(PolicyKind::Adrla, jammer, tail_sensing);
    let h = g.seed_mean(PolicyKind::Adrlh, jammer, tail_sensing);
    let reduction = if a > 0.0 { 1.0 - h / a } else { 0.0 };
    Verdict {
        id: 6,
        title: "hiding effect on jammer sensing (default scenario)",
        pass: h <= 0.5 * a,
        detail: format!("sensing ADRLA {a:.4}, ADRLH {h:.4}, reduction {}", pct(reduction)),
    }
}

/// Change of a window series between its first and last ten windows;
/// moves smaller than the dead band count as flat.
fn trend(rows: &[MetricsRow], f: impl Fn(&MetricsRow) -> f64) -> (f64, i8) {
    const DEAD_BAND: f64 = 0.01;
    let mean = |s: &[MetricsRow]| s.iter().map(&f).sum::<f64>() / s.len() as f64;
    let d = mean(&rows[rows.len() - 10..]) - mean(&rows[..10]);
    (d, if d.abs() < DEAD_BAND { 0 } else if d > 0.0 { 1 } else { -1 })
}

fn criterion_7(g: &Grid) -> Verdict {
    let jammer = ScenarioConfig::default().jammer.kind;
    let mut pass = true;
    let mut parts = Vec::new();
    for policy in PolicyKind::ALL {
        let windows = g.get(policy, jammer, SEEDS[0]).rows.len();
        let averaged: Vec<MetricsRow> = (0..windows)
            .map(|w| {
                let at = |f: fn(&MetricsRow) -> f64| g.seed_mean(policy, jammer, |r| f(&r.rows[w]));
                MetricsRow {
                    window: w,
                    sensing_prob: at(|m| m.sensing_prob),
                    mean_r: at(|m| m.mean_r),
                    norm_throughput: at(|m| m.norm_throughput),
                    jammed_prob: at(|m| m.jammed_prob),
                }
            })
            .collect();
        let (dr, sr) = trend(&averaged, |m| m.mean_r);
        let (ds, ss) = trend(&averaged, |m| m.sensing_prob);
        pass &= sr == ss;
        parts.push(format!("{policy}: dR {dr:+.4} ({sr:+}) dSense {ds:+.4} ({ss:+})"));
    }
    Verdict { id: 7, title: "R and sensing trends agree per policy", pass, detail: parts.join("; ") }
}

fn criterion_8(g: &Grid) -> Verdict {
    use PolicyKind::*;
    let jammer = ScenarioConfig::default().jammer.kind;
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let t = |p| g.get(p, jammer, seed).converged.norm_throughput;
        let (fhss, afh, a, h) = (t(Fhss), t(Afh), t(Adrla), t(Adrlh));
        pass &= h > fhss && h > afh && (h - a).abs() <= 0.15;
        parts.push(format!("seed {seed}: FHSS {fhss:.3} AFH {afh:.3} ADRLA {a:.3} ADRLH {h:.3}"));
    }
    Verdict { id: 8, title: "throughput ordering (default scenario)", pass, detail: parts.join("; ") }
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Verdict {
    let mut base = ScenarioConfig { name: "det".into(), decision_slots: 300, ..ScenarioConfig::default() };
    base.user.dqn.history_frames = 20;
    base.user.dqn.layers = Some(vec![
        LayerSpec::Conv { filters: 2, kernel: (5, 3), stride: (5, 1), relu: true },
        LayerSpec::Dense { units: 10, relu: false },
    ]);
    base.user.dqn.train.train_start_size = 32;
    let scenarios = policy_jammer_grid(&base);
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (i, d) in dirs.iter().enumerate() {
        let spec = ExperimentSpec {
            out_dir: Some(d.path().to_path_buf()),
            workers: 1 + 2 * i,
            ..ExperimentSpec::new(scenarios.clone(), vec![11, 12])
        };
        run_experiment(&spec).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let identical = names
        .iter()
        .filter(|n| std::fs::read(dirs[0].path().join(n)).unwrap() == std::fs::read(dirs[1].path().join(n)).unwrap())
        .count();
    Verdict {
        id: 9,
        title: "byte-identical CSVs on repeated runs",
        pass: identical == names.len() && names.len() == 8 * 2 + 2,
        detail: format!("{identical}/{} files identical (1 vs 3 workers)", names.len()),
    }
}

// ---------------------------------------------------------------- 10

fn power_conservation(rng: &mut ChaCha8Rng) -> f64 {
    // 41 channels; an emitter in the middle cannot leak past the band edges.
    let plan = ChannelPlan::new(0.0, 41e6, 41, 1e3).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let beta = rng.gen_range(0.0..=1.0);
        let spec = EmitterSpec::new(EmitterRole::User, rng.gen_range(-10.0..50.0), beta, &plan).unwrap();
        let centre = Channel::new(21, 41).unwrap();
        let total: f64 = plan.channels().map(|c| channel_power_fraction(centre, c, &spec, &plan).unwrap()).sum();
        worst = worst.max((total - 1.0).abs());
    }
    worst
}

fn epsilon_chi_square(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let values = [0.3, 0.9, 0.1, 0.5, 0.2, 0.8, 0.4, 0.6, 0.7, 0.0];
    let draws = 100_000;
    let mut counts = [0usize; 10];
    for _ in 0..draws {
        counts[select_action(&values, 1.0, rng).index()] += 1;
    }
    let expect = draws as f64 / 10.0;
    let stat = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.99);
    (stat, critical)
}

fn replay_worst_sigma(rng: &mut ChaCha8Rng) -> f64 {
    let state = Arc::new(StateMatrix::zeros(2, 2));
    let mut buf = ReplayBuffer::new(100);
    for i in 0..100 {
        buf.push(Experience { state: state.clone(), action: Channel::from_index(0), reward: i as f64, next_state: state.clone() });
    }
    let draws = 100_000;
    let mut counts = [0usize; 100];
    for _ in 0..draws {
        counts[buf.sample_index(rng)] += 1;
    }
    let p = 0.01;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    counts.iter().map(|&c| (c as f64 - draws as f64 * p).abs() / sigma).fold(0.0, f64::max)
}

fn q_table_bound(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let config = QJammerConfig::default();
    let mut q = QJammerState::new(10, config);
    let key = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.1) { None } else { Some(Channel::from_index(rng.gen_range(0..10))) };
    let mut prev_key = key(rng);
    let mut action = Channel::from_index(0);
    for _ in 0..50_000 {
        let new_key = key(rng);
        action = q.step(prev_key, action, if rng.gen_bool(0.5) { 1.0 } else { 0.0 }, new_key, rng);
        prev_key = new_key;
    }
    q.table().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)))
}

fn metric_ranges(rng: &mut ChaCha8Rng, grid_rows: &[&[MetricsRow]]) -> bool {
    let logs: Vec<SlotLog> = (0..1000)
        .map(|slot| {
            let user = Channel::from_index(rng.gen_range(0..10));
            let jammer = Channel::from_index(rng.gen_range(0..10));
            SlotLog {
                slot,
                user,
                jammer: Some(jammer),
                detection: rng.gen_bool(0.8).then_some(user),
                sinr: 10f64.powf(rng.gen_range(-2.0..6.0)),
                reward: 0.0,
                correlation: rng.gen(),
                jammed: user == jammer,
                training: true,
                loss: None,
            }
        })
        .collect();
    let in_unit = |r: &MetricsRow| r.values().iter().all(|v| (0.0..=1.0).contains(v));
    metrics::windowed(&logs, 37, 1e5).iter().all(in_unit) && grid_rows.iter().all(|rows| rows.iter().all(in_unit))
}

fn criterion_10(grid_rows: &[&[MetricsRow]]) -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let power = power_conservation(&mut rng);
    let (chi, critical) = epsilon_chi_square(&mut rng);
    let sigma = replay_worst_sigma(&mut rng);
    let (q_lo, q_hi) = q_table_bound(&mut rng);
    let ranges = metric_ranges(&mut rng, grid_rows);
    let secs = t0.elapsed().as_secs_f64();
    let q_ok = q_lo >= 0.0 && q_hi <= 1.0 / (1.0 - QJammerConfig::default().discount);
    Verdict {
        id: 10,
        title: "property suites",
        pass: power < 1e-6 && chi < critical && sigma < 5.0 && q_ok && ranges && secs < 60.0,
        detail: format!(
            "power err {power:.1e}; chi2 {chi:.2} < {critical:.2}; replay max {sigma:.2} sigma; Q in [{q_lo:.3}, {q_hi:.3}]; metric ranges {}; {secs:.1}s",
            if ranges { "ok" } else { "violated" }
        ),
    }
}

fn main() {
    let mut exact = vec![criterion_1(), criterion_2(), criterion_3()];
    exact.iter().for_each(report);

    let t0 = Instant::now();
    let grid = Grid::run();
    println!("         scenario grid: {} runs in {:.0}s", grid.runs.len(), t0.elapsed().as_secs_f64());
    let scenario = [criterion_4(&grid), criterion_5(&grid), criterion_6(&grid), criterion_7(&grid), criterion_8(&grid)];
    scenario.iter().for_each(report);

    let rows: Vec<&[MetricsRow]> = grid.runs.iter().map(|r| r.rows.as_slice()).collect();
    let tail = [criterion_9(), criterion_10(&rows)];
    tail.iter().for_each(report);
    exact.extend(tail);

    let passed = exact.iter().chain(&scenario).filter(|v| v.pass).count();
    println!("acceptance: {passed}/10 criteria pass");
    let broken: Vec<u8> = exact.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    if !broken.is_empty() {
        eprintln!("exact criteria failed: {broken:?}");
        std::process::exit(1);
    }
}
