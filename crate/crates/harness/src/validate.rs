//! Randomized invariant battery. Every check recomputes the quantity under
//! test by an independent route (finite differences, Monte Carlo, replaying
//! moves, brute-force thresholds) rather than calling back into the solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use smallcell_core::cela::{ure, ThresholdMode};
use smallcell_core::channel::achievable_rate;
use smallcell_core::ici::{grad_ia, grad_if, IciModel};
use smallcell_core::lloyd::nnc_partition;
use smallcell_core::{
    initial_deployment, run_interap_lloyd, run_interference_lloyd, run_lloyd, ChannelParams, Deployment,
    DistortionKind, Partition, Position, Scenario, SolverConfig, ThresholdPolicy,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub instances: usize,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, instances: usize, failures: &[String], summary: String) -> Self {
        let detail = match failures.first() {
            None => summary,
            Some(first) => format!("{} failure(s); first: {first}", failures.len()),
        };
        CheckResult { name, passed: failures.is_empty(), instances, detail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatterySize {
    pub gradient_instances: usize,
    pub kappa_zero_instances: usize,
    pub rate_draws: usize,
    pub ure_instances: usize,
    pub lloyd_instances: usize,
}

impl BatterySize {
    pub const FULL: BatterySize = BatterySize {
        gradient_instances: 50,
        kappa_zero_instances: 20,
        rate_draws: 1_000_000,
        ure_instances: 10_000,
        lloyd_instances: 100,
    };

    pub const QUICK: BatterySize = BatterySize {
        gradient_instances: 10,
        kappa_zero_instances: 4,
        rate_draws: 200_000,
        ure_instances: 1_000,
        lloyd_instances: 20,
    };
}

pub fn run_battery(size: BatterySize, seed: u64) -> Vec<CheckResult> {
    vec![
        check_gradients(size.gradient_instances, seed),
        check_kappa_zero(size.kappa_zero_instances, seed),
        check_rate_oracle(size.rate_draws, seed),
        check_ure_properties(size.ure_instances, seed),
        check_ure_hand_trace(),
        check_lloyd_monotone(size.lloyd_instances, seed),
    ]
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn uniform_point(rng: &mut ChaCha8Rng, half_width: f64) -> Position {
    Position::new(rng.random_range(-half_width..half_width), rng.random_range(-half_width..half_width))
}

/// A few Gaussian blobs, K users, kilometre coordinates.
fn blob_users(rng: &mut ChaCha8Rng, k: usize) -> Vec<Position> {
    let centres: Vec<Position> = (0..rng.random_range(1..=4)).map(|_| uniform_point(rng, 0.7)).collect();
    (0..k)
        .map(|_| {
            let c = centres[rng.random_range(0..centres.len())];
            let spread = 0.05 + 0.1 * rng.random::<f64>();
            // Box-Muller
            let (u1, u2): (f64, f64) = (1.0 - rng.random::<f64>(), rng.random::<f64>());
            let r = (-2.0 * u1.ln()).sqrt() * spread;
            let t = std::f64::consts::TAU * u2;
            Position::new(c.x + r * t.cos(), c.y + r * t.sin())
        })
        .collect()
}

/// Cell objective written out directly: mean own-cell `‖p − q‖^γ` plus κ
/// times the interference or inter-AP penalty, all in the model's frame.
fn reference_objective(
    q: Position,
    m: usize,
    aps: &[Position],
    cells: &[Vec<usize>],
    users: &[Position],
    model: &IciModel,
    inter_ap: bool,
) -> f64 {
    let d = |a: Position, b: Position| model.scale * ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let own: f64 = cells[m].iter().map(|&u| d(users[u], q).powf(model.gamma)).sum::<f64>() / cells[m].len() as f64;
    let mut penalty = 0.0;
    for j in (0..aps.len()).filter(|&j| j != m) {
        if inter_ap {
            penalty += d(aps[j], q).max(model.floor).powf(-model.gamma);
        } else if !cells[j].is_empty() {
            penalty += cells[j].iter().map(|&u| d(users[u], q).max(model.floor).powf(-model.gamma)).sum::<f64>()
                / cells[j].len() as f64;
        }
    }
    own + model.kappa * penalty
}

/// Analytic interference and inter-AP gradients against central differences.
pub fn check_gradients(instances: usize, seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 1);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let m_count = rng.random_range(2..=6);
        let k = rng.random_range(m_count..=40);
        let users: Vec<Position> = (0..k).map(|_| uniform_point(&mut rng, 1.0)).collect();
        let aps: Vec<Position> = (0..m_count).map(|_| uniform_point(&mut rng, 1.0)).collect();
        let assignment: Vec<usize> = (0..k).map(|u| if u < m_count { u } else { rng.random_range(0..m_count) }).collect();
        let part = Partition::from_assignment(assignment, m_count).expect("valid assignment");
        let cells = part.members();
        let m = rng.random_range(0..m_count);
        let gamma = if rng.random::<bool>() { 2.0 } else { rng.random_range(2.0..4.0) };
        let kappa = 10f64.powf(rng.random_range(3.0..5.0) * gamma);
        let kind = DistortionKind::interference(kappa).with_gamma(gamma);
        let model = kind.model();
        // Keep every inverse-power source well outside the clamp so the
        // objective is smooth around q_m.
        let q = aps[m];
        let near = |s: Position| model.scale * s.distance(q) < 20.0 * model.floor;
        let too_close = (0..k).any(|u| part.assignment[u] != m && near(users[u]))
            || (0..m_count).any(|j| j != m && near(aps[j]));
        if too_close {
            continue;
        }
        done += 1;
        let dep = Deployment::new(aps.clone());
        for inter_ap in [false, true] {
            let analytic = if inter_ap {
                grad_ia(m, &dep, &cells, &users, &model)
            } else {
                grad_if(m, &dep, &cells, &users, &model)
            }
            .expect("non-empty cell");
            let h_frame = 1e-3 * model.floor;
            let h_km = h_frame / model.scale;
            let f = |dx: f64, dy: f64| {
                reference_objective(Position::new(q.x + dx, q.y + dy), m, &aps, &cells, &users, &model, inter_ap)
            };
            let fd = Position::new(
                (f(h_km, 0.0) - f(-h_km, 0.0)) / (2.0 * h_frame),
                (f(0.0, h_km) - f(0.0, -h_km)) / (2.0 * h_frame),
            );
            let rel = (analytic - fd).norm() / fd.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if rel >= 1e-5 {
                failures.push(format!(
                    "{} gradient, cell {m}, gamma {gamma}: analytic {analytic:?} vs fd {fd:?} (rel {rel:.2e})",
                    if inter_ap { "inter-AP" } else { "interference" }
                ));
            }
        }
    }
    CheckResult::new("gradients match central differences", instances, &failures, format!("worst relative error {worst:.2e}"))
}

/// With κ = 0 both interference-aware solvers land on Lloyd's deployment.
pub fn check_kappa_zero(instances: usize, seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 2);
    let config = SolverConfig::default();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let k = rng.random_range(60..=300);
        let m = rng.random_range(2..=8);
        let scenario = Scenario::from_users(blob_users(&mut rng, k), ChannelParams::REFERENCE);
        let init = initial_deployment(&scenario, m, rng.random()).expect("M <= K");
        let lloyd = run_lloyd(&scenario, &init, &config).expect("lloyd");
        let runs = [
            run_interference_lloyd(&scenario, &init, &config, &DistortionKind::interference(0.0)),
            run_interap_lloyd(&scenario, &init, &config, &DistortionKind::inter_ap(0.0)),
        ];
        for (name, run) in ["interference", "inter-AP"].into_iter().zip(runs) {
            match run {
                Ok(p) => {
                    let gap = p.deployment.max_displacement(&lloyd.deployment);
                    worst = worst.max(gap);
                    if gap > 1e-4 {
                        failures.push(format!("instance {i}: {name} differs from Lloyd by {gap:.3e} km"));
                    }
                }
                Err(e) => failures.push(format!("instance {i}: {name} failed: {e}")),
            }
        }
    }
    CheckResult::new("kappa = 0 reproduces Lloyd", instances, &failures, format!("largest AP gap {worst:.2e} km"))
}

/// Closed-form rate against averaging `log2(1 + h/μ)` over Exp(1) draws.
pub fn check_rate_oracle(draws: usize, seed: u64) -> CheckResult {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (i, mu) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let mut rng = rng_for(seed, 3 + i as u64);
        let mut total = 0.0;
        for _ in 0..draws {
            let h = -(1.0 - rng.random::<f64>()).ln();
            total += (1.0 + h / mu).log2();
        }
        let mc = total / draws as f64;
        let exact = achievable_rate(mu).expect("mu > 0");
        let rel = (exact - mc).abs() / mc;
        summary.push(format!("mu={mu}: {rel:.2e}"));
        if rel >= 0.01 {
            failures.push(format!("mu = {mu}: closed form {exact}, Monte Carlo {mc} (rel {rel:.3e})"));
        }
    }
    CheckResult::new("rate matches Monte Carlo", 3, &failures, summary.join(", "))
}

/// Thresholds recomputed by brute force.
fn brute_thresholds(aps: &[Position], policy: &ThresholdPolicy) -> Vec<f64> {
    (0..aps.len())
        .map(|m| {
            let nearest = (0..aps.len())
                .filter(|&j| j != m)
                .map(|j| aps[m].distance(aps[j]))
                .fold(f64::INFINITY, f64::min);
            let r = match policy.mode {
                ThresholdMode::NearestApDistance => nearest,
                ThresholdMode::CommRadius => policy.comm_radius_km,
                ThresholdMode::MinOfBoth => nearest.min(policy.comm_radius_km),
            };
            policy.alpha * r
        })
        .collect()
}

/// Conservation, receiving cap, threshold respect and the α = 0 no-op on
/// random small instances.
pub fn check_ure_properties(instances: usize, seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 7);
    let mut failures = Vec::new();
    let mut total_moves = 0usize;
    for i in 0..instances {
        let m = rng.random_range(2..=5);
        let k = rng.random_range(m..=60);
        let users = if rng.random::<bool>() { blob_users(&mut rng, k) } else {
            (0..k).map(|_| uniform_point(&mut rng, 1.0)).collect()
        };
        let scenario = Scenario::from_users(users, ChannelParams::REFERENCE);
        let dep = Deployment::new((0..m).map(|_| uniform_point(&mut rng, 1.0)).collect());
        let part = if rng.random::<bool>() {
            nnc_partition(&scenario, &dep, &DistortionKind::mse(), None).expect("mse partition")
        } else {
            let skew = rng.random_range(0..m);
            let assignment = (0..k).map(|_| if rng.random::<f64>() < 0.5 { skew } else { rng.random_range(0..m) }).collect();
            Partition::from_assignment(assignment, m).expect("valid assignment")
        };
        let alpha = match rng.random_range(0..4) {
            0 => 0.0,
            _ => rng.random_range(0.0..3.0),
        };
        let radius = rng.random_range(0.1..2.0);
        let policy = match rng.random_range(0..3) {
            0 => ThresholdPolicy::nearest_ap(alpha),
            1 => ThresholdPolicy::comm_radius(radius, alpha),
            _ => ThresholdPolicy::min_of_both(radius, alpha),
        };
        let out = match ure(&scenario, &dep, &part, &policy) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("instance {i}: URE failed: {e}"));
                continue;
            }
        };
        let n = k.div_ceil(m);
        let limits = brute_thresholds(&dep.aps, &policy);
        let mut fail = |what: String| failures.push(format!("instance {i} (M={m}, K={k}, alpha={alpha:.3}): {what}"));

        if out.target != n {
            fail(format!("target {} != ceil(K/M) = {n}", out.target));
        }
        if out.partition.validate(k, m).is_err() || out.partition.occupancy.iter().sum::<usize>() != k {
            fail("users not conserved".into());
        }
        if alpha == 0.0 && (out.partition != part || !out.moves.is_empty()) {
            fail("alpha = 0 changed the partition".into());
        }
        // Replay the moves on the input partition, checking each one against
        // the state at the time it was made.
        let mut replay = part.clone();
        let mut moved = vec![false; k];
        for mv in &out.moves {
            if replay.assignment[mv.user] != mv.from || moved[mv.user] {
                fail(format!("user {} moved from a cell it was not in, or twice", mv.user));
                break;
            }
            if part.occupancy[mv.from] <= n {
                fail(format!("cell {} donated without excess users", mv.from));
            }
            if replay.occupancy[mv.to] >= n {
                fail(format!("cell {} received at occupancy {} >= {n}", mv.to, replay.occupancy[mv.to]));
            }
            let d = scenario.users[mv.user].distance(dep.aps[mv.to]);
            if !(d < limits[mv.to]) {
                fail(format!("user {} moved {d} km, threshold {}", mv.user, limits[mv.to]));
            }
            replay.move_user(mv.user, mv.to);
            moved[mv.user] = true;
            if replay.occupancy[mv.from] < n {
                fail(format!("donor {} dropped below the target", mv.from));
            }
        }
        if replay != out.partition {
            fail("moves do not reproduce the output partition".into());
        }
        for c in 0..m {
            if part.occupancy[c] <= n && out.partition.occupancy[c] > n.max(part.occupancy[c]) {
                fail(format!("cell {c} pushed above the target"));
            }
        }
        total_moves += out.moves.len();
    }
    CheckResult::new("URE invariants", instances, &failures, format!("{total_moves} moves checked"))
}

/// Three cells, seven users; N = 3, α = 0.6, nearest-AP thresholds (all 1).
/// Round one ranks the cell-0 users by (distance × occupancy) to their best
/// other cell: u1→C1 (0.510), u2→C2 (0.559), u3→C1 (0.762), u0→C1 (0.900),
/// u4→C1 (1.105). u1 moves (0.510 < 0.6, N_1 = 1 < 3). Re-ranked with
/// N_1 = 2 every remaining user now prefers C2 and u2 leads at 0.559; it
/// moves, cell 0 reaches N and the pass ends.
pub fn hand_trace_instance() -> (Scenario, Deployment, Partition, ThresholdPolicy) {
    let users = vec![
        Position::new(0.1, 0.0),
        Position::new(0.5, 0.1),
        Position::new(0.1, 0.45),
        Position::new(0.3, 0.3),
        Position::new(-0.1, -0.1),
        Position::new(1.0, 0.1),
        Position::new(0.0, 0.9),
    ];
    let dep = Deployment::new(vec![Position::new(0.0, 0.0), Position::new(1.0, 0.0), Position::new(0.0, 1.0)]);
    let part = Partition::from_assignment(vec![0, 0, 0, 0, 0, 1, 2], 3).expect("valid");
    (Scenario::from_users(users, ChannelParams::REFERENCE), dep, part, ThresholdPolicy::nearest_ap(0.6))
}

pub fn check_ure_hand_trace() -> CheckResult {
    let (scenario, dep, part, policy) = hand_trace_instance();
    let mut failures = Vec::new();
    match ure(&scenario, &dep, &part, &policy) {
        Ok(out) => {
            let moves: Vec<(usize, usize, usize)> = out.moves.iter().map(|m| (m.user, m.from, m.to)).collect();
            if moves != [(1, 0, 1), (2, 0, 2)] {
                failures.push(format!("moves {moves:?}, expected [(1, 0, 1), (2, 0, 2)]"));
            }
            if out.partition.assignment != [0, 1, 2, 0, 0, 1, 2] || out.partition.occupancy != [3, 2, 2] {
                failures.push(format!("final partition {:?}", out.partition));
            }
        }
        Err(e) => failures.push(e.to_string()),
    }
    CheckResult::new("URE hand trace", 1, &failures, "moves u1→C1, u2→C2; occupancy [3, 2, 2]".into())
}

/// Lloyd's average squared distance never increases between iterations.
pub fn check_lloyd_monotone(instances: usize, seed: u64) -> CheckResult {
    let mut rng = rng_for(seed, 11);
    let config = SolverConfig::default();
    let mut failures = Vec::new();
    let mut iterations = 0;
    for i in 0..instances {
        let k = rng.random_range(20..=300);
        let m = rng.random_range(2..=10.min(k));
        let users = if rng.random::<bool>() { blob_users(&mut rng, k) } else {
            (0..k).map(|_| uniform_point(&mut rng, 1.0)).collect()
        };
        let scenario = Scenario::from_users(users, ChannelParams::REFERENCE);
        let init = initial_deployment(&scenario, m, rng.random()).expect("M <= K");
        match run_lloyd(&scenario, &init, &config) {
            Ok(p) => {
                iterations += p.trace.len();
                for w in p.trace.windows(2) {
                    if w[1].distortion > w[0].distortion * (1.0 + 1e-12) {
                        failures.push(format!(
                            "instance {i}: iteration {} distortion {} > previous {}",
                            w[1].iteration, w[1].distortion, w[0].distortion
                        ));
                        break;
                    }
                }
            }
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    CheckResult::new("Lloyd distortion non-increasing", instances, &failures, format!("{iterations} iterations checked"))
}
