//! Lloyd iteration over a finite user population: nearest-neighbour
//! partitioning under a pluggable distortion, codebook update, and the
//! convergence driver shared by every placement algorithm in the crate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{pow_len, Position};
use crate::ici::{self, IciModel};
use crate::scenario::Scenario;
use crate::{rng, Error, Result};

/// Ordered AP positions (the codebook), km.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Deployment {
    pub aps: Vec<Position>,
}

impl Deployment {
    pub fn new(aps: Vec<Position>) -> Self {
        Deployment { aps }
    }

    pub fn len(&self) -> usize {
        self.aps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aps.is_empty()
    }

    pub fn max_displacement(&self, other: &Deployment) -> f64 {
        self.aps.iter().zip(&other.aps).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max)
    }

    /// Smallest pairwise AP distance (infinite for a single AP).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.aps.iter().enumerate() {
            for b in &self.aps[i + 1..] {
                best = best.min(a.distance(*b));
            }
        }
        best
    }

    /// Nudge exact duplicates apart so no two APs share coordinates.
    pub(crate) fn separate_collisions(&mut self) {
        const NUDGE_KM: f64 = 1e-6;
        for i in 1..self.aps.len() {
            let mut k = 1.0;
            while self.aps[..i].contains(&self.aps[i]) {
                self.aps[i].x += NUDGE_KM * k;
                k += 1.0;
            }
        }
    }
}

/// User-to-cell assignment (0-based cell indices) with per-cell counts.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub occupancy: Vec<usize>,
}

impl Partition {
    pub fn from_assignment(assignment: Vec<usize>, cells: usize) -> Result<Self> {
        let mut occupancy = vec![0; cells];
        for (u, &c) in assignment.iter().enumerate() {
            *occupancy
                .get_mut(c)
                .ok_or_else(|| Error::Config(format!("user {u} assigned to cell {c}, but only {cells} cells exist")))? +=
                1;
        }
        Ok(Partition { assignment, occupancy })
    }

    pub fn num_cells(&self) -> usize {
        self.occupancy.len()
    }

    pub fn num_users(&self) -> usize {
        self.assignment.len()
    }

    /// User indices per cell, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut cells: Vec<Vec<usize>> = self.occupancy.iter().map(|&n| Vec::with_capacity(n)).collect();
        for (u, &c) in self.assignment.iter().enumerate() {
            cells[c].push(u);
        }
        cells
    }

    pub fn move_user(&mut self, user: usize, to: usize) {
        let from = self.assignment[user];
        self.occupancy[from] -= 1;
        self.occupancy[to] += 1;
        self.assignment[user] = to;
    }

    pub fn first_empty_cell(&self) -> Option<usize> {
        self.occupancy.iter().position(|&n| n == 0)
    }

    pub fn validate(&self, users: usize, cells: usize) -> Result<()> {
        if self.assignment.len() != users {
            return Err(Error::Config(format!(
                "partition covers {} users, scenario has {users}",
                self.assignment.len()
            )));
        }
        if self.occupancy.len() != cells {
            return Err(Error::Config(format!(
                "partition has {} cells, deployment has {cells}",
                self.occupancy.len()
            )));
        }
        let recount = Partition::from_assignment(self.assignment.clone(), cells)?;
        if recount.occupancy != self.occupancy {
            return Err(Error::Config("occupancy does not match assignment".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DistortionTag {
    /// Squared distance, km².
    Mse,
    /// `‖p − q_m‖^γ + κ Σ_{m'≠m} mean_{p'∈C_m'} ‖p' − q_m‖^{−γ}`
    Interference,
    /// `‖p − q_m‖^γ + κ Σ_{m'≠m} ‖q_m' − q_m‖^{−γ}`
    InterAp,
}

/// Distortion selector.
///
/// The two interference-aware distortions are evaluated with distances
/// expressed in a length frame of `unit_per_km` units per kilometre (metres
/// by default, which is the frame in which the reference κ = 5×10⁸ balances
/// the two terms). Every distance entering an inverse-power term is clamped
/// below at `clamp_km`. `Mse` ignores `kappa`, `gamma` and the frame.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistortionKind {
    pub tag: DistortionTag,
    pub kappa: f64,
    pub gamma: f64,
    pub unit_per_km: f64,
    pub clamp_km: f64,
}

impl DistortionKind {
    pub const METRE_FRAME: f64 = 1000.0;
    pub const DEFAULT_CLAMP_KM: f64 = 0.001;

    pub const fn mse() -> Self {
        DistortionKind { tag: DistortionTag::Mse, kappa: 0.0, gamma: 2.0, unit_per_km: 1.0, clamp_km: Self::DEFAULT_CLAMP_KM }
    }

    pub const fn interference(kappa: f64) -> Self {
        DistortionKind {
            tag: DistortionTag::Interference,
            kappa,
            gamma: 2.0,
            unit_per_km: Self::METRE_FRAME,
            clamp_km: Self::DEFAULT_CLAMP_KM,
        }
    }

    pub const fn inter_ap(kappa: f64) -> Self {
        DistortionKind { tag: DistortionTag::InterAp, ..Self::interference(kappa) }
    }

    pub const fn with_gamma(self, gamma: f64) -> Self {
        DistortionKind { gamma, ..self }
    }

    pub const fn with_unit_per_km(self, unit_per_km: f64) -> Self {
        DistortionKind { unit_per_km, ..self }
    }

    pub const fn with_clamp_km(self, clamp_km: f64) -> Self {
        DistortionKind { clamp_km, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tag == DistortionTag::Mse {
            return Ok(());
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::Config(format!("kappa must be finite and >= 0, got {}", self.kappa)));
        }
        if !(self.gamma >= 2.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be >= 2, got {}", self.gamma)));
        }
        if !(self.unit_per_km > 0.0) || !(self.clamp_km > 0.0) {
            return Err(Error::Config("distortion frame and clamp must be positive".into()));
        }
        Ok(())
    }

    /// The distortion as an [`IciModel`] in its frame.
    pub fn model(&self) -> IciModel {
        IciModel {
            kappa: self.kappa,
            gamma: self.gamma,
            scale: self.unit_per_km,
            floor: self.clamp_km * self.unit_per_km,
        }
    }
}

/// Outer/inner iteration controls shared by all solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Relative change of the average distortion that counts as converged.
    pub outer_tolerance: f64,
    /// Max AP displacement (km) that counts as converged.
    pub displacement_tolerance_km: f64,
    /// Initial steepest-descent step δ.
    pub step_size: f64,
    pub max_inner_iters: usize,
    /// Inner-loop AP displacement tolerance, km.
    pub inner_tolerance_km: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iters: 50,
            outer_tolerance: 1e-6,
            displacement_tolerance_km: 1e-6,
            step_size: 0.5,
            max_inner_iters: 200,
            inner_tolerance_km: 1e-5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_outer_iters > 0
            && self.max_inner_iters > 0
            && self.outer_tolerance > 0.0
            && self.displacement_tolerance_km > 0.0
            && self.step_size > 0.0
            && self.inner_tolerance_km > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("solver settings must be positive: {self:?}")))
        }
    }
}

/// One outer iteration of a solver.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub iteration: usize,
    pub distortion: f64,
    pub max_displacement_km: f64,
}

/// Result of a placement run. `partition` is the cell structure the final
/// codebook step was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub deployment: Deployment,
    pub partition: Partition,
    pub trace: Vec<TraceRow>,
}

pub fn mse_distortion(p: Position, q: Position) -> f64 {
    p.distance_sq(q)
}

/// Per-user distortion with the per-cell constant terms precomputed.
pub(crate) struct DistortionField<'a> {
    kind: DistortionKind,
    aps: &'a [Position],
    offsets: Vec<f64>,
}

impl<'a> DistortionField<'a> {
    pub(crate) fn new(
        users: &[Position],
        deployment: &'a Deployment,
        distortion: &DistortionKind,
        partition: Option<&Partition>,
    ) -> Result<Self> {
        let aps = &deployment.aps[..];
        let offsets = match distortion.tag {
            DistortionTag::Mse => Vec::new(),
            DistortionTag::InterAp => ici::inter_ap_offsets(aps, &distortion.model()),
            DistortionTag::Interference => {
                let part = partition.ok_or_else(|| {
                    Error::Config("the interference distortion needs a current partition".into())
                })?;
                ici::interference_offsets(aps, users, &part.members(), &distortion.model())
            }
        };
        Ok(DistortionField { kind: *distortion, aps, offsets })
    }

    #[inline]
    pub(crate) fn eval(&self, p: Position, m: usize) -> f64 {
        let q = self.aps[m];
        match self.kind.tag {
            DistortionTag::Mse => mse_distortion(p, q),
            _ => pow_len(self.kind.unit_per_km * p.distance(q), self.kind.gamma) + self.kind.kappa * self.offsets[m],
        }
    }

    /// Lowest-distortion cell; ties go to the lowest index.
    #[inline]
    pub(crate) fn nearest(&self, p: Position) -> (usize, f64) {
        let mut best = (0, self.eval(p, 0));
        for m in 1..self.aps.len() {
            let d = self.eval(p, m);
            if d < best.1 {
                best = (m, d);
            }
        }
        best
    }
}

/// Nearest neighbour condition under `distortion`. The interference
/// distortion reads its interfering-cell populations from `current`.
pub fn nnc_partition(
    scenario: &Scenario,
    deployment: &Deployment,
    distortion: &DistortionKind,
    current: Option<&Partition>,
) -> Result<Partition> {
    if deployment.is_empty() {
        return Err(Error::Config("deployment has no APs".into()));
    }
    let field = DistortionField::new(&scenario.users, deployment, distortion, current)?;
    let assignment = scenario.users.iter().map(|&p| field.nearest(p).0).collect();
    Partition::from_assignment(assignment, deployment.len())
}

/// Cell means. An empty cell keeps its AP from `previous`.
pub fn centroid_update(scenario: &Scenario, partition: &Partition, previous: &Deployment) -> Deployment {
    let mut sums = vec![Position::ORIGIN; partition.num_cells()];
    for (&p, &c) in scenario.users.iter().zip(&partition.assignment) {
        sums[c] += p;
    }
    let aps = sums
        .into_iter()
        .zip(&partition.occupancy)
        .zip(&previous.aps)
        .map(|((s, &n), &old)| if n == 0 { old } else { s * (1.0 / n as f64) })
        .collect();
    Deployment { aps }
}

/// Re-seed every empty cell at the user farthest from its own AP (among
/// users whose cell would stay non-empty) and move that user into it.
/// Returns the repaired cells.
pub fn repair_empty_cells(scenario: &Scenario, deployment: &mut Deployment, partition: &mut Partition) -> Vec<usize> {
    let mut repaired = Vec::new();
    while let Some(cell) = partition.first_empty_cell() {
        let donor = scenario
            .users
            .iter()
            .enumerate()
            .filter(|&(u, _)| partition.occupancy[partition.assignment[u]] >= 2)
            .map(|(u, &p)| (u, p.distance_sq(deployment.aps[partition.assignment[u]])))
            .fold(None, |best: Option<(usize, f64)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            });
        let Some((user, _)) = donor else { break };
        deployment.aps[cell] = scenario.users[user];
        partition.move_user(user, cell);
        repaired.push(cell);
    }
    repaired
}

/// Sample mean over users of the distortion to their assigned AP.
pub fn average_distortion(
    scenario: &Scenario,
    deployment: &Deployment,
    partition: &Partition,
    distortion: &DistortionKind,
) -> Result<f64> {
    let field = DistortionField::new(&scenario.users, deployment, distortion, Some(partition))?;
    let total: f64 = scenario.users.iter().zip(&partition.assignment).map(|(&p, &c)| field.eval(p, c)).sum();
    Ok(total / scenario.len() as f64)
}

/// `m` distinct users drawn without replacement; every algorithm in a
/// comparison starts from this same codebook.
pub fn initial_deployment(scenario: &Scenario, m: usize, seed: u64) -> Result<Deployment> {
    let k = scenario.len();
    if m == 0 || m > k {
        return Err(Error::Config(format!("need 1 <= M <= K, got M = {m}, K = {k}")));
    }
    let mut rng = rng::stream(rng::derive_seed(seed, rng::TAG_INIT));
    let picked = rand::seq::index::sample(&mut rng, k, m);
    let mut dep = Deployment { aps: picked.iter().map(|i| scenario.users[i]).collect() };
    dep.separate_collisions();
    Ok(dep)
}

pub(crate) fn check_inputs(scenario: &Scenario, initial: &Deployment, config: &SolverConfig) -> Result<()> {
    scenario.validate()?;
    config.validate()?;
    if initial.is_empty() || initial.len() > scenario.len() {
        return Err(Error::Config(format!(
            "need 1 <= M <= K, got M = {}, K = {}",
            initial.len(),
            scenario.len()
        )));
    }
    if !initial.aps.iter().all(|q| q.is_finite()) {
        return Err(Error::Config("initial deployment has non-finite coordinates".into()));
    }
    Ok(())
}

/// Generic Lloyd-type loop: `partition_step` produces the cells for the
/// current codebook (previous cells available), `codebook_step` relocates the
/// APs. Distortion is monitored with `monitor` on (new codebook, cells).
pub(crate) fn drive<F, G>(
    scenario: &Scenario,
    initial: &Deployment,
    config: &SolverConfig,
    monitor: &DistortionKind,
    mut partition_step: F,
    mut codebook_step: G,
) -> Result<Placement>
where
    F: FnMut(&mut Deployment, Option<&Partition>) -> Result<Partition>,
    G: FnMut(&Deployment, &Partition) -> Result<Deployment>,
{
    check_inputs(scenario, initial, config)?;
    let mut deployment = initial.clone();
    let mut cells: Option<Partition> = None;
    let mut trace = Vec::new();
    let mut previous: Option<f64> = None;
    for iteration in 1..=config.max_outer_iters {
        let partition = partition_step(&mut deployment, cells.as_ref())?;
        let mut next = codebook_step(&deployment, &partition)?;
        next.separate_collisions();
        let distortion = average_distortion(scenario, &next, &partition, monitor)?;
        let max_displacement_km = deployment.max_displacement(&next);
        trace.push(TraceRow { iteration, distortion, max_displacement_km });
        deployment = next;
        cells = Some(partition);
        let settled = match previous {
            Some(prev) => (prev - distortion).abs() <= config.outer_tolerance * prev.abs().max(f64::MIN_POSITIVE),
            None => false,
        };
        if settled || max_displacement_km < config.displacement_tolerance_km {
            break;
        }
        previous = Some(distortion);
    }
    Ok(Placement { deployment, partition: cells.expect("at least one iteration"), trace })
}

/// Classic Lloyd: MSE nearest-neighbour cells, centroid codebook.
pub fn run_lloyd(scenario: &Scenario, initial: &Deployment, config: &SolverConfig) -> Result<Placement> {
    let mse = DistortionKind::mse();
    drive(
        scenario,
        initial,
        config,
        &mse,
        |dep, _| {
            let mut part = nnc_partition(scenario, dep, &mse, None)?;
            repair_empty_cells(scenario, dep, &mut part);
            Ok(part)
        },
        |dep, part| Ok(centroid_update(scenario, part, dep)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;

    fn scen(pts: &[(f64, f64)]) -> Scenario {
        Scenario::from_users(pts.iter().map(|&(x, y)| Position::new(x, y)).collect(), ChannelParams::REFERENCE)
    }

    #[test]
    fn mse_examples() {
        let p = Position::new(0.0, 0.0);
        let q = Position::new(3.0, 4.0);
        assert_eq!(mse_distortion(p, p), 0.0);
        assert_eq!(mse_distortion(p, q), 25.0);
        assert_eq!(mse_distortion(q, p), 25.0);
    }

    #[test]
    fn single_ap_takes_everyone() {
        let sc = scen(&[(0.1, 0.2), (-3.0, 1.0), (5.0, 5.0)]);
        let dep = Deployment::new(vec![Position::new(9.0, 9.0)]);
        for kind in [DistortionKind::mse(), DistortionKind::inter_ap(5e8), DistortionKind::interference(5e8)] {
            let cur = Partition::from_assignment(vec![0; 3], 1).unwrap();
            let part = nnc_partition(&sc, &dep, &kind, Some(&cur)).unwrap();
            assert_eq!(part.assignment, vec![0, 0, 0]);
            assert_eq!(part.occupancy, vec![3]);
        }
    }

    #[test]
    fn nearest_and_ties() {
        let sc = scen(&[(0.5, 0.0), (0.0, 0.0)]);
        let dep = Deployment::new(vec![Position::new(-1.0, 0.0), Position::new(1.0, 0.0)]);
        let part = nnc_partition(&sc, &dep, &DistortionKind::mse(), None).unwrap();
        assert_eq!(part.assignment, vec![1, 0]); // the tie at the origin goes to cell 0
    }

    #[test]
    fn interference_needs_cells() {
        let sc = scen(&[(0.5, 0.0)]);
        let dep = Deployment::new(vec![Position::ORIGIN]);
        assert!(nnc_partition(&sc, &dep, &DistortionKind::interference(1.0), None).is_err());
    }

    #[test]
    fn centroid_examples() {
        let sc = scen(&[(0.0, 0.0), (2.0, 0.0), (5.0, 5.0)]);
        let part = Partition::from_assignment(vec![0, 0, 1], 3).unwrap();
        let prev = Deployment::new(vec![Position::ORIGIN, Position::ORIGIN, Position::new(7.0, 7.0)]);
        let dep = centroid_update(&sc, &part, &prev);
        assert_eq!(dep.aps, vec![Position::new(1.0, 0.0), Position::new(5.0, 5.0), Position::new(7.0, 7.0)]);
    }

    #[test]
    fn average_distortion_example() {
        let sc = scen(&[(1.0, 0.0), (0.0, 2.0)]);
        let dep = Deployment::new(vec![Position::ORIGIN]);
        let part = Partition::from_assignment(vec![0, 0], 1).unwrap();
        assert_eq!(average_distortion(&sc, &dep, &part, &DistortionKind::mse()).unwrap(), 2.5);
        let on_top = Deployment::new(vec![Position::new(1.0, 0.0), Position::new(0.0, 2.0)]);
        let part = Partition::from_assignment(vec![0, 1], 2).unwrap();
        assert_eq!(average_distortion(&sc, &on_top, &part, &DistortionKind::mse()).unwrap(), 0.0);
    }

    #[test]
    fn repair_fills_empty_cell_with_farthest_user() {
        let sc = scen(&[(0.0, 0.0), (0.1, 0.0), (3.0, 0.0)]);
        let mut dep = Deployment::new(vec![Position::ORIGIN, Position::new(100.0, 0.0)]);
        let mut part = nnc_partition(&sc, &dep, &DistortionKind::mse(), None).unwrap();
        assert_eq!(part.occupancy, vec![3, 0]);
        assert_eq!(repair_empty_cells(&sc, &mut dep, &mut part), vec![1]);
        assert_eq!(dep.aps[1], Position::new(3.0, 0.0));
        assert_eq!(part.occupancy, vec![2, 1]);
        assert_eq!(part.assignment[2], 1);
    }

    #[test]
    fn k_equals_m_reaches_zero() {
        let sc = scen(&[(0.0, 0.0), (1.0, 1.0), (2.0, -1.0)]);
        let init = initial_deployment(&sc, 3, 7).unwrap();
        let out = run_lloyd(&sc, &init, &SolverConfig::default()).unwrap();
        assert_eq!(out.trace.last().unwrap().distortion, 0.0);
        assert_eq!(out.partition.occupancy, vec![1, 1, 1]);
    }

    #[test]
    fn two_cluster_toy() {
        let sc = scen(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (10.0, 0.0), (10.0, 0.0), (10.0, 0.0)]);
        let init = Deployment::new(vec![Position::new(1.0, 0.0), Position::new(2.0, 0.0)]);
        let out = run_lloyd(&sc, &init, &SolverConfig::default()).unwrap();
        let mut xs: Vec<f64> = out.deployment.aps.iter().map(|q| q.x).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![0.0, 10.0]);
    }

    #[test]
    fn initial_deployment_bounds() {
        let sc = scen(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(initial_deployment(&sc, 0, 1).is_err());
        assert!(initial_deployment(&sc, 3, 1).is_err());
        let a = initial_deployment(&sc, 2, 1).unwrap();
        assert_eq!(a, initial_deployment(&sc, 2, 1).unwrap());
    }

    #[test]
    fn collisions_are_separated() {
        let mut dep = Deployment::new(vec![Position::ORIGIN, Position::ORIGIN, Position::ORIGIN]);
        dep.separate_collisions();
        assert!(dep.min_separation() > 0.0);
    }
}
