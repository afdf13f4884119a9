//! Inter-cell-interference-aware placement.
//!
//! Two distortions extend the squared-distance objective with an
//! interference penalty weighted by the trade-off factor κ:
//!
//! * interference: `‖p − q_m‖^γ + κ Σ_{m'≠m} (1/|C_m'|) Σ_{p'∈C_m'} ‖p' − q_m‖^{−γ}`
//! * inter-AP:      `‖p − q_m‖^γ + κ Σ_{m'≠m} ‖q_m' − q_m‖^{−γ}`
//!
//! The penalty does not depend on the user position `p`, so the nearest
//! neighbour step is the `‖p − q‖^γ` rule shifted by one constant per cell.
//! The codebook step runs steepest descent on each cell's sample-mean
//! objective, starting with step δ and halving it whenever a step would
//! increase the objective.
//!
//! All functions take positions in km and measure distances in the model's
//! frame (`scale` units per km). Gradients are with respect to frame
//! coordinates. Distances inside `‖·‖^{−γ}` are clamped below at `floor`
//! (frame units); inside the clamp the term is constant and has zero gradient.

use alloc::format;
use alloc::vec::Vec;

use crate::channel::{pow_len, Position};
use crate::lloyd::{self, Deployment, DistortionKind, DistortionTag, Partition, Placement, SolverConfig};
use crate::scenario::Scenario;
use crate::{Error, Result};

const MAX_HALVINGS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IciModel {
    pub kappa: f64,
    pub gamma: f64,
    /// Frame units per km.
    pub scale: f64,
    /// Lower clamp for distances in inverse-power terms, frame units.
    pub floor: f64,
}

impl IciModel {
    /// Model with distances taken as given (km frame).
    pub fn unscaled(kappa: f64, gamma: f64, floor: f64) -> Self {
        IciModel { kappa, gamma, scale: 1.0, floor }
    }

    #[inline]
    fn dist(&self, a: Position, b: Position) -> f64 {
        self.scale * a.distance(b)
    }

    #[inline]
    fn inv_pow(&self, d: f64) -> f64 {
        1.0 / pow_len(d.max(self.floor), self.gamma)
    }

    /// `∇_q ‖p' − q‖^{−γ} = γ (p' − q) / ‖p' − q‖^{γ+2}`, frame units.
    #[inline]
    fn inv_pow_grad(&self, source: Position, q: Position) -> Position {
        let d = self.dist(source, q);
        if d < self.floor {
            return Position::ORIGIN;
        }
        (source - q) * (self.scale * self.gamma / (pow_len(d, self.gamma) * d * d))
    }

    /// `∇_q ‖p − q‖^γ = γ (q − p) ‖p − q‖^{γ−2}`, frame units.
    #[inline]
    fn own_grad(&self, p: Position, q: Position) -> Position {
        let factor = if self.gamma == 2.0 { 1.0 } else { libm::pow(self.dist(p, q), self.gamma - 2.0) };
        (q - p) * (self.scale * self.gamma * factor)
    }
}

/// Mean over `cell` of `‖p' − q‖^{−γ}`; zero for an empty cell.
fn cell_interference(q: Position, cell: &[usize], users: &[Position], model: &IciModel) -> f64 {
    if cell.is_empty() {
        return 0.0;
    }
    cell.iter().map(|&u| model.inv_pow(model.dist(users[u], q))).sum::<f64>() / cell.len() as f64
}

/// `Σ_{m'≠m} mean_{p'∈C_m'} ‖p' − q‖^{−γ}`.
fn interference_at(q: Position, m: usize, cells: &[Vec<usize>], users: &[Position], model: &IciModel) -> f64 {
    cells
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != m)
        .map(|(_, cell)| cell_interference(q, cell, users, model))
        .sum()
}

/// `Σ_{m'≠m} ‖q_m' − q‖^{−γ}`.
fn inter_ap_at(q: Position, m: usize, aps: &[Position], model: &IciModel) -> f64 {
    aps.iter()
        .enumerate()
        .filter(|&(j, _)| j != m)
        .map(|(_, &other)| model.inv_pow(model.dist(other, q)))
        .sum()
}

/// Per-cell interference penalty (without κ) for the interference distortion.
pub fn interference_offsets(aps: &[Position], users: &[Position], cells: &[Vec<usize>], model: &IciModel) -> Vec<f64> {
    aps.iter().enumerate().map(|(m, &q)| interference_at(q, m, cells, users, model)).collect()
}

/// Per-cell inter-AP penalty (without κ).
pub fn inter_ap_offsets(aps: &[Position], model: &IciModel) -> Vec<f64> {
    aps.iter().enumerate().map(|(m, &q)| inter_ap_at(q, m, aps, model)).collect()
}

/// Interference distortion of a user at `p` served by cell `m`.
pub fn d_if(p: Position, m: usize, deployment: &Deployment, cells: &[Vec<usize>], users: &[Position], model: &IciModel) -> f64 {
    let q = deployment.aps[m];
    pow_len(model.dist(p, q), model.gamma) + model.kappa * interference_at(q, m, cells, users, model)
}

/// Inter-AP distortion of a user at `p` served by cell `m`.
pub fn d_ia(p: Position, m: usize, deployment: &Deployment, model: &IciModel) -> f64 {
    let q = deployment.aps[m];
    pow_len(model.dist(p, q), model.gamma) + model.kappa * inter_ap_at(q, m, &deployment.aps, model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IciForm {
    Interference,
    InterAp,
}

/// One cell's codebook subproblem with everything but `q_m` frozen.
#[derive(Clone, Copy, Debug)]
pub struct CellProblem<'a> {
    pub form: IciForm,
    pub cell: usize,
    pub users: &'a [Position],
    pub cells: &'a [Vec<usize>],
    /// Snapshot of all AP positions; entry `cell` is ignored.
    pub aps: &'a [Position],
    pub model: IciModel,
}

impl CellProblem<'_> {
    /// Sample-mean objective of the cell with its AP at `q`.
    pub fn objective(&self, q: Position) -> f64 {
        let own = &self.cells[self.cell];
        let signal = if own.is_empty() {
            0.0
        } else {
            own.iter().map(|&u| pow_len(self.model.dist(self.users[u], q), self.model.gamma)).sum::<f64>()
                / own.len() as f64
        };
        let penalty = match self.form {
            IciForm::Interference => interference_at(q, self.cell, self.cells, self.users, &self.model),
            IciForm::InterAp => inter_ap_at(q, self.cell, self.aps, &self.model),
        };
        signal + self.model.kappa * penalty
    }

    /// Gradient of [`Self::objective`] with respect to frame coordinates.
    pub fn gradient(&self, q: Position) -> Result<Position> {
        let own = &self.cells[self.cell];
        if own.is_empty() {
            return Err(Error::EmptyCell { cell: self.cell });
        }
        let mut signal = Position::ORIGIN;
        for &u in own {
            signal += self.model.own_grad(self.users[u], q);
        }
        let signal = signal * (1.0 / own.len() as f64);
        let mut penalty = Position::ORIGIN;
        match self.form {
            IciForm::Interference => {
                for (j, cell) in self.cells.iter().enumerate() {
                    if j == self.cell || cell.is_empty() {
                        continue;
                    }
                    let mut acc = Position::ORIGIN;
                    for &u in cell {
                        acc += self.model.inv_pow_grad(self.users[u], q);
                    }
                    penalty += acc * (1.0 / cell.len() as f64);
                }
            }
            IciForm::InterAp => {
                for (j, &other) in self.aps.iter().enumerate() {
                    if j != self.cell {
                        penalty += self.model.inv_pow_grad(other, q);
                    }
                }
            }
        }
        Ok(signal + penalty * self.model.kappa)
    }
}

/// Gradient of cell `m`'s interference objective at its current AP.
pub fn grad_if(m: usize, deployment: &Deployment, cells: &[Vec<usize>], users: &[Position], model: &IciModel) -> Result<Position> {
    let problem = CellProblem { form: IciForm::Interference, cell: m, users, cells, aps: &deployment.aps, model: *model };
    problem.gradient(deployment.aps[m])
}

/// Gradient of cell `m`'s inter-AP objective at its current AP.
pub fn grad_ia(m: usize, deployment: &Deployment, cells: &[Vec<usize>], users: &[Position], model: &IciModel) -> Result<Position> {
    let problem = CellProblem { form: IciForm::InterAp, cell: m, users, cells, aps: &deployment.aps, model: *model };
    problem.gradient(deployment.aps[m])
}

/// Steepest-descent controls for the codebook step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientStep {
    /// Initial step size δ.
    pub delta: f64,
    pub max_iters: usize,
    /// Stop once an accepted step moves the AP less than this, km.
    pub tolerance_km: f64,
}

impl GradientStep {
    pub fn from_config(config: &SolverConfig) -> Self {
        GradientStep { delta: config.step_size, max_iters: config.max_inner_iters, tolerance_km: config.inner_tolerance_km }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentOutcome {
    pub position: Position,
    /// Objective before the first step and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Iterate `q ← q − δ ∇J(q)` from `start`, halving δ on any step that would
/// increase `J`, until an accepted step moves less than the tolerance.
pub fn steepest_descent_cc(problem: &CellProblem, start: Position, step: &GradientStep) -> Result<DescentOutcome> {
    let scale = problem.model.scale;
    let mut q = start;
    let mut current = problem.objective(q);
    let mut objective_trace = alloc::vec![current];
    let mut iterations = 0;
    while iterations < step.max_iters {
        iterations += 1;
        let grad = problem.gradient(q)?;
        let mut delta = step.delta;
        let mut halvings = 0;
        let (candidate, value) = loop {
            let candidate = q - grad * (delta / scale);
            let value = problem.objective(candidate);
            if value <= current {
                break (candidate, value);
            }
            let attempted = (grad * (delta / scale)).norm();
            if halvings == MAX_HALVINGS {
                if attempted < step.tolerance_km {
                    return Ok(DescentOutcome { position: q, objective_trace, iterations });
                }
                return Err(Error::Divergence { cell: problem.cell, objective: value, halvings, step: attempted });
            }
            delta *= 0.5;
            halvings += 1;
        };
        let moved = candidate.distance(q);
        q = candidate;
        current = value;
        objective_trace.push(value);
        if moved < step.tolerance_km {
            break;
        }
    }
    Ok(DescentOutcome { position: q, objective_trace, iterations })
}

pub(crate) fn descend_all(
    form: IciForm,
    scenario: &Scenario,
    deployment: &Deployment,
    partition: &Partition,
    model: &IciModel,
    step: &GradientStep,
) -> Result<Deployment> {
    let cells = partition.members();
    let mut aps = deployment.aps.clone();
    for (m, cell) in cells.iter().enumerate() {
        if cell.is_empty() {
            continue;
        }
        let problem = CellProblem { form, cell: m, users: &scenario.users, cells: &cells, aps: &deployment.aps, model: *model };
        aps[m] = steepest_descent_cc(&problem, deployment.aps[m], step)?.position;
    }
    Ok(Deployment { aps })
}

fn expect_tag(distortion: &DistortionKind, tag: DistortionTag) -> Result<()> {
    distortion.validate()?;
    if distortion.tag != tag {
        return Err(Error::Config(format!("expected a {tag:?} distortion, got {:?}", distortion.tag)));
    }
    Ok(())
}

/// Interference Lloyd. The first partition is MSE-nearest (no cells exist
/// yet to interfere); later partitions use the interference distortion with
/// the previous iteration's cells.
pub fn run_interference_lloyd(
    scenario: &Scenario,
    initial: &Deployment,
    config: &SolverConfig,
    distortion: &DistortionKind,
) -> Result<Placement> {
    expect_tag(distortion, DistortionTag::Interference)?;
    let model = distortion.model();
    let step = GradientStep::from_config(config);
    lloyd::drive(
        scenario,
        initial,
        config,
        distortion,
        |dep, previous| {
            let mut part = match previous {
                None => lloyd::nnc_partition(scenario, dep, &DistortionKind::mse(), None)?,
                Some(prev) => lloyd::nnc_partition(scenario, dep, distortion, Some(prev))?,
            };
            lloyd::repair_empty_cells(scenario, dep, &mut part);
            Ok(part)
        },
        |dep, part| descend_all(IciForm::Interference, scenario, dep, part, &model, &step),
    )
}

/// Inter-AP Lloyd. Each cell descends against a snapshot of the other APs
/// taken at the start of the codebook step.
pub fn run_interap_lloyd(
    scenario: &Scenario,
    initial: &Deployment,
    config: &SolverConfig,
    distortion: &DistortionKind,
) -> Result<Placement> {
    expect_tag(distortion, DistortionTag::InterAp)?;
    let model = distortion.model();
    let step = GradientStep::from_config(config);
    lloyd::drive(
        scenario,
        initial,
        config,
        distortion,
        |dep, _| {
            let mut part = lloyd::nnc_partition(scenario, dep, distortion, None)?;
            lloyd::repair_empty_cells(scenario, dep, &mut part);
            Ok(part)
        },
        |dep, part| descend_all(IciForm::InterAp, scenario, dep, part, &model, &step),
    )
}

/// Diagnostic for the far-field bound `mean_{p'∈C_m'} ‖p' − q_m‖^{−γ} ≤ ‖q_m' − q_m‖^{−γ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarFieldCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_far_field_bound(
    deployment: &Deployment,
    cells: &[Vec<usize>],
    users: &[Position],
    gamma: f64,
    m: usize,
    other: usize,
) -> Result<FarFieldCheck> {
    let cell = &cells[other];
    if cell.is_empty() {
        return Err(Error::EmptyCell { cell: other });
    }
    let q = deployment.aps[m];
    let lhs = cell.iter().map(|&u| 1.0 / pow_len(users[u].distance(q), gamma)).sum::<f64>() / cell.len() as f64;
    let rhs = 1.0 / pow_len(deployment.aps[other].distance(q), gamma);
    Ok(FarFieldCheck { lhs, rhs, holds: lhs <= rhs })
}
