//! Load balancing by user re-distribution for equalization (URE) and the
//! CELA-α placement loop that inserts it between the partition and codebook
//! steps.
//!
//! URE walks the over-occupied cells from fullest to emptiest. Inside a donor
//! cell every user ranks the other cells by `distance × occupancy`; round `r`
//! offers each remaining user its `r`-th choice, cheapest offers first. An
//! offer is taken only when the receiving cell is below the target occupancy
//! `N` and the user is strictly closer to its AP than `α·R_th`. The donor stops
//! giving once it is down to `N`. Occupancies, and therefore the order of the
//! remaining offers, are refreshed after every move.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::channel::Position;
use crate::ici::{self, GradientStep};
use crate::lloyd::{self, Deployment, DistortionKind, DistortionTag, Partition, Placement, SolverConfig};
use crate::scenario::Scenario;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThresholdMode {
    /// Distance from the cell's AP to its nearest other AP.
    NearestApDistance,
    /// A fixed communication radius.
    CommRadius,
    /// The smaller of the two.
    MinOfBoth,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdPolicy {
    pub mode: ThresholdMode,
    /// Communication radius, km (used by `CommRadius` and `MinOfBoth`).
    pub comm_radius_km: f64,
    pub alpha: f64,
}

impl ThresholdPolicy {
    pub fn nearest_ap(alpha: f64) -> Self {
        ThresholdPolicy { mode: ThresholdMode::NearestApDistance, comm_radius_km: f64::INFINITY, alpha }
    }

    pub fn comm_radius(radius_km: f64, alpha: f64) -> Self {
        ThresholdPolicy { mode: ThresholdMode::CommRadius, comm_radius_km: radius_km, alpha }
    }

    pub fn min_of_both(radius_km: f64, alpha: f64) -> Self {
        ThresholdPolicy { mode: ThresholdMode::MinOfBoth, comm_radius_km: radius_km, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || self.alpha.is_infinite() {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if self.mode != ThresholdMode::NearestApDistance && !(self.comm_radius_km > 0.0) {
            return Err(Error::Config(format!("communication radius must be positive, got {}", self.comm_radius_km)));
        }
        Ok(())
    }
}

/// Per-cell distance thresholds `R_th` (before scaling by α), km.
pub fn cell_thresholds(deployment: &Deployment, policy: &ThresholdPolicy) -> Result<Vec<f64>> {
    policy.validate()?;
    let m = deployment.len();
    let nearest = |i: usize| {
        deployment
            .aps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| q.distance(deployment.aps[i]))
            .fold(f64::INFINITY, f64::min)
    };
    if m < 2 && policy.mode == ThresholdMode::NearestApDistance {
        return Err(Error::Config("nearest-AP thresholds need at least two APs".into()));
    }
    Ok(match policy.mode {
        ThresholdMode::CommRadius => alloc::vec![policy.comm_radius_km; m],
        ThresholdMode::NearestApDistance => (0..m).map(nearest).collect(),
        ThresholdMode::MinOfBoth => (0..m).map(|i| nearest(i).min(policy.comm_radius_km)).collect(),
    })
}

/// Equal-share target occupancy `⌈K/M⌉`.
pub fn target_occupancy(users: usize, cells: usize) -> usize {
    users.div_ceil(cells)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UreMove {
    pub user: usize,
    pub from: usize,
    pub to: usize,
    pub distance_km: f64,
    /// The effective threshold `α·R_th` of the receiving cell.
    pub threshold_km: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UreOutcome {
    pub partition: Partition,
    pub moves: Vec<UreMove>,
    pub target: usize,
}

#[derive(Clone, Copy, Debug)]
struct Offer {
    composite: f64,
    user: usize,
    cell: usize,
}

fn by_composite(a: &Offer, b: &Offer) -> Ordering {
    a.composite.total_cmp(&b.composite).then(a.user.cmp(&b.user)).then(a.cell.cmp(&b.cell))
}

/// The `rank`-th cheapest other cell for a user sitting in `home`.
fn offer(p: Position, user: usize, home: usize, rank: usize, aps: &[Position], occupancy: &[usize]) -> Option<Offer> {
    let mut ranked: Vec<Offer> = aps
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != home)
        .map(|(j, q)| Offer { composite: p.distance(*q) * occupancy[j] as f64, user, cell: j })
        .collect();
    ranked.sort_by(by_composite);
    ranked.get(rank).copied()
}

pub fn ure(scenario: &Scenario, deployment: &Deployment, partition: &Partition, policy: &ThresholdPolicy) -> Result<UreOutcome> {
    let target = target_occupancy(partition.num_users(), partition.num_cells());
    ure_with_target(scenario, deployment, partition, policy, target)
}

pub fn ure_with_target(
    scenario: &Scenario,
    deployment: &Deployment,
    partition: &Partition,
    policy: &ThresholdPolicy,
    target: usize,
) -> Result<UreOutcome> {
    partition.validate(scenario.len(), deployment.len())?;
    let mut part = partition.clone();
    let mut moves = Vec::new();
    if policy.alpha == 0.0 || deployment.len() < 2 {
        policy.validate()?;
        return Ok(UreOutcome { partition: part, moves, target });
    }
    let limits: Vec<f64> = cell_thresholds(deployment, policy)?.into_iter().map(|r| policy.alpha * r).collect();
    let aps = &deployment.aps[..];
    let users = &scenario.users[..];

    let mut donors: Vec<usize> = (0..part.num_cells()).filter(|&c| part.occupancy[c] > target).collect();
    donors.sort_by(|&a, &b| part.occupancy[b].cmp(&part.occupancy[a]).then(a.cmp(&b)));

    for g in donors {
        let mut remaining: Vec<usize> = part.members()[g].clone();
        'rounds: for rank in 0..aps.len() - 1 {
            if part.occupancy[g] <= target {
                break;
            }
            let mut offers: Vec<Offer> =
                remaining.iter().filter_map(|&u| offer(users[u], u, g, rank, aps, &part.occupancy)).collect();
            offers.sort_by(by_composite);
            let mut i = 0;
            while i < offers.len() {
                if part.occupancy[g] <= target {
                    break 'rounds;
                }
                let o = offers[i];
                i += 1;
                let distance_km = users[o.user].distance(aps[o.cell]);
                if part.occupancy[o.cell] < target && distance_km < limits[o.cell] {
                    part.move_user(o.user, o.cell);
                    moves.push(UreMove { user: o.user, from: g, to: o.cell, distance_km, threshold_km: limits[o.cell] });
                    remaining.retain(|&u| u != o.user);
                    let mut rest: Vec<Offer> = offers[i..]
                        .iter()
                        .filter_map(|r| offer(users[r.user], r.user, g, rank, aps, &part.occupancy))
                        .collect();
                    rest.sort_by(by_composite);
                    offers.truncate(i);
                    offers.extend(rest);
                }
            }
        }
    }
    Ok(UreOutcome { partition: part, moves, target })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CelaPlacement {
    pub placement: Placement,
    /// The URE pass of the final iteration.
    pub last_ure: UreOutcome,
    pub moves_per_iteration: Vec<usize>,
}

/// CELA-α: partition under `distortion` (MSE in the reference setup), then
/// URE, then the codebook step on the re-balanced cells. Convergence is
/// monitored with the MSE of the post-URE cells.
pub fn run_cela_alpha(
    scenario: &Scenario,
    initial: &Deployment,
    config: &SolverConfig,
    policy: &ThresholdPolicy,
    distortion: &DistortionKind,
) -> Result<CelaPlacement> {
    policy.validate()?;
    distortion.validate()?;
    if policy.mode == ThresholdMode::NearestApDistance && initial.len() < 2 && policy.alpha > 0.0 {
        return Err(Error::Config("nearest-AP thresholds need at least two APs".into()));
    }
    let model = distortion.model();
    let step = GradientStep::from_config(config);
    let mut last: Option<UreOutcome> = None;
    let mut moves_per_iteration = Vec::new();
    let placement = lloyd::drive(
        scenario,
        initial,
        config,
        &DistortionKind::mse(),
        |dep, previous| {
            let cells_from = match (distortion.tag, previous) {
                (DistortionTag::Interference, None) => None,
                _ => Some(distortion),
            };
            let mut part = match cells_from {
                Some(kind) => lloyd::nnc_partition(scenario, dep, kind, previous)?,
                None => lloyd::nnc_partition(scenario, dep, &DistortionKind::mse(), None)?,
            };
            lloyd::repair_empty_cells(scenario, dep, &mut part);
            let outcome = ure(scenario, dep, &part, policy)?;
            moves_per_iteration.push(outcome.moves.len());
            let balanced = outcome.partition.clone();
            last = Some(outcome);
            Ok(balanced)
        },
        |dep, part| match distortion.tag {
            DistortionTag::Mse => Ok(lloyd::centroid_update(scenario, part, dep)),
            DistortionTag::Interference => ici::descend_all(ici::IciForm::Interference, scenario, dep, part, &model, &step),
            DistortionTag::InterAp => ici::descend_all(ici::IciForm::InterAp, scenario, dep, part, &model, &step),
        },
    )?;
    Ok(CelaPlacement { placement, last_ure: last.expect("at least one iteration"), moves_per_iteration })
}
