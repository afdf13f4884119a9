//! Association of a user arriving after placement.

use alloc::vec::Vec;

use crate::cela::{cell_thresholds, ThresholdPolicy};
use crate::channel::Position;
use crate::lloyd::{Deployment, DistortionField, DistortionKind, Partition};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AssociationReason {
    MinDistortion,
    CelaNearest,
    CelaReassigned,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssociationDecision {
    pub cell: usize,
    pub ap: Position,
    pub reason: AssociationReason,
    pub evaluated_candidates: usize,
}

/// Lowest-distortion AP for `p_new`. The interference distortion reads the
/// interfering populations from `partition` over `users`.
pub fn associate_min_distortion(
    p_new: Position,
    users: &[Position],
    deployment: &Deployment,
    partition: &Partition,
    distortion: &DistortionKind,
) -> Result<AssociationDecision> {
    if deployment.is_empty() {
        return Err(Error::Config("deployment has no APs".into()));
    }
    distortion.validate()?;
    let field = DistortionField::new(users, deployment, distortion, Some(partition))?;
    let (cell, _) = field.nearest(p_new);
    Ok(AssociationDecision {
        cell,
        ap: deployment.aps[cell],
        reason: AssociationReason::MinDistortion,
        evaluated_candidates: deployment.len(),
    })
}

/// Load-aware association: start from the geographically nearest AP, then
/// try the other cells in ascending `distance × occupancy` order and take the
/// first that is below `target` and strictly within `α·R_th`. The new user is
/// appended to `partition`.
pub fn associate_cela(
    p_new: Position,
    deployment: &Deployment,
    partition: &mut Partition,
    policy: &ThresholdPolicy,
    target: usize,
) -> Result<AssociationDecision> {
    if deployment.is_empty() {
        return Err(Error::Config("deployment has no APs".into()));
    }
    if partition.num_cells() != deployment.len() {
        return Err(Error::Config("partition and deployment disagree on the number of cells".into()));
    }
    policy.validate()?;
    let aps = &deployment.aps;
    let mut nearest = 0;
    for m in 1..aps.len() {
        if p_new.distance_sq(aps[m]) < p_new.distance_sq(aps[nearest]) {
            nearest = m;
        }
    }
    let limits: Vec<f64> = if policy.alpha == 0.0 || aps.len() < 2 {
        alloc::vec![0.0; aps.len()]
    } else {
        cell_thresholds(deployment, policy)?.into_iter().map(|r| policy.alpha * r).collect()
    };
    let mut ranked: Vec<(f64, usize)> = (0..aps.len())
        .filter(|&m| m != nearest)
        .map(|m| (p_new.distance(aps[m]) * partition.occupancy[m] as f64, m))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut evaluated = 1;
    let mut chosen = (nearest, AssociationReason::CelaNearest);
    for &(_, m) in &ranked {
        evaluated += 1;
        if partition.occupancy[m] < target && p_new.distance(aps[m]) < limits[m] {
            chosen = (m, AssociationReason::CelaReassigned);
            break;
        }
    }
    let (cell, reason) = chosen;
    partition.assignment.push(cell);
    partition.occupancy[cell] += 1;
    Ok(AssociationDecision { cell, ap: aps[cell], reason, evaluated_candidates: evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn three_cells() -> (Deployment, Partition) {
        let dep = Deployment::new(vec![Position::ORIGIN, Position::new(1.0, 0.0), Position::new(0.0, 1.0)]);
        let part = Partition::from_assignment(vec![0, 0, 0, 0, 1, 1, 1, 1, 2], 3).unwrap();
        (dep, part)
    }

    #[test]
    fn mse_picks_nearest_and_single_cell() {
        let (dep, part) = three_cells();
        let d = associate_min_distortion(Position::new(0.9, 0.2), &[], &dep, &part, &DistortionKind::mse()).unwrap();
        assert_eq!(d.cell, 1);
        assert_eq!(d.reason, AssociationReason::MinDistortion);
        let one = Deployment::new(vec![Position::new(5.0, 5.0)]);
        let p1 = Partition::from_assignment(vec![], 1).unwrap();
        assert_eq!(associate_min_distortion(Position::ORIGIN, &[], &one, &p1, &DistortionKind::mse()).unwrap().cell, 0);
    }

    #[test]
    fn cela_reassigns_to_open_cell_in_range() {
        // Nearest is cell 0 (4 users); cell 1 is full at N = 4; cell 2 has room.
        let (dep, mut part) = three_cells();
        let p = Position::new(0.3, 0.4);
        let policy = ThresholdPolicy::nearest_ap(1.0);
        let d = associate_cela(p, &dep, &mut part, &policy, 4).unwrap();
        assert_eq!((d.cell, d.reason), (2, AssociationReason::CelaReassigned));
        assert_eq!(part.occupancy, vec![4, 4, 2]);
        assert_eq!(part.assignment.len(), 10);
    }

    #[test]
    fn cela_stays_when_blocked() {
        let (dep, mut part) = three_cells();
        let p = Position::new(0.3, 0.4);
        let d = associate_cela(p, &dep, &mut part.clone(), &ThresholdPolicy::nearest_ap(0.0), 4).unwrap();
        assert_eq!((d.cell, d.reason), (0, AssociationReason::CelaNearest));
        // every other cell full
        let d = associate_cela(p, &dep, &mut part, &ThresholdPolicy::nearest_ap(5.0), 1).unwrap();
        assert_eq!(d.cell, 0);
        assert_eq!(d.evaluated_candidates, 3);
    }
}
