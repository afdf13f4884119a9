use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallcell_core::cela::target_occupancy;
use smallcell_core::ici::{d_ia, d_if};
use smallcell_core::lloyd::nnc_partition;
use smallcell_core::scenario::preset;
use smallcell_core::{
    associate_cela, associate_min_distortion, cell_thresholds, initial_deployment, run_cela_alpha, run_lloyd, ure,
    AssociationReason, ChannelParams, Deployment, DistortionKind, Partition, Position, Region, Scenario, SolverConfig,
    ThresholdPolicy,
};

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Position> {
    (0..n).map(|_| Position::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Random users, random APs, and a deliberately skewed assignment.
fn skewed(seed: u64, k: usize, m: usize) -> (Scenario, Deployment, Partition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = Scenario::from_users(random_points(&mut rng, k), ChannelParams::REFERENCE);
    let dep = Deployment::new(random_points(&mut rng, m));
    let assignment = (0..k).map(|_| if rng.random_bool(0.5) { 0 } else { rng.random_range(0..m) }).collect();
    (sc, dep.clone(), Partition::from_assignment(assignment, m).unwrap())
}

/// Brute-force thresholds: nearest other AP per cell.
fn nearest_other(dep: &Deployment) -> Vec<f64> {
    (0..dep.len())
        .map(|i| (0..dep.len()).filter(|&j| j != i).map(|j| dep.aps[i].distance(dep.aps[j])).fold(f64::INFINITY, f64::min))
        .collect()
}

#[test]
fn thresholds_by_mode() {
    let dep = Deployment::new(vec![Position::ORIGIN, Position::new(0.3, 0.0), Position::new(0.0, 1.0)]);
    assert_eq!(cell_thresholds(&dep, &ThresholdPolicy::nearest_ap(1.0)).unwrap(), nearest_other(&dep));
    assert_eq!(cell_thresholds(&dep, &ThresholdPolicy::comm_radius(0.5, 1.0)).unwrap(), vec![0.5; 3]);
    let both = cell_thresholds(&dep, &ThresholdPolicy::min_of_both(0.5, 1.0)).unwrap();
    assert_eq!(both[0], 0.3);
    assert_eq!(both[2], 0.5);
    assert!(cell_thresholds(&dep, &ThresholdPolicy::comm_radius(0.0, 1.0)).is_err());
    assert!(cell_thresholds(&dep, &ThresholdPolicy::nearest_ap(-1.0)).is_err());
    assert!(cell_thresholds(&Deployment::new(vec![Position::ORIGIN]), &ThresholdPolicy::nearest_ap(1.0)).is_err());
}

#[test]
fn target_is_ceiling_share() {
    assert_eq!(target_occupancy(2000, 8), 250);
    assert_eq!(target_occupancy(2001, 8), 251);
    assert_eq!(target_occupancy(7, 3), 3);
}

#[test]
fn unlimited_reach_balances_exactly() {
    for seed in 0..20 {
        let (sc, dep, part) = skewed(seed, 240, 6);
        let out = ure(&sc, &dep, &part, &ThresholdPolicy::comm_radius(1e9, 1.0)).unwrap();
        assert_eq!(out.partition.occupancy, vec![40; 6], "seed {seed}");
    }
}

#[test]
fn cela_without_balancing_is_lloyd() {
    let sc = Scenario::generate(&preset("gmm2").unwrap(), 400, Region::REFERENCE, ChannelParams::REFERENCE, 3).unwrap();
    let init = initial_deployment(&sc, 8, 3).unwrap();
    let cfg = SolverConfig::default();
    let cela = run_cela_alpha(&sc, &init, &cfg, &ThresholdPolicy::nearest_ap(0.0), &DistortionKind::mse()).unwrap();
    assert_eq!(cela.placement, run_lloyd(&sc, &init, &cfg).unwrap());
    assert!(cela.moves_per_iteration.iter().all(|&n| n == 0));
}

#[test]
fn cela_flattens_the_fullest_cell() {
    let sc = Scenario::generate(&preset("gmm2").unwrap(), 2000, Region::REFERENCE, ChannelParams::REFERENCE, 1).unwrap();
    let init = initial_deployment(&sc, 8, 1).unwrap();
    let cfg = SolverConfig::default();
    let lloyd = run_lloyd(&sc, &init, &cfg).unwrap();
    let cela = run_cela_alpha(&sc, &init, &cfg, &ThresholdPolicy::nearest_ap(1.75), &DistortionKind::mse()).unwrap();
    let max = |p: &Partition| *p.occupancy.iter().max().unwrap();
    assert!(max(&cela.placement.partition) < max(&lloyd.partition));
    assert_eq!(cela.placement.partition, cela.last_ure.partition);
}

#[test]
fn min_distortion_association_matches_nnc() {
    let sc = Scenario::generate(&preset("gmm1").unwrap(), 500, Region::REFERENCE, ChannelParams::REFERENCE, 4).unwrap();
    let dep = initial_deployment(&sc, 8, 4).unwrap();
    let part = nnc_partition(&sc, &dep, &DistortionKind::mse(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let newcomers = random_points(&mut rng, 1000);
    let probe = Scenario::from_users(newcomers.clone(), ChannelParams::REFERENCE);
    let expected = nnc_partition(&probe, &dep, &DistortionKind::mse(), None).unwrap();
    for (i, &p) in newcomers.iter().enumerate() {
        let d = associate_min_distortion(p, &sc.users, &dep, &part, &DistortionKind::mse()).unwrap();
        assert_eq!(d.cell, expected.assignment[i]);
        assert_eq!(d.reason, AssociationReason::MinDistortion);
        assert_eq!(d.ap, dep.aps[d.cell]);
    }
    let cells = part.members();
    for kind in [DistortionKind::inter_ap(5e8), DistortionKind::interference(5e8)] {
        for &p in newcomers.iter().take(200) {
            let d = associate_min_distortion(p, &sc.users, &dep, &part, &kind).unwrap();
            let score = |m: usize| match kind.tag {
                smallcell_core::DistortionTag::InterAp => d_ia(p, m, &dep, &kind.model()),
                _ => d_if(p, m, &dep, &cells, &sc.users, &kind.model()),
            };
            let best = (0..8).map(score).fold(f64::INFINITY, f64::min);
            assert!(score(d.cell) <= best * (1.0 + 1e-12));
        }
    }
}

#[test]
fn cela_association_stays_home_when_blocked() {
    let dep = Deployment::new(vec![Position::ORIGIN, Position::new(1.0, 0.0)]);
    let mut part = Partition::from_assignment(vec![0, 0, 1], 2).unwrap();
    // Everyone else full.
    let d = associate_cela(Position::new(0.1, 0.0), &dep, &mut part, &ThresholdPolicy::nearest_ap(5.0), 1).unwrap();
    assert_eq!((d.cell, d.reason), (0, AssociationReason::CelaNearest));
    assert_eq!(part.occupancy, vec![3, 1]);
    assert_eq!(part.assignment.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ure_invariants(seed in any::<u64>(), k in 10usize..120, m in 2usize..7, alpha in 0.0f64..2.5) {
        let (sc, dep, part) = skewed(seed, k, m);
        let policy = ThresholdPolicy::nearest_ap(alpha);
        let out = ure(&sc, &dep, &part, &policy).unwrap();
        let n = target_occupancy(k, m);
        prop_assert_eq!(out.target, n);
        let limits: Vec<f64> = nearest_other(&dep).into_iter().map(|r| alpha * r).collect();

        let mut occ = part.occupancy.clone();
        let mut assignment = part.assignment.clone();
        for mv in &out.moves {
            prop_assert_eq!(assignment[mv.user], mv.from);
            prop_assert!(part.occupancy[mv.from] > n, "donor {} was not over target", mv.from);
            prop_assert!(occ[mv.to] < n);
            prop_assert!(occ[mv.from] > n);
            let d = sc.users[mv.user].distance(dep.aps[mv.to]);
            prop_assert!(d < limits[mv.to]);
            prop_assert!((mv.threshold_km - limits[mv.to]).abs() <= 1e-15 * limits[mv.to]);
            occ[mv.from] -= 1;
            occ[mv.to] += 1;
            assignment[mv.user] = mv.to;
        }
        prop_assert_eq!(&occ, &out.partition.occupancy);
        prop_assert_eq!(&assignment, &out.partition.assignment);
        prop_assert_eq!(occ.iter().sum::<usize>(), k);
        for (&before, &after) in part.occupancy.iter().zip(&occ) {
            if before > n {
                prop_assert!(after >= n);
            } else {
                prop_assert!(after <= n);
            }
        }
        if alpha == 0.0 {
            prop_assert!(out.moves.is_empty());
        }
    }

    #[test]
    fn widening_alpha_never_shrinks_the_eligible_set(seed in any::<u64>(), a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (sc, dep, part) = skewed(seed, 60, 5);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let eligible = |alpha: f64| {
            let limits: Vec<f64> = nearest_other(&dep).into_iter().map(|r| alpha * r).collect();
            let mut pairs = Vec::new();
            for (u, &c) in part.assignment.iter().enumerate() {
                for (j, &limit) in limits.iter().enumerate() {
                    if j != c && sc.users[u].distance(dep.aps[j]) < limit {
                        pairs.push((u, j));
                    }
                }
            }
            pairs
        };
        let small = eligible(lo);
        let large = eligible(hi);
        prop_assert!(small.iter().all(|p| large.contains(p)));
    }

    #[test]
    fn cela_association_respects_cap_and_reach(seed in any::<u64>(), alpha in 0.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let (_, dep, mut part) = skewed(seed, 50, 5);
        let before = part.occupancy.clone();
        let target = target_occupancy(51, 5);
        let p = Position::new(x, y);
        let d = associate_cela(p, &dep, &mut part, &ThresholdPolicy::nearest_ap(alpha), target).unwrap();
        let limits: Vec<f64> = nearest_other(&dep).into_iter().map(|r| alpha * r).collect();
        let nearest = (0..5).min_by(|&a, &b| p.distance(dep.aps[a]).total_cmp(&p.distance(dep.aps[b]))).unwrap();
        match d.reason {
            AssociationReason::CelaNearest => prop_assert_eq!(d.cell, nearest),
            AssociationReason::CelaReassigned => {
                prop_assert!(d.cell != nearest);
                prop_assert!(before[d.cell] < target);
                prop_assert!(p.distance(dep.aps[d.cell]) < limits[d.cell]);
            }
            AssociationReason::MinDistortion => prop_assert!(false),
        }
        prop_assert_eq!(part.occupancy[d.cell], before[d.cell] + 1);
        prop_assert_eq!(part.assignment.last().copied(), Some(d.cell));
        if alpha == 0.0 {
            prop_assert_eq!(d.cell, nearest);
        }
    }
}

/// A wider reach can lower the move count. Offers are ranked from live
/// occupancies, so the extra early move allowed at α = 2.1 reshuffles the
/// later rounds away from the cell that still has room.
#[test]
fn move_count_is_not_monotone_in_alpha() {
    let pts = [(1.0, 2.0), (4.0, 3.0), (3.0, 0.0), (2.0, 0.0), (4.0, 1.0), (2.0, 4.0), (4.0, 3.0)];
    let sc = Scenario::from_users(pts.iter().map(|&(x, y)| Position::new(x, y)).collect(), ChannelParams::REFERENCE);
    let dep = Deployment::new(vec![Position::new(3.0, 4.0), Position::new(4.0, 4.0), Position::new(2.0, 2.0)]);
    let part = Partition::from_assignment(vec![0, 2, 0, 0, 0, 0, 0], 3).unwrap();
    let moves = |alpha: f64| ure(&sc, &dep, &part, &ThresholdPolicy::nearest_ap(alpha)).unwrap().moves;
    let (narrow, wide) = (moves(2.0), moves(2.1));
    assert_eq!((narrow.len(), wide.len()), (3, 2));
    assert_eq!(wide.iter().map(|m| m.to).collect::<Vec<_>>(), vec![1, 1]);
}
