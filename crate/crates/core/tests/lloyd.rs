use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallcell_core::lloyd::{average_distortion, centroid_update, nnc_partition};
use smallcell_core::scenario::preset;
use smallcell_core::{
    initial_deployment, run_lloyd, ChannelParams, Deployment, DistortionKind, Partition, Position, Region, Scenario,
    SolverConfig,
};

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Position> {
    (0..n).map(|_| Position::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn scenario(seed: u64, k: usize) -> Scenario {
    Scenario::generate(&preset("gmm1").unwrap(), k, Region::REFERENCE, ChannelParams::REFERENCE, seed).unwrap()
}

#[test]
fn nnc_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let sc = Scenario::from_users(random_points(&mut rng, 300), ChannelParams::REFERENCE);
        let dep = Deployment::new(random_points(&mut rng, 6));
        let part = nnc_partition(&sc, &dep, &DistortionKind::mse(), None).unwrap();
        for (u, &p) in sc.users.iter().enumerate() {
            let best = (0..6)
                .map(|m| {
                    let (dx, dy) = (p.x - dep.aps[m].x, p.y - dep.aps[m].y);
                    dx * dx + dy * dy
                })
                .fold(f64::INFINITY, f64::min);
            let got = p.distance_sq(dep.aps[part.assignment[u]]);
            assert!((got - best).abs() <= 1e-15);
        }
        assert_eq!(part.occupancy.iter().sum::<usize>(), 300);
    }
}

#[test]
fn centroid_beats_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let users = random_points(&mut rng, 50);
    let sc = Scenario::from_users(users.clone(), ChannelParams::REFERENCE);
    let part = Partition::from_assignment(vec![0; 50], 1).unwrap();
    let q = centroid_update(&sc, &part, &Deployment::new(vec![Position::ORIGIN])).aps[0];
    let cost = |c: Position| users.iter().map(|p| p.distance_sq(c)).sum::<f64>();
    let mut best = f64::INFINITY;
    for i in -100..=100 {
        for j in -100..=100 {
            best = best.min(cost(Position::new(i as f64 * 0.01, j as f64 * 0.01)));
        }
    }
    assert!(cost(q) <= best + 1e-12);
}

#[test]
fn empty_cell_keeps_previous_ap() {
    let sc = Scenario::from_users(vec![Position::new(1.0, 1.0)], ChannelParams::REFERENCE);
    let part = Partition::from_assignment(vec![0], 2).unwrap();
    let prev = Deployment::new(vec![Position::ORIGIN, Position::new(5.0, 5.0)]);
    let next = centroid_update(&sc, &part, &prev);
    assert_eq!(next.aps, vec![Position::new(1.0, 1.0), Position::new(5.0, 5.0)]);
}

#[test]
fn one_ap_per_user_has_zero_distortion() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sc = Scenario::from_users(random_points(&mut rng, 8), ChannelParams::REFERENCE);
    let init = initial_deployment(&sc, 8, 0).unwrap();
    let out = run_lloyd(&sc, &init, &SolverConfig::default()).unwrap();
    assert!(out.trace.last().unwrap().distortion < 1e-24);
    assert!(out.partition.occupancy.iter().all(|&n| n == 1));
}

#[test]
fn initial_deployment_draws_distinct_users() {
    let sc = scenario(4, 2000);
    let dep = initial_deployment(&sc, 8, 4).unwrap();
    assert_eq!(dep.len(), 8);
    assert!(dep.min_separation() > 0.0);
    assert!(dep.aps.iter().all(|q| sc.users.contains(q)));
    assert_eq!(dep, initial_deployment(&sc, 8, 4).unwrap());
    assert!(initial_deployment(&sc, 0, 4).is_err());
    assert!(initial_deployment(&sc, 2001, 4).is_err());
}

#[test]
fn lloyd_is_deterministic_and_stays_in_hull() {
    let sc = scenario(5, 1000);
    let init = initial_deployment(&sc, 8, 5).unwrap();
    let a = run_lloyd(&sc, &init, &SolverConfig::default()).unwrap();
    assert_eq!(a, run_lloyd(&sc, &init, &SolverConfig::default()).unwrap());
    let (lo_x, hi_x) = sc.users.iter().fold((f64::MAX, f64::MIN), |(l, h), p| (l.min(p.x), h.max(p.x)));
    assert!(a.deployment.aps.iter().all(|q| q.x >= lo_x && q.x <= hi_x));
    assert!(a.trace.len() <= 50);
    let d = average_distortion(&sc, &a.deployment, &a.partition, &DistortionKind::mse()).unwrap();
    assert_eq!(d, a.trace.last().unwrap().distortion);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lloyd_distortion_never_increases(seed in any::<u64>(), k in 20usize..200, m in 1usize..10) {
        let sc = scenario(seed, k);
        let init = initial_deployment(&sc, m, seed).unwrap();
        let out = run_lloyd(&sc, &init, &SolverConfig::default()).unwrap();
        for w in out.trace.windows(2) {
            prop_assert!(w[1].distortion <= w[0].distortion * (1.0 + 1e-12));
        }
        prop_assert!(out.partition.occupancy.iter().all(|&n| n > 0));
    }
}
