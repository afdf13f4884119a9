use smallcell_core::scenario::{preset, sample_gmm, sample_gmm_labeled};
use smallcell_core::{ChannelParams, Error, GmmComponent, GmmSpec, Position, Region, Scenario};

fn mixture(weights: &[f64]) -> GmmSpec {
    GmmSpec::new(
        weights
            .iter()
            .enumerate()
            .map(|(i, &weight)| GmmComponent { weight, mean: Position::new(i as f64, 0.0), sigma: 100.0 })
            .collect(),
    )
}

#[test]
fn component_frequencies_pass_chi_square() {
    let spec = preset("gmm1").unwrap();
    let n = 20_000;
    let drawn = sample_gmm_labeled(&spec, n, 7).unwrap();
    let mut counts = [0usize; 3];
    for &(_, l) in &drawn {
        counts[l] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip([0.6, 0.2, 0.2])
        .map(|(&o, w)| {
            let e = w * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    // 99th percentile of chi-square with 2 degrees of freedom.
    assert!(chi2 < 9.2103, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn component_moments() {
    let spec = preset("gmm2").unwrap();
    let drawn = sample_gmm_labeled(&spec, 30_000, 3).unwrap();
    for (k, c) in spec.components.iter().enumerate() {
        let pts: Vec<Position> = drawn.iter().filter(|d| d.1 == k).map(|d| d.0).collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n);
        let sx = (pts.iter().map(|p| (p.x - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sy = (pts.iter().map(|p| (p.y - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = 0.1 / n.sqrt();
        assert!((mx - c.mean.x).abs() < 4.0 * se && (my - c.mean.y).abs() < 4.0 * se, "component {k} mean");
        for s in [sx, sy] {
            assert!((s - 0.1).abs() < 0.1 * 4.0 / (2.0 * n).sqrt(), "component {k} std {s}");
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    let spec = preset("GMM-1").unwrap();
    assert_eq!(sample_gmm(&spec, 500, 11).unwrap(), sample_gmm(&spec, 500, 11).unwrap());
    assert_ne!(sample_gmm(&spec, 500, 11).unwrap(), sample_gmm(&spec, 500, 12).unwrap());
    let a = Scenario::generate(&spec, 100, Region::REFERENCE, ChannelParams::REFERENCE, 5).unwrap();
    let b = Scenario::generate(&spec, 100, Region::REFERENCE, ChannelParams::REFERENCE, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.labels.len(), 100);
}

#[test]
fn preset_names() {
    for name in ["gmm1", "GMM-1", "gmm_1"] {
        assert_eq!(preset(name).unwrap(), preset("gmm1").unwrap());
    }
    let g2 = preset("GMM-2").unwrap();
    assert_eq!(g2.components.len(), 3);
    assert_eq!(g2.components[0].mean, Position::new(-0.17, 0.17));
    assert!(matches!(preset("gmm3"), Err(Error::Config(_))));
}

#[test]
fn invalid_mixtures_rejected() {
    assert!(matches!(sample_gmm(&mixture(&[0.5, 0.4]), 10, 0), Err(Error::Config(_))));
    assert!(matches!(sample_gmm(&mixture(&[]), 10, 0), Err(Error::Config(_))));
    assert!(matches!(sample_gmm(&mixture(&[1.5, -0.5]), 10, 0), Err(Error::Config(_))));
    assert!(matches!(sample_gmm(&mixture(&[1.0]), 0, 0), Err(Error::Config(_))));
    let mut flat = mixture(&[1.0]);
    flat.components[0].sigma = 0.0;
    assert!(matches!(sample_gmm(&flat, 10, 0), Err(Error::Config(_))));
}

#[test]
fn invalid_scenarios_rejected() {
    assert!(Scenario::from_users(vec![], ChannelParams::REFERENCE).validate().is_err());
    let nan = Scenario::from_users(vec![Position::new(f64::NAN, 0.0)], ChannelParams::REFERENCE);
    assert!(nan.validate().is_err());
    let bad = ChannelParams { gamma: 1.0, ..ChannelParams::REFERENCE };
    assert!(Scenario::generate(&preset("gmm1").unwrap(), 10, Region::REFERENCE, bad, 0).is_err());
}
