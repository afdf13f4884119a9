//! Monte Carlo evaluation of a placement and the summary statistics used to
//! compare placements.
//!
//! Each trial activates one uniformly chosen user per cell. A user's rate in
//! that trial is the ergodic rate given the large-scale gains: its own gain
//! to its AP against the gains of the other active users to the same AP.
//! Per-user rates are averaged over the trials in which the user was active.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::channel::{achievable_rate, quotient_from_parts, ChannelParams};
use crate::lloyd::{Deployment, Partition};
use crate::scenario::Scenario;
use crate::{rng, Error, Result};

/// Trials are accumulated in fixed-size chunks merged in order, so any
/// chunk-parallel driver reproduces the sequential result bit for bit.
pub const CHUNK_TRIALS: u64 = 250;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalConfig {
    pub trials: u64,
    pub seed: u64,
    /// Keep only this many strongest interferers per link.
    #[cfg_attr(feature = "serde", serde(default))]
    pub max_interferers: Option<usize>,
}

impl EvalConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        EvalConfig { trials, seed, max_interferers: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserMetrics {
    pub user: usize,
    pub cell: usize,
    /// Mean achievable rate over the trials the user was active, bit/s/Hz.
    pub rate: f64,
    pub access_rate: f64,
    pub access_fraction: f64,
    pub samples: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Percentiles {
    pub rate: f64,
    pub access_rate: f64,
    pub access_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    /// Users that were active at least once, ascending by user index.
    pub users: Vec<UserMetrics>,
    /// 95%-likely (5th percentile) values over `users`.
    pub p95: Percentiles,
    pub occupancy: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
}

impl MetricReport {
    pub fn rates(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.rate).collect()
    }

    pub fn access_rates(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.access_rate).collect()
    }

    pub fn access_fractions(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.access_fraction).collect()
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Per-user partial sums over a range of trials.
#[derive(Clone, Debug, PartialEq)]
pub struct RateAccumulator {
    sums: Vec<CompensatedSum>,
    counts: Vec<u64>,
}

impl RateAccumulator {
    fn new(users: usize) -> Self {
        RateAccumulator { sums: vec![CompensatedSum::default(); users], counts: vec![0; users] }
    }

    /// Fold `other` in; callers merge chunks in ascending trial order.
    pub fn merge(&mut self, other: &RateAccumulator) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.add(b.sum);
            a.add(b.carry);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Frozen evaluation inputs; trials can be run in any grouping.
pub struct Evaluator<'a> {
    scenario: &'a Scenario,
    deployment: &'a Deployment,
    partition: &'a Partition,
    members: Vec<Vec<usize>>,
    config: EvalConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(scenario: &'a Scenario, deployment: &'a Deployment, partition: &'a Partition, config: EvalConfig) -> Result<Self> {
        scenario.validate()?;
        partition.validate(scenario.len(), deployment.len())?;
        if let Some(cell) = partition.first_empty_cell() {
            return Err(Error::EmptyCell { cell });
        }
        if config.trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        Ok(Evaluator { scenario, deployment, partition, members: partition.members(), config })
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    /// Trial ranges of [`CHUNK_TRIALS`] covering all trials, in order.
    pub fn chunks(&self) -> Vec<Range<u64>> {
        let n = self.config.trials;
        (0..n.div_ceil(CHUNK_TRIALS)).map(|c| c * CHUNK_TRIALS..((c + 1) * CHUNK_TRIALS).min(n)).collect()
    }

    pub fn run_trials(&self, trials: Range<u64>) -> Result<RateAccumulator> {
        let m = self.deployment.len();
        let params: &ChannelParams = &self.scenario.channel;
        let users = &self.scenario.users;
        let aps = &self.deployment.aps;
        let seed = rng::derive_seed(self.config.seed, rng::TAG_EVAL);
        let mut acc = RateAccumulator::new(users.len());
        let mut active = vec![0usize; m];
        let mut gains = vec![0.0; m];
        for trial in trials {
            let mut rng = rng::substream(seed, trial);
            for (slot, cell) in active.iter_mut().zip(&self.members) {
                *slot = cell[rng.random_range(0..cell.len())];
            }
            for serving in 0..m {
                let q = aps[serving];
                for (g, &u) in gains.iter_mut().zip(&active) {
                    *g = params.gain_at(users[u].distance(q));
                }
                let own = gains[serving];
                let interference = match self.config.max_interferers {
                    Some(limit) if limit < m - 1 => {
                        let mut others: Vec<f64> =
                            gains.iter().enumerate().filter(|&(j, _)| j != serving).map(|(_, &g)| g).collect();
                        others.sort_by(|a, b| b.total_cmp(a));
                        others[..limit].iter().sum()
                    }
                    _ => gains.iter().enumerate().filter(|&(j, _)| j != serving).map(|(_, &g)| g).sum(),
                };
                let mu = quotient_from_parts(own, interference, params.rho_r)?;
                let u = active[serving];
                acc.sums[u].add(achievable_rate(mu)?);
                acc.counts[u] += 1;
            }
        }
        Ok(acc)
    }

    pub fn finish(&self, acc: &RateAccumulator) -> Result<MetricReport> {
        let occupancy = &self.partition.occupancy;
        let users: Vec<UserMetrics> = acc
            .sums
            .iter()
            .zip(&acc.counts)
            .enumerate()
            .filter(|&(_, (_, &n))| n > 0)
            .map(|(user, (s, &n))| {
                let cell = self.partition.assignment[user];
                let rate = s.value() / n as f64;
                UserMetrics {
                    user,
                    cell,
                    rate,
                    access_rate: access_rate(rate, occupancy[cell]),
                    access_fraction: spectral_access_fraction(occupancy[cell]),
                    samples: n,
                }
            })
            .collect();
        let pick = |f: fn(&UserMetrics) -> f64| -> Result<f64> { p95_likely(&users.iter().map(f).collect::<Vec<_>>()) };
        let p95 = Percentiles {
            rate: pick(|u| u.rate)?,
            access_rate: pick(|u| u.access_rate)?,
            access_fraction: pick(|u| u.access_fraction)?,
        };
        Ok(MetricReport { users, p95, occupancy: occupancy.clone(), trials: self.config.trials, seed: self.config.seed })
    }
}

pub fn monte_carlo_eval(
    scenario: &Scenario,
    deployment: &Deployment,
    partition: &Partition,
    config: &EvalConfig,
) -> Result<MetricReport> {
    let eval = Evaluator::new(scenario, deployment, partition, *config)?;
    let mut total = RateAccumulator::new(scenario.len());
    for chunk in eval.chunks() {
        total.merge(&eval.run_trials(chunk)?);
    }
    eval.finish(&total)
}

/// Rate share under round-robin TDMA: `rate / N_m`.
pub fn access_rate(rate: f64, occupancy: usize) -> f64 {
    rate * spectral_access_fraction(occupancy)
}

/// Fraction of slots in which a user of an `N_m`-user cell transmits.
pub fn spectral_access_fraction(occupancy: usize) -> f64 {
    1.0 / occupancy as f64
}

/// Linear-interpolation (type 7) sample quantile, `q` in `[0, 1]`.
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("quantile of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// The 95%-likely value: the 5th percentile. Needs at least 20 samples.
pub fn p95_likely(samples: &[f64]) -> Result<f64> {
    if samples.len() < 20 {
        return Err(Error::Config(format!("95%-likely value needs at least 20 samples, got {}", samples.len())));
    }
    quantile(samples, 0.05)
}

/// Relative change of `proposed` over `baseline`, percent.
pub fn improvement_ratio(proposed: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::Config("improvement ratio against a zero baseline".into()));
    }
    Ok((proposed - baseline) / baseline * 100.0)
}

/// Empirical CDF of `samples / normalizer` as `(value, P[X <= value])` steps.
pub fn cdf(samples: &[f64], normalizer: f64) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Config("CDF of an empty sample".into()));
    }
    if !(normalizer > 0.0) {
        return Err(Error::Config(format!("CDF normalizer must be positive, got {normalizer}")));
    }
    let mut sorted: Vec<f64> = samples.iter().map(|v| v / normalizer).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Position;

    #[test]
    fn access_examples() {
        assert_eq!(access_rate(1.0, 1), 1.0);
        assert!((access_rate(1.0, 250) - 0.004).abs() < 1e-18);
        assert_eq!(access_rate(1.0, 125), 2.0 * access_rate(1.0, 250));
        assert!((spectral_access_fraction(250) - 0.004).abs() < 1e-18);
        assert_eq!(spectral_access_fraction(1), 1.0);
    }

    #[test]
    fn p95_examples() {
        let ramp: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((p95_likely(&ramp).unwrap() - 5.95).abs() < 1e-12);
        assert_eq!(p95_likely(&[3.5; 40]).unwrap(), 3.5);
        assert!(p95_likely(&[1.0; 19]).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_ratio(1.3634, 1.0).unwrap() - 36.34).abs() < 1e-9);
        assert_eq!(improvement_ratio(2.0, 2.0).unwrap(), 0.0);
        assert!((improvement_ratio(0.9304, 1.0).unwrap() + 6.96).abs() < 1e-9);
        assert!(improvement_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn cdf_shape() {
        let c = cdf(&[2.0, 2.0, 2.0], 4.0).unwrap();
        assert!(c.iter().all(|&(v, _)| v == 0.5));
        assert_eq!(c.last().unwrap().1, 1.0);
        let c = cdf(&[1.0, 3.0, 2.0], 3.0).unwrap();
        assert!(c.iter().all(|&(v, _)| (0.0..=1.0).contains(&v)));
        assert!(c.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert!(cdf(&[], 1.0).is_err());
        assert!(cdf(&[1.0], 0.0).is_err());
    }

    #[test]
    fn single_cell_has_no_interference() {
        let users: Vec<Position> = (0..25).map(|i| Position::new(0.01 * i as f64 + 0.01, 0.0)).collect();
        let sc = Scenario::from_users(users.clone(), ChannelParams::REFERENCE);
        let dep = Deployment::new(vec![Position::ORIGIN]);
        let part = Partition::from_assignment(vec![0; 25], 1).unwrap();
        let report = monte_carlo_eval(&sc, &dep, &part, &EvalConfig::new(2000, 3)).unwrap();
        for u in &report.users {
            let beta = ChannelParams::REFERENCE.gain_at(users[u.user].norm());
            let expected = achievable_rate(1.0 / (0.2 * beta)).unwrap();
            assert!((u.rate - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn empty_cell_is_named() {
        let sc = Scenario::from_users(vec![Position::ORIGIN; 3], ChannelParams::REFERENCE);
        let dep = Deployment::new(vec![Position::ORIGIN, Position::new(1.0, 0.0)]);
        let part = Partition::from_assignment(vec![0, 0, 0], 2).unwrap();
        assert_eq!(monte_carlo_eval(&sc, &dep, &part, &EvalConfig::new(10, 1)), Err(Error::EmptyCell { cell: 1 }));
    }
}
