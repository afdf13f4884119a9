//! User populations drawn from isotropic Gaussian mixtures.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelParams, Position};
use crate::{rng, Error, Result};

/// Kilometres per sigma unit when the mixture spreads are given in metres.
pub const METRES: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Position,
    /// Per-axis standard deviation, in units of [`GmmSpec::sigma_unit_km`].
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GmmSpec {
    pub components: Vec<GmmComponent>,
    /// Kilometres per unit of `sigma`. Defaults to metres.
    #[cfg_attr(feature = "serde", serde(default = "default_sigma_unit"))]
    pub sigma_unit_km: f64,
}

#[cfg(feature = "serde")]
fn default_sigma_unit() -> f64 {
    METRES
}

impl GmmSpec {
    pub fn new(components: Vec<GmmComponent>) -> Self {
        GmmSpec { components, sigma_unit_km: METRES }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("mixture has no components".into()));
        }
        let mut total = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::Config(format!("component {i}: weight must be positive, got {}", c.weight)));
            }
            if !(c.sigma > 0.0) || !c.sigma.is_finite() {
                return Err(Error::Config(format!("component {i}: sigma must be positive, got {}", c.sigma)));
            }
            if !c.mean.is_finite() {
                return Err(Error::Config(format!("component {i}: mean is not finite")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
        }
        if !(self.sigma_unit_km > 0.0) {
            return Err(Error::Config("sigma unit must be positive".into()));
        }
        Ok(())
    }
}

/// The two reference populations: three far-apart groups (`GMM-1`) and
/// three close groups (`GMM-2`), weights 0.6/0.2/0.2, 100 m spread.
pub fn preset(name: &str) -> Result<GmmSpec> {
    let means = match normalise(name).as_str() {
        "gmm1" => [(0.5, -0.5), (0.0, 0.5), (-0.5, 0.0)],
        "gmm2" => [(-0.17, 0.17), (0.17, 0.17), (0.17, -0.17)],
        _ => return Err(Error::Config(format!("unknown scenario preset {name:?} (expected GMM-1 or GMM-2)"))),
    };
    let weights = [0.6, 0.2, 0.2];
    Ok(GmmSpec::new(
        means
            .iter()
            .zip(weights)
            .map(|(&(x, y), weight)| GmmComponent { weight, mean: Position::new(x, y), sigma: 100.0 })
            .collect(),
    ))
}

fn normalise(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}

/// Draw `count` users; each sample carries its generating component index.
pub fn sample_gmm_labeled(spec: &GmmSpec, count: usize, seed: u64) -> Result<Vec<(Position, usize)>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Config("user count must be at least 1".into()));
    }
    let picker = WeightedIndex::new(spec.components.iter().map(|c| c.weight))
        .map_err(|e| Error::Config(format!("mixture weights: {e}")))?;
    let mut rng = rng::stream(seed);
    let out = (0..count)
        .map(|_| {
            let label = rng.sample(&picker);
            let c = &spec.components[label];
            let sigma_km = c.sigma * spec.sigma_unit_km;
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            (Position::new(c.mean.x + sigma_km * dx, c.mean.y + sigma_km * dy), label)
        })
        .collect();
    Ok(out)
}

pub fn sample_gmm(spec: &GmmSpec, count: usize, seed: u64) -> Result<Vec<Position>> {
    Ok(sample_gmm_labeled(spec, count, seed)?.into_iter().map(|(p, _)| p).collect())
}

/// Axis-aligned rectangle, km. Informational: samples outside are kept.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Region {
    pub min: Position,
    pub max: Position,
}

impl Region {
    /// The 2 km × 2 km field centred on the origin.
    pub const REFERENCE: Region = Region { min: Position::new(-1.0, -1.0), max: Position::new(1.0, 1.0) };

    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn diagonal(&self) -> f64 {
        self.max.distance(self.min)
    }
}

impl Default for Region {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// An immutable user population plus the channel it lives in.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub users: Vec<Position>,
    /// Generating mixture component per user (diagnostics only).
    #[cfg_attr(feature = "serde", serde(default))]
    pub labels: Vec<usize>,
    pub region: Region,
    pub channel: ChannelParams,
    pub seed: u64,
}

impl Scenario {
    pub fn generate(spec: &GmmSpec, count: usize, region: Region, channel: ChannelParams, seed: u64) -> Result<Self> {
        channel.validate()?;
        let drawn = sample_gmm_labeled(spec, count, rng::derive_seed(seed, rng::TAG_SCENARIO))?;
        let (users, labels) = drawn.into_iter().unzip();
        Ok(Scenario { users, labels, region, channel, seed })
    }

    /// A scenario around explicit positions (tests, replays).
    pub fn from_users(users: Vec<Position>, channel: ChannelParams) -> Self {
        Scenario { labels: Vec::new(), users, region: Region::REFERENCE, channel, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.users.is_empty() {
            return Err(Error::Config("scenario has no users".into()));
        }
        if let Some(i) = self.users.iter().position(|p| !p.is_finite()) {
            return Err(Error::Config(format!("user {i} has a non-finite position")));
        }
        if !self.labels.is_empty() && self.labels.len() != self.users.len() {
            return Err(Error::Config("label count does not match user count".into()));
        }
        Ok(())
    }
}
