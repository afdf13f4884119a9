//! Uplink propagation and rate model: distance-based large-scale fading,
//! matched-filter SINR, and the closed-form ergodic rate under Rayleigh
//! small-scale fading.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::Exp1;

use crate::{Error, Result};

/// A point on the plane, in kilometres.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn distance_sq(self, other: Position) -> f64 {
        (self - other).norm_sq()
    }

    pub fn distance(self, other: Position) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Position {
    fn add_assign(&mut self, rhs: Position) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, rhs: f64) -> Position {
        Position::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Position {
    type Output = Position;
    fn neg(self) -> Position {
        Position::new(-self.x, -self.y)
    }
}

/// `d^gamma` with an exact fast path for the common `gamma = 2`.
#[inline]
pub(crate) fn pow_len(d: f64, gamma: f64) -> f64 {
    if gamma == 2.0 {
        d * d
    } else {
        libm::pow(d, gamma)
    }
}

/// Large-scale propagation constants. Shadow fading is fixed to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelParams {
    /// Pathloss exponent.
    pub gamma: f64,
    /// Gain inside the breakpoint distance.
    pub c0: f64,
    /// Pathloss constant beyond the breakpoint.
    pub c1: f64,
    /// Breakpoint distance, km.
    pub r0: f64,
    /// Uplink transmit power relative to unit noise power (linear).
    pub rho_r: f64,
}

impl ChannelParams {
    /// COST-231 derived constants with a 200 mW uplink (stored as 0.2 linear).
    pub const REFERENCE: ChannelParams = ChannelParams { gamma: 2.0, c0: 75.86, c1: 7.59e-7, r0: 0.001, rho_r: 0.2 };

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma >= 2.0
            && self.gamma.is_finite()
            && self.c0 > 0.0
            && self.c1 > 0.0
            && self.r0 > 0.0
            && self.rho_r > 0.0
            && self.c0.is_finite()
            && self.c1.is_finite()
            && self.r0.is_finite()
            && self.rho_r.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!("invalid channel parameters {self:?}")))
        }
    }

    /// Large-scale gain at distance `d` km.
    pub fn gain_at(&self, d: f64) -> f64 {
        if d <= self.r0 {
            self.c0
        } else {
            self.c1 / pow_len(d, self.gamma)
        }
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// Squared magnitude of the small-scale fading coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FadingSample {
    pub h_sq: f64,
}

impl FadingSample {
    /// Unit-mean sample (`E|h|^2 = 1`), the value the ergodic rate averages out.
    pub const MEAN: FadingSample = FadingSample { h_sq: 1.0 };

    /// `|h|^2` for `h ~ CN(0, 1)` is Exp(1).
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        FadingSample { h_sq: rng.sample(Exp1) }
    }
}

/// Large-scale gains seen by one AP while serving one user.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkGains {
    pub serving_beta: f64,
    pub interfering_betas: Vec<f64>,
}

impl LinkGains {
    pub fn new(serving_beta: f64, interfering_betas: Vec<f64>) -> Self {
        LinkGains { serving_beta, interfering_betas }
    }

    /// Keep only the `n` strongest interferers.
    pub fn truncated(mut self, n: usize) -> Self {
        if self.interfering_betas.len() > n {
            self.interfering_betas.sort_by(|a, b| b.total_cmp(a));
            self.interfering_betas.truncate(n);
        }
        self
    }

    pub fn interference_sum(&self) -> f64 {
        self.interfering_betas.iter().sum()
    }
}

pub fn large_scale_fading(user: Position, ap: Position, params: &ChannelParams) -> f64 {
    params.gain_at(user.distance(ap))
}

pub fn sinr(link: &LinkGains, fading: FadingSample, params: &ChannelParams) -> f64 {
    let rho = params.rho_r;
    rho * link.serving_beta * fading.h_sq / (1.0 + rho * link.interference_sum())
}

/// `(1 + rho * sum(beta_int)) / (rho * beta_serve)`: the reciprocal of the
/// SINR at unit fading power.
pub fn interference_quotient(link: &LinkGains, params: &ChannelParams) -> Result<f64> {
    quotient_from_parts(link.serving_beta, link.interference_sum(), params.rho_r)
}

#[inline]
pub(crate) fn quotient_from_parts(serving: f64, interference: f64, rho: f64) -> Result<f64> {
    if !(serving > 0.0) {
        return Err(Error::DegenerateLink);
    }
    Ok((1.0 + rho * interference) / (rho * serving))
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EXPINT_EPS: f64 = 1e-16;
const EXPINT_MAX_ITERS: usize = 500;

/// Exponential integral `∫_x^∞ e^{-t}/t dt`, i.e. the function usually
/// written `E1(x)` (some texts call it `Ei`).
pub fn exp_integral(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::Domain(x));
    }
    if x < 1.0 {
        Ok(e1_series(x))
    } else {
        Ok(libm::exp(-x) * scaled_e1_fraction(x))
    }
}

/// `e^x · E1(x)`, finite for every positive `x` (no overflow for large `x`).
pub fn scaled_exp_integral(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::Domain(x));
    }
    if x < 1.0 {
        Ok(libm::exp(x) * e1_series(x))
    } else if x.is_infinite() {
        Ok(0.0)
    } else {
        Ok(scaled_e1_fraction(x))
    }
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
    let mut sum = 0.0;
    let mut fact_term = 1.0; // (-x)^k / k!
    for k in 1..EXPINT_MAX_ITERS {
        fact_term *= -x / k as f64;
        let term = fact_term / k as f64;
        sum += term;
        if libm::fabs(term) < EXPINT_EPS * libm::fabs(sum) {
            break;
        }
    }
    -EULER_GAMMA - libm::log(x) - sum
}

/// Modified Lentz evaluation of the continued fraction for `e^x E1(x)`.
fn scaled_e1_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..EXPINT_MAX_ITERS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if libm::fabs(del - 1.0) < EXPINT_EPS {
            break;
        }
    }
    h
}

/// Ergodic rate `E{log2(1 + |h|^2 / mu)}` over Rayleigh fading, in bit/s/Hz:
/// `e^mu E1(mu) / ln 2`.
pub fn achievable_rate(mu: f64) -> Result<f64> {
    Ok(scaled_exp_integral(mu)? / core::f64::consts::LN_2)
}
