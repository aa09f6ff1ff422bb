//! Exponential time decay.
//!
//! A point that arrived at `t_i` weighs `a^(λ·(t − t_i))` at time `t`. Cell
//! densities are sums of such weights, so a density only ever needs to be
//! multiplied by a common factor to move it forward in time: every density
//! decays at the same pace and the relative order of two cells changes only
//! when one of them absorbs a point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since the stream epoch.
pub type Timestamp = f64;

/// Weights below this are flushed to zero.
pub const FRESHNESS_FLOOR: f64 = 1e-12;

/// Decay and activation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// Decay base, `0 < a < 1`.
    pub a: f64,
    /// Decay exponent scale, `> 0`.
    pub lambda: f64,
    /// Expected arrival rate in points per second.
    pub v: f64,
    /// Activation fraction of the steady-state total freshness.
    pub beta: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            a: 0.998,
            lambda: 1.0,
            v: 1000.0,
            beta: 0.0021,
        }
    }
}

/// Result of [`DecayParams::deletion_horizon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub seconds: f64,
    /// Set when the closed form is not positive; `seconds` is then 0 and any
    /// inactive cell may be dropped.
    pub degenerate: bool,
}

impl DecayParams {
    pub fn new(a: f64, lambda: f64, v: f64, beta: f64) -> Result<Self> {
        let p = DecayParams { a, lambda, v, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::InvalidParam(format!("a = {} must lie in (0, 1)", self.a)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParam(format!("lambda = {} must be > 0", self.lambda)));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::InvalidParam(format!("v = {} must be > 0", self.v)));
        }
        let lower = self.beta_lower_bound();
        if !(self.beta > lower && self.beta < 1.0) {
            return Err(Error::InvalidParam(format!(
                "beta = {} must lie in ({lower}, 1)",
                self.beta
            )));
        }
        Ok(())
    }

    /// `a^λ`, the decay factor over one second.
    pub fn per_second(&self) -> f64 {
        self.a.powf(self.lambda)
    }

    /// Exclusive lower end of the legal β range, `(1 − a^λ)/v`.
    pub fn beta_lower_bound(&self) -> f64 {
        (1.0 - self.per_second()) / self.v
    }

    /// Continuous decay rate `−λ·ln a` in 1/s.
    pub fn rate(&self) -> f64 {
        -self.lambda * self.a.ln()
    }

    /// Weight at `t` of a point that arrived at `t_i`.
    pub fn freshness(&self, t_i: Timestamp, t: Timestamp) -> Result<f64> {
        if t < t_i {
            return Err(Error::Precondition(format!(
                "freshness asked at {t} for a point from {t_i}"
            )));
        }
        Ok(flush(self.a.powf(self.lambda * (t - t_i))))
    }

    /// Density `rho_last` recorded at `t_last`, decayed to `t`.
    pub fn decay_density(&self, rho_last: f64, t_last: Timestamp, t: Timestamp) -> Result<f64> {
        if rho_last < 0.0 {
            return Err(Error::Precondition(format!("negative density {rho_last}")));
        }
        if t < t_last {
            return Err(Error::Precondition(format!(
                "cannot decay backwards from {t_last} to {t}"
            )));
        }
        Ok(flush(rho_last * self.a.powf(self.lambda * (t - t_last))))
    }

    /// Decays `rho_last` to `t` and adds the point arriving at `t`.
    pub fn absorb(&self, rho_last: f64, t_last: Timestamp, t: Timestamp) -> Result<f64> {
        Ok(self.decay_density(rho_last, t_last, t)? + 1.0)
    }

    /// Sum of all freshness of an unbounded stream at rate `v`: `v/(1 − a^λ)`.
    pub fn total_freshness(&self) -> f64 {
        self.v / (1.0 - self.per_second())
    }

    /// Density at or above which a cell takes part in clustering.
    pub fn active_threshold(&self) -> f64 {
        self.beta * self.total_freshness()
    }

    /// Time after which an untouched inactive cell can be dropped:
    /// `(log_a(1 − a^λ) − log_a(β·v)) / (λ·v)`.
    pub fn deletion_horizon(&self) -> Horizon {
        let ln_a = self.a.ln();
        let num = (1.0 - self.per_second()).ln() / ln_a - (self.beta * self.v).ln() / ln_a;
        let seconds = num / (self.lambda * self.v);
        if seconds > 0.0 && seconds.is_finite() {
            Horizon {
                seconds,
                degenerate: false,
            }
        } else {
            Horizon {
                seconds: 0.0,
                degenerate: true,
            }
        }
    }
}

fn flush(w: f64) -> f64 {
    if w < FRESHNESS_FLOOR {
        0.0
    } else {
        w
    }
}

/// Landmark-relative weights.
///
/// A cell stores `w = ρ(t_last) · a^(−λ·(t_last − L))` for a landmark `L`; its
/// density at any `t` is `w · a^(λ·(t − L))`. Absorbing a point at `t` adds
/// `a^(−λ·(t − L))` to `w`. Since the factor is shared by every cell, densities
/// compare by `w` alone and their order never drifts with time.
///
/// Gains grow without bound as `t` moves away from `L`; [`DecayClock::rebase`]
/// moves the landmark forward by an exact power of two so stored weights can
/// be rescaled without rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayClock {
    params: DecayParams,
    landmark: Timestamp,
}

/// Gain above which the landmark is moved.
const REBASE_LIMIT: f64 = 1.0e60;
/// log2 of the rescale factor applied on rebase.
const REBASE_SHIFT: i32 = 180;

impl DecayClock {
    pub fn new(params: DecayParams) -> Self {
        DecayClock {
            params,
            landmark: 0.0,
        }
    }

    pub fn params(&self) -> &DecayParams {
        &self.params
    }

    pub fn landmark(&self) -> Timestamp {
        self.landmark
    }

    /// Weight contributed by a point arriving at `t`.
    pub fn gain(&self, t: Timestamp) -> f64 {
        self.params.a.powf(-self.params.lambda * (t - self.landmark))
    }

    /// Converts a stored weight into a density at `t`.
    pub fn density(&self, weight: f64, t: Timestamp) -> f64 {
        flush(weight * self.params.a.powf(self.params.lambda * (t - self.landmark)))
    }

    /// Converts a density at `t` into a stored weight.
    pub fn weight_of(&self, density: f64, t: Timestamp) -> f64 {
        density * self.gain(t)
    }

    pub fn needs_rebase(&self, t: Timestamp) -> bool {
        self.gain(t) > REBASE_LIMIT
    }

    /// Moves the landmark forward and returns the exact factor every stored
    /// weight must be multiplied by.
    pub fn rebase(&mut self) -> f64 {
        let shift = REBASE_SHIFT as f64 * std::f64::consts::LN_2 / self.params.rate();
        self.landmark += shift;
        2f64.powi(-REBASE_SHIFT)
    }
}
