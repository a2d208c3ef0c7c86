//! The catalog of noise coefficients σ with their structural constants.
//!
//! Four families are supported, each Lipschitz:
//!
//! * `Constant`: σ(x) = ε₀ (ε₀ = 0 gives the deterministic heat equation);
//! * `BoundedBelow`: σ(x) = ε₀ + b·|x|/(1+|x|), bounded in [ε₀, ε₀+b];
//! * `LogDecay`: σ(x) = ε₀·(log(e+|x|))^{-(1/6-γ)}, positive with slow decay;
//! * `Linear`: σ(x) = c·x, the multiplicative (Anderson) regime.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    Constant { eps0: f64 },
    BoundedBelow { eps0: f64, b: f64 },
    LogDecay { eps0: f64, gamma: f64 },
    Linear { c: f64 },
}

impl SigmaSpec {
    pub fn constant(eps0: f64) -> Result<Self> {
        if !eps0.is_finite() || eps0 < 0.0 {
            return Err(Error::InvalidInput(format!(
                "constant sigma requires eps0 >= 0, got {eps0}"
            )));
        }
        Ok(SigmaSpec::Constant { eps0 })
    }

    pub fn bounded_below(eps0: f64, b: f64) -> Result<Self> {
        if !eps0.is_finite() || eps0 <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "bounded-below sigma requires eps0 > 0, got {eps0}"
            )));
        }
        if !b.is_finite() || b < 0.0 {
            return Err(Error::InvalidInput(format!(
                "bounded-below sigma requires b >= 0, got {b}"
            )));
        }
        Ok(SigmaSpec::BoundedBelow { eps0, b })
    }

    pub fn log_decay(eps0: f64, gamma: f64) -> Result<Self> {
        if !eps0.is_finite() || eps0 <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "log-decay sigma requires eps0 > 0, got {eps0}"
            )));
        }
        if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 / 6.0 {
            return Err(Error::InvalidInput(format!(
                "log-decay sigma requires gamma in (0, 1/6), got {gamma}"
            )));
        }
        Ok(SigmaSpec::LogDecay { eps0, gamma })
    }

    pub fn linear(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "linear sigma requires c > 0, got {c}"
            )));
        }
        Ok(SigmaSpec::Linear { c })
    }

    /// σ(u).
    #[inline]
    pub fn evaluate(&self, u: f64) -> f64 {
        match *self {
            SigmaSpec::Constant { eps0 } => eps0,
            SigmaSpec::BoundedBelow { eps0, b } => {
                let a = u.abs();
                eps0 + b * a / (1.0 + a)
            }
            SigmaSpec::LogDecay { eps0, gamma } => {
                let p = 1.0 / 6.0 - gamma;
                eps0 * (std::f64::consts::E + u.abs()).ln().powf(-p)
            }
            SigmaSpec::Linear { c } => c * u,
        }
    }

    /// Upper bound on |σ(x)-σ(y)|/|x-y|; exact for `Constant` and `Linear`,
    /// a certified derivative bound for the other families.
    pub fn lipschitz_constant(&self) -> f64 {
        match *self {
            SigmaSpec::Constant { .. } => 0.0,
            // d/dx [b x/(1+x)] = b/(1+x)^2 <= b at x = 0
            SigmaSpec::BoundedBelow { b, .. } => b,
            // |d/dx| = eps0 p (ln(e+x))^{-p-1}/(e+x); both factors are
            // maximal at x = 0, where the bound is eps0 p / e
            SigmaSpec::LogDecay { eps0, gamma } => {
                eps0 * (1.0 / 6.0 - gamma) / std::f64::consts::E
            }
            SigmaSpec::Linear { c } => c,
        }
    }

    /// Largest ε with σ(x) ≥ ε for all x (zero for families touching zero).
    pub fn lower_bound(&self) -> f64 {
        match *self {
            SigmaSpec::Constant { eps0 } => eps0,
            SigmaSpec::BoundedBelow { eps0, .. } => eps0,
            SigmaSpec::LogDecay { .. } | SigmaSpec::Linear { .. } => 0.0,
        }
    }

    /// Whether σ(0) = 0, the precondition for positivity preservation.
    pub fn vanishes_at_zero(&self) -> bool {
        matches!(self, SigmaSpec::Linear { .. }) || self.evaluate(0.0) == 0.0
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SigmaSpec::Constant { .. } => "constant",
            SigmaSpec::BoundedBelow { .. } => "bounded_below",
            SigmaSpec::LogDecay { .. } => "log_decay",
            SigmaSpec::Linear { .. } => "linear",
        }
    }
}
