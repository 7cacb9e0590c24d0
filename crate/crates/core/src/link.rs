//! Inverse link functions of the cumulative link model.
//!
//! Each link maps a latent distance `z = b_q - f(x)` to the cumulative
//! probability `P(y <= C_q | x)`. Outputs of [`LinkFunction::cdf`] are
//! clamped to `[PROB_EPS, 1 - PROB_EPS]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Floor applied to cumulative and class probabilities.
pub const PROB_EPS: f64 = 1e-15;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
// Beyond this |z| the clog-log cdf is pinned to its clamp bounds.
const CLOGLOG_SATURATION: f64 = 30.0;
// Beyond this |z| Phi is below the clamp floor anyway (Phi(-8.3) ~ 5e-17).
const PROBIT_SATURATION: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Logit,
    Probit,
    #[serde(rename = "cloglog")]
    CLogLog,
}

impl LinkFunction {
    pub const ALL: [LinkFunction; 3] = [LinkFunction::Logit, LinkFunction::Probit, LinkFunction::CLogLog];

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Logit => "logit",
            LinkFunction::Probit => "probit",
            LinkFunction::CLogLog => "cloglog",
        }
    }

    /// Cumulative probability for latent distance `z`.
    pub fn cdf(self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.cdf_unchecked(z))
    }

    /// Derivative of the unclamped cdf with respect to `z`.
    pub fn pdf(self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.pdf_unchecked(z))
    }

    pub(crate) fn cdf_unchecked(self, z: f64) -> f64 {
        clamp_prob(self.raw_cdf(z))
    }

    pub(crate) fn pdf_unchecked(self, z: f64) -> f64 {
        match self {
            LinkFunction::Logit => {
                let s = logistic(z);
                s * (1.0 - s)
            }
            LinkFunction::Probit => INV_SQRT_2PI * (-0.5 * z * z).exp(),
            LinkFunction::CLogLog => {
                if z > CLOGLOG_SATURATION {
                    0.0
                } else {
                    (z - z.exp()).exp()
                }
            }
        }
    }

    /// Derivative of the clamped cdf: zero wherever the clamp is active.
    pub(crate) fn effective_pdf(self, z: f64) -> f64 {
        let raw = self.raw_cdf(z);
        if raw <= PROB_EPS || raw >= 1.0 - PROB_EPS {
            0.0
        } else {
            self.pdf_unchecked(z)
        }
    }

    fn raw_cdf(self, z: f64) -> f64 {
        match self {
            LinkFunction::Logit => logistic(z),
            LinkFunction::Probit => {
                if z > PROBIT_SATURATION {
                    1.0
                } else if z < -PROBIT_SATURATION {
                    0.0
                } else {
                    0.5 * erfc(-z / std::f64::consts::SQRT_2)
                }
            }
            LinkFunction::CLogLog => {
                if z > CLOGLOG_SATURATION {
                    1.0
                } else if z < -CLOGLOG_SATURATION {
                    0.0
                } else {
                    // 1 - exp(-e^z), accurate for small e^z
                    -(-z.exp()).exp_m1()
                }
            }
        }
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn check_finite(z: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("link argument must be finite, got {z}")))
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(LinkFunction::Logit),
            "probit" => Ok(LinkFunction::Probit),
            "cloglog" => Ok(LinkFunction::CLogLog),
            other => Err(Error::domain(format!("unknown link function `{other}`"))),
        }
    }
}
