use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::VodError;

/// How `α` evolves with the global step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AlphaSchedule {
    /// `max(0, 1 − step / T)`: 1 → 0 over the first round, then 0.
    Linear,
    Constant(f64),
}

impl AlphaSchedule {
    pub fn alpha_at(&self, step: usize, steps_per_round: usize) -> f64 {
        match *self {
            AlphaSchedule::Linear => {
                if steps_per_round == 0 {
                    0.0
                } else {
                    (1.0 - step as f64 / steps_per_round as f64).max(0.0)
                }
            }
            AlphaSchedule::Constant(a) => a,
        }
    }
}

impl FromStr for AlphaSchedule {
    type Err = VodError;

    /// `linear`, `elbo` (constant 1), `mll` (constant 0) or `constant:<α>`.
    fn from_str(s: &str) -> Result<Self, VodError> {
        match s.trim() {
            "linear" => Ok(AlphaSchedule::Linear),
            "elbo" => Ok(AlphaSchedule::Constant(1.0)),
            "mll" => Ok(AlphaSchedule::Constant(0.0)),
            other => {
                let value = other
                    .strip_prefix("constant:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| VodError::invalid(format!("unknown alpha schedule `{other}`")))?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(VodError::invalid(format!("constant alpha {value} outside [0, 1]")));
                }
                Ok(AlphaSchedule::Constant(value))
            }
        }
    }
}

impl TryFrom<String> for AlphaSchedule {
    type Error = VodError;

    fn try_from(s: String) -> Result<Self, VodError> {
        s.parse()
    }
}

impl fmt::Display for AlphaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSchedule::Linear => write!(f, "linear"),
            AlphaSchedule::Constant(a) => write!(f, "constant:{a}"),
        }
    }
}

impl From<AlphaSchedule> for String {
    fn from(s: AlphaSchedule) -> String {
        s.to_string()
    }
}
