//! Acquisition functions.
//!
//! [`analytic`] holds the closed-form variance-based scores evaluated one
//! candidate at a time, [`mc`] the Monte-Carlo batch scores and knowledge
//! gradient, and [`geometric`] the distance-based weighted score and the
//! Pareto-front sampler.

pub mod analytic;
pub mod geometric;
pub mod mc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Every strategy the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "sEI")]
    SeqEi,
    #[serde(rename = "qEI")]
    BatchEi,
    #[serde(rename = "sPI")]
    SeqPi,
    #[serde(rename = "qPI")]
    BatchPi,
    #[serde(rename = "sUCB")]
    SeqUcb,
    #[serde(rename = "qUCB")]
    BatchUcb,
    #[serde(rename = "sMES")]
    SeqMes,
    #[serde(rename = "qKG")]
    BatchKg,
    #[serde(rename = "Wscore")]
    Wscore,
    #[serde(rename = "DYCORS")]
    Dycors,
    #[serde(rename = "EEPA+")]
    EepaPlus,
    #[serde(rename = "SOP")]
    Sop,
    /// Uniform candidates, uniformly random selection. Baseline only.
    #[serde(rename = "random")]
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 13] = [
        Strategy::SeqEi,
        Strategy::BatchEi,
        Strategy::SeqPi,
        Strategy::BatchPi,
        Strategy::SeqUcb,
        Strategy::BatchUcb,
        Strategy::SeqMes,
        Strategy::BatchKg,
        Strategy::Wscore,
        Strategy::Dycors,
        Strategy::EepaPlus,
        Strategy::Sop,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SeqEi => "sEI",
            Strategy::BatchEi => "qEI",
            Strategy::SeqPi => "sPI",
            Strategy::BatchPi => "qPI",
            Strategy::SeqUcb => "sUCB",
            Strategy::BatchUcb => "qUCB",
            Strategy::SeqMes => "sMES",
            Strategy::BatchKg => "qKG",
            Strategy::Wscore => "Wscore",
            Strategy::Dycors => "DYCORS",
            Strategy::EepaPlus => "EEPA+",
            Strategy::Sop => "SOP",
            Strategy::Random => "random",
        }
    }

    /// Sequential strategies select one point per iteration.
    pub fn is_sequential(self) -> bool {
        matches!(
            self,
            Strategy::SeqEi | Strategy::SeqPi | Strategy::SeqUcb | Strategy::SeqMes
        )
    }

    pub fn is_distance_based(self) -> bool {
        matches!(
            self,
            Strategy::Wscore | Strategy::Dycors | Strategy::EepaPlus | Strategy::Sop
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "eepa" | "eepa_plus" | "eepaplus" => Some(Strategy::EepaPlus),
                "wscore+dy" => Some(Strategy::Dycors),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown acquisition {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert_eq!("eepa".parse::<Strategy>().unwrap(), Strategy::EepaPlus);
        assert!("qMES".parse::<Strategy>().is_err());
    }
}
