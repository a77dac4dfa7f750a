//! Homeostatic interoception. Drives rise over time and fall when the infant
//! drinks. This module reports levels only; it has no notion of reward.

use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum Substance {
    Water,
    Milk,
}

impl Substance {
    pub fn word(self) -> &'static str {
        match self {
            Substance::Water => "WATER",
            Substance::Milk => "MILK",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        match word {
            "WATER" => Some(Substance::Water),
            "MILK" => Some(Substance::Milk),
            _ => None,
        }
    }
}

impl FromStr for Substance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "water" => Ok(Substance::Water),
            "milk" => Ok(Substance::Milk),
            other => Err(Error::InvalidSubstance(other.to_string())),
        }
    }
}

impl fmt::Display for Substance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Substance::Water => "water",
            Substance::Milk => "milk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DriveState {
    pub thirst: f64,
    pub hunger: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DriveParams {
    pub thirst_rate: f64,
    pub hunger_rate: f64,
    pub cry_threshold: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            thirst_rate: 0.001,
            hunger_rate: 0.0005,
            cry_threshold: 0.6,
        }
    }
}

impl DriveParams {
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(self.thirst_rate >= 0.0) {
            return Err(("thirst_rate", "must be non-negative".into()));
        }
        if !(self.hunger_rate >= 0.0) {
            return Err(("hunger_rate", "must be non-negative".into()));
        }
        if !(self.cry_threshold > 0.0 && self.cry_threshold < 1.0) {
            return Err(("cry_threshold", "must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

impl DriveState {
    pub fn clamped(self) -> Self {
        Self {
            thirst: self.thirst.clamp(0.0, 1.0),
            hunger: self.hunger.clamp(0.0, 1.0),
        }
    }
}

pub fn tick(drives: DriveState, params: &DriveParams) -> DriveState {
    DriveState {
        thirst: drives.thirst + params.thirst_rate,
        hunger: drives.hunger + params.hunger_rate,
    }
    .clamped()
}

/// Water relieves thirst; milk relieves hunger and half as much thirst.
pub fn ingest(drives: DriveState, substance: Substance, amount: f64) -> DriveState {
    let amount = amount.max(0.0);
    match substance {
        Substance::Water => DriveState {
            thirst: drives.thirst - amount,
            ..drives
        },
        Substance::Milk => DriveState {
            thirst: drives.thirst - 0.5 * amount,
            hunger: drives.hunger - amount,
        },
    }
    .clamped()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn tick_by_constants() {
        let p = DriveParams::default();
        let d = tick(DriveState::default(), &p);
        assert!(close(d.thirst, 0.001) && close(d.hunger, 0.0005));
        let d = tick(
            DriveState {
                thirst: 0.9995,
                hunger: 0.0,
            },
            &p,
        );
        assert_eq!(d.thirst, 1.0);
    }

    #[test]
    fn six_hundred_ticks_reach_threshold() {
        let p = DriveParams::default();
        let mut d = DriveState::default();
        for _ in 0..600 {
            d = tick(d, &p);
        }
        assert!((d.thirst - p.cry_threshold).abs() < 1e-9);
    }

    #[test]
    fn ingest_examples() {
        let d = ingest(
            DriveState {
                thirst: 0.7,
                hunger: 0.0,
            },
            Substance::Water,
            0.05,
        );
        assert!(close(d.thirst, 0.65));
        let d = ingest(
            DriveState {
                thirst: 0.7,
                hunger: 0.4,
            },
            Substance::Milk,
            0.05,
        );
        assert!(close(d.thirst, 0.675) && close(d.hunger, 0.35));
        let d = ingest(
            DriveState {
                thirst: 0.02,
                hunger: 0.0,
            },
            Substance::Water,
            0.05,
        );
        assert_eq!(d.thirst, 0.0);
    }

    #[test]
    fn unknown_substance() {
        assert_eq!(
            "juice".parse::<Substance>(),
            Err(Error::InvalidSubstance("juice".into()))
        );
        assert_eq!("milk".parse::<Substance>(), Ok(Substance::Milk));
    }

    #[test]
    fn params_validation() {
        assert!(DriveParams::default().validate().is_ok());
        let bad = DriveParams {
            cry_threshold: 1.0,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "cry_threshold");
    }

    proptest! {
        #[test]
        fn drives_stay_bounded_and_monotone(
            start in (0.0f64..=1.0, 0.0f64..=1.0),
            ops in proptest::collection::vec((any::<bool>(), 0.0f64..0.3), 0..200),
        ) {
            let p = DriveParams::default();
            let mut d = DriveState { thirst: start.0, hunger: start.1 };
            for (milk, amount) in ops {
                let before = d;
                d = tick(d, &p);
                prop_assert!(d.thirst >= before.thirst && d.hunger >= before.hunger);
                let s = if milk { Substance::Milk } else { Substance::Water };
                d = ingest(d, s, amount);
                prop_assert!((0.0..=1.0).contains(&d.thirst));
                prop_assert!((0.0..=1.0).contains(&d.hunger));
            }
        }
    }
}
