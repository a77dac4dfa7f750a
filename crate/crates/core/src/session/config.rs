//! Session configuration: one JSON document, every field optional.

use std::path::PathBuf;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::caregiver::CaregiverParams;
use crate::curriculum::{ScheduleConfig, StageSchedule};
use crate::drives::{DriveParams, DriveState};
use crate::error::{Error, Result};
use crate::instincts::ReflexParams;
use crate::sdr::CodecParams;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    /// Developmental age at reset; selects the starting stage.
    pub start_step: u64,
    pub initial_drives: DriveState,
    pub schedule: ScheduleConfig,
    pub drives: DriveParams,
    pub codec: CodecParams,
    pub caregiver: CaregiverParams,
    pub reflexes: ReflexParams,
    /// Apply the reflex layer on the server side (scripted baselines only).
    pub server_reflexes: bool,
    /// Write an episode log here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<PathBuf>,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl SessionConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Parses and validates. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: SessionConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: SessionConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        StageSchedule::new(&self.schedule)
            .map_err(|(p, m)| config_error(format!("schedule.{p}"), m))?;
        self.drives
            .validate()
            .map_err(|(p, m)| config_error(format!("drives.{p}"), m))?;
        self.codec
            .validate()
            .map_err(|(p, m)| config_error(format!("codec.{p}"), m))?;
        self.caregiver
            .validate()
            .map_err(|(p, m)| config_error(format!("caregiver.{p}"), m))?;
        self.reflexes
            .validate()
            .map_err(|(p, m)| config_error(format!("reflexes.{p}"), m))?;
        for (name, v) in [
            ("thirst", self.initial_drives.thirst),
            ("hunger", self.initial_drives.hunger),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_error(
                    format!("initial_drives.{name}"),
                    "must lie in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// JSON Schema of the config document, as shipped in the repository.
pub fn config_schema() -> String {
    let schema = schemars::schema_for!(SessionConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        assert_eq!(SessionConfig::from_json("{}").unwrap(), SessionConfig::default());
    }

    #[test]
    fn unknown_field_reports_path() {
        let err = SessionConfig::from_json(r#"{"caregiver": {"walk_sped": 0.2}}"#).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "caregiver.walk_sped");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = SessionConfig::from_json(r#"{"drives": {"thirst_rate": "fast"}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "drives.thirst_rate"));
    }

    #[test]
    fn non_increasing_stages_rejected() {
        let err =
            SessionConfig::from_json(r#"{"schedule": {"durations": [500, 0, 10, 10, 10]}}"#)
                .unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "schedule.durations/1"));
    }

    #[test]
    fn invalid_values_rejected() {
        for (doc, want) in [
            (r#"{"drives": {"cry_threshold": 1.5}}"#, "drives.cry_threshold"),
            (r#"{"codec": {"min_overlap": 11}}"#, "codec.min_overlap"),
            (r#"{"caregiver": {"walk_speed": 0}}"#, "caregiver.walk_speed"),
            (r#"{"initial_drives": {"thirst": 2}}"#, "initial_drives.thirst"),
        ] {
            match SessionConfig::from_json(doc) {
                Err(Error::Config { path, .. }) => assert_eq!(path, want),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }

    #[test]
    fn round_trip() {
        let cfg = SessionConfig {
            seed: u64::MAX,
            start_step: 20_500,
            ..Default::default()
        };
        assert_eq!(SessionConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
