use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{ActionId, StateId};

pub const FORMAT_VERSION: u32 = 1;

/// A JSON document that does not fit the expected schema. `path` locates
/// the offending key, `.` being the document root.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("schema mismatch at {path}: {message}")]
pub struct SchemaMismatch {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanFileError {
    #[error(transparent)]
    Schema(#[from] SchemaMismatch),
    #[error("unsupported format_version {0}")]
    Version(u32),
    #[error("high_level_length {length} differs from {actions} listed actions")]
    LengthMismatch { length: usize, actions: usize },
}

/// Serialized candidate plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub format_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub plan_id: String,
    pub gamma: f64,
    pub gammas: Vec<f64>,
    pub actions: Vec<String>,
    pub high_level_length: usize,
    /// Absent when timings are not recorded (keeps artifacts reproducible).
    pub planning_time_s: Option<f64>,
    /// Relative path of the refined trajectory CSV.
    pub trajectory: Option<String>,
    pub low_level_length_m: Option<f64>,
    pub policy: BTreeMap<StateId, ActionId>,
}

impl PlanFile {
    fn check(&self) -> Result<(), PlanFileError> {
        if self.format_version != FORMAT_VERSION {
            return Err(PlanFileError::Version(self.format_version));
        }
        if self.high_level_length != self.actions.len() {
            return Err(PlanFileError::LengthMismatch { length: self.high_level_length, actions: self.actions.len() });
        }
        Ok(())
    }
}

pub fn write_plan_file(p: &PlanFile) -> Result<String, PlanFileError> {
    p.check()?;
    let mut s = serde_json::to_string_pretty(p).expect("plan files always serialize");
    s.push('\n');
    Ok(s)
}

pub fn read_plan_file(text: &str) -> Result<PlanFile, PlanFileError> {
    let p: PlanFile = from_json_strict(text)?;
    p.check()?;
    Ok(p)
}

/// Deserializes `text`, reporting failures with the JSON path of the
/// offending key. Missing and unknown fields point at the field itself.
pub fn from_json_strict<T: DeserializeOwned>(text: &str) -> Result<T, SchemaMismatch> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner().to_string();
        let mut path = match e.path().to_string().as_str() {
            "." => String::new(),
            p => format!(".{p}"),
        };
        // Missing fields are reported at their parent object.
        if let Some(name) = inner.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            path.push('.');
            path.push_str(name);
        }
        if path.is_empty() {
            path.push('.');
        }
        let message = match inner.rfind(" at line ") {
            Some(i) => inner[..i].to_string(),
            None => inner,
        };
        SchemaMismatch { path, message }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PlanFile {
        PlanFile {
            format_version: FORMAT_VERSION,
            config_hash: "ab".repeat(32),
            master_seed: 7,
            plan_id: "P1".into(),
            gamma: 0.9876543210987654,
            gammas: vec![0.9876543210987654, 0.1 + 0.2],
            actions: vec!["goto tank".into(), "inspect tank".into()],
            high_level_length: 2,
            planning_time_s: None,
            trajectory: Some("P1.trajectory.csv".into()),
            low_level_length_m: Some(23.25),
            policy: BTreeMap::from([(0, 1), (3, 4)]),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        assert_eq!(read_plan_file(&write_plan_file(&p).unwrap()).unwrap(), p);
    }

    #[test]
    fn missing_gamma_points_at_gamma() {
        let mut v: serde_json::Value = serde_json::from_str(&write_plan_file(&sample()).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("gamma");
        match read_plan_file(&v.to_string()).unwrap_err() {
            PlanFileError::Schema(s) => assert_eq!(s.path, ".gamma"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_field_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(&write_plan_file(&sample()).unwrap()).unwrap();
        v.as_object_mut().unwrap().insert("colour".into(), 1.into());
        match read_plan_file(&v.to_string()).unwrap_err() {
            PlanFileError::Schema(s) => {
                assert_eq!(s.path, ".colour");
                assert!(s.message.contains("colour"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn nested_type_error_has_full_path() {
        let text = write_plan_file(&sample()).unwrap().replace("\"goto tank\"", "5");
        match read_plan_file(&text).unwrap_err() {
            PlanFileError::Schema(s) => assert_eq!(s.path, ".actions[0]"),
            e => panic!("{e}"),
        }
    }
}
