//! Declarative experiment files.
//!
//! A spec is a flat JSON object; parameter grids are arrays. Unknown keys
//! are rejected. Example:
//!
//! ```json
//! {
//!   "kind": "histogram",
//!   "n": [1000],
//!   "d": [5, 15],
//!   "lambda": [0.7],
//!   "replications": 1000,
//!   "t_record": [50],
//!   "master_seed": 7
//! }
//! ```
//!
//! Defaults: `lambda = [0.7]`, `t_record = [50]`, `replications = 1000`
//! (1 for `sample_paths`),
//! `master_seed = 0`, `output_dir = "out"`, `time_scale = "fluid"` for
//! `sample_paths` and `"raw"` otherwise, `record_points = 500`, and
//! `bin_width = 1/n` per grid point.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SamplePaths,
    Histogram,
    KsSweep,
    Tradeoff,
}

/// Clock on which `t_record` is expressed: the simulator's own clock, or
/// the fluid clock (unscaled time multiplied by `d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    Raw,
    Fluid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n: Vec<usize>,
    /// Absent for `sample_paths`, where `d = round(10 log10 n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<usize>>,
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
    /// Replications per grid point (sample paths per `n` for
    /// `sample_paths`).
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default = "default_t_record")]
    pub t_record: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub time_scale: Option<TimeScale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    #[serde(default = "default_record_points")]
    pub record_points: usize,
}

fn default_lambda() -> Vec<f64> {
    vec![0.7]
}

fn default_t_record() -> Vec<f64> {
    vec![50.0]
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_record_points() -> usize {
    500
}

impl ExperimentSpec {
    /// Sample-size grid; empty for `sample_paths`.
    pub fn d_grid(&self) -> &[usize] {
        self.d.as_deref().unwrap_or(&[])
    }

    pub fn resolved_time_scale(&self) -> TimeScale {
        self.time_scale.unwrap_or(match self.kind {
            ExperimentKind::SamplePaths => TimeScale::Fluid,
            _ => TimeScale::Raw,
        })
    }

    pub fn replications(&self) -> usize {
        self.replications.unwrap_or(match self.kind {
            ExperimentKind::SamplePaths => 1,
            _ => 1000,
        })
    }

    /// Fills defaults that depend on `kind`, then validates.
    pub fn resolve(mut self, source: &str) -> Result<Self> {
        self.time_scale = Some(self.resolved_time_scale());
        self.replications = Some(self.replications());
        self.validate(source)?;
        Ok(self)
    }

    fn validate(&self, source: &str) -> Result<()> {
        let fail = |key: &str, msg: String| Err(CliError::Spec(with_line(source, key, msg)));
        if self.n.is_empty() {
            return fail("n", "grid `n` must be nonempty".into());
        }
        if self.n.contains(&0) {
            return fail("n", "grid `n` entries must be at least 1".into());
        }
        if self.lambda.is_empty() {
            return fail("lambda", "grid `lambda` must be nonempty".into());
        }
        if let Some(&l) = self.lambda.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
            return fail("lambda", format!("`lambda` entries must lie in (0, 1), got {l}"));
        }
        if self.replications() == 0 {
            return fail("replications", "`replications` must be at least 1".into());
        }
        if self.t_record.is_empty() {
            return fail("t_record", "`t_record` must be nonempty".into());
        }
        if let Some(&t) = self.t_record.iter().find(|&&t| !(t >= 0.0 && t.is_finite())) {
            return fail("t_record", format!("`t_record` entries must be finite and nonnegative, got {t}"));
        }
        if let Some(w) = self.bin_width {
            if !(w > 0.0 && w.is_finite()) {
                return fail("bin_width", format!("`bin_width` must be positive, got {w}"));
            }
        }
        let scale = self.resolved_time_scale();
        match self.kind {
            ExperimentKind::SamplePaths => {
                if self.d.is_some() {
                    return fail("d", "`d` is derived as round(10 log10 n) for sample_paths; remove it".into());
                }
                if scale != TimeScale::Fluid {
                    return fail("time_scale", "sample_paths records on the fluid time scale".into());
                }
                if self.t_record.len() != 1 {
                    return fail("t_record", "sample_paths takes a single end time".into());
                }
                if self.record_points < 2 {
                    return fail("record_points", "`record_points` must be at least 2".into());
                }
                for &n in &self.n {
                    crate::experiments::sample_paths_d(n).map_err(|e| CliError::Spec(with_line(source, "n", e.to_string())))?;
                }
            }
            _ => {
                match &self.d {
                    None => return fail("kind", "grid `d` is required".into()),
                    Some(d) if d.is_empty() => return fail("d", "grid `d` must be nonempty".into()),
                    Some(d) if d.contains(&0) => return fail("d", "grid `d` entries must be at least 1".into()),
                    _ => {}
                }
                if scale != TimeScale::Raw {
                    return fail("time_scale", "this experiment records on the raw (unscaled) clock".into());
                }
                if matches!(self.kind, ExperimentKind::KsSweep | ExperimentKind::Tradeoff) && self.t_record.len() != 1 {
                    return fail("t_record", "this experiment takes a single record time".into());
                }
            }
        }
        Ok(())
    }

    /// Compact JSON of the resolved spec, as embedded in output headers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// Appends the line on which `key` appears in `source`, if it does.
fn with_line(source: &str, key: &str, msg: String) -> String {
    let needle = format!("\"{key}\"");
    match source.lines().position(|l| l.contains(&needle)) {
        Some(i) => format!("{msg} (line {})", i + 1),
        None => msg,
    }
}

pub fn parse_spec(source: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec =
        serde_json::from_str(source).map_err(|e| CliError::Spec(format!("invalid spec: {e}")))?;
    spec.resolve(source)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse_spec(&source).map_err(|e| match e {
        CliError::Spec(msg) => CliError::Spec(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse_spec(r#"{"kind": "histogram", "n": [20], "d": [4]}"#).unwrap();
        assert_eq!(s.lambda, vec![0.7]);
        assert_eq!(s.t_record, vec![50.0]);
        assert_eq!(s.replications, Some(1000));
        assert_eq!(s.time_scale, Some(TimeScale::Raw));
        let p = parse_spec(r#"{"kind": "sample_paths", "n": [100]}"#).unwrap();
        assert_eq!(p.time_scale, Some(TimeScale::Fluid));
        assert_eq!(p.record_points, 500);
        assert_eq!(p.replications, Some(1));
    }

    #[test]
    fn zero_replications_rejected_with_line() {
        let src = "{\n  \"kind\": \"histogram\",\n  \"n\": [20],\n  \"d\": [4],\n  \"replications\": 0\n}";
        let err = parse_spec(src).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("replications") && msg.contains("line 5"), "{msg}");
    }

    #[test]
    fn unknown_key_named() {
        let err = parse_spec(r#"{"kind": "histogram", "n": [20], "d": [4], "lamda": [0.7]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lamda"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn kind_specific_rules() {
        assert!(parse_spec(r#"{"kind": "sample_paths", "n": [100], "d": [4]}"#).is_err());
        assert!(parse_spec(r#"{"kind": "sample_paths", "n": [1]}"#).is_err());
        assert!(parse_spec(r#"{"kind": "histogram", "n": [20]}"#).is_err());
        assert!(parse_spec(r#"{"kind": "ks_sweep", "n": [20], "d": [4], "t_record": [1, 2]}"#).is_err());
        assert!(parse_spec(r#"{"kind": "tradeoff", "n": [20], "d": [4], "time_scale": "fluid"}"#).is_err());
        assert!(parse_spec(r#"{"kind": "histogram", "n": [], "d": [4]}"#).is_err());
        assert!(parse_spec(r#"{"kind": "histogram", "n": [20], "d": [4], "lambda": [1.2]}"#).is_err());
        assert!(parse_spec(r#"{"kind": "histogram", "n": [20], "d": [4], "bin_width": 0}"#).is_err());
        assert!(parse_spec(r#"{"kind": "nope", "n": [20]}"#).is_err());
    }

    #[test]
    fn resolved_json_round_trips() {
        let s = parse_spec(r#"{"kind": "ks_sweep", "n": [200, 600], "d": [5], "lambda": [0.8, 0.9], "t_record": [100]}"#).unwrap();
        let again = parse_spec(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }
}
