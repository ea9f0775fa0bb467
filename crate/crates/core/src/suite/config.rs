use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::jet::Jet;
use crate::model_manifolds::{
    cpn_height_function, cpn_height_squared, flat_kahler_chart, fubini_study_chart,
};
use crate::suite::registry::find_check;
use crate::tensor_calculus::{ClosedFormField, KahlerChart, SharedField};

/// Invalid or unreadable suite configuration; `path` names the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Built-in chart and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    /// `fubini_study` (parameter `n`) or `flat` (parameters `p`, `q`).
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    /// Optional constant factor applied to the metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// A suite run: which chart, which candidate solution, which checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub chart_spec: ChartSpec,
    /// `height[:axis]`, `height_squared[:axis]`, `constant:<value>`,
    /// `quadratic`, `cubic` or `quartic`.
    pub solution_spec: String,
    pub c: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Radius of the coordinate ball the samples are drawn from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Per-check tolerance overrides, keyed by check name or alias.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Checks to run, by name or alias; empty means every registered check.
    #[serde(default)]
    pub checks: Vec<String>,
    /// Record wall time per check; off by default so reports are reproducible
    /// byte for byte.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_seed() -> u64 {
    0
}

fn default_samples() -> usize {
    50
}

/// Default sampling radius, capped by the chart domain.
pub const DEFAULT_RADIUS: f64 = 1.5;

impl SuiteConfig {
    pub fn from_value(value: Value) -> Result<SuiteConfig, ConfigError> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            ConfigError::new(path, e.into_inner().to_string())
        })
    }

    pub fn from_json_str(text: &str) -> Result<SuiteConfig, ConfigError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        SuiteConfig::from_value(value)
    }

    /// Reads a JSON document and applies `key=value` overrides before parsing.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<SuiteConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        SuiteConfig::from_value(value)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Sets a dotted key in a JSON document. The value is parsed as JSON when
/// possible and taken as a string otherwise; for `checks` a comma-separated
/// list is also accepted.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    if key.is_empty() {
        return Err(ConfigError::new("<override>", "empty key"));
    }
    let parsed = match serde_json::from_str::<Value>(raw) {
        Ok(v) => v,
        Err(_) if key == "checks" => Value::Array(
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Value::String(s.to_string()))
                .collect(),
        ),
        Err(_) => Value::String(raw.to_string()),
    };
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(ConfigError::new(
                parts[..i].join("."),
                "cannot set a field inside a non-object value",
            ));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last key part")
}

/// Kind of candidate solution, as far as the suite needs to know.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SolutionKind {
    Constant,
    NonConstant,
}

pub(crate) fn build_chart(spec: &ChartSpec) -> Result<KahlerChart, ConfigError> {
    let unused = |field: &str, value: Option<usize>| -> Result<(), ConfigError> {
        match value {
            Some(_) => Err(ConfigError::new(
                format!("chart_spec.{field}"),
                format!("parameter not used by chart {}", spec.name),
            )),
            None => Ok(()),
        }
    };
    let chart = match spec.name.as_str() {
        "fubini_study" => {
            unused("p", spec.p)?;
            unused("q", spec.q)?;
            let n = spec
                .n
                .ok_or_else(|| ConfigError::new("chart_spec.n", "fubini_study needs n >= 1"))?;
            fubini_study_chart(n).map_err(|e| ConfigError::new("chart_spec.n", e.to_string()))?
        }
        "flat" => {
            unused("n", spec.n)?;
            let p = spec.p.unwrap_or(0);
            let q = spec.q.unwrap_or(0);
            flat_kahler_chart(p, q).map_err(|e| ConfigError::new("chart_spec.p", e.to_string()))?
        }
        other => {
            return Err(ConfigError::new(
                "chart_spec.name",
                format!("unknown chart {other:?} (expected fubini_study or flat)"),
            ))
        }
    };
    match spec.scale {
        None => Ok(chart),
        Some(s) => chart
            .scaled(s)
            .map_err(|e| ConfigError::new("chart_spec.scale", e.to_string())),
    }
}

pub(crate) fn build_solution(
    spec: &str,
    chart_spec: &ChartSpec,
    dim: usize,
) -> Result<(SharedField, SolutionKind), ConfigError> {
    let err = |msg: String| ConfigError::new("solution_spec", msg);
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let axis = || -> Result<usize, ConfigError> {
        arg.map_or(Ok(0), |a| {
            a.parse().map_err(|_| err(format!("invalid axis {a:?}")))
        })
    };
    let fs_only = |what: &str| -> Result<usize, ConfigError> {
        match (chart_spec.name.as_str(), chart_spec.n) {
            ("fubini_study", Some(n)) => Ok(n),
            _ => Err(err(format!(
                "{what} is only defined on fubini_study charts"
            ))),
        }
    };
    let no_arg = |what: &str| -> Result<(), ConfigError> {
        match arg {
            Some(_) => Err(err(format!("{what} takes no argument"))),
            None => Ok(()),
        }
    };
    let field = match name {
        "height" => {
            let n = fs_only("height")?;
            cpn_height_function(n, axis()?).map_err(|e| err(e.to_string()))?
        }
        "height_squared" => {
            let n = fs_only("height_squared")?;
            cpn_height_squared(n, axis()?).map_err(|e| err(e.to_string()))?
        }
        "constant" => {
            let raw =
                arg.ok_or_else(|| err("constant needs a value, e.g. constant:-0.5".into()))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| err(format!("invalid constant {raw:?}")))?;
            if !v.is_finite() {
                return Err(err("constant must be finite".into()));
            }
            return Ok((
                ClosedFormField::constant(dim, v).shared(),
                SolutionKind::Constant,
            ));
        }
        "quadratic" => {
            no_arg("quadratic")?;
            ClosedFormField::new(dim, "quadratic", move |x: &[Jet]| {
                let mut f = x[0].constant_like(0.2);
                for (i, xi) in x.iter().enumerate() {
                    f.axpy(0.5 / (i + 1) as f64, &(xi * xi));
                }
                f += &(&x[0] * &x[dim - 1]);
                f.axpy(-0.3, &x[dim - 1]);
                f
            })
        }
        "cubic" => {
            no_arg("cubic")?;
            ClosedFormField::new(dim, "x1^3", |x: &[Jet]| x[0].powi(3))
        }
        "quartic" => {
            no_arg("quartic")?;
            ClosedFormField::new(dim, "x1^4", |x: &[Jet]| x[0].powi(4))
        }
        other => return Err(err(format!("unknown solution {other:?}"))),
    };
    Ok((field.shared(), SolutionKind::NonConstant))
}

/// Validates everything that does not require building the chart.
pub(crate) fn validate_fields(config: &SuiteConfig) -> Result<(), ConfigError> {
    if !config.c.is_finite() {
        return Err(ConfigError::new("c", "must be finite"));
    }
    if config.samples == 0 {
        return Err(ConfigError::new("samples", "must be at least 1"));
    }
    if let Some(r) = config.radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(ConfigError::new("radius", "must be positive"));
        }
    }
    for (key, tol) in &config.tolerances {
        if find_check(key).is_none() {
            return Err(ConfigError::new(
                format!("tolerances.{key}"),
                "unknown check",
            ));
        }
        if !(*tol > 0.0 && tol.is_finite()) {
            return Err(ConfigError::new(
                format!("tolerances.{key}"),
                "must be positive",
            ));
        }
    }
    for (i, name) in config.checks.iter().enumerate() {
        if find_check(name).is_none() {
            return Err(ConfigError::new(
                format!("checks[{i}]"),
                format!("unknown check {name:?}"),
            ));
        }
    }
    Ok(())
}
