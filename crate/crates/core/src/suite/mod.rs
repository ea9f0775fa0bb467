//! Configuration-driven verification runs and their reports.

mod config;
mod oracle;
mod registry;
mod report;

use std::sync::OnceLock;
use std::time::Instant;

pub use config::{apply_override, ChartSpec, ConfigError, SuiteConfig, DEFAULT_RADIUS};
pub use registry::{find_check, registry, CheckSpec};
pub use report::{
    emit_report, CheckRecord, CheckStatus, ReportFormat, SuiteVerdict, VerificationReport,
};

use crate::model_manifolds::sample_points;
use crate::tanno_system::TannoProblem;
use crate::tensor_calculus::ChartPoint;
use registry::{Context, Outcome};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "TANNO_LAB_THREADS";

/// Tolerance for `name`: the configured override, else the default.
fn tolerance_for(config: &SuiteConfig, spec: &CheckSpec) -> f64 {
    config
        .tolerances
        .get(spec.name)
        .or_else(|| config.tolerances.get(spec.alias))
        .copied()
        .unwrap_or(spec.default_tolerance)
}

/// Checks selected by the configuration, in registry order.
fn selected(config: &SuiteConfig) -> Vec<(usize, &'static CheckSpec)> {
    registry()
        .iter()
        .enumerate()
        .filter(|(_, spec)| {
            config.checks.is_empty()
                || config
                    .checks
                    .iter()
                    .any(|c| c == spec.name || c == spec.alias)
        })
        .collect()
}

fn thread_pool() -> Result<rayon::ThreadPool, ConfigError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
            ConfigError::new(
                THREADS_ENV,
                format!("expected a positive integer, got {raw:?}"),
            )
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| ConfigError::new(THREADS_ENV, e.to_string()))
}

/// Builds the chart, solution and samples described by `config`.
pub(crate) fn build_context(config: &SuiteConfig) -> Result<Context, ConfigError> {
    config::validate_fields(config)?;
    let chart = config::build_chart(&config.chart_spec)?;
    let (field, kind) =
        config::build_solution(&config.solution_spec, &config.chart_spec, chart.dim())?;
    let radius = config
        .radius
        .unwrap_or_else(|| DEFAULT_RADIUS.min(chart.domain_radius()));
    let samples = sample_points(&chart, config.samples, config.seed, radius)
        .map_err(|e| ConfigError::new("radius", e.to_string()))?;
    let prob = TannoProblem::new(chart.clone(), field.clone(), config.c)
        .map_err(|e| ConfigError::new("c", e.to_string()))?;
    let unit = if config.c == 0.0 {
        None
    } else {
        Some(
            prob.rescaled()
                .map_err(|e| ConfigError::new("c", e.to_string()))?,
        )
    };
    let projector_tol = find_check("lemma5.projector")
        .map(|spec| tolerance_for(config, spec))
        .expect("projector check is registered");
    Ok(Context {
        chart,
        field,
        kind,
        prob,
        unit,
        samples,
        radius,
        projector_tol,
        projector: OnceLock::new(),
    })
}

/// The problem and sample points a configuration describes.
#[derive(Debug, Clone)]
pub struct SuiteInputs {
    /// The problem with the configured constant.
    pub problem: TannoProblem,
    /// The same problem with the constant absorbed into the metric; `None`
    /// when `c = 0`.
    pub unit: Option<TannoProblem>,
    pub samples: Vec<ChartPoint>,
}

/// Validates `config` and builds its chart, solution and samples.
pub fn build_inputs(config: &SuiteConfig) -> Result<SuiteInputs, ConfigError> {
    let ctx = build_context(config)?;
    Ok(SuiteInputs {
        problem: ctx.prob,
        unit: ctx.unit,
        samples: ctx.samples,
    })
}

fn run_check(ctx: &Context, spec: &CheckSpec, tolerance: f64, seed: u64) -> CheckRecord {
    let mut record = CheckRecord {
        check: spec.name.to_string(),
        status: CheckStatus::Error,
        max_residual: None,
        tolerance,
        pass: false,
        points: 0,
        seconds: 0.0,
        detail: None,
    };
    match (spec.run)(ctx, seed) {
        Ok(Outcome::Measured {
            residual,
            points,
            detail,
        }) => {
            let pass = residual.is_finite() && residual <= tolerance;
            record.status = if pass {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            record.max_residual = residual.is_finite().then_some(residual);
            record.pass = pass;
            record.points = points;
            record.detail = detail;
        }
        Ok(Outcome::Skipped(reason)) => {
            record.status = CheckStatus::Skipped;
            record.pass = true;
            record.detail = Some(reason);
        }
        Err(e) => record.detail = Some(e.to_string()),
    }
    record
}

/// Runs every selected check and assembles the report. Check failures are
/// recorded in the report; only configuration problems are returned as errors.
pub fn run_suite(config: &SuiteConfig) -> Result<VerificationReport, ConfigError> {
    let pool = thread_pool()?;
    let ctx = build_context(config)?;
    let records = pool.install(|| {
        selected(config)
            .into_iter()
            .map(|(index, spec)| {
                let seed = config
                    .seed
                    .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let started = Instant::now();
                let mut record = run_check(&ctx, spec, tolerance_for(config, spec), seed);
                if config.record_timing {
                    record.seconds = started.elapsed().as_secs_f64();
                }
                record
            })
            .collect()
    });
    Ok(VerificationReport::new(config.clone(), records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> SuiteConfig {
        SuiteConfig::from_json_str(text).unwrap()
    }

    #[test]
    fn height_on_cp1_passes_tanno_and_laplace() {
        let cfg = config(
            r#"{"chart_spec": {"name": "fubini_study", "n": 1}, "solution_spec": "height",
                "c": 0.25, "samples": 10, "checks": ["tanno", "laplace_identity"]}"#,
        );
        let report = run_suite(&cfg).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        assert_eq!(report.checks.len(), 2);
    }

    #[test]
    fn constant_solution_has_exact_system_and_identity() {
        let cfg = config(
            r#"{"chart_spec": {"name": "flat", "p": 1, "q": 1}, "solution_spec": "constant:-0.5",
                "c": 1.0, "samples": 5, "checks": ["system", "L_identity"]}"#,
        );
        let report = run_suite(&cfg).unwrap();
        assert!(report.passed());
        for c in &report.checks {
            assert_eq!(c.max_residual, Some(0.0), "{}", c.check);
        }
    }

    #[test]
    fn unknown_chart_names_the_field() {
        let cfg = config(
            r#"{"chart_spec": {"name": "cp_minus_one"}, "solution_spec": "height", "c": 1.0}"#,
        );
        let err = run_suite(&cfg).unwrap_err();
        assert!(err.path.contains("chart_spec"), "{err}");
    }

    #[test]
    fn unknown_check_and_tolerance_are_rejected() {
        let mut cfg = config(
            r#"{"chart_spec": {"name": "flat", "p": 1}, "solution_spec": "cubic", "c": 0.0}"#,
        );
        cfg.checks = vec!["tanno".into(), "nope".into()];
        assert_eq!(run_suite(&cfg).unwrap_err().path, "checks[1]");
        cfg.checks.clear();
        cfg.tolerances.insert("tanno".into(), -1.0);
        assert_eq!(run_suite(&cfg).unwrap_err().path, "tolerances.tanno");
    }

    #[test]
    fn missing_field_reports_its_path() {
        let err = SuiteConfig::from_json_str(r#"{"chart_spec": {"name": "flat"}, "c": 1.0}"#)
            .unwrap_err();
        assert!(err.message.contains("solution_spec"), "{err}");
        let err = SuiteConfig::from_json_str(
            r#"{"chart_spec": {"name": "flat", "n": "x"}, "solution_spec": "cubic", "c": 1.0}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "chart_spec.n");
    }

    #[test]
    fn empty_report_and_csv_shape() {
        let cfg = config(
            r#"{"chart_spec": {"name": "flat", "p": 1}, "solution_spec": "cubic", "c": 0.0}"#,
        );
        let empty = VerificationReport::new(cfg.clone(), vec![]);
        assert!(empty.passed());
        assert!(empty.to_json().contains("\"checks\": []"));

        let mut two = cfg;
        two.checks = vec!["tanno".into(), "lightlike".into()];
        two.samples = 4;
        let report = run_suite(&two).unwrap();
        let csv = report.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "check,max_residual,tolerance,pass,points,seconds");
    }

    #[test]
    fn report_json_round_trips_and_is_reproducible() {
        let cfg = config(
            r#"{"chart_spec": {"name": "fubini_study", "n": 1}, "solution_spec": "height",
                "c": 0.25, "samples": 6, "seed": 3, "checks": ["tanno", "spectrum_constancy"]}"#,
        );
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(VerificationReport::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn overrides_set_nested_keys() {
        let mut doc = serde_json::json!({"chart_spec": {"name": "flat"}});
        apply_override(&mut doc, "chart_spec.p", "2").unwrap();
        apply_override(&mut doc, "checks", "tanno, system").unwrap();
        apply_override(&mut doc, "solution_spec", "cubic").unwrap();
        assert_eq!(doc["chart_spec"]["p"], 2);
        assert_eq!(doc["checks"], serde_json::json!(["tanno", "system"]));
        assert_eq!(doc["solution_spec"], "cubic");
    }
}
