//! Run configuration: a flat `key = value` format with sections, validated
//! in full before anything runs. Every problem found is reported, not just
//! the first, and hypothesis-violating coefficients are rejected at parse
//! time with the sampled violation locations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::constitutive::{
    verify_hypotheses, BodyForce, ConstitutiveModel, HypothesisReport, ModelKind,
};
use crate::continuation::ContinuationConfig;
use crate::error::{Error, Result};
use crate::grid::{build_grid, StripGrid};
use crate::newton::NewtonSettings;
use crate::reduced_ode::SeedParameters;

/// Fully validated run setup.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ConstitutiveModel,
    pub force: BodyForce,
    pub grid: StripGrid,
    pub seed: SeedParameters,
    pub continuation: ContinuationConfig,
    /// Sample count for hypothesis sweeps.
    pub samples: usize,
    pub hypothesis_report: HypothesisReport,
    pub out_dir: PathBuf,
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Raw key-value store with error accumulation.
struct Raw {
    entries: BTreeMap<(String, String), (String, usize)>,
    errors: Vec<String>,
}

impl Raw {
    fn parse(text: &str) -> Raw {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line
                .split_once('#')
                .map(|(head, _)| head)
                .unwrap_or(raw_line)
                .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                match name.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => {
                        section = name.trim().to_string();
                    }
                    _ => errors.push(format!("line {}: malformed section header", lineno + 1)),
                }
                continue;
            }
            match line.split_once('=') {
                Some((key, value)) => {
                    let key = key.trim().to_string();
                    if key.is_empty() {
                        errors.push(format!("line {}: empty key", lineno + 1));
                        continue;
                    }
                    if section.is_empty() {
                        errors.push(format!(
                            "line {}: key `{key}` appears before any section",
                            lineno + 1
                        ));
                        continue;
                    }
                    let slot = (section.clone(), key.clone());
                    if entries
                        .insert(slot, (value.trim().to_string(), lineno + 1))
                        .is_some()
                    {
                        errors.push(format!(
                            "line {}: duplicate key `{section}.{key}`",
                            lineno + 1
                        ));
                    }
                }
                None => errors.push(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )),
            }
        }
        Raw { entries, errors }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.entries
            .remove(&(section.to_string(), key.to_string()))
            .map(|(v, _)| v)
    }

    fn take_f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let raw = self.take(section, key)?;
        match raw.parse::<f64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("{section}.{key}: `{raw}` is not a number"));
                None
            }
        }
    }

    fn take_usize(&mut self, section: &str, key: &str) -> Option<usize> {
        let raw = self.take(section, key)?;
        match raw.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors
                    .push(format!("{section}.{key}: `{raw}` is not a nonnegative integer"));
                None
            }
        }
    }

    fn take_f64_list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let raw = self.take(section, key)?;
        let mut out = Vec::new();
        for item in raw.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            match item.parse::<f64>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.errors
                        .push(format!("{section}.{key}: `{item}` is not a number"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn require_f64(&mut self, section: &str, key: &str) -> Option<f64> {
        let v = self.take_f64(section, key);
        if v.is_none() && !self.errors.iter().any(|e| e.contains(&format!("{section}.{key}"))) {
            self.errors.push(format!("{section}.{key}: missing"));
        }
        v
    }

    fn require_usize(&mut self, section: &str, key: &str) -> Option<usize> {
        let v = self.take_usize(section, key);
        if v.is_none() && !self.errors.iter().any(|e| e.contains(&format!("{section}.{key}"))) {
            self.errors.push(format!("{section}.{key}: missing"));
        }
        v
    }

    fn reject_leftovers(&mut self) {
        for ((section, key), (_, line)) in &self.entries {
            self.errors
                .push(format!("line {line}: unknown key `{section}.{key}`"));
        }
    }
}

/// Parses a configuration from text (the file contents).
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut raw = Raw::parse(text);

    // [model]
    let kind = match raw.take("model", "kind").as_deref() {
        Some("model_i") => Some(ModelKind::ModelI),
        Some("model_ii") => Some(ModelKind::ModelII),
        Some(other) => {
            raw.errors.push(format!(
                "model.kind: `{other}` is not one of model_i, model_ii"
            ));
            None
        }
        None => {
            raw.errors.push("model.kind: missing".into());
            None
        }
    };
    let coeffs = raw.take_f64_list("model", "coeffs");
    if coeffs.is_none() && !raw.errors.iter().any(|e| e.contains("model.coeffs")) {
        raw.errors.push("model.coeffs: missing".into());
    }
    let q_probe_max = raw.take_f64("model", "q_probe_max");

    // [force]
    let odd_coeffs = raw.take_f64_list("force", "odd_coeffs").unwrap_or_default();

    // [grid]
    let length = raw.require_f64("grid", "length");
    let nx = raw.require_usize("grid", "nx");
    let ny = raw.require_usize("grid", "ny");

    // [seed]
    let epsilon = raw.require_f64("seed", "epsilon");

    // [continuation]
    let defaults = ContinuationConfig::default();
    let ds_init = raw.take_f64("continuation", "ds_init").unwrap_or(defaults.ds_init);
    let ds_min = raw.take_f64("continuation", "ds_min").unwrap_or(defaults.ds_min);
    let ds_max = raw.take_f64("continuation", "ds_max").unwrap_or(defaults.ds_max);
    let max_steps = raw
        .take_usize("continuation", "max_steps")
        .unwrap_or(defaults.max_steps);
    let lambda_max = raw
        .take_f64("continuation", "lambda_max")
        .unwrap_or(defaults.lambda_max);
    let margin_stop = raw.take_f64("continuation", "margin_stop");
    let width_stop_factor = raw.take_f64("continuation", "width_stop_factor");
    let residual_tol = raw
        .take_f64("continuation", "residual_tol")
        .unwrap_or(NewtonSettings::default().tol_residual);
    let max_newton = raw
        .take_usize("continuation", "max_newton_iterations")
        .unwrap_or(NewtonSettings::default().max_iterations);
    let theta = raw.take_f64("continuation", "theta").unwrap_or(defaults.theta);
    let extension_factor = raw
        .take_f64("continuation", "extension_factor")
        .unwrap_or(defaults.extension_factor);
    let max_length = raw
        .take_f64("continuation", "max_length")
        .unwrap_or(defaults.max_length);

    // [diagnostics]
    let sigma = raw.take_f64("diagnostics", "sigma").unwrap_or(defaults.sigma);
    let samples = raw.take_usize("diagnostics", "samples").unwrap_or(1024);

    // [output]
    let out_dir = PathBuf::from(raw.take("output", "dir").unwrap_or_else(|| "out".into()));

    raw.reject_leftovers();
    let mut errors = std::mem::take(&mut raw.errors);

    // construct domain objects, folding their errors into the report
    let force = match BodyForce::new(odd_coeffs) {
        Ok(f) => Some(f),
        Err(e) => {
            errors.push(format!("force.odd_coeffs: {e}"));
            None
        }
    };

    let seed_and_model = match (kind, coeffs, epsilon, &force) {
        (Some(kind), Some(coeffs), Some(epsilon), Some(force)) => {
            // default probe range: 4x the seed gradient scale, at least 10
            let c1 = coeffs.get(1).copied().unwrap_or(0.0);
            let cubic_sum = force.b1() + 2.0 * c1;
            let alpha_sq = if cubic_sum < 0.0 {
                8.0 / (3.0 * cubic_sum.abs())
            } else {
                0.0
            };
            let probe = q_probe_max
                .unwrap_or_else(|| (4.0 * alpha_sq * epsilon * epsilon).max(10.0));
            match ConstitutiveModel::new(coeffs, kind, probe) {
                Ok(model) => match SeedParameters::for_model(&model, force, epsilon) {
                    Ok(seed) => Some((model, seed)),
                    Err(e) => {
                        errors.push(format!("seed.epsilon: {e}"));
                        None
                    }
                },
                Err(e) => {
                    errors.push(format!("model.coeffs: {e}"));
                    None
                }
            }
        }
        _ => None,
    };

    let grid = match (length, nx, ny) {
        (Some(length), Some(nx), Some(ny)) => match build_grid(length, nx, ny) {
            Ok(g) => Some(g),
            Err(e) => {
                errors.push(format!("grid: {e}"));
                None
            }
        },
        _ => None,
    };

    if samples < 100 {
        errors.push(format!(
            "diagnostics.samples: need at least 100 (got {samples})"
        ));
    }

    // model-appropriate stopping rule
    let (margin_stop, width_stop) = match (&seed_and_model, kind) {
        (Some((_, seed)), Some(ModelKind::ModelII)) => {
            let _ = seed;
            (Some(margin_stop.unwrap_or(0.2)), None)
        }
        (Some((_, seed)), Some(ModelKind::ModelI)) => (
            None,
            Some(width_stop_factor.unwrap_or(5.0) * seed.width_half()),
        ),
        _ => (margin_stop, None),
    };

    let continuation = ContinuationConfig {
        ds_init,
        ds_min,
        ds_max,
        max_steps,
        lambda_max,
        margin_stop,
        width_stop,
        theta,
        newton: NewtonSettings {
            tol_residual: residual_tol,
            max_iterations: max_newton,
            verbose: false,
        },
        sigma,
        extension_factor,
        max_length,
        verbose: false,
    };
    if let Err(e) = continuation.validate() {
        errors.push(format!("continuation: {e}"));
    }

    // hypothesis sweep last, with everything else known-good
    let report = match (&seed_and_model, &force) {
        (Some((model, _)), Some(force)) if errors.is_empty() => {
            match verify_hypotheses(model, force, samples) {
                Ok(report) => {
                    if !report.passed {
                        for v in report.violations.iter().take(5) {
                            errors.push(format!(
                                "model hypotheses: {:?} violated at {:.6} (value {:.6e})",
                                v.condition, v.location, v.value
                            ));
                        }
                        if report.violations.len() > 5 {
                            errors.push(format!(
                                "model hypotheses: ... and {} more violations",
                                report.violations.len() - 5
                            ));
                        }
                    }
                    Some(report)
                }
                Err(e) => {
                    errors.push(format!("hypothesis sweep: {e}"));
                    None
                }
            }
        }
        _ => None,
    };

    if !errors.is_empty() {
        return Err(Error::ConfigValidation(errors));
    }
    let (model, seed) = seed_and_model.unwrap();
    Ok(RunConfig {
        model,
        force: force.unwrap(),
        grid: grid.unwrap(),
        seed,
        continuation,
        samples,
        hypothesis_report: report.unwrap(),
        out_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[model]
kind = model_i
coeffs = 1.0, -0.3, 0.2

[force]
odd_coeffs = -0.1

[grid]
length = 60.0
nx = 240
ny = 32

[seed]
epsilon = 0.1
";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.grid.nx, 240);
        assert!(cfg.hypothesis_report.passed);
        assert_eq!(cfg.continuation.margin_stop, None);
        let width_stop = cfg.continuation.width_stop.unwrap();
        assert!((width_stop - 5.0 * cfg.seed.width_half()).abs() < 1e-12);
        assert_eq!(cfg.continuation.newton.tol_residual, 1e-10);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        // default probe range
        assert_eq!(cfg.model.q_probe_max(), 10.0);
    }

    #[test]
    fn undersized_grid_is_named_in_the_error() {
        let text = MINIMAL.replace("nx = 240", "nx = 8");
        match parse_config_str(&text) {
            Err(Error::ConfigValidation(errors)) => {
                assert!(errors.iter().any(|e| e.contains("grid")), "{errors:?}");
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn hypothesis_violations_surface_with_locations() {
        let text = MINIMAL.replace("coeffs = 1.0, -0.3, 0.2", "coeffs = 1.0, -1.0, 0.2");
        match parse_config_str(&text) {
            Err(Error::ConfigValidation(errors)) => {
                assert!(
                    errors.iter().any(|e| e.contains("MarginPositive")),
                    "{errors:?}"
                );
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[grid]\nspacing = 2.0\n");
        // note: duplicate section header is fine, unknown key is not
        match parse_config_str(&text) {
            Err(Error::ConfigValidation(errors)) => {
                assert!(errors.iter().any(|e| e.contains("grid.spacing")), "{errors:?}");
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn all_errors_reported_at_once() {
        let text = "
[model]
kind = model_iii
coeffs = 1.0, nope

[grid]
length = -2.0
nx = 8
ny = 8

[seed]
epsilon = 0.1

[typo]
x = 1
";
        match parse_config_str(text) {
            Err(Error::ConfigValidation(errors)) => {
                assert!(errors.len() >= 4, "{errors:?}");
                assert!(errors.iter().any(|e| e.contains("model.kind")));
                assert!(errors.iter().any(|e| e.contains("model.coeffs")));
                assert!(errors.iter().any(|e| e.contains("typo.x")));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn model_ii_defaults_to_margin_stop() {
        let text = "
[model]
kind = model_ii
coeffs = 1.0, -0.5

[grid]
length = 40.0
nx = 240
ny = 32

[seed]
epsilon = 0.1
";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.continuation.margin_stop, Some(0.2));
        assert_eq!(cfg.continuation.width_stop, None);
        assert!((cfg.hypothesis_report.q1.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "[model\nkind = model_i\n";
        match parse_config_str(text) {
            Err(Error::ConfigValidation(errors)) => {
                assert!(errors.iter().any(|e| e.contains("line 1")), "{errors:?}");
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }
}
