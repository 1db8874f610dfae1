//! Key=value experiment configuration.
//!
//! Lines hold `key = value` pairs, `#` starts a comment, blank lines are
//! skipped. Unknown keys and out-of-range values are rejected with the line
//! number.

use std::path::PathBuf;

use virecon_core::{MassMode, ResidualForm};

use crate::HarnessError;

/// How the time step is chosen per level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// `tau ~ h^2`, rounded so `T / tau` is an integer.
    HSquared,
    /// A fixed step; must divide `T`.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: String,
    pub degree: usize,
    pub initial_n: usize,
    pub levels: usize,
    pub tau_rule: TauRule,
    pub final_time: f64,
    pub sigma_mode: MassMode,
    pub residual_form: ResidualForm,
    pub verification: bool,
    pub fine_depth: usize,
    pub theta: f64,
    pub adaptive: bool,
    pub dof_budget: usize,
    pub outdir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: String::new(),
            degree: 1,
            initial_n: 4,
            levels: 3,
            tau_rule: TauRule::HSquared,
            final_time: 0.5,
            sigma_mode: MassMode::Lumped,
            residual_form: ResidualForm::ProofConsistent,
            verification: false,
            fine_depth: 2,
            theta: 0.5,
            adaptive: false,
            dof_budget: 20_000,
            outdir: PathBuf::from("out"),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        line,
        message: msg.into(),
    }
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "on" | "1" | "yes" => Ok(true),
        "false" | "off" | "0" | "no" => Ok(false),
        _ => Err(parse_err(line, format!("{key} expects a boolean, got '{value}'"))),
    }
}

/// Parse a configuration, filling defaults for absent keys.
pub fn load_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::default();
    let mut tau_fixed: Option<f64> = None;
    let mut tau_kind_fixed = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected key=value, got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        let num = |what: &str| -> Result<f64, HarnessError> {
            value
                .parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("{what} expects a number, got '{value}'")))
        };
        match key {
            "problem" => cfg.problem = value.to_string(),
            "k" => {
                cfg.degree = value
                    .parse()
                    .map_err(|_| parse_err(line_no, "k expects an integer"))?;
                if cfg.degree != 1 && cfg.degree != 2 {
                    return Err(parse_err(line_no, "k must be 1 or 2"));
                }
            }
            "n" => {
                cfg.initial_n = value
                    .parse()
                    .map_err(|_| parse_err(line_no, "n expects an integer"))?;
                if cfg.initial_n == 0 {
                    return Err(parse_err(line_no, "n must be at least 1"));
                }
            }
            "levels" => {
                cfg.levels = value
                    .parse()
                    .map_err(|_| parse_err(line_no, "levels expects an integer"))?;
                if cfg.levels == 0 {
                    return Err(parse_err(line_no, "levels must be at least 1"));
                }
            }
            "tau" => match value {
                "h2" => tau_kind_fixed = false,
                "fixed" => tau_kind_fixed = true,
                _ => return Err(parse_err(line_no, "tau must be 'h2' or 'fixed'")),
            },
            "tau_value" => {
                let v = num("tau_value")?;
                if v <= 0.0 {
                    return Err(parse_err(line_no, "tau_value must be positive"));
                }
                tau_fixed = Some(v);
            }
            "T" => {
                cfg.final_time = num("T")?;
                if cfg.final_time <= 0.0 {
                    return Err(parse_err(line_no, "T must be positive"));
                }
            }
            "sigma_mode" => {
                cfg.sigma_mode = match value {
                    "lumped" => MassMode::Lumped,
                    "consistent" => MassMode::Consistent,
                    _ => return Err(parse_err(line_no, "sigma_mode must be 'lumped' or 'consistent'")),
                }
            }
            "printed_residual" => {
                cfg.residual_form = if parse_bool(value, line_no, key)? {
                    ResidualForm::Printed
                } else {
                    ResidualForm::ProofConsistent
                }
            }
            "verification" => cfg.verification = parse_bool(value, line_no, key)?,
            "fine_depth" => {
                cfg.fine_depth = value
                    .parse()
                    .map_err(|_| parse_err(line_no, "fine_depth expects an integer"))?;
                if cfg.fine_depth == 0 {
                    return Err(parse_err(line_no, "fine_depth must be at least 1"));
                }
            }
            "theta" => {
                cfg.theta = num("theta")?;
                if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
                    return Err(parse_err(line_no, "theta must lie in (0, 1]"));
                }
            }
            "adaptive" => cfg.adaptive = parse_bool(value, line_no, key)?,
            "dof_budget" => {
                cfg.dof_budget = value
                    .parse()
                    .map_err(|_| parse_err(line_no, "dof_budget expects an integer"))?;
                if cfg.dof_budget == 0 {
                    return Err(parse_err(line_no, "dof_budget must be positive"));
                }
            }
            "outdir" => cfg.outdir = PathBuf::from(value),
            _ => return Err(parse_err(line_no, format!("unknown key '{key}'"))),
        }
    }

    if cfg.problem.is_empty() {
        return Err(parse_err(0, "missing problem"));
    }
    if tau_kind_fixed {
        let v = tau_fixed.ok_or_else(|| parse_err(0, "tau=fixed needs tau_value"))?;
        cfg.tau_rule = TauRule::Fixed(v);
    }
    Ok(cfg)
}
