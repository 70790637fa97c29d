//! Optional JSON config file with solver/registration defaults.
//! Precedence everywhere: explicit flags > config file > built-in defaults.

use std::path::Path;

use serde::Deserialize;

use diffeo_core::register::RegistrationOptions;
use diffeo_core::varsolve::SolveOptions;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub register: RegisterConfig,
    #[serde(default)]
    pub atlas: AtlasConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub max_iters: Option<usize>,
    pub step: Option<f64>,
    pub sigma: Option<f64>,
    pub curl_weight: Option<f64>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterConfig {
    pub levels: Option<usize>,
    pub iters: Option<usize>,
    pub step: Option<f64>,
    pub sigma: Option<f64>,
    pub svf_steps: Option<usize>,
    pub lambda_reg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasConfig {
    pub epsilon: Option<f64>,
    pub max_outer_iters: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| format!("invalid config {}: {e}", p.display()))
            }
        }
    }
}

/// Merge order: flag beats config beats default.
pub fn pick<T: Copy>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

pub struct SolveFlags {
    pub max_iters: Option<usize>,
    pub step: Option<f64>,
    pub sigma: Option<f64>,
    pub curl_weight: Option<f64>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
}

pub fn solve_options(flags: &SolveFlags, cfg: &SolveConfig) -> SolveOptions {
    let d = SolveOptions::default();
    SolveOptions {
        max_iters: pick(flags.max_iters, cfg.max_iters, d.max_iters),
        step: pick(flags.step, cfg.step, d.step),
        sigma: pick(flags.sigma, cfg.sigma, d.sigma),
        curl_weight: pick(flags.curl_weight, cfg.curl_weight, d.curl_weight),
        tol_abs: pick(flags.tol_abs, cfg.tol_abs, d.tol_abs),
        tol_rel: pick(flags.tol_rel, cfg.tol_rel, d.tol_rel),
        ..d
    }
}

pub struct RegisterFlags {
    pub levels: Option<usize>,
    pub iters: Option<usize>,
    pub step: Option<f64>,
    pub sigma: Option<f64>,
    pub svf_steps: Option<usize>,
    pub lambda_reg: Option<f64>,
}

pub fn register_options(flags: &RegisterFlags, cfg: &RegisterConfig) -> RegistrationOptions {
    let d = RegistrationOptions::default();
    RegistrationOptions {
        levels: pick(flags.levels, cfg.levels, d.levels),
        iters: pick(flags.iters, cfg.iters, d.iters),
        step: pick(flags.step, cfg.step, d.step),
        sigma: pick(flags.sigma, cfg.sigma, d.sigma),
        svf_steps: pick(flags.svf_steps, cfg.svf_steps, d.svf_steps),
        lambda_reg: pick(flags.lambda_reg, cfg.lambda_reg, d.lambda_reg),
        ..d
    }
}
