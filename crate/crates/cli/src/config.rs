//! Flat `key = value` run configuration.

use std::path::Path;

use deformstream_core::abr::QoECoefficients;
use deformstream_core::codec::{BitrateLadder, EncodeOptions};
use deformstream_core::deform::{InfluenceRadius, WeightMode};
use deformstream_core::netsim::SimConfig;
use deformstream_core::registration::{EnergyWeights, SolveOptions};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda_align: f64,
    pub lambda_rot: f64,
    pub lambda_reg: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub latency_reward: bool,
    pub ladder: Vec<usize>,
    pub gof_length: usize,
    pub fps: u32,
    pub tol: f64,
    pub max_iters: usize,
    pub weight_mode: WeightMode,
    pub startup_buffer_s: f64,
    pub max_stall_s: f64,
    pub pattern: String,
    pub decode_alpha: f64,
    pub decode_beta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda_align: 1.0,
            lambda_rot: 1.0,
            lambda_reg: 10.0,
            mu1: 1.0,
            mu2: 1.0,
            mu3: 1.0,
            latency_reward: false,
            ladder: vec![16, 64, 256],
            gof_length: 30,
            fps: 30,
            tol: 1e-6,
            max_iters: 50,
            weight_mode: WeightMode::Uniform,
            startup_buffer_s: 1.0,
            max_stall_s: 30.0,
            pattern: "frame_%04d.obj".to_string(),
            decode_alpha: 0.0,
            decode_beta: 0.0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Defaults, then the file (if any), then each `key=value` override.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            for (no, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
                cfg.set(k.trim(), v.trim())?;
            }
        }
        for kv in overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("expected key=value, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "lambda_align" => self.lambda_align = parse(key, value)?,
            "lambda_rot" => self.lambda_rot = parse(key, value)?,
            "lambda_reg" => self.lambda_reg = parse(key, value)?,
            "mu1" => self.mu1 = parse(key, value)?,
            "mu2" => self.mu2 = parse(key, value)?,
            "mu3" => self.mu3 = parse(key, value)?,
            "latency_reward" => self.latency_reward = parse(key, value)?,
            "ladder" => {
                self.ladder = value.split(',').map(|s| parse(key, s.trim())).collect::<Result<_, _>>()?;
            }
            "gof_length" => self.gof_length = parse(key, value)?,
            "fps" => self.fps = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "weight_mode" => self.weight_mode = parse(key, value)?,
            "startup_buffer_s" => self.startup_buffer_s = parse(key, value)?,
            "max_stall_s" => self.max_stall_s = parse(key, value)?,
            "pattern" => self.pattern = value.to_string(),
            "decode_alpha" => self.decode_alpha = parse(key, value)?,
            "decode_beta" => self.decode_beta = parse(key, value)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.gof_length == 0 || self.fps == 0 {
            return Err(CliError::Config("gof_length and fps must be positive".into()));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(CliError::Config("tol and max_iters must be positive".into()));
        }
        if !(self.decode_alpha >= 0.0 && self.decode_beta >= 0.0) {
            return Err(CliError::Config("decode model coefficients must be non-negative".into()));
        }
        self.ladder()?;
        self.encode_options().weights.validate()?;
        self.qoe().validate()?;
        Ok(())
    }

    pub fn ladder(&self) -> Result<BitrateLadder, CliError> {
        Ok(BitrateLadder::from_node_counts(&self.ladder)?)
    }

    pub fn encode_options(&self) -> EncodeOptions<f64> {
        EncodeOptions {
            weights: EnergyWeights { lambda_align: self.lambda_align, lambda_rot: self.lambda_rot, lambda_reg: self.lambda_reg },
            solver: SolveOptions { tol: self.tol, max_iters: self.max_iters, ..SolveOptions::default() },
            weight_mode: self.weight_mode,
            radius: InfluenceRadius::Auto,
        }
    }

    pub fn qoe(&self) -> QoECoefficients {
        QoECoefficients { mu1: self.mu1, mu2: self.mu2, mu3: self.mu3, latency_reward: self.latency_reward }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            coeffs: self.qoe(),
            startup_buffer_s: self.startup_buffer_s,
            max_stall_s: self.max_stall_s,
            ..SimConfig::default()
        }
    }
}
