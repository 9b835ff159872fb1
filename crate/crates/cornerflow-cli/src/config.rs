//! Run configuration: defaults, `key = value` files and flag overrides.

use std::path::{Path, PathBuf};

use cornerflow::greens::OracleConfig;
use cornerflow::kernel::{KernelConfig, ParticleSolver};
use cornerflow::presets::Preset;

use crate::CliError;

/// Blob radius as a multiple of the mesh spacing when not set explicitly.
pub const BLOB_PER_H: f64 = 0.8;

/// Everything a command needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub a: f64,
    pub scales: Vec<f64>,
    pub kernel: KernelConfig,
    /// Explicit blob radius; `None` means `0.8 h`.
    pub blob_radius: Option<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Random pairs drawn by `green-validate`.
    pub pairs: usize,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: Preset::SinPatch,
            h: 1.0 / 64.0,
            dt: 0.01,
            t_end: 3.0,
            a: 2.0,
            scales: (2..=12).map(|k| 0.5f64.powi(k)).collect(),
            kernel: KernelConfig::default(),
            blob_radius: None,
            output_dir: PathBuf::from("out"),
            seed: 20_240_601,
            pairs: 20,
            oracle: OracleConfig::default(),
        }
    }
}

/// Flag values; `None` leaves the file or default value in place.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub h: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub a: Option<f64>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "`{key}`: expected true or false, got `{value}`"
        ))),
    }
}

impl RunConfig {
    /// Set one key from its textual value. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = &mut self.kernel;
        match key {
            "preset" => {
                self.preset = value
                    .parse()
                    .map_err(|e: cornerflow::Error| CliError::Config(e.to_string()))?
            }
            "h" => self.h = parse_num(key, value)?,
            "dt" => self.dt = parse_num(key, value)?,
            "T" => self.t_end = parse_num(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "scales" => {
                self.scales = value
                    .split(',')
                    .map(|s| parse_num(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            "pairs" => self.pairs = parse_num(key, value)?,
            "oracle_k_max" => self.oracle.k_max = parse_num(key, value)?,
            "oracle_separation" => self.oracle.separation = parse_num(key, value)?,
            "blob_radius" => self.blob_radius = Some(parse_num(key, value)?),
            "quad_order" => k.quad_order = parse_num(key, value)?,
            "refine_ratio" => k.refine_ratio = parse_num(key, value)?,
            "max_depth" => k.max_depth = parse_num(key, value)?,
            "quad_tol" => k.quad_tol = parse_num(key, value)?,
            "max_regions" => k.max_regions = parse_num(key, value)?,
            "multipole_order" => k.multipole_order = parse_num(key, value)?,
            "particle_solver" => {
                k.particle_solver = match value {
                    "tree" => ParticleSolver::Tree,
                    "direct" => ParticleSolver::Direct,
                    _ => {
                        return Err(CliError::Config(format!(
                            "`{key}`: expected tree or direct, got `{value}`"
                        )))
                    }
                }
            }
            "shell_r_min" => k.shell_policy.r_min = parse_num(key, value)?,
            "shell_r_max" => k.shell_policy.r_max = parse_num(key, value)?,
            "shell_tol" => k.shell_policy.tol = parse_num(key, value)?,
            "tail_correction" => k.shell_policy.tail_correction = parse_bool(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply a line-based `key = value` document; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(p) = &o.preset {
            self.set("preset", p)?;
        }
        if let Some(d) = &o.out_dir {
            self.output_dir = d.clone();
        }
        self.seed = o.seed.unwrap_or(self.seed);
        self.h = o.h.unwrap_or(self.h);
        self.dt = o.dt.unwrap_or(self.dt);
        self.t_end = o.t_end.unwrap_or(self.t_end);
        self.a = o.a.unwrap_or(self.a);
        Ok(())
    }

    /// Defaults, then the file, then the flags; validated.
    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        cfg.apply_overrides(overrides)?;
        cfg.finish()
    }

    /// Resolve the blob radius and check all invariants.
    pub fn finish(mut self) -> Result<Self, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("T = {} must be positive", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt < self.t_end) {
            return bad(format!("dt = {} must lie in (0, T)", self.dt));
        }
        if !(self.a > 1.0) || !self.a.is_finite() {
            return bad(format!("a = {} must exceed 1", self.a));
        }
        if !(self.h > 0.0) {
            return bad(format!("h = {} must be positive", self.h));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0 && *s < 0.5)) {
            return bad("scales must be a non-empty list inside (0, 1/2)".into());
        }
        if self.pairs == 0 {
            return bad("pairs must be at least 1".into());
        }
        self.kernel.blob_radius = self.blob_radius.unwrap_or(BLOB_PER_H * self.h);
        self.kernel.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\npreset = ramppatch\nT = 2   # trailing\n\nscales = 0.25, 0.125\nquad_order = 10\n")
            .unwrap();
        cfg.apply_overrides(&Overrides {
            t_end: Some(1.0),
            ..Overrides::default()
        })
        .unwrap();
        let cfg = cfg.finish().unwrap();
        assert_eq!(cfg.preset, Preset::RampPatch);
        assert_eq!(cfg.t_end, 1.0);
        assert_eq!(cfg.scales, vec![0.25, 0.125]);
        assert_eq!(cfg.kernel.quad_order, 10);
        assert_eq!(cfg.kernel.blob_radius, 0.8 / 64.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(matches!(
            cfg.apply_text("colour = red"),
            Err(CliError::Config(_))
        ));
        assert!(cfg.apply_text("h 0.1").is_err());
        assert!(cfg.apply_text("dt = fast").is_err());
        assert!(cfg.apply_text("preset = vortex").is_err());
        let base = RunConfig::default();
        assert!(RunConfig {
            a: 1.0,
            ..base.clone()
        }
        .finish()
        .is_err());
        assert!(RunConfig {
            dt: 3.0,
            ..base.clone()
        }
        .finish()
        .is_err());
        assert!(RunConfig {
            t_end: 0.0,
            ..base.clone()
        }
        .finish()
        .is_err());
        assert!(RunConfig {
            scales: vec![0.6],
            ..base
        }
        .finish()
        .is_err());
    }

    #[test]
    fn explicit_blob_radius_survives_h_changes() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("blob_radius = 0.02\nh = 0.03125").unwrap();
        let cfg = cfg.finish().unwrap();
        assert_eq!(cfg.kernel.blob_radius, 0.02);
    }
}
