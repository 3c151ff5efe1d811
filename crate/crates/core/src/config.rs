//! Run configuration shared by the CLI commands.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::classifier::{CvParams, TrainParams};
use crate::dataset::DEFAULT_CROP;
use crate::error::{Error, Result};
use crate::filterbank::BandComposition;
use crate::scattering::ScatteringConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scales: usize,
    pub rate_u: usize,
    pub rate_s: usize,
    pub crop: usize,
    pub pca_k: usize,
    pub folds: usize,
    pub repeats: usize,
    pub c_reg: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    pub composition: BandComposition,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            rate_u: 2,
            rate_s: 2,
            crop: DEFAULT_CROP,
            pca_k: 30,
            folds: 2,
            repeats: 10,
            c_reg: 1.0,
            seed: 0,
            workers: None,
            composition: BandComposition::Cascade,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn scattering(&self) -> ScatteringConfig {
        ScatteringConfig {
            scales: self.scales,
            rate_u: self.rate_u,
            rate_s: self.rate_s,
            composition: self.composition,
            ..ScatteringConfig::default()
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            c_reg: self.c_reg,
            seed: self.seed,
            ..TrainParams::default()
        }
    }

    pub fn cv_params(&self) -> CvParams {
        CvParams {
            folds: self.folds,
            repeats: self.repeats,
            pca_k: self.pca_k,
            train: self.train_params(),
            seed: self.seed,
        }
    }

    /// Sets one key. Keys accept `-` or `_` and a few aliases (`J`, `C`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let norm = key.trim().replace('-', "_").to_ascii_lowercase();
        let value = value.trim();
        match norm.as_str() {
            "j" | "scales" => self.scales = parse_value(key, value)?,
            "rate_u" => self.rate_u = parse_value(key, value)?,
            "rate_s" => self.rate_s = parse_value(key, value)?,
            "crop" => self.crop = parse_value(key, value)?,
            "pca_k" => self.pca_k = parse_value(key, value)?,
            "folds" => self.folds = parse_value(key, value)?,
            "repeats" => self.repeats = parse_value(key, value)?,
            "c" | "c_reg" => self.c_reg = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "workers" => {
                let n: usize = parse_value(key, value)?;
                self.workers = (n > 0).then_some(n);
            }
            "composition" => {
                self.composition = match value {
                    "cascade" => BandComposition::Cascade,
                    "plain" | "plain_highpass" => BandComposition::PlainHighpass,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown composition {value:?}"
                        )))
                    }
                }
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown configuration key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("config line {}: expected key = value", i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::InvalidConfig(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scales = {}", self.scales);
        let _ = writeln!(out, "rate_u = {}", self.rate_u);
        let _ = writeln!(out, "rate_s = {}", self.rate_s);
        let _ = writeln!(out, "crop = {}", self.crop);
        let _ = writeln!(out, "pca_k = {}", self.pca_k);
        let _ = writeln!(out, "folds = {}", self.folds);
        let _ = writeln!(out, "repeats = {}", self.repeats);
        let _ = writeln!(out, "c_reg = {}", self.c_reg);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "workers = {}", self.workers.unwrap_or(0));
        let composition = match self.composition {
            BandComposition::Cascade => "cascade",
            BandComposition::PlainHighpass => "plain",
        };
        let _ = writeln!(out, "composition = {composition}");
        out
    }

    /// Thread pool sized by `workers`.
    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.scattering(), ScatteringConfig::default());
        assert_eq!(cfg.scattering().feature_len(cfg.crop).unwrap(), 90_000);
        assert_eq!(cfg.cv_params(), CvParams::default());
    }

    #[test]
    fn text_round_trip() {
        let text =
            "# run\nJ = 3\nrate-u=1\nC = 0.5 # looser\nseed=42\nworkers = 3\ncomposition = plain\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.scales, 3);
        assert_eq!(cfg.rate_u, 1);
        assert_eq!(cfg.c_reg, 0.5);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.workers, Some(3));
        assert_eq!(cfg.composition, BandComposition::PlainHighpass);
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunConfig::from_text("scales 4").is_err());
        assert!(RunConfig::from_text("colour = red").is_err());
        assert!(RunConfig::from_text("folds = two").is_err());
    }
}
