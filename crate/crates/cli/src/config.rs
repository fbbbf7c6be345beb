//! Run configuration: defaults, optional JSON file, flag overrides, validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use bwl_core::corpus::CORPUS_SEED;
use bwl_core::{ClassKind, Grid, LambdaMeasure, Window};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl AlphaGrid {
    pub const MAX_POINTS: usize = 10_000;

    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
        match nums.as_deref() {
            Some(&[lo, hi, step]) => Ok(Self { lo, hi, step }),
            _ => Err(CliError::invalid(format!("alpha grid {s:?} is not lo:hi:step"))),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step > 0.0 && self.step.is_finite()) {
            return Err(CliError::invalid("alpha grid needs finite bounds and a positive step"));
        }
        if self.hi < self.lo {
            return Err(CliError::invalid(format!("alpha grid is empty: {} > {}", self.lo, self.hi)));
        }
        if (self.hi - self.lo) / self.step >= Self::MAX_POINTS as f64 {
            return Err(CliError::invalid(format!("alpha grid exceeds {} points", Self::MAX_POINTS)));
        }
        Ok(())
    }
}

/// Keys accepted in a config file. Every one is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "L")]
    pub l: Option<u32>,
    pub res: Option<u32>,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub kind: Option<String>,
    pub c: Option<f64>,
    pub alphas: Option<String>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        FileConfig {
            l: over.l.or(self.l),
            res: over.res.or(self.res),
            p: over.p.or(self.p),
            lambda: over.lambda.or(self.lambda),
            alpha: over.alpha.or(self.alpha),
            kind: over.kind.or(self.kind),
            c: over.c.or(self.c),
            alphas: over.alphas.or(self.alphas),
            seed: over.seed.or(self.seed),
            format: over.format.or(self.format),
        }
    }
}

/// The resolved configuration, embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(rename = "L")]
    pub l: u32,
    pub res: u32,
    pub p: f64,
    pub lambda: f64,
    pub alpha: Option<f64>,
    /// `None` lets commands that scan every class do so.
    pub kind: Option<ClassKind>,
    pub c: f64,
    pub alphas: AlphaGrid,
    pub seed: u64,
    pub format: Format,
}

pub const MAX_WINDOW: u32 = 128;
pub const MAX_RES: u32 = 12;

impl RunConfig {
    pub fn resolve(file: FileConfig, default_format: Format) -> Result<Self, CliError> {
        let kind = file
            .kind
            .as_deref()
            .map(|k| k.parse::<ClassKind>().map_err(|e| CliError::invalid(e.to_string())))
            .transpose()?;
        let cfg = RunConfig {
            l: file.l.unwrap_or(6),
            res: file.res.unwrap_or(3),
            p: file.p.unwrap_or(2.0),
            lambda: file.lambda.unwrap_or(1.0),
            alpha: file.alpha,
            kind,
            c: file.c.unwrap_or(bwl_core::reverse::DEFAULT_C),
            alphas: AlphaGrid::parse(file.alphas.as_deref().unwrap_or("-4:8:0.375"))?,
            seed: file.seed.unwrap_or(CORPUS_SEED),
            format: file.format.unwrap_or(default_format),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(CliError::invalid(format!("p must exceed 1, got {}", self.p)));
        }
        // LambdaMeasure carries the admissible range of λ
        LambdaMeasure::new(self.lambda).map_err(|e| CliError::invalid(e.to_string()))?;
        if !(1..=MAX_WINDOW).contains(&self.l) {
            return Err(CliError::invalid(format!("L must lie in 1..={MAX_WINDOW}, got {}", self.l)));
        }
        if self.res > MAX_RES {
            return Err(CliError::invalid(format!("res must be at most {MAX_RES}, got {}", self.res)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(CliError::invalid(format!("c must be positive, got {}", self.c)));
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(CliError::invalid("alpha must be finite"));
            }
        }
        self.alphas.validate()
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(Window::new(self.l)?, self.res)?)
    }

    pub fn measure(&self) -> Result<LambdaMeasure, CliError> {
        Ok(LambdaMeasure::new(self.lambda)?)
    }

    pub fn kind_or(&self, default: ClassKind) -> ClassKind {
        self.kind.unwrap_or(default)
    }
}
