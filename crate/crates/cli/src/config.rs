//! Run configuration shared by every subcommand.
//!
//! A configuration file is flat `key = value` text; keys are the long flag
//! names without the leading dashes. Blank lines and lines starting with `#`
//! are ignored. Flags given on the command line override the file.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use fishbone_core::experiments::{GrowthCriterion, RunSettings};
use fishbone_core::{IntegratorConfig, ModelSpec, TorsionVariant};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Csv,
    Svg,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn svg(self) -> bool {
        matches!(self, OutputFormat::Svg | OutputFormat::Both)
    }

    fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Svg => "svg",
            OutputFormat::Both => "both",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!(
                "unknown format {other:?} (expected csv, svg or both)"
            )),
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub modes: usize,
    pub gamma: f64,
    pub variant: TorsionVariant,
    /// Vertical mode `k` carrying the initial amplitude.
    pub mode: usize,
    pub amplitude: f64,
    pub seed_scale: f64,
    pub seed_vertical: bool,
    pub horizon: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub sample_interval: f64,
    pub energy_budget: f64,
    pub criterion_ratio: f64,
    pub bracket_lo: Option<f64>,
    pub bracket_hi: Option<f64>,
    pub tol: f64,
    pub energy_max: f64,
    pub energy_points: usize,
    pub runs: usize,
    pub rng_seed: u64,
    pub energy_cap: f64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        let integrator = IntegratorConfig::default();
        RunConfig {
            modes: 1,
            gamma: 1.0,
            variant: TorsionVariant::Standard,
            mode: 1,
            amplitude: 1.47,
            seed_scale: 1e-4,
            seed_vertical: false,
            horizon: 200.0,
            rel_tol: integrator.rel_tol,
            abs_tol: integrator.abs_tol,
            max_step: integrator.max_step,
            sample_interval: integrator.sample_interval,
            energy_budget: integrator.energy_drift_budget,
            criterion_ratio: 100.0,
            bracket_lo: None,
            bracket_hi: None,
            tol: 0.005,
            energy_max: 10.0,
            energy_points: 50,
            runs: 20,
            rng_seed: 1,
            energy_cap: 10.0,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

/// Every key accepted in a configuration file, in output order.
pub const KEYS: [&str; 24] = [
    "modes",
    "gamma",
    "variant",
    "mode",
    "amplitude",
    "seed-scale",
    "seed-vertical",
    "horizon",
    "rel-tol",
    "abs-tol",
    "max-step",
    "sample-interval",
    "energy-budget",
    "criterion-ratio",
    "bracket-lo",
    "bracket-hi",
    "tol",
    "energy-max",
    "energy-points",
    "runs",
    "rng-seed",
    "energy-cap",
    "out-dir",
    "format",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Failure::Validation(format!("invalid value {value:?} for {key}: {e}")))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        match key {
            "modes" => self.modes = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "variant" => self.variant = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "amplitude" => self.amplitude = parse(key, value)?,
            "seed-scale" => self.seed_scale = parse(key, value)?,
            "seed-vertical" => self.seed_vertical = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "rel-tol" => self.rel_tol = parse(key, value)?,
            "abs-tol" => self.abs_tol = parse(key, value)?,
            "max-step" => self.max_step = parse(key, value)?,
            "sample-interval" => self.sample_interval = parse(key, value)?,
            "energy-budget" => self.energy_budget = parse(key, value)?,
            "criterion-ratio" => self.criterion_ratio = parse(key, value)?,
            "bracket-lo" => self.bracket_lo = Some(parse(key, value)?),
            "bracket-hi" => self.bracket_hi = Some(parse(key, value)?),
            "tol" => self.tol = parse(key, value)?,
            "energy-max" => self.energy_max = parse(key, value)?,
            "energy-points" => self.energy_points = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "rng-seed" => self.rng_seed = parse(key, value)?,
            "energy-cap" => self.energy_cap = parse(key, value)?,
            "out-dir" => self.out_dir = PathBuf::from(value),
            "format" => self.format = parse(key, value)?,
            other => {
                return Err(Failure::Validation(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current settings.
    pub fn apply_text(&mut self, text: &str) -> Result<(), Failure> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Failure::Validation(format!("line {}: expected key = value, got {raw:?}", n + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, Failure> {
        let mut config = RunConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    /// The configuration as `key = value` lines that [`RunConfig::from_text`]
    /// reads back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(value) = self.value_of(key) {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    fn value_of(&self, key: &str) -> Option<String> {
        let f = |x: f64| format!("{x:?}");
        Some(match key {
            "modes" => self.modes.to_string(),
            "gamma" => f(self.gamma),
            "variant" => self.variant.to_string(),
            "mode" => self.mode.to_string(),
            "amplitude" => f(self.amplitude),
            "seed-scale" => f(self.seed_scale),
            "seed-vertical" => self.seed_vertical.to_string(),
            "horizon" => f(self.horizon),
            "rel-tol" => f(self.rel_tol),
            "abs-tol" => f(self.abs_tol),
            "max-step" => f(self.max_step),
            "sample-interval" => f(self.sample_interval),
            "energy-budget" => f(self.energy_budget),
            "criterion-ratio" => f(self.criterion_ratio),
            "bracket-lo" => f(self.bracket_lo?),
            "bracket-hi" => f(self.bracket_hi?),
            "tol" => f(self.tol),
            "energy-max" => f(self.energy_max),
            "energy-points" => self.energy_points.to_string(),
            "runs" => self.runs.to_string(),
            "rng-seed" => self.rng_seed.to_string(),
            "energy-cap" => f(self.energy_cap),
            "out-dir" => self.out_dir.display().to_string(),
            "format" => self.format.as_str().to_string(),
            _ => return None,
        })
    }

    pub fn model(&self) -> Result<ModelSpec, Failure> {
        let spec = ModelSpec::new(self.gamma, self.modes, self.variant, 1.0)?;
        if self.mode == 0 || self.mode > self.modes {
            return Err(Failure::Validation(format!(
                "mode {} outside 1..={}",
                self.mode, self.modes
            )));
        }
        Ok(spec)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, Failure> {
        let config = IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            min_step: IntegratorConfig::default().min_step.min(self.max_step),
            sample_interval: self.sample_interval,
            energy_drift_budget: self.energy_budget,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn run_settings(&self) -> Result<RunSettings, Failure> {
        let settings = RunSettings {
            seed_scale: self.seed_scale,
            seed_vertical: self.seed_vertical,
            criterion: GrowthCriterion {
                ratio: self.criterion_ratio,
                horizon: self.horizon,
            },
            integrator: self.integrator()?,
        };
        settings.validate()?;
        Ok(settings)
    }

    /// Threshold bracket, defaulting to the published search windows of the
    /// first two vertical modes.
    pub fn bracket(&self) -> Result<(f64, f64), Failure> {
        let default = match self.mode {
            1 => Some((1.4, 1.6)),
            2 => Some((0.9, 1.0)),
            _ => None,
        };
        match (self.bracket_lo, self.bracket_hi, default) {
            (Some(lo), Some(hi), _) => Ok((lo, hi)),
            (lo, hi, Some((dlo, dhi))) => Ok((lo.unwrap_or(dlo), hi.unwrap_or(dhi))),
            _ => Err(Failure::Validation(format!(
                "no default bracket for mode {}; pass --bracket-lo and --bracket-hi",
                self.mode
            ))),
        }
    }

    /// Checks the ranges that no core constructor covers.
    pub fn validate(&self) -> Result<(), Failure> {
        self.model()?;
        self.run_settings()?;
        let positive = [
            ("amplitude", self.amplitude, true),
            ("tol", self.tol, false),
            ("energy-max", self.energy_max, false),
            ("energy-cap", self.energy_cap, false),
        ];
        for (name, v, allow_zero) in positive {
            let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
            if !ok {
                return Err(Failure::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.energy_points < 2 {
            return Err(Failure::Validation(
                "energy-points must be at least 2".into(),
            ));
        }
        if self.runs == 0 {
            return Err(Failure::Validation("runs must be at least 1".into()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Failure::Validation("out-dir must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn every_key_round_trips() {
        let values = [
            ("modes", "3"),
            ("gamma", "0.25"),
            ("variant", "stiff"),
            ("mode", "2"),
            ("amplitude", "0.945"),
            ("seed-scale", "1e-5"),
            ("seed-vertical", "true"),
            ("horizon", "150.5"),
            ("rel-tol", "1e-9"),
            ("abs-tol", "1e-11"),
            ("max-step", "0.05"),
            ("sample-interval", "0.02"),
            ("energy-budget", "1e-6"),
            ("criterion-ratio", "1000"),
            ("bracket-lo", "0.91"),
            ("bracket-hi", "0.99"),
            ("tol", "0.001"),
            ("energy-max", "12"),
            ("energy-points", "40"),
            ("runs", "7"),
            ("rng-seed", "42"),
            ("energy-cap", "5"),
            ("out-dir", "results/a b"),
            ("format", "svg"),
        ];
        assert_eq!(values.len(), KEYS.len());
        let mut c = RunConfig::default();
        for (k, v) in values {
            c.set(k, v).unwrap();
        }
        let text = c.to_text();
        assert_eq!(text.lines().count(), KEYS.len());
        assert_eq!(RunConfig::from_text(&text).unwrap(), c);
    }

    #[test]
    fn file_syntax() {
        let c = RunConfig::from_text("# comment\n\n modes = 2 \nmode=2\n").unwrap();
        assert_eq!((c.modes, c.mode), (2, 2));
        assert!(matches!(
            RunConfig::from_text("modes 2"),
            Err(Failure::Validation(_))
        ));
        assert!(matches!(
            RunConfig::from_text("colour = red"),
            Err(Failure::Validation(_))
        ));
        assert!(matches!(
            RunConfig::from_text("gamma = x"),
            Err(Failure::Validation(_))
        ));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.mode = 2;
        assert!(c.validate().is_err());
        let mut c = RunConfig {
            gamma: -1.0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        c.gamma = 1.0;
        c.rel_tol = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn brackets() {
        let mut c = RunConfig::default();
        assert_eq!(c.bracket().unwrap(), (1.4, 1.6));
        c.modes = 3;
        c.mode = 2;
        assert_eq!(c.bracket().unwrap(), (0.9, 1.0));
        c.mode = 3;
        assert!(c.bracket().is_err());
        c.bracket_lo = Some(0.5);
        c.bracket_hi = Some(0.7);
        assert_eq!(c.bracket().unwrap(), (0.5, 0.7));
    }
}
