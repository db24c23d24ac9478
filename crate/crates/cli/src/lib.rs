//! Command-line front end for `fishbone-core`: configuration, experiment
//! orchestration and CSV/SVG output.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fishbone_core::{total_energy, ModalState, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod commands;
pub mod config;
pub mod output;

pub use config::{OutputFormat, RunConfig};

/// Why a command failed; each kind has its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(msg) => write!(f, "invalid input: {msg}"),
            Failure::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Failure::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<fishbone_core::Error> for Failure {
    fn from(e: fishbone_core::Error) -> Self {
        use fishbone_core::Error::*;
        match e {
            InvalidParameter(_)
            | DimensionMismatch { .. }
            | InvalidIndex(_)
            | NotVerticalMode(_)
            | BracketNotStraddling { .. }
            | Unsupported(_) => Failure::Validation(e.to_string()),
            NonFinite { .. } | Integration(_) | DeterminantDrift { .. } | EmptyTrajectory => {
                Failure::Numerical(e.to_string())
            }
        }
    }
}

/// `n` reproducible random states with energy at most `energy_cap`, each
/// with nonzero vertical and torsional parts. Coordinates are drawn from
/// boxes shrinking with the mode index and scaled down until under the cap.
pub fn random_states(
    spec: &ModelSpec,
    n: usize,
    energy_cap: f64,
    seed: u64,
) -> Result<Vec<ModalState>, Failure> {
    if !(energy_cap.is_finite() && energy_cap > 0.0) {
        return Err(Failure::Validation(format!(
            "energy cap must be positive, got {energy_cap}"
        )));
    }
    let m = spec.modes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(n);
    while states.len() < n {
        let mut draw = |half: f64, power: i32| -> Vec<f64> {
            (1..=m)
                .map(|j| rng.gen_range(-half..half) / (j as f64).powi(power))
                .collect()
        };
        let (y, ydot, z, zdot) = (draw(1.5, 2), draw(2.0, 1), draw(0.8, 1), draw(1.0, 1));
        let mut state = ModalState::new(0.0, y, ydot, z, zdot)?;
        let trivial = |v: &[f64], w: &[f64]| v.iter().chain(w).all(|x| *x == 0.0);
        if trivial(&state.y, &state.ydot) || trivial(&state.z, &state.zdot) {
            continue;
        }
        while total_energy(&state, spec)?.total > energy_cap {
            for v in [&mut state.y, &mut state.ydot, &mut state.z, &mut state.zdot] {
                v.iter_mut().for_each(|x| *x *= 0.9);
            }
        }
        states.push(state);
    }
    Ok(states)
}

#[derive(Debug, Parser)]
#[command(
    name = "fishbone",
    version,
    about = "Torsional instability in the fish-bone suspension bridge model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate from a state concentrated on one vertical mode.
    Simulate(Flags),
    /// Bisect the vertical amplitude at which torsional growth sets in.
    Threshold(Flags),
    /// Theoretical thresholds, stability verdict grids, periods and negligibility tables.
    Analyze(Flags),
    /// Negligibility tables of high torsional modes.
    Tables(Flags),
    /// Zeros of z_1 between critical points of y_1 in the stiff one-mode system.
    Signchange(Flags),
    /// Compare a run with coefficient gamma against the rescaled unit run.
    Scaling(Flags),
    /// Relative errors of low-order sine and cosine approximations.
    Trigerror(Flags),
}

impl Command {
    pub fn flags(&self) -> &Flags {
        match self {
            Command::Simulate(f)
            | Command::Threshold(f)
            | Command::Analyze(f)
            | Command::Tables(f)
            | Command::Signchange(f)
            | Command::Scaling(f)
            | Command::Trigerror(f) => f,
        }
    }

    pub fn run(&self) -> Result<commands::Report, Failure> {
        let config = self.flags().resolve()?;
        match self {
            Command::Simulate(_) => commands::simulate(&config),
            Command::Threshold(_) => commands::threshold(&config),
            Command::Analyze(_) => commands::analyze(&config),
            Command::Tables(_) => commands::tables(&config),
            Command::Signchange(_) => commands::signchange(&config),
            Command::Scaling(_) => commands::scaling(&config),
            Command::Trigerror(_) => commands::trigerror(&config),
        }
    }
}

/// Flags shared by every subcommand. Each one mirrors the configuration key
/// of the same name.
#[derive(Debug, Clone, Default, Args)]
#[command(allow_negative_numbers = true)]
pub struct Flags {
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of Galerkin modes m.
    #[arg(long)]
    pub modes: Option<String>,
    /// Cubic nonlinearity coefficient.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Torsional stiffness: j^2+6 (standard) or 3j^2+6 (stiff).
    #[arg(long, value_parser = ["standard", "stiff"])]
    pub variant: Option<String>,
    /// Vertical mode k carrying the initial amplitude.
    #[arg(long)]
    pub mode: Option<String>,
    /// Initial amplitude of y_k.
    #[arg(long)]
    pub amplitude: Option<String>,
    /// Torsional seeds relative to the amplitude.
    #[arg(long)]
    pub seed_scale: Option<String>,
    /// Seed the other vertical modes as well (true/false).
    #[arg(long)]
    pub seed_vertical: Option<String>,
    /// Final time.
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long)]
    pub rel_tol: Option<String>,
    #[arg(long)]
    pub abs_tol: Option<String>,
    #[arg(long)]
    pub max_step: Option<String>,
    #[arg(long)]
    pub sample_interval: Option<String>,
    /// Allowed relative energy drift before a run is abandoned.
    #[arg(long)]
    pub energy_budget: Option<String>,
    /// Growth factor of the torsion over its seed that counts as unstable.
    #[arg(long)]
    pub criterion_ratio: Option<String>,
    #[arg(long)]
    pub bracket_lo: Option<String>,
    #[arg(long)]
    pub bracket_hi: Option<String>,
    /// Final bracket width of the threshold bisection.
    #[arg(long)]
    pub tol: Option<String>,
    /// Largest energy of the analysis grids.
    #[arg(long)]
    pub energy_max: Option<String>,
    #[arg(long)]
    pub energy_points: Option<String>,
    /// Number of random runs.
    #[arg(long)]
    pub runs: Option<String>,
    #[arg(long)]
    pub rng_seed: Option<String>,
    /// Largest energy of random initial states.
    #[arg(long)]
    pub energy_cap: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long, value_parser = ["csv", "svg", "both"])]
    pub format: Option<String>,
}

impl Flags {
    /// The flags that were given, as configuration key/value pairs.
    pub fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("modes", &self.modes),
            ("gamma", &self.gamma),
            ("variant", &self.variant),
            ("mode", &self.mode),
            ("amplitude", &self.amplitude),
            ("seed-scale", &self.seed_scale),
            ("seed-vertical", &self.seed_vertical),
            ("horizon", &self.horizon),
            ("rel-tol", &self.rel_tol),
            ("abs-tol", &self.abs_tol),
            ("max-step", &self.max_step),
            ("sample-interval", &self.sample_interval),
            ("energy-budget", &self.energy_budget),
            ("criterion-ratio", &self.criterion_ratio),
            ("bracket-lo", &self.bracket_lo),
            ("bracket-hi", &self.bracket_hi),
            ("tol", &self.tol),
            ("energy-max", &self.energy_max),
            ("energy-points", &self.energy_points),
            ("runs", &self.runs),
            ("rng-seed", &self.rng_seed),
            ("energy-cap", &self.energy_cap),
            ("out-dir", &self.out_dir),
            ("format", &self.format),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    /// Defaults, then the configuration file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
            config.apply_text(&text)?;
        }
        for (key, value) in self.pairs() {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }
}
