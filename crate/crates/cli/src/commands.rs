//! The seven subcommands. Each returns a printable summary and the files it wrote.

use std::fmt::Write as _;
use std::path::PathBuf;

use fishbone_core::experiments::{
    concentrated_state, scaling_experiment, sign_change_census, threshold_bisection,
    trig_error_report,
};
use fishbone_core::hill::{self, PeriodModel};
use fishbone_core::negligibility::{
    approximate_mode_bound, max_negligible_energy, min_negligible_mode, tabulated_mode_bound,
    ENERGY_TABLE_OMEGAS, TABLE_ENERGIES, TABLE_OMEGAS,
};
use fishbone_core::{
    build_system, integrate, ModalState, ModelSpec, StabilityVerdict, TorsionVariant, Trajectory,
    TrajectoryStatus,
};

use crate::config::RunConfig;
use crate::output::{fmt_f64, svg_plot, trajectory_table, write_output, Series, Table};
use crate::{random_states, Failure};

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl Report {
    fn write(&mut self, config: &RunConfig, name: &str, contents: &str) -> Result<(), Failure> {
        self.files
            .push(write_output(&config.out_dir, name, contents)?);
        Ok(())
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }
}

/// The (k, m) pairs covered by the linear stability theory.
const STABILITY_CASES: [(usize, usize); 3] = [(1, 1), (1, 2), (2, 2)];

/// Margin on `|tr M| − 2` below which a monodromy counts as stable.
const FLOQUET_TOL: f64 = 1e-9;

fn component_series(traj: &Trajectory, name: &str, pick: fn(&ModalState) -> &[f64]) -> Vec<Series> {
    (0..traj.spec.modes)
        .map(|j| {
            let points = traj
                .samples
                .iter()
                .map(|s| (s.state.t, pick(&s.state)[j]))
                .collect();
            Series::new(format!("{name}_{}", j + 1), points)
        })
        .collect()
}

pub fn simulate(config: &RunConfig) -> Result<Report, Failure> {
    let spec = config.model()?;
    let initial = concentrated_state(
        &spec,
        config.mode,
        config.amplitude,
        config.seed_scale,
        config.seed_vertical,
    )?;
    let traj = integrate(
        &build_system(&spec)?,
        &initial,
        config.horizon,
        &config.integrator()?,
    )?;
    let mut report = Report::default();
    if config.format.csv() {
        report.write(config, "trajectory.csv", &trajectory_table(&traj).to_csv())?;
    }
    if config.format.svg() {
        let title = format!(
            "m = {}, y_{}(0) = {}",
            spec.modes, config.mode, config.amplitude
        );
        let y = svg_plot(&title, "t", "y_j", &component_series(&traj, "y", |s| &s.y));
        let z = svg_plot(&title, "t", "z_j", &component_series(&traj, "z", |s| &s.z));
        report.write(config, "trajectory_y.svg", &y)?;
        report.write(config, "trajectory_z.svg", &z)?;
    }
    let max_z = traj
        .samples
        .iter()
        .flat_map(|s| s.state.z.iter())
        .fold(0.0, |acc: f64, z| acc.max(z.abs()));
    let last_t = traj.last().map_or(0.0, |s| s.t);
    report.line(format!(
        "modes {}  variant {}  gamma {}",
        spec.modes, spec.torsion_variant, spec.gamma
    ));
    report.line(format!(
        "initial energy {}",
        traj.initial_energy().unwrap_or(0.0)
    ));
    report.line(format!("samples {}  final time {last_t}", traj.len()));
    report.line(format!("max |z_j| {max_z}"));
    report.line(format!(
        "max relative energy drift {:e}",
        traj.max_relative_drift()
    ));
    match traj.status {
        TrajectoryStatus::Completed => Ok(report),
        status => Err(Failure::Numerical(format!(
            "integration stopped at t = {last_t} ({status:?}); partial output written"
        ))),
    }
}

pub fn threshold(config: &RunConfig) -> Result<Report, Failure> {
    let spec = config.model()?;
    let bracket = config.bracket()?;
    let result = threshold_bisection(
        &spec,
        config.mode,
        bracket,
        config.tol,
        &config.run_settings()?,
    )?;
    let mut runs = result.runs.clone();
    runs.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));

    let mut report = Report::default();
    report.line(format!(
        "m = {}, k = {}, variant {}, criterion {}x seed within t <= {}",
        result.m, result.k, spec.torsion_variant, config.criterion_ratio, config.horizon
    ));
    report.line(format!(
        "bracket [{}, {}]",
        result.amplitude_lo, result.amplitude_hi
    ));
    report.line(format!("threshold amplitude {:.4}", result.threshold));
    report.line(format!("critical energy {:.4}", result.critical_energy));
    if let Some(t) = result.onset_time {
        report.line(format!("onset time at upper amplitude {t:.2}"));
    }
    report.write(config, "threshold_summary.txt", &report.summary.clone())?;
    if config.format.csv() {
        let mut table = Table::new(["amplitude", "unstable", "onset_time", "max_torsion"]);
        for r in &runs {
            table.push(vec![
                fmt_f64(r.amplitude),
                r.unstable.to_string(),
                r.onset_time.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.max_torsion),
            ]);
        }
        report.write(config, "threshold_runs.csv", &table.to_csv())?;
    }
    if config.format.svg() {
        let points = runs
            .iter()
            .map(|r| (r.amplitude, r.max_torsion.log10()))
            .collect();
        let svg = svg_plot(
            "torsional growth across the bisection",
            &format!("y_{}(0)", result.k),
            "log10 max |z_j|",
            &[Series::new("runs", points)],
        );
        report.write(config, "threshold.svg", &svg)?;
    }
    Ok(report)
}

/// `p/q` with the smallest `q ≤ max_den` that reproduces `x` to 1e-12, via
/// continued fractions.
pub fn rational(x: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        if a > u32::MAX as f64 {
            return None;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            return None;
        }
        if (p2 as f64 / q2 as f64 - x).abs() <= 1e-12 * x {
            return Some((p2, q2));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn energy_grid(config: &RunConfig) -> Vec<f64> {
    let n = config.energy_points;
    (1..=n)
        .map(|i| config.energy_max * i as f64 / n as f64)
        .collect()
}

fn verdict_detail(v: &StabilityVerdict) -> (String, String) {
    match v {
        StabilityVerdict::FloquetStable(m) | StabilityVerdict::FloquetUnstable(m) => {
            (fmt_f64(m.trace), fmt_f64(m.determinant))
        }
        _ => (String::new(), String::new()),
    }
}

pub fn analyze(config: &RunConfig) -> Result<Report, Failure> {
    config.validate()?;
    let mut report = Report::default();

    let mut thresholds = Table::new([
        "k",
        "m",
        "bound_energy",
        "bound_fraction",
        "bound_amplitude",
        "exact_energy",
        "exact_amplitude",
    ]);
    report.line("theoretical thresholds (sufficient for linear torsional stability)");
    for (k, m) in STABILITY_CASES {
        let bound = hill::theoretical_threshold_with(k, m, PeriodModel::Bounds)?;
        let exact = hill::theoretical_threshold_with(k, m, PeriodModel::Exact)?;
        let fraction = rational(bound.energy, 10_000)
            .map(|(p, q)| format!("{p}/{q}"))
            .unwrap_or_default();
        report.line(format!(
            "  k={k} m={m}: E <= {fraction} ≈ {:.3} (amplitude {:.4}); exact period: E <= {:.4} (amplitude {:.4})",
            bound.energy, bound.amplitude, exact.energy, exact.amplitude
        ));
        thresholds.push(vec![
            k.to_string(),
            m.to_string(),
            fmt_f64(bound.energy),
            fraction,
            fmt_f64(bound.amplitude),
            fmt_f64(exact.energy),
            fmt_f64(exact.amplitude),
        ]);
    }

    let energies = energy_grid(config);
    let mut verdicts = Table::new([
        "k",
        "m",
        "i",
        "energy",
        "zhukovskii",
        "floquet",
        "trace",
        "determinant",
    ]);
    let mut violations = 0;
    for (k, m) in STABILITY_CASES {
        for row in hill::verdict_grid(k, m, &energies, FLOQUET_TOL)? {
            if row.zhukovskii.is_sufficient_stable() && row.floquet.is_floquet_unstable() {
                violations += 1;
            }
            let (trace, det) = verdict_detail(&row.floquet);
            verdicts.push(vec![
                k.to_string(),
                m.to_string(),
                row.i.to_string(),
                fmt_f64(row.energy),
                row.zhukovskii.label().into(),
                row.floquet.label().into(),
                trace,
                det,
            ]);
        }
    }
    report.line(format!(
        "verdict grid: {} rows up to E = {}, {violations} sufficient-stable rows judged unstable by Floquet",
        verdicts.rows.len(),
        config.energy_max
    ));

    let mut periods = Table::new(["energy", "j", "period", "lower_bound", "upper_bound"]);
    let mut curves = Vec::new();
    for j in [1, 2] {
        let mut points = Vec::new();
        for e in std::iter::once(0.0).chain(energies.iter().copied()) {
            let t = hill::period(e, j)?;
            let (lo, hi) = hill::period_bounds(e, j)?;
            periods.push(vec![
                fmt_f64(e),
                j.to_string(),
                fmt_f64(t),
                fmt_f64(lo),
                fmt_f64(hi),
            ]);
            points.push((e, t));
        }
        curves.push(Series::new(format!("T_{j}(E)"), points));
    }
    report.line(format!("period T_1(0) = {:.4}", hill::period(0.0, 1)?));

    if config.format.csv() {
        report.write(config, "thresholds.csv", &thresholds.to_csv())?;
        report.write(config, "verdicts.csv", &verdicts.to_csv())?;
        report.write(config, "period.csv", &periods.to_csv())?;
    }
    if config.format.svg() {
        report.write(
            config,
            "period.svg",
            &svg_plot("vertical mode periods", "E", "T", &curves),
        )?;
    }
    let tables = tables(config)?;
    report.summary.push_str(&tables.summary);
    report.files.extend(tables.files);
    Ok(report)
}

pub fn tables(config: &RunConfig) -> Result<Report, Failure> {
    let mut report = Report::default();
    let mut modes = Table::new(["omega", "energy", "m_table", "m_min", "m_approx"]);
    for omega in TABLE_OMEGAS {
        let mut row_text = format!("omega = {omega}: m >=");
        for energy in TABLE_ENERGIES {
            let table = tabulated_mode_bound(energy, omega)?;
            let min = min_negligible_mode(energy, omega)?;
            let _ = write!(row_text, " {table}");
            modes.push(vec![
                fmt_f64(omega),
                fmt_f64(energy),
                table.to_string(),
                min.to_string(),
                fmt_f64(approximate_mode_bound(energy, omega)),
            ]);
        }
        report.line(row_text);
    }
    let mut energy = Table::new(["omega", "max_energy"]);
    let mut row_text = String::from("energy below which every mode is negligible:");
    for omega in ENERGY_TABLE_OMEGAS {
        let e = max_negligible_energy(omega)?;
        let _ = write!(row_text, " omega={omega}: {e:.1e}");
        energy.push(vec![fmt_f64(omega), fmt_f64(e)]);
    }
    report.line(row_text);
    if config.format.csv() {
        report.write(config, "negligibility_modes.csv", &modes.to_csv())?;
        report.write(config, "negligibility_energy.csv", &energy.to_csv())?;
    }
    Ok(report)
}

pub fn signchange(config: &RunConfig) -> Result<Report, Failure> {
    let spec = ModelSpec::new(config.gamma, 1, TorsionVariant::StiffTorsion, 1.0)?;
    let states = random_states(&spec, config.runs, config.energy_cap, config.rng_seed)?;
    let census = sign_change_census(&spec, &states, config.horizon, &config.integrator()?)?;
    let mut report = Report::default();
    let mut table = Table::new([
        "run",
        "energy",
        "intervals",
        "min_zeros",
        "zeros",
        "critical_points",
    ]);
    for (n, run) in census.runs.iter().enumerate() {
        table.push(vec![
            (n + 1).to_string(),
            fmt_f64(run.energy),
            run.zeros_per_interval.len().to_string(),
            run.min_zeros().map(|z| z.to_string()).unwrap_or_default(),
            run.torsion_zeros.len().to_string(),
            run.critical_points.len().to_string(),
        ]);
    }
    report.line(format!(
        "{} stiff one-mode runs with E <= {} over t <= {}",
        census.runs.len(),
        config.energy_cap,
        config.horizon
    ));
    report.line(format!(
        "{} intervals between critical points of y_1, {} zeros of z_1, fewest zeros in an interval: {}",
        census.total_intervals(),
        census.total_zeros(),
        census.min_zeros().map_or("none".into(), |z| z.to_string())
    ));
    if config.format.csv() {
        report.write(config, "signchange.csv", &table.to_csv())?;
    }
    Ok(report)
}

pub fn scaling(config: &RunConfig) -> Result<Report, Failure> {
    let spec = config.model()?;
    let initial = concentrated_state(
        &spec,
        config.mode,
        config.amplitude,
        config.seed_scale,
        config.seed_vertical,
    )?;
    let r = scaling_experiment(&spec, &initial, config.horizon, &config.integrator()?)?;
    let mut report = Report::default();
    report.line(format!(
        "gamma {}: gamma*E_gamma = {} vs E_1 = {}",
        r.gamma,
        r.gamma * r.energy_gamma,
        r.energy_one
    ));
    report.line(format!("relative energy error {:e}", r.energy_error));
    report.line(format!("relative sup error {:e}", r.sup_error));
    report.line(format!("max state deviation {:e}", r.max_state_deviation));
    if config.format.csv() {
        let mut table = Table::new([
            "gamma",
            "energy_gamma",
            "energy_one",
            "energy_error",
            "sup_gamma",
            "sup_one",
            "sup_error",
            "max_state_deviation",
        ]);
        table.push(
            [
                r.gamma,
                r.energy_gamma,
                r.energy_one,
                r.energy_error,
                r.sup_gamma,
                r.sup_one,
                r.sup_error,
                r.max_state_deviation,
            ]
            .map(fmt_f64)
            .to_vec(),
        );
        report.write(config, "scaling.csv", &table.to_csv())?;
    }
    Ok(report)
}

pub fn trigerror(config: &RunConfig) -> Result<Report, Failure> {
    let mut report = Report::default();
    let mut table = Table::new(["epsilon", "n", "R_s", "R_c"]);
    for row in trig_error_report() {
        report.line(format!(
            "epsilon {:.6} n {}: R_s {:.1e}  R_c {:.1e}",
            row.epsilon, row.n, row.r_s, row.r_c
        ));
        table.push(vec![
            fmt_f64(row.epsilon),
            row.n.to_string(),
            fmt_f64(row.r_s),
            fmt_f64(row.r_c),
        ]);
    }
    if config.format.csv() {
        report.write(config, "trigerror.csv", &table.to_csv())?;
    }
    Ok(report)
}
