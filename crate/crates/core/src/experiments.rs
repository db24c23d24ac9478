//! Numerical experiments on the truncated system: torsional growth along
//! vertical modes, threshold search, sign-change statistics, the `γ` scaling
//! law and the error of low-order trigonometric approximations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::{build_system, OdeSystem};
use crate::integrator::{integrate, IntegratorConfig, Trajectory, TrajectoryStatus};
use crate::model::{rescale_gamma, total_energy, ModalState, ModelSpec, TorsionVariant};

/// When a run counts as torsionally unstable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthCriterion {
    /// Growth factor of `max_i |z_i|` over the initial torsional seed.
    pub ratio: f64,
    pub horizon: f64,
}

impl Default for GrowthCriterion {
    fn default() -> Self {
        GrowthCriterion {
            ratio: 100.0,
            horizon: 200.0,
        }
    }
}

impl GrowthCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "growth ratio must exceed 1, got {}",
                self.ratio
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Settings shared by every growth run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    /// Torsional seeds are `amplitude · seed_scale`.
    pub seed_scale: f64,
    /// Also seed the vertical components other than `k` at the same level.
    pub seed_vertical: bool,
    pub criterion: GrowthCriterion,
    pub integrator: IntegratorConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seed_scale: 1e-4,
            seed_vertical: false,
            criterion: GrowthCriterion::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.seed_scale > 0.0 && self.seed_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "seed_scale must be positive, got {}",
                self.seed_scale
            )));
        }
        self.criterion.validate()?;
        self.integrator.validate()
    }
}

/// `Y = amplitude·e_k`, every torsional coefficient `amplitude·seed_scale`
/// (and the other vertical ones too when `seed_vertical`), zero velocities.
pub fn concentrated_state(
    spec: &ModelSpec,
    k: usize,
    amplitude: f64,
    seed_scale: f64,
    seed_vertical: bool,
) -> Result<ModalState> {
    spec.validate()?;
    check_mode(spec, k)?;
    let m = spec.modes;
    let seed = amplitude * seed_scale;
    let mut state = ModalState::zeros(m);
    if seed_vertical {
        state.y.fill(seed);
    }
    state.y[k - 1] = amplitude;
    state.z.fill(seed);
    Ok(state)
}

fn check_mode(spec: &ModelSpec, k: usize) -> Result<()> {
    if k == 0 || k > spec.modes {
        return Err(Error::InvalidIndex(format!(
            "mode {k} outside 1..={}",
            spec.modes
        )));
    }
    Ok(())
}

fn require_completed(traj: &Trajectory) -> Result<()> {
    match traj.status {
        TrajectoryStatus::Completed => Ok(()),
        TrajectoryStatus::EnergyBudgetExceeded => Err(Error::Integration(format!(
            "energy drift exceeded the budget by t = {}",
            traj.last().map_or(0.0, |s| s.t)
        ))),
        TrajectoryStatus::StepUnderflow => Err(Error::Integration(format!(
            "step size underflow at t = {}",
            traj.last().map_or(0.0, |s| s.t)
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityRun {
    pub unstable: bool,
    /// First sample time at which some `|z_i|` exceeds `ratio · seed`.
    pub onset_time: Option<f64>,
    /// `max_i |z_i|` over the whole run.
    pub max_torsion: f64,
    pub seed: f64,
    pub trajectory: Trajectory,
}

/// Growth run started from the concentrated state on vertical mode `k`.
pub fn instability_run(
    spec: &ModelSpec,
    k: usize,
    amplitude: f64,
    settings: &RunSettings,
) -> Result<InstabilityRun> {
    settings.validate()?;
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let initial = concentrated_state(
        spec,
        k,
        amplitude,
        settings.seed_scale,
        settings.seed_vertical,
    )?;
    instability_run_from(spec, &initial, amplitude * settings.seed_scale, settings)
}

/// Growth run from an arbitrary state; `seed` is the torsional level the
/// criterion compares against.
pub fn instability_run_from(
    spec: &ModelSpec,
    initial: &ModalState,
    seed: f64,
    settings: &RunSettings,
) -> Result<InstabilityRun> {
    settings.validate()?;
    if !(seed > 0.0 && seed.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "seed must be positive, got {seed}"
        )));
    }
    let system = build_system(spec)?;
    let trajectory = integrate(
        &system,
        initial,
        initial.t + settings.criterion.horizon,
        &settings.integrator,
    )?;
    require_completed(&trajectory)?;
    let limit = settings.criterion.ratio * seed;
    let mut onset_time = None;
    let mut max_torsion: f64 = 0.0;
    for sample in &trajectory.samples {
        let zmax = sample
            .state
            .z
            .iter()
            .fold(0.0, |acc: f64, z| acc.max(z.abs()));
        max_torsion = max_torsion.max(zmax);
        if onset_time.is_none() && zmax > limit {
            onset_time = Some(sample.state.t);
        }
    }
    Ok(InstabilityRun {
        unstable: onset_time.is_some(),
        onset_time,
        max_torsion,
        seed,
        trajectory,
    })
}

/// State on vertical mode `k` with energy `E` split between the kinetic
/// (`kinetic_fraction`) and potential parts of `y_k`, seeded like
/// [`concentrated_state`] at the amplitude of the pure-potential state.
pub fn energy_split_state(
    spec: &ModelSpec,
    k: usize,
    energy: f64,
    kinetic_fraction: f64,
    seed_scale: f64,
) -> Result<(ModalState, f64)> {
    spec.validate()?;
    check_mode(spec, k)?;
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "energy must be positive, got {energy}"
        )));
    }
    if !(0.0..1.0).contains(&kinetic_fraction) {
        return Err(Error::InvalidParameter(format!(
            "kinetic_fraction must lie in [0, 1), got {kinetic_fraction}"
        )));
    }
    // (k⁴+2)α²/2 + 3γα⁴/8 = potential, solved for α².
    let potential_amplitude = |potential: f64| {
        let p = 0.5 * ((k as f64).powi(4) + 2.0);
        let q = 0.375 * spec.gamma;
        (2.0 * potential / (p + (p * p + 4.0 * q * potential).sqrt())).sqrt()
    };
    let alpha = potential_amplitude((1.0 - kinetic_fraction) * energy);
    let beta = (2.0 * kinetic_fraction * energy).sqrt();
    let seed = potential_amplitude(energy) * seed_scale;
    let mut state = ModalState::zeros(spec.modes);
    state.y[k - 1] = alpha;
    state.ydot[k - 1] = beta;
    state.z.fill(seed);
    Ok((state, seed))
}

/// Energy of `Y = amplitude·e_k` with everything else at rest.
pub fn vertical_energy(spec: &ModelSpec, k: usize, amplitude: f64) -> Result<f64> {
    let state = concentrated_state(spec, k, amplitude, 0.0, false)?;
    Ok(total_energy(&state, spec)?.total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub amplitude: f64,
    pub unstable: bool,
    pub onset_time: Option<f64>,
    pub max_torsion: f64,
}

impl RunRecord {
    fn from_run(amplitude: f64, run: &InstabilityRun) -> Self {
        RunRecord {
            amplitude,
            unstable: run.unstable,
            onset_time: run.onset_time,
            max_torsion: run.max_torsion,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub k: usize,
    pub m: usize,
    pub amplitude_lo: f64,
    pub amplitude_hi: f64,
    /// Midpoint of the final bracket.
    pub threshold: f64,
    /// Energy of the midpoint amplitude.
    pub critical_energy: f64,
    /// Onset time of the run at `amplitude_hi`.
    pub onset_time: Option<f64>,
    pub runs: Vec<RunRecord>,
}

/// Bisects the amplitude of vertical mode `k` between a stable `lo` and an
/// unstable `hi` until the bracket is narrower than `tol`.
pub fn threshold_bisection(
    spec: &ModelSpec,
    k: usize,
    bracket: (f64, f64),
    tol: f64,
    settings: &RunSettings,
) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let ends: Vec<InstabilityRun> = [lo, hi]
        .par_iter()
        .map(|&a| instability_run(spec, k, a, settings))
        .collect::<Result<_>>()?;
    if ends[0].unstable || !ends[1].unstable {
        return Err(Error::BracketNotStraddling {
            lo_unstable: ends[0].unstable,
            hi_unstable: ends[1].unstable,
        });
    }
    let mut runs = vec![
        RunRecord::from_run(lo, &ends[0]),
        RunRecord::from_run(hi, &ends[1]),
    ];
    let mut onset_time = ends[1].onset_time;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let run = instability_run(spec, k, mid, settings)?;
        runs.push(RunRecord::from_run(mid, &run));
        if run.unstable {
            hi = mid;
            onset_time = run.onset_time;
        } else {
            lo = mid;
        }
    }
    let threshold = 0.5 * (lo + hi);
    Ok(ThresholdResult {
        k,
        m: spec.modes,
        amplitude_lo: lo,
        amplitude_hi: hi,
        threshold,
        critical_energy: vertical_energy(spec, k, threshold)?,
        onset_time,
        runs,
    })
}

/// Growth runs on an amplitude grid, in parallel.
pub fn amplitude_prescan(
    spec: &ModelSpec,
    k: usize,
    amplitudes: &[f64],
    settings: &RunSettings,
) -> Result<Vec<RunRecord>> {
    amplitudes
        .par_iter()
        .map(|&a| instability_run(spec, k, a, settings).map(|run| RunRecord::from_run(a, &run)))
        .collect()
}

/// Amplitudes judged stable above the first unstable one; empty when the
/// verdicts are monotone.
pub fn stable_above_first_unstable(records: &[RunRecord]) -> Vec<f64> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));
    match sorted.iter().position(|r| r.unstable) {
        Some(first) => sorted[first..]
            .iter()
            .filter(|r| !r.unstable)
            .map(|r| r.amplitude)
            .collect(),
        None => Vec::new(),
    }
}

/// Census of one run: zeros of `z₁` between consecutive critical points of `y₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCensus {
    pub energy: f64,
    pub critical_points: Vec<f64>,
    pub torsion_zeros: Vec<f64>,
    /// Number of zeros in each open interval between critical points.
    pub zeros_per_interval: Vec<usize>,
}

impl RunCensus {
    pub fn min_zeros(&self) -> Option<usize> {
        self.zeros_per_interval.iter().copied().min()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignChangeReport {
    pub runs: Vec<RunCensus>,
}

impl SignChangeReport {
    /// Smallest zero count over every interval of every run.
    pub fn min_zeros(&self) -> Option<usize> {
        self.runs.iter().filter_map(RunCensus::min_zeros).min()
    }

    pub fn total_intervals(&self) -> usize {
        self.runs.iter().map(|r| r.zeros_per_interval.len()).sum()
    }

    pub fn total_zeros(&self) -> usize {
        self.runs.iter().map(|r| r.torsion_zeros.len()).sum()
    }
}

/// Roots of a sampled signal, refined on the cubic Hermite interpolant.
///
/// `values[i]` and `slopes[i]` are the signal and its derivative at `times[i]`.
fn hermite_roots(times: &[f64], values: &[f64], slopes: &[f64]) -> Vec<f64> {
    let mut roots = Vec::new();
    if values.first() == Some(&0.0) {
        roots.push(times[0]);
    }
    for i in 1..times.len() {
        let (f0, f1) = (values[i - 1], values[i]);
        if !((f0 < 0.0 && f1 >= 0.0) || (f0 > 0.0 && f1 <= 0.0)) {
            continue;
        }
        if f1 == 0.0 {
            roots.push(times[i]);
            continue;
        }
        let (t0, h) = (times[i - 1], times[i] - times[i - 1]);
        let (d0, d1) = (slopes[i - 1] * h, slopes[i] * h);
        let p = |s: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * f0
                + (s3 - 2.0 * s2 + s) * d0
                + (-2.0 * s3 + 3.0 * s2) * f1
                + (s3 - s2) * d1
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (p(mid) < 0.0) == (f0 < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(t0 + 0.5 * (lo + hi) * h);
    }
    roots
}

fn census_of(system: &OdeSystem, traj: &Trajectory, energy: f64) -> RunCensus {
    let n = traj.samples.len();
    let mut times = Vec::with_capacity(n);
    let (mut ydot, mut yddot) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut z, mut zdot) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut ydd, mut zdd) = ([0.0], [0.0]);
    for s in &traj.samples {
        let st = &s.state;
        system.accelerations(&st.y, &st.z, &mut ydd, &mut zdd);
        times.push(st.t);
        ydot.push(st.ydot[0]);
        yddot.push(ydd[0]);
        z.push(st.z[0]);
        zdot.push(st.zdot[0]);
    }
    let critical_points = hermite_roots(&times, &ydot, &yddot);
    let torsion_zeros = hermite_roots(&times, &z, &zdot);
    let zeros_per_interval = critical_points
        .windows(2)
        .map(|w| {
            torsion_zeros
                .iter()
                .filter(|&&t| t > w[0] && t < w[1])
                .count()
        })
        .collect();
    RunCensus {
        energy,
        critical_points,
        torsion_zeros,
        zeros_per_interval,
    }
}

/// Counts zeros of `z₁` between consecutive critical points of `y₁` for each
/// initial state of the one-mode stiff-torsion system.
pub fn sign_change_census(
    spec: &ModelSpec,
    initial_states: &[ModalState],
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<SignChangeReport> {
    spec.validate()?;
    if spec.modes != 1 || spec.torsion_variant != TorsionVariant::StiffTorsion {
        return Err(Error::Unsupported(
            "the sign-change census needs the one-mode stiff-torsion system".into(),
        ));
    }
    for s in initial_states {
        s.check_modes(spec)?;
        if s.z[0] == 0.0 && s.zdot[0] == 0.0 {
            return Err(Error::InvalidParameter(
                "initial torsion is identically zero; z₁ stays zero".into(),
            ));
        }
        if s.y[0] == 0.0 && s.ydot[0] == 0.0 {
            return Err(Error::InvalidParameter(
                "initial vertical displacement and velocity are zero".into(),
            ));
        }
    }
    let system = build_system(spec)?;
    let runs = initial_states
        .par_iter()
        .map(|s| {
            let traj = integrate(&system, s, s.t + horizon, config)?;
            require_completed(&traj)?;
            let energy = traj.initial_energy().unwrap_or(0.0);
            Ok(census_of(&system, &traj, energy))
        })
        .collect::<Result<_>>()?;
    Ok(SignChangeReport { runs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport {
    pub gamma: f64,
    /// Energy of the run with coefficient `γ`.
    pub energy_gamma: f64,
    /// Energy of the rescaled run with coefficient 1.
    pub energy_one: f64,
    /// `|γ·E_γ − E₁| / E₁`.
    pub energy_error: f64,
    pub sup_gamma: f64,
    pub sup_one: f64,
    /// `|√γ·‖y_γ‖∞ − ‖ȳ‖∞| / ‖ȳ‖∞`.
    pub sup_error: f64,
    /// `max_t |√γ·u_γ(t) − ū(t)|` over every coordinate.
    pub max_state_deviation: f64,
}

/// Runs the `γ` system from `initial` and the `γ = 1` system from the
/// rescaled state over `[t₀, t₀ + horizon]` and compares them.
pub fn scaling_experiment(
    spec: &ModelSpec,
    initial: &ModalState,
    horizon: f64,
    config: &IntegratorConfig,
) -> Result<ScalingReport> {
    spec.validate()?;
    initial.check_modes(spec)?;
    let gamma = spec.gamma;
    let unit = spec.with_gamma(1.0)?;
    let scaled = rescale_gamma(initial, gamma)?;
    if scaled.pack().iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter(
            "scaling needs a nonzero initial state".into(),
        ));
    }
    let specs = [(*spec, initial.clone()), (unit, scaled)];
    let trajs: Vec<Trajectory> = specs
        .par_iter()
        .map(|(sp, st)| {
            let traj = integrate(&build_system(sp)?, st, st.t + horizon, config)?;
            require_completed(&traj)?;
            Ok(traj)
        })
        .collect::<Result<_>>()?;
    let (tg, t1) = (&trajs[0], &trajs[1]);
    let root = gamma.sqrt();
    let sup = |t: &Trajectory| {
        t.samples
            .iter()
            .flat_map(|s| s.state.y.iter())
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    };
    let max_state_deviation = tg
        .samples
        .iter()
        .zip(&t1.samples)
        .flat_map(|(a, b)| {
            a.state
                .pack()
                .into_iter()
                .zip(b.state.pack())
                .map(|(x, y)| (root * x - y).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let energy_gamma = tg.initial_energy().ok_or(Error::EmptyTrajectory)?;
    let energy_one = t1.initial_energy().ok_or(Error::EmptyTrajectory)?;
    let (sup_gamma, sup_one) = (sup(tg), sup(t1));
    Ok(ScalingReport {
        gamma,
        energy_gamma,
        energy_one,
        energy_error: (gamma * energy_gamma - energy_one).abs() / energy_one,
        sup_gamma,
        sup_one,
        sup_error: if sup_one > 0.0 {
            (root * sup_gamma - sup_one).abs() / sup_one
        } else {
            (root * sup_gamma).abs()
        },
        max_state_deviation,
    })
}

/// Taylor polynomial of `sin` through `ε^{2n+1}`.
pub fn taylor_sin(eps: f64, n: u32) -> f64 {
    let mut term = eps;
    let mut sum = eps;
    for k in 1..=n {
        let k = k as f64;
        term *= -eps * eps / ((2.0 * k) * (2.0 * k + 1.0));
        sum += term;
    }
    sum
}

/// Taylor polynomial of `cos` through `ε^{2n}`.
pub fn taylor_cos(eps: f64, n: u32) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=n {
        let k = k as f64;
        term *= -eps * eps / ((2.0 * k - 1.0) * (2.0 * k));
        sum += term;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigErrorRow {
    pub epsilon: f64,
    pub n: u32,
    /// `|sin ε − P(ε, n)| / |sin ε|`.
    pub r_s: f64,
    /// `|cos ε − Q(ε, n)| / |cos ε|`.
    pub r_c: f64,
}

pub fn trig_error(epsilon: f64, n: u32) -> TrigErrorRow {
    let (s, c) = epsilon.sin_cos();
    TrigErrorRow {
        epsilon,
        n,
        r_s: ((s - taylor_sin(epsilon, n)) / s).abs(),
        r_c: ((c - taylor_cos(epsilon, n)) / c).abs(),
    }
}

/// Relative errors at the harmless (`π/60`) and extreme (`π/4`) torsion
/// angles for approximation orders 0 and 1.
pub fn trig_error_report() -> Vec<TrigErrorRow> {
    use std::f64::consts::PI;
    [PI / 60.0, PI / 4.0]
        .iter()
        .flat_map(|&eps| [0, 1].map(|n| trig_error(eps, n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn two_sig(x: f64) -> String {
        format!("{x:.1e}")
    }

    #[test]
    fn trig_report_values() {
        let rows = trig_error_report();
        let got: Vec<(String, String)> = rows
            .iter()
            .map(|r| (two_sig(r.r_s), two_sig(r.r_c)))
            .collect();
        let want = [
            ("4.6e-4", "1.4e-3"),
            ("6.3e-8", "3.1e-7"),
            ("1.1e-1", "4.1e-1"),
            ("3.5e-3", "2.2e-2"),
        ];
        for (g, w) in got.iter().zip(want) {
            assert_eq!((g.0.as_str(), g.1.as_str()), w);
        }
    }

    #[test]
    fn taylor_polynomials() {
        assert_eq!(taylor_sin(0.3, 0), 0.3);
        assert!((taylor_sin(PI / 4.0, 1) - (PI / 4.0 - PI.powi(3) / 384.0)).abs() < 1e-15);
        assert!((taylor_cos(PI / 60.0, 1) - (1.0 - PI * PI / 7200.0)).abs() < 1e-15);
        assert!((taylor_sin(1.0, 12) - 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn concentrated_state_layout() {
        let spec = ModelSpec::standard(2).unwrap();
        let s = concentrated_state(&spec, 2, 0.9, 1e-4, false).unwrap();
        assert_eq!(s.y, vec![0.0, 0.9]);
        assert_eq!(s.z, vec![0.9e-4, 0.9e-4]);
        let s = concentrated_state(&spec, 1, 3.0, 1e-4, true).unwrap();
        assert_eq!(s.y, vec![3.0, 3.0 * 1e-4]);
        assert!(concentrated_state(&spec, 3, 1.0, 1e-4, false).is_err());
    }

    #[test]
    fn energy_split_keeps_energy() {
        let spec = ModelSpec::standard(1).unwrap();
        for f in [0.0, 0.3, 0.9] {
            let (s, seed) = energy_split_state(&spec, 1, 4.9, f, 1e-4).unwrap();
            let mut bare = s.clone();
            bare.z[0] = 0.0;
            assert!((total_energy(&bare, &spec).unwrap().total - 4.9).abs() < 1e-12);
            assert!((seed - 1e-4 * crate::hill::amplitude_of(4.9, 1).unwrap()).abs() < 1e-16);
        }
    }

    #[test]
    fn vertical_energy_matches_closed_form() {
        let spec = ModelSpec::standard(2).unwrap();
        let e = vertical_energy(&spec, 2, 0.945).unwrap();
        assert!((e - crate::hill::mode_energy(0.945, 0.0, 2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn growth_runs_one_mode() {
        let spec = ModelSpec::standard(1).unwrap();
        let settings = RunSettings::default();
        let stable = instability_run(&spec, 1, 1.45, &settings).unwrap();
        assert!(!stable.unstable);
        let unstable = instability_run(&spec, 1, 1.47, &settings).unwrap();
        let onset = unstable.onset_time.unwrap();
        assert!((30.0..=80.0).contains(&onset), "{onset}");
        let faster = instability_run(&spec, 1, 1.7, &settings).unwrap();
        let mid = instability_run(&spec, 1, 1.5, &settings).unwrap();
        assert!(faster.onset_time.unwrap() < mid.onset_time.unwrap());
        assert!(faster.max_torsion > mid.max_torsion);
    }

    #[test]
    fn bracket_must_straddle() {
        let spec = ModelSpec::standard(1).unwrap();
        let err =
            threshold_bisection(&spec, 1, (1.0, 1.2), 0.01, &RunSettings::default()).unwrap_err();
        assert_eq!(
            err,
            Error::BracketNotStraddling {
                lo_unstable: false,
                hi_unstable: false
            }
        );
    }

    #[test]
    fn monotonicity_report() {
        let r = |a, u| RunRecord {
            amplitude: a,
            unstable: u,
            onset_time: None,
            max_torsion: 0.0,
        };
        assert!(
            stable_above_first_unstable(&[r(1.0, false), r(2.0, true), r(3.0, true)]).is_empty()
        );
        assert_eq!(
            stable_above_first_unstable(&[r(3.0, false), r(2.0, true), r(1.0, false)]),
            vec![3.0]
        );
    }

    #[test]
    fn hermite_roots_of_sine() {
        let times: Vec<f64> = (0..=700).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| t.sin()).collect();
        let slopes: Vec<f64> = times.iter().map(|t| t.cos()).collect();
        let roots = hermite_roots(&times, &values, &slopes);
        assert_eq!(roots.len(), 3);
        for (r, want) in roots.iter().zip([0.0, PI, 2.0 * PI]) {
            assert!((r - want).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_change_on_random_states() {
        let spec = ModelSpec::standard(1)
            .unwrap()
            .with_variant(TorsionVariant::StiffTorsion);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut states = Vec::new();
        while states.len() < 5 {
            let s = ModalState::new(
                0.0,
                vec![rng.gen_range(-1.5..1.5)],
                vec![rng.gen_range(-2.0..2.0)],
                vec![rng.gen_range(-0.8..0.8)],
                vec![rng.gen_range(-1.0..1.0)],
            )
            .unwrap();
            if total_energy(&s, &spec).unwrap().total <= 10.0 {
                states.push(s);
            }
        }
        let report =
            sign_change_census(&spec, &states, 50.0, &IntegratorConfig::default()).unwrap();
        assert!(report.min_zeros().unwrap() >= 1);
        assert!(report.total_zeros() >= report.total_intervals());
        let mut flat = states[0].clone();
        flat.z[0] = 0.0;
        flat.zdot[0] = 0.0;
        assert!(sign_change_census(&spec, &[flat], 10.0, &IntegratorConfig::default()).is_err());
        let standard = ModelSpec::standard(1).unwrap();
        assert!(matches!(
            sign_change_census(&standard, &states, 10.0, &IntegratorConfig::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn scaling_identity_and_law() {
        let initial = ModalState::new(
            0.0,
            vec![0.7, -0.2],
            vec![0.1, 0.0],
            vec![0.05, 0.01],
            vec![0.0, 0.02],
        )
        .unwrap();
        let spec = ModelSpec::standard(2).unwrap();
        let r = scaling_experiment(&spec, &initial, 20.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(r.max_state_deviation, 0.0);
        assert_eq!(r.energy_error, 0.0);
        let spec = spec.with_gamma(0.25).unwrap();
        let r = scaling_experiment(&spec, &initial, 20.0, &IntegratorConfig::default()).unwrap();
        assert!(r.energy_error < 1e-8);
        assert!(r.sup_error < 1e-6);
        assert!((r.energy_gamma - 4.0 * r.energy_one).abs() < 1e-8 * r.energy_gamma);
    }
}
