//! Adaptive Dormand–Prince 5(4) integration.
//!
//! [`solve`] is the generic stepper used everywhere in the crate (modal
//! trajectories, vertical-mode orbits, Floquet fundamental systems). Sample
//! times are `t0 + k·Δ` computed by multiplication, never accumulation, and
//! every sample is a step endpoint, so two runs with the same inputs produce
//! bit-identical samples.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::galerkin::OdeSystem;
use crate::model::{EnergyBreakdown, ModalState, ModelSpec};

/// Right-hand side `u' = F(t, u)` of a first-order system.
pub trait OdeRhs {
    fn dimension(&self) -> usize;
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]);
}

impl<F> OdeRhs for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.0
    }

    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]) {
        (self.1)(t, u, du)
    }
}

/// Local error control for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step && self.max_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < min_step < max_step (min_step = {}, max_step = {})",
                self.min_step, self.max_step
            )));
        }
        Ok(())
    }
}

/// How a call to [`solve`] ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveOutcome {
    Completed,
    /// The sample callback asked to stop at time `t`.
    Stopped {
        t: f64,
    },
    /// The controller needed a step below `min_step` at time `t`.
    StepUnderflow {
        t: f64,
    },
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    next: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            next: vec![0.0; n],
        }
    }
}

/// Attempts one step of size `h` from `(t, u)`; `ws.k[0]` must hold `F(t, u)`.
/// Leaves the candidate in `ws.next`, its derivative in `ws.k[6]`, and
/// returns the largest scaled component error.
fn try_step<R: OdeRhs + ?Sized>(
    rhs: &R,
    t: f64,
    u: &[f64],
    h: f64,
    control: &StepControl,
    ws: &mut Workspace,
) -> f64 {
    let n = u.len();
    let Workspace { k, stage, next } = ws;

    for i in 0..n {
        stage[i] = u[i] + h * A21 * k[0][i];
    }
    rhs.eval(t + C2 * h, stage, &mut k[1]);
    for i in 0..n {
        stage[i] = u[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    }
    rhs.eval(t + C3 * h, stage, &mut k[2]);
    for i in 0..n {
        stage[i] = u[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    }
    rhs.eval(t + C4 * h, stage, &mut k[3]);
    for i in 0..n {
        stage[i] = u[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    }
    rhs.eval(t + C5 * h, stage, &mut k[4]);
    for i in 0..n {
        stage[i] = u[i]
            + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    }
    rhs.eval(t + h, stage, &mut k[5]);
    for i in 0..n {
        next[i] = u[i]
            + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
    }
    rhs.eval(t + h, next, &mut k[6]);

    let mut worst: f64 = 0.0;
    for i in 0..n {
        let err = h
            * (E1 * k[0][i]
                + E3 * k[2][i]
                + E4 * k[3][i]
                + E5 * k[4][i]
                + E6 * k[5][i]
                + E7 * k[6][i]);
        let scale = control.abs_tol + control.rel_tol * u[i].abs().max(next[i].abs());
        worst = worst.max((err / scale).abs());
    }
    worst
}

fn initial_step<R: OdeRhs + ?Sized>(
    rhs: &R,
    t: f64,
    u: &[f64],
    f0: &[f64],
    control: &StepControl,
    ws: &mut Workspace,
) -> f64 {
    let n = u.len() as f64;
    let scale = |x: f64| control.abs_tol + control.rel_tol * x.abs();
    let d0 = (u.iter().map(|x| (x / scale(*x)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (u
        .iter()
        .zip(f0)
        .map(|(x, f)| (f / scale(*x)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(control.max_step);
    for i in 0..u.len() {
        ws.stage[i] = u[i] + h0 * f0[i];
    }
    rhs.eval(t + h0, &ws.stage, &mut ws.k[1]);
    let d2 = (u
        .iter()
        .enumerate()
        .map(|(i, x)| ((ws.k[1][i] - f0[i]) / scale(*x)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0)
        .min(h1)
        .min(control.max_step)
        .max(control.min_step)
}

/// Integrates `u' = F(t, u)` from `t0` to `t_end`.
///
/// `on_sample` is called at `t0`, at every `t0 + k·sample_interval` strictly
/// inside the interval, and at `t_end`; returning `ControlFlow::Break` stops
/// the integration. The state passed to the callback is a step endpoint.
pub fn solve<R, F>(
    rhs: &R,
    t0: f64,
    u0: &[f64],
    t_end: f64,
    sample_interval: f64,
    control: &StepControl,
    mut on_sample: F,
) -> Result<SolveOutcome>
where
    R: OdeRhs + ?Sized,
    F: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    control.validate()?;
    let n = rhs.dimension();
    if u0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u0.len(),
        });
    }
    if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
        return Err(Error::InvalidParameter(format!(
            "need finite t_end > t0 (t0 = {t0}, t_end = {t_end})"
        )));
    }
    if sample_interval.is_nan() || sample_interval <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sample interval must be positive, got {sample_interval}"
        )));
    }
    if u0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { t: t0 });
    }

    let mut ws = Workspace::new(n);
    let mut u = u0.to_vec();
    let mut t = t0;
    rhs.eval(t, &u, &mut ws.k[0]);

    if on_sample(t, &u).is_break() {
        return Ok(SolveOutcome::Stopped { t });
    }

    let f0 = ws.k[0].clone();
    let mut h = initial_step(rhs, t, &u, &f0, control, &mut ws);
    let mut sample_index: u64 = 1;

    loop {
        let grid = t0 + sample_index as f64 * sample_interval;
        let target = if grid < t_end { grid } else { t_end };

        let mut rejected = false;
        while t < target {
            let remaining = target - t;
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };
            let err = try_step(rhs, t, &u, step, control, &mut ws);

            if !err.is_finite() || ws.next.iter().any(|x| !x.is_finite()) {
                h = step * 0.2;
                rejected = true;
                if h < control.min_step {
                    return Ok(SolveOutcome::StepUnderflow { t });
                }
                continue;
            }

            if err <= 1.0 {
                t = if landing { target } else { t + step };
                std::mem::swap(&mut u, &mut ws.next);
                ws.k.swap(0, 6);
                let fac = if err == 0.0 {
                    5.0
                } else {
                    0.9 * err.powf(-0.2)
                };
                let fac = if rejected { fac.min(1.0) } else { fac.min(5.0) };
                // A clipped landing step says little about the controller's size.
                if !(landing && step < h) {
                    h = (step * fac.max(0.2)).min(control.max_step);
                }
                rejected = false;
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                rejected = true;
                if h < control.min_step {
                    return Ok(SolveOutcome::StepUnderflow { t });
                }
            }
        }

        if on_sample(t, &u).is_break() {
            return Ok(SolveOutcome::Stopped { t });
        }
        if target >= t_end {
            return Ok(SolveOutcome::Completed);
        }
        sample_index += 1;
    }
}

/// Integration settings for modal trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub sample_interval: f64,
    /// Allowed `|E(t) − E(0)| / E(0)` over the run.
    pub energy_drift_budget: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            min_step: 1e-12,
            sample_interval: 0.01,
            energy_drift_budget: 1e-7,
        }
    }
}

impl IntegratorConfig {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            min_step: self.min_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.step_control().validate()?;
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample_interval must be positive, got {}",
                self.sample_interval
            )));
        }
        if self.energy_drift_budget.is_nan() || self.energy_drift_budget <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "energy_drift_budget must be positive, got {}",
                self.energy_drift_budget
            )));
        }
        Ok(())
    }

    /// Same configuration with both tolerances scaled by `factor`.
    pub fn scaled_tolerances(mut self, factor: f64) -> Self {
        self.rel_tol *= factor;
        self.abs_tol *= factor;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryStatus {
    Completed,
    EnergyBudgetExceeded,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: ModalState,
    pub energy: EnergyBreakdown,
}

/// Time-ordered samples of a modal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: ModelSpec,
    pub samples: Vec<Sample>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn initial_energy(&self) -> Option<f64> {
        self.samples.first().map(|s| s.energy.total)
    }

    /// Energy drift of sample `index` relative to the initial energy
    /// (absolute when the initial energy vanishes).
    pub fn drift(&self, index: usize) -> f64 {
        let e0 = self.samples[0].energy.total;
        let d = (self.samples[index].energy.total - e0).abs();
        if e0 > 0.0 {
            d / e0
        } else {
            d
        }
    }

    pub fn max_relative_drift(&self) -> f64 {
        (0..self.samples.len())
            .map(|i| self.drift(i))
            .fold(0.0, f64::max)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.state.t)
    }

    pub fn last(&self) -> Option<&ModalState> {
        self.samples.last().map(|s| &s.state)
    }
}

/// Integrates the modal system from `initial` up to `t_end`, recording a
/// sample (with its energy) every `config.sample_interval`.
///
/// The run stops early with [`TrajectoryStatus::EnergyBudgetExceeded`] when
/// the relative energy drift exceeds the budget, and with
/// [`TrajectoryStatus::StepUnderflow`] when the step controller collapses.
pub fn integrate(
    system: &OdeSystem,
    initial: &ModalState,
    t_end: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let spec = *system.spec();
    initial.check_modes(&spec)?;
    if !initial.is_finite() {
        return Err(Error::NonFinite { t: initial.t });
    }
    if t_end.is_nan() || t_end <= initial.t {
        return Err(Error::InvalidParameter(format!(
            "t_end ({t_end}) must exceed the initial time ({})",
            initial.t
        )));
    }

    let m = spec.modes;
    let expected = ((t_end - initial.t) / config.sample_interval).ceil() as usize + 2;
    let mut samples: Vec<Sample> = Vec::with_capacity(expected.min(1 << 22));
    let mut e0 = 0.0;
    let mut budget_hit = false;

    let outcome = solve(
        system,
        initial.t,
        &initial.pack(),
        t_end,
        config.sample_interval,
        &config.step_control(),
        |t, u| {
            let energy = system.energy(u);
            if samples.is_empty() {
                e0 = energy.total;
            }
            let drift = (energy.total - e0).abs();
            let drift = if e0 > 0.0 { drift / e0 } else { drift };
            samples.push(Sample {
                state: ModalState {
                    t,
                    y: u[..m].to_vec(),
                    ydot: u[m..2 * m].to_vec(),
                    z: u[2 * m..3 * m].to_vec(),
                    zdot: u[3 * m..].to_vec(),
                },
                energy,
            });
            if drift > config.energy_drift_budget {
                budget_hit = true;
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    )?;

    let status = match outcome {
        SolveOutcome::Completed => TrajectoryStatus::Completed,
        SolveOutcome::Stopped { .. } if budget_hit => TrajectoryStatus::EnergyBudgetExceeded,
        SolveOutcome::Stopped { .. } => TrajectoryStatus::Completed,
        SolveOutcome::StepUnderflow { .. } => TrajectoryStatus::StepUnderflow,
    };
    Ok(Trajectory {
        spec,
        samples,
        status,
    })
}

/// Selects one coordinate (or a family of coordinates) of the modal state.
/// Mode indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Y(usize),
    Ydot(usize),
    Z(usize),
    Zdot(usize),
    /// Largest `|z_i|` over all torsional modes.
    AnyZ,
    /// Largest `|y_i|` over all vertical modes.
    AnyY,
}

impl Component {
    pub fn value(&self, state: &ModalState) -> Result<f64> {
        let pick = |v: &[f64], j: usize| {
            if j == 0 || j > v.len() {
                Err(Error::InvalidIndex(format!(
                    "component index {j} outside 1..={}",
                    v.len()
                )))
            } else {
                Ok(v[j - 1].abs())
            }
        };
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        match *self {
            Component::Y(j) => pick(&state.y, j),
            Component::Ydot(j) => pick(&state.ydot, j),
            Component::Z(j) => pick(&state.z, j),
            Component::Zdot(j) => pick(&state.zdot, j),
            Component::AnyZ => Ok(max_abs(&state.z)),
            Component::AnyY => Ok(max_abs(&state.y)),
        }
    }
}

/// Maximum over the samples of `|selected coordinate|`.
pub fn max_component_amplitude(traj: &Trajectory, which: Component) -> Result<f64> {
    if traj.samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    traj.samples
        .iter()
        .try_fold(0.0f64, |acc, s| Ok(acc.max(which.value(&s.state)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::build_system;

    fn harmonic() -> (usize, impl Fn(f64, &[f64], &mut [f64])) {
        (2, |_t: f64, u: &[f64], du: &mut [f64]| {
            du[0] = u[1];
            du[1] = -u[0];
        })
    }

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let rhs = harmonic();
        let control = IntegratorConfig::default().step_control();
        let mut last = vec![];
        let mut times = vec![];
        let out = solve(&rhs, 0.0, &[1.0, 0.0], 10.0, 0.5, &control, |t, u| {
            times.push(t);
            last = u.to_vec();
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(out, SolveOutcome::Completed);
        assert_eq!(times.len(), 21);
        assert_eq!(times[3], 1.5);
        assert!((last[0] - 10f64.cos()).abs() < 1e-9);
        assert!((last[1] + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn final_sample_lands_on_t_end() {
        let rhs = harmonic();
        let control = IntegratorConfig::default().step_control();
        let mut times = vec![];
        solve(&rhs, 0.0, &[1.0, 0.0], 1.05, 0.5, &control, |t, _| {
            times.push(t);
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(times, vec![0.0, 0.5, 1.0, 1.05]);
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let spec = ModelSpec::standard(2).unwrap();
        let system = build_system(&spec).unwrap();
        let traj = integrate(
            &system,
            &ModalState::zeros(2),
            5.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        assert!(traj
            .samples
            .iter()
            .all(|s| s.state.pack().iter().all(|x| *x == 0.0)));
        assert_eq!(
            max_component_amplitude(&traj, Component::AnyZ).unwrap(),
            0.0
        );
    }

    #[test]
    fn max_amplitude_of_single_sample() {
        let spec = ModelSpec::standard(1).unwrap();
        let state = ModalState::new(0.0, vec![-2.0], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        let energy = crate::model::total_energy(&state, &spec).unwrap();
        let traj = Trajectory {
            spec,
            samples: vec![Sample { state, energy }],
            status: TrajectoryStatus::Completed,
        };
        assert_eq!(
            max_component_amplitude(&traj, Component::Y(1)).unwrap(),
            2.0
        );
        assert!(max_component_amplitude(&traj, Component::Y(2)).is_err());
        let empty = Trajectory {
            samples: vec![],
            ..traj
        };
        assert_eq!(
            max_component_amplitude(&empty, Component::Y(1)),
            Err(Error::EmptyTrajectory)
        );
    }

    #[test]
    fn rejects_bad_config_and_times() {
        let spec = ModelSpec::standard(1).unwrap();
        let system = build_system(&spec).unwrap();
        let s = ModalState::zeros(1);
        let bad = IntegratorConfig {
            min_step: 1.0,
            max_step: 0.5,
            ..Default::default()
        };
        assert!(integrate(&system, &s, 1.0, &bad).is_err());
        assert!(integrate(&system, &s, 0.0, &IntegratorConfig::default()).is_err());
        assert!(integrate(
            &system,
            &ModalState::zeros(2),
            1.0,
            &IntegratorConfig::default()
        )
        .is_err());
    }

    #[test]
    fn energy_budget_stops_run() {
        let spec = ModelSpec::standard(1).unwrap();
        let system = build_system(&spec).unwrap();
        let s = ModalState::new(0.0, vec![1.0], vec![0.0], vec![0.1], vec![0.0]).unwrap();
        let loose = IntegratorConfig {
            rel_tol: 1e-3,
            abs_tol: 1e-3,
            sample_interval: 1.0,
            max_step: 1.0,
            energy_drift_budget: 1e-14,
            ..Default::default()
        };
        let traj = integrate(&system, &s, 100.0, &loose).unwrap();
        assert_eq!(traj.status, TrajectoryStatus::EnergyBudgetExceeded);
        assert!(traj.last().unwrap().t < 100.0);
    }

    #[test]
    fn step_underflow_is_reported() {
        let rhs = (1usize, |_t: f64, u: &[f64], du: &mut [f64]| {
            du[0] = u[0] * u[0]
        });
        let control = StepControl {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            min_step: 1e-6,
        };
        // Blows up at t = 1.
        let out = solve(&rhs, 0.0, &[1.0], 2.0, 0.1, &control, |_, _| {
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!(matches!(out, SolveOutcome::StepUnderflow { t } if t < 1.0 && t > 0.9));
    }
}
