//! Vertical modes and the torsional Hill equations along them.
//!
//! The `j`-th vertical mode `ȳ_j` solves `ÿ + (j⁴+2)y + (3/2)y³ = 0` and
//! conserves `E = ẏ²/2 + (j⁴+2)y²/2 + 3y⁴/8`. Writing
//!
//! ```text
//! Λ±ʲ(E) = 2√((j⁴+2)²/9 + 2E/3) ± (2/3)(j⁴+2)
//! ```
//!
//! the amplitude is `√Λ₋ʲ(E)` and the period is
//!
//! ```text
//! T_j(E) = (8/√3) ∫₀¹ ds / √((Λ₊ + Λ₋ s²)(1 − s²))
//!        = 4π / (√3 · AGM(√Λ₊, √(Λ₊ + Λ₋)))
//! ```
//!
//! A torsional perturbation `ξ_i` along `ȳ_j` obeys the Hill equation
//! `ξ̈ + a(t)ξ = 0` with `a(t) = i² + 6 + 9α ȳ_j(t)²`, `α = 3/2` if `i = j`
//! and `1` otherwise; `a` has period `T_j/2`.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{solve, SolveOutcome, StepControl};
use crate::model::TorsionVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

fn check_energy(energy: f64) -> Result<()> {
    if !(energy.is_finite() && energy >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "energy must be finite and non-negative, got {energy}"
        )));
    }
    Ok(())
}

fn check_index(j: usize) -> Result<()> {
    if j == 0 {
        return Err(Error::InvalidIndex("mode index must be at least 1".into()));
    }
    Ok(())
}

fn linear_frequency_sq(j: usize) -> f64 {
    (j as f64).powi(4) + 2.0
}

/// `Λ₊ʲ(E)` or `Λ₋ʲ(E)`.
pub fn lambda_pm(energy: f64, j: usize, branch: Branch) -> Result<f64> {
    check_energy(energy)?;
    check_index(j)?;
    let p = linear_frequency_sq(j) / 3.0;
    let q = 2.0 * energy / 3.0;
    let root = (p * p + q).sqrt();
    Ok(match branch {
        Branch::Plus => 2.0 * (root + p),
        // 2(√(p²+q) − p) without cancellation.
        Branch::Minus => 2.0 * q / (root + p),
    })
}

/// `E_k(α, β) = β²/2 + (k⁴+2)α²/2 + 3α⁴/8`.
pub fn mode_energy(alpha: f64, beta: f64, k: usize) -> Result<f64> {
    check_index(k)?;
    Ok(0.5 * beta * beta + 0.5 * linear_frequency_sq(k) * alpha * alpha + 0.375 * alpha.powi(4))
}

/// The unique `μ ≥ 0` with `E_k(μ, 0) = E`, i.e. `√Λ₋ᵏ(E)`.
pub fn amplitude_of(energy: f64, k: usize) -> Result<f64> {
    Ok(lambda_pm(energy, k, Branch::Minus)?.sqrt())
}

/// Arithmetic–geometric mean.
fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a.max(b) {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// Period `T_j(E)` of the `j`-th vertical mode.
pub fn period(energy: f64, j: usize) -> Result<f64> {
    let plus = lambda_pm(energy, j, Branch::Plus)?;
    let minus = lambda_pm(energy, j, Branch::Minus)?;
    Ok(4.0 * PI / (3f64.sqrt() * agm(plus.sqrt(), (plus + minus).sqrt())))
}

/// `(2π/((j⁴+2)²+6E)^{1/4}, 4π/√(3Λ₊ʲ(E)))`, which bracket `T_j(E)`.
pub fn period_bounds(energy: f64, j: usize) -> Result<(f64, f64)> {
    let plus = lambda_pm(energy, j, Branch::Plus)?;
    let w = linear_frequency_sq(j);
    let lower = 2.0 * PI / (w * w + 6.0 * energy).powf(0.25);
    let upper = 4.0 * PI / (3.0 * plus).sqrt();
    Ok((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitPoint {
    pub t: f64,
    pub y: f64,
    pub ydot: f64,
}

/// One period of the `j`-th vertical mode started at `(−amplitude, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalMode {
    pub j: usize,
    pub energy: f64,
    pub amplitude: f64,
    pub period: f64,
    pub orbit: Vec<OrbitPoint>,
}

impl VerticalMode {
    /// `ẏ²/2 + (j⁴+2)y²/2 + 3y⁴/8` at an orbit point.
    pub fn energy_at(&self, p: &OrbitPoint) -> f64 {
        0.5 * p.ydot * p.ydot + 0.5 * linear_frequency_sq(self.j) * p.y * p.y + 0.375 * p.y.powi(4)
    }
}

pub(crate) const TIGHT: StepControl = StepControl {
    rel_tol: 1e-12,
    abs_tol: 1e-14,
    max_step: 0.05,
    min_step: 1e-14,
};

const CLOSURE_TOLERANCE: f64 = 1e-8;

fn require_completed(outcome: SolveOutcome) -> Result<()> {
    match outcome {
        SolveOutcome::Completed => Ok(()),
        SolveOutcome::Stopped { t } | SolveOutcome::StepUnderflow { t } => Err(Error::Integration(
            format!("step size underflow at t = {t}"),
        )),
    }
}

fn vertical_rhs(j: usize) -> (usize, impl Fn(f64, &[f64], &mut [f64])) {
    let w = linear_frequency_sq(j);
    (2, move |_t: f64, u: &[f64], du: &mut [f64]| {
        du[0] = u[1];
        du[1] = -w * u[0] - 1.5 * u[0] * u[0] * u[0];
    })
}

/// Samples one period of the `j`-th vertical mode at energy `E > 0` on
/// `samples` equal intervals.
pub fn vertical_mode(energy: f64, j: usize, samples: usize) -> Result<VerticalMode> {
    check_index(j)?;
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "vertical mode needs a positive energy, got {energy}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let amplitude = amplitude_of(energy, j)?;
    let period = period(energy, j)?;
    let mut orbit = Vec::with_capacity(samples + 1);
    solve(
        &vertical_rhs(j),
        0.0,
        &[-amplitude, 0.0],
        period,
        period / samples as f64,
        &TIGHT,
        |t, u| {
            orbit.push(OrbitPoint {
                t,
                y: u[0],
                ydot: u[1],
            });
            ControlFlow::Continue(())
        },
    )
    .and_then(require_completed)?;
    let end = orbit.last().expect("solve always samples the end point");
    let miss = (end.y + amplitude).abs().max(end.ydot.abs());
    if miss > CLOSURE_TOLERANCE * amplitude.max(1.0) {
        return Err(Error::Integration(format!(
            "vertical mode orbit does not close: miss {miss:e} after one period"
        )));
    }
    Ok(VerticalMode {
        j,
        energy,
        amplitude,
        period,
        orbit,
    })
}

/// The Hill equation for torsional index `i` along the `j`-th vertical mode
/// at energy `E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillProblem {
    pub i: usize,
    pub j: usize,
    pub energy: f64,
    pub variant: TorsionVariant,
    pub amplitude: f64,
    pub period: f64,
}

impl HillProblem {
    pub fn new(i: usize, j: usize, energy: f64) -> Result<Self> {
        Self::with_variant(i, j, energy, TorsionVariant::Standard)
    }

    pub fn with_variant(i: usize, j: usize, energy: f64, variant: TorsionVariant) -> Result<Self> {
        check_index(i)?;
        check_index(j)?;
        Ok(HillProblem {
            i,
            j,
            energy,
            variant,
            amplitude: amplitude_of(energy, j)?,
            period: period(energy, j)?,
        })
    }

    /// `α_{i,j}`: `3/2` on the diagonal, `1` otherwise.
    pub fn alpha(&self) -> f64 {
        if self.i == self.j {
            1.5
        } else {
            1.0
        }
    }

    /// `a(t)` for a given vertical displacement `ȳ_j(t)`.
    pub fn coefficient(&self, ybar: f64) -> f64 {
        self.variant.linear_coefficient(self.i) + 9.0 * self.alpha() * ybar * ybar
    }

    pub fn a_min(&self) -> f64 {
        self.coefficient(0.0)
    }

    pub fn a_max(&self) -> f64 {
        self.variant.linear_coefficient(self.i)
            + 9.0 * self.alpha() * self.amplitude * self.amplitude
    }

    /// Period of `a(t)`, `T_j(E)/2`.
    pub fn half_period(&self) -> f64 {
        0.5 * self.period
    }
}

/// How `4π²/T_j(E)²` enters the band test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeriodModel {
    /// The exact period.
    #[default]
    Exact,
    /// `4π²/T²` replaced by its upper estimate `√((j⁴+2)²+6E)` on lower band
    /// edges and by its lower estimate `(3/4)Λ₊ʲ(E)` on upper band edges.
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    /// `[[ξ₁(P), ξ₂(P)], [ξ₁'(P), ξ₂'(P)]]` for the canonical initial columns.
    pub matrix: [[f64; 2]; 2],
    pub trace: f64,
    pub determinant: f64,
    /// Floquet multipliers as `(re, im)` pairs.
    pub multipliers: [(f64, f64); 2],
}

impl Monodromy {
    fn from_matrix(matrix: [[f64; 2]; 2]) -> Self {
        let trace = matrix[0][0] + matrix[1][1];
        let determinant = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        let disc = trace * trace - 4.0 * determinant;
        let multipliers = if disc >= 0.0 {
            let r = disc.sqrt();
            [(0.5 * (trace + r), 0.0), (0.5 * (trace - r), 0.0)]
        } else {
            let r = (-disc).sqrt();
            [(0.5 * trace, 0.5 * r), (0.5 * trace, -0.5 * r)]
        };
        Monodromy {
            matrix,
            trace,
            determinant,
            multipliers,
        }
    }

    /// Largest multiplier modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.multipliers
            .iter()
            .map(|(re, im)| re.hypot(*im))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityVerdict {
    /// `a(t)` lies in the Zhukovskii band `[(nπ/P)², ((n+1)π/P)²]`.
    SufficientStable {
        band: u32,
        a_min: f64,
        a_max: f64,
        lower_edge: f64,
        upper_edge: f64,
    },
    Inconclusive {
        a_min: f64,
        a_max: f64,
    },
    FloquetStable(Monodromy),
    FloquetUnstable(Monodromy),
}

impl StabilityVerdict {
    pub fn is_sufficient_stable(&self) -> bool {
        matches!(self, StabilityVerdict::SufficientStable { .. })
    }

    pub fn is_floquet_unstable(&self) -> bool {
        matches!(self, StabilityVerdict::FloquetUnstable(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            StabilityVerdict::SufficientStable { .. } => "sufficient-stable",
            StabilityVerdict::Inconclusive { .. } => "inconclusive",
            StabilityVerdict::FloquetStable(_) => "floquet-stable",
            StabilityVerdict::FloquetUnstable(_) => "floquet-unstable",
        }
    }
}

/// Zhukovskii band test with the exact period.
pub fn zhukovskii_verdict(problem: &HillProblem) -> StabilityVerdict {
    zhukovskii_verdict_with(problem, PeriodModel::Exact)
}

pub fn zhukovskii_verdict_with(problem: &HillProblem, model: PeriodModel) -> StabilityVerdict {
    let a_min = problem.a_min();
    let a_max = problem.a_max();
    // Lower and upper estimates of (π/P)² = 4π²/T².
    let (over, under) = match model {
        PeriodModel::Exact => {
            let base = (2.0 * PI / problem.period).powi(2);
            (base, base)
        }
        PeriodModel::Bounds => {
            let w = linear_frequency_sq(problem.j);
            let plus = lambda_pm(problem.energy, problem.j, Branch::Plus)
                .expect("energy validated at construction");
            ((w * w + 6.0 * problem.energy).sqrt(), 0.75 * plus)
        }
    };
    let mut n: u32 = 0;
    loop {
        let lower_edge = (n as f64).powi(2) * over;
        if lower_edge > a_min {
            return StabilityVerdict::Inconclusive { a_min, a_max };
        }
        let upper_edge = ((n + 1) as f64).powi(2) * under;
        if a_max <= upper_edge {
            return StabilityVerdict::SufficientStable {
                band: n,
                a_min,
                a_max,
                lower_edge,
                upper_edge,
            };
        }
        n += 1;
    }
}

/// Monodromy matrix of `ξ̈ + a(t)ξ = 0` over one period of `a`.
pub fn monodromy(problem: &HillProblem) -> Result<Monodromy> {
    let lin = problem.variant.linear_coefficient(problem.i);
    let weight = 9.0 * problem.alpha();
    let w = linear_frequency_sq(problem.j);
    let rhs = (6usize, move |_t: f64, u: &[f64], du: &mut [f64]| {
        let y = u[0];
        let a = lin + weight * y * y;
        du[0] = u[1];
        du[1] = -w * y - 1.5 * y * y * y;
        du[2] = u[3];
        du[3] = -a * u[2];
        du[4] = u[5];
        du[5] = -a * u[4];
    });
    let p = problem.half_period();
    let mut end = [0.0; 6];
    solve(
        &rhs,
        0.0,
        &[-problem.amplitude, 0.0, 1.0, 0.0, 0.0, 1.0],
        p,
        p,
        &TIGHT,
        |_, u| {
            end.copy_from_slice(u);
            ControlFlow::Continue(())
        },
    )
    .and_then(require_completed)?;
    Ok(Monodromy::from_matrix([[end[2], end[4]], [end[3], end[5]]]))
}

/// Maximum tolerated `|det M − 1|` before the integration is distrusted.
pub const DETERMINANT_TOLERANCE: f64 = 1e-6;

/// Floquet classification: stable when `|tr M| ≤ 2 + tol`.
pub fn floquet_verdict(problem: &HillProblem, tol: f64) -> Result<StabilityVerdict> {
    let m = monodromy(problem)?;
    if (m.determinant - 1.0).abs() > DETERMINANT_TOLERANCE {
        return Err(Error::DeterminantDrift {
            determinant: m.determinant,
            tolerance: DETERMINANT_TOLERANCE,
        });
    }
    Ok(if m.trace.abs() <= 2.0 + tol {
        StabilityVerdict::FloquetStable(m)
    } else {
        StabilityVerdict::FloquetUnstable(m)
    })
}

/// Largest energy below the first failure of `holds`, assuming `holds(0)`.
///
/// Scans `[0, e_max]` on a quadratic grid, then bisects the first bracket to
/// machine precision.
fn first_failure<F>(holds: F, e_max: f64, grid: usize) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<bool> + Sync,
{
    let energies: Vec<f64> = (1..=grid)
        .map(|k| e_max * (k as f64 / grid as f64).powi(2))
        .collect();
    let flags: Vec<bool> = energies
        .par_iter()
        .map(|&e| holds(e))
        .collect::<Result<_>>()?;
    let Some(idx) = flags.iter().position(|ok| !ok) else {
        return Ok(None);
    };
    let mut lo = if idx == 0 { 0.0 } else { energies[idx - 1] };
    let mut hi = energies[idx];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

const SUPPORTED_THRESHOLDS: [(usize, usize); 3] = [(1, 1), (1, 2), (2, 2)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalThreshold {
    pub k: usize,
    pub m: usize,
    pub energy: f64,
    pub amplitude: f64,
}

/// Largest energy for which every torsional index `i ≤ m` along the `k`-th
/// vertical mode passes the Zhukovskii test, with the period estimates that
/// make the bound explicit.
pub fn theoretical_threshold(k: usize, m: usize) -> Result<TheoreticalThreshold> {
    theoretical_threshold_with(k, m, PeriodModel::Bounds)
}

pub fn theoretical_threshold_with(
    k: usize,
    m: usize,
    model: PeriodModel,
) -> Result<TheoreticalThreshold> {
    if !SUPPORTED_THRESHOLDS.contains(&(k, m)) {
        return Err(Error::Unsupported(format!(
            "theoretical thresholds exist for (k, m) in {SUPPORTED_THRESHOLDS:?}, got ({k}, {m})"
        )));
    }
    let holds = |e: f64| -> Result<bool> {
        for i in 1..=m {
            let problem = HillProblem::new(i, k, e)?;
            if !zhukovskii_verdict_with(&problem, model).is_sufficient_stable() {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let energy = first_failure(holds, 200.0, 800)?.ok_or_else(|| {
        Error::Integration(format!(
            "no stability loss found below E = 200 for ({k}, {m})"
        ))
    })?;
    Ok(TheoreticalThreshold {
        k,
        m,
        energy,
        amplitude: amplitude_of(energy, k)?,
    })
}

/// Energies up to which each edge of the Zhukovskii band `n` holds on its
/// own, using the exact period: `(4n²π²/T² ≤ a_min, a_max ≤ 4(n+1)²π²/T²)`.
pub fn band_edge_limits(i: usize, j: usize, band: u32) -> Result<(Option<f64>, Option<f64>)> {
    let lower = |e: f64| -> Result<bool> {
        let p = HillProblem::new(i, j, e)?;
        Ok((band as f64).powi(2) * (2.0 * PI / p.period).powi(2) <= p.a_min())
    };
    let upper = |e: f64| -> Result<bool> {
        let p = HillProblem::new(i, j, e)?;
        Ok(p.a_max() <= ((band + 1) as f64).powi(2) * (2.0 * PI / p.period).powi(2))
    };
    Ok((
        first_failure(lower, 200.0, 800)?,
        first_failure(upper, 200.0, 800)?,
    ))
}

/// First energy at which the Floquet classification turns unstable, scanning
/// `(0, e_max]`.
pub fn floquet_onset_energy(i: usize, j: usize, e_max: f64, tol: f64) -> Result<Option<f64>> {
    let stable = |e: f64| -> Result<bool> {
        Ok(!floquet_verdict(&HillProblem::new(i, j, e)?, tol)?.is_floquet_unstable())
    };
    first_failure(stable, e_max, 400)
}

/// One row of a Zhukovskii/Floquet comparison grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictRow {
    pub energy: f64,
    pub i: usize,
    pub j: usize,
    pub zhukovskii: StabilityVerdict,
    pub floquet: StabilityVerdict,
}

/// Both verdicts for every torsional index `i ≤ m` along mode `k` at each energy.
pub fn verdict_grid(k: usize, m: usize, energies: &[f64], tol: f64) -> Result<Vec<VerdictRow>> {
    if k == 0 || k > m {
        return Err(Error::InvalidIndex(format!(
            "vertical mode {k} outside 1..={m}"
        )));
    }
    let cases: Vec<(f64, usize)> = energies
        .iter()
        .flat_map(|&e| (1..=m).map(move |i| (e, i)))
        .collect();
    cases
        .par_iter()
        .map(|&(energy, i)| {
            let problem = HillProblem::new(i, k, energy)?;
            Ok(VerdictRow {
                energy,
                i,
                j: k,
                zhukovskii: zhukovskii_verdict(&problem),
                floquet: floquet_verdict(&problem, tol)?,
            })
        })
        .collect()
}
