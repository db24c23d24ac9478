//! Projected `m`-mode equations of motion and their linearization about a
//! vertical mode.
//!
//! With `f(s) = s + γs³` the projected system reads, for `j = 1..=m`,
//!
//! ```text
//! ÿ_j = −(j⁴ + 2) y_j − (γ/2)  Σ Q(j,a,b,c) (y_a y_b y_c + 3 y_a z_b z_c)
//! z̈_j = −(c j² + 6) z_j − (3γ/2) Σ Q(j,a,b,c) (z_a z_b z_c + 3 z_a y_b y_c)
//! ```
//!
//! where `c` is the torsion stiffness factor and `Q` the quartic overlap.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::{OdeRhs, Trajectory};
use crate::model::{energy_with_table, CouplingTable, EnergyBreakdown, ModelSpec, TorsionVariant};

/// Right-hand side of the projected system on packed states `[Y, Ẏ, Z, Ż]`.
#[derive(Debug, Clone)]
pub struct OdeSystem {
    spec: ModelSpec,
    table: Arc<CouplingTable>,
    vertical_linear: Vec<f64>,
    torsional_linear: Vec<f64>,
}

pub fn build_system(spec: &ModelSpec) -> Result<OdeSystem> {
    spec.validate()?;
    let m = spec.modes;
    let vertical_linear = (1..=m).map(|j| (j as f64).powi(4) + 2.0).collect();
    let torsional_linear = (1..=m)
        .map(|j| spec.torsion_variant.linear_coefficient(j))
        .collect();
    Ok(OdeSystem {
        spec: *spec,
        table: CouplingTable::shared(m),
        vertical_linear,
        torsional_linear,
    })
}

impl OdeSystem {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn modes(&self) -> usize {
        self.spec.modes
    }

    pub fn table(&self) -> &CouplingTable {
        &self.table
    }

    /// Length of a packed state, `4m`.
    pub fn dimension(&self) -> usize {
        4 * self.spec.modes
    }

    /// Writes `(Ÿ, Z̈)` for positions `(y, z)` into `ydd` and `zdd`.
    pub fn accelerations(&self, y: &[f64], z: &[f64], ydd: &mut [f64], zdd: &mut [f64]) {
        let gamma = self.spec.gamma;
        for j in 1..=self.spec.modes {
            let [yyy, yzz, zzz, zyy] = self.table.contract_row(j, y, z);
            ydd[j - 1] = -self.vertical_linear[j - 1] * y[j - 1] - 0.5 * gamma * (yyy + 3.0 * yzz);
            zdd[j - 1] = -self.torsional_linear[j - 1] * z[j - 1] - 1.5 * gamma * (zzz + 3.0 * zyy);
        }
    }

    /// Conserved energy of a packed state.
    pub fn energy(&self, u: &[f64]) -> EnergyBreakdown {
        let m = self.spec.modes;
        energy_with_table(
            &self.spec,
            &self.table,
            &u[..m],
            &u[m..2 * m],
            &u[2 * m..3 * m],
            &u[3 * m..],
        )
    }
}

impl OdeRhs for OdeSystem {
    fn dimension(&self) -> usize {
        4 * self.spec.modes
    }

    fn eval(&self, _t: f64, u: &[f64], du: &mut [f64]) {
        let m = self.spec.modes;
        let (pos_y, rest) = u.split_at(m);
        let (vel_y, rest) = rest.split_at(m);
        let (pos_z, vel_z) = rest.split_at(m);
        let (d_y, drest) = du.split_at_mut(m);
        let (d_vy, drest) = drest.split_at_mut(m);
        let (d_z, d_vz) = drest.split_at_mut(m);
        d_y.copy_from_slice(vel_y);
        d_z.copy_from_slice(vel_z);
        self.accelerations(pos_y, pos_z, d_vy, d_vz);
    }
}

/// Tolerance for "exactly zero" components of a vertical-mode orbit.
pub const VERTICAL_MODE_TOLERANCE: f64 = 1e-12;

/// Torsional linearization `Ξ'' + P_k(t) Ξ = 0` along a sampled vertical mode.
///
/// `P_k(t)_{il} = δ_{il}(c i² + 6) + (9γ/2) Q(i, l, k, k) ȳ_k(t)²`.
#[derive(Debug, Clone)]
pub struct LinearizedTorsion {
    pub k: usize,
    pub m: usize,
    pub gamma: f64,
    pub variant: TorsionVariant,
    pub times: Vec<f64>,
    /// Sampled vertical amplitude `ȳ_k(t)`.
    pub ybar: Vec<f64>,
    table: Arc<CouplingTable>,
}

impl LinearizedTorsion {
    /// `P_k` (row-major `m × m`) for a given vertical amplitude `ȳ_k`.
    pub fn matrix_for(&self, ybar: f64) -> Vec<f64> {
        let m = self.m;
        let weight = 4.5 * self.gamma * ybar * ybar;
        let mut p = vec![0.0; m * m];
        for i in 1..=m {
            for l in 1..=m {
                let mut v = weight * self.table.get(i, l, self.k);
                if i == l {
                    v += self.variant.linear_coefficient(i);
                }
                p[(i - 1) * m + (l - 1)] = v;
            }
        }
        p
    }

    /// `P_k` at sample `index`.
    pub fn matrix_at(&self, index: usize) -> Vec<f64> {
        self.matrix_for(self.ybar[index])
    }

    /// True when `P_k` has no off-diagonal coupling (always the case for `m ≤ 2`).
    pub fn is_diagonal(&self) -> bool {
        (1..=self.m).all(|i| (1..=self.m).all(|l| i == l || self.table.get(i, l, self.k) == 0.0))
    }

    /// Diagonal entries `a_{i,k}` for a given vertical amplitude.
    pub fn diagonal_for(&self, ybar: f64) -> Vec<f64> {
        let p = self.matrix_for(ybar);
        (0..self.m).map(|i| p[i * self.m + i]).collect()
    }
}

/// Linearizes the torsional equations about the `k`-th vertical mode sampled
/// in `trajectory`.
///
/// The trajectory must keep `Z ≡ 0` and `Y` supported on component `k`
/// (within [`VERTICAL_MODE_TOLERANCE`]). For `m ≥ 3` with `3k ≤ m` the
/// vertical motion leaks into mode `3k` and such orbits are rejected.
pub fn linearize_about_vertical_mode(
    spec: &ModelSpec,
    k: usize,
    trajectory: &Trajectory,
) -> Result<LinearizedTorsion> {
    spec.validate()?;
    let m = spec.modes;
    if k == 0 || k > m {
        return Err(Error::InvalidIndex(format!(
            "vertical mode {k} outside 1..={m}"
        )));
    }
    if trajectory.samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut times = Vec::with_capacity(trajectory.samples.len());
    let mut ybar = Vec::with_capacity(trajectory.samples.len());
    for sample in &trajectory.samples {
        let s = &sample.state;
        s.check_modes(spec)?;
        let torsion =
            s.z.iter()
                .chain(&s.zdot)
                .fold(0.0f64, |a, x| a.max(x.abs()));
        if torsion > VERTICAL_MODE_TOLERANCE {
            return Err(Error::NotVerticalMode(format!(
                "torsional amplitude {torsion:e} at t = {}",
                s.t
            )));
        }
        for i in (1..=m).filter(|&i| i != k) {
            let leak = s.y[i - 1].abs().max(s.ydot[i - 1].abs());
            if leak > VERTICAL_MODE_TOLERANCE {
                return Err(Error::NotVerticalMode(format!(
                    "vertical component {i} reaches {leak:e} at t = {}",
                    s.t
                )));
            }
        }
        times.push(s.t);
        ybar.push(s.y[k - 1]);
    }
    Ok(LinearizedTorsion {
        k,
        m,
        gamma: spec.gamma,
        variant: spec.torsion_variant,
        times,
        ybar,
        table: CouplingTable::shared(m),
    })
}
