//! Domain types of the truncated fish-bone model.
//!
//! The deck midline displacement `y` and the scaled torsion `z = ℓθ` are
//! expanded in the sine basis `sin(jx)`, `j = 1..=m`, on `(0, π)`. Every
//! quartic integral of the projected system reduces to the overlap
//!
//! ```text
//! Q(a, b, c, d) = (8/π) ∫₀^π sin(ax) sin(bx) sin(cx) sin(dx) dx
//! ```
//!
//! which is an integer in `{-1, 0, 1, 2, 3}`. The [`CouplingTable`] caches the
//! nonzero overlaps for a given truncation so that right-hand sides and
//! energies are exact sums instead of quadratures.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Linear torsional stiffness law.
///
/// `Standard` gives the coefficient `j² + 6` in mode `j`; `StiffTorsion`
/// (equal flexural and torsional rigidity) gives `3j² + 6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TorsionVariant {
    #[default]
    Standard,
    StiffTorsion,
}

impl TorsionVariant {
    /// Multiplier of `j²` in the linear torsional restoring term.
    pub fn stiffness_factor(self) -> f64 {
        match self {
            TorsionVariant::Standard => 1.0,
            TorsionVariant::StiffTorsion => 3.0,
        }
    }

    /// Linear torsional coefficient of mode `j` (stiffness plus hanger term).
    pub fn linear_coefficient(self, j: usize) -> f64 {
        let j = j as f64;
        self.stiffness_factor() * j * j + 6.0
    }
}

impl fmt::Display for TorsionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorsionVariant::Standard => f.write_str("standard"),
            TorsionVariant::StiffTorsion => f.write_str("stiff"),
        }
    }
}

impl FromStr for TorsionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(TorsionVariant::Standard),
            "stiff" => Ok(TorsionVariant::StiffTorsion),
            other => Err(Error::InvalidParameter(format!(
                "unknown torsion variant '{other}' (expected 'standard' or 'stiff')"
            ))),
        }
    }
}

/// Parameters of the truncated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    /// Strength of the cubic hanger nonlinearity `f(s) = s + γs³`.
    pub gamma: f64,
    /// Number of retained sine modes `m`.
    pub modes: usize,
    pub torsion_variant: TorsionVariant,
    /// Deck half-width; only used to report the angle `θ = z/ℓ`.
    pub ell: f64,
}

impl ModelSpec {
    pub fn new(
        gamma: f64,
        modes: usize,
        torsion_variant: TorsionVariant,
        ell: f64,
    ) -> Result<Self> {
        let spec = ModelSpec {
            gamma,
            modes,
            torsion_variant,
            ell,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `γ = 1`, `ℓ = 1`, standard torsion.
    pub fn standard(modes: usize) -> Result<Self> {
        Self::new(1.0, modes, TorsionVariant::Standard, 1.0)
    }

    pub fn with_variant(mut self, variant: TorsionVariant) -> Self {
        self.torsion_variant = variant;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.modes == 0 {
            return Err(Error::InvalidParameter("modes must be at least 1".into()));
        }
        if self.modes > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "modes must not exceed {}, got {}",
                u16::MAX,
                self.modes
            )));
        }
        if !(self.ell.is_finite() && self.ell > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ell must be positive, got {}",
                self.ell
            )));
        }
        Ok(())
    }
}

/// One phase-space point `(Y, Ẏ, Z, Ż)` of the truncated system at time `t`.
///
/// Packed vectors always use the order `[Y, Ẏ, Z, Ż]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub t: f64,
    pub y: Vec<f64>,
    pub ydot: Vec<f64>,
    pub z: Vec<f64>,
    pub zdot: Vec<f64>,
}

impl ModalState {
    pub fn new(t: f64, y: Vec<f64>, ydot: Vec<f64>, z: Vec<f64>, zdot: Vec<f64>) -> Result<Self> {
        let m = y.len();
        for v in [&ydot, &z, &zdot] {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
        }
        if m == 0 {
            return Err(Error::InvalidParameter(
                "state must have at least one mode".into(),
            ));
        }
        let state = ModalState {
            t,
            y,
            ydot,
            z,
            zdot,
        };
        if !state.is_finite() {
            return Err(Error::NonFinite { t });
        }
        Ok(state)
    }

    pub fn zeros(modes: usize) -> Self {
        ModalState {
            t: 0.0,
            y: vec![0.0; modes],
            ydot: vec![0.0; modes],
            z: vec![0.0; modes],
            zdot: vec![0.0; modes],
        }
    }

    pub fn modes(&self) -> usize {
        self.y.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && [&self.y, &self.ydot, &self.z, &self.zdot]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Packs into `[Y, Ẏ, Z, Ż]`.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.modes());
        out.extend_from_slice(&self.y);
        out.extend_from_slice(&self.ydot);
        out.extend_from_slice(&self.z);
        out.extend_from_slice(&self.zdot);
        out
    }

    pub fn unpack(t: f64, packed: &[f64]) -> Result<Self> {
        if packed.is_empty() || !packed.len().is_multiple_of(4) {
            return Err(Error::InvalidParameter(format!(
                "packed state length {} is not a positive multiple of 4",
                packed.len()
            )));
        }
        let m = packed.len() / 4;
        ModalState::new(
            t,
            packed[..m].to_vec(),
            packed[m..2 * m].to_vec(),
            packed[2 * m..3 * m].to_vec(),
            packed[3 * m..].to_vec(),
        )
    }

    pub(crate) fn check_modes(&self, spec: &ModelSpec) -> Result<()> {
        if self.modes() != spec.modes {
            return Err(Error::DimensionMismatch {
                expected: spec.modes,
                found: self.modes(),
            });
        }
        for v in [&self.ydot, &self.z, &self.zdot] {
            if v.len() != spec.modes {
                return Err(Error::DimensionMismatch {
                    expected: spec.modes,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Decomposition of the conserved energy of the truncated system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    /// `½|Ẏ|²`
    pub kinetic_y: f64,
    /// `(1/6)|Ż|²`
    pub kinetic_z: f64,
    /// `½ Σ j⁴ y_j²`
    pub bending: f64,
    /// `(c/6) Σ j² z_j²`, `c` the torsion stiffness factor.
    pub torsion_elastic: f64,
    /// `(2/π)∫ (y² + z²) = |Y|² + |Z|²`
    pub quadratic_potential: f64,
    /// `(2/π)∫ γ(y⁴ + z⁴)/2`
    pub quartic_potential: f64,
    /// `(2/π)∫ 3γ y² z²`
    pub coupling_potential: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(
        kinetic_y: f64,
        kinetic_z: f64,
        bending: f64,
        torsion_elastic: f64,
        quadratic_potential: f64,
        quartic_potential: f64,
        coupling_potential: f64,
    ) -> Self {
        let total = kinetic_y
            + kinetic_z
            + bending
            + torsion_elastic
            + quadratic_potential
            + quartic_potential
            + coupling_potential;
        EnergyBreakdown {
            kinetic_y,
            kinetic_z,
            bending,
            torsion_elastic,
            quadratic_potential,
            quartic_potential,
            coupling_potential,
            total,
        }
    }

    pub fn components(&self) -> [f64; 7] {
        [
            self.kinetic_y,
            self.kinetic_z,
            self.bending,
            self.torsion_elastic,
            self.quadratic_potential,
            self.quartic_potential,
            self.coupling_potential,
        ]
    }
}

/// Hanger restoring force `f(s) = s + γs³`.
pub fn restoring_force(s: f64, gamma: f64) -> f64 {
    s + gamma * s * s * s
}

/// Closed form of `(8/π) ∫₀^π sin(ax) sin(bx) sin(cx) sin(dx) dx` for
/// positive integers.
///
/// Product-to-sum leaves eight cosines `cos((a ± b ± c ± d)x)`; each
/// integrates to `π` when its frequency vanishes and to zero otherwise.
pub fn quartic_overlap(a: usize, b: usize, c: usize, d: usize) -> i32 {
    let (a, b, c, d) = (a as i64, b as i64, c as i64, d as i64);
    let hit = |cond: bool| cond as i32;
    hit(a + b == c + d) + hit(a + c == b + d) + hit(a + d == b + c)
        - hit(a == b + c + d)
        - hit(b == a + c + d)
        - hit(c == a + b + d)
        - hit(d == a + b + c)
}

/// `c_{l,j,k} = (8/π) ∫₀^π sin²(kx) sin(jx) sin(lx) dx`.
pub fn coupling_coefficient(l: usize, j: usize, k: usize) -> Result<f64> {
    if l == 0 || j == 0 || k == 0 {
        return Err(Error::InvalidIndex(format!(
            "coupling indices must be positive, got ({l}, {j}, {k})"
        )));
    }
    Ok(quartic_overlap(l, j, k, k) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Overlap {
    a: u16,
    b: u16,
    c: u16,
    value: i8,
}

/// Nonzero quartic overlaps for a truncation `m`.
///
/// Holds the dense three-index table `c[l][j][k]` and, for every row `j`, the
/// sparse list of ordered triples `(a, b, c)` with `Q(j, a, b, c) ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    m: usize,
    dense: Vec<i8>,
    row_start: Vec<usize>,
    overlaps: Vec<Overlap>,
}

impl CouplingTable {
    pub fn new(m: usize) -> Self {
        let mut dense = vec![0i8; m * m * m];
        for l in 1..=m {
            for j in 1..=m {
                for k in 1..=m {
                    dense[((l - 1) * m + (j - 1)) * m + (k - 1)] =
                        quartic_overlap(l, j, k, k) as i8;
                }
            }
        }

        let mut row_start = Vec::with_capacity(m + 1);
        let mut overlaps = Vec::new();
        for j in 1..=m as i64 {
            row_start.push(overlaps.len());
            for a in 1..=m as i64 {
                for b in 1..=m as i64 {
                    // Q(j,a,b,c) can only be nonzero when c solves one of the
                    // seven linear relations of `quartic_overlap`.
                    let mut candidates = [
                        j + a - b,
                        j + b - a,
                        a + b - j,
                        j - a - b,
                        a - j - b,
                        b - j - a,
                        j + a + b,
                    ];
                    candidates.sort_unstable();
                    let mut last = 0;
                    for &c in &candidates {
                        if c < 1 || c > m as i64 || c == last {
                            continue;
                        }
                        last = c;
                        let value = quartic_overlap(j as usize, a as usize, b as usize, c as usize);
                        if value != 0 {
                            overlaps.push(Overlap {
                                a: a as u16,
                                b: b as u16,
                                c: c as u16,
                                value: value as i8,
                            });
                        }
                    }
                }
            }
        }
        row_start.push(overlaps.len());

        CouplingTable {
            m,
            dense,
            row_start,
            overlaps,
        }
    }

    /// Process-wide cached table for truncation `m`.
    pub fn shared(m: usize) -> Arc<CouplingTable> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CouplingTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(table) = cache.lock().expect("coupling cache poisoned").get(&m) {
            return Arc::clone(table);
        }
        let table = Arc::new(CouplingTable::new(m));
        let mut guard = cache.lock().expect("coupling cache poisoned");
        Arc::clone(guard.entry(m).or_insert(table))
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    /// `c[l][j][k]` for `1 ≤ l, j, k ≤ m`.
    pub fn get(&self, l: usize, j: usize, k: usize) -> f64 {
        let m = self.m;
        assert!(
            (1..=m).contains(&l) && (1..=m).contains(&j) && (1..=m).contains(&k),
            "coupling index out of range"
        );
        self.dense[((l - 1) * m + (j - 1)) * m + (k - 1)] as f64
    }

    /// Number of stored nonzero quadruples.
    pub fn nonzero_count(&self) -> usize {
        self.overlaps.len()
    }

    /// `Σ_{a,b,c} Q(j, a, b, c) u_a v_b w_c` for the 1-based row `j`.
    pub fn contract(&self, j: usize, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let row = &self.overlaps[self.row_start[j - 1]..self.row_start[j]];
        row.iter()
            .map(|o| {
                o.value as f64 * u[o.a as usize - 1] * v[o.b as usize - 1] * w[o.c as usize - 1]
            })
            .sum()
    }

    /// Computes the three cubic projections needed by one Galerkin row at once:
    /// `(Σ Q y y y, Σ Q y z z, Σ Q z z z, Σ Q z y y)` with the row index first.
    pub(crate) fn contract_row(&self, j: usize, y: &[f64], z: &[f64]) -> [f64; 4] {
        let row = &self.overlaps[self.row_start[j - 1]..self.row_start[j]];
        let mut acc = [0.0; 4];
        for o in row {
            let q = o.value as f64;
            let (a, b, c) = (o.a as usize - 1, o.b as usize - 1, o.c as usize - 1);
            acc[0] += q * y[a] * y[b] * y[c];
            acc[1] += q * y[a] * z[b] * z[c];
            acc[2] += q * z[a] * z[b] * z[c];
            acc[3] += q * z[a] * y[b] * y[c];
        }
        acc
    }
}

pub(crate) fn energy_with_table(
    spec: &ModelSpec,
    table: &CouplingTable,
    y: &[f64],
    ydot: &[f64],
    z: &[f64],
    zdot: &[f64],
) -> EnergyBreakdown {
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let kinetic_y = 0.5 * sq(ydot);
    let kinetic_z = sq(zdot) / 6.0;

    let mut bending = 0.0;
    let mut torsion = 0.0;
    let mut quartic_y = 0.0;
    let mut quartic_z = 0.0;
    let mut mixed = 0.0;
    for j in 1..=y.len() {
        let jf = j as f64;
        let (yj, zj) = (y[j - 1], z[j - 1]);
        bending += jf.powi(4) * yj * yj;
        torsion += jf * jf * zj * zj;
        let [yyy, yzz, zzz, _] = table.contract_row(j, y, z);
        quartic_y += yj * yyy;
        quartic_z += zj * zzz;
        mixed += yj * yzz;
    }
    let gamma = spec.gamma;
    // Rounding can push exact zeros of the quartic forms slightly negative.
    EnergyBreakdown::from_parts(
        kinetic_y,
        kinetic_z,
        0.5 * bending,
        spec.torsion_variant.stiffness_factor() * torsion / 6.0,
        sq(y) + sq(z),
        (gamma * (quartic_y + quartic_z) / 8.0).max(0.0),
        (0.75 * gamma * mixed).max(0.0),
    )
}

/// Conserved energy of the truncated system at `state`.
pub fn total_energy(state: &ModalState, spec: &ModelSpec) -> Result<EnergyBreakdown> {
    spec.validate()?;
    state.check_modes(spec)?;
    let table = CouplingTable::shared(spec.modes);
    Ok(energy_with_table(
        spec,
        &table,
        &state.y,
        &state.ydot,
        &state.z,
        &state.zdot,
    ))
}

/// Maps a solution of the `γ` system to the corresponding solution of the
/// `γ = 1` system: every coordinate is multiplied by `√γ`.
pub fn rescale_gamma(state: &ModalState, gamma: f64) -> Result<ModalState> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let s = gamma.sqrt();
    let scale = |v: &[f64]| v.iter().map(|x| s * x).collect::<Vec<_>>();
    Ok(ModalState {
        t: state.t,
        y: scale(&state.y),
        ydot: scale(&state.ydot),
        z: scale(&state.z),
        zdot: scale(&state.zdot),
    })
}
