//! Two-mode projective measurements, Born-rule probabilities and emulated
//! coincidence counts.
//!
//! Each arm is projected either onto a single mode `|k⟩` or onto an equal
//! superposition `(|k₁⟩ + e^{iα}|k₂⟩)/√2` with `k₁ < k₂` and `α ∈ {0, π/2, π, 3π/2}`.
//! For `d` modes that is `d + 4·C(d,2)` single-arm projectors, and the joint
//! settings are every ordered pair of them.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bellbasis::ModeWindow;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, PureState, C64};

/// Single-arm projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProjectorSpec {
    Pure {
        k: usize,
    },
    /// `(|k1⟩ + e^{i·quarter·π/2}|k2⟩)/√2`, `quarter ∈ 0..4`.
    Superposition {
        k1: usize,
        k2: usize,
        quarter: u8,
    },
}

impl ProjectorSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        let ok = match *self {
            ProjectorSpec::Pure { k } => k < d,
            ProjectorSpec::Superposition { k1, k2, quarter } => k1 < k2 && k2 < d && quarter < 4,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("projector {self:?} invalid for d={d}")))
        }
    }

    /// Relative phase α of a superposition projector.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            ProjectorSpec::Pure { .. } => None,
            ProjectorSpec::Superposition { quarter, .. } => Some(quarter as f64 * FRAC_PI_2),
        }
    }

    /// Largest mode index referenced.
    pub fn max_mode(&self) -> usize {
        match *self {
            ProjectorSpec::Pure { k } => k,
            ProjectorSpec::Superposition { k2, .. } => k2,
        }
    }

    /// The ket this projector projects onto.
    pub fn ket(&self, d: usize) -> DVector<C64> {
        let mut v = DVector::zeros(d);
        match *self {
            ProjectorSpec::Pure { k } => v[k] = C64::new(1.0, 0.0),
            ProjectorSpec::Superposition { k1, k2, quarter } => {
                // exact quarter-turn phases keep p = 0 settings exactly zero
                let phase = [
                    C64::new(1.0, 0.0),
                    C64::new(0.0, 1.0),
                    C64::new(-1.0, 0.0),
                    C64::new(0.0, -1.0),
                ][quarter as usize];
                v[k1] = C64::new(FRAC_1_SQRT_2, 0.0);
                v[k2] = phase * FRAC_1_SQRT_2;
            }
        }
        v
    }

    pub fn matrix(&self, d: usize) -> DMatrix<C64> {
        let v = self.ket(d);
        &v * v.adjoint()
    }
}

/// Single-arm projector set: pure modes ascending, then pairs `(k1, k2)` in
/// lexicographic order with `α` ascending.
pub fn tomography_projectors(d: usize) -> Result<Vec<ProjectorSpec>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("d={d} < 2")));
    }
    let mut out: Vec<ProjectorSpec> = (0..d).map(|k| ProjectorSpec::Pure { k }).collect();
    for k1 in 0..d {
        for k2 in k1 + 1..d {
            out.extend((0..4).map(|quarter| ProjectorSpec::Superposition { k1, k2, quarter }));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub a: ProjectorSpec,
    pub b: ProjectorSpec,
}

impl MeasurementSetting {
    pub fn validate(&self, d: usize) -> Result<()> {
        self.a.validate(d)?;
        self.b.validate(d)
    }

    /// Joint ket `|Ψ_A⟩ ⊗ |Ψ_B⟩`.
    pub fn ket(&self, d: usize) -> DVector<C64> {
        self.a.ket(d).kronecker(&self.b.ket(d))
    }
}

/// Every ordered pair of single-arm projectors, A outer.
pub fn joint_settings(d: usize) -> Result<Vec<MeasurementSetting>> {
    let single = tomography_projectors(d)?;
    Ok(single
        .iter()
        .flat_map(|&a| single.iter().map(move |&b| MeasurementSetting { a, b }))
        .collect())
}

fn joint_dim(d: usize, found: usize) -> Result<()> {
    if d * d != found {
        return Err(Error::DimensionMismatch { expected: d * d, found });
    }
    Ok(())
}

/// `Tr(ρ·Π_A⊗Π_B)` for a `d²`-dimensional joint state.
pub fn born_probability(rho: &DensityMatrix, setting: &MeasurementSetting, d: usize) -> Result<f64> {
    joint_dim(d, rho.dim())?;
    setting.validate(d)?;
    Ok(rho.expectation(&setting.ket(d)))
}

/// `|⟨Ψ_A Ψ_B|ψ⟩|²`.
pub fn born_probability_pure(state: &PureState, setting: &MeasurementSetting, d: usize) -> Result<f64> {
    joint_dim(d, state.dim())?;
    setting.validate(d)?;
    Ok(setting.ket(d).dotc(state.as_vector()).norm_sqr())
}

/// What happens to crosstalk weight at a mode with a single neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    /// The full `ε` goes to the one neighbor.
    #[default]
    Reflect,
    /// `ε/2` goes to the neighbor, `ε/2` leaves the window; the output is
    /// renormalized.
    Leak,
}

/// Kraus operators of the single-arm adjacent-mode mixing channel.
fn crosstalk_kraus(epsilon: f64, window: &ModeWindow, edge: EdgeMode) -> Vec<DMatrix<C64>> {
    let d = window.d();
    let mut ops = vec![DMatrix::<C64>::identity(d, d).scale((1.0 - epsilon).sqrt())];
    for k in 0..d {
        let l = window.label(k);
        let neighbors: Vec<usize> = [l - 1, l + 1].iter().filter_map(|&n| window.index_of(n)).collect();
        let weights: Vec<(usize, f64)> = match (neighbors.len(), edge) {
            (2, _) | (1, EdgeMode::Leak) => neighbors.iter().map(|&j| (j, epsilon / 2.0)).collect(),
            (1, EdgeMode::Reflect) => vec![(neighbors[0], epsilon)],
            // isolated label: nowhere to go
            _ => vec![(k, epsilon)],
        };
        for (j, w) in weights {
            let mut op = DMatrix::zeros(d, d);
            op[(j, k)] = C64::new(w.sqrt(), 0.0);
            ops.push(op);
        }
    }
    ops
}

/// Applies the adjacent-mode crosstalk channel independently to both arms of a
/// `d²` joint state. Each mode keeps weight `1−ε` and hands `ε/2` to each
/// neighboring OAM label.
pub fn crosstalk_channel(
    rho: &DensityMatrix,
    epsilon: f64,
    window: &ModeWindow,
    edge: EdgeMode,
) -> Result<DensityMatrix> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("crosstalk ε={epsilon} outside [0, 1)")));
    }
    let d = window.d();
    joint_dim(d, rho.dim())?;
    if epsilon == 0.0 {
        return Ok(rho.clone());
    }
    let kraus = crosstalk_kraus(epsilon, window, edge);
    let id = DMatrix::<C64>::identity(d, d);
    let mut m = rho.matrix().clone();
    for local in [true, false] {
        let mut next = DMatrix::zeros(d * d, d * d);
        for k in &kraus {
            let full = if local { k.kronecker(&id) } else { id.kronecker(k) };
            next += &full * &m * full.adjoint();
        }
        m = next;
    }
    let tr = m.trace().re;
    if tr <= 0.0 {
        return Err(Error::Degenerate("crosstalk removed all weight".into()));
    }
    DensityMatrix::new(m.unscale(tr))
}

/// Observed coincidences for one setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_id: usize,
    pub setting: MeasurementSetting,
    pub counts: u64,
    pub shots: u64,
}

impl CountRecord {
    pub fn frequency(&self) -> f64 {
        self.counts as f64 / self.shots as f64
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-setting seed: `splitmix64(seed ⊕ splitmix64(index))`.
pub fn setting_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

/// Draws `Poisson(shots·p)` coincidences for every setting.
///
/// Setting `i` uses its own ChaCha8 stream seeded with [`setting_seed`], so the
/// output depends only on `(seed, settings)` and not on evaluation order.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    d: usize,
    shots: u64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots per setting must be ≥ 1".into()));
    }
    settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = born_probability(rho, s, d)?.clamp(0.0, 1.0);
            let lambda = p * shots as f64;
            let counts = if lambda > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(setting_seed(seed, i));
                let dist = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                dist.sample(&mut rng) as u64
            } else {
                0
            };
            Ok(CountRecord {
                setting_id: i,
                setting: *s,
                counts,
                shots,
            })
        })
        .collect()
}

/// Noise-free counts `round(shots·p)`.
pub fn expected_counts(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    d: usize,
    shots: u64,
) -> Result<Vec<CountRecord>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots per setting must be ≥ 1".into()));
    }
    settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = born_probability(rho, s, d)?.clamp(0.0, 1.0);
            Ok(CountRecord {
                setting_id: i,
                setting: *s,
                counts: (p * shots as f64).round() as u64,
                shots,
            })
        })
        .collect()
}
