//! Biphoton states from an OAM-superposed pump.
//!
//! A pump `Σ_L C_L |L⟩_p` down-converts into `Σ_L C_L Σ_ℓ c_ℓ |ℓ⟩_s |L−ℓ⟩_i`.
//! Choosing which `L` appear selects which `(ℓ_s, ℓ_i)` pairs are populated, and
//! for a contiguous window each correlation class `m` of the minus-convention
//! Bell basis is reached by at most two pump terms. Unequal `c_ℓ` are handled in
//! two stages: `C_L` equalizes the pump groups against each other, then a
//! Procrustean filter attenuates the remaining within-group imbalance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bellbasis::{bell_state_minus, index_sub, BellIndex, ModeWindow};
use crate::error::{Error, Result};
use crate::hilbert::{PureState, C64};

/// Normalization tolerance on pump amplitudes.
pub const PUMP_NORM_TOL: f64 = 1e-12;
/// Amplitudes below this fraction of the largest one count as unoccupied.
pub const OCCUPIED_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpTerm {
    /// Pump OAM quantum number `L_p`.
    pub l: i64,
    pub amplitude: C64,
}

/// Pump OAM superposition with distinct `L_p` and unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PumpTerm>", into = "Vec<PumpTerm>")]
pub struct PumpSpec {
    terms: Vec<PumpTerm>,
}

impl PumpSpec {
    pub fn new(terms: Vec<PumpTerm>) -> Result<Self> {
        Self::check_distinct(&terms)?;
        let norm: f64 = terms.iter().map(|t| t.amplitude.norm_sqr()).sum();
        if (norm - 1.0).abs() > PUMP_NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "pump amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(PumpSpec { terms })
    }

    /// Rescales the amplitudes to unit norm.
    pub fn normalized(mut terms: Vec<PumpTerm>) -> Result<Self> {
        Self::check_distinct(&terms)?;
        let norm: f64 = terms.iter().map(|t| t.amplitude.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("pump has no weight".into()));
        }
        for t in &mut terms {
            t.amplitude /= norm;
        }
        Ok(PumpSpec { terms })
    }

    fn check_distinct(terms: &[PumpTerm]) -> Result<()> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("pump needs at least one term".into()));
        }
        let mut ls: Vec<i64> = terms.iter().map(|t| t.l).collect();
        ls.sort_unstable();
        if ls.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate pump OAM values in {ls:?}")));
        }
        Ok(())
    }

    pub fn terms(&self) -> &[PumpTerm] {
        &self.terms
    }

    /// Multiplies each term by `exp(iφ_L)`; terms absent from `phases` keep phase 0.
    pub fn with_phases(&self, phases: &BTreeMap<i64, f64>) -> PumpSpec {
        let terms = self
            .terms
            .iter()
            .map(|t| PumpTerm {
                l: t.l,
                amplitude: t.amplitude * C64::from_polar(1.0, phases.get(&t.l).copied().unwrap_or(0.0)),
            })
            .collect();
        PumpSpec { terms }
    }
}

impl TryFrom<Vec<PumpTerm>> for PumpSpec {
    type Error = Error;
    fn try_from(v: Vec<PumpTerm>) -> Result<Self> {
        PumpSpec::new(v)
    }
}

impl From<PumpSpec> for Vec<PumpTerm> {
    fn from(p: PumpSpec) -> Self {
        p.terms
    }
}

/// Signal-mode amplitude profile `c_ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SchmidtProfile {
    Flat,
    /// `c_ℓ ∝ exp(−ℓ²/(2σ²))`.
    Gaussian {
        sigma: f64,
    },
    /// Explicit values; labels not listed have `c_ℓ = 0`.
    Custom {
        values: BTreeMap<i64, f64>,
    },
}

impl SchmidtProfile {
    pub fn amplitude(&self, ell: i64) -> f64 {
        match self {
            SchmidtProfile::Flat => 1.0,
            SchmidtProfile::Gaussian { sigma } => (-(ell as f64).powi(2) / (2.0 * sigma * sigma)).exp(),
            SchmidtProfile::Custom { values } => values.get(&ell).copied().unwrap_or(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SchmidtProfile::Flat => Ok(()),
            SchmidtProfile::Gaussian { sigma } if sigma.is_finite() && *sigma > 0.0 => Ok(()),
            SchmidtProfile::Gaussian { sigma } => Err(Error::InvalidArgument(format!(
                "Gaussian width must be positive, got {sigma}"
            ))),
            SchmidtProfile::Custom { values } => {
                if values.values().all(|c| c.is_finite() && *c >= 0.0) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(
                        "custom c_ℓ must be finite and non-negative".into(),
                    ))
                }
            }
        }
    }
}

/// Encoding window, the signal OAM range considered, and the `c_ℓ` profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdcModel {
    window: ModeWindow,
    ell_min: i64,
    ell_max: i64,
    profile: SchmidtProfile,
}

impl SpdcModel {
    pub const DEFAULT_ELL_RANGE: (i64, i64) = (-5, 5);

    pub fn new(window: ModeWindow, ell_range: (i64, i64), profile: SchmidtProfile) -> Result<Self> {
        let (lo, hi) = ell_range;
        if lo > hi {
            return Err(Error::InvalidArgument(format!("empty OAM range {lo}..={hi}")));
        }
        if window.labels().iter().any(|&l| l < lo || l > hi) {
            return Err(Error::InvalidArgument(format!(
                "OAM range {lo}..={hi} does not cover window {:?}",
                window.labels()
            )));
        }
        profile.validate()?;
        Ok(SpdcModel {
            window,
            ell_min: lo,
            ell_max: hi,
            profile,
        })
    }

    /// Flat `c_ℓ` on the `{−1, 0, 1, 2}` window over `ℓ ∈ −5..=5`.
    pub fn flat_d4() -> Self {
        Self::new(ModeWindow::default_d4(), Self::DEFAULT_ELL_RANGE, SchmidtProfile::Flat)
            .expect("default model is valid")
    }

    pub fn gaussian_d4(sigma: f64) -> Result<Self> {
        Self::new(
            ModeWindow::default_d4(),
            Self::DEFAULT_ELL_RANGE,
            SchmidtProfile::Gaussian { sigma },
        )
    }

    pub fn window(&self) -> &ModeWindow {
        &self.window
    }

    pub fn d(&self) -> usize {
        self.window.d()
    }

    pub fn ell_range(&self) -> (i64, i64) {
        (self.ell_min, self.ell_max)
    }

    pub fn profile(&self) -> &SchmidtProfile {
        &self.profile
    }

    pub fn schmidt_amplitude(&self, ell: i64) -> f64 {
        self.profile.amplitude(ell)
    }

    /// Number of OAM values in the range.
    pub fn range_len(&self) -> usize {
        (self.ell_max - self.ell_min + 1) as usize
    }

    fn range_index(&self, ell: i64) -> Option<usize> {
        (self.ell_min..=self.ell_max)
            .contains(&ell)
            .then(|| (ell - self.ell_min) as usize)
    }

    /// Joint index of `|ℓ_s⟩|ℓ_i⟩` in an [`spdc_state`] output.
    pub fn joint_index(&self, ell_s: i64, ell_i: i64) -> Option<usize> {
        Some(self.range_index(ell_s)? * self.range_len() + self.range_index(ell_i)?)
    }

    /// Inverse of [`SpdcModel::joint_index`].
    pub fn joint_labels(&self, index: usize) -> (i64, i64) {
        let n = self.range_len();
        (self.ell_min + (index / n) as i64, self.ell_min + (index % n) as i64)
    }
}

/// Down-converted state over the model's full OAM range squared.
///
/// Amplitude of `|ℓ⟩_s|L−ℓ⟩_i` is `Σ_L C_L·c_ℓ`; pairs whose idler falls outside
/// the range are dropped before normalization.
pub fn spdc_state(pump: &PumpSpec, model: &SpdcModel) -> Result<PureState> {
    let n = model.range_len();
    let mut amps = vec![C64::new(0.0, 0.0); n * n];
    for term in pump.terms() {
        for ell in model.ell_min..=model.ell_max {
            if let Some(idx) = model.joint_index(ell, term.l - ell) {
                amps[idx] += term.amplitude * model.schmidt_amplitude(ell);
            }
        }
    }
    let state = PureState::new(amps)?;
    if state.norm_sqr() == 0.0 {
        return Err(Error::EmptyState("pump and mode model produce no pairs".into()));
    }
    PureState::normalized(state.amplitudes().to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Restricted {
    /// Normalized `d²` state on the window, A-major in window index.
    pub state: PureState,
    /// Probability mass with at least one photon outside the window.
    pub discarded: f64,
}

/// Post-selects both photons onto the encoding window and renormalizes.
pub fn restrict_to_window(joint: &PureState, model: &SpdcModel) -> Result<Restricted> {
    let n = model.range_len();
    if joint.dim() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: joint.dim(),
        });
    }
    let w = model.window();
    let d = w.d();
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    for (ka, &la) in w.labels().iter().enumerate() {
        for (kb, &lb) in w.labels().iter().enumerate() {
            let src = model.joint_index(la, lb).expect("window inside OAM range");
            amps[ka * d + kb] = joint.amplitudes()[src];
        }
    }
    let total = joint.norm_sqr();
    let state = PureState::new(amps)?;
    let kept = state.norm_sqr();
    if kept == 0.0 {
        return Err(Error::EmptyState("no probability inside the mode window".into()));
    }
    Ok(Restricted {
        state: PureState::normalized(state.amplitudes().to_vec())?,
        discarded: 1.0 - kept / total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub state: PureState,
    /// Surviving probability `‖filtered‖² / ‖input‖²` before renormalization.
    pub efficiency: f64,
}

fn occupied(joint: &PureState) -> Vec<usize> {
    let max = joint.amplitudes().iter().map(|a| a.norm()).fold(0.0, f64::max);
    joint
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| max > 0.0 && a.norm() > OCCUPIED_REL_TOL * max)
        .map(|(i, _)| i)
        .collect()
}

fn attenuate(joint: &PureState, keep: &[usize]) -> Result<Filtered> {
    let amps = joint.amplitudes();
    let floor = keep.iter().map(|&i| amps[i].norm()).fold(f64::INFINITY, f64::min);
    if floor == 0.0 {
        return Err(Error::EmptyState(
            "a target pair has zero amplitude and cannot be equalized".into(),
        ));
    }
    let mut out = vec![C64::new(0.0, 0.0); amps.len()];
    for &i in keep {
        out[i] = amps[i] * (floor / amps[i].norm());
    }
    let before = joint.norm_sqr();
    let after: f64 = out.iter().map(|a| a.norm_sqr()).sum();
    Ok(Filtered {
        state: PureState::normalized(out)?,
        efficiency: after / before,
    })
}

fn check_schmidt_form(pairs: &[usize], d: usize) -> Result<()> {
    let mut signals: Vec<usize> = pairs.iter().map(|i| i / d).collect();
    signals.sort_unstable();
    if signals.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(
            "more than one occupied pair shares a signal mode".into(),
        ));
    }
    Ok(())
}

/// Attenuates every occupied amplitude of a windowed `d²` state down to the
/// smallest occupied magnitude, keeping phases.
pub fn procrustean_filter(joint: &PureState, d: usize) -> Result<Filtered> {
    if joint.dim() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: joint.dim(),
        });
    }
    let pairs = occupied(joint);
    if pairs.is_empty() {
        return Err(Error::EmptyState("nothing to filter".into()));
    }
    check_schmidt_form(&pairs, d)?;
    attenuate(joint, &pairs)
}

/// Like [`procrustean_filter`] but equalizes onto a prescribed set of joint
/// indices. Fails if a target is empty or weight sits outside the targets.
pub fn procrustean_filter_onto(joint: &PureState, d: usize, targets: &[usize]) -> Result<Filtered> {
    if joint.dim() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: joint.dim(),
        });
    }
    check_schmidt_form(targets, d)?;
    if let Some(stray) = occupied(joint).into_iter().find(|i| !targets.contains(i)) {
        return Err(Error::InvalidArgument(format!(
            "occupied pair ({}, {}) is outside the target set",
            stray / d,
            stray % d
        )));
    }
    attenuate(joint, targets)
}

/// Window pairs `(k_A, k_B)` of `|ψ_{m,0}⟩` grouped by the pump OAM `L = ℓ_A + ℓ_B`
/// that populates them.
fn pump_groups(m: usize, window: &ModeWindow) -> BTreeMap<i64, Vec<(usize, usize)>> {
    let d = window.d();
    let mut groups: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
    for ka in 0..d {
        let kb = index_sub(m as i64, ka as i64, d);
        groups
            .entry(window.label(ka) + window.label(kb))
            .or_default()
            .push((ka, kb));
    }
    groups
}

/// Pump superposition whose windowed output occupies exactly the pairs of
/// `|ψ_{m,0}⟩`.
///
/// With `C_L ∝ 1 / min_{ℓ ∈ group L} c_ℓ` the weakest pair of every group ends
/// up at the same amplitude, so the filter only trims within groups.
pub fn pump_recipe(m: usize, model: &SpdcModel) -> Result<PumpSpec> {
    let w = model.window();
    let d = w.d();
    if m >= d {
        return Err(Error::InvalidArgument(format!(
            "correlation class m={m} out of range for d={d}"
        )));
    }
    let groups = pump_groups(m, w);
    let mut terms = Vec::with_capacity(groups.len());
    for (&l, pairs) in &groups {
        // every window pair conserving L must belong to the target
        for (ka, &la) in w.labels().iter().enumerate() {
            if let Some(kb) = w.index_of(l - la) {
                if !pairs.contains(&(ka, kb)) {
                    return Err(Error::InvalidArgument(format!(
                        "window {:?} cannot isolate class m={m}: pump L={l} also populates ({la}, {})",
                        w.labels(),
                        l - la
                    )));
                }
            }
        }
        let weakest = pairs
            .iter()
            .map(|&(ka, _)| model.schmidt_amplitude(w.label(ka)))
            .fold(f64::INFINITY, f64::min);
        if weakest <= 0.0 {
            return Err(Error::EmptyState(format!(
                "pump group L={l} contains a mode with c_ℓ = 0"
            )));
        }
        terms.push(PumpTerm {
            l,
            amplitude: C64::new(1.0 / weakest, 0.0),
        });
    }
    PumpSpec::normalized(terms)
}

/// Output of the pump → SPDC → window → filter chain for one correlation class.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    pub index: BellIndex,
    pub pump: PumpSpec,
    pub state: PureState,
    /// Probability discarded by post-selection onto the window.
    pub discarded: f64,
    pub filter_efficiency: f64,
}

/// Prepares `|ψ_{m,0}⟩` from a pump recipe.
pub fn group_state(m: usize, model: &SpdcModel) -> Result<GroupState> {
    let pump = pump_recipe(m, model)?;
    group_state_with_pump(m, pump, model)
}

/// Runs the preparation chain for a given pump, equalizing onto the pairs of
/// `|ψ_{m,0}⟩`.
pub fn group_state_with_pump(m: usize, pump: PumpSpec, model: &SpdcModel) -> Result<GroupState> {
    let d = model.d();
    let index = BellIndex::new(d, m, 0)?;
    let joint = spdc_state(&pump, model)?;
    let restricted = restrict_to_window(&joint, model)?;
    let targets: Vec<usize> = (0..d).map(|ka| ka * d + index_sub(m as i64, ka as i64, d)).collect();
    let filtered = procrustean_filter_onto(&restricted.state, d, &targets)?;
    Ok(GroupState {
        index,
        pump,
        state: filtered.state,
        discarded: restricted.discarded,
        filter_efficiency: filtered.efficiency,
    })
}

/// Ideal target for [`group_state`].
pub fn group_target(m: usize, d: usize) -> Result<PureState> {
    Ok(bell_state_minus(BellIndex::new(d, m, 0)?))
}
