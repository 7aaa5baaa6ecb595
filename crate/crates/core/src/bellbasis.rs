//! d-dimensional Bell bases and the modular index arithmetic behind them.
//!
//! Two conventions are provided. [`Convention::Plus`] pairs `|k⟩_A` with
//! `|m⊕k⟩_B`; [`Convention::Minus`] pairs it with `|m⊖k⟩_B`, so every occupied
//! pair satisfies `k_A + k_B ≡ m (mod d)` and a single correlation class is
//! reachable by OAM conservation from a fixed pump. Both carry the phase
//! `exp(i·2π·n·k/d)` on index `k` of party A.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{PureState, C64};

/// `(m + k) mod d`, always in `[0, d)`.
pub fn index_add(m: i64, k: i64, d: usize) -> usize {
    assert!(d >= 2, "dimension must be at least 2");
    (m + k).rem_euclid(d as i64) as usize
}

/// `(m − k) mod d`, always in `[0, d)`.
pub fn index_sub(m: i64, k: i64, d: usize) -> usize {
    assert!(d >= 2, "dimension must be at least 2");
    (m - k).rem_euclid(d as i64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BellIndex {
    pub d: usize,
    pub m: usize,
    pub n: usize,
}

impl BellIndex {
    pub fn new(d: usize, m: usize, n: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!("dimension {d} < 2")));
        }
        if m >= d || n >= d {
            return Err(Error::InvalidArgument(format!(
                "Bell index (m={m}, n={n}) out of range for d={d}"
            )));
        }
        Ok(BellIndex { d, m, n })
    }

    /// Position in the row-major `(m, n)` ordering of [`full_basis`].
    pub fn flat(&self) -> usize {
        self.m * self.d + self.n
    }

    pub fn from_flat(d: usize, i: usize) -> Result<Self> {
        Self::new(d, i / d, i % d)
    }

    /// All `d²` indices in row-major `(m, n)` order.
    pub fn all(d: usize) -> Result<Vec<BellIndex>> {
        (0..d * d).map(|i| Self::from_flat(d, i)).collect()
    }
}

impl fmt::Display for BellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "psi_{}_{}", self.m, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Plus,
    #[default]
    Minus,
}

impl std::str::FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(Convention::Plus),
            "minus" => Ok(Convention::Minus),
            other => Err(Error::InvalidArgument(format!("unknown convention '{other}'"))),
        }
    }
}

/// Ordered physical OAM labels of the encoding: index `k` carries `ℓ = labels[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct ModeWindow {
    labels: Vec<i64>,
}

impl ModeWindow {
    pub fn new(labels: Vec<i64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidArgument("mode window needs at least 2 labels".into()));
        }
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "mode window labels not distinct: {labels:?}"
            )));
        }
        Ok(ModeWindow { labels })
    }

    /// `{−1, 0, 1, 2}`.
    pub fn default_d4() -> Self {
        ModeWindow {
            labels: vec![-1, 0, 1, 2],
        }
    }

    /// Contiguous window of `d` labels starting at `−⌊(d−1)/2⌋`; equals
    /// [`ModeWindow::default_d4`] for `d = 4`.
    pub fn centered(d: usize) -> Result<Self> {
        let start = -((d as i64 - 1) / 2);
        Self::new((0..d as i64).map(|k| start + k).collect())
    }

    pub fn d(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> i64 {
        self.labels[k]
    }

    pub fn index_of(&self, label: i64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// True when the labels are consecutive integers in ascending order.
    pub fn is_contiguous(&self) -> bool {
        self.labels.windows(2).all(|w| w[1] == w[0] + 1)
    }
}

impl TryFrom<Vec<i64>> for ModeWindow {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        ModeWindow::new(v)
    }
}

impl From<ModeWindow> for Vec<i64> {
    fn from(w: ModeWindow) -> Self {
        w.labels
    }
}

fn phase(n: usize, k: usize, d: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * ((n * k) % d) as f64 / d as f64)
}

fn bell_state(idx: BellIndex, partner: impl Fn(usize) -> usize) -> PureState {
    let d = idx.d;
    let norm = 1.0 / (d as f64).sqrt();
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    for k in 0..d {
        amps[k * d + partner(k)] = phase(idx.n, k, d) * norm;
    }
    PureState::new(amps).expect("Bell state has finite amplitudes")
}

/// `(1/√d) Σ_k e^{i2πnk/d} |k⟩_A |m⊕k⟩_B`.
pub fn bell_state_plus(idx: BellIndex) -> PureState {
    bell_state(idx, |k| index_add(idx.m as i64, k as i64, idx.d))
}

/// `(1/√d) Σ_k e^{i2πnk/d} |k⟩_A |m⊖k⟩_B`.
pub fn bell_state_minus(idx: BellIndex) -> PureState {
    bell_state(idx, |k| index_sub(idx.m as i64, k as i64, idx.d))
}

pub fn bell_state_with(idx: BellIndex, convention: Convention) -> PureState {
    match convention {
        Convention::Plus => bell_state_plus(idx),
        Convention::Minus => bell_state_minus(idx),
    }
}

/// The `d²` Bell states in row-major `(m, n)` order.
pub fn full_basis(d: usize, convention: Convention) -> Result<Vec<PureState>> {
    Ok(BellIndex::all(d)?
        .into_iter()
        .map(|idx| bell_state_with(idx, convention))
        .collect())
}

/// Occupied `(k_A, k_B)` pairs of a joint `d × d` state.
pub fn occupied_pairs(state: &PureState, d: usize, tol: f64) -> Vec<(usize, usize)> {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > tol)
        .map(|(i, _)| (i / d, i % d))
        .collect()
}
