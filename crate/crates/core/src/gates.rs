//! Single-party gates: Dove prism, generalized Pauli-Z and cyclic Pauli-X.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bellbasis::ModeWindow;
use crate::error::{Error, Result};
use crate::hilbert::{Operator, PureState, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Party {
    #[default]
    A,
    B,
}

impl std::str::FromStr for Party {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" | "signal" => Ok(Party::A),
            "B" | "b" | "idler" => Ok(Party::B),
            other => Err(Error::InvalidArgument(format!("unknown party '{other}'"))),
        }
    }
}

/// Dove prism at rotation `alpha`: `|ℓ⟩ → exp(i·2ℓα)|ℓ⟩` on the physical labels
/// of `window`.
pub fn dove_prism(alpha: f64, window: &ModeWindow) -> Operator {
    let diag: Vec<C64> = window
        .labels()
        .iter()
        .map(|&l| C64::from_polar(1.0, 2.0 * l as f64 * alpha))
        .collect();
    Operator::diagonal(&diag)
}

/// Prism angle that imprints phase class `n` in dimension `d` on party A.
///
/// On a contiguous window this is `πn/d`. On party B the index runs backwards
/// through `m ⊖ k`, so the same class needs the angle for `−n mod d`.
pub fn dove_angle(n: usize, d: usize, party: Party) -> f64 {
    let n = match party {
        Party::A => n % d,
        Party::B => (d - n % d) % d,
    };
    PI * n as f64 / d as f64
}

/// `diag(exp(i·2π·n·k/d))`.
pub fn pauli_z(d: usize, n: usize) -> Result<Operator> {
    if d < 2 || n >= d {
        return Err(Error::InvalidArgument(format!("Pauli-Z power n={n} invalid for d={d}")));
    }
    let diag: Vec<C64> = (0..d)
        .map(|k| C64::from_polar(1.0, 2.0 * PI * ((n * k) % d) as f64 / d as f64))
        .collect();
    Ok(Operator::diagonal(&diag))
}

/// Cyclic shift `|k⟩ → |k ⊕ 1⟩`.
pub fn pauli_x(d: usize) -> Result<Operator> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("Pauli-X needs d ≥ 2, got {d}")));
    }
    let mut m = nalgebra::DMatrix::zeros(d, d);
    for k in 0..d {
        m[((k + 1) % d, k)] = C64::new(1.0, 0.0);
    }
    Operator::from_matrix(m)
}

/// Applies `g ⊗ I` (party A) or `I ⊗ g` (party B) to a `d²` joint state.
pub fn apply_local(g: &Operator, party: Party, joint: &PureState) -> Result<PureState> {
    let d = g.dim();
    if joint.dim() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: joint.dim(),
        });
    }
    let id = Operator::identity(d);
    let full = match party {
        Party::A => g.kron(&id),
        Party::B => id.kron(g),
    };
    full.apply(joint)
}

/// True iff `|⟨a|b⟩| ≥ 1 − tol`.
pub fn equal_up_to_global_phase(a: &PureState, b: &PureState, tol: f64) -> Result<bool> {
    Ok(a.inner(b)?.norm() >= 1.0 - tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellbasis::{bell_state_minus, BellIndex};
    use crate::hilbert::{c64, max_abs_diff};
    use std::f64::consts::FRAC_PI_2;

    fn psi(m: usize, n: usize) -> PureState {
        bell_state_minus(BellIndex::new(4, m, n).unwrap())
    }

    #[test]
    fn dove_prism_examples() {
        let w = ModeWindow::default_d4();
        assert!(max_abs_diff(dove_prism(0.0, &w).matrix(), Operator::identity(4).matrix()) < 1e-15);
        let dp = dove_prism(FRAC_PI_2, &w);
        let expected = Operator::diagonal(&[c64(-1.0, 0.0), c64(1.0, 0.0), c64(-1.0, 0.0), c64(1.0, 0.0)]);
        assert!(max_abs_diff(dp.matrix(), expected.matrix()) < 1e-12);
    }

    #[test]
    fn pauli_examples() {
        assert_eq!(pauli_z(4, 0).unwrap(), Operator::identity(4));
        let z = pauli_z(2, 1).unwrap();
        assert!(
            max_abs_diff(
                z.matrix(),
                Operator::diagonal(&[c64(1.0, 0.0), c64(-1.0, 0.0)]).matrix()
            ) < 1e-15
        );
        assert!(pauli_z(4, 4).is_err());

        let x = pauli_x(4).unwrap();
        assert_eq!(x.apply(&PureState::basis(4, 3)).unwrap(), PureState::basis(4, 0));
        assert_eq!(x.pow(4), Operator::identity(4));
        assert!(pauli_x(1).is_err());
    }

    #[test]
    fn z_on_a_is_exact() {
        for m in 0..4 {
            for n in 0..4 {
                let out = apply_local(&pauli_z(4, n).unwrap(), Party::A, &psi(m, 0)).unwrap();
                for (a, b) in out.amplitudes().iter().zip(psi(m, n).amplitudes()) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn x_on_b_shifts_correlation_class() {
        let x = pauli_x(4).unwrap();
        for m in 0..4u32 {
            let out = apply_local(&x.pow(m), Party::B, &psi(0, 0)).unwrap();
            assert_eq!(out, psi(m as usize, 0));
        }
    }

    #[test]
    fn dove_prism_on_either_arm() {
        let w = ModeWindow::default_d4();
        for m in 0..4 {
            for n in 0..4 {
                let on_a = apply_local(&dove_prism(dove_angle(n, 4, Party::A), &w), Party::A, &psi(m, 0)).unwrap();
                let on_b = apply_local(&dove_prism(dove_angle(n, 4, Party::B), &w), Party::B, &psi(m, 0)).unwrap();
                assert!(equal_up_to_global_phase(&on_a, &psi(m, n), 1e-12).unwrap());
                assert!(equal_up_to_global_phase(&on_b, &psi(m, n), 1e-12).unwrap());
            }
        }
        // the same physical angle on B conjugates the phase class: π/4 gives n = 3
        let on_b = apply_local(&dove_prism(PI / 4.0, &w), Party::B, &psi(1, 0)).unwrap();
        assert!(equal_up_to_global_phase(&on_b, &psi(1, 3), 1e-12).unwrap());
    }

    #[test]
    fn dove_prism_is_z_up_to_phase() {
        let w = ModeWindow::default_d4();
        for n in 0..4 {
            let dp = dove_prism(n as f64 * PI / 4.0, &w);
            let z = pauli_z(4, n)
                .unwrap()
                .scaled(C64::from_polar(1.0, -PI * n as f64 / 2.0));
            assert!(max_abs_diff(dp.matrix(), z.matrix()) < 1e-12);
        }
    }

    #[test]
    fn gates_are_unitary() {
        let w = ModeWindow::default_d4();
        for d in 2..7 {
            assert!(pauli_x(d).unwrap().is_unitary(1e-12));
            for n in 0..d {
                assert!(pauli_z(d, n).unwrap().is_unitary(1e-12));
            }
        }
        for a in [0.0, 0.3, 1.7, -2.2] {
            assert!(dove_prism(a, &w).is_unitary(1e-12));
        }
    }

    #[test]
    fn global_phase_comparison() {
        let a = psi(0, 0);
        assert!(equal_up_to_global_phase(&a, &a, 1e-12).unwrap());
        assert!(equal_up_to_global_phase(&a, &a.scaled(C64::from_polar(1.0, 0.77)), 1e-12).unwrap());
        assert!(!equal_up_to_global_phase(&a, &psi(0, 1), 1e-12).unwrap());
    }

    #[test]
    fn apply_local_dimension_checks() {
        let id = Operator::identity(4);
        assert_eq!(apply_local(&id, Party::B, &psi(2, 3)).unwrap(), psi(2, 3));
        assert!(apply_local(&id, Party::A, &PureState::basis(9, 0)).is_err());
    }
}
