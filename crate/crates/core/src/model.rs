//! Flux-qubit spectrum, triangle drive and reduced Hamiltonians.
//!
//! Units used throughout the crate:
//!
//! * flux detuning in milli-flux-quanta (mΦ0), measured from Φ0/2;
//! * time in nanoseconds;
//! * energies, gaps and frequencies as **angular** frequencies in rad/ns
//!   (ħ = 1). They are labelled "GHz" in reports to follow common flux-qubit
//!   usage, but a gap of "2 GHz" means an off-diagonal element of 2 rad/ns;
//! * branch slopes in rad/ns per mΦ0, sweep rates in mΦ0/ns.
//!
//! The diabatic basis is ordered `|L0⟩, |R0⟩, |R1⟩`. The left-well branch is
//! `ω1(δΦ) = −l·δΦ`; every right-well branch `j` with slope `l_j` crossing the
//! left branch at `x_j` is `ω_j(δΦ) = l_j (δΦ − x_j) − l·x_j`, so the two meet
//! at `x_j` by construction.

use nalgebra::{DMatrix, Matrix3, SMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Flux detuning δΦ = Φ_ext − Φ0/2 in mΦ0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FluxDetuning(pub f64);

impl FluxDetuning {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(invalid(format!("flux detuning must be finite, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A single triangle flux pulse: starts at `phi_i`, ramps linearly to
/// `phi_f` at `tau/2` and returns to `phi_i` at `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrianglePulse {
    phi_i: f64,
    phi_f: f64,
    tau: f64,
}

impl TrianglePulse {
    pub fn new(phi_i: f64, phi_f: f64, tau: f64) -> Result<Self> {
        if !(phi_i.is_finite() && phi_f.is_finite() && tau.is_finite()) {
            return Err(invalid("pulse parameters must be finite"));
        }
        if tau <= 0.0 {
            return Err(invalid(format!("pulse width must be positive, got {tau} ns")));
        }
        if phi_f == phi_i {
            return Err(invalid(format!(
                "degenerate pulse: final sweep value equals initial detuning ({phi_i} mΦ0)"
            )));
        }
        Ok(Self { phi_i, phi_f, tau })
    }

    pub fn phi_i(&self) -> f64 {
        self.phi_i
    }

    pub fn phi_f(&self) -> f64 {
        self.phi_f
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Sweep rate k = 2(Φ_f − Φ_i)/τ in mΦ0/ns.
    pub fn sweep_rate(&self) -> f64 {
        2.0 * (self.phi_f - self.phi_i) / self.tau
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::TimeOutOfRange { t, tau: self.tau });
        }
        Ok(())
    }

    /// Triangle offset added on top of `phi_i`: `k·t` on the rising edge and
    /// `k·(τ − t)` on the falling edge. Peaks at `Φ_f − Φ_i` when `t = τ/2`.
    pub fn signal(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.signal_unchecked(t))
    }

    pub(crate) fn signal_unchecked(&self, t: f64) -> f64 {
        if t <= 0.5 * self.tau {
            self.rising_offset(t)
        } else {
            self.falling_offset(t)
        }
    }

    #[inline]
    pub(crate) fn rising_offset(&self, t: f64) -> f64 {
        self.sweep_rate() * t
    }

    #[inline]
    pub(crate) fn falling_offset(&self, t: f64) -> f64 {
        self.sweep_rate() * (self.tau - t)
    }

    /// Instantaneous detuning δΦ(t) = Φ_i + Trgl(t).
    pub fn detuning_at(&self, t: f64) -> Result<FluxDetuning> {
        self.check_time(t)?;
        Ok(FluxDetuning(self.phi_i + self.signal_unchecked(t)))
    }

    /// Time spent beyond a crossing at `location`: the interval between the
    /// upward and downward passages.
    pub fn crossing_interval(&self, location: f64) -> Result<f64> {
        if self.phi_f <= location {
            return Err(Error::AnticrossingNotCrossed {
                phi_f: self.phi_f,
                location,
            });
        }
        if self.phi_i >= location {
            return Err(invalid(format!(
                "pulse starts at {} mΦ0, already beyond the crossing at {location} mΦ0",
                self.phi_i
            )));
        }
        Ok((self.phi_f - location) * self.tau / (self.phi_f - self.phi_i))
    }

    /// Effective width τ* = Φ_f τ/(Φ_f − Φ_i) for an anticrossing at δΦ = 0.
    pub fn effective_width(&self) -> Result<f64> {
        self.crossing_interval(0.0)
    }
}

/// An avoided crossing between the left-well branch and one right-well branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anticrossing {
    /// Flux detuning of the crossing (mΦ0).
    pub location: f64,
    /// Tunnelling coupling Δ (rad/ns).
    pub gap: f64,
    /// Slope of the right-well branch through this crossing (rad/ns per mΦ0).
    pub branch_slope: f64,
}

/// Piecewise-linear diabatic spectrum with one or two anticrossings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitSpectrum {
    left_slope: f64,
    anticrossings: Vec<Anticrossing>,
}

/// Location of the second (`|L0⟩–|R1⟩`) anticrossing in the default
/// three-level spectrum, mΦ0.
pub const DEFAULT_SECOND_CROSSING: f64 = 8.0;

impl QubitSpectrum {
    pub fn new(left_slope: f64, anticrossings: Vec<Anticrossing>) -> Result<Self> {
        if !(left_slope.is_finite() && left_slope > 0.0) {
            return Err(invalid(format!("left branch slope must be positive, got {left_slope}")));
        }
        if !(1..=2).contains(&anticrossings.len()) {
            return Err(invalid(format!(
                "expected one or two anticrossings, got {}",
                anticrossings.len()
            )));
        }
        for a in &anticrossings {
            if !(a.location.is_finite() && a.branch_slope.is_finite() && a.gap.is_finite()) {
                return Err(invalid("anticrossing parameters must be finite"));
            }
            if a.gap < 0.0 {
                return Err(invalid(format!("gap must be non-negative, got {}", a.gap)));
            }
        }
        if anticrossings.windows(2).any(|w| w[1].location <= w[0].location) {
            return Err(invalid("anticrossing locations must be strictly increasing"));
        }
        Ok(Self {
            left_slope,
            anticrossings,
        })
    }

    /// `|L0⟩, |R0⟩` with a single crossing at δΦ = 0 and symmetric slopes.
    pub fn two_level(slope: f64, gap: f64) -> Result<Self> {
        Self::new(
            slope,
            vec![Anticrossing {
                location: 0.0,
                gap,
                branch_slope: slope,
            }],
        )
    }

    /// `|L0⟩, |R0⟩, |R1⟩` with crossings at 0 and 8 mΦ0, all right-well
    /// branches sharing the left slope.
    pub fn three_level(slope: f64, gap12: f64, gap13: f64) -> Result<Self> {
        Self::new(
            slope,
            vec![
                Anticrossing {
                    location: 0.0,
                    gap: gap12,
                    branch_slope: slope,
                },
                Anticrossing {
                    location: DEFAULT_SECOND_CROSSING,
                    gap: gap13,
                    branch_slope: slope,
                },
            ],
        )
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn anticrossings(&self) -> &[Anticrossing] {
        &self.anticrossings
    }

    /// Number of diabatic levels (2 or 3).
    pub fn dim(&self) -> usize {
        self.anticrossings.len() + 1
    }

    /// Same branches with the tunnelling gaps replaced, in crossing order.
    pub fn with_gaps(&self, gaps: &[f64]) -> Result<Self> {
        if gaps.len() != self.anticrossings.len() {
            return Err(Error::DimensionMismatch {
                expected: self.anticrossings.len(),
                got: gaps.len(),
            });
        }
        let anticrossings = self
            .anticrossings
            .iter()
            .zip(gaps)
            .map(|(a, &gap)| Anticrossing { gap, ..*a })
            .collect();
        Self::new(self.left_slope, anticrossings)
    }

    /// Diagonal (diabatic) energies at `detuning`, in basis order.
    pub fn diabatic_energies(&self, detuning: f64) -> Vec<f64> {
        let l = self.left_slope;
        std::iter::once(-l * detuning)
            .chain(
                self.anticrossings
                    .iter()
                    .map(|a| a.branch_slope * (detuning - a.location) - l * a.location),
            )
            .collect()
    }

    /// Real symmetric Hamiltonian of fixed size `N`. `N` must equal `dim()`.
    #[inline]
    pub(crate) fn real_hamiltonian<const N: usize>(&self, detuning: f64) -> SMatrix<f64, N, N> {
        debug_assert_eq!(N, self.dim());
        let l = self.left_slope;
        let mut h = SMatrix::<f64, N, N>::zeros();
        h[(0, 0)] = -l * detuning;
        for (j, a) in self.anticrossings.iter().enumerate() {
            h[(j + 1, j + 1)] = a.branch_slope * (detuning - a.location) - l * a.location;
            h[(0, j + 1)] = a.gap;
            h[(j + 1, 0)] = a.gap;
        }
        h
    }

    /// Reduced Hamiltonian at the given detuning.
    pub fn hamiltonian_at(&self, detuning: FluxDetuning) -> HamiltonianMatrix {
        let n = self.dim();
        let energies = self.diabatic_energies(detuning.0);
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for (j, e) in energies.iter().enumerate() {
            m[(j, j)] = Complex64::new(*e, 0.0);
        }
        for (j, a) in self.anticrossings.iter().enumerate() {
            m[(0, j + 1)] = Complex64::new(a.gap, 0.0);
            m[(j + 1, 0)] = Complex64::new(a.gap, 0.0);
        }
        HamiltonianMatrix { elements: m }
    }

    /// Instantaneous eigenvalues, ascending.
    pub fn adiabatic_levels(&self, detuning: FluxDetuning) -> Vec<f64> {
        match self.dim() {
            2 => {
                let h = self.real_hamiltonian::<2>(detuning.0);
                let mean = 0.5 * (h[(0, 0)] + h[(1, 1)]);
                let half = 0.5 * (h[(1, 1)] - h[(0, 0)]);
                let r = half.hypot(h[(0, 1)]);
                vec![mean - r, mean + r]
            }
            _ => {
                let h: Matrix3<f64> = self.real_hamiltonian::<3>(detuning.0);
                let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                ev
            }
        }
    }
}

/// Dense Hermitian Hamiltonian in rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub elements: DMatrix<Complex64>,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    /// Largest entrywise |H − H†|.
    pub fn hermiticity_error(&self) -> f64 {
        let adj = self.elements.adjoint();
        (&self.elements - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.elements[(row, col)]
    }
}
