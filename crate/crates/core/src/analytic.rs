//! Closed-form LZS quantities for a crossing at δΦ = 0.
//!
//! The Stückelberg phase is the dynamical phase ∫(ν1 − ν0) dt accumulated
//! between the two passages of the anticrossing. With the linear drive it
//! integrates in closed form to
//!
//! ```text
//! φ = τ* · ( √(Δ² + (lΦ_f)²) + (Δ²/(lΦ_f)) · asinh(lΦ_f/Δ) ),   τ* = Φ_f τ/(Φ_f − Φ_i)
//! ```
//!
//! which tends to `lΦ_f² τ/(Φ_f − Φ_i)` for `lΦ_f ≫ Δ` and to `lΦ_f τ` when in
//! addition `Φ_f ≫ |Φ_i|`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::TrianglePulse;

/// `lΦ_f/Δ` at or above which the large-amplitude phase is considered valid.
pub const LARGE_AMPLITUDE_RATIO: f64 = 4.0;

/// `Φ_f/|Φ_i|` at or above which the extreme-amplitude phase is considered
/// valid (in addition to the large-amplitude condition).
pub const EXTREME_AMPLITUDE_RATIO: f64 = 8.0;

/// Prefactor `c` in `P = exp(−cπΔ²/(k l))` that reproduces single-passage
/// simulations of the reduced Hamiltonian (diagonal ∓lδΦ, coupling Δ).
pub const SIMULATED_LZ_PREFACTOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    /// Accumulated phase, rad.
    pub phi: f64,
    /// `lΦ_f/Δ ≥ LARGE_AMPLITUDE_RATIO`.
    pub large_amplitude: bool,
    /// Large amplitude and `Φ_f ≥ EXTREME_AMPLITUDE_RATIO·|Φ_i|`.
    pub extreme_amplitude: bool,
}

fn check_crossed(pulse: &TrianglePulse) -> Result<()> {
    if pulse.phi_f() <= 0.0 {
        return Err(Error::AnticrossingNotCrossed {
            phi_f: pulse.phi_f(),
            location: 0.0,
        });
    }
    if pulse.phi_i() >= 0.0 {
        return Err(invalid(format!(
            "pulse must start below the crossing, got Φ_i = {} mΦ0",
            pulse.phi_i()
        )));
    }
    Ok(())
}

/// Stückelberg phase of the double passage through a crossing at δΦ = 0.
pub fn stueckelberg_phase(slope: f64, gap: f64, pulse: &TrianglePulse) -> Result<PhaseResult> {
    check_crossed(pulse)?;
    if !(slope > 0.0) || !(gap >= 0.0) {
        return Err(invalid("slope must be positive and gap non-negative"));
    }
    let tau_star = pulse.effective_width()?;
    let omega_max = slope * pulse.phi_f();
    let log_term = if gap == 0.0 {
        0.0
    } else {
        gap * gap / omega_max * (omega_max / gap).asinh()
    };
    let phi = tau_star * (gap.hypot(omega_max) + log_term);
    let large = gap == 0.0 || omega_max / gap >= LARGE_AMPLITUDE_RATIO;
    Ok(PhaseResult {
        phi,
        large_amplitude: large,
        extreme_amplitude: large
            && pulse.phi_f() >= EXTREME_AMPLITUDE_RATIO * pulse.phi_i().abs(),
    })
}

/// Large-amplitude phase `lΦ_f² τ/(Φ_f − Φ_i)`.
pub fn phase_large_amplitude(slope: f64, pulse: &TrianglePulse) -> f64 {
    let pf = pulse.phi_f();
    slope * pf * pf * pulse.tau() / (pf - pulse.phi_i())
}

/// Extreme-amplitude phase `lΦ_f τ`.
pub fn phase_extreme_amplitude(slope: f64, pulse: &TrianglePulse) -> f64 {
    slope * pulse.phi_f() * pulse.tau()
}

/// Return population `(1 + cos φ)/2` on `|L0⟩`.
pub fn population_from_phase(phi: f64) -> f64 {
    0.5 * (1.0 + phi.cos())
}

/// Landau-Zener diabatic passage probability `exp(−2πΔ²/(k l))`.
pub fn lz_probability(gap: f64, slope: f64, sweep_rate: f64) -> f64 {
    lz_probability_with_prefactor(gap, slope, sweep_rate, 2.0)
}

/// `exp(−cπΔ²/(k l))` for an arbitrary prefactor `c`.
pub fn lz_probability_with_prefactor(gap: f64, slope: f64, sweep_rate: f64, c: f64) -> f64 {
    if gap == 0.0 {
        return 1.0;
    }
    (-c * PI * gap * gap / (sweep_rate.abs() * slope)).exp()
}

/// Sweep rate `2πΔ²/l` at which the LZ exponent reaches one.
pub fn characteristic_sweep_rate(gap: f64, slope: f64) -> f64 {
    2.0 * PI * gap * gap / slope
}

/// dφ/dτ at fixed `Φ_f`: the angular frequency of the fringes along τ.
pub fn fringe_frequency(slope: f64, gap: f64, phi_i: f64, phi_f: f64) -> Result<f64> {
    let pulse = TrianglePulse::new(phi_i, phi_f, 1.0)?;
    Ok(stueckelberg_phase(slope, gap, &pulse)?.phi)
}

/// Large-amplitude fringe frequency `lΦ_f²/(Φ_f − Φ_i)`.
pub fn fringe_frequency_large_amplitude(slope: f64, phi_i: f64, phi_f: f64) -> f64 {
    slope * phi_f * phi_f / (phi_f - phi_i)
}
