//! Coherent density-matrix propagation over one triangle pulse.
//!
//! Integrates dρ/dt = −i[H(δΦ(t)), ρ] from 0 to τ. The drive has a slope
//! discontinuity at the apex, so every integration is split into the rising
//! and falling segments and neither stepper ever steps across t = τ/2.
//! No dissipation is modelled: the evolution is unitary, which makes trace,
//! hermiticity and purity exact conserved quantities that the tests use to
//! judge integrator quality.

use nalgebra::{DMatrix, SMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{HamiltonianMatrix, QubitSpectrum, TrianglePulse};

/// Tolerance for trace, hermiticity and positivity checks on states.
pub const STATE_TOLERANCE: f64 = 1e-8;

const MAX_STEPS: usize = 50_000_000;

/// Density matrix of a 2- or 3-level system in the diabatic basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps `elements` after checking shape, trace, hermiticity and
    /// positivity to within [`STATE_TOLERANCE`].
    pub fn from_elements(elements: DMatrix<Complex64>) -> Result<Self> {
        let n = elements.nrows();
        if n != elements.ncols() {
            return Err(invalid("density matrix must be square"));
        }
        if !(2..=3).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        let rho = Self { elements };
        let trace_err = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
        if trace_err > STATE_TOLERANCE {
            return Err(invalid(format!("trace deviates from 1 by {trace_err:e}")));
        }
        let herm = rho.hermiticity_error();
        if herm > STATE_TOLERANCE {
            return Err(invalid(format!("matrix is not Hermitian (error {herm:e})")));
        }
        let min_ev = rho.min_eigenvalue();
        if min_ev < -STATE_TOLERANCE {
            return Err(invalid(format!("matrix is not positive (eigenvalue {min_ev:e})")));
        }
        Ok(rho)
    }

    pub(crate) fn from_elements_unchecked(elements: DMatrix<Complex64>) -> Self {
        Self { elements }
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    /// Population W_ii (zero-based level index).
    pub fn population(&self, level: usize) -> f64 {
        self.elements[(level, level)].re
    }

    /// Coherence W_ij (zero-based).
    pub fn coherence(&self, row: usize, col: usize) -> Complex64 {
        self.elements[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.elements.trace()
    }

    /// Tr ρ², equal to 1 for pure states.
    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ_ij ρ_ij ρ_ji
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.elements[(i, j)] * self.elements[(j, i)];
            }
        }
        acc.re
    }

    /// Largest entrywise |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = self.elements[(i, j)] - self.elements[(j, i)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.elements + self.elements.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn to_fixed<const N: usize>(&self) -> SMatrix<Complex64, N, N> {
        SMatrix::<Complex64, N, N>::from_fn(|i, j| self.elements[(i, j)])
    }

    fn from_fixed<const N: usize>(m: &SMatrix<Complex64, N, N>) -> Self {
        Self::from_elements_unchecked(DMatrix::from_fn(N, N, |i, j| m[(i, j)]))
    }
}

/// Pure state on `|L0⟩`: diag(1, 0, …).
pub fn initial_state(dim: usize) -> Result<DensityMatrix> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    m[(0, 0)] = Complex64::new(1.0, 0.0);
    Ok(DensityMatrix::from_elements_unchecked(m))
}

/// Right-hand side of the coherent Liouville equation, −i[H, ρ].
pub fn liouville_rhs(h: &HamiltonianMatrix, rho: &DensityMatrix) -> Result<DMatrix<Complex64>> {
    if h.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: rho.dim(),
        });
    }
    let comm = &h.elements * rho.elements() - rho.elements() * &h.elements;
    Ok(comm * Complex64::new(0.0, -1.0))
}

#[inline]
fn commutator_rhs<const N: usize>(
    h: &SMatrix<f64, N, N>,
    rho: &SMatrix<Complex64, N, N>,
) -> SMatrix<Complex64, N, N> {
    // −i(Hρ − ρH) with real H, written out to avoid promoting H to complex
    let mut out = SMatrix::<Complex64, N, N>::zeros();
    for i in 0..N {
        for j in 0..N {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..N {
                acc += rho[(m, j)] * h[(i, m)] - rho[(i, m)] * h[(m, j)];
            }
            out[(i, j)] = Complex64::new(acc.im, -acc.re);
        }
    }
    out
}

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// Classical RK4 with a uniform step no larger than `step` (ns) on each
    /// half of the pulse.
    FixedRk4 { step: f64 },
    /// Dormand–Prince 5(4) embedded pair with error-per-step control.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the adaptive step, ns.
    pub max_step: f64,
    /// First trial step of each segment, ns.
    pub initial_step: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            method: Method::Adaptive,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 0.1,
            initial_step: 1e-3,
        }
    }
}

impl StepperConfig {
    pub fn fixed_rk4(step: f64) -> Self {
        Self {
            method: Method::FixedRk4 { step },
            ..Self::default()
        }
    }

    /// Same configuration with both tolerances scaled by `factor`.
    pub fn scaled_tolerances(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err(invalid("tolerances must be positive"));
        }
        if !positive(self.max_step) || !positive(self.initial_step) {
            return Err(invalid("step sizes must be positive"));
        }
        if let Method::FixedRk4 { step } = self.method {
            if !positive(step) {
                return Err(invalid("fixed step must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub final_state: DensityMatrix,
    /// Accepted steps, including t = 0, t = τ/2 and t = τ; only filled by
    /// [`evolve_traced`].
    pub trajectory: Option<Vec<TrajectoryPoint>>,
    pub step_count: usize,
    pub rejected_steps: usize,
    pub rhs_eval_count: usize,
    /// Largest |Tr ρ − 1| seen at any accepted step.
    pub max_trace_deviation: f64,
}

/// Propagates `rho0` through the full pulse.
pub fn evolve(
    spectrum: &QubitSpectrum,
    pulse: &TrianglePulse,
    config: &StepperConfig,
    rho0: &DensityMatrix,
) -> Result<EvolutionResult> {
    run(spectrum, pulse, config, rho0, false)
}

/// Like [`evolve`], additionally recording every accepted step. Stepping is
/// identical, so the final state matches [`evolve`] bit for bit.
pub fn evolve_traced(
    spectrum: &QubitSpectrum,
    pulse: &TrianglePulse,
    config: &StepperConfig,
    rho0: &DensityMatrix,
) -> Result<EvolutionResult> {
    run(spectrum, pulse, config, rho0, true)
}

fn run(
    spectrum: &QubitSpectrum,
    pulse: &TrianglePulse,
    config: &StepperConfig,
    rho0: &DensityMatrix,
    record: bool,
) -> Result<EvolutionResult> {
    config.validate()?;
    if rho0.dim() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            got: rho0.dim(),
        });
    }
    DensityMatrix::from_elements(rho0.elements().clone())?;
    match spectrum.dim() {
        2 => Integrator::<2>::new(spectrum, pulse, config, record).run(rho0),
        3 => Integrator::<3>::new(spectrum, pulse, config, record).run(rho0),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

type State<const N: usize> = SMatrix<Complex64, N, N>;

/// `base + h · Σ c_i k_i`.
#[inline]
fn step_from<const N: usize>(base: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *base;
    for (c, k) in terms {
        let w = c * h;
        for (o, v) in out.iter_mut().zip(k.iter()) {
            o.re += w * v.re;
            o.im += w * v.im;
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Edge {
    Rising,
    Falling,
}

struct Integrator<'a, const N: usize> {
    spectrum: &'a QubitSpectrum,
    pulse: &'a TrianglePulse,
    config: &'a StepperConfig,
    trajectory: Option<Vec<TrajectoryPoint>>,
    steps: usize,
    rejected: usize,
    rhs_evals: usize,
    max_trace_dev: f64,
}

// Dormand–Prince 5(4) tableau.
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b* (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

impl<'a, const N: usize> Integrator<'a, N> {
    fn new(
        spectrum: &'a QubitSpectrum,
        pulse: &'a TrianglePulse,
        config: &'a StepperConfig,
        record: bool,
    ) -> Self {
        Self {
            spectrum,
            pulse,
            config,
            trajectory: record.then(Vec::new),
            steps: 0,
            rejected: 0,
            rhs_evals: 0,
            max_trace_dev: 0.0,
        }
    }

    #[inline]
    fn rhs(&mut self, edge: Edge, t: f64, rho: &State<N>) -> State<N> {
        self.rhs_evals += 1;
        let offset = match edge {
            Edge::Rising => self.pulse.rising_offset(t),
            Edge::Falling => self.pulse.falling_offset(t),
        };
        let h = self
            .spectrum
            .real_hamiltonian::<N>(self.pulse.phi_i() + offset);
        commutator_rhs(&h, rho)
    }

    fn accept(&mut self, t: f64, rho: &State<N>) {
        let dev = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
        self.max_trace_dev = self.max_trace_dev.max(dev);
        if let Some(traj) = self.trajectory.as_mut() {
            traj.push(TrajectoryPoint {
                t,
                state: DensityMatrix::from_fixed(rho),
            });
        }
    }

    fn run(mut self, rho0: &DensityMatrix) -> Result<EvolutionResult> {
        let tau = self.pulse.tau();
        let apex = 0.5 * tau;
        let mut rho = rho0.to_fixed::<N>();
        self.accept(0.0, &rho);
        match self.config.method {
            Method::FixedRk4 { step } => {
                rho = self.rk4_segment(Edge::Rising, 0.0, apex, step, rho);
                rho = self.rk4_segment(Edge::Falling, apex, tau, step, rho);
            }
            Method::Adaptive => {
                let h0 = self.config.initial_step;
                let (r, h) = self.dopri_segment(Edge::Rising, 0.0, apex, h0, rho)?;
                let (r, _) = self.dopri_segment(Edge::Falling, apex, tau, h, r)?;
                rho = r;
            }
        }
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::IntegrationFailure {
                t: tau,
                reason: "non-finite state".into(),
            });
        }
        Ok(EvolutionResult {
            final_state: DensityMatrix::from_fixed(&rho),
            trajectory: self.trajectory,
            step_count: self.steps,
            rejected_steps: self.rejected,
            rhs_eval_count: self.rhs_evals,
            max_trace_deviation: self.max_trace_dev,
        })
    }

    fn rk4_segment(
        &mut self,
        edge: Edge,
        t0: f64,
        t1: f64,
        step: f64,
        mut rho: State<N>,
    ) -> State<N> {
        let span = t1 - t0;
        let n = (span / step - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for i in 0..n {
            let t = t0 + i as f64 * h;
            let k1 = self.rhs(edge, t, &rho);
            let k2 = self.rhs(edge, t + 0.5 * h, &step_from(&rho, 0.5 * h, &[(1.0, &k1)]));
            let k3 = self.rhs(edge, t + 0.5 * h, &step_from(&rho, 0.5 * h, &[(1.0, &k2)]));
            let k4 = self.rhs(edge, t + h, &step_from(&rho, h, &[(1.0, &k3)]));
            rho = step_from(&rho, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
            self.steps += 1;
            let t_next = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
            self.accept(t_next, &rho);
        }
        rho
    }

    fn error_norm(&self, err: &State<N>, y0: &State<N>, y1: &State<N>) -> f64 {
        let (rtol, atol) = (self.config.rel_tol, self.config.abs_tol);
        let mut worst: f64 = 0.0;
        for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
            let scale = atol + rtol * a.norm().max(b.norm());
            worst = worst.max(e.norm() / scale);
        }
        worst
    }

    /// Integrates one smooth segment; returns the state at `t1` and the step
    /// size proposed for whatever follows.
    fn dopri_segment(
        &mut self,
        edge: Edge,
        t0: f64,
        t1: f64,
        h_init: f64,
        mut y: State<N>,
    ) -> Result<(State<N>, f64)> {
        let span = t1 - t0;
        let max_step = self.config.max_step;
        let mut h = h_init.min(max_step).min(span);
        let mut t = t0;
        let mut k1 = self.rhs(edge, t, &y);
        let h_min = 16.0 * f64::EPSILON * t1.abs().max(span);
        loop {
            if self.steps + self.rejected >= MAX_STEPS {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("step budget of {MAX_STEPS} exhausted"),
                });
            }
            let remaining = t1 - t;
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let k2 = self.rhs(edge, t + C2 * h, &step_from(&y, h, &[(A21, &k1)]));
            let k3 = self.rhs(edge, t + C3 * h, &step_from(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = self.rhs(
                edge,
                t + C4 * h,
                &step_from(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = self.rhs(
                edge,
                t + C5 * h,
                &step_from(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = self.rhs(
                edge,
                t + h,
                &step_from(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = step_from(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let t_new = if last { t1 } else { t + h };
            let k7 = self.rhs(edge, t_new, &y_new);
            let err = step_from(
                &State::<N>::zeros(),
                h,
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            );
            let norm = self.error_norm(&err, &y, &y_new);
            if !norm.is_finite() {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if norm <= 1.0 {
                self.steps += 1;
                t = t_new;
                y = y_new;
                k1 = k7;
                self.accept(t, &y);
                let proposal = (h * factor).min(max_step);
                if last {
                    return Ok((y, proposal));
                }
                h = proposal;
            } else {
                self.rejected += 1;
                h *= factor.min(1.0);
                if h < h_min {
                    return Err(Error::IntegrationFailure {
                        t,
                        reason: format!("step size underflow (h = {h:e} ns)"),
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FluxDetuning;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn initial_state_examples() {
        let r = initial_state(2).unwrap();
        assert_eq!(r.population(0), 1.0);
        assert_eq!(r.population(1), 0.0);
        assert_eq!(r.coherence(0, 1), c(0.0, 0.0));
        let r3 = initial_state(3).unwrap();
        assert_eq!(r3.dim(), 3);
        assert_eq!(r3.trace(), c(1.0, 0.0));
        assert!(initial_state(4).is_err());
        assert!(initial_state(1).is_err());
    }

    #[test]
    fn rhs_of_commuting_operators_vanishes() {
        let s = QubitSpectrum::two_level(2.0, 0.0).unwrap();
        let h = s.hamiltonian_at(FluxDetuning(1.3));
        let rho = DensityMatrix::from_elements(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.7, 0.0)],
        ))
        .unwrap();
        let d = liouville_rhs(&h, &rho).unwrap();
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rhs_direct_commutator() {
        let delta = 2.0;
        let s = QubitSpectrum::two_level(1.0, delta).unwrap();
        let h = s.hamiltonian_at(FluxDetuning(0.0));
        let rho = initial_state(2).unwrap();
        let d = liouville_rhs(&h, &rho).unwrap();
        // [H, ρ] = [[0, −Δ], [Δ, 0]], times −i
        assert_eq!(d[(0, 0)], c(0.0, 0.0));
        assert_eq!(d[(1, 1)], c(0.0, 0.0));
        assert_eq!(d[(0, 1)], c(0.0, delta));
        assert_eq!(d[(1, 0)], c(0.0, -delta));
    }

    #[test]
    fn fixed_rhs_matches_dense_rhs() {
        let s = QubitSpectrum::three_level(1.7, 0.6, 2.3).unwrap();
        let det = 3.1;
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.5, 0.0),
                c(0.1, 0.2),
                c(0.05, -0.1),
                c(0.1, -0.2),
                c(0.3, 0.0),
                c(0.0, 0.04),
                c(0.05, 0.1),
                c(0.0, -0.04),
                c(0.2, 0.0),
            ],
        );
        let rho = DensityMatrix::from_elements_unchecked(m);
        let dense = liouville_rhs(&s.hamiltonian_at(FluxDetuning(det)), &rho).unwrap();
        let fixed = commutator_rhs(&s.real_hamiltonian::<3>(det), &rho.to_fixed::<3>());
        for i in 0..3 {
            for j in 0..3 {
                assert!((dense[(i, j)] - fixed[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rhs_rejects_dimension_mismatch() {
        let s = QubitSpectrum::three_level(2.0, 1.0, 1.0).unwrap();
        let h = s.hamiltonian_at(FluxDetuning(0.0));
        assert!(matches!(
            liouville_rhs(&h, &initial_state(2).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_gap_never_mixes() {
        let s = QubitSpectrum::two_level(2.0, 0.0).unwrap();
        let p = TrianglePulse::new(-5.0, 8.0, 1.3).unwrap();
        let rho0 = initial_state(2).unwrap();
        let r = evolve(&s, &p, &StepperConfig::default(), &rho0).unwrap();
        assert_relative_eq!(r.final_state.population(0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn static_rabi_oscillation() {
        // constant H = [[0, Δ], [Δ, 0]]: zero slope on both branches keeps
        // the diagonal at zero for every detuning
        let delta = 2.0;
        let s = QubitSpectrum::new(
            1e-300,
            vec![crate::model::Anticrossing {
                location: 0.0,
                gap: delta,
                branch_slope: 0.0,
            }],
        )
        .unwrap();
        let t_end = std::f64::consts::FRAC_PI_4;
        let p = TrianglePulse::new(0.0, 1.0, t_end).unwrap();
        let r = evolve(&s, &p, &StepperConfig::default(), &initial_state(2).unwrap()).unwrap();
        assert!(r.final_state.population(0).abs() < 1e-8);
        let t_end = 0.3;
        let p = TrianglePulse::new(0.0, 1.0, t_end).unwrap();
        let r = evolve(&s, &p, &StepperConfig::default(), &initial_state(2).unwrap()).unwrap();
        assert_relative_eq!(
            r.final_state.population(0),
            (delta * t_end).cos().powi(2),
            epsilon = 1e-8
        );
    }

    #[test]
    fn traced_and_plain_evolution_agree_bitwise() {
        let s = QubitSpectrum::two_level(2.0, 2.0).unwrap();
        let p = TrianglePulse::new(-5.0, 8.0, 1.0).unwrap();
        let rho0 = initial_state(2).unwrap();
        let cfg = StepperConfig::default();
        let a = evolve(&s, &p, &cfg, &rho0).unwrap();
        let b = evolve_traced(&s, &p, &cfg, &rho0).unwrap();
        assert_eq!(a.final_state, b.final_state);
        let traj = b.trajectory.unwrap();
        assert_eq!(traj.len(), b.step_count + 1);
        assert_eq!(traj.first().unwrap().t, 0.0);
        assert_eq!(traj.last().unwrap().t, 1.0);
        assert!(traj.iter().any(|pt| pt.t == 0.5));
        assert!(a.trajectory.is_none());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let s = QubitSpectrum::two_level(2.0, 2.0).unwrap();
        let p = TrianglePulse::new(-5.0, 8.0, 1.0).unwrap();
        let bad_cfg = StepperConfig {
            rel_tol: 0.0,
            ..StepperConfig::default()
        };
        assert!(evolve(&s, &p, &bad_cfg, &initial_state(2).unwrap()).is_err());
        assert!(matches!(
            evolve(&s, &p, &StepperConfig::default(), &initial_state(3).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
        let not_unit_trace = DensityMatrix::from_elements_unchecked(DMatrix::from_diagonal_element(
            2,
            2,
            c(0.7, 0.0),
        ));
        assert!(evolve(&s, &p, &StepperConfig::default(), &not_unit_trace).is_err());
    }

    #[test]
    fn step_underflow_reports_time_reached() {
        let s = QubitSpectrum::two_level(2.0, 2.0).unwrap();
        let p = TrianglePulse::new(-5.0, 8.0, 1.0).unwrap();
        let cfg = StepperConfig {
            rel_tol: 1e-300,
            abs_tol: 1e-300,
            ..StepperConfig::default()
        };
        match evolve(&s, &p, &cfg, &initial_state(2).unwrap()) {
            Err(Error::IntegrationFailure { t, .. }) => assert!((0.0..=1.0).contains(&t)),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn state_validation() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.2, 0.0)]);
        assert!(DensityMatrix::from_elements(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.3, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::from_elements(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let rho = DensityMatrix::from_elements(m).unwrap();
        assert_relative_eq!(rho.purity(), 1.0);
        assert!(rho.min_eigenvalue().abs() < 1e-12);
    }
}
