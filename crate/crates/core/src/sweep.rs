//! Interference maps over a (Φ_f, τ) grid.
//!
//! Every cell is an independent [`evolve`] call that reads only shared,
//! immutable inputs and writes to its own slot of a preallocated array.
//! Cells run on the rayon pool, but the value stored in a cell depends only
//! on its coordinates, so the map is bitwise identical for any worker count
//! or scheduling order.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{QubitSpectrum, TrianglePulse};
use crate::propagator::{evolve, initial_state, StepperConfig};

/// Inclusive, uniformly spaced axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(invalid(format!("{name}: count must be at least 1")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(invalid(format!("{name}: bounds must be finite")));
        }
        if self.count > 1 && self.min >= self.max {
            return Err(invalid(format!(
                "{name}: min ({}) must be below max ({}) when count > 1",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    /// Node `i`, computed from both ends so the last node is exactly `max`.
    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            return self.min;
        }
        let n = (self.count - 1) as f64;
        let f = i as f64 / n;
        self.min * (1.0 - f) + self.max * f
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Final sweep values, mΦ0.
    pub phi_f: AxisRange,
    /// Pulse widths, ns.
    pub tau: AxisRange,
    /// Fixed initial detuning, mΦ0.
    pub phi_i: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.phi_f.validate("phi_f")?;
        self.tau.validate("tau")?;
        if !self.phi_i.is_finite() {
            return Err(invalid("phi_i must be finite"));
        }
        if self.tau.min <= 0.0 {
            return Err(invalid(format!("tau: all widths must be positive, min is {}", self.tau.min)));
        }
        if self.phi_f.values().contains(&self.phi_i) {
            return Err(invalid(format!(
                "phi_f grid contains the initial detuning {} (degenerate pulse)",
                self.phi_i
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.phi_f.count * self.tau.count
    }
}

/// Provenance recorded with a simulated map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MapMetadata {
    pub spectrum: Option<QubitSpectrum>,
    pub stepper: Option<StepperConfig>,
    /// Seconds since the Unix epoch at which the sweep finished.
    pub created_unix_s: Option<u64>,
}

/// Worst-case integrator diagnostics over all cells of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    /// Largest |Tr ρ − 1| over every accepted step of every cell.
    pub max_trace_deviation: f64,
    /// Smallest eigenvalue of any final state.
    pub min_eigenvalue: f64,
    /// Largest |Tr ρ² − 1| of any final state.
    pub max_purity_deviation: f64,
    /// Largest entrywise |ρ − ρ†| of any final state.
    pub max_hermiticity_error: f64,
    pub total_steps: u64,
    pub total_rhs_evals: u64,
}

impl SweepDiagnostics {
    fn merge(self, other: Self) -> Self {
        Self {
            max_trace_deviation: self.max_trace_deviation.max(other.max_trace_deviation),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
            max_purity_deviation: self.max_purity_deviation.max(other.max_purity_deviation),
            max_hermiticity_error: self.max_hermiticity_error.max(other.max_hermiticity_error),
            total_steps: self.total_steps + other.total_steps,
            total_rhs_evals: self.total_rhs_evals + other.total_rhs_evals,
        }
    }

    fn identity() -> Self {
        Self {
            max_trace_deviation: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_purity_deviation: 0.0,
            max_hermiticity_error: 0.0,
            total_steps: 0,
            total_rhs_evals: 0,
        }
    }
}

/// Final `|L0⟩` population on a (τ, Φ_f) grid.
///
/// `values` is stored row-major with one row per τ node: the cell for
/// `(tau_values[i], phi_f_values[j])` is `values[i * phi_f_values.len() + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMap {
    pub grid: GridSpec,
    pub phi_f_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    pub values: Vec<f64>,
    pub metadata: MapMetadata,
    pub diagnostics: Option<SweepDiagnostics>,
}

impl InterferenceMap {
    /// Builds a map from explicit axes. Axes must be strictly increasing.
    pub fn from_parts(
        phi_i: f64,
        phi_f_values: Vec<f64>,
        tau_values: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if phi_f_values.is_empty() || tau_values.is_empty() {
            return Err(invalid("map axes must be non-empty"));
        }
        if values.len() != phi_f_values.len() * tau_values.len() {
            return Err(Error::DimensionMismatch {
                expected: phi_f_values.len() * tau_values.len(),
                got: values.len(),
            });
        }
        for (name, axis) in [("phi_f", &phi_f_values), ("tau", &tau_values)] {
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(invalid(format!("{name} axis must be strictly increasing")));
            }
        }
        let axis = |v: &[f64]| AxisRange::new(v[0], v[v.len() - 1], v.len());
        Ok(Self {
            grid: GridSpec {
                phi_f: axis(&phi_f_values),
                tau: axis(&tau_values),
                phi_i,
            },
            phi_f_values,
            tau_values,
            values,
            metadata: MapMetadata::default(),
            diagnostics: None,
        })
    }

    pub fn phi_i(&self) -> f64 {
        self.grid.phi_i
    }

    pub fn n_phi_f(&self) -> usize {
        self.phi_f_values.len()
    }

    pub fn n_tau(&self) -> usize {
        self.tau_values.len()
    }

    pub fn value(&self, tau_index: usize, phi_f_index: usize) -> f64 {
        self.values[tau_index * self.n_phi_f() + phi_f_index]
    }

    /// Populations of column `j`, ordered by τ.
    pub fn column(&self, phi_f_index: usize) -> Vec<f64> {
        (0..self.n_tau()).map(|i| self.value(i, phi_f_index)).collect()
    }

    /// Index of the column nearest to `phi_f`; ties go to the lower node.
    pub fn column_index(&self, phi_f: f64) -> Result<usize> {
        let axis = &self.phi_f_values;
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        let slack = 1e-9 * (hi - lo).abs().max(1.0);
        if !(phi_f >= lo - slack && phi_f <= hi + slack) {
            return Err(invalid(format!(
                "phi_f = {phi_f} mΦ0 outside map range [{lo}, {hi}]"
            )));
        }
        let mut best = 0;
        for (j, &v) in axis.iter().enumerate() {
            if (v - phi_f).abs() < (axis[best] - phi_f).abs() {
                best = j;
            }
        }
        Ok(best)
    }

    /// Nearest-column section `(τ, W_11)`, sorted by τ.
    pub fn extract_column(&self, phi_f: f64) -> Result<Vec<(f64, f64)>> {
        let j = self.column_index(phi_f)?;
        Ok(self
            .tau_values
            .iter()
            .copied()
            .zip(self.column(j))
            .collect())
    }
}

/// Free-function form of [`InterferenceMap::extract_column`].
pub fn extract_column(map: &InterferenceMap, phi_f: f64) -> Result<Vec<(f64, f64)>> {
    map.extract_column(phi_f)
}

struct CellOutcome {
    population: f64,
    diagnostics: SweepDiagnostics,
}

fn run_cell(
    spectrum: &QubitSpectrum,
    config: &StepperConfig,
    phi_i: f64,
    phi_f: f64,
    tau: f64,
) -> Result<CellOutcome> {
    let wrap = |e: Error| Error::CellFailure {
        phi_f,
        tau,
        source: Box::new(e),
    };
    let pulse = TrianglePulse::new(phi_i, phi_f, tau).map_err(wrap)?;
    let rho0 = initial_state(spectrum.dim()).map_err(wrap)?;
    let r = evolve(spectrum, &pulse, config, &rho0).map_err(wrap)?;
    let rho = &r.final_state;
    Ok(CellOutcome {
        population: rho.population(0),
        diagnostics: SweepDiagnostics {
            max_trace_deviation: r.max_trace_deviation,
            min_eigenvalue: rho.min_eigenvalue(),
            max_purity_deviation: (rho.purity() - 1.0).abs(),
            max_hermiticity_error: rho.hermiticity_error(),
            total_steps: r.step_count as u64,
            total_rhs_evals: r.rhs_eval_count as u64,
        },
    })
}

/// Runs every cell of `grid` on the current rayon pool.
pub fn run_sweep(
    grid: &GridSpec,
    spectrum: &QubitSpectrum,
    config: &StepperConfig,
) -> Result<InterferenceMap> {
    grid.validate()?;
    config.validate()?;
    let phi_f_values = grid.phi_f.values();
    let tau_values = grid.tau.values();
    let nf = phi_f_values.len();
    let abort = AtomicBool::new(false);

    let outcomes: Vec<Option<Result<CellOutcome>>> = (0..grid.cell_count())
        .into_par_iter()
        .map(|cell| {
            if abort.load(Ordering::Relaxed) {
                return None;
            }
            let (i, j) = (cell / nf, cell % nf);
            let out = run_cell(spectrum, config, grid.phi_i, phi_f_values[j], tau_values[i]);
            if out.is_err() {
                abort.store(true, Ordering::Relaxed);
            }
            Some(out)
        })
        .collect();

    let mut values = Vec::with_capacity(outcomes.len());
    let mut diag = SweepDiagnostics::identity();
    let mut first_error = None;
    for out in outcomes.into_iter().flatten() {
        match out {
            Ok(c) => {
                values.push(c.population);
                diag = diag.merge(c.diagnostics);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .ok();
    Ok(InterferenceMap {
        grid: *grid,
        phi_f_values,
        tau_values,
        values,
        metadata: MapMetadata {
            spectrum: Some(spectrum.clone()),
            stepper: Some(*config),
            created_unix_s: created,
        },
        diagnostics: Some(diag),
    })
}

/// Runs the sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(
    grid: &GridSpec,
    spectrum: &QubitSpectrum,
    config: &StepperConfig,
    workers: usize,
) -> Result<InterferenceMap> {
    if workers == 0 {
        return Err(invalid("worker count must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_sweep(grid, spectrum, config))
}
