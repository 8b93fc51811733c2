//! Spectrum extraction from interference maps.
//!
//! * [`column_fft`]: dominant fringe frequency of one Φ_f column;
//! * [`fit_slope`]: branch slope from the large-amplitude fringe period;
//! * [`fft_linearity`]: slope from the linear growth of 2π/T with Φ_f;
//! * [`fit_gap`]: tunnelling gap by an exhaustive scan of the closed-form
//!   population against measured points;
//! * [`locate_anticrossings`]: crossing positions from fringe onset and
//!   fringe-spacing distortion;
//! * [`classify_regions`]: partition of a map by characteristic sweep rates.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic::{
    characteristic_sweep_rate, fringe_frequency_large_amplitude,
    population_from_phase, stueckelberg_phase, LARGE_AMPLITUDE_RATIO,
};
use crate::error::{invalid, Error, Result};
use crate::model::TrianglePulse;
use crate::sweep::InterferenceMap;

/// Minimum number of τ samples accepted by [`column_fft`].
pub const MIN_FFT_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FftOptions {
    pub window: Window,
    /// Transform length as a multiple of the sample count (1 = no padding).
    pub zero_pad: usize,
}

impl Default for FftOptions {
    fn default() -> Self {
        Self {
            window: Window::Rectangular,
            zero_pad: 1,
        }
    }
}

/// Dominant oscillation of one map column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpectrum {
    /// Column position, mΦ0.
    pub phi_f: f64,
    /// 2π/T of the strongest fringe, rad/ns.
    pub dominant_omega: f64,
    /// Squared amplitude of that component (0.25 for a full-contrast
    /// `(1 + cos ωτ)/2` column).
    pub power: f64,
    /// 2π over the τ span, rad/ns.
    pub resolution: f64,
}

impl ColumnSpectrum {
    /// Fringe period T = 2π/ω, ns (infinite for a flat column).
    pub fn period(&self) -> f64 {
        if self.dominant_omega > 0.0 {
            2.0 * PI / self.dominant_omega
        } else {
            f64::INFINITY
        }
    }
}

fn uniform_spacing(tau: &[f64]) -> Result<f64> {
    let n = tau.len();
    let dt = (tau[n - 1] - tau[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(invalid("τ samples must be increasing"));
    }
    let worst = tau
        .windows(2)
        .map(|w| ((w[1] - w[0]) - dt).abs())
        .fold(0.0, f64::max);
    if worst > 1e-5 * dt {
        return Err(invalid(format!(
            "τ grid is not uniform (spacing deviates by {worst:e} ns from {dt:e} ns)"
        )));
    }
    Ok(dt)
}

/// Mean-subtracted DFT of a uniformly sampled series. Returns
/// `(dominant ω, power, resolution)`.
pub fn series_spectrum(tau: &[f64], values: &[f64], opts: &FftOptions) -> Result<(f64, f64, f64)> {
    if tau.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: tau.len(),
            got: values.len(),
        });
    }
    let n = values.len();
    if n < MIN_FFT_SAMPLES {
        return Err(invalid(format!(
            "column has {n} samples, at least {MIN_FFT_SAMPLES} are needed"
        )));
    }
    if opts.zero_pad == 0 {
        return Err(invalid("zero_pad must be at least 1"));
    }
    let dt = uniform_spacing(tau)?;
    let resolution = 2.0 * PI / (tau[n - 1] - tau[0]);
    let mean = values.iter().sum::<f64>() / n as f64;
    let weights: Vec<f64> = match opts.window {
        Window::Rectangular => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
            .collect(),
    };
    let len = n * opts.zero_pad;
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
    for (slot, (v, w)) in buf.iter_mut().zip(values.iter().zip(&weights)) {
        *slot = Complex::new((v - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let mags: Vec<f64> = buf[..=len / 2].iter().map(|z| z.norm()).collect();
    let (peak, &peak_mag) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one positive-frequency bin");
    let weight_sum: f64 = weights.iter().sum();
    let amplitude = 2.0 * peak_mag / weight_sum;
    let value_scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if amplitude <= 1e-12 * value_scale {
        return Ok((0.0, 0.0, resolution));
    }
    let offset = if peak + 1 < mags.len() {
        let (a, b, c) = (mags[peak - 1], mags[peak], mags[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let omega = 2.0 * PI * (peak as f64 + offset) / (len as f64 * dt);
    Ok((omega, amplitude * amplitude, resolution))
}

/// Dominant fringe frequency of the column nearest `phi_f`.
pub fn column_fft(map: &InterferenceMap, phi_f: f64, opts: &FftOptions) -> Result<ColumnSpectrum> {
    let j = map.column_index(phi_f)?;
    column_fft_at(map, j, opts)
}

fn column_fft_at(map: &InterferenceMap, j: usize, opts: &FftOptions) -> Result<ColumnSpectrum> {
    let (omega, power, resolution) = series_spectrum(&map.tau_values, &map.column(j), opts)?;
    Ok(ColumnSpectrum {
        phi_f: map.phi_f_values[j],
        dominant_omega: omega,
        power,
        resolution,
    })
}

/// Slope `l = ω (Φ_f − Φ_i)/Φ_f²` from a large-amplitude fringe frequency.
pub fn slope_from_omega(omega: f64, phi_i: f64, phi_f: f64) -> f64 {
    omega * (phi_f - phi_i) / (phi_f * phi_f)
}

/// Slope from a fringe period `T` (ns), see [`slope_from_omega`].
pub fn slope_from_period(period: f64, phi_i: f64, phi_f: f64) -> f64 {
    slope_from_omega(2.0 * PI / period, phi_i, phi_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub column: ColumnSpectrum,
    /// `slope · Φ_f / gap_bound`, the large-amplitude ratio of the estimate.
    pub amplitude_ratio: f64,
}

/// Slope from the dominant fringe period of the column nearest
/// `phi_f_ref`, without a regime check.
pub fn column_slope(map: &InterferenceMap, phi_f_ref: f64, opts: &FftOptions) -> Result<(f64, ColumnSpectrum)> {
    let column = column_fft(map, phi_f_ref, opts)?;
    let (pf, pi) = (column.phi_f, map.phi_i());
    if pf <= 0.0 || pf <= pi {
        return Err(Error::Analysis(format!(
            "reference column Φ_f = {pf} mΦ0 does not cross the anticrossing at 0"
        )));
    }
    if column.dominant_omega <= 0.0 {
        return Err(Error::Analysis(format!(
            "column Φ_f = {pf} mΦ0 shows no oscillation"
        )));
    }
    Ok((slope_from_omega(column.dominant_omega, pi, pf), column))
}

fn regime_check(slope: f64, column: ColumnSpectrum, gap_bound: f64) -> Result<SlopeFit> {
    let pf = column.phi_f;
    let amplitude_ratio = slope * pf / gap_bound;
    if amplitude_ratio < LARGE_AMPLITUDE_RATIO {
        return Err(Error::Analysis(format!(
            "column Φ_f = {pf} mΦ0 is outside the large-amplitude regime: \
             lΦ_f/Δ = {amplitude_ratio:.3} < {LARGE_AMPLITUDE_RATIO} (l = {slope:.4}, Δ = {gap_bound})"
        )));
    }
    Ok(SlopeFit {
        slope,
        column,
        amplitude_ratio,
    })
}

/// Branch slope from the dominant fringe period of the column at
/// `phi_f_ref`. `gap_bound` is an upper bound on the gap of the crossing;
/// the reference column must satisfy `l Φ_f / gap_bound ≥`
/// [`LARGE_AMPLITUDE_RATIO`] with the estimated `l`.
pub fn fit_slope(
    map: &InterferenceMap,
    phi_f_ref: f64,
    gap_bound: f64,
    opts: &FftOptions,
) -> Result<SlopeFit> {
    if !(gap_bound > 0.0) {
        return Err(invalid("gap bound must be positive"));
    }
    let (slope, column) = column_slope(map, phi_f_ref, opts)?;
    regime_check(slope, column, gap_bound)
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual_rms: f64,
}

pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(invalid("a line fit needs at least two points"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("line fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        residual_rms: (sse / n).sqrt(),
    })
}

/// Minimum number of columns used by [`fft_linearity`].
pub const MIN_LINEARITY_COLUMNS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityFit {
    pub line: LineFit,
    pub columns: Vec<ColumnSpectrum>,
}

/// Straight-line fit of dominant ω against Φ_f over every column with
/// `Φ_f ≥ phi_f_min`.
pub fn fft_linearity(map: &InterferenceMap, phi_f_min: f64, opts: &FftOptions) -> Result<LinearityFit> {
    let selected: Vec<usize> = (0..map.n_phi_f())
        .filter(|&j| map.phi_f_values[j] >= phi_f_min)
        .collect();
    if selected.len() < MIN_LINEARITY_COLUMNS {
        return Err(Error::Analysis(format!(
            "{} columns with Φ_f ≥ {phi_f_min} mΦ0, at least {MIN_LINEARITY_COLUMNS} are needed",
            selected.len()
        )));
    }
    let columns = selected
        .par_iter()
        .map(|&j| column_fft_at(map, j, opts))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = columns.iter().map(|c| (c.phi_f, c.dominant_omega)).collect();
    Ok(LinearityFit {
        line: fit_line(&points)?,
        columns,
    })
}

/// One measured population used by [`fit_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub phi_f: f64,
    pub tau: f64,
    pub population: f64,
}

impl GapPoint {
    pub fn new(phi_f: f64, tau: f64, population: f64) -> Self {
        Self {
            phi_f,
            tau,
            population,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapScanOptions {
    /// Scan nodes are `step, 2·step, …` up to `max`.
    pub max: f64,
    pub step: f64,
    /// Largest accepted |W_model − W_measured| at any single point.
    pub point_tolerance: f64,
}

impl Default for GapScanOptions {
    fn default() -> Self {
        Self {
            max: 12.0,
            step: 0.01,
            point_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCandidate {
    pub gap: f64,
    /// Summed squared population error.
    pub sse: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFit {
    /// Candidate with the smallest summed squared error.
    pub best: GapCandidate,
    /// Every local minimum of the scan that meets the per-point tolerance,
    /// best first.
    pub candidates: Vec<GapCandidate>,
}

fn gap_residuals(
    points: &[GapPoint],
    slope: f64,
    phi_i: f64,
    location: f64,
    gap: f64,
) -> Result<GapCandidate> {
    let mut sse = 0.0;
    let mut worst = 0.0f64;
    for p in points {
        let pulse = TrianglePulse::new(phi_i - location, p.phi_f - location, p.tau)?;
        let phi = stueckelberg_phase(slope, gap, &pulse)?.phi;
        let r = population_from_phase(phi) - p.population;
        sse += r * r;
        worst = worst.max(r.abs());
    }
    Ok(GapCandidate {
        gap,
        sse,
        max_residual: worst,
    })
}

/// Gap estimate by exhaustive scan of the closed-form population
/// `(1 + cos φ(Δ))/2` against `points`, for a crossing at δΦ = 0.
pub fn fit_gap(points: &[GapPoint], slope: f64, phi_i: f64, opts: &GapScanOptions) -> Result<GapFit> {
    fit_gap_at(points, slope, phi_i, 0.0, opts)
}

/// [`fit_gap`] for a crossing at `location` (mΦ0): detunings are measured
/// from the crossing.
pub fn fit_gap_at(
    points: &[GapPoint],
    slope: f64,
    phi_i: f64,
    location: f64,
    opts: &GapScanOptions,
) -> Result<GapFit> {
    if points.is_empty() {
        return Err(invalid("gap fit needs at least one point"));
    }
    if !(slope > 0.0) {
        return Err(invalid("slope must be positive"));
    }
    if !(opts.step > 0.0 && opts.max >= opts.step && opts.point_tolerance > 0.0) {
        return Err(invalid("gap scan needs 0 < step ≤ max and a positive tolerance"));
    }
    let n = (opts.max / opts.step + 1e-9).floor() as usize;
    let scan = (1..=n)
        .into_par_iter()
        .map(|i| gap_residuals(points, slope, phi_i, location, i as f64 * opts.step))
        .collect::<Result<Vec<_>>>()?;

    let mut candidates: Vec<GapCandidate> = (0..scan.len())
        .filter(|&i| {
            let s = scan[i].sse;
            (i == 0 || s <= scan[i - 1].sse) && (i + 1 == scan.len() || s <= scan[i + 1].sse)
        })
        .map(|i| scan[i])
        .filter(|c| c.max_residual <= opts.point_tolerance)
        .collect();
    // plateaus produce runs of equal minima; keep the first of each run
    candidates.dedup_by(|b, a| (b.gap - a.gap).abs() <= 1.5 * opts.step && b.sse == a.sse);
    candidates.sort_by(|a, b| a.sse.total_cmp(&b.sse));
    match candidates.first() {
        Some(&best) => Ok(GapFit { best, candidates }),
        None => {
            let closest = scan
                .iter()
                .min_by(|a, b| a.max_residual.total_cmp(&b.max_residual))
                .expect("non-empty scan");
            Err(Error::Analysis(format!(
                "inconsistent points: no gap in (0, {}] fits every point within {} \
                 (closest: Δ = {:.2} with worst residual {:.3})",
                opts.max, opts.point_tolerance, closest.gap, closest.max_residual
            )))
        }
    }
}

/// Positions of the fringe minima of a uniformly sampled series. A minimum
/// counts once the series has risen by at least `prominence` on its right;
/// positions are refined by a parabola through the three nearest samples.
pub fn fringe_minima(tau: &[f64], values: &[f64], prominence: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if values.len() < 3 || tau.len() != values.len() {
        return out;
    }
    let mut seeking_min = true;
    let mut cand = 0;
    for i in 1..values.len() {
        if seeking_min {
            if values[i] < values[cand] {
                cand = i;
            } else if values[i] > values[cand] + prominence {
                // a minimum on the first sample is an edge, not a fringe
                if cand > 0 {
                    out.push(refine_minimum(tau, values, cand));
                }
                seeking_min = false;
                cand = i;
            }
        } else if values[i] > values[cand] {
            cand = i;
        } else if values[i] < values[cand] - prominence {
            seeking_min = true;
            cand = i;
        }
    }
    out
}

fn refine_minimum(tau: &[f64], v: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= v.len() {
        return tau[i];
    }
    let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
    let curv = a - 2.0 * b + c;
    if curv > 0.0 {
        let h = 0.5 * (tau[i + 1] - tau[i - 1]);
        tau[i] + (0.5 * (a - c) / curv).clamp(-0.5, 0.5) * h
    } else {
        tau[i]
    }
}

/// Default fringe prominence relative to the largest column swing of a map.
pub const DEFAULT_PROMINENCE: f64 = 0.1;

/// Default distortion threshold: relative deviation of the local fringe
/// spacing from the single-anticrossing prediction.
pub const DEFAULT_DISTORTION_THRESHOLD: f64 = 0.2;

/// Local fringe spacing at every cell of a map, compared with the
/// large-amplitude single-anticrossing prediction `2π(Φ_f − Φ_i)/(lΦ_f²)`.
///
/// A cell carries the spacing of the two consecutive column minima that
/// bracket it; cells outside any such pair are unmeasured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSpacingField {
    pub n_phi_f: usize,
    pub n_tau: usize,
    /// Row-major like [`InterferenceMap::values`].
    pub spacing: Vec<Option<f64>>,
    /// Predicted spacing per column (`None` where Φ_f ≤ 0).
    pub predicted: Vec<Option<f64>>,
}

impl FringeSpacingField {
    pub fn spacing_at(&self, tau_index: usize, phi_f_index: usize) -> Option<f64> {
        self.spacing[tau_index * self.n_phi_f + phi_f_index]
    }

    /// `measured/predicted − 1` where both exist.
    pub fn deviation(&self, tau_index: usize, phi_f_index: usize) -> Option<f64> {
        let s = self.spacing_at(tau_index, phi_f_index)?;
        let p = self.predicted[phi_f_index]?;
        Some(s / p - 1.0)
    }

    /// Deviations of every measured cell of one column.
    pub fn column_deviations(&self, phi_f_index: usize) -> Vec<f64> {
        (0..self.n_tau)
            .filter_map(|i| self.deviation(i, phi_f_index))
            .collect()
    }
}

fn largest_swing(map: &InterferenceMap) -> f64 {
    (0..map.n_phi_f())
        .map(|j| column_swing(&map.column(j)))
        .fold(0.0, f64::max)
}

fn column_swing(c: &[f64]) -> f64 {
    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Builds the fringe-spacing field of `map` for branch slope `slope`.
/// `prominence` is relative to the largest column swing of the map.
pub fn fringe_spacing_field(map: &InterferenceMap, slope: f64, prominence: f64) -> Result<FringeSpacingField> {
    if !(slope > 0.0) || !(prominence > 0.0) {
        return Err(invalid("slope and prominence must be positive"));
    }
    let (nf, nt) = (map.n_phi_f(), map.n_tau());
    let h = prominence * largest_swing(map);
    let tau = &map.tau_values;
    let columns: Vec<Vec<Option<f64>>> = (0..nf)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![None; nt];
            if h <= 0.0 {
                return col;
            }
            let minima = fringe_minima(tau, &map.column(j), h);
            for w in minima.windows(2) {
                let s = w[1] - w[0];
                for (i, slot) in col.iter_mut().enumerate() {
                    if tau[i] >= w[0] && tau[i] < w[1] {
                        *slot = Some(s);
                    }
                }
            }
            col
        })
        .collect();
    let mut spacing = vec![None; nf * nt];
    for (j, col) in columns.iter().enumerate() {
        for (i, &s) in col.iter().enumerate() {
            spacing[i * nf + j] = s;
        }
    }
    let predicted = map
        .phi_f_values
        .iter()
        .map(|&pf| {
            (pf > 0.0 && pf > map.phi_i())
                .then(|| 2.0 * PI / fringe_frequency_large_amplitude(slope, map.phi_i(), pf))
        })
        .collect();
    Ok(FringeSpacingField {
        n_phi_f: nf,
        n_tau: nt,
        spacing,
        predicted,
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Tuning of [`locate_anticrossings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocateOptions {
    /// The fringe edge is where a column's max−min swing first reaches
    /// this fraction of the largest column swing in the map.
    pub edge_fraction: f64,
    /// Relative spacing deviation that marks a distorted column.
    pub distortion_threshold: f64,
    /// Fringe prominence relative to the largest column swing.
    pub prominence: f64,
    /// Branch slope and first gap; the distortion search runs only when
    /// both are known.
    pub slope: Option<f64>,
    pub gap: Option<f64>,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self {
            edge_fraction: 0.5,
            distortion_threshold: DEFAULT_DISTORTION_THRESHOLD,
            prominence: DEFAULT_PROMINENCE,
            slope: None,
            gap: None,
        }
    }
}

/// Anticrossing positions (mΦ0) read off a map.
///
/// The first is the left edge of the first fringe: the Φ_f at which the
/// relative column swing crosses `edge_fraction`, interpolated linearly
/// between columns. The second, searched only among large-amplitude
/// columns beyond the first, is the first column whose median fringe-spacing
/// deviation exceeds `distortion_threshold`. An empty list means no fringe
/// edge was found.
pub fn locate_anticrossings(map: &InterferenceMap, opts: &LocateOptions) -> Result<Vec<f64>> {
    if !(opts.edge_fraction > 0.0 && opts.edge_fraction < 1.0) {
        return Err(invalid("edge fraction must lie in (0, 1)"));
    }
    if !(opts.distortion_threshold > 0.0) {
        return Err(invalid("distortion threshold must be positive"));
    }
    let swings: Vec<f64> = (0..map.n_phi_f()).map(|j| column_swing(&map.column(j))).collect();
    let top = swings.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(Vec::new());
    }
    let rel: Vec<f64> = swings.iter().map(|s| s / top).collect();
    let pf = &map.phi_f_values;
    let Some(j0) = rel.iter().position(|&r| r >= opts.edge_fraction) else {
        return Ok(Vec::new());
    };
    let first = if j0 == 0 {
        pf[0]
    } else {
        let (a, b) = (rel[j0 - 1], rel[j0]);
        pf[j0 - 1] + (opts.edge_fraction - a) / (b - a) * (pf[j0] - pf[j0 - 1])
    };
    let mut found = vec![first];

    if let (Some(slope), Some(gap)) = (opts.slope, opts.gap) {
        let field = fringe_spacing_field(map, slope, opts.prominence)?;
        let onset = (0..map.n_phi_f())
            .filter(|&j| pf[j] > first && slope * (pf[j] - first) >= LARGE_AMPLITUDE_RATIO * gap)
            .find(|&j| {
                median(field.column_deviations(j).iter().map(|d| d.abs()).collect())
                    .is_some_and(|m| m > opts.distortion_threshold)
            });
        if let Some(j) = onset {
            found.push(pf[j]);
        }
    }
    Ok(found)
}

/// Sweep-rate regime of a map cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `k ≤ k12`: the first anticrossing dominates.
    One = 1,
    /// `k ≥ k13`: the second anticrossing dominates.
    Two = 2,
    /// `k12 < k < k13`: both contribute.
    Three = 3,
}

impl Region {
    pub fn label(self) -> u8 {
        self as u8
    }

    /// Position along increasing sweep rate (1 → 3 → 2).
    pub fn rate_order(self) -> u8 {
        match self {
            Region::One => 0,
            Region::Three => 1,
            Region::Two => 2,
        }
    }
}

/// Region of a single sweep rate `k` given the characteristic rates.
pub fn classify_rate(k: f64, k12: f64, k13: f64) -> Region {
    if k <= k12 {
        Region::One
    } else if k >= k13 {
        Region::Two
    } else {
        Region::Three
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub k12: f64,
    pub k13: f64,
    pub n_phi_f: usize,
    pub n_tau: usize,
    /// Row-major like [`InterferenceMap::values`].
    pub labels: Vec<Region>,
}

impl RegionMap {
    pub fn label(&self, tau_index: usize, phi_f_index: usize) -> Region {
        self.labels[tau_index * self.n_phi_f + phi_f_index]
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&r| r == region).count()
    }
}

/// Labels every cell by its sweep rate `k = 2(Φ_f − Φ_i)/τ` against
/// `k1i = 2πΔ1i²/l`.
pub fn classify_regions(map: &InterferenceMap, gap12: f64, gap13: f64, slope: f64) -> RegionMap {
    let k12 = characteristic_sweep_rate(gap12, slope);
    let k13 = characteristic_sweep_rate(gap13, slope);
    let nf = map.n_phi_f();
    let mut labels = Vec::with_capacity(map.values.len());
    for &tau in &map.tau_values {
        for &pf in &map.phi_f_values {
            let k = (2.0 * (pf - map.phi_i()) / tau).abs();
            labels.push(classify_rate(k, k12, k13));
        }
    }
    RegionMap {
        k12,
        k13,
        n_phi_f: nf,
        n_tau: map.n_tau(),
        labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// Anticrossing position, mΦ0.
    pub location: f64,
    /// Gap, rad/ns.
    pub gap: f64,
}

/// Diagnostics attached to a [`SpectroscopyFit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResiduals {
    pub reference_phi_f: f64,
    pub reference_period: f64,
    /// `lΦ_f/Δ` of the reference column with the fitted values.
    pub amplitude_ratio: f64,
    /// `amplitude_ratio ≥ LARGE_AMPLITUDE_RATIO`.
    pub large_amplitude: bool,
    pub gap_points: Vec<GapPoint>,
    pub gap_sse: f64,
    pub gap_max_residual: f64,
    /// Every accepted scan minimum, best first.
    pub gap_candidates: Vec<f64>,
}

/// Spectrum parameters extracted from one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyFit {
    pub slope_estimate: f64,
    pub gap_estimates: Vec<GapEstimate>,
    pub anticrossing_locations: Vec<f64>,
    /// `(k12, k13)`; each is known once the corresponding gap is.
    pub region_rates: (Option<f64>, Option<f64>),
    pub residuals: FitResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AnalyzeOptions {
    /// Column used for the slope; defaults to the largest Φ_f of the map.
    pub phi_f_ref: Option<f64>,
    /// Upper bound on the gap for the regime check; when absent the fitted
    /// gap is used instead.
    pub gap_bound: Option<f64>,
    /// Crossing position used for the gap fit; defaults to the first
    /// located anticrossing.
    pub crossing: Option<f64>,
    /// Points for the gap fit; when empty, the map values at the largest τ
    /// and at 1 and 2 mΦ0 beyond the crossing are used.
    pub gap_points: Vec<GapPoint>,
    /// Gap of the second anticrossing, if known, for k13.
    pub second_gap: Option<f64>,
    pub fft: FftOptions,
    pub gap_scan: GapScanOptions,
    pub locate: LocateOptions,
}

/// Offsets from the crossing of the automatically chosen gap-fit points.
pub const AUTO_GAP_OFFSETS: [f64; 2] = [1.0, 2.0];

fn auto_gap_points(map: &InterferenceMap, crossing: f64) -> Result<Vec<GapPoint>> {
    let i = map.n_tau() - 1;
    AUTO_GAP_OFFSETS
        .iter()
        .map(|off| {
            let j = map.column_index(crossing + off)?;
            Ok(GapPoint::new(map.phi_f_values[j], map.tau_values[i], map.value(i, j)))
        })
        .collect()
}

/// Full extraction: anticrossing locations, slope, gap of the first
/// anticrossing and the characteristic sweep rates. The regime check is
/// enforced only with an explicit `gap_bound`; otherwise it is reported in
/// the residuals.
pub fn analyze(map: &InterferenceMap, opts: &AnalyzeOptions) -> Result<SpectroscopyFit> {
    let phi_f_ref = opts
        .phi_f_ref
        .unwrap_or_else(|| map.phi_f_values[map.n_phi_f() - 1]);
    let (slope, column) = column_slope(map, phi_f_ref, &opts.fft)?;
    if let Some(bound) = opts.gap_bound {
        regime_check(slope, column, bound)?;
    }

    let first_edge = locate_anticrossings(
        map,
        &LocateOptions {
            slope: None,
            gap: None,
            ..opts.locate
        },
    )?;
    let crossing = match (opts.crossing, first_edge.first()) {
        (Some(c), _) => c,
        (None, Some(&c)) => c,
        (None, None) => return Err(Error::Analysis("no fringe edge found in the map".into())),
    };
    let points = if opts.gap_points.is_empty() {
        auto_gap_points(map, crossing)?
    } else {
        opts.gap_points.clone()
    };
    let gap_fit = fit_gap_at(&points, slope, map.phi_i(), crossing, &opts.gap_scan)?;
    let gap = gap_fit.best.gap;
    let amplitude_ratio = slope * column.phi_f / opts.gap_bound.unwrap_or(gap);

    let locations = locate_anticrossings(
        map,
        &LocateOptions {
            slope: Some(slope),
            gap: Some(gap),
            ..opts.locate
        },
    )?;
    let k12 = characteristic_sweep_rate(gap, slope);
    let k13 = opts.second_gap.map(|g| characteristic_sweep_rate(g, slope));
    Ok(SpectroscopyFit {
        slope_estimate: slope,
        gap_estimates: vec![GapEstimate {
            location: crossing,
            gap,
        }],
        anticrossing_locations: locations,
        region_rates: (Some(k12), k13),
        residuals: FitResiduals {
            reference_phi_f: column.phi_f,
            reference_period: column.period(),
            amplitude_ratio,
            large_amplitude: amplitude_ratio >= LARGE_AMPLITUDE_RATIO,
            gap_points: points,
            gap_sse: gap_fit.best.sse,
            gap_max_residual: gap_fit.best.max_residual,
            gap_candidates: gap_fit.candidates.iter().map(|c| c.gap).collect(),
        },
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x}"))
}

impl SpectroscopyFit {
    /// Machine-readable `key=value` lines. List entries are indexed,
    /// e.g. `gap_estimates[0].gap`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut put = |k: String, v: String| {
            out.push_str(&k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("slope_estimate".into(), format!("{}", self.slope_estimate));
        put("gap_estimates.count".into(), self.gap_estimates.len().to_string());
        for (n, g) in self.gap_estimates.iter().enumerate() {
            put(format!("gap_estimates[{n}].location"), format!("{}", g.location));
            put(format!("gap_estimates[{n}].gap"), format!("{}", g.gap));
        }
        put(
            "anticrossing_locations.count".into(),
            self.anticrossing_locations.len().to_string(),
        );
        for (n, x) in self.anticrossing_locations.iter().enumerate() {
            put(format!("anticrossing_locations[{n}]"), format!("{x}"));
        }
        put("k12".into(), fmt_opt(self.region_rates.0));
        put("k13".into(), fmt_opt(self.region_rates.1));
        let r = &self.residuals;
        put("residuals.reference_phi_f".into(), format!("{}", r.reference_phi_f));
        put("residuals.reference_period".into(), format!("{}", r.reference_period));
        put("residuals.amplitude_ratio".into(), format!("{}", r.amplitude_ratio));
        put("residuals.large_amplitude".into(), r.large_amplitude.to_string());
        for (n, p) in r.gap_points.iter().enumerate() {
            put(
                format!("residuals.gap_points[{n}]"),
                format!("{},{},{}", p.phi_f, p.tau, p.population),
            );
        }
        put("residuals.gap_sse".into(), format!("{}", r.gap_sse));
        put("residuals.gap_max_residual".into(), format!("{}", r.gap_max_residual));
        let cands: Vec<String> = r.gap_candidates.iter().map(|g| format!("{g}")).collect();
        put("residuals.gap_candidates".into(), cands.join(";"));
        out
    }
}

fn short(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.2}"))
}

impl std::fmt::Display for SpectroscopyFit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let r = &self.residuals;
        writeln!(
            f,
            "slope      {:.4} rad/ns per mPhi0 (column {} mPhi0, T = {:.4} ns, l*Phi_f/gap = {:.2}{})",
            self.slope_estimate,
            r.reference_phi_f,
            r.reference_period,
            r.amplitude_ratio,
            if r.large_amplitude { "" } else { ", below the large-amplitude regime" }
        )?;
        for g in &self.gap_estimates {
            writeln!(f, "gap        {:.3} rad/ns at {:.3} mPhi0", g.gap, g.location)?;
        }
        let locs: Vec<String> = self
            .anticrossing_locations
            .iter()
            .map(|x| format!("{x:.3}"))
            .collect();
        writeln!(f, "crossings  [{}] mPhi0", locs.join(", "))?;
        writeln!(
            f,
            "rates      k12 = {}, k13 = {} mPhi0/ns",
            short(self.region_rates.0),
            short(self.region_rates.1)
        )?;
        let cands: Vec<String> = r.gap_candidates.iter().map(|g| format!("{g:.2}")).collect();
        write!(
            f,
            "gap fit    sse = {:.3e}, worst residual = {:.3}, candidates [{}]",
            r.gap_sse,
            r.gap_max_residual,
            cands.join(", ")
        )
    }
}
