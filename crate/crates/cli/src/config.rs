//! Run configuration: JSON file, presets and flag overrides.

use std::path::{Path, PathBuf};

use lzs_core::model::DEFAULT_SECOND_CROSSING;
use lzs_core::{Anticrossing, AxisRange, GridSpec, QubitSpectrum, StepperConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Spectrum as written in a config file. `crossings` and `branch_slopes`
/// default to 0 and 8 mΦ0 and to `slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub slope: f64,
    pub gaps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_slopes: Option<Vec<f64>>,
}

impl SpectrumConfig {
    pub fn new(slope: f64, gaps: &[f64]) -> Self {
        Self {
            slope,
            gaps: gaps.to_vec(),
            crossings: None,
            branch_slopes: None,
        }
    }

    pub fn build(&self) -> Result<QubitSpectrum, CliError> {
        let defaults = [0.0, DEFAULT_SECOND_CROSSING];
        if self.gaps.is_empty() || self.gaps.len() > 2 {
            return Err(CliError::Config(format!(
                "spectrum.gaps must list one or two gaps, found {}",
                self.gaps.len()
            )));
        }
        let n = self.gaps.len();
        let crossings = self.crossings.clone().unwrap_or_else(|| defaults[..n].to_vec());
        let slopes = self.branch_slopes.clone().unwrap_or_else(|| vec![self.slope; n]);
        if crossings.len() != n || slopes.len() != n {
            return Err(CliError::Config(
                "spectrum.crossings and spectrum.branch_slopes must match spectrum.gaps in length".into(),
            ));
        }
        let anticrossings = (0..n)
            .map(|j| Anticrossing {
                location: crossings[j],
                gap: self.gaps[j],
                branch_slope: slopes[j],
            })
            .collect();
        Ok(QubitSpectrum::new(self.slope, anticrossings)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory receiving every artifact.
    pub dir: PathBuf,
    /// File stem of sweep artifacts; defaults to the preset name or "map".
    pub stem: Option<String>,
    pub pgm: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            stem: None,
            pgm: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1b,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1b => "fig1b",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig4c => "fig4c",
        }
    }

    pub fn spectrum(self) -> SpectrumConfig {
        match self {
            Preset::Fig1b => SpectrumConfig::new(2.0, &[2.0]),
            Preset::Fig4a => SpectrumConfig::new(2.0, &[1.0, 10.0]),
            Preset::Fig4b => SpectrumConfig::new(2.0, &[2.0, 8.0]),
            Preset::Fig4c => SpectrumConfig::new(2.0, &[8.0, 2.0]),
        }
    }

    pub fn grid(self) -> GridSpec {
        let tau = AxisRange::new(0.01, 4.0, 400);
        match self {
            Preset::Fig1b => GridSpec {
                phi_f: AxisRange::new(-2.0, 10.0, 240),
                tau,
                phi_i: -5.0,
            },
            // wide enough to pass the second crossing at 8 mΦ0
            _ => GridSpec {
                phi_f: AxisRange::new(-2.0, 12.0, 141),
                tau,
                phi_i: -5.0,
            },
        }
    }
}

/// Everything needed to reproduce a run. Worker count is deliberately not
/// part of it: results do not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub spectrum: SpectrumConfig,
    pub grid: GridSpec,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// Config file layout: every section optional so a file may carry only a
/// preset name.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<Preset>,
    spectrum: Option<SpectrumConfig>,
    grid: Option<GridSpec>,
    stepper: Option<StepperConfig>,
    outputs: Option<OutputConfig>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub out: Option<PathBuf>,
    pub pgm: bool,
    pub tolerance: Option<f64>,
}

impl RunConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            spectrum: preset.spectrum(),
            grid: preset.grid(),
            stepper: StepperConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    /// Resolves file contents and flags. A preset (from the flag, else the
    /// file) replaces the spectrum and grid sections.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let parsed = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        let preset = overrides.preset.or(parsed.preset);
        let mut cfg = match preset {
            Some(p) => Self::from_preset(p),
            None => Self {
                preset: None,
                spectrum: parsed.spectrum.clone().ok_or_else(|| {
                    CliError::Config("no preset given and the config has no spectrum section".into())
                })?,
                grid: parsed.grid.ok_or_else(|| {
                    CliError::Config("no preset given and the config has no grid section".into())
                })?,
                stepper: StepperConfig::default(),
                outputs: OutputConfig::default(),
            },
        };
        if let Some(s) = parsed.stepper {
            cfg.stepper = s;
        }
        if let Some(o) = parsed.outputs {
            cfg.outputs = o;
        }
        if let Some(dir) = &overrides.out {
            cfg.outputs.dir = dir.clone();
        }
        cfg.outputs.pgm |= overrides.pgm;
        if let Some(rel) = overrides.tolerance {
            // keep the default 1:100 ratio between relative and absolute tolerance
            cfg.stepper.rel_tol = rel;
            cfg.stepper.abs_tol = rel * 1e-2;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.spectrum.build()?;
        self.grid.validate()?;
        self.stepper.validate()?;
        Ok(())
    }

    pub fn stem(&self) -> String {
        self.outputs
            .stem
            .clone()
            .or_else(|| self.preset.map(|p| p.name().to_string()))
            .unwrap_or_else(|| "map".to_string())
    }

    /// Pretty JSON of the parameters that determine the results, embedded
    /// in artifacts. Output locations are left out so that the same run
    /// written to two places produces identical files.
    pub fn provenance_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("outputs");
        }
        serde_json::to_string_pretty(&v).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_parameters_are_pinned() {
        let f = RunConfig::from_preset(Preset::Fig1b);
        assert_eq!(f.spectrum, SpectrumConfig::new(2.0, &[2.0]));
        assert_eq!(f.grid.phi_i, -5.0);
        assert_eq!(f.grid.phi_f, AxisRange::new(-2.0, 10.0, 240));
        assert_eq!(f.grid.tau, AxisRange::new(0.01, 4.0, 400));
        assert_eq!(Preset::Fig4a.spectrum().gaps, [1.0, 10.0]);
        assert_eq!(Preset::Fig4b.spectrum().gaps, [2.0, 8.0]);
        assert_eq!(Preset::Fig4c.spectrum().gaps, [8.0, 2.0]);
        for p in [Preset::Fig4a, Preset::Fig4b, Preset::Fig4c] {
            let c = RunConfig::from_preset(p);
            assert_eq!(c.spectrum.slope, 2.0);
            assert_eq!(c.grid.phi_i, -5.0);
            assert_eq!(c.grid.phi_f, AxisRange::new(-2.0, 12.0, 141));
            assert_eq!(c.grid.tau, AxisRange::new(0.01, 4.0, 400));
            let s = c.spectrum.build().unwrap();
            assert_eq!(s.anticrossings()[1].location, 8.0);
        }
        assert_eq!(f.stepper, StepperConfig::default());
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig::from_preset(Preset::Fig4b);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let embedded: RunConfig = serde_json::from_str(&c.provenance_json()).unwrap();
        assert_eq!(embedded.outputs, OutputConfig::default());
        assert_eq!(embedded.spectrum, c.spectrum);
    }

    #[test]
    fn tolerance_override() {
        let o = Overrides {
            preset: Some(Preset::Fig1b),
            tolerance: Some(1e-7),
            ..Default::default()
        };
        let c = RunConfig::resolve(None, &o).unwrap();
        assert_eq!(c.stepper.rel_tol, 1e-7);
        assert_eq!(c.stepper.abs_tol, 1e-9);
    }

    #[test]
    fn missing_sections_rejected() {
        assert!(matches!(
            RunConfig::resolve(None, &Overrides::default()),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn bad_spectrum_rejected() {
        let s = SpectrumConfig::new(2.0, &[1.0, 2.0, 3.0]);
        assert!(s.build().is_err());
        let s = SpectrumConfig {
            crossings: Some(vec![0.0]),
            ..SpectrumConfig::new(2.0, &[1.0, 2.0])
        };
        assert!(s.build().is_err());
    }
}
