use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use lzs_core::analysis::{
    analyze as analyze_map, column_fft, fit_gap_at, AnalyzeOptions, FftOptions, GapPoint,
    GapScanOptions, Window,
};
use lzs_core::mapio::{format_significant, read_csv, write_csv, write_pgm};
use lzs_core::{evolve_traced, initial_state, run_sweep, run_sweep_with_workers, InterferenceMap, TrianglePulse};

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn load_map(path: &Path, phi_i: Option<f64>) -> Result<InterferenceMap, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_csv(BufReader::new(f), phi_i)?)
}

fn parse_point(s: &str) -> Result<GapPoint, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [pf, tau, w] => Ok(GapPoint::new(pf, tau, w)),
        _ => Err(format!("expected phi_f,tau,population, got '{s}'")),
    }
}

fn sig(x: f64) -> String {
    format_significant(x, 9)
}

pub fn sweep(config: Option<&Path>, overrides: &Overrides, workers: Option<usize>) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(config, overrides)?;
    let spectrum = cfg.spectrum.build()?;
    let map = match workers {
        Some(n) => run_sweep_with_workers(&cfg.grid, &spectrum, &cfg.stepper, n)?,
        None => run_sweep(&cfg.grid, &spectrum, &cfg.stepper)?,
    };
    let comments = vec![cfg.provenance_json()];
    let stem = cfg.stem();
    let csv = cfg.outputs.dir.join(format!("{stem}.csv"));
    write_csv(&map, &comments, create(&csv)?).map_err(|e| with_path(e, &csv))?;
    println!("wrote {}", csv.display());
    if cfg.outputs.pgm {
        let pgm = cfg.outputs.dir.join(format!("{stem}.pgm"));
        write_pgm(&map, &comments, create(&pgm)?).map_err(|e| with_path(e, &pgm))?;
        println!("wrote {}", pgm.display());
    }
    if let Some(d) = map.diagnostics {
        eprintln!(
            "max |Tr ρ - 1| {:.2e}, min eigenvalue {:.2e}, max |Tr ρ² - 1| {:.2e}, {} steps",
            d.max_trace_deviation, d.min_eigenvalue, d.max_purity_deviation, d.total_steps
        );
    }
    Ok(())
}

fn with_path(e: lzs_core::Error, path: &Path) -> CliError {
    match e {
        lzs_core::Error::Io(msg) => CliError::io(path, std::io::Error::other(msg)),
        e => e.into(),
    }
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Final sweep value, mΦ0.
    #[arg(long, allow_negative_numbers = true)]
    pub phi_f: f64,
    /// Pulse width, ns.
    #[arg(long)]
    pub tau: f64,
    /// Output file; defaults to <out>/<stem>_trace.csv.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn trace(config: Option<&Path>, overrides: &Overrides, args: &TraceArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(config, overrides)?;
    let spectrum = cfg.spectrum.build()?;
    let pulse = TrianglePulse::new(cfg.grid.phi_i, args.phi_f, args.tau)?;
    let rho0 = initial_state(spectrum.dim())?;
    let r = evolve_traced(&spectrum, &pulse, &cfg.stepper, &rho0)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| cfg.outputs.dir.join(format!("{}_trace.csv", cfg.stem())));
    let mut out = create(&path)?;
    let n = spectrum.dim();
    let io = |e| CliError::io(&path, e);
    for line in cfg.provenance_json().lines() {
        writeln!(out, "# {line}").map_err(io)?;
    }
    writeln!(out, "# phi_f_mPhi0={} tau_ns={}", sig(args.phi_f), sig(args.tau)).map_err(io)?;
    let mut header = vec!["t_ns".to_string()];
    header.extend((1..=n).map(|k| format!("W_{k}{k}")));
    for k in 2..=n {
        header.push(format!("re_W_1{k}"));
        header.push(format!("im_W_1{k}"));
    }
    header.push("trace".into());
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for p in r.trajectory.as_deref().unwrap_or_default() {
        let mut row = vec![sig(p.t)];
        row.extend((0..n).map(|k| sig(p.state.population(k))));
        for k in 1..n {
            let c = p.state.coherence(0, k);
            row.push(sig(c.re));
            row.push(sig(c.im));
        }
        row.push(sig(p.state.trace().re));
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)?;
    println!("wrote {} ({} steps)", path.display(), r.step_count);
    Ok(())
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Map CSV written by `sweep`.
    pub map: PathBuf,
    /// Initial detuning, mΦ0, if the file does not record it.
    #[arg(long, allow_negative_numbers = true)]
    pub phi_i: Option<f64>,
    /// Column used for the slope fit; defaults to the largest Φ_f.
    #[arg(long)]
    pub phi_f_ref: Option<f64>,
    /// Upper bound on the gap; the large-amplitude check then becomes fatal.
    #[arg(long)]
    pub gap_bound: Option<f64>,
    /// Crossing position for the gap fit; defaults to the located one.
    #[arg(long, allow_negative_numbers = true)]
    pub crossing: Option<f64>,
    /// Gap-fit point `phi_f,tau,population`; repeatable.
    #[arg(long = "point", value_parser = parse_point)]
    pub points: Vec<GapPoint>,
    /// Gap of the second anticrossing, for its characteristic rate.
    #[arg(long)]
    pub second_gap: Option<f64>,
}

pub fn analyze(args: &AnalyzeArgs, out: Option<&Path>) -> Result<(), CliError> {
    let map = load_map(&args.map, args.phi_i)?;
    let opts = AnalyzeOptions {
        phi_f_ref: args.phi_f_ref,
        gap_bound: args.gap_bound,
        crossing: args.crossing,
        gap_points: args.points.clone(),
        second_gap: args.second_gap,
        ..AnalyzeOptions::default()
    };
    let fit = analyze_map(&map, &opts)?;
    println!("{fit}");
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| args.map.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    let stem = args.map.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
    let path = dir.join(format!("{stem}_analysis.txt"));
    let mut f = create(&path)?;
    f.write_all(fit.to_key_values().as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| CliError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct FftArgs {
    pub map: PathBuf,
    /// Columns to transform; all when absent. Repeatable.
    #[arg(long = "phi-f", allow_negative_numbers = true)]
    pub phi_f: Vec<f64>,
    #[arg(long, default_value = "rectangular", value_parser = ["rectangular", "hann"])]
    pub window: String,
    /// Transform length as a multiple of the column length.
    #[arg(long, default_value_t = 1)]
    pub zero_pad: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub phi_i: Option<f64>,
}

pub fn fft(args: &FftArgs) -> Result<(), CliError> {
    let map = load_map(&args.map, args.phi_i)?;
    let opts = FftOptions {
        window: if args.window == "hann" { Window::Hann } else { Window::Rectangular },
        zero_pad: args.zero_pad,
    };
    let columns = if args.phi_f.is_empty() {
        map.phi_f_values.clone()
    } else {
        args.phi_f.clone()
    };
    println!("phi_f_mPhi0,omega_rad_per_ns,period_ns,power");
    for pf in columns {
        let s = column_fft(&map, pf, &opts)?;
        println!("{},{},{},{}", sig(s.phi_f), sig(s.dominant_omega), sig(s.period()), sig(s.power));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FitGapArgs {
    /// Measurement `phi_f,tau,population`; repeatable.
    #[arg(long = "point", value_parser = parse_point, required = true)]
    pub points: Vec<GapPoint>,
    /// Branch slope l, rad/(ns·mΦ0).
    #[arg(long)]
    pub slope: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub phi_i: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub crossing: f64,
}

pub fn fit_gap(args: &FitGapArgs) -> Result<(), CliError> {
    let fit = fit_gap_at(&args.points, args.slope, args.phi_i, args.crossing, &GapScanOptions::default())?;
    println!("gap {:.3} GHz (sse {:.2e}, max residual {:.3})", fit.best.gap, fit.best.sse, fit.best.max_residual);
    if fit.candidates.len() > 1 {
        let others: Vec<String> = fit.candidates[1..].iter().map(|c| format!("{:.3}", c.gap)).collect();
        println!("other candidates: {}", others.join(", "));
    }
    Ok(())
}
