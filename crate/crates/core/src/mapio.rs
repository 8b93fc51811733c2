//! Map serialization: long-format CSV and 16-bit plain PGM.
//!
//! CSV layout:
//!
//! ```text
//! # <caller-supplied comment lines>
//! # phi_i_mPhi0=-5
//! phi_f_mPhi0,tau_ns,population
//! -2,0.01,0.999953341
//! ...
//! ```
//!
//! Rows are ordered by Φ_f, then τ; every number is printed with nine
//! significant digits. Lines starting with `#` are comments.

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::sweep::InterferenceMap;

pub const CSV_HEADER: &str = "phi_f_mPhi0,tau_ns,population";
const PHI_I_KEY: &str = "phi_i_mPhi0=";
const PGM_MAXVAL: u32 = 65535;

/// Formats `x` with `digits` significant digits, C `%g` style: fixed
/// notation for decimal exponents in [-4, digits), scientific otherwise,
/// trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes the map as long-format CSV. Each entry of `comments` becomes a
/// `# `-prefixed line ahead of the header.
pub fn write_csv<W: Write>(map: &InterferenceMap, comments: &[String], mut out: W) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "# {PHI_I_KEY}{}", format_significant(map.phi_i(), 9))?;
    writeln!(out, "{CSV_HEADER}")?;
    for (j, &pf) in map.phi_f_values.iter().enumerate() {
        let pf = format_significant(pf, 9);
        for (i, &tau) in map.tau_values.iter().enumerate() {
            writeln!(
                out,
                "{pf},{},{}",
                format_significant(tau, 9),
                format_significant(map.value(i, j), 9)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses a CSV written by [`write_csv`]. `phi_i` overrides (or supplies)
/// the initial detuning recorded in the comment header.
pub fn read_csv<R: BufRead>(input: R, phi_i: Option<f64>) -> Result<InterferenceMap> {
    let mut header_seen = false;
    let mut recorded_phi_i = None;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix(PHI_I_KEY) {
                recorded_phi_i = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    column: "phi_i_mPhi0".into(),
                    message: e.to_string(),
                })?);
            }
            continue;
        }
        if !header_seen {
            if trimmed != CSV_HEADER {
                return Err(Error::Parse {
                    line: line_no,
                    column: "header".into(),
                    message: format!("expected '{CSV_HEADER}', found '{trimmed}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                column: "*".into(),
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let names = ["phi_f_mPhi0", "tau_ns", "population"];
        let mut vals = [0.0; 3];
        for (k, (f, name)) in fields.iter().zip(names).enumerate() {
            vals[k] = f
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    column: name.into(),
                    message: format!("'{}' is not a finite number", f.trim()),
                })?;
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 0,
            column: "header".into(),
            message: "missing header line".into(),
        });
    }
    if rows.is_empty() {
        return Err(invalid("map file contains no data rows"));
    }
    let phi_i = phi_i
        .or(recorded_phi_i)
        .ok_or_else(|| invalid("initial detuning not recorded in file and not supplied"))?;

    let mut phi_f_values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    phi_f_values.sort_by(f64::total_cmp);
    phi_f_values.dedup();
    let mut tau_values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    tau_values.sort_by(f64::total_cmp);
    tau_values.dedup();
    let (nf, nt) = (phi_f_values.len(), tau_values.len());
    if rows.len() != nf * nt {
        return Err(invalid(format!(
            "map is not a full grid: {} rows for {nf} phi_f x {nt} tau values",
            rows.len()
        )));
    }
    let mut values = vec![f64::NAN; nf * nt];
    for &(pf, tau, w) in &rows {
        let j = phi_f_values.binary_search_by(|v| v.total_cmp(&pf)).expect("present");
        let i = tau_values.binary_search_by(|v| v.total_cmp(&tau)).expect("present");
        let slot = &mut values[i * nf + j];
        if !slot.is_nan() {
            return Err(invalid(format!("duplicate cell phi_f = {pf}, tau = {tau}")));
        }
        *slot = w;
    }
    InterferenceMap::from_parts(phi_i, phi_f_values, tau_values, values)
}

/// Writes a plain (P2) 16-bit grayscale PGM: rows are τ descending, columns
/// Φ_f ascending, gray level `round(population · 65535)`.
pub fn write_pgm<W: Write>(map: &InterferenceMap, comments: &[String], mut out: W) -> Result<()> {
    writeln!(out, "P2")?;
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "{} {}", map.n_phi_f(), map.n_tau())?;
    writeln!(out, "{PGM_MAXVAL}")?;
    for i in (0..map.n_tau()).rev() {
        let mut line = String::new();
        for j in 0..map.n_phi_f() {
            let level = (map.value(i, j).clamp(0.0, 1.0) * PGM_MAXVAL as f64).round() as u32;
            let token = level.to_string();
            // plain PGM asks for lines of at most 70 characters
            if !line.is_empty() && line.len() + 1 + token.len() > 70 {
                writeln!(out, "{line}")?;
                line.clear();
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&token);
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}
