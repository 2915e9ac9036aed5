//! Deterministic CSV and JSON serialization, plus the round-trip validator
//! behind `--validate`.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! finite f64 exactly; identical inputs therefore produce byte-identical
//! files. CSVs use a header row, comma separators, `.` decimal points, and
//! LF line endings.

use std::path::Path;

use conlab::dynamics::Trajectory;
use serde::Serialize;

use crate::error::{CliError, Result};

/// One float at 17 significant digits, exact under f64 round-trip.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|err| CliError::Validation(format!("cannot write {}: {err}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|err| {
        CliError::Validation(format!(
            "cannot create output directory {}: {err}",
            dir.display()
        ))
    })
}

/// Writes a trajectory as `t, x_1..x_M, w_<k>_<j>, cost_acc,
/// disagreement_acc` with 1-based weight labels. Edge weights only by
/// default; `all_pairs` adds every pair's column.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, all_pairs: bool) -> Result<()> {
    let topology = traj.topology();
    let m = topology.node_count();
    let mut columns: Vec<usize> = Vec::new();
    let mut header = String::from("t");
    for k in 1..=m {
        header.push_str(&format!(",x_{k}"));
    }
    for (idx, (k, j)) in topology.pairs().enumerate() {
        if all_pairs || topology.edge_flags()[idx] {
            columns.push(idx);
            header.push_str(&format!(",w_{}_{}", k + 1, j + 1));
        }
    }
    header.push_str(",cost_acc,disagreement_acc\n");

    let mut body = header;
    for sample in traj.samples() {
        body.push_str(&format_float(sample.time));
        for value in &sample.x {
            body.push(',');
            body.push_str(&format_float(*value));
        }
        for &idx in &columns {
            body.push(',');
            body.push_str(&format_float(sample.w[idx]));
        }
        body.push(',');
        body.push_str(&format_float(sample.cost_acc));
        body.push(',');
        body.push_str(&format_float(sample.disagreement_acc));
        body.push('\n');
    }
    write_text(path, &body)
}

/// Writes the Lyapunov and convergence-coefficient series as
/// `t, V, V_dot, rho`; skipped coefficient samples appear as empty cells.
pub fn write_analysis_csv(
    path: &Path,
    times: &[f64],
    v_series: &[f64],
    v_dot_series: &[f64],
    rho_series: &[Option<f64>],
) -> Result<()> {
    let mut body = String::from("t,V,V_dot,rho\n");
    for i in 0..times.len() {
        body.push_str(&format_float(times[i]));
        body.push(',');
        body.push_str(&format_float(v_series[i]));
        body.push(',');
        body.push_str(&format_float(v_dot_series[i]));
        body.push(',');
        if let Some(rho) = rho_series[i] {
            body.push_str(&format_float(rho));
        }
        body.push('\n');
    }
    write_text(path, &body)
}

/// Writes sweep rows as `alpha, inv_alpha, convergence_time`, ascending in
/// alpha.
pub fn write_sweep_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut body = String::from("alpha,inv_alpha,convergence_time\n");
    for (alpha, inv_alpha, time) in rows {
        body.push_str(&format_float(*alpha));
        body.push(',');
        body.push_str(&format_float(*inv_alpha));
        body.push(',');
        body.push_str(&format_float(*time));
        body.push('\n');
    }
    write_text(path, &body)
}

/// Writes the running-cost trace as `t, jr_h`.
pub fn write_cost_csv(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut body = String::from("t,jr_h\n");
    for (time, cost) in rows {
        body.push_str(&format_float(*time));
        body.push(',');
        body.push_str(&format_float(*cost));
        body.push('\n');
    }
    write_text(path, &body)
}

/// Writes pretty-printed JSON with a trailing newline; key order follows
/// the type's field order.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|err| {
        CliError::Numerical(format!("cannot serialize {}: {err}", path.display()))
    })?;
    text.push('\n');
    write_text(path, &text)
}

fn monotone_bits(value: f64) -> u64 {
    let bits = value.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Distance between two floats in units in the last place.
pub fn ulp_distance(a: f64, b: f64) -> u64 {
    monotone_bits(a).abs_diff(monotone_bits(b))
}

/// Re-reads a CSV written by this module and verifies its shape and that
/// every cell survives a parse/format/parse round-trip within 1 ulp.
///
/// A failure means the serializer is broken, so it maps to the numerical
/// exit code.
pub fn validate_csv(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|err| {
        CliError::Numerical(format!(
            "validation cannot re-read {}: {err}",
            path.display()
        ))
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Numerical(format!("validation: {} is empty", path.display())))?;
    let column_count = header.split(',').count();

    for (line_number, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != column_count {
            return Err(CliError::Numerical(format!(
                "validation: {} row {} has {} cells, header has {}",
                path.display(),
                line_number + 2,
                cells.len(),
                column_count
            )));
        }
        for cell in cells {
            if cell.is_empty() {
                continue;
            }
            let parsed: f64 = cell.parse().map_err(|_| {
                CliError::Numerical(format!(
                    "validation: {} row {} holds unparsable cell '{cell}'",
                    path.display(),
                    line_number + 2
                ))
            })?;
            let reparsed: f64 = format_float(parsed)
                .parse()
                .expect("formatter output parses");
            if ulp_distance(parsed, reparsed) > 1 {
                return Err(CliError::Numerical(format!(
                    "validation: {} cell '{cell}' drifts by more than 1 ulp on round-trip",
                    path.display()
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatted_floats_round_trip_exactly() {
        for value in [
            0.0,
            1.0,
            -1.5,
            1e-3,
            62.0 / 6.0,
            std::f64::consts::PI,
            1.7e300,
            -3.2e-12,
        ] {
            let parsed: f64 = format_float(value).parse().unwrap();
            assert_eq!(parsed.to_bits(), value.to_bits(), "value {value}");
        }
    }

    #[test]
    fn ulp_distance_counts_neighbors() {
        assert_eq!(ulp_distance(1.0, 1.0), 0);
        assert_eq!(ulp_distance(1.0, f64::from_bits(1.0f64.to_bits() + 1)), 1);
        assert_eq!(
            ulp_distance(-0.0, 0.0),
            1,
            "signed zeros sit adjacent in the total order"
        );
        assert!(ulp_distance(1.0, 2.0) > 1);
    }

    #[test]
    fn validator_accepts_own_output_and_rejects_junk() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.csv");
        std::fs::write(
            &good,
            format!("t,V\n{},{}\n", format_float(0.1), format_float(-2.5)),
        )
        .unwrap();
        validate_csv(&good).unwrap();

        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "t,V\n1.0\n").unwrap();
        assert!(validate_csv(&ragged).is_err());

        let junk = dir.path().join("junk.csv");
        std::fs::write(&junk, "t,V\n1.0,abc\n").unwrap();
        assert!(validate_csv(&junk).is_err());
    }
}
