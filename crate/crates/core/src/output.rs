//! Trajectory files (CSV and JSON) and gnuplot scripts.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{CaseTag, InitialInvariants};
use crate::fields::Vec3;
use crate::integrate::{DriftSummary, TrajectorySample};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "t,x,y,z,vx,vy,vz,speed_drift,p0_drift,q0_drift";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(mut w: W, samples: &[TrajectorySample]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in samples {
        let row = [
            s.t, s.pos.x, s.pos.y, s.pos.z, s.vel.x, s.vel.y, s.vel.z, s.speed_drift, s.p0_drift,
            s.q0_drift,
        ];
        let line: Vec<String> = row.iter().map(|v| num(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TrajectorySample>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CSV_HEADER {
        return Err(Error::Usage(format!("expected CSV header `{CSV_HEADER}`")));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Usage(format!("row {}: {e}", n + 2)))?;
        if v.len() != 10 {
            return Err(Error::Usage(format!("row {}: expected 10 columns, got {}", n + 2, v.len())));
        }
        out.push(TrajectorySample {
            t: v[0],
            pos: Vec3::new(v[1], v[2], v[3]),
            vel: Vec3::new(v[4], v[5], v[6]),
            speed_drift: v[7],
            p0_drift: v[8],
            q0_drift: v[9],
        });
    }
    Ok(out)
}

/// Top-level JSON document of a trajectory run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument<C> {
    pub config: C,
    pub case: CaseTag,
    pub invariants: Option<InitialInvariants>,
    pub samples: Vec<TrajectorySample>,
    pub summary: DriftSummary,
}

pub fn write_json<W: Write, C: Serialize>(w: W, doc: &TrajectoryDocument<C>) -> Result<()> {
    serde_json::to_writer_pretty(w, doc)?;
    Ok(())
}

/// Reads samples from a CSV or JSON trajectory file, detected by content.
pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectorySample>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let doc: TrajectoryDocument<serde_json::Value> = serde_json::from_str(&text)?;
        Ok(doc.samples)
    } else {
        read_csv(text.as_bytes())
    }
}

/// A gnuplot script with the samples inlined, drawing the space curve and
/// the radius `sqrt(x² + y²)` against `t`.
pub fn gnuplot_script(samples: &[TrajectorySample], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {title}");
    s.push_str("$curve << EOD\n");
    for p in samples {
        let rho = p.pos.x.hypot(p.pos.y);
        let _ = writeln!(s, "{} {} {} {} {}", num(p.t), num(p.pos.x), num(p.pos.y), num(p.pos.z), num(rho));
    }
    s.push_str("EOD\n\n");
    s.push_str("set multiplot layout 1,2\n");
    let _ = writeln!(s, "set title \"{} (space curve)\"", title.replace('"', "'"));
    s.push_str("set xlabel \"x\"\nset ylabel \"y\"\nset zlabel \"z\"\nset view equal xy\n");
    s.push_str("splot $curve using 2:3:4 with lines notitle\n");
    let _ = writeln!(s, "set title \"{} (radius)\"", title.replace('"', "'"));
    s.push_str("set xlabel \"t\"\nset ylabel \"rho\"\n");
    s.push_str("plot $curve using 1:5 with lines notitle\n");
    s.push_str("unset multiplot\n");
    s
}

/// `(t, ρ)` pairs recovered from an emitted gnuplot script.
pub fn script_radius_profile(script: &str) -> Vec<(f64, f64)> {
    let mut inside = false;
    let mut out = Vec::new();
    for line in script.lines() {
        if line.starts_with("$curve") {
            inside = true;
            continue;
        }
        if line == "EOD" {
            break;
        }
        if inside {
            let cols: Vec<f64> = line.split_whitespace().filter_map(|c| c.parse().ok()).collect();
            if cols.len() == 5 {
                out.push((cols[0], cols[4]));
            }
        }
    }
    out
}
