use std::io::{self, Write};

use serde::Serialize;

use goursat_core::ReportRow;

use crate::config::Format;

pub const STUDY_HEADER: &str = "n1,n2,h1,h2,m,delta,norm1_delta,wall_ms,p_order";

/// One study row with the stable CSV/JSON key names.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRecord {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    pub m: usize,
    pub delta: f64,
    pub norm1_delta: f64,
    pub wall_ms: f64,
    pub p_order: usize,
}

impl StudyRecord {
    pub fn from_row(r: &ReportRow, timing: bool) -> Self {
        Self {
            n1: r.n1,
            n2: r.n2,
            h1: r.h1,
            h2: r.h2,
            m: r.m,
            delta: r.delta,
            norm1_delta: r.norm1_delta,
            wall_ms: if timing { r.wall_ms } else { 0.0 },
            p_order: r.p,
        }
    }
}

/// A sampled point of the partial sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
}

/// 17 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_study(w: &mut dyn Write, rows: &[StudyRecord], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(w, "{STUDY_HEADER}")?;
            for r in rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    r.n1,
                    r.n2,
                    sci(r.h1),
                    sci(r.h2),
                    r.m,
                    sci(r.delta),
                    sci(r.norm1_delta),
                    sci(r.wall_ms),
                    r.p_order
                )?;
            }
        }
        Format::Json => write_json(w, rows)?,
    }
    Ok(())
}

pub fn write_samples(w: &mut dyn Write, samples: &[Sample], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            let with_exact = samples.first().is_some_and(|s| s.exact.is_some());
            writeln!(w, "{}", if with_exact { "x,y,u,exact,error" } else { "x,y,u" })?;
            for s in samples {
                write!(w, "{},{},{}", sci(s.x), sci(s.y), sci(s.u))?;
                if let (Some(e), Some(d)) = (s.exact, s.error) {
                    write!(w, ",{},{}", sci(e), sci(d))?;
                }
                writeln!(w)?;
            }
        }
        Format::Json => write_json(w, samples)?,
    }
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(w: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}
