//! Diagram files: CSV with columns `hom_dim,birth,death`, infinite deaths
//! written as `inf`. One file may hold several homology dimensions.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::persistence::{DiagramPoint, PersistenceDiagram};

pub const HEADER: &str = "hom_dim,birth,death";

pub fn to_csv(diagrams: &[PersistenceDiagram]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for d in diagrams {
        for p in &d.pairs {
            let death = if p.is_essential() {
                "inf".to_string()
            } else {
                p.death.to_string()
            };
            let _ = writeln!(out, "{},{},{}", d.hom_dim, p.birth, death);
        }
    }
    out
}

pub fn write_csv(path: &Path, diagrams: &[PersistenceDiagram]) -> Result<()> {
    std::fs::write(path, to_csv(diagrams)).map_err(|e| Error::io(path, e))
}

/// Parses diagram CSV text. The header row is optional. Returns one diagram
/// per homology dimension from 0 up to the largest dimension present; the
/// `max_scale` of each is the largest finite death seen (or 0 when empty).
pub fn from_csv(text: &str, origin: &Path) -> Result<Vec<PersistenceDiagram>> {
    let mut by_dim: Vec<Vec<DiagramPoint>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("hom_dim")) {
            continue;
        }
        let bad = |what: &str| Error::ingestion(origin, format!("line {}: {what}", lineno + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad("expected 3 columns"));
        }
        let dim: usize = fields[0].parse().map_err(|_| bad("bad hom_dim"))?;
        let birth = parse_value(fields[1]).ok_or_else(|| bad("bad birth"))?;
        let death = parse_value(fields[2]).ok_or_else(|| bad("bad death"))?;
        if !birth.is_finite() || birth < 0.0 || death < birth {
            return Err(bad("pair must satisfy 0 <= birth <= death"));
        }
        if by_dim.len() <= dim {
            by_dim.resize_with(dim + 1, Vec::new);
        }
        by_dim[dim].push(DiagramPoint::new(birth, death));
    }
    by_dim
        .into_iter()
        .enumerate()
        .map(|(dim, pairs)| {
            let max_scale = pairs
                .iter()
                .filter(|p| !p.is_essential())
                .map(|p| p.death)
                .fold(0.0, f64::max);
            PersistenceDiagram::new(dim, pairs, max_scale)
                .map_err(|e| Error::ingestion(origin, e.to_string()))
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<PersistenceDiagram>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_csv(&text, path)
}

fn parse_value(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}
