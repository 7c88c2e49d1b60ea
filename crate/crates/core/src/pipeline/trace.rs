//! Layer traces on disk.
//!
//! A trace directory holds `manifest.json`:
//!
//! ```json
//! {"model_name": "toy", "layers": [{"name": "l0", "file": "l0.csv", "rows": 100, "cols": 8}], "meta": {}}
//! ```
//!
//! and one file per layer. `.csv` files have one point per row and no
//! header; `.f64` files are raw little-endian doubles in row-major order.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_name: String,
    pub layers: Vec<LayerEntry>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub cloud: PointCloud,
}

/// Ordered per-layer point clouds of one model. Layer widths may differ.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub model_name: String,
    pub layers: Vec<Layer>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerFormat {
    Csv,
    F64,
}

impl LayerFormat {
    fn extension(self) -> &'static str {
        match self {
            LayerFormat::Csv => "csv",
            LayerFormat::F64 => "f64",
        }
    }
}

impl LayerTrace {
    pub fn new(
        model_name: impl Into<String>,
        layers: Vec<(String, PointCloud)>,
        meta: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self> {
        let trace = Self {
            model_name: model_name.into(),
            layers: layers
                .into_iter()
                .map(|(name, cloud)| Layer { name, cloud })
                .collect(),
            meta,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::Usage(format!(
                "insufficient layers: a trace needs at least 2, got {}",
                self.layers.len()
            )));
        }
        let mut seen = HashSet::new();
        for layer in &self.layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::Usage(format!("duplicate layer name {:?}", layer.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Writes the manifest and one file per layer into `dir`, creating it if
    /// needed. Returns the manifest path.
    pub fn write(&self, dir: &Path, format: LayerFormat) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let file = format!(
                "{idx:03}_{}.{}",
                sanitize(&layer.name),
                format.extension()
            );
            let path = dir.join(&file);
            let bytes = match format {
                LayerFormat::Csv => cloud_to_csv(&layer.cloud).into_bytes(),
                LayerFormat::F64 => layer
                    .cloud
                    .as_flat()
                    .iter()
                    .flat_map(|v| v.to_le_bytes())
                    .collect(),
            };
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            entries.push(LayerEntry {
                name: layer.name.clone(),
                file,
                rows: layer.cloud.len(),
                cols: layer.cloud.dim(),
            });
        }
        let manifest = Manifest {
            model_name: self.model_name.clone(),
            layers: entries,
            meta: self.meta.clone(),
        };
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// File-name-safe version of a layer name.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cloud_to_csv(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        for (k, v) in p.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Resolves a trace location: either a manifest file or a directory
/// containing `manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Loads a trace from a manifest (or its directory), checking every layer
/// file against the declared shape.
pub fn load_trace(path: &Path) -> Result<LayerTrace> {
    let manifest_path = manifest_path(path);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::ingestion(&manifest_path, format!("invalid manifest: {e}")))?;
    if manifest.layers.len() < 2 {
        return Err(Error::ingestion(
            &manifest_path,
            format!(
                "insufficient layers: a trace needs at least 2, manifest lists {}",
                manifest.layers.len()
            ),
        ));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let file = base.join(&entry.file);
        let cloud = read_layer(&file, entry)?;
        layers.push((entry.name.clone(), cloud));
    }
    LayerTrace::new(manifest.model_name, layers, manifest.meta)
        .map_err(|e| Error::ingestion(&manifest_path, e.to_string()))
}

fn read_layer(file: &Path, entry: &LayerEntry) -> Result<PointCloud> {
    if entry.rows == 0 || entry.cols == 0 {
        return Err(Error::ingestion(
            file,
            format!("layer {:?} declares an empty shape", entry.name),
        ));
    }
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
    let coords = match ext {
        "csv" => {
            let text = std::fs::read_to_string(file).map_err(|e| unreadable(file, e))?;
            parse_csv_layer(&text, file, entry)?
        }
        "f64" => {
            let bytes = std::fs::read(file).map_err(|e| unreadable(file, e))?;
            let expected = entry.rows * entry.cols * 8;
            if bytes.len() != expected {
                return Err(Error::ingestion(
                    file,
                    format!(
                        "shape mismatch: {} bytes, manifest declares {}x{} ({expected} bytes)",
                        bytes.len(),
                        entry.rows,
                        entry.cols
                    ),
                ));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        }
        other => {
            return Err(Error::ingestion(
                file,
                format!("unsupported layer format {other:?} (expected .csv or .f64)"),
            ))
        }
    };
    PointCloud::from_flat(entry.cols, coords).map_err(|e| Error::ingestion(file, e.to_string()))
}

fn unreadable(file: &Path, e: std::io::Error) -> Error {
    Error::ingestion(file, format!("cannot read layer file: {e}"))
}

fn parse_csv_layer(text: &str, file: &Path, entry: &LayerEntry) -> Result<Vec<f64>> {
    let mut coords = Vec::with_capacity(entry.rows * entry.cols);
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = coords.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::ingestion(file, format!("line {}: not a number: {field:?}", lineno + 1))
            })?;
            coords.push(v);
        }
        if coords.len() - before != entry.cols {
            return Err(Error::ingestion(
                file,
                format!(
                    "shape mismatch: line {} has {} columns, manifest declares {}",
                    lineno + 1,
                    coords.len() - before,
                    entry.cols
                ),
            ));
        }
        rows += 1;
    }
    if rows != entry.rows {
        return Err(Error::ingestion(
            file,
            format!(
                "shape mismatch: file has {rows} rows, manifest declares {}",
                entry.rows
            ),
        ));
    }
    Ok(coords)
}
