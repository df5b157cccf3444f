//! TOML model files.
//!
//! ```toml
//! format = 1
//! dim = 2
//!
//! [vertices]
//! kind = "finite"        # "finite", "halfline" or "line"
//! sites = 4              # finite only
//! boundary = "reflecting"
//!
//! [bulk]
//! up = [[1, 0], [1, -1]]
//! down = [[1, 1], [0, -1]]
//! hamiltonian = [[0, [0, 1]], [[0, -1], 0]]
//!
//! [[site]]
//! index = 0
//! up = [[2, 0], [0, 1]]
//! ```
//!
//! Entries are real numbers or `[re, im]` pairs. Omitted operators are zero and
//! unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dynamics::{DensityOperator, DynamicsError};
use crate::lindblad::{Boundary, Model, ModelError, SiteOperators, SiteOverride, VertexSet};
use crate::matcore::{c64, CMat};

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("key `{key}`: {source}")]
    Model { key: String, source: ModelError },
    #[error("state: {0}")]
    State(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

type Table = Vec<Vec<Entry>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Operators {
    up: Option<Table>,
    down: Option<Table>,
    stay: Option<Table>,
    hamiltonian: Option<Table>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteEntry {
    index: i64,
    up: Option<Table>,
    down: Option<Table>,
    stay: Option<Table>,
    hamiltonian: Option<Table>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum Kind {
    Finite,
    Halfline,
    Line,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum BoundaryKind {
    Reflecting,
    Absorbing,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Vertices {
    kind: Kind,
    sites: Option<usize>,
    boundary: Option<BoundaryKind>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    format: u32,
    dim: usize,
    description: Option<String>,
    vertices: Vertices,
    bulk: Operators,
    #[serde(default)]
    site: Vec<SiteEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    format: u32,
    rho: Table,
}

fn matrix(key: &str, t: &Table, d: usize) -> Result<CMat, ModelFileError> {
    let invalid = |reason: String| ModelFileError::Invalid { key: key.to_string(), reason };
    if t.len() != d {
        return Err(invalid(format!("expected {d} rows, found {}", t.len())));
    }
    let mut m = CMat::zeros(d, d);
    for (r, row) in t.iter().enumerate() {
        if row.len() != d {
            return Err(invalid(format!("row {r} has {} entries, expected {d}", row.len())));
        }
        for (c, e) in row.iter().enumerate() {
            m[(r, c)] = match *e {
                Entry::Real(x) => c64(x, 0.0),
                Entry::Complex([re, im]) => c64(re, im),
            };
        }
    }
    Ok(m)
}

fn optional(key: String, t: &Option<Table>, d: usize) -> Result<Option<CMat>, ModelFileError> {
    t.as_ref().map(|t| matrix(&key, t, d)).transpose()
}

/// A parsed model together with its optional description.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: Model,
    pub description: Option<String>,
}

pub fn parse_model(text: &str) -> Result<ModelFile, ModelFileError> {
    let raw: RawModel = toml::from_str(text).map_err(|e| ModelFileError::Parse(e.to_string()))?;
    if raw.format != 1 {
        return Err(ModelFileError::Invalid { key: "format".into(), reason: format!("unsupported version {}", raw.format) });
    }
    let d = raw.dim;
    if d == 0 {
        return Err(ModelFileError::Invalid { key: "dim".into(), reason: "must be positive".into() });
    }
    let vertices = match raw.vertices.kind {
        Kind::Finite => {
            let sites = raw
                .vertices
                .sites
                .ok_or_else(|| ModelFileError::Invalid { key: "vertices.sites".into(), reason: "required for finite chains".into() })?;
            let boundary = match raw.vertices.boundary.unwrap_or(BoundaryKind::Reflecting) {
                BoundaryKind::Reflecting => Boundary::Reflecting,
                BoundaryKind::Absorbing => Boundary::Absorbing,
            };
            VertexSet::Finite { sites, boundary }
        }
        Kind::Halfline | Kind::Line => {
            for (key, present) in [("vertices.sites", raw.vertices.sites.is_some()), ("vertices.boundary", raw.vertices.boundary.is_some())] {
                if present {
                    return Err(ModelFileError::Invalid { key: key.into(), reason: "only allowed for finite chains".into() });
                }
            }
            if matches!(raw.vertices.kind, Kind::Line) {
                VertexSet::Line
            } else {
                VertexSet::HalfLine
            }
        }
    };
    let zero = CMat::zeros(d, d);
    let op = |name: &str, t: &Option<Table>| -> Result<CMat, ModelFileError> {
        Ok(optional(format!("bulk.{name}"), t, d)?.unwrap_or_else(|| zero.clone()))
    };
    let bulk = SiteOperators {
        up: op("up", &raw.bulk.up)?,
        down: op("down", &raw.bulk.down)?,
        stay: op("stay", &raw.bulk.stay)?,
        hamiltonian: op("hamiltonian", &raw.bulk.hamiltonian)?,
    };
    let mut model = Model::new(vertices, bulk).map_err(|source| ModelFileError::Model { key: "bulk".into(), source })?;
    for (k, s) in raw.site.iter().enumerate() {
        let key = |name: &str| format!("site[{k}].{name}");
        let o = SiteOverride {
            up: optional(key("up"), &s.up, d)?,
            down: optional(key("down"), &s.down, d)?,
            stay: optional(key("stay"), &s.stay, d)?,
            hamiltonian: optional(key("hamiltonian"), &s.hamiltonian, d)?,
        };
        model = model.with_override(s.index, o).map_err(|source| ModelFileError::Model { key: format!("site[{k}]"), source })?;
    }
    Ok(ModelFile { model, description: raw.description })
}

pub fn load_model(path: &Path) -> Result<ModelFile, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io { path: path.display().to_string(), source })?;
    parse_model(&text)
}

/// Reads `rho = [[…]]` as a density operator.
pub fn parse_state(text: &str) -> Result<DensityOperator, ModelFileError> {
    let raw: RawState = toml::from_str(text).map_err(|e| ModelFileError::Parse(e.to_string()))?;
    if raw.format != 1 {
        return Err(ModelFileError::Invalid { key: "format".into(), reason: format!("unsupported version {}", raw.format) });
    }
    let d = raw.rho.len();
    Ok(DensityOperator::new(matrix("rho", &raw.rho, d)?)?)
}

pub fn load_state(path: &Path) -> Result<DensityOperator, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io { path: path.display().to_string(), source })?;
    parse_state(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FINITE: &str = r#"
format = 1
dim = 2
[vertices]
kind = "finite"
sites = 4
[bulk]
up = [[1, 0], [1, -1]]
down = [[1, 1], [0, -1]]
"#;

    #[test]
    fn parses_finite_model() {
        let f = parse_model(FINITE).unwrap();
        assert_eq!(f.model.vertices(), VertexSet::Finite { sites: 4, boundary: Boundary::Reflecting });
        assert_eq!(f.model.up(2)[(1, 1)], c64(-1.0, 0.0));
    }

    #[test]
    fn rejects_unknown_key() {
        let text = FINITE.replace("sites = 4", "sites = 4\ncolour = 3");
        let err = parse_model(&text).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn rejects_bad_shape_with_key() {
        let text = FINITE.replace("down = [[1, 1], [0, -1]]", "down = [[1, 1, 0], [0, -1]]");
        let err = parse_model(&text).unwrap_err().to_string();
        assert!(err.contains("bulk.down"), "{err}");
    }

    #[test]
    fn complex_entries() {
        let s = parse_state("format = 1\nrho = [[0.5, [0, 0.25]], [[0, -0.25], 0.5]]").unwrap();
        assert_eq!(s.matrix()[(0, 1)], c64(0.0, 0.25));
    }
}
