//! Plain-text artifacts: mesh JSON documents, sparse matrices in Matrix
//! Market coordinate format, dense CSV matrices and coefficient vectors.
//!
//! Mesh document fields (`format = "tracelab-mesh"`, `version = 1`):
//!
//! - `dim`: 2 or 3
//! - `domain`: `{ "lo": [..], "hi": [..] }`, `dim` coordinates each
//! - `vertices`: list of `dim`-coordinate points
//! - `cells`: list of `{ "vertices": [..], "faces": [..] }`
//! - `faces`: list of `{ "vertices": [..], "owners": [t, t' or null],
//!   "side": "xmin" | ... | null }`
//!
//! Owners and sides are derived data; they are written for readers and
//! checked against the rebuilt mesh on load.
//!
//! Coefficient files start with two header lines, then one value per line in
//! DoF-map order:
//!
//! ```text
//! # tracelab hybrid-vector v1
//! # dim=2 cells=16 faces=40 k_cell=1 k_face=1 len=208
//! ```
//!
//! with `trace` in place of `hybrid-vector` for boundary traces (whose
//! values are the boundary-face blocks in ascending face order).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TraceLabError};
use crate::mesh::{BoxDomain, Point, PolytopalMesh};
use crate::space::{BoundaryTrace, DofMap, HybridVector};

pub const MESH_FORMAT: &str = "tracelab-mesh";
pub const MESH_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub vertices: Vec<usize>,
    pub faces: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceRecord {
    pub vertices: Vec<usize>,
    pub owners: (usize, Option<usize>),
    pub side: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub domain: DomainRecord,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<CellRecord>,
    pub faces: Vec<FaceRecord>,
}

fn artifact(path: &str, reason: impl Into<String>) -> TraceLabError {
    TraceLabError::Artifact { path: path.into(), reason: reason.into() }
}

fn to_point(c: &[f64], dim: usize) -> Option<Point> {
    (c.len() == dim).then(|| {
        let mut p = Point::zeros();
        p.as_mut_slice()[..dim].copy_from_slice(c);
        p
    })
}

impl MeshDocument {
    pub fn from_mesh(mesh: &PolytopalMesh) -> Self {
        let d = mesh.dim;
        MeshDocument {
            format: MESH_FORMAT.into(),
            version: MESH_VERSION,
            dim: d,
            domain: DomainRecord { lo: mesh.domain.lo.as_slice()[..d].to_vec(), hi: mesh.domain.hi.as_slice()[..d].to_vec() },
            vertices: mesh.vertices.iter().map(|v| v.as_slice()[..d].to_vec()).collect(),
            cells: mesh.cells.iter().map(|c| CellRecord { vertices: c.vertices.clone(), faces: c.faces.clone() }).collect(),
            faces: mesh
                .faces
                .iter()
                .map(|f| FaceRecord { vertices: f.vertices.clone(), owners: f.owners, side: f.side.map(|s| s.name()) })
                .collect(),
        }
    }

    /// Rebuilds the mesh; `path` names the source in error messages.
    pub fn to_mesh(&self, path: &str) -> Result<PolytopalMesh> {
        if self.format != MESH_FORMAT || self.version != MESH_VERSION {
            return Err(artifact(path, format!("unknown format {} v{}", self.format, self.version)));
        }
        let d = self.dim;
        let bad = |what: &str| artifact(path, format!("{what} must have {d} coordinates"));
        let mut domain = BoxDomain::unit();
        domain.lo = to_point(&self.domain.lo, d).ok_or_else(|| bad("domain.lo"))?;
        let mut hi = to_point(&self.domain.hi, d).ok_or_else(|| bad("domain.hi"))?;
        for i in d..3 {
            hi[i] = 1.0;
        }
        domain.hi = hi;
        let vertices = self.vertices.iter().map(|v| to_point(v, d).ok_or_else(|| bad("vertex"))).collect::<Result<_>>()?;
        let mesh = PolytopalMesh::from_parts(
            d,
            domain,
            vertices,
            self.cells.iter().map(|c| c.vertices.clone()).collect(),
            self.faces.iter().map(|f| f.vertices.clone()).collect(),
            self.cells.iter().map(|c| c.faces.clone()).collect(),
        )?;
        for (i, (rec, face)) in self.faces.iter().zip(&mesh.faces).enumerate() {
            if rec.owners != face.owners || rec.side != face.side.map(|s| s.name()) {
                return Err(artifact(path, format!("face {i}: recorded owners/side disagree with the geometry")));
            }
        }
        Ok(mesh)
    }
}

pub fn mesh_to_json(mesh: &PolytopalMesh) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MeshDocument::from_mesh(mesh))?)
}

pub fn mesh_from_json(text: &str, path: &str) -> Result<PolytopalMesh> {
    let doc: MeshDocument = serde_json::from_str(text).map_err(|e| artifact(path, e.to_string()))?;
    doc.to_mesh(path)
}

/// Matrix Market coordinate format (1-based indices, general storage).
pub fn csc_to_matrix_market(a: &CscMatrix<f64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), a.nnz()));
    for (i, j, v) in a.triplet_iter() {
        out.push_str(&format!("{} {} {v:e}\n", i + 1, j + 1));
    }
    out
}

/// Dense matrix as CSV, preceded by a `# rows=R cols=C` line.
pub fn dense_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = format!("# rows={} cols={}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn dense_from_csv(text: &str, path: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| artifact(path, "empty file"))?;
    let dims: Vec<usize> = header
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('=').and_then(|(_, v)| v.parse().ok()))
        .collect();
    let [r, c] = dims[..] else { return Err(artifact(path, "expected header `# rows=R cols=C`")) };
    let mut data = Vec::with_capacity(r * c);
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| artifact(path, format!("row {i}: {e}")))?;
        if row.len() != c {
            return Err(artifact(path, format!("row {i} has {} entries, expected {c}", row.len())));
        }
        data.extend(row);
    }
    if data.len() != r * c {
        return Err(artifact(path, format!("expected {r} rows")));
    }
    Ok(DMatrix::from_row_slice(r, c, &data))
}

fn vector_header(kind: &str, map: &DofMap, len: usize) -> String {
    format!(
        "# tracelab {kind} v1\n# dim={} cells={} faces={} k_cell={} k_face={} len={len}\n",
        map.dim,
        map.cell_offsets.len(),
        map.face_offsets.len(),
        map.degrees.cell,
        map.degrees.face
    )
}

fn write_values(mut head: String, data: &DVector<f64>) -> String {
    for v in data.iter() {
        head.push_str(&format!("{v:e}\n"));
    }
    head
}

fn read_values(kind: &str, map: &DofMap, len: usize, text: &str, path: &str) -> Result<DVector<f64>> {
    let expected = vector_header(kind, map, len);
    let mut lines = text.lines();
    for want in expected.lines() {
        let got = lines.next().unwrap_or_default();
        if got != want {
            return Err(artifact(path, format!("header mismatch: expected `{want}`, found `{got}`")));
        }
    }
    let values: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|e| artifact(path, format!("value {i}: {e}"))))
        .collect::<Result<_>>()?;
    if values.len() != len {
        return Err(artifact(path, format!("expected {len} values, found {}", values.len())));
    }
    Ok(DVector::from_vec(values))
}

pub fn hybrid_vector_to_text(v: &HybridVector) -> String {
    write_values(vector_header("hybrid-vector", &v.map, v.data.len()), &v.data)
}

pub fn hybrid_vector_from_text(map: Arc<DofMap>, text: &str, path: &str) -> Result<HybridVector> {
    let data = read_values("hybrid-vector", &map, map.total(), text, path)?;
    HybridVector::from_data(map, data)
}

pub fn trace_to_text(w: &BoundaryTrace) -> String {
    write_values(vector_header("trace", &w.map, w.data.len()), &w.data)
}

pub fn trace_from_text(map: Arc<DofMap>, text: &str, path: &str) -> Result<BoundaryTrace> {
    let data = read_values("trace", &map, map.n_bd, text, path)?;
    BoundaryTrace::from_data(map, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, build_perturbed_quads};
    use crate::space::{DegreeConfig, HybridSpace};

    #[test]
    fn mesh_round_trip() {
        for mesh in [build_cartesian(2, 3).unwrap(), build_perturbed_quads(4, 0.2, 1).unwrap(), build_cartesian(3, 2).unwrap()] {
            let json = mesh_to_json(&mesh).unwrap();
            let back = mesh_from_json(&json, "mem").unwrap();
            assert_eq!(back.vertices, mesh.vertices);
            assert_eq!(back.num_faces(), mesh.num_faces());
            assert_eq!(mesh_to_json(&back).unwrap(), json);
        }
        let err = mesh_from_json("{\"format\": 1}", "bad.json").unwrap_err();
        assert!(err.to_string().contains("bad.json"));
    }

    #[test]
    fn vectors_round_trip_and_check_headers() {
        let mesh = Arc::new(build_cartesian(2, 2).unwrap());
        let space = HybridSpace::new(mesh.clone(), DegreeConfig::new(2, 1).unwrap()).unwrap();
        let v = space.random(1, 0);
        let text = hybrid_vector_to_text(&v);
        assert!(text.starts_with("# tracelab hybrid-vector v1\n# dim=2 cells=4 faces=12 k_cell=2 k_face=1 len="));
        assert_eq!(hybrid_vector_from_text(space.map.clone(), &text, "v").unwrap(), v);
        let w = space.random_trace(1, 1);
        assert_eq!(trace_from_text(space.map.clone(), &trace_to_text(&w), "w").unwrap(), w);
        let other = HybridSpace::new(mesh, DegreeConfig::uniform(1).unwrap()).unwrap();
        assert!(hybrid_vector_from_text(other.map.clone(), &text, "v").is_err());
    }

    #[test]
    fn matrices() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 0.0, 1e-20, 3.0, 7.25]);
        assert_eq!(dense_from_csv(&dense_to_csv(&a), "a").unwrap(), a);
        let coo = nalgebra_sparse::CooMatrix::try_from_triplets(2, 2, vec![0, 1], vec![1, 1], vec![2.0, -1.0]).unwrap();
        let mm = csc_to_matrix_market(&CscMatrix::from(&coo));
        assert_eq!(mm, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 2e0\n2 2 -1e0\n");
    }
}
