//! The hybrid space: one polynomial block per cell and per face.
//!
//! Global DoF layout is `[cells | interior faces | boundary faces]`. Within
//! each group entities appear in ascending index order and each block lists
//! its local basis in [`crate::basis`] order. The boundary slice is therefore
//! exactly the trace, with boundary faces in ascending face index.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::{poly_dim, MonomialBasis};
use crate::error::{invalid, Result, TraceLabError};
use crate::mesh::{Point, PolytopalMesh};
use crate::quadrature::{cell_rule, face_rule, QuadRule};
use crate::rng::uniform_vec;

/// Largest cell or face degree accepted.
pub const MAX_HYBRID_DEGREE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DegreeConfig {
    pub cell: usize,
    pub face: usize,
}

impl DegreeConfig {
    pub fn new(cell: usize, face: usize) -> Result<Self> {
        if cell > MAX_HYBRID_DEGREE || face > MAX_HYBRID_DEGREE {
            return Err(invalid(format!(
                "degrees (cell {cell}, face {face}) outside 0..={MAX_HYBRID_DEGREE}"
            )));
        }
        Ok(DegreeConfig { cell, face })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(k, k)
    }

    pub fn k(&self) -> usize {
        self.cell.max(self.face)
    }

    /// Quadrature exactness needed for products of two basis functions.
    pub fn quad_degree(&self) -> usize {
        2 * self.k() + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub dim: usize,
    pub degrees: DegreeConfig,
    /// Local DoF count per cell.
    pub n_cell_local: usize,
    /// Local DoF count per face.
    pub n_face_local: usize,
    pub cell_offsets: Vec<usize>,
    /// Global offset of every face block, indexed by face.
    pub face_offsets: Vec<usize>,
    /// Position of each face in the boundary face list, if on the boundary.
    pub boundary_position: Vec<Option<usize>>,
    pub boundary_faces: Vec<usize>,
    pub interior_faces: Vec<usize>,
    pub n_cell: usize,
    pub n_int: usize,
    pub n_bd: usize,
}

impl DofMap {
    pub fn new(mesh: &PolytopalMesh, degrees: DegreeConfig) -> Self {
        let nc = poly_dim(mesh.dim, degrees.cell);
        let nf = poly_dim(mesh.dim - 1, degrees.face);
        let n_cell = nc * mesh.num_cells();
        let n_int = nf * mesh.interior_faces.len();
        let n_bd = nf * mesh.boundary_faces.len();
        let cell_offsets = (0..mesh.num_cells()).map(|t| t * nc).collect();
        let mut face_offsets = vec![0; mesh.num_faces()];
        let mut boundary_position = vec![None; mesh.num_faces()];
        for (i, &f) in mesh.interior_faces.iter().enumerate() {
            face_offsets[f] = n_cell + i * nf;
        }
        for (i, &f) in mesh.boundary_faces.iter().enumerate() {
            face_offsets[f] = n_cell + n_int + i * nf;
            boundary_position[f] = Some(i);
        }
        DofMap {
            dim: mesh.dim,
            degrees,
            n_cell_local: nc,
            n_face_local: nf,
            cell_offsets,
            face_offsets,
            boundary_position,
            boundary_faces: mesh.boundary_faces.clone(),
            interior_faces: mesh.interior_faces.clone(),
            n_cell,
            n_int,
            n_bd,
        }
    }

    pub fn total(&self) -> usize {
        self.n_cell + self.n_int + self.n_bd
    }

    /// Start of the boundary slice in the global vector.
    pub fn bd_start(&self) -> usize {
        self.n_cell + self.n_int
    }

    /// Offset of a boundary face block within the boundary slice.
    pub fn bd_offset(&self, face: usize) -> Option<usize> {
        self.boundary_position[face].map(|p| p * self.n_face_local)
    }

    pub fn cell_range(&self, t: usize) -> std::ops::Range<usize> {
        let o = self.cell_offsets[t];
        o..o + self.n_cell_local
    }

    pub fn face_range(&self, f: usize) -> std::ops::Range<usize> {
        let o = self.face_offsets[f];
        o..o + self.n_face_local
    }
}

/// An element of the hybrid space, stored as one global coefficient vector in
/// [`DofMap`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridVector {
    pub map: Arc<DofMap>,
    pub data: DVector<f64>,
}

impl HybridVector {
    pub fn zeros(map: Arc<DofMap>) -> Self {
        let data = DVector::zeros(map.total());
        HybridVector { map, data }
    }

    pub fn from_data(map: Arc<DofMap>, data: DVector<f64>) -> Result<Self> {
        if data.len() != map.total() {
            return Err(TraceLabError::DimensionMismatch { expected: map.total(), got: data.len() });
        }
        Ok(HybridVector { map, data })
    }

    pub fn cell(&self, t: usize) -> &[f64] {
        &self.data.as_slice()[self.map.cell_range(t)]
    }

    pub fn cell_mut(&mut self, t: usize) -> &mut [f64] {
        let r = self.map.cell_range(t);
        &mut self.data.as_mut_slice()[r]
    }

    pub fn face(&self, f: usize) -> &[f64] {
        &self.data.as_slice()[self.map.face_range(f)]
    }

    pub fn face_mut(&mut self, f: usize) -> &mut [f64] {
        let r = self.map.face_range(f);
        &mut self.data.as_mut_slice()[r]
    }
}

/// Coefficient blocks on the boundary faces only.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    pub map: Arc<DofMap>,
    pub data: DVector<f64>,
}

impl BoundaryTrace {
    pub fn zeros(map: Arc<DofMap>) -> Self {
        let data = DVector::zeros(map.n_bd);
        BoundaryTrace { map, data }
    }

    pub fn from_data(map: Arc<DofMap>, data: DVector<f64>) -> Result<Self> {
        if data.len() != map.n_bd {
            return Err(TraceLabError::DimensionMismatch { expected: map.n_bd, got: data.len() });
        }
        Ok(BoundaryTrace { map, data })
    }

    pub fn num_blocks(&self) -> usize {
        self.map.boundary_faces.len()
    }

    /// Block of boundary face `f` (global face index).
    pub fn face(&self, f: usize) -> &[f64] {
        let o = self.map.bd_offset(f).expect("not a boundary face");
        &self.data.as_slice()[o..o + self.map.n_face_local]
    }

    pub fn face_mut(&mut self, f: usize) -> &mut [f64] {
        let o = self.map.bd_offset(f).expect("not a boundary face");
        let n = self.map.n_face_local;
        &mut self.data.as_mut_slice()[o..o + n]
    }
}

/// Restriction of a hybrid vector to its boundary-face blocks.
pub fn trace(v: &HybridVector) -> BoundaryTrace {
    let s = v.map.bd_start();
    BoundaryTrace { map: v.map.clone(), data: v.data.rows(s, v.map.n_bd).into_owned() }
}

/// `(1/|X|) * integral of f over X` for the entity integrated by `rule`.
pub fn project_p0(rule: &QuadRule, f: impl Fn(&Point) -> f64) -> Result<f64> {
    let m = rule.measure();
    if !(m > 0.0) {
        return Err(TraceLabError::Geometry("projection onto constants on a zero-measure entity".into()));
    }
    Ok(rule.integrate(f) / m)
}

/// Mesh, degrees, DoF map and per-entity bases.
#[derive(Clone, Debug)]
pub struct HybridSpace {
    pub mesh: Arc<PolytopalMesh>,
    pub degrees: DegreeConfig,
    pub map: Arc<DofMap>,
    pub cell_bases: Vec<MonomialBasis>,
    pub face_bases: Vec<MonomialBasis>,
    /// Integrals of the face basis functions, per face.
    pub face_moments: Vec<Vec<f64>>,
}

impl HybridSpace {
    pub fn new(mesh: Arc<PolytopalMesh>, degrees: DegreeConfig) -> Result<Self> {
        let map = Arc::new(DofMap::new(&mesh, degrees));
        let cell_bases =
            mesh.cells.iter().map(|c| MonomialBasis::for_cell(c, mesh.dim, degrees.cell)).collect();
        let face_bases: Vec<MonomialBasis> =
            mesh.faces.iter().map(|f| MonomialBasis::for_face(f, degrees.face)).collect();
        let mut face_moments = Vec::with_capacity(mesh.num_faces());
        for (face, basis) in mesh.faces.iter().zip(&face_bases) {
            let rule = face_rule(&mesh, face, degrees.face)?;
            let mut m = vec![0.0; basis.len()];
            let mut vals = vec![0.0; basis.len()];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                basis.eval_into(p, &mut vals);
                for (mi, v) in m.iter_mut().zip(&vals) {
                    *mi += w * v;
                }
            }
            face_moments.push(m);
        }
        Ok(HybridSpace { mesh, degrees, map, cell_bases, face_bases, face_moments })
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn cell_rule(&self, t: usize) -> Result<QuadRule> {
        cell_rule(&self.mesh, &self.mesh.cells[t], self.degrees.quad_degree())
    }

    pub fn face_rule(&self, f: usize) -> Result<QuadRule> {
        face_rule(&self.mesh, &self.mesh.faces[f], self.degrees.quad_degree())
    }

    pub fn zeros(&self) -> HybridVector {
        HybridVector::zeros(self.map.clone())
    }

    /// The hybrid vector representing the constant function `c` everywhere.
    pub fn constant(&self, c: f64) -> HybridVector {
        let mut v = self.zeros();
        for t in 0..self.mesh.num_cells() {
            v.cell_mut(t)[0] = c;
        }
        for f in 0..self.mesh.num_faces() {
            v.face_mut(f)[0] = c;
        }
        v
    }

    pub fn random(&self, seed: u64, stream: u64) -> HybridVector {
        let data = DVector::from_vec(uniform_vec(seed, stream, self.map.total()));
        HybridVector { map: self.map.clone(), data }
    }

    pub fn zeros_trace(&self) -> BoundaryTrace {
        BoundaryTrace::zeros(self.map.clone())
    }

    pub fn constant_trace(&self, c: f64) -> BoundaryTrace {
        let mut w = self.zeros_trace();
        for &f in &self.mesh.boundary_faces {
            w.face_mut(f)[0] = c;
        }
        w
    }

    pub fn random_trace(&self, seed: u64, stream: u64) -> BoundaryTrace {
        let data = DVector::from_vec(uniform_vec(seed, stream, self.map.n_bd));
        BoundaryTrace { map: self.map.clone(), data }
    }

    /// Average of a face polynomial over its face.
    pub fn face_average(&self, f: usize, block: &[f64]) -> f64 {
        let m = &self.face_moments[f];
        m.iter().zip(block).map(|(a, b)| a * b).sum::<f64>() / self.mesh.faces[f].measure
    }

    /// Average of a cell polynomial over its cell.
    pub fn cell_average(&self, t: usize, block: &[f64]) -> Result<f64> {
        let rule = self.cell_rule(t)?;
        let basis = &self.cell_bases[t];
        project_p0(&rule, |x| basis.eval_poly(block, x))
    }

    /// Hybrid vector with every block replaced by the projection of the
    /// scalar function `u`: cell and face averages in the constant mode.
    pub fn interpolate_p0(&self, u: impl Fn(&Point) -> f64) -> Result<HybridVector> {
        let mut v = self.zeros();
        for t in 0..self.mesh.num_cells() {
            v.cell_mut(t)[0] = project_p0(&self.cell_rule(t)?, &u)?;
        }
        for f in 0..self.mesh.num_faces() {
            v.face_mut(f)[0] = project_p0(&self.face_rule(f)?, &u)?;
        }
        Ok(v)
    }
}
