//! Geometry relative to one flat side of the box domain: orthogonal
//! projection onto the side, distance to the side, in-side distances to
//! faces, and the averaging sets `A_t` with their weights `rho_t(f)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{Point, PolytopalMesh, Side};
use crate::par::{map_range, Exec};

/// Relative slack (in units of `h`) used for closed-set distance tests.
pub const GEOM_RTOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct FlatSide {
    pub side: Side,
    pub dim: usize,
    pub plane: f64,
    /// Unit normal pointing into the domain.
    pub normal: Point,
    /// Boundary faces on the side, ascending.
    pub faces: Vec<usize>,
    /// Global mesh size, used to scale tolerances.
    pub h: f64,
}

impl FlatSide {
    pub fn new(mesh: &PolytopalMesh, side: Side) -> Result<Self> {
        if side.axis >= mesh.dim {
            return Err(invalid(format!("side {} does not exist in dimension {}", side.name(), mesh.dim)));
        }
        let faces = mesh.side_faces(side);
        if faces.is_empty() {
            return Err(invalid(format!("side {} has no faces", side.name())));
        }
        Ok(FlatSide {
            side,
            dim: mesh.dim,
            plane: side.plane_coordinate(&mesh.domain),
            normal: side.inward_normal(),
            faces,
            h: mesh.h(),
        })
    }

    pub fn tol(&self) -> f64 {
        GEOM_RTOL * self.h
    }

    /// Orthogonal projection onto the plane of the side.
    pub fn project(&self, x: &Point) -> Point {
        let mut p = *x;
        p[self.side.axis] = self.plane;
        p
    }

    /// Distance from `x` to the plane of the side.
    pub fn height(&self, x: &Point) -> f64 {
        (x[self.side.axis] - self.plane).abs()
    }

    /// In-plane axes of the side.
    pub fn tangent_axes(&self) -> Vec<usize> {
        (0..self.dim).filter(|&a| a != self.side.axis).collect()
    }

    /// Distance from a point of the side to the closed face `f` (a segment or
    /// axis-aligned rectangle lying in the side).
    pub fn dist_to_face(&self, mesh: &PolytopalMesh, p: &Point, f: usize) -> f64 {
        let (lo, hi) = face_box(mesh, f);
        self.tangent_axes()
            .into_iter()
            .map(|a| (lo[a] - p[a]).max(p[a] - hi[a]).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Whether `p` (on the side) lies in the closure of face `f`.
    pub fn face_contains(&self, mesh: &PolytopalMesh, p: &Point, f: usize) -> bool {
        self.dist_to_face(mesh, p, f) <= self.tol()
    }

    /// Side faces whose closure lies within distance `delta` of `p`, ascending.
    pub fn faces_within(&self, mesh: &PolytopalMesh, p: &Point, delta: f64) -> Vec<usize> {
        let tol = self.tol();
        self.faces.iter().copied().filter(|&f| self.dist_to_face(mesh, p, f) <= delta + tol).collect()
    }

    /// Averaging weights `rho_t(f) = |f| / |A_t|` for every cell.
    pub fn weights(&self, mesh: &PolytopalMesh, exec: Exec) -> WeightTable {
        let rows = map_range(exec, mesh.num_cells(), |t| {
            let x = mesh.cells[t].centroid;
            let faces = self.faces_within(mesh, &self.project(&x), self.height(&x));
            normalized_row(mesh, &faces)
        });
        WeightTable { rows }
    }
}

/// Axis-aligned bounding box of a face.
pub fn face_box(mesh: &PolytopalMesh, f: usize) -> (Point, Point) {
    let face = &mesh.faces[f];
    let first = mesh.vertices[face.vertices[0]];
    face.vertices.iter().fold((first, first), |(lo, hi), &v| (lo.inf(&mesh.vertices[v]), hi.sup(&mesh.vertices[v])))
}

/// Weights `|f| / sum |f|` over the given faces.
pub fn normalized_row(mesh: &PolytopalMesh, faces: &[usize]) -> Vec<(usize, f64)> {
    let total: f64 = faces.iter().map(|&f| mesh.faces[f].measure).sum();
    faces.iter().map(|&f| (f, mesh.faces[f].measure / total)).collect()
}

/// Sparse per-cell weight rows `(face, rho_t(face))`, faces ascending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl WeightTable {
    pub fn rho(&self, t: usize, f: usize) -> f64 {
        self.rows[t].iter().find(|(g, _)| *g == f).map_or(0.0, |(_, r)| *r)
    }

    /// The faces making up `A_t`.
    pub fn support(&self, t: usize) -> Vec<usize> {
        self.rows[t].iter().map(|(f, _)| *f).collect()
    }

    /// `(t, f, rho)` triples as CSV with header `t,f,rho`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,f,rho\n");
        for (t, row) in self.rows.iter().enumerate() {
            for (f, r) in row {
                out.push_str(&format!("{t},{f},{r:e}\n"));
            }
        }
        out
    }
}
