//! Polytopal hybrid meshes of the unit square and unit cube.
//!
//! A mesh is built from raw topology (vertex coordinates, cell vertex lists,
//! face vertex lists and cell-to-face incidence) by [`PolytopalMesh::from_parts`],
//! which derives all geometric quantities exactly from the vertices. Cells are
//! convex polygons in 2D and axis-aligned boxes in 3D; faces are segments in 2D
//! and axis-aligned rectangles in 3D.

use nalgebra as na;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TraceLabError};

pub type Point = na::Vector3<f64>;

/// Relative tolerance used for the measure checks of [`PolytopalMesh::validate`].
pub const MEASURE_RTOL: f64 = 1e-12;

/// Axis-aligned box `[lo, hi]` containing the mesh (the unit square or cube,
/// possibly rescaled).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn unit() -> Self {
        BoxDomain { lo: Point::zeros(), hi: Point::new(1.0, 1.0, 1.0) }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn measure(&self, dim: usize) -> f64 {
        (0..dim).map(|a| self.extent(a)).product()
    }

    /// (d-1)-measure of the boundary.
    pub fn boundary_measure(&self, dim: usize) -> f64 {
        (0..dim)
            .map(|a| 2.0 * (0..dim).filter(|&b| b != a).map(|b| self.extent(b)).product::<f64>())
            .sum()
    }

    /// Diameter of the boundary, equal to the box diagonal.
    pub fn diameter(&self, dim: usize) -> f64 {
        (0..dim).map(|a| self.extent(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, mu: f64) -> Self {
        BoxDomain { lo: self.lo * mu, hi: self.hi * mu }
    }
}

/// One side of the box domain: the hyperplane `x[axis] = lo[axis]` (`high == false`)
/// or `x[axis] = hi[axis]` (`high == true`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Side {
    pub axis: usize,
    pub high: bool,
}

impl Side {
    pub const BOTTOM: Side = Side { axis: 1, high: false };
    pub const TOP: Side = Side { axis: 1, high: true };
    pub const LEFT: Side = Side { axis: 0, high: false };
    pub const RIGHT: Side = Side { axis: 0, high: true };

    pub fn all(dim: usize) -> Vec<Side> {
        (0..dim)
            .flat_map(|axis| [Side { axis, high: false }, Side { axis, high: true }])
            .collect()
    }

    /// Unit normal pointing into the domain.
    pub fn inward_normal(&self) -> Point {
        let mut n = Point::zeros();
        n[self.axis] = if self.high { -1.0 } else { 1.0 };
        n
    }

    pub fn plane_coordinate(&self, domain: &BoxDomain) -> f64 {
        if self.high {
            domain.hi[self.axis]
        } else {
            domain.lo[self.axis]
        }
    }

    pub fn name(&self) -> String {
        let axis = ["x", "y", "z"][self.axis];
        format!("{axis}{}", if self.high { "max" } else { "min" })
    }

    pub fn parse(s: &str) -> Result<Side> {
        match s {
            "bottom" => return Ok(Side::BOTTOM),
            "top" => return Ok(Side::TOP),
            "left" => return Ok(Side::LEFT),
            "right" => return Ok(Side::RIGHT),
            _ => {}
        }
        let axis = match s.get(..1) {
            Some("x") => 0,
            Some("y") => 1,
            Some("z") => 2,
            _ => return Err(invalid(format!("unknown side '{s}'"))),
        };
        match s.get(1..) {
            Some("min") => Ok(Side { axis, high: false }),
            Some("max") => Ok(Side { axis, high: true }),
            _ => Err(invalid(format!("unknown side '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    /// Vertex indices; counter-clockwise for 2D polygons.
    pub vertices: Vec<usize>,
    /// The faces of the cell.
    pub faces: Vec<usize>,
    pub centroid: Point,
    pub diameter: f64,
    pub measure: f64,
    /// Radius of the largest ball centred at the centroid contained in the cell.
    pub inradius: f64,
    /// Half-spaces `n . x <= c` whose intersection is the cell.
    pub halfspaces: Vec<(Point, f64)>,
}

impl Cell {
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.halfspaces.iter().all(|(n, c)| n.dot(x) <= c + tol)
    }

    /// Whether the closed segment `[a, b]` meets the closed cell, within `tol`.
    pub fn intersects_segment(&self, a: &Point, b: &Point, tol: f64) -> bool {
        let dir = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (n, c) in &self.halfspaces {
            let denom = n.dot(&dir);
            let slack = c + tol - n.dot(a);
            if denom.abs() < 1e-300 {
                if slack < 0.0 {
                    return false;
                }
                continue;
            }
            let t = slack / denom;
            if denom > 0.0 {
                t1 = t1.min(t);
            } else {
                t0 = t0.max(t);
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Debug)]
pub struct Face {
    pub vertices: Vec<usize>,
    /// Owner cell and, for interior faces, the neighbour across the face.
    pub owners: (usize, Option<usize>),
    pub centroid: Point,
    pub diameter: f64,
    pub measure: f64,
    pub inradius: f64,
    /// Unit normal pointing out of `owners.0`.
    pub normal: Point,
    /// Orthonormal in-face frame (d-1 vectors). In 2D the tangent runs from the
    /// lexicographically smallest vertex to the other one; in 3D the frame is
    /// the two coordinate axes spanning the face, in ascending order.
    pub axes: Vec<Point>,
    pub boundary: bool,
    /// The side of the box containing the face, for boundary faces.
    pub side: Option<Side>,
}

impl Face {
    /// In-face coordinates of `x` relative to the centroid.
    pub fn local_coords(&self, x: &Point) -> [f64; 2] {
        let r = x - self.centroid;
        let mut out = [0.0; 2];
        for (o, a) in out.iter_mut().zip(&self.axes) {
            *o = a.dot(&r);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct PolytopalMesh {
    pub dim: usize,
    pub domain: BoxDomain,
    pub vertices: Vec<Point>,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    /// Boundary face indices, ascending.
    pub boundary_faces: Vec<usize>,
    /// Interior face indices, ascending.
    pub interior_faces: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    /// Global mesh size, the largest cell diameter.
    pub h: f64,
    /// Quasi-uniformity ratio `max_t h / h_t`.
    pub rho_qu: f64,
    /// Smallest inradius-to-diameter ratio over cells and faces.
    pub varpi: f64,
}

/// Cell-vertex, face-vertex and cell-face incidence lists.
type Topology = (Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<Vec<usize>>);

fn lex_less(a: &Point, b: &Point) -> bool {
    for i in 0..3 {
        if a[i] != b[i] {
            return a[i] < b[i];
        }
    }
    false
}

fn max_pairwise_distance(points: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

fn barycenter(points: &[Point]) -> Point {
    points.iter().fold(Point::zeros(), |acc, p| acc + p) / points.len() as f64
}

fn axis_box(points: &[Point]) -> (Point, Point) {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

impl PolytopalMesh {
    /// Builds a mesh from raw topology and derives all geometry.
    pub fn from_parts(
        dim: usize,
        domain: BoxDomain,
        vertices: Vec<Point>,
        cell_vertices: Vec<Vec<usize>>,
        face_vertices: Vec<Vec<usize>>,
        cell_faces: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if cell_vertices.len() != cell_faces.len() {
            return Err(TraceLabError::DimensionMismatch {
                expected: cell_vertices.len(),
                got: cell_faces.len(),
            });
        }
        let mut cells = Vec::with_capacity(cell_vertices.len());
        for (ci, (cv, cf)) in cell_vertices.into_iter().zip(cell_faces).enumerate() {
            let pts: Vec<Point> = cv.iter().map(|&v| vertices[v]).collect();
            cells.push(build_cell(dim, ci, cv, cf, &pts)?);
        }

        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); face_vertices.len()];
        for (ci, c) in cells.iter().enumerate() {
            for &f in &c.faces {
                if f >= owners.len() {
                    return Err(TraceLabError::Construction {
                        cell: ci,
                        reason: format!("references missing face {f}"),
                    });
                }
                owners[f].push(ci);
            }
        }

        let span = (0..dim).map(|a| domain.extent(a)).fold(0.0, f64::max);
        let tol = 1e-12 * span;
        let mut faces = Vec::with_capacity(face_vertices.len());
        for (fi, fv) in face_vertices.into_iter().enumerate() {
            let own = &owners[fi];
            if own.is_empty() || own.len() > 2 {
                return Err(TraceLabError::Geometry(format!("face {fi}: {} owners", own.len())));
            }
            let pts: Vec<Point> = fv.iter().map(|&v| vertices[v]).collect();
            let owner_centroid = cells[own[0]].centroid;
            let mut face = build_face(dim, fi, fv, &pts, owner_centroid)?;
            face.owners = (own[0], own.get(1).copied());
            face.boundary = own.len() == 1;
            if face.boundary {
                face.side = (0..dim)
                    .flat_map(|axis| [Side { axis, high: false }, Side { axis, high: true }])
                    .find(|s| {
                        let c = s.plane_coordinate(&domain);
                        pts.iter().all(|p| (p[s.axis] - c).abs() <= tol)
                    });
            }
            faces.push(face);
        }

        let boundary_faces = (0..faces.len()).filter(|&f| faces[f].boundary).collect();
        let interior_faces = (0..faces.len()).filter(|&f| !faces[f].boundary).collect();
        Ok(PolytopalMesh { dim, domain, vertices, cells, faces, boundary_faces, interior_faces })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    fn topology(&self) -> Topology {
        (
            self.cells.iter().map(|c| c.vertices.clone()).collect(),
            self.faces.iter().map(|f| f.vertices.clone()).collect(),
            self.cells.iter().map(|c| c.faces.clone()).collect(),
        )
    }

    /// The same mesh with every coordinate multiplied by `mu`.
    pub fn scaled(&self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(invalid("scale factor must be positive"));
        }
        let (cv, fv, cf) = self.topology();
        let verts = self.vertices.iter().map(|p| p * mu).collect();
        Self::from_parts(self.dim, self.domain.scaled(mu), verts, cv, fv, cf)
    }

    /// Renumbers faces so that new face `i` is old face `order[i]`.
    pub fn renumber_faces(&self, order: &[usize]) -> Result<Self> {
        let nf = self.faces.len();
        let mut inverse = vec![usize::MAX; nf];
        if order.len() != nf {
            return Err(TraceLabError::DimensionMismatch { expected: nf, got: order.len() });
        }
        for (new, &old) in order.iter().enumerate() {
            if old >= nf || inverse[old] != usize::MAX {
                return Err(invalid("face order is not a permutation"));
            }
            inverse[old] = new;
        }
        let (cv, fv, cf) = self.topology();
        let fv = order.iter().map(|&old| fv[old].clone()).collect();
        let cf = cf.into_iter().map(|l| l.into_iter().map(|f| inverse[f]).collect()).collect();
        Self::from_parts(self.dim, self.domain, self.vertices.clone(), cv, fv, cf)
    }

    pub fn stats(&self) -> MeshStats {
        let h = self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        let rho_qu = self.cells.iter().map(|c| h / c.diameter).fold(1.0, f64::max);
        let varpi = self
            .cells
            .iter()
            .map(|c| c.inradius / c.diameter)
            .chain(self.faces.iter().map(|f| f.inradius / f.diameter))
            .fold(f64::INFINITY, f64::min);
        MeshStats { h, rho_qu, varpi }
    }

    /// Global mesh size.
    pub fn h(&self) -> f64 {
        self.stats().h
    }

    /// Boundary faces lying on `side`, ascending.
    pub fn side_faces(&self, side: Side) -> Vec<usize> {
        self.boundary_faces.iter().copied().filter(|&f| self.faces[f].side == Some(side)).collect()
    }

    /// Lists every violated invariant; an empty list means the mesh is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut owner_count = vec![0usize; self.faces.len()];
        for c in &self.cells {
            for &f in &c.faces {
                if f < owner_count.len() {
                    owner_count[f] += 1;
                }
            }
        }
        for (fi, (&count, face)) in owner_count.iter().zip(&self.faces).enumerate() {
            if count == 0 || count > 2 {
                out.push(format!("face {fi}: {count} owners"));
            } else if (count == 1) != face.boundary {
                out.push(format!("face {fi}: boundary flag inconsistent with {count} owners"));
            }
        }
        let mut listed = vec![false; self.faces.len()];
        for &f in self.boundary_faces.iter().chain(&self.interior_faces) {
            if f >= listed.len() || listed[f] {
                out.push(format!("face {f}: listed twice or out of range in boundary/interior sets"));
            } else {
                listed[f] = true;
            }
        }
        if listed.iter().any(|l| !l) {
            out.push("boundary and interior face sets do not cover all faces".into());
        }

        let handshake: usize = self
            .cells
            .iter()
            .map(|c| c.faces.iter().filter(|&&f| f < self.faces.len() && !self.faces[f].boundary).count())
            .sum();
        if handshake != 2 * self.interior_faces.len() {
            out.push(format!(
                "interior handshake: {handshake} cell-face incidences for {} interior faces",
                self.interior_faces.len()
            ));
        }

        let vol: f64 = self.cells.iter().map(|c| c.measure).sum();
        let omega = self.domain.measure(self.dim);
        if (vol - omega).abs() > MEASURE_RTOL * omega {
            out.push(format!("volume mismatch: cells sum to {vol}, domain measure {omega}"));
        }
        let bd: f64 = self.boundary_faces.iter().map(|&f| self.faces[f].measure).sum();
        let gamma = self.domain.boundary_measure(self.dim);
        if (bd - gamma).abs() > MEASURE_RTOL * gamma {
            out.push(format!("boundary measure mismatch: faces sum to {bd}, boundary measure {gamma}"));
        }

        for (ci, c) in self.cells.iter().enumerate() {
            let tol = 1e-12 * c.diameter;
            if !(c.inradius > 0.0) {
                out.push(format!("cell {ci}: non-positive inradius"));
            }
            for (n, off) in &c.halfspaces {
                if off - n.dot(&c.centroid) < c.inradius - tol {
                    out.push(format!("cell {ci}: inscribed ball leaves the cell"));
                    break;
                }
            }
        }
        for (fi, f) in self.faces.iter().enumerate() {
            if !(f.inradius > 0.0) {
                out.push(format!("face {fi}: non-positive inradius"));
            }
            if f.boundary {
                match f.side {
                    None => out.push(format!("face {fi}: boundary face not on a side of the domain")),
                    Some(s) => {
                        if (f.normal + s.inward_normal()).norm() > 1e-12 {
                            out.push(format!("face {fi}: boundary normal is not outward axis-aligned"));
                        }
                    }
                }
            }
        }
        out
    }
}

fn build_cell(dim: usize, ci: usize, vertices: Vec<usize>, faces: Vec<usize>, pts: &[Point]) -> Result<Cell> {
    let centroid = barycenter(pts);
    let diameter = max_pairwise_distance(pts);
    if dim == 2 {
        let m = pts.len();
        if m < 3 {
            return Err(TraceLabError::Construction { cell: ci, reason: "fewer than 3 vertices".into() });
        }
        let mut area2 = 0.0;
        let mut halfspaces = Vec::with_capacity(m);
        for i in 0..m {
            let a = pts[i];
            let b = pts[(i + 1) % m];
            let c = pts[(i + 2) % m];
            area2 += a.x * b.y - b.x * a.y;
            let cross = (b - a).x * (c - b).y - (b - a).y * (c - b).x;
            if cross <= 0.0 {
                return Err(TraceLabError::Construction {
                    cell: ci,
                    reason: format!("polygon is not strictly convex at vertex {}", vertices[(i + 1) % m]),
                });
            }
            let e = b - a;
            let n = Point::new(e.y, -e.x, 0.0).normalize();
            halfspaces.push((n, n.dot(&a)));
        }
        let inradius = halfspaces
            .iter()
            .map(|(n, c)| c - n.dot(&centroid))
            .fold(f64::INFINITY, f64::min);
        Ok(Cell { vertices, faces, centroid, diameter, measure: 0.5 * area2, inradius, halfspaces })
    } else {
        let (lo, hi) = axis_box(pts);
        let ext = hi - lo;
        if pts.len() != 8 || (0..3).any(|a| !(ext[a] > 0.0)) {
            return Err(TraceLabError::Construction {
                cell: ci,
                reason: "3D cells must be non-degenerate axis-aligned boxes".into(),
            });
        }
        let mut halfspaces = Vec::with_capacity(6);
        for a in 0..3 {
            let mut n = Point::zeros();
            n[a] = 1.0;
            halfspaces.push((n, hi[a]));
            halfspaces.push((-n, -lo[a]));
        }
        let inradius = 0.5 * ext.min();
        Ok(Cell { vertices, faces, centroid, diameter, measure: ext.product(), inradius, halfspaces })
    }
}

fn build_face(dim: usize, fi: usize, vertices: Vec<usize>, pts: &[Point], owner_centroid: Point) -> Result<Face> {
    let centroid = barycenter(pts);
    let diameter = max_pairwise_distance(pts);
    let (measure, inradius, axes, mut normal) = if dim == 2 {
        if pts.len() != 2 {
            return Err(TraceLabError::Geometry(format!("face {fi}: 2D faces are segments")));
        }
        let (a, b) = if lex_less(&pts[0], &pts[1]) { (pts[0], pts[1]) } else { (pts[1], pts[0]) };
        let len = (b - a).norm();
        let t = (b - a) / len;
        (len, 0.5 * len, vec![t], Point::new(t.y, -t.x, 0.0))
    } else {
        let (lo, hi) = axis_box(pts);
        let ext = hi - lo;
        let flat: Vec<usize> = (0..3).filter(|&a| ext[a] == 0.0).collect();
        if pts.len() != 4 || flat.len() != 1 {
            return Err(TraceLabError::Geometry(format!("face {fi}: 3D faces must be axis-aligned rectangles")));
        }
        let na = flat[0];
        let mut axes = Vec::new();
        let mut in_ext = Vec::new();
        for a in (0..3).filter(|&a| a != na) {
            let mut e = Point::zeros();
            e[a] = 1.0;
            axes.push(e);
            in_ext.push(ext[a]);
        }
        let mut n = Point::zeros();
        n[na] = 1.0;
        (in_ext[0] * in_ext[1], 0.5 * in_ext[0].min(in_ext[1]), axes, n)
    };
    if normal.dot(&(centroid - owner_centroid)) < 0.0 {
        normal = -normal;
    }
    Ok(Face {
        vertices,
        owners: (0, None),
        centroid,
        diameter,
        measure,
        inradius,
        normal,
        axes,
        boundary: false,
        side: None,
    })
}

fn grid_vertices_2d(n: usize) -> Vec<Point> {
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push(Point::new(i as f64 / n as f64, j as f64 / n as f64, 0.0));
        }
    }
    v
}

/// Quad-grid topology shared by the Cartesian and perturbed 2D builders.
///
/// Faces are numbered horizontal edges first (row by row, bottom to top), then
/// vertical edges (column by column, left to right). Cell faces are listed
/// bottom, right, top, left.
fn grid_topology_2d(n: usize) -> Topology {
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let hid = |i: usize, j: usize| j * n + i;
    let nh = (n + 1) * n;
    let vfid = |i: usize, j: usize| nh + i * n + j;
    let mut faces = vec![Vec::new(); 2 * nh];
    for j in 0..=n {
        for i in 0..n {
            faces[hid(i, j)] = vec![vid(i, j), vid(i + 1, j)];
        }
    }
    for i in 0..=n {
        for j in 0..n {
            faces[vfid(i, j)] = vec![vid(i, j), vid(i, j + 1)];
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    let mut cell_faces = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            cell_faces.push(vec![hid(i, j), vfid(i + 1, j), hid(i, j + 1), vfid(i, j)]);
        }
    }
    (cells, faces, cell_faces)
}

fn build_cartesian_3d(n: usize) -> Result<PolytopalMesh> {
    let np = n + 1;
    let vid = |i: [usize; 3]| (i[2] * np + i[1]) * np + i[0];
    let mut vertices = Vec::with_capacity(np * np * np);
    for l in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push(Point::new(i as f64 / n as f64, j as f64 / n as f64, l as f64 / n as f64));
            }
        }
    }
    let per_axis = np * n * n;
    let others = |a: usize| -> (usize, usize) {
        match a {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    };
    let fid = |a: usize, p: usize, q1: usize, q2: usize| a * per_axis + (p * n + q1) * n + q2;
    let mut faces = vec![Vec::new(); 3 * per_axis];
    for a in 0..3 {
        let (b, c) = others(a);
        for p in 0..np {
            for q1 in 0..n {
                for q2 in 0..n {
                    let corner = |db: usize, dc: usize| {
                        let mut idx = [0usize; 3];
                        idx[a] = p;
                        idx[b] = q1 + db;
                        idx[c] = q2 + dc;
                        vid(idx)
                    };
                    faces[fid(a, p, q1, q2)] = vec![corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                }
            }
        }
    }
    let mut cells = Vec::with_capacity(n * n * n);
    let mut cell_faces = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for j in 0..n {
            for i in 0..n {
                let idx = [i, j, l];
                let mut cv = Vec::with_capacity(8);
                for dl in 0..2 {
                    for dj in 0..2 {
                        for di in 0..2 {
                            cv.push(vid([i + di, j + dj, l + dl]));
                        }
                    }
                }
                cells.push(cv);
                let mut cf = Vec::with_capacity(6);
                for a in 0..3 {
                    let (b, c) = others(a);
                    cf.push(fid(a, idx[a], idx[b], idx[c]));
                    cf.push(fid(a, idx[a] + 1, idx[b], idx[c]));
                }
                cell_faces.push(cf);
            }
        }
    }
    PolytopalMesh::from_parts(3, BoxDomain::unit(), vertices, cells, faces, cell_faces)
}

/// Uniform Cartesian mesh of the unit square (`dim = 2`) or cube (`dim = 3`)
/// with `n` cells per side.
pub fn build_cartesian(dim: usize, n: usize) -> Result<PolytopalMesh> {
    if n == 0 {
        return Err(invalid("cells per side must be at least 1"));
    }
    match dim {
        2 => {
            let (cells, faces, cell_faces) = grid_topology_2d(n);
            PolytopalMesh::from_parts(2, BoxDomain::unit(), grid_vertices_2d(n), cells, faces, cell_faces)
        }
        3 => build_cartesian_3d(n),
        _ => Err(invalid(format!("dimension must be 2 or 3, got {dim}"))),
    }
}

/// Largest admissible jitter amplitude for [`build_perturbed_quads`].
pub const MAX_PERTURBATION: f64 = 0.3;

/// Unit-square quad mesh whose interior grid vertices are jittered by up to
/// `amplitude / n` in each coordinate. Boundary vertices stay in place.
pub fn build_perturbed_quads(n: usize, amplitude: f64, seed: u64) -> Result<PolytopalMesh> {
    if n == 0 {
        return Err(invalid("cells per side must be at least 1"));
    }
    if !(0.0..=MAX_PERTURBATION).contains(&amplitude) {
        return Err(invalid(format!("amplitude {amplitude} outside [0, {MAX_PERTURBATION}]")));
    }
    let mut vertices = grid_vertices_2d(n);
    if amplitude > 0.0 {
        let mut rng = crate::rng::probe_rng(seed, 0);
        let step = amplitude / n as f64;
        for j in 1..n {
            for i in 1..n {
                let v = &mut vertices[j * (n + 1) + i];
                v.x += step * rng.random_range(-1.0..1.0);
                v.y += step * rng.random_range(-1.0..1.0);
            }
        }
    }
    let (cells, faces, cell_faces) = grid_topology_2d(n);
    PolytopalMesh::from_parts(2, BoxDomain::unit(), vertices, cells, faces, cell_faces)
}

/// Mesh family selector used by sweeps and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MeshFamily {
    Cartesian,
    Perturbed { amplitude: f64, seed: u64 },
}

impl MeshFamily {
    pub fn build(&self, dim: usize, n: usize) -> Result<PolytopalMesh> {
        match *self {
            MeshFamily::Cartesian => build_cartesian(dim, n),
            MeshFamily::Perturbed { amplitude, seed } => {
                if dim != 2 {
                    return Err(TraceLabError::Unsupported("perturbed meshes exist only in 2D".into()));
                }
                build_perturbed_quads(n, amplitude, seed)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeshFamily::Cartesian => "cartesian".into(),
            MeshFamily::Perturbed { amplitude, seed } => format!("perturbed(a={amplitude},seed={seed})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cartesian_counts() {
        let m = build_cartesian(2, 1).unwrap();
        assert_eq!((m.num_cells(), m.boundary_faces.len(), m.interior_faces.len()), (1, 4, 0));
        let m = build_cartesian(2, 4).unwrap();
        assert_eq!((m.num_cells(), m.boundary_faces.len(), m.interior_faces.len()), (16, 16, 24));
        let m = build_cartesian(3, 2).unwrap();
        assert_eq!((m.num_cells(), m.boundary_faces.len(), m.interior_faces.len()), (8, 24, 12));
        assert!(build_cartesian(2, 0).is_err());
    }

    #[test]
    fn cartesian_is_valid() {
        for (d, n) in [(2, 1), (2, 5), (3, 1), (3, 3)] {
            let m = build_cartesian(d, n).unwrap();
            assert!(m.validate().is_empty(), "{:?}", m.validate());
            assert_eq!(m.boundary_faces.len(), 2 * d * n.pow(d as u32 - 1));
        }
    }

    #[test]
    fn stats_examples() {
        let s = build_cartesian(2, 4).unwrap().stats();
        assert_relative_eq!(s.h, 2f64.sqrt() / 4.0, max_relative = 1e-15);
        assert_eq!(s.rho_qu, 1.0);
        let s = build_cartesian(3, 2).unwrap().stats();
        assert_relative_eq!(s.h, 3f64.sqrt() / 2.0, max_relative = 1e-15);
        let s = build_cartesian(2, 1).unwrap().stats();
        assert_relative_eq!(s.varpi, 0.5 / 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn refinement_halves_h() {
        for n in [1, 2, 4, 8] {
            let a = build_cartesian(2, n).unwrap().stats();
            let b = build_cartesian(2, 2 * n).unwrap().stats();
            assert_eq!(a.h, 2.0 * b.h);
            assert_eq!(b.rho_qu, 1.0);
        }
    }

    #[test]
    fn corrupted_meshes_are_reported() {
        let mut m = build_cartesian(2, 2).unwrap();
        // face 2 is the bottom edge of cell 2; give it to cell 0 as well
        let interior = m.interior_faces[0];
        let (a, b) = m.faces[interior].owners;
        let third = (0..m.num_cells()).find(|&c| c != a && Some(c) != b).unwrap();
        m.cells[third].faces.push(interior);
        let diag = m.validate();
        assert!(diag.contains(&format!("face {interior}: 3 owners")), "{diag:?}");

        let mut m = build_cartesian(2, 1).unwrap();
        m.cells[0].measure = 0.9;
        let diag = m.validate();
        assert_eq!(diag.len(), 1);
        assert!(diag[0].starts_with("volume mismatch"));
    }

    #[test]
    fn perturbed_examples() {
        let c = build_cartesian(2, 4).unwrap();
        let p = build_perturbed_quads(4, 0.0, 11).unwrap();
        assert_eq!(c.vertices, p.vertices);
        let p = build_perturbed_quads(4, 0.2, 7).unwrap();
        assert!(p.validate().is_empty());
        assert_eq!(p.num_cells(), 16);
        for (&fc, &fp) in c.boundary_faces.iter().zip(&p.boundary_faces) {
            assert_eq!(c.faces[fc].centroid, p.faces[fp].centroid);
            assert_eq!(c.faces[fc].measure, p.faces[fp].measure);
        }
        assert!(p.stats().varpi > 0.0);
        assert!(build_perturbed_quads(2, 0.5, 1).is_err());
        let q = build_perturbed_quads(4, 0.2, 7).unwrap();
        assert_eq!(p.vertices, q.vertices);
    }

    #[test]
    fn non_convex_cell_is_named() {
        let (cells, faces, cf) = grid_topology_2d(2);
        let mut v = grid_vertices_2d(2);
        v[4] = Point::new(0.95, 0.95, 0.0);
        let err = PolytopalMesh::from_parts(2, BoxDomain::unit(), v, cells, faces, cf).unwrap_err();
        assert!(matches!(err, TraceLabError::Construction { .. }), "{err}");
    }

    #[test]
    fn segment_intersection_counts_touching() {
        let m = build_cartesian(2, 2).unwrap();
        let c = &m.cells[0];
        let a = Point::new(0.1, 0.5, 0.0);
        let b = Point::new(0.9, 0.5, 0.0);
        assert!(c.intersects_segment(&a, &b, 1e-12));
        let a = Point::new(0.6, 0.1, 0.0);
        let b = Point::new(0.9, 0.1, 0.0);
        assert!(!c.intersects_segment(&a, &b, 1e-12));
    }

    #[test]
    fn scaling_and_renumbering() {
        let m = build_cartesian(3, 2).unwrap();
        let s = m.scaled(2.0).unwrap();
        assert!(s.validate().is_empty());
        assert_relative_eq!(s.stats().h, 2.0 * m.stats().h);
        let order: Vec<usize> = (0..m.num_faces()).rev().collect();
        let r = m.renumber_faces(&order).unwrap();
        assert!(r.validate().is_empty());
        assert_eq!(r.faces[0].centroid, m.faces[m.num_faces() - 1].centroid);
    }

    #[test]
    fn side_faces_cover_boundary() {
        let m = build_cartesian(3, 2).unwrap();
        let total: usize = Side::all(3).iter().map(|&s| m.side_faces(s).len()).sum();
        assert_eq!(total, m.boundary_faces.len());
        assert_eq!(Side::parse("bottom").unwrap(), Side::BOTTOM);
        assert_eq!(Side::parse("zmax").unwrap(), Side { axis: 2, high: true });
    }
}
