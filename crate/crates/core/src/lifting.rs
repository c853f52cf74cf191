//! Explicit liftings of boundary data into the hybrid space.
//!
//! [`FlatLift`] lifts data given on one side of the box: each cell receives
//! the `rho_t`-weighted average of the side face averages, interior faces the
//! mean of their two cells, and side faces the data itself.
//!
//! [`GluedLift`] lifts data on the whole boundary of a square by gluing
//! per-chart lifts with a partition of unity. The atlas has four side charts
//! (flat graphs) and four corner charts, each corner chart using a frame
//! rotated by 45 degrees in which the boundary is the graph of `|x'|`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::condense::Condensed;
use crate::error::{invalid, Result, TraceLabError};
use crate::flat::{normalized_row, FlatSide, WeightTable, GEOM_RTOL};
use crate::mesh::{Point, PolytopalMesh, Side};
use crate::par::{map_range, Exec};
use crate::quadrature::{cell_rule, face_rule};
use crate::space::{BoundaryTrace, HybridSpace, HybridVector};

/// Flat-side lifting on one side of the box domain.
#[derive(Clone, Debug)]
pub struct FlatLift {
    pub space: Arc<HybridSpace>,
    pub side: FlatSide,
    pub weights: WeightTable,
}

impl FlatLift {
    pub fn new(space: Arc<HybridSpace>, side: Side, exec: Exec) -> Result<Self> {
        let side = FlatSide::new(&space.mesh, side)?;
        let weights = side.weights(&space.mesh, exec);
        Ok(FlatLift { space, side, weights })
    }

    /// Cell values `v_t = sum_f wbar_f rho_t(f)`.
    pub fn cell_values(&self, w: &BoundaryTrace) -> Vec<f64> {
        let avg: Vec<(usize, f64)> =
            self.side.faces.iter().map(|&f| (f, self.space.face_average(f, w.face(f)))).collect();
        let lookup = |f: usize| avg.iter().find(|(g, _)| *g == f).map(|(_, a)| *a).unwrap_or(0.0);
        self.weights.rows.iter().map(|row| row.iter().map(|&(f, r)| r * lookup(f)).sum()).collect()
    }

    /// Lifts the part of `w` living on the selected side. Boundary faces on
    /// other sides take the constant value of their cell.
    pub fn lift(&self, w: &BoundaryTrace) -> Result<HybridVector> {
        check_map(&self.space, w)?;
        let mesh = &self.space.mesh;
        let vt = self.cell_values(w);
        let mut v = self.space.zeros();
        for (t, &val) in vt.iter().enumerate() {
            v.cell_mut(t)[0] = val;
        }
        for &g in &mesh.interior_faces {
            let (a, b) = mesh.faces[g].owners;
            v.face_mut(g)[0] = 0.5 * (vt[a] + vt[b.unwrap()]);
        }
        for &f in &mesh.boundary_faces {
            if mesh.faces[f].side == Some(self.side.side) {
                v.face_mut(f).copy_from_slice(w.face(f));
            } else {
                v.face_mut(f)[0] = vt[mesh.faces[f].owners.0];
            }
        }
        Ok(v)
    }
}

fn check_map(space: &HybridSpace, w: &BoundaryTrace) -> Result<()> {
    if *w.map != *space.map {
        return Err(TraceLabError::DimensionMismatch { expected: space.map.n_bd, got: w.data.len() });
    }
    Ok(())
}

/// Mesh size below which every partition-of-unity weight vanishes on an
/// `h`-neighbourhood of its chart boundary (relative to the side length).
pub const H0: f64 = 0.1;

/// `1` on `[0, r0]`, `0` on `[r1, inf)`, and a C^1 cubic in between.
fn ramp(r: f64, r0: f64, r1: f64) -> f64 {
    if r <= r0 {
        1.0
    } else if r >= r1 {
        0.0
    } else {
        let x = (r - r0) / (r1 - r0);
        1.0 - x * x * (3.0 - 2.0 * x)
    }
}

const SIDE_PLATEAU: f64 = 0.2;
const SIDE_SUPPORT: f64 = 0.35;
const NORMAL_PLATEAU: f64 = 0.15;
const NORMAL_SUPPORT: f64 = 0.3;

fn cyclic_dist(s: f64, c: f64) -> f64 {
    let d = (s - c).rem_euclid(4.0);
    d.min(4.0 - d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    /// Chart around the midpoint of side `k` (arclength order bottom, right,
    /// top, left).
    Side(usize),
    /// Chart around corner `k`, the start point of side `k`.
    Corner(usize),
}

/// A boundary chart in the unit-square reference frame: local coordinates
/// `x' = (u - origin) . tangent`, `x_d = (u - origin) . inward`, chart domain
/// `|x'| < half_width`, `x_d < height`, boundary graph `x_d = phi(x')`.
#[derive(Clone, Debug)]
pub struct Chart {
    pub kind: ChartKind,
    pub origin: Point,
    pub tangent: Point,
    pub inward: Point,
    pub half_width: f64,
    pub height: f64,
}

impl Chart {
    fn side_tangent(k: usize) -> Point {
        match k % 4 {
            0 => Point::new(1.0, 0.0, 0.0),
            1 => Point::new(0.0, 1.0, 0.0),
            2 => Point::new(-1.0, 0.0, 0.0),
            _ => Point::new(0.0, -1.0, 0.0),
        }
    }

    fn corner_point(k: usize) -> Point {
        match k % 4 {
            0 => Point::new(0.0, 0.0, 0.0),
            1 => Point::new(1.0, 0.0, 0.0),
            2 => Point::new(1.0, 1.0, 0.0),
            _ => Point::new(0.0, 1.0, 0.0),
        }
    }

    pub fn side(k: usize) -> Self {
        let tangent = Self::side_tangent(k);
        Chart {
            kind: ChartKind::Side(k),
            origin: Self::corner_point(k) + 0.5 * tangent,
            tangent,
            inward: Point::new(-tangent.y, tangent.x, 0.0),
            half_width: 0.5,
            height: 0.45,
        }
    }

    pub fn corner(k: usize) -> Self {
        let out = Self::side_tangent(k);
        let inc = Self::side_tangent(k + 3);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Chart {
            kind: ChartKind::Corner(k),
            origin: Self::corner_point(k),
            tangent: (out + inc) * r,
            inward: (out - inc) * r,
            half_width: 0.5 * r,
            height: 0.8,
        }
    }

    /// The eight charts covering the boundary of the unit square.
    pub fn square_atlas() -> Vec<Chart> {
        (0..4).map(Chart::side).chain((0..4).map(Chart::corner)).collect()
    }

    pub fn local(&self, u: &Point) -> (f64, f64) {
        let r = u - self.origin;
        (r.dot(&self.tangent), r.dot(&self.inward))
    }

    pub fn phi(&self, xp: f64) -> f64 {
        match self.kind {
            ChartKind::Side(_) => 0.0,
            ChartKind::Corner(_) => xp.abs(),
        }
    }

    pub fn contains(&self, u: &Point) -> bool {
        let (xp, xd) = self.local(u);
        xp.abs() < self.half_width && xd < self.height
    }

    /// Vertical distance `x_d - phi(x')` to the boundary.
    pub fn dist_v(&self, u: &Point) -> f64 {
        let (xp, xd) = self.local(u);
        xd - self.phi(xp)
    }

    /// Vertical projection `(x', phi(x'))` onto the boundary.
    pub fn project(&self, u: &Point) -> Point {
        let (xp, _) = self.local(u);
        self.origin + xp * self.tangent + self.phi(xp) * self.inward
    }

    /// Boundary partition-of-unity weight at arclength `s`.
    pub fn eta_boundary(&self, s: f64) -> f64 {
        match self.kind {
            ChartKind::Side(k) => ramp(cyclic_dist(s, k as f64 + 0.5), SIDE_PLATEAU, SIDE_SUPPORT),
            ChartKind::Corner(k) => {
                if cyclic_dist(s, k as f64) >= 0.5 {
                    return 0.0;
                }
                let sides: f64 =
                    (0..4).map(|j| ramp(cyclic_dist(s, j as f64 + 0.5), SIDE_PLATEAU, SIDE_SUPPORT)).sum();
                (1.0 - sides).max(0.0)
            }
        }
    }

    /// Extension of the weight into the domain: boundary weight at the
    /// vertical projection, cut off smoothly in the vertical direction.
    pub fn eta(&self, u: &Point) -> f64 {
        if !self.contains(u) {
            return 0.0;
        }
        let cut = ramp(self.dist_v(u), NORMAL_PLATEAU, NORMAL_SUPPORT);
        if cut == 0.0 {
            return 0.0;
        }
        self.eta_boundary(arclength(&self.project(u))) * cut
    }
}

/// Arclength coordinate in `[0, 4)` of a point on the boundary of the unit
/// square: bottom `x`, right `1 + y`, top `3 - x`, left `4 - y`.
pub fn arclength(u: &Point) -> f64 {
    let tol = 1e-9;
    if u.y.abs() <= tol {
        u.x.clamp(0.0, 1.0)
    } else if (u.x - 1.0).abs() <= tol {
        1.0 + u.y.clamp(0.0, 1.0)
    } else if (u.y - 1.0).abs() <= tol {
        3.0 - u.x.clamp(0.0, 1.0)
    } else {
        (4.0 - u.y.clamp(0.0, 1.0)).rem_euclid(4.0)
    }
}

/// Smooth partition of unity on the boundary of the square, with the
/// projections `pi^0 eta_i` on every cell and face.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub charts: Vec<Chart>,
    /// `cell_proj[i][t]`.
    pub cell_proj: Vec<Vec<f64>>,
    /// `face_proj[i][f]`.
    pub face_proj: Vec<Vec<f64>>,
}

/// Quadrature exactness used to project the partition of unity.
const ETA_QUAD_DEGREE: usize = 9;

struct Normalizer {
    lo: Point,
    scale: f64,
}

impl Normalizer {
    fn new(mesh: &PolytopalMesh) -> Result<Self> {
        let ext = mesh.domain.hi - mesh.domain.lo;
        if mesh.dim != 2 || (ext.x - ext.y).abs() > 1e-12 * ext.x {
            return Err(TraceLabError::Unsupported("glued lifting is implemented on squares only".into()));
        }
        Ok(Normalizer { lo: mesh.domain.lo, scale: ext.x })
    }

    fn apply(&self, x: &Point) -> Point {
        (x - self.lo) / self.scale
    }
}

impl PartitionOfUnity {
    pub fn new(mesh: &PolytopalMesh, charts: Vec<Chart>, exec: Exec) -> Result<Self> {
        let norm = Normalizer::new(mesh)?;
        let cell_rules: Vec<_> =
            mesh.cells.iter().map(|c| cell_rule(mesh, c, ETA_QUAD_DEGREE)).collect::<Result<_>>()?;
        let face_rules: Vec<_> =
            mesh.faces.iter().map(|f| face_rule(mesh, f, ETA_QUAD_DEGREE)).collect::<Result<_>>()?;
        let project = |chart: &Chart| -> (Vec<f64>, Vec<f64>) {
            let cells = cell_rules
                .iter()
                .map(|r| r.integrate(|x| chart.eta(&norm.apply(x))) / r.measure())
                .collect();
            let faces = face_rules
                .iter()
                .zip(&mesh.faces)
                .map(|(r, face)| {
                    let val = if face.boundary {
                        r.integrate(|x| chart.eta_boundary(arclength(&norm.apply(x))))
                    } else {
                        r.integrate(|x| chart.eta(&norm.apply(x)))
                    };
                    val / r.measure()
                })
                .collect();
            (cells, faces)
        };
        let parts = map_range(exec, charts.len(), |i| project(&charts[i]));
        let (cell_proj, face_proj) = parts.into_iter().unzip();
        Ok(PartitionOfUnity { charts, cell_proj, face_proj })
    }

    /// Largest deviation of `sum_i pi^0_f eta_i` from 1 over boundary faces.
    pub fn boundary_sum_defect(&self, mesh: &PolytopalMesh) -> f64 {
        mesh.boundary_faces
            .iter()
            .map(|&f| (self.face_proj.iter().map(|p| p[f]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-chart weight table: cells with centroid in the chart average the
/// chart faces within horizontal distance `dist_V(x_t)` of their projection.
fn chart_weights(mesh: &PolytopalMesh, chart: &Chart, norm: &Normalizer, exec: Exec) -> WeightTable {
    let h = mesh.h() / norm.scale;
    let tol = GEOM_RTOL * h.max(1e-300);
    let chart_faces: Vec<(usize, f64, f64)> = mesh
        .boundary_faces
        .iter()
        .copied()
        .filter(|&f| chart.contains(&norm.apply(&mesh.faces[f].centroid)))
        .map(|f| {
            let xs: Vec<f64> =
                mesh.faces[f].vertices.iter().map(|&v| chart.local(&norm.apply(&mesh.vertices[v])).0).collect();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (f, lo, hi)
        })
        .collect();
    let rows = map_range(exec, mesh.num_cells(), |t| {
        let u = norm.apply(&mesh.cells[t].centroid);
        if !chart.contains(&u) || chart_faces.is_empty() {
            return Vec::new();
        }
        let (xp, _) = chart.local(&u);
        let delta = chart.dist_v(&u);
        let dist = |&(_, lo, hi): &(usize, f64, f64)| (lo - xp).max(xp - hi).max(0.0);
        let mut faces: Vec<usize> =
            chart_faces.iter().filter(|cf| dist(cf) <= delta + tol).map(|cf| cf.0).collect();
        if faces.is_empty() {
            let nearest = chart_faces.iter().min_by(|a, b| dist(a).total_cmp(&dist(b))).unwrap();
            faces.push(nearest.0);
        }
        faces.sort_unstable();
        normalized_row(mesh, &faces)
    });
    WeightTable { rows }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GluedOptions {
    /// Reject meshes with `h > H0` instead of only reporting them.
    pub strict_h0: bool,
}

/// Full-boundary lifting on the square by partition-of-unity gluing.
#[derive(Clone, Debug)]
pub struct GluedLift {
    pub space: Arc<HybridSpace>,
    pub pou: PartitionOfUnity,
    pub chart_weights: Vec<WeightTable>,
    /// Whether the cell centroid of each cell lies in each chart.
    chart_cells: Vec<Vec<bool>>,
    chart_interior_faces: Vec<Vec<bool>>,
    /// Mesh size relative to the side length.
    pub h: f64,
    /// Whether `h <= H0`, i.e. every weight vanishes near its chart boundary
    /// at the scale of the mesh.
    pub h0_satisfied: bool,
}

impl GluedLift {
    pub fn new(space: Arc<HybridSpace>, options: GluedOptions, exec: Exec) -> Result<Self> {
        let mesh = space.mesh.clone();
        let norm = Normalizer::new(&mesh)?;
        let h = mesh.h() / norm.scale;
        let h0_satisfied = h <= H0;
        if options.strict_h0 && !h0_satisfied {
            return Err(TraceLabError::ChartOverlap { h, h0: H0 });
        }
        let charts = Chart::square_atlas();
        let chart_weights = charts.iter().map(|c| chart_weights(&mesh, c, &norm, exec)).collect();
        let chart_cells = charts
            .iter()
            .map(|c| mesh.cells.iter().map(|cell| c.contains(&norm.apply(&cell.centroid))).collect())
            .collect();
        let chart_interior_faces = charts
            .iter()
            .map(|c| mesh.faces.iter().map(|f| !f.boundary && c.contains(&norm.apply(&f.centroid))).collect())
            .collect();
        let pou = PartitionOfUnity::new(&mesh, charts, exec)?;
        Ok(GluedLift { space, pou, chart_weights, chart_cells, chart_interior_faces, h, h0_satisfied })
    }

    /// Lifts `w`, whose trace is reproduced exactly.
    pub fn lift(&self, w: &BoundaryTrace) -> Result<HybridVector> {
        let space = &self.space;
        check_map(space, w)?;
        let mesh = &space.mesh;
        let boundary_measure: f64 = mesh.boundary_faces.iter().map(|&f| mesh.faces[f].measure).sum();

        // Mean-zero reduction: subtract the boundary average from constant modes.
        let integral: f64 = mesh.boundary_faces.iter().map(|&f| space.face_moments[f].iter().zip(w.face(f)).map(|(m, c)| m * c).sum::<f64>()).sum();
        let mean = integral / boundary_measure;
        let mut w0 = w.clone();
        for &f in &mesh.boundary_faces {
            w0.face_mut(f)[0] -= mean;
        }
        let wbar: Vec<f64> = (0..mesh.num_faces())
            .map(|f| if mesh.faces[f].boundary { space.face_average(f, w0.face(f)) } else { 0.0 })
            .collect();

        let mut v = space.zeros();
        for (i, table) in self.chart_weights.iter().enumerate() {
            let vt: Vec<f64> = table.rows.iter().map(|row| row.iter().map(|&(f, r)| r * wbar[f]).sum()).collect();
            let vt: Vec<f64> =
                vt.into_iter().zip(&self.chart_cells[i]).map(|(x, &inside)| if inside { x } else { 0.0 }).collect();
            let cp = &self.pou.cell_proj[i];
            let fp = &self.pou.face_proj[i];
            for t in 0..mesh.num_cells() {
                v.cell_mut(t)[0] += cp[t] * vt[t];
            }
            for &g in &mesh.interior_faces {
                if !self.chart_interior_faces[i][g] {
                    continue;
                }
                let (a, b) = mesh.faces[g].owners;
                let vg = 0.5 * (vt[a] + vt[b.unwrap()]);
                v.face_mut(g)[0] += fp[g] * vg;
            }
            for &f in &mesh.boundary_faces {
                if fp[f] == 0.0 {
                    continue;
                }
                for (x, y) in v.face_mut(f).iter_mut().zip(w0.face(f)) {
                    *x += fp[f] * y;
                }
            }
        }

        for t in 0..mesh.num_cells() {
            v.cell_mut(t)[0] += mean;
        }
        for f in 0..mesh.num_faces() {
            v.face_mut(f)[0] += mean;
        }
        Ok(v)
    }

    /// `(chart, t, f, rho)` rows as CSV.
    pub fn weights_csv(&self) -> String {
        let mut out = String::from("chart,t,f,rho\n");
        for (i, table) in self.chart_weights.iter().enumerate() {
            for (t, row) in table.rows.iter().enumerate() {
                for (f, r) in row {
                    out.push_str(&format!("{i},{t},{f},{r:e}\n"));
                }
            }
        }
        out
    }
}

/// Minimal-energy extension of `w`: boundary blocks equal to `w`, all other
/// blocks minimizing the discrete H^1 seminorm.
pub fn harmonic_extension(condensed: &Condensed, w: &BoundaryTrace) -> Result<HybridVector> {
    check_map(&condensed.space, w)?;
    Ok(condensed.harmonic_extension(w))
}

/// Boundary trace built from the given boundary-face blocks, in ascending
/// boundary-face order.
pub fn trace_from_blocks(space: &HybridSpace, data: Vec<f64>) -> Result<BoundaryTrace> {
    BoundaryTrace::from_data(space.map.clone(), DVector::from_vec(data))
}

/// Checks that `w` lives on the faces of one side only.
pub fn restrict_to_side(space: &HybridSpace, w: &BoundaryTrace, side: Side) -> Result<BoundaryTrace> {
    check_map(space, w)?;
    let mut out = space.zeros_trace();
    let faces = space.mesh.side_faces(side);
    if faces.is_empty() {
        return Err(invalid(format!("side {} has no faces", side.name())));
    }
    for f in faces {
        out.face_mut(f).copy_from_slice(w.face(f));
    }
    Ok(out)
}
