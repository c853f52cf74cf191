//! Gauss quadrature on segments, axis-aligned boxes and convex polygons.

use crate::error::{Result, TraceLabError};
use crate::mesh::{Cell, Face, Point, PolytopalMesh};

#[derive(Clone, Debug, Default)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` with `n` points, exact for
/// degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence: p1 = P_n(z), p0 = P_{n-1}(z)
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Rule on the segment `[a, b]` exact for polynomials of degree `degree`.
pub fn segment_rule(a: &Point, b: &Point, degree: usize) -> QuadRule {
    let (x, w) = gauss_legendre(points_for(degree));
    let half = 0.5 * (b - a).norm();
    let mid = 0.5 * (a + b);
    let dir = 0.5 * (b - a);
    QuadRule {
        points: x.iter().map(|&s| mid + s * dir).collect(),
        weights: w.iter().map(|&wi| wi * half).collect(),
    }
}

/// Tensor rule on the axis-aligned box `[lo, hi]`. Axes where `lo == hi` are
/// skipped, so this also covers axis-aligned rectangles in 3D.
pub fn box_rule(lo: &Point, hi: &Point, dim: usize, degree: usize) -> QuadRule {
    let (x, w) = gauss_legendre(points_for(degree));
    let mut rule = QuadRule { points: vec![0.5 * (lo + hi)], weights: vec![1.0] };
    for axis in 0..dim {
        let len = hi[axis] - lo[axis];
        if len == 0.0 {
            continue;
        }
        let mid = 0.5 * (lo[axis] + hi[axis]);
        let mut next = QuadRule::default();
        for (p, pw) in rule.points.iter().zip(&rule.weights) {
            for (s, sw) in x.iter().zip(&w) {
                let mut q = *p;
                q[axis] = mid + 0.5 * len * s;
                next.points.push(q);
                next.weights.push(pw * sw * 0.5 * len);
            }
        }
        rule = next;
    }
    rule
}

/// Rule on a convex polygon: fan sub-triangulation from `center`, each
/// triangle integrated by a collapsed (Duffy) tensor Gauss rule.
pub fn polygon_rule(vertices: &[Point], center: &Point, degree: usize) -> QuadRule {
    let (x, w) = gauss_legendre(points_for(degree + 1));
    let (y, wy) = gauss_legendre(points_for(degree));
    let mut rule = QuadRule::default();
    let m = vertices.len();
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        let ea = a - center;
        let eb = b - center;
        let area2 = (ea.x * eb.y - ea.y * eb.x).abs();
        for (xi, wxi) in x.iter().zip(&w) {
            let u = 0.5 * (xi + 1.0);
            for (yj, wyj) in y.iter().zip(&wy) {
                let v = 0.5 * (yj + 1.0);
                rule.points.push(center + u * (ea + v * (eb - ea)));
                rule.weights.push(0.25 * wxi * wyj * u * area2);
            }
        }
    }
    rule
}

pub fn cell_rule(mesh: &PolytopalMesh, cell: &Cell, degree: usize) -> Result<QuadRule> {
    let pts: Vec<Point> = cell.vertices.iter().map(|&v| mesh.vertices[v]).collect();
    match mesh.dim {
        2 => {
            let axis_aligned = pts.len() == 4
                && (0..4).all(|i| {
                    let e = pts[(i + 1) % 4] - pts[i];
                    e.x == 0.0 || e.y == 0.0
                });
            if axis_aligned {
                let (lo, hi) = bounds(&pts);
                Ok(box_rule(&lo, &hi, 2, degree))
            } else {
                Ok(polygon_rule(&pts, &cell.centroid, degree))
            }
        }
        3 => {
            let (lo, hi) = bounds(&pts);
            Ok(box_rule(&lo, &hi, 3, degree))
        }
        d => Err(TraceLabError::Unsupported(format!("cell quadrature in dimension {d}"))),
    }
}

pub fn face_rule(mesh: &PolytopalMesh, face: &Face, degree: usize) -> Result<QuadRule> {
    let pts: Vec<Point> = face.vertices.iter().map(|&v| mesh.vertices[v]).collect();
    match mesh.dim {
        2 => Ok(segment_rule(&pts[0], &pts[1], degree)),
        3 => {
            let (lo, hi) = bounds(&pts);
            Ok(box_rule(&lo, &hi, 3, degree))
        }
        d => Err(TraceLabError::Unsupported(format!("face quadrature in dimension {d}"))),
    }
}

fn bounds(pts: &[Point]) -> (Point, Point) {
    pts.iter().fold((pts[0], pts[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, build_perturbed_quads};
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
                assert!((q - exact).abs() < 1e-14, "n={n} p={p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn segment_examples() {
        let r = segment_rule(&Point::zeros(), &Point::new(1.0, 0.0, 0.0), 2);
        assert!((r.integrate(|p| p.x * p.x) - 1.0 / 3.0).abs() < 1e-14);
        let r = box_rule(&Point::zeros(), &Point::new(0.25, 0.25, 0.0), 2, 0);
        assert_relative_eq!(r.measure(), 0.0625, max_relative = 1e-15);
    }

    #[test]
    fn polygon_rule_matches_shoelace_and_moments() {
        let mesh = build_perturbed_quads(4, 0.25, 3).unwrap();
        for c in &mesh.cells {
            let pts: Vec<Point> = c.vertices.iter().map(|&v| mesh.vertices[v]).collect();
            let r = polygon_rule(&pts, &c.centroid, 6);
            let shoelace: f64 = (0..pts.len())
                .map(|i| {
                    let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                    0.5 * (a.x * b.y - b.x * a.y)
                })
                .sum();
            assert!((r.measure() - shoelace).abs() < 1e-13);
            // x^a y^b moments by the divergence theorem on each edge
            for (a, b) in [(1, 0), (2, 1), (3, 3), (0, 6)] {
                let q = r.integrate(|p| p.x.powi(a) * p.y.powi(b));
                let edge = |i: usize| -> f64 {
                    let (p0, p1) = (pts[i], pts[(i + 1) % pts.len()]);
                    let s = segment_rule(&p0, &p1, a as usize + b as usize + 1);
                    let n = (p1 - p0).norm();
                    let nx = (p1.y - p0.y) / n;
                    s.integrate(|p| p.x.powi(a + 1) * p.y.powi(b) / (a as f64 + 1.0) * nx)
                };
                let exact: f64 = (0..pts.len()).map(edge).sum();
                assert!((q - exact).abs() < 1e-14, "{a},{b}: {q} {exact}");
            }
        }
    }

    #[test]
    fn cell_and_face_rules_integrate_measures() {
        for (d, n) in [(2, 3), (3, 2)] {
            let mesh = build_cartesian(d, n).unwrap();
            for c in &mesh.cells {
                let r = cell_rule(&mesh, c, 4).unwrap();
                assert_relative_eq!(r.measure(), c.measure, max_relative = 1e-14);
                let cx = r.integrate(|p| p.x) / c.measure;
                assert_relative_eq!(cx, c.centroid.x, max_relative = 1e-14);
            }
            for f in &mesh.faces {
                let r = face_rule(&mesh, f, 3).unwrap();
                assert_relative_eq!(r.measure(), f.measure, max_relative = 1e-14);
            }
        }
    }
}
