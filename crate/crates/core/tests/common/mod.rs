//! Independent reference evaluations used by the integration tests.
//!
//! The oracles evaluate the seminorms pointwise from their defining sums with
//! their own, higher-order quadrature, without going through local or global
//! matrices.

#![allow(dead_code)]

use std::sync::Arc;

use tracelab::mesh::{build_cartesian, MeshFamily, PolytopalMesh};
use tracelab::par::Exec;
use tracelab::quadrature::{cell_rule, face_rule};
use tracelab::seminorms::OperatorBundle;
use tracelab::space::{BoundaryTrace, DegreeConfig, HybridSpace, HybridVector};

pub fn space_on(mesh: PolytopalMesh, degrees: DegreeConfig) -> Arc<HybridSpace> {
    Arc::new(HybridSpace::new(Arc::new(mesh), degrees).unwrap())
}

pub fn cartesian_space(dim: usize, n: usize, k: usize) -> Arc<HybridSpace> {
    space_on(build_cartesian(dim, n).unwrap(), DegreeConfig::uniform(k).unwrap())
}

pub fn bundle(dim: usize, n: usize, k: usize) -> OperatorBundle {
    OperatorBundle::assemble(cartesian_space(dim, n, k), Exec::default()).unwrap()
}

pub fn family_bundle(family: MeshFamily, n: usize, degrees: DegreeConfig) -> OperatorBundle {
    OperatorBundle::assemble(space_on(family.build(2, n).unwrap(), degrees), Exec::default()).unwrap()
}

/// `sum_t ( ||grad v_t||_t^2 + sum_{f in F_t} h_t^{-1} ||v_f - v_t||_f^2 )`.
pub fn h1_oracle(space: &HybridSpace, v: &HybridVector) -> f64 {
    let mesh = &space.mesh;
    let q = 2 * space.degrees.k() + 2;
    let mut total = 0.0;
    for (t, cell) in mesh.cells.iter().enumerate() {
        let cb = &space.cell_bases[t];
        let coef = v.cell(t);
        let rule = cell_rule(mesh, cell, q).unwrap();
        total += rule.integrate(|x| {
            let g = cb.grad(x).iter().zip(coef).fold(tracelab::mesh::Point::zeros(), |acc, (gi, c)| acc + gi * *c);
            g.norm_squared()
        });
        for &f in &cell.faces {
            let fb = &space.face_bases[f];
            let fc = v.face(f);
            let rule = face_rule(mesh, &mesh.faces[f], q).unwrap();
            total += rule.integrate(|x| (fb.eval_poly(fc, x) - cb.eval_poly(coef, x)).powi(2)) / cell.diameter;
        }
    }
    total
}

/// `sum_f h_f^{-1} ||w_f - avg w_f||_f^2 + sum_{f != f'} |f||f'| (avg w_f - avg w_f')^2 / |x_f - x_f'|^d`.
pub fn hhalf_oracle(space: &HybridSpace, w: &BoundaryTrace) -> f64 {
    let mesh = &space.mesh;
    let q = 2 * space.degrees.face + 2;
    let bf = &mesh.boundary_faces;
    let mut avg = Vec::with_capacity(bf.len());
    let mut local = 0.0;
    for &f in bf {
        let face = &mesh.faces[f];
        let fb = &space.face_bases[f];
        let rule = face_rule(mesh, face, q).unwrap();
        let mean = rule.integrate(|x| fb.eval_poly(w.face(f), x)) / face.measure;
        local += rule.integrate(|x| (fb.eval_poly(w.face(f), x) - mean).powi(2)) / face.diameter;
        avg.push(mean);
    }
    let mut long = 0.0;
    for (i, &f) in bf.iter().enumerate() {
        for (j, &g) in bf.iter().enumerate() {
            if i != j {
                let (a, b) = (&mesh.faces[f], &mesh.faces[g]);
                long += a.measure * b.measure * (avg[i] - avg[j]).powi(2)
                    / (a.centroid - b.centroid).norm().powi(mesh.dim as i32);
            }
        }
    }
    local + long
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Coefficients of `det(lambda I - X)` (leading coefficient first) by the
/// Faddeev-LeVerrier recursion.
pub fn characteristic_polynomial(x: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let id = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut coeffs = vec![1.0];
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = x * &m + &id * coeffs[k - 1];
        let c = -(x * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Elementary symmetric polynomials of the roots with alternating signs, i.e.
/// the coefficients of `prod (lambda - r_i)`.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &a) in c.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= r * a;
        }
        c = next;
    }
    c
}
