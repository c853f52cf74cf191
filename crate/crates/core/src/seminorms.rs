//! Gram matrices of the discrete H^1 and H^{1/2} seminorms and the boundary
//! integral row.
//!
//! For `v` in the hybrid space,
//!
//! ```text
//! |v|_{1,h}^2 = sum_t ( ||grad v_t||_t^2 + sum_{f in F_t} h_t^{-1} ||v_f - v_t||_f^2 )
//! ```
//!
//! and for a boundary trace `w` with face averages `wbar_f`,
//!
//! ```text
//! |||w|||_{1/2,h}^2 = sum_f h_f^{-1} ||w_f - wbar_f||_f^2
//!                   + sum_{f != f'} |f| |f'| (wbar_f - wbar_f')^2 / |x_f - x_f'|^d
//! ```
//!
//! where the second sum runs over ordered pairs of boundary faces.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Result, TraceLabError};
use crate::mesh::MeshStats;
use crate::par::{map_range, Exec};
use crate::space::{BoundaryTrace, HybridSpace, HybridVector};

/// Local H^1 matrix of one cell on its own DoFs: the cell block followed by
/// the face blocks in the cell's face order.
#[derive(Clone, Debug)]
pub struct LocalMatrix {
    pub dofs: Vec<usize>,
    pub mat: DMatrix<f64>,
}

pub fn local_h1(space: &HybridSpace, t: usize) -> Result<LocalMatrix> {
    let mesh = &space.mesh;
    let cell = &mesh.cells[t];
    let map = &space.map;
    let nc = map.n_cell_local;
    let nf = map.n_face_local;
    let size = nc + nf * cell.faces.len();
    let mut mat = DMatrix::zeros(size, size);
    let cb = &space.cell_bases[t];

    if space.degrees.cell > 0 {
        let rule = space.cell_rule(t)?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let g = cb.grad(p);
            for i in 1..nc {
                for j in i..nc {
                    let v = w * g[i].dot(&g[j]);
                    mat[(i, j)] += v;
                    if i != j {
                        mat[(j, i)] += v;
                    }
                }
            }
        }
    }

    let inv_h = 1.0 / cell.diameter;
    let mut phi = vec![0.0; nc];
    let mut psi = vec![0.0; nf];
    for (k, &f) in cell.faces.iter().enumerate() {
        let off = nc + k * nf;
        let fb = &space.face_bases[f];
        let rule = space.face_rule(f)?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            cb.eval_into(p, &mut phi);
            fb.eval_into(p, &mut psi);
            let s = w * inv_h;
            for i in 0..nc {
                for j in 0..nc {
                    mat[(i, j)] += s * phi[i] * phi[j];
                }
                for a in 0..nf {
                    let v = s * phi[i] * psi[a];
                    mat[(i, off + a)] -= v;
                    mat[(off + a, i)] -= v;
                }
            }
            for a in 0..nf {
                for b in 0..nf {
                    mat[(off + a, off + b)] += s * psi[a] * psi[b];
                }
            }
        }
    }

    let mut dofs: Vec<usize> = map.cell_range(t).collect();
    for &f in &cell.faces {
        dofs.extend(map.face_range(f));
    }
    Ok(LocalMatrix { dofs, mat })
}

/// Local matrices of all cells, in cell order.
pub fn local_h1_all(space: &HybridSpace, exec: Exec) -> Result<Vec<LocalMatrix>> {
    map_range(exec, space.mesh.num_cells(), |t| local_h1(space, t)).into_iter().collect()
}

/// Sums local matrices into a global sparse matrix.
pub fn assemble_locals(n: usize, locals: &[LocalMatrix]) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for lm in locals {
        for (j, &gj) in lm.dofs.iter().enumerate() {
            for (i, &gi) in lm.dofs.iter().enumerate() {
                let v = lm.mat[(i, j)];
                if v != 0.0 {
                    coo.push(gi, gj, v);
                }
            }
        }
    }
    CscMatrix::from(&coo)
}

pub fn assemble_h1(space: &HybridSpace, exec: Exec) -> Result<CscMatrix<f64>> {
    let locals = local_h1_all(space, exec)?;
    Ok(assemble_locals(space.map.total(), &locals))
}

/// Rows of the averaging map: for each boundary face, the coefficients that
/// produce its average `wbar_f` from its block.
fn average_rows(space: &HybridSpace) -> Vec<Vec<f64>> {
    space
        .mesh
        .boundary_faces
        .iter()
        .map(|&f| {
            let m = space.mesh.faces[f].measure;
            space.face_moments[f].iter().map(|x| x / m).collect()
        })
        .collect()
}

/// Pair weights `|f||f'| / |x_f - x_f'|^d` between boundary faces (zero on
/// the diagonal).
pub fn pair_weights(space: &HybridSpace, exec: Exec) -> Result<DMatrix<f64>> {
    let mesh = &space.mesh;
    let bf = &mesh.boundary_faces;
    let d = mesh.dim as i32;
    let rows = map_range(exec, bf.len(), |i| -> Result<Vec<f64>> {
        let fi = &mesh.faces[bf[i]];
        let mut row = vec![0.0; bf.len()];
        for (j, &g) in bf.iter().enumerate() {
            if j == i {
                continue;
            }
            let fj = &mesh.faces[g];
            let dist = (fi.centroid - fj.centroid).norm();
            if !(dist > 0.0) {
                return Err(TraceLabError::Geometry(format!(
                    "boundary faces {} and {} have coincident centroids",
                    bf[i], g
                )));
            }
            row[j] = fi.measure * fj.measure / dist.powi(d);
        }
        Ok(row)
    });
    let n = bf.len();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            k[(i, j)] = v;
        }
    }
    Ok(k)
}

pub fn assemble_hhalf(space: &HybridSpace, exec: Exec) -> Result<DMatrix<f64>> {
    let mesh = &space.mesh;
    let map = &space.map;
    let nf = map.n_face_local;
    let bf = &mesh.boundary_faces;
    let nb = bf.len();
    let avg = average_rows(space);
    let k = pair_weights(space, exec)?;

    // Local oscillation blocks h_f^{-1} (M_f - m m^T / |f|).
    let local_blocks = map_range(exec, nb, |i| -> Result<DMatrix<f64>> {
        let f = bf[i];
        let face = &mesh.faces[f];
        let fb = &space.face_bases[f];
        let rule = space.face_rule(f)?;
        let mut mass = DMatrix::zeros(nf, nf);
        let mut psi = vec![0.0; nf];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            fb.eval_into(p, &mut psi);
            for a in 0..nf {
                for b in 0..nf {
                    mass[(a, b)] += w * psi[a] * psi[b];
                }
            }
        }
        let m = &space.face_moments[f];
        for a in 0..nf {
            for b in 0..nf {
                mass[(a, b)] -= m[a] * m[b] / face.measure;
            }
        }
        Ok(mass / face.diameter)
    });

    // Long-range part P^T L P with L = 2 (D - K), one block row per face.
    let rows = map_range(exec, nb, |i| {
        let mut row = DMatrix::zeros(nf, nb * nf);
        let diag: f64 = k.row(i).sum();
        for j in 0..nb {
            let l = if i == j { 2.0 * diag } else { -2.0 * k[(i, j)] };
            if l == 0.0 {
                continue;
            }
            for a in 0..nf {
                for b in 0..nf {
                    row[(a, j * nf + b)] = l * avg[i][a] * avg[j][b];
                }
            }
        }
        row
    });

    let mut h = DMatrix::zeros(nb * nf, nb * nf);
    for (i, (row, local)) in rows.into_iter().zip(local_blocks).enumerate() {
        h.view_mut((i * nf, 0), (nf, nb * nf)).copy_from(&row);
        let mut blk = h.view_mut((i * nf, i * nf), (nf, nf));
        blk += local?;
    }
    // Exact symmetry; the two triangles agree up to rounding in the sums.
    let ht = h.transpose();
    Ok((h + ht) * 0.5)
}

/// Boundary integrals `S_a = int_{dOmega} phi_a` of the boundary basis.
pub fn assemble_s(space: &HybridSpace) -> DVector<f64> {
    let map = &space.map;
    let mut s = DVector::zeros(map.n_bd);
    for &f in &space.mesh.boundary_faces {
        let o = map.bd_offset(f).unwrap();
        for (a, m) in space.face_moments[f].iter().enumerate() {
            s[o + a] = *m;
        }
    }
    s
}

/// `y = A x` for a sparse matrix.
pub fn csc_mul(a: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

/// `x^T A x` for a sparse matrix.
pub fn csc_quad(a: &CscMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&csc_mul(a, x))
}

/// Everything needed to evaluate both seminorms on one mesh and degree pair.
#[derive(Clone, Debug)]
pub struct OperatorBundle {
    pub space: Arc<HybridSpace>,
    pub locals: Vec<LocalMatrix>,
    pub a: CscMatrix<f64>,
    pub h: DMatrix<f64>,
    pub s: DVector<f64>,
    pub stats: MeshStats,
}

impl OperatorBundle {
    pub fn assemble(space: Arc<HybridSpace>, exec: Exec) -> Result<Self> {
        let locals = local_h1_all(&space, exec)?;
        let a = assemble_locals(space.map.total(), &locals);
        let h = assemble_hhalf(&space, exec)?;
        let s = assemble_s(&space);
        let stats = space.mesh.stats();
        Ok(OperatorBundle { space, locals, a, h, s, stats })
    }

    /// `v^T A v`.
    pub fn h1_form(&self, v: &HybridVector) -> Result<f64> {
        if v.data.len() != self.a.ncols() {
            return Err(TraceLabError::DimensionMismatch { expected: self.a.ncols(), got: v.data.len() });
        }
        Ok(csc_quad(&self.a, &v.data))
    }

    /// `w^T H w`.
    pub fn hhalf_form(&self, w: &BoundaryTrace) -> Result<f64> {
        if w.data.len() != self.h.ncols() {
            return Err(TraceLabError::DimensionMismatch { expected: self.h.ncols(), got: w.data.len() });
        }
        Ok(w.data.dot(&(&self.h * &w.data)))
    }

    /// `|v|_{1,h}`.
    pub fn h1_seminorm(&self, v: &HybridVector) -> Result<f64> {
        Ok(self.h1_form(v)?.max(0.0).sqrt())
    }

    /// `|||w|||_{1/2,h}`.
    pub fn hhalf_seminorm(&self, w: &BoundaryTrace) -> Result<f64> {
        Ok(self.hhalf_form(w)?.max(0.0).sqrt())
    }

    /// `int_{dOmega} w`.
    pub fn boundary_integral(&self, w: &BoundaryTrace) -> f64 {
        self.s.dot(&w.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cartesian;
    use crate::space::{trace, DegreeConfig};

    fn bundle(d: usize, n: usize, k: usize) -> OperatorBundle {
        let mesh = Arc::new(build_cartesian(d, n).unwrap());
        let space = Arc::new(HybridSpace::new(mesh, DegreeConfig::uniform(k).unwrap()).unwrap());
        OperatorBundle::assemble(space, Exec::default()).unwrap()
    }

    #[test]
    fn single_cell_one_face() {
        let b = bundle(2, 1, 0);
        let mut v = b.space.zeros();
        v.face_mut(0)[0] = 1.0;
        let e = b.h1_form(&v).unwrap();
        assert!((e - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((b.h1_seminorm(&v).unwrap() - (1.0 / 2f64.sqrt()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn indicator_of_bottom_face_hhalf() {
        let b = bundle(2, 1, 0);
        let mut w = b.space.zeros_trace();
        w.face_mut(0)[0] = 1.0;
        assert!((b.hhalf_form(&w).unwrap() - 10.0).abs() < 1e-13);
    }

    #[test]
    fn s_row_examples() {
        let b = bundle(2, 4, 0);
        assert_eq!(b.s.len(), 16);
        assert!(b.s.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let c = b.space.constant_trace(3.0);
        assert!((b.boundary_integral(&c) - 12.0).abs() < 1e-14);
        let b = bundle(2, 4, 1);
        for i in 0..16 {
            assert!(b.s[2 * i + 1].abs() < 1e-16);
        }
    }

    #[test]
    fn constants_are_in_both_kernels() {
        for (d, n, k) in [(2, 3, 2), (3, 2, 1)] {
            let b = bundle(d, n, k);
            let v = b.space.constant(1.7);
            assert!(b.h1_form(&v).unwrap().abs() < 1e-13);
            assert!(b.hhalf_form(&trace(&v)).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_and_block_sparse() {
        let b = bundle(2, 3, 2);
        let dense: DMatrix<f64> = DMatrix::from(&b.a);
        let asym = (&dense - dense.transpose()).amax();
        assert!(asym <= 1e-13 * dense.amax());
        let map = &b.space.map;
        let mesh = &b.space.mesh;
        let owner = |i: usize| -> Vec<usize> {
            for t in 0..mesh.num_cells() {
                if map.cell_range(t).contains(&i) {
                    return vec![t];
                }
            }
            let f = (0..mesh.num_faces()).find(|&f| map.face_range(f).contains(&i)).unwrap();
            let (a, c) = mesh.faces[f].owners;
            std::iter::once(a).chain(c).collect()
        };
        for (i, j, _) in b.a.triplet_iter() {
            let (oi, oj) = (owner(i), owner(j));
            assert!(oi.iter().any(|t| oj.contains(t)), "dofs {i},{j} share no cell");
        }
        assert_eq!((&b.h - b.h.transpose()).amax(), 0.0);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mesh = Arc::new(build_cartesian(2, 4).unwrap());
        let space = HybridSpace::new(mesh, DegreeConfig::new(2, 1).unwrap()).unwrap();
        let h1 = assemble_hhalf(&space, Exec::Serial).unwrap();
        let h2 = assemble_hhalf(&space, Exec::Parallel).unwrap();
        assert_eq!(h1, h2);
        let a1 = assemble_h1(&space, Exec::Serial).unwrap();
        let a2 = assemble_h1(&space, Exec::Parallel).unwrap();
        assert_eq!(a1, a2);
    }
}
