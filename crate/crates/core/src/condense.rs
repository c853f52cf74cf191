//! Static condensation of cell unknowns, sparse factorization of the
//! interior-face block, boundary Schur complement and discrete harmonic
//! extension.
//!
//! Cell blocks of the H^1 matrix are decoupled from each other, so they are
//! eliminated cell by cell. The remaining face system is split into interior
//! and boundary faces; the interior block is reordered with reverse
//! Cuthill-McKee and factorized with a sparse Cholesky.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Result, TraceLabError};
use crate::par::{map_range, Exec};
use crate::seminorms::{LocalMatrix, OperatorBundle};
use crate::space::{BoundaryTrace, HybridSpace, HybridVector};

/// Smallest admissible ratio between the smallest and largest Cholesky pivot.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern. Returns
/// `order` with `order[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |i: usize| adj[i].len();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree(i), i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(adj, start);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (degree(v), v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], root: usize) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = root;
    while let Some(u) = queue.pop_front() {
        last = u;
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let depth = level[last];
    (level, depth)
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut root = start;
    let (mut level, mut depth) = bfs_levels(adj, root);
    loop {
        let candidate = (0..adj.len())
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (adj[v].len(), v))
            .unwrap_or(root);
        let (l2, d2) = bfs_levels(adj, candidate);
        if d2 <= depth {
            return root;
        }
        root = candidate;
        level = l2;
        depth = d2;
    }
}

/// Sparse SPD factorization with a fill-reducing symmetric permutation.
pub struct SparseSpd {
    n: usize,
    /// `order[new] = old`.
    order: Vec<usize>,
    chol: Option<CscCholesky<f64>>,
    /// Smallest over largest Cholesky pivot.
    pub pivot_ratio: f64,
}

impl std::fmt::Debug for SparseSpd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseSpd").field("n", &self.n).field("pivot_ratio", &self.pivot_ratio).finish()
    }
}

impl SparseSpd {
    /// Factorizes a symmetric matrix given by its full (both triangles) pattern.
    pub fn factor(a: &CscMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Ok(SparseSpd { n, order: Vec::new(), chol: None, pivot_ratio: 1.0 });
        }
        let mut adj = vec![Vec::new(); n];
        for (i, j, _) in a.triplet_iter() {
            if i != j {
                adj[j].push(i);
            }
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut inverse = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let mut coo = CooMatrix::new(n, n);
        for (i, j, &v) in a.triplet_iter() {
            coo.push(inverse[i], inverse[j], v);
        }
        let permuted = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&permuted)
            .map_err(|e| TraceLabError::Solver(format!("sparse Cholesky failed: {e}")))?;
        let l = chol.l();
        let mut pmin = f64::INFINITY;
        let mut pmax = 0.0f64;
        for (i, j, &v) in l.triplet_iter() {
            if i == j {
                let p = v * v;
                pmin = pmin.min(p);
                pmax = pmax.max(p);
            }
        }
        let pivot_ratio = pmin / pmax;
        if !(pivot_ratio > PIVOT_RTOL) {
            return Err(TraceLabError::Solver(format!(
                "interior block is numerically singular: smallest pivot {pmin:e}, largest {pmax:e}"
            )));
        }
        Ok(SparseSpd { n, order, chol: Some(chol), pivot_ratio })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A X = B` for a block of right-hand sides.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let Some(chol) = &self.chol else {
            return DMatrix::zeros(0, b.ncols());
        };
        let mut pb = DMatrix::zeros(self.n, b.ncols());
        for (new, &old) in self.order.iter().enumerate() {
            pb.row_mut(new).copy_from(&b.row(old));
        }
        let px = chol.solve(&pb);
        let mut x = DMatrix::zeros(self.n, b.ncols());
        for (new, &old) in self.order.iter().enumerate() {
            x.row_mut(old).copy_from(&px.row(new));
        }
        x
    }

    /// Solves for many right-hand sides, splitting columns into chunks.
    pub fn solve_many(&self, b: &DMatrix<f64>, exec: Exec) -> DMatrix<f64> {
        const CHUNK: usize = 32;
        let ncols = b.ncols();
        let chunks = ncols.div_ceil(CHUNK);
        let parts = map_range(exec, chunks, |c| {
            let start = c * CHUNK;
            let width = CHUNK.min(ncols - start);
            self.solve(&b.columns(start, width).into_owned())
        });
        let mut x = DMatrix::zeros(self.n, ncols);
        for (c, part) in parts.into_iter().enumerate() {
            x.columns_mut(c * CHUNK, part.ncols()).copy_from(&part);
        }
        x
    }
}

/// Per-cell elimination data: `v_t = recovery * v_F(t)`.
#[derive(Clone, Debug)]
struct CellElimination {
    /// Face DoFs of the cell in the condensed (face-only) numbering.
    face_dofs: Vec<usize>,
    recovery: DMatrix<f64>,
    condensed: DMatrix<f64>,
}

fn eliminate_cell(lm: &LocalMatrix, nc: usize, n_cell: usize) -> Result<CellElimination> {
    let n = lm.dofs.len();
    let nfd = n - nc;
    let a_cc = lm.mat.view((0, 0), (nc, nc)).into_owned();
    let a_cf = lm.mat.view((0, nc), (nc, nfd)).into_owned();
    let a_ff = lm.mat.view((nc, nc), (nfd, nfd)).into_owned();
    let chol = a_cc
        .cholesky()
        .ok_or_else(|| TraceLabError::Solver("cell block of the H^1 matrix is not positive definite".into()))?;
    let x = chol.solve(&a_cf);
    let condensed = &a_ff - a_cf.transpose() * &x;
    Ok(CellElimination {
        face_dofs: lm.dofs[nc..].iter().map(|g| g - n_cell).collect(),
        recovery: -x,
        condensed,
    })
}

/// The condensed H^1 operator on face unknowns, split into interior and
/// boundary parts, with the interior block factorized.
#[derive(Debug)]
pub struct Condensed {
    pub space: Arc<HybridSpace>,
    cells: Vec<CellElimination>,
    /// Interior-boundary coupling `F_ib`, `N_int x N_bd`.
    f_ib: CscMatrix<f64>,
    /// Boundary block `F_bb`.
    f_bb: DMatrix<f64>,
    pub interior: SparseSpd,
}

impl Condensed {
    pub fn new(bundle: &OperatorBundle, exec: Exec) -> Result<Self> {
        let space = bundle.space.clone();
        let map = &space.map;
        let cells: Vec<CellElimination> = map_range(exec, bundle.locals.len(), |t| {
            eliminate_cell(&bundle.locals[t], map.n_cell_local, map.n_cell)
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let ni = map.n_int;
        let nb = map.n_bd;
        let mut ii = CooMatrix::new(ni, ni);
        let mut ib = CooMatrix::new(ni, nb);
        let mut f_bb = DMatrix::zeros(nb, nb);
        for ce in &cells {
            for (a, &ga) in ce.face_dofs.iter().enumerate() {
                for (b, &gb) in ce.face_dofs.iter().enumerate() {
                    let v = ce.condensed[(a, b)];
                    match (ga < ni, gb < ni) {
                        (true, true) => ii.push(ga, gb, v),
                        (true, false) => ib.push(ga, gb - ni, v),
                        (false, false) => f_bb[(ga - ni, gb - ni)] += v,
                        (false, true) => {}
                    }
                }
            }
        }
        let interior = SparseSpd::factor(&CscMatrix::from(&ii))?;
        Ok(Condensed { space, cells, f_ib: CscMatrix::from(&ib), f_bb, interior })
    }

    /// `A_SC = F_bb - F_ib^T F_ii^{-1} F_ib`, equal to the Schur complement of
    /// the full H^1 matrix on boundary DoFs.
    pub fn schur_complement(&self, exec: Exec) -> DMatrix<f64> {
        let nb = self.f_bb.nrows();
        let mut sc = self.f_bb.clone();
        if self.interior.dim() > 0 {
            let x = self.interior.solve_many(&DMatrix::from(&self.f_ib), exec);
            for (i, j, &v) in self.f_ib.triplet_iter() {
                for c in 0..nb {
                    sc[(j, c)] -= v * x[(i, c)];
                }
            }
        }
        let sct = sc.transpose();
        (sc + sct) * 0.5
    }

    /// Harmonic extensions of the columns of `w` (each a boundary vector).
    pub fn extend_columns(&self, w: &DMatrix<f64>, exec: Exec) -> Vec<HybridVector> {
        let map = &self.space.map;
        let ni = map.n_int;
        let m = w.ncols();
        // rhs = -F_ib w
        let mut rhs = DMatrix::zeros(ni, m);
        for (i, j, &v) in self.f_ib.triplet_iter() {
            for c in 0..m {
                rhs[(i, c)] -= v * w[(j, c)];
            }
        }
        let xi = self.interior.solve_many(&rhs, exec);
        (0..m)
            .map(|c| {
                let mut faces = DVector::zeros(ni + map.n_bd);
                faces.rows_mut(0, ni).copy_from(&xi.column(c));
                faces.rows_mut(ni, map.n_bd).copy_from(&w.column(c));
                self.recover(&faces)
            })
            .collect()
    }

    /// Rebuilds a full hybrid vector from face values by local cell solves.
    fn recover(&self, faces: &DVector<f64>) -> HybridVector {
        let map = self.space.map.clone();
        let mut data = DVector::zeros(map.total());
        data.rows_mut(map.n_cell, faces.len()).copy_from(faces);
        for (t, ce) in self.cells.iter().enumerate() {
            let vf = DVector::from_iterator(ce.face_dofs.len(), ce.face_dofs.iter().map(|&g| faces[g]));
            let vc = &ce.recovery * vf;
            data.rows_mut(map.cell_offsets[t], vc.len()).copy_from(&vc);
        }
        HybridVector { map, data }
    }

    pub fn harmonic_extension(&self, w: &BoundaryTrace) -> HybridVector {
        let cols = DMatrix::from_column_slice(w.data.len(), 1, w.data.as_slice());
        self.extend_columns(&cols, Exec::Serial).pop().unwrap()
    }
}

/// Dense reference Schur complement `A_bb - A_bi A_ii^{-1} A_ib` of the full
/// H^1 matrix, for small problems.
pub fn schur_dense(bundle: &OperatorBundle) -> Result<DMatrix<f64>> {
    let a = DMatrix::from(&bundle.a);
    let s = bundle.space.map.bd_start();
    let nb = bundle.space.map.n_bd;
    let a_ii = a.view((0, 0), (s, s)).into_owned();
    let a_ib = a.view((0, s), (s, nb)).into_owned();
    let a_bb = a.view((s, s), (nb, nb)).into_owned();
    let chol = a_ii.cholesky().ok_or_else(|| TraceLabError::NotPositiveDefinite("interior block".into()))?;
    Ok(a_bb - a_ib.transpose() * chol.solve(&a_ib))
}
