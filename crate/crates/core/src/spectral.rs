//! The kernel-fixed generalized eigenvalue problem
//! `(A_SC + S^T S) W = (H + S^T S) W Lambda` on boundary DoFs and refinement
//! sweeps of its extreme eigenvalues.
//!
//! The pencil is solved as a symmetric-definite problem: with `B = L L^T`,
//! the eigenvalues are those of the symmetric matrix `L^{-1} M L^{-T}`.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::condense::Condensed;
use crate::error::{Result, TraceLabError};
use crate::mesh::MeshFamily;
use crate::par::{map_slice, Exec};
use crate::seminorms::OperatorBundle;
use crate::space::{DegreeConfig, HybridSpace};

/// Relative threshold on the smallest eigenvalue of `H + S^T S`.
pub const SPD_RTOL: f64 = 1e-12;

/// Schur complement of the H^1 matrix on boundary DoFs.
pub fn schur_complement(bundle: &OperatorBundle, exec: Exec) -> Result<DMatrix<f64>> {
    Ok(Condensed::new(bundle, exec)?.schur_complement(exec))
}

#[derive(Clone, Debug)]
pub struct Gevp {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// `B`-orthonormal eigenvectors as columns, if requested.
    pub vectors: Option<DMatrix<f64>>,
    /// `max |W^T B W - I|` when eigenvectors were computed.
    pub b_orthogonality: Option<f64>,
}

impl Gevp {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

fn rank_one_update(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    m + s * s.transpose()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Solves `(A_SC + S^T S) w = lambda (H + S^T S) w`.
pub fn solve_gevp(a_sc: &DMatrix<f64>, h: &DMatrix<f64>, s: &DVector<f64>, vectors: bool) -> Result<Gevp> {
    let n = a_sc.nrows();
    if h.nrows() != n || s.len() != n {
        return Err(TraceLabError::DimensionMismatch { expected: n, got: h.nrows().min(s.len()) });
    }
    let b = symmetrize(rank_one_update(h, s));
    let m = symmetrize(rank_one_update(a_sc, s));

    let b_eigs = SymmetricEigen::new(b.clone()).eigenvalues;
    let bmin = b_eigs.min();
    let bmax = b_eigs.max();
    if !(bmin > SPD_RTOL * bmax) {
        return Err(TraceLabError::NotPositiveDefinite(format!(
            "H + S^T S: smallest eigenvalue {bmin:e}, largest {bmax:e}"
        )));
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| TraceLabError::NotPositiveDefinite("Cholesky of H + S^T S failed".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&m)
        .ok_or_else(|| TraceLabError::Solver("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| TraceLabError::Solver("triangular solve failed".into()))?;
    let c = symmetrize(c);

    let (values, vecs) = if vectors {
        let eig = SymmetricEigen::new(c);
        (eig.eigenvalues, Some(eig.eigenvectors))
    } else {
        (c.symmetric_eigenvalues(), None)
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted: Vec<f64> = idx.iter().map(|&i| values[i]).collect();

    let (vectors, b_orthogonality) = match vecs {
        None => (None, None),
        Some(y) => {
            let mut ys = DMatrix::zeros(n, n);
            for (new, &old) in idx.iter().enumerate() {
                ys.set_column(new, &y.column(old));
            }
            let w = l
                .transpose()
                .solve_upper_triangular(&ys)
                .ok_or_else(|| TraceLabError::Solver("back substitution failed".into()))?;
            let gram = w.transpose() * &b * &w;
            let dev = (gram - DMatrix::identity(n, n)).amax();
            (Some(w), Some(dev))
        }
    };
    Ok(Gevp { values: sorted, vectors, b_orthogonality })
}

/// `w^T (A_SC + S^T S) w / w^T (H + S^T S) w`.
pub fn rayleigh_quotient(a_sc: &DMatrix<f64>, h: &DMatrix<f64>, s: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let sw = s.dot(w);
    (w.dot(&(a_sc * w)) + sw * sw) / (w.dot(&(h * w)) + sw * sw)
}

/// One run of a refinement sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRecord {
    pub dim: usize,
    pub n: usize,
    pub k_cell: usize,
    pub k_face: usize,
    pub ndof_total: usize,
    pub ndof_bd: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cond: f64,
    pub seconds: f64,
}

/// Fixed header of the sweep CSV.
pub const CSV_HEADER: &str = "dim,n,k_cell,k_face,ndof_total,ndof_bd,lambda_min,lambda_max,cond,seconds";

impl SpectralRecord {
    pub fn csv_row(&self, timings: bool) -> String {
        let secs = if timings { self.seconds } else { 0.0 };
        format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e}",
            self.dim,
            self.n,
            self.k_cell,
            self.k_face,
            self.ndof_total,
            self.ndof_bd,
            self.lambda_min,
            self.lambda_max,
            self.cond,
            secs
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 10 {
            return Err(TraceLabError::InvalidArgument(format!("expected 10 CSV fields, got {}", f.len())));
        }
        let u = |i: usize| {
            f[i].parse::<usize>().map_err(|e| TraceLabError::InvalidArgument(format!("field {i}: {e}")))
        };
        let x = |i: usize| {
            f[i].parse::<f64>().map_err(|e| TraceLabError::InvalidArgument(format!("field {i}: {e}")))
        };
        Ok(SpectralRecord {
            dim: u(0)?,
            n: u(1)?,
            k_cell: u(2)?,
            k_face: u(3)?,
            ndof_total: u(4)?,
            ndof_bd: u(5)?,
            lambda_min: x(6)?,
            lambda_max: x(7)?,
            cond: x(8)?,
            seconds: x(9)?,
        })
    }
}

/// A failed sweep configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub dim: usize,
    pub n: usize,
    pub k_cell: usize,
    pub k_face: usize,
    pub error: String,
}

/// Successive-refinement ratios between records `n` and `2n` of one degree pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessiveRatio {
    pub k_cell: usize,
    pub k_face: usize,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub lambda_min_ratio: f64,
    pub lambda_max_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub records: Vec<SpectralRecord>,
    pub failures: Vec<SweepFailure>,
}

impl SpectralReport {
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row(timings));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(TraceLabError::InvalidArgument(format!(
                    "unexpected sweep CSV header {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let records =
            lines.filter(|l| !l.trim().is_empty()).map(SpectralRecord::parse_csv_row).collect::<Result<_>>()?;
        Ok(SpectralReport { records, failures: Vec::new() })
    }

    /// Ratios between consecutive `n` values that differ by a factor of two.
    pub fn successive_ratios(&self) -> Vec<SuccessiveRatio> {
        let mut out = Vec::new();
        for a in &self.records {
            for b in &self.records {
                if a.dim == b.dim && a.k_cell == b.k_cell && a.k_face == b.k_face && b.n == 2 * a.n {
                    out.push(SuccessiveRatio {
                        k_cell: a.k_cell,
                        k_face: a.k_face,
                        n_coarse: a.n,
                        n_fine: b.n,
                        lambda_min_ratio: b.lambda_min / a.lambda_min,
                        lambda_max_ratio: b.lambda_max / a.lambda_max,
                    });
                }
            }
        }
        out
    }
}

/// Builds the operators for one configuration and computes the pencil spectrum.
pub fn run_config(
    dim: usize,
    n: usize,
    degrees: DegreeConfig,
    family: MeshFamily,
    exec: Exec,
) -> Result<SpectralRecord> {
    let start = Instant::now();
    let mesh = Arc::new(family.build(dim, n)?);
    let space = Arc::new(HybridSpace::new(mesh, degrees)?);
    let bundle = OperatorBundle::assemble(space.clone(), exec)?;
    let a_sc = schur_complement(&bundle, exec)?;
    let gevp = solve_gevp(&a_sc, &bundle.h, &bundle.s, false)?;
    let (lmin, lmax) = (gevp.min(), gevp.max());
    if !(lmin > 0.0) {
        return Err(TraceLabError::Solver(format!("non-positive smallest eigenvalue {lmin:e}")));
    }
    Ok(SpectralRecord {
        dim,
        n,
        k_cell: degrees.cell,
        k_face: degrees.face,
        ndof_total: space.map.total(),
        ndof_bd: space.map.n_bd,
        lambda_min: lmin,
        lambda_max: lmax,
        cond: lmax / lmin,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every `(n, degrees)` combination. Failed runs are recorded and the
/// sweep continues. Records are ordered by degree pair, then `n`.
pub fn refinement_sweep(
    dim: usize,
    ns: &[usize],
    degrees: &[DegreeConfig],
    family: MeshFamily,
    exec: Exec,
) -> SpectralReport {
    let configs: Vec<(DegreeConfig, usize)> =
        degrees.iter().flat_map(|&d| ns.iter().map(move |&n| (d, n))).collect();
    // Configurations run concurrently; each one is sequential inside.
    let inner = if exec.is_parallel() { Exec::Serial } else { exec };
    let results = map_slice(exec, &configs, |&(d, n)| run_config(dim, n, d, family, inner));
    let mut report = SpectralReport::default();
    for ((d, n), r) in configs.into_iter().zip(results) {
        match r {
            Ok(rec) => report.records.push(rec),
            Err(e) => report.failures.push(SweepFailure {
                dim,
                n,
                k_cell: d.cell,
                k_face: d.face,
                error: e.to_string(),
            }),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cartesian;

    fn bundle(d: usize, n: usize, k: usize) -> OperatorBundle {
        let mesh = Arc::new(build_cartesian(d, n).unwrap());
        let space = Arc::new(HybridSpace::new(mesh, DegreeConfig::uniform(k).unwrap()).unwrap());
        OperatorBundle::assemble(space, Exec::default()).unwrap()
    }

    #[test]
    fn constant_vector_has_unit_eigenvalue() {
        let b = bundle(2, 4, 1);
        let sc = schur_complement(&b, Exec::default()).unwrap();
        let w = b.space.constant_trace(1.0).data;
        let lhs = &sc * &w + &b.s * b.s.dot(&w);
        let rhs = &b.h * &w + &b.s * b.s.dot(&w);
        assert!((lhs - rhs).amax() < 1e-12);
        let g = solve_gevp(&sc, &b.h, &b.s, true).unwrap();
        assert!(g.values.windows(2).all(|p| p[0] <= p[1]));
        assert!(g.min() > 0.0);
        assert!(g.b_orthogonality.unwrap() < 1e-8);
        assert!(g.values.iter().any(|l| (l - 1.0).abs() < 1e-10));
    }

    #[test]
    fn rayleigh_quotients_lie_in_spectrum() {
        let b = bundle(2, 4, 2);
        let sc = schur_complement(&b, Exec::default()).unwrap();
        let g = solve_gevp(&sc, &b.h, &b.s, false).unwrap();
        for s in 0..20 {
            let w = b.space.random_trace(3, s).data;
            let q = rayleigh_quotient(&sc, &b.h, &b.s, &w);
            assert!(q >= g.min() * (1.0 - 1e-10) && q <= g.max() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn singular_b_is_rejected() {
        let h = DMatrix::zeros(3, 3);
        let s = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let err = solve_gevp(&DMatrix::identity(3, 3), &h, &s, false).unwrap_err();
        assert!(matches!(err, TraceLabError::NotPositiveDefinite(_)));
    }

    #[test]
    fn csv_round_trip() {
        let report = refinement_sweep(2, &[2, 4], &[DegreeConfig::uniform(0).unwrap()], MeshFamily::Cartesian, Exec::default());
        assert_eq!(report.records.len(), 2);
        let csv = report.to_csv(false);
        assert!(csv.starts_with(CSV_HEADER));
        let back = SpectralReport::from_csv(&csv).unwrap();
        assert_eq!(back.records.len(), 2);
        assert_eq!(back.records[1].lambda_min, report.records[1].lambda_min);
        assert_eq!(report.successive_ratios().len(), 1);
    }
}
