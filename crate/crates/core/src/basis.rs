//! Scaled monomial bases on cells and faces.
//!
//! On an entity with centroid `c` and diameter `h`, the basis of degree `k` is
//! `prod_i ((y_i - c_i) / h)^{a_i}` over multi-indices `|a| <= k`, where `y` is
//! the ambient point for cells and the in-face frame coordinates for faces.
//! Multi-indices are ordered by total degree, then with the first exponent
//! decreasing, so the constant function is always index 0.

use crate::mesh::{Cell, Face, Point};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 7;

/// `dim P_k` in `m` variables.
pub fn poly_dim(m: usize, k: usize) -> usize {
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 1..=m {
        num *= k + i;
        den *= i;
    }
    num / den
}

/// Exponent tuples of `P_k` in `m <= 3` variables in basis order.
pub fn multi_indices(m: usize, k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(poly_dim(m, k));
    for s in 0..=k {
        match m {
            0 => {
                if s == 0 {
                    out.push([0, 0, 0]);
                }
            }
            1 => out.push([s, 0, 0]),
            2 => {
                for a in (0..=s).rev() {
                    out.push([a, s - a, 0]);
                }
            }
            3 => {
                for a in (0..=s).rev() {
                    for b in (0..=s - a).rev() {
                        out.push([a, b, s - a - b]);
                    }
                }
            }
            _ => panic!("multi-indices supported for up to 3 variables"),
        }
    }
    out
}

/// A scaled monomial basis attached to one entity.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub vars: usize,
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
    /// Frame vectors mapping ambient points to the local variables.
    pub frame: Vec<Point>,
    pub exponents: Vec<[usize; 3]>,
}

impl MonomialBasis {
    pub fn for_cell(cell: &Cell, dim: usize, degree: usize) -> Self {
        let frame = (0..dim)
            .map(|a| {
                let mut e = Point::zeros();
                e[a] = 1.0;
                e
            })
            .collect();
        Self::new(dim, degree, cell.centroid, cell.diameter, frame)
    }

    pub fn for_face(face: &Face, degree: usize) -> Self {
        Self::new(face.axes.len(), degree, face.centroid, face.diameter, face.axes.clone())
    }

    fn new(vars: usize, degree: usize, center: Point, scale: f64, frame: Vec<Point>) -> Self {
        assert!(degree <= MAX_DEGREE, "basis degree {degree} exceeds {MAX_DEGREE}");
        MonomialBasis { vars, degree, center, scale, frame, exponents: multi_indices(vars, degree) }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn local(&self, x: &Point) -> [f64; 3] {
        let r = x - self.center;
        let mut y = [0.0; 3];
        for (yi, e) in y.iter_mut().zip(&self.frame) {
            *yi = e.dot(&r) / self.scale;
        }
        y
    }

    /// Powers `y_i^p` for `p = 0..=degree`.
    fn powers(&self, y: &[f64; 3]) -> [[f64; MAX_DEGREE + 1]; 3] {
        let mut p = [[1.0; MAX_DEGREE + 1]; 3];
        for i in 0..self.vars {
            for k in 1..=self.degree {
                p[i][k] = p[i][k - 1] * y[i];
            }
        }
        p
    }

    /// Writes all basis values at `x` into `out`.
    pub fn eval_into(&self, x: &Point, out: &mut [f64]) {
        let p = self.powers(&self.local(x));
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = p[0][e[0]] * p[1][e[1]] * p[2][e[2]];
        }
    }

    pub fn eval(&self, x: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }

    /// Ambient gradients of all basis functions at `x`.
    pub fn grad(&self, x: &Point) -> Vec<Point> {
        let y = self.local(x);
        self.exponents
            .iter()
            .map(|e| {
                let mut g = Point::zeros();
                for i in 0..self.vars {
                    if e[i] == 0 {
                        continue;
                    }
                    let mut d = e[i] as f64 * y[i].powi(e[i] as i32 - 1) / self.scale;
                    for j in (0..self.vars).filter(|&j| j != i) {
                        d *= y[j].powi(e[j] as i32);
                    }
                    g += d * self.frame[i];
                }
                g
            })
            .collect()
    }

    /// Value of the polynomial with coefficients `coef` at `x`.
    pub fn eval_poly(&self, coef: &[f64], x: &Point) -> f64 {
        self.eval(x).iter().zip(coef).map(|(b, c)| b * c).sum()
    }
}
