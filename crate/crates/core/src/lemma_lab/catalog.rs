//! Geometric sets attached to one flat side of a box mesh.

use serde::Serialize;

use crate::error::Result;
use crate::flat::{FlatSide, WeightTable, GEOM_RTOL};
use crate::mesh::{Point, PolytopalMesh, Side};
use crate::par::{map_range, Exec};

/// Sets attached to an ordered pair `(f, f')` of distinct side faces.
#[derive(Clone, Debug, Serialize)]
pub struct PairSets {
    pub f: usize,
    pub fp: usize,
    /// Band index: `(l - 1) h <= |x_f - x_f'| < l h`.
    pub l: usize,
    /// `I_ff'`: cells met by the segment joining `x_f` and `x_f'` lifted to
    /// height `|x_f - x_f'|`, ascending.
    pub cells: Vec<usize>,
    /// `C_ff's` for `s = 1..=l+1` (index `s - 1`).
    pub horizontal: Vec<Vec<usize>>,
    /// Cells of `I_ff'` whose horizontal distance to `x_f` is `>= (l + 1) h`.
    pub overflow: Vec<usize>,
    /// Lowest-index cells containing the lifted endpoints, when inside the
    /// domain.
    pub anchors: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct SetCatalog {
    pub side: FlatSide,
    pub h: f64,
    /// Side faces, ascending.
    pub faces: Vec<usize>,
    /// Distance of each cell centroid to the side.
    pub delta_t: Vec<f64>,
    /// Distance of each face centroid to the side (all faces).
    pub delta_g: Vec<f64>,
    /// `V_f` per side face (indexed like `faces`).
    pub vertical: Vec<Vec<usize>>,
    /// `L_m` for `m = 0, 1, ...`.
    pub layers: Vec<Vec<usize>>,
    /// `W_l` at index `l - 1`.
    pub bands: Vec<Vec<(usize, usize)>>,
    /// All ordered pairs, lexicographic in `(f, f')`.
    pub pairs: Vec<PairSets>,
    /// `rho_t(f)`.
    pub weights: WeightTable,
    /// Selected face below each interior face (`None` for boundary faces).
    pub proj_face: Vec<Option<usize>>,
    /// Interior faces selected onto each side face (indexed like `faces`).
    pub dagger: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionCheck {
    /// `(L_m)` partitions the cells.
    pub layers: bool,
    /// `(W_l)` partitions the ordered pairs of distinct side faces.
    pub bands: bool,
    /// `(C_ff's)_{s <= l+1}` partitions every `I_ff'`.
    pub horizontal: bool,
    /// `I_ff'` lies in `L_{l-2} u L_{l-1} u L_l`.
    pub height: bool,
    /// The selected faces partition the interior faces.
    pub dagger: bool,
}

impl PartitionCheck {
    pub fn all(&self) -> bool {
        self.layers && self.bands && self.horizontal && self.height && self.dagger
    }
}

fn bounding_box(mesh: &PolytopalMesh, vertices: &[usize]) -> (Point, Point) {
    let first = mesh.vertices[vertices[0]];
    vertices.iter().fold((first, first), |(lo, hi), &v| (lo.inf(&mesh.vertices[v]), hi.sup(&mesh.vertices[v])))
}

fn boxes_overlap(a: &(Point, Point), b: &(Point, Point), tol: f64) -> bool {
    (0..3).all(|i| a.0[i] <= b.1[i] + tol && b.0[i] <= a.1[i] + tol)
}

/// Bucket index `floor(x / h)` with a relative slack so that values landing
/// on a band edge up to rounding are assigned to the upper band.
fn band(x: f64, h: f64) -> usize {
    ((x / h) * (1.0 + 4.0 * f64::EPSILON)).floor() as usize
}

impl SetCatalog {
    pub fn build(mesh: &PolytopalMesh, side: Side, exec: Exec) -> Result<Self> {
        let fs = FlatSide::new(mesh, side)?;
        let h = mesh.h();
        let tol = GEOM_RTOL * h;
        let faces = fs.faces.clone();
        let delta_t: Vec<f64> = mesh.cells.iter().map(|c| fs.height(&c.centroid)).collect();
        let delta_g: Vec<f64> = mesh.faces.iter().map(|f| fs.height(&f.centroid)).collect();
        let cell_boxes: Vec<_> = mesh.cells.iter().map(|c| bounding_box(mesh, &c.vertices)).collect();
        let cells_on_segment = |a: &Point, b: &Point| -> Vec<usize> {
            let seg = (a.inf(b), a.sup(b));
            (0..mesh.num_cells())
                .filter(|&t| boxes_overlap(&cell_boxes[t], &seg, tol) && mesh.cells[t].intersects_segment(a, b, tol))
                .collect()
        };
        let lowest_containing = |x: &Point| (0..mesh.num_cells()).find(|&t| mesh.cells[t].contains(x, tol));

        let reach = mesh.domain.extent(side.axis);
        let vertical = map_range(exec, faces.len(), |i| {
            let x = mesh.faces[faces[i]].centroid;
            cells_on_segment(&x, &(x + reach * fs.normal))
        });

        let mut layers: Vec<Vec<usize>> = Vec::new();
        for (t, &d) in delta_t.iter().enumerate() {
            let m = band(d, h);
            if layers.len() <= m {
                layers.resize(m + 1, Vec::new());
            }
            layers[m].push(t);
        }

        let ordered: Vec<(usize, usize)> =
            faces.iter().flat_map(|&f| faces.iter().filter(move |&&g| g != f).map(move |&g| (f, g))).collect();
        let pairs = map_range(exec, ordered.len(), |k| {
            let (f, fp) = ordered[k];
            let (xf, xfp) = (mesh.faces[f].centroid, mesh.faces[fp].centroid);
            let r = (xf - xfp).norm();
            let l = band(r, h) + 1;
            let (a, b) = (xf + r * fs.normal, xfp + r * fs.normal);
            let cells = cells_on_segment(&a, &b);
            let mut horizontal = vec![Vec::new(); l + 1];
            let mut overflow = Vec::new();
            for &t in &cells {
                let s = band((fs.project(&mesh.cells[t].centroid) - xf).norm(), h) + 1;
                if s <= l + 1 {
                    horizontal[s - 1].push(t);
                } else {
                    overflow.push(t);
                }
            }
            let anchors = lowest_containing(&a).zip(lowest_containing(&b));
            PairSets { f, fp, l, cells, horizontal, overflow, anchors }
        });
        let max_l = pairs.iter().map(|p| p.l).max().unwrap_or(0);
        let mut bands = vec![Vec::new(); max_l];
        for p in &pairs {
            bands[p.l - 1].push((p.f, p.fp));
        }

        let weights = fs.weights(mesh, exec);
        let proj_face: Vec<Option<usize>> = map_range(exec, mesh.num_faces(), |g| {
            if mesh.faces[g].boundary {
                return None;
            }
            let p = fs.project(&mesh.faces[g].centroid);
            faces.iter().copied().find(|&f| fs.face_contains(mesh, &p, f))
        });
        let mut dagger = vec![Vec::new(); faces.len()];
        for (g, pf) in proj_face.iter().enumerate() {
            if let Some(f) = pf {
                dagger[faces.binary_search(f).unwrap()].push(g);
            }
        }

        Ok(SetCatalog {
            side: fs,
            h,
            faces,
            delta_t,
            delta_g,
            vertical,
            layers,
            bands,
            pairs,
            weights,
            proj_face,
            dagger,
        })
    }

    /// Position of a side face in `faces`.
    pub fn position(&self, f: usize) -> Option<usize> {
        self.faces.binary_search(&f).ok()
    }

    /// The slice `W_lf`.
    pub fn band_slice(&self, l: usize, f: usize) -> Vec<usize> {
        match self.bands.get(l.wrapping_sub(1)) {
            Some(b) => b.iter().filter(|p| p.0 == f).map(|p| p.1).collect(),
            None => Vec::new(),
        }
    }

    pub fn pair(&self, f: usize, fp: usize) -> Option<&PairSets> {
        let n = self.faces.len();
        let (i, j) = (self.position(f)?, self.position(fp)?);
        if i == j {
            return None;
        }
        Some(&self.pairs[i * (n - 1) + if j < i { j } else { j - 1 }])
    }

    /// Side faces with centroid in the annulus `r2 <= |x_f - x| < r1`.
    pub fn annulus(&self, mesh: &PolytopalMesh, x: &Point, r1: f64, r2: f64) -> Vec<usize> {
        self.faces
            .iter()
            .copied()
            .filter(|&f| {
                let d = (mesh.faces[f].centroid - x).norm();
                r2 <= d && d < r1
            })
            .collect()
    }

    /// Side faces whose closure meets the closed disc `D(x, r)`.
    pub fn disc(&self, mesh: &PolytopalMesh, x: &Point, r: f64) -> Vec<usize> {
        self.side.faces_within(mesh, x, r)
    }

    /// The two cells sharing interior face `g`.
    pub fn cells_of(mesh: &PolytopalMesh, g: usize) -> (usize, usize) {
        let (a, b) = mesh.faces[g].owners;
        (a, b.expect("interior face"))
    }

    /// `A_g = A_t u A_t'`, ascending.
    pub fn a_g(&self, mesh: &PolytopalMesh, g: usize) -> Vec<usize> {
        let (t, tp) = Self::cells_of(mesh, g);
        let mut u = self.weights.support(t);
        u.extend(self.weights.support(tp));
        u.sort_unstable();
        u.dedup();
        u
    }

    /// `Delta_g`, the faces in exactly one of `A_t`, `A_t'`, ascending.
    pub fn sym_diff(&self, mesh: &PolytopalMesh, g: usize) -> Vec<usize> {
        let (t, tp) = Self::cells_of(mesh, g);
        let (a, b) = (self.weights.support(t), self.weights.support(tp));
        let mut out: Vec<usize> =
            a.iter().filter(|f| !b.contains(f)).chain(b.iter().filter(|f| !a.contains(f))).copied().collect();
        out.sort_unstable();
        out
    }

    /// `D_g rho(f) = |rho_t'(f) - rho_t(f)|`.
    pub fn d_g_rho(&self, mesh: &PolytopalMesh, g: usize, f: usize) -> f64 {
        let (t, tp) = Self::cells_of(mesh, g);
        (self.weights.rho(tp, f) - self.weights.rho(t, f)).abs()
    }

    pub fn check_partitions(&self, mesh: &PolytopalMesh) -> PartitionCheck {
        let mut seen = vec![0usize; mesh.num_cells()];
        for (m, layer) in self.layers.iter().enumerate() {
            for &t in layer {
                seen[t] += 1;
                let d = self.delta_t[t];
                if !(m as f64 * self.h <= d * (1.0 + 4.0 * f64::EPSILON) && d < (m + 1) as f64 * self.h) {
                    seen[t] += 1;
                }
            }
        }
        let layers = seen.iter().all(|&c| c == 1);

        let n = self.faces.len();
        let mut count = vec![0usize; n * n];
        for band in &self.bands {
            for &(f, fp) in band {
                count[self.position(f).unwrap() * n + self.position(fp).unwrap()] += 1;
            }
        }
        let bands = (0..n).all(|i| (0..n).all(|j| count[i * n + j] == usize::from(i != j)));

        let horizontal = self.pairs.iter().all(|p| {
            let mut union: Vec<usize> = p.horizontal.iter().flatten().copied().collect();
            let len = union.len();
            union.sort_unstable();
            union.dedup();
            p.overflow.is_empty() && union.len() == len && union == p.cells
        });

        let layer_of = |t: usize| band(self.delta_t[t], self.h);
        let height = self.pairs.iter().all(|p| {
            p.cells.iter().all(|&t| {
                let m = layer_of(t);
                m + 2 >= p.l && m <= p.l
            })
        });

        let mut hits = vec![0usize; mesh.num_faces()];
        for set in &self.dagger {
            for &g in set {
                hits[g] += 1;
            }
        }
        let dagger = mesh.interior_faces.iter().all(|&g| hits[g] == 1)
            && mesh.boundary_faces.iter().all(|&f| hits[f] == 0);

        PartitionCheck { layers, bands, horizontal, height, dagger }
    }
}
