//! Empirical constants for the cardinality, lifting, local approximation,
//! Poincare-Wirtinger and trace estimates.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::catalog::SetCatalog;
use super::Constant;
use crate::condense::Condensed;
use crate::error::{invalid, Result};
use crate::lifting::GluedLift;
use crate::mesh::PolytopalMesh;
use crate::par::{map_range, Exec};
use crate::rng::probe_rng;
use crate::seminorms::{local_h1, OperatorBundle};
use crate::space::{trace, BoundaryTrace, HybridSpace, HybridVector};

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

/// `C1..C5`: cardinalities of layers at the vertical of a face, of band
/// slices, of the faces below a cell, and of the horizontal layers.
pub fn cardinality_constants(cat: &SetCatalog, mesh: &PolytopalMesh) -> Vec<Constant> {
    let dim = mesh.dim as i32;
    let layer_of: Vec<usize> = {
        let mut v = vec![0; mesh.num_cells()];
        for (m, layer) in cat.layers.iter().enumerate() {
            for &t in layer {
                v[t] = m;
            }
        }
        v
    };

    let mut c1 = 0usize;
    for column in &cat.vertical {
        let mut per_layer: HashMap<usize, usize> = HashMap::new();
        for &t in column {
            *per_layer.entry(layer_of[t]).or_default() += 1;
        }
        c1 = c1.max(per_layer.values().copied().max().unwrap_or(0));
    }

    let mut c2 = 0.0f64;
    for (i, band) in cat.bands.iter().enumerate() {
        let l = (i + 1) as f64;
        let mut per_face: HashMap<usize, usize> = HashMap::new();
        for &(f, _) in band {
            *per_face.entry(f).or_default() += 1;
        }
        let worst = per_face.values().copied().max().unwrap_or(0) as f64;
        c2 = c2.max(worst / l.powi(dim - 2));
    }

    let mut below = vec![0usize; mesh.num_cells()];
    for column in &cat.vertical {
        for &t in column {
            below[t] += 1;
        }
    }
    let c3 = below.iter().copied().max().unwrap_or(0);

    let c4 = cat.pairs.iter().flat_map(|p| p.horizontal.iter().map(Vec::len)).max().unwrap_or(0);

    let mut through: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for p in &cat.pairs {
        for (s, cells) in p.horizontal.iter().enumerate() {
            for &t in cells {
                *through.entry((t, p.l, s)).or_default() += 1;
            }
        }
    }
    let c5 = through.iter().map(|(&(_, l, _), &c)| c as f64 / (l as f64).powi(dim - 2)).fold(0.0, f64::max);

    let sets = cat.faces.len();
    vec![
        Constant::new("cardinality.C1", c1 as f64, sets),
        Constant::new("cardinality.C2", c2, sets),
        Constant::new("cardinality.C3", c3 as f64, mesh.num_cells()),
        Constant::new("Ca.C4", c4 as f64, cat.pairs.len()),
        Constant::new("Ca.C5", c5, through.len()),
    ]
}

/// Deviation of `sum_f rho_t(f)` from one, maximized over cells.
pub fn rho_sum_defect(cat: &SetCatalog) -> f64 {
    max_of(cat.weights.rows.iter().map(|row| (row.iter().map(|(_, r)| r).sum::<f64>() - 1.0).abs()))
}

/// Whether `D_g rho(f)` vanishes for every `f` outside `A_g`.
pub fn d_g_rho_support_holds(cat: &SetCatalog, mesh: &PolytopalMesh) -> bool {
    mesh.interior_faces.iter().all(|&g| {
        let a = cat.a_g(mesh, g);
        cat.faces.iter().filter(|f| !a.contains(f)).all(|&f| cat.d_g_rho(mesh, g, f) == 0.0)
    })
}

/// Constants of the estimates on `A_t`, `D_g rho`, `Q_ff'` and the selected
/// faces.
pub fn lifting_lemma_constants(cat: &SetCatalog, mesh: &PolytopalMesh) -> Vec<Constant> {
    let h = cat.h;
    let d = mesh.dim as i32;
    let nt = mesh.num_cells();
    let ng = mesh.interior_faces.len();
    let measure = |fs: &[usize]| fs.iter().map(|&f| mesh.faces[f].measure).sum::<f64>();

    let h_over_delta = max_of(cat.delta_t.iter().map(|&dt| h / dt));
    let mut spread = 0.0f64;
    let mut ratio = 0.0f64;
    let mut at_iii = 0.0f64;
    let mut at_iv = 0.0f64;
    let mut at_v = 0.0f64;
    let mut dgrho = 0.0f64;
    let mut cases_i = 0.0f64;
    let nf = cat.faces.len();
    let mut q = vec![0.0f64; nf * nf];
    let mut cases_ii = vec![0usize; nf * nf];
    for &g in &mesh.interior_faces {
        let (t, tp) = SetCatalog::cells_of(mesh, g);
        let (dt, dtp, dg) = (cat.delta_t[t], cat.delta_t[tp], cat.delta_g[g]);
        spread = spread.max((dt - dtp).abs() / h);
        let (lo, hi) = (dt.min(dtp).min(dg), dt.max(dtp).max(dg));
        ratio = ratio.max(hi / lo);
        let sym = cat.sym_diff(mesh, g);
        at_iii = at_iii.max(measure(&sym) / (h * dg.powi(d - 2)));
        let a_g = cat.a_g(mesh, g);
        let selected = cat.proj_face[g].expect("interior face");
        let sel_pos = cat.position(selected).unwrap();
        let x_sel = mesh.faces[selected].centroid;
        let mut sum = 0.0;
        for &f in &a_g {
            let dr = cat.d_g_rho(mesh, g, f);
            if !sym.contains(&f) {
                at_iv = at_iv.max(dr * (dg / h).powi(d));
            }
            at_v = at_v.max(dr * (dg / h).powi(d - 1));
            sum += dg / h * dr;
            cases_i = cases_i.max((mesh.faces[f].centroid - x_sel).norm() / dg);
            let pos = cat.position(f).unwrap();
            q[pos * nf + sel_pos] += h.powi(d - 1) / dg * dr;
        }
        for &f in &sym {
            cases_ii[cat.position(f).unwrap() * nf + sel_pos] += 1;
        }
        dgrho = dgrho.max(sum);
    }
    let mut qff = 0.0f64;
    for (i, &f) in cat.faces.iter().enumerate() {
        for (j, &fp) in cat.faces.iter().enumerate() {
            if i == j {
                continue;
            }
            let (a, b) = (&mesh.faces[f], &mesh.faces[fp]);
            let dist = (a.centroid - b.centroid).norm();
            qff = qff.max(q[i * nf + j] * dist.powi(d) / (a.measure * b.measure));
        }
    }

    let mut at_ii_up = 0.0f64;
    let mut at_ii_low = 0.0f64;
    for t in 0..nt {
        let a = measure(&cat.weights.support(t));
        let s = cat.delta_t[t].powi(d - 1);
        at_ii_up = at_ii_up.max(a / s);
        at_ii_low = at_ii_low.max(s / a);
    }

    vec![
        Constant::new("At.i.h_over_delta", h_over_delta, nt),
        Constant::new("At.i.delta_spread", spread, ng),
        Constant::new("At.i.delta_ratio", ratio, ng),
        Constant::new("At.ii.upper", at_ii_up, nt),
        Constant::new("At.ii.lower", at_ii_low, nt),
        Constant::new("At.iii", at_iii, ng),
        Constant::new("At.iv", at_iv, ng),
        Constant::new("At.v", at_v, ng),
        Constant::new("Dgrho", dgrho, ng),
        Constant::new("Qff", qff, nf * nf.saturating_sub(1)),
        Constant::new("Cases.i", cases_i, ng),
        Constant::new("Cases.ii", cases_ii.into_iter().max().unwrap_or(0) as f64, nf * nf),
    ]
}

/// Smooth boundary probe: face constant modes sampled from
/// `cos(pi (a x + b y + c z) + phase)` at face centroids.
fn smooth_trace(space: &HybridSpace, seed: u64, stream: u64) -> BoundaryTrace {
    let mut rng = probe_rng(seed, stream);
    let k: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
    let phase = rng.random_range(0.0..2.0 * PI);
    let mut w = space.zeros_trace();
    for &f in &space.mesh.boundary_faces {
        let x = space.mesh.faces[f].centroid;
        w.face_mut(f)[0] = (PI * (k[0] * x.x + k[1] * x.y + k[2] * x.z) + phase).cos();
    }
    w
}

/// Local approximation constants: over random local blocks on random cells,
/// the worst ratios `||pi_f v_f - pi_t v_t||_f / (h_t^{1/2} |v|_{1,t})` and
/// `|pi_f v_f - pi_t v_t| / (h_t^{(2-d)/2} |v|_{1,t})`.
pub fn local_approx_constants(space: &HybridSpace, probes: usize, seed: u64, exec: Exec) -> Result<[Constant; 2]> {
    let mesh = &space.mesh;
    let d = mesh.dim as f64;
    let results = map_range(exec, probes, |j| -> Result<Option<(f64, f64)>> {
        let t = probe_rng(seed, j as u64 + (1 << 32)).random_range(0..mesh.num_cells());
        let v = space.random(seed, j as u64);
        let lm = local_h1(space, t)?;
        let x = DVector::from_iterator(lm.dofs.len(), lm.dofs.iter().map(|&i| v.data[i]));
        let energy = x.dot(&(&lm.mat * &x));
        if !(energy > 0.0) {
            return Ok(None);
        }
        let semi = energy.sqrt();
        let cell = &mesh.cells[t];
        let vt = space.cell_average(t, v.cell(t))?;
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for &f in &cell.faces {
            let diff = (space.face_average(f, v.face(f)) - vt).abs();
            a = a.max(mesh.faces[f].measure.sqrt() * diff / (cell.diameter.sqrt() * semi));
            b = b.max(diff / (cell.diameter.powf((2.0 - d) / 2.0) * semi));
        }
        Ok(Some((a, b)))
    });
    let (mut a, mut b, mut used) = (0.0f64, 0.0f64, 0usize);
    for r in results {
        if let Some((x, y)) = r? {
            a = a.max(x);
            b = b.max(y);
            used += 1;
        }
    }
    Ok([Constant::new("local-approx.L2", a, used), Constant::new("local-approx.pointwise", b, used)])
}

/// `||w||_{L^2(boundary)}^2` computed with the face quadrature rules.
pub fn boundary_l2_squared(space: &HybridSpace, w: &BoundaryTrace) -> Result<f64> {
    let mut total = 0.0;
    for &f in &space.mesh.boundary_faces {
        let rule = space.face_rule(f)?;
        let basis = &space.face_bases[f];
        let coef = w.face(f);
        total += rule.integrate(|x| basis.eval_poly(coef, x).powi(2));
    }
    Ok(total)
}

/// Poincare-Wirtinger constant for data with zero mean on the union `p0` of
/// boundary faces.
pub fn pw_constant(bundle: &OperatorBundle, p0: &[usize], probes: usize, seed: u64, exec: Exec) -> Result<Constant> {
    let space = &bundle.space;
    let mesh = &space.mesh;
    if let Some(&f) = p0.iter().find(|&&f| f >= mesh.num_faces() || !mesh.faces[f].boundary) {
        return Err(invalid(format!("face {f} is not a boundary face")));
    }
    let area: f64 = p0.iter().map(|&f| mesh.faces[f].measure).sum();
    if !(area > 0.0) {
        return Err(invalid("the zero-mean set has zero measure"));
    }
    let diam = mesh.domain.diameter(mesh.dim);
    let factor = (1.0 + diam.powi(mesh.dim as i32) / area).sqrt();
    let results = map_range(exec, probes, |j| -> Result<Option<f64>> {
        let mut w = if j % 2 == 0 { space.random_trace(seed, j as u64) } else { smooth_trace(space, seed, j as u64) };
        let mean: f64 = p0.iter().map(|&f| space.face_average(f, w.face(f)) * mesh.faces[f].measure).sum::<f64>() / area;
        for &f in &mesh.boundary_faces {
            w.face_mut(f)[0] -= mean;
        }
        let semi = bundle.hhalf_seminorm(&w)?;
        if !(semi > 1e-14) {
            return Ok(None);
        }
        Ok(Some(boundary_l2_squared(space, &w)?.sqrt() / (factor * semi)))
    });
    let mut best = 0.0f64;
    let mut used = 0;
    for r in results {
        if let Some(x) = r? {
            best = best.max(x);
            used += 1;
        }
    }
    Ok(Constant::new("PW", best, used))
}

/// Long-range part of the boundary seminorm on one side and its split through
/// the anchor cells at height `|x_f - x_f'|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LongRangeSplit {
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    /// Pairs whose lifted endpoints leave the domain.
    pub skipped: usize,
}

pub fn long_range_split(cat: &SetCatalog, space: &HybridSpace, v: &HybridVector) -> Result<LongRangeSplit> {
    let mesh = &space.mesh;
    let d = mesh.dim as i32;
    let cell_avg: Vec<f64> =
        (0..mesh.num_cells()).map(|t| space.cell_average(t, v.cell(t))).collect::<Result<_>>()?;
    let face_avg = |f: usize| space.face_average(f, v.face(f));
    let mut out = LongRangeSplit::default();
    for p in &cat.pairs {
        let (a, b) = (&mesh.faces[p.f], &mesh.faces[p.fp]);
        let k = a.measure * b.measure / (a.centroid - b.centroid).norm().powi(d);
        out.s += k * (face_avg(p.f) - face_avg(p.fp)).powi(2);
        match p.anchors {
            Some((t, tp)) => {
                out.s1 += k * (face_avg(p.f) - cell_avg[t]).powi(2);
                out.s2 += k * (cell_avg[t] - cell_avg[tp]).powi(2);
            }
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub constant: Constant,
    /// Probes skipped because `|v|_{1,h}` vanished.
    pub skipped: usize,
    /// Worst `S / |v|^2`, `S1 / |v|^2` and `S2 / |v|^2` on the catalog side.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split: Option<[f64; 3]>,
}

/// Worst `|||gamma v|||_{1/2,h} / |v|_{1,h}` over random hybrid vectors and
/// discrete harmonic extensions of random and smooth boundary data.
pub fn trace_constant(
    bundle: &OperatorBundle,
    condensed: &Condensed,
    catalog: Option<&SetCatalog>,
    probes: usize,
    seed: u64,
    exec: Exec,
) -> Result<TraceCheck> {
    let space = &bundle.space;
    let third = probes / 3;
    let mut vectors: Vec<HybridVector> = (0..probes - 2 * third).map(|j| space.random(seed, j as u64)).collect();
    let mut rhs = nalgebra::DMatrix::zeros(space.map.n_bd, 2 * third);
    for j in 0..third {
        rhs.set_column(j, &space.random_trace(seed, (probes + j) as u64).data);
        rhs.set_column(third + j, &smooth_trace(space, seed, (2 * probes + j) as u64).data);
    }
    vectors.extend(condensed.extend_columns(&rhs, exec));
    let results = map_range(exec, vectors.len(), |j| -> Result<Option<(f64, Option<[f64; 3]>)>> {
        let v = &vectors[j];
        let e = bundle.h1_form(v)?;
        if !(e > 1e-28) {
            return Ok(None);
        }
        let ratio = (bundle.hhalf_form(&trace(v))?.max(0.0) / e).sqrt();
        let split = match catalog {
            Some(cat) => {
                let s = long_range_split(cat, space, v)?;
                Some([s.s / e, s.s1 / e, s.s2 / e])
            }
            None => None,
        };
        Ok(Some((ratio, split)))
    });
    let mut best = 0.0f64;
    let mut split: Option<[f64; 3]> = None;
    let mut skipped = 0;
    for r in results {
        match r? {
            Some((x, s)) => {
                best = best.max(x);
                if let Some(s) = s {
                    let acc = split.get_or_insert([0.0; 3]);
                    for (a, b) in acc.iter_mut().zip(s) {
                        *a = a.max(b);
                    }
                }
            }
            None => skipped += 1,
        }
    }
    Ok(TraceCheck { constant: Constant::new("trace", best, vectors.len() - skipped), skipped, split })
}

/// Worst `|L_h w|_{1,h} / |||w|||_{1/2,h}` for the glued lifting over random
/// and smooth boundary data.
pub fn lifting_constant(
    bundle: &OperatorBundle,
    lift: &GluedLift,
    probes: usize,
    seed: u64,
    exec: Exec,
) -> Result<Constant> {
    let space = &bundle.space;
    let results = map_range(exec, probes, |j| -> Result<Option<f64>> {
        let w = if j % 2 == 0 { space.random_trace(seed, j as u64) } else { smooth_trace(space, seed, j as u64) };
        let semi = bundle.hhalf_seminorm(&w)?;
        if !(semi > 1e-14) {
            return Ok(None);
        }
        Ok(Some(bundle.h1_seminorm(&lift.lift(&w)?)? / semi))
    });
    let mut best = 0.0f64;
    let mut used = 0;
    for r in results {
        if let Some(x) = r? {
            best = best.max(x);
            used += 1;
        }
    }
    Ok(Constant::new("lifting", best, used))
}
