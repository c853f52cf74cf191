//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line per
//! criterion followed by indented details. Failures are reported but only turn
//! into a non-zero exit status when `TRACELAB_ACCEPTANCE_STRICT=1` is set.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use tracelab::condense::Condensed;
use tracelab::lemma_lab::*;
use tracelab::lifting::{GluedLift, GluedOptions};
use tracelab::mesh::{build_cartesian, Side};
use tracelab::par::Exec;
use tracelab::seminorms::OperatorBundle;
use tracelab::space::{trace, DegreeConfig};
use tracelab::spectral::{schur_complement, solve_gevp};

const NS: [usize; 4] = [4, 8, 16, 32];
const KS: [usize; 4] = [0, 1, 2, 3];

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn oracle_equivalence() -> Outcome {
    let mut out = Outcome::new();
    for n in [4, 8] {
        for k in KS {
            let b = bundle(2, n, k);
            let (mut e1, mut e2) = (0.0f64, 0.0f64);
            for s in 0..100 {
                let v = b.space.random(2024, s);
                e1 = e1.max(rel_err(b.h1_form(&v).unwrap(), h1_oracle(&b.space, &v)));
                let w = trace(&v);
                e2 = e2.max(rel_err(b.hhalf_form(&w).unwrap(), hhalf_oracle(&b.space, &w)));
            }
            out.check(e1 <= 1e-12 && e2 <= 1e-12, format!("n={n} k={k}: max rel err H1 {e1:.2e}, H1/2 {e2:.2e}"));
        }
    }
    out
}

struct SpectralRow {
    n: usize,
    k: usize,
    lmin: f64,
    lmax: f64,
    constant_residual: f64,
}

fn spectral_rows() -> Vec<SpectralRow> {
    let mut rows = Vec::new();
    for k in KS {
        for n in NS {
            let b = bundle(2, n, k);
            let a_sc = schur_complement(&b, Exec::default()).unwrap();
            let ss = &b.s * b.s.transpose();
            let c = b.space.constant_trace(1.0).data;
            let mc = (&a_sc + &ss) * &c;
            let bc = (&b.h + &ss) * &c;
            let constant_residual = (&mc - &bc).norm() / bc.norm();
            let g = solve_gevp(&a_sc, &b.h, &b.s, false).unwrap();
            rows.push(SpectralRow { n, k, lmin: g.min(), lmax: g.max(), constant_residual });
        }
    }
    rows
}

fn constant_eigenpair(rows: &[SpectralRow]) -> Outcome {
    let mut out = Outcome::new();
    for r in rows {
        out.check(r.constant_residual <= 1e-10, format!("n={} k={}: |Mc - Bc|/|Bc| = {:.2e}", r.n, r.k, r.constant_residual));
    }
    out
}

fn plateau(rows: &[SpectralRow]) -> Outcome {
    let mut out = Outcome::new();
    for r in rows {
        out.check(r.lmin > 0.0, format!("n={} k={}: lambda_min {:.6e}, lambda_max {:.6e}", r.n, r.k, r.lmin, r.lmax));
    }
    for k in KS {
        let get = |n| rows.iter().find(|r| r.k == k && r.n == n).unwrap();
        let (a, b) = (get(16), get(32));
        let (rmin, rmax) = (b.lmin / a.lmin, b.lmax / a.lmax);
        let ok = (0.8..=1.25).contains(&rmin) && (0.8..=1.25).contains(&rmax);
        out.check(ok, format!("k={k}: lambda_min(32)/lambda_min(16) = {rmin:.4}, lambda_max ratio = {rmax:.4}"));
    }
    out
}

fn lifting_identity() -> Outcome {
    let mut out = Outcome::new();
    for n in NS {
        for k in KS {
            let space = cartesian_space(2, n, k);
            let g = GluedLift::new(space.clone(), GluedOptions::default(), Exec::default()).unwrap();
            let mut err = 0.0f64;
            for s in 0..50 {
                let w = space.random_trace(77, s);
                err = err.max((trace(&g.lift(&w).unwrap()).data - &w.data).amax());
            }
            out.check(err <= 1e-13, format!("n={n} k={k}: max |trace(lift(w)) - w| = {err:.2e} (h <= h0: {})", g.h0_satisfied));
        }
    }
    out
}

fn successive(out: &mut Outcome, label: &str, values: &[(usize, f64)]) {
    for pair in values.windows(2) {
        let ((n0, v0), (n1, v1)) = (pair[0], pair[1]);
        let r = v1 / v0;
        out.check(r <= 1.25, format!("{label}: value({n1})/value({n0}) = {v1:.4}/{v0:.4} = {r:.4}"));
    }
}

fn lifting_and_trace_constants() -> Outcome {
    let mut out = Outcome::new();
    for k in KS {
        let mut lift = Vec::new();
        let mut tr = Vec::new();
        for n in NS {
            let b = bundle(2, n, k);
            let c = Condensed::new(&b, Exec::default()).unwrap();
            let g = GluedLift::new(b.space.clone(), GluedOptions::default(), Exec::default()).unwrap();
            let l = lifting_constant(&b, &g, 64, 5, Exec::default()).unwrap();
            let t = trace_constant(&b, &c, None, 66, 5, Exec::default()).unwrap();
            out.check(l.probes >= 50 && t.constant.probes >= 50, format!("k={k} n={n}: probes lift {} trace {}", l.probes, t.constant.probes));
            lift.push((n, l.value));
            tr.push((n, t.constant.value));
        }
        successive(&mut out, &format!("k={k} lifting"), &lift);
        successive(&mut out, &format!("k={k} trace"), &tr);
    }
    out
}

fn hardy() -> Outcome {
    let mut out = Outcome::new();
    let rep = check_hardy(&random_sequences(10_000, 200, 18), Exec::default()).unwrap();
    out.check(rep.passed(), format!("{} sequences, L <= {}: max ratio {:.6} <= 18", rep.trials, rep.max_len, rep.max_ratio));
    let r = hardy_ratio(&[1.0; 4]).unwrap();
    let hand = 8.027_777_777_777_777 / 4.0;
    out.check((r - hand).abs() <= 1e-12, format!("r = 1, L = 3: ratio {r:.15} vs {hand:.15}"));
    out
}

fn catalog_and_lemma_constants() -> Outcome {
    let mut out = Outcome::new();
    let mut table: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    let mut push = |name: String, n: usize, v: f64| match table.iter_mut().find(|(k, _)| *k == name) {
        Some(e) => e.1.push((n, v)),
        None => table.push((name, vec![(n, v)])),
    };
    for n in NS {
        let mesh = build_cartesian(2, n).unwrap();
        for side in Side::all(2) {
            let cat = SetCatalog::build(&mesh, side, Exec::default()).unwrap();
            let p = cat.check_partitions(&mesh);
            out.check(p.all(), format!("n={n} side={}: partitions {p:?}", side.name()));
        }
        let cat = SetCatalog::build(&mesh, Side::BOTTOM, Exec::default()).unwrap();
        out.check(rho_sum_defect(&cat) <= 1e-15 && d_g_rho_support_holds(&cat, &mesh), format!("n={n}: sum rho = 1 and D_g rho support"));
        for c in cardinality_constants(&cat, &mesh).into_iter().chain(lifting_lemma_constants(&cat, &mesh)) {
            push(c.lemma, n, c.value);
        }
        for k in KS {
            let b = bundle(2, n, k);
            for c in local_approx_constants(&b.space, 1000, 9, Exec::default()).unwrap() {
                push(format!("{} k={k}", c.lemma), n, c.value);
            }
            let bf = b.space.mesh.boundary_faces.clone();
            let sides = b.space.mesh.side_faces(Side::BOTTOM);
            for (label, p0) in [("boundary", bf.clone()), ("side", sides), ("face", vec![bf[0]])] {
                let c = pw_constant(&b, &p0, 64, 9, Exec::default()).unwrap();
                push(format!("PW P0={label} k={k}"), n, c.value);
            }
        }
    }
    let cube = build_cartesian(3, 4).unwrap();
    let cat = SetCatalog::build(&cube, Side { axis: 2, high: false }, Exec::default()).unwrap();
    out.check(cat.check_partitions(&cube).all(), "d=3 n=4: partitions".into());
    for (name, values) in table {
        let (v4, v32) = (values[0].1, values.last().unwrap().1);
        let r = v32 / v4;
        let steps: Vec<String> = values.windows(2).map(|w| format!("{:.3}", w[1].1 / w[0].1)).collect();
        out.check(r <= 1.25, format!("{name}: value(32)/value(4) = {v32:.4}/{v4:.4} = {r:.4}; successive {}", steps.join(", ")));
    }
    out
}

fn schur_energy() -> Outcome {
    let mut out = Outcome::new();
    for n in [4, 8, 16, 32] {
        for k in KS {
            let b = bundle(2, n, k);
            let c = Condensed::new(&b, Exec::default()).unwrap();
            let a_sc = c.schur_complement(Exec::default());
            let mut err = 0.0f64;
            for s in 0..50 {
                let w = b.space.random_trace(31, s);
                let e = c.harmonic_extension(&w);
                err = err.max(rel_err(w.data.dot(&(&a_sc * &w.data)), b.h1_form(&e).unwrap()));
            }
            out.check(err <= 1e-11, format!("n={n} k={k}: max rel err {err:.2e}"));
        }
    }
    out
}

fn scaled_pair(dim: usize, n: usize, k: usize, mu: f64) -> (OperatorBundle, OperatorBundle) {
    let mesh = build_cartesian(dim, n).unwrap();
    let scaled = mesh.scaled(mu).unwrap();
    let d = DegreeConfig::uniform(k).unwrap();
    (
        OperatorBundle::assemble(space_on(mesh, d), Exec::default()).unwrap(),
        OperatorBundle::assemble(space_on(scaled, d), Exec::default()).unwrap(),
    )
}

fn matrix_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax())
}

fn mu_scaling() -> Outcome {
    let mut out = Outcome::new();
    for (dim, n, ks, factor) in [(3, 2, 0..=2, 2.0), (2, 4, 0..=3, 1.0)] {
        for k in ks {
            let (b, s) = scaled_pair(dim, n, k, 2.0);
            let ea = matrix_rel(&(DMatrix::from(&b.a) * factor), &DMatrix::from(&s.a));
            let eh = matrix_rel(&(&b.h * factor), &s.h);
            let mut ef = 0.0f64;
            for j in 0..20 {
                let v = b.space.random(3, j);
                let mut vs = s.space.zeros();
                vs.data.copy_from(&v.data);
                ef = ef.max(rel_err(factor * b.h1_form(&v).unwrap(), s.h1_form(&vs).unwrap()));
                ef = ef.max(rel_err(factor * b.hhalf_form(&trace(&v)).unwrap(), s.hhalf_form(&trace(&vs)).unwrap()));
            }
            out.check(
                ea <= 1e-12 && eh <= 1e-12 && ef <= 1e-12,
                format!("d={dim} n={n} k={k} mu=2, factor {factor}: A {ea:.2e}, H {eh:.2e}, forms {ef:.2e}"),
            );
        }
    }
    out
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut run = |name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let out = f();
        println!("{} {name} ({:.1} s)", if out.pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
        for d in &out.details {
            println!("    {d}");
        }
        if !out.pass {
            failed += 1;
        }
    };
    run("oracle equivalence of the assembled forms", &oracle_equivalence);
    let rows = spectral_rows();
    run("constant vector is an eigenvector with eigenvalue 1", &|| constant_eigenpair(&rows));
    run("spectral plateau under refinement", &|| plateau(&rows));
    run("glued lifting is a right inverse of the trace", &lifting_identity);
    run("lifting and trace constants are refinement-stable", &lifting_and_trace_constants);
    run("discrete Hardy inequality", &hardy);
    run("set partitions and lemma constants", &catalog_and_lemma_constants);
    run("Schur energy identity", &schur_energy);
    run("scaling of the quadratic forms", &mu_scaling);
    if failed == 0 {
        println!("acceptance: all criteria passed");
        return ExitCode::SUCCESS;
    }
    println!("acceptance: {failed} criteria failed");
    if std::env::var("TRACELAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
