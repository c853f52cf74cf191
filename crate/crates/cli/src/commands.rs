use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::{json, Value};
use tracelab::condense::Condensed;
use tracelab::io::{csc_to_matrix_market, dense_to_csv, hybrid_vector_to_text, mesh_to_json, trace_to_text};
use tracelab::lemma_lab::*;
use tracelab::lifting::{FlatLift, GluedLift, GluedOptions};
use tracelab::mesh::{MeshFamily, PolytopalMesh, Side};
use tracelab::seminorms::{csc_mul, OperatorBundle};
use tracelab::space::{trace, DegreeConfig, HybridSpace};
use tracelab::spectral::refinement_sweep;
use tracelab::Result;

use crate::{AssembleCmd, Common, HardyCmd, LemmaCmd, LiftCmd, LiftKind, MeshCmd, MeshOpts, SweepCmd, TraceCmd};

/// Relative tolerance of the symmetry and kernel checks in `assemble`.
const MATRIX_RTOL: f64 = 1e-12;
const LIFT_TOL: f64 = 1e-13;
const ENERGY_RTOL: f64 = 1e-11;

fn family_label(family: &MeshFamily) -> String {
    match family {
        MeshFamily::Cartesian => "cartesian".into(),
        MeshFamily::Perturbed { amplitude, seed } => format!("perturbed-a{amplitude}-s{seed}"),
    }
}

fn stem(sub: &str, dim: usize, n: usize, degrees: Option<DegreeConfig>, family: &MeshFamily) -> String {
    let mut s = format!("{sub}-d{dim}-n{n}");
    if let Some(d) = degrees {
        s += &format!("-k{}_{}", d.cell, d.face);
    }
    s + "-" + &family_label(family)
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_record(out: &Path, stem: &str, sub: &str, config: Value, passed: bool, results: Value) -> Result<PathBuf> {
    let record = json!({ "subcommand": sub, "config": config, "passed": passed, "results": results });
    write(out, &format!("{stem}.json"), &(serde_json::to_string_pretty(&record)? + "\n"))
}

fn mesh_config(opts: &MeshOpts, n: usize, family: &MeshFamily) -> Value {
    json!({ "dim": opts.dim, "n": n, "family": family })
}

fn space_on(mesh: PolytopalMesh, degrees: DegreeConfig) -> Result<Arc<HybridSpace>> {
    Ok(Arc::new(HybridSpace::new(Arc::new(mesh), degrees)?))
}

fn max_rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn mesh(c: &MeshCmd) -> Result<bool> {
    let Common { seed, out, .. } = &c.common;
    let family = c.mesh.family(*seed);
    let mesh = family.build(c.mesh.dim, c.n)?;
    let diagnostics = mesh.validate();
    let stats = mesh.stats();
    let name = stem("mesh", c.mesh.dim, c.n, None, &family);
    if c.save {
        write(out, &format!("{name}.mesh.json"), &mesh_to_json(&mesh)?)?;
    }
    let results = json!({
        "cells": mesh.num_cells(),
        "faces": mesh.num_faces(),
        "boundary_faces": mesh.boundary_faces.len(),
        "stats": stats,
        "diagnostics": diagnostics,
    });
    write_record(out, &name, "mesh", mesh_config(&c.mesh, c.n, &family), diagnostics.is_empty(), results)?;
    if c.validate {
        println!("{}", serde_json::to_string(&diagnostics)?);
    } else {
        println!(
            "mesh dim={} n={} family={}: {} cells, {} faces, h={:.6e}, rho_qu={:.4}, varpi={:.4}, {} diagnostics",
            c.mesh.dim,
            c.n,
            family.label(),
            mesh.num_cells(),
            mesh.num_faces(),
            stats.h,
            stats.rho_qu,
            stats.varpi,
            diagnostics.len()
        );
    }
    Ok(diagnostics.is_empty())
}

pub fn assemble(c: &AssembleCmd) -> Result<bool> {
    let Common { seed, out, .. } = &c.common;
    let exec = c.common.exec();
    let family = c.mesh.family(*seed);
    let degrees = c.degrees.config()?;
    let space = space_on(family.build(c.mesh.dim, c.n)?, degrees)?;
    let b = OperatorBundle::assemble(space.clone(), exec)?;
    let name = stem("assemble", c.mesh.dim, c.n, Some(degrees), &family);
    let a_path = write(out, &format!("{name}-A.mtx"), &csc_to_matrix_market(&b.a))?;
    let h_path = write(out, &format!("{name}-H.csv"), &dense_to_csv(&b.h))?;
    let s_col = DMatrix::from_column_slice(b.s.len(), 1, b.s.as_slice());
    let s_path = write(out, &format!("{name}-S.csv"), &dense_to_csv(&s_col))?;

    // symmetry through x.Ay = y.Ax on random vectors, constants in both kernels
    let x = space.random(*seed, 0).data;
    let y = space.random(*seed, 1).data;
    let a_sym = max_rel(x.dot(&csc_mul(&b.a, &y)), y.dot(&csc_mul(&b.a, &x)));
    let h_sym = (&b.h - b.h.transpose()).amax() / b.h.amax();
    let ones = space.constant(1.0).data;
    let a_scale = b.a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a_kernel = csc_mul(&b.a, &ones).amax() / a_scale;
    let h_kernel = (&b.h * space.constant_trace(1.0).data).amax() / b.h.amax();
    let passed = [a_sym, h_sym, a_kernel, h_kernel].iter().all(|&e| e <= MATRIX_RTOL);
    let file = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let results = json!({
        "ndof_total": space.map.total(),
        "ndof_bd": space.map.n_bd,
        "nnz_a": b.a.nnz(),
        "files": { "a": file(&a_path), "h": file(&h_path), "s": file(&s_path) },
        "symmetry_a": a_sym,
        "symmetry_h": h_sym,
        "kernel_a": a_kernel,
        "kernel_h": h_kernel,
    });
    let mut config = mesh_config(&c.mesh, c.n, &family);
    config["degrees"] = json!(degrees);
    write_record(out, &name, "assemble", config, passed, results)?;
    println!(
        "assemble dim={} n={} k=({},{}): ndof={} ndof_bd={} nnz(A)={} symmetry {:.1e}/{:.1e} kernel {:.1e}/{:.1e} {}",
        c.mesh.dim,
        c.n,
        degrees.cell,
        degrees.face,
        space.map.total(),
        space.map.n_bd,
        b.a.nnz(),
        a_sym,
        h_sym,
        a_kernel,
        h_kernel,
        if passed { "ok" } else { "FAILED" }
    );
    Ok(passed)
}

pub fn evp_sweep(c: &SweepCmd) -> Result<bool> {
    let Common { seed, out, .. } = &c.common;
    let family = c.mesh.family(*seed);
    let degrees = c.k.iter().map(|&k| DegreeConfig::uniform(k)).collect::<Result<Vec<_>>>()?;
    let report = refinement_sweep(c.mesh.dim, &c.n, &degrees, family, c.common.exec());
    let name = format!("evp-sweep-d{}-{}.csv", c.mesh.dim, family_label(&family));
    let path = write(out, &name, &report.to_csv(!c.no_timings))?;
    for r in &report.records {
        println!(
            "evp-sweep dim={} n={} k=({},{}): ndof={} ndof_bd={} lambda_min={:.6e} lambda_max={:.6e} cond={:.4e}",
            r.dim, r.n, r.k_cell, r.k_face, r.ndof_total, r.ndof_bd, r.lambda_min, r.lambda_max, r.cond
        );
    }
    for f in &report.failures {
        eprintln!("evp-sweep dim={} n={} k=({},{}): {}", f.dim, f.n, f.k_cell, f.k_face, f.error);
    }
    println!(
        "evp-sweep: {} runs, {} failures, wrote {}",
        report.records.len(),
        report.failures.len(),
        path.display()
    );
    Ok(report.failures.is_empty())
}

pub fn lift_check(c: &LiftCmd) -> Result<bool> {
    let Common { seed, out, .. } = &c.common;
    let exec = c.common.exec();
    let family = c.mesh.family(*seed);
    let degrees = c.degrees.config()?;
    let space = space_on(family.build(c.mesh.dim, c.n)?, degrees)?;
    let kind = match c.lift {
        LiftKind::Glued => "glued",
        LiftKind::Flat => "flat",
    };
    let mut name = stem(&format!("lift-check-{kind}"), c.mesh.dim, c.n, Some(degrees), &family);
    let mut config = mesh_config(&c.mesh, c.n, &family);
    config["degrees"] = json!(degrees);
    config["lift"] = json!(kind);
    config["probes"] = json!(c.probes);
    config["seed"] = json!(seed);

    let probes: Vec<_> = (0..c.probes as u64).map(|j| space.random_trace(*seed, j)).collect();
    let mut results = json!({});
    let (error, weights, first) = match c.lift {
        LiftKind::Glued => {
            let g = GluedLift::new(space.clone(), GluedOptions { strict_h0: c.strict_h0 }, exec)?;
            let lifts = probes.iter().map(|w| g.lift(w)).collect::<Result<Vec<_>>>()?;
            let err = probes
                .iter()
                .zip(&lifts)
                .map(|(w, v)| (trace(v).data - &w.data).amax())
                .fold(0.0, f64::max);
            let b = OperatorBundle::assemble(space.clone(), exec)?;
            let constant = lifting_constant(&b, &g, c.probes, *seed, exec)?;
            results["constant"] = json!(constant);
            results["h"] = json!(g.h);
            results["h0_satisfied"] = json!(g.h0_satisfied);
            (err, g.weights_csv(), lifts.into_iter().next())
        }
        LiftKind::Flat => {
            let side = Side::parse(&c.side)?;
            name += &format!("-{}", side.name());
            config["side"] = json!(side.name());
            let f = FlatLift::new(space.clone(), side, exec)?;
            let faces = space.mesh.side_faces(side);
            let lifts = probes.iter().map(|w| f.lift(w)).collect::<Result<Vec<_>>>()?;
            let mut err = 0.0f64;
            for (w, v) in probes.iter().zip(&lifts) {
                let tv = trace(v);
                for &fc in &faces {
                    for (a, b) in tv.face(fc).iter().zip(w.face(fc)) {
                        err = err.max((a - b).abs());
                    }
                }
            }
            (err, f.weights.to_csv(), lifts.into_iter().next())
        }
    };
    results["identity_error"] = json!(error);
    let passed = error <= LIFT_TOL;
    if c.dump_weights {
        write(out, &format!("{name}-weights.csv"), &weights)?;
    }
    if c.save_vectors {
        if let (Some(w), Some(v)) = (probes.first(), first) {
            write(out, &format!("{name}-trace.txt"), &trace_to_text(w))?;
            write(out, &format!("{name}-lift.txt"), &hybrid_vector_to_text(&v))?;
        }
    }
    let constant = results.get("constant").map(|v| format!(", constant {:.6}", v["value"].as_f64().unwrap_or(f64::NAN)));
    write_record(out, &name, "lift-check", config, passed, results)?;
    println!(
        "lift-check {kind} dim={} n={} k=({},{}): max |trace(Lw) - w| = {:.2e} over {} probes{} {}",
        c.mesh.dim,
        c.n,
        degrees.cell,
        degrees.face,
        error,
        c.probes,
        constant.unwrap_or_default(),
        if passed { "ok" } else { "FAILED" }
    );
    Ok(passed)
}

pub fn trace_check(c: &TraceCmd) -> Result<bool> {
    let Common { seed, out, .. } = &c.common;
    let exec = c.common.exec();
    let family = c.mesh.family(*seed);
    let degrees = c.degrees.config()?;
    let side = Side::parse(&c.side)?;
    let space = space_on(family.build(c.mesh.dim, c.n)?, degrees)?;
    let b = OperatorBundle::assemble(space.clone(), exec)?;
    let cond = Condensed::new(&b, exec)?;
    let cat = SetCatalog::build(&space.mesh, side, exec)?;
    let check = trace_constant(&b, &cond, Some(&cat), c.probes, *seed, exec)?;

    let a_sc = cond.schur_complement(exec);
    let mut energy = 0.0f64;
    for j in 0..c.probes.min(50) as u64 {
        let w = space.random_trace(*seed, j);
        let e = cond.harmonic_extension(&w);
        energy = energy.max(max_rel(w.data.dot(&(&a_sc * &w.data)), b.h1_form(&e)?));
    }
    let passed = energy <= ENERGY_RTOL && check.constant.value.is_finite();
    let name = stem("trace-check", c.mesh.dim, c.n, Some(degrees), &family) + "-" + &side.name();
    let mut config = mesh_config(&c.mesh, c.n, &family);
    config["degrees"] = json!(degrees);
    config["side"] = json!(side.name());
    config["probes"] = json!(c.probes);
    config["seed"] = json!(seed);
    let params = MeshParams::describe(&space.mesh, c.n, family, Some(side), Some(degrees));
    let results = json!({
        "report": LemmaReport::new(&check.constant, params),
        "skipped": check.skipped,
        "split": check.split,
        "schur_energy_error": energy,
    });
    write_record(out, &name, "trace-check", config, passed, results)?;
    println!(
        "trace-check dim={} n={} k=({},{}): constant {:.6} over {} probes ({} skipped), Schur energy error {:.2e} {}",
        c.mesh.dim,
        c.n,
        degrees.cell,
        degrees.face,
        check.constant.value,
        check.constant.probes,
        check.skipped,
        energy,
        if passed { "ok" } else { "FAILED" }
    );
    Ok(passed)
}

pub fn lemma_check(c: &LemmaCmd) -> Result<bool> {
    let Common { seed, out, .. } = &c.common;
    let exec = c.common.exec();
    let family = c.mesh.family(*seed);
    let degrees = c.degrees.config()?;
    let side = Side::parse(&c.side)?;
    let space = space_on(family.build(c.mesh.dim, c.n)?, degrees)?;
    let mesh = &space.mesh;
    let cat = SetCatalog::build(mesh, side, exec)?;
    let partitions = cat.check_partitions(mesh);
    let rho_defect = rho_sum_defect(&cat);
    let support = d_g_rho_support_holds(&cat, mesh);

    let b = OperatorBundle::assemble(space.clone(), exec)?;
    let mut constants = cardinality_constants(&cat, mesh);
    constants.extend(lifting_lemma_constants(&cat, mesh));
    constants.extend(local_approx_constants(&space, c.probes, *seed, exec)?);
    constants.push(pw_constant(&b, &mesh.side_faces(side), c.probes, *seed, exec)?);
    let params = MeshParams::describe(mesh, c.n, family, Some(side), Some(degrees));
    let reports: Vec<LemmaReport> = constants.iter().map(|k| LemmaReport::new(k, params.clone())).collect();

    let passed = partitions.all() && rho_defect <= MATRIX_RTOL && support;
    let name = stem("lemma-check", c.mesh.dim, c.n, Some(degrees), &family) + "-" + &side.name();
    let mut config = mesh_config(&c.mesh, c.n, &family);
    config["degrees"] = json!(degrees);
    config["side"] = json!(side.name());
    config["probes"] = json!(c.probes);
    config["seed"] = json!(seed);
    let results = json!({
        "partitions": partitions,
        "rho_sum_defect": rho_defect,
        "d_g_rho_support": support,
        "reports": reports,
    });
    write_record(out, &name, "lemma-check", config, passed, results)?;
    println!(
        "lemma-check dim={} n={} side={}: partitions {}, rho defect {:.1e}, {} constants (max {:.4}) {}",
        c.mesh.dim,
        c.n,
        side.name(),
        if partitions.all() { "exact" } else { "BROKEN" },
        rho_defect,
        reports.len(),
        reports.iter().map(|r| r.constant).fold(0.0, f64::max),
        if passed { "ok" } else { "FAILED" }
    );
    Ok(passed)
}

pub fn hardy(c: &HardyCmd) -> Result<bool> {
    let Common { seed, out, .. } = &c.common;
    let report = check_hardy(&random_sequences(c.trials, c.max_len, *seed), c.common.exec())?;
    let passed = report.passed();
    let config = json!({ "trials": c.trials, "max_len": c.max_len, "seed": seed });
    let name = format!("hardy-t{}-l{}-s{seed}", c.trials, c.max_len);
    write_record(out, &name, "hardy", config, passed, json!(report))?;
    println!(
        "hardy trials={} max-len={}: max ratio {:.6} {} {} (sequence {})",
        report.trials,
        report.max_len,
        report.max_ratio,
        if passed { "≤" } else { ">" },
        HARDY_CONSTANT,
        report.argmax
    );
    Ok(passed)
}
