mod common;

use common::*;
use proptest::prelude::*;
use tracelab::condense::{schur_dense, Condensed};
use tracelab::mesh::{build_cartesian, MeshFamily};
use tracelab::par::Exec;
use tracelab::seminorms::OperatorBundle;
use tracelab::space::{trace, DegreeConfig};

#[test]
fn oracle_equivalence_on_perturbed_and_mixed_degree_spaces() {
    let family = MeshFamily::Perturbed { amplitude: 0.25, seed: 9 };
    for (l, r) in [(0, 0), (1, 0), (0, 2), (2, 1), (3, 3)] {
        let b = family_bundle(family, 4, DegreeConfig::new(l, r).unwrap());
        for s in 0..10 {
            let v = b.space.random(11, s);
            assert!(rel_err(b.h1_form(&v).unwrap(), h1_oracle(&b.space, &v)) < 1e-12, "({l},{r})");
            let w = trace(&v);
            assert!(rel_err(b.hhalf_form(&w).unwrap(), hhalf_oracle(&b.space, &w)) < 1e-12, "({l},{r})");
        }
    }
}

#[test]
fn oracle_equivalence_in_three_dimensions() {
    for k in 0..=2 {
        let b = bundle(3, 2, k);
        for s in 0..5 {
            let v = b.space.random(5, s);
            assert!(rel_err(b.h1_form(&v).unwrap(), h1_oracle(&b.space, &v)) < 1e-12);
            let w = trace(&v);
            assert!(rel_err(b.hhalf_form(&w).unwrap(), hhalf_oracle(&b.space, &w)) < 1e-12);
        }
    }
}

#[test]
fn serial_and_parallel_assembly_are_identical() {
    let space = cartesian_space(2, 6, 2);
    let a = OperatorBundle::assemble(space.clone(), Exec::Serial).unwrap();
    let b = OperatorBundle::assemble(space, Exec::Parallel).unwrap();
    assert_eq!(a.h, b.h);
    assert_eq!(a.a.values(), b.a.values());
    assert_eq!(a.s, b.s);
}

#[test]
fn condensed_schur_matches_dense_elimination_on_perturbed_mesh() {
    let b = family_bundle(MeshFamily::Perturbed { amplitude: 0.2, seed: 3 }, 5, DegreeConfig::new(1, 2).unwrap());
    let c = Condensed::new(&b, Exec::default()).unwrap();
    let sparse = c.schur_complement(Exec::default());
    let dense = schur_dense(&b).unwrap();
    assert!((&sparse - &dense).amax() <= 1e-11 * dense.amax());
}

#[test]
fn renumbering_faces_permutes_the_boundary_matrices() {
    let mesh = build_cartesian(2, 3).unwrap();
    let nf = mesh.num_faces();
    let order: Vec<usize> = (0..nf).rev().collect();
    let renum = mesh.renumber_faces(&order).unwrap();
    let a = OperatorBundle::assemble(space_on(mesh, DegreeConfig::uniform(0).unwrap()), Exec::default()).unwrap();
    let b = OperatorBundle::assemble(space_on(renum, DegreeConfig::uniform(0).unwrap()), Exec::default()).unwrap();
    // total boundary measure and the constant vector are invariant
    assert!((a.s.sum() - b.s.sum()).abs() < 1e-14);
    let ta: f64 = a.h.iter().map(|x| x.abs()).sum();
    let tb: f64 = b.h.iter().map(|x| x.abs()).sum();
    assert!(rel_err(ta, tb) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forms_are_nonnegative_and_vanish_on_constants(n in 1usize..5, k in 0usize..4, seed in 0u64..1000, c in -5.0f64..5.0) {
        let b = bundle(2, n, k);
        let v = b.space.random(seed, 0);
        prop_assert!(b.h1_form(&v).unwrap() >= -1e-12);
        prop_assert!(b.hhalf_form(&trace(&v)).unwrap() >= -1e-12);
        let cst = b.space.constant(c);
        let scale = c * c * b.a.values().iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(b.h1_form(&cst).unwrap().abs() <= 1e-12 * scale.max(1.0));
        prop_assert!(b.hhalf_form(&trace(&cst)).unwrap().abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn boundary_integral_is_linear(n in 1usize..5, k in 0usize..4, a in -3.0f64..3.0, seed in 0u64..100) {
        let b = bundle(2, n, k);
        let w1 = b.space.random_trace(seed, 1);
        let w2 = b.space.random_trace(seed, 2);
        let mut comb = w1.clone();
        comb.data = &w1.data * a + &w2.data;
        let lhs = b.boundary_integral(&comb);
        let rhs = a * b.boundary_integral(&w1) + b.boundary_integral(&w2);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn schur_energy_identity(n in 1usize..6, k in 0usize..4, seed in 0u64..1000) {
        let b = bundle(2, n, k);
        let c = Condensed::new(&b, Exec::Serial).unwrap();
        let a_sc = c.schur_complement(Exec::Serial);
        let w = b.space.random_trace(seed, 3);
        let e = c.harmonic_extension(&w);
        let lhs = w.data.dot(&(&a_sc * &w.data));
        prop_assert!(rel_err(lhs, b.h1_form(&e).unwrap()) < 1e-11);
        prop_assert_eq!(trace(&e).data, w.data);
    }
}
