mod common;

use common::*;
use proptest::prelude::*;
use tracelab::condense::Condensed;
use tracelab::lemma_lab::*;
use tracelab::mesh::{build_cartesian, build_perturbed_quads, MeshFamily, Side};
use tracelab::par::Exec;
use tracelab::space::DegreeConfig;

#[test]
fn four_by_four_catalog() {
    let mesh = build_cartesian(2, 4).unwrap();
    let cat = SetCatalog::build(&mesh, Side::BOTTOM, Exec::default()).unwrap();
    assert_eq!(cat.vertical[0], vec![0, 4, 8, 12]);
    assert_eq!(cat.layers.iter().map(Vec::len).sum::<usize>(), 16);
    for band in &cat.bands {
        for &(f, fp) in band {
            let p = cat.pair(f, fp).unwrap();
            let mut union: Vec<usize> = p.horizontal.iter().flatten().copied().collect();
            let len = union.len();
            union.sort_unstable();
            union.dedup();
            assert_eq!(union.len(), len, "C_ff's overlap");
            assert_eq!(union, p.cells);
        }
    }
    assert!(cat.check_partitions(&mesh).all());
}

#[test]
fn band_slices_match_distances() {
    let mesh = build_cartesian(2, 8).unwrap();
    let cat = SetCatalog::build(&mesh, Side::LEFT, Exec::default()).unwrap();
    for (i, band) in cat.bands.iter().enumerate() {
        let l = (i + 1) as f64;
        for &(f, fp) in band {
            let d = (mesh.faces[f].centroid - mesh.faces[fp].centroid).norm();
            assert!((l - 1.0) * cat.h <= d * (1.0 + 1e-15) && d < l * cat.h);
            assert!(cat.band_slice(i + 1, f).contains(&fp));
        }
    }
}

#[test]
fn cartesian_cells_lie_above_one_face() {
    for n in [4, 8, 16] {
        let mesh = build_cartesian(2, n).unwrap();
        let cat = SetCatalog::build(&mesh, Side::TOP, Exec::default()).unwrap();
        let c = cardinality_constants(&cat, &mesh);
        assert_eq!(c[2].lemma, "cardinality.C3");
        assert_eq!(c[2].value, 1.0);
    }
}

#[test]
fn cube_catalog() {
    let mesh = build_cartesian(3, 4).unwrap();
    let cat = SetCatalog::build(&mesh, Side { axis: 2, high: false }, Exec::default()).unwrap();
    assert!(cat.check_partitions(&mesh).all());
    assert!(rho_sum_defect(&cat) < 1e-15);
    assert!(d_g_rho_support_holds(&cat, &mesh));
    assert!(lifting_lemma_constants(&cat, &mesh).iter().all(|c| c.value.is_finite()));
}

#[test]
fn hardy_examples() {
    let r = hardy_ratio(&[1.0; 4]).unwrap();
    assert!((r - (4.0 + 2.25 + 16.0 / 9.0) / 4.0).abs() < 1e-15);
    let rep = check_hardy(&random_sequences(2000, 200, 7), Exec::default()).unwrap();
    assert!(rep.passed() && rep.max_ratio > 1.0);
}

#[test]
fn local_approximation_constants_are_scale_free() {
    let a = local_approx_constants(&cartesian_space(2, 4, 2), 200, 5, Exec::default()).unwrap();
    let b = local_approx_constants(&cartesian_space(2, 16, 2), 200, 5, Exec::default()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(rel_err(x.value, y.value) < 0.25);
    }
}

#[test]
fn pw_prefactor_grows_as_the_set_shrinks() {
    let b = bundle(2, 8, 1);
    let all = b.space.mesh.boundary_faces.clone();
    let one = vec![all[0]];
    let big = pw_constant(&b, &all, 40, 1, Exec::default()).unwrap();
    let small = pw_constant(&b, &one, 40, 1, Exec::default()).unwrap();
    assert!(small.value < big.value);
}

#[test]
fn trace_constant_covers_harmonic_probes_and_split() {
    let b = family_bundle(MeshFamily::Perturbed { amplitude: 0.2, seed: 2 }, 6, DegreeConfig::uniform(1).unwrap());
    let c = Condensed::new(&b, Exec::default()).unwrap();
    let cat = SetCatalog::build(&b.space.mesh, Side::BOTTOM, Exec::default()).unwrap();
    let tc = trace_constant(&b, &c, Some(&cat), 30, 4, Exec::default()).unwrap();
    assert!(tc.constant.value > 0.0 && tc.skipped == 0);
    assert!(tc.split.is_some());
}

#[test]
fn reports_serialize_with_mesh_parameters() {
    let mesh = build_cartesian(2, 4).unwrap();
    let params = MeshParams::describe(&mesh, 4, MeshFamily::Cartesian, Some(Side::BOTTOM), None);
    let rep = LemmaReport::new(&Constant::new("cardinality.C1", 2.0, 4), params);
    let json = serde_json::to_value(&rep).unwrap();
    assert_eq!(json["lemma"], "cardinality.C1");
    assert_eq!(json["mesh"]["n"], 4);
    assert_eq!(json["mesh"]["family"]["family"], "cartesian");
    assert_eq!(json["probes"], 4);
    let back: LemmaReport = serde_json::from_value(json).unwrap();
    assert_eq!(back, rep);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn perturbed_catalogs_partition(n in 3usize..9, amp in 0.0f64..0.25, seed in 0u64..100) {
        let mesh = build_perturbed_quads(n, amp, seed).unwrap();
        for side in Side::all(2) {
            let cat = SetCatalog::build(&mesh, side, Exec::Serial).unwrap();
            let check = cat.check_partitions(&mesh);
            prop_assert!(check.layers && check.bands && check.dagger && check.horizontal, "{:?}", check);
            prop_assert!(rho_sum_defect(&cat) < 1e-14);
            prop_assert!(d_g_rho_support_holds(&cat, &mesh));
        }
    }

    #[test]
    fn hardy_bound_holds(r in proptest::collection::vec(1e-6f64..1e3, 2..200)) {
        prop_assert!(hardy_ratio(&r).unwrap() <= HARDY_CONSTANT);
    }
}
