use std::ffi::CStr;
use std::ptr;

use nsbm_ffi::*;

#[test]
fn simulate_init_refine_score() {
    unsafe {
        let (mut g, mut x, mut truth) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(nsbm_simulate(NsbmScenario::A, 120, 7, &mut g, &mut x, &mut truth), NsbmStatus::Ok);
        assert_eq!(nsbm_graph_node_count(g), 120);
        assert_eq!(nsbm_covariates_dim(x), 4);
        assert_eq!(nsbm_labels_len(truth), 120);

        let mut init = ptr::null_mut();
        let lambda = 0.5 * 120.0 * 120.0;
        assert_eq!(nsbm_sdp_init(g, x, 2, 0.02, lambda, 0, 1, &mut init), NsbmStatus::Ok);

        for fit_fn in [nsbm_mpl_fit, nsbm_vem_fit] {
            let mut fit = ptr::null_mut();
            assert_eq!(fit_fn(g, x, init, &mut fit), NsbmStatus::Ok);
            assert!(nsbm_fit_objective(fit).is_finite());

            let mut labels = vec![0u32; 120];
            assert_eq!(nsbm_fit_labels(fit, labels.as_mut_ptr(), 120), NsbmStatus::Ok);
            assert!(labels.iter().all(|&c| c < 2));
            let mut beta = vec![f64::NAN; 8];
            assert_eq!(nsbm_fit_beta(fit, beta.as_mut_ptr(), 8), NsbmStatus::Ok);
            assert_eq!(&beta[4..], &[0.0; 4]);
            assert_eq!(nsbm_fit_beta(fit, beta.as_mut_ptr(), 7), NsbmStatus::DimensionMismatch);

            let mut est = ptr::null_mut();
            assert_eq!(nsbm_labels_new(120, labels.as_ptr(), 2, &mut est), NsbmStatus::Ok);
            let (mut v_nmi, mut v_ari) = (f64::NAN, f64::NAN);
            assert_eq!(nsbm_nmi(truth, est, &mut v_nmi), NsbmStatus::Ok);
            assert_eq!(nsbm_ari(truth, est, &mut v_ari), NsbmStatus::Ok);
            assert!((0.0..=1.0).contains(&v_nmi));
            assert!(v_ari <= 1.0);
            nsbm_labels_free(est);
            nsbm_fit_free(fit);
        }

        nsbm_labels_free(init);
        nsbm_labels_free(truth);
        nsbm_covariates_free(x);
        nsbm_graph_free(g);
    }
}

#[test]
fn identical_partitions_score_one() {
    unsafe {
        let mut a = ptr::null_mut();
        let mut b = ptr::null_mut();
        nsbm_labels_new(6, [0, 0, 1, 1, 2, 2].as_ptr(), 3, &mut a);
        nsbm_labels_new(6, [2, 2, 0, 0, 1, 1].as_ptr(), 3, &mut b);
        let mut v = 0.0;
        assert_eq!(nsbm_nmi(a, b, &mut v), NsbmStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(nsbm_ari(a, b, &mut v), NsbmStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);

        let mut copy = [9u32; 6];
        assert_eq!(nsbm_labels_copy(b, copy.as_mut_ptr(), 6), NsbmStatus::Ok);
        assert_eq!(copy, [2, 2, 0, 0, 1, 1]);
        nsbm_labels_free(a);
        nsbm_labels_free(b);
    }
}

#[test]
fn graph_from_edges_and_errors() {
    unsafe {
        let mut g = ptr::null_mut();
        let edges = [0u32, 1, 1, 2, 2, 0];
        assert_eq!(nsbm_graph_from_edges(4, edges.as_ptr(), 3, &mut g), NsbmStatus::Ok);
        assert_eq!(nsbm_graph_edge_count(g), 3);
        nsbm_graph_free(g);

        let bad = [0u32, 9];
        let mut h = ptr::null_mut();
        assert_ne!(nsbm_graph_from_edges(4, bad.as_ptr(), 1, &mut h), NsbmStatus::Ok);
        assert!(h.is_null());
        assert!(!CStr::from_ptr(nsbm_last_error()).to_bytes().is_empty());

        let mut x = ptr::null_mut();
        assert_eq!(nsbm_covariates_new(2, 1, [1.0, f64::NAN].as_ptr(), &mut x), NsbmStatus::NonFinite);
        assert!(nsbm_fit_objective(ptr::null()).is_nan());
        nsbm_graph_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nsbm.h")).unwrap();
    for name in [
        "NSBM_STATUS_OK",
        "typedef struct NsbmGraph NsbmGraph",
        "nsbm_last_error",
        "nsbm_simulate",
        "nsbm_sdp_init",
        "nsbm_mpl_fit",
        "nsbm_vem_fit",
        "nsbm_nmi",
        "nsbm_ari",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/nsbm.h");
    match std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).status() {
        Ok(status) => assert!(status.success()),
        Err(_) => eprintln!("no C compiler found; header syntax check skipped"),
    }
}
