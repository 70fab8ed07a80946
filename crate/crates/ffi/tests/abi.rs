use std::ffi::{CStr, CString};
use std::ptr;

use paynet_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(paynet_last_error()) }.to_string_lossy().into_owned()
}

/// Two disjoint 3-cycles with ratings L,L,L and H,H,H.
fn two_triangles() -> *mut PaynetGraph {
    let src = [0usize, 1, 2, 3, 4, 5];
    let dst = [1usize, 2, 0, 4, 5, 3];
    let w = [1.0; 6];
    let ratings = [0i32, 0, 0, 2, 2, 2];
    let mut g = ptr::null_mut();
    let s = unsafe { paynet_graph_from_edges(6, src.as_ptr(), dst.as_ptr(), w.as_ptr(), 6, ratings.as_ptr(), &mut g) };
    assert_eq!(s, PaynetStatus::Ok);
    g
}

#[test]
fn graph_handle_lifecycle() {
    let g = two_triangles();
    unsafe {
        assert_eq!(paynet_graph_node_count(g), 6);
        assert_eq!(paynet_graph_edge_count(g), 6);
        let mut q = 0.0;
        let parts = [1usize, 1, 1, 2, 2, 2];
        assert_eq!(paynet_modularity(g, parts.as_ptr(), 6, &mut q), PaynetStatus::Ok);
        assert_eq!(q, 0.5);
        let mut found = [0usize; 6];
        assert_eq!(paynet_louvain(g, 1, found.as_mut_ptr(), 6, &mut q), PaynetStatus::Ok);
        assert_eq!(q, 0.5);
        assert!(found[0] == found[1] && found[1] == found[2] && found[0] != found[3]);
        let mut r = 0.0;
        assert_eq!(paynet_rating_assortativity(g, true, &mut r), PaynetStatus::Ok);
        assert!((r - 1.0).abs() < 1e-12);
        let (mut ranks, mut agony, mut h) = ([0usize; 6], 0u64, 0.0);
        assert_eq!(paynet_agony(g, true, ranks.as_mut_ptr(), 6, &mut agony, &mut h), PaynetStatus::Ok);
        // every node of a cycle shares a rank; each edge then costs 1
        assert_eq!((agony, h), (6, 0.0));
        paynet_graph_free(g);
        paynet_graph_free(ptr::null_mut());
        assert_eq!(paynet_graph_node_count(ptr::null()), 0);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut out = 0.0;
        assert_eq!(paynet_density(1, 0, &mut out), PaynetStatus::Undefined);
        assert!(last_error().contains("density"));
        assert_eq!(paynet_density(10, 9, ptr::null_mut()), PaynetStatus::NullPointer);
        assert_eq!(paynet_density(1_000_555, 3_271_861, &mut out), PaynetStatus::Ok);
        assert!((out / 3.27e-6 - 1.0).abs() < 0.005);

        let mut g = ptr::null_mut();
        let (src, dst, w) = ([0usize], [0usize], [1.0]);
        let s = paynet_graph_from_edges(2, src.as_ptr(), dst.as_ptr(), w.as_ptr(), 1, ptr::null(), &mut g);
        assert_eq!(s, PaynetStatus::InvalidInput);
        assert!(g.is_null(), "output untouched on failure");
        assert!(last_error().contains("self-loop"));

        let g = two_triangles();
        let mut q = 0.0;
        let short = [1usize; 3];
        assert_eq!(paynet_modularity(g, short.as_ptr(), 3, &mut q), PaynetStatus::BadLength);
        let mut ranks = [0usize; 6];
        let (mut a, mut h) = (0u64, 0.0);
        assert_eq!(paynet_agony(ptr::null(), false, ranks.as_mut_ptr(), 6, &mut a, &mut h), PaynetStatus::NullPointer);
        paynet_graph_free(g);

        let bad = CString::new("/nonexistent/e.csv").unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(paynet_graph_load(bad.as_ptr(), bad.as_ptr(), &mut g), PaynetStatus::Io);
        assert_eq!(paynet_graph_load(ptr::null(), bad.as_ptr(), &mut g), PaynetStatus::NullPointer);
    }
}

#[test]
fn statistics_match_the_library() {
    unsafe {
        let mut p = 0.0;
        assert_eq!(paynet_hypergeom_tail(3, 5, 4, 10, true, &mut p), PaynetStatus::Ok);
        assert_eq!(p, paynet::riskstats::hypergeom_tail(3, 5, 4, 10, true));
        assert_eq!(paynet_hypergeom_tail(3, 5, 11, 10, true, &mut p), PaynetStatus::InvalidInput);

        let samples: Vec<f64> = (1..=2000).map(|i| (2000.0 / i as f64).powf(1.0 / 1.5)).collect();
        let (mut alpha, mut xmin) = (0.0, 0.0);
        assert_eq!(paynet_powerlaw_fit(samples.as_ptr(), samples.len(), false, &mut alpha, &mut xmin), PaynetStatus::Ok);
        let direct = paynet::metrics::powerlaw_fit(&samples, false).unwrap();
        assert_eq!((alpha, xmin), (direct.alpha, direct.xmin));
        assert_eq!(paynet_powerlaw_fit(ptr::null(), 0, false, &mut alpha, &mut xmin), PaynetStatus::Undefined);
        let v = CStr::from_ptr(paynet_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn cli_and_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind":"customer","n":1500}"#).unwrap();
    let out = dir.path().join("run");
    let run = |args: &[&str]| -> i32 {
        let mut all = vec!["paynet".to_string(), "--out".into(), out.display().to_string(), "--seed".into(), "2".into()];
        all.extend(args.iter().map(|s| s.to_string()));
        let owned: Vec<CString> = all.into_iter().map(|s| CString::new(s).unwrap()).collect();
        let ptrs: Vec<*const std::ffi::c_char> = owned.iter().map(|s| s.as_ptr()).collect();
        unsafe { paynet_run(ptrs.len(), ptrs.as_ptr()) }
    };
    assert_eq!(run(&["metrics"]), 3);
    assert_eq!(run(&["synth", "--spec", spec.to_str().unwrap()]), 0);
    assert_eq!(run(&["classify", "train", "--base", "softmax", "--strategy", "one-step"]), 0);

    unsafe {
        let edges = CString::new(out.join("graphs/synthetic.edges.csv").to_str().unwrap()).unwrap();
        let nodes = CString::new(out.join("graphs/synthetic.nodes.csv").to_str().unwrap()).unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(paynet_graph_load(edges.as_ptr(), nodes.as_ptr(), &mut g), PaynetStatus::Ok, "{}", last_error());
        assert_eq!(paynet_graph_node_count(g), 1500);
        paynet_graph_free(g);

        let path = CString::new(out.join("classify/model.json").to_str().unwrap()).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(paynet_model_load(path.as_ptr(), &mut m), PaynetStatus::Ok, "{}", last_error());
        let k = paynet_model_feature_count(m);
        assert_eq!(k, paynet::classify::N_FEATURES);
        let x = vec![0.5; k];
        let mut class = -1;
        assert_eq!(paynet_model_predict(m, x.as_ptr(), k, &mut class), PaynetStatus::Ok);
        assert!((0..3).contains(&class));
        assert_eq!(paynet_model_predict(m, x.as_ptr(), k - 1, &mut class), PaynetStatus::BadLength);
        let nan = vec![f64::NAN; k];
        assert_eq!(paynet_model_predict(m, nan.as_ptr(), k, &mut class), PaynetStatus::InvalidInput);
        paynet_model_free(m);
    }
}
