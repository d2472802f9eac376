use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use magnet::featurize::Vocab;
use magnet::model::{init_params, ModelConfig};
use magnet::pipeline::Checkpoint;
use magnet_ffi::*;

const A: &str = "int f(int n) { int s = 0; for (int i = 0; i < n; i++) { s += i; } return s; }";
const B: &str = "int g(int m) { int t = 0; int j = 0; while (j < m) { t = t + j; j++; } return t; }";

fn checkpoint() -> Checkpoint {
    let model = ModelConfig { d: 8, heads: 2, head_dim: 4, layers: 1, ..Default::default() };
    let vocab = Vocab::from_kinds(["BasicBlock", "Identifier", "Literal", "ForStatement"], 32);
    let params = init_params(&model, vocab.kind_rows(), 32, 5).unwrap();
    Checkpoint { model, vocab, params, seed: 5, best_val_loss: None, sigma: 0.5 }
}

fn last_error() -> String {
    let p = magnet_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(ck: &Checkpoint) -> *mut MagnetModel {
    let bytes = ck.to_bytes().unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { magnet_model_load_bytes(bytes.as_ptr(), bytes.len(), &mut m) }, MagnetStatus::Ok);
    assert!(magnet_last_error().is_null());
    m
}

fn compare(m: *const MagnetModel, a: &str, b: &str, sigma: f64) -> (MagnetStatus, f64, i32) {
    let (a, b) = (CString::new(a).unwrap(), CString::new(b).unwrap());
    let (mut s, mut c) = (f64::NAN, -1);
    let status = unsafe { magnet_compare(m, a.as_ptr(), b.as_ptr(), sigma, &mut s, &mut c) };
    (status, s, c)
}

#[test]
fn compare_matches_library_and_is_symmetric() {
    let ck = checkpoint();
    let m = load(&ck);
    assert_eq!(unsafe { magnet_model_sigma(m) }, 0.5);

    let (status, s_ab, _) = compare(m, A, B, f64::NAN);
    assert_eq!(status, MagnetStatus::Ok);
    let (_, s_ba, _) = compare(m, B, A, f64::NAN);
    assert!((s_ab - s_ba).abs() < 1e-12);

    let (_, s_aa, clone) = compare(m, A, A, f64::NAN);
    assert!((s_aa - 1.0).abs() < 1e-9);
    assert_eq!(clone, 1);
    let (_, _, clone) = compare(m, A, A, 2.0);
    assert_eq!(clone, 0, "explicit sigma overrides the stored one");

    let fa = magnet::featurize::featurize_bundle(&magnet::graphs::build_bundle(A, "a").unwrap(), &ck.vocab, ck.model.adjacency);
    let fb = magnet::featurize::featurize_bundle(&magnet::graphs::build_bundle(B, "b").unwrap(), &ck.vocab, ck.model.adjacency);
    let direct = magnet::model::score_pair(&ck.params, &ck.model, &fa, &fb).unwrap();
    assert_eq!(direct.to_bits(), s_ab.to_bits());
    unsafe { magnet_model_free(m) };
}

#[test]
fn load_from_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let ck = checkpoint();
    ck.save(&path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { magnet_model_load(cpath.as_ptr(), &mut m) }, MagnetStatus::Ok);
    assert!(!m.is_null());
    unsafe { magnet_model_free(m) };

    let missing = CString::new(dir.path().join("nope.ckpt").to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { magnet_model_load(missing.as_ptr(), &mut m) }, MagnetStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("nope.ckpt"));

    let mut bytes = ck.to_bytes().unwrap();
    bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
    assert_eq!(
        unsafe { magnet_model_load_bytes(bytes.as_ptr(), bytes.len(), &mut m) },
        MagnetStatus::Checkpoint
    );
    assert!(last_error().contains("version"));

    assert_eq!(unsafe { magnet_model_load(ptr::null(), &mut m) }, MagnetStatus::NullArgument);
    assert_eq!(unsafe { magnet_model_load(cpath.as_ptr(), ptr::null_mut()) }, MagnetStatus::NullArgument);
}

#[test]
fn compare_reports_bad_inputs() {
    let m = load(&checkpoint());
    let (status, _, _) = compare(m, A, "int h( {", f64::NAN);
    assert_eq!(status, MagnetStatus::Parse);
    assert!(last_error().starts_with("source_b"));

    let bad = [0xffu8, 0xfe, 0];
    let a = CString::new(A).unwrap();
    let status = unsafe { magnet_compare(m, a.as_ptr(), bad.as_ptr() as *const c_char, f64::NAN, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(status, MagnetStatus::InvalidUtf8);

    let status = unsafe { magnet_compare(ptr::null(), a.as_ptr(), a.as_ptr(), f64::NAN, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(status, MagnetStatus::NullArgument);
    assert!(unsafe { magnet_model_sigma(ptr::null()) }.is_nan());
    unsafe { magnet_model_free(m) };
    unsafe { magnet_model_free(ptr::null_mut()) };
}

#[test]
fn graph_export_round_trip() {
    let src = CString::new(A).unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { magnet_graph_export(src.as_ptr(), MagnetView::Cfg, MagnetFormat::Json, &mut out) };
    assert_eq!(status, MagnetStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { magnet_string_free(out) };
    let j: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(j["view"], "cfg");

    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { magnet_graph_export(src.as_ptr(), MagnetView::Dfg, MagnetFormat::Dot, &mut out) };
    assert_eq!(status, MagnetStatus::Ok);
    assert!(unsafe { CStr::from_ptr(out) }.to_str().unwrap().starts_with("digraph"));
    unsafe { magnet_string_free(out) };

    let bad = CString::new("void f() { x = ; }").unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { magnet_graph_export(bad.as_ptr(), MagnetView::Ast, MagnetFormat::Dot, &mut out) };
    assert_eq!(status, MagnetStatus::Parse);
    assert!(out.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(magnet_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/magnet.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["magnet_model_load", "magnet_compare", "magnet_graph_export", "magnet_last_error", "MAGNET_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
