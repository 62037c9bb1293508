use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use netroots_ffi::*;

fn star() -> *mut NrGraph {
    let edges: [u32; 8] = [0, 1, 0, 2, 0, 3, 1, 2];
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { nr_graph_from_edges(4, edges.as_ptr(), 4, &mut g) }, NrStatus::Ok);
    g
}

fn last_error() -> String {
    let p = nr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn infer_round_trip() {
    let g = star();
    assert_eq!(unsafe { nr_graph_num_nodes(g) }, 4);
    assert_eq!(unsafe { nr_graph_num_edges(g) }, 4);
    let p = nr_params_default(NrVariant::SingleRoot);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { nr_infer(g, &p, ptr::null(), &mut r) }, NrStatus::Ok);
    assert_eq!(unsafe { nr_result_len(r) }, 4);
    let mut probs = [0.0; 4];
    assert_eq!(unsafe { nr_result_root_probs(r, probs.as_mut_ptr(), 4) }, NrStatus::Ok);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(probs[0] > probs[3]);

    let mut len = 0;
    assert_eq!(
        unsafe { nr_result_credible_set(r, 0.05, 0, ptr::null_mut(), 0, &mut len) },
        NrStatus::Ok
    );
    let mut nodes = vec![0usize; len];
    assert_eq!(
        unsafe { nr_result_credible_set(r, 0.05, 0, nodes.as_mut_ptr(), len, &mut len) },
        NrStatus::Ok
    );
    assert_eq!(nodes[0], 0);
    unsafe {
        nr_result_free(r);
        nr_graph_free(g);
    }
}

#[test]
fn parse_and_labels() {
    let text = CString::new("# comment\na b\nb c\n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { nr_graph_parse(text.as_ptr(), &mut g) }, NrStatus::Ok);
    let mut buf = [0 as std::ffi::c_char; 8];
    let mut len = 0;
    assert_eq!(unsafe { nr_graph_label(g, 2, buf.as_mut_ptr(), buf.len(), &mut len) }, NrStatus::Ok);
    assert_eq!(len, 2);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "c");
    unsafe { nr_graph_free(g) };

    let bad = CString::new("a b c\n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { nr_graph_parse(bad.as_ptr(), &mut g) }, NrStatus::Parse);
    assert!(g.is_null());
    assert!(last_error().contains("line 1"));
}

#[test]
fn error_codes() {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { nr_graph_from_edges(3, ptr::null(), 1, &mut g) }, NrStatus::NullPointer);
    let edges = [0u32, 5];
    assert_eq!(unsafe { nr_graph_from_edges(3, edges.as_ptr(), 1, &mut g) }, NrStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));

    let two = [0u32, 1, 2, 3];
    assert_eq!(unsafe { nr_graph_from_edges(4, two.as_ptr(), 2, &mut g) }, NrStatus::Ok);
    let p = nr_params_default(NrVariant::SingleRoot);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { nr_infer(g, &p, ptr::null(), &mut r) }, NrStatus::Disconnected);
    assert!(r.is_null());

    let mut bad = p;
    bad.beta = -1.0;
    assert_eq!(unsafe { nr_infer(g, &bad, ptr::null(), &mut r) }, NrStatus::InvalidArgument);
    assert_eq!(unsafe { nr_infer(ptr::null(), &p, ptr::null(), &mut r) }, NrStatus::NullPointer);
    unsafe {
        nr_graph_free(g);
        nr_graph_free(ptr::null_mut());
        nr_result_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(nr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/netroots.h")).unwrap();
    for name in ["nr_graph_from_edges", "nr_infer", "nr_result_credible_set", "nr_last_error", "NR_STATUS_DISCONNECTED"] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs the C smoke test against the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    // test binary lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libnetroots_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("netroots_smoke");
    let status = Command::new(cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "smoke test exited with {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
