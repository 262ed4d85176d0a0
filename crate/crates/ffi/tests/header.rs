//! The generated header declares the exported surface and compiles as C.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ict.h")
}

#[test]
fn header_declares_exports() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "typedef struct IctNetwork IctNetwork;",
        "ict_network_load(",
        "ict_network_free(",
        "ict_network_predict(",
        "ict_network_save(",
        "ict_two_moons(",
        "ict_train_two_moons(",
        "ict_cosine_lr(",
        "ict_ramp_w(",
        "ict_last_error_message(",
        "ICT_STATUS_OK = 0",
        "ICT_STATUS_NON_FINITE",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
}

/// Builds and runs a small C program against the shared library when a C
/// compiler is available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join(if cfg!(target_os = "macos") {
        "libict_ffi.dylib"
    } else {
        "libict_ffi.so"
    });
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() || cfg!(windows) {
        eprintln!("skipping: no C compiler or shared library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ict.h"
int main(void) {
    double x[20]; size_t y[10]; double lr;
    if (ict_two_moons(10, 0.1, 3, x, y) != ICT_STATUS_OK) return 1;
    if (ict_cosine_lr(50, 100, 0.1, &lr) != ICT_STATUS_OK) return 2;
    if (lr < 0.0499999 || lr > 0.0500001) return 3;
    IctNetwork *net = NULL;
    if (ict_network_load("/nonexistent.ckpt", &net) != ICT_STATUS_IO) return 4;
    if (ict_last_error_message() == NULL) return 5;
    printf("ok %s\n", ict_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(profile_dir)
        .arg("-lict_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin)
        .env("LD_LIBRARY_PATH", profile_dir)
        .env("DYLD_LIBRARY_PATH", profile_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
