//! Compiles and runs a C program against the generated header and the
//! shared library. Skipped when no C compiler is on the path.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "paynet.h"

int main(void) {
    size_t src[3] = {0, 1, 2}, dst[3] = {1, 2, 0};
    double w[3] = {1.0, 1.0, 1.0};
    PaynetGraph *g = NULL;
    if (paynet_graph_from_edges(3, src, dst, w, 3, NULL, &g) != PAYNET_STATUS_OK) return 1;
    if (paynet_graph_edge_count(g) != 3) return 2;
    double d = 0.0;
    if (paynet_density(3, 3, &d) != PAYNET_STATUS_OK || d != 0.5) return 3;
    if (paynet_density(1, 0, &d) != PAYNET_STATUS_UNDEFINED) return 4;
    if (strlen(paynet_last_error()) == 0) return 5;
    paynet_graph_free(g);
    printf("%s\n", paynet_version());
    return 0;
}
"#;

fn lib_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("paynet.h").exists(), "header was not generated");
    let libs = lib_dir();
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let bin = tmp.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg(format!("-I{}", include.display()))
        .arg(format!("-L{}", libs.display()))
        .args(["-lpaynet_ffi"])
        .arg(format!("-Wl,-rpath,{}", libs.display()))
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
