//! Compiles and runs a small C program against the generated header and the
//! static library, verifying the ABI end to end. Skipped when no C compiler
//! is on PATH.

use std::path::PathBuf;
use std::process::Command;

const C_SRC: &str = r#"
#include <math.h>
#include <stdio.h>
#include "runmax.h"

int main(void) {
    rm_model *m = NULL;
    if (rm_model_new_cox(0.05, 0.2, 2.0, 1.0, 0.5, 0.5, 1.0, 1.0, &m) != RM_OK)
        return 1;
    double z[2] = {1.0, 2.0}, w[2] = {0.7, 0.3};
    if (rm_model_set_jumps(m, z, w, 2, 0.1) != RM_OK) return 2;
    double a1, a2, a;
    if (rm_constants(m, &a1, &a2, &a) != RM_OK) return 3;
    if (fabs(a2 - 32.0) > 1e-12) return 4;
    double mean, se;
    if (rm_estimate_max(m, 42, 64, 200, &mean, &se) != RM_OK) return 5;
    if (!(mean > 0.0 && se > 0.0)) return 6;
    double v;
    if (rm_invert_laplace("one_over_s", 1.0, 1, 0, &v) != RM_OK) return 7;
    if (fabs(v - 1.0) > 1e-6) return 8;
    rm_model_free(m);
    printf("ok %.6f\n", mean);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let cc = ["cc", "gcc", "clang"]
        .iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok());
    let Some(cc) = cc else {
        eprintln!("no C compiler found; skipping");
        return;
    };

    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    // `cargo test` only builds the rlib; build the staticlib explicitly into
    // the same target dir (dependencies are already compiled, so this is
    // cheap). Test binaries live in target/<profile>/deps.
    let profile_dir = PathBuf::from(std::env::current_exe().unwrap())
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let target_dir = profile_dir.parent().unwrap().to_path_buf();
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let mut build = Command::new(cargo);
    build
        .args(["build", "-p", "runmax-ffi", "--target-dir"])
        .arg(&target_dir)
        .current_dir(&manifest);
    if profile_dir.file_name().is_some_and(|p| p == "release") {
        build.arg("--release");
    }
    let status = build.status().unwrap();
    assert!(status.success(), "building the staticlib failed");
    let lib = profile_dir.join("librunmax_ffi.a");
    assert!(lib.exists(), "staticlib not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, C_SRC).unwrap();

    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");

    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "C smoke test exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
