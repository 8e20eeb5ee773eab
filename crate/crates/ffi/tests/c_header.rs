use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "harnack_lab.h"

int main(void) {
    const char *vars[] = {"x", "y1"};
    HlExpr *e = NULL;
    if (hl_expr_parse("exp(-x) * cosh(y1)", vars, 2, &e) != HL_STATUS_OK) return 10;
    double v = 0.0, pt[2] = {0.0, 0.0};
    if (hl_expr_eval(e, pt, 2, &v) != HL_STATUS_OK || fabs(v - 1.0) > 1e-15) return 11;
    char *s = hl_expr_to_string(e);
    if (s == NULL) return 12;
    hl_string_free(s);
    hl_expr_free(e);

    HlExpr *bad = NULL;
    if (hl_expr_parse("x +", vars, 2, &bad) != HL_STATUS_PARSE_ERROR) return 13;
    if (hl_last_error()[0] == '\0') return 14;

    HlOperator *op = NULL;
    HlDomain dom = hl_domain_default();
    if (hl_operator_new("y1", "0", 2, &dom, &op) != HL_STATUS_OK) return 15;
    HlSimConfig cfg = {1e-3, 0.5, 64, 5, true};
    double y0[1] = {0.0};
    HlPathBatch *b = NULL;
    if (hl_simulate(op, &dom, 0.5, y0, 1, &cfg, &b) != HL_STATUS_OK) return 16;
    if (hl_batch_len(b) != 64) return 17;
    double t = 0.0;
    if (hl_batch_path(b, 3, NULL, NULL, &t, NULL, NULL) != HL_STATUS_OK || t <= 0.0) return 18;
    hl_batch_free(b);
    hl_operator_free(op);

    double r = 0.0;
    if (hl_counterexample_ratio(1.0, 101, 101, &r) != HL_STATUS_OK) return 19;
    if (fabs(r - exp(1.0) * cosh(1.0)) > 1e-5) return 20;
    printf("ok\n");
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/harnack_lab.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["hl_expr_parse", "hl_simulate", "hl_fk_evaluate", "HL_STATUS_OK", "typedef struct HlExpr HlExpr"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }

    let lib = target_dir().join("libharnack_lab_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("no C compiler or static library; skipped link step");
        return;
    }
    let dir = std::env::temp_dir().join(format!("hl_c_smoke_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    let bin = dir.join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
    let _ = std::fs::remove_dir_all(&dir);
}
