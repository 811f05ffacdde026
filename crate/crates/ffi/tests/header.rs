//! The generated header declares every exported symbol and compiles as C.

use std::path::PathBuf;
use std::process::Command;

const SYMBOLS: &[&str] = &[
    "freeito_last_error",
    "freeito_version",
    "freeito_string_free",
    "freeito_count_noncrossing",
    "freeito_cumulants_catalog",
    "freeito_cumulants_from_json",
    "freeito_cumulants_free",
    "freeito_moments",
    "freeito_moments_exact",
    "freeito_density",
    "freeito_cauchy",
    "freeito_step_from_json",
    "freeito_step_free",
    "freeito_mu_norm",
    "freeito_verify",
];

fn include_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_symbols() {
    let header = std::fs::read_to_string(include_dir().join("freeito.h")).unwrap();
    for s in SYMBOLS {
        assert!(header.contains(&format!("{s}(")), "missing {s}");
    }
    assert!(header.contains("FREEITO_STATUS_OK = 0"));
    assert!(header.contains("typedef struct FreeitoCumulants FreeitoCumulants;"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success());
    let dir = std::env::temp_dir().join(format!("freeito-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"freeito.h\"\nint main(void) {\n  uint64_t c = 0;\n  FreeitoStatus s = freeito_count_noncrossing(5, &c);\n  return s == FREEITO_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include_dir())
        .arg(&src)
        .status()
        .unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    assert!(status.success());
}
