//! The generated header compiles as C and C++ when a compiler is present.

use std::path::PathBuf;
use std::process::Command;

fn include_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "include"].iter().collect()
}

const PROGRAM: &str = r#"
#include "thermodamage.h"
int main(void) {
    TdConfig *cfg = 0;
    TdStatus s = td_config_parse("", &cfg);
    TdExponents e;
    td_validate_exponents(3.0, 1.0, 1.0, &e);
    return s == TD_STATUS_OK && e.admissible ? 0 : (int)TD_FIELD_DAMAGE;
}
"#;

fn syntax_check(compiler: &str, args: &[&str], ext: &str) {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join(format!("use_header.{ext}"));
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(compiler)
        .args(args)
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(include_dir())
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
        Err(e) => eprintln!("skipping {compiler}: {e}"),
    }
}

#[test]
fn header_compiles_as_c() {
    syntax_check("cc", &["-std=c99", "-pedantic"], "c");
}

#[test]
fn header_compiles_as_cpp() {
    syntax_check("c++", &["-std=c++11"], "cpp");
}
