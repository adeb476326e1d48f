use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"#include "rtlmark.h"
#include <stdio.h>

int main(void) {
  RtlmarkKey *key = NULL;
  if (rtlmark_key_generate(&key) != RTLMARK_STATUS_OK) return 1;
  RtlmarkReport *report = NULL;
  RtlmarkStatus s = rtlmark_detect(key, "module m(input a, output y); assign y = a; endmodule", 0.0, &report);
  if (s != RTLMARK_STATUS_OK) { puts(rtlmark_last_error()); return 1; }
  printf("%d %f\n", rtlmark_report_is_watermarked(report), rtlmark_report_confidence(report));
  char *json = rtlmark_report_json(report);
  rtlmark_string_free(json);
  rtlmark_report_free(report);
  rtlmark_key_free(key);
  return 0;
}
"#;

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = include.join("rtlmark.h");
    let text = std::fs::read_to_string(&header).expect("header generated by the build script");
    for f in ["rtlmark_key_from_hex", "rtlmark_detect", "rtlmark_embed", "rtlmark_last_error", "rtlmark_string_free"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(&include).arg(&src).status();
    match status {
        Ok(s) => assert!(s.success(), "C compiler rejected the header"),
        Err(_) => eprintln!("warning: no C compiler found, header only checked textually"),
    }
}
