use rtlmark::embed::Manifest;
use rtlmark::key::WatermarkKey;
use rtlmark::payload::{encode_payload, DEFAULT_MAX_PAYLOAD};
use rtlmark::verilog::parse_str;
use std::path::Path;
use std::process::{Command, Output};

const DESIGN: &str = "module ctl(input clk, input rst, input go, output reg busy, output reg [23:0] acc);\n\
  localparam IDLE = 2'd0, RUN = 2'd1, DONE = 2'd2;\n\
  reg [1:0] state;\n\
  wire start;\n\
  assign start = go && !busy;\n\
  always @(posedge clk) begin\n\
    if (rst) begin state <= IDLE; busy <= 1'b0; acc <= 24'd0; end\n\
    else begin\n\
      case (state)\n\
        IDLE: if (start) begin state <= RUN; busy <= 1'b1; end\n\
        RUN: begin acc <= acc + 24'd3; state <= DONE; end\n\
        DONE: begin busy <= 1'b0; state <= IDLE; end\n\
        default: state <= IDLE;\n\
      endcase\n\
    end\n\
  end\n\
endmodule\n";

fn rtlmark(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtlmark"))
        .current_dir(dir)
        .env_remove("RTLMARK_SYNTH")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn embed_detect_attack_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("ctl.v"), DESIGN).unwrap();
    std::fs::write(d.join("inv.v"), "module inv(input a, output y);\n  assign y = ~a;\nendmodule\n").unwrap();

    let o = rtlmark(d, &["keygen", "-o", "k.key"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(code(&rtlmark(d, &["keygen", "-o", "k.key"])), 74, "existing key is not overwritten");

    let o = rtlmark(d, &["--key", "k.key", "embed", "ctl.v", "-o", "ctl.wm.v", "--payload", "model=m1,dev=acme"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(d.join("ctl.wm.v.manifest.json").is_file());

    let o = rtlmark(d, &["--key", "k.key", "detect", "ctl.wm.v"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("Watermarked"));
    assert_eq!(code(&rtlmark(d, &["--key", "k.key", "detect", "ctl.v"])), 1);
    assert_eq!(code(&rtlmark(d, &["--key", "k.key", "detect", "inv.v"])), 1);

    let o = rtlmark(d, &["--key", "k.key", "detect", "--json", "ctl.wm.v"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"], "watermarked");

    let o = rtlmark(d, &["attack", "ctl.wm.v", "--fraction", "1.0", "--seed", "3", "-o", "ctl.att.v"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_ne!(std::fs::read_to_string(d.join("ctl.att.v")).unwrap(), std::fs::read_to_string(d.join("ctl.wm.v")).unwrap());

    let key = WatermarkKey::from_hex(std::fs::read_to_string(d.join("k.key")).unwrap().trim()).unwrap();
    let payload = encode_payload("m1", "acme", &key, DEFAULT_MAX_PAYLOAD).unwrap();
    let manifest = Manifest::from_json(&std::fs::read_to_string(d.join("ctl.wm.v.manifest.json")).unwrap()).unwrap();
    let replayed = manifest.replay(&parse_str(DESIGN).unwrap(), &key, &payload).unwrap();
    assert_eq!(replayed, std::fs::read_to_string(d.join("ctl.wm.v")).unwrap());
}

#[test]
fn exit_codes_for_bad_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("ctl.v"), DESIGN).unwrap();
    std::fs::write(d.join("broken.v"), "module m(input a;\n").unwrap();
    rtlmark(d, &["keygen", "-o", "k.key"]);

    assert_eq!(code(&rtlmark(d, &["detect", "ctl.v"])), 64, "missing key");
    assert_eq!(code(&rtlmark(d, &["--key", "k.key", "--tau", "1.5", "detect", "ctl.v"])), 64);
    assert_eq!(code(&rtlmark(d, &["frobnicate"])), 64);
    assert_eq!(code(&rtlmark(d, &["--help"])), 0);
    assert_eq!(code(&rtlmark(d, &["--key", "k.key", "detect", "missing.v"])), 2);
    assert_eq!(code(&rtlmark(d, &["--key", "k.key", "embed", "broken.v", "-o", "x.v"])), 65);
    assert_eq!(code(&rtlmark(d, &["--key", "k.key", "embed", "missing.v", "-o", "x.v"])), 74);
    assert_eq!(code(&rtlmark(d, &["attack", "ctl.v", "--fraction", "0", "-o", "x.v"])), 64);
    std::fs::write(d.join("rtlmark.toml"), "tau = 2.0\n").unwrap();
    assert_eq!(code(&rtlmark(d, &["rules"])), 64, "invalid config");
}

#[test]
fn rules_lists_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let o = rtlmark(dir.path(), &["rules"]);
    assert_eq!(code(&o), 0);
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(str::to_string).collect();
    assert_eq!(rows.len(), 15);
    for (i, row) in rows.iter().enumerate() {
        assert!(row.starts_with(&format!("T{}", i + 1)), "{row}");
    }
}

#[test]
fn evaluate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir_all(d.join("corpus/eligible")).unwrap();
    std::fs::create_dir_all(d.join("corpus/clean")).unwrap();
    std::fs::write(d.join("corpus/eligible/ctl.v"), DESIGN).unwrap();
    std::fs::write(d.join("corpus/clean/inv.v"), "module inv(input a, output y);\n  assign y = ~a;\nendmodule\n").unwrap();
    rtlmark(d, &["keygen", "-o", "k.key"]);
    let o = rtlmark(d, &["--key", "k.key", "evaluate", "corpus", "--attack", "1.0", "--seeds", "1,2", "-o", "out"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("out/report.json")).unwrap()).unwrap();
    assert_eq!(json["tpr"], 1.0);
    assert!(std::fs::read_to_string(d.join("out/report.txt")).unwrap().contains("eligible/ctl.v"));

    let o = rtlmark(d, &["--key", "k.key", "calibrate", "corpus", "-o", "null.json"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(code(&rtlmark(d, &["--key", "k.key", "--null", "null.json", "detect", "corpus/clean/inv.v"])), 1);
}
