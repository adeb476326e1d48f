use rtlmark::embed::{all_sites, realize};
use rtlmark::key::WatermarkKey;
use rtlmark::netlist::{detect_netlist, synthesize, SynthConfig};
use rtlmark::payload::{encode_payload, header};
use rtlmark::rules::RuleId;
use rtlmark::verilog::{parse_str, print};

const ACC: &str = "module ctl(input clk, input rst, input [3:0] d, output reg [23:0] acc);\n\
always @(posedge clk) begin\n\
  if (rst) acc <= 24'd0;\n\
  else acc <= acc + d;\n\
end\n\
endmodule\n";

const COMB: &str = "module mix(input [11:0] a, input [11:0] b, output [31:0] y);\n\
assign y = {a ^ b, a & b, 8'h5a};\n\
endmodule\n";

fn tool() -> Option<SynthConfig> {
    let cfg = SynthConfig::default();
    if cfg.available() {
        Some(cfg)
    } else {
        eprintln!("warning: no synthesis tool found, skipping netlist checks");
        None
    }
}

fn t15_only(src: &str, seed: u64) -> (String, WatermarkKey, Vec<u8>) {
    let key = WatermarkKey::from_seed(seed);
    let payload = encode_payload("model-x", "dev", &key, 64).unwrap();
    let ast = parse_str(src).unwrap();
    let sites: Vec<_> = all_sites(&ast, &key).into_iter().filter(|s| s.rule == RuleId::T15).take(1).collect();
    assert_eq!(sites.len(), 1, "fixture has a carrier");
    let (marked, _) = realize(&ast, &sites, &key, &payload).unwrap();
    (print(&marked), key, payload.encoded)
}

#[test]
fn synthesized_carriers_keep_the_payload() {
    let Some(cfg) = tool() else { return };
    for (src, top) in [(ACC, "ctl"), (COMB, "mix")] {
        let (marked, key, encoded) = t15_only(src, 11);
        let net = synthesize(&marked, top, &cfg).unwrap();
        let ev = detect_netlist(&net, top, &key, None).unwrap();
        assert!(ev.found, "{top}: {ev:?}");
        assert_eq!(&ev.payload_bytes[..3], &header(&key));
        assert_eq!(ev.payload_bytes, encoded[..ev.payload_bytes.len()].to_vec());
        assert_eq!(ev.trigger_net.as_deref(), Some("watermark_trigger"));
        assert!(!ev.trace.is_empty());

        let clean = synthesize(src, top, &cfg).unwrap();
        let ev = detect_netlist(&clean, top, &key, None).unwrap();
        assert!(!ev.found && ev.trace.is_empty(), "{top}: {ev:?}");
    }
}
