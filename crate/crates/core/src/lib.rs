//! Keyed watermarking for Verilog RTL.
//!
//! A secret key selects semantics-preserving rewrites of a design (state
//! encodings, renames, literal spellings, statement orders, trigger-gated
//! payload carriers). [`embed`] plans and applies a minimal set of them,
//! [`detect`] scores how many keyed signatures a file carries, and
//! [`netlist`] recovers the payload after logic synthesis. [`eval`] runs the
//! whole loop over a corpus, including rename attacks.
//!
//! ```
//! use rtlmark::detect::{detect, NullModel, Verdict};
//! use rtlmark::embed::{embed, plan, EmbedObjective};
//! use rtlmark::key::WatermarkKey;
//! use rtlmark::payload::encode_payload;
//! use rtlmark::sim::EquivBudget;
//! use rtlmark::verilog::{parse_str, SourceText};
//!
//! let src = "module acc(input clk, input rst, input [3:0] d, output reg [23:0] q);\n\
//!            always @(posedge clk) if (rst) q <= 24'd0; else q <= q + d;\n\
//!            endmodule\n";
//! let key = WatermarkKey::from_seed(7);
//! let payload = encode_payload("model", "dev", &key, 64).unwrap();
//! let ast = parse_str(src).unwrap();
//! let null = NullModel::default();
//! let p = plan(&ast, &key, &payload, &EmbedObjective::default(), &null).unwrap();
//! let doc = embed(&ast, &p, &key, &payload, &EquivBudget::default()).unwrap();
//! let report = detect(&doc.source, &key, &null, 0.95);
//! assert_eq!(report.verdict, Verdict::Watermarked);
//! assert_eq!(detect(&SourceText::new(src, "orig.v"), &key, &null, 0.95).verdict, Verdict::Clean);
//! ```

pub mod config;
pub mod detect;
pub mod embed;
pub mod eval;
pub mod key;
pub mod netlist;
pub mod payload;
pub mod rules;
pub mod sim;
pub mod verilog;
