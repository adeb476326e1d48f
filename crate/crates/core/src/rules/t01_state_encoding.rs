use super::fsm::{find_fsms, Fsm};
use super::util::Edit;
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;
use crate::verilog::{Base, NumberLiteral};
use num_bigint::BigUint;

pub struct StateEncoding;

pub(crate) fn log2_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).log2()).sum()
}

fn one_hot_literal(n: usize, bit: usize) -> String {
    let base = if n > 32 { Base::Hexadecimal } else { Base::Binary };
    NumberLiteral::sized(n as u32, base, &(BigUint::from(1u8) << bit)).to_string()
}

fn targets(f: &Fsm, key: &WatermarkKey, cx: &Ctx) -> Vec<i128> {
    let perm = cx.params(key, RuleId::T1).permutation(f.states.len());
    perm.iter().map(|&b| 1i128 << b).collect()
}

impl Rule for StateEncoding {
    fn id(&self) -> RuleId {
        RuleId::T1
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        find_fsms(cx)
            .into_iter()
            .filter(|f| targets(f, key, cx) != f.values || f.width as usize != f.states.len())
            .map(|f| {
                let span = cx.module.items[f.state_items[0]].span;
                cx.site(
                    RuleId::T1,
                    SiteTarget::Signal(f.group[0].clone()),
                    span,
                    format!("{} states of `{}` to one-hot", f.states.len(), f.group[0]),
                    log2_factorial(f.states.len()),
                )
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Signal(reg) = &site.target else {
            return Err(TransformError::SiteStale("T1 site must name a state register".into()));
        };
        let f = find_fsms(cx)
            .into_iter()
            .find(|f| &f.group[0] == reg)
            .ok_or_else(|| TransformError::SiteStale(format!("no FSM over `{reg}`")))?;
        let n = f.states.len();
        let perm = cx.params(key, RuleId::T1).permutation(n);
        let range = format!("[{}:0]", n - 1);
        let mut edits = Vec::new();
        for &idx in &f.state_items {
            let ItemKind::Param(p) = &cx.module.items[idx].kind else { continue };
            if let Some(r) = &p.range {
                edits.push(Edit::replace(r.span, range.clone()));
            }
            for a in &p.assigns {
                let i = f.states.iter().position(|s| *s == a.name.name).expect("state item holds states only");
                edits.push(Edit::replace(a.value.span, one_hot_literal(n, perm[i])));
            }
        }
        for &idx in &f.group_items {
            let ItemKind::Net(d) = &cx.module.items[idx].kind else { continue };
            match &d.range {
                Some(r) => edits.push(Edit::replace(r.span, range.clone())),
                None => edits.push(Edit::insert(d.kind_span.end, format!(" {range}"))),
            }
        }
        Ok((edits, perm.iter().map(|&b| b as u8).collect()))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let mut count = 0;
        let mut bits: f64 = 0.0;
        for f in find_fsms(cx) {
            let hot: Vec<i128> = f.values.iter().copied().filter(|v| *v > 0 && v & (v - 1) == 0).collect();
            let k = hot.len();
            if k < 2 || f.width as usize != k {
                continue;
            }
            let perm = cx.params(key, RuleId::T1).permutation(k);
            if hot.iter().zip(&perm).all(|(v, &b)| *v == 1i128 << b) {
                count += 1;
                bits = bits.max(log2_factorial(k));
            }
        }
        (count, bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    pub(crate) const FSM: &str = "module ctl(input clk, input rst, input go, output busy);\n\
        localparam IDLE = 2'b00, RUN = 2'b10, STOP = 2'b11;\n\
        reg [1:0] state;\n\
        always @(posedge clk) begin\n\
        \x20   if (rst) state <= IDLE;\n\
        \x20   else case (state)\n\
        \x20       IDLE: if (go) state <= RUN;\n\
        \x20       RUN: state <= STOP;\n\
        \x20       default: state <= IDLE;\n\
        \x20   endcase\n\
        end\n\
        assign busy = state == RUN;\nendmodule\n";

    #[test]
    fn one_hot_with_widened_register() {
        let ast = parse_str(FSM).unwrap();
        let key = WatermarkKey::from_seed(4);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let sites = applicable_sites(&ast, RuleId::T1, &key);
        assert_eq!(sites.len(), 1);
        let (out, rec) = apply(&ast, &sites[0], &key, &p).unwrap();
        let text = out.source.as_deref().unwrap();
        assert!(text.contains("reg [2:0] state;"), "{text}");
        let m = &out.modules[0];
        let cx = Ctx::new(&out, text, m);
        let vals: Vec<i128> = ["IDLE", "RUN", "STOP"].iter().map(|s| cx.symbols.param_value(s).unwrap()).collect();
        for v in &vals {
            assert_eq!(v.count_ones(), 1);
            assert!(*v < 8);
        }
        assert_ne!(vals[0], vals[1]);
        assert_ne!(vals[1], vals[2]);
        assert_ne!(vals[0], vals[2]);
        assert!(rec.after.contains("3'b"));
        assert!(signature_present(&out, RuleId::T1, &key).present);
        assert!(applicable_sites(&out, RuleId::T1, &key).is_empty());
    }

    #[test]
    fn run_stop_become_three_bit_one_hot() {
        // Find a key whose permutation puts RUN on bit 1 and STOP on bit 2.
        let ast = parse_str(FSM).unwrap();
        let key = (0..200)
            .map(WatermarkKey::from_seed)
            .find(|k| k.params("ctl", "T1").permutation(3) == vec![0, 1, 2])
            .unwrap();
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let site = applicable_sites(&ast, RuleId::T1, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        let text = out.source.as_deref().unwrap();
        assert!(text.contains("RUN = 3'b010, STOP = 3'b100"), "{text}");
    }

    #[test]
    fn no_site_without_fsm() {
        let ast = parse_str("module add(input [3:0] a, input [3:0] b, output [4:0] s); assign s = a + b; endmodule").unwrap();
        assert!(applicable_sites(&ast, RuleId::T1, &WatermarkKey::from_seed(1)).is_empty());
    }

    #[test]
    fn factorial_bits() {
        assert!((log2_factorial(3) - 6f64.log2()).abs() < 1e-12);
        assert_eq!(log2_factorial(1), 0.0);
    }
}
