use super::util::{anchor, fsm_names, insert_line_before, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::{suffix_bits, WatermarkKey};
use crate::payload::Payload;
use crate::verilog::ast::*;
use std::collections::BTreeMap;

pub struct ParamWidth;

/// Literal range bounds of internal declarations, grouped by value:
/// value -> [(item index, bound span)].
fn bounds(cx: &Ctx) -> BTreeMap<i64, Vec<(usize, Span)>> {
    let skip = fsm_names(cx);
    let mut out: BTreeMap<i64, Vec<(usize, Span)>> = BTreeMap::new();
    for (idx, item) in cx.module.items.iter().enumerate() {
        let ItemKind::Net(d) = &item.kind else { continue };
        let Some(r) = &d.range else { continue };
        let internal = d.names.iter().all(|n| {
            !skip.contains(&n.name.name) && cx.symbols.get(&n.name.name).is_some_and(|s| s.is_internal() && s.item == Some(idx))
        });
        if !internal {
            continue;
        }
        for b in [&r.msb, &r.lsb] {
            if let ExprKind::Number(lit) = &b.kind {
                if lit.base.is_none() && lit.width.is_none() {
                    if let Some(v) = lit.value_u128().filter(|v| *v >= 1 && *v < 1 << 20) {
                        out.entry(v as i64).or_default().push((idx, b.span));
                    }
                }
            }
        }
    }
    out.retain(|_, v| {
        let mut items: Vec<usize> = v.iter().map(|(i, _)| *i).collect();
        items.dedup();
        items.len() >= 2
    });
    out
}

fn param_name(n: i64, sfx: &str) -> String {
    format!("width{n}{sfx}")
}

impl Rule for ParamWidth {
    fn id(&self) -> RuleId {
        RuleId::T2
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        let sfx = cx.params(key, RuleId::T2).suffix();
        bounds(cx)
            .into_iter()
            .filter(|(n, _)| cx.symbols.get(&param_name(*n, &sfx)).is_none())
            .map(|(n, v)| {
                let span = cx.module.items[v[0].0].span;
                cx.site(
                    RuleId::T2,
                    SiteTarget::Bound(n),
                    span,
                    format!("bound {n} in {} declarations", v.len()),
                    suffix_bits(),
                )
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Bound(n) = site.target else {
            return Err(TransformError::SiteStale("T2 site must name a bound".into()));
        };
        let sfx = cx.params(key, RuleId::T2).suffix();
        let name = param_name(n, &sfx);
        if cx.symbols.get(&name).is_some() {
            return Err(TransformError::SiteStale(format!("`{name}` already declared")));
        }
        let groups = bounds(cx);
        let uses = groups
            .get(&n)
            .ok_or_else(|| TransformError::SiteStale(format!("bound {n} no longer shared")))?;
        let first = &cx.module.items[uses[0].0];
        let at = anchor(cx.src, &first.comments, first.span.start);
        let mut edits = vec![insert_line_before(cx.src, at, &format!("localparam {name} = {n};"))];
        edits.extend(uses.iter().map(|(_, s)| Edit::replace(*s, name.clone())));
        Ok((edits, sfx.into_bytes()))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let sfx = cx.params(key, RuleId::T2).suffix();
        let mut count = 0;
        for item in &cx.module.items {
            let ItemKind::Param(p) = &item.kind else { continue };
            for a in &p.assigns {
                let Some(digits) = a.name.name.strip_prefix("width").and_then(|r| r.strip_suffix(sfx.as_str())) else {
                    continue;
                };
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    continue;
                }
                let used = cx
                    .module
                    .items
                    .iter()
                    .filter(|it| match &it.kind {
                        ItemKind::Net(d) => d
                            .range
                            .as_ref()
                            .is_some_and(|r| [&r.msb, &r.lsb].iter().any(|b| b.as_ident() == Some(a.name.name.as_str()))),
                        _ => false,
                    })
                    .count();
                if used >= 2 {
                    count += 1;
                }
            }
        }
        (count, if count > 0 { suffix_bits() } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    #[test]
    fn shared_bound_becomes_parameter() {
        let src = "module m(input clk, input [7:0] d, output [7:0] q);\n    // regs\n    reg [7:0] a;\n    wire [7:0] b;\n    assign b = d;\n    always @(posedge clk) a <= b;\n    assign q = a;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(9);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let sites = applicable_sites(&ast, RuleId::T2, &key);
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].target, SiteTarget::Bound(7));
        let (out, _) = apply(&ast, &sites[0], &key, &p).unwrap();
        let text = out.source.as_deref().unwrap();
        let sfx = key.params("m", "T2").suffix();
        assert!(text.contains(&format!("    localparam width7{sfx} = 7;\n    // regs\n    reg [width7{sfx}:0] a;")), "{text}");
        assert!(signature_present(&out, RuleId::T2, &key).present);
        assert!(!signature_present(&out, RuleId::T2, &WatermarkKey::from_seed(10)).present);
    }

    #[test]
    fn single_declaration_is_not_a_site() {
        let ast = parse_str("module m(input [3:0] x, output y); wire [3:0] t; assign t = x; assign y = ^t; endmodule").unwrap();
        assert!(applicable_sites(&ast, RuleId::T2, &WatermarkKey::from_seed(1)).is_empty());
    }
}
