use super::util::{fsm_names, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;
use std::collections::BTreeMap;

pub struct BitOrder;

/// Mirror edits for every select of the given vectors, or `None` when some
/// select is not constant or out of range. `ranges` maps name -> (msb, lsb).
fn mirror_selects(cx: &Ctx, ranges: &BTreeMap<String, (i64, i64)>) -> Option<Vec<Edit>> {
    fn visit(cx: &Ctx, e: &Expr, ranges: &BTreeMap<String, (i64, i64)>, out: &mut Vec<Edit>) -> bool {
        let sel = |base: &Expr| base.as_ident().and_then(|n| ranges.get(n)).copied();
        match &e.kind {
            ExprKind::Index { base, index } => {
                if let Some((m, l)) = sel(base) {
                    let Some(i) = cx.symbols.eval(index).map(|v| v as i64) else {
                        return false;
                    };
                    if i < l || i > m {
                        return false;
                    }
                    out.push(Edit::replace(index.span, (m + l - i).to_string()));
                    return true;
                }
            }
            ExprKind::PartSelect { base, msb, lsb } => {
                if let Some((m, l)) = sel(base) {
                    let (Some(h), Some(lo)) = (cx.symbols.eval(msb), cx.symbols.eval(lsb)) else {
                        return false;
                    };
                    let (h, lo) = (h as i64, lo as i64);
                    if h < lo || lo < l || h > m {
                        return false;
                    }
                    out.push(Edit::replace(msb.span, (m + l - h).to_string()));
                    out.push(Edit::replace(lsb.span, (m + l - lo).to_string()));
                    return true;
                }
            }
            _ => {}
        }
        e.children().into_iter().all(|c| visit(cx, c, ranges, out))
    }
    let mut out = Vec::new();
    for item in &cx.module.items {
        if let ItemKind::Always(a) = &item.kind {
            let mut block_ok = true;
            a.body.walk(&mut |s| {
                if let StmtKind::Block(b) = &s.kind {
                    for d in &b.decls {
                        block_ok &= d.exprs().iter().all(|e| e.identifiers().iter().all(|n| !ranges.contains_key(*n)));
                    }
                }
            });
            if !block_ok {
                return None;
            }
        }
        for e in item.exprs() {
            if !visit(cx, e, ranges, &mut out) {
                return None;
            }
        }
    }
    Some(out)
}

type Ranges = BTreeMap<String, (i64, i64)>;

fn candidate(cx: &Ctx, idx: usize, skip: &std::collections::BTreeSet<String>) -> Option<(Ranges, Vec<Edit>)> {
    let item = &cx.module.items[idx];
    let ItemKind::Net(d) = &item.kind else { return None };
    let r = d.range.as_ref()?;
    let mut ranges = BTreeMap::new();
    for n in &d.names {
        let sig = cx.symbols.get(&n.name.name)?;
        if !sig.is_internal() || sig.item != Some(idx) || !cx.is_plain_signal(&sig.name) || skip.contains(&sig.name) {
            return None;
        }
        let (m, l) = sig.range?;
        if m <= l {
            return None;
        }
        ranges.insert(sig.name.clone(), (m, l));
    }
    let mut edits = mirror_selects(cx, &ranges)?;
    edits.push(Edit::replace(r.span, format!("[{}:{}]", cx.text(r.lsb.span), cx.text(r.msb.span))));
    Some((ranges, edits))
}

impl Rule for BitOrder {
    fn id(&self) -> RuleId {
        RuleId::T7
    }

    fn sites(&self, cx: &Ctx, _: &WatermarkKey) -> Vec<TransformSite> {
        let skip = fsm_names(cx);
        (0..cx.module.items.len())
            .filter_map(|idx| {
                let (ranges, _) = candidate(cx, idx, &skip)?;
                let names: Vec<&str> = ranges.keys().map(String::as_str).collect();
                Some(cx.site(
                    RuleId::T7,
                    SiteTarget::Item(idx),
                    cx.module.items[idx].span,
                    format!("reverse bit order of {}", names.join(", ")),
                    0.0,
                ))
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, _: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Item(idx) = site.target else {
            return Err(TransformError::SiteStale("T7 site must address a declaration".into()));
        };
        if idx >= cx.module.items.len() {
            return Err(TransformError::SiteStale("declaration index out of range".into()));
        }
        let (_, edits) = candidate(cx, idx, &fsm_names(cx)).ok_or_else(|| TransformError::SiteStale("declaration no longer reversible".into()))?;
        Ok((edits, Vec::new()))
    }

    fn evidence(&self, cx: &Ctx, _: &WatermarkKey) -> (usize, f64) {
        let n = cx
            .symbols
            .internal_signals()
            .filter(|s| matches!(s.range, Some((m, l)) if m < l))
            .count();
        (n, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    #[test]
    fn selects_are_mirrored() {
        let src = "module m(input [7:0] d, output [3:0] hi, output lo);\n  wire [7:0] t;\n  assign t = d;\n  assign hi = t[7:4];\n  assign lo = t[0];\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(1);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let site = applicable_sites(&ast, RuleId::T7, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        let text = out.source.as_deref().unwrap();
        assert!(text.contains("wire [0:7] t;"), "{text}");
        assert!(text.contains("assign hi = t[0:3];"));
        assert!(text.contains("assign lo = t[7];"));
        assert!(signature_present(&out, RuleId::T7, &key).present);
    }

    #[test]
    fn variable_index_blocks_the_site() {
        let src = "module m(input [7:0] d, input [2:0] i, output y); wire [7:0] t; assign t = d; assign y = t[i]; endmodule";
        let ast = parse_str(src).unwrap();
        assert!(applicable_sites(&ast, RuleId::T7, &WatermarkKey::from_seed(1)).is_empty());
    }
}
