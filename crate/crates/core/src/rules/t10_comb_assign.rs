use super::util::Edit;
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;
use crate::verilog::SignalKind;

pub struct CombAssign;

/// Edits turning the single continuous assignment at `idx` into an
/// `always @*` block, or `None` if the item does not qualify.
fn plan(cx: &Ctx, idx: usize) -> Option<Vec<Edit>> {
    let m = cx.module;
    let item = &m.items[idx];
    let ItemKind::Assign(list) = &item.kind else { return None };
    let [a] = list.as_slice() else { return None };
    let y = a.lhs.as_ident()?;
    let rhs_ids = a.rhs.identifiers();
    if rhs_ids.is_empty() || rhs_ids.contains(&y) || !cx.is_plain_signal(y) {
        return None;
    }
    if cx.symbols.drivers_of(y).len() != 1 {
        return None;
    }
    let sig = cx.symbols.get(y)?;
    let decl_edit = match sig.kind {
        SignalKind::Wire => {
            let decl = &m.items[sig.item?];
            let ItemKind::Net(d) = &decl.kind else { return None };
            if d.names.len() != 1 || d.names[0].init.is_some() {
                return None;
            }
            Edit::replace(d.kind_span, "reg")
        }
        SignalKind::Output => {
            let pos = m.ports.iter().position(|p| p.name.name == y)?;
            let port = &m.ports[pos];
            let shared = m.ports.get(pos + 1).is_some_and(|n| !n.explicit);
            if !port.explicit || port.net.is_some() || shared {
                return None;
            }
            Edit::insert(port.span.start + "output".len(), " reg")
        }
        _ => return None,
    };
    let text = format!("always @* {} = {};", cx.text(a.lhs.span), cx.text(a.rhs.span));
    Some(vec![decl_edit, Edit::replace(item.span, text)])
}

impl Rule for CombAssign {
    fn id(&self) -> RuleId {
        RuleId::T10
    }

    fn sites(&self, cx: &Ctx, _: &WatermarkKey) -> Vec<TransformSite> {
        (0..cx.module.items.len())
            .filter(|&i| plan(cx, i).is_some())
            .map(|i| {
                let item = &cx.module.items[i];
                cx.site(RuleId::T10, SiteTarget::Item(i), item.span, format!("`{}` to always @*", cx.text(item.span)), 0.0)
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, _: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Item(idx) = site.target else {
            return Err(TransformError::SiteStale("T10 site must address an item".into()));
        };
        let edits = (idx < cx.module.items.len())
            .then(|| plan(cx, idx))
            .flatten()
            .ok_or_else(|| TransformError::SiteStale("assignment no longer convertible".into()))?;
        Ok((edits, Vec::new()))
    }

    fn evidence(&self, cx: &Ctx, _: &WatermarkKey) -> (usize, f64) {
        let n = cx
            .module
            .items
            .iter()
            .filter(|item| match &item.kind {
                ItemKind::Always(a) => {
                    matches!(a.sens, EventControl::Star { .. })
                        && matches!(&a.body.single().kind, StmtKind::Assign(pa) if pa.blocking && pa.lhs.as_ident().is_some())
                }
                _ => false,
            })
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
    fn wire_and_output_forms() {
        let src = "module m(input a, input b, output y);\n  wire t;\n  assign t = a ^ b;\n  assign y = t & a;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(1);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let sites = applicable_sites(&ast, RuleId::T10, &key);
        assert_eq!(sites.len(), 2);
        let (out, _) = apply(&ast, &sites[0], &key, &p).unwrap();
        let text = out.source.as_deref().unwrap();
        assert!(text.contains("  reg t;\n  always @* t = a ^ b;"), "{text}");
        let (out2, _) = apply(&ast, &sites[1], &key, &p).unwrap();
        let text2 = out2.source.as_deref().unwrap();
        assert!(text2.contains("output reg y") && text2.contains("always @* y = t & a;"), "{text2}");
        assert!(signature_present(&out2, RuleId::T10, &key).present);
    }

    #[test]
    fn constant_assignments_are_skipped() {
        let ast = parse_str("module m(output y); assign y = 1'b0; endmodule").unwrap();
        assert!(applicable_sites(&ast, RuleId::T10, &WatermarkKey::from_seed(1)).is_empty());
    }
}
