use super::t06_rename;
use super::util::{insert_line_before, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::{suffix_bits, WatermarkKey};
use crate::payload::Payload;
use crate::verilog::ast::*;

pub struct AddComments;

/// Expected comment for the single-name declaration at `idx`.
fn expected(cx: &Ctx, key: &WatermarkKey, idx: usize) -> Option<String> {
    let ItemKind::Net(d) = &cx.module.items[idx].kind else { return None };
    let [n] = d.names.as_slice() else { return None };
    let name = &n.name.name;
    let sig = cx.symbols.get(name)?;
    if !sig.is_internal() || sig.item != Some(idx) || !cx.is_plain_signal(name) {
        return None;
    }
    let renamed = t06_rename::suffix(cx, key);
    let base = name.strip_suffix(renamed.as_str()).filter(|b| !b.is_empty()).unwrap_or(name);
    let kind = match d.kind {
        NetKind::Reg => "Register",
        NetKind::Wire => "Wire",
    };
    let tag = cx.params(key, RuleId::T13).suffix();
    Some(format!("//{kind} signal {base}{tag}"))
}

fn has_expected(item: &Item, text: &str) -> bool {
    item.comments.last().is_some_and(|c| c.text.trim_end() == text)
}

impl Rule for AddComments {
    fn id(&self) -> RuleId {
        RuleId::T13
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        (0..cx.module.items.len())
            .filter_map(|i| {
                let text = expected(cx, key, i)?;
                let item = &cx.module.items[i];
                (!has_expected(item, &text)).then(|| cx.site(RuleId::T13, SiteTarget::Item(i), item.span, format!("comment `{text}`"), suffix_bits()))
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Item(idx) = site.target else {
            return Err(TransformError::SiteStale("T13 site must address a declaration".into()));
        };
        let text = (idx < cx.module.items.len())
            .then(|| expected(cx, key, idx))
            .flatten()
            .ok_or_else(|| TransformError::SiteStale("not a single-signal declaration".into()))?;
        let item = &cx.module.items[idx];
        if has_expected(item, &text) {
            return Err(TransformError::SiteStale("comment already present".into()));
        }
        Ok((vec![insert_line_before(cx.src, item.span.start, &text)], text.into_bytes()))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let n = (0..cx.module.items.len())
            .filter(|&i| expected(cx, key, i).is_some_and(|t| has_expected(&cx.module.items[i], &t)))
            .count();
        (n, if n > 0 { suffix_bits() } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    #[test]
    fn keyed_comment_precedes_declaration() {
        let src = "module m(input a, output y);\n    wire t; // trailing\n    reg r;\n    assign t = a;\n    always @* r = t;\n    assign y = r;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(13);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let sites = applicable_sites(&ast, RuleId::T13, &key);
        assert_eq!(sites.len(), 2);
        let (out, rec) = apply(&ast, &sites[1], &key, &p).unwrap();
        let tag = key.params("m", "T13").suffix();
        assert_eq!(rec.after, format!("    //Register signal r{tag}\n"));
        assert!(out.source.as_deref().unwrap().contains(&format!("// trailing\n    //Register signal r{tag}\n    reg r;")));
        assert!(signature_present(&out, RuleId::T13, &key).present);
        assert!(!signature_present(&out, RuleId::T13, &WatermarkKey::from_seed(14)).present);
    }

    #[test]
    fn comment_follows_the_rename() {
        let src = "module m(input a, output y);\n    wire t;\n    assign t = a;\n    assign y = t;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(13);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let c = applicable_sites(&ast, RuleId::T13, &key).remove(0);
        let (ast, _) = apply(&ast, &c, &key, &p).unwrap();
        let r = applicable_sites(&ast, RuleId::T6, &key).remove(0);
        let (ast, _) = apply(&ast, &r, &key, &p).unwrap();
        assert!(signature_present(&ast, RuleId::T13, &key).present);
        assert!(signature_present(&ast, RuleId::T6, &key).present);
    }
}
