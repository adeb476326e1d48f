use super::util::Edit;
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;

pub struct SensitivityFormat;

fn or_separators(m: &Module) -> Vec<Span> {
    let mut out = Vec::new();
    for item in &m.items {
        if let ItemKind::Always(a) = &item.kind {
            if let EventControl::List {
                separators, separator_spans, ..
            } = &a.sens
            {
                out.extend(separators.iter().zip(separator_spans).filter(|(s, _)| **s == SensSep::Or).map(|(_, sp)| *sp));
            }
        }
    }
    out
}

impl Rule for SensitivityFormat {
    fn id(&self) -> RuleId {
        RuleId::T4
    }

    fn sites(&self, cx: &Ctx, _: &WatermarkKey) -> Vec<TransformSite> {
        let seps = or_separators(cx.module);
        match seps.first() {
            Some(first) => vec![cx.site(
                RuleId::T4,
                SiteTarget::Module,
                *first,
                format!("{} `or` separators", seps.len()),
                0.0,
            )],
            None => Vec::new(),
        }
    }

    fn edits(&self, cx: &Ctx, _: &TransformSite, _: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        Ok((or_separators(cx.module).into_iter().map(|s| Edit::replace(s, ",")).collect(), Vec::new()))
    }

    fn evidence(&self, cx: &Ctx, _: &WatermarkKey) -> (usize, f64) {
        let mut comma = 0;
        for item in &cx.module.items {
            if let ItemKind::Always(a) = &item.kind {
                match a.sens.separator_style() {
                    SeparatorStyle::OrKeyword | SeparatorStyle::Mixed => return (0, 0.0),
                    SeparatorStyle::Comma => comma += 1,
                    SeparatorStyle::Single => {}
                }
            }
        }
        (comma, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    #[test]
    fn or_list_becomes_comma_list() {
        let src = "module m(input clk1, input clk2, input d, output reg q);\nalways @(posedge clk1 or negedge clk2) q <= d;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(1);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        assert!(!signature_present(&ast, RuleId::T4, &key).present);
        let site = applicable_sites(&ast, RuleId::T4, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        assert!(out.source.as_deref().unwrap().contains("@(posedge clk1 , negedge clk2)"));
        assert!(signature_present(&out, RuleId::T4, &key).present);
        assert!(applicable_sites(&out, RuleId::T4, &key).is_empty());
    }
}
