use super::util::{ident_spans, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::{suffix_bits, WatermarkKey};
use crate::payload::Payload;
use crate::verilog::is_keyword;

pub struct VarRename;

pub(crate) fn suffix(cx: &Ctx, key: &WatermarkKey) -> String {
    cx.params(key, RuleId::T6).suffix()
}

fn candidates<'a>(cx: &'a Ctx, sfx: &str) -> Vec<&'a crate::verilog::Signal> {
    cx.symbols
        .internal_signals()
        .filter(|s| cx.is_plain_signal(&s.name) && !s.name.starts_with('\\') && !s.name.ends_with(sfx))
        .filter(|s| {
            let new = format!("{}{sfx}", s.name);
            cx.symbols.get(&new).is_none() && !is_keyword(&new)
        })
        .collect()
}

impl Rule for VarRename {
    fn id(&self) -> RuleId {
        RuleId::T6
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        let sfx = suffix(cx, key);
        candidates(cx, &sfx)
            .into_iter()
            .map(|s| {
                cx.site(
                    RuleId::T6,
                    SiteTarget::Signal(s.name.clone()),
                    s.span,
                    format!("{} -> {}{sfx}", s.name, s.name),
                    suffix_bits(),
                )
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Signal(name) = &site.target else {
            return Err(TransformError::SiteStale("T6 site must name a signal".into()));
        };
        let sfx = suffix(cx, key);
        if !candidates(cx, &sfx).iter().any(|s| &s.name == name) {
            return Err(TransformError::SiteStale(format!("`{name}` is not renameable")));
        }
        let new = format!("{name}{sfx}");
        let edits = ident_spans(cx.module, name).into_iter().map(|s| Edit::replace(s, new.clone())).collect();
        Ok((edits, sfx.into_bytes()))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let sfx = suffix(cx, key);
        let n = cx
            .symbols
            .internal_signals()
            .filter(|s| s.name.len() > sfx.len() && s.name.ends_with(&sfx))
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
    fn rename_touches_declaration_and_every_use() {
        let src = "module m(input clk, input reset, input d, output q);\n  wire rst;\n  reg r;\n  assign rst = ~reset;\n  always @(posedge clk or posedge rst) if (rst) r <= 1'b0; else r <= d;\n  assign q = r;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(3);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let sites = applicable_sites(&ast, RuleId::T6, &key);
        assert_eq!(sites.len(), 2);
        let site = sites.iter().find(|s| s.target == SiteTarget::Signal("rst".into())).unwrap();
        let (out, _) = apply(&ast, site, &key, &p).unwrap();
        let text = out.source.as_deref().unwrap();
        let sfx = key.params("m", "T6").suffix();
        let new = format!("rst{sfx}");
        assert_eq!(text.matches(new.as_str()).count(), 4);
        assert!(!text.contains("rst;"));
        assert!(signature_present(&out, RuleId::T6, &key).present);
        assert!(!signature_present(&out, RuleId::T6, &WatermarkKey::from_seed(4)).present);
    }

    #[test]
    fn ports_are_never_renamed() {
        let ast = parse_str("module m(input a, output y); assign y = a; endmodule").unwrap();
        assert!(applicable_sites(&ast, RuleId::T6, &WatermarkKey::from_seed(3)).is_empty());
    }
}
