use super::util::{fsm_literal_spans, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::path::{all_exprs, expr_at, ExprPath};
use crate::verilog::{Base, Expr, NumberLiteral};

pub struct BitSeparation;

const GROUPS: [usize; 4] = [2, 3, 5, 6];
const MIN_DIGITS: usize = 5;

fn group(cx: &Ctx, key: &WatermarkKey) -> usize {
    GROUPS[cx.params(key, RuleId::T5).choice("group", GROUPS.len())]
}

fn binary_literals<'a>(cx: &'a Ctx) -> Vec<(ExprPath, &'a Expr, &'a NumberLiteral)> {
    let skip = fsm_literal_spans(cx);
    all_exprs(cx.module)
        .into_iter()
        .filter_map(|(p, e)| e.as_number().map(|l| (p, e, l)))
        .filter(|(_, e, l)| l.base == Some(Base::Binary) && !skip.iter().any(|s| s.start == e.span.start))
        .collect()
}

fn wanted(lit: &NumberLiteral, g: usize) -> Option<Vec<usize>> {
    let n = lit.digits.len();
    (n >= MIN_DIGITS && n > g).then(|| NumberLiteral::grouped_separators(n, g))
}

impl Rule for BitSeparation {
    fn id(&self) -> RuleId {
        RuleId::T5
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        let g = group(cx, key);
        binary_literals(cx)
            .into_iter()
            .filter(|(_, _, l)| wanted(l, g).is_some_and(|w| w != l.separators))
            .map(|(p, e, _)| {
                cx.site(
                    RuleId::T5,
                    SiteTarget::Expr(p),
                    e.span,
                    format!("group `{}` by {g}", cx.text(e.span)),
                    2.0,
                )
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Expr(p) = &site.target else {
            return Err(TransformError::SiteStale("T5 site must address a literal".into()));
        };
        let g = group(cx, key);
        let e = expr_at(cx.module, p).ok_or_else(|| TransformError::SiteStale("literal path no longer resolves".into()))?;
        let lit = e
            .as_number()
            .filter(|l| l.base == Some(Base::Binary))
            .ok_or_else(|| TransformError::SiteStale("not a binary literal".into()))?;
        let seps = wanted(lit, g)
            .filter(|w| *w != lit.separators)
            .ok_or_else(|| TransformError::SiteStale("literal already grouped".into()))?;
        let mut out = lit.clone();
        out.separators = seps;
        Ok((vec![Edit::replace(e.span, out.to_string())], vec![g as u8]))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let g = group(cx, key);
        let n = binary_literals(cx)
            .into_iter()
            .filter(|(_, _, l)| !l.separators.is_empty() && wanted(l, g).is_some_and(|w| w == l.separators))
            .count();
        (n, if n > 0 { 2.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    #[test]
    fn grouping_keeps_value() {
        let src = "module m(input [7:0] a, output [7:0] y); assign y = a & 8'b10100101; endmodule";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(2);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let site = applicable_sites(&ast, RuleId::T5, &key).remove(0);
        let (out, rec) = apply(&ast, &site, &key, &p).unwrap();
        let lit = NumberLiteral::parse(&rec.after).unwrap();
        assert_eq!(lit.value_u128(), Some(0xA5));
        assert_eq!(lit.width, Some(8));
        assert!(rec.after.contains('_'));
        assert!(signature_present(&out, RuleId::T5, &key).present);
    }

    #[test]
    fn short_literals_are_not_sites() {
        let ast = parse_str("module m(input [3:0] a, output [3:0] y); assign y = a & 4'b1010; endmodule").unwrap();
        assert!(applicable_sites(&ast, RuleId::T5, &WatermarkKey::from_seed(2)).is_empty());
    }
}
