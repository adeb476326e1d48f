use super::util::{fsm_literal_spans, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::path::{all_exprs, expr_at, ExprPath};
use crate::verilog::{Base, Expr, NumberLiteral};

pub struct BaseConversion;

const BASES: [Base; 3] = [Base::Binary, Base::Octal, Base::Hexadecimal];

fn preference(cx: &Ctx, key: &WatermarkKey) -> Vec<Base> {
    cx.params(key, RuleId::T3).permutation(3).into_iter().map(|i| BASES[i]).collect()
}

fn target_base(pref: &[Base], lit: &NumberLiteral) -> Option<Base> {
    let w = lit.width?;
    pref.iter().copied().find(|b| *b != Base::Binary || w <= 16)
}

/// Canonical respelling of `lit` in the key's base, if `lit` qualifies.
fn canonical(pref: &[Base], lit: &NumberLiteral) -> Option<NumberLiteral> {
    if lit.base.is_none() || lit.width.is_none_or(|w| w < 2) || lit.has_xz() {
        return None;
    }
    let mut c = lit.rebased(target_base(pref, lit)?)?;
    c.base_upper = lit.base_upper;
    Some(c)
}

fn matches(lit: &NumberLiteral, c: &NumberLiteral) -> bool {
    lit.base == c.base && lit.digits.eq_ignore_ascii_case(&c.digits)
}

fn literals<'a>(cx: &'a Ctx) -> Vec<(ExprPath, &'a Expr, &'a NumberLiteral)> {
    let skip = fsm_literal_spans(cx);
    all_exprs(cx.module)
        .into_iter()
        .filter_map(|(p, e)| e.as_number().map(|l| (p, e, l)))
        .filter(|(_, e, _)| !skip.iter().any(|s| s.start == e.span.start))
        .collect()
}

impl Rule for BaseConversion {
    fn id(&self) -> RuleId {
        RuleId::T3
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        let pref = preference(cx, key);
        literals(cx)
            .into_iter()
            .filter_map(|(p, e, lit)| {
                let c = canonical(&pref, lit)?;
                if matches(lit, &c) {
                    return None;
                }
                Some(cx.site(
                    RuleId::T3,
                    SiteTarget::Expr(p),
                    e.span,
                    format!("{} -> {}", cx.text(e.span), c),
                    3f64.log2(),
                ))
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Expr(p) = &site.target else {
            return Err(TransformError::SiteStale("T3 site must address a literal".into()));
        };
        let pref = preference(cx, key);
        let e = expr_at(cx.module, p).ok_or_else(|| TransformError::SiteStale("literal path no longer resolves".into()))?;
        let lit = e.as_number().ok_or_else(|| TransformError::SiteStale("not a literal".into()))?;
        let c = canonical(&pref, lit).filter(|c| !matches(lit, c)).ok_or_else(|| TransformError::SiteStale("literal already in key base".into()))?;
        Ok((vec![Edit::replace(e.span, c.to_string())], vec![c.base.map_or(0, |b| b.radix() as u8)]))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let pref = preference(cx, key);
        let n = literals(cx)
            .into_iter()
            .filter(|(_, _, lit)| canonical(&pref, lit).is_some_and(|c| matches(lit, &c)))
            .count();
        (n, if n > 0 { 3f64.log2() } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    #[test]
    fn respelling_preserves_width_and_value() {
        let src = "module m(input [7:0] a, output [7:0] y); assign y = a ^ 8'd165; endmodule";
        let ast = parse_str(src).unwrap();
        for seed in 0..6 {
            let key = WatermarkKey::from_seed(seed);
            let p = encode_payload("m", "d", &key, 64).unwrap();
            let sites = applicable_sites(&ast, RuleId::T3, &key);
            assert_eq!(sites.len(), 1);
            let (out, rec) = apply(&ast, &sites[0], &key, &p).unwrap();
            let lit = NumberLiteral::parse(&rec.after).unwrap();
            assert_eq!(lit.width, Some(8));
            assert_eq!(lit.value_u128(), Some(165));
            assert!(["8'b10100101", "8'o245", "8'hA5"].contains(&rec.after.as_str()), "{}", rec.after);
            assert!(signature_present(&out, RuleId::T3, &key).present);
        }
    }

    #[test]
    fn wide_literals_skip_binary() {
        let lit = NumberLiteral::parse("32'd7").unwrap();
        let c = canonical(&[Base::Binary, Base::Octal, Base::Hexadecimal], &lit).unwrap();
        assert_eq!(c.base, Some(Base::Octal));
        assert_eq!(c.to_string(), "32'o00000000007");
    }
}
