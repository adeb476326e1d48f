use super::util::{operand_text, rvalue_exprs, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;
use crate::verilog::path::expr_at;

pub struct DeMorgan;

/// (outer negation, dual operator) for a rewritable node.
fn dual(op: BinaryOp) -> Option<(&'static str, BinaryOp)> {
    match op {
        BinaryOp::BitAnd => Some(("~", BinaryOp::BitOr)),
        BinaryOp::BitOr => Some(("~", BinaryOp::BitAnd)),
        BinaryOp::LogAnd => Some(("!", BinaryOp::LogOr)),
        BinaryOp::LogOr => Some(("!", BinaryOp::LogAnd)),
        _ => None,
    }
}

fn is_negation(e: &Expr, neg: &str) -> bool {
    matches!(&e.kind, ExprKind::Unary { op, .. } if op.symbol() == neg)
}

/// Already in De Morgan form: `~(~a | ~b)` and its relatives.
fn is_de_morgan_form(e: &Expr) -> bool {
    let ExprKind::Unary { op, operand } = &e.kind else { return false };
    let ExprKind::Paren(inner) = &operand.kind else { return false };
    let ExprKind::Binary { op: bop, lhs, rhs, .. } = &inner.kind else { return false };
    match dual(*bop) {
        Some((neg, _)) => op.symbol() == neg && is_negation(lhs, neg) && is_negation(rhs, neg),
        None => false,
    }
}

fn rewritable(e: &Expr) -> Option<(&'static str, BinaryOp, &Expr, &Expr)> {
    let ExprKind::Binary { op, lhs, rhs, .. } = &e.kind else { return None };
    let (neg, d) = dual(*op)?;
    if is_negation(lhs, neg) && is_negation(rhs, neg) {
        return None;
    }
    if e.span.is_synthetic() || lhs.span.is_synthetic() || rhs.span.is_synthetic() {
        return None;
    }
    Some((neg, d, lhs, rhs))
}

impl Rule for DeMorgan {
    fn id(&self) -> RuleId {
        RuleId::T9
    }

    fn sites(&self, cx: &Ctx, _: &WatermarkKey) -> Vec<TransformSite> {
        rvalue_exprs(cx.module)
            .into_iter()
            .filter(|(_, e)| rewritable(e).is_some())
            .map(|(p, e)| cx.site(RuleId::T9, SiteTarget::Expr(p), e.span, format!("De Morgan on `{}`", cx.text(e.span)), 0.0))
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, _: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Expr(p) = &site.target else {
            return Err(TransformError::SiteStale("T9 site must address an expression".into()));
        };
        let e = expr_at(cx.module, p).ok_or_else(|| TransformError::SiteStale("expression path no longer resolves".into()))?;
        let (neg, d, lhs, rhs) = rewritable(e).ok_or_else(|| TransformError::SiteStale("not an AND/OR node".into()))?;
        let l = operand_text(lhs, cx.text(lhs.span));
        let r = operand_text(rhs, cx.text(rhs.span));
        let text = format!("{neg}({neg}{l} {} {neg}{r})", d.symbol());
        Ok((vec![Edit::replace(e.span, text)], Vec::new()))
    }

    fn evidence(&self, cx: &Ctx, _: &WatermarkKey) -> (usize, f64) {
        let n = rvalue_exprs(cx.module).into_iter().filter(|(_, e)| is_de_morgan_form(e)).count();
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
    fn and_becomes_negated_or() {
        let ast = parse_str("module m(input a, input b, input c, output y); assign y = a & (b | c); endmodule").unwrap();
        let key = WatermarkKey::from_seed(1);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let sites = applicable_sites(&ast, RuleId::T9, &key);
        assert_eq!(sites.len(), 2);
        let outer = sites.iter().find(|s| s.detail.contains("a & (b | c)")).unwrap();
        let (out, rec) = apply(&ast, outer, &key, &p).unwrap();
        assert_eq!(rec.after, "~(~a | ~(b | c))");
        assert!(signature_present(&out, RuleId::T9, &key).present);
        assert!(!signature_present(&ast, RuleId::T9, &key).present);
    }

    #[test]
    fn logical_operators_use_logical_negation() {
        let ast = parse_str("module m(input a, input b, output y); assign y = a || b; endmodule").unwrap();
        let key = WatermarkKey::from_seed(1);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let site = applicable_sites(&ast, RuleId::T9, &key).remove(0);
        let (_, rec) = apply(&ast, &site, &key, &p).unwrap();
        assert_eq!(rec.after, "!(!a && !b)");
    }
}
