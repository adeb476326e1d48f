use super::util::{expr_rank, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;
use crate::verilog::path::all_stmts;
use std::collections::BTreeSet;

pub struct CondOrder;

fn is_and(op: BinaryOp) -> bool {
    matches!(op, BinaryOp::BitAnd | BinaryOp::LogAnd)
}

/// Conjunction nodes reachable from a condition through parentheses and
/// other conjunctions.
fn conjunctions<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match &e.kind {
        ExprKind::Paren(inner) => conjunctions(inner, out),
        ExprKind::Binary { op, lhs, rhs, .. } if is_and(*op) => {
            out.push(e);
            conjunctions(lhs, out);
            conjunctions(rhs, out);
        }
        _ => {}
    }
}

/// Value-position roots: if conditions, case subjects, assignment sides.
fn roots(m: &Module) -> Vec<&Expr> {
    let mut out = Vec::new();
    for item in &m.items {
        if let ItemKind::Assign(list) = &item.kind {
            out.extend(list.iter().map(|a| &a.rhs));
        }
    }
    for (_, s) in all_stmts(m) {
        match &s.kind {
            StmtKind::If { cond, .. } => out.push(cond),
            StmtKind::Assign(a) => out.push(&a.rhs),
            StmtKind::Case(c) => out.push(&c.subject),
            _ => {}
        }
    }
    out
}

/// Every rankable conjunction in a condition, with its current orientation
/// (true when the left operand ranks first).
fn oriented<'a>(cx: &Ctx, m: &'a Module) -> Vec<(&'a Expr, bool)> {
    let mut nodes = Vec::new();
    for root in roots(m) {
        root.walk(&mut |e| if let ExprKind::Ternary { cond, .. } = &e.kind { conjunctions(cond, &mut nodes) });
    }
    for (_, s) in all_stmts(m) {
        if let StmtKind::If { cond, .. } = &s.kind {
            conjunctions(cond, &mut nodes);
        }
    }
    let mut seen = BTreeSet::new();
    nodes
        .into_iter()
        .filter(|e| !e.span.is_synthetic() && seen.insert(e.span.start * 1_000_003 + e.span.end))
        .filter_map(|e| {
            let ExprKind::Binary { lhs, rhs, .. } = &e.kind else { return None };
            let (a, b) = (expr_rank(cx, lhs)?, expr_rank(cx, rhs)?);
            (a != b).then_some((e, a < b))
        })
        .collect()
}

fn ascending(cx: &Ctx, key: &WatermarkKey) -> bool {
    cx.params(key, RuleId::T14).bit("orientation")
}

/// Source text of `e` with every node in `swap` written with its operands exchanged.
fn render(cx: &Ctx, e: &Expr, swap: &BTreeSet<(usize, usize)>) -> String {
    let key = (e.span.start, e.span.end);
    if let ExprKind::Binary { op, lhs, rhs, op_span } = &e.kind {
        if swap.contains(&key) {
            let l = render(cx, lhs, swap);
            let r = render(cx, rhs, swap);
            let needs_paren = matches!(&lhs.kind, ExprKind::Binary { op: o, .. } if o.precedence() <= op.precedence())
                || matches!(lhs.kind, ExprKind::Ternary { .. });
            let l = if needs_paren { format!("({l})") } else { l };
            return format!("{r} {} {l}", cx.text(*op_span));
        }
    }
    let mut edits = Vec::new();
    for c in e.children() {
        if c.span.is_synthetic() {
            continue;
        }
        let t = render(cx, c, swap);
        if t != cx.text(c.span) {
            edits.push(Edit::replace(Span::new(c.span.start - e.span.start, c.span.end - e.span.start), t));
        }
    }
    let own = cx.text(e.span);
    if edits.is_empty() {
        return own.to_string();
    }
    super::util::splice(own, edits).map(|(t, _, _)| t).unwrap_or_else(|| own.to_string())
}

fn plan(cx: &Ctx, key: &WatermarkKey) -> Vec<Edit> {
    let want = ascending(cx, key);
    let swap: BTreeSet<(usize, usize)> = oriented(cx, cx.module)
        .into_iter()
        .filter(|(_, asc)| *asc != want)
        .map(|(e, _)| (e.span.start, e.span.end))
        .collect();
    if swap.is_empty() {
        return Vec::new();
    }
    let mut edits: Vec<Edit> = Vec::new();
    let mut covered: Vec<Span> = Vec::new();
    let mut all: Vec<&Expr> = roots(cx.module);
    all.sort_by_key(|e| (e.span.start, std::cmp::Reverse(e.span.end)));
    for root in all {
        if root.span.is_synthetic() || covered.iter().any(|c| c.contains(&root.span)) {
            continue;
        }
        let t = render(cx, root, &swap);
        if t != cx.text(root.span) {
            edits.push(Edit::replace(root.span, t));
            covered.push(root.span);
        }
    }
    edits
}

impl Rule for CondOrder {
    fn id(&self) -> RuleId {
        RuleId::T14
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        let edits = plan(cx, key);
        match edits.iter().map(|e| e.span.start).min() {
            Some(start) => vec![cx.site(
                RuleId::T14,
                SiteTarget::Module,
                Span::new(start, start),
                format!("{} conditions reordered", edits.len()),
                0.0,
            )],
            None => Vec::new(),
        }
    }

    fn edits(&self, cx: &Ctx, _: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        Ok((plan(cx, key), vec![ascending(cx, key) as u8]))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let want = ascending(cx, key);
        let nodes = oriented(cx, cx.module);
        if !nodes.is_empty() && nodes.iter().all(|(_, asc)| *asc == want) {
            (nodes.len(), 0.0)
        } else {
            (0, 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    #[test]
    fn conjunctions_follow_key_orientation() {
        let src = "module m(input a, input b, input c, output reg y);\n  always @* if (a && (b & c)) y = 1'b1; else if (c && a) y = b; else y = 1'b0;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        for seed in 0..4 {
            let key = WatermarkKey::from_seed(seed);
            let p = encode_payload("m", "d", &key, 64).unwrap();
            let sites = applicable_sites(&ast, RuleId::T14, &key);
            assert_eq!(sites.len(), 1);
            let (out, _) = apply(&ast, &sites[0], &key, &p).unwrap();
            let ev = signature_present(&out, RuleId::T14, &key);
            assert!(ev.present);
            assert_eq!(ev.strength, 3);
            assert!(applicable_sites(&out, RuleId::T14, &key).is_empty());
        }
    }

    #[test]
    fn nested_chain_keeps_grouping() {
        let src = "module m(input a, input b, input c, output y); assign y = (a && b && c) ? 1'b1 : 1'b0; endmodule";
        let ast = parse_str(src).unwrap();
        let key = (0..50).map(WatermarkKey::from_seed).find(|k| !k.params("m", "T14").bit("orientation")).unwrap();
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let site = applicable_sites(&ast, RuleId::T14, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        assert!(out.source.as_deref().unwrap().contains("(c && (b && a))"), "{}", out.source.as_deref().unwrap());
    }
}
