use super::util::{is_async_reset_block, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;
use crate::verilog::path::{all_stmts, stmt_at, NodePath};

pub struct Ternary;

fn has_comments(s: &Stmt) -> bool {
    let mut any = false;
    s.walk(&mut |x| {
        any |= !x.comments.is_empty();
        if let StmtKind::Block(b) = &x.kind {
            any |= !b.end_comments.is_empty();
        }
    });
    any
}

fn merge(cx: &Ctx, s: &Stmt) -> Option<String> {
    let StmtKind::If {
        cond,
        then_branch,
        else_branch,
    } = &s.kind
    else {
        return None;
    };
    let else_branch = else_branch.as_ref()?;
    if has_comments(then_branch) || has_comments(else_branch) {
        return None;
    }
    let (StmtKind::Assign(a), StmtKind::Assign(b)) = (&then_branch.single().kind, &else_branch.single().kind) else {
        return None;
    };
    if a.lhs != b.lhs || a.blocking != b.blocking {
        return None;
    }
    let wrap = |e: &Expr| {
        let t = cx.text(e.span);
        if matches!(e.kind, ExprKind::Ternary { .. }) {
            format!("({t})")
        } else {
            t.to_string()
        }
    };
    let op = if a.blocking { "=" } else { "<=" };
    Some(format!(
        "{} {op} {} ? {} : {};",
        cx.text(a.lhs.span),
        wrap(cond),
        wrap(&a.rhs),
        cx.text(b.rhs.span)
    ))
}

/// Statement paths that are the reset test of an asynchronous-reset block.
fn reset_tests(cx: &Ctx) -> Vec<NodePath> {
    let mut out = Vec::new();
    for (i, item) in cx.module.items.iter().enumerate() {
        if let ItemKind::Always(a) = &item.kind {
            if is_async_reset_block(a) {
                let mut path = Vec::new();
                let mut s = &a.body;
                while let StmtKind::Block(b) = &s.kind {
                    if b.stmts.len() != 1 {
                        break;
                    }
                    path.push(0);
                    s = &b.stmts[0];
                }
                out.push(NodePath::stmt(i, path));
            }
        }
    }
    out
}

impl Rule for Ternary {
    fn id(&self) -> RuleId {
        RuleId::T11
    }

    fn sites(&self, cx: &Ctx, _: &WatermarkKey) -> Vec<TransformSite> {
        let skip = reset_tests(cx);
        all_stmts(cx.module)
            .into_iter()
            .filter(|(p, s)| !skip.contains(p) && merge(cx, s).is_some())
            .map(|(p, s)| cx.site(RuleId::T11, SiteTarget::Stmt(p), s.span, "if/else to ternary".into(), 0.0))
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, _: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Stmt(p) = &site.target else {
            return Err(TransformError::SiteStale("T11 site must address a statement".into()));
        };
        if reset_tests(cx).contains(p) {
            return Err(TransformError::SiteStale("reset test is not merged".into()));
        }
        let s = stmt_at(cx.module, p).ok_or_else(|| TransformError::SiteStale("statement path no longer resolves".into()))?;
        let text = merge(cx, s).ok_or_else(|| TransformError::SiteStale("not a two-armed single-target if".into()))?;
        Ok((vec![Edit::replace(s.span, text)], Vec::new()))
    }

    fn evidence(&self, cx: &Ctx, _: &WatermarkKey) -> (usize, f64) {
        let n = all_stmts(cx.module)
            .iter()
            .filter(|(_, s)| matches!(&s.kind, StmtKind::Assign(a) if matches!(a.rhs.kind, ExprKind::Ternary { .. })))
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
    fn if_else_becomes_ternary() {
        let src = "module m(input s, input a, input b, output reg y);\n  always @* begin\n    if (s) y = a;\n    else begin\n      y = b;\n    end\n  end\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let key = WatermarkKey::from_seed(1);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let site = applicable_sites(&ast, RuleId::T11, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        assert!(out.source.as_deref().unwrap().contains("    y = s ? a : b;\n"));
        assert!(signature_present(&out, RuleId::T11, &key).present);
    }

    #[test]
    fn async_reset_test_is_kept() {
        let src = "module m(input clk, input rst, input d, output reg q);\n  always @(posedge clk or posedge rst) if (rst) q <= 1'b0; else q <= d;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        assert!(applicable_sites(&ast, RuleId::T11, &WatermarkKey::from_seed(1)).is_empty());
    }
}
