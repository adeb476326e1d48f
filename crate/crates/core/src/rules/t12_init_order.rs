use super::t01_state_encoding::log2_factorial;
use super::util::{rank_key, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::verilog::ast::*;
use crate::verilog::path::{all_stmts, stmt_at, NodePath};
use std::collections::BTreeSet;

pub struct InitOrder;

struct Run {
    block: NodePath,
    start: usize,
    len: usize,
}

/// Segments of a block made of same-kind whole-variable assignments. A
/// segment is a run only if its statements are independent, so the split
/// does not depend on the order inside it.
fn runs(cx: &Ctx) -> Vec<Run> {
    let mut out = Vec::new();
    for (path, s) in all_stmts(cx.module) {
        let StmtKind::Block(b) = &s.kind else { continue };
        let mut i = 0;
        while i < b.stmts.len() {
            let kind = |s: &Stmt| match &s.kind {
                StmtKind::Assign(a) if a.lhs.as_ident().is_some() && s.comments.is_empty() => Some(a.blocking),
                _ => None,
            };
            let Some(k) = kind(&b.stmts[i]) else {
                i += 1;
                continue;
            };
            let mut j = i + 1;
            while j < b.stmts.len() && kind(&b.stmts[j]) == Some(k) {
                j += 1;
            }
            if j - i >= 2 && independent(cx, &b.stmts[i..j], k) {
                out.push(Run {
                    block: path.clone(),
                    start: i,
                    len: j - i,
                });
            }
            i = j;
        }
    }
    out
}

fn independent(cx: &Ctx, stmts: &[Stmt], blocking: bool) -> bool {
    let assigns: Vec<&ProcAssign> = stmts
        .iter()
        .filter_map(|s| match &s.kind {
            StmtKind::Assign(a) => Some(a),
            _ => None,
        })
        .collect();
    let targets: Vec<&str> = assigns.iter().filter_map(|a| a.lhs.as_ident()).collect();
    let distinct: BTreeSet<&str> = targets.iter().copied().collect();
    if distinct.len() != targets.len() || targets.iter().any(|t| rank_key(cx, t).is_none()) {
        return false;
    }
    !blocking || assigns.iter().all(|a| a.rhs.identifiers().iter().all(|n| !distinct.contains(n)))
}

fn score(cx: &Ctx, key: &WatermarkKey, target: &str) -> u64 {
    let (class, idx) = rank_key(cx, target).expect("run targets have ranks");
    let b = cx.params(key, RuleId::T12).bytes(&format!("rank/{class}/{idx}"), 8);
    u64::from_be_bytes(b.try_into().expect("eight bytes"))
}

fn run_stmts<'a>(cx: &'a Ctx, r: &Run) -> Option<&'a [Stmt]> {
    match &stmt_at(cx.module, &r.block)?.kind {
        StmtKind::Block(b) => b.stmts.get(r.start..r.start + r.len),
        _ => None,
    }
}

fn target(s: &Stmt) -> &str {
    match &s.kind {
        StmtKind::Assign(a) => a.lhs.as_ident().unwrap_or_default(),
        _ => "",
    }
}

/// Indices into the run in keyed order.
fn desired(cx: &Ctx, key: &WatermarkKey, stmts: &[Stmt]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..stmts.len()).collect();
    idx.sort_by_key(|&i| score(cx, key, target(&stmts[i])));
    idx
}

impl Rule for InitOrder {
    fn id(&self) -> RuleId {
        RuleId::T12
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        runs(cx)
            .into_iter()
            .filter_map(|r| {
                let stmts = run_stmts(cx, &r)?;
                let order = desired(cx, key, stmts);
                if order.iter().enumerate().all(|(i, &j)| i == j) {
                    return None;
                }
                let span = stmts[0].span.join(stmts[stmts.len() - 1].span);
                Some(cx.site(
                    RuleId::T12,
                    SiteTarget::Run {
                        block: r.block,
                        start: r.start,
                        len: r.len,
                    },
                    span,
                    format!("reorder {} assignments", r.len),
                    log2_factorial(r.len),
                ))
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Run { block, start, len } = &site.target else {
            return Err(TransformError::SiteStale("T12 site must address a run".into()));
        };
        let run = runs(cx)
            .into_iter()
            .find(|r| &r.block == block && r.start == *start && r.len == *len)
            .ok_or_else(|| TransformError::SiteStale("run no longer independent".into()))?;
        let stmts = run_stmts(cx, &run).ok_or_else(|| TransformError::SiteStale("run path no longer resolves".into()))?;
        let order = desired(cx, key, stmts);
        let edits: Vec<Edit> = stmts
            .iter()
            .zip(&order)
            .filter(|(s, &j)| s.span.start != stmts[j].span.start)
            .map(|(s, &j)| Edit::replace(s.span, cx.text(stmts[j].span)))
            .collect();
        Ok((edits, order.iter().map(|&i| i as u8).collect()))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let mut count = 0;
        let mut bits: f64 = 0.0;
        for r in runs(cx) {
            let Some(stmts) = run_stmts(cx, &r) else { continue };
            let order = desired(cx, key, stmts);
            if order.iter().enumerate().all(|(i, &j)| i == j) {
                count += 1;
                bits = bits.max(log2_factorial(r.len));
            }
        }
        (count, bits)
    }
}
