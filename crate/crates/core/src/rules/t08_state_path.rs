use super::fsm::{find_fsms, Fsm};
use super::util::{anchor, insert_line_before, line_indent, line_start, starts_line, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::{suffix_bits, WatermarkKey};
use crate::payload::Payload;
use crate::verilog::ast::*;
use crate::verilog::path::{all_stmts, stmt_at};
use crate::verilog::NumberLiteral;
use num_bigint::BigUint;

pub struct StateTransitionPath;

fn state_name(cx: &Ctx, key: &WatermarkKey) -> String {
    format!("S{}", cx.params(key, RuleId::T8).suffix().to_ascii_uppercase())
}

/// Smallest code that no state uses and that is not one-hot.
fn free_code(f: &Fsm, limit_bits: u32) -> Option<i128> {
    let bits = f.width.min(limit_bits).min(62);
    (0..(1i128 << bits)).find(|v| !f.values.contains(v) && (*v == 0 || v & (v - 1) != 0))
}

/// Spelling of `v` in the style of an existing state constant.
fn literal_like(existing: &Expr, v: i128, width: u32) -> String {
    match existing.as_number() {
        Some(l) if l.base.is_some() => {
            let w = l.width.unwrap_or(width);
            let mut n = NumberLiteral::sized(w, l.base.unwrap_or(crate::verilog::Base::Decimal), &BigUint::from(v as u128));
            n.base_upper = l.base_upper;
            n.to_string()
        }
        _ => v.to_string(),
    }
}

struct Plan {
    edits: Vec<Edit>,
    target: usize,
}

fn plan(cx: &Ctx, f: &Fsm, key: &WatermarkKey) -> Option<Plan> {
    let name = state_name(cx, key);
    if cx.symbols.get(&name).is_some() {
        return None;
    }
    let (case_path, lhs, blocking) = f.transition.clone()?;
    let m = cx.module;
    let last = f.states.last()?;
    let (decl_idx, decl) = f.state_items.iter().find_map(|&i| match &m.items[i].kind {
        ItemKind::Param(p) if p.assigns.iter().any(|a| &a.name.name == last) => Some((i, p)),
        _ => None,
    })?;
    let _ = decl_idx;
    let sample = &decl.assigns[0].value;
    let lit_width = sample.as_number().and_then(|l| l.width).unwrap_or(f.width);
    let code = free_code(f, lit_width)?;
    let tail = decl.assigns.last()?;
    let mut edits = vec![Edit::insert(tail.value.span.end, format!(", {name} = {}", literal_like(sample, code, f.width)))];

    let target = cx.params(key, RuleId::T8).choice("target", f.states.len());
    let op = if blocking { "=" } else { "<=" };
    let arm = format!("{name}: {lhs} {op} {};", f.states[target]);
    let StmtKind::Case(c) = &stmt_at(m, &case_path)?.kind else { return None };
    match c.items.iter().find(|i| i.is_default()) {
        Some(d) => edits.push(insert_line_before(cx.src, anchor(cx.src, &d.comments, d.span.start), &arm)),
        None => {
            let at = anchor(cx.src, &c.end_comments, c.end_span.start);
            if starts_line(cx.src, at) {
                let indent = c.items.last().map_or("", |i| line_indent(cx.src, i.span.start));
                edits.push(Edit::insert(line_start(cx.src, at), format!("{indent}{arm}\n")));
            } else {
                edits.push(Edit::insert(at, format!("{arm} ")));
            }
        }
    }
    Some(Plan { edits, target })
}

impl Rule for StateTransitionPath {
    fn id(&self) -> RuleId {
        RuleId::T8
    }

    fn sites(&self, cx: &Ctx, key: &WatermarkKey) -> Vec<TransformSite> {
        find_fsms(cx)
            .into_iter()
            .filter(|f| plan(cx, f, key).is_some())
            .map(|f| {
                let (p, _, _) = f.transition.clone().expect("plan requires a transition case");
                let span = stmt_at(cx.module, &p).map_or(cx.module.span, |s| s.span);
                cx.site(
                    RuleId::T8,
                    SiteTarget::Signal(f.group[0].clone()),
                    span,
                    format!("detour state for `{}`", f.group[0]),
                    suffix_bits(),
                )
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, _: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Signal(reg) = &site.target else {
            return Err(TransformError::SiteStale("T8 site must name a state register".into()));
        };
        let f = find_fsms(cx)
            .into_iter()
            .find(|f| &f.group[0] == reg)
            .ok_or_else(|| TransformError::SiteStale(format!("no FSM over `{reg}`")))?;
        let p = plan(cx, &f, key).ok_or_else(|| TransformError::SiteStale("no free state code or name".into()))?;
        Ok((p.edits, vec![p.target as u8]))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let name = state_name(cx, key);
        if cx.symbols.get(&name).is_none_or(|s| !s.is_param()) {
            return (0, 0.0);
        }
        let labelled = all_stmts(cx.module).iter().any(|(_, s)| match &s.kind {
            StmtKind::Case(c) => c.items.iter().any(|i| i.labels.iter().any(|l| l.unparen().as_ident() == Some(name.as_str()))),
            _ => false,
        });
        if labelled {
            (1, suffix_bits())
        } else {
            (0, 0.0)
        }
    }
}
