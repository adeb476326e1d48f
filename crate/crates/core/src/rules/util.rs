use super::Ctx;
use crate::verilog::ast::*;
use crate::verilog::path::{all_exprs, stmt_at, ExprPath};

/// Replace `span` with `text`; an empty span is an insertion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edit {
    pub span: Span,
    pub text: String,
}

impl Edit {
    pub fn replace(span: Span, text: impl Into<String>) -> Edit {
        Edit { span, text: text.into() }
    }

    pub fn insert(at: usize, text: impl Into<String>) -> Edit {
        Edit {
            span: Span::new(at, at),
            text: text.into(),
        }
    }
}

/// Apply non-overlapping edits. Returns the new text and the before/after
/// slices covering the union of edited regions, or `None` on overlap.
pub fn splice(src: &str, mut edits: Vec<Edit>) -> Option<(String, String, String)> {
    edits.sort_by_key(|e| (e.span.start, e.span.end));
    for w in edits.windows(2) {
        if w[1].span.start < w[0].span.end {
            return None;
        }
    }
    let lo = edits.first()?.span.start;
    let hi = edits.iter().map(|e| e.span.end).max()?;
    let mut out = String::with_capacity(src.len() + 64);
    let mut pos = 0;
    let mut after_lo = 0;
    for (i, e) in edits.iter().enumerate() {
        out.push_str(&src[pos..e.span.start]);
        if i == 0 {
            after_lo = out.len();
        }
        out.push_str(&e.text);
        pos = e.span.end;
    }
    out.push_str(&src[pos..hi]);
    let after_hi = out.len();
    out.push_str(&src[hi..]);
    let after = out[after_lo..after_hi].to_string();
    Some((out, src[lo..hi].to_string(), after))
}

/// Leading whitespace of the line containing `offset`.
pub fn line_indent(src: &str, offset: usize) -> &str {
    let start = src[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line = &src[start..];
    let n = line.len() - line.trim_start_matches([' ', '\t']).len();
    &line[..n]
}

/// Offset of the first character of the line containing `offset`.
pub fn line_start(src: &str, offset: usize) -> usize {
    src[..offset].rfind('\n').map_or(0, |i| i + 1)
}

/// Whether only whitespace precedes `offset` on its line.
pub fn starts_line(src: &str, offset: usize) -> bool {
    src[line_start(src, offset)..offset].trim().is_empty()
}

/// One indentation step as used by the file (first indented line), default four spaces.
pub fn indent_unit(src: &str) -> String {
    for line in src.lines() {
        let ws: String = line.chars().take_while(|c| *c == ' ' || *c == '\t').collect();
        if !ws.is_empty() && !line.trim().is_empty() {
            return ws;
        }
    }
    "    ".to_string()
}

/// Spans of every reference to `name` in the module: port and declaration
/// names plus identifier expressions. Named-port connection labels are not
/// references and are skipped.
pub fn ident_spans(m: &Module, name: &str) -> Vec<Span> {
    let mut out = Vec::new();
    let push_expr = |e: &Expr, out: &mut Vec<Span>| {
        e.walk(&mut |x| {
            if let ExprKind::Ident(n) = &x.kind {
                if n == name && !x.span.is_synthetic() {
                    out.push(x.span);
                }
            }
        });
    };
    for p in &m.params {
        if p.name.name == name {
            out.push(p.name.span);
        }
        push_expr(&p.value, &mut out);
        if let Some(r) = &p.range {
            push_expr(&r.msb, &mut out);
            push_expr(&r.lsb, &mut out);
        }
    }
    for p in &m.ports {
        if p.name.name == name {
            out.push(p.name.span);
        }
        if let Some(r) = &p.range {
            push_expr(&r.msb, &mut out);
            push_expr(&r.lsb, &mut out);
        }
    }
    for item in &m.items {
        collect_decl_names(item, name, &mut out);
        if let ItemKind::Always(a) = &item.kind {
            a.body.walk(&mut |s| {
                if let StmtKind::Block(b) = &s.kind {
                    for d in &b.decls {
                        collect_decl_names(d, name, &mut out);
                        for e in d.exprs() {
                            push_expr(e, &mut out);
                        }
                    }
                }
            });
        }
        for e in item.exprs() {
            push_expr(e, &mut out);
        }
    }
    out.sort_by_key(|s| s.start);
    out.dedup_by_key(|s| s.start);
    out
}

fn collect_decl_names(item: &Item, name: &str, out: &mut Vec<Span>) {
    match &item.kind {
        ItemKind::Net(d) => {
            for n in &d.names {
                if n.name.name == name {
                    out.push(n.name.span);
                }
            }
        }
        ItemKind::Param(p) => {
            for a in &p.assigns {
                if a.name.name == name {
                    out.push(a.name.span);
                }
            }
        }
        _ => {}
    }
}

/// Where to insert text that must precede a node together with its own
/// leading comments: the first comment that starts a line, else the node.
pub fn anchor(src: &str, comments: &[Comment], start: usize) -> usize {
    comments
        .iter()
        .find(|c| starts_line(src, c.span.start))
        .map_or(start, |c| c.span.start)
}

/// Insert `text` as its own line before `at`, matching that line's
/// indentation. When `at` is mid-line the text goes inline; a line comment
/// is then followed by a line break so it cannot swallow code.
pub fn insert_line_before(src: &str, at: usize, text: &str) -> Edit {
    let indent = line_indent(src, at);
    if starts_line(src, at) {
        Edit::insert(line_start(src, at), format!("{indent}{text}\n"))
    } else if text.starts_with("//") {
        Edit::insert(at, format!("{text}\n{indent}"))
    } else {
        Edit::insert(at, format!("{text} "))
    }
}

/// Expressions in value position (assignment right sides and conditions),
/// with their paths, preorder.
pub fn rvalue_exprs(m: &Module) -> Vec<(ExprPath, &Expr)> {
    all_exprs(m)
        .into_iter()
        .filter(|(p, _)| match &p.node.stmt {
            Some(_) => match stmt_at(m, &p.node).map(|s| &s.kind) {
                Some(StmtKind::Assign(_)) => p.slot == 1,
                Some(StmtKind::If { .. }) => p.slot == 0,
                Some(StmtKind::Case(_)) => p.slot == 0,
                _ => false,
            },
            None => matches!(m.items[p.node.item].kind, ItemKind::Assign(_)) && p.slot % 2 == 1,
        })
        .collect()
}

/// Names of the state registers and constants of every recognized FSM.
pub fn fsm_names(cx: &Ctx) -> std::collections::BTreeSet<String> {
    super::find_fsms(cx)
        .into_iter()
        .flat_map(|f| f.group.into_iter().chain(f.states))
        .collect()
}

/// Spans of literals that define FSM state constants.
pub fn fsm_literal_spans(cx: &Ctx) -> Vec<Span> {
    let states = fsm_names(cx);
    let mut out = Vec::new();
    for item in &cx.module.items {
        if let ItemKind::Param(p) = &item.kind {
            for a in &p.assigns {
                if states.contains(&a.name.name) {
                    out.push(a.value.span);
                }
            }
        }
    }
    out
}

/// Rename-stable ordering key of a signal: ports by position, then internal
/// nets and variables by declaration order. Parameters have no rank.
pub fn rank_key(cx: &Ctx, name: &str) -> Option<(u8, usize)> {
    let sig = cx.symbols.get(name)?;
    if sig.is_port() {
        return cx.module.ports.iter().position(|p| p.name.name == name).map(|i| (0, i));
    }
    if !sig.is_internal() {
        return None;
    }
    cx.symbols.internal_signals().position(|s| s.name == name).map(|i| (1, i))
}

/// Smallest rank among the signals an expression reads.
pub fn expr_rank(cx: &Ctx, e: &Expr) -> Option<(u8, usize)> {
    e.identifiers().into_iter().filter_map(|n| rank_key(cx, n)).min()
}

/// Wrap `text` in parentheses unless `e` is a primary.
pub fn operand_text(e: &Expr, text: &str) -> String {
    match &e.kind {
        ExprKind::Ident(_)
        | ExprKind::Number(_)
        | ExprKind::Paren(_)
        | ExprKind::Concat(_)
        | ExprKind::Replicate { .. }
        | ExprKind::Index { .. }
        | ExprKind::PartSelect { .. } => text.to_string(),
        _ => format!("({text})"),
    }
}

/// True when the always block is edge triggered with more than one edge
/// (the usual asynchronous-reset shape).
pub fn is_async_reset_block(a: &Always) -> bool {
    a.sens.edges().len() >= 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splice_reports_changed_region() {
        let (t, b, a) = splice(
            "abcdef",
            vec![Edit::replace(Span::new(1, 2), "XY"), Edit::insert(4, "-")],
        )
        .unwrap();
        assert_eq!(t, "aXYcd-ef");
        assert_eq!(b, "bcd");
        assert_eq!(a, "XYcd-");
        assert!(splice("abc", vec![Edit::replace(Span::new(0, 2), ""), Edit::replace(Span::new(1, 3), "")]).is_none());
    }

    #[test]
    fn indentation_helpers() {
        let s = "module m;\n    wire a;\nendmodule";
        let off = s.find("wire").unwrap();
        assert_eq!(line_indent(s, off), "    ");
        assert!(starts_line(s, off));
        assert_eq!(indent_unit(s), "    ");
    }
}
