//! Canonical pretty-printer. Used for trees without source text and for the
//! replacement snippets that transformations splice into existing files.

use super::ast::*;
use std::fmt::Write;

const INDENT: &str = "    ";

pub fn print_ast(ast: &Ast) -> String {
    let mut out = String::new();
    for (i, m) in ast.modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_module(m));
    }
    for c in &ast.trailing_comments {
        out.push_str(&c.text);
        out.push('\n');
    }
    out
}

pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    for c in &m.comments {
        let _ = writeln!(out, "{}", c.text);
    }
    let _ = write!(out, "module {}", m.name.name);
    if !m.params.is_empty() {
        out.push_str(" #(\n");
        let params: Vec<String> = m.params.iter().map(|p| format!("{INDENT}{}", print_header_param(p))).collect();
        out.push_str(&params.join(",\n"));
        out.push_str("\n)");
    }
    if m.ports.is_empty() {
        out.push_str(";\n");
    } else {
        out.push_str(" (\n");
        let ports: Vec<String> = m.ports.iter().map(|p| format!("{INDENT}{}", print_port(p))).collect();
        out.push_str(&ports.join(",\n"));
        out.push_str("\n);\n");
    }
    for item in &m.items {
        out.push_str(&print_item(item, 1));
    }
    for c in &m.end_comments {
        let _ = writeln!(out, "{INDENT}{}", c.text);
    }
    out.push_str("endmodule\n");
    out
}

pub fn print_header_param(p: &HeaderParam) -> String {
    let mut s = String::new();
    if p.keyword {
        s.push_str("parameter ");
    }
    if let Some(r) = &p.range {
        s.push_str(&print_range(r));
        s.push(' ');
    }
    let _ = write!(s, "{} = {}", p.name.name, print_expr(&p.value));
    s
}

/// Full ANSI declaration of a port, always with its direction keyword.
pub fn print_port(p: &Port) -> String {
    let mut s = p.dir.keyword().to_string();
    if let Some(n) = p.net {
        s.push(' ');
        s.push_str(n.keyword());
    }
    if p.signed {
        s.push_str(" signed");
    }
    if let Some(r) = &p.range {
        s.push(' ');
        s.push_str(&print_range(r));
    }
    s.push(' ');
    s.push_str(&p.name.name);
    s
}

pub fn print_range(r: &Range) -> String {
    format!("[{}:{}]", print_expr(&r.msb), print_expr(&r.lsb))
}

fn indent(level: usize) -> String {
    INDENT.repeat(level)
}

fn push_comments(out: &mut String, comments: &[Comment], level: usize) {
    for c in comments {
        let _ = writeln!(out, "{}{}", indent(level), c.text);
    }
}

pub fn print_item(item: &Item, level: usize) -> String {
    let mut out = String::new();
    push_comments(&mut out, &item.comments, level);
    let pad = indent(level);
    match &item.kind {
        ItemKind::Net(d) => {
            let _ = writeln!(out, "{pad}{}", print_net_decl(d));
        }
        ItemKind::Param(p) => {
            let _ = writeln!(out, "{pad}{}", print_param_decl(p));
        }
        ItemKind::Assign(list) => {
            let parts: Vec<String> = list
                .iter()
                .map(|a| format!("{} = {}", print_expr(&a.lhs), print_expr(&a.rhs)))
                .collect();
            let _ = writeln!(out, "{pad}assign {};", parts.join(", "));
        }
        ItemKind::Always(a) => {
            let _ = write!(out, "{pad}always {}", print_event_control(&a.sens));
            out.push_str(&print_stmt_tail(&a.body, level));
        }
        ItemKind::Instance(inst) => {
            let _ = write!(out, "{pad}{}", inst.module.name);
            if !inst.params.is_empty() {
                let _ = write!(out, " #({})", print_connections(&inst.params));
            }
            let names: Vec<String> = inst
                .instances
                .iter()
                .map(|n| format!("{} ({})", n.name.name, print_connections(&n.connections)))
                .collect();
            let _ = writeln!(out, " {};", names.join(", "));
        }
    }
    out
}

pub fn print_net_decl(d: &NetDecl) -> String {
    let mut s = d.kind.keyword().to_string();
    if d.signed {
        s.push_str(" signed");
    }
    if let Some(r) = &d.range {
        s.push(' ');
        s.push_str(&print_range(r));
    }
    let names: Vec<String> = d
        .names
        .iter()
        .map(|n| match &n.init {
            Some(e) => format!("{} = {}", n.name.name, print_expr(e)),
            None => n.name.name.clone(),
        })
        .collect();
    let _ = write!(s, " {};", names.join(", "));
    s
}

pub fn print_param_decl(p: &ParamDecl) -> String {
    let mut s = if p.local { "localparam" } else { "parameter" }.to_string();
    if let Some(r) = &p.range {
        s.push(' ');
        s.push_str(&print_range(r));
    }
    let parts: Vec<String> = p
        .assigns
        .iter()
        .map(|a| format!("{} = {}", a.name.name, print_expr(&a.value)))
        .collect();
    let _ = write!(s, " {};", parts.join(", "));
    s
}

fn print_connections(conns: &[Connection]) -> String {
    conns
        .iter()
        .map(|c| match c {
            Connection::Named { port, expr } => {
                format!(".{}({})", port.name, expr.as_ref().map(print_expr).unwrap_or_default())
            }
            Connection::Positional(e) => print_expr(e),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn print_event_control(ec: &EventControl) -> String {
    match ec {
        EventControl::Star { parens: true, .. } => "@(*)".to_string(),
        EventControl::Star { parens: false, .. } => "@*".to_string(),
        EventControl::List { items, separators, .. } => {
            let mut s = String::from("@(");
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    match separators.get(i - 1) {
                        Some(SensSep::Comma) => s.push_str(", "),
                        _ => s.push_str(" or "),
                    }
                }
                if let Some(e) = it.edge {
                    s.push_str(e.keyword());
                    s.push(' ');
                }
                s.push_str(&print_expr(&it.signal));
            }
            s.push(')');
            s
        }
    }
}

/// Statement printed at `level`, including its leading comments and indentation.
pub fn print_stmt(stmt: &Stmt, level: usize) -> String {
    let mut out = String::new();
    push_comments(&mut out, &stmt.comments, level);
    out.push_str(&indent(level));
    out.push_str(print_stmt_head(stmt, level).trim_start());
    out
}

/// Statement that follows a header on the same line (`always @*`, `if (c)`,
/// `else`, case labels). Blocks stay on the header line; other statements go
/// on the next line one level deeper.
fn print_stmt_tail(stmt: &Stmt, level: usize) -> String {
    if matches!(stmt.kind, StmtKind::Block(_)) && stmt.comments.is_empty() {
        format!(" {}", print_stmt_head(stmt, level))
    } else {
        format!("\n{}", print_stmt(stmt, level + 1))
    }
}

fn print_stmt_head(stmt: &Stmt, level: usize) -> String {
    let pad = indent(level);
    match &stmt.kind {
        StmtKind::Null => ";\n".to_string(),
        StmtKind::Assign(a) => format!(
            "{} {} {};\n",
            print_expr(&a.lhs),
            if a.blocking { "=" } else { "<=" },
            print_expr(&a.rhs)
        ),
        StmtKind::Block(b) => {
            let mut s = String::from("begin");
            if let Some(l) = &b.label {
                let _ = write!(s, " : {}", l.name);
            }
            s.push('\n');
            for d in &b.decls {
                s.push_str(&print_item(d, level + 1));
            }
            for st in &b.stmts {
                s.push_str(&print_stmt(st, level + 1));
            }
            push_comments(&mut s, &b.end_comments, level + 1);
            let _ = writeln!(s, "{pad}end");
            s
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let mut s = format!("if ({})", print_expr(cond));
            // A dangling else would bind to an inner if without a block.
            let needs_wrap = else_branch.is_some() && ends_with_open_if(then_branch);
            if needs_wrap {
                let wrapped = Stmt::synthetic(StmtKind::Block(Block {
                    label: None,
                    decls: vec![],
                    stmts: vec![(**then_branch).clone()],
                    end_comments: vec![],
                    end_span: Span::SYNTHETIC,
                }));
                s.push_str(&print_stmt_tail(&wrapped, level));
            } else {
                s.push_str(&print_stmt_tail(then_branch, level));
            }
            if let Some(e) = else_branch {
                let _ = write!(s, "{pad}else");
                if matches!(e.kind, StmtKind::If { .. }) && e.comments.is_empty() {
                    s.push(' ');
                    s.push_str(&print_stmt_head(e, level));
                } else {
                    s.push_str(&print_stmt_tail(e, level));
                }
            }
            s
        }
        StmtKind::Case(c) => {
            let mut s = format!("{} ({})\n", c.kind.keyword(), print_expr(&c.subject));
            for item in &c.items {
                push_comments(&mut s, &item.comments, level + 1);
                s.push_str(&indent(level + 1));
                if item.labels.is_empty() {
                    s.push_str("default:");
                } else {
                    let labels: Vec<String> = item.labels.iter().map(print_expr).collect();
                    let _ = write!(s, "{}:", labels.join(", "));
                }
                s.push_str(&print_stmt_tail(&item.body, level + 1));
            }
            push_comments(&mut s, &c.end_comments, level + 1);
            let _ = writeln!(s, "{pad}endcase");
            s
        }
    }
}

fn ends_with_open_if(stmt: &Stmt) -> bool {
    match &stmt.kind {
        StmtKind::If { else_branch: None, .. } => true,
        StmtKind::If {
            else_branch: Some(e), ..
        } => ends_with_open_if(e),
        _ => false,
    }
}

const TERNARY_PREC: u8 = 1;

fn expr_prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Ternary { .. } => TERNARY_PREC,
        ExprKind::Unary { .. } => 13,
        _ => 14,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_child(out: &mut String, e: &Expr, min_prec: u8) {
    if expr_prec(e) < min_prec {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Ident(n) => {
            out.push_str(n);
            // Escaped identifiers end at whitespace.
            if n.starts_with('\\') {
                out.push(' ');
            }
        }
        ExprKind::Number(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            // `~ ~a` rather than `~(~a)` keeps the reparsed tree identical.
            if matches!(operand.kind, ExprKind::Unary { .. }) {
                out.push(' ');
                write_expr(out, operand);
            } else {
                write_child(out, operand, 14);
            }
        }
        ExprKind::Binary { op, lhs, rhs, .. } => {
            let p = op.precedence();
            if *op == BinaryOp::Pow {
                write_child(out, lhs, p + 1);
            } else {
                write_child(out, lhs, p);
            }
            let _ = write!(out, " {} ", op.symbol());
            if *op == BinaryOp::Pow {
                write_child(out, rhs, p);
            } else {
                write_child(out, rhs, p + 1);
            }
        }
        ExprKind::Ternary {
            cond,
            then_expr,
            else_expr,
        } => {
            write_child(out, cond, TERNARY_PREC + 1);
            out.push_str(" ? ");
            write_child(out, then_expr, TERNARY_PREC);
            out.push_str(" : ");
            write_child(out, else_expr, TERNARY_PREC);
        }
        ExprKind::Concat(parts) => {
            out.push('{');
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, p);
            }
            out.push('}');
        }
        ExprKind::Replicate { count, parts } => {
            out.push('{');
            write_child(out, count, 14);
            out.push('{');
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, p);
            }
            out.push_str("}}");
        }
        ExprKind::Index { base, index } => {
            write_expr(out, base);
            out.push('[');
            write_expr(out, index);
            out.push(']');
        }
        ExprKind::PartSelect { base, msb, lsb } => {
            write_expr(out, base);
            out.push('[');
            write_expr(out, msb);
            out.push(':');
            write_expr(out, lsb);
            out.push(']');
        }
        ExprKind::Paren(inner) => {
            out.push('(');
            write_expr(out, inner);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_expr;

    fn roundtrip(s: &str) -> String {
        print_expr(&parse_expr(s).unwrap())
    }

    #[test]
    fn keeps_explicit_parens() {
        assert_eq!(roundtrip("(a+b)*c"), "(a + b) * c");
        assert_eq!(roundtrip("~(~a|~b)"), "~(~a | ~b)");
    }

    #[test]
    fn inserts_parens_for_synthetic_trees() {
        let add = Expr::synthetic(ExprKind::Binary {
            op: BinaryOp::Add,
            lhs: Box::new(Expr::ident("a")),
            rhs: Box::new(Expr::ident("b")),
            op_span: Span::SYNTHETIC,
        });
        let mul = Expr::synthetic(ExprKind::Binary {
            op: BinaryOp::Mul,
            lhs: Box::new(add.clone()),
            rhs: Box::new(Expr::ident("c")),
            op_span: Span::SYNTHETIC,
        });
        assert_eq!(print_expr(&mul), "(a + b) * c");
        let sub = Expr::synthetic(ExprKind::Binary {
            op: BinaryOp::Sub,
            lhs: Box::new(Expr::ident("x")),
            rhs: Box::new(add),
            op_span: Span::SYNTHETIC,
        });
        assert_eq!(print_expr(&sub), "x - (a + b)");
    }

    #[test]
    fn nested_ternary() {
        assert_eq!(roundtrip("s ? a : t ? b : c"), "s ? a : t ? b : c");
        assert_eq!(roundtrip("{4{a}}"), "{4{a}}");
    }
}
