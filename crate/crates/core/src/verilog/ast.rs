//! Syntax tree for the supported Verilog subset.
//!
//! Spans never take part in equality: two trees compare equal when they have
//! the same structure, identifiers, literal spellings and comments, no matter
//! where they came from. This is what the round-trip property is stated over.

use super::number::NumberLiteral;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const SYNTHETIC: Span = Span {
        start: usize::MAX,
        end: usize::MAX,
    };

    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn is_synthetic(&self) -> bool {
        self.start == usize::MAX
    }

    pub fn join(self, other: Span) -> Span {
        if self.is_synthetic() {
            return other;
        }
        if other.is_synthetic() {
            return self;
        }
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn contains(&self, other: &Span) -> bool {
        !self.is_synthetic() && !other.is_synthetic() && self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        !self.is_synthetic() && !other.is_synthetic() && self.start < other.end && other.start < self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn synthetic(name: impl Into<String>) -> Ident {
        Ident {
            name: name.into(),
            span: Span::SYNTHETIC,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comment {
    pub text: String,
    pub span: Span,
}

/// A parsed (or synthesized) Verilog document.
#[derive(Clone, Debug)]
pub struct Ast {
    pub modules: Vec<Module>,
    /// Comments after the last module.
    pub trailing_comments: Vec<Comment>,
    /// Original text when the tree came from `parse`; `None` for trees built
    /// in code, which print canonically.
    pub source: Option<Arc<str>>,
    pub origin: String,
}

impl PartialEq for Ast {
    fn eq(&self, other: &Ast) -> bool {
        self.modules == other.modules && self.trailing_comments == other.trailing_comments
    }
}

impl Eq for Ast {}

impl Ast {
    pub fn module(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name.name == name)
    }

    /// Text covered by a span of the original source.
    pub fn text(&self, span: Span) -> Option<&str> {
        if span.is_synthetic() {
            return None;
        }
        self.source.as_deref().and_then(|s| s.get(span.start..span.end))
    }

    /// The module designated as top: the last module not instantiated by another.
    pub fn top_module(&self) -> Option<&Module> {
        let instantiated: std::collections::BTreeSet<&str> = self
            .modules
            .iter()
            .flat_map(|m| m.items.iter())
            .filter_map(|it| match &it.kind {
                ItemKind::Instance(inst) => Some(inst.module.name.as_str()),
                _ => None,
            })
            .collect();
        self.modules
            .iter()
            .rev()
            .find(|m| !instantiated.contains(m.name.name.as_str()))
            .or_else(|| self.modules.last())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Module {
    pub name: Ident,
    pub comments: Vec<Comment>,
    pub params: Vec<HeaderParam>,
    pub ports: Vec<Port>,
    pub items: Vec<Item>,
    /// Comments immediately before `endmodule`.
    pub end_comments: Vec<Comment>,
    pub span: Span,
    /// Span of the `( ... )` port list including parentheses; synthetic when absent.
    pub port_list_span: Span,
}

impl Module {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeaderParam {
    /// `parameter` keyword written explicitly before this name.
    pub keyword: bool,
    pub range: Option<Range>,
    pub name: Ident,
    pub value: Expr,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetKind {
    Wire,
    Reg,
}

impl NetKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NetKind::Wire => "wire",
            NetKind::Reg => "reg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Port {
    pub dir: Direction,
    pub net: Option<NetKind>,
    pub signed: bool,
    pub range: Option<Range>,
    pub name: Ident,
    /// Direction keyword written for this port (false when inherited from the previous one).
    pub explicit: bool,
    pub span: Span,
}

impl Port {
    pub fn is_reg(&self) -> bool {
        self.net == Some(NetKind::Reg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub kind: ItemKind,
    pub comments: Vec<Comment>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ItemKind {
    Net(NetDecl),
    Param(ParamDecl),
    Assign(Vec<ContAssign>),
    Always(Always),
    Instance(Instance),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetDecl {
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub names: Vec<DeclName>,
    /// Span of the `wire`/`reg` keyword.
    pub kind_span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeclName {
    pub name: Ident,
    pub init: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamDecl {
    pub local: bool,
    pub range: Option<Range>,
    pub assigns: Vec<ParamAssign>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamAssign {
    pub name: Ident,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContAssign {
    pub lhs: Expr,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Always {
    pub sens: EventControl,
    pub body: Stmt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    Posedge,
    Negedge,
}

impl Edge {
    pub fn keyword(self) -> &'static str {
        match self {
            Edge::Posedge => "posedge",
            Edge::Negedge => "negedge",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SensSep {
    Or,
    Comma,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensItem {
    pub edge: Option<Edge>,
    pub signal: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventControl {
    /// `@*` or `@(*)`.
    Star { parens: bool, span: Span },
    List {
        items: Vec<SensItem>,
        /// Separator between item i and i+1.
        separators: Vec<SensSep>,
        /// Spans of the separator tokens.
        separator_spans: Vec<Span>,
        span: Span,
    },
}

/// How a sensitivity list separates its entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeparatorStyle {
    OrKeyword,
    Comma,
    Mixed,
    Single,
}

impl EventControl {
    pub fn span(&self) -> Span {
        match self {
            EventControl::Star { span, .. } | EventControl::List { span, .. } => *span,
        }
    }

    pub fn separator_style(&self) -> SeparatorStyle {
        match self {
            EventControl::Star { .. } => SeparatorStyle::Single,
            EventControl::List { separators, .. } => {
                if separators.is_empty() {
                    SeparatorStyle::Single
                } else if separators.iter().all(|s| *s == SensSep::Or) {
                    SeparatorStyle::OrKeyword
                } else if separators.iter().all(|s| *s == SensSep::Comma) {
                    SeparatorStyle::Comma
                } else {
                    SeparatorStyle::Mixed
                }
            }
        }
    }

    pub fn edges(&self) -> Vec<(Edge, &Expr)> {
        match self {
            EventControl::Star { .. } => Vec::new(),
            EventControl::List { items, .. } => items
                .iter()
                .filter_map(|it| it.edge.map(|e| (e, &it.signal)))
                .collect(),
        }
    }

    pub fn is_edge_triggered(&self) -> bool {
        !self.edges().is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub module: Ident,
    pub params: Vec<Connection>,
    pub instances: Vec<InstanceName>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceName {
    pub name: Ident,
    pub connections: Vec<Connection>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Connection {
    Named { port: Ident, expr: Option<Expr> },
    Positional(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub comments: Vec<Comment>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Block(Block),
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    Case(CaseStmt),
    Assign(ProcAssign),
    Null,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub label: Option<Ident>,
    pub decls: Vec<Item>,
    pub stmts: Vec<Stmt>,
    /// Comments before `end`.
    pub end_comments: Vec<Comment>,
    /// Span of the closing `end` keyword.
    pub end_span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

impl CaseKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CaseKind::Case => "case",
            CaseKind::Casez => "casez",
            CaseKind::Casex => "casex",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseStmt {
    pub kind: CaseKind,
    pub subject: Expr,
    pub items: Vec<CaseItem>,
    pub end_comments: Vec<Comment>,
    /// Span of the `endcase` keyword.
    pub end_span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseItem {
    /// Empty for `default`.
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub comments: Vec<Comment>,
    pub span: Span,
}

impl CaseItem {
    pub fn is_default(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcAssign {
    pub lhs: Expr,
    pub rhs: Expr,
    pub blocking: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Plus,
    Minus,
    LogicalNot,
    BitNot,
    RedAnd,
    RedNand,
    RedOr,
    RedNor,
    RedXor,
    RedXnor,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Plus => "+",
            UnaryOp::Minus => "-",
            UnaryOp::LogicalNot => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedNand => "~&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedNor => "~|",
            UnaryOp::RedXor => "^",
            UnaryOp::RedXnor => "~^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Pow,
    Mul,
    Div,
    Mod,
    Add,
    Sub,
    Shl,
    Shr,
    AShl,
    AShr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    BitAnd,
    BitXor,
    BitXnor,
    BitOr,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Pow => "**",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::AShl => "<<<",
            BinaryOp::AShr => ">>>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::CaseEq => "===",
            BinaryOp::CaseNe => "!==",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitXor => "^",
            BinaryOp::BitXnor => "~^",
            BinaryOp::BitOr => "|",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Pow => 12,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => 11,
            BinaryOp::Add | BinaryOp::Sub => 10,
            BinaryOp::Shl | BinaryOp::Shr | BinaryOp::AShl | BinaryOp::AShr => 9,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 8,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::CaseEq | BinaryOp::CaseNe => 7,
            BinaryOp::BitAnd => 6,
            BinaryOp::BitXor | BinaryOp::BitXnor => 5,
            BinaryOp::BitOr => 4,
            BinaryOp::LogAnd => 3,
            BinaryOp::LogOr => 2,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt
                | BinaryOp::Le
                | BinaryOp::Gt
                | BinaryOp::Ge
                | BinaryOp::Eq
                | BinaryOp::Ne
                | BinaryOp::CaseEq
                | BinaryOp::CaseNe
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::LogAnd | BinaryOp::LogOr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Ident(String),
    Number(NumberLiteral),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        op_span: Span,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
    },
    Concat(Vec<Expr>),
    Replicate {
        count: Box<Expr>,
        parts: Vec<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    PartSelect {
        base: Box<Expr>,
        msb: Box<Expr>,
        lsb: Box<Expr>,
    },
    Paren(Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn synthetic(kind: ExprKind) -> Expr {
        Expr {
            kind,
            span: Span::SYNTHETIC,
        }
    }

    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::synthetic(ExprKind::Ident(name.into()))
    }

    pub fn number(lit: NumberLiteral) -> Expr {
        Expr::synthetic(ExprKind::Number(lit))
    }

    pub fn as_ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<&NumberLiteral> {
        match &self.kind {
            ExprKind::Number(n) => Some(n),
            _ => None,
        }
    }

    /// Strip any number of enclosing parentheses.
    pub fn unparen(&self) -> &Expr {
        let mut e = self;
        while let ExprKind::Paren(inner) = &e.kind {
            e = inner;
        }
        e
    }

    /// Name of the variable written by an assignment target, for whole, bit
    /// and part-select targets.
    pub fn target_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            ExprKind::Index { base, .. } | ExprKind::PartSelect { base, .. } => base.target_name(),
            _ => None,
        }
    }

    /// All identifiers referenced, in source order.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ExprKind::Ident(n) = &e.kind {
                out.push(n.as_str());
            }
        });
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Ident(_) | ExprKind::Number(_) => Vec::new(),
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => vec![cond, then_expr, else_expr],
            ExprKind::Concat(parts) => parts.iter().collect(),
            ExprKind::Replicate { count, parts } => {
                let mut v: Vec<&Expr> = vec![count];
                v.extend(parts.iter());
                v
            }
            ExprKind::Index { base, index } => vec![base, index],
            ExprKind::PartSelect { base, msb, lsb } => vec![base, msb, lsb],
            ExprKind::Paren(inner) => vec![inner],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            ExprKind::Ident(_) | ExprKind::Number(_) => Vec::new(),
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => vec![cond, then_expr, else_expr],
            ExprKind::Concat(parts) => parts.iter_mut().collect(),
            ExprKind::Replicate { count, parts } => {
                let mut v: Vec<&mut Expr> = vec![count];
                v.extend(parts.iter_mut());
                v
            }
            ExprKind::Index { base, index } => vec![base, index],
            ExprKind::PartSelect { base, msb, lsb } => vec![base, msb, lsb],
            ExprKind::Paren(inner) => vec![inner],
        }
    }
}

impl Stmt {
    pub fn synthetic(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            comments: Vec::new(),
            span: Span::SYNTHETIC,
        }
    }

    /// Child statements in source order.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Block(b) => b.stmts.iter().collect(),
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let mut v: Vec<&Stmt> = vec![then_branch];
                if let Some(e) = else_branch {
                    v.push(e);
                }
                v
            }
            StmtKind::Case(c) => c.items.iter().map(|i| &i.body).collect(),
            StmtKind::Assign(_) | StmtKind::Null => Vec::new(),
        }
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Expressions held directly by this statement (not by children).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::If { cond, .. } => vec![cond],
            StmtKind::Case(c) => {
                let mut v = vec![&c.subject];
                for item in &c.items {
                    v.extend(item.labels.iter());
                }
                v
            }
            StmtKind::Assign(a) => vec![&a.lhs, &a.rhs],
            StmtKind::Block(_) | StmtKind::Null => Vec::new(),
        }
    }

    /// Unwrap a `begin ... end` holding exactly one statement.
    pub fn single(&self) -> &Stmt {
        match &self.kind {
            StmtKind::Block(b) if b.stmts.len() == 1 && b.decls.is_empty() && b.label.is_none() => b.stmts[0].single(),
            _ => self,
        }
    }
}

impl Item {
    /// Every expression in this item, including nested statement expressions.
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        match &self.kind {
            ItemKind::Net(d) => {
                if let Some(r) = &d.range {
                    out.push(&r.msb);
                    out.push(&r.lsb);
                }
                for n in &d.names {
                    if let Some(i) = &n.init {
                        out.push(i);
                    }
                }
            }
            ItemKind::Param(p) => {
                if let Some(r) = &p.range {
                    out.push(&r.msb);
                    out.push(&r.lsb);
                }
                out.extend(p.assigns.iter().map(|a| &a.value));
            }
            ItemKind::Assign(list) => {
                for a in list {
                    out.push(&a.lhs);
                    out.push(&a.rhs);
                }
            }
            ItemKind::Always(a) => {
                if let EventControl::List { items, .. } = &a.sens {
                    out.extend(items.iter().map(|i| &i.signal));
                }
                a.body.walk(&mut |s| out.extend(s.own_exprs()));
            }
            ItemKind::Instance(inst) => {
                for c in inst.params.iter().chain(inst.instances.iter().flat_map(|i| i.connections.iter())) {
                    match c {
                        Connection::Named { expr: Some(e), .. } | Connection::Positional(e) => out.push(e),
                        Connection::Named { expr: None, .. } => {}
                    }
                }
            }
        }
        out
    }
}
