//! Per-module symbol table: declarations, resolved widths, drivers and reads.

use super::ast::*;
use super::consteval;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalKind {
    Input,
    Output,
    Inout,
    Wire,
    Reg,
    Parameter,
    LocalParam,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signal {
    pub name: String,
    pub kind: SignalKind,
    /// Declared as a variable (`reg`), either in the port list or the body.
    pub is_reg: bool,
    pub signed: bool,
    /// Resolved `[msb:lsb]`, `None` for scalars.
    pub range: Option<(i64, i64)>,
    /// Range present but not constant-foldable.
    pub unresolved_range: bool,
    /// Index of the declaring module item, `None` for ports and header params.
    pub item: Option<usize>,
    /// Label of the named block declaring this signal.
    pub scope: Option<String>,
    pub value: Option<i128>,
    pub span: Span,
    /// Declaration rank within the module, ports first.
    pub rank: usize,
}

impl Signal {
    pub fn width(&self) -> u32 {
        match self.range {
            Some((m, l)) => (m - l).unsigned_abs() as u32 + 1,
            None => 1,
        }
    }

    pub fn is_port(&self) -> bool {
        matches!(self.kind, SignalKind::Input | SignalKind::Output | SignalKind::Inout)
    }

    pub fn is_param(&self) -> bool {
        matches!(self.kind, SignalKind::Parameter | SignalKind::LocalParam)
    }

    /// Internal nets and variables: neither ports nor parameters.
    pub fn is_internal(&self) -> bool {
        matches!(self.kind, SignalKind::Wire | SignalKind::Reg)
    }

    pub fn is_descending(&self) -> bool {
        matches!(self.range, Some((m, l)) if m >= l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DriverKind {
    Continuous,
    Procedural,
    Instance,
    DeclInit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Driver {
    pub kind: DriverKind,
    pub item: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    pub module: String,
    pub signals: BTreeMap<String, Signal>,
    /// Names in declaration order.
    pub order: Vec<String>,
    pub drivers: BTreeMap<String, Vec<Driver>>,
    /// Number of read occurrences per name.
    pub reads: BTreeMap<String, usize>,
    pub diagnostics: Vec<String>,
    /// Names declared in more than one scope.
    pub shadowed: Vec<String>,
}

impl SymbolTable {
    pub fn get(&self, name: &str) -> Option<&Signal> {
        self.signals.get(name)
    }

    pub fn param_value(&self, name: &str) -> Option<i128> {
        self.signals.get(name).filter(|s| s.is_param()).and_then(|s| s.value)
    }

    pub fn eval(&self, e: &Expr) -> Option<i128> {
        consteval::eval(e, &|n| self.param_value(n))
    }

    pub fn drivers_of(&self, name: &str) -> &[Driver] {
        self.drivers.get(name).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn read_count(&self, name: &str) -> usize {
        self.reads.get(name).copied().unwrap_or(0)
    }

    pub fn internal_signals(&self) -> impl Iterator<Item = &Signal> {
        self.order.iter().filter_map(|n| self.signals.get(n)).filter(|s| s.is_internal())
    }

    fn declare(&mut self, mut sig: Signal) {
        if self.signals.contains_key(&sig.name) {
            self.diagnostics.push(format!("`{}` declared more than once", sig.name));
            if !self.shadowed.contains(&sig.name) {
                self.shadowed.push(sig.name.clone());
            }
            return;
        }
        sig.rank = self.order.len();
        self.order.push(sig.name.clone());
        self.signals.insert(sig.name.clone(), sig);
    }
}

/// Build the symbol table for `m`. `ast` supplies submodule port directions
/// for instance connections; unknown submodules count as both driving and
/// reading every connected signal.
pub fn resolve(m: &Module, ast: Option<&Ast>) -> SymbolTable {
    let mut st = SymbolTable {
        module: m.name.name.clone(),
        ..Default::default()
    };
    for hp in &m.params {
        let value = st.eval(&hp.value);
        st.declare(Signal {
            name: hp.name.name.clone(),
            kind: SignalKind::Parameter,
            is_reg: false,
            signed: false,
            range: None,
            unresolved_range: false,
            item: None,
            scope: None,
            value,
            span: hp.name.span,
            rank: 0,
        });
    }
    for p in &m.ports {
        let (range, unresolved_range) = resolve_range(&st, p.range.as_ref());
        st.declare(Signal {
            name: p.name.name.clone(),
            kind: match p.dir {
                Direction::Input => SignalKind::Input,
                Direction::Output => SignalKind::Output,
                Direction::Inout => SignalKind::Inout,
            },
            is_reg: p.is_reg(),
            signed: p.signed,
            range,
            unresolved_range,
            item: None,
            scope: None,
            value: None,
            span: p.name.span,
            rank: 0,
        });
    }
    for (idx, item) in m.items.iter().enumerate() {
        match &item.kind {
            ItemKind::Net(d) => declare_net(&mut st, d, idx, None),
            ItemKind::Param(p) => {
                for a in &p.assigns {
                    let value = st.eval(&a.value);
                    st.declare(Signal {
                        name: a.name.name.clone(),
                        kind: if p.local {
                            SignalKind::LocalParam
                        } else {
                            SignalKind::Parameter
                        },
                        is_reg: false,
                        signed: false,
                        range: None,
                        unresolved_range: false,
                        item: Some(idx),
                        scope: None,
                        value,
                        span: a.name.span,
                        rank: 0,
                    });
                }
            }
            ItemKind::Always(a) => {
                a.body.walk(&mut |s| {
                    if let StmtKind::Block(b) = &s.kind {
                        for d in &b.decls {
                            if let ItemKind::Net(nd) = &d.kind {
                                declare_net(&mut st, nd, idx, b.label.as_ref().map(|l| l.name.clone()));
                            }
                        }
                    }
                });
            }
            _ => {}
        }
    }

    let mut drivers: BTreeMap<String, Vec<Driver>> = BTreeMap::new();
    let mut reads: BTreeMap<String, usize> = BTreeMap::new();
    fn read(e: &Expr, reads: &mut BTreeMap<String, usize>) {
        for n in e.identifiers() {
            *reads.entry(n.to_string()).or_default() += 1;
        }
    }
    fn drive(
        lhs: &Expr,
        kind: DriverKind,
        item: usize,
        drivers: &mut BTreeMap<String, Vec<Driver>>,
        reads: &mut BTreeMap<String, usize>,
    ) {
        for t in lvalue_targets(lhs) {
            let v = drivers.entry(t.to_string()).or_default();
            let d = Driver { kind, item };
            if !v.contains(&d) {
                v.push(d);
            }
        }
        for idx in lvalue_index_exprs(lhs) {
            read(idx, reads);
        }
    }
    for p in &m.ports {
        if let Some(r) = &p.range {
            read(&r.msb, &mut reads);
            read(&r.lsb, &mut reads);
        }
    }
    for (idx, item) in m.items.iter().enumerate() {
        match &item.kind {
            ItemKind::Net(d) => {
                if let Some(r) = &d.range {
                    read(&r.msb, &mut reads);
                    read(&r.lsb, &mut reads);
                }
                for n in &d.names {
                    if let Some(init) = &n.init {
                        read(init, &mut reads);
                        let kind = if d.kind == NetKind::Wire {
                            DriverKind::Continuous
                        } else {
                            DriverKind::DeclInit
                        };
                        drivers.entry(n.name.name.clone()).or_default().push(Driver { kind, item: idx });
                    }
                }
            }
            ItemKind::Param(p) => {
                if let Some(r) = &p.range {
                    read(&r.msb, &mut reads);
                    read(&r.lsb, &mut reads);
                }
                for a in &p.assigns {
                    read(&a.value, &mut reads);
                }
            }
            ItemKind::Assign(list) => {
                for a in list {
                    drive(&a.lhs, DriverKind::Continuous, idx, &mut drivers, &mut reads);
                    read(&a.rhs, &mut reads);
                }
            }
            ItemKind::Always(a) => {
                if let EventControl::List { items, .. } = &a.sens {
                    for it in items {
                        read(&it.signal, &mut reads);
                    }
                }
                a.body.walk(&mut |s| match &s.kind {
                    StmtKind::Assign(pa) => {
                        drive(&pa.lhs, DriverKind::Procedural, idx, &mut drivers, &mut reads);
                        read(&pa.rhs, &mut reads);
                    }
                    _ => {
                        for e in s.own_exprs() {
                            read(e, &mut reads);
                        }
                    }
                });
            }
            ItemKind::Instance(inst) => {
                let sub = ast.and_then(|a| a.module(&inst.module.name));
                for c in &inst.params {
                    match c {
                        Connection::Named { expr: Some(e), .. } | Connection::Positional(e) => read(e, &mut reads),
                        _ => {}
                    }
                }
                for n in &inst.instances {
                    for (pos, c) in n.connections.iter().enumerate() {
                        let (port, expr) = match c {
                            Connection::Named { port, expr: Some(e) } => (sub.and_then(|s| s.port(&port.name)), e),
                            Connection::Positional(e) => (sub.and_then(|s| s.ports.get(pos)), e),
                            _ => continue,
                        };
                        let dir = port.map(|p| p.dir);
                        if dir != Some(Direction::Input) {
                            drive(expr, DriverKind::Instance, idx, &mut drivers, &mut reads);
                        }
                        if dir != Some(Direction::Output) {
                            read(expr, &mut reads);
                        }
                    }
                }
            }
        }
    }
    for (name, ds) in &drivers {
        match st.signals.get(name) {
            None => st.diagnostics.push(format!("`{name}` is driven but never declared")),
            Some(sig) => {
                if sig.kind == SignalKind::Input {
                    st.diagnostics.push(format!("input `{name}` is driven inside the module"));
                }
                let procedural = ds.iter().filter(|d| d.kind == DriverKind::Procedural).count();
                let other = ds.len() - procedural;
                if (procedural > 0 && other > 0) || other > 1 {
                    st.diagnostics.push(format!("`{name}` has conflicting drivers"));
                }
            }
        }
    }
    for name in reads.keys() {
        if !st.signals.contains_key(name) {
            st.diagnostics.push(format!("`{name}` is used but never declared"));
        }
    }
    st.drivers = drivers;
    st.reads = reads;
    st
}

fn declare_net(st: &mut SymbolTable, d: &NetDecl, idx: usize, scope: Option<String>) {
    let (range, unresolved_range) = resolve_range(st, d.range.as_ref());
    for n in &d.names {
        st.declare(Signal {
            name: n.name.name.clone(),
            kind: if d.kind == NetKind::Reg {
                SignalKind::Reg
            } else {
                SignalKind::Wire
            },
            is_reg: d.kind == NetKind::Reg,
            signed: d.signed,
            range,
            unresolved_range,
            item: Some(idx),
            scope: scope.clone(),
            value: None,
            span: n.name.span,
            rank: 0,
        });
    }
}

fn resolve_range(st: &SymbolTable, r: Option<&Range>) -> (Option<(i64, i64)>, bool) {
    match r {
        None => (None, false),
        Some(r) => match (st.eval(&r.msb), st.eval(&r.lsb)) {
            (Some(m), Some(l)) => match (i64::try_from(m), i64::try_from(l)) {
                (Ok(m), Ok(l)) => (Some((m, l)), false),
                _ => (None, true),
            },
            _ => (None, true),
        },
    }
}

/// Variables written by an assignment target.
pub fn lvalue_targets(lhs: &Expr) -> Vec<&str> {
    match &lhs.kind {
        ExprKind::Concat(parts) => parts.iter().flat_map(lvalue_targets).collect(),
        ExprKind::Paren(inner) => lvalue_targets(inner),
        _ => lhs.target_name().into_iter().collect(),
    }
}

/// Index and bound expressions inside an assignment target; these are reads.
pub fn lvalue_index_exprs(lhs: &Expr) -> Vec<&Expr> {
    match &lhs.kind {
        ExprKind::Concat(parts) => parts.iter().flat_map(lvalue_index_exprs).collect(),
        ExprKind::Paren(inner) => lvalue_index_exprs(inner),
        ExprKind::Index { base, index } => {
            let mut v = lvalue_index_exprs(base);
            v.push(index);
            v
        }
        ExprKind::PartSelect { base, msb, lsb } => {
            let mut v = lvalue_index_exprs(base);
            v.push(msb);
            v.push(lsb);
            v
        }
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_str;

    #[test]
    fn widths_drivers_and_reads() {
        let ast = parse_str(
            "module m #(parameter W = 8) (input clk, input [W-1:0] d, output reg [W-1:0] q);\n\
             localparam H = W / 2;\n\
             wire [H-1:0] lo;\n\
             assign lo = d[H-1:0];\n\
             always @(posedge clk) q <= {lo, lo};\nendmodule",
        )
        .unwrap();
        let st = resolve(&ast.modules[0], Some(&ast));
        assert_eq!(st.get("d").unwrap().width(), 8);
        assert_eq!(st.get("lo").unwrap().width(), 4);
        assert_eq!(st.param_value("H"), Some(4));
        assert_eq!(st.drivers_of("q")[0].kind, DriverKind::Procedural);
        assert_eq!(st.drivers_of("lo")[0].kind, DriverKind::Continuous);
        assert_eq!(st.read_count("lo"), 2);
        assert!(st.diagnostics.is_empty(), "{:?}", st.diagnostics);
        assert!(st.get("lo").unwrap().is_internal());
        assert!(!st.get("q").unwrap().is_internal());
    }

    #[test]
    fn reports_undeclared_and_conflicts() {
        let ast = parse_str(
            "module m(input a, output y);\nassign y = a & ghost;\nassign y = a;\nendmodule",
        )
        .unwrap();
        let st = resolve(&ast.modules[0], None);
        assert!(st.diagnostics.iter().any(|d| d.contains("ghost")));
        assert!(st.diagnostics.iter().any(|d| d.contains("conflicting")));
    }

    #[test]
    fn named_block_shadowing_is_flagged() {
        let ast = parse_str(
            "module m(input a, output reg y);\nreg t;\nalways @* begin : blk reg t; t = a; y = t; end\nendmodule",
        )
        .unwrap();
        let st = resolve(&ast.modules[0], None);
        assert_eq!(st.shadowed, vec!["t".to_string()]);
    }
}
