//! Finite-state-machine recognition shared by the state-encoding and
//! state-path rules.
//!
//! An FSM here is a group of internal registers that only ever hold named
//! state constants: they are assigned localparams (or each other), read only
//! as a case subject or in equality tests against states, and the constants
//! are used nowhere else. Under those conditions any injective re-encoding of
//! the constants is unobservable.

use super::Ctx;
use crate::verilog::ast::*;
use crate::verilog::path::{all_stmts, NodePath};
use crate::verilog::symbols::SignalKind;
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fsm {
    /// State registers, declaration order.
    pub group: Vec<String>,
    /// State constants, declaration order.
    pub states: Vec<String>,
    pub values: Vec<i128>,
    pub width: u32,
    /// Items declaring the state constants.
    pub state_items: Vec<usize>,
    /// Items declaring the state registers.
    pub group_items: Vec<usize>,
    /// Case statements over a state register.
    pub cases: Vec<NodePath>,
    /// First case that assigns a state register, with that assignment's
    /// target and blocking flag.
    pub transition: Option<(NodePath, String, bool)>,
}

pub fn find_fsms(cx: &Ctx) -> Vec<Fsm> {
    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut out = Vec::new();
    for (_, s) in all_stmts(cx.module) {
        let StmtKind::Case(c) = &s.kind else { continue };
        if c.kind != CaseKind::Case {
            continue;
        }
        let Some(subject) = c.subject.unparen().as_ident() else {
            continue;
        };
        if let Some(fsm) = recognize(cx, subject) {
            if seen.insert(fsm.group.clone()) {
                out.push(fsm);
            }
        }
    }
    out
}

fn is_state_param(cx: &Ctx, name: &str) -> bool {
    cx.symbols
        .get(name)
        .is_some_and(|s| s.kind == SignalKind::LocalParam && s.value.is_some())
}

fn is_state_reg(cx: &Ctx, name: &str) -> bool {
    cx.symbols
        .get(name)
        .is_some_and(|s| s.kind == SignalKind::Reg && !s.signed && cx.is_plain_signal(name))
}

/// Identifier leaves of a state-valued expression: identifiers and ternaries
/// over them. `None` for anything else.
fn state_leaves(e: &Expr) -> Option<Vec<&str>> {
    match &e.unparen().kind {
        ExprKind::Ident(n) => Some(vec![n.as_str()]),
        ExprKind::Ternary {
            then_expr, else_expr, ..
        } => {
            let mut v = state_leaves(then_expr)?;
            v.extend(state_leaves(else_expr)?);
            Some(v)
        }
        _ => None,
    }
}

fn recognize(cx: &Ctx, subject: &str) -> Option<Fsm> {
    if !is_state_reg(cx, subject) {
        return None;
    }
    let m = cx.module;
    let stmts = all_stmts(m);
    let mut group: BTreeSet<String> = BTreeSet::from([subject.to_string()]);
    let mut states: BTreeSet<String> = BTreeSet::new();
    // Grow the register group to a fixpoint over direct assignments.
    loop {
        let before = group.len();
        for (_, s) in &stmts {
            match &s.kind {
                StmtKind::Assign(pa) => {
                    let Some(lhs) = pa.lhs.as_ident() else { continue };
                    let Some(leaves) = state_leaves(&pa.rhs) else { continue };
                    let touches_group = leaves.iter().any(|l| group.contains(*l));
                    if group.contains(lhs) || touches_group {
                        if !is_state_reg(cx, lhs) {
                            return None;
                        }
                        group.insert(lhs.to_string());
                        for l in leaves {
                            if is_state_reg(cx, l) {
                                group.insert(l.to_string());
                            }
                        }
                    }
                }
                StmtKind::Case(c) => {
                    if let Some(subj) = c.subject.unparen().as_ident() {
                        if group.contains(subj) {
                            for item in &c.items {
                                for l in &item.labels {
                                    states.insert(l.unparen().as_ident()?.to_string());
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        if group.len() == before {
            break;
        }
    }
    // Constants assigned to the group are states as well.
    for (_, s) in &stmts {
        if let StmtKind::Assign(pa) = &s.kind {
            if pa.lhs.as_ident().is_some_and(|n| group.contains(n)) {
                for l in state_leaves(&pa.rhs)? {
                    if !group.contains(l) {
                        states.insert(l.to_string());
                    }
                }
            }
        }
    }
    if states.len() < 2 || states.len() > 64 || states.iter().any(|s| !is_state_param(cx, s)) {
        return None;
    }
    if !(Validator { group: &group, states: &states }).module_ok(m) {
        return None;
    }

    // Declarations: constants in localparam items holding only states, registers
    // in reg items holding only group members.
    let mut state_items = BTreeSet::new();
    let mut group_items = BTreeSet::new();
    for (idx, item) in m.items.iter().enumerate() {
        match &item.kind {
            ItemKind::Param(p) => {
                let hits = p.assigns.iter().filter(|a| states.contains(&a.name.name)).count();
                if hits > 0 {
                    if hits != p.assigns.len() || !p.local {
                        return None;
                    }
                    state_items.insert(idx);
                }
            }
            ItemKind::Net(d) => {
                let hits = d.names.iter().filter(|n| group.contains(&n.name.name)).count();
                if hits > 0 {
                    if hits != d.names.len() || d.names.iter().any(|n| n.init.is_some()) {
                        return None;
                    }
                    group_items.insert(idx);
                }
            }
            _ => {}
        }
    }
    let width = cx.symbols.get(subject)?.width();
    for g in &group {
        let sig = cx.symbols.get(g)?;
        if sig.width() != width || sig.unresolved_range || (sig.range.is_some() && !sig.is_descending()) {
            return None;
        }
    }
    let order = |n: &String| cx.symbols.get(n).map(|s| s.rank).unwrap_or(usize::MAX);
    let mut group: Vec<String> = group.into_iter().collect();
    group.sort_by_key(order);
    let mut states: Vec<String> = states.into_iter().collect();
    states.sort_by_key(order);
    let values: Vec<i128> = states.iter().map(|s| cx.symbols.param_value(s)).collect::<Option<_>>()?;
    let distinct: BTreeSet<i128> = values.iter().copied().collect();
    if distinct.len() != values.len() || values.iter().any(|v| *v < 0) {
        return None;
    }

    let mut cases = Vec::new();
    let mut transition = None;
    for (p, s) in &stmts {
        let StmtKind::Case(c) = &s.kind else { continue };
        if !c.subject.unparen().as_ident().is_some_and(|n| group.contains(&n.to_string())) {
            continue;
        }
        cases.push(p.clone());
        if transition.is_none() {
            let mut found = None;
            s.walk(&mut |x| {
                if let StmtKind::Assign(pa) = &x.kind {
                    if let Some(n) = pa.lhs.as_ident() {
                        if found.is_none() && group.iter().any(|g| g == n) {
                            found = Some((n.to_string(), pa.blocking));
                        }
                    }
                }
            });
            if let Some((n, b)) = found {
                transition = Some((p.clone(), n, b));
            }
        }
    }
    Some(Fsm {
        group,
        states,
        values,
        width,
        state_items: state_items.into_iter().collect(),
        group_items: group_items.into_iter().collect(),
        cases,
        transition,
    })
}

/// Checks every occurrence of a group register or state constant sits in
/// an allowed context.
struct Validator<'a> {
    group: &'a BTreeSet<String>,
    states: &'a BTreeSet<String>,
}

impl Validator<'_> {
    fn tracked(&self, n: &str) -> bool {
        self.group.contains(n) || self.states.contains(n)
    }

    fn module_ok(&self, m: &Module) -> bool {
        for p in &m.params {
            if !self.plain_ok(&p.value) {
                return false;
            }
        }
        for p in &m.ports {
            if self.group.contains(&p.name.name) {
                return false;
            }
            if let Some(r) = &p.range {
                if !self.plain_ok(&r.msb) || !self.plain_ok(&r.lsb) {
                    return false;
                }
            }
        }
        for item in &m.items {
            let ok = match &item.kind {
                ItemKind::Always(a) => {
                    let sens_ok = match &a.sens {
                        EventControl::List { items, .. } => items
                            .iter()
                            .all(|i| i.signal.as_ident().is_some_and(|n| !self.states.contains(n)) || self.plain_ok(&i.signal)),
                        EventControl::Star { .. } => true,
                    };
                    sens_ok && self.stmt_ok(&a.body)
                }
                ItemKind::Assign(list) => list.iter().all(|a| self.plain_ok(&a.lhs) && self.plain_ok(&a.rhs)),
                _ => item.exprs().into_iter().all(|e| self.plain_ok(e)),
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn stmt_ok(&self, s: &Stmt) -> bool {
        let own = match &s.kind {
            StmtKind::Assign(pa) => {
                if let Some(lhs) = pa.lhs.as_ident().filter(|n| self.group.contains(*n)) {
                    let _ = lhs;
                    self.state_rhs_ok(&pa.rhs)
                } else {
                    self.plain_ok(&pa.lhs) && self.plain_ok(&pa.rhs)
                }
            }
            StmtKind::If { cond, .. } => self.plain_ok(cond),
            StmtKind::Case(c) => {
                if c.subject.unparen().as_ident().is_some_and(|n| self.group.contains(n)) {
                    c.items
                        .iter()
                        .all(|i| i.labels.iter().all(|l| l.unparen().as_ident().is_some_and(|n| self.states.contains(n))))
                } else {
                    self.plain_ok(&c.subject) && c.items.iter().all(|i| i.labels.iter().all(|l| self.plain_ok(l)))
                }
            }
            StmtKind::Block(b) => b.decls.iter().all(|d| d.exprs().into_iter().all(|e| self.plain_ok(e))),
            StmtKind::Null => true,
        };
        own && s.children().into_iter().all(|c| self.stmt_ok(c))
    }

    fn state_rhs_ok(&self, e: &Expr) -> bool {
        match &e.unparen().kind {
            ExprKind::Ident(n) => self.tracked(n),
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => self.plain_ok(cond) && self.state_rhs_ok(then_expr) && self.state_rhs_ok(else_expr),
            _ => false,
        }
    }

    /// No tracked name appears except inside an equality test between a
    /// state register and a state constant or register.
    fn plain_ok(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Ident(n) => !self.tracked(n),
            ExprKind::Binary {
                op: BinaryOp::Eq | BinaryOp::Ne | BinaryOp::CaseEq | BinaryOp::CaseNe,
                lhs,
                rhs,
                ..
            } => {
                let l = lhs.unparen().as_ident();
                let r = rhs.unparen().as_ident();
                match (l, r) {
                    (Some(a), Some(b)) if self.tracked(a) || self.tracked(b) => {
                        self.tracked(a) && self.tracked(b) && (self.group.contains(a) || self.group.contains(b))
                    }
                    _ => self.plain_ok(lhs) && self.plain_ok(rhs),
                }
            }
            _ => e.children().into_iter().all(|c| self.plain_ok(c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_str;

    const FSM: &str = "module f(input clk, input rst, input go, output busy);\n\
        localparam IDLE = 2'b00, RUN = 2'b10, STOP = 2'b11;\n\
        reg [1:0] state, next;\n\
        always @(posedge clk) if (rst) state <= IDLE; else state <= next;\n\
        always @* begin\n  next = state;\n  case (state)\n    IDLE: if (go) next = RUN;\n    RUN: next = STOP;\n    STOP: next = IDLE;\n    default: next = IDLE;\n  endcase\nend\n\
        assign busy = (state == RUN) || (state == STOP);\nendmodule\n";

    #[test]
    fn recognizes_fsm() {
        let ast = parse_str(FSM).unwrap();
        let cx = Ctx::new(&ast, FSM, &ast.modules[0]);
        let fsms = find_fsms(&cx);
        assert_eq!(fsms.len(), 1);
        let f = &fsms[0];
        assert_eq!(f.group, vec!["state", "next"]);
        assert_eq!(f.states, vec!["IDLE", "RUN", "STOP"]);
        assert_eq!(f.values, vec![0, 2, 3]);
        assert_eq!(f.width, 2);
        assert_eq!(f.transition.as_ref().unwrap().1, "next");
    }

    #[test]
    fn rejects_state_used_arithmetically() {
        let src = FSM.replace("assign busy = (state == RUN) || (state == STOP);", "assign busy = state[1];");
        let ast = parse_str(&src).unwrap();
        let cx = Ctx::new(&ast, &src, &ast.modules[0]);
        assert!(find_fsms(&cx).is_empty());
    }

    #[test]
    fn combinational_adder_has_no_fsm() {
        let src = "module a(input [3:0] x, input [3:0] y, output [4:0] s); assign s = x + y; endmodule";
        let ast = parse_str(src).unwrap();
        let cx = Ctx::new(&ast, src, &ast.modules[0]);
        assert!(find_fsms(&cx).is_empty());
    }
}
