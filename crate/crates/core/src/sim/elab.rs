//! Flattens a module hierarchy into signals and processes with every
//! expression sized and typed by the Verilog width rules.

use super::bits::{Bits, MAX_WIDTH};
use super::exec::eval;
use super::SimError;
use crate::verilog::ast::*;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct SigInfo {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    pub map: IndexMap,
    pub init: Option<Bits>,
}

/// Maps a declared index to a bit offset from the LSB.
#[derive(Clone, Copy, Debug)]
pub struct IndexMap {
    pub lsb: i64,
    pub desc: bool,
    pub width: u32,
}

impl IndexMap {
    pub fn plain(width: u32) -> IndexMap {
        IndexMap {
            lsb: 0,
            desc: true,
            width,
        }
    }

    fn from_range(msb: i64, lsb: i64) -> IndexMap {
        IndexMap {
            lsb,
            desc: msb >= lsb,
            width: (msb - lsb).unsigned_abs() as u32 + 1,
        }
    }

    pub fn offset(&self, i: i128) -> Option<u32> {
        let off = if self.desc { i - self.lsb as i128 } else { self.lsb as i128 - i };
        (0..self.width as i128).contains(&off).then_some(off as u32)
    }
}

#[derive(Clone, Debug)]
pub struct CExpr {
    pub kind: CK,
    pub width: u32,
    pub signed: bool,
}

#[derive(Clone, Debug)]
pub enum CK {
    Sig(usize),
    Const(Bits),
    Unary(UnaryOp, Box<CExpr>),
    Binary(BinaryOp, Box<CExpr>, Box<CExpr>),
    Ternary(Box<CExpr>, Box<CExpr>, Box<CExpr>),
    Concat(Vec<CExpr>),
    Repl(u32, Vec<CExpr>),
    Bit { base: Box<CExpr>, index: Box<CExpr>, map: IndexMap },
    Slice { base: Box<CExpr>, lo: u32 },
}

#[derive(Clone, Debug)]
pub enum LValue {
    Whole(usize),
    Bit { sig: usize, index: CExpr, map: IndexMap },
    Slice { sig: usize, lo: u32, width: u32 },
    Concat(Vec<LValue>),
}

#[derive(Clone, Debug)]
pub enum CStmt {
    Block(Vec<CStmt>),
    If(CExpr, Box<CStmt>, Option<Box<CStmt>>),
    Case {
        kind: CaseKind,
        subject: CExpr,
        width: u32,
        signed: bool,
        items: Vec<(Vec<CExpr>, CStmt)>,
        default: Option<Box<CStmt>>,
    },
    Assign {
        lv: LValue,
        rhs: CExpr,
        width: u32,
        blocking: bool,
    },
    Null,
}

#[derive(Clone, Debug)]
pub enum Proc {
    Comb(CStmt),
    Seq { edges: Vec<(Edge, usize)>, body: CStmt },
}

#[derive(Clone, Debug, Default)]
pub struct Design {
    pub signals: Vec<SigInfo>,
    pub procs: Vec<Proc>,
    /// Top-level ports in declaration order.
    pub ports: Vec<(Direction, String, usize)>,
}

impl LValue {
    pub fn width(&self, d: &Design) -> u32 {
        match self {
            LValue::Whole(s) => d.signals[*s].width,
            LValue::Bit { .. } => 1,
            LValue::Slice { width, .. } => *width,
            LValue::Concat(parts) => parts.iter().map(|p| p.width(d)).sum(),
        }
    }
}

#[derive(Clone, Debug)]
enum Binding {
    Sig(usize),
    Param { value: Bits, signed: bool, map: IndexMap },
}

struct Scope {
    prefix: String,
    env: BTreeMap<String, Binding>,
    blocks: Vec<BTreeMap<String, Binding>>,
    constant: bool,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.blocks
            .iter()
            .rev()
            .find_map(|b| b.get(name))
            .or_else(|| self.env.get(name))
    }
}

struct Elab<'a> {
    ast: &'a Ast,
    d: Design,
}

const MAX_DEPTH: usize = 32;

fn unsupported(msg: impl Into<String>) -> SimError {
    SimError::Unsupported(msg.into())
}

fn check_width(w: u32) -> Result<u32, SimError> {
    if w == 0 || w > MAX_WIDTH {
        Err(unsupported(format!("expression width {w} outside 1..={MAX_WIDTH}")))
    } else {
        Ok(w)
    }
}

fn to_int(b: &Bits, signed: bool) -> Option<i64> {
    if !b.is_known() {
        return None;
    }
    let v = if signed { b.as_i128() } else { i128::try_from(b.val).ok()? };
    i64::try_from(v).ok()
}

pub fn elaborate(ast: &Ast) -> Result<Design, SimError> {
    let top = ast.top_module().ok_or_else(|| unsupported("no module"))?;
    let mut e = Elab { ast, d: Design::default() };
    let env = e.module(top, "", &BTreeMap::new(), 0)?;
    for p in &top.ports {
        if let Some(Binding::Sig(id)) = env.get(&p.name.name) {
            e.d.ports.push((p.dir, p.name.name.clone(), *id));
        }
    }
    Ok(e.d)
}

impl<'a> Elab<'a> {
    fn declare(&mut self, name: String, width: u32, signed: bool, map: IndexMap) -> usize {
        self.d.signals.push(SigInfo {
            name,
            width,
            signed,
            map,
            init: None,
        });
        self.d.signals.len() - 1
    }

    fn range(&mut self, sc: &mut Scope, r: &Option<Range>) -> Result<IndexMap, SimError> {
        match r {
            None => Ok(IndexMap::plain(1)),
            Some(r) => {
                let m = self.const_int(sc, &r.msb)?;
                let l = self.const_int(sc, &r.lsb)?;
                let map = IndexMap::from_range(m, l);
                check_width(map.width)?;
                Ok(map)
            }
        }
    }

    fn const_value(&mut self, sc: &mut Scope, e: &Expr) -> Result<CExpr, SimError> {
        let was = sc.constant;
        sc.constant = true;
        let c = self.expr(sc, e);
        sc.constant = was;
        c
    }

    fn const_int(&mut self, sc: &mut Scope, e: &Expr) -> Result<i64, SimError> {
        let c = self.const_value(sc, e)?;
        let v = eval(&c, &[], c.width, c.signed);
        to_int(&v, c.signed).ok_or_else(|| unsupported("non-constant range or select"))
    }

    fn param(&mut self, sc: &mut Scope, range: &Option<Range>, value: &Expr, over: Option<&(Bits, bool)>) -> Result<Binding, SimError> {
        let (v, signed) = match over {
            Some((b, s)) => (*b, *s),
            None => {
                let c = self.const_value(sc, value)?;
                (eval(&c, &[], c.width, c.signed), c.signed)
            }
        };
        Ok(match range {
            Some(_) => {
                let map = self.range(sc, range)?;
                Binding::Param {
                    value: v.resize(map.width, signed),
                    signed: false,
                    map,
                }
            }
            None => Binding::Param {
                value: v,
                signed,
                map: IndexMap::plain(v.width),
            },
        })
    }

    fn module(&mut self, m: &Module, prefix: &str, over: &BTreeMap<String, (Bits, bool)>, depth: usize) -> Result<BTreeMap<String, Binding>, SimError> {
        if depth > MAX_DEPTH {
            return Err(unsupported("instance hierarchy too deep"));
        }
        let mut sc = Scope {
            prefix: prefix.to_string(),
            env: BTreeMap::new(),
            blocks: Vec::new(),
            constant: false,
        };
        for p in &m.params {
            let b = self.param(&mut sc, &p.range, &p.value, over.get(&p.name.name))?;
            sc.env.insert(p.name.name.clone(), b);
        }
        for p in &m.ports {
            if p.dir == Direction::Inout {
                return Err(unsupported("inout ports"));
            }
            let map = self.range(&mut sc, &p.range)?;
            let id = self.declare(format!("{prefix}{}", p.name.name), map.width, p.signed, map);
            sc.env.insert(p.name.name.clone(), Binding::Sig(id));
        }
        for item in &m.items {
            match &item.kind {
                ItemKind::Param(pd) => {
                    for a in &pd.assigns {
                        let o = if pd.local { None } else { over.get(&a.name.name) };
                        let b = self.param(&mut sc, &pd.range, &a.value, o)?;
                        sc.env.insert(a.name.name.clone(), b);
                    }
                }
                ItemKind::Net(nd) => self.net_decl(&mut sc, nd, false)?,
                _ => {}
            }
        }
        for item in &m.items {
            match &item.kind {
                ItemKind::Assign(list) => {
                    for a in list {
                        let lv = self.lvalue(&mut sc, &a.lhs)?;
                        let rhs = self.expr(&mut sc, &a.rhs)?;
                        let st = self.assign(lv, rhs, true)?;
                        self.d.procs.push(Proc::Comb(st));
                    }
                }
                ItemKind::Always(al) => {
                    let body = self.stmt(&mut sc, &al.body)?;
                    let edges = al.sens.edges();
                    if edges.is_empty() {
                        self.d.procs.push(Proc::Comb(body));
                    } else {
                        let mut out = Vec::new();
                        for (edge, sig) in edges {
                            let name = sig.as_ident().ok_or_else(|| unsupported("edge on a non-identifier"))?;
                            match sc.lookup(name) {
                                Some(Binding::Sig(id)) => out.push((edge, *id)),
                                _ => return Err(unsupported(format!("edge on unknown signal `{name}`"))),
                            }
                        }
                        self.d.procs.push(Proc::Seq { edges: out, body });
                    }
                }
                ItemKind::Instance(inst) => self.instance(&mut sc, inst, depth)?,
                _ => {}
            }
        }
        Ok(sc.env)
    }

    fn net_decl(&mut self, sc: &mut Scope, nd: &NetDecl, in_block: bool) -> Result<(), SimError> {
        let map = self.range(sc, &nd.range)?;
        for n in &nd.names {
            let name = &n.name.name;
            if !in_block && matches!(sc.env.get(name), Some(Binding::Sig(_))) {
                continue;
            }
            let full = match (in_block, sc.blocks.len()) {
                (true, depth) => format!("{}{}#{depth}.{name}", sc.prefix, self.d.signals.len()),
                _ => format!("{}{name}", sc.prefix),
            };
            let id = self.declare(full, map.width, nd.signed, map);
            if in_block {
                sc.blocks.last_mut().expect("block scope").insert(name.clone(), Binding::Sig(id));
            } else {
                sc.env.insert(name.clone(), Binding::Sig(id));
            }
            if let Some(init) = &n.init {
                match nd.kind {
                    NetKind::Reg => {
                        let c = self.const_value(sc, init)?;
                        let w = map.width.max(c.width);
                        let v = eval(&c, &[], w, c.signed).resize(map.width, false);
                        self.d.signals[id].init = Some(v);
                    }
                    NetKind::Wire => {
                        let rhs = self.expr(sc, init)?;
                        let st = self.assign(LValue::Whole(id), rhs, true)?;
                        self.d.procs.push(Proc::Comb(st));
                    }
                }
            }
        }
        Ok(())
    }

    fn instance(&mut self, sc: &mut Scope, inst: &Instance, depth: usize) -> Result<(), SimError> {
        let child = self
            .ast
            .module(&inst.module.name)
            .ok_or_else(|| unsupported(format!("unknown module `{}`", inst.module.name)))?;
        let mut over = BTreeMap::new();
        for (i, c) in inst.params.iter().enumerate() {
            let (name, e) = match c {
                Connection::Named { port, expr: Some(e) } => (port.name.clone(), e),
                Connection::Named { expr: None, .. } => continue,
                Connection::Positional(e) => match child.params.get(i) {
                    Some(p) => (p.name.name.clone(), e),
                    None => return Err(unsupported("too many parameter overrides")),
                },
            };
            let c = self.const_value(sc, e)?;
            over.insert(name, (eval(&c, &[], c.width, c.signed), c.signed));
        }
        for iname in &inst.instances {
            let prefix = format!("{}{}.", sc.prefix, iname.name.name);
            let env = self.module(child, &prefix, &over, depth + 1)?;
            for (i, c) in iname.connections.iter().enumerate() {
                let (port, e) = match c {
                    Connection::Named { port, expr: Some(e) } => match child.port(&port.name) {
                        Some(p) => (p, e),
                        None => return Err(unsupported(format!("no port `{}` on `{}`", port.name, child.name.name))),
                    },
                    Connection::Named { expr: None, .. } => continue,
                    Connection::Positional(e) => match child.ports.get(i) {
                        Some(p) => (p, e),
                        None => return Err(unsupported("too many port connections")),
                    },
                };
                let Some(Binding::Sig(inner)) = env.get(&port.name.name) else {
                    continue;
                };
                let inner = *inner;
                let info = &self.d.signals[inner];
                let inner_expr = CExpr {
                    kind: CK::Sig(inner),
                    width: info.width,
                    signed: info.signed,
                };
                let st = match port.dir {
                    Direction::Input => {
                        let rhs = self.expr(sc, e)?;
                        self.assign(LValue::Whole(inner), rhs, true)?
                    }
                    _ => {
                        let lv = self.lvalue(sc, e)?;
                        self.assign(lv, inner_expr, true)?
                    }
                };
                self.d.procs.push(Proc::Comb(st));
            }
        }
        Ok(())
    }

    fn assign(&self, lv: LValue, rhs: CExpr, blocking: bool) -> Result<CStmt, SimError> {
        let width = check_width(lv.width(&self.d).max(rhs.width))?;
        Ok(CStmt::Assign { lv, rhs, width, blocking })
    }

    fn stmt(&mut self, sc: &mut Scope, s: &Stmt) -> Result<CStmt, SimError> {
        Ok(match &s.kind {
            StmtKind::Null => CStmt::Null,
            StmtKind::Block(b) => {
                sc.blocks.push(BTreeMap::new());
                for d in &b.decls {
                    if let ItemKind::Net(nd) = &d.kind {
                        self.net_decl(sc, nd, true)?;
                    }
                }
                let body: Result<Vec<CStmt>, SimError> = b.stmts.iter().map(|x| self.stmt(sc, x)).collect();
                sc.blocks.pop();
                CStmt::Block(body?)
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.expr(sc, cond)?;
                let t = self.stmt(sc, then_branch)?;
                let e = match else_branch {
                    Some(e) => Some(Box::new(self.stmt(sc, e)?)),
                    None => None,
                };
                CStmt::If(c, Box::new(t), e)
            }
            StmtKind::Case(c) => {
                let subject = self.expr(sc, &c.subject)?;
                let mut width = subject.width;
                let mut signed = subject.signed;
                let mut items = Vec::new();
                let mut default = None;
                for it in &c.items {
                    let body = self.stmt(sc, &it.body)?;
                    if it.is_default() {
                        default.get_or_insert(Box::new(body));
                        continue;
                    }
                    let labels: Result<Vec<CExpr>, SimError> = it.labels.iter().map(|l| self.expr(sc, l)).collect();
                    let labels = labels?;
                    for l in &labels {
                        width = width.max(l.width);
                        signed &= l.signed;
                    }
                    items.push((labels, body));
                }
                CStmt::Case {
                    kind: c.kind,
                    subject,
                    width,
                    signed,
                    items,
                    default,
                }
            }
            StmtKind::Assign(a) => {
                let lv = self.lvalue(sc, &a.lhs)?;
                let rhs = self.expr(sc, &a.rhs)?;
                self.assign(lv, rhs, a.blocking)?
            }
        })
    }

    fn signal(&mut self, sc: &mut Scope, name: &str) -> Result<usize, SimError> {
        match sc.lookup(name) {
            Some(Binding::Sig(id)) => Ok(*id),
            Some(Binding::Param { .. }) => Err(unsupported(format!("assignment to parameter `{name}`"))),
            None => {
                let id = self.declare(format!("{}{name}", sc.prefix), 1, false, IndexMap::plain(1));
                sc.env.insert(name.to_string(), Binding::Sig(id));
                Ok(id)
            }
        }
    }

    fn lvalue(&mut self, sc: &mut Scope, e: &Expr) -> Result<LValue, SimError> {
        match &e.kind {
            ExprKind::Ident(n) => Ok(LValue::Whole(self.signal(sc, n)?)),
            ExprKind::Index { base, index } => {
                let name = base.as_ident().ok_or_else(|| unsupported("select of a non-identifier target"))?;
                let sig = self.signal(sc, name)?;
                let index = self.expr(sc, index)?;
                Ok(LValue::Bit {
                    sig,
                    index,
                    map: self.d.signals[sig].map,
                })
            }
            ExprKind::PartSelect { base, msb, lsb } => {
                let name = base.as_ident().ok_or_else(|| unsupported("select of a non-identifier target"))?;
                let sig = self.signal(sc, name)?;
                let (lo, width) = self.part(sc, self.d.signals[sig].map, msb, lsb)?;
                Ok(LValue::Slice { sig, lo, width })
            }
            ExprKind::Concat(parts) => Ok(LValue::Concat(parts.iter().map(|p| self.lvalue(sc, p)).collect::<Result<_, _>>()?)),
            ExprKind::Paren(inner) => self.lvalue(sc, inner),
            _ => Err(unsupported("assignment target")),
        }
    }

    fn part(&mut self, sc: &mut Scope, map: IndexMap, msb: &Expr, lsb: &Expr) -> Result<(u32, u32), SimError> {
        let m = self.const_int(sc, msb)?;
        let l = self.const_int(sc, lsb)?;
        let width = check_width((m - l).unsigned_abs() as u32 + 1)?;
        let off = |i: i64| if map.desc { i - map.lsb } else { map.lsb - i };
        let lo = off(m).min(off(l));
        if lo < 0 {
            return Err(unsupported("part-select below the declared range"));
        }
        Ok((lo as u32, width))
    }

    fn expr(&mut self, sc: &mut Scope, e: &Expr) -> Result<CExpr, SimError> {
        let c = |kind, width, signed| Ok(CExpr { kind, width, signed });
        match &e.kind {
            ExprKind::Paren(inner) => self.expr(sc, inner),
            ExprKind::Number(n) => {
                let (w, v, x) = n.to_bits().ok_or_else(|| unsupported(format!("literal `{n}` wider than {MAX_WIDTH} bits")))?;
                c(CK::Const(Bits::new(w, v, x)), w, n.is_signed())
            }
            ExprKind::Ident(name) => match sc.lookup(name).cloned() {
                Some(Binding::Param { value, signed, .. }) => c(CK::Const(value), value.width, signed),
                Some(Binding::Sig(id)) if !sc.constant => {
                    let s = &self.d.signals[id];
                    c(CK::Sig(id), s.width, s.signed)
                }
                Some(Binding::Sig(_)) => Err(unsupported(format!("`{name}` is not a constant"))),
                None if sc.constant => Err(unsupported(format!("unknown parameter `{name}`"))),
                None => {
                    let id = self.signal(sc, name)?;
                    c(CK::Sig(id), 1, false)
                }
            },
            ExprKind::Unary { op, operand } => {
                let a = self.expr(sc, operand)?;
                let (w, s) = match op {
                    UnaryOp::Plus | UnaryOp::Minus | UnaryOp::BitNot => (a.width, a.signed),
                    _ => (1, false),
                };
                c(CK::Unary(*op, Box::new(a)), w, s)
            }
            ExprKind::Binary { op, lhs, rhs, .. } => {
                let a = self.expr(sc, lhs)?;
                let b = self.expr(sc, rhs)?;
                use BinaryOp::*;
                let (w, s) = match op {
                    Add | Sub | Mul | Div | Mod | BitAnd | BitOr | BitXor | BitXnor => (a.width.max(b.width), a.signed && b.signed),
                    Shl | Shr | AShl | AShr | Pow => (a.width, a.signed),
                    _ => (1, false),
                };
                c(CK::Binary(*op, Box::new(a), Box::new(b)), w, s)
            }
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                let k = self.expr(sc, cond)?;
                let t = self.expr(sc, then_expr)?;
                let f = self.expr(sc, else_expr)?;
                let (w, s) = (t.width.max(f.width), t.signed && f.signed);
                c(CK::Ternary(Box::new(k), Box::new(t), Box::new(f)), w, s)
            }
            ExprKind::Concat(parts) => {
                let parts: Vec<CExpr> = parts.iter().map(|p| self.expr(sc, p)).collect::<Result<_, _>>()?;
                let w = check_width(parts.iter().map(|p| p.width).sum())?;
                c(CK::Concat(parts), w, false)
            }
            ExprKind::Replicate { count, parts } => {
                let n = self.const_int(sc, count)?;
                let n = u32::try_from(n).ok().filter(|n| *n > 0).ok_or_else(|| unsupported("replication count"))?;
                let parts: Vec<CExpr> = parts.iter().map(|p| self.expr(sc, p)).collect::<Result<_, _>>()?;
                let one: u32 = parts.iter().map(|p| p.width).sum();
                let w = check_width(one.saturating_mul(n))?;
                c(CK::Repl(n, parts), w, false)
            }
            ExprKind::Index { base, index } => {
                let map = self.map_of(sc, base);
                let b = self.expr(sc, base)?;
                let map = map.unwrap_or(IndexMap::plain(b.width));
                let i = self.expr(sc, index)?;
                c(
                    CK::Bit {
                        base: Box::new(b),
                        index: Box::new(i),
                        map,
                    },
                    1,
                    false,
                )
            }
            ExprKind::PartSelect { base, msb, lsb } => {
                let map = self.map_of(sc, base);
                let b = self.expr(sc, base)?;
                let map = map.unwrap_or(IndexMap::plain(b.width));
                let (lo, w) = self.part(sc, map, msb, lsb)?;
                c(CK::Slice { base: Box::new(b), lo }, w, false)
            }
        }
    }

    fn map_of(&self, sc: &Scope, base: &Expr) -> Option<IndexMap> {
        match sc.lookup(base.as_ident()?)? {
            Binding::Sig(id) => Some(self.d.signals[*id].map),
            Binding::Param { map, .. } => Some(*map),
        }
    }
}
