//! Expression evaluation and the event loop.

use super::bits::{mask, Bits};
use super::elab::{elaborate, CExpr, CStmt, Design, LValue, Proc, CK};
use super::SimError;
use crate::verilog::ast::*;
use std::collections::BTreeMap;

/// Value of `e` in a context of `w` bits; `s` is the context signedness.
pub fn eval(e: &CExpr, vals: &[Bits], w: u32, s: bool) -> Bits {
    let s = s && e.signed;
    let selfd = |x: &CExpr| eval(x, vals, x.width, x.signed);
    match &e.kind {
        CK::Sig(i) => vals[*i].resize(w, s),
        CK::Const(b) => b.resize(w, s),
        CK::Unary(op, a) => match op {
            UnaryOp::Plus => eval(a, vals, w, s),
            UnaryOp::Minus => negate(&eval(a, vals, w, s)),
            UnaryOp::BitNot => eval(a, vals, w, s).not(),
            UnaryOp::LogicalNot => Bits::bit(selfd(a).truth().map(|t| !t)).resize(w, false),
            UnaryOp::RedAnd => selfd(a).reduce_and().resize(w, false),
            UnaryOp::RedNand => selfd(a).reduce_and().not().resize(w, false),
            UnaryOp::RedOr => selfd(a).reduce_or().resize(w, false),
            UnaryOp::RedNor => selfd(a).reduce_or().not().resize(w, false),
            UnaryOp::RedXor => selfd(a).reduce_xor().resize(w, false),
            UnaryOp::RedXnor => selfd(a).reduce_xor().not().resize(w, false),
        },
        CK::Binary(op, a, b) => binary(*op, a, b, vals, w, s),
        CK::Ternary(c, t, f) => match selfd(c).truth() {
            Some(true) => eval(t, vals, w, s),
            Some(false) => eval(f, vals, w, s),
            None => eval(t, vals, w, s).merge(&eval(f, vals, w, s)),
        },
        CK::Concat(parts) => Bits::concat(&parts.iter().map(selfd).collect::<Vec<_>>()).resize(w, false),
        CK::Repl(n, parts) => {
            let one: Vec<Bits> = parts.iter().map(selfd).collect();
            let all: Vec<Bits> = (0..*n).flat_map(|_| one.iter().copied()).collect();
            Bits::concat(&all).resize(w, false)
        }
        CK::Bit { base, index, map } => {
            let i = selfd(index);
            if !i.is_known() {
                return Bits::x(1).resize(w, false);
            }
            let idx = if index.signed { i.as_i128() } else { i.val as i128 };
            match map.offset(idx) {
                Some(off) => selfd(base).slice(off, 1).resize(w, false),
                None => Bits::x(1).resize(w, false),
            }
        }
        CK::Slice { base, lo } => selfd(base).slice(*lo, e.width).resize(w, false),
    }
}

fn negate(a: &Bits) -> Bits {
    if !a.is_known() {
        return Bits::x(a.width);
    }
    Bits::known(a.width, a.val.wrapping_neg())
}

fn arith(op: BinaryOp, a: &Bits, b: &Bits, w: u32, s: bool) -> Bits {
    if !a.is_known() || !b.is_known() {
        return Bits::x(w);
    }
    let (x, y) = (a.val, b.val);
    let v = match op {
        BinaryOp::Add => x.wrapping_add(y),
        BinaryOp::Sub => x.wrapping_sub(y),
        BinaryOp::Mul => x.wrapping_mul(y),
        BinaryOp::Div | BinaryOp::Mod if y == 0 => return Bits::x(w),
        BinaryOp::Div if s => a.as_i128().wrapping_div(b.as_i128()) as u128,
        BinaryOp::Mod if s => a.as_i128().wrapping_rem(b.as_i128()) as u128,
        BinaryOp::Div => x / y,
        BinaryOp::Mod => x % y,
        _ => unreachable!("not an arithmetic operator"),
    };
    Bits::known(w, v)
}

fn pow(base: &Bits, exp: &Bits, exp_signed: bool, w: u32) -> Bits {
    if !base.is_known() || !exp.is_known() {
        return Bits::x(w);
    }
    if exp_signed && exp.as_i128() < 0 {
        return Bits::known(w, 0);
    }
    let (mut acc, mut b, mut e) = (1u128, base.val, exp.val);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc.wrapping_mul(b);
        }
        b = b.wrapping_mul(b);
        e >>= 1;
    }
    Bits::known(w, acc)
}

fn shift(op: BinaryOp, a: &Bits, amt: &Bits, w: u32, s: bool) -> Bits {
    if !amt.is_known() {
        return Bits::x(w);
    }
    let n = u32::try_from(amt.val).unwrap_or(u32::MAX);
    let left = matches!(op, BinaryOp::Shl | BinaryOp::AShl);
    if left {
        let f = |v: u128| if n >= w { 0 } else { v << n };
        return Bits::new(w, f(a.val), f(a.xmask));
    }
    let f = |v: u128| if n >= w { 0 } else { v >> n };
    let mut out = Bits::new(w, f(a.val), f(a.xmask));
    if op == BinaryOp::AShr && s {
        let top = 1u128 << (w - 1);
        let fill = mask(w) & !(mask(w.saturating_sub(n)));
        if a.xmask & top != 0 {
            out = Bits::new(w, out.val, out.xmask | fill);
        } else if a.val & top != 0 {
            out = Bits::new(w, out.val | fill, out.xmask);
        }
    }
    out
}

fn compare(op: BinaryOp, a: &Bits, b: &Bits, signed: bool) -> Bits {
    match op {
        BinaryOp::CaseEq => return Bits::bit(Some(a == b)),
        BinaryOp::CaseNe => return Bits::bit(Some(a != b)),
        BinaryOp::Eq | BinaryOp::Ne => {
            let eq = if a.conflicts(b) != 0 {
                Some(false)
            } else if a.is_known() && b.is_known() {
                Some(true)
            } else {
                None
            };
            return Bits::bit(if op == BinaryOp::Eq { eq } else { eq.map(|v| !v) });
        }
        _ => {}
    }
    if !a.is_known() || !b.is_known() {
        return Bits::x(1);
    }
    let ord = if signed { a.as_i128().cmp(&b.as_i128()) } else { a.val.cmp(&b.val) };
    use std::cmp::Ordering::*;
    Bits::bit(Some(match op {
        BinaryOp::Lt => ord == Less,
        BinaryOp::Le => ord != Greater,
        BinaryOp::Gt => ord == Greater,
        BinaryOp::Ge => ord != Less,
        _ => unreachable!("not a relational operator"),
    }))
}

fn binary(op: BinaryOp, a: &CExpr, b: &CExpr, vals: &[Bits], w: u32, s: bool) -> Bits {
    use BinaryOp::*;
    match op {
        Add | Sub | Mul | Div | Mod => arith(op, &eval(a, vals, w, s), &eval(b, vals, w, s), w, s),
        BitAnd => eval(a, vals, w, s).and(&eval(b, vals, w, s)),
        BitOr => eval(a, vals, w, s).or(&eval(b, vals, w, s)),
        BitXor => eval(a, vals, w, s).xor(&eval(b, vals, w, s)),
        BitXnor => eval(a, vals, w, s).xor(&eval(b, vals, w, s)).not(),
        Pow => pow(&eval(a, vals, w, s), &eval(b, vals, b.width, b.signed), b.signed, w),
        Shl | Shr | AShl | AShr => shift(op, &eval(a, vals, w, s), &eval(b, vals, b.width, false), w, s),
        LogAnd | LogOr => {
            let x = eval(a, vals, a.width, a.signed).truth();
            let y = eval(b, vals, b.width, b.signed).truth();
            let r = if op == LogAnd {
                match (x, y) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                }
            } else {
                match (x, y) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                }
            };
            Bits::bit(r).resize(w, false)
        }
        _ => {
            let ow = a.width.max(b.width);
            let os = a.signed && b.signed;
            compare(op, &eval(a, vals, ow, os), &eval(b, vals, ow, os), os).resize(w, false)
        }
    }
}

/// A resolved write of `value` into `width` bits of `sig` at offset `lo`.
type Write = (usize, u32, u32, Bits);

fn targets(d: &Design, lv: &LValue, v: &Bits, vals: &[Bits], out: &mut Vec<Write>) {
    match lv {
        LValue::Whole(s) => out.push((*s, 0, d.signals[*s].width, *v)),
        LValue::Slice { sig, lo, width } => out.push((*sig, *lo, *width, *v)),
        LValue::Bit { sig, index, map } => {
            let i = eval(index, vals, index.width, index.signed);
            if i.is_known() {
                let idx = if index.signed { i.as_i128() } else { i.val as i128 };
                if let Some(off) = map.offset(idx) {
                    out.push((*sig, off, 1, *v));
                }
            }
        }
        LValue::Concat(parts) => {
            let mut lo = 0;
            for p in parts.iter().rev() {
                let w = p.width(d);
                targets(d, p, &v.slice(lo, w), vals, out);
                lo += w;
            }
        }
    }
}

fn commit(vals: &mut [Bits], (sig, lo, width, v): Write) {
    vals[sig] = vals[sig].with_slice(lo, width, &v);
}

fn case_match(kind: CaseKind, subj: &Bits, label: &Bits) -> bool {
    let wild = match kind {
        CaseKind::Case => return subj == label,
        CaseKind::Casez => label.xmask,
        CaseKind::Casex => label.xmask | subj.xmask,
    };
    (subj.val ^ label.val) & !wild == 0 && (subj.xmask ^ label.xmask) & !wild == 0
}

fn exec(d: &Design, st: &CStmt, vals: &mut Vec<Bits>, nba: &mut Vec<Write>) {
    match st {
        CStmt::Null => {}
        CStmt::Block(list) => list.iter().for_each(|s| exec(d, s, vals, nba)),
        CStmt::If(c, t, f) => {
            if eval(c, vals, c.width, c.signed).truth() == Some(true) {
                exec(d, t, vals, nba);
            } else if let Some(f) = f {
                exec(d, f, vals, nba);
            }
        }
        CStmt::Case {
            kind,
            subject,
            width,
            signed,
            items,
            default,
        } => {
            let sv = eval(subject, vals, *width, *signed);
            for (labels, body) in items {
                if labels.iter().any(|l| case_match(*kind, &sv, &eval(l, vals, *width, *signed))) {
                    return exec(d, body, vals, nba);
                }
            }
            if let Some(b) = default {
                exec(d, b, vals, nba);
            }
        }
        CStmt::Assign { lv, rhs, width, blocking } => {
            let v = eval(rhs, vals, *width, rhs.signed);
            let mut w = Vec::new();
            targets(d, lv, &v.resize(lv.width(d), false), vals, &mut w);
            if *blocking {
                w.into_iter().for_each(|x| commit(vals, x));
            } else {
                nba.extend(w);
            }
        }
    }
}

const SETTLE_LIMIT: usize = 256;
const DELTA_LIMIT: usize = 32;

/// Cycle-based simulator over a flattened design.
pub struct Simulator {
    d: Design,
    vals: Vec<Bits>,
    ports: BTreeMap<String, usize>,
}

fn bit0(b: &Bits) -> Option<bool> {
    (b.xmask & 1 == 0).then_some(b.val & 1 == 1)
}

fn fired(edge: Edge, old: &Bits, new: &Bits) -> bool {
    matches!(
        (edge, bit0(old), bit0(new)),
        (Edge::Posedge, Some(false), Some(true) | None)
            | (Edge::Posedge, None, Some(true))
            | (Edge::Negedge, Some(true), Some(false) | None)
            | (Edge::Negedge, None, Some(false))
    )
}

impl Simulator {
    pub fn new(ast: &Ast) -> Result<Simulator, SimError> {
        let d = elaborate(ast)?;
        let vals = d.signals.iter().map(|s| s.init.unwrap_or(Bits::x(s.width))).collect();
        let ports = d.ports.iter().map(|(_, n, id)| (n.clone(), *id)).collect();
        let mut sim = Simulator { d, vals, ports };
        sim.settle()?;
        Ok(sim)
    }

    pub fn design(&self) -> &Design {
        &self.d
    }

    pub fn ports(&self, dir: Direction) -> Vec<(String, u32)> {
        self.d
            .ports
            .iter()
            .filter(|(d, _, _)| *d == dir)
            .map(|(_, n, id)| (n.clone(), self.d.signals[*id].width))
            .collect()
    }

    pub fn is_sequential(&self) -> bool {
        self.d.procs.iter().any(|p| matches!(p, Proc::Seq { .. }))
    }

    /// Top-level ports driving an edge-triggered process, with the edges seen.
    pub fn edge_ports(&self) -> BTreeMap<String, Vec<Edge>> {
        let mut out: BTreeMap<String, Vec<Edge>> = BTreeMap::new();
        for p in &self.d.procs {
            if let Proc::Seq { edges, .. } = p {
                for (e, id) in edges {
                    if let Some((_, n, _)) = self.d.ports.iter().find(|(dir, _, pid)| pid == id && *dir == Direction::Input) {
                        let v = out.entry(n.clone()).or_default();
                        if !v.contains(e) {
                            v.push(*e);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn peek(&self, port: &str) -> Option<Bits> {
        self.ports.get(port).map(|&id| self.vals[id])
    }

    fn settle(&mut self) -> Result<(), SimError> {
        for _ in 0..SETTLE_LIMIT {
            let before = self.vals.clone();
            let mut nba = Vec::new();
            for p in &self.d.procs {
                if let Proc::Comb(st) = p {
                    exec(&self.d, st, &mut self.vals, &mut nba);
                }
            }
            nba.into_iter().for_each(|w| commit(&mut self.vals, w));
            if self.vals == before {
                return Ok(());
            }
        }
        Err(SimError::NoConvergence)
    }

    /// Drive the given input ports, settle, and run every triggered process
    /// until no further edges occur.
    pub fn step(&mut self, inputs: &[(&str, Bits)]) -> Result<(), SimError> {
        let mut prev = self.vals.clone();
        for (name, v) in inputs {
            let id = *self
                .ports
                .get(*name)
                .ok_or_else(|| SimError::Unsupported(format!("no port `{name}`")))?;
            self.vals[id] = v.resize(self.d.signals[id].width, false);
        }
        self.settle()?;
        for _ in 0..DELTA_LIMIT {
            let triggered: Vec<usize> = self
                .d
                .procs
                .iter()
                .enumerate()
                .filter(|(_, p)| match p {
                    Proc::Seq { edges, .. } => edges.iter().any(|(e, id)| fired(*e, &prev[*id], &self.vals[*id])),
                    Proc::Comb(_) => false,
                })
                .map(|(i, _)| i)
                .collect();
            if triggered.is_empty() {
                return Ok(());
            }
            prev = self.vals.clone();
            let mut nba = Vec::new();
            for i in triggered {
                if let Proc::Seq { body, .. } = &self.d.procs[i] {
                    exec(&self.d, body, &mut self.vals, &mut nba);
                }
            }
            nba.into_iter().for_each(|w| commit(&mut self.vals, w));
            self.settle()?;
        }
        Err(SimError::NoConvergence)
    }
}

/// Run `stimulus` (one input assignment per step) and record every output
/// port after each step.
pub fn simulate(ast: &Ast, stimulus: &[Vec<(String, u128)>]) -> Result<Vec<BTreeMap<String, Bits>>, SimError> {
    let mut sim = Simulator::new(ast)?;
    let outputs = sim.ports(Direction::Output);
    let mut trace = Vec::with_capacity(stimulus.len());
    for step in stimulus {
        let ins: Vec<(&str, Bits)> = step.iter().map(|(n, v)| (n.as_str(), Bits::known(128, *v))).collect();
        sim.step(&ins)?;
        trace.push(
            outputs
                .iter()
                .map(|(n, _)| (n.clone(), sim.peek(n).expect("output port")))
                .collect(),
        );
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_str;

    fn run(src: &str, steps: &[&[(&str, u128)]]) -> Vec<BTreeMap<String, Bits>> {
        let stim: Vec<Vec<(String, u128)>> = steps.iter().map(|s| s.iter().map(|(n, v)| (n.to_string(), *v)).collect()).collect();
        simulate(&parse_str(src).unwrap(), &stim).unwrap()
    }

    #[test]
    fn inverter() {
        let t = run("module inv(input a, output y); assign y = ~a; endmodule", &[&[("a", 0)], &[("a", 1)]]);
        assert_eq!(t[0]["y"], Bits::known(1, 1));
        assert_eq!(t[1]["y"], Bits::known(1, 0));
    }

    #[test]
    fn counter_counts_from_reset() {
        let src = "module c(input clk, input rst, output reg [1:0] q);\n always @(posedge clk) if (rst) q <= 2'd0; else q <= q + 2'd1;\nendmodule";
        let mut steps: Vec<&[(&str, u128)]> = vec![&[("clk", 0), ("rst", 1)], &[("clk", 1)], &[("clk", 0), ("rst", 0)]];
        for _ in 0..3 {
            steps.push(&[("clk", 1)]);
            steps.push(&[("clk", 0)]);
        }
        let t = run(src, &steps);
        let qs: Vec<u128> = t.iter().skip(2).step_by(2).map(|m| m["q"].val).collect();
        assert_eq!(qs, vec![0, 1, 2, 3]);
        assert!(!t[0]["q"].is_known());
    }

    #[test]
    fn context_width_carries_into_operands() {
        let src = "module m(input [3:0] a, input [3:0] b, output [4:0] s, output [3:0] n); assign s = a + b; assign n = ~(~a | ~b); endmodule";
        let t = run(src, &[&[("a", 15), ("b", 1)]]);
        assert_eq!(t[0]["s"], Bits::known(5, 16));
        assert_eq!(t[0]["n"], Bits::known(4, 1));
    }

    #[test]
    fn signed_arithmetic_and_shifts() {
        let src = "module m(input signed [3:0] a, output signed [7:0] y, output [7:0] z, output lt); assign y = a >>> 1; assign z = a; assign lt = a < 4'sd0; endmodule";
        let t = run(src, &[&[("a", 0b1100)]]);
        assert_eq!(t[0]["y"], Bits::known(8, 0xfe));
        assert_eq!(t[0]["z"], Bits::known(8, 0xfc));
        assert_eq!(t[0]["lt"], Bits::known(1, 1));
    }

    #[test]
    fn hierarchy_and_params() {
        let src = "module add #(parameter W = 2) (input [W-1:0] a, output [W-1:0] y); assign y = a + 1'b1; endmodule\n\
                   module top(input [3:0] a, output [3:0] y); add #(.W(4)) u(.a(a), .y(y)); endmodule";
        let t = run(src, &[&[("a", 15)], &[("a", 6)]]);
        assert_eq!(t[0]["y"], Bits::known(4, 0));
        assert_eq!(t[1]["y"], Bits::known(4, 7));
    }

    #[test]
    fn case_and_ascending_ranges() {
        let src = "module m(input [1:0] s, output reg [0:3] y, output b);\n always @* case (s) 2'd0: y = 4'b1000; 2'd1, 2'd2: y = 4'b0100; default: y = 4'b0000; endcase\n assign b = y[1];\nendmodule";
        let t = run(src, &[&[("s", 0)], &[("s", 2)], &[("s", 3)]]);
        assert_eq!(t[0]["b"].val, 0);
        assert_eq!(t[1]["b"].val, 1);
        assert_eq!(t[2]["y"].val, 0);
    }

    #[test]
    fn async_reset_fires_on_reset_edge() {
        let src = "module m(input clk, input rst_n, input d, output reg q);\n always @(posedge clk or negedge rst_n) if (!rst_n) q <= 1'b0; else q <= d;\nendmodule";
        let t = run(src, &[&[("clk", 0), ("rst_n", 1), ("d", 1)], &[("rst_n", 0)], &[("rst_n", 1)], &[("clk", 1)]]);
        assert!(!t[0]["q"].is_known());
        assert_eq!(t[1]["q"].val, 0);
        assert_eq!(t[3]["q"].val, 1);
    }
}
