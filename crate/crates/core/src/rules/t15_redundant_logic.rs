//! Trigger-gated payload constants.
//!
//! A new top-level input gates an assignment of the encrypted payload to an
//! existing register or net. With the trigger held low the design behaves
//! exactly as before; synthesis keeps the gated path because the trigger is a
//! primary input, which is what lets the payload be traced in a netlist.

use super::util::{fsm_names, indent_unit, line_indent, line_start, starts_line, Edit};
use super::{Ctx, Rule, RuleId, SiteTarget, TransformError, TransformSite};
use crate::key::WatermarkKey;
use crate::payload::{check_prefix, Payload, HEADER_LEN};
use crate::verilog::ast::*;
use crate::verilog::path::all_stmts;
use crate::verilog::{resolve, Base, NumberLiteral, SignalKind};
use num_bigint::BigUint;

pub const TRIGGER_PORT: &str = "watermark_trigger";

const MAX_WIDTH: u32 = 128;

#[derive(Clone, Debug)]
enum Driver {
    /// Assigned in the always block at this item index.
    Reg { item: usize, blocking: bool },
    /// Driven by the continuous assignment at this item index.
    Net { item: usize },
}

#[derive(Clone, Debug)]
struct Carrier {
    name: String,
    msb: i64,
    lsb: i64,
    output: bool,
    driver: Driver,
}

impl Carrier {
    fn width(&self) -> u32 {
        (self.msb - self.lsb) as u32 + 1
    }
}

/// The top reset test of an asynchronous-reset block, descending through
/// single-statement blocks.
fn reset_if(a: &Always) -> Option<&Stmt> {
    if a.sens.edges().len() < 2 {
        return None;
    }
    let mut s = &a.body;
    while let StmtKind::Block(b) = &s.kind {
        if b.stmts.len() != 1 {
            return None;
        }
        s = &b.stmts[0];
    }
    Some(s)
}

fn carriers(cx: &Ctx) -> Vec<Carrier> {
    let m = cx.module;
    if !cx.is_top || m.ports.is_empty() || cx.symbols.get(TRIGGER_PORT).is_some() {
        return Vec::new();
    }
    let skip = fsm_names(cx);
    let mut out = Vec::new();
    for name in &cx.symbols.order {
        let Some(sig) = cx.symbols.get(name) else { continue };
        if !matches!(sig.kind, SignalKind::Output | SignalKind::Reg | SignalKind::Wire) || !cx.is_plain_signal(name) || skip.contains(name) {
            continue;
        }
        let Some((msb, lsb)) = sig.range else { continue };
        if sig.unresolved_range || msb < lsb || !(8..=MAX_WIDTH).contains(&sig.width()) {
            continue;
        }
        let output = sig.kind == SignalKind::Output;
        if !output && cx.symbols.read_count(name) == 0 {
            continue;
        }
        let drivers = cx.symbols.drivers_of(name);
        let Some(first) = drivers.first() else { continue };
        if drivers.iter().any(|d| d.item != first.item || d.kind != first.kind) {
            continue;
        }
        let driver = match first.kind {
            crate::verilog::symbols::DriverKind::Procedural if sig.is_reg => {
                let ItemKind::Always(a) = &m.items[first.item].kind else { continue };
                let star = matches!(a.sens, EventControl::Star { .. });
                if !star && !a.sens.is_edge_triggered() {
                    continue;
                }
                if a.sens.edges().len() >= 2 && !matches!(reset_if(a).map(|s| &s.kind), Some(StmtKind::If { else_branch: Some(_), .. })) {
                    continue;
                }
                let mut blocking = None;
                a.body.walk(&mut |s| {
                    if let StmtKind::Assign(pa) = &s.kind {
                        if blocking.is_none() && pa.lhs.target_name() == Some(name.as_str()) {
                            blocking = Some(pa.blocking);
                        }
                    }
                });
                Driver::Reg {
                    item: first.item,
                    blocking: blocking.unwrap_or(!a.sens.is_edge_triggered()),
                }
            }
            crate::verilog::symbols::DriverKind::Continuous if !sig.is_reg && drivers.len() == 1 => {
                let ItemKind::Assign(list) = &m.items[first.item].kind else { continue };
                if list.len() != 1 || list[0].lhs.as_ident() != Some(name.as_str()) {
                    continue;
                }
                Driver::Net { item: first.item }
            }
            _ => continue,
        };
        out.push(Carrier {
            name: name.clone(),
            msb,
            lsb,
            output,
            driver,
        });
    }
    out.sort_by_key(|c| (!c.output, std::cmp::Reverse(c.width())));
    out
}

/// Constant parts written to a carrier, MSB first: whole payload bytes,
/// then keyed pad bits.
fn parts(c: &Carrier, payload: &Payload, key: &WatermarkKey, cx: &Ctx) -> Vec<(u32, u128)> {
    let w = c.width();
    let nbytes = ((w / 8) as usize).min(payload.encoded.len());
    let mut v: Vec<(u32, u128)> = payload.encoded[..nbytes].iter().map(|b| (8, u128::from(*b))).collect();
    let pad = w - 8 * nbytes as u32;
    if pad > 0 {
        let bytes = cx.params(key, RuleId::T15).bytes("pad", 16);
        let raw = u128::from_be_bytes(bytes.try_into().expect("sixteen bytes"));
        let mask = if pad >= 128 { u128::MAX } else { (1u128 << pad) - 1 };
        v.push((pad, raw & mask));
    }
    v
}

fn literal(width: u32, value: u128) -> String {
    NumberLiteral::sized(width, Base::Hexadecimal, &BigUint::from(value)).to_string()
}

fn guard(c: &Carrier, parts: &[(u32, u128)], blocking: bool) -> String {
    let op = if blocking { "=" } else { "<=" };
    if parts.len() == 1 {
        return format!("if ({TRIGGER_PORT}) {} {op} {};", c.name, literal(parts[0].0, parts[0].1));
    }
    let mut hi = c.msb;
    let mut body = Vec::new();
    for (w, v) in parts {
        let lo = hi - i64::from(*w) + 1;
        let sel = if hi == lo { format!("[{hi}]") } else { format!("[{hi}:{lo}]") };
        body.push(format!("{}{sel} {op} {};", c.name, literal(*w, *v)));
        hi = lo - 1;
    }
    format!("if ({TRIGGER_PORT}) begin {} end", body.join(" "))
}

fn edits_for(cx: &Ctx, c: &Carrier, payload: &Payload, key: &WatermarkKey) -> Option<Vec<Edit>> {
    let m = cx.module;
    let src = cx.src;
    let last = m.ports.last()?;
    let port = if starts_line(src, last.span.start) {
        format!(",\n{}input {TRIGGER_PORT}", line_indent(src, last.span.start))
    } else {
        format!(", input {TRIGGER_PORT}")
    };
    let mut edits = vec![Edit::insert(last.span.end, port)];
    let parts = parts(c, payload, key, cx);
    match c.driver {
        Driver::Net { item } => {
            let ItemKind::Assign(list) = &m.items[item].kind else { return None };
            let rhs = &list[0].rhs;
            let k = if parts.len() == 1 {
                literal(parts[0].0, parts[0].1)
            } else {
                format!("{{{}}}", parts.iter().map(|(w, v)| literal(*w, *v)).collect::<Vec<_>>().join(", "))
            };
            edits.push(Edit::replace(rhs.span, format!("{TRIGGER_PORT} ? {k} : ({})", cx.text(rhs.span))));
        }
        Driver::Reg { item, blocking } => {
            let ItemKind::Always(a) = &m.items[item].kind else { return None };
            let g = guard(c, &parts, blocking);
            let target = match reset_if(a) {
                Some(Stmt {
                    kind: StmtKind::If {
                        else_branch: Some(e), ..
                    },
                    ..
                }) => e.as_ref(),
                Some(_) => return None,
                None => &a.body,
            };
            match &target.kind {
                StmtKind::Block(b) => {
                    let at = b
                        .end_comments
                        .iter()
                        .find(|c| starts_line(src, c.span.start))
                        .map_or(b.end_span.start, |c| c.span.start);
                    if starts_line(src, at) {
                        let indent = match b.stmts.last() {
                            Some(s) => line_indent(src, s.span.start).to_string(),
                            None => format!("{}{}", line_indent(src, at), indent_unit(src)),
                        };
                        edits.push(Edit::insert(line_start(src, at), format!("{indent}{g}\n")));
                    } else {
                        edits.push(Edit::insert(at, format!("{g} ")));
                    }
                }
                _ => {
                    let outer = line_indent(src, target.span.start);
                    let inner = format!("{outer}{}", indent_unit(src));
                    edits.push(Edit::replace(
                        target.span,
                        format!("begin\n{inner}{}\n{inner}{g}\n{outer}end", cx.text(target.span)),
                    ));
                }
            }
        }
    }
    Some(edits)
}

fn estimated_bits(c: &Carrier) -> f64 {
    8.0 * ((c.width() / 8) as usize).min(HEADER_LEN) as f64
}

/// Bytes carried by the first trigger-gated constant of the module, MSB first.
fn module_bytes(cx: &Ctx) -> Option<Vec<u8>> {
    let is_trigger = |e: &Expr| e.unparen().as_ident() == Some(TRIGGER_PORT);
    // Gated statements in always blocks.
    for (_, s) in all_stmts(cx.module) {
        let StmtKind::If {
            cond,
            then_branch,
            else_branch: None,
        } = &s.kind
        else {
            continue;
        };
        if !is_trigger(cond) {
            continue;
        }
        let stmts: Vec<&Stmt> = match &then_branch.kind {
            StmtKind::Block(b) => b.stmts.iter().collect(),
            _ => vec![then_branch],
        };
        let mut target: Option<&str> = None;
        let mut writes = Vec::new();
        for st in stmts {
            let StmtKind::Assign(a) = &st.kind else { return None };
            let name = a.lhs.target_name()?;
            if target.is_some_and(|t| t != name) {
                return None;
            }
            target = Some(name);
            let (w, v, x) = a.rhs.unparen().as_number()?.to_bits()?;
            if x != 0 {
                return None;
            }
            writes.push((&a.lhs, w, v));
        }
        let sig = cx.symbols.get(target?)?;
        let (left, right) = sig.range?;
        let order: Vec<i64> = if left >= right { (right..=left).rev().collect() } else { (left..=right).collect() };
        let mut bits: std::collections::BTreeMap<i64, bool> = Default::default();
        for (lhs, w, v) in writes {
            let (a, b) = match &lhs.kind {
                ExprKind::Ident(_) => (left, right),
                ExprKind::Index { index, .. } => {
                    let i = cx.symbols.eval(index)? as i64;
                    (i, i)
                }
                ExprKind::PartSelect { msb, lsb, .. } => (cx.symbols.eval(msb)? as i64, cx.symbols.eval(lsb)? as i64),
                _ => return None,
            };
            let idx: Vec<i64> = if a >= b { (b..=a).rev().collect() } else { (a..=b).collect() };
            for (k, i) in idx.iter().enumerate() {
                let bit = (idx.len() - 1 - k) as u32;
                bits.insert(*i, bit < w && (v >> bit) & 1 == 1);
            }
        }
        let seq: Vec<bool> = order.iter().map_while(|i| bits.get(i).copied()).collect();
        return Some(pack(&seq));
    }
    // Gated right-hand sides.
    let mut found = None;
    let mut visit = |e: &Expr| {
        if found.is_some() {
            return;
        }
        e.walk(&mut |x| {
            if found.is_some() {
                return;
            }
            if let ExprKind::Ternary { cond, then_expr, .. } = &x.kind {
                if is_trigger(cond) {
                    found = const_bits(then_expr).map(|b| pack(&b));
                }
            }
        });
    };
    for item in &cx.module.items {
        match &item.kind {
            ItemKind::Assign(list) => list.iter().for_each(|a| visit(&a.rhs)),
            ItemKind::Always(a) => a.body.walk(&mut |s| {
                if let StmtKind::Assign(pa) = &s.kind {
                    visit(&pa.rhs);
                }
            }),
            _ => {}
        }
    }
    found
}

fn const_bits(e: &Expr) -> Option<Vec<bool>> {
    match &e.unparen().kind {
        ExprKind::Number(n) => {
            let (w, v, x) = n.to_bits()?;
            (x == 0).then(|| (0..w).rev().map(|i| (v >> i) & 1 == 1).collect())
        }
        ExprKind::Concat(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(const_bits(p)?);
            }
            Some(out)
        }
        _ => None,
    }
}

fn pack(bits: &[bool]) -> Vec<u8> {
    bits.chunks_exact(8)
        .map(|c| c.iter().fold(0u8, |acc, b| (acc << 1) | u8::from(*b)))
        .collect()
}

/// Width of the carrier a site targets.
pub fn carrier_width(site: &TransformSite) -> Option<u32> {
    if site.rule != RuleId::T15 {
        return None;
    }
    site.detail.split_once("-bit").and_then(|(w, _)| w.parse().ok())
}

/// Payload bytes carried by the trigger-gated logic of any module.
pub fn carrier_bytes(ast: &Ast) -> Vec<u8> {
    let src = ast.source.as_deref().unwrap_or_default();
    for m in &ast.modules {
        let cx = Ctx {
            ast,
            src,
            module: m,
            symbols: resolve(m, Some(ast)),
            is_top: true,
        };
        if let Some(b) = module_bytes(&cx) {
            return b;
        }
    }
    Vec::new()
}

pub struct RedundantLogic;

impl Rule for RedundantLogic {
    fn id(&self) -> RuleId {
        RuleId::T15
    }

    fn sites(&self, cx: &Ctx, _: &WatermarkKey) -> Vec<TransformSite> {
        carriers(cx)
            .into_iter()
            .map(|c| {
                let span = cx.symbols.get(&c.name).map_or(cx.module.span, |s| s.span);
                cx.site(
                    RuleId::T15,
                    SiteTarget::Signal(c.name.clone()),
                    span,
                    format!("{}-bit carrier `{}`", c.width(), c.name),
                    estimated_bits(&c),
                )
            })
            .collect()
    }

    fn edits(&self, cx: &Ctx, site: &TransformSite, key: &WatermarkKey, payload: &Payload) -> Result<(Vec<Edit>, Vec<u8>), TransformError> {
        let SiteTarget::Signal(name) = &site.target else {
            return Err(TransformError::SiteStale("T15 site must name a carrier".into()));
        };
        let c = carriers(cx)
            .into_iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| TransformError::SiteStale(format!("`{name}` cannot carry the payload")))?;
        let edits = edits_for(cx, &c, payload, key).ok_or_else(|| TransformError::SiteStale("no insertion point".into()))?;
        let bytes = parts(&c, payload, key, cx).iter().filter(|(w, _)| *w == 8).map(|(_, v)| *v as u8).collect();
        Ok((edits, bytes))
    }

    fn evidence(&self, cx: &Ctx, key: &WatermarkKey) -> (usize, f64) {
        let Some(bytes) = module_bytes(cx) else { return (0, 0.0) };
        let (matched, full) = check_prefix(&bytes, key);
        if matched == 0 {
            return (0, 0.0);
        }
        (1, 8.0 * matched as f64 + if full { 16.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::{encode_payload, fixture_key_with_first_byte};
    use crate::rules::{applicable_sites, apply, signature_present};
    use crate::verilog::parse_str;

    const REG8: &str = "module top(\n    input clk,\n    input [7:0] d,\n    output reg [7:0] q\n);\n    always @(posedge clk) begin\n        q <= d;\n    end\nendmodule\n";

    #[test]
    fn golden_a5_fixture() {
        let (_, key) = fixture_key_with_first_byte(0xA5, 0);
        let p = encode_payload("gpt-4", "dev-A", &key, 64).unwrap();
        let ast = parse_str(REG8).unwrap();
        let site = applicable_sites(&ast, RuleId::T15, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        let expected = "module top(\n    input clk,\n    input [7:0] d,\n    output reg [7:0] q,\n    input watermark_trigger\n);\n    always @(posedge clk) begin\n        q <= d;\n        if (watermark_trigger) q <= 8'hA5;\n    end\nendmodule\n";
        assert_eq!(out.source.as_deref().unwrap(), expected);
        assert_eq!(carrier_bytes(&out), vec![0xA5]);
        let ev = signature_present(&out, RuleId::T15, &key);
        assert!(ev.present);
        assert_eq!(ev.key_bits, 8.0);
    }

    #[test]
    fn wide_register_carries_whole_frame() {
        let key = WatermarkKey::from_seed(21);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let src = "module top(input clk, input rst, input [79:0] d, output reg [79:0] q);\n  always @(posedge clk or posedge rst)\n    if (rst) q <= 80'd0;\n    else q <= d;\nendmodule\n";
        let ast = parse_str(src).unwrap();
        let site = applicable_sites(&ast, RuleId::T15, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        let bytes = carrier_bytes(&out);
        assert_eq!(&bytes[..p.len()], &p.encoded[..]);
        let ev = signature_present(&out, RuleId::T15, &key);
        assert_eq!(ev.key_bits, 8.0 * 3.0 + 16.0);
        assert!(!signature_present(&out, RuleId::T15, &WatermarkKey::from_seed(22)).present);
    }

    #[test]
    fn net_carrier_uses_gated_mux() {
        let key = WatermarkKey::from_seed(21);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let src = "module top(input [11:0] a, output [11:0] y); assign y = ~a; endmodule";
        let ast = parse_str(src).unwrap();
        let site = applicable_sites(&ast, RuleId::T15, &key).remove(0);
        let (out, _) = apply(&ast, &site, &key, &p).unwrap();
        let text = out.source.as_deref().unwrap();
        assert!(text.contains("assign y = watermark_trigger ? {8'h"), "{text}");
        assert!(text.contains(", input watermark_trigger)"));
        assert_eq!(carrier_bytes(&out), vec![p.encoded[0]]);
    }

    #[test]
    fn narrow_or_submodule_registers_are_skipped() {
        let src = "module sub(input clk, input [7:0] d, output reg [7:0] q); always @(posedge clk) q <= d; endmodule\n\
                   module top(input clk, input [3:0] d, output reg [3:0] q, output [7:0] w); always @(posedge clk) q <= d; sub u(.clk(clk), .d({d, d}), .q(w)); endmodule";
        let ast = parse_str(src).unwrap();
        assert!(applicable_sites(&ast, RuleId::T15, &WatermarkKey::from_seed(1)).is_empty());
    }
}
