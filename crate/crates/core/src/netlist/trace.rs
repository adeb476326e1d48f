use super::cells::{eval3, CellFunction, CellLibrary};
use super::{BitRef, NetlistEvidence, NetlistGraph};
use crate::key::WatermarkKey;
use crate::payload::{check_prefix, decode_payload, HEADER_LEN};
use crate::verilog::{Direction, Expr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};

/// Narrowest carrier searched when no width is given.
pub const DEFAULT_CARRIER_BITS: u32 = 24;

const SAMPLES: usize = 64;
const EXHAUSTIVE_LEAVES: usize = 20;

type Bit = (usize, u32);

#[derive(Clone, Copy)]
enum Driver {
    Alias(BitRef),
    /// Output pin of a cell.
    Cell(usize),
}

struct Graph<'a> {
    g: &'a NetlistGraph,
    lib: &'a CellLibrary,
    drivers: HashMap<Bit, Driver>,
}

impl<'a> Graph<'a> {
    fn new(g: &'a NetlistGraph, lib: &'a CellLibrary) -> Graph<'a> {
        let mut drivers = HashMap::new();
        for (l, r) in &g.assigns {
            if let BitRef::Net { net, offset } = l {
                drivers.insert((*net, *offset), Driver::Alias(*r));
            }
        }
        for (i, c) in g.cells.iter().enumerate() {
            let Some(kind) = lib.get(&c.ty) else { continue };
            if let Some([BitRef::Net { net, offset }]) = c.conns.get(&kind.output).map(Vec::as_slice) {
                drivers.insert((*net, *offset), Driver::Cell(i));
            }
        }
        Graph { g, lib, drivers }
    }

    fn function(&self, cell: usize) -> (&'a Expr, bool) {
        match &self.lib.get(&self.g.cells[cell].ty).expect("driver cells are known").function {
            CellFunction::Comb(e) => (e, false),
            CellFunction::State(e) => (e, true),
        }
    }

    /// Follow assignment aliases to the bit that is actually driven.
    fn canonical(&self, mut b: BitRef) -> BitRef {
        for _ in 0..self.g.assigns.len() + 1 {
            match b {
                BitRef::Net { net, offset } => match self.drivers.get(&(net, offset)) {
                    Some(Driver::Alias(next)) => b = *next,
                    _ => return b,
                },
                BitRef::Const(_) => return b,
            }
        }
        BitRef::Const(None)
    }
}

/// Evaluation of one carrier bit. Primary inputs, undriven bits and storage
/// outputs below the root are leaves.
struct Cone<'g, 'a> {
    graph: &'g Graph<'a>,
    trigger: Bit,
    trigger_value: bool,
    leaves: BTreeSet<Bit>,
    cells: BTreeSet<usize>,
    assignment: HashMap<Bit, bool>,
    memo: HashMap<Bit, (Option<bool>, bool)>,
    active: BTreeSet<Bit>,
    /// A cone had too many inputs to settle exhaustively.
    too_wide: bool,
}

impl<'g, 'a> Cone<'g, 'a> {
    fn new(graph: &'g Graph<'a>, trigger: Bit, trigger_value: bool) -> Cone<'g, 'a> {
        Cone {
            graph,
            trigger,
            trigger_value,
            leaves: BTreeSet::new(),
            cells: BTreeSet::new(),
            assignment: HashMap::new(),
            memo: HashMap::new(),
            active: BTreeSet::new(),
            too_wide: false,
        }
    }

    /// Pin values of a cell, and whether any depends on the trigger.
    fn pins(&mut self, cell: usize, f: &Expr) -> (HashMap<String, Option<bool>>, bool) {
        let c = &self.graph.g.cells[cell];
        let mut out = HashMap::new();
        let mut touched = false;
        for pin in super::cells::inputs(f) {
            let (v, t) = match c.conns.get(pin).map(Vec::as_slice) {
                Some([b]) => self.value(*b),
                _ => (None, false),
            };
            touched |= t;
            out.insert(pin.to_string(), v);
        }
        (out, touched)
    }

    fn apply(&mut self, cell: usize) -> (Option<bool>, bool) {
        let (f, _) = self.graph.function(cell);
        let (pins, touched) = self.pins(cell, f);
        if touched {
            self.cells.insert(cell);
        }
        (eval3(f, &|p| pins.get(p).copied().flatten()), touched)
    }

    fn value(&mut self, b: BitRef) -> (Option<bool>, bool) {
        let (net, offset) = match self.graph.canonical(b) {
            BitRef::Const(v) => return (v, false),
            BitRef::Net { net, offset } => (net, offset),
        };
        let bit = (net, offset);
        if bit == self.trigger {
            return (Some(self.trigger_value), true);
        }
        if let Some(v) = self.memo.get(&bit) {
            return *v;
        }
        let v = match self.graph.drivers.get(&bit) {
            Some(Driver::Cell(c)) if !self.graph.function(*c).1 => {
                if !self.active.insert(bit) {
                    return (None, false);
                }
                let v = self.apply(*c);
                self.active.remove(&bit);
                v
            }
            _ => {
                self.leaves.insert(bit);
                (self.assignment.get(&bit).copied(), false)
            }
        };
        self.memo.insert(bit, v);
        v
    }

    /// Value of a carrier bit: a storage root evaluates its next state.
    fn root(&mut self, b: BitRef) -> Option<bool> {
        self.memo.clear();
        if let BitRef::Net { net, offset } = self.graph.canonical(b) {
            if let Some(Driver::Cell(c)) = self.graph.drivers.get(&(net, offset)) {
                if self.graph.function(*c).1 {
                    return self.apply(*c).0;
                }
            }
        }
        self.value(b).0
    }

    /// Constant value of a bit over all leaf assignments, if it has one.
    fn constant(&mut self, b: BitRef) -> Option<bool> {
        self.assignment.clear();
        self.leaves.clear();
        if let Some(v) = self.root(b) {
            return Some(v);
        }
        let leaves: Vec<Bit> = self.leaves.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(leaves.len() as u64);
        let mut seen = None;
        let mut check = |cone: &mut Cone, assign: &dyn Fn(usize) -> bool| -> bool {
            cone.assignment = leaves.iter().enumerate().map(|(i, l)| (*l, assign(i))).collect();
            let v = cone.root(b);
            match (v, seen) {
                (None, _) => false,
                (Some(v), None) => {
                    seen = Some(v);
                    true
                }
                (Some(v), Some(s)) => v == s,
            }
        };
        for _ in 0..SAMPLES {
            let r: u64 = rng.gen();
            if !check(self, &|i| r >> (i % 64) & 1 == 1) {
                return None;
            }
        }
        if leaves.len() > EXHAUSTIVE_LEAVES {
            self.too_wide = true;
            return None;
        }
        for v in 0u64..1 << leaves.len() {
            if !check(self, &|i| v >> i & 1 == 1) {
                return None;
            }
        }
        seen
    }
}

struct Candidate {
    carrier: usize,
    trigger: usize,
    bytes: Vec<u8>,
    matched: usize,
    cells: BTreeSet<usize>,
}

/// Search non-input vectors for a value forced by a one-bit input. Without
/// `expected_width` every vector of at least 24 bits is a candidate;
/// otherwise exactly the given width. A carrier must read as a constant with
/// the input high and must not read as that same constant with it low. Its
/// whole bytes, MSB first, must open with the key's payload header (as much
/// of it as fits).
pub fn trace_watermark(g: &NetlistGraph, lib: &CellLibrary, key: &WatermarkKey, expected_width: Option<u32>) -> NetlistEvidence {
    let graph = Graph::new(g, lib);
    let mut ev = NetlistEvidence::default();
    let unknown: BTreeSet<&str> = g.cells.iter().filter(|c| lib.get(&c.ty).is_none()).map(|c| c.ty.as_str()).collect();
    if !unknown.is_empty() {
        ev.diagnostics.push(format!("cells of unknown type treated as opaque: {}", unknown.into_iter().collect::<Vec<_>>().join(", ")));
    }
    let min_width = expected_width.unwrap_or(DEFAULT_CARRIER_BITS).max(8);

    let mut carriers: Vec<usize> = (0..g.nets.len())
        .filter(|&i| g.nets[i].dir != Some(Direction::Input) && g.nets[i].width() >= min_width)
        .filter(|&i| expected_width.is_none_or(|w| g.nets[i].width() == w))
        .collect();
    carriers.sort_by(|a, b| g.nets[*a].name.cmp(&g.nets[*b].name));
    let triggers: Vec<usize> = (0..g.nets.len())
        .filter(|&i| g.nets[i].dir == Some(Direction::Input) && g.nets[i].width() == 1)
        .collect();

    let mut best: Option<Candidate> = None;
    for &c in &carriers {
        let w = g.nets[c].width();
        for &t in &triggers {
            let mut high = Cone::new(&graph, (t, 0), true);
            let mut bits = Vec::with_capacity(w as usize);
            for off in (0..w).rev() {
                match high.constant(BitRef::Net { net: c, offset: off }) {
                    Some(v) => bits.push(v),
                    None => break,
                }
            }
            if bits.len() != w as usize {
                if high.too_wide {
                    ev.diagnostics.push(format!(
                        "`{}` under `{}`: cone exceeds {EXHAUSTIVE_LEAVES} inputs, not proven",
                        g.nets[c].name, g.nets[t].name
                    ));
                }
                continue;
            }
            let mut low = Cone::new(&graph, (t, 0), false);
            let same = (0..w).rev().zip(&bits).all(|(off, v)| low.constant(BitRef::Net { net: c, offset: off }) == Some(*v));
            if same {
                continue;
            }
            let bytes: Vec<u8> = bits.chunks_exact(8).map(|ch| ch.iter().fold(0u8, |a, b| a << 1 | *b as u8)).collect();
            let (matched, _) = check_prefix(&bytes, key);
            if best.as_ref().is_none_or(|b| matched > b.matched) {
                best = Some(Candidate {
                    carrier: c,
                    trigger: t,
                    bytes,
                    matched,
                    cells: high.cells,
                });
            }
        }
    }
    let Some(b) = best else {
        ev.diagnostics.push("no trigger-gated constant found".to_string());
        return ev;
    };
    let required = HEADER_LEN.min(b.bytes.len());
    if b.matched < required {
        ev.diagnostics.push(format!(
            "gated constant on `{}` under `{}` does not carry this key's header",
            g.nets[b.carrier].name, g.nets[b.trigger].name
        ));
        return ev;
    }
    ev.found = true;
    ev.width = g.nets[b.carrier].width();
    ev.trigger_net = Some(g.nets[b.trigger].name.clone());
    ev.carrier_net = Some(g.nets[b.carrier].name.clone());
    ev.trace = b.cells.iter().map(|&i| g.cells[i].name.clone()).collect();
    ev.decoded = decode_payload(&b.bytes, key).ok();
    ev.payload_bytes = b.bytes;
    ev
}

#[cfg(test)]
mod tests {
    use super::super::parse_netlist;
    use super::*;
    use crate::payload::{encode_payload, header};

    fn hex24(b: &[u8]) -> String {
        format!("24'h{:02X}{:02X}{:02X}", b[0], b[1], b[2])
    }

    /// Hand-built sequential carrier: one reset flop per bit with the trigger
    /// on the synchronous reset, plus an XOR datapath.
    fn flop_netlist(bytes: &[u8]) -> String {
        let w = bytes.len() * 8;
        let mut s = format!("module ctl(clk, d, acc, watermark_trigger);\n input clk;\n input [{m}:0] d;\n output [{m}:0] acc;\n input watermark_trigger;\n wire [{m}:0] nx;\n", m = w - 1);
        for i in 0..w {
            let byte = bytes[bytes.len() - 1 - i / 8];
            let v = byte >> (i % 8) & 1;
            s += &format!(" \\$_XOR_ x{i} (.A(d[{i}]), .B(acc[{i}]), .Y(nx[{i}]));\n");
            s += &format!(" \\$_SDFF_PP{v}_ \\acc_reg[{i}] (.C(clk), .D(nx[{i}]), .Q(acc[{i}]), .R(watermark_trigger));\n");
        }
        s + "endmodule\n"
    }

    #[test]
    fn golden_byte_in_a_narrow_carrier() {
        let (_, key) = crate::payload::fixture_key_with_first_byte(0xA5, 0);
        let g = parse_netlist(&flop_netlist(&[0xA5]), "n.v").unwrap();
        let ev = trace_watermark(&g, &CellLibrary::default(), &key, Some(8));
        assert!(ev.found);
        assert_eq!(ev.payload_bytes, vec![0xA5]);
        assert!(!trace_watermark(&g, &CellLibrary::default(), &key, None).found, "8-bit vectors are not searched by default");
    }

    #[test]
    fn sequential_carrier_recovers_header() {
        let key = WatermarkKey::from_seed(7);
        let h = header(&key);
        let ev = trace_watermark(&parse_netlist(&flop_netlist(&h), "n.v").unwrap(), &CellLibrary::default(), &key, None);
        assert!(ev.found, "{ev:?}");
        assert_eq!(ev.payload_bytes, h.to_vec());
        assert_eq!(ev.carrier_net.as_deref(), Some("acc"));
        assert_eq!(ev.trigger_net.as_deref(), Some("watermark_trigger"));
        assert_eq!(ev.trace.len(), 24);
        let other = WatermarkKey::from_seed(8);
        assert!(!trace_watermark(&parse_netlist(&flop_netlist(&h), "n.v").unwrap(), &CellLibrary::default(), &other, None).found);
    }

    #[test]
    fn reconvergent_gating_needs_the_fallback() {
        let key = WatermarkKey::from_seed(3);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        // A one bit is (a & t) | (t & ~a): constant under t but unknown to
        // three-valued evaluation while `a` is free.
        let mut s = String::from("module c(a, y, t);\n input [23:0] a;\n output [23:0] y;\n input t;\n wire [23:0] p;\n wire [23:0] q;\n");
        for i in 0..24 {
            if p.encoded[2 - i / 8] >> (i % 8) & 1 == 1 {
                s += &format!(" \\$_AND_ p{i} (.A(a[{i}]), .B(t), .Y(p[{i}]));\n");
                s += &format!(" \\$_ANDNOT_ q{i} (.A(t), .B(a[{i}]), .Y(q[{i}]));\n");
                s += &format!(" \\$_OR_ o{i} (.A(p[{i}]), .B(q[{i}]), .Y(y[{i}]));\n");
            } else {
                s += &format!(" \\$_ANDNOT_ g{i} (.A(a[{i}]), .B(t), .Y(y[{i}]));\n");
            }
        }
        s += "endmodule\n";
        let ev = trace_watermark(&parse_netlist(&s, "c.v").unwrap(), &CellLibrary::default(), &key, Some(24));
        assert!(ev.found, "{ev:?}");
        assert_eq!(ev.payload_bytes, p.encoded[..3].to_vec());
        assert_eq!(ev.decoded, None);
    }

    #[test]
    fn clean_and_plain_constant_nets_give_nothing() {
        let key = WatermarkKey::from_seed(7);
        let h = header(&key);
        let clean = "module c(a, y);\n input [23:0] a;\n output [23:0] y;\n assign y = a;\nendmodule\n";
        let ev = trace_watermark(&parse_netlist(clean, "c.v").unwrap(), &CellLibrary::default(), &key, None);
        assert!(!ev.found && ev.payload_bytes.is_empty() && ev.trace.is_empty());
        let tied = format!("module c(t, y);\n input t;\n output [23:0] y;\n assign y = {};\nendmodule\n", hex24(&h));
        assert!(!trace_watermark(&parse_netlist(&tied, "c.v").unwrap(), &CellLibrary::default(), &key, None).found);
    }
}
