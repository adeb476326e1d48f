use super::{BitRef, Cell, Net, NetlistGraph};
use crate::verilog::lexer::{lex, Token, TokenKind};
use crate::verilog::{Direction, NumberLiteral, ParseError};
use std::collections::{BTreeMap, HashMap};

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    origin: &'a str,
}

struct ModuleText {
    graph: NetlistGraph,
    index: HashMap<String, usize>,
    instantiated: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &str {
        let t = &self.toks[self.pos];
        &self.src[t.span.start..t.span.end]
    }

    fn kind(&self) -> TokenKind {
        self.toks[self.pos].kind
    }

    fn bump(&mut self) -> &'a str {
        let t = &self.toks[self.pos];
        let s = &self.src[t.span.start..t.span.end];
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        s
    }

    fn err(&self, msg: &str, expected: &[&str]) -> ParseError {
        let mut e = ParseError::at(self.src, self.toks[self.pos].span.start, msg, expected);
        e.origin = self.origin.to_string();
        e
    }

    fn expect(&mut self, p: &str) -> Result<(), ParseError> {
        if self.peek() == p {
            self.bump();
            Ok(())
        } else {
            Err(self.err(&format!("expected `{p}`, found `{}`", self.peek()), &[p]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.kind() {
            TokenKind::Ident | TokenKind::EscapedIdent => Ok(self.bump().to_string()),
            _ => Err(self.err(&format!("expected identifier, found `{}`", self.peek()), &["identifier"])),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = if self.peek() == "-" {
            self.bump();
            true
        } else {
            false
        };
        if self.kind() != TokenKind::Number {
            return Err(self.err("expected an integer", &["integer"]));
        }
        let text = self.bump();
        let v = NumberLiteral::parse(text)
            .ok()
            .and_then(|n| n.to_bits())
            .filter(|(_, _, x)| *x == 0)
            .map(|(_, v, _)| v as i64)
            .ok_or_else(|| self.err("expected an integer", &["integer"]))?;
        Ok(if neg { -v } else { v })
    }

    fn skip_attributes(&mut self) -> Result<(), ParseError> {
        while self.peek() == "(*" {
            while self.peek() != "*)" {
                if self.kind() == TokenKind::Eof {
                    return Err(self.err("unterminated attribute", &["*)"]));
                }
                self.bump();
            }
            self.bump();
        }
        Ok(())
    }

    fn range(&mut self) -> Result<Option<(i64, i64)>, ParseError> {
        if self.peek() != "[" {
            return Ok(None);
        }
        self.bump();
        let msb = self.int()?;
        self.expect(":")?;
        let lsb = self.int()?;
        self.expect("]")?;
        Ok(Some((msb, lsb)))
    }

    fn module(&mut self) -> Result<ModuleText, ParseError> {
        self.expect("module")?;
        let name = self.ident()?;
        let mut m = ModuleText {
            graph: NetlistGraph {
                module: name,
                ..NetlistGraph::default()
            },
            index: HashMap::new(),
            instantiated: Vec::new(),
        };
        if self.peek() == "(" {
            self.bump();
            while self.peek() != ")" {
                // ANSI headers are accepted too.
                if let Some(dir) = direction(self.peek()) {
                    self.bump();
                    self.decl_names(&mut m, Some(dir), true)?;
                    continue;
                }
                let p = self.ident()?;
                m.graph.ports.push(p);
                if self.peek() == "," {
                    self.bump();
                }
            }
            self.bump();
        }
        self.expect(";")?;
        loop {
            self.skip_attributes()?;
            let word = self.peek().to_string();
            match word.as_str() {
                "endmodule" => {
                    self.bump();
                    break;
                }
                "input" | "output" | "inout" => {
                    self.bump();
                    self.decl_names(&mut m, direction(&word), false)?;
                }
                "wire" | "reg" | "tri" | "supply0" | "supply1" => {
                    self.bump();
                    self.decl_names(&mut m, None, false)?;
                }
                "assign" => {
                    self.bump();
                    self.assign(&mut m)?;
                }
                "always" | "initial" | "function" | "task" | "generate" => {
                    return Err(self.err(&format!("behavioural `{word}` in a netlist"), &["cell instance", "assign"]));
                }
                _ if self.kind() == TokenKind::Eof => return Err(self.err("missing `endmodule`", &["endmodule"])),
                _ => self.instance(&mut m)?,
            }
        }
        Ok(m)
    }

    /// Declarations after a direction or net keyword, through `;` (or up to
    /// the next header direction when `header`).
    fn decl_names(&mut self, m: &mut ModuleText, dir: Option<Direction>, header: bool) -> Result<(), ParseError> {
        if matches!(self.peek(), "wire" | "reg") {
            self.bump();
        }
        if self.peek() == "signed" {
            self.bump();
        }
        let (msb, lsb) = self.range()?.unwrap_or((0, 0));
        loop {
            let name = self.ident()?;
            if header {
                m.graph.ports.push(name.clone());
            }
            declare(m, &name, msb, lsb, dir);
            if self.peek() == "=" {
                self.bump();
                let rhs = self.bits(m)?;
                let net = m.index[&name];
                let w = m.graph.nets[net].width();
                for (i, b) in rhs.into_iter().chain(std::iter::repeat(BitRef::Const(Some(false)))).take(w as usize).enumerate() {
                    m.graph.assigns.push((BitRef::Net { net, offset: i as u32 }, b));
                }
            }
            if self.peek() != "," {
                break;
            }
            self.bump();
            if header && direction(self.peek()).is_some() {
                return Ok(());
            }
        }
        if !header {
            self.expect(";")?;
        }
        Ok(())
    }

    fn assign(&mut self, m: &mut ModuleText) -> Result<(), ParseError> {
        loop {
            let lhs = self.bits(m)?;
            self.expect("=")?;
            let rhs = self.bits(m)?;
            let fill = BitRef::Const(Some(false));
            for (i, l) in lhs.iter().enumerate() {
                m.graph.assigns.push((*l, rhs.get(i).copied().unwrap_or(fill)));
            }
            if self.peek() != "," {
                break;
            }
            self.bump();
        }
        self.expect(";")
    }

    fn instance(&mut self, m: &mut ModuleText) -> Result<(), ParseError> {
        let ty = self.ident()?;
        let mut params = Vec::new();
        if self.peek() == "#" {
            self.bump();
            self.expect("(")?;
            while self.peek() != ")" {
                self.expect(".")?;
                let p = self.ident()?;
                self.expect("(")?;
                let start = self.toks[self.pos].span.start;
                let mut depth = 0;
                while depth > 0 || self.peek() != ")" {
                    match self.bump() {
                        "(" => depth += 1,
                        ")" => depth -= 1,
                        "" => return Err(self.err("unterminated parameter", &[")"])),
                        _ => {}
                    }
                }
                let end = self.toks[self.pos].span.start;
                params.push((p, self.src[start..end].trim().to_string()));
                self.bump();
                if self.peek() == "," {
                    self.bump();
                }
            }
            self.bump();
        }
        let name = self.ident()?;
        self.expect("(")?;
        let mut conns = BTreeMap::new();
        let mut positional = 0;
        while self.peek() != ")" {
            if self.peek() == "." {
                self.bump();
                let pin = self.ident()?;
                self.expect("(")?;
                let bits = if self.peek() == ")" { Vec::new() } else { self.bits(m)? };
                self.expect(")")?;
                conns.insert(pin, bits);
            } else {
                let bits = self.bits(m)?;
                conns.insert(format!("#{positional}"), bits);
                positional += 1;
            }
            if self.peek() == "," {
                self.bump();
            } else if self.peek() != ")" {
                return Err(self.err("expected `,` or `)`", &[",", ")"]));
            }
        }
        self.bump();
        self.expect(";")?;
        m.instantiated.push(ty.clone());
        m.graph.cells.push(Cell { ty, name, params, conns });
        Ok(())
    }

    /// A connection or assignment operand as bits, LSB first.
    fn bits(&mut self, m: &mut ModuleText) -> Result<Vec<BitRef>, ParseError> {
        match self.kind() {
            TokenKind::Number => {
                let text = self.bump();
                let n = NumberLiteral::parse(text).map_err(|e| self.err(&format!("{e:?}"), &["number"]))?;
                let (w, v, x) = n.to_bits().ok_or_else(|| self.err("constant wider than 128 bits", &["number"]))?;
                Ok((0..w).map(|i| BitRef::Const(if x >> i & 1 == 1 { None } else { Some(v >> i & 1 == 1) })).collect())
            }
            TokenKind::Ident | TokenKind::EscapedIdent => {
                let name = self.bump().to_string();
                let net = match m.index.get(&name) {
                    Some(&n) => n,
                    None => {
                        m.graph.unresolved.push(name.clone());
                        declare(m, &name, 0, 0, None)
                    }
                };
                let n = m.graph.nets[net].clone();
                let offsets: Vec<u32> = match self.range_or_index()? {
                    None => (0..n.width()).collect(),
                    Some((hi, lo)) => {
                        let (a, b) = (n.offset(hi), n.offset(lo));
                        match (a, b) {
                            (Some(a), Some(b)) if a >= b => (b..=a).collect(),
                            (Some(a), Some(b)) => (a..=b).rev().collect(),
                            _ => return Err(self.err(&format!("select out of range on `{name}`"), &["index"])),
                        }
                    }
                };
                Ok(offsets.into_iter().map(|offset| BitRef::Net { net, offset }).collect())
            }
            _ if self.peek() == "{" => {
                self.bump();
                let mut parts = Vec::new();
                loop {
                    parts.push(self.bits(m)?);
                    if self.peek() != "," {
                        break;
                    }
                    self.bump();
                }
                self.expect("}")?;
                Ok(parts.into_iter().rev().flatten().collect())
            }
            _ => Err(self.err(&format!("unexpected `{}` in a netlist operand", self.peek()), &["net", "constant", "{"])),
        }
    }

    fn range_or_index(&mut self) -> Result<Option<(i64, i64)>, ParseError> {
        if self.peek() != "[" {
            return Ok(None);
        }
        self.bump();
        let hi = self.int()?;
        let lo = if self.peek() == ":" {
            self.bump();
            self.int()?
        } else {
            hi
        };
        self.expect("]")?;
        Ok(Some((hi, lo)))
    }
}

fn direction(word: &str) -> Option<Direction> {
    match word {
        "input" => Some(Direction::Input),
        "output" => Some(Direction::Output),
        "inout" => Some(Direction::Inout),
        _ => None,
    }
}

/// Declare or refine a net; a later `wire` line does not drop a direction.
fn declare(m: &mut ModuleText, name: &str, msb: i64, lsb: i64, dir: Option<Direction>) -> usize {
    if let Some(&i) = m.index.get(name) {
        let n = &mut m.graph.nets[i];
        if dir.is_some() {
            n.dir = dir;
        }
        if (msb, lsb) != (0, 0) {
            n.msb = msb;
            n.lsb = lsb;
        }
        return i;
    }
    m.graph.nets.push(Net {
        name: name.to_string(),
        msb,
        lsb,
        dir,
    });
    m.index.insert(name.to_string(), m.graph.nets.len() - 1);
    m.graph.nets.len() - 1
}

/// Parse a structural netlist. With several modules the one no other module
/// instantiates is returned (the last such one on ties).
pub fn parse_netlist(text: &str, origin: &str) -> Result<NetlistGraph, ParseError> {
    let toks = lex(text).map_err(|mut e| {
        e.origin = origin.to_string();
        e
    })?;
    let mut p = Parser {
        src: text,
        toks,
        pos: 0,
        origin,
    };
    let mut modules = Vec::new();
    loop {
        p.skip_attributes()?;
        if p.kind() == TokenKind::Eof {
            break;
        }
        modules.push(p.module()?);
    }
    let used: Vec<String> = modules.iter().flat_map(|m| m.instantiated.iter().cloned()).collect();
    let top = modules
        .iter()
        .rposition(|m| !used.contains(&m.graph.module))
        .or(modules.len().checked_sub(1))
        .ok_or_else(|| p.err("no module in netlist", &["module"]))?;
    Ok(modules.swap_remove(top).graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NAND_INV: &str = "/* generated */\nmodule t(a, b, y);\n  input a;\n  input b;\n  output y;\n  wire n1;\n  \\$_NAND_ g1 (.A(a), .B(b), .Y(n1));\n  \\$_NOT_ g2 (.A(n1), .Y(y));\nendmodule\n";

    #[test]
    fn two_cell_netlist() {
        let g = parse_netlist(NAND_INV, "t.v").unwrap();
        assert_eq!(g.cells.len(), 2);
        assert_eq!(g.nets.len(), 4);
        assert_eq!(g.ports, vec!["a", "b", "y"]);
        assert_eq!(g.cells[0].ty, "\\$_NAND_");
        let y = g.net("y").unwrap();
        assert_eq!(g.nets[y].dir, Some(Direction::Output));
        assert_eq!(g.cells[1].conns["Y"], vec![BitRef::Net { net: y, offset: 0 }]);
    }

    #[test]
    fn escaped_names_selects_and_concats() {
        let src = "module c(a, y);\n  input [3:0] a;\n  output [7:0] y;\n  wire [7:0] \\esc.name ;\n  assign \\esc.name  = { a, 4'b10x1 };\n  assign y[7:4] = \\esc.name [3:0];\n  \\$_BUF_ \\u_buf[0]  /* _1_ */ (.A(a[2]), .Y(y[0]));\nendmodule\n";
        let g = parse_netlist(src, "c.v").unwrap();
        let esc = g.net("\\esc.name").unwrap();
        let a = g.net("a").unwrap();
        assert_eq!(g.nets[esc].width(), 8);
        let rhs: Vec<BitRef> = g.assigns[..8].iter().map(|(_, r)| *r).collect();
        assert_eq!(rhs[0], BitRef::Const(Some(true)));
        assert_eq!(rhs[1], BitRef::Const(None));
        assert_eq!(rhs[4], BitRef::Net { net: a, offset: 0 });
        assert_eq!(g.cells[0].name, "\\u_buf[0]");
        assert!(g.unresolved.is_empty());
    }

    #[test]
    fn behavioural_code_is_rejected() {
        let src = "module m(clk, q);\n input clk;\n output reg q;\n always @(posedge clk) q <= ~q;\nendmodule\n";
        let e = parse_netlist(src, "m.v").unwrap_err();
        assert_eq!(e.line, 4);
        assert_eq!(e.origin, "m.v");
    }

    #[test]
    fn top_is_the_uninstantiated_module() {
        let src = "module leaf(a, y); input a; output y; \\$_NOT_ n (.A(a), .Y(y)); endmodule\nmodule top(a, y); input a; output y; leaf u (.a(a), .y(y)); endmodule\nmodule spare(); endmodule\n";
        assert_eq!(parse_netlist(src, "h.v").unwrap().module, "spare");
        let two = "module top(a, y); input a; output y; leaf u (a, y); endmodule\nmodule leaf(a, y); input a; output y; assign y = a; endmodule\n";
        let g = parse_netlist(two, "h.v").unwrap();
        assert_eq!(g.module, "top");
        assert_eq!(g.cells[0].conns.len(), 2);
    }
}
