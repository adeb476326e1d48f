use super::bits::{mask, Bits};
use super::exec::Simulator;
use super::SimError;
use crate::rules::TRIGGER_PORT;
use crate::verilog::ast::{Ast, Direction, Edge};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquivBudget {
    /// Combinational designs with at most this many input bits are checked exhaustively.
    pub exhaustive_bits: u32,
    pub vectors: usize,
    pub cycles: usize,
    pub seed: u64,
}

impl Default for EquivBudget {
    fn default() -> EquivBudget {
        EquivBudget {
            exhaustive_bits: 12,
            vectors: 1000,
            cycles: 1000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub step: usize,
    pub inputs: Vec<(String, String)>,
    pub output: String,
    pub left: String,
    pub right: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivVerdict {
    EquivalentExhaustive(usize),
    EquivalentSampled(usize),
    Inequivalent(Counterexample),
}

impl EquivVerdict {
    pub fn is_equivalent(&self) -> bool {
        !matches!(self, EquivVerdict::Inequivalent(_))
    }
}

fn is_reset(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n.contains("rst") || n.contains("reset") || n.contains("clr") || n.contains("clear")
}

fn active_low(name: &str, edges: Option<&Vec<Edge>>) -> bool {
    match edges {
        Some(e) if e.contains(&Edge::Negedge) => true,
        Some(e) if e.contains(&Edge::Posedge) => false,
        _ => {
            let n = name.to_ascii_lowercase();
            n.ends_with('n') || n.ends_with("_b") || n.ends_with("_l")
        }
    }
}

fn interface(sim: &Simulator, dir: Direction) -> BTreeMap<String, u32> {
    sim.ports(dir).into_iter().filter(|(n, _)| n != TRIGGER_PORT).collect()
}

struct Pair {
    a: Simulator,
    b: Simulator,
    outputs: Vec<String>,
    steps: usize,
}

impl Pair {
    fn drive(&mut self, inputs: &[(String, Bits)]) -> Result<Option<Counterexample>, SimError> {
        for sim in [&mut self.a, &mut self.b] {
            let mut ins: Vec<(&str, Bits)> = inputs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
            if sim.peek(TRIGGER_PORT).is_some() {
                ins.push((TRIGGER_PORT, Bits::known(1, 0)));
            }
            sim.step(&ins)?;
        }
        let step = self.steps;
        self.steps += 1;
        for o in &self.outputs {
            let (x, y) = (self.a.peek(o).expect("output"), self.b.peek(o).expect("output"));
            if x.conflicts(&y) != 0 {
                return Ok(Some(Counterexample {
                    step,
                    inputs: inputs.iter().map(|(n, v)| (n.clone(), v.to_string())).collect(),
                    output: o.clone(),
                    left: x.to_string(),
                    right: y.to_string(),
                }));
            }
        }
        Ok(None)
    }
}

fn random(rng: &mut ChaCha8Rng, width: u32) -> Bits {
    Bits::known(width, rng.gen::<u128>() & mask(width))
}

/// Bounded simulation equivalence of the top modules of `a` and `b`. Outputs
/// mismatch only where both sides hold a known bit and the bits differ. The
/// watermark trigger input, when present, is held at 0.
pub fn check_equivalence(a: &Ast, b: &Ast, budget: &EquivBudget) -> Result<EquivVerdict, SimError> {
    let sa = Simulator::new(a)?;
    let sb = Simulator::new(b)?;
    let ins = interface(&sa, Direction::Input);
    let outs = interface(&sa, Direction::Output);
    if ins != interface(&sb, Direction::Input) || outs != interface(&sb, Direction::Output) {
        return Err(SimError::PortMismatch(format!(
            "inputs {:?} / {:?}, outputs {:?} / {:?}",
            ins,
            interface(&sb, Direction::Input),
            outs,
            interface(&sb, Direction::Output)
        )));
    }
    let sequential = sa.is_sequential() || sb.is_sequential();
    let mut edges = sa.edge_ports();
    for (k, v) in sb.edge_ports() {
        edges.entry(k).or_default().extend(v);
    }
    let mut pair = Pair {
        a: sa,
        b: sb,
        outputs: outs.keys().cloned().collect(),
        steps: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let fail = |c: Counterexample| Ok(EquivVerdict::Inequivalent(c));

    if !sequential {
        let total: u32 = ins.values().sum();
        if total <= budget.exhaustive_bits {
            let n = 1usize << total;
            for v in 0..n as u128 {
                let mut lo = 0;
                let vec: Vec<(String, Bits)> = ins
                    .iter()
                    .map(|(name, w)| {
                        let b = Bits::known(*w, v >> lo);
                        lo += w;
                        (name.clone(), b)
                    })
                    .collect();
                if let Some(c) = pair.drive(&vec)? {
                    return fail(c);
                }
            }
            return Ok(EquivVerdict::EquivalentExhaustive(n));
        }
        let mut vectors: Vec<Vec<(String, Bits)>> = vec![
            ins.iter().map(|(n, w)| (n.clone(), Bits::known(*w, 0))).collect(),
            ins.iter().map(|(n, w)| (n.clone(), Bits::known(*w, u128::MAX))).collect(),
        ];
        for (target, w) in &ins {
            for bit in 0..*w {
                vectors.push(
                    ins.iter()
                        .map(|(n, w2)| (n.clone(), Bits::known(*w2, if n == target { 1u128 << bit } else { 0 })))
                        .collect(),
                );
            }
        }
        for _ in 0..budget.vectors {
            vectors.push(ins.iter().map(|(n, w)| (n.clone(), random(&mut rng, *w))).collect());
        }
        let n = vectors.len();
        for v in vectors {
            if let Some(c) = pair.drive(&v)? {
                return fail(c);
            }
        }
        return Ok(EquivVerdict::EquivalentSampled(n));
    }

    let clocks: Vec<String> = edges.keys().filter(|n| !is_reset(n) && ins.contains_key(*n)).cloned().collect();
    let resets: Vec<(String, bool)> = ins
        .keys()
        .filter(|n| is_reset(n) && !clocks.contains(n))
        .map(|n| (n.clone(), active_low(n, edges.get(n))))
        .collect();
    for cycle in 0..budget.cycles {
        let assert_reset = cycle < 2 || rng.gen_ratio(1, 64);
        let mut v: Vec<(String, Bits)> = Vec::new();
        for (n, w) in &ins {
            let b = if clocks.contains(n) {
                Bits::known(*w, 0)
            } else if let Some((_, low)) = resets.iter().find(|(r, _)| r == n) {
                Bits::known(*w, (assert_reset != *low) as u128)
            } else {
                random(&mut rng, *w)
            };
            v.push((n.clone(), b));
        }
        if let Some(c) = pair.drive(&v)? {
            return fail(c);
        }
        if clocks.is_empty() {
            continue;
        }
        let rise: Vec<(String, Bits)> = clocks.iter().map(|c| (c.clone(), Bits::known(1, 1))).collect();
        if let Some(c) = pair.drive(&rise)? {
            return fail(c);
        }
    }
    Ok(EquivVerdict::EquivalentSampled(budget.cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_str;

    fn check(a: &str, b: &str) -> EquivVerdict {
        check_equivalence(&parse_str(a).unwrap(), &parse_str(b).unwrap(), &EquivBudget::default()).unwrap()
    }

    #[test]
    fn de_morgan_is_exhaustively_equivalent() {
        let a = "module m(input a, input b, input c, output y); assign y = a & b | c; endmodule";
        let b = "module m(input a, input b, input c, output y); assign y = ~(~a | ~b) | c; endmodule";
        assert_eq!(check(a, b), EquivVerdict::EquivalentExhaustive(8));
    }

    #[test]
    fn broken_rewrite_yields_counterexample() {
        let a = "module m(input a, input b, output y); assign y = a & b; endmodule";
        let b = "module m(input a, input b, output y); assign y = ~(~a & ~b); endmodule";
        let EquivVerdict::Inequivalent(c) = check(a, b) else { panic!("expected a counterexample") };
        assert_eq!(c.output, "y");
        assert_ne!(c.left, c.right);
    }

    #[test]
    fn sequential_designs_are_sampled() {
        let a = "module m(input clk, input rst, input [7:0] d, output reg [7:0] q); always @(posedge clk) if (rst) q <= 8'd0; else q <= q ^ d; endmodule";
        let b = "module m(input clk, input rst, input [7:0] d, output reg [7:0] q); always @(posedge clk) q <= rst ? 8'd0 : q ^ d; endmodule";
        assert_eq!(check(a, b), EquivVerdict::EquivalentSampled(1000));
        let c = "module m(input clk, input rst, input [7:0] d, output reg [7:0] q); always @(posedge clk) q <= rst ? 8'd0 : q + d; endmodule";
        assert!(!check(a, c).is_equivalent());
    }

    #[test]
    fn trigger_port_is_tied_low() {
        let a = "module m(input [7:0] d, output [7:0] y); assign y = d; endmodule";
        let b = "module m(input [7:0] d, output [7:0] y, input watermark_trigger); assign y = watermark_trigger ? 8'hA5 : (d); endmodule";
        assert!(check(a, b).is_equivalent());
        assert!(check(b, a).is_equivalent());
    }

    #[test]
    fn wide_combinational_inputs_are_sampled_with_corners() {
        let a = "module m(input [7:0] a, input [7:0] b, output [8:0] s); assign s = a + b; endmodule";
        assert_eq!(check(a, a), EquivVerdict::EquivalentSampled(2 + 16 + 1000));
    }
}
