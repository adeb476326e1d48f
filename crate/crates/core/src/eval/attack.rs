use crate::rules::util::{ident_spans, splice, Edit};
use crate::rules::Ctx;
use crate::verilog::{is_keyword, parse, Ast, ParseError, SourceText};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub fraction: f64,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
}

impl AttackSpec {
    pub fn rename(fraction: f64, seed: u64) -> AttackSpec {
        AttackSpec {
            fraction,
            seed,
            min_len: 3,
            max_len: 10,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(AttackError::BadSpec(format!("fraction {} outside (0, 1]", self.fraction)));
        }
        if !(3..=self.max_len).contains(&self.min_len) || self.max_len > 10 {
            return Err(AttackError::BadSpec(format!("name lengths {}..={} outside 3..=10", self.min_len, self.max_len)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid attack: {0}")]
    BadSpec(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rename {
    pub module: String,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub source: SourceText,
    pub renames: Vec<Rename>,
    /// Renameable identifiers before the attack.
    pub eligible: usize,
}

/// Module-level internal nets and variables. Ports, parameters and
/// block-local names are left alone.
pub fn renameable(ast: &Ast) -> Vec<(String, String)> {
    let src = ast.source.as_deref().unwrap_or_default();
    let mut out = Vec::new();
    for m in &ast.modules {
        let cx = Ctx::new(ast, src, m);
        let mut sigs: Vec<_> = cx
            .symbols
            .internal_signals()
            .filter(|s| cx.is_plain_signal(&s.name) && !s.name.starts_with('\\'))
            .collect();
        sigs.sort_by_key(|s| s.rank);
        out.extend(sigs.into_iter().map(|s| (m.name.name.clone(), s.name.clone())));
    }
    out
}

fn fresh(rng: &mut ChaCha8Rng, spec: &AttackSpec, taken: &BTreeSet<String>) -> String {
    const FIRST: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    const REST: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";
    loop {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut s = String::with_capacity(len);
        s.push(FIRST[rng.gen_range(0..FIRST.len())] as char);
        for _ in 1..len {
            s.push(REST[rng.gen_range(0..REST.len())] as char);
        }
        if !is_keyword(&s) && !taken.contains(&s) {
            return s;
        }
    }
}

/// Rename ⌈fraction·N⌉ of the N renameable identifiers to fresh random
/// names, declaration and every use.
pub fn rename_attack(source: &SourceText, spec: &AttackSpec) -> Result<AttackOutcome, AttackError> {
    spec.validate()?;
    let ast = parse(source)?;
    let src = ast.source.as_deref().unwrap_or_default();
    let pool = renameable(&ast);
    let count = ((spec.fraction * pool.len() as f64).ceil() as usize).min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: Vec<(String, String)> = pool.choose_multiple(&mut rng, count).cloned().collect();
    chosen.sort();

    let mut taken: BTreeSet<String> = ast.modules.iter().map(|m| m.name.name.clone()).collect();
    for m in &ast.modules {
        let cx = Ctx::new(&ast, src, m);
        taken.extend(cx.symbols.signals.keys().cloned());
    }
    let mut edits = Vec::new();
    let mut renames = Vec::new();
    for (module, from) in chosen {
        let to = fresh(&mut rng, spec, &taken);
        taken.insert(to.clone());
        let m = ast.module(&module).expect("pool modules exist");
        edits.extend(ident_spans(m, &from).into_iter().map(|s| Edit::replace(s, to.clone())));
        renames.push(Rename { module, from, to });
    }
    let content = match splice(src, edits) {
        Some((text, _, _)) => text,
        None => src.to_string(),
    };
    let attacked = SourceText::new(content, source.origin.clone());
    parse(&attacked)?;
    Ok(AttackOutcome {
        source: attacked,
        renames,
        eligible: pool.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{check_equivalence, EquivBudget};
    use crate::verilog::parse_str;

    const EIGHT: &str = "module m(input clk, input [3:0] a, input [3:0] b, output [3:0] y);\n\
  wire [3:0] s0, s1, s2;\n\
  reg [3:0] r0, r1;\n\
  wire t0, t1, t2;\n\
  assign s0 = a & b;\n\
  assign s1 = a | b;\n\
  assign s2 = s0 ^ s1;\n\
  assign t0 = ^s2;\n\
  assign t1 = t0 & a[0];\n\
  assign t2 = t1 | b[0];\n\
  always @(posedge clk) begin r0 <= s2; r1 <= r0 + {3'b0, t2}; end\n\
  assign y = r1;\n\
endmodule\n";

    #[test]
    fn full_rename_preserves_behaviour() {
        let src = SourceText::new(EIGHT, "m.v");
        let out = rename_attack(&src, &AttackSpec::rename(1.0, 4)).unwrap();
        assert_eq!(out.eligible, 8);
        assert_eq!(out.renames.len(), 8);
        for r in &out.renames {
            assert!((3..=10).contains(&r.to.len()));
            assert!(!out.source.content.contains(&format!(" {} ", r.from)), "{}", r.from);
        }
        let a = parse_str(EIGHT).unwrap();
        let b = parse(&out.source).unwrap();
        assert!(check_equivalence(&a, &b, &EquivBudget::default()).unwrap().is_equivalent());
        assert_eq!(b.modules[0].ports.len(), 4);
    }

    #[test]
    fn quarter_rename_uses_the_ceiling() {
        let src = SourceText::new(EIGHT, "m.v");
        assert_eq!(rename_attack(&src, &AttackSpec::rename(0.25, 1)).unwrap().renames.len(), 2);
        assert_eq!(rename_attack(&src, &AttackSpec::rename(0.3, 1)).unwrap().renames.len(), 3);
        assert!(rename_attack(&src, &AttackSpec::rename(0.0, 1)).is_err());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let src = SourceText::new(EIGHT, "m.v");
        let a = rename_attack(&src, &AttackSpec::rename(0.5, 9)).unwrap();
        let b = rename_attack(&src, &AttackSpec::rename(0.5, 9)).unwrap();
        assert_eq!(a.source.content, b.source.content);
        let c = rename_attack(&src, &AttackSpec::rename(0.5, 10)).unwrap();
        assert_ne!(a.source.content, c.source.content);
    }
}
