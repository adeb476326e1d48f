//! Plan selection and watermark embedding.
//!
//! The planner works on simulated outcomes: every candidate selection is
//! actually applied and scored by the detector, so the predicted confidence
//! of a plan is exactly what detection will report on the embedded output.

use crate::detect::{detect_ast, logistic, score, NullModel};
use crate::key::WatermarkKey;
use crate::payload::Payload;
use crate::rules::{all_evidence, applicable_sites, application_order, apply, RuleId, TransformError, TransformSite, TransformationRecord};
use crate::sim::{check_equivalence, Counterexample, EquivBudget, EquivVerdict, SimError};
use crate::verilog::{print, Ast, SourceText};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

/// Candidate sites tried per rule before the rule is skipped.
const TRIES_PER_RULE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedObjective {
    /// Weight on the number of transformations.
    pub m: f64,
    /// Weight on deviation from the applicable set.
    pub n: f64,
    pub tau: f64,
}

impl Default for EmbedObjective {
    fn default() -> EmbedObjective {
        EmbedObjective {
            m: 1.0,
            n: 1.0,
            tau: crate::detect::DEFAULT_TAU,
        }
    }
}

impl EmbedObjective {
    pub fn new(m: f64, n: f64, tau: f64) -> Result<EmbedObjective, EmbedError> {
        if !(m >= 0.0 && n >= 0.0) {
            return Err(EmbedError::BadObjective(format!("weights must be non-negative, got m={m} n={n}")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(EmbedError::BadObjective(format!("tau must lie in (0,1), got {tau}")));
        }
        Ok(EmbedObjective { m, n, tau })
    }

    /// Transformation cost of a plan. Selected sites are always applicable,
    /// so the deviation term is zero.
    pub fn cost(&self, plan: &TransformPlan) -> f64 {
        self.m * plan.selected.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformPlan {
    pub selected: Vec<TransformSite>,
    pub predicted_confidence: f64,
    /// Applicable sites the plan was chosen from.
    pub applicable: usize,
    /// Distinct rules with at least one applicable site.
    pub applicable_rules: usize,
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("insufficient capacity: best achievable confidence {achieved:.4} is below tau")]
    InsufficientCapacity { achieved: f64, applicable: usize },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("watermarked output is not equivalent to the input (output `{}` at step {})", .0.output, .0.step)]
    NotEquivalent(Counterexample),
    #[error("invalid objective: {0}")]
    BadObjective(String),
}

#[derive(Clone, Debug)]
pub struct WatermarkedDocument {
    pub source: SourceText,
    pub records: Vec<TransformationRecord>,
    pub plan: TransformPlan,
    /// `None` when the design is outside the simulator's subset.
    pub equivalence: Option<EquivVerdict>,
    pub diagnostics: Vec<String>,
}

/// Every applicable site of every rule, in rule order.
pub fn all_sites(ast: &Ast, key: &WatermarkKey) -> Vec<TransformSite> {
    RuleId::ALL.iter().flat_map(|&r| applicable_sites(ast, r, key)).collect()
}

/// Apply `sites` to `ast` in application order.
pub fn realize(ast: &Ast, sites: &[TransformSite], key: &WatermarkKey, payload: &Payload) -> Result<(Ast, Vec<TransformationRecord>), TransformError> {
    let mut cur = ast.clone();
    let mut records = Vec::with_capacity(sites.len());
    for s in application_order(sites) {
        let (next, rec) = apply(&cur, &s, key, payload)?;
        cur = next;
        records.push(rec);
    }
    Ok((cur, records))
}

struct Sim<'a> {
    ast: &'a Ast,
    key: &'a WatermarkKey,
    payload: &'a Payload,
    null: &'a NullModel,
}

impl Sim<'_> {
    /// Confidence after applying `sites`, and whether `rule` shows evidence.
    fn run(&self, sites: &[TransformSite], rule: Option<RuleId>) -> Option<(f64, bool)> {
        let (out, _) = realize(self.ast, sites, self.key, self.payload).ok()?;
        let ev = all_evidence(&out, self.key);
        let (s, _) = score(&ev, self.null, |_| true);
        let present = rule.is_none_or(|r| ev.iter().any(|e| e.rule == r && e.present));
        Some((logistic(s), present))
    }

    fn confidence(&self, sites: &[TransformSite]) -> f64 {
        self.run(sites, None).map_or(0.0, |(c, _)| c)
    }
}

/// Greedy selection by expected contribution, then pruning to a 1-minimal set.
pub fn plan(ast: &Ast, key: &WatermarkKey, payload: &Payload, objective: &EmbedObjective, null: &NullModel) -> Result<TransformPlan, EmbedError> {
    let sites = all_sites(ast, key);
    let applicable = sites.len();
    let mut by_rule: BTreeMap<RuleId, Vec<TransformSite>> = BTreeMap::new();
    for s in sites {
        by_rule.entry(s.rule).or_default().push(s);
    }
    for v in by_rule.values_mut() {
        v.sort_by(|a, b| b.key_bits.total_cmp(&a.key_bits).then(a.start.cmp(&b.start)));
    }
    let expected = |r: RuleId| crate::detect::contribution(r, by_rule[&r][0].key_bits, null);
    let mut order: Vec<RuleId> = by_rule.keys().copied().collect();
    order.sort_by(|&a, &b| {
        (b == RuleId::T15)
            .cmp(&(a == RuleId::T15))
            .then(expected(b).total_cmp(&expected(a)))
            .then(a.cmp(&b))
    });

    let sim = Sim { ast, key, payload, null };
    let tau = objective.tau;
    let mut selected: Vec<TransformSite> = Vec::new();
    let mut conf = sim.confidence(&[]);
    for r in order.iter().copied() {
        if conf >= tau {
            break;
        }
        for s in by_rule[&r].iter().take(TRIES_PER_RULE) {
            let mut cand = selected.clone();
            cand.push(s.clone());
            if let Some((c, true)) = sim.run(&cand, Some(r)) {
                if c > conf {
                    selected = cand;
                    conf = c;
                    break;
                }
            }
        }
    }
    if conf < tau {
        return Err(EmbedError::InsufficientCapacity { achieved: conf, applicable });
    }
    loop {
        let mut changed = false;
        for i in (0..selected.len()).rev() {
            let mut without = selected.clone();
            without.remove(i);
            let c = sim.confidence(&without);
            if c >= tau {
                selected = without;
                conf = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(TransformPlan {
        selected,
        predicted_confidence: conf,
        applicable,
        applicable_rules: by_rule.len(),
    })
}

/// True when removing any single site drops the confidence below `tau`.
pub fn is_one_minimal(ast: &Ast, plan: &TransformPlan, key: &WatermarkKey, payload: &Payload, null: &NullModel, tau: f64) -> bool {
    let sim = Sim { ast, key, payload, null };
    (0..plan.selected.len()).all(|i| {
        let mut without = plan.selected.clone();
        without.remove(i);
        sim.confidence(&without) < tau
    })
}

/// Apply a plan and check the result against the input by simulation.
pub fn embed(ast: &Ast, plan: &TransformPlan, key: &WatermarkKey, payload: &Payload, budget: &EquivBudget) -> Result<WatermarkedDocument, EmbedError> {
    let (out, records) = realize(ast, &plan.selected, key, payload)?;
    let text = print(&out);
    let mut diagnostics = Vec::new();
    let equivalence = match check_equivalence(ast, &out, budget) {
        Ok(EquivVerdict::Inequivalent(c)) => return Err(EmbedError::NotEquivalent(c)),
        Ok(v) => Some(v),
        Err(e @ (SimError::Unsupported(_) | SimError::NoConvergence | SimError::PortMismatch(_))) => {
            diagnostics.push(format!("equivalence not checked: {e}"));
            None
        }
    };
    Ok(WatermarkedDocument {
        source: SourceText::new(text, ast.origin.clone()),
        records,
        plan: plan.clone(),
        equivalence,
        diagnostics,
    })
}

/// Sidecar describing an embedding; replaying its sites on the input
/// reproduces the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub key_id: String,
    pub origin: String,
    pub rules: Vec<RuleId>,
    pub sites: Vec<TransformSite>,
    pub records: Vec<TransformationRecord>,
    pub payload_sha256: String,
    pub predicted_confidence: f64,
    pub output_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(doc: &WatermarkedDocument, key: &WatermarkKey, payload: &Payload) -> Manifest {
        let mut rules: Vec<RuleId> = doc.plan.selected.iter().map(|s| s.rule).collect();
        rules.sort();
        rules.dedup();
        Manifest {
            key_id: key.id().to_string(),
            origin: doc.source.origin.clone(),
            rules,
            sites: doc.plan.selected.clone(),
            records: doc.records.clone(),
            payload_sha256: sha256_hex(&payload.encoded),
            predicted_confidence: doc.plan.predicted_confidence,
            output_sha256: sha256_hex(doc.source.content.as_bytes()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Manifest> {
        serde_json::from_str(text)
    }

    /// Re-apply the recorded sites and return the resulting text.
    pub fn replay(&self, ast: &Ast, key: &WatermarkKey, payload: &Payload) -> Result<String, TransformError> {
        realize(ast, &self.sites, key, payload).map(|(out, _)| print(&out))
    }
}

/// Confidence the detector reports on an embedded document.
pub fn verify(doc: &WatermarkedDocument, key: &WatermarkKey, null: &NullModel, tau: f64) -> crate::detect::DetectionReport {
    match crate::verilog::parse(&doc.source) {
        Ok(ast) => detect_ast(&ast, key, null, tau),
        Err(_) => crate::detect::detect(&doc.source, key, null, tau),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::payload::encode_payload;
    use crate::verilog::parse_str;

    pub(crate) const FSM: &str = "module ctl(input clk, input rst, input go, input [3:0] d, output reg [23:0] acc, output reg busy);\n\
  localparam IDLE = 2'd0, RUN = 2'd1, DONE = 2'd2;\n\
  reg [1:0] state;\n\
  reg [3:0] cnt;\n\
  always @(posedge clk or posedge rst) begin\n\
    if (rst) begin\n\
      state <= IDLE;\n\
      cnt <= 4'b0000;\n\
    end else begin\n\
      case (state)\n\
        IDLE: if (go && d[0]) state <= RUN;\n\
        RUN: if (cnt == 4'd9) state <= DONE;\n\
        DONE: state <= IDLE;\n\
        default: state <= IDLE;\n\
      endcase\n\
      cnt <= cnt + 4'd1;\n\
    end\n\
  end\n\
  always @(posedge clk) acc <= acc + d;\n\
  always @(state or cnt) busy = (state == RUN) & (cnt != 4'd0);\n\
endmodule\n";

    fn setup(seed: u64) -> (Ast, WatermarkKey, Payload) {
        let key = WatermarkKey::from_seed(seed);
        let p = encode_payload("gpt-4", "dev-A", &key, 64).unwrap();
        (parse_str(FSM).unwrap(), key, p)
    }

    #[test]
    fn plan_is_feasible_and_one_minimal() {
        for seed in 0..3 {
            let (ast, key, p) = setup(seed);
            let null = NullModel::default();
            let obj = EmbedObjective::default();
            let plan = plan(&ast, &key, &p, &obj, &null).unwrap();
            assert!(plan.predicted_confidence >= obj.tau);
            assert!(plan.selected.len() < plan.applicable);
            assert!(is_one_minimal(&ast, &plan, &key, &p, &null, obj.tau));
            let doc = embed(&ast, &plan, &key, &p, &EquivBudget::default()).unwrap();
            assert!(doc.equivalence.as_ref().unwrap().is_equivalent());
            let rep = verify(&doc, &key, &null, obj.tau);
            assert_eq!(rep.confidence, plan.predicted_confidence);
        }
    }

    #[test]
    fn greedy_plus_prune_matches_exhaustive_search_bound() {
        let (ast, key, p) = setup(7);
        let null = NullModel::default();
        let obj = EmbedObjective::default();
        let plan = plan(&ast, &key, &p, &obj, &null).unwrap();
        let sim = Sim { ast: &ast, key: &key, payload: &p, null: &null };
        let sel = &plan.selected;
        for mask in 0u32..(1 << sel.len()) {
            let sub: Vec<TransformSite> = (0..sel.len()).filter(|i| mask & (1 << i) != 0).map(|i| sel[i].clone()).collect();
            let c = sim.confidence(&sub);
            if sub.len() == sel.len() {
                assert!(c >= obj.tau);
            } else if sub.len() + 1 == sel.len() {
                assert!(c < obj.tau);
            }
        }
    }

    #[test]
    fn nothing_applicable_means_no_capacity() {
        let key = WatermarkKey::from_seed(1);
        let p = encode_payload("m", "d", &key, 64).unwrap();
        let ast = parse_str("module w(output y);\nassign y = 1'b0;\nendmodule\n").unwrap();
        match plan(&ast, &key, &p, &EmbedObjective::default(), &NullModel::default()) {
            Err(EmbedError::InsufficientCapacity { achieved, applicable }) => {
                assert_eq!(applicable, 0);
                assert!(achieved < 0.95);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_plan_is_identity() {
        let (ast, key, p) = setup(1);
        let empty = TransformPlan {
            selected: Vec::new(),
            predicted_confidence: 0.5,
            applicable: 0,
            applicable_rules: 0,
        };
        let doc = embed(&ast, &empty, &key, &p, &EquivBudget::default()).unwrap();
        assert_eq!(doc.source.content, print(&ast));
    }

    #[test]
    fn manifest_replays_to_the_same_output() {
        let (ast, key, p) = setup(3);
        let null = NullModel::default();
        let plan = plan(&ast, &key, &p, &EmbedObjective::default(), &null).unwrap();
        let doc = embed(&ast, &plan, &key, &p, &EquivBudget::default()).unwrap();
        let m = Manifest::from_json(&Manifest::new(&doc, &key, &p).to_json()).unwrap();
        assert_eq!(m.replay(&ast, &key, &p).unwrap(), doc.source.content);
    }

    #[test]
    fn objective_validation() {
        assert!(EmbedObjective::new(1.0, 0.0, 1.0).is_err());
        assert!(EmbedObjective::new(-1.0, 0.0, 0.5).is_err());
        assert!(EmbedObjective::new(0.0, 0.0, 0.5).is_ok());
    }
}
