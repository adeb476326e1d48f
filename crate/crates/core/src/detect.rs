//! Keyed log-likelihood scoring of signature evidence.

use crate::key::WatermarkKey;
use crate::rules::{all_evidence, RuleId, SignatureEvidence};
use crate::verilog::{parse, Ast, SourceText};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Probability that an applied signature is not found.
pub const EPSILON: f64 = 0.01;
/// Verified key bits at which a keyed rule reaches full weight.
pub const FULL_WEIGHT_BITS: f64 = 26.0;
pub const STYLE_WEIGHT: f64 = 0.1;
pub const DEFAULT_TAU: f64 = 0.95;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("calibration corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Parse(#[from] crate::verilog::ParseError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    /// Per-rule false-match probability.
    pub p: BTreeMap<RuleId, f64>,
    /// Clean files the estimates come from; 0 for the built-in defaults.
    pub corpus_size: usize,
    pub matches: BTreeMap<RuleId, usize>,
}

impl Default for NullModel {
    fn default() -> NullModel {
        NullModel {
            p: RuleId::ALL
                .iter()
                .map(|&r| (r, if r.is_style() { 0.5 } else { 0.01 }))
                .collect(),
            corpus_size: 0,
            matches: BTreeMap::new(),
        }
    }
}

impl NullModel {
    pub fn p(&self, rule: RuleId) -> f64 {
        self.p.get(&rule).copied().unwrap_or(0.5)
    }
}

/// Laplace-smoothed false-match rate of every rule's keyed signature over
/// clean sources.
pub fn calibrate(corpus: &[SourceText], key: &WatermarkKey) -> Result<NullModel, DetectError> {
    if corpus.is_empty() {
        return Err(DetectError::EmptyCorpus);
    }
    let mut matches: BTreeMap<RuleId, usize> = RuleId::ALL.iter().map(|&r| (r, 0)).collect();
    for src in corpus {
        let ast = parse(src)?;
        for ev in all_evidence(&ast, key) {
            if ev.present {
                *matches.get_mut(&ev.rule).expect("every rule counted") += 1;
            }
        }
    }
    let n = corpus.len();
    Ok(NullModel {
        p: matches
            .iter()
            .map(|(&r, &m)| (r, (m as f64 + 1.0) / (n as f64 + 2.0)))
            .collect(),
        corpus_size: n,
        matches,
    })
}

pub fn weight(rule: RuleId, key_bits: f64) -> f64 {
    if rule.is_style() {
        STYLE_WEIGHT
    } else {
        (key_bits / FULL_WEIGHT_BITS).clamp(0.0, 1.0)
    }
}

/// Log-likelihood ratio a present signature adds to the score.
pub fn contribution(rule: RuleId, key_bits: f64, null: &NullModel) -> f64 {
    ((1.0 - EPSILON) / null.p(rule)).ln().max(0.0) * weight(rule, key_bits)
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Watermarked,
    Clean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleScore {
    pub rule: RuleId,
    pub present: bool,
    pub name_dependent: bool,
    pub p: f64,
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub origin: String,
    pub evidence: Vec<SignatureEvidence>,
    pub breakdown: Vec<RuleScore>,
    pub score: f64,
    pub confidence: f64,
    pub tau: f64,
    pub verdict: Verdict,
    pub diagnostics: Vec<String>,
}

impl DetectionReport {
    /// Sum of the contributions of rules matching `filter`.
    pub fn contribution_of(&self, filter: impl Fn(RuleId) -> bool) -> f64 {
        self.breakdown.iter().filter(|s| filter(s.rule)).map(|s| s.contribution).sum()
    }
}

/// Score evidence; rules rejected by `keep` count as absent.
pub fn score(evidence: &[SignatureEvidence], null: &NullModel, keep: impl Fn(RuleId) -> bool) -> (f64, Vec<RuleScore>) {
    let mut total = 0.0;
    let mut rows = Vec::with_capacity(evidence.len());
    for ev in evidence {
        let present = ev.present && keep(ev.rule);
        let c = if present { contribution(ev.rule, ev.key_bits, null) } else { 0.0 };
        total += c;
        rows.push(RuleScore {
            rule: ev.rule,
            present,
            name_dependent: ev.name_dependent,
            p: null.p(ev.rule),
            weight: weight(ev.rule, ev.key_bits),
            contribution: c,
        });
    }
    (total, rows)
}

fn report(origin: String, evidence: Vec<SignatureEvidence>, null: &NullModel, tau: f64, diagnostics: Vec<String>) -> DetectionReport {
    let (s, breakdown) = score(&evidence, null, |_| true);
    let confidence = logistic(s);
    DetectionReport {
        origin,
        evidence,
        breakdown,
        score: s,
        confidence,
        tau,
        verdict: if confidence >= tau { Verdict::Watermarked } else { Verdict::Clean },
        diagnostics,
    }
}

pub fn detect_ast(ast: &Ast, key: &WatermarkKey, null: &NullModel, tau: f64) -> DetectionReport {
    report(ast.origin.clone(), all_evidence(ast, key), null, tau, Vec::new())
}

/// Unparsable input is reported clean, with the parse error as a diagnostic.
pub fn detect(source: &SourceText, key: &WatermarkKey, null: &NullModel, tau: f64) -> DetectionReport {
    match parse(source) {
        Ok(ast) => detect_ast(&ast, key, null, tau),
        Err(e) => report(source.origin.clone(), Vec::new(), null, tau, vec![e.to_string()]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(rule: RuleId, present: bool, bits: f64) -> SignatureEvidence {
        SignatureEvidence {
            rule,
            present,
            strength: present as usize,
            name_dependent: rule.is_name_dependent(),
            key_bits: bits,
        }
    }

    #[test]
    fn laplace_smoothing_on_an_empty_match_set() {
        let key = WatermarkKey::from_seed(1);
        let corpus: Vec<SourceText> = (0..30)
            .map(|i| SourceText::new(format!("module m{i}(input a, output y); assign y = a; endmodule"), format!("c{i}.v")))
            .collect();
        let null = calibrate(&corpus, &key).unwrap();
        assert_eq!(null.p(RuleId::T13), 1.0 / 32.0);
        assert_eq!(null.corpus_size, 30);
        assert!(matches!(calibrate(&[], &key), Err(DetectError::EmptyCorpus)));
    }

    #[test]
    fn calibration_counts_natural_comma_lists() {
        let key = WatermarkKey::from_seed(1);
        let comma = "module m(input a, input b, output reg y); always @(a, b) y = a ^ b; endmodule";
        let plain = "module m(input a, output y); assign y = a; endmodule";
        let corpus: Vec<SourceText> = (0..30)
            .map(|i| SourceText::new(if i < 10 { comma } else { plain }, format!("{i}.v")))
            .collect();
        assert_eq!(calibrate(&corpus, &key).unwrap().p(RuleId::T4), 11.0 / 32.0);
    }

    #[test]
    fn full_weight_keyed_rule_clears_default_threshold() {
        let null = NullModel::default();
        let (s, _) = score(&[ev(RuleId::T6, true, 26.0)], &null, |_| true);
        assert!((s - 99f64.ln()).abs() < 1e-12);
        assert!(logistic(s) >= DEFAULT_TAU);
        let style = contribution(RuleId::T4, 0.0, &null);
        assert!((style - 0.1 * 1.98f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unparsable_input_is_clean() {
        let r = detect(&SourceText::new("module", "bad.v"), &WatermarkKey::from_seed(1), &NullModel::default(), 0.95);
        assert_eq!(r.verdict, Verdict::Clean);
        assert_eq!(r.diagnostics.len(), 1);
    }

    proptest::proptest! {
        #[test]
        fn confidence_is_monotone_in_evidence(mask in 0u16..(1 << 15), extra in 0usize..15, bits in 0.0f64..40.0) {
            let null = NullModel::default();
            let set: Vec<SignatureEvidence> = RuleId::ALL.iter().enumerate().map(|(i, &r)| ev(r, mask & (1 << i) != 0, bits)).collect();
            let mut more = set.clone();
            more[extra].present = true;
            let (a, _) = score(&set, &null, |_| true);
            let (b, _) = score(&more, &null, |_| true);
            proptest::prop_assert!(logistic(b) >= logistic(a));
        }
    }
}
