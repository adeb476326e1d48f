//! Evaluation harness: rename attacks, detection metrics, transparency and
//! corpus-level reports.

mod attack;
mod corpus;
mod report;

pub use attack::{rename_attack, renameable, AttackError, AttackOutcome, AttackSpec, Rename};
pub use corpus::{infer_top, load_corpus, Class, Corpus, CorpusEntry, CorpusError, MANIFEST_FILE};
pub use report::{
    AttackRow, AttackSummary, CleanRow, Confusion, EligibleRow, MetricsReport, NetlistCheck, NetlistSummary, Transparency,
};

use crate::detect::{detect, detect_ast, logistic, score, NullModel, Verdict};
use crate::embed::{embed, is_one_minimal, plan, verify, EmbedError, EmbedObjective};
use crate::key::WatermarkKey;
use crate::netlist::{detect_netlist, synthesize, SynthConfig};
use crate::payload::{encode_payload, Payload, DEFAULT_MAX_PAYLOAD};
use crate::rules::{carrier_width, RuleId};
use crate::sim::EquivBudget;
use crate::verilog::lexer::lex;
use crate::verilog::{parse, SourceText};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Token-level edit distance between two sources, normalized by the longer
/// token count. Comments count as one token each.
pub fn discrepancy(a: &str, b: &str) -> f64 {
    fn tokens(s: &str) -> Vec<&str> {
        let Ok(toks) = lex(s) else {
            return s.split_whitespace().collect();
        };
        let mut out = Vec::new();
        for t in &toks {
            for c in &t.comments {
                out.push(&s[c.span.start..c.span.end]);
            }
            if t.span.end > t.span.start {
                out.push(&s[t.span.start..t.span.end]);
            }
        }
        out
    }
    let (x, y) = (tokens(a), tokens(b));
    let n = x.len().max(y.len());
    if n == 0 {
        return 0.0;
    }
    strsim::generic_levenshtein(&x, &y) as f64 / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub tau: f64,
    pub objective: EmbedObjective,
    pub budget: EquivBudget,
    pub model: String,
    pub developer: String,
    pub attack_fractions: Vec<f64>,
    pub attack_seeds: Vec<u64>,
    pub netlist: bool,
    pub synth: SynthConfig,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> EvalConfig {
        EvalConfig {
            tau: crate::detect::DEFAULT_TAU,
            objective: EmbedObjective::default(),
            budget: EquivBudget::default(),
            model: "model".into(),
            developer: "developer".into(),
            attack_fractions: Vec::new(),
            attack_seeds: vec![1, 2, 3, 4, 5],
            netlist: false,
            synth: SynthConfig::default(),
            workers: 0,
        }
    }
}

struct Job<'a> {
    key: &'a WatermarkKey,
    null: &'a NullModel,
    cfg: &'a EvalConfig,
    payload: &'a Payload,
    synth: bool,
}

fn netlist_check(job: &Job, source: &str, top: &str, width: Option<u32>) -> NetlistCheck {
    match synthesize(source, top, &job.cfg.synth).map_err(|e| e.to_string()).and_then(|net| {
        detect_netlist(&net, top, job.key, width).map_err(|e| e.to_string())
    }) {
        Ok(ev) => NetlistCheck {
            found: ev.found,
            payload_hex: hex::encode(&ev.payload_bytes),
            matches_payload: ev.found && job.payload.encoded.starts_with(&ev.payload_bytes),
            error: None,
        },
        Err(e) => NetlistCheck {
            error: Some(e),
            ..NetlistCheck::default()
        },
    }
}

fn eligible(job: &Job, entry: &CorpusEntry) -> EligibleRow {
    let mut row = EligibleRow {
        file: entry.name.clone(),
        top: entry.top.clone(),
        ..EligibleRow::default()
    };
    let ast = match parse(&entry.source) {
        Ok(a) => a,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let p = match plan(&ast, job.key, job.payload, &job.cfg.objective, job.null) {
        Ok(p) => p,
        Err(EmbedError::InsufficientCapacity { achieved, applicable }) => {
            row.applicable_sites = applicable;
            row.predicted = achieved;
            row.error = Some("insufficient capacity".into());
            return row;
        }
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.feasible = true;
    row.applicable_sites = p.applicable;
    row.applicable_rules = p.applicable_rules;
    row.selected = p.selected.len();
    row.rules = p.selected.iter().map(|s| s.rule).collect();
    row.predicted = p.predicted_confidence;
    let doc = match embed(&ast, &p, job.key, job.payload, &job.cfg.budget) {
        Ok(d) => d,
        Err(e) => {
            row.equivalence_failure = matches!(e, EmbedError::NotEquivalent(_));
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.equivalence = doc.equivalence.as_ref().map(|v| format!("{v:?}"));
    let report = verify(&doc, job.key, job.null, job.cfg.tau);
    row.confidence = report.confidence;
    row.detected = report.verdict == Verdict::Watermarked;
    row.one_minimal = is_one_minimal(&ast, &p, job.key, job.payload, job.null, job.cfg.tau);
    row.discrepancy = discrepancy(&entry.source.content, &doc.source.content);

    let (kept, _) = score(&report.evidence, job.null, |r: RuleId| !r.is_name_dependent());
    let expected = logistic(kept);
    row.name_independent = expected >= job.cfg.tau;
    for &fraction in &job.cfg.attack_fractions {
        for &seed in &job.cfg.attack_seeds {
            let spec = AttackSpec::rename(fraction, seed);
            let mut a = AttackRow {
                fraction,
                seed,
                expected,
                ..AttackRow::default()
            };
            match rename_attack(&doc.source, &spec) {
                Ok(out) => {
                    let post = detect(&out.source, job.key, job.null, job.cfg.tau);
                    a.renamed = out.renames.len();
                    a.confidence = post.confidence;
                    a.detected = post.verdict == Verdict::Watermarked;
                    a.exact_split = fraction < 1.0 || post.score.to_bits() == kept.to_bits();
                }
                Err(e) => a.error = Some(e.to_string()),
            }
            row.attacks.push(a);
        }
    }

    if job.synth {
        if let Some(site) = p.selected.iter().find(|s| s.rule == RuleId::T15) {
            let width = carrier_width(site);
            let before = netlist_check(job, &doc.source.content, &entry.top, width);
            let seed = job.cfg.attack_seeds.first().copied().unwrap_or(1);
            let after = match rename_attack(&doc.source, &AttackSpec::rename(1.0, seed)) {
                Ok(out) => netlist_check(job, &out.source.content, &entry.top, width),
                Err(e) => NetlistCheck {
                    error: Some(e.to_string()),
                    ..NetlistCheck::default()
                },
            };
            row.netlist = Some((before, after));
        }
    }
    row
}

fn clean(job: &Job, entry: &CorpusEntry) -> CleanRow {
    let report = match parse(&entry.source) {
        Ok(ast) => detect_ast(&ast, job.key, job.null, job.cfg.tau),
        Err(e) => {
            return CleanRow {
                file: entry.name.clone(),
                error: Some(e.to_string()),
                ..CleanRow::default()
            }
        }
    };
    CleanRow {
        file: entry.name.clone(),
        confidence: report.confidence,
        detected: report.verdict == Verdict::Watermarked,
        netlist: job.synth.then(|| netlist_check(job, &entry.source.content, &entry.top, None)),
        error: None,
    }
}

/// Embed and detect over the eligible set, detect over the clean set, and
/// aggregate. Per-file failures are recorded, never fatal.
pub fn evaluate(corpus: &Corpus, key: &WatermarkKey, null: &NullModel, cfg: &EvalConfig) -> MetricsReport {
    let payload = encode_payload(&cfg.model, &cfg.developer, key, DEFAULT_MAX_PAYLOAD).unwrap_or_else(|_| Payload {
        model: cfg.model.clone(),
        developer: cfg.developer.clone(),
        encoded: Vec::new(),
    });
    let synth_available = cfg.netlist && cfg.synth.available();
    let job = Job {
        key,
        null,
        cfg,
        payload: &payload,
        synth: synth_available,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().expect("thread pool");
    let (eligible_rows, clean_rows) = pool.install(|| {
        let e: Vec<&CorpusEntry> = corpus.of(Class::Eligible).collect();
        let c: Vec<&CorpusEntry> = corpus.of(Class::Clean).collect();
        (
            e.par_iter().map(|x| eligible(&job, x)).collect::<Vec<_>>(),
            c.par_iter().map(|x| clean(&job, x)).collect::<Vec<_>>(),
        )
    });
    let netlist_skipped = (cfg.netlist && !synth_available).then(|| "synthesis tool not found".to_string());
    MetricsReport::assemble(key, null, cfg, eligible_rows, clean_rows, netlist_skipped)
}

/// `detect` over already-loaded sources, for callers that only need verdicts.
pub fn verdicts(sources: &[SourceText], key: &WatermarkKey, null: &NullModel, tau: f64) -> Vec<bool> {
    sources.iter().map(|s| detect(s, key, null, tau).verdict == Verdict::Watermarked).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrepancy_counts_tokens() {
        assert_eq!(discrepancy("assign y = a;", "assign y = a;"), 0.0);
        assert_eq!(discrepancy("assign y = a;", "assign y = b;"), 0.2);
        assert_eq!(discrepancy("assign y = a;", "// note\nassign y = a;"), 1.0 / 6.0);
        assert_eq!(discrepancy("", ""), 0.0);
    }

    #[test]
    fn evaluate_small_corpus() {
        let fsm = crate::embed::tests::FSM;
        let corpus = Corpus {
            entries: vec![
                CorpusEntry {
                    name: "eligible/ctl.v".into(),
                    class: Class::Eligible,
                    top: "ctl".into(),
                    source: SourceText::new(fsm, "eligible/ctl.v"),
                },
                CorpusEntry {
                    name: "clean/inv.v".into(),
                    class: Class::Clean,
                    top: "inv".into(),
                    source: SourceText::new("module inv(input a, output y); assign y = ~a; endmodule\n", "clean/inv.v"),
                },
            ],
        };
        let cfg = EvalConfig {
            attack_fractions: vec![1.0],
            attack_seeds: vec![1, 2],
            workers: 2,
            ..EvalConfig::default()
        };
        let key = WatermarkKey::from_seed(5);
        let r = evaluate(&corpus, &key, &NullModel::default(), &cfg);
        assert_eq!(r.detection.tp, 1);
        assert_eq!(r.detection.tn, 1);
        assert_eq!(r.eligible[0].attacks.len(), 2);
        assert!(r.eligible[0].attacks.iter().all(|a| a.exact_split));
        assert!(r.eligible[0].one_minimal);
        assert_eq!(r.to_json(), evaluate(&corpus, &key, &NullModel::default(), &cfg).to_json());
        assert!(r.to_table().contains("eligible/ctl.v"));
    }
}
