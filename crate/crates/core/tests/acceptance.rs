//! End-to-end acceptance checks over the bundled corpus. Each criterion prints
//! one PASS/FAIL line; the test fails if any criterion fails.

use rtlmark::detect::{detect, NullModel, Verdict};
use rtlmark::embed::{all_sites, embed, plan, EmbedObjective};
use rtlmark::eval::{evaluate, load_corpus, Class, Corpus, EvalConfig, MetricsReport};
use rtlmark::key::WatermarkKey;
use rtlmark::payload::{encode_payload, DEFAULT_MAX_PAYLOAD};
use rtlmark::rules::{apply, RuleId};
use rtlmark::sim::{check_equivalence, EquivBudget};
use rtlmark::verilog::{parse, parse_str, print, SourceText};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

const KEY_SEED: u64 = 20_240_601;
const WRONG_KEYS: u64 = 100;

struct Outcome {
    id: u8,
    pass: bool,
    skipped: bool,
    line: String,
}

impl Outcome {
    fn new(id: u8, pass: bool, line: String) -> Outcome {
        Outcome { id, pass, skipped: false, line }
    }
}

// Written straight to the process stdout so the lines survive output capture.
fn report(o: &Outcome) {
    let tag = match (o.skipped, o.pass) {
        (true, _) => "SKIP",
        (false, true) => "PASS",
        (false, false) => "FAIL",
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance criterion {}: {tag}: {}", o.id, o.line);
    let _ = out.flush();
}

fn corpus() -> Corpus {
    load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")).expect("corpus loads")
}

fn round_trip(c: &Corpus) -> Outcome {
    let t = Instant::now();
    let files: Vec<_> = c.of(Class::Eligible).collect();
    let mut bad = Vec::new();
    for e in &files {
        let ok = parse(&e.source).is_ok_and(|ast| {
            let verbatim = parse_str(&print(&ast)).is_ok_and(|b| b == ast);
            let mut bare = ast.clone();
            bare.source = None;
            let canonical = parse_str(&print(&bare)).is_ok_and(|b| b == ast);
            verbatim && canonical
        });
        if !ok {
            bad.push(e.name.clone());
        }
    }
    let dt = t.elapsed();
    let pass = files.len() >= 30 && bad.is_empty() && dt < Duration::from_secs(10);
    Outcome::new(1, pass, format!("{}/{} files round-trip in {:.2?} {:?}", files.len() - bad.len(), files.len(), dt, bad))
}

fn semantics(c: &Corpus, key: &WatermarkKey) -> Outcome {
    let t = Instant::now();
    let payload = encode_payload("model", "developer", key, DEFAULT_MAX_PAYLOAD).unwrap();
    let budget = EquivBudget::default();
    let mut per_rule: BTreeMap<RuleId, usize> = BTreeMap::new();
    let mut failures = Vec::new();
    for e in c.of(Class::Eligible) {
        let ast = parse(&e.source).unwrap();
        for site in all_sites(&ast, key) {
            let ok = match apply(&ast, &site, key, &payload) {
                Ok((after, _)) => matches!(check_equivalence(&ast, &after, &budget), Ok(v) if v.is_equivalent()),
                Err(_) => false,
            };
            if ok {
                *per_rule.entry(site.rule).or_default() += 1;
            } else {
                failures.push(format!("{} {} {}", e.name, site.rule, site.detail));
            }
        }
    }
    let dt = t.elapsed();
    let total: usize = per_rule.values().sum::<usize>() + failures.len();
    let missing: Vec<&str> = RuleId::ALL.iter().filter(|r| !per_rule.contains_key(r)).map(|r| r.code()).collect();
    let pass = failures.is_empty() && total >= 150 && missing.is_empty() && dt < Duration::from_secs(300);
    let counts: Vec<String> = per_rule.iter().map(|(r, n)| format!("{}={n}", r.code())).collect();
    Outcome::new(
        2,
        pass,
        format!(
            "{total} applications, {} failures, rules [{}], missing {missing:?}, {:.2?} {:?}",
            failures.len(),
            counts.join(" "),
            dt,
            failures
        ),
    )
}

fn effectiveness(r: &MetricsReport) -> Outcome {
    let d = &r.detection;
    let clean = d.fp + d.tn;
    let pass = d.tp + d.fn_ > 0 && r.tpr == 1.0 && clean == 30 && r.fpr <= 1.0 / 30.0 + 1e-12;
    Outcome::new(
        3,
        pass,
        format!("TPR {:.2}% over {} feasible, FPR {:.2}% over {clean} clean, {} infeasible", 100.0 * r.tpr, d.tp + d.fn_, 100.0 * r.fpr, r.infeasible),
    )
}

fn robustness(r: &MetricsReport, seeds: usize) -> Outcome {
    let Some(a) = r.attacks.iter().find(|a| a.fraction == 1.0) else {
        return Outcome::new(4, false, "no full-rename attack in the report".into());
    };
    let errors = r.eligible.iter().flat_map(|e| &e.attacks).filter(|a| a.error.is_some()).count();
    let pass = a.runs == seeds * r.transparency.files
        && a.exact_split == a.runs
        && a.name_independent_detected == a.name_independent_runs
        && a.name_independent_runs > 0
        && errors == 0;
    Outcome::new(
        4,
        pass,
        format!(
            "{} runs, exact split {}/{}, name-independent plans detected {}/{}, overall TPR {:.2}%",
            a.runs,
            a.exact_split,
            a.runs,
            a.name_independent_detected,
            a.name_independent_runs,
            100.0 * a.tpr
        ),
    )
}

fn netlist(r: &MetricsReport) -> Outcome {
    let Some(n) = &r.netlist else {
        return Outcome::new(5, false, "netlist step did not run".into());
    };
    if let Some(why) = &n.skipped {
        eprintln!("warning: netlist persistence skipped: {why}");
        return Outcome {
            id: 5,
            pass: true,
            skipped: true,
            line: format!("skipped: {why}"),
        };
    }
    let planned: Vec<_> = r.eligible.iter().filter_map(|e| e.netlist.as_ref()).collect();
    let clean_traces = r.clean.iter().filter_map(|c| c.netlist.as_ref()).filter(|c| c.found).count();
    let both = planned
        .iter()
        .filter(|(b, a)| b.matches_payload && a.matches_payload && a.payload_hex == b.payload_hex)
        .count();
    let synth_ok = planned.iter().filter(|(b, a)| b.error.is_none() && a.error.is_none()).count();
    let pass = !planned.is_empty() && both == synth_ok && clean_traces == 0;
    Outcome::new(
        5,
        pass,
        format!(
            "payload recovered before and after full rename in {both}/{synth_ok} synthesized T15 modules ({} planned, {} tool errors); clean traces {clean_traces}/{}",
            planned.len(),
            n.errors,
            r.clean.len()
        ),
    )
}

fn transparency(r: &MetricsReport) -> Outcome {
    let t = &r.transparency;
    let pass = t.files > 0 && t.mean_selected < t.mean_applicable_sites && t.all_one_minimal;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", r.to_table());
    Outcome::new(
        6,
        pass,
        format!(
            "mean selected {:.2} < mean applicable {:.2} over {} files, all 1-minimal: {}, mean D {:.3}",
            t.mean_selected, t.mean_applicable_sites, t.files, t.all_one_minimal, t.mean_discrepancy
        ),
    )
}

fn key_separation(c: &Corpus, key: &WatermarkKey, null: &NullModel, cfg: &EvalConfig) -> Outcome {
    let payload = encode_payload(&cfg.model, &cfg.developer, key, DEFAULT_MAX_PAYLOAD).unwrap();
    let marked: Vec<SourceText> = c
        .of(Class::Eligible)
        .filter_map(|e| {
            let ast = parse(&e.source).ok()?;
            let p = plan(&ast, key, &payload, &cfg.objective, null).ok()?;
            embed(&ast, &p, key, &payload, &cfg.budget).ok().map(|d| d.source)
        })
        .collect();
    let mut hits = 0;
    for i in 0..WRONG_KEYS {
        let wrong = WatermarkKey::from_seed(KEY_SEED.wrapping_add(1 + i).wrapping_mul(0x9e37_79b9));
        if wrong.id() == key.id() {
            continue;
        }
        hits += marked.iter().filter(|s| detect(s, &wrong, null, cfg.tau).verdict == Verdict::Watermarked).count();
    }
    let pass = !marked.is_empty() && hits == 0;
    Outcome::new(7, pass, format!("{hits} watermarked verdicts over {WRONG_KEYS} wrong keys x {} documents", marked.len()))
}

#[test]
fn acceptance_criteria() {
    let c = corpus();
    let key = WatermarkKey::from_seed(KEY_SEED);
    let null = NullModel::default();
    let seeds = vec![1, 2, 3, 4, 5];
    let cfg = EvalConfig {
        objective: EmbedObjective::default(),
        attack_fractions: vec![1.0],
        attack_seeds: seeds.clone(),
        netlist: true,
        ..EvalConfig::default()
    };

    let mut outcomes = vec![round_trip(&c), semantics(&c, &key)];
    let first = evaluate(&c, &key, &null, &cfg);
    outcomes.push(effectiveness(&first));
    outcomes.push(robustness(&first, seeds.len()));
    outcomes.push(netlist(&first));
    outcomes.push(transparency(&first));
    outcomes.push(key_separation(&c, &key, &null, &cfg));
    let second = evaluate(&c, &key, &null, &cfg);
    let (a, b) = (first.to_json(), second.to_json());
    let same = a == b && first.to_table() == second.to_table();
    outcomes.push(Outcome::new(8, same, format!("two evaluate runs, reports of {} bytes, identical: {same}", a.len())));

    outcomes.iter().for_each(report);
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
