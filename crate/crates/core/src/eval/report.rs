use super::EvalConfig;
use crate::detect::NullModel;
use crate::key::WatermarkKey;
use crate::rules::RuleId;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Confusion {
    pub fn from_verdicts(positives: &[bool], negatives: &[bool]) -> Confusion {
        let tp = positives.iter().filter(|d| **d).count();
        let fp = negatives.iter().filter(|d| **d).count();
        Confusion {
            tp,
            fn_: positives.len() - tp,
            fp,
            tn: negatives.len() - fp,
        }
    }

    pub fn acc(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub fraction: f64,
    pub seed: u64,
    pub renamed: usize,
    pub confidence: f64,
    /// Pre-attack confidence with the name-dependent rules discounted.
    pub expected: f64,
    pub detected: bool,
    /// Full renames only: post-attack score equals the discounted score bit for bit.
    pub exact_split: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistCheck {
    pub found: bool,
    pub payload_hex: String,
    pub matches_payload: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EligibleRow {
    pub file: String,
    pub top: String,
    pub feasible: bool,
    pub applicable_sites: usize,
    pub applicable_rules: usize,
    pub selected: usize,
    pub rules: Vec<RuleId>,
    pub predicted: f64,
    pub confidence: f64,
    pub detected: bool,
    pub one_minimal: bool,
    pub discrepancy: f64,
    pub equivalence: Option<String>,
    pub equivalence_failure: bool,
    /// The plan clears tau without name-dependent rules.
    pub name_independent: bool,
    pub attacks: Vec<AttackRow>,
    /// Before and after a full rename.
    pub netlist: Option<(NetlistCheck, NetlistCheck)>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanRow {
    pub file: String,
    pub confidence: f64,
    pub detected: bool,
    pub netlist: Option<NetlistCheck>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub fraction: f64,
    pub runs: usize,
    pub detected: usize,
    pub tpr: f64,
    pub name_independent_runs: usize,
    pub name_independent_detected: usize,
    pub exact_split: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transparency {
    pub files: usize,
    pub mean_applicable_sites: f64,
    pub mean_applicable_rules: f64,
    pub mean_selected: f64,
    pub mean_discrepancy: f64,
    pub all_one_minimal: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetlistSummary {
    pub skipped: Option<String>,
    pub confusion: Confusion,
    pub tpr: f64,
    pub fpr: f64,
    /// Modules whose payload traced identically after a full rename.
    pub rename_stable: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub key_id: String,
    pub tau: f64,
    pub null_corpus_size: usize,
    pub detection: Confusion,
    pub acc: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub infeasible: usize,
    pub equivalence_failures: usize,
    pub transparency: Transparency,
    pub attacks: Vec<AttackSummary>,
    pub netlist: Option<NetlistSummary>,
    pub eligible: Vec<EligibleRow>,
    pub clean: Vec<CleanRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl MetricsReport {
    pub(super) fn assemble(
        key: &WatermarkKey,
        null: &NullModel,
        cfg: &EvalConfig,
        eligible: Vec<EligibleRow>,
        clean: Vec<CleanRow>,
        netlist_skipped: Option<String>,
    ) -> MetricsReport {
        let feasible: Vec<&EligibleRow> = eligible.iter().filter(|r| r.feasible).collect();
        let pos: Vec<bool> = feasible.iter().map(|r| r.detected).collect();
        let neg: Vec<bool> = clean.iter().map(|r| r.detected).collect();
        let detection = Confusion::from_verdicts(&pos, &neg);
        let embedded: Vec<&&EligibleRow> = feasible.iter().filter(|r| r.error.is_none()).collect();
        let transparency = Transparency {
            files: embedded.len(),
            mean_applicable_sites: mean(embedded.iter().map(|r| r.applicable_sites as f64)),
            mean_applicable_rules: mean(embedded.iter().map(|r| r.applicable_rules as f64)),
            mean_selected: mean(embedded.iter().map(|r| r.selected as f64)),
            mean_discrepancy: mean(embedded.iter().map(|r| r.discrepancy)),
            all_one_minimal: embedded.iter().all(|r| r.one_minimal),
        };
        let attacks = cfg
            .attack_fractions
            .iter()
            .map(|&f| {
                let runs: Vec<(&EligibleRow, &AttackRow)> = embedded
                    .iter()
                    .flat_map(|r| r.attacks.iter().filter(move |a| a.fraction == f).map(move |a| (**r, a)))
                    .collect();
                let detected = runs.iter().filter(|(_, a)| a.detected).count();
                let ni: Vec<_> = runs.iter().filter(|(r, _)| r.name_independent).collect();
                AttackSummary {
                    fraction: f,
                    runs: runs.len(),
                    detected,
                    tpr: ratio(detected, runs.len()),
                    name_independent_runs: ni.len(),
                    name_independent_detected: ni.iter().filter(|(_, a)| a.detected).count(),
                    exact_split: runs.iter().filter(|(_, a)| a.exact_split).count(),
                }
            })
            .collect();
        let netlist = if let Some(reason) = netlist_skipped {
            Some(NetlistSummary {
                skipped: Some(reason),
                ..NetlistSummary::default()
            })
        } else if cfg.netlist {
            let planned: Vec<&(super::NetlistCheck, super::NetlistCheck)> = eligible.iter().filter_map(|r| r.netlist.as_ref()).collect();
            let ok_pos: Vec<bool> = planned.iter().filter(|(b, _)| b.error.is_none()).map(|(b, _)| b.matches_payload).collect();
            let ok_neg: Vec<bool> = clean.iter().filter_map(|r| r.netlist.as_ref()).filter(|n| n.error.is_none()).map(|n| n.found).collect();
            let confusion = Confusion::from_verdicts(&ok_pos, &ok_neg);
            Some(NetlistSummary {
                skipped: None,
                confusion,
                tpr: confusion.tpr(),
                fpr: confusion.fpr(),
                rename_stable: planned
                    .iter()
                    .filter(|(b, a)| b.matches_payload && a.matches_payload && a.payload_hex == b.payload_hex)
                    .count(),
                errors: planned.iter().map(|(b, a)| b.error.is_some() as usize + a.error.is_some() as usize).sum::<usize>()
                    + clean.iter().filter(|r| r.netlist.as_ref().is_some_and(|n| n.error.is_some())).count(),
            })
        } else {
            None
        };
        MetricsReport {
            key_id: key.id().to_string(),
            tau: cfg.tau,
            null_corpus_size: null.corpus_size,
            acc: detection.acc(),
            tpr: detection.tpr(),
            fpr: detection.fpr(),
            detection,
            infeasible: eligible.iter().filter(|r| !r.feasible).count(),
            equivalence_failures: eligible.iter().filter(|r| r.equivalence_failure).count(),
            transparency,
            attacks,
            netlist,
            eligible,
            clean,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_table(&self) -> String {
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        let mut s = String::new();
        let _ = writeln!(s, "key {}  tau {}  null corpus {}", self.key_id, self.tau, self.null_corpus_size);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<32} {:>5} {:>5} {:>4}  {:<24} {:>8} {:>6} {:>5}", "file", "sites", "rules", "sel", "selected rules", "conf", "D", "1-min");
        for r in &self.eligible {
            if !r.feasible || r.error.is_some() {
                let _ = writeln!(s, "{:<32} {:>5} {:>5} {:>4}  {}", r.file, r.applicable_sites, r.applicable_rules, "-", r.error.as_deref().unwrap_or("infeasible"));
                continue;
            }
            let rules: Vec<&str> = r.rules.iter().map(|x| x.code()).collect();
            let _ = writeln!(
                s,
                "{:<32} {:>5} {:>5} {:>4}  {:<24} {:>8.4} {:>6.3} {:>5}",
                r.file,
                r.applicable_sites,
                r.applicable_rules,
                r.selected,
                rules.join(","),
                r.confidence,
                r.discrepancy,
                if r.one_minimal { "yes" } else { "NO" }
            );
        }
        let t = &self.transparency;
        let _ = writeln!(
            s,
            "{:<32} {:>5.2} {:>5.2} {:>4.2}  mean D {:.3}",
            "mean", t.mean_applicable_sites, t.mean_applicable_rules, t.mean_selected, t.mean_discrepancy
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8}", "", "ACC", "TPR", "FPR");
        let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8}", "RTL", pct(self.acc), pct(self.tpr), pct(self.fpr));
        if let Some(n) = &self.netlist {
            match &n.skipped {
                Some(why) => {
                    let _ = writeln!(s, "{:<10} skipped: {why}", "netlist");
                }
                None => {
                    let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8}", "netlist", pct(n.confusion.acc()), pct(n.tpr), pct(n.fpr));
                }
            }
        }
        for a in &self.attacks {
            let _ = writeln!(
                s,
                "attack {:>4}% {:>8} TPR over {} runs; name-independent plans {}/{}",
                pct(a.fraction),
                pct(a.tpr),
                a.runs,
                a.name_independent_detected,
                a.name_independent_runs
            );
        }
        let _ = writeln!(s, "infeasible {}  equivalence failures {}", self.infeasible, self.equivalence_failures);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_algebra() {
        let c = Confusion::from_verdicts(&[true, true, true, false], &[false, false, true]);
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (3, 1, 1, 2));
        assert_eq!(c.acc(), 5.0 / 7.0);
        assert_eq!(c.tpr(), 0.75);
        assert_eq!(c.fpr(), 1.0 / 3.0);
        assert_eq!(Confusion::default().acc(), 0.0);
    }
}
