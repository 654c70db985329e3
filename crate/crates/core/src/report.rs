//! Machine-readable run reports. Verdicts come from re-checking the coloring
//! against the graph, never from pipeline state. No timings, so identical
//! inputs give byte-identical JSON.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::acd::{validate_acd, AcdStats};
use crate::congest::BandwidthReport;
use crate::graph::{check_coloring, Graph};
use crate::pipeline::{Check, Regime, RunConfig, RunOutcome, Triple};
use crate::coloring::{D1lcStats, PairStats};
use crate::lll::SolveStats;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphSummary {
    pub n: usize,
    pub m: usize,
    pub delta: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub proper: bool,
    pub colors_within_delta: bool,
    pub all_colored: bool,
    /// Every assert ran without firing (runs that hit one return an error instead).
    pub asserts_passed: bool,
    /// Violations of the decomposition invariants, re-checked here.
    pub acd_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect: Option<String>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.proper && self.colors_within_delta && self.all_colored && self.asserts_passed && self.acd_violations == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcdSummary {
    pub eps: f64,
    pub cliques: usize,
    pub sparse: usize,
    pub clique_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<AcdStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub graph: GraphSummary,
    pub seed: u64,
    pub config: RunConfig,
    pub regime: Option<Regime>,
    pub verdict: Verdict,
    pub fallback: bool,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acd: Option<AcdSummary>,
    pub classes: BTreeMap<String, usize>,
    pub ac_types: BTreeMap<String, usize>,
    pub bandwidth: BandwidthReport,
    pub retries: BTreeMap<String, u32>,
    pub checks: BTreeMap<String, Check>,
    pub measures: BTreeMap<String, f64>,
    pub lll: BTreeMap<String, SolveStats>,
    pub d1lc: D1lcStats,
    pub pairs: BTreeMap<String, PairStats>,
    pub triples: Vec<Triple>,
}

pub fn verdict(g: &Graph, colors: &[u32]) -> Verdict {
    let all_colored = colors.len() == g.n() && colors.iter().all(|&c| c != 0);
    let colors_within_delta = colors.iter().all(|&c| c as usize <= g.delta());
    let (proper, defect) = match check_coloring(g, colors) {
        Ok(()) => (true, None),
        Err(d) => (false, Some(format!("{d:?}"))),
    };
    Verdict { proper, colors_within_delta, all_colored, asserts_passed: true, acd_violations: 0, defect }
}

pub fn build_report(g: &Graph, cfg: &RunConfig, out: &RunOutcome) -> RunReport {
    let mut v = verdict(g, &out.colors);
    let tr = &out.trace;
    let acd = out.acd.as_ref().map(|a| {
        if tr.acd_stats.is_some() {
            v.acd_violations = validate_acd(g, a, cfg.zeta).len();
        }
        AcdSummary { eps: a.eps, cliques: a.cliques.len(), sparse: a.sparse.len(), clique_sizes: a.cliques.iter().map(|c| c.len()).collect(), stats: tr.acd_stats.clone() }
    });
    v.asserts_passed = tr.checks.values().all(|c| if c.kind == "le" { c.worst <= c.bound + 1e-9 } else { c.worst >= c.bound - 1e-9 });
    RunReport {
        graph: GraphSummary { n: g.n(), m: g.m(), delta: g.delta() },
        seed: cfg.seed,
        config: cfg.clone(),
        regime: tr.regime,
        verdict: v,
        fallback: tr.fallback,
        flags: tr.flags.clone(),
        acd,
        classes: tr.classes.clone(),
        ac_types: tr.ac_types.clone(),
        bandwidth: out.audit.clone(),
        retries: tr.retries.clone(),
        checks: tr.checks.clone(),
        measures: tr.measures.clone(),
        lll: tr.lll.clone(),
        d1lc: tr.d1lc.clone(),
        pairs: tr.pairs.clone(),
        triples: tr.triples.clone(),
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorSpec};
    use crate::pipeline::run;

    #[test]
    fn verdict_names_the_defect() {
        let g = crate::graph::fixtures::cycle(4);
        let v = verdict(&g, &[1, 1, 3, 1]);
        assert!(!v.proper && !v.colors_within_delta);
        assert!(v.defect.is_some());
        assert!(verdict(&g, &[1, 2, 1, 2]).ok());
    }

    #[test]
    fn byte_identical() {
        let g = generate(&GeneratorSpec::random_regular(10, 120, 5)).unwrap();
        let cfg = RunConfig { seed: 5, ..Default::default() };
        let a = build_report(&g, &cfg, &run(&g, &cfg).unwrap()).to_json();
        let b = build_report(&g, &cfg, &run(&g, &cfg).unwrap()).to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"proper\": true"));
    }
}
