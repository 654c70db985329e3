//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines reach stdout. Exits non-zero when a criterion
//! fails that is not in KNOWN_UNATTAINABLE.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use deltacolor::acd::{compute_acd, validate_acd};
use deltacolor::classify::{AcType, Level};
use deltacolor::colorset::ColorSet;
use deltacolor::coloring::{solve_d1lc, ColoringState};
use deltacolor::congest::{NetConfig, Network};
use deltacolor::generate::{generate, generate_instance, GeneratorSpec};
use deltacolor::lll::{build_l3, solve_resampling};
use deltacolor::matching::max_bipartite_matching;
use deltacolor::pipeline::{run, RunConfig, RunOutcome};
use deltacolor::report::build_report;
use deltacolor::stats::{bipartite_claim_instance, e_prime_rates, fit_gamma, l3_single_ac, non_edge_hitting, par_map, slack_sample};
use deltacolor::{Graph, NodeId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail at desk scale for reasons recorded in the decisions
/// ledger. They still run and print FAIL; they do not fail the target.
const KNOWN_UNATTAINABLE: &[u32] = &[5];

/// Seeds per criterion-1 family. DELTACOLOR_ACCEPTANCE_SEEDS lowers it for
/// quick local runs; anything below 100 is reported as a reduced run.
fn seeds() -> u64 {
    std::env::var("DELTACOLOR_ACCEPTANCE_SEEDS").ok().and_then(|s| s.parse().ok()).unwrap_or(100)
}

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

// ---- independent oracles ----

/// Proper, complete, colors in 1..=Delta. Written against the edge list only.
fn oracle_proper(g: &Graph, colors: &[u32]) -> Result<(), String> {
    if colors.len() != g.n() {
        return Err(format!("{} colors for {} nodes", colors.len(), g.n()));
    }
    let d = g.delta() as u32;
    if let Some(v) = (0..g.n()).find(|&v| colors[v] == 0 || colors[v] > d) {
        return Err(format!("node {v} has color {} (Delta {d})", colors[v]));
    }
    for (u, v) in g.edges() {
        if colors[u as usize] == colors[v as usize] {
            return Err(format!("edge ({u}, {v}) monochromatic"));
        }
    }
    Ok(())
}

fn ceil_log2(n: usize) -> u32 {
    let mut k = 0;
    while (1usize << k) < n {
        k += 1;
    }
    k
}

/// Maximum matching between C and its outside neighbors.
fn boundary_matching(g: &Graph, c: &[NodeId]) -> usize {
    let inside: std::collections::BTreeSet<NodeId> = c.iter().copied().collect();
    let mut right: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut edges = Vec::new();
    for (i, &v) in c.iter().enumerate() {
        for &w in g.neighbors(v) {
            if !inside.contains(&w) {
                let k = right.len();
                let j = *right.entry(w).or_insert(k);
                edges.push((i, j));
            }
        }
    }
    max_bipartite_matching(c.len(), right.len(), &edges).len()
}

/// Wilson score interval lower end at 95%.
fn wilson_lower(wins: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (p, n, z) = (wins as f64 / n as f64, n as f64, 1.96f64);
    let c = p + z * z / (2.0 * n);
    let r = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt();
    (c - r) / (1.0 + z * z / n)
}

// ---- criterion-1 runs ----

#[derive(Clone, Copy)]
enum Family {
    RandomRegular,
    Nice(usize),
    Chain,
    Lattice,
}

impl Family {
    fn name(self) -> String {
        match self {
            Family::RandomRegular => "random_regular(32, 2000)".into(),
            Family::Nice(d) => format!("nice_clique({d})"),
            Family::Chain => "difficult_chain(1024, 3 layers)".into(),
            Family::Lattice => "ordinary_lattice(512, 10 ACs)".into(),
        }
    }

    fn instance(self, seed: u64) -> (GeneratorSpec, f64) {
        match self {
            Family::RandomRegular => (GeneratorSpec::random_regular(32, 2000, seed), 1.0 / 172.0),
            Family::Nice(d) => (GeneratorSpec::nice_clique(d), 1.0 / 172.0),
            Family::Chain => (GeneratorSpec::difficult_chain(1024, 3, 1.0 / 172.0, seed), 1.0 / 172.0),
            Family::Lattice => (GeneratorSpec::ordinary_lattice(512, 10, 1, seed), 1.0 / 12.0),
        }
    }
}

const FAMILIES: [Family; 6] = [Family::RandomRegular, Family::Nice(5), Family::Nice(9), Family::Nice(33), Family::Chain, Family::Lattice];

#[derive(Default)]
struct Tally {
    runs: u64,
    errors: Vec<String>,
    improper: Vec<String>,
    fallbacks: u64,
    acd_runs: u64,
    acd_violations: u64,
    ordinary_acs: u64,
    matching_min_ratio: f64,
    exact_min_ratio: f64,
    check_failures: Vec<String>,
    check_evals: BTreeMap<String, u64>,
    level_pairs: u64,
    level_violations: Vec<String>,
    budget_violations: Vec<String>,
    max_bits_seen: u32,
    lll_solves: u64,
    d1lc_instances: u64,
    pair_tries: u64,
    pair_wins: u64,
    pair_seeds: u64,
    per_family_time: BTreeMap<String, Duration>,
}

fn absorb(t: &mut Tally, label: &str, g: &Graph, out: &RunOutcome) {
    let d = g.delta();
    if let Err(e) = oracle_proper(g, &out.colors) {
        t.improper.push(format!("{label}: {e}"));
    }
    if out.trace.fallback {
        t.fallbacks += 1;
    }
    if let (Some(acd), Some(_)) = (&out.acd, &out.trace.acd_stats) {
        t.acd_runs += 1;
        t.acd_violations += validate_acd(g, acd, 1.0 / 64.0).len() as u64;
    }
    if let (Some(acd), Some(cls)) = (&out.acd, &out.classification) {
        for (i, info) in cls.infos.iter().enumerate() {
            if info.ac_type == AcType::Ordinary {
                t.ordinary_acs += 1;
                t.matching_min_ratio = t.matching_min_ratio.min(info.matching.len() as f64 / d as f64);
                t.exact_min_ratio = t.exact_min_ratio.min(boundary_matching(g, &acd.cliques[i]) as f64 / d as f64);
            }
            // A finite-level AC has its special node in a difficult AC of strictly higher level.
            if let (Some(Level::Finite(l)), Some(s)) = (info.level, info.special) {
                t.level_pairs += 1;
                let host = acd.part[s as usize].map(|h| &cls.infos[h as usize]);
                let ok = host.is_some_and(|h| h.ac_type == AcType::Difficult && h.level.is_some_and(|hl| hl > Level::Finite(l)));
                if !ok {
                    t.level_violations.push(format!("AC {i} at level {l}, special {s}"));
                }
            }
        }
    }
    for (name, c) in &out.trace.checks {
        *t.check_evals.entry(name.clone()).or_insert(0) += c.evaluations;
        let ok = if c.kind == "le" { c.worst <= c.bound + 1e-9 } else { c.worst >= c.bound - 1e-9 };
        if !ok {
            t.check_failures.push(format!("{name}: worst {} vs {}", c.worst, c.bound));
        }
    }
    let budget = 4 * ceil_log2(g.n());
    t.max_bits_seen = t.max_bits_seen.max(out.audit.max_bits);
    if out.audit.max_bits > budget || out.audit.overruns > 0 {
        t.budget_violations.push(format!("{label}: {} bits > {budget}", out.audit.max_bits));
    }
    t.lll_solves += out.trace.lll.len() as u64;
    t.d1lc_instances += out.trace.d1lc.instances;
    if let Some(ps) = out.trace.pairs.get("triples") {
        t.pair_seeds += 1;
        for &(u, c) in &ps.per_iteration {
            t.pair_tries += u;
            t.pair_wins += c;
        }
    }
}

fn criterion1_runs() -> (Tally, Duration) {
    let mut t = Tally { matching_min_ratio: f64::INFINITY, exact_min_ratio: f64::INFINITY, ..Default::default() };
    let start = Instant::now();
    for fam in FAMILIES {
        let t0 = Instant::now();
        let seeds: Vec<u64> = (0..seeds()).collect();
        let outs = par_map(&seeds, |&seed| {
            let (spec, eps) = fam.instance(seed);
            let g = generate(&spec).map_err(|e| format!("{} seed {seed}: generate: {e}", fam.name()))?;
            let cfg = RunConfig { eps, seed, strict_budget: true, ..Default::default() };
            let out = run(&g, &cfg).map_err(|e| format!("{} seed {seed}: {e}", fam.name()))?;
            Ok::<_, String>((g, out))
        });
        for r in outs {
            t.runs += 1;
            match r {
                Ok((g, out)) => absorb(&mut t, &fam.name(), &g, &out),
                Err(e) => t.errors.push(e),
            }
        }
        t.per_family_time.insert(fam.name(), t0.elapsed());
    }
    (t, start.elapsed())
}

fn first<T: std::fmt::Display>(v: &[T]) -> String {
    v.first().map_or(String::new(), |x| format!("; first: {x}"))
}

// ---- individual criteria ----

fn c1(t: &Tally, wall: Duration) -> Line {
    let bad = t.errors.len() + t.improper.len();
    let times: Vec<String> = t.per_family_time.iter().map(|(k, v)| format!("{k} {:.0}s", v.as_secs_f64())).collect();
    Line {
        id: 1,
        name: "end-to-end correctness",
        pass: bad == 0 && wall <= Duration::from_secs(30 * 60),
        detail: format!(
            "{} runs, {} errors, {} improper, {} completed by the Brooks fallback; wall {:.0}s (limit 1800s) [{}]{}{}",
            t.runs,
            t.errors.len(),
            t.improper.len(),
            t.fallbacks,
            wall.as_secs_f64(),
            times.join(", "),
            first(&t.errors),
            first(&t.improper)
        ),
    }
}

fn c2(t: &Tally) -> Line {
    // Planted instances where the decomposition step actually runs.
    let seeds: Vec<u64> = (0..20).collect();
    let res = par_map(&seeds, |&seed| {
        let eps = 1.0 / 12.0;
        let inst = generate_instance(&GeneratorSpec::planted_acd(256, 2048, 4, vec![4], eps, seed)).unwrap();
        let g = &inst.graph;
        let mut net = Network::new(g, NetConfig { c_b: 4.0, strict: true, seed });
        let (acd, _) = compute_acd(&mut net, eps, 1.0 / 64.0, 5).unwrap();
        let viol = validate_acd(g, &acd, 1.0 / 64.0).len();
        let mut truth = vec![usize::MAX; g.n()];
        for (i, c) in inst.planted.iter().enumerate() {
            for &v in c {
                truth[v as usize] = i;
            }
        }
        // Map every computed AC to the planted AC it overlaps most.
        let map: Vec<usize> = acd
            .cliques
            .iter()
            .map(|c| {
                let mut cnt = BTreeMap::new();
                for &v in c {
                    *cnt.entry(truth[v as usize]).or_insert(0) += 1;
                }
                cnt.into_iter().max_by_key(|&(k, n)| (n, std::cmp::Reverse(k))).map_or(usize::MAX, |x| x.0)
            })
            .collect();
        // Boundary: sparse by planting but with >= (1 - eps) Delta neighbors in one planted AC.
        let d = g.delta() as f64;
        let mut agree = 0;
        let mut counted = 0;
        for v in g.nodes() {
            let got = acd.part[v as usize].map_or(usize::MAX, |i| map[i as usize]);
            let want = truth[v as usize];
            let boundary = want == usize::MAX
                && inst.planted.iter().any(|c| g.neighbors(v).iter().filter(|w| c.binary_search(w).is_ok()).count() as f64 >= (1.0 - eps) * d);
            if boundary {
                continue;
            }
            counted += 1;
            if got == want {
                agree += 1;
            }
        }
        (viol, agree as f64 / counted as f64)
    });
    let worst = res.iter().map(|r| r.1).fold(1.0, f64::min);
    let viol: usize = res.iter().map(|r| r.0).sum();
    Line {
        id: 2,
        name: "ACD validity",
        pass: t.acd_violations == 0 && viol == 0 && worst >= 0.95,
        detail: format!(
            "{} accepted criterion-1 runs with a computed ACD, {} violations; planted_acd(256, 2048, 4 ACs): {} violations, worst agreement {worst:.4} over {} seeds",
            t.acd_runs,
            t.acd_violations,
            viol,
            res.len()
        ),
    }
}

fn c3() -> Line {
    let mut total = 0;
    let mut bad = Vec::new();
    for k in [3usize, 5, 10] {
        for seed in 0..1000 {
            let (y, u, e) = bipartite_claim_instance(seed, k, 200);
            // Degree conditions re-checked here, not trusted from the generator.
            let mut dy = vec![0; y];
            let mut du = vec![0; u];
            for &(a, b) in &e {
                dy[a] += 1;
                du[b] += 1;
            }
            assert!(dy.iter().all(|&x| x >= k) && du.iter().all(|&x| x <= 2 * k));
            total += 1;
            let m = max_bipartite_matching(y, u, &e).len();
            if 2 * m < y {
                bad.push(format!("k={k} seed={seed}: |Y|={y}, matching {m}"));
            }
        }
    }
    Line { id: 3, name: "bipartite matching claim", pass: bad.is_empty(), detail: format!("{total} instances, {} counterexamples{}", bad.len(), first(&bad)) }
}

fn c4(t: &Tally) -> Line {
    Line {
        id: 4,
        name: "matching size",
        pass: t.ordinary_acs > 0 && t.matching_min_ratio >= 0.1 && t.exact_min_ratio >= 0.4,
        detail: format!("{} ordinary ACs; min |M_C|/Delta {:.4} (need 0.1); min exact maximum/Delta {:.4} (need 0.4)", t.ordinary_acs, t.matching_min_ratio, t.exact_min_ratio),
    }
}

fn c5() -> Line {
    let seeds: Vec<u64> = (0..200).collect();
    let res = par_map(&seeds, |&seed| {
        let eps = 1.0 / 12.0;
        let spec = GeneratorSpec::planted_acd(512, 4096, 4, vec![8], eps, seed);
        slack_sample(&spec, &RunConfig { eps, seed, ..Default::default() })
    });
    let mut worst: f64 = 0.0;
    let mut sum = 0.0;
    let (mut acs, mut without) = (0, 0);
    let mut errors = Vec::new();
    for r in &res {
        match r {
            Ok(s) => {
                let f = s.sparse_without as f64 / s.sparse.max(1) as f64;
                worst = worst.max(f);
                sum += f;
                acs += s.ordinary_acs;
                without += s.acs_without;
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let toehold = 1.0 - without as f64 / acs.max(1) as f64;
    Line {
        id: 5,
        name: "slack statistics",
        pass: errors.is_empty() && worst < 0.01 && toehold >= 0.99 && acs > 0,
        detail: format!(
            "planted_acd(512, 4096, 4 ACs, e=8), 200 seeds: sparse nodes without unit slack per run mean {:.4}, worst {worst:.4} (need < 0.01); toehold in {toehold:.4} of {acs} (AC, seed) pairs (need 0.99); {} errors{}",
            sum / res.len() as f64,
            errors.len(),
            first(&errors)
        ),
    }
}

fn c6(t: &Tally) -> Line {
    let rate = t.pair_wins as f64 / t.pair_tries.max(1) as f64;
    let lo = wilson_lower(t.pair_wins, t.pair_tries);
    Line {
        id: 6,
        name: "pair-coloring rate",
        pass: t.pair_seeds >= 50 && rate >= 0.5 && lo >= 0.48,
        detail: format!("{} seeds with H_P pairs, {}/{} pair-iterations colored = {rate:.4}, 95% lower bound {lo:.4} (need rate >= 0.5, bound >= 0.48)", t.pair_seeds, t.pair_wins, t.pair_tries),
    }
}

/// Two copies of K_{d+1} minus the edge (0, 1), cross-linked at 0 and 1:
/// d-regular with two hollow parts.
fn hollow_pair(d: u32) -> Graph {
    let k = d + 1;
    let mut edges = Vec::new();
    for b in [0, k] {
        for u in 0..k {
            for w in u + 1..k {
                if (u, w) != (0, 1) {
                    edges.push((b + u, b + w));
                }
            }
        }
    }
    edges.push((0, k + 1));
    edges.push((1, k));
    Graph::from_edges(2 * k as usize, &edges).unwrap()
}

fn c7(t: &Tally) -> Line {
    // Extra runs where finite levels exist (eps large enough for layered ACs).
    let seeds: Vec<u64> = (0..20).collect();
    let res = par_map(&seeds, |&seed| {
        let g = generate(&GeneratorSpec::difficult_chain(64, 3, 0.25, seed)).unwrap();
        let out = run(&g, &RunConfig { eps: 0.25, seed, ..Default::default() });
        (g, out)
    });
    // No criterion-1 family has a hollow AC; these do.
    let hollow = par_map(&seeds, |&seed| {
        let g = hollow_pair(16 + 4 * (seed as u32 % 8));
        let out = run(&g, &RunConfig { eps: 0.25, seed, ..Default::default() });
        (g, out)
    });
    let mut t2 = Tally { matching_min_ratio: f64::INFINITY, exact_min_ratio: f64::INFINITY, ..Default::default() };
    let mut errs = Vec::new();
    let labelled = res.iter().map(|r| ("difficult_chain(64, 3 layers)", r)).chain(hollow.iter().map(|r| ("hollow_pair", r)));
    for (label, (g, out)) in labelled {
        match out {
            Ok(o) => absorb(&mut t2, label, g, o),
            Err(e) => errs.push(format!("{label}: {e}")),
        }
    }
    let mut evals = t.check_evals.clone();
    for (k, v) in &t2.check_evals {
        *evals.entry(k.clone()).or_insert(0) += v;
    }
    let names = ["hp_max_degree", "hp_z_induced_degree", "type1_conflicts_minus_bound", "hollow_pair_common_neighbors", "hp_min_joint_list", "hp_min_list"];
    let cov: Vec<String> = names.iter().map(|n| format!("{n} x{}", evals.get(*n).copied().unwrap_or(0))).collect();
    let fails: Vec<String> = t.check_failures.iter().chain(&t2.check_failures).chain(&t.level_violations).chain(&t2.level_violations).chain(&t2.improper).cloned().chain(errs.iter().cloned()).collect();
    Line {
        id: 7,
        name: "structural asserts",
        pass: fails.is_empty() && t.errors.is_empty(),
        detail: format!("{} violations; level-order pairs checked {}; evaluations: {}{}", fails.len(), t.level_pairs + t2.level_pairs, cov.join(", "), first(&fails)),
    }
}

fn c8() -> Line {
    let qs = [4.0, 8.0, 16.0, 32.0, 64.0];
    let pts = par_map(&qs, |&q| l3_single_ac(512, q, 51, 100_000, 8));
    let gamma = fit_gamma(&pts);
    // Closed form for independent tails: (1 - p3 (1 - p3)^r)^m.
    let off: Vec<String> = pts
        .iter()
        .filter_map(|p| {
            let exact = (1.0 - p.p3 * (1.0 - p.p3).powi(p.competitors as i32)).powi(p.arcs as i32);
            let se = (exact * (1.0 - exact) / p.trials as f64).sqrt().max(1e-6);
            ((p.rate() - exact).abs() > 5.0 * se).then(|| format!("q={} measured {:.4} exact {exact:.4}", p.q, p.rate()))
        })
        .collect();
    let l3_ok = gamma > 0.0 && gamma.is_finite() && off.is_empty();

    let g = generate(&GeneratorSpec::random_regular(512, 2048, 8)).unwrap();
    let ep = e_prime_rates(&g, 32, 10_000, 8);
    let worst_v = ep.iter().map(|p| p.rate() / p.bound_alpha_v).fold(0.0, f64::max);
    let worst_q = ep.iter().map(|p| p.rate() / p.bound_q).fold(0.0, f64::max);
    let e_ok = worst_v <= 2.0 && worst_q <= 2.0;

    let seeds: Vec<u64> = (0..100).collect();
    let hp = par_map(&seeds, |&s| non_edge_hitting(s, 10_000));
    // Allow three standard errors of Monte Carlo noise above the bound.
    let over = hp.iter().filter(|h| h.rate() > h.bound + 3.0 * (h.bound * (1.0 - h.bound) / h.trials as f64).sqrt()).count();
    let rates: Vec<String> = pts.iter().map(|p| format!("{:.4}", p.rate())).collect();
    Line {
        id: 8,
        name: "LLL probability fits",
        pass: l3_ok && e_ok && over == 0,
        detail: format!(
            "L3 Pr(E_C) at q=4..64 [{}] (1e5 trials each), gamma {gamma:.4}, {} off the closed form; E'_v max ratio to exp(-alpha_v mu/5) {worst_v:.3}, to exp(-alpha_q mu/5) {worst_q:.3} (need <= 2); non-edge hitting: {over} of 100 pairs above the bound",
            rates.join(", "),
            off.len()
        ),
    }
}

fn c9(t: &Tally) -> Line {
    // Fresh multi-AC L3 instances, solved and re-checked with a rule written here.
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let mut lll_bad = Vec::new();
    let (mut solved, mut infeasible, mut misses) = (0, 0, 0);
    for inst_seed in 0..200u64 {
        let acs = r.gen_range(2..12usize);
        let tails = r.gen_range(4..40u32);
        let useful: Vec<Vec<(NodeId, NodeId)>> = (0..acs)
            .map(|k| {
                let mut z: Vec<NodeId> = (0..tails).collect();
                z.shuffle(&mut r);
                z.truncate(r.gen_range(2..=tails as usize));
                z.sort_unstable();
                z.into_iter().map(|t| (tails + k as NodeId, t)).collect()
            })
            .collect();
        let in_z1: Vec<bool> = (0..tails + acs as u32).map(|_| r.gen_bool(0.5)).collect();
        let l3 = build_l3(&useful, &in_z1, r.gen_range(0.1..0.6));
        match solve_resampling(&l3.inst, inst_seed, 10_000, false) {
            Ok((a, _)) => {
                solved += 1;
                for k in 0..acs {
                    let ok = l3.arc_of.iter().enumerate().any(|(x, &(kk, _, t))| {
                        kk == k && a[x] == 1 && l3.arc_of.iter().enumerate().all(|(y, &(ky, _, ty))| ty != t || ky == k || a[y] == 0)
                    });
                    if !ok {
                        lll_bad.push(format!("instance {inst_seed}: AC {k} without a successful arc"));
                    }
                }
            }
            Err(deltacolor::Error::IterationCapExceeded { .. }) => {
                // Solvable iff the ACs have distinct tails (Hall), so a cap-out
                // on a solvable instance is a miss, not a wrong answer.
                let edges: Vec<(usize, usize)> = l3.arc_of.iter().map(|&(k, _, t)| (k, t as usize)).collect();
                if max_bipartite_matching(acs, tails as usize, &edges).len() == acs {
                    misses += 1;
                } else {
                    infeasible += 1;
                }
            }
            Err(e) => lll_bad.push(format!("instance {inst_seed}: {e}")),
        }
    }
    // Fresh d1LC instances on half of a random regular graph, lists of size deg + 1.
    let mut d1_bad = Vec::new();
    for seed in 0..50u64 {
        let g = generate(&GeneratorSpec::random_regular(24, 300, seed)).unwrap();
        let mut rr = ChaCha8Rng::seed_from_u64(seed);
        let mut h: Vec<NodeId> = g.nodes().filter(|_| rr.gen_bool(0.5)).collect();
        h.sort_unstable();
        let inh: Vec<bool> = (0..g.n()).map(|v| h.binary_search(&(v as NodeId)).is_ok()).collect();
        let d = g.delta() as u32;
        let lists: Vec<ColorSet> = h
            .iter()
            .map(|&v| {
                let need = g.neighbors(v).iter().filter(|&&w| inh[w as usize]).count() + 1;
                let mut cs: Vec<u32> = (1..=d).collect();
                cs.shuffle(&mut rr);
                let mut s = ColorSet::empty(d);
                for &c in &cs[..need.min(d as usize)] {
                    s.insert(c);
                }
                s
            })
            .collect();
        let mut net = Network::new(&g, NetConfig { c_b: 4.0, strict: true, seed });
        let mut st = ColoringState::new(&g);
        match solve_d1lc(&mut net, &mut st, &h, Some(lists.clone())) {
            Ok(_) => {
                for (k, &v) in h.iter().enumerate() {
                    let c = st.colors[v as usize];
                    if c == 0 || !lists[k].contains(c) || g.neighbors(v).iter().any(|&w| st.colors[w as usize] == c) {
                        d1_bad.push(format!("seed {seed}: node {v} color {c}"));
                        break;
                    }
                }
            }
            Err(e) => d1_bad.push(format!("seed {seed}: {e}")),
        }
    }
    let bad: Vec<String> = lll_bad.iter().chain(&d1_bad).cloned().collect();
    Line {
        id: 9,
        name: "solver soundness",
        pass: bad.is_empty() && t.errors.is_empty(),
        detail: format!(
            "criterion-1 runs: {} LLL solves and {} d1LC instances, all re-verified in place; fresh L3: {solved} solved and re-checked here, {infeasible} infeasible and refused, {misses} solvable but capped; 50 fresh d1LC instances re-checked; {} wrong outputs{}",
            t.lll_solves,
            t.d1lc_instances,
            bad.len(),
            first(&bad)
        ),
    }
}

fn c10(t: &Tally) -> Line {
    Line {
        id: 10,
        name: "bandwidth",
        pass: t.budget_violations.is_empty() && t.errors.is_empty(),
        detail: format!("{} strict-budget runs, max bits per edge per round {} ; {} over 4*ceil(log2 n){}", t.runs, t.max_bits_seen, t.budget_violations.len(), first(&t.budget_violations)),
    }
}

fn c11() -> Line {
    let mut diffs = Vec::new();
    let mut pairs = 0;
    for fam in FAMILIES {
        for seed in 0..2 {
            let (spec, eps) = fam.instance(seed);
            let g = generate(&spec).unwrap();
            let cfg = RunConfig { eps, seed, ..Default::default() };
            let a = build_report(&g, &cfg, &run(&g, &cfg).unwrap()).to_json();
            let b = build_report(&g, &cfg, &run(&g, &cfg).unwrap()).to_json();
            pairs += 1;
            if a != b {
                diffs.push(format!("{} seed {seed}", fam.name()));
            }
        }
    }
    Line { id: 11, name: "determinism", pass: diffs.is_empty(), detail: format!("{pairs} report pairs compared, {} differ{}", diffs.len(), first(&diffs)) }
}

fn main() -> ExitCode {
    if seeds() < 100 {
        println!("reduced run: {} seeds per criterion-1 family (spec tolerance needs 100)", seeds());
    }
    let (tally, wall) = criterion1_runs();
    let lines = vec![c1(&tally, wall), c2(&tally), c3(), c4(&tally), c5(), c6(&tally), c7(&tally), c8(), c9(&tally), c10(&tally), c11()];
    let mut unexpected = Vec::new();
    for l in &lines {
        let known = KNOWN_UNATTAINABLE.contains(&l.id);
        let tag = match (l.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as unattainable; update the ledger)",
            (false, true) => "FAIL (known, see ledger)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2} {}: {tag}: {}", l.id, l.name, l.detail);
        if !l.pass && !known {
            unexpected.push(l.id);
        }
    }
    if seeds() < 100 {
        println!("acceptance: reduced run, verdicts are not at spec tolerance");
    }
    if unexpected.is_empty() {
        println!("acceptance: every criterion passes except the known-unattainable {KNOWN_UNATTAINABLE:?}");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
