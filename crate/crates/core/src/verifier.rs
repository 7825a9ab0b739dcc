//! Exhaustive verification of stable computation on finite populations.
//!
//! A configuration graph is explored breadth-first, condensed into strongly
//! connected components, and labelled: a node is stable with output `b` iff
//! every node reachable from it (itself included) has defined output `b`.
//! For a finite graph, "every fair execution converges to `b`" is equivalent
//! to: some stable-`b` node is reachable, no stable-`(1-b)` node is, and
//! every reachable node can still reach a stable node.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::library::SetUnion;
use crate::model::{Model, ModelError, Output, ProtocolSpec, RuleSet};
use crate::multiset::{multisets_of_size, Multiset};
use crate::semilinear::{PredicateExpr, Profile};

/// Bound on messages in transit during exploration. Moves that would exceed
/// it are not explored; results obtained under a cap say so.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitCap {
    None,
    /// At most this many copies of each message.
    PerMessage(u64),
    /// At most this many messages in total.
    Total(u64),
    /// At most as many messages in total as there are agents.
    Population,
}

impl TransitCap {
    fn admits(self, r: &RuleSet, c: &Multiset) -> bool {
        let messages = || c.entries().iter().filter(|(e, _)| r.is_message(*e));
        match self {
            TransitCap::None => true,
            TransitCap::PerMessage(k) => messages().all(|&(_, n)| n <= k),
            TransitCap::Total(k) => messages().map(|&(_, n)| n).sum::<u64>() <= k,
            TransitCap::Population => messages().map(|&(_, n)| n).sum::<u64>() <= r.agents(c),
        }
    }
}

impl fmt::Display for TransitCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitCap::None => f.write_str("none"),
            TransitCap::PerMessage(k) => write!(f, "{k} per message"),
            TransitCap::Total(k) => write!(f, "{k} in total"),
            TransitCap::Population => f.write_str("population size"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    pub node_budget: usize,
    pub transit_cap: TransitCap,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { node_budget: 1_000_000, transit_cap: TransitCap::None }
    }
}

impl ExploreOptions {
    pub fn with_cap(transit_cap: TransitCap) -> Self {
        ExploreOptions { transit_cap, ..Default::default() }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("node budget of {budget} exceeded with {frontier} configurations still unexpanded")]
    BudgetExceeded { budget: usize, frontier: usize, partial: Box<ReachabilityGraph> },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reachable configurations with successor edges labelled by rule index.
#[derive(Clone, Debug)]
pub struct ReachabilityGraph {
    nodes: IndexSet<Multiset>,
    edges: Vec<Vec<(usize, usize)>>,
    parent: Vec<Option<(usize, usize)>>,
    roots: usize,
    cap_hit: bool,
}

impl ReachabilityGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &Multiset {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Multiset> {
        self.nodes.iter()
    }

    pub fn index_of(&self, c: &Multiset) -> Option<usize> {
        self.nodes.get_index_of(c)
    }

    /// `(rule, target)` pairs out of node `i`, one per distinct target.
    pub fn edges(&self, i: usize) -> &[(usize, usize)] {
        &self.edges[i]
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[i].iter().map(|&(_, t)| t)
    }

    /// Number of roots; roots occupy indices `0..roots`.
    pub fn roots(&self) -> usize {
        self.roots
    }

    /// True if some move was skipped because of the transit cap.
    pub fn cap_hit(&self) -> bool {
        self.cap_hit
    }

    /// Configurations from the root of `i`'s BFS tree down to `i`.
    pub fn path_to(&self, i: usize) -> Vec<Multiset> {
        let mut path = vec![self.nodes[i].clone()];
        let mut cur = i;
        while let Some((p, _)) = self.parent[cur] {
            path.push(self.nodes[p].clone());
            cur = p;
        }
        path.reverse();
        path
    }
}

/// Explores everything reachable from `c0`.
pub fn explore(r: &RuleSet, c0: &Multiset, opts: ExploreOptions) -> Result<ReachabilityGraph, VerifyError> {
    explore_from(r, std::slice::from_ref(c0), opts)
}

/// Explores everything reachable from any of `roots`.
pub fn explore_from(r: &RuleSet, roots: &[Multiset], opts: ExploreOptions) -> Result<ReachabilityGraph, VerifyError> {
    let mut g = ReachabilityGraph {
        nodes: IndexSet::new(),
        edges: Vec::new(),
        parent: Vec::new(),
        roots: 0,
        cap_hit: false,
    };
    for c in roots {
        if g.nodes.insert(c.clone()) {
            g.parent.push(None);
        }
    }
    g.roots = g.nodes.len();
    let conserves_agents = r.kind.model != Model::Abstract;
    let mut next = 0;
    while next < g.nodes.len() {
        let c = g.nodes[next].clone();
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (rule, d) in r.enabled(&c) {
            if !opts.transit_cap.admits(r, &d) {
                g.cap_hit = true;
                continue;
            }
            debug_assert!(!conserves_agents || r.agents(&d) == r.agents(&c), "agent count changed");
            let (j, fresh) = g.nodes.insert_full(d);
            if fresh {
                g.parent.push(Some((next, rule)));
                if g.nodes.len() > opts.node_budget {
                    g.edges.push(out);
                    let frontier = g.nodes.len() - g.edges.len();
                    return Err(VerifyError::BudgetExceeded {
                        budget: opts.node_budget,
                        frontier,
                        partial: Box::new(g),
                    });
                }
            }
            if !out.iter().any(|&(_, t)| t == j) {
                out.push((rule, j));
            }
        }
        g.edges.push(out);
        next += 1;
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable(bool),
    Unstable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stability::Stable(b) => write!(f, "stable{}", *b as u8),
            Stability::Unstable => f.write_str("unstable"),
        }
    }
}

const OUT0: u8 = 1;
const OUT1: u8 = 2;
const UNDEF: u8 = 4;

fn out_bit(o: Output) -> u8 {
    match o {
        Output::Defined(false) => OUT0,
        Output::Defined(true) => OUT1,
        Output::Undefined => UNDEF,
    }
}

/// Stability labels plus, per node, which stable outputs it can reach.
#[derive(Clone, Debug)]
pub struct Labelling {
    pub labels: Vec<Stability>,
    /// Bit 0: can reach a stable-0 node; bit 1: a stable-1 node.
    pub reach: Vec<u8>,
}

/// Strongly connected components, numbered so that every edge goes to a
/// component with an equal or smaller number.
fn tarjan(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut next_index = 0;
    let mut ncomp = 0;
    let mut calls: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for s in 0..n {
        if index[s] != UNSEEN {
            continue;
        }
        index[s] = next_index;
        low[s] = next_index;
        next_index += 1;
        stack.push(s);
        on_stack[s] = true;
        calls.push((s, succ(s), 0));
        while let Some(top) = calls.last_mut() {
            let v = top.0;
            if top.2 < top.1.len() {
                let w = top.1[top.2];
                top.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, succ(w), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                calls.pop();
                if let Some(parent) = calls.last() {
                    low[parent.0] = low[parent.0].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// Labels every node of a complete graph.
pub fn label_stability(g: &ReachabilityGraph, r: &RuleSet) -> Labelling {
    let n = g.len();
    let comp = tarjan(n, |v| g.successors(v).collect());
    let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut seen = vec![0u8; ncomp];
    let mut reach = vec![0u8; ncomp];
    for c in 0..ncomp {
        let mut s = 0;
        let mut re = 0;
        for &v in &members[c] {
            s |= out_bit(r.output_of(g.node(v)));
            for w in g.successors(v) {
                let d = comp[w];
                if d != c {
                    s |= seen[d];
                    re |= reach[d];
                }
            }
        }
        seen[c] = s;
        if s == OUT0 || s == OUT1 {
            re |= s;
        }
        reach[c] = re;
    }
    let labels = (0..n)
        .map(|v| match seen[comp[v]] {
            OUT0 => Stability::Stable(false),
            OUT1 => Stability::Stable(true),
            _ => Stability::Unstable,
        })
        .collect();
    Labelling { labels, reach: (0..n).map(|v| reach[comp[v]]).collect() }
}

/// A reachable configuration and a path to it from the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub config: Multiset,
    pub path: Vec<Multiset>,
}

impl Witness {
    fn at(g: &ReachabilityGraph, i: usize) -> Self {
        Witness { config: g.node(i).clone(), path: g.path_to(i) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    StablyComputes(bool),
    /// Stable configurations with both outputs are reachable.
    NotWellSpecified { zero: Witness, one: Witness },
    /// The witness cannot reach any stable configuration.
    Diverges(Witness),
}

impl Verdict {
    pub fn value(&self) -> Option<bool> {
        match self {
            Verdict::StablyComputes(b) => Some(*b),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::StablyComputes(_) => None,
            Verdict::NotWellSpecified { one, .. } => Some(one),
            Verdict::Diverges(w) => Some(w),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::StablyComputes(b) => write!(f, "stably computes {}", *b as u8),
            Verdict::NotWellSpecified { .. } => f.write_str("not well specified"),
            Verdict::Diverges(_) => f.write_str("diverges"),
        }
    }
}

/// Verdict plus exploration facts.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub verdict: Verdict,
    pub nodes: usize,
    pub cap_hit: bool,
}

/// Decides the verdict on an already explored and labelled graph rooted at 0.
pub fn verdict_of(g: &ReachabilityGraph, l: &Labelling) -> Verdict {
    let first = |want: Stability| l.labels.iter().position(|&s| s == want);
    let zero = first(Stability::Stable(false));
    let one = first(Stability::Stable(true));
    if let (Some(z), Some(o)) = (zero, one) {
        return Verdict::NotWellSpecified { zero: Witness::at(g, z), one: Witness::at(g, o) };
    }
    if let Some(stuck) = l.reach.iter().position(|&m| m == 0) {
        return Verdict::Diverges(Witness::at(g, stuck));
    }
    Verdict::StablyComputes(one.is_some())
}

/// Verdict for the rule set from configuration `c0`.
pub fn analyze(r: &RuleSet, c0: &Multiset, opts: ExploreOptions) -> Result<Analysis, VerifyError> {
    let g = explore(r, c0, opts)?;
    let l = label_stability(&g, r);
    Ok(Analysis { verdict: verdict_of(&g, &l), nodes: g.len(), cap_hit: g.cap_hit() })
}

/// Verdict of protocol `p` on input `x` (a multiset over `p.inputs`).
pub fn verdict(p: &ProtocolSpec, x: &Multiset, opts: ExploreOptions) -> Result<Verdict, VerifyError> {
    let r = p.compile()?;
    let c0 = r.initial_config(x)?;
    Ok(analyze(&r, &c0, opts)?.verdict)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Match,
    Mismatch,
    BudgetExceeded,
    SkippedPromise,
}

#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub input: Profile,
    pub expected: bool,
    pub verdict: Option<Verdict>,
    pub outcome: Outcome,
    pub nodes: usize,
    pub cap_hit: bool,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub min_n: u64,
    pub max_n: u64,
    pub explore: ExploreOptions,
    /// Inputs failing the promise are recorded as skipped.
    pub promise: Option<PredicateExpr>,
}

impl SweepOptions {
    pub fn up_to(max_n: u64) -> Self {
        SweepOptions { min_n: 1, max_n, explore: ExploreOptions::default(), promise: None }
    }

    pub fn sizes(mut self, min_n: u64, max_n: u64) -> Self {
        self.min_n = min_n.max(1);
        self.max_n = max_n;
        self
    }

    pub fn transit_cap(mut self, cap: TransitCap) -> Self {
        self.explore.transit_cap = cap;
        self
    }

    pub fn promise(mut self, promise: PredicateExpr) -> Self {
        self.promise = Some(promise);
        self
    }
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub records: Vec<SweepRecord>,
    pub transit_cap: TransitCap,
    pub names: Vec<String>,
}

impl VerificationReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.outcome == Outcome::Mismatch)
    }

    pub fn first_mismatch(&self) -> Option<&SweepRecord> {
        self.mismatches().next()
    }

    pub fn budget_exceeded(&self) -> usize {
        self.records.iter().filter(|r| r.outcome == Outcome::BudgetExceeded).count()
    }

    pub fn checked(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r.outcome, Outcome::Match | Outcome::Mismatch))
            .count()
    }

    /// No mismatches and no exhausted budgets.
    pub fn is_clean(&self) -> bool {
        self.records.iter().all(|r| matches!(r.outcome, Outcome::Match | Outcome::SkippedPromise))
    }

    fn any_cap_hit(&self) -> bool {
        self.records.iter().any(|r| r.cap_hit)
    }

    fn path_text(&self, w: &Witness) -> Vec<String> {
        w.path.iter().map(|c| c.display_with(&self.names).to_string()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let verdict = r.verdict.as_ref().map_or_else(|| "-".to_string(), |v| v.to_string());
            let tag = match r.outcome {
                Outcome::Match => "ok",
                Outcome::Mismatch => "MISMATCH",
                Outcome::BudgetExceeded => "budget exceeded",
                Outcome::SkippedPromise => "skipped (promise)",
            };
            s += &format!("{}  expected {}  {}  [{}]\n", r.input, r.expected as u8, verdict, tag);
            if r.outcome == Outcome::Mismatch {
                if let Some(w) = r.verdict.as_ref().and_then(Verdict::witness) {
                    s += &format!("    witness path: {}\n", self.path_text(w).join(" -> "));
                }
            }
        }
        let mismatches = self.mismatches().count();
        s += &format!(
            "{} inputs checked, {} mismatches, {} over budget, {} skipped\n",
            self.checked(),
            mismatches,
            self.budget_exceeded(),
            self.records.iter().filter(|r| r.outcome == Outcome::SkippedPromise).count()
        );
        if self.transit_cap != TransitCap::None {
            let note = if self.any_cap_hit() { "" } else { " (cap never reached)" };
            s += &format!("verified under transit cap {}{note}\n", self.transit_cap);
        }
        s
    }

    /// One JSON object per input.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let mut v = json!({
                "input": r.input.to_string(),
                "expected": r.expected as u8,
                "verdict": r.verdict.as_ref().map(|v| v.to_string()),
                "outcome": format!("{:?}", r.outcome),
                "nodes": r.nodes,
                "transit_cap": self.transit_cap.to_string(),
                "cap_hit": r.cap_hit,
            });
            if r.outcome == Outcome::Mismatch {
                if let Some(w) = r.verdict.as_ref().and_then(Verdict::witness) {
                    v["witness"] = json!(self.path_text(w));
                }
            }
            s += &v.to_string();
            s.push('\n');
        }
        s
    }
}

/// All nonempty inputs over `p.inputs` with size in range, ordered by size
/// and then lexicographically by count vector.
pub fn enumerate_inputs(symbols: usize, min_n: u64, max_n: u64) -> Vec<Multiset> {
    (min_n.max(1)..=max_n).flat_map(|n| multisets_of_size(symbols, n)).collect()
}

/// Compares the verdict of `p` with `psi` on every input in range.
pub fn sweep(p: &ProtocolSpec, psi: &PredicateExpr, opts: &SweepOptions) -> Result<VerificationReport, VerifyError> {
    let r = p.compile()?;
    let inputs = enumerate_inputs(p.inputs.len(), opts.min_n, opts.max_n);
    let records = inputs
        .par_iter()
        .map(|x| {
            let input = Profile::from_multiset(x, &p.inputs);
            let expected = psi.eval(&input);
            let mut rec = SweepRecord {
                input,
                expected,
                verdict: None,
                outcome: Outcome::SkippedPromise,
                nodes: 0,
                cap_hit: false,
            };
            if opts.promise.as_ref().is_some_and(|pr| !pr.eval(&rec.input)) {
                return rec;
            }
            let c0 = r.initial_config(x).expect("inputs are nonempty");
            match analyze(&r, &c0, opts.explore) {
                Ok(a) => {
                    rec.outcome =
                        if a.verdict == Verdict::StablyComputes(expected) { Outcome::Match } else { Outcome::Mismatch };
                    rec.nodes = a.nodes;
                    rec.cap_hit = a.cap_hit;
                    rec.verdict = Some(a.verdict);
                }
                Err(_) => rec.outcome = Outcome::BudgetExceeded,
            }
            rec
        })
        .collect();
    Ok(VerificationReport { records, transit_cap: opts.explore.transit_cap, names: r.names.clone() })
}

/// Result of the minimal-unstable analysis.
#[derive(Clone, Debug)]
pub struct MinimalUnstable {
    /// ≤-minimal unstable configurations, sorted.
    pub minimal: Vec<Multiset>,
    /// Largest multiplicity in any minimal element (at least 1).
    pub k: u64,
    /// Stability of every enumerated configuration.
    pub labels: HashMap<Multiset, Stability>,
}

impl MinimalUnstable {
    pub fn is_unstable(&self, c: &Multiset) -> Option<bool> {
        self.labels.get(c).map(|s| *s == Stability::Unstable)
    }
}

/// Labels every configuration with 1 to `size_bound` elements and returns
/// the minimal unstable ones. Message-bearing configurations need at least
/// one agent.
pub fn minimal_unstable(r: &RuleSet, size_bound: u64, opts: ExploreOptions) -> Result<MinimalUnstable, VerifyError> {
    let roots: Vec<Multiset> = (1..=size_bound)
        .flat_map(|n| multisets_of_size(r.element_count(), n))
        .filter(|c| r.agents(c) > 0)
        .collect();
    let g = explore_from(r, &roots, opts)?;
    let l = label_stability(&g, r);
    let labels: HashMap<Multiset, Stability> =
        roots.iter().map(|c| (c.clone(), l.labels[g.index_of(c).expect("root explored")])).collect();
    let unstable: HashSet<&Multiset> =
        labels.iter().filter(|(_, s)| **s == Stability::Unstable).map(|(c, _)| c).collect();
    let mut minimal: Vec<Multiset> = unstable
        .iter()
        .filter(|c| !unstable.iter().any(|d| d != *c && d.leq(c)))
        .map(|c| (*c).clone())
        .collect();
    minimal.sort();
    let k = minimal.iter().map(Multiset::max_multiplicity).max().unwrap_or(1).max(1);
    Ok(MinimalUnstable { minimal, k, labels })
}

/// A sampled execution.
#[derive(Clone, Debug)]
pub struct Trace {
    pub start: Multiset,
    /// `(rule, configuration after firing)` per step.
    pub steps: Vec<(usize, Multiset)>,
    /// The final configuration is output stable.
    pub converged: bool,
    pub output: Output,
    pub step_limit_hit: bool,
}

impl Trace {
    pub fn configs(&self) -> impl Iterator<Item = &Multiset> {
        std::iter::once(&self.start).chain(self.steps.iter().map(|(_, c)| c))
    }

    pub fn last(&self) -> &Multiset {
        self.steps.last().map_or(&self.start, |(_, c)| c)
    }
}

/// Random scheduler: at each step fires a uniformly chosen enabled rule,
/// stopping once the configuration is output stable.
pub fn fair_run(
    r: &RuleSet,
    c0: &Multiset,
    seed: u64,
    max_steps: usize,
    opts: ExploreOptions,
) -> Result<Trace, VerifyError> {
    let g = explore(r, c0, opts)?;
    let l = label_stability(&g, r);
    Ok(walk(&g, &l, r, seed, max_steps))
}

/// [`fair_run`] on a graph that is already explored and labelled.
pub fn walk(g: &ReachabilityGraph, l: &Labelling, r: &RuleSet, seed: u64, max_steps: usize) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = 0;
    let mut steps = Vec::new();
    let mut moves: Vec<(usize, usize)> = Vec::new();
    while !matches!(l.labels[cur], Stability::Stable(_)) && steps.len() < max_steps {
        // Uniform over enabled rules, not over distinct targets.
        moves.clear();
        let c = g.node(cur);
        for (rule, d) in r.enabled(c) {
            if let Some(j) = g.index_of(&d) {
                moves.push((rule, j));
            }
        }
        let Some(&(rule, next)) = moves.choose(&mut rng) else { break };
        steps.push((rule, g.node(next).clone()));
        cur = next;
    }
    let converged = matches!(l.labels[cur], Stability::Stable(_));
    Trace {
        start: g.node(0).clone(),
        output: r.output_of(g.node(cur)),
        converged,
        step_limit_hit: !converged && steps.len() >= max_steps,
        steps,
    }
}

/// Outcome of a locally fair set-union run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalFairRun {
    /// Final state set of each agent, as a bitmask over the alphabet.
    pub states: Vec<u64>,
    /// Full-delivery rounds executed before the fixpoint was observed.
    pub rounds: usize,
    pub converged: bool,
    pub output: Option<bool>,
}

/// Runs the set-union protocol under a locally fair scheduler: each round,
/// every agent sends its current set and every distinct value in transit
/// is delivered to every agent, in a seeded random order.
pub fn local_fair_run(p: &SetUnion, x: &Profile, seed: u64, max_rounds: usize) -> LocalFairRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents: Vec<u64> = Vec::new();
    for (i, s) in p.symbols.iter().enumerate() {
        agents.extend(std::iter::repeat(1u64 << i).take(x.get(s) as usize));
    }
    let mut rounds = 0;
    let mut converged = false;
    while rounds < max_rounds {
        let mut in_transit: Vec<u64> = agents.clone();
        in_transit.sort_unstable();
        in_transit.dedup();
        let mut changed = false;
        let mut order: Vec<(usize, u64)> =
            (0..agents.len()).flat_map(|a| in_transit.iter().map(move |&m| (a, m))).collect();
        order.shuffle(&mut rng);
        // Occasionally deliver a value twice; receiving is idempotent.
        if !order.is_empty() && rng.gen_bool(0.5) {
            let dup = order[rng.gen_range(0..order.len())];
            order.push(dup);
        }
        for (a, m) in order {
            let next = p.receive(agents[a], m);
            assert_eq!(next & agents[a], agents[a], "an agent lost a value");
            changed |= next != agents[a];
            agents[a] = next;
        }
        if !changed {
            converged = agents.windows(2).all(|w| w[0] == w[1]);
            break;
        }
        rounds += 1;
    }
    let output = agents.first().map(|&s| p.output(s)).filter(|&b| agents.iter().all(|&s| p.output(s) == b));
    LocalFairRun { states: agents, rounds, converged, output }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{build_modulo, build_simple_threshold, ModuloParams};
    use crate::model::{JointTable, ModelKind, Transitions};

    fn tower(k: usize) -> ProtocolSpec {
        build_simple_threshold("a", k, &["a".to_string()]).unwrap()
    }

    fn parity() -> ProtocolSpec {
        build_modulo(&ModuloParams::new([("a", 1)], 1, 2).unwrap()).unwrap()
    }

    fn input(p: &ProtocolSpec, text: &str) -> Multiset {
        p.parse_input(text).unwrap()
    }

    #[test]
    fn tower_graph_and_labels() {
        let p = tower(2);
        let r = p.compile().unwrap();
        let c0 = r.initial_config(&input(&p, "{a:2}")).unwrap();
        let g = explore(&r, &c0, ExploreOptions::default()).unwrap();
        let shown: Vec<String> = g.nodes().map(|c| r.display(c)).collect();
        assert_eq!(shown, ["{1:2}", "{1:1, 2:1}", "{2:2}"]);
        let l = label_stability(&g, &r);
        assert_eq!(l.labels, [Stability::Unstable, Stability::Unstable, Stability::Stable(true)]);
    }

    #[test]
    fn no_rules_means_single_node() {
        let p = ProtocolSpec {
            kind: ModelKind::new(Model::TwoWay),
            states: vec!["q".into()],
            messages: vec![],
            inputs: vec!["a".into()],
            transitions: Transitions::Joint(JointTable::identity(1)),
            iota: vec![0],
            output: vec![false],
            message_output: vec![],
        };
        let r = p.compile().unwrap();
        let c0 = r.initial_config(&input(&p, "{a:3}")).unwrap();
        let g = explore(&r, &c0, ExploreOptions::default()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(verdict(&p, &input(&p, "{a:3}"), ExploreOptions::default()).unwrap(), Verdict::StablyComputes(false));
        let m = minimal_unstable(&r, 3, ExploreOptions::default()).unwrap();
        assert!(m.minimal.is_empty());
    }

    #[test]
    fn budget_exceeded() {
        let p = tower(2);
        let opts = ExploreOptions { node_budget: 1, ..Default::default() };
        let err = verdict(&p, &input(&p, "{a:2}"), opts).unwrap_err();
        assert!(matches!(err, VerifyError::BudgetExceeded { budget: 1, .. }));
    }

    #[test]
    fn verdict_examples() {
        let opts = ExploreOptions::default();
        let p = parity();
        assert_eq!(verdict(&p, &input(&p, "{a:3}"), opts).unwrap(), Verdict::StablyComputes(true));
        assert_eq!(verdict(&p, &input(&p, "{a:4}"), opts).unwrap(), Verdict::StablyComputes(false));
        let t = tower(2);
        assert_eq!(verdict(&t, &input(&t, "{a:1}"), opts).unwrap(), Verdict::StablyComputes(false));
    }

    #[test]
    fn two_stable_outcomes_are_not_well_specified() {
        // q0 q0 -> x0 x0 or (via q0 alone with mirrors) -> x1; x0/x1 absorb.
        let mut t = JointTable::identity(3);
        t.set(0, 0, (1, 1));
        t.set(0, 1, (1, 1));
        t.set(1, 0, (1, 1));
        let p = ProtocolSpec {
            kind: ModelKind::new(Model::Abstract),
            states: vec!["q0".into(), "x0".into(), "x1".into()],
            messages: vec![],
            inputs: vec!["a".into()],
            transitions: Transitions::Rules(vec![
                crate::model::RawRule { lhs: vec![0, 0], rhs: vec![1, 1] },
                crate::model::RawRule { lhs: vec![0, 0], rhs: vec![2, 2] },
            ]),
            iota: vec![0],
            output: vec![false, false, true],
            message_output: vec![],
        };
        let v = verdict(&p, &input(&p, "{a:2}"), ExploreOptions::default()).unwrap();
        let Verdict::NotWellSpecified { zero, one } = v else { panic!("{v:?}") };
        assert_eq!(zero.path.len(), 2);
        assert_eq!(one.path.len(), 2);
    }

    #[test]
    fn divergence_detected() {
        // Two agents swap forever between outputs.
        let mut t = JointTable::identity(2);
        t.set(0, 0, (1, 1));
        t.set(1, 1, (0, 0));
        let p = ProtocolSpec {
            kind: ModelKind::new(Model::TwoWay),
            states: vec!["u".into(), "v".into()],
            messages: vec![],
            inputs: vec!["a".into()],
            transitions: Transitions::Joint(t),
            iota: vec![0],
            output: vec![false, true],
            message_output: vec![],
        };
        let v = verdict(&p, &input(&p, "{a:2}"), ExploreOptions::default()).unwrap();
        assert!(matches!(v, Verdict::Diverges(_)));
    }

    #[test]
    fn sweep_finds_wrong_predicate() {
        let t = tower(2);
        let wrong = PredicateExpr::at_least("a", 3);
        let rep = sweep(&t, &wrong, &SweepOptions::up_to(3)).unwrap();
        let first = rep.first_mismatch().unwrap();
        assert_eq!(first.input, Profile::from_pairs([("a", 2)]));
        assert!(rep.to_text().contains("MISMATCH"));
        assert_eq!(rep.to_json_lines().lines().count(), 3);
        let right = PredicateExpr::at_least("a", 2);
        assert!(sweep(&t, &right, &SweepOptions::up_to(4)).unwrap().is_clean());
    }

    #[test]
    fn sweep_respects_promise() {
        let t = tower(2);
        let promise = PredicateExpr::at_least("a", 2);
        let rep = sweep(&t, &PredicateExpr::at_least("a", 2), &SweepOptions::up_to(3).promise(promise)).unwrap();
        assert_eq!(rep.records[0].outcome, Outcome::SkippedPromise);
        assert_eq!(rep.checked(), 2);
    }

    #[test]
    fn minimal_unstable_for_unary_tower() {
        // Tower k=1 over one symbol, ι(a)=1: state 0 is never produced from
        // inputs but the enumeration covers every configuration.
        let p = tower(1);
        let r = p.compile().unwrap();
        let m = minimal_unstable(&r, 3, ExploreOptions::default()).unwrap();
        let shown: Vec<String> = m.minimal.iter().map(|c| r.display(c)).collect();
        // {0,1} has undefined output; {0}, {1} and {0:k} are all stable.
        assert_eq!(shown, ["{0:1, 1:1}"]);
        assert_eq!(m.k, 1);
    }

    #[test]
    fn upward_closure_within_bound() {
        let r = tower(2).compile().unwrap();
        let m = minimal_unstable(&r, 4, ExploreOptions::default()).unwrap();
        for (c, s) in &m.labels {
            let above_minimal = m.minimal.iter().any(|u| u.leq(c));
            assert_eq!(*s == Stability::Unstable, above_minimal, "{}", r.display(c));
        }
    }

    #[test]
    fn fair_run_converges_on_parity() {
        let p = parity();
        let r = p.compile().unwrap();
        let c0 = r.initial_config(&input(&p, "{a:3}")).unwrap();
        for seed in 0..20 {
            let t = fair_run(&r, &c0, seed, 10_000, ExploreOptions::default()).unwrap();
            assert!(t.converged);
            assert_eq!(t.output, Output::Defined(true));
            for w in t.configs().collect::<Vec<_>>().windows(2) {
                assert!(r.successors(w[0]).contains(w[1]));
            }
        }
    }

    #[test]
    fn fair_run_single_agent_is_immediate() {
        let p = tower(2);
        let r = p.compile().unwrap();
        let c0 = r.initial_config(&input(&p, "{a:1}")).unwrap();
        let t = fair_run(&r, &c0, 7, 100, ExploreOptions::default()).unwrap();
        assert!(t.steps.is_empty());
        assert!(t.converged);
    }

    #[test]
    fn tarjan_orders_components() {
        // 0 -> 1 <-> 2 -> 3
        let succ = [vec![1], vec![2], vec![1, 3], vec![]];
        let comp = tarjan(4, |v| succ[v].clone());
        assert_eq!(comp[1], comp[2]);
        assert!(comp[3] < comp[1]);
        assert!(comp[1] < comp[0]);
    }
}
