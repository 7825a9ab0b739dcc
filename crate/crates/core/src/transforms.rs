//! Model-to-model compilers: one-way protocols to their delayed variants,
//! two-way protocols to queued transmission (optionally token metered so no
//! receive is ever refused), adding and removing mirrors for immediate
//! observation, and the embedding into the abstract model.

use std::collections::HashMap;

use indexmap::IndexSet;
use thiserror::Error;

use crate::model::{
    validate_as, validate_model, JointTable, MessageTables, Model, ModelKind, ProtocolSpec, RawRule, Transitions,
    Violation,
};
use crate::multiset::{Element, Multiset};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("source protocol is not valid for this transform: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),
    #[error("symbol `{0}` is not in the input alphabet")]
    UnknownSymbol(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn require(p: &ProtocolSpec, kind: ModelKind) -> Result<&JointTable, TransformError> {
    validate_as(p, kind).map_err(TransformError::InvalidModel)?;
    match &p.transitions {
        Transitions::Joint(t) => Ok(t),
        _ => unreachable!("validated interaction protocol"),
    }
}

fn require_mirrors(p: &ProtocolSpec, mirrors: bool) -> Result<&JointTable, TransformError> {
    if p.kind.mirrors != mirrors {
        let want = if mirrors { "with" } else { "without" };
        return Err(TransformError::InvalidParameter(format!("expected a protocol {want} mirrors")));
    }
    require(p, ModelKind::with_mirrors(Model::ImmediateObservation, mirrors))
}

fn checked(p: ProtocolSpec) -> Result<ProtocolSpec, TransformError> {
    validate_model(&p).map_err(TransformError::InvalidModel)?;
    Ok(p)
}

/// How a target protocol's elements stand for source states.
#[derive(Clone, Debug)]
pub struct SimulationCertificate {
    pub source: ProtocolSpec,
    pub target: ProtocolSpec,
    /// Source states carried by each target element (states, then messages).
    pub projection: Vec<Vec<usize>>,
    /// Tokens carried by each target element, for metered simulations.
    pub tokens: Option<Vec<u64>>,
}

impl SimulationCertificate {
    /// Source configuration obtained by releasing every carried state.
    pub fn project(&self, c: &Multiset) -> Multiset {
        Multiset::from_counts(c.entries().iter().flat_map(|&(e, n)| {
            self.projection[e.index()].iter().map(move |&q| (Element(q as u32), n))
        }))
    }

    pub fn tokens_in(&self, c: &Multiset) -> Option<u64> {
        let t = self.tokens.as_ref()?;
        Some(c.entries().iter().map(|&(e, n)| t[e.index()] * n).sum())
    }
}

/// Delayed variant of an immediate transmission (or observation) protocol:
/// a sender emits `m<q>` and moves to `delta_1(q)`; a receiver in `p` of
/// `m<q>` moves to `delta_2(q, p)`.
pub fn immediate_to_delayed(p: &ProtocolSpec) -> Result<ProtocolSpec, TransformError> {
    let t = require(p, ModelKind::new(Model::ImmediateTransmission))?;
    let observation = validate_as(p, ModelKind::new(Model::ImmediateObservation)).is_ok();
    let n = p.states.len();
    let mut mt = MessageTables::empty(n, n);
    for q in 0..n {
        mt.set_send(q, q, t.get(q, 0).0);
        for r in 0..n {
            mt.set_receive(r, q, t.get(q, r).1);
        }
    }
    let model = if observation { Model::DelayedObservation } else { Model::DelayedTransmission };
    checked(ProtocolSpec {
        kind: ModelKind::new(model),
        states: p.states.clone(),
        messages: p.states.iter().map(|q| format!("m<{q}>")).collect(),
        inputs: p.inputs.clone(),
        transitions: Transitions::Messages(mt),
        iota: p.iota.clone(),
        output: p.output.clone(),
        message_output: vec![],
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Holder {
    /// Holds nothing; remembers the output of the last state it released.
    Empty(bool),
    /// Held states, oldest first.
    Held(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Carried {
    State(usize),
    Null,
}

/// Closure of agent states and messages under the given local rules.
struct Closure<S> {
    states: IndexSet<S>,
    messages: IndexSet<Carried>,
    sends: HashMap<usize, (usize, usize)>,
    receives: HashMap<(usize, usize), usize>,
}

fn close<S: Clone + Eq + std::hash::Hash>(
    initial: Vec<S>,
    send: impl Fn(&S) -> (Carried, S),
    receive: impl Fn(&S, Carried) -> Option<S>,
) -> (Closure<S>, Vec<usize>) {
    let mut c = Closure { states: IndexSet::new(), messages: IndexSet::new(), sends: HashMap::new(), receives: HashMap::new() };
    let iota = initial.into_iter().map(|s| c.states.insert_full(s).0).collect();
    let (mut done_s, mut done_m) = (0, 0);
    loop {
        let ls = c.states.len();
        for i in done_s..ls {
            let (m, next) = send(&c.states[i]);
            let im = c.messages.insert_full(m).0;
            let is = c.states.insert_full(next).0;
            c.sends.insert(i, (im, is));
        }
        let lm = c.messages.len();
        for i in 0..c.states.len() {
            for m in 0..lm {
                if (i < done_s && m < done_m) || c.receives.contains_key(&(i, m)) {
                    continue;
                }
                if let Some(next) = receive(&c.states[i], c.messages[m]) {
                    let is = c.states.insert_full(next).0;
                    c.receives.insert((i, m), is);
                }
            }
        }
        done_s = ls;
        done_m = lm;
        if done_s == c.states.len() && done_m == c.messages.len() {
            break;
        }
    }
    (c, iota)
}

fn list_name(prefix: &str, held: &[usize], source: &ProtocolSpec) -> String {
    let parts: Vec<&str> = held.iter().map(|&q| source.states[q].as_str()).collect();
    format!("{prefix}<{}>", parts.join(";"))
}

fn message_name(m: Carried, source: &ProtocolSpec) -> String {
    match m {
        Carried::State(q) => format!("m<{}>", source.states[q]),
        Carried::Null => "null".into(),
    }
}

fn tables_of<S>(c: &Closure<S>) -> MessageTables {
    let mut t = MessageTables::empty(c.states.len(), c.messages.len());
    for (&i, &(m, s)) in &c.sends {
        t.set_send(i, m, s);
    }
    for (&(i, m), &s) in &c.receives {
        t.set_receive(i, m, s);
    }
    t
}

/// Queued transmission simulation of a two-way protocol. Each agent holds
/// up to two simulated states. It sends the one held longest (or `null`
/// when empty); a holder of one state that receives a second runs the
/// two-way rule with the held state as initiator; a holder of two refuses
/// further states. `null` is accepted by everyone as a no-op.
pub fn two_way_to_queued(p: &ProtocolSpec) -> Result<SimulationCertificate, TransformError> {
    let t = require(p, ModelKind::new(Model::TwoWay))?;
    let initial = p.iota.iter().map(|&q| Holder::Held(vec![q])).collect();
    let (c, iota) = close(
        initial,
        |h| match h {
            Holder::Empty(b) => (Carried::Null, Holder::Empty(*b)),
            Holder::Held(v) if v.len() == 1 => (Carried::State(v[0]), Holder::Empty(p.output[v[0]])),
            Holder::Held(v) => (Carried::State(v[0]), Holder::Held(v[1..].to_vec())),
        },
        |h, m| match (h, m) {
            (_, Carried::Null) => Some(h.clone()),
            (Holder::Empty(_), Carried::State(q)) => Some(Holder::Held(vec![q])),
            (Holder::Held(v), Carried::State(q)) if v.len() == 1 => {
                let (a, b) = t.get(v[0], q);
                Some(Holder::Held(vec![a, b]))
            }
            _ => None,
        },
    );
    let states: Vec<String> = c
        .states
        .iter()
        .map(|h| match h {
            Holder::Empty(b) => format!("e{}", *b as u8),
            Holder::Held(v) => list_name("h", v, p),
        })
        .collect();
    let output = c
        .states
        .iter()
        .map(|h| match h {
            Holder::Empty(b) => *b,
            Holder::Held(v) => p.output[v[0]],
        })
        .collect();
    let projection = c
        .states
        .iter()
        .map(|h| match h {
            Holder::Empty(_) => vec![],
            Holder::Held(v) => v.clone(),
        })
        .chain(c.messages.iter().map(|m| match m {
            Carried::State(q) => vec![*q],
            Carried::Null => vec![],
        }))
        .collect();
    let target = checked(ProtocolSpec {
        kind: ModelKind::new(Model::QueuedTransmission),
        states,
        messages: c.messages.iter().map(|&m| message_name(m, p)).collect(),
        inputs: p.inputs.clone(),
        transitions: Transitions::Messages(tables_of(&c)),
        iota,
        output,
        message_output: vec![],
    })?;
    Ok(SimulationCertificate { source: p.clone(), target, projection, tokens: None })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Metered {
    holder: Holder,
    /// Started with a token (its input was the token symbol).
    funded: bool,
}

impl Metered {
    fn held(&self) -> &[usize] {
        match &self.holder {
            Holder::Empty(_) => &[],
            Holder::Held(v) => v,
        }
    }

    // Every send pays one token and every receive earns one, so
    // held - tokens stays at its initial value 1 - funded.
    fn tokens(&self) -> u64 {
        (self.held().len() + self.funded as usize - 1) as u64
    }
}

/// Token-metered simulation of a two-way protocol, valid on inputs with
/// between 1 and `k - 1` occurrences of `token`. Agents given `token` start
/// with one token each; sending a simulated state costs one token, which
/// travels with the message to the receiver. An agent therefore holds at
/// most `k` states, so receives are never refused and the result is a
/// delayed transmission protocol. A received state interacts with the most
/// recently held one, which acts as initiator. Agents without tokens send
/// `null`.
pub fn two_way_to_queued_tokens(
    p: &ProtocolSpec,
    token: &str,
    k: usize,
) -> Result<SimulationCertificate, TransformError> {
    let t = require(p, ModelKind::new(Model::TwoWay))?;
    let tok = p.input_index(token).ok_or_else(|| TransformError::UnknownSymbol(token.to_owned()))?;
    if k < 2 {
        return Err(TransformError::InvalidParameter("capacity k must be at least 2".into()));
    }
    let initial = p
        .iota
        .iter()
        .enumerate()
        .map(|(s, &q)| Metered { holder: Holder::Held(vec![q]), funded: s == tok })
        .collect();
    let (c, iota) = close(
        initial,
        |a: &Metered| {
            if a.tokens() == 0 {
                return (Carried::Null, a.clone());
            }
            let v = a.held();
            let holder = if v.len() == 1 { Holder::Empty(p.output[v[0]]) } else { Holder::Held(v[1..].to_vec()) };
            (Carried::State(v[0]), Metered { holder, funded: a.funded })
        },
        |a, m| {
            let Carried::State(q) = m else { return Some(a.clone()) };
            let mut v = a.held().to_vec();
            if v.len() >= k {
                // Unreachable under the promise: the holder owns every token.
                return Some(a.clone());
            }
            match v.last_mut() {
                Some(last) => {
                    let (x, y) = t.get(*last, q);
                    *last = x;
                    v.push(y);
                }
                None => v.push(q),
            }
            Some(Metered { holder: Holder::Held(v), funded: a.funded })
        },
    );
    let states: Vec<String> = c
        .states
        .iter()
        .map(|a| {
            let prefix = if a.funded { "t" } else { "h" };
            match &a.holder {
                Holder::Empty(b) => format!("{prefix}<>{}", *b as u8),
                Holder::Held(v) => list_name(prefix, v, p),
            }
        })
        .collect();
    let output = c
        .states
        .iter()
        .map(|a| match &a.holder {
            Holder::Empty(b) => *b,
            Holder::Held(v) => p.output[v[0]],
        })
        .collect();
    let projection = c
        .states
        .iter()
        .map(|a| a.held().to_vec())
        .chain(c.messages.iter().map(|m| match m {
            Carried::State(q) => vec![*q],
            Carried::Null => vec![],
        }))
        .collect();
    let tokens = c
        .states
        .iter()
        .map(Metered::tokens)
        .chain(c.messages.iter().map(|m| u64::from(*m != Carried::Null)))
        .collect();
    let target = checked(ProtocolSpec {
        kind: ModelKind::new(Model::DelayedTransmission),
        states,
        messages: c.messages.iter().map(|&m| message_name(m, p)).collect(),
        inputs: p.inputs.clone(),
        transitions: Transitions::Messages(tables_of(&c)),
        iota,
        output,
        message_output: vec![],
    })?;
    Ok(SimulationCertificate { source: p.clone(), target, projection, tokens: Some(tokens) })
}

fn primed_spec(p: &ProtocolSpec, mirrors: bool, table: JointTable) -> Result<ProtocolSpec, TransformError> {
    // Shortest run of primes that keeps twin names fresh.
    let mut mark = "'".to_string();
    while p.states.iter().any(|q| p.states.contains(&format!("{q}{mark}"))) {
        mark.push('\'');
    }
    let states = p.states.iter().cloned().chain(p.states.iter().map(|q| format!("{q}{mark}"))).collect();
    let output = p.output.iter().chain(p.output.iter()).copied().collect();
    checked(ProtocolSpec {
        kind: ModelKind::with_mirrors(Model::ImmediateObservation, mirrors),
        states,
        messages: vec![],
        inputs: p.inputs.clone(),
        transitions: Transitions::Joint(table),
        iota: p.iota.clone(),
        output,
        message_output: vec![],
    })
}

/// Immediate observation without mirrors to with mirrors (for `n >= 3`).
/// Each state `q` gains a primed twin `q'` (index `q + |Q|`). Rules between
/// different states apply to every priming, keeping the responder's
/// priming. A self-rule `(p, p) -> (p, q)` becomes four: an agent may flip
/// between `p` and `p'` alone, but leaving requires a partner of the other
/// priming.
pub fn io_add_mirrors(p: &ProtocolSpec) -> Result<ProtocolSpec, TransformError> {
    let t = require_mirrors(p, false)?;
    let n = p.states.len();
    let table = JointTable::from_fn(2 * n, |i, j| {
        let (pi, qi) = (i % n, j % n);
        let (ip, jp) = (i >= n, j >= n);
        let r = t.get(pi, qi).1;
        if pi != qi {
            return (i, r + if jp { n } else { 0 });
        }
        if r == pi {
            return (i, j);
        }
        match (ip, jp) {
            (false, false) => (i, pi + n),
            (true, true) => (i, pi),
            _ => (i, r),
        }
    });
    primed_spec(p, true, table)
}

/// Immediate observation with mirrors to without mirrors (for `n >= 3`).
/// An unprimed initiator flips the responder's priming. A primed initiator
/// `p'` applies `(p, q) -> (p, r)` to an unprimed responder `q != p`, and
/// the self-rule of `p` to any primed responder `p'`.
pub fn io_remove_mirrors(p: &ProtocolSpec) -> Result<ProtocolSpec, TransformError> {
    let t = require_mirrors(p, true)?;
    let n = p.states.len();
    let table = JointTable::from_fn(2 * n, |i, j| {
        let (pi, qi) = (i % n, j % n);
        match (i >= n, j >= n) {
            (false, false) => (i, qi + n),
            (false, true) => (i, qi),
            (true, false) if pi != qi => (i, t.get(pi, qi).1),
            (true, false) => (i, j),
            (true, true) => (i, t.get(qi, qi).1 + n),
        }
    });
    primed_spec(p, false, table)
}

/// Embeds a concrete protocol into the abstract model. Interaction rules
/// carry over (with self-rules when mirrors are on). For message models,
/// each message gets two copies `m~0` and `m~1` tagged with an output; a
/// send tags the message with the sender's new output, receives ignore the
/// tag, and an agent may retag any message to its own output.
pub fn to_abstract(p: &ProtocolSpec) -> Result<ProtocolSpec, TransformError> {
    validate_model(p).map_err(TransformError::InvalidModel)?;
    let nq = p.states.len();
    let mut rules = Vec::new();
    let mut messages = Vec::new();
    let mut message_output = Vec::new();
    match &p.transitions {
        Transitions::Joint(t) => {
            for q1 in 0..nq {
                for q2 in 0..nq {
                    let (r1, r2) = t.get(q1, q2);
                    rules.push(RawRule { lhs: vec![q1, q2], rhs: vec![r1, r2] });
                }
                if p.kind.mirrors {
                    rules.push(RawRule { lhs: vec![q1], rhs: vec![t.get(q1, q1).1] });
                }
            }
        }
        Transitions::Messages(t) => {
            let tagged = |m: usize, b: bool| nq + 2 * m + b as usize;
            for m in &p.messages {
                for b in 0..2 {
                    messages.push(format!("{m}~{b}"));
                    message_output.push(b == 1);
                }
            }
            for q in 0..nq {
                if let Some((m, next)) = t.send(q) {
                    rules.push(RawRule { lhs: vec![q], rhs: vec![next, tagged(m, p.output[next])] });
                }
                for m in 0..p.messages.len() {
                    if let Some(next) = t.receive(q, m) {
                        for b in [false, true] {
                            rules.push(RawRule { lhs: vec![q, tagged(m, b)], rhs: vec![next] });
                        }
                    }
                    let o = p.output[q];
                    rules.push(RawRule { lhs: vec![q, tagged(m, !o)], rhs: vec![q, tagged(m, o)] });
                }
            }
        }
        Transitions::Rules(_) => return Ok(p.clone()),
    }
    checked(ProtocolSpec {
        kind: ModelKind::new(Model::Abstract),
        states: p.states.clone(),
        messages,
        inputs: p.inputs.clone(),
        transitions: Transitions::Rules(rules),
        iota: p.iota.clone(),
        output: p.output.clone(),
        message_output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{build_modulo, build_simple_threshold, build_threshold_avg, ModuloParams, ThresholdParams};
    use crate::verifier::{explore, verdict, ExploreOptions, TransitCap};

    fn ab() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn parity() -> ProtocolSpec {
        build_modulo(&ModuloParams::new([("a", 1)], 1, 2).unwrap()).unwrap()
    }

    fn same_verdicts(src: &ProtocolSpec, dst: &ProtocolSpec, inputs: &[&str], cap: TransitCap) {
        for x in inputs {
            let xs = src.parse_input(x).unwrap();
            let xd = dst.parse_input(x).unwrap();
            let a = verdict(src, &xs, ExploreOptions::default()).unwrap();
            let b = verdict(dst, &xd, ExploreOptions::with_cap(cap)).unwrap();
            assert_eq!(a.value(), b.value(), "input {x}");
            assert!(a.value().is_some());
        }
    }

    #[test]
    fn delayed_variant_kinds() {
        let tower = build_simple_threshold("a", 2, &ab()).unwrap();
        assert_eq!(immediate_to_delayed(&tower).unwrap().kind.model, Model::DelayedObservation);
        assert_eq!(immediate_to_delayed(&parity()).unwrap().kind.model, Model::DelayedTransmission);
        let avg = build_threshold_avg(&ThresholdParams::new([("a", 1)], 1)).unwrap();
        assert!(matches!(immediate_to_delayed(&avg), Err(TransformError::InvalidModel(_))));
    }

    #[test]
    fn queued_parity_matches_source() {
        let cert = two_way_to_queued(&parity()).unwrap();
        assert_eq!(cert.target.kind.model, Model::QueuedTransmission);
        same_verdicts(&cert.source, &cert.target, &["{a:1}", "{a:2}", "{a:3}"], TransitCap::Population);
    }

    #[test]
    fn queued_conserves_simulated_states() {
        let p = build_simple_threshold("a", 2, &ab()).unwrap();
        let cert = two_way_to_queued(&p).unwrap();
        let r = cert.target.compile().unwrap();
        let x = cert.target.parse_input("{a:2, b:1}").unwrap();
        let c0 = r.initial_config(&x).unwrap();
        let g = explore(&r, &c0, ExploreOptions::with_cap(TransitCap::Population)).unwrap();
        let src = cert.source.compile().unwrap();
        let s0 = src.initial_config(&cert.source.parse_input("{a:2, b:1}").unwrap()).unwrap();
        let reachable = explore(&src, &s0, ExploreOptions::default()).unwrap();
        for c in g.nodes() {
            let proj = cert.project(c);
            assert_eq!(proj.total(), 3);
            assert!(reachable.index_of(&proj).is_some(), "{}", r.display(c));
        }
    }

    #[test]
    fn queued_single_agent() {
        let cert = two_way_to_queued(&parity()).unwrap();
        same_verdicts(&cert.source, &cert.target, &["{a:1}"], TransitCap::Population);
    }

    #[test]
    fn tokens_target_is_delayed_transmission() {
        let abc: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let p = build_threshold_avg(&ThresholdParams::new([("a", 1), ("b", -1), ("c", 0)], 1)).unwrap();
        let cert = two_way_to_queued_tokens(&p, "c", 2).unwrap();
        assert_eq!(cert.target.kind.model, Model::DelayedTransmission);
        assert!(validate_as(&cert.target, ModelKind::new(Model::DelayedTransmission)).is_ok());
        assert_eq!(cert.target.inputs, abc);
        assert!(two_way_to_queued_tokens(&p, "z", 2).is_err());
    }

    #[test]
    fn mirror_state_counts() {
        let tower = build_simple_threshold("a", 2, &ab()).unwrap();
        let added = io_add_mirrors(&tower).unwrap();
        assert_eq!(added.states.len(), 6);
        assert!(added.kind.mirrors);
        let removed = io_remove_mirrors(&added).unwrap();
        assert_eq!(removed.states.len(), 12);
        assert!(!removed.kind.mirrors);
        assert!(io_add_mirrors(&added).is_err());
    }

    #[test]
    fn removing_mirrors_maps_self_rules() {
        // With mirrors, (1,1) -> (1,2) fires on a single agent; the
        // transform simulates it by (q', 1') -> (q', 2') for every q.
        let tower = build_simple_threshold("a", 2, &ab()).unwrap();
        let mut mirrored = tower.clone();
        mirrored.kind = ModelKind::with_mirrors(Model::ImmediateObservation, true);
        let out = io_remove_mirrors(&mirrored).unwrap();
        let Transitions::Joint(t) = &out.transitions else { panic!() };
        for q in 0..3 {
            assert_eq!(t.get(q + 3, 1 + 3), (q + 3, 2 + 3));
        }
    }

    #[test]
    fn mirrors_preserve_tower_verdicts() {
        let tower = build_simple_threshold("a", 2, &ab()).unwrap();
        let added = io_add_mirrors(&tower).unwrap();
        let back = io_remove_mirrors(&added).unwrap();
        let inputs = ["{a:3}", "{a:1, b:2}", "{a:2, b:1}", "{b:3}"];
        same_verdicts(&tower, &added, &inputs, TransitCap::None);
        same_verdicts(&tower, &back, &inputs, TransitCap::None);
    }

    #[test]
    fn abstract_embedding_agrees() {
        let tower = build_simple_threshold("a", 2, &ab()).unwrap();
        let abs = to_abstract(&tower).unwrap();
        same_verdicts(&tower, &abs, &["{a:1}", "{a:2, b:1}", "{b:2}"], TransitCap::None);
        let delayed = crate::library::build_delayed_transmission(&crate::library::DelayedPredicate::Modulo(
            ModuloParams::new([("a", 1)], 1, 2).unwrap(),
        ))
        .unwrap();
        let abs = to_abstract(&delayed).unwrap();
        for x in ["{a:1}", "{a:2}"] {
            let xs = delayed.parse_input(x).unwrap();
            let opts = ExploreOptions::with_cap(TransitCap::Population);
            assert_eq!(verdict(&delayed, &xs, opts).unwrap(), verdict(&abs, &xs, opts).unwrap());
        }
    }
}
