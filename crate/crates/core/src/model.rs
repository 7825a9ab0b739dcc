//! Protocol descriptions for the interaction and message-passing models, the
//! constraints that separate the special cases, and compilation to a uniform
//! multiset-rewriting [`RuleSet`].

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::multiset::{is_valid_name, Alphabet, Element, Multiset};

/// The seven model families. The first three are interaction models, the
/// next three message-passing models, and `Abstract` is plain rewriting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    TwoWay,
    ImmediateTransmission,
    ImmediateObservation,
    QueuedTransmission,
    DelayedTransmission,
    DelayedObservation,
    Abstract,
}

impl Model {
    pub const ALL: [Model; 7] = [
        Model::TwoWay,
        Model::ImmediateTransmission,
        Model::ImmediateObservation,
        Model::QueuedTransmission,
        Model::DelayedTransmission,
        Model::DelayedObservation,
        Model::Abstract,
    ];

    /// Interaction models never deliver to oneself by default; message-passing
    /// models do, since an anonymous message may reach anyone.
    pub fn default_mirrors(self) -> bool {
        self.is_message_passing()
    }

    pub fn is_interaction(self) -> bool {
        matches!(
            self,
            Model::TwoWay | Model::ImmediateTransmission | Model::ImmediateObservation
        )
    }

    pub fn is_message_passing(self) -> bool {
        matches!(
            self,
            Model::QueuedTransmission | Model::DelayedTransmission | Model::DelayedObservation
        )
    }

    /// The next more general model in the specialization chain.
    pub fn generalization(self) -> Option<Model> {
        match self {
            Model::ImmediateObservation => Some(Model::ImmediateTransmission),
            Model::ImmediateTransmission => Some(Model::TwoWay),
            Model::DelayedObservation => Some(Model::DelayedTransmission),
            Model::DelayedTransmission => Some(Model::QueuedTransmission),
            Model::TwoWay | Model::QueuedTransmission => Some(Model::Abstract),
            Model::Abstract => None,
        }
    }

    /// True if every protocol valid in `self` is also valid in `other`.
    pub fn specializes(self, other: Model) -> bool {
        let mut m = Some(self);
        while let Some(x) = m {
            if x == other {
                return true;
            }
            m = x.generalization();
        }
        false
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Model::TwoWay => "two-way",
            Model::ImmediateTransmission => "immediate-transmission",
            Model::ImmediateObservation => "immediate-observation",
            Model::QueuedTransmission => "queued-transmission",
            Model::DelayedTransmission => "delayed-transmission",
            Model::DelayedObservation => "delayed-observation",
            Model::Abstract => "abstract",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Model> {
        Model::ALL.into_iter().find(|m| m.keyword() == s)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelKind {
    pub model: Model,
    /// Self-interaction (interaction models) or self-delivery (message models).
    pub mirrors: bool,
}

impl ModelKind {
    pub fn new(model: Model) -> Self {
        ModelKind {
            model,
            mirrors: model.default_mirrors(),
        }
    }

    pub fn with_mirrors(model: Model, mirrors: bool) -> Self {
        ModelKind { model, mirrors }
    }
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        ModelKind::new(m)
    }
}

/// Dense joint transition table `delta(q1, q2) = (q1', q2')` for the
/// interaction models. Entries default to the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointTable {
    states: usize,
    entries: Vec<(usize, usize)>,
}

impl JointTable {
    pub fn identity(states: usize) -> Self {
        let entries = (0..states * states).map(|i| (i / states, i % states)).collect();
        JointTable { states, entries }
    }

    pub fn from_fn(states: usize, f: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        let entries = (0..states * states).map(|i| f(i / states, i % states)).collect();
        JointTable { states, entries }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn get(&self, initiator: usize, responder: usize) -> (usize, usize) {
        self.entries[initiator * self.states + responder]
    }

    pub fn set(&mut self, initiator: usize, responder: usize, result: (usize, usize)) {
        self.entries[initiator * self.states + responder] = result;
    }

    /// Pairs whose entry differs from the identity, in row-major order.
    pub fn non_identity(&self) -> impl Iterator<Item = ((usize, usize), (usize, usize))> + '_ {
        self.entries.iter().enumerate().filter_map(move |(i, &r)| {
            let p = (i / self.states, i % self.states);
            (r != p).then_some((p, r))
        })
    }
}

/// Send function `delta_s: Q -> M x Q` and receive function
/// `delta_r: Q x M -> Q` of the message-passing models. Both are stored as
/// partial tables; totality is checked by validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageTables {
    states: usize,
    messages: usize,
    send: Vec<Option<(usize, usize)>>,
    receive: Vec<Option<usize>>,
}

impl MessageTables {
    pub fn empty(states: usize, messages: usize) -> Self {
        MessageTables {
            states,
            messages,
            send: vec![None; states],
            receive: vec![None; states * messages],
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    /// `(message, new sender state)` for a send from `state`.
    pub fn send(&self, state: usize) -> Option<(usize, usize)> {
        self.send[state]
    }

    pub fn set_send(&mut self, state: usize, message: usize, next: usize) {
        self.send[state] = Some((message, next));
    }

    pub fn receive(&self, state: usize, message: usize) -> Option<usize> {
        self.receive[state * self.messages + message]
    }

    pub fn set_receive(&mut self, state: usize, message: usize, next: usize) {
        self.receive[state * self.messages + message] = Some(next);
    }
}

/// An explicit rewriting rule over element indices, used by the abstract
/// model. Indices `0..|Q|` are states and `|Q|..|Q|+|M|` messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRule {
    pub lhs: Vec<usize>,
    pub rhs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transitions {
    Joint(JointTable),
    Messages(MessageTables),
    Rules(Vec<RawRule>),
}

/// A protocol in one of the supported models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolSpec {
    pub kind: ModelKind,
    pub states: Vec<String>,
    pub messages: Vec<String>,
    pub inputs: Vec<String>,
    pub transitions: Transitions,
    /// Initial state of each input symbol, by index into `states`.
    pub iota: Vec<usize>,
    /// Individual output of each state.
    pub output: Vec<bool>,
    /// Individual output of each message; only the abstract model uses it.
    pub message_output: Vec<bool>,
}

/// Individual constraints a [`ProtocolSpec`] can violate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    InvalidName,
    DuplicateName,
    StateMessageOverlap,
    Shape,
    InitiatorDependsOnResponder,
    InitiatorChanges,
    SendNotTotal,
    ReceiveNotTotal,
    SenderChanges,
    SelfDeliveryExcluded,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::InvalidName => "invalid element name",
            Constraint::DuplicateName => "duplicate name",
            Constraint::StateMessageOverlap => "states and messages overlap",
            Constraint::Shape => "malformed tables",
            Constraint::InitiatorDependsOnResponder => "initiator update depends on responder",
            Constraint::InitiatorChanges => "initiator state changes",
            Constraint::SendNotTotal => "send function not total",
            Constraint::ReceiveNotTotal => "receive function not total",
            Constraint::SenderChanges => "sender state changes on send",
            Constraint::SelfDeliveryExcluded => {
                "message-passing semantics cannot exclude self-delivery"
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.constraint, self.detail)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid model: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),
    #[error("input population must be nonempty")]
    EmptyInput,
    #[error("unknown input symbol `{0}`")]
    UnknownInput(String),
}

/// Configuration output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Output {
    Defined(bool),
    Undefined,
}

impl Output {
    pub fn value(self) -> Option<bool> {
        match self {
            Output::Defined(b) => Some(b),
            Output::Undefined => None,
        }
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Output::Defined(b) => write!(f, "{}", *b as u8),
            Output::Undefined => f.write_str("undefined"),
        }
    }
}

impl ProtocolSpec {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn message_index(&self, name: &str) -> Option<usize> {
        self.messages.iter().position(|s| s == name)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s == name)
    }

    pub fn input_alphabet(&self) -> Alphabet {
        self.inputs.iter().collect()
    }

    /// State names followed by message names, indexed by [`Element`] id.
    pub fn element_names(&self) -> Vec<String> {
        self.states.iter().chain(&self.messages).cloned().collect()
    }

    pub fn element_alphabet(&self) -> Alphabet {
        self.element_names().into_iter().collect()
    }

    pub fn state(&self, q: usize) -> Element {
        Element(q as u32)
    }

    pub fn message(&self, m: usize) -> Element {
        Element((self.states.len() + m) as u32)
    }

    /// Checks the constraints of the spec's own kind.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate_as(self, self.kind)
    }

    pub fn compile(&self) -> Result<RuleSet, ModelError> {
        compile_rules(self)
    }

    /// `I(x)`: one agent in state `iota(sigma)` per occurrence of `sigma`.
    pub fn initial_config(&self, x: &Multiset) -> Result<Multiset, ModelError> {
        initial_config(&self.iota, x)
    }

    /// Parses `{a:2, b:1}` over the input alphabet.
    pub fn parse_input(&self, text: &str) -> Result<Multiset, crate::multiset::MultisetError> {
        Multiset::parse(text, &self.input_alphabet())
    }
}

/// Checks `p` against the constraints of `kind`, which need not be `p.kind`.
/// Every violated constraint is reported with the offending entry.
pub fn validate_as(p: &ProtocolSpec, kind: ModelKind) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let mut push = |constraint: Constraint, detail: String| v.push(Violation { constraint, detail });

    let mut seen = HashSet::new();
    for name in p.states.iter().chain(&p.messages) {
        if !is_valid_name(name) {
            push(Constraint::InvalidName, format!("`{name}`"));
        }
        if !seen.insert(name.as_str()) {
            let c = if p.states.contains(name) && p.messages.contains(name) {
                Constraint::StateMessageOverlap
            } else {
                Constraint::DuplicateName
            };
            push(c, format!("`{name}`"));
        }
    }
    let mut seen_inputs = HashSet::new();
    for name in &p.inputs {
        if !is_valid_name(name) {
            push(Constraint::InvalidName, format!("input `{name}`"));
        }
        if !seen_inputs.insert(name.as_str()) {
            push(Constraint::DuplicateName, format!("input `{name}`"));
        }
    }
    let nq = p.states.len();
    let nm = p.messages.len();
    if p.iota.len() != p.inputs.len() {
        push(Constraint::Shape, "initial map does not cover every input".into());
    }
    for (i, &q) in p.iota.iter().enumerate() {
        if q >= nq {
            push(Constraint::Shape, format!("initial state of input #{i} out of range"));
        }
    }
    if p.output.len() != nq {
        push(Constraint::Shape, "output map does not cover every state".into());
    }

    let model = kind.model;
    match (&p.transitions, model) {
        (Transitions::Joint(t), m) if m.is_interaction() || m == Model::Abstract => {
            if t.states() != nq {
                push(Constraint::Shape, "joint table dimension differs from |Q|".into());
            } else if nm != 0 && m != Model::Abstract {
                push(Constraint::Shape, "interaction models have no messages".into());
            } else {
                for q1 in 0..nq {
                    let first = t.get(q1, 0).0;
                    for q2 in 0..nq {
                        let (r1, r2) = t.get(q1, q2);
                        if r1 >= nq || r2 >= nq {
                            push(Constraint::Shape, format!("delta({q1},{q2}) out of range"));
                            continue;
                        }
                        let entry = || {
                            format!(
                                "delta({}, {}) = ({}, {})",
                                p.states[q1], p.states[q2], p.states[r1], p.states[r2]
                            )
                        };
                        if matches!(m, Model::ImmediateTransmission | Model::ImmediateObservation)
                            && r1 != first
                        {
                            push(Constraint::InitiatorDependsOnResponder, entry());
                        }
                        if m == Model::ImmediateObservation && r1 != q1 {
                            push(Constraint::InitiatorChanges, entry());
                        }
                    }
                }
            }
        }
        (Transitions::Messages(t), m) if m.is_message_passing() || m == Model::Abstract => {
            if t.states() != nq || t.messages() != nm {
                push(Constraint::Shape, "message table dimensions differ from |Q|, |M|".into());
            } else {
                for q in 0..nq {
                    match t.send(q) {
                        None => push(Constraint::SendNotTotal, format!("no send from `{}`", p.states[q])),
                        Some((msg, next)) => {
                            if msg >= nm || next >= nq {
                                push(Constraint::Shape, format!("send from `{}` out of range", p.states[q]));
                            } else if m == Model::DelayedObservation && next != q {
                                push(
                                    Constraint::SenderChanges,
                                    format!(
                                        "send {} -> {} {}",
                                        p.states[q], p.messages[msg], p.states[next]
                                    ),
                                );
                            }
                        }
                    }
                    for msg in 0..nm {
                        match t.receive(q, msg) {
                            Some(next) if next >= nq => push(
                                Constraint::Shape,
                                format!("recv {} {} out of range", p.states[q], p.messages[msg]),
                            ),
                            None if matches!(
                                m,
                                Model::DelayedTransmission | Model::DelayedObservation
                            ) =>
                            {
                                push(
                                    Constraint::ReceiveNotTotal,
                                    format!("recv {} {} undefined", p.states[q], p.messages[msg]),
                                )
                            }
                            _ => {}
                        }
                    }
                }
                if m.is_message_passing() && !kind.mirrors {
                    push(Constraint::SelfDeliveryExcluded, format!("{m} with mirrors = false"));
                }
            }
        }
        (Transitions::Rules(rules), Model::Abstract) => {
            if p.message_output.len() != nm {
                push(Constraint::Shape, "output map does not cover every message".into());
            }
            for (i, r) in rules.iter().enumerate() {
                if r.lhs.is_empty() {
                    push(Constraint::Shape, format!("rule #{i} has an empty left-hand side"));
                }
                if r.lhs.iter().chain(&r.rhs).any(|&e| e >= nq + nm) {
                    push(Constraint::Shape, format!("rule #{i} references an unknown element"));
                }
            }
        }
        (_, m) => push(
            Constraint::Shape,
            format!("transition tables do not match the {m} model"),
        ),
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// `validate_as` with the spec's own kind.
pub fn validate_model(p: &ProtocolSpec) -> Result<(), Vec<Violation>> {
    validate_as(p, p.kind)
}

/// A rewriting rule `lhs -> rhs` on configurations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub lhs: Multiset,
    pub rhs: Multiset,
}

/// Uniform rewriting view of a protocol. Elements `0..agent_states` are
/// agent states; the rest are messages.
#[derive(Clone, Debug)]
pub struct RuleSet {
    pub kind: ModelKind,
    pub rules: Vec<Rule>,
    pub names: Vec<String>,
    pub agent_states: usize,
    /// Individual output per element; `None` for elements the configuration
    /// output ignores (messages in transit, outside the abstract model).
    pub output: Vec<Option<bool>>,
    pub input_names: Vec<String>,
    pub input_embedding: Vec<Element>,
}

impl RuleSet {
    pub fn element_count(&self) -> usize {
        self.names.len()
    }

    pub fn is_message(&self, e: Element) -> bool {
        e.index() >= self.agent_states
    }

    pub fn agents(&self, c: &Multiset) -> u64 {
        c.entries()
            .iter()
            .filter(|(e, _)| !self.is_message(*e))
            .map(|&(_, n)| n)
            .sum()
    }

    /// Rules enabled at `c`, paired with the configuration each produces.
    pub fn enabled<'a>(&'a self, c: &'a Multiset) -> impl Iterator<Item = (usize, Multiset)> + 'a {
        self.rules
            .iter()
            .enumerate()
            .filter_map(move |(i, r)| c.apply(&r.lhs, &r.rhs).map(|d| (i, d)))
    }

    /// The set of one-step successors of `c`, deduplicated and sorted.
    pub fn successors(&self, c: &Multiset) -> Vec<Multiset> {
        let mut out: Vec<Multiset> = self.enabled(c).map(|(_, d)| d).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn output_of(&self, c: &Multiset) -> Output {
        let mut seen: Option<bool> = None;
        for &(e, _) in c.entries() {
            if let Some(b) = self.output[e.index()] {
                match seen {
                    None => seen = Some(b),
                    Some(s) if s != b => return Output::Undefined,
                    _ => {}
                }
            }
        }
        seen.map_or(Output::Undefined, Output::Defined)
    }

    /// Initial configuration of input `x`, a multiset over the input alphabet.
    pub fn initial_config(&self, x: &Multiset) -> Result<Multiset, ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        Ok(Multiset::from_counts(
            x.entries().iter().map(|&(s, n)| (self.input_embedding[s.index()], n)),
        ))
    }

    pub fn display(&self, c: &Multiset) -> String {
        c.display_with(&self.names).to_string()
    }
}

pub fn initial_config(iota: &[usize], x: &Multiset) -> Result<Multiset, ModelError> {
    if x.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    Ok(Multiset::from_counts(
        x.entries().iter().map(|&(s, n)| (Element(iota[s.index()] as u32), n)),
    ))
}

/// `O(c)` for a protocol spec.
pub fn output_of(p: &ProtocolSpec, c: &Multiset) -> Output {
    let nq = p.states.len();
    let abstract_model = p.kind.model == Model::Abstract;
    let mut seen: Option<bool> = None;
    for &(e, _) in c.entries() {
        let i = e.index();
        let o = if i < nq {
            Some(p.output[i])
        } else if abstract_model {
            p.message_output.get(i - nq).copied()
        } else {
            None
        };
        if let Some(b) = o {
            match seen {
                None => seen = Some(b),
                Some(s) if s != b => return Output::Undefined,
                _ => {}
            }
        }
    }
    seen.map_or(Output::Undefined, Output::Defined)
}

/// Compiles a valid spec to its rule set. Interaction models emit one
/// binary rule per non-trivial table entry, plus unary self-interaction
/// rules when mirrors are enabled; message models emit send and receive
/// rules. Identical rules are merged and no-op rules dropped.
pub fn compile_rules(p: &ProtocolSpec) -> Result<RuleSet, ModelError> {
    validate_model(p).map_err(ModelError::InvalidModel)?;
    let nq = p.states.len();
    let st = |q: usize| Element(q as u32);
    let msg = |m: usize| Element((nq + m) as u32);
    let mut rules = Vec::new();
    match &p.transitions {
        Transitions::Joint(t) => {
            for q1 in 0..nq {
                for q2 in 0..nq {
                    let (r1, r2) = t.get(q1, q2);
                    rules.push(Rule {
                        lhs: Multiset::from_elements([st(q1), st(q2)]),
                        rhs: Multiset::from_elements([st(r1), st(r2)]),
                    });
                }
                if p.kind.mirrors {
                    let (_, r) = t.get(q1, q1);
                    rules.push(Rule {
                        lhs: Multiset::singleton(st(q1)),
                        rhs: Multiset::singleton(st(r)),
                    });
                }
            }
        }
        Transitions::Messages(t) => {
            for q in 0..nq {
                if let Some((m, next)) = t.send(q) {
                    rules.push(Rule {
                        lhs: Multiset::singleton(st(q)),
                        rhs: Multiset::from_elements([st(next), msg(m)]),
                    });
                }
                for m in 0..t.messages() {
                    if let Some(next) = t.receive(q, m) {
                        rules.push(Rule {
                            lhs: Multiset::from_elements([st(q), msg(m)]),
                            rhs: Multiset::singleton(st(next)),
                        });
                    }
                }
            }
        }
        Transitions::Rules(raw) => {
            for r in raw {
                rules.push(Rule {
                    lhs: Multiset::from_elements(r.lhs.iter().map(|&e| Element(e as u32))),
                    rhs: Multiset::from_elements(r.rhs.iter().map(|&e| Element(e as u32))),
                });
            }
        }
    }
    let mut seen = HashSet::new();
    rules.retain(|r| r.lhs != r.rhs && seen.insert(r.clone()));

    let abstract_model = p.kind.model == Model::Abstract;
    let output = p
        .output
        .iter()
        .map(|&b| Some(b))
        .chain((0..p.messages.len()).map(|m| {
            if abstract_model {
                p.message_output.get(m).copied()
            } else {
                None
            }
        }))
        .collect();
    Ok(RuleSet {
        kind: p.kind,
        rules,
        names: p.element_names(),
        agent_states: nq,
        output,
        input_names: p.inputs.clone(),
        input_embedding: p.iota.iter().map(|&q| st(q)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-state spec where the initiator always moves to state 1.
    fn toy_two_way(model: Model) -> ProtocolSpec {
        ProtocolSpec {
            kind: model.into(),
            states: vec!["x".into(), "y".into()],
            messages: vec![],
            inputs: vec!["a".into()],
            transitions: Transitions::Joint(JointTable::from_fn(2, |_, q2| (1, q2))),
            iota: vec![0],
            output: vec![false, true],
            message_output: vec![],
        }
    }

    fn toy_queued(model: Model) -> ProtocolSpec {
        let mut t = MessageTables::empty(2, 1);
        t.set_send(0, 0, 1);
        t.set_send(1, 0, 1);
        t.set_receive(0, 0, 1);
        ProtocolSpec {
            kind: model.into(),
            states: vec!["q".into(), "q'".into()],
            messages: vec!["m".into()],
            inputs: vec!["s".into()],
            transitions: Transitions::Messages(t),
            iota: vec![0],
            output: vec![false, false],
            message_output: vec![],
        }
    }

    #[test]
    fn immediate_transmission_constraints() {
        let p = toy_two_way(Model::ImmediateTransmission);
        assert!(p.validate().is_ok());
        let err = validate_as(&p, ModelKind::new(Model::ImmediateObservation)).unwrap_err();
        assert!(err.iter().all(|v| v.constraint == Constraint::InitiatorChanges));
        assert_eq!(err.len(), 2);

        let mut q = p.clone();
        if let Transitions::Joint(t) = &mut q.transitions {
            t.set(0, 1, (0, 1));
        }
        let err = q.validate().unwrap_err();
        assert_eq!(err[0].constraint, Constraint::InitiatorDependsOnResponder);
        assert!(err[0].detail.contains("delta(x, y)"));
    }

    #[test]
    fn delayed_requires_total_receive() {
        let p = toy_queued(Model::QueuedTransmission);
        assert!(p.validate().is_ok());
        let err = validate_as(&p, ModelKind::new(Model::DelayedTransmission)).unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].constraint, Constraint::ReceiveNotTotal);
        assert_eq!(err[0].constraint.to_string(), "receive function not total");
        assert!(err[0].detail.contains("recv q' m"));
    }

    #[test]
    fn delayed_observation_keeps_sender() {
        let mut p = toy_queued(Model::DelayedObservation);
        if let Transitions::Messages(t) = &mut p.transitions {
            t.set_receive(1, 0, 1);
        }
        let err = p.validate().unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].constraint, Constraint::SenderChanges);
    }

    #[test]
    fn overlapping_names_rejected() {
        let mut p = toy_queued(Model::QueuedTransmission);
        p.messages = vec!["q".into()];
        let err = p.validate().unwrap_err();
        assert!(err.iter().any(|v| v.constraint == Constraint::StateMessageOverlap));
    }

    #[test]
    fn send_rule_shape() {
        let p = toy_queued(Model::QueuedTransmission);
        let r = p.compile().unwrap();
        let q = Element(0);
        let q2 = Element(1);
        let m = Element(2);
        assert!(r.rules.contains(&Rule {
            lhs: Multiset::singleton(q),
            rhs: Multiset::from_elements([q2, m]),
        }));
        let c = Multiset::singleton(q);
        let succ = r.successors(&c);
        assert_eq!(succ, vec![Multiset::from_elements([q2, m])]);
        assert_eq!(r.successors(&Multiset::singleton(q2)).len(), 1);
    }

    #[test]
    fn mirrors_add_unary_rules() {
        let p = toy_two_way(Model::TwoWay);
        let plain = p.compile().unwrap();
        assert!(plain.rules.iter().all(|r| r.lhs.total() == 2));
        let mut m = p.clone();
        m.kind.mirrors = true;
        let mirrored = m.compile().unwrap();
        // delta(x, x) = (y, x): the responder result is x, so no self-rule for x.
        // delta(y, y) = (y, y) is a no-op.
        assert_eq!(mirrored.rules.len(), plain.rules.len());
    }

    #[test]
    fn outputs() {
        let p = toy_queued(Model::QueuedTransmission);
        let r = p.compile().unwrap();
        let c = Multiset::from_counts([(Element(0), 2), (Element(2), 5)]);
        assert_eq!(r.output_of(&c), Output::Defined(false));
        assert_eq!(output_of(&p, &c), Output::Defined(false));
        let t = toy_two_way(Model::TwoWay).compile().unwrap();
        assert_eq!(t.output_of(&Multiset::from_elements([Element(0), Element(1)])), Output::Undefined);
        assert_eq!(t.output_of(&Multiset::from_counts([(Element(1), 3)])), Output::Defined(true));
    }

    #[test]
    fn initial_configs() {
        let p = ProtocolSpec {
            inputs: vec!["s".into(), "t".into(), "u".into()],
            iota: vec![0, 1, 1],
            ..toy_two_way(Model::TwoWay)
        };
        let x = p.parse_input("{s:1, t:2}").unwrap();
        assert_eq!(
            p.initial_config(&x).unwrap(),
            Multiset::from_counts([(Element(0), 1), (Element(1), 2)])
        );
        let y = p.parse_input("{t:1, u:2}").unwrap();
        assert_eq!(p.initial_config(&y).unwrap(), Multiset::from_counts([(Element(1), 3)]));
        assert_eq!(p.initial_config(&Multiset::new()), Err(ModelError::EmptyInput));
    }

    #[test]
    fn specialization_order() {
        assert!(Model::ImmediateObservation.specializes(Model::TwoWay));
        assert!(Model::DelayedObservation.specializes(Model::QueuedTransmission));
        assert!(!Model::DelayedObservation.specializes(Model::TwoWay));
        assert!(Model::TwoWay.specializes(Model::Abstract));
    }
}
