//! Concrete protocols: the threshold tower, modulo and averaging
//! protocols, their delayed-transmission variants, presence detection under
//! delayed observation, a boolean product, and the set-union protocol.

use std::collections::HashMap;

use indexmap::IndexSet;
use thiserror::Error;

use crate::model::{
    validate_model, JointTable, MessageTables, Model, ModelKind, ProtocolSpec, Transitions, Violation,
};

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("symbol `{0}` is not in the input alphabet")]
    UnknownSymbol(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("initial value {value} lies outside the data range [{lo}, {hi}]")]
    RangeTooSmall { value: i64, lo: i64, hi: i64 },
    #[error("cannot combine protocols of kinds {0} and {1}")]
    KindMismatch(String, String),
    #[error("protocols have different input alphabets")]
    AlphabetMismatch,
    #[error("constructed protocol is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

fn checked(p: ProtocolSpec) -> Result<ProtocolSpec, LibraryError> {
    validate_model(&p).map_err(LibraryError::Invalid)?;
    Ok(p)
}

/// `[x . v >= r]`, with an optional explicit data range for the averaging
/// protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdParams {
    pub coefficients: Vec<(String, i64)>,
    pub threshold: i64,
    pub range: Option<(i64, i64)>,
}

impl ThresholdParams {
    pub fn new<S: Into<String>>(coefficients: impl IntoIterator<Item = (S, i64)>, threshold: i64) -> Self {
        ThresholdParams {
            coefficients: coefficients.into_iter().map(|(s, v)| (s.into(), v)).collect(),
            threshold,
            range: None,
        }
    }

    pub fn symbols(&self) -> Vec<String> {
        self.coefficients.iter().map(|(s, _)| s.clone()).collect()
    }
}

/// `[x . v == r (mod m)]` with `0 <= r < m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuloParams {
    pub coefficients: Vec<(String, i64)>,
    pub residue: i64,
    pub modulus: i64,
}

impl ModuloParams {
    /// Normalizes the residue into `[0, m)`.
    pub fn new<S: Into<String>>(
        coefficients: impl IntoIterator<Item = (S, i64)>,
        residue: i64,
        modulus: i64,
    ) -> Result<Self, LibraryError> {
        if modulus < 1 {
            return Err(LibraryError::InvalidParameter(format!("modulus {modulus} < 1")));
        }
        Ok(ModuloParams {
            coefficients: coefficients.into_iter().map(|(s, v)| (s.into(), v)).collect(),
            residue: residue.rem_euclid(modulus),
            modulus,
        })
    }

    pub fn symbols(&self) -> Vec<String> {
        self.coefficients.iter().map(|(s, _)| s.clone()).collect()
    }
}

fn check_alphabet(symbols: &[String]) -> Result<(), LibraryError> {
    if symbols.is_empty() {
        return Err(LibraryError::InvalidParameter("empty input alphabet".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for s in symbols {
        if !seen.insert(s) {
            return Err(LibraryError::InvalidParameter(format!("symbol `{s}` listed twice")));
        }
    }
    Ok(())
}

/// Tower protocol for `[x(sigma) >= k]`: states `0..=k`, agents with input
/// `sigma` start at 1, everyone else at 0. Two agents on the same level
/// below `k` push the responder one level up; an agent at `k` pulls the
/// responder to `k`.
pub fn build_simple_threshold(sigma: &str, k: usize, alphabet: &[String]) -> Result<ProtocolSpec, LibraryError> {
    check_alphabet(alphabet)?;
    if k == 0 {
        return Err(LibraryError::InvalidParameter("k must be at least 1".into()));
    }
    if !alphabet.iter().any(|s| s == sigma) {
        return Err(LibraryError::UnknownSymbol(sigma.to_owned()));
    }
    let table = JointTable::from_fn(k + 1, |q1, q2| {
        if q1 == k {
            (k, k)
        } else if q1 == q2 && q1 >= 1 {
            (q1, q1 + 1)
        } else {
            (q1, q2)
        }
    });
    checked(ProtocolSpec {
        kind: ModelKind::new(Model::ImmediateObservation),
        states: (0..=k).map(|q| q.to_string()).collect(),
        messages: vec![],
        inputs: alphabet.to_vec(),
        transitions: Transitions::Joint(table),
        iota: alphabet.iter().map(|s| usize::from(s == sigma)).collect(),
        output: (0..=k).map(|q| q == k).collect(),
        message_output: vec![],
    })
}

/// One-state protocol with constant output.
pub fn build_constant(value: bool, alphabet: &[String]) -> Result<ProtocolSpec, LibraryError> {
    check_alphabet(alphabet)?;
    checked(ProtocolSpec {
        kind: ModelKind::new(Model::ImmediateObservation),
        states: vec![if value { "T" } else { "F" }.into()],
        messages: vec![],
        inputs: alphabet.to_vec(),
        transitions: Transitions::Joint(JointTable::identity(1)),
        iota: vec![0; alphabet.len()],
        output: vec![value],
        message_output: vec![],
    })
}

/// Modulo protocol as an immediate transmission protocol. Active states
/// `A<d>` hold a residue, passive states `P<b>` an output bit. An active
/// initiator always turns passive with its current output; the responder
/// absorbs the initiator's residue (adding it to its own if active).
/// Passive initiators change nothing.
pub fn build_modulo(p: &ModuloParams) -> Result<ProtocolSpec, LibraryError> {
    let symbols = p.symbols();
    check_alphabet(&symbols)?;
    let m = p.modulus as usize;
    let r = p.residue as usize;
    let active = |d: usize| d;
    let passive = |b: bool| m + b as usize;
    let table = JointTable::from_fn(m + 2, |q1, q2| {
        if q1 >= m {
            return (q1, q2);
        }
        let after = if q2 < m { (q1 + q2) % m } else { q1 };
        (passive(q1 == r), active(after))
    });
    let mut states: Vec<String> = (0..m).map(|d| format!("A{d}")).collect();
    states.extend(["P0".to_string(), "P1".to_string()]);
    let mut output: Vec<bool> = (0..m).map(|d| d == r).collect();
    output.extend([false, true]);
    checked(ProtocolSpec {
        kind: ModelKind::new(Model::ImmediateTransmission),
        states,
        messages: vec![],
        inputs: symbols,
        transitions: Transitions::Joint(table),
        iota: p.coefficients.iter().map(|(_, v)| v.rem_euclid(p.modulus) as usize).collect(),
        output,
        message_output: vec![],
    })
}

/// Averaging protocol for `[x . v >= r]` (two-way). Active states `A<d>`
/// carry data in `[lo, hi]`; passive states `P<b>` an output bit. Two
/// actives merge when the sum is representable (initiator keeps it) and
/// otherwise split it, initiator taking the ceiling. Passives copy the
/// output of any active they meet. Negative thresholds are handled by
/// negating the coefficients and complementing the output.
pub fn build_threshold_avg(p: &ThresholdParams) -> Result<ProtocolSpec, LibraryError> {
    let symbols = p.symbols();
    check_alphabet(&symbols)?;
    let (coefficients, r, flip): (Vec<i64>, i64, bool) = if p.threshold >= 0 {
        (p.coefficients.iter().map(|(_, v)| *v).collect(), p.threshold, false)
    } else {
        (p.coefficients.iter().map(|(_, v)| -*v).collect(), 1 - p.threshold, true)
    };
    let lo_init = coefficients.iter().copied().min().unwrap_or(0);
    let hi_init = coefficients.iter().copied().max().unwrap_or(0);
    let (lo, hi) = match p.range {
        Some((lo, hi)) if flip => (-hi, -lo),
        Some(range) => range,
        None => (lo_init.min(0), hi_init.max(2 * r - 1)),
    };
    for &v in &coefficients {
        if v < lo || v > hi {
            return Err(LibraryError::RangeTooSmall { value: v, lo, hi });
        }
    }
    let width = (hi - lo + 1) as usize;
    let active = |d: i64| (d - lo) as usize;
    let data = |q: usize| lo + q as i64;
    let passive = |b: bool| width + b as usize;
    let table = JointTable::from_fn(width + 2, |q1, q2| match (q1 < width, q2 < width) {
        (true, true) => {
            let s = data(q1) + data(q2);
            if (lo..=hi).contains(&s) {
                (active(s), passive(s >= r))
            } else {
                (active(s.div_euclid(2) + s.rem_euclid(2)), active(s.div_euclid(2)))
            }
        }
        (true, false) => (q1, passive(data(q1) >= r)),
        (false, true) => (passive(data(q2) >= r), q2),
        (false, false) => (q1, q2),
    });
    let mut states: Vec<String> = (lo..=hi).map(|d| format!("A{d}")).collect();
    states.extend(["P0".to_string(), "P1".to_string()]);
    let mut output: Vec<bool> = (lo..=hi).map(|d| (d >= r) != flip).collect();
    output.extend([flip, !flip]);
    checked(ProtocolSpec {
        kind: ModelKind::new(Model::TwoWay),
        states,
        messages: vec![],
        inputs: symbols,
        transitions: Transitions::Joint(table),
        iota: coefficients.iter().map(|&v| active(v)).collect(),
        output,
        message_output: vec![],
    })
}

/// Predicate families with a delayed transmission protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DelayedPredicate {
    Modulo(ModuloParams),
    SimpleThreshold { sigma: String, k: usize, alphabet: Vec<String> },
}

/// Delayed transmission protocol: an active sender ships its data in a
/// message and turns passive with its current output; passive senders emit
/// a passive message that every receiver ignores. An active receiver folds
/// active message data into its own; a passive receiver adopts it.
pub fn build_delayed_transmission(pred: &DelayedPredicate) -> Result<ProtocolSpec, LibraryError> {
    let (inputs, domain, init, combine, accept): (
        Vec<String>,
        usize,
        Vec<usize>,
        Box<dyn Fn(usize, usize) -> usize>,
        Box<dyn Fn(usize) -> bool>,
    ) = match pred {
        DelayedPredicate::Modulo(p) => {
            let m = p.modulus as usize;
            let r = p.residue as usize;
            (
                p.symbols(),
                m,
                p.coefficients.iter().map(|(_, v)| v.rem_euclid(p.modulus) as usize).collect(),
                Box::new(move |u, v| (u + v) % m),
                Box::new(move |d| d == r),
            )
        }
        DelayedPredicate::SimpleThreshold { sigma, k, alphabet } => {
            let k = *k;
            if k == 0 {
                return Err(LibraryError::InvalidParameter("k must be at least 1".into()));
            }
            if !alphabet.iter().any(|s| s == sigma) {
                return Err(LibraryError::UnknownSymbol(sigma.clone()));
            }
            (
                alphabet.clone(),
                k + 1,
                alphabet.iter().map(|s| usize::from(s == sigma)).collect(),
                Box::new(move |u, v| (u + v).min(k)),
                Box::new(move |d| d == k),
            )
        }
    };
    check_alphabet(&inputs)?;
    let passive = |b: bool| domain + b as usize;
    let silent = domain;
    let mut t = MessageTables::empty(domain + 2, domain + 1);
    for d in 0..domain {
        t.set_send(d, d, passive(accept(d)));
        for v in 0..domain {
            t.set_receive(d, v, combine(d, v));
        }
        t.set_receive(d, silent, d);
    }
    for b in [false, true] {
        t.set_send(passive(b), silent, passive(b));
        for v in 0..domain {
            t.set_receive(passive(b), v, v);
        }
        t.set_receive(passive(b), silent, passive(b));
    }
    let mut states: Vec<String> = (0..domain).map(|d| format!("A{d}")).collect();
    states.extend(["P0".to_string(), "P1".to_string()]);
    let mut messages: Vec<String> = (0..domain).map(|d| format!("a{d}")).collect();
    messages.push("p".into());
    let mut output: Vec<bool> = (0..domain).map(&accept).collect();
    output.extend([false, true]);
    checked(ProtocolSpec {
        kind: ModelKind::new(Model::DelayedTransmission),
        states,
        messages,
        inputs,
        transitions: Transitions::Messages(t),
        iota: init,
        output,
        message_output: vec![],
    })
}

/// Presence detection under delayed observation: one `k = 1` tower per
/// symbol, run with observation messages, combined by `f` over the vector
/// of presence bits (in alphabet order).
pub fn build_delayed_observation_presence(
    alphabet: &[String],
    f: impl Fn(&[bool]) -> bool,
) -> Result<ProtocolSpec, LibraryError> {
    check_alphabet(alphabet)?;
    let detectors = alphabet
        .iter()
        .map(|s| {
            let tower = build_simple_threshold(s, 1, alphabet)?;
            crate::transforms::immediate_to_delayed(&tower).map_err(|e| match e {
                crate::transforms::TransformError::InvalidModel(v) => LibraryError::Invalid(v),
                other => LibraryError::InvalidParameter(other.to_string()),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    product(&detectors, f)
}

fn family(m: Model) -> u8 {
    if m.is_interaction() {
        0
    } else if m.is_message_passing() {
        1
    } else {
        2
    }
}

/// Most general kind among the inputs, provided they lie on one chain.
fn common_kind(protocols: &[ProtocolSpec]) -> Result<ModelKind, LibraryError> {
    let mut kind = protocols[0].kind;
    for p in &protocols[1..] {
        let k = p.kind;
        let mismatch = || LibraryError::KindMismatch(kind.model.to_string(), k.model.to_string());
        if family(k.model) != family(kind.model) || k.mirrors != kind.mirrors || family(k.model) == 2 {
            return Err(mismatch());
        }
        if kind.model.specializes(k.model) {
            kind = k;
        } else if !k.model.specializes(kind.model) {
            return Err(mismatch());
        }
    }
    if family(kind.model) == 2 {
        return Err(LibraryError::KindMismatch(kind.model.to_string(), kind.model.to_string()));
    }
    Ok(kind)
}

fn tuple_name(parts: impl IntoIterator<Item = String>) -> String {
    format!("<{}>", parts.into_iter().collect::<Vec<_>>().join(";"))
}

/// Runs `protocols` side by side on the same schedule; the output is `f`
/// of the component outputs. Only component tuples reachable from initial
/// tuples are materialized.
pub fn product(protocols: &[ProtocolSpec], f: impl Fn(&[bool]) -> bool) -> Result<ProtocolSpec, LibraryError> {
    let first = protocols
        .first()
        .ok_or_else(|| LibraryError::InvalidParameter("product of zero protocols".into()))?;
    if protocols.iter().any(|p| p.inputs != first.inputs) {
        return Err(LibraryError::AlphabetMismatch);
    }
    for p in protocols {
        validate_model(p).map_err(LibraryError::Invalid)?;
    }
    let kind = common_kind(protocols)?;
    let n = protocols.len();
    let mut states: IndexSet<Vec<usize>> = IndexSet::new();
    let iota: Vec<usize> = (0..first.inputs.len())
        .map(|s| states.insert_full(protocols.iter().map(|p| p.iota[s]).collect()).0)
        .collect();

    let transitions = if kind.model.is_interaction() {
        let tables: Vec<&JointTable> = protocols
            .iter()
            .map(|p| match &p.transitions {
                Transitions::Joint(t) => t,
                _ => unreachable!("validated interaction protocol"),
            })
            .collect();
        let mut entries: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut done = 0;
        loop {
            let len = states.len();
            // Pairs (i, j) with max(i, j) >= done are new this round.
            for i in 0..len {
                for j in 0..len {
                    if i.max(j) < done {
                        continue;
                    }
                    let (a, b): (Vec<usize>, Vec<usize>) =
                        (0..n).map(|c| tables[c].get(states[i][c], states[j][c])).unzip();
                    let ia = states.insert_full(a).0;
                    let ib = states.insert_full(b).0;
                    entries.insert((i, j), (ia, ib));
                }
            }
            done = len;
            if states.len() == len {
                break;
            }
        }
        let mut t = JointTable::identity(states.len());
        for ((i, j), r) in entries {
            t.set(i, j, r);
        }
        Transitions::Joint(t)
    } else {
        let tables: Vec<&MessageTables> = protocols
            .iter()
            .map(|p| match &p.transitions {
                Transitions::Messages(t) => t,
                _ => unreachable!("validated message protocol"),
            })
            .collect();
        let mut messages: IndexSet<Vec<usize>> = IndexSet::new();
        let mut sends: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut receives: HashMap<(usize, usize), usize> = HashMap::new();
        let (mut done_s, mut done_m) = (0, 0);
        loop {
            let ls = states.len();
            for i in done_s..ls {
                let parts: Option<Vec<(usize, usize)>> =
                    (0..n).map(|c| tables[c].send(states[i][c])).collect();
                if let Some(parts) = parts {
                    let (msg, next): (Vec<usize>, Vec<usize>) = parts.into_iter().unzip();
                    let im = messages.insert_full(msg).0;
                    let is = states.insert_full(next).0;
                    sends.insert(i, (im, is));
                }
            }
            let lm_now = messages.len();
            for i in 0..states.len() {
                for m in 0..lm_now {
                    if i < done_s && m < done_m {
                        continue;
                    }
                    let next: Option<Vec<usize>> =
                        (0..n).map(|c| tables[c].receive(states[i][c], messages[m][c])).collect();
                    if let Some(next) = next {
                        let is = states.insert_full(next).0;
                        receives.insert((i, m), is);
                    }
                }
            }
            done_s = ls;
            done_m = lm_now;
            if done_s == states.len() && done_m == messages.len() {
                break;
            }
        }
        let mut t = MessageTables::empty(states.len(), messages.len());
        for (i, (m, s)) in sends {
            t.set_send(i, m, s);
        }
        for ((i, m), s) in receives {
            t.set_receive(i, m, s);
        }
        let names: Vec<String> = messages
            .iter()
            .map(|tuple| tuple_name((0..n).map(|c| protocols[c].messages[tuple[c]].clone())))
            .collect();
        return finish(protocols, kind, states, names, Transitions::Messages(t), iota, f);
    };
    finish(protocols, kind, states, vec![], transitions, iota, f)
}

fn finish(
    protocols: &[ProtocolSpec],
    kind: ModelKind,
    states: IndexSet<Vec<usize>>,
    messages: Vec<String>,
    transitions: Transitions,
    iota: Vec<usize>,
    f: impl Fn(&[bool]) -> bool,
) -> Result<ProtocolSpec, LibraryError> {
    let n = protocols.len();
    let names = states
        .iter()
        .map(|tuple| tuple_name((0..n).map(|c| protocols[c].states[tuple[c]].clone())))
        .collect();
    let output = states
        .iter()
        .map(|tuple| f(&(0..n).map(|c| protocols[c].output[tuple[c]]).collect::<Vec<_>>()))
        .collect();
    checked(ProtocolSpec {
        kind,
        states: names,
        messages,
        inputs: protocols[0].inputs.clone(),
        transitions,
        iota,
        output,
        message_output: vec![],
    })
}

/// Set-union protocol with unbounded state: an agent's state is the set of
/// input symbols it has heard of, kept as a bitmask. Sending emits the set;
/// receiving unions it in. Output is `accept[set]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetUnion {
    pub symbols: Vec<String>,
    pub accept: Vec<bool>,
}

pub const SET_UNION_MAX_SYMBOLS: usize = 20;

/// Builds the set-union protocol; `f` sees the membership vector of a set.
pub fn build_set_union(symbols: &[String], f: impl Fn(&[bool]) -> bool) -> Result<SetUnion, LibraryError> {
    check_alphabet(symbols)?;
    if symbols.len() > SET_UNION_MAX_SYMBOLS {
        return Err(LibraryError::InvalidParameter(format!(
            "at most {SET_UNION_MAX_SYMBOLS} symbols supported"
        )));
    }
    let d = symbols.len();
    let accept = (0..1u64 << d)
        .map(|mask| f(&(0..d).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>()))
        .collect();
    Ok(SetUnion { symbols: symbols.to_vec(), accept })
}

impl SetUnion {
    pub fn initial(&self, symbol: &str) -> Option<u64> {
        self.symbols.iter().position(|s| s == symbol).map(|i| 1 << i)
    }

    pub fn send(&self, state: u64) -> u64 {
        state
    }

    pub fn receive(&self, state: u64, message: u64) -> u64 {
        state | message
    }

    pub fn output(&self, state: u64) -> bool {
        self.accept[state as usize]
    }

    pub fn set_names(&self, state: u64) -> Vec<&str> {
        (0..self.symbols.len())
            .filter(|i| state >> i & 1 == 1)
            .map(|i| self.symbols[i].as_str())
            .collect()
    }
}
