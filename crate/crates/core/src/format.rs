//! Text format for protocol files.
//!
//! ```text
//! [model]
//! kind = immediate-observation
//! mirrors = false
//!
//! [states]
//! 0 1 2
//!
//! [inputs]
//! a b
//!
//! [delta]
//! 1 1 -> 1 2
//! 2 0 -> 2 2
//!
//! [iota]
//! a = 1
//! b = 0
//!
//! [output]
//! 0 = 0
//! 1 = 0
//! 2 = 1
//! ```
//!
//! Interaction models list joint-table entries `q1 q2 -> q1' q2'`; omitted
//! pairs are the identity. Message models use `send q -> m q'` and
//! `recv q m -> q'`. The abstract model uses `rule a b -> c d`. `#` starts a
//! comment.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    JointTable, MessageTables, Model, ModelKind, ProtocolSpec, RawRule, Transitions,
};
use crate::multiset::is_valid_name;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Section {
    Model,
    States,
    Messages,
    Inputs,
    Delta,
    Iota,
    Output,
}

impl Section {
    fn from_header(h: &str) -> Option<Section> {
        Some(match h {
            "model" => Section::Model,
            "states" => Section::States,
            "messages" => Section::Messages,
            "inputs" => Section::Inputs,
            "delta" => Section::Delta,
            "iota" => Section::Iota,
            "output" => Section::Output,
            _ => return None,
        })
    }
}

/// Parses a protocol file. Symbols used in `[delta]`, `[iota]` and
/// `[output]` must be declared in `[states]`, `[messages]` or `[inputs]`.
pub fn parse_protocol(text: &str) -> Result<ProtocolSpec, ParseError> {
    let mut lines: HashMap<Section, Vec<(usize, &str)>> = HashMap::new();
    let mut current: Option<Section> = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let s = Section::from_header(h.trim())
                .ok_or_else(|| ParseError { line: n, message: format!("unknown section [{h}]") })?;
            if lines.contains_key(&s) {
                return err(n, format!("duplicate section [{h}]"));
            }
            lines.insert(s, Vec::new());
            current = Some(s);
            continue;
        }
        match current {
            Some(s) => lines.get_mut(&s).unwrap().push((n, line)),
            None => return err(n, "content before the first section header"),
        }
    }
    let section = |s: Section| lines.get(&s).map(Vec::as_slice).unwrap_or(&[]);

    let mut model = None;
    let mut mirrors = None;
    for &(n, l) in section(Section::Model) {
        let (k, v) = key_value(n, l)?;
        match k {
            "kind" => {
                model = Some(
                    Model::from_keyword(v)
                        .ok_or_else(|| ParseError { line: n, message: format!("unknown model kind `{v}`") })?,
                )
            }
            "mirrors" => {
                mirrors = Some(match v {
                    "true" => true,
                    "false" => false,
                    _ => return err(n, format!("mirrors must be true or false, got `{v}`")),
                })
            }
            _ => return err(n, format!("unknown key `{k}` in [model]")),
        }
    }
    let model = model.ok_or(ParseError {
        line: 0,
        message: "missing `kind` in [model]".into(),
    })?;
    let kind = ModelKind::with_mirrors(model, mirrors.unwrap_or(model.default_mirrors()));

    let states = declare(section(Section::States))?;
    let messages = declare(section(Section::Messages))?;
    let inputs = declare(section(Section::Inputs))?;
    let state_ix: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let msg_ix: HashMap<&str, usize> = messages.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let input_ix: HashMap<&str, usize> = inputs.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    for m in &messages {
        if state_ix.contains_key(m.as_str()) {
            return err(0, format!("`{m}` declared both as a state and a message"));
        }
    }
    let state = |n: usize, s: &str| -> Result<usize, ParseError> {
        state_ix
            .get(s)
            .copied()
            .ok_or_else(|| ParseError { line: n, message: format!("undeclared state `{s}`") })
    };
    let message = |n: usize, s: &str| -> Result<usize, ParseError> {
        msg_ix
            .get(s)
            .copied()
            .ok_or_else(|| ParseError { line: n, message: format!("undeclared message `{s}`") })
    };
    let element = |n: usize, s: &str| -> Result<usize, ParseError> {
        state_ix
            .get(s)
            .copied()
            .or_else(|| msg_ix.get(s).map(|&m| states.len() + m))
            .ok_or_else(|| ParseError { line: n, message: format!("undeclared element `{s}`") })
    };

    let transitions = if model.is_interaction() {
        if !messages.is_empty() {
            return err(0, format!("{model} protocols declare no messages"));
        }
        let mut table = JointTable::identity(states.len());
        let mut set = vec![false; states.len() * states.len()];
        for &(n, l) in section(Section::Delta) {
            let (lhs, rhs) = arrow(n, l)?;
            let (lhs, rhs) = (tokens(&lhs), tokens(&rhs));
            if lhs.len() != 2 || rhs.len() != 2 {
                return err(n, "expected `q1 q2 -> q1' q2'`");
            }
            let (a, b) = (state(n, lhs[0])?, state(n, lhs[1])?);
            let r = (state(n, rhs[0])?, state(n, rhs[1])?);
            let slot = a * states.len() + b;
            if set[slot] && table.get(a, b) != r {
                return err(n, format!("conflicting entry for ({}, {})", lhs[0], lhs[1]));
            }
            set[slot] = true;
            table.set(a, b, r);
        }
        Transitions::Joint(table)
    } else if model.is_message_passing() {
        let mut t = MessageTables::empty(states.len(), messages.len());
        for &(n, l) in section(Section::Delta) {
            let (lhs, rhs) = arrow(n, l)?;
            let (lhs, rhs) = (tokens(&lhs), tokens(&rhs));
            match lhs.first().copied() {
                Some("send") if lhs.len() == 2 && rhs.len() == 2 => {
                    let q = state(n, lhs[1])?;
                    let m = message(n, rhs[0])?;
                    let next = state(n, rhs[1])?;
                    if t.send(q).is_some_and(|x| x != (m, next)) {
                        return err(n, format!("conflicting send from `{}`", lhs[1]));
                    }
                    t.set_send(q, m, next);
                }
                Some("recv") if lhs.len() == 3 && rhs.len() == 1 => {
                    let q = state(n, lhs[1])?;
                    let m = message(n, lhs[2])?;
                    let next = state(n, rhs[0])?;
                    if t.receive(q, m).is_some_and(|x| x != next) {
                        return err(n, format!("conflicting receive for `{} {}`", lhs[1], lhs[2]));
                    }
                    t.set_receive(q, m, next);
                }
                _ => return err(n, "expected `send q -> m q'` or `recv q m -> q'`"),
            }
        }
        Transitions::Messages(t)
    } else {
        let mut rules = Vec::new();
        for &(n, l) in section(Section::Delta) {
            let (lhs, rhs) = arrow(n, l)?;
            let lhs = tokens(&lhs);
            if lhs.first() != Some(&"rule") || lhs.len() < 2 {
                return err(n, "expected `rule a b -> c d`");
            }
            rules.push(RawRule {
                lhs: lhs[1..].iter().map(|s| element(n, s)).collect::<Result<_, _>>()?,
                rhs: tokens(&rhs).iter().map(|s| element(n, s)).collect::<Result<_, _>>()?,
            });
        }
        Transitions::Rules(rules)
    };

    let mut iota = vec![None; inputs.len()];
    for &(n, l) in section(Section::Iota) {
        let (k, v) = key_value(n, l)?;
        let i = *input_ix
            .get(k)
            .ok_or_else(|| ParseError { line: n, message: format!("undeclared input `{k}`") })?;
        if iota[i].is_some() {
            return err(n, format!("input `{k}` mapped twice"));
        }
        iota[i] = Some(state(n, v)?);
    }
    let iota = iota
        .into_iter()
        .enumerate()
        .map(|(i, q)| q.ok_or_else(|| ParseError { line: 0, message: format!("no initial state for input `{}`", inputs[i]) }))
        .collect::<Result<Vec<_>, _>>()?;

    let abstract_model = model == Model::Abstract;
    let mut output = vec![None; states.len()];
    let mut message_output = vec![None; if abstract_model { messages.len() } else { 0 }];
    for &(n, l) in section(Section::Output) {
        let (k, v) = key_value(n, l)?;
        let b = match v {
            "0" => false,
            "1" => true,
            _ => return err(n, format!("output must be 0 or 1, got `{v}`")),
        };
        let slot = if let Some(&q) = state_ix.get(k) {
            &mut output[q]
        } else if let (true, Some(&m)) = (abstract_model, msg_ix.get(k)) {
            &mut message_output[m]
        } else {
            return err(n, format!("undeclared state `{k}`"));
        };
        if slot.is_some() {
            return err(n, format!("output of `{k}` given twice"));
        }
        *slot = Some(b);
    }
    let names: Vec<&String> = states.iter().chain(if abstract_model { messages.iter() } else { [].iter() }).collect();
    let collected: Vec<bool> = output
        .iter()
        .chain(&message_output)
        .enumerate()
        .map(|(i, o)| o.ok_or_else(|| ParseError { line: 0, message: format!("no output for `{}`", names[i]) }))
        .collect::<Result<_, _>>()?;
    let (output, message_output) = collected.split_at(states.len());

    Ok(ProtocolSpec {
        kind,
        states,
        messages,
        inputs,
        transitions,
        iota,
        output: output.to_vec(),
        message_output: message_output.to_vec(),
    })
}

fn key_value(n: usize, l: &str) -> Result<(&str, &str), ParseError> {
    match l.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => err(n, "expected `key = value`"),
    }
}

fn arrow(n: usize, l: &str) -> Result<(String, String), ParseError> {
    match l.split_once("->") {
        Some((a, b)) => Ok((a.to_owned(), b.to_owned())),
        None => err(n, "expected `->`"),
    }
}

fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn declare(lines: &[(usize, &str)]) -> Result<Vec<String>, ParseError> {
    let mut out: Vec<String> = Vec::new();
    for &(n, l) in lines {
        for t in l.split_whitespace() {
            if !is_valid_name(t) {
                return err(n, format!("invalid name `{t}`"));
            }
            if out.iter().any(|x| x == t) {
                return err(n, format!("`{t}` declared twice"));
            }
            out.push(t.to_owned());
        }
    }
    Ok(out)
}

/// Renders a spec in the canonical text form. `parse_protocol` inverts it.
pub fn emit_protocol(p: &ProtocolSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[model]");
    let _ = writeln!(s, "kind = {}", p.kind.model);
    let _ = writeln!(s, "mirrors = {}", p.kind.mirrors);
    let _ = writeln!(s, "\n[states]");
    for q in &p.states {
        let _ = writeln!(s, "{q}");
    }
    if !p.messages.is_empty() {
        let _ = writeln!(s, "\n[messages]");
        for m in &p.messages {
            let _ = writeln!(s, "{m}");
        }
    }
    let _ = writeln!(s, "\n[inputs]");
    for i in &p.inputs {
        let _ = writeln!(s, "{i}");
    }
    let _ = writeln!(s, "\n[delta]");
    let nq = p.states.len();
    let el = |e: usize| {
        if e < nq {
            p.states[e].as_str()
        } else {
            p.messages[e - nq].as_str()
        }
    };
    match &p.transitions {
        Transitions::Joint(t) => {
            for ((a, b), (c, d)) in t.non_identity() {
                let _ = writeln!(s, "{} {} -> {} {}", p.states[a], p.states[b], p.states[c], p.states[d]);
            }
        }
        Transitions::Messages(t) => {
            for q in 0..nq {
                if let Some((m, next)) = t.send(q) {
                    let _ = writeln!(s, "send {} -> {} {}", p.states[q], p.messages[m], p.states[next]);
                }
            }
            for q in 0..nq {
                for m in 0..t.messages() {
                    if let Some(next) = t.receive(q, m) {
                        let _ = writeln!(s, "recv {} {} -> {}", p.states[q], p.messages[m], p.states[next]);
                    }
                }
            }
        }
        Transitions::Rules(rules) => {
            for r in rules {
                let lhs: Vec<&str> = r.lhs.iter().map(|&e| el(e)).collect();
                let rhs: Vec<&str> = r.rhs.iter().map(|&e| el(e)).collect();
                let _ = writeln!(s, "rule {} -> {}", lhs.join(" "), rhs.join(" "));
            }
        }
    }
    let _ = writeln!(s, "\n[iota]");
    for (i, &q) in p.iota.iter().enumerate() {
        let _ = writeln!(s, "{} = {}", p.inputs[i], p.states[q]);
    }
    let _ = writeln!(s, "\n[output]");
    for (q, &b) in p.output.iter().enumerate() {
        let _ = writeln!(s, "{} = {}", p.states[q], b as u8);
    }
    for (m, &b) in p.message_output.iter().enumerate() {
        let _ = writeln!(s, "{} = {}", p.messages[m], b as u8);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOWER: &str = "
        # tower for k = 2
        [model]
        kind = immediate-observation

        [states]
        0 1
        2
        [inputs]
        a b
        [delta]
        1 1 -> 1 2
        2 0 -> 2 2   # observe the top
        2 1 -> 2 2
        [iota]
        a = 1
        b = 0
        [output]
        0 = 0
        1 = 0
        2 = 1
    ";

    #[test]
    fn parses_interaction_protocol() {
        let p = parse_protocol(TOWER).unwrap();
        assert_eq!(p.kind, ModelKind::new(Model::ImmediateObservation));
        assert_eq!(p.states, ["0", "1", "2"]);
        assert_eq!(p.iota, [1, 0]);
        let Transitions::Joint(t) = &p.transitions else { panic!() };
        assert_eq!(t.get(1, 1), (1, 2));
        assert_eq!(t.get(0, 1), (0, 1));
        assert!(p.validate().is_ok());
        let again = parse_protocol(&emit_protocol(&p)).unwrap();
        assert_eq!(again, p);
        assert_eq!(emit_protocol(&again), emit_protocol(&p));
    }

    #[test]
    fn undeclared_symbol_is_line_numbered() {
        let text = TOWER.replace("2 1 -> 2 2", "2 7 -> 2 2");
        let e = parse_protocol(&text).unwrap_err();
        assert_eq!(e.line, 14);
        assert!(e.message.contains("`7`"), "{e}");
    }

    #[test]
    fn empty_delta_is_valid() {
        let text = "[model]\nkind = two-way\n[states]\nx\n[inputs]\na\n[delta]\n[iota]\na = x\n[output]\nx = 1\n";
        let p = parse_protocol(text).unwrap();
        assert!(p.validate().is_ok());
        assert!(p.compile().unwrap().rules.is_empty());
    }

    #[test]
    fn message_protocol_round_trip() {
        let text = "
            [model]
            kind = queued-transmission
            [states]
            q q'
            [messages]
            m
            [inputs]
            s
            [delta]
            send q -> m q'
            send q' -> m q'
            recv q m -> q'
            [iota]
            s = q
            [output]
            q = 0
            q' = 1
        ";
        let p = parse_protocol(text).unwrap();
        assert!(p.kind.mirrors);
        assert!(p.validate().is_ok());
        assert_eq!(parse_protocol(&emit_protocol(&p)).unwrap(), p);
        let bad = text.replace("recv q m -> q'", "recv q z -> q'");
        assert!(parse_protocol(&bad).unwrap_err().message.contains("undeclared message `z`"));
    }

    #[test]
    fn abstract_protocol() {
        let text = "
            [model]
            kind = abstract
            [states]
            x y
            [messages]
            m
            [inputs]
            a
            [delta]
            rule x x -> y m
            rule m ->
            [iota]
            a = x
            [output]
            x = 0
            y = 1
            m = 1
        ";
        let p = parse_protocol(text).unwrap();
        assert_eq!(p.message_output, [true]);
        let Transitions::Rules(r) = &p.transitions else { panic!() };
        assert_eq!(r[0].rhs, [1, 2]);
        assert!(r[1].rhs.is_empty());
        assert_eq!(parse_protocol(&emit_protocol(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_protocol("[states]\nx\n").is_err());
        assert!(parse_protocol("x\n[model]\nkind = two-way\n").is_err());
        let missing_output = TOWER.replace("2 = 1", "");
        assert!(parse_protocol(&missing_output).unwrap_err().message.contains("no output for `2`"));
        let conflict = TOWER.replace("2 1 -> 2 2", "2 1 -> 2 2\n2 1 -> 1 1");
        assert!(parse_protocol(&conflict).unwrap_err().message.contains("conflicting"));
    }
}
