//! Ground-truth predicates: explicit semilinear sets, quantifier-free
//! threshold/modulo formulas, counting predicates, and brute-force
//! equivalence checking over bounded boxes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::multiset::Multiset;

/// Input counts keyed by symbol name. Absent symbols count zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Profile(BTreeMap<String, u64>);

impl Profile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<S: Into<String>, I: IntoIterator<Item = (S, u64)>>(pairs: I) -> Self {
        let mut p = Profile::new();
        for (s, n) in pairs {
            p.set(s, n);
        }
        p
    }

    /// Converts a multiset whose element ids index `names`.
    pub fn from_multiset(x: &Multiset, names: &[String]) -> Self {
        Profile(
            x.entries()
                .iter()
                .map(|&(e, n)| (names[e.index()].clone(), n))
                .collect(),
        )
    }

    pub fn get(&self, symbol: &str) -> u64 {
        self.0.get(symbol).copied().unwrap_or(0)
    }

    pub fn set(&mut self, symbol: impl Into<String>, n: u64) {
        let s = symbol.into();
        if n == 0 {
            self.0.remove(&s);
        } else {
            self.0.insert(s, n);
        }
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    /// Symbols with nonzero count.
    pub fn present(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn vector(&self, symbols: &[String]) -> Vec<u64> {
        symbols.iter().map(|s| self.get(s)).collect()
    }

    /// Parses `{a:3, b:1}`; any name is accepted.
    pub fn parse(text: &str) -> Result<Profile, PredicateError> {
        let t = text.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| PredicateError::Syntax(format!("expected `{{...}}`, got `{t}`")))?;
        let mut p = Profile::new();
        for item in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, n) = match item.rsplit_once(':') {
                Some((a, b)) => (
                    a.trim(),
                    b.trim()
                        .parse::<u64>()
                        .map_err(|_| PredicateError::Syntax(format!("bad count in `{item}`")))?,
                ),
                None => (item, 1),
            };
            let old = p.get(name);
            p.set(name, old + n);
        }
        Ok(p)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (s, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}:{n}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredicateError {
    #[error("period vectors must be nonzero")]
    ZeroPeriod,
    #[error("vector has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("modulus must be at least 1, got {0}")]
    Modulus(i64),
    #[error("syntax error: {0}")]
    Syntax(String),
}

/// `{ base + k_1 p_1 + ... + k_n p_n | k_i >= 0 }` over nonnegative vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSet {
    base: Vec<u64>,
    periods: Vec<Vec<u64>>,
}

impl LinearSet {
    pub fn new(base: Vec<u64>, periods: Vec<Vec<u64>>) -> Result<Self, PredicateError> {
        let mut uniq: Vec<Vec<u64>> = Vec::new();
        for p in periods {
            if p.len() != base.len() {
                return Err(PredicateError::Dimension { expected: base.len(), got: p.len() });
            }
            if p.iter().all(|&v| v == 0) {
                return Err(PredicateError::ZeroPeriod);
            }
            if !uniq.contains(&p) {
                uniq.push(p);
            }
        }
        Ok(LinearSet { base, periods: uniq })
    }

    pub fn base(&self) -> &[u64] {
        &self.base
    }

    pub fn periods(&self) -> &[Vec<u64>] {
        &self.periods
    }

    pub fn dimension(&self) -> usize {
        self.base.len()
    }

    /// True iff `x - base` is a nonnegative integer combination of the periods.
    pub fn contains(&self, x: &[u64]) -> bool {
        if x.len() != self.base.len() {
            return false;
        }
        let Some(residual) = x
            .iter()
            .zip(&self.base)
            .map(|(&a, &b)| a.checked_sub(b))
            .collect::<Option<Vec<u64>>>()
        else {
            return false;
        };
        let mut order: Vec<&Vec<u64>> = self.periods.iter().collect();
        order.sort_by_key(|p| std::cmp::Reverse(p.iter().sum::<u64>()));
        let mut failed = HashSet::new();
        decompose(&residual, &order, 0, &mut failed)
    }
}

// Periods are nonnegative and nonzero, so every partial sum only grows and
// the residual shrinks; the memo of failed (index, residual) pairs is finite.
fn decompose(
    residual: &[u64],
    periods: &[&Vec<u64>],
    i: usize,
    failed: &mut HashSet<(usize, Vec<u64>)>,
) -> bool {
    if residual.iter().all(|&v| v == 0) {
        return true;
    }
    if i == periods.len() {
        return false;
    }
    if failed.contains(&(i, residual.to_vec())) {
        return false;
    }
    let p = periods[i];
    let max_k = residual
        .iter()
        .zip(p.iter())
        .filter(|(_, &pv)| pv > 0)
        .map(|(&r, &pv)| r / pv)
        .min()
        .unwrap_or(0);
    for k in (0..=max_k).rev() {
        let next: Vec<u64> = residual.iter().zip(p.iter()).map(|(&r, &pv)| r - k * pv).collect();
        if decompose(&next, periods, i + 1, failed) {
            return true;
        }
    }
    failed.insert((i, residual.to_vec()));
    false
}

/// Membership in a linear set.
pub fn member_linear(l: &LinearSet, x: &[u64]) -> bool {
    l.contains(x)
}

/// A finite union of linear sets over a named symbol order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemilinearSet {
    pub symbols: Vec<String>,
    pub components: Vec<LinearSet>,
}

impl SemilinearSet {
    pub fn new(symbols: Vec<String>, components: Vec<LinearSet>) -> Result<Self, PredicateError> {
        for c in &components {
            if c.dimension() != symbols.len() {
                return Err(PredicateError::Dimension { expected: symbols.len(), got: c.dimension() });
            }
        }
        Ok(SemilinearSet { symbols, components })
    }

    pub fn contains(&self, x: &[u64]) -> bool {
        self.components.iter().any(|l| l.contains(x))
    }

    pub fn contains_profile(&self, x: &Profile) -> bool {
        // Symbols outside the set's coordinates must be absent.
        if x.present().any(|s| !self.symbols.iter().any(|t| t == s)) {
            return false;
        }
        self.contains(&x.vector(&self.symbols))
    }
}

/// Membership in a semilinear set.
pub fn member(s: &SemilinearSet, x: &[u64]) -> bool {
    s.contains(x)
}

/// Non-semilinear counting properties, kept for negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountProperty {
    PowerOfTwo,
    Prime,
    Square,
}

impl CountProperty {
    pub fn holds(self, n: u64) -> bool {
        match self {
            CountProperty::PowerOfTwo => n.is_power_of_two(),
            CountProperty::Prime => n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0),
            CountProperty::Square => {
                let r = (n as f64).sqrt() as u64;
                (r.saturating_sub(1)..=r + 1).any(|s| s * s == n)
            }
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            CountProperty::PowerOfTwo => "pow2",
            CountProperty::Prime => "prime",
            CountProperty::Square => "square",
        }
    }
}

/// Quantifier-free predicate over input counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredicateExpr {
    Const(bool),
    /// `x . v >= r`
    Threshold { coefficients: Vec<(String, i64)>, threshold: i64 },
    /// `x . v == r (mod m)`, with `0 <= r < m`.
    Modulo { coefficients: Vec<(String, i64)>, residue: i64, modulus: i64 },
    /// `x(symbol) >= k`
    SimpleThreshold { symbol: String, k: u64 },
    Member(SemilinearSet),
    /// Table over counts of `symbols` clamped at `k`; true on listed vectors.
    CountK { symbols: Vec<String>, k: u64, accept: BTreeSet<Vec<u64>> },
    NonSemilinear { property: CountProperty, symbol: String },
    And(Vec<PredicateExpr>),
    Or(Vec<PredicateExpr>),
    Not(Box<PredicateExpr>),
}

impl PredicateExpr {
    pub fn threshold<S: Into<String>>(coefficients: impl IntoIterator<Item = (S, i64)>, r: i64) -> Self {
        PredicateExpr::Threshold {
            coefficients: coefficients.into_iter().map(|(s, v)| (s.into(), v)).collect(),
            threshold: r,
        }
    }

    /// Modulo predicate with the residue normalized into `[0, m)`.
    pub fn modulo<S: Into<String>>(
        coefficients: impl IntoIterator<Item = (S, i64)>,
        r: i64,
        m: i64,
    ) -> Result<Self, PredicateError> {
        if m < 1 {
            return Err(PredicateError::Modulus(m));
        }
        Ok(PredicateExpr::Modulo {
            coefficients: coefficients.into_iter().map(|(s, v)| (s.into(), v)).collect(),
            residue: r.rem_euclid(m),
            modulus: m,
        })
    }

    pub fn at_least(symbol: impl Into<String>, k: u64) -> Self {
        PredicateExpr::SimpleThreshold { symbol: symbol.into(), k }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        PredicateExpr::Not(Box::new(self))
    }

    pub fn and(self, other: PredicateExpr) -> Self {
        PredicateExpr::And(vec![self, other])
    }

    pub fn or(self, other: PredicateExpr) -> Self {
        PredicateExpr::Or(vec![self, other])
    }

    pub fn eval(&self, x: &Profile) -> bool {
        match self {
            PredicateExpr::Const(b) => *b,
            PredicateExpr::Threshold { coefficients, threshold } => dot(coefficients, x) >= *threshold as i128,
            PredicateExpr::Modulo { coefficients, residue, modulus } => {
                dot(coefficients, x).rem_euclid(*modulus as i128) == *residue as i128
            }
            PredicateExpr::SimpleThreshold { symbol, k } => x.get(symbol) >= *k,
            PredicateExpr::Member(s) => s.contains_profile(x),
            PredicateExpr::CountK { symbols, k, accept } => {
                count_k_eval(|v| accept.contains(v), symbols, *k, x)
            }
            PredicateExpr::NonSemilinear { property, symbol } => property.holds(x.get(symbol)),
            PredicateExpr::And(es) => es.iter().all(|e| e.eval(x)),
            PredicateExpr::Or(es) => es.iter().any(|e| e.eval(x)),
            PredicateExpr::Not(e) => !e.eval(x),
        }
    }

    /// Every symbol the expression mentions.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            PredicateExpr::Const(_) => {}
            PredicateExpr::Threshold { coefficients, .. } | PredicateExpr::Modulo { coefficients, .. } => {
                out.extend(coefficients.iter().map(|(s, _)| s.clone()))
            }
            PredicateExpr::SimpleThreshold { symbol, .. } | PredicateExpr::NonSemilinear { symbol, .. } => {
                out.insert(symbol.clone());
            }
            PredicateExpr::Member(s) => out.extend(s.symbols.iter().cloned()),
            PredicateExpr::CountK { symbols, .. } => out.extend(symbols.iter().cloned()),
            PredicateExpr::And(es) | PredicateExpr::Or(es) => es.iter().for_each(|e| e.collect_symbols(out)),
            PredicateExpr::Not(e) => e.collect_symbols(out),
        }
    }
}

fn dot(coefficients: &[(String, i64)], x: &Profile) -> i128 {
    coefficients
        .iter()
        .map(|(s, v)| *v as i128 * x.get(s) as i128)
        .sum()
}

/// Applies `table` to the counts of `symbols` in `x` clamped at `k`.
pub fn count_k_eval(table: impl Fn(&[u64]) -> bool, symbols: &[String], k: u64, x: &Profile) -> bool {
    assert!(k >= 1, "count bound must be positive");
    let clamped: Vec<u64> = symbols.iter().map(|s| x.get(s).min(k)).collect();
    table(&clamped)
}

/// True iff every symbol of `sub` occurs at least `k` times in `x` and no
/// other symbol occurs.
pub fn k_rich<S: AsRef<str>>(x: &Profile, sub: &[S], k: u64) -> bool {
    assert!(!sub.is_empty(), "subalphabet must be nonempty");
    sub.iter().all(|s| x.get(s.as_ref()) >= k) && x.present().all(|s| sub.iter().any(|t| t.as_ref() == s))
}

/// Outcome of a bounded equivalence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equivalence {
    pub equivalent: bool,
    pub counterexample: Option<Profile>,
    pub checked: usize,
}

/// Compares two predicates on every vector with coordinates in
/// `0..per_axis` over `symbols`, in lexicographic order.
pub fn brute_equivalent(a: &PredicateExpr, b: &PredicateExpr, symbols: &[String], per_axis: u64) -> Equivalence {
    brute_equivalent_where(a, b, symbols, per_axis, |_| true)
}

/// [`brute_equivalent`] restricted to vectors accepted by `filter`.
pub fn brute_equivalent_where(
    a: &PredicateExpr,
    b: &PredicateExpr,
    symbols: &[String],
    per_axis: u64,
    filter: impl Fn(&Profile) -> bool,
) -> Equivalence {
    let mut checked = 0;
    for v in box_vectors(symbols.len(), per_axis) {
        let x = Profile::from_pairs(symbols.iter().cloned().zip(v));
        if !filter(&x) {
            continue;
        }
        checked += 1;
        if a.eval(&x) != b.eval(&x) {
            return Equivalence { equivalent: false, counterexample: Some(x), checked };
        }
    }
    Equivalence { equivalent: true, counterexample: None, checked }
}

/// Checks `k`-similarity of `a` and `b` with respect to `sub` on the box.
pub fn k_similar(
    a: &PredicateExpr,
    b: &PredicateExpr,
    symbols: &[String],
    sub: &[String],
    k: u64,
    per_axis: u64,
) -> Equivalence {
    brute_equivalent_where(a, b, symbols, per_axis, |x| k_rich(x, sub, k))
}

/// All vectors of length `dim` with entries in `0..per_axis`, lexicographic.
pub fn box_vectors(dim: usize, per_axis: u64) -> impl Iterator<Item = Vec<u64>> {
    let total = if dim == 0 { 1 } else { (per_axis as usize).pow(dim as u32) };
    (0..total).map(move |mut i| {
        let mut v = vec![0u64; dim];
        for slot in v.iter_mut().rev() {
            *slot = (i % per_axis as usize) as u64;
            i /= per_axis as usize;
        }
        v
    })
}

// ---------------------------------------------------------------------------
// s-expression syntax

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines() {
        let line = line.split(';').next().unwrap_or("");
        for ch in line.chars() {
            match ch {
                '(' | ')' => {
                    if !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                    }
                    out.push(ch.to_string());
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                    }
                }
                c => cur.push(c),
            }
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    out
}

fn read_sexp(tokens: &[String], pos: &mut usize) -> Result<Sexp, PredicateError> {
    let t = tokens
        .get(*pos)
        .ok_or_else(|| PredicateError::Syntax("unexpected end of input".into()))?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(read_sexp(tokens, pos)?),
                    None => return Err(PredicateError::Syntax("unclosed `(`".into())),
                }
            }
        }
        ")" => Err(PredicateError::Syntax("unexpected `)`".into())),
        a => Ok(Sexp::Atom(a.to_owned())),
    }
}

fn syntax<T>(msg: impl Into<String>) -> Result<T, PredicateError> {
    Err(PredicateError::Syntax(msg.into()))
}

fn atom(s: &Sexp) -> Result<&str, PredicateError> {
    match s {
        Sexp::Atom(a) => Ok(a),
        Sexp::List(_) => syntax("expected an atom"),
    }
}

fn int<T: std::str::FromStr>(s: &Sexp) -> Result<T, PredicateError> {
    let a = atom(s)?;
    a.parse().or_else(|_| syntax(format!("expected a number, got `{a}`")))
}

fn tagged<'a>(s: &'a Sexp, tag: &str) -> Result<&'a [Sexp], PredicateError> {
    match s {
        Sexp::List(items) if matches!(items.first(), Some(Sexp::Atom(a)) if a == tag) => Ok(&items[1..]),
        _ => syntax(format!("expected `({tag} ...)`")),
    }
}

fn coefficients(s: &Sexp) -> Result<Vec<(String, i64)>, PredicateError> {
    tagged(s, "v")?
        .iter()
        .map(|pair| match pair {
            Sexp::List(p) if p.len() == 2 => Ok((atom(&p[0])?.to_owned(), int(&p[1])?)),
            _ => syntax("expected `(symbol coefficient)`"),
        })
        .collect()
}

fn numbers(items: &[Sexp]) -> Result<Vec<u64>, PredicateError> {
    items.iter().map(int).collect()
}

fn symbol_list(s: &Sexp) -> Result<Vec<String>, PredicateError> {
    tagged(s, "symbols")?.iter().map(|a| atom(a).map(str::to_owned)).collect()
}

fn to_expr(s: &Sexp) -> Result<PredicateExpr, PredicateError> {
    match s {
        Sexp::Atom(a) => match a.as_str() {
            "true" => Ok(PredicateExpr::Const(true)),
            "false" => Ok(PredicateExpr::Const(false)),
            _ => syntax(format!("unexpected atom `{a}`")),
        },
        Sexp::List(items) => {
            let (head, args) = items.split_first().ok_or_else(|| PredicateError::Syntax("empty list".into()))?;
            let arity = |n: usize| -> Result<(), PredicateError> {
                if args.len() == n {
                    Ok(())
                } else {
                    syntax(format!("`{}` takes {n} arguments", atom(head).unwrap_or("?")))
                }
            };
            match atom(head)? {
                "ge" => {
                    arity(2)?;
                    Ok(PredicateExpr::Threshold { coefficients: coefficients(&args[0])?, threshold: int(&args[1])? })
                }
                "mod" => {
                    arity(3)?;
                    PredicateExpr::modulo(coefficients(&args[0])?, int(&args[1])?, int(&args[2])?)
                }
                "count" => {
                    arity(2)?;
                    Ok(PredicateExpr::SimpleThreshold { symbol: atom(&args[0])?.to_owned(), k: int(&args[1])? })
                }
                "and" => Ok(PredicateExpr::And(args.iter().map(to_expr).collect::<Result<_, _>>()?)),
                "or" => Ok(PredicateExpr::Or(args.iter().map(to_expr).collect::<Result<_, _>>()?)),
                "not" => {
                    arity(1)?;
                    Ok(PredicateExpr::Not(Box::new(to_expr(&args[0])?)))
                }
                "member" => {
                    let (syms, comps) = args.split_first().ok_or_else(|| PredicateError::Syntax("`member` needs symbols".into()))?;
                    let symbols = symbol_list(syms)?;
                    let mut components = Vec::new();
                    for c in comps {
                        let parts = tagged(c, "linear")?;
                        let (base, periods) = parts
                            .split_first()
                            .ok_or_else(|| PredicateError::Syntax("`linear` needs a base".into()))?;
                        let base = numbers(tagged(base, "base")?)?;
                        let periods = periods
                            .iter()
                            .map(|p| numbers(tagged(p, "period")?))
                            .collect::<Result<Vec<_>, _>>()?;
                        components.push(LinearSet::new(base, periods)?);
                    }
                    Ok(PredicateExpr::Member(SemilinearSet::new(symbols, components)?))
                }
                "countk" => {
                    arity(3)?;
                    let k: u64 = int(&args[0])?;
                    if k == 0 {
                        return syntax("count bound must be positive");
                    }
                    let symbols = symbol_list(&args[1])?;
                    let mut accept = BTreeSet::new();
                    for row in tagged(&args[2], "accept")? {
                        let Sexp::List(vals) = row else { return syntax("expected a count vector") };
                        let v = numbers(vals)?;
                        if v.len() != symbols.len() {
                            return Err(PredicateError::Dimension { expected: symbols.len(), got: v.len() });
                        }
                        accept.insert(v);
                    }
                    Ok(PredicateExpr::CountK { symbols, k, accept })
                }
                kw @ ("pow2" | "prime" | "square") => {
                    arity(1)?;
                    let property = match kw {
                        "pow2" => CountProperty::PowerOfTwo,
                        "prime" => CountProperty::Prime,
                        _ => CountProperty::Square,
                    };
                    Ok(PredicateExpr::NonSemilinear { property, symbol: atom(&args[0])?.to_owned() })
                }
                other => syntax(format!("unknown operator `{other}`")),
            }
        }
    }
}

/// Parses the s-expression predicate syntax, e.g.
/// `(and (mod (v (a 1)) 1 2) (ge (v (a 1) (b -1)) 1))`. `;` starts a comment.
pub fn parse_predicate(text: &str) -> Result<PredicateExpr, PredicateError> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let s = read_sexp(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return syntax("trailing input after predicate");
    }
    to_expr(&s)
}

impl std::str::FromStr for PredicateExpr {
    type Err = PredicateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_predicate(s)
    }
}

fn write_vector(f: &mut fmt::Formatter<'_>, coefficients: &[(String, i64)]) -> fmt::Result {
    f.write_str("(v")?;
    for (s, v) in coefficients {
        write!(f, " ({s} {v})")?;
    }
    f.write_str(")")
}

fn write_numbers(f: &mut fmt::Formatter<'_>, tag: &str, v: &[u64]) -> fmt::Result {
    write!(f, "({tag}")?;
    for n in v {
        write!(f, " {n}")?;
    }
    f.write_str(")")
}

impl fmt::Display for PredicateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateExpr::Const(b) => write!(f, "{b}"),
            PredicateExpr::Threshold { coefficients, threshold } => {
                f.write_str("(ge ")?;
                write_vector(f, coefficients)?;
                write!(f, " {threshold})")
            }
            PredicateExpr::Modulo { coefficients, residue, modulus } => {
                f.write_str("(mod ")?;
                write_vector(f, coefficients)?;
                write!(f, " {residue} {modulus})")
            }
            PredicateExpr::SimpleThreshold { symbol, k } => write!(f, "(count {symbol} {k})"),
            PredicateExpr::Member(s) => {
                write!(f, "(member (symbols {})", s.symbols.join(" "))?;
                for c in &s.components {
                    f.write_str(" (linear ")?;
                    write_numbers(f, "base", c.base())?;
                    for p in c.periods() {
                        f.write_str(" ")?;
                        write_numbers(f, "period", p)?;
                    }
                    f.write_str(")")?;
                }
                f.write_str(")")
            }
            PredicateExpr::CountK { symbols, k, accept } => {
                write!(f, "(countk {k} (symbols {}) (accept", symbols.join(" "))?;
                for v in accept {
                    f.write_str(" ")?;
                    write_numbers(f, "", v).map(|_| ())?;
                }
                f.write_str("))")
            }
            PredicateExpr::NonSemilinear { property, symbol } => write!(f, "({} {symbol})", property.keyword()),
            PredicateExpr::And(es) | PredicateExpr::Or(es) => {
                f.write_str(if matches!(self, PredicateExpr::And(_)) { "(and" } else { "(or" })?;
                for e in es {
                    write!(f, " {e}")?;
                }
                f.write_str(")")
            }
            PredicateExpr::Not(e) => write!(f, "(not {e})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split_set() -> SemilinearSet {
        SemilinearSet::new(
            vec!["x".into(), "y".into()],
            vec![
                LinearSet::new(vec![1, 0], vec![vec![1, 0], vec![0, 2]]).unwrap(),
                LinearSet::new(vec![0, 2], vec![vec![2, 0]]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn split_formula() -> PredicateExpr {
        let x_nonneg = PredicateExpr::threshold([("x", 1)], 0);
        let odd = PredicateExpr::modulo([("x", 1)], 1, 2).unwrap();
        let even = PredicateExpr::modulo([("x", 1)], 0, 2).unwrap();
        // x <= 2y + 1  <=>  -x + 2y >= -1
        let below = PredicateExpr::threshold([("x", -1), ("y", 2)], -1);
        let y_is_2 = PredicateExpr::threshold([("y", 1)], 2).and(PredicateExpr::threshold([("y", 1)], 3).not());
        PredicateExpr::Or(vec![
            PredicateExpr::And(vec![x_nonneg.clone(), odd, below]),
            PredicateExpr::And(vec![x_nonneg, even, y_is_2]),
        ])
    }

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn linear_membership_examples() {
        let l = LinearSet::new(vec![1, 0], vec![vec![1, 0], vec![0, 2]]).unwrap();
        assert!(member_linear(&l, &[3, 2]));
        assert!(member_linear(&l, &[1, 0]));
        assert!(!member_linear(&l, &[2, 1]));
        assert!(!member_linear(&l, &[0, 0]));
    }

    #[test]
    fn semilinear_membership_examples() {
        let s = split_set();
        assert!(member(&s, &[2, 2]));
        assert!(!member(&s, &[0, 0]));
        let empty = SemilinearSet::new(xy(), vec![]).unwrap();
        assert!(box_vectors(2, 5).all(|v| !member(&empty, &v)));
    }

    #[test]
    fn zero_period_rejected() {
        assert_eq!(LinearSet::new(vec![0], vec![vec![0]]), Err(PredicateError::ZeroPeriod));
        let l = LinearSet::new(vec![0], vec![vec![2], vec![2]]).unwrap();
        assert_eq!(l.periods().len(), 1);
    }

    #[test]
    fn parity_split_formula_at_points() {
        let f = split_formula();
        assert!(f.eval(&Profile::from_pairs([("x", 3), ("y", 2)])));
        assert!(f.eval(&Profile::from_pairs([("x", 4), ("y", 2)])));
        assert!(!f.eval(&Profile::from_pairs([("x", 4), ("y", 3)])));
    }

    #[test]
    fn parity_split_set_and_formula_differ_at_one_one() {
        // The displayed formula describes x = 2z+1, y >= z, which contains
        // (1, 1); the listed linear set only has even y in its first family.
        let eq = brute_equivalent(&PredicateExpr::Member(split_set()), &split_formula(), &xy(), 10);
        assert!(!eq.equivalent);
        assert_eq!(eq.counterexample, Some(Profile::from_pairs([("x", 1), ("y", 1)])));
    }

    #[test]
    fn parity_split_formula_matches_its_quantified_form() {
        // {(2z+1, y) : y >= z} U {(2z, 2)} as explicit linear sets.
        let s = SemilinearSet::new(
            xy(),
            vec![
                LinearSet::new(vec![1, 0], vec![vec![2, 1], vec![0, 1]]).unwrap(),
                LinearSet::new(vec![0, 2], vec![vec![2, 0]]).unwrap(),
            ],
        )
        .unwrap();
        let eq = brute_equivalent(&PredicateExpr::Member(s), &split_formula(), &xy(), 10);
        assert!(eq.equivalent, "{:?}", eq.counterexample);
        assert_eq!(eq.checked, 100);
    }

    #[test]
    fn brute_equivalence_examples() {
        let parity = PredicateExpr::modulo([("a", 1)], 1, 2).unwrap();
        let syms = vec!["a".to_string()];
        let twice = parity.clone().not().not();
        assert!(brute_equivalent(&parity, &twice, &syms, 8).equivalent);
        let eq = brute_equivalent(&parity, &PredicateExpr::at_least("a", 1), &syms, 4);
        assert_eq!(eq.counterexample, Some(Profile::from_pairs([("a", 2)])));
    }

    #[test]
    fn comparison_and_not() {
        let cmp = PredicateExpr::threshold([("a", 1), ("b", -1)], 1);
        let x = Profile::from_pairs([("a", 2), ("b", 1)]);
        assert!(cmp.eval(&x));
        assert!(!cmp.clone().not().eval(&x));
        assert!(!cmp.eval(&Profile::from_pairs([("a", 1), ("b", 1)])));
    }

    #[test]
    fn counting_predicates() {
        let syms = vec!["a".to_string()];
        let a3 = Profile::from_pairs([("a", 3)]);
        assert!(count_k_eval(|v| v[0] >= 1, &syms, 1, &a3));
        assert!(count_k_eval(|_| true, &syms, 1, &Profile::new()));
        assert!(count_k_eval(|v| v[0] == 2, &syms, 2, &Profile::from_pairs([("a", 5)])));
        let table = PredicateExpr::CountK { symbols: syms, k: 2, accept: [vec![2]].into() };
        assert!(table.eval(&Profile::from_pairs([("a", 5)])));
        assert!(!table.eval(&Profile::from_pairs([("a", 1)])));
    }

    #[test]
    fn k_rich_examples() {
        assert!(k_rich(&Profile::from_pairs([("a", 3), ("b", 2)]), &["a", "b"], 2));
        assert!(!k_rich(&Profile::from_pairs([("a", 3), ("b", 2), ("c", 1)]), &["a", "b"], 2));
        assert!(!k_rich(&Profile::from_pairs([("a", 1)]), &["a"], 2));
    }

    #[test]
    fn core_mod_witness_for_exactly_one_c() {
        // [exactly one c and #a > #b] is 2-similar to constant false on every
        // subalphabet containing c, and also on those without c.
        let psi = PredicateExpr::And(vec![
            PredicateExpr::at_least("c", 1),
            PredicateExpr::at_least("c", 2).not(),
            PredicateExpr::threshold([("a", 1), ("b", -1)], 1),
        ]);
        let syms: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        for sub in [vec!["a"], vec!["b"], vec!["c"], vec!["a", "c"], vec!["a", "b", "c"], vec!["a", "b"]] {
            let sub: Vec<String> = sub.into_iter().map(String::from).collect();
            let eq = k_similar(&psi, &PredicateExpr::Const(false), &syms, &sub, 2, 6);
            assert!(eq.equivalent, "{sub:?}");
        }
    }

    #[test]
    fn non_semilinear_properties() {
        let pow2: Vec<u64> = (0..20).filter(|&n| CountProperty::PowerOfTwo.holds(n)).collect();
        assert_eq!(pow2, [1, 2, 4, 8, 16]);
        let primes: Vec<u64> = (0..20).filter(|&n| CountProperty::Prime.holds(n)).collect();
        assert_eq!(primes, [2, 3, 5, 7, 11, 13, 17, 19]);
        let squares: Vec<u64> = (0..20).filter(|&n| CountProperty::Square.holds(n)).collect();
        assert_eq!(squares, [0, 1, 4, 9, 16]);
    }

    #[test]
    fn sexp_syntax() {
        let p = parse_predicate("(and (mod (v (a 1)) 1 2) (ge (v (a 1) (b -1)) 1))").unwrap();
        assert!(p.eval(&Profile::from_pairs([("a", 3), ("b", 1)])));
        assert!(!p.eval(&Profile::from_pairs([("a", 2), ("b", 1)])));
        assert_eq!(parse_predicate(&p.to_string()).unwrap(), p);
        let m = parse_predicate("(mod (v (a 1)) -1 3)").unwrap();
        assert!(matches!(m, PredicateExpr::Modulo { residue: 2, .. }));
        let s = PredicateExpr::Member(split_set());
        assert_eq!(parse_predicate(&s.to_string()).unwrap(), s);
        let c = parse_predicate("(countk 1 (symbols a b) (accept (1 0) (1 1))) ; a present").unwrap();
        assert_eq!(parse_predicate(&c.to_string()).unwrap(), c);
        assert!(parse_predicate("(mod (v (a 1)) 0 0)").is_err());
        assert!(parse_predicate("(ge (v (a 1)) 1").is_err());
        assert!(parse_predicate("(frob a)").is_err());
        assert!(parse_predicate("(pow2 a) extra").is_err());
    }

    /// Independent oracle: enumerate base + sum k_i p_i with each k_i bounded.
    fn enumerate_linear(l: &LinearSet, per_axis: u64) -> HashSet<Vec<u64>> {
        let mut out = HashSet::new();
        let n = l.periods().len();
        for ks in box_vectors(n, per_axis) {
            let v: Vec<u64> = (0..l.dimension())
                .map(|d| l.base()[d] + (0..n).map(|i| ks[i] * l.periods()[i][d]).sum::<u64>())
                .collect();
            if v.iter().all(|&c| c < per_axis) {
                out.insert(v);
            }
        }
        out
    }

    fn arb_linear() -> impl Strategy<Value = LinearSet> {
        (
            prop::collection::vec(0u64..4, 2),
            prop::collection::vec(prop::collection::vec(0u64..4, 2), 0..=3),
        )
            .prop_map(|(b, ps)| {
                let ps = ps.into_iter().filter(|p| p.iter().any(|&v| v > 0)).collect();
                LinearSet::new(b, ps).unwrap()
            })
    }

    proptest! {
        #[test]
        fn membership_matches_enumeration(l in arb_linear()) {
            let reach = enumerate_linear(&l, 10);
            for v in box_vectors(2, 10) {
                prop_assert_eq!(l.contains(&v), reach.contains(&v), "{:?} {:?}", l, v);
            }
        }

        #[test]
        fn de_morgan(a in 0u64..6, b in 0u64..6, r in -3i64..4, m in 1i64..4) {
            let p = PredicateExpr::threshold([("a", 1), ("b", -2)], r);
            let q = PredicateExpr::modulo([("a", 1), ("b", 1)], r, m).unwrap();
            let x = Profile::from_pairs([("a", a), ("b", b)]);
            let lhs = p.clone().and(q.clone()).not();
            let rhs = p.not().or(q.not());
            prop_assert_eq!(lhs.eval(&x), rhs.eval(&x));
        }
    }
}
