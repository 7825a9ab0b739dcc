//! Finite multisets over an interned element alphabet.
//!
//! A [`Multiset`] is stored canonically: entries sorted by element id, no
//! zero counts, and a cached total. Equality and hashing are therefore
//! structural, which is what the reachability sets in the verifier rely on.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Opaque interned symbol. Ids are only meaningful relative to the
/// [`Alphabet`] that issued them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(pub u32);

impl Element {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MultisetError {
    #[error("subtrahend is not included in the minuend")]
    NotIncluded,
    #[error("multiplicity overflow")]
    Overflow,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("malformed multiset: {0}")]
    Syntax(String),
}

/// Characters that may not appear in element names, since the text
/// renderings of multisets and protocol files use them as delimiters.
pub const RESERVED_NAME_CHARS: &[char] = &[',', ':', '{', '}', '=', '#', '[', ']'];

/// Returns true if `name` can be used as an element name.
pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.contains("->")
        && !name
            .chars()
            .any(|c| c.is_whitespace() || RESERVED_NAME_CHARS.contains(&c))
}

/// Interner mapping element names to dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, Element>,
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `name`, returning its existing id if already present.
    pub fn intern(&mut self, name: &str) -> Element {
        if let Some(&e) = self.index.get(name) {
            return e;
        }
        let e = Element(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), e);
        e
    }

    pub fn get(&self, name: &str) -> Option<Element> {
        self.index.get(name).copied()
    }

    pub fn name(&self, e: Element) -> &str {
        &self.names[e.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> {
        (0..self.names.len() as u32).map(Element)
    }
}

impl<S: AsRef<str>> FromIterator<S> for Alphabet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut a = Alphabet::new();
        for s in iter {
            a.intern(s.as_ref());
        }
        a
    }
}

/// A finite multiset (population vector) over [`Element`]s.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiset {
    entries: Vec<(Element, u64)>,
    total: u64,
}

impl Multiset {
    /// The empty multiset `0`.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(e: Element) -> Self {
        Self::from_counts([(e, 1)])
    }

    /// Builds a multiset from (element, count) pairs. Repeated elements are
    /// summed and zero counts dropped.
    ///
    /// Panics on multiplicity overflow.
    pub fn from_counts<I: IntoIterator<Item = (Element, u64)>>(pairs: I) -> Self {
        let mut entries: Vec<(Element, u64)> = pairs.into_iter().filter(|&(_, n)| n > 0).collect();
        entries.sort_unstable_by_key(|&(e, _)| e);
        let mut merged: Vec<(Element, u64)> = Vec::with_capacity(entries.len());
        for (e, n) in entries {
            match merged.last_mut() {
                Some((last, m)) if *last == e => {
                    *m = m.checked_add(n).expect("multiset count overflow");
                }
                _ => merged.push((e, n)),
            }
        }
        let total = merged
            .iter()
            .try_fold(0u64, |acc, &(_, n)| acc.checked_add(n))
            .expect("multiset count overflow");
        Multiset { entries: merged, total }
    }

    /// Builds a multiset with one copy per listed element occurrence.
    pub fn from_elements<I: IntoIterator<Item = Element>>(elements: I) -> Self {
        Self::from_counts(elements.into_iter().map(|e| (e, 1)))
    }

    pub fn count(&self, e: Element) -> u64 {
        match self.entries.binary_search_by_key(&e, |&(x, _)| x) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    /// Sum of all multiplicities.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical (element, count) entries, sorted by element.
    pub fn entries(&self) -> &[(Element, u64)] {
        &self.entries
    }

    /// Elements with nonzero count.
    pub fn support(&self) -> impl Iterator<Item = Element> + '_ {
        self.entries.iter().map(|&(e, _)| e)
    }

    pub fn max_multiplicity(&self) -> u64 {
        self.entries.iter().map(|&(_, n)| n).max().unwrap_or(0)
    }

    /// Pointwise sum, or `None` on overflow.
    pub fn checked_add(&self, other: &Multiset) -> Option<Multiset> {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                out.push((a[i].0, a[i].1.checked_add(b[j].1)?));
                i += 1;
                j += 1;
            }
        }
        Some(Multiset {
            entries: out,
            total: self.total.checked_add(other.total)?,
        })
    }

    /// Pointwise sum. Panics on overflow.
    pub fn add(&self, other: &Multiset) -> Multiset {
        self.checked_add(other).expect("multiset count overflow")
    }

    /// Pointwise difference `self - other`, defined only when `other <= self`.
    pub fn subtract(&self, other: &Multiset) -> Result<Multiset, MultisetError> {
        let mut out = Vec::with_capacity(self.entries.len());
        let mut j = 0;
        let b = &other.entries;
        for &(e, n) in &self.entries {
            if j < b.len() && b[j].0 < e {
                return Err(MultisetError::NotIncluded);
            }
            if j < b.len() && b[j].0 == e {
                let m = b[j].1;
                j += 1;
                if m > n {
                    return Err(MultisetError::NotIncluded);
                }
                if n > m {
                    out.push((e, n - m));
                }
            } else {
                out.push((e, n));
            }
        }
        if j < b.len() {
            return Err(MultisetError::NotIncluded);
        }
        Ok(Multiset {
            entries: out,
            total: self.total - other.total,
        })
    }

    /// Sub-multiset order: true iff `self(e) <= other(e)` for every `e`.
    pub fn leq(&self, other: &Multiset) -> bool {
        if self.total > other.total || self.entries.len() > other.entries.len() {
            return false;
        }
        let mut j = 0;
        let b = &other.entries;
        for &(e, n) in &self.entries {
            while j < b.len() && b[j].0 < e {
                j += 1;
            }
            if j == b.len() || b[j].0 != e || b[j].1 < n {
                return false;
            }
            j += 1;
        }
        true
    }

    /// Clamps every multiplicity to at most `k`.
    ///
    /// Panics if `k == 0`.
    pub fn truncate(&self, k: u64) -> Multiset {
        assert!(k >= 1, "truncation bound must be positive");
        let entries: Vec<_> = self.entries.iter().map(|&(e, n)| (e, n.min(k))).collect();
        let total = entries.iter().map(|&(_, n)| n).sum();
        Multiset { entries, total }
    }

    /// Applies `lhs -> rhs` to `self` if `lhs <= self`.
    pub fn apply(&self, lhs: &Multiset, rhs: &Multiset) -> Option<Multiset> {
        self.subtract(lhs).ok().map(|rest| rest.add(rhs))
    }

    /// Renders as `{a:3, b:1}` using `alphabet` for names.
    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> DisplayMultiset<'a> {
        DisplayMultiset {
            set: self,
            names: alphabet.names(),
        }
    }

    /// Renders with an explicit name table indexed by element id.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> DisplayMultiset<'a> {
        DisplayMultiset { set: self, names }
    }

    /// Parses `{a:3, b:1}`. A bare name without `:count` counts once.
    /// Whitespace is insignificant. Names must already exist in `alphabet`.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Multiset, MultisetError> {
        Self::parse_with(text, |name| alphabet.get(name))
    }

    pub fn parse_with(
        text: &str,
        lookup: impl Fn(&str) -> Option<Element>,
    ) -> Result<Multiset, MultisetError> {
        let t = text.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| MultisetError::Syntax(format!("expected `{{...}}`, got `{t}`")))?;
        let mut pairs = Vec::new();
        for item in inner.split(',') {
            let item = item.trim();
            if item.is_empty() {
                if inner.trim().is_empty() {
                    continue;
                }
                return Err(MultisetError::Syntax("empty entry".into()));
            }
            let (name, count) = match item.rsplit_once(':') {
                Some((n, c)) => {
                    let c = c
                        .trim()
                        .parse::<u64>()
                        .map_err(|_| MultisetError::Syntax(format!("bad count in `{item}`")))?;
                    (n.trim(), c)
                }
                None => (item, 1),
            };
            let e = lookup(name).ok_or_else(|| MultisetError::UnknownSymbol(name.to_owned()))?;
            pairs.push((e, count));
        }
        let mut acc = Multiset::new();
        for (e, n) in pairs {
            acc = acc
                .checked_add(&Multiset::from_counts([(e, n)]))
                .ok_or(MultisetError::Overflow)?;
        }
        Ok(acc)
    }
}

impl fmt::Debug for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (e, n)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "#{}:{}", e.0, n)?;
        }
        f.write_str("}")
    }
}

pub struct DisplayMultiset<'a> {
    set: &'a Multiset,
    names: &'a [String],
}

impl fmt::Display for DisplayMultiset<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (e, n)) in self.set.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match self.names.get(e.index()) {
                Some(name) => write!(f, "{name}:{n}")?,
                None => write!(f, "#{}:{n}", e.0)?,
            }
        }
        f.write_str("}")
    }
}

/// Every multiset over `elements` (ids `0..elements`) with total exactly `size`,
/// in lexicographic order of the count vector.
pub fn multisets_of_size(elements: usize, size: u64) -> Vec<Multiset> {
    let mut out = Vec::new();
    let mut counts = vec![0u64; elements];
    fn rec(i: usize, left: u64, counts: &mut Vec<u64>, out: &mut Vec<Multiset>) {
        if i + 1 == counts.len() {
            counts[i] = left;
            out.push(Multiset::from_counts(
                counts.iter().enumerate().map(|(j, &n)| (Element(j as u32), n)),
            ));
            return;
        }
        for n in 0..=left {
            counts[i] = n;
            rec(i + 1, left - n, counts, out);
        }
    }
    if elements == 0 {
        if size == 0 {
            out.push(Multiset::new());
        }
        return out;
    }
    rec(0, size, &mut counts, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abc() -> Alphabet {
        ["a", "b", "c", "q1", "q2"].into_iter().collect()
    }

    fn ms(s: &str) -> Multiset {
        Multiset::parse(s, &abc()).unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(ms("{a:1}").add(&ms("{a:2,b:1}")), ms("{a:3,b:1}"));
        assert_eq!(ms("{a:2, c:4}").add(&Multiset::new()), ms("{a:2, c:4}"));
        assert_eq!(ms("{q1:1,q2:1}").add(&ms("{q1:1}")), ms("{q1:2,q2:1}"));
    }

    #[test]
    fn subtract_examples() {
        assert_eq!(ms("{a:3,b:1}").subtract(&ms("{a:1}")), Ok(ms("{a:2,b:1}")));
        let x = ms("{a:2,b:7}");
        assert_eq!(x.subtract(&x), Ok(Multiset::new()));
        assert_eq!(ms("{a:1}").subtract(&ms("{b:1}")), Err(MultisetError::NotIncluded));
        assert_eq!(ms("{a:1}").subtract(&ms("{a:2}")), Err(MultisetError::NotIncluded));
    }

    #[test]
    fn leq_examples() {
        assert!(ms("{a:1}").leq(&ms("{a:2,b:1}")));
        let x = ms("{b:3,c:1}");
        assert!(x.leq(&x));
        assert!(!ms("{a:2}").leq(&ms("{a:1,b:5}")));
        assert!(Multiset::new().leq(&x));
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(ms("{a:3,b:1}").truncate(2), ms("{a:2,b:1}"));
        let c = ms("{a:2,b:1}");
        assert_eq!(c.truncate(2), c);
        assert_eq!(ms("{a:5,b:2,c:1}").truncate(1), ms("{a:1,b:1,c:1}"));
    }

    #[test]
    fn overflow_is_reported() {
        let big = Multiset::from_counts([(Element(0), u64::MAX)]);
        assert_eq!(big.checked_add(&Multiset::singleton(Element(0))), None);
        assert!(Multiset::parse("{a:18446744073709551615, a:1}", &abc()).is_err());
    }

    #[test]
    fn canonical_form() {
        let x = Multiset::from_counts([(Element(2), 1), (Element(0), 0), (Element(2), 2)]);
        assert_eq!(x.entries(), &[(Element(2), 3)]);
        assert_eq!(x.total(), 3);
    }

    #[test]
    fn text_rendering() {
        let a = abc();
        let x = ms("  { b : 2 ,a:1 }");
        assert_eq!(x.display(&a).to_string(), "{a:1, b:2}");
        assert_eq!(ms("{}"), Multiset::new());
        assert_eq!(ms("{a, a, b}"), ms("{a:2, b:1}"));
        assert!(matches!(Multiset::parse("{z:1}", &a), Err(MultisetError::UnknownSymbol(_))));
        assert!(matches!(Multiset::parse("a:1", &a), Err(MultisetError::Syntax(_))));
        assert!(matches!(Multiset::parse("{a:x}", &a), Err(MultisetError::Syntax(_))));
    }

    #[test]
    fn enumeration_by_size() {
        let all = multisets_of_size(3, 2);
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(|m| m.total() == 2));
        assert_eq!(all[0], Multiset::from_counts([(Element(2), 2)]));
    }

    #[test]
    fn names() {
        assert!(is_valid_name("A-1"));
        assert!(is_valid_name("<A0;1>"));
        assert!(!is_valid_name("a,b"));
        assert!(!is_valid_name("x->y"));
        assert!(!is_valid_name(""));
    }

    fn arb_multiset() -> impl Strategy<Value = Multiset> {
        prop::collection::vec(0u64..6, 4).prop_map(|v| {
            Multiset::from_counts(v.into_iter().enumerate().map(|(i, n)| (Element(i as u32), n)))
        })
    }

    proptest! {
        #[test]
        fn truncation_is_below(c in arb_multiset(), k in 1u64..5) {
            prop_assert!(c.truncate(k).leq(&c));
        }

        #[test]
        fn truncation_is_monotone(c in arb_multiset(), d in arb_multiset(), k in 1u64..5) {
            let d = c.add(&d);
            prop_assert!(c.truncate(k).leq(&d.truncate(k)));
        }

        #[test]
        fn truncation_respects_addition(
            c in arb_multiset(), extra in arb_multiset(), d in arb_multiset(), k in 1u64..4
        ) {
            // c' agrees with c below k and may exceed it where c already reaches k.
            let c2 = Multiset::from_counts(c.entries().iter().map(|&(e, n)| {
                (e, if n >= k { n + extra.count(e) } else { n })
            }));
            prop_assert_eq!(c.truncate(k), c2.truncate(k));
            prop_assert_eq!(c.add(&d).truncate(k), c2.add(&d).truncate(k));
        }

        #[test]
        fn add_subtract_round_trip(a in arb_multiset(), b in arb_multiset()) {
            prop_assert_eq!(a.add(&b).subtract(&b), Ok(a.clone()));
            prop_assert!(b.leq(&a.add(&b)));
        }

        #[test]
        fn leq_matches_pointwise(a in arb_multiset(), b in arb_multiset()) {
            let pointwise = (0..4).all(|i| a.count(Element(i)) <= b.count(Element(i)));
            prop_assert_eq!(a.leq(&b), pointwise);
            prop_assert_eq!(b.subtract(&a).is_ok(), pointwise);
        }
    }
}
