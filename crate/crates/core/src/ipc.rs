//! International Patent Classification codes.
//!
//! A full code such as `G06F40/30` is section `G`, class `06`, subclass `F`,
//! main group `40` and subgroup `30`. Technological overlap is measured on
//! the first three levels only, so most callers go straight from raw strings
//! to a set of [`IpcKey3`] via [`normalize_code_set`].
//!
//! Accepted surface syntax is `<sec><cc><sub>[<group>[/<subgroup>]]`, with
//! optional whitespace between subclass and group and optional zero padding
//! of the group (`G06F 40/30`, `G06F0040/30`). Lowercase letters are folded
//! to uppercase.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid IPC code {input:?} at position {position}: {kind}")]
pub struct IpcParseError {
    pub input: String,
    /// Zero-based character offset into `input` where parsing failed.
    pub position: usize,
    pub kind: IpcParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IpcParseErrorKind {
    #[error("empty code")]
    Empty,
    #[error("section must be a letter A-H, found {0:?}")]
    InvalidSection(char),
    #[error("class must be exactly two digits")]
    InvalidClass,
    #[error("missing subclass letter")]
    MissingSubclass,
    #[error("main group must be 1-4 digits with value >= 1")]
    InvalidMainGroup,
    #[error("subgroup must be 1-6 digits")]
    InvalidSubgroup,
    #[error("unexpected trailing input")]
    TrailingInput,
}

/// Aggregate failure from [`normalize_code_set`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IpcSetError {
    #[error("no IPC codes given")]
    Empty,
    #[error("{} unparseable IPC code(s): {}", .0.len(), join_errors(.0))]
    Unparseable(Vec<IpcParseError>),
}

fn join_errors(errors: &[IpcParseError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Fully parsed IPC code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpcCode {
    section: char,
    class_num: u8,
    subclass: char,
    main_group: Option<u16>,
    subgroup: Option<u32>,
}

impl IpcCode {
    /// Builds a code from components, enforcing the same invariants as the parser.
    pub fn new(
        section: char,
        class_num: u8,
        subclass: char,
        main_group: Option<u16>,
        subgroup: Option<u32>,
    ) -> Option<Self> {
        let section = section.to_ascii_uppercase();
        let subclass = subclass.to_ascii_uppercase();
        let ok = ('A'..='H').contains(&section)
            && class_num <= 99
            && subclass.is_ascii_uppercase()
            && main_group.is_none_or(|g| (1..=9999).contains(&g))
            && subgroup.is_none_or(|s| s <= 999_999)
            && !(subgroup.is_some() && main_group.is_none());
        ok.then_some(Self {
            section,
            class_num,
            subclass,
            main_group,
            subgroup,
        })
    }

    pub fn section(&self) -> char {
        self.section
    }

    pub fn class_num(&self) -> u8 {
        self.class_num
    }

    pub fn subclass(&self) -> char {
        self.subclass
    }

    pub fn main_group(&self) -> Option<u16> {
        self.main_group
    }

    pub fn subgroup(&self) -> Option<u32> {
        self.subgroup
    }

    /// Drops main group and subgroup.
    pub fn truncate3(&self) -> IpcKey3 {
        IpcKey3 {
            section: self.section,
            class_num: self.class_num,
            subclass: self.subclass,
        }
    }

    /// Canonical rendering of the first `depth` levels, e.g. `G06F40` at
    /// [`IpcDepth::MainGroup`]. Levels absent from the code are omitted.
    pub fn render_at(&self, depth: IpcDepth) -> String {
        let mut out = String::with_capacity(12);
        out.push(self.section);
        if depth >= IpcDepth::Class {
            out.push_str(&format!("{:02}", self.class_num));
        }
        if depth >= IpcDepth::Subclass {
            out.push(self.subclass);
        }
        if depth >= IpcDepth::MainGroup {
            if let Some(g) = self.main_group {
                out.push_str(&g.to_string());
                if depth >= IpcDepth::Subgroup {
                    if let Some(s) = self.subgroup {
                        out.push_str(&format!("/{s:02}"));
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for IpcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_at(IpcDepth::Subgroup))
    }
}

impl FromStr for IpcCode {
    type Err = IpcParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ipc(s)
    }
}

/// Hierarchy level used when truncating codes. Similarity scoring is fixed at
/// [`IpcDepth::Subclass`]; the other levels exist for exploratory use only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum IpcDepth {
    Section = 1,
    Class = 2,
    #[default]
    Subclass = 3,
    MainGroup = 4,
    Subgroup = 5,
}

impl TryFrom<u8> for IpcDepth {
    type Error = u8;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Ok(match value {
            1 => IpcDepth::Section,
            2 => IpcDepth::Class,
            3 => IpcDepth::Subclass,
            4 => IpcDepth::MainGroup,
            5 => IpcDepth::Subgroup,
            other => return Err(other),
        })
    }
}

/// Section + class + subclass, rendered as exactly four characters (`G06F`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpcKey3 {
    section: char,
    class_num: u8,
    subclass: char,
}

impl IpcKey3 {
    pub fn section(&self) -> char {
        self.section
    }

    pub fn class_num(&self) -> u8 {
        self.class_num
    }

    pub fn subclass(&self) -> char {
        self.subclass
    }
}

impl fmt::Display for IpcKey3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}{}", self.section, self.class_num, self.subclass)
    }
}

impl FromStr for IpcKey3 {
    type Err = IpcParseError;

    /// Parses any valid code and truncates it, so `G06F40/30` and `G06F`
    /// both yield `G06F`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ipc(s).map(|c| c.truncate3())
    }
}

impl Serialize for IpcKey3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpcKey3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Cursor<'a> {
    input: &'a str,
    chars: Vec<char>,
    pos: usize,
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn fail(&self, kind: IpcParseErrorKind) -> IpcParseError {
        IpcParseError {
            input: self.input.to_string(),
            position: self.offset + self.pos,
            kind,
        }
    }

    fn take_digits(&mut self, max: usize) -> Option<(u32, usize)> {
        let start = self.pos;
        while self.pos - start < max && self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let len = self.pos - start;
        if len == 0 {
            return None;
        }
        let value = self.chars[start..self.pos]
            .iter()
            .fold(0u32, |acc, c| acc * 10 + c.to_digit(10).unwrap_or(0));
        Some((value, len))
    }
}

/// Parses a raw IPC code string. Leading and trailing whitespace is ignored.
pub fn parse_ipc(raw: &str) -> Result<IpcCode, IpcParseError> {
    let trimmed = raw.trim_start();
    let offset = raw.chars().count() - trimmed.chars().count();
    let trimmed = trimmed.trim_end();
    let mut cur = Cursor {
        input: raw,
        chars: trimmed.chars().collect(),
        pos: 0,
        offset,
    };

    let section = match cur.peek() {
        None => return Err(cur.fail(IpcParseErrorKind::Empty)),
        Some(c) => c.to_ascii_uppercase(),
    };
    if !('A'..='H').contains(&section) {
        return Err(cur.fail(IpcParseErrorKind::InvalidSection(section)));
    }
    cur.pos += 1;

    let class_start = cur.pos;
    let class_num = match cur.take_digits(2) {
        Some((v, 2)) => v as u8,
        _ => {
            cur.pos = class_start;
            return Err(cur.fail(IpcParseErrorKind::InvalidClass));
        }
    };
    if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        return Err(cur.fail(IpcParseErrorKind::InvalidClass));
    }

    let subclass = match cur.peek() {
        Some(c) if c.is_ascii_alphabetic() => c.to_ascii_uppercase(),
        _ => return Err(cur.fail(IpcParseErrorKind::MissingSubclass)),
    };
    cur.pos += 1;

    if cur.peek().is_none() {
        return Ok(IpcCode {
            section,
            class_num,
            subclass,
            main_group: None,
            subgroup: None,
        });
    }

    while cur.peek().is_some_and(|c| c == ' ' || c == '\t') {
        cur.pos += 1;
    }
    let group_start = cur.pos;
    let main_group = match cur.take_digits(4) {
        Some((v, _)) if v >= 1 => v as u16,
        Some(_) => {
            cur.pos = group_start;
            return Err(cur.fail(IpcParseErrorKind::InvalidMainGroup));
        }
        None => {
            let kind = if group_start > 0 && cur.chars[group_start - 1].is_whitespace() {
                IpcParseErrorKind::InvalidMainGroup
            } else {
                IpcParseErrorKind::TrailingInput
            };
            return Err(cur.fail(kind));
        }
    };
    if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        return Err(cur.fail(IpcParseErrorKind::InvalidMainGroup));
    }

    let subgroup = match cur.peek() {
        None => None,
        Some('/') => {
            cur.pos += 1;
            match cur.take_digits(6) {
                Some((v, _)) => Some(v),
                None => return Err(cur.fail(IpcParseErrorKind::InvalidSubgroup)),
            }
        }
        Some(_) => return Err(cur.fail(IpcParseErrorKind::TrailingInput)),
    };
    if cur.peek().is_some() {
        return Err(cur.fail(IpcParseErrorKind::TrailingInput));
    }

    Ok(IpcCode {
        section,
        class_num,
        subclass,
        main_group: Some(main_group),
        subgroup,
    })
}

pub fn truncate3(code: &IpcCode) -> IpcKey3 {
    code.truncate3()
}

/// Parses every raw code and collapses them to a deduplicated set of
/// three-level keys. Any unparseable code fails the whole set.
pub fn normalize_code_set<S: AsRef<str>>(raws: &[S]) -> Result<BTreeSet<IpcKey3>, IpcSetError> {
    if raws.is_empty() {
        return Err(IpcSetError::Empty);
    }
    let mut keys = BTreeSet::new();
    let mut failures = Vec::new();
    for raw in raws {
        match parse_ipc(raw.as_ref()) {
            Ok(code) => {
                keys.insert(code.truncate3());
            }
            Err(e) => failures.push(e),
        }
    }
    if failures.is_empty() {
        Ok(keys)
    } else {
        Err(IpcSetError::Unparseable(failures))
    }
}

/// Like [`normalize_code_set`] but truncating at an arbitrary depth.
/// Keys are canonical renderings from [`IpcCode::render_at`].
pub fn normalize_code_set_at<S: AsRef<str>>(raws: &[S], depth: IpcDepth) -> Result<BTreeSet<String>, IpcSetError> {
    if raws.is_empty() {
        return Err(IpcSetError::Empty);
    }
    let mut keys = BTreeSet::new();
    let mut failures = Vec::new();
    for raw in raws {
        match parse_ipc(raw.as_ref()) {
            Ok(code) => {
                keys.insert(code.render_at(depth));
            }
            Err(e) => failures.push(e),
        }
    }
    if failures.is_empty() {
        Ok(keys)
    } else {
        Err(IpcSetError::Unparseable(failures))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(s: &str) -> IpcKey3 {
        s.parse().unwrap()
    }

    #[test]
    fn parses_full_code() {
        let c = parse_ipc("G06F40/30").unwrap();
        assert_eq!(
            (c.section(), c.class_num(), c.subclass(), c.main_group(), c.subgroup()),
            ('G', 6, 'F', Some(40), Some(30))
        );
        assert_eq!(c.truncate3().to_string(), "G06F");
    }

    #[test]
    fn parses_minimal_code() {
        let c = parse_ipc("A01B").unwrap();
        assert_eq!(c.main_group(), None);
        assert_eq!(c.subgroup(), None);
        assert_eq!(truncate3(&c).to_string(), "A01B");
    }

    #[test]
    fn accepts_whitespace_padding_and_lowercase() {
        let expected = parse_ipc("G06F40/30").unwrap();
        for raw in ["G06F 40/30", "G06F   40/30", "G06F0040/30", "g06f40/30", "  G06F40/30 "] {
            assert_eq!(parse_ipc(raw).unwrap(), expected, "{raw}");
        }
        assert_eq!(parse_ipc("H04L9/06").unwrap().subgroup(), Some(6));
        assert_eq!(parse_ipc("H04L9").unwrap().main_group(), Some(9));
    }

    #[test]
    fn rejects_section_outside_a_to_h() {
        let err = parse_ipc("I06F40/30").unwrap_err();
        assert_eq!(err.kind, IpcParseErrorKind::InvalidSection('I'));
        assert_eq!(err.position, 0);
    }

    #[test]
    fn error_positions() {
        let cases = [
            ("", 0, IpcParseErrorKind::Empty),
            ("G6F", 1, IpcParseErrorKind::InvalidClass),
            ("G063F", 3, IpcParseErrorKind::InvalidClass),
            ("G06", 3, IpcParseErrorKind::MissingSubclass),
            ("G061", 3, IpcParseErrorKind::InvalidClass),
            ("G06F40/30x", 9, IpcParseErrorKind::TrailingInput),
            ("G06F40/", 7, IpcParseErrorKind::InvalidSubgroup),
            ("G06F0/30", 4, IpcParseErrorKind::InvalidMainGroup),
            ("G06F12345/1", 8, IpcParseErrorKind::InvalidMainGroup),
            ("G06Fx", 4, IpcParseErrorKind::TrailingInput),
            ("G06F 40-30", 7, IpcParseErrorKind::TrailingInput),
            ("  X01B", 2, IpcParseErrorKind::InvalidSection('X')),
        ];
        for (raw, pos, kind) in cases {
            let err = parse_ipc(raw).unwrap_err();
            assert_eq!((err.position, &err.kind), (pos, &kind), "{raw:?}");
        }
    }

    #[test]
    fn truncate_idempotent_through_reparse() {
        let k = parse_ipc("G06F").unwrap().truncate3();
        assert_eq!(k.to_string(), "G06F");
        assert_eq!(parse_ipc(&k.to_string()).unwrap().truncate3(), k);
    }

    #[test]
    fn normalize_worked_example() {
        let keys = normalize_code_set(&["G06F40/30", "G06F40/40", "G06F40/56"]).unwrap();
        assert_eq!(keys.len(), 1);
        assert!(keys.contains(&key("G06F")));
    }

    #[test]
    fn normalize_distinct_subclasses() {
        let keys = normalize_code_set(&["G06F40/30", "H04L9/06"]).unwrap();
        let rendered: Vec<_> = keys.iter().map(ToString::to_string).collect();
        assert_eq!(rendered, ["G06F", "H04L"]);
    }

    #[test]
    fn normalize_rejects_empty_and_lists_every_failure() {
        assert_eq!(normalize_code_set::<&str>(&[]), Err(IpcSetError::Empty));
        match normalize_code_set(&["G06F40/30", "Z99Z", "G0"]) {
            Err(IpcSetError::Unparseable(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn depth_hook_renders_prefixes() {
        let c = parse_ipc("G06F40/30").unwrap();
        assert_eq!(c.render_at(IpcDepth::Section), "G");
        assert_eq!(c.render_at(IpcDepth::Class), "G06");
        assert_eq!(c.render_at(IpcDepth::Subclass), "G06F");
        assert_eq!(c.render_at(IpcDepth::MainGroup), "G06F40");
        assert_eq!(c.render_at(IpcDepth::Subgroup), "G06F40/30");
        assert_eq!(IpcDepth::default(), IpcDepth::Subclass);
        assert_eq!(IpcDepth::try_from(6), Err(6));
        let set = normalize_code_set_at(&["G06F40/30", "G06F40/40", "G06N3/08"], IpcDepth::MainGroup).unwrap();
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn key_serde_uses_canonical_string() {
        let k = key("h04l9/06");
        assert_eq!(serde_json::to_string(&k).unwrap(), "\"H04L\"");
        let back: IpcKey3 = serde_json::from_str("\"H04L\"").unwrap();
        assert_eq!(back, k);
    }

    fn arb_code() -> impl Strategy<Value = IpcCode> {
        (
            prop::sample::select(vec!['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H']),
            0u8..100,
            prop::char::range('A', 'Z'),
            prop::option::of((1u16..10000, prop::option::of(0u32..1_000_000))),
        )
            .prop_map(|(s, c, sub, groups)| {
                let (g, sg) = match groups {
                    Some((g, sg)) => (Some(g), sg),
                    None => (None, None),
                };
                IpcCode::new(s, c, sub, g, sg).unwrap()
            })
    }

    proptest! {
        #[test]
        fn render_parse_roundtrip(code in arb_code()) {
            let reparsed = parse_ipc(&code.to_string()).unwrap();
            prop_assert_eq!(reparsed.truncate3(), code.truncate3());
            prop_assert_eq!(reparsed.main_group(), code.main_group());
            prop_assert_eq!(reparsed.truncate3().to_string().len(), 4);
        }

        #[test]
        fn normalize_size_bound(codes in prop::collection::vec(arb_code(), 1..12)) {
            let raws: Vec<String> = codes.iter().map(ToString::to_string).collect();
            let keys = normalize_code_set(&raws).unwrap();
            let distinct: BTreeSet<_> = codes.iter().map(IpcCode::truncate3).collect();
            prop_assert!(keys.len() <= raws.len());
            prop_assert_eq!(keys.len() == raws.len(), distinct.len() == codes.len());
            prop_assert_eq!(keys, distinct);
        }

        #[test]
        fn normalize_permutation_and_duplication_invariant(
            codes in prop::collection::vec(arb_code(), 1..8),
            shuffle_seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let raws: Vec<String> = codes.iter().map(ToString::to_string).collect();
            let mut shuffled = raws.clone();
            shuffled.extend(raws.iter().take(3).cloned());
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
            prop_assert_eq!(normalize_code_set(&raws).unwrap(), normalize_code_set(&shuffled).unwrap());
        }
    }
}
