//! Patent corpus ingest (JSONL), rated pair lists (CSV), and descriptive
//! statistics over IPC key counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{RatingRecord, RatingScore};
use crate::ipc::{normalize_code_set, IpcKey3, IpcSetError};
use crate::techdist::TechProfile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentDocument {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(rename = "ipc")]
    pub ipc_raw: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestErrorKind {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("missing required field {0:?}")]
    MissingField(&'static str),
    #[error("required field {0:?} is empty")]
    EmptyField(&'static str),
    #[error("{0}")]
    Ipc(IpcSetError),
    #[error("duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId { id: String, first_line: usize },
}

/// A rejected corpus line. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct IngestError {
    pub line: usize,
    pub kind: IngestErrorKind,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{} ingest error(s) in strict mode; first: {}", .0.len(), .0[0])]
    Strict(Vec<IngestError>),
    #[error("corpus is empty")]
    Empty,
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Immutable, id-indexed set of validated patents.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<PatentDocument>,
    profiles: Vec<TechProfile>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Validates and indexes already-decoded documents. Line numbers in the
    /// returned errors are 1-based positions in `docs`.
    pub fn from_documents(docs: Vec<PatentDocument>) -> (Corpus, Vec<IngestError>) {
        let mut corpus = Corpus::default();
        let mut errors = Vec::new();
        let mut first_line = HashMap::new();
        for (i, doc) in docs.into_iter().enumerate() {
            if let Err(kind) = corpus.push(doc, i + 1, &mut first_line) {
                errors.push(IngestError { line: i + 1, kind });
            }
        }
        (corpus, errors)
    }

    fn push(
        &mut self,
        doc: PatentDocument,
        line: usize,
        first_line: &mut HashMap<String, usize>,
    ) -> Result<(), IngestErrorKind> {
        for (name, value) in [("id", &doc.id), ("title", &doc.title), ("abstract", &doc.abstract_text)] {
            if value.trim().is_empty() {
                return Err(IngestErrorKind::EmptyField(name));
            }
        }
        if doc.ipc_raw.is_empty() {
            return Err(IngestErrorKind::EmptyField("ipc"));
        }
        let keys = normalize_code_set(&doc.ipc_raw).map_err(IngestErrorKind::Ipc)?;
        if let Some(&first) = first_line.get(&doc.id) {
            return Err(IngestErrorKind::DuplicateId {
                id: doc.id,
                first_line: first,
            });
        }
        let profile = TechProfile::new(doc.id.clone(), keys).expect("normalize_code_set never returns an empty set");
        first_line.insert(doc.id.clone(), line);
        self.index.insert(doc.id.clone(), self.docs.len());
        self.docs.push(doc);
        self.profiles.push(profile);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PatentDocument> {
        self.index.get(id).map(|&i| &self.docs[i])
    }

    pub fn profile(&self, id: &str) -> Option<&TechProfile> {
        self.index.get(id).map(|&i| &self.profiles[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn documents(&self) -> &[PatentDocument] {
        &self.docs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PatentDocument, &TechProfile)> {
        self.docs.iter().zip(&self.profiles)
    }

    /// Serializes accepted documents back to JSONL in ingest order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for doc in &self.docs {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Result of a fail-soft ingest: the accepted corpus plus per-line rejections.
#[derive(Debug, Clone)]
pub struct Ingest {
    pub corpus: Corpus,
    pub rejected: Vec<IngestError>,
}

#[derive(Deserialize)]
struct RawDocument {
    id: Option<String>,
    title: Option<String>,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    ipc: Option<Vec<String>>,
    grant_year: Option<i32>,
}

impl RawDocument {
    fn into_document(self) -> Result<PatentDocument, IngestErrorKind> {
        Ok(PatentDocument {
            id: self.id.ok_or(IngestErrorKind::MissingField("id"))?,
            title: self.title.ok_or(IngestErrorKind::MissingField("title"))?,
            abstract_text: self.abstract_text.ok_or(IngestErrorKind::MissingField("abstract"))?,
            ipc_raw: self.ipc.ok_or(IngestErrorKind::MissingField("ipc"))?,
            grant_year: self.grant_year,
        })
    }
}

/// Reads one JSON patent object per line. Blank lines are skipped.
///
/// Bad lines are collected into [`Ingest::rejected`]; with `strict` set any
/// rejection fails the whole load instead.
pub fn load_corpus<R: BufRead>(reader: R, strict: bool) -> Result<Ingest, CorpusError> {
    let mut corpus = Corpus::default();
    let mut rejected = Vec::new();
    let mut first_line = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = serde_json::from_str::<RawDocument>(&line)
            .map_err(|e| IngestErrorKind::Json(e.to_string()))
            .and_then(RawDocument::into_document)
            .and_then(|doc| corpus.push(doc, line_no, &mut first_line));
        if let Err(kind) = result {
            rejected.push(IngestError { line: line_no, kind });
        }
    }
    if strict && !rejected.is_empty() {
        return Err(CorpusError::Strict(rejected));
    }
    Ok(Ingest { corpus, rejected })
}

/// An ordered pair of patents, optionally carrying panel ratings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatentPair {
    pub id_a: String,
    pub id_b: String,
    pub rating: Option<RatingRecord>,
}

impl PatentPair {
    pub fn new(id_a: impl Into<String>, id_b: impl Into<String>) -> Self {
        Self {
            id_a: id_a.into(),
            id_b: id_b.into(),
            rating: None,
        }
    }

    pub fn ids(&self) -> (&str, &str) {
        (&self.id_a, &self.id_b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PairErrorKind {
    #[error("self-pair {0:?}")]
    SelfPair(String),
    #[error("unresolved patent id {0:?}")]
    UnknownId(String),
    #[error("column {column}: invalid rating {value:?}")]
    BadRating { column: &'static str, value: String },
    #[error("expected 2, 5 or 6 columns, found {0}")]
    FieldCount(usize),
    #[error("CSV error: {0}")]
    Csv(String),
}

/// A rejected pair row. `row` is the 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("row {row}: {kind}")]
pub struct PairError {
    pub row: usize,
    pub kind: PairErrorKind,
}

#[derive(Debug, Clone, Default)]
pub struct PairLoad {
    pub pairs: Vec<PatentPair>,
    pub errors: Vec<PairError>,
}

const RATING_COLUMNS: [&str; 4] = ["r1", "r2", "r3", "expert"];

fn parse_rating(column: &'static str, value: &str) -> Result<RatingScore, PairErrorKind> {
    value.parse().map_err(|_| PairErrorKind::BadRating {
        column,
        value: value.to_string(),
    })
}

fn parse_pair_row(fields: &[&str], corpus: &Corpus) -> Result<PatentPair, PairErrorKind> {
    if !matches!(fields.len(), 2 | 5 | 6) {
        return Err(PairErrorKind::FieldCount(fields.len()));
    }
    let (a, b) = (fields[0], fields[1]);
    if a == b {
        return Err(PairErrorKind::SelfPair(a.to_string()));
    }
    for id in [a, b] {
        if !corpus.contains(id) {
            return Err(PairErrorKind::UnknownId(id.to_string()));
        }
    }
    let rating = if fields.len() >= 5 {
        let r1 = parse_rating(RATING_COLUMNS[0], fields[2])?;
        let r2 = parse_rating(RATING_COLUMNS[1], fields[3])?;
        let r3 = parse_rating(RATING_COLUMNS[2], fields[4])?;
        let expert = match fields.get(5) {
            Some(v) if !v.is_empty() => Some(parse_rating(RATING_COLUMNS[3], v)?),
            _ => None,
        };
        Some(RatingRecord::new(r1, r2, r3, expert))
    } else {
        None
    };
    Ok(PatentPair {
        id_a: a.to_string(),
        id_b: b.to_string(),
        rating,
    })
}

/// Reads `id_a,id_b[,r1,r2,r3[,expert]]` rows. A leading header row starting
/// with `id_a` is skipped. Every id must resolve in `corpus`.
pub fn load_pairs<R: Read>(reader: R, corpus: &Corpus) -> PairLoad {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut load = PairLoad::default();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map_or(row, |p| p.line() as usize);
                load.errors.push(PairError {
                    row,
                    kind: PairErrorKind::Csv(e.to_string()),
                });
                continue;
            }
        };
        let row = record.position().map_or(row, |p| p.line() as usize);
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && fields[0] == "id_a" {
            continue;
        }
        match parse_pair_row(&fields, corpus) {
            Ok(p) => load.pairs.push(p),
            Err(kind) => load.errors.push(PairError { row, kind }),
        }
    }
    load
}

/// Writes pairs with the canonical header. Rating columns are emitted only
/// when at least one pair carries ratings.
pub fn write_pairs<W: Write>(pairs: &[PatentPair], out: W) -> Result<(), CorpusError> {
    let rated = pairs.iter().any(|p| p.rating.is_some());
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    if rated {
        w.write_record(["id_a", "id_b", "r1", "r2", "r3", "expert"])?;
    } else {
        w.write_record(["id_a", "id_b"])?;
    }
    for p in pairs {
        match &p.rating {
            Some(r) => w.write_record([
                p.id_a.clone(),
                p.id_b.clone(),
                r.r1.to_string(),
                r.r2.to_string(),
                r.r3.to_string(),
                r.expert.map(|e| e.to_string()).unwrap_or_default(),
            ])?,
            None => w.write_record([&p.id_a, &p.id_b])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Distribution of per-patent three-level IPC key counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation (divides by `count`).
    pub sd: f64,
    /// key count → number of patents with that many keys.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let counts: Vec<f64> = corpus.profiles.iter().map(|p| p.len() as f64).collect();
    let (mean, sd) = crate::scalar::mean_and_population_sd(&counts).ok_or(CorpusError::Empty)?;
    let mut histogram = BTreeMap::new();
    for p in &corpus.profiles {
        *histogram.entry(p.len()).or_insert(0) += 1;
    }
    Ok(CorpusStats {
        count: corpus.len(),
        mean,
        sd,
        histogram,
    })
}

/// Distinct keys across the corpus, e.g. for vocabulary reports.
pub fn key_universe(corpus: &Corpus) -> BTreeSet<IpcKey3> {
    corpus.profiles.iter().flat_map(|p| p.keys().iter().copied()).collect()
}
