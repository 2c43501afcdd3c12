//! Hybrid SDTD score and the scoring drivers built on it.
//!
//! `sdtd = (td + 1) · sd / 2`: technological overlap scales semantic
//! similarity by a factor in `[1/2, 1]`, so `sdtd <= sd` always, with
//! equality only when the IPC key sets coincide.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::marker::PhantomData;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, PatentDocument};
use crate::scalar::Scalar;
use crate::semantic::{
    embed_documents, mean_pool, semantic_distance, EmbeddingProvider, MeanVector, SemanticError, MAX_REMOTE_BATCH,
};
use crate::techdist::{jaccard_td, TechDistError};

type PooledChunk<'c, T> = (Vec<&'c PatentDocument>, Result<Vec<MeanVector<T>>, SemanticError>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("unknown patent id {0:?}")]
    UnknownId(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    TechDist(#[from] TechDistError),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// Hybrid similarity from semantic and technological distance, both in `[0, 1]`.
pub fn sdtd<T: Scalar>(sd: T, td: T) -> Result<T, ScoreError> {
    for (name, v) in [("sd", sd), ("td", td)] {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(ScoreError::OutOfRange {
                name,
                value: v.as_f64(),
            });
        }
    }
    Ok((td + T::one()) * sd / T::two())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport<T> {
    pub id_a: String,
    pub id_b: String,
    pub sd: T,
    pub td: T,
    pub sdtd: T,
    pub model_id: String,
}

/// Per-pair results of a batch, in input order.
#[derive(Debug, Clone)]
pub struct ScoreBatch<T> {
    pub results: Vec<Result<SimilarityReport<T>, ScoreError>>,
}

impl<T: Clone> ScoreBatch<T> {
    /// All reports, or the first error by input position.
    pub fn strict(self) -> Result<Vec<SimilarityReport<T>>, (usize, ScoreError)> {
        self.results
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| (i, e)))
            .collect()
    }

    /// Successful reports plus `(input index, error)` for the failures.
    pub fn split(self) -> (Vec<SimilarityReport<T>>, Vec<(usize, ScoreError)>) {
        let mut ok = Vec::new();
        let mut errs = Vec::new();
        for (i, r) in self.results.into_iter().enumerate() {
            match r {
                Ok(rep) => ok.push(rep),
                Err(e) => errs.push((i, e)),
            }
        }
        (ok, errs)
    }
}

/// Scores patent pairs from one corpus through one provider.
///
/// Mean vectors are memoized per patent id, so each document is embedded at
/// most once for the scorer's lifetime. With `jobs` set, work runs on a
/// dedicated pool of that many threads; results never depend on it.
pub struct Scorer<'a, T: Scalar = f64> {
    corpus: &'a Corpus,
    provider: &'a dyn EmbeddingProvider,
    pool: Option<rayon::ThreadPool>,
    memo: Mutex<HashMap<String, MeanVector<T>>>,
    _scalar: PhantomData<T>,
}

impl<'a, T: Scalar> Scorer<'a, T> {
    pub fn new(corpus: &'a Corpus, provider: &'a dyn EmbeddingProvider) -> Self {
        Self {
            corpus,
            provider,
            pool: None,
            memo: Mutex::new(HashMap::new()),
            _scalar: PhantomData,
        }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Result<Self, ScoreError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| ScoreError::Pool(e.to_string()))?;
        self.pool = Some(pool);
        Ok(self)
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    fn doc(&self, id: &str) -> Result<&'a PatentDocument, ScoreError> {
        self.corpus.get(id).ok_or_else(|| ScoreError::UnknownId(id.to_string()))
    }

    /// Embeds every listed id not yet memoized, batching provider calls.
    /// Returns per-id embedding failures; successes land in the memo.
    fn warm(&self, ids: &[&str]) -> HashMap<String, SemanticError> {
        let pending: Vec<&PatentDocument> = {
            let memo = self.memo.lock().expect("memo lock");
            let mut seen = HashSet::new();
            ids.iter()
                .filter(|id| !memo.contains_key(**id) && seen.insert(**id))
                .filter_map(|id| self.corpus.get(id))
                .collect()
        };
        if pending.is_empty() {
            return HashMap::new();
        }
        let provider = self.provider;
        let chunks: Vec<PooledChunk<'_, T>> = self.run(|| {
            pending
                .par_chunks(MAX_REMOTE_BATCH)
                .map(|chunk| {
                    let pooled = embed_documents(provider, chunk)
                        .map(|ms| ms.iter().map(|m| mean_pool(&m.cast::<T>())).collect());
                    (chunk.to_vec(), pooled)
                })
                .collect()
        });
        let mut failures = HashMap::new();
        let mut memo = self.memo.lock().expect("memo lock");
        for (docs, result) in chunks {
            match result {
                Ok(vectors) => {
                    for (d, v) in docs.iter().zip(vectors) {
                        memo.insert(d.id.clone(), v);
                    }
                }
                Err(_) => {
                    // retry singly so one bad document doesn't sink its chunk
                    for d in docs {
                        match embed_documents(provider, &[d]) {
                            Ok(ms) => {
                                memo.insert(d.id.clone(), mean_pool(&ms[0].cast::<T>()));
                            }
                            Err(single) => {
                                failures.insert(d.id.clone(), single);
                            }
                        }
                    }
                }
            }
        }
        failures
    }

    fn mean_vector(&self, id: &str) -> Result<MeanVector<T>, ScoreError> {
        self.doc(id)?;
        if let Some(v) = self.memo.lock().expect("memo lock").get(id) {
            return Ok(v.clone());
        }
        if let Some(e) = self.warm(&[id]).remove(id) {
            return Err(e.into());
        }
        Ok(self.memo.lock().expect("memo lock")[id].clone())
    }

    fn report(
        &self,
        id_a: &str,
        id_b: &str,
        va: &MeanVector<T>,
        vb: &MeanVector<T>,
    ) -> Result<SimilarityReport<T>, ScoreError> {
        let pa = self
            .corpus
            .profile(id_a)
            .ok_or_else(|| ScoreError::UnknownId(id_a.into()))?;
        let pb = self
            .corpus
            .profile(id_b)
            .ok_or_else(|| ScoreError::UnknownId(id_b.into()))?;
        let sd = semantic_distance(va, vb)?;
        let td = jaccard_td(pa, pb)?;
        Ok(SimilarityReport {
            id_a: id_a.to_string(),
            id_b: id_b.to_string(),
            sd,
            td,
            sdtd: sdtd(sd, td)?,
            model_id: self.provider.model_id().to_string(),
        })
    }

    pub fn score_pair(&self, id_a: &str, id_b: &str) -> Result<SimilarityReport<T>, ScoreError> {
        self.doc(id_a)?;
        self.doc(id_b)?;
        let va = self.mean_vector(id_a)?;
        let vb = self.mean_vector(id_b)?;
        self.report(id_a, id_b, &va, &vb)
    }

    /// One result per input pair, in input order. Failures are reported in
    /// place and do not abort the batch.
    pub fn score_corpus<S: AsRef<str> + Sync>(&self, pairs: &[(S, S)]) -> ScoreBatch<T> {
        let ids: Vec<&str> = pairs.iter().flat_map(|(a, b)| [a.as_ref(), b.as_ref()]).collect();
        let failures = self.warm(&ids);
        let memo = self.memo.lock().expect("memo lock").clone();
        let lookup = |id: &str| -> Result<&MeanVector<T>, ScoreError> {
            if !self.corpus.contains(id) {
                return Err(ScoreError::UnknownId(id.to_string()));
            }
            if let Some(e) = failures.get(id) {
                return Err(e.clone().into());
            }
            Ok(&memo[id])
        };
        let results = self.run(|| {
            pairs
                .par_iter()
                .map(|(a, b)| {
                    let (a, b) = (a.as_ref(), b.as_ref());
                    let va = lookup(a)?;
                    let vb = lookup(b)?;
                    self.report(a, b, va, vb)
                })
                .collect()
        });
        ScoreBatch { results }
    }

    /// Every unordered pair `(i, j)`, `i < j`, in corpus order.
    pub fn score_all_pairs(&self) -> ScoreBatch<T> {
        let docs = self.corpus.documents();
        let pairs: Vec<(&str, &str)> = (0..docs.len())
            .flat_map(|i| (i + 1..docs.len()).map(move |j| (i, j)))
            .map(|(i, j)| (docs[i].id.as_str(), docs[j].id.as_str()))
            .collect();
        self.score_corpus(&pairs)
    }

    /// The `k` patents most similar to `query_id` by SDTD, best first. Ties
    /// go to the lexicographically smaller patent id.
    pub fn topk_neighbors(&self, query_id: &str, k: usize) -> Result<Vec<SimilarityReport<T>>, ScoreError> {
        if k == 0 {
            return Err(ScoreError::InvalidK);
        }
        self.doc(query_id)?;
        let pairs: Vec<(&str, &str)> = self
            .corpus
            .documents()
            .iter()
            .filter(|d| d.id != query_id)
            .map(|d| (query_id, d.id.as_str()))
            .collect();
        let mut reports = self.score_corpus(&pairs).strict().map_err(|(_, e)| e)?;
        sort_by_sdtd(&mut reports);
        reports.truncate(k);
        Ok(reports)
    }
}

/// Descending SDTD, ascending `id_b` on ties.
pub fn sort_by_sdtd<T: Scalar>(reports: &mut [SimilarityReport<T>]) {
    reports.sort_by(|x, y| {
        y.sdtd
            .partial_cmp(&x.sdtd)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| x.id_b.cmp(&y.id_b))
    });
}

/// Fixed six-decimal rendering used by every report format.
pub fn fixed6<T: Scalar>(v: T) -> String {
    format!("{:.6}", v.as_f64())
}

pub fn write_reports_csv<T: Scalar, W: Write>(reports: &[SimilarityReport<T>], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id_a", "id_b", "sd", "td", "sdtd"])?;
    for r in reports {
        w.write_record([
            r.id_a.clone(),
            r.id_b.clone(),
            fixed6(r.sd),
            fixed6(r.td),
            fixed6(r.sdtd),
        ])?;
    }
    w.flush()
}

fn json_fixed6<T: Scalar>(v: T) -> Box<serde_json::value::RawValue> {
    serde_json::value::RawValue::from_string(fixed6(v)).expect("fixed-point float is valid JSON")
}

#[derive(Serialize)]
struct ReportLine<'a> {
    id_a: &'a str,
    id_b: &'a str,
    sd: Box<serde_json::value::RawValue>,
    td: Box<serde_json::value::RawValue>,
    sdtd: Box<serde_json::value::RawValue>,
    model_id: &'a str,
}

pub fn write_reports_jsonl<T: Scalar, W: Write>(reports: &[SimilarityReport<T>], mut out: W) -> std::io::Result<()> {
    for r in reports {
        let line = ReportLine {
            id_a: &r.id_a,
            id_b: &r.id_b,
            sd: json_fixed6(r.sd),
            td: json_fixed6(r.td),
            sdtd: json_fixed6(r.sdtd),
            model_id: &r.model_id,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
