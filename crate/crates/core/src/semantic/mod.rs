//! Semantic distance over mean-pooled document embeddings.
//!
//! A provider turns `title + ". " + abstract` into one vector per token; the
//! core averages those rows, takes the cosine of two averaged vectors and maps
//! it affinely from `[-1, 1]` onto `[0, 1]`.

mod cache;
mod remote;
mod stub;

pub use cache::{CacheError, CacheProvider, VectorCache, CACHE_MAGIC, CACHE_VERSION};
pub use remote::{EmbedRequestBody, EmbedResponseBody, InfoResponse, RemoteProvider, MAX_REMOTE_BATCH};
pub use stub::{tokenize, StubProvider, STUB_DIMENSION};

use thiserror::Error;

use crate::corpus::PatentDocument;
use crate::scalar::Scalar;

/// Separator placed between title and abstract before embedding.
pub const TITLE_ABSTRACT_DELIMITER: &str = ". ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider {model_id}: transport error: {message}")]
    Transport { model_id: String, message: String },
    #[error("provider {model_id}: malformed response: {message}")]
    Protocol { model_id: String, message: String },
    #[error("provider {model_id}: no vectors for patent {patent_id:?}")]
    Missing { model_id: String, patent_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticError {
    #[error("patent {patent_id:?}: {field} is empty")]
    EmptyField { patent_id: String, field: &'static str },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("provider {model_id} broke its contract for {patent_id:?}: {message}")]
    ContractViolation {
        model_id: String,
        patent_id: String,
        message: String,
    },
    #[error("invalid embedding matrix: {0}")]
    InvalidMatrix(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector for patent {0:?}")]
    ZeroVector(String),
}

/// Row-major `n × d` token vectors for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    patent_id: String,
    model_id: String,
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(
        patent_id: impl Into<String>,
        model_id: impl Into<String>,
        rows: usize,
        dim: usize,
        data: Vec<T>,
    ) -> Result<Self, SemanticError> {
        if rows == 0 || dim == 0 {
            return Err(SemanticError::InvalidMatrix(format!("shape {rows}x{dim} is empty")));
        }
        if data.len() != rows * dim {
            return Err(SemanticError::InvalidMatrix(format!(
                "{} values for shape {rows}x{dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SemanticError::InvalidMatrix(format!(
                "non-finite value at row {}, column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self {
            patent_id: patent_id.into(),
            model_id: model_id.into(),
            rows,
            dim,
            data,
        })
    }

    pub fn from_rows(
        patent_id: impl Into<String>,
        model_id: impl Into<String>,
        rows: &[Vec<T>],
    ) -> Result<Self, SemanticError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(SemanticError::InvalidMatrix(format!(
                "ragged rows: {} vs {dim}",
                bad.len()
            )));
        }
        Self::new(patent_id, model_id, rows.len(), dim, rows.concat())
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingMatrix<U> {
        EmbeddingMatrix {
            patent_id: self.patent_id.clone(),
            model_id: self.model_id.clone(),
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

impl<T> EmbeddingMatrix<T> {
    pub fn patent_id(&self) -> &str {
        &self.patent_id
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Token count `n`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Average of a document's token vectors. Not normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector<T> {
    pub patent_id: String,
    pub model_id: String,
    pub v: Vec<T>,
}

impl<T: Scalar> MeanVector<T> {
    pub fn new(patent_id: impl Into<String>, model_id: impl Into<String>, v: Vec<T>) -> Self {
        Self {
            patent_id: patent_id.into(),
            model_id: model_id.into(),
            v,
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            v: self.v.iter().map(|&x| x * factor).collect(),
            ..self.clone()
        }
    }
}

/// Source of token-level document vectors.
///
/// Implementations must be deterministic: the same text under the same
/// `model_id` yields the same matrix. A provider that only has sentence-level
/// vectors reports `pooled() == true` and returns single-row matrices.
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;

    fn dimension(&self) -> usize;

    fn pooled(&self) -> bool {
        false
    }

    fn embed(&self, patent_id: &str, text: &str) -> Result<EmbeddingMatrix<f32>, ProviderError>;

    /// Batched variant; the default embeds one document at a time.
    fn embed_batch(&self, docs: &[(&str, &str)]) -> Result<Vec<EmbeddingMatrix<f32>>, ProviderError> {
        docs.iter().map(|(id, text)| self.embed(id, text)).collect()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn pooled(&self) -> bool {
        (**self).pooled()
    }

    fn embed(&self, patent_id: &str, text: &str) -> Result<EmbeddingMatrix<f32>, ProviderError> {
        (**self).embed(patent_id, text)
    }

    fn embed_batch(&self, docs: &[(&str, &str)]) -> Result<Vec<EmbeddingMatrix<f32>>, ProviderError> {
        (**self).embed_batch(docs)
    }
}

/// Text fed to the provider for a document.
pub fn document_text(doc: &PatentDocument) -> String {
    format!(
        "{}{TITLE_ABSTRACT_DELIMITER}{}",
        doc.title.trim(),
        doc.abstract_text.trim()
    )
}

fn check_document(doc: &PatentDocument) -> Result<(), SemanticError> {
    if doc.title.trim().is_empty() {
        return Err(SemanticError::EmptyField {
            patent_id: doc.id.clone(),
            field: "title",
        });
    }
    if doc.abstract_text.trim().is_empty() {
        return Err(SemanticError::EmptyField {
            patent_id: doc.id.clone(),
            field: "abstract",
        });
    }
    Ok(())
}

fn check_contract<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    patent_id: &str,
    m: &EmbeddingMatrix<f32>,
) -> Result<(), SemanticError> {
    let violation = |message: String| SemanticError::ContractViolation {
        model_id: provider.model_id().to_string(),
        patent_id: patent_id.to_string(),
        message,
    };
    if m.dim() != provider.dimension() {
        return Err(violation(format!(
            "returned dimension {} but declares {}",
            m.dim(),
            provider.dimension()
        )));
    }
    if m.model_id() != provider.model_id() {
        return Err(violation(format!("returned vectors from model {}", m.model_id())));
    }
    if m.patent_id() != patent_id {
        return Err(violation(format!("returned vectors for {:?}", m.patent_id())));
    }
    if provider.pooled() && m.rows() != 1 {
        return Err(violation(format!(
            "declares pooled output but returned {} rows",
            m.rows()
        )));
    }
    Ok(())
}

/// Embeds one document's title and abstract, checking the provider contract.
pub fn embed_document<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    doc: &PatentDocument,
) -> Result<EmbeddingMatrix<f32>, SemanticError> {
    check_document(doc)?;
    let m = provider.embed(&doc.id, &document_text(doc))?;
    check_contract(provider, &doc.id, &m)?;
    Ok(m)
}

/// Batched [`embed_document`]; output order follows `docs`.
pub fn embed_documents<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    docs: &[&PatentDocument],
) -> Result<Vec<EmbeddingMatrix<f32>>, SemanticError> {
    for doc in docs {
        check_document(doc)?;
    }
    let texts: Vec<String> = docs.iter().map(|d| document_text(d)).collect();
    let requests: Vec<(&str, &str)> = docs
        .iter()
        .zip(&texts)
        .map(|(d, t)| (d.id.as_str(), t.as_str()))
        .collect();
    let matrices = provider.embed_batch(&requests)?;
    if matrices.len() != docs.len() {
        return Err(SemanticError::ContractViolation {
            model_id: provider.model_id().to_string(),
            patent_id: docs.first().map(|d| d.id.clone()).unwrap_or_default(),
            message: format!("{} matrices for {} documents", matrices.len(), docs.len()),
        });
    }
    for (doc, m) in docs.iter().zip(&matrices) {
        check_contract(provider, &doc.id, m)?;
    }
    Ok(matrices)
}

/// Component-wise mean over the matrix rows.
pub fn mean_pool<T: Scalar>(m: &EmbeddingMatrix<T>) -> MeanVector<T> {
    let mut acc = vec![T::zero(); m.dim];
    for row in m.data.chunks_exact(m.dim) {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a = *a + x;
        }
    }
    let n = T::of_usize(m.rows);
    MeanVector {
        patent_id: m.patent_id.clone(),
        model_id: m.model_id.clone(),
        v: acc.into_iter().map(|s| s / n).collect(),
    }
}

/// Cosine of two raw vectors, clamped into `[-1, 1]`.
pub fn cosine_slices<T: Scalar>(a: &[T], b: &[T]) -> Result<T, SemanticError> {
    if a.len() != b.len() {
        return Err(SemanticError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut dot, mut aa, mut bb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        aa = aa + x * x;
        bb = bb + y * y;
    }
    if aa == T::zero() {
        return Err(SemanticError::ZeroVector("left".into()));
    }
    if bb == T::zero() {
        return Err(SemanticError::ZeroVector("right".into()));
    }
    Ok((dot / (aa * bb).sqrt()).clamp_to(-T::one(), T::one()))
}

pub fn cosine<T: Scalar>(a: &MeanVector<T>, b: &MeanVector<T>) -> Result<T, SemanticError> {
    cosine_slices(&a.v, &b.v).map_err(|e| match e {
        SemanticError::ZeroVector(side) => SemanticError::ZeroVector(if side == "left" {
            a.patent_id.clone()
        } else {
            b.patent_id.clone()
        }),
        other => other,
    })
}

/// Maps a cosine in `[-1, 1]` onto `[0, 1]`.
pub fn sd_from_cosine<T: Scalar>(cos: T) -> T {
    (cos + T::one()) / T::two()
}

/// Semantic distance in `[0, 1]`; 1 means same direction.
pub fn semantic_distance<T: Scalar>(a: &MeanVector<T>, b: &MeanVector<T>) -> Result<T, SemanticError> {
    cosine(a, b).map(sd_from_cosine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn mv(v: &[f64]) -> MeanVector<f64> {
        MeanVector::new("x", "m", v.to_vec())
    }

    fn doc(id: &str, title: &str, abs: &str) -> PatentDocument {
        PatentDocument {
            id: id.into(),
            title: title.into(),
            abstract_text: abs.into(),
            ipc_raw: vec!["G06F".into()],
            grant_year: None,
        }
    }

    #[test]
    fn matrix_validation() {
        assert!(EmbeddingMatrix::<f64>::new("p", "m", 0, 3, vec![]).is_err());
        assert!(EmbeddingMatrix::<f64>::new("p", "m", 1, 0, vec![]).is_err());
        assert!(EmbeddingMatrix::new("p", "m", 2, 2, vec![1.0f64, 2.0, 3.0]).is_err());
        assert!(EmbeddingMatrix::new("p", "m", 1, 2, vec![1.0f64, f64::NAN]).is_err());
        assert!(EmbeddingMatrix::from_rows("p", "m", &[vec![1.0f64], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn mean_pool_examples() {
        let same =
            EmbeddingMatrix::from_rows("p", "m", &[vec![1.5f64, -2.0], vec![1.5, -2.0], vec![1.5, -2.0]]).unwrap();
        assert_eq!(mean_pool(&same).v, vec![1.5, -2.0]);
        let axes = EmbeddingMatrix::from_rows("p", "m", &[vec![1.0f64, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(mean_pool(&axes).v, vec![0.5, 0.5]);
        let single = EmbeddingMatrix::from_rows("p", "m", &[vec![0.25f32, 7.0, -1.0]]).unwrap();
        assert_eq!(mean_pool(&single).v, vec![0.25, 7.0, -1.0]);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&mv(&[0.3, -0.7, 2.0]), &mv(&[0.3, -0.7, 2.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&mv(&[1.0, 0.0]), &mv(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((cosine(&mv(&[1.0, 2.0]), &mv(&[2.0, 4.0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine(&mv(&[1.0, 0.0]), &mv(&[1.0])),
            Err(SemanticError::DimensionMismatch { left: 2, right: 1 })
        );
        let zero = MeanVector::new("Z", "m", vec![0.0f64, 0.0]);
        assert_eq!(
            cosine(&mv(&[1.0, 0.0]), &zero),
            Err(SemanticError::ZeroVector("Z".into()))
        );
    }

    #[test]
    fn sd_examples() {
        assert_eq!(sd_from_cosine(1.0f64), 1.0);
        assert_eq!(sd_from_cosine(-1.0f64), 0.0);
        assert_eq!(sd_from_cosine(0.0f64), 0.5);
        assert_eq!(semantic_distance(&mv(&[1.0, 0.0]), &mv(&[-3.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn embed_document_preconditions_and_contract() {
        let stub = StubProvider::new(7);
        let d = doc("P1", "Neural parser", "Parses things with networks.");
        let m1 = embed_document(&stub, &d).unwrap();
        let m2 = embed_document(&stub, &d).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.dim(), 16);
        assert!(m1.rows() >= 1);
        assert_eq!(
            embed_document(&stub, &doc("P2", "Title", "  ")),
            Err(SemanticError::EmptyField {
                patent_id: "P2".into(),
                field: "abstract"
            })
        );
    }

    struct LyingProvider;

    impl EmbeddingProvider for LyingProvider {
        fn model_id(&self) -> &str {
            "liar"
        }
        fn dimension(&self) -> usize {
            4
        }
        fn embed(&self, patent_id: &str, _text: &str) -> Result<EmbeddingMatrix<f32>, ProviderError> {
            Ok(EmbeddingMatrix::new(patent_id, "liar", 1, 3, vec![1.0, 2.0, 3.0]).unwrap())
        }
    }

    #[test]
    fn inconsistent_dimension_is_contract_violation() {
        let err = embed_document(&LyingProvider, &doc("P1", "T", "A")).unwrap_err();
        assert!(matches!(err, SemanticError::ContractViolation { ref model_id, .. } if model_id == "liar"));
        let d = doc("P1", "T", "A");
        assert!(matches!(
            embed_documents(&LyingProvider, &[&d]),
            Err(SemanticError::ContractViolation { .. })
        ));
    }

    #[test]
    fn document_text_joins_title_and_abstract() {
        assert_eq!(document_text(&doc("P", " Widget ", "A widget.")), "Widget. A widget.");
    }

    #[test]
    fn same_document_twice_has_sd_one() {
        let stub = StubProvider::new(1);
        let d = doc("P1", "Battery electrode", "A lithium electrode coating.");
        let a = mean_pool(&embed_document(&stub, &d).unwrap().cast::<f64>());
        let b = mean_pool(&embed_document(&stub, &d).unwrap().cast::<f64>());
        assert!((semantic_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Column-major double loop, independent of the row-chunked accumulation.
    fn naive_mean(m: &EmbeddingMatrix<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(m.dim());
        for j in 0..m.dim() {
            let mut s = 0.0;
            for i in 0..m.rows() {
                s += m.as_slice()[i * m.dim() + j];
            }
            out.push(s / m.rows() as f64);
        }
        out
    }

    #[test]
    fn mean_pool_matches_naive_oracle_large() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for &(n, d) in &[(1, 1), (3, 7), (64, 384), (512, 1024)] {
            let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = EmbeddingMatrix::new("p", "m", n, d, data).unwrap();
            let got = mean_pool(&m).v;
            for (g, e) in got.iter().zip(naive_mean(&m)) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    fn arb_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn sd_symmetric_ranged_and_scale_invariant(
            (a, b) in (1usize..32).prop_flat_map(|d| (arb_vec(d), arb_vec(d))),
            la in 0.01f64..100.0,
            lb in 0.01f64..100.0,
        ) {
            let (va, vb) = (mv(&a), mv(&b));
            let sd = semantic_distance(&va, &vb).unwrap();
            prop_assert_eq!(sd, semantic_distance(&vb, &va).unwrap());
            prop_assert!((0.0..=1.0).contains(&sd));
            let c = cosine(&va, &vb).unwrap();
            let cs = cosine(&va.scaled(la), &vb.scaled(lb)).unwrap();
            prop_assert!((c - cs).abs() < 1e-12);
        }

        #[test]
        fn sd_in_range_over_random_matrices(seed in any::<u64>(), n in 1usize..20, d in 1usize..40) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut make = || {
                let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                mean_pool(&EmbeddingMatrix::new("p", "m", n, d, data).unwrap())
            };
            let (a, b) = (make(), make());
            let sd = semantic_distance(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&sd));
        }
    }
}
