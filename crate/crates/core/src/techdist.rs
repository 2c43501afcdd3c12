//! Technological distance: Jaccard similarity of two patents' three-level
//! IPC key sets. Despite the name, 1.0 means identical technology fields.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ipc::{normalize_code_set, IpcKey3, IpcSetError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TechDistError {
    #[error("patent {0:?} has an empty IPC key set")]
    EmptyProfile(String),
    #[error("patent {patent_id:?}: {source}")]
    Ipc {
        patent_id: String,
        #[source]
        source: IpcSetError,
    },
}

/// A patent's deduplicated set of three-level IPC keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechProfile {
    patent_id: String,
    keys: BTreeSet<IpcKey3>,
}

impl TechProfile {
    pub fn new(patent_id: impl Into<String>, keys: BTreeSet<IpcKey3>) -> Result<Self, TechDistError> {
        let patent_id = patent_id.into();
        if keys.is_empty() {
            return Err(TechDistError::EmptyProfile(patent_id));
        }
        Ok(Self { patent_id, keys })
    }

    pub fn from_raw<S: AsRef<str>>(patent_id: impl Into<String>, raws: &[S]) -> Result<Self, TechDistError> {
        let patent_id = patent_id.into();
        match normalize_code_set(raws) {
            Ok(keys) => Self::new(patent_id, keys),
            Err(source) => Err(TechDistError::Ipc { patent_id, source }),
        }
    }

    pub fn patent_id(&self) -> &str {
        &self.patent_id
    }

    pub fn keys(&self) -> &BTreeSet<IpcKey3> {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// `|a ∩ b| / |a ∪ b|` over arbitrary ordered sets. `None` when both are empty.
pub fn jaccard<T: Scalar, K: Ord>(a: &BTreeSet<K>, b: &BTreeSet<K>) -> Option<T> {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    (union > 0).then(|| T::of_usize(inter) / T::of_usize(union))
}

/// Technological distance between two profiles, in `[0, 1]`.
pub fn jaccard_td<T: Scalar>(a: &TechProfile, b: &TechProfile) -> Result<T, TechDistError> {
    for p in [a, b] {
        if p.keys.is_empty() {
            return Err(TechDistError::EmptyProfile(p.patent_id.clone()));
        }
    }
    Ok(jaccard(&a.keys, &b.keys).unwrap_or_else(T::zero))
}
