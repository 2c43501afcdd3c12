use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{EmbeddingMatrix, EmbeddingProvider, ProviderError};

pub const STUB_DIMENSION: usize = 16;

/// Weight of the positional component relative to the token component.
const POSITION_WEIGHT: f32 = 0.1;

/// Deterministic offline provider.
///
/// Each token's vector is a pseudo-random function of `(seed, token)` plus a
/// smaller pseudo-random function of `(seed, position)`, so documents sharing
/// vocabulary land close together after mean pooling. No model, no network.
#[derive(Debug, Clone)]
pub struct StubProvider {
    seed: u64,
    model_id: String,
}

impl StubProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            model_id: format!("stub-d{STUB_DIMENSION}-seed{seed}"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn hashed_vector(&self, tag: &[u8], payload: &[u8]) -> [f32; STUB_DIMENSION] {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(tag);
        h.update((payload.len() as u64).to_le_bytes());
        h.update(payload);
        let mut key = [0u8; 32];
        key.copy_from_slice(&h.finalize());
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut out = [0f32; STUB_DIMENSION];
        for v in &mut out {
            *v = rng.gen_range(-1.0f32..1.0);
        }
        out
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl EmbeddingProvider for StubProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        STUB_DIMENSION
    }

    fn embed(&self, patent_id: &str, text: &str) -> Result<EmbeddingMatrix<f32>, ProviderError> {
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            // punctuation-only text still gets one deterministic row
            tokens.push(text.to_string());
        }
        let mut data = Vec::with_capacity(tokens.len() * STUB_DIMENSION);
        for (pos, tok) in tokens.iter().enumerate() {
            let t = self.hashed_vector(b"tok", tok.as_bytes());
            let p = self.hashed_vector(b"pos", &(pos as u64).to_le_bytes());
            data.extend(t.iter().zip(&p).map(|(a, b)| a + POSITION_WEIGHT * b));
        }
        EmbeddingMatrix::new(patent_id, self.model_id.clone(), tokens.len(), STUB_DIMENSION, data).map_err(|e| {
            ProviderError::Protocol {
                model_id: self.model_id.clone(),
                message: e.to_string(),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::{mean_pool, semantic_distance};

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = StubProvider::new(7).embed("P", "A solar panel mount").unwrap();
        let b = StubProvider::new(7).embed("P", "A solar panel mount").unwrap();
        let c = StubProvider::new(8).embed("P", "A solar panel mount").unwrap();
        assert_eq!(a, b);
        assert_ne!(a.as_slice(), c.as_slice());
        assert_eq!((a.rows(), a.dim()), (4, 16));
    }

    #[test]
    fn tokenization() {
        assert_eq!(
            tokenize("Neural-network, PARSER. v2"),
            ["neural", "network", "parser", "v2"]
        );
        let m = StubProvider::new(0).embed("P", "...").unwrap();
        assert_eq!(m.rows(), 1);
    }

    #[test]
    fn shared_vocabulary_raises_similarity() {
        let p = StubProvider::new(3);
        let sd = |x: &str, y: &str| {
            let a = mean_pool(&p.embed("a", x).unwrap().cast::<f64>());
            let b = mean_pool(&p.embed("b", y).unwrap().cast::<f64>());
            semantic_distance(&a, &b).unwrap()
        };
        let base = "rotor blade pitch control for wind turbine generator with hydraulic actuator";
        let near = "rotor blade pitch control for wind turbine generator with electric actuator";
        let far = "peptide sequence binding antibody fragment against tumour antigen expressed cells";
        assert!(sd(base, near) > sd(base, far));
    }
}
