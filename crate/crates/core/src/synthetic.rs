//! Seeded generator for rated patent-pair datasets with known structure.
//!
//! Each pair is built from two latent quantities drawn independently:
//!
//! * text overlap `o`: every token of document B is a copy of the token at
//!   the same position in document A with probability `o`, otherwise a fresh
//!   draw from the vocabulary;
//! * IPC overlap `j`: the exact Jaccard index of the two key sets, obtained by
//!   sharing `s` of A's one to three keys with B.
//!
//! Ground truth is `10 · (w·o' + (1−w)·j) + ε` where `o'` is the realized
//! fraction of copied tokens, `w` is [`SyntheticConfig::text_weight`] and `ε`
//! is small uniform noise. Three panelists rate it with independent uniform
//! error and their answers are snapped to the nearest scale value; the law
//! expert rates the noiseless truth. Everything is a pure function of the
//! seed.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{PatentDocument, PatentPair};
use crate::eval::{RatingRecord, RatingScore, RATING_SCALE};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub pairs: usize,
    pub tokens_per_doc: usize,
    pub vocabulary: usize,
    /// Size of the IPC key universe keys are drawn from.
    pub key_universe: usize,
    /// Share of ground truth explained by text overlap; the rest is IPC overlap.
    pub text_weight: f64,
    /// Half-width of the uniform noise added to the latent truth.
    pub truth_noise: f64,
    /// Half-width of each panelist's uniform rating error.
    pub rater_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            pairs: 200,
            tokens_per_doc: 40,
            vocabulary: 2000,
            key_universe: 40,
            text_weight: 0.5,
            truth_noise: 0.5,
            rater_noise: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub documents: Vec<PatentDocument>,
    pub pairs: Vec<PatentPair>,
    /// Latent truth per pair, before rating noise and scale snapping.
    pub latent: Vec<f64>,
}

/// The `i`-th key of a fixed universe of distinct three-level keys.
pub fn universe_key(i: usize) -> String {
    let section = (b'A' + (i % 8) as u8) as char;
    let class = 1 + (i / 8 * 7) % 99;
    let subclass = (b'B' + ((i / 8) % 24) as u8) as char;
    format!("{section}{class:02}{subclass}")
}

/// Nearest value on the rating scale; ties resolve downward.
pub fn snap_to_scale(x: f64) -> RatingScore {
    let best = RATING_SCALE
        .iter()
        .copied()
        .min_by(|a, b| {
            let (da, db) = ((x - *a as f64).abs(), (x - *b as f64).abs());
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    RatingScore::try_from(best as i64).expect("scale value")
}

fn word(rng: &mut ChaCha8Rng, vocabulary: usize) -> String {
    format!("w{:05}", rng.gen_range(0..vocabulary))
}

fn raw_codes(rng: &mut ChaCha8Rng, keys: &BTreeSet<usize>) -> Vec<String> {
    let mut out = Vec::new();
    for &k in keys {
        // one to three full codes per subclass, to exercise truncation
        for _ in 0..rng.gen_range(1..=3) {
            out.push(format!(
                "{}{}/{:02}",
                universe_key(k),
                rng.gen_range(1..100),
                rng.gen_range(0..100)
            ));
        }
    }
    out.shuffle(rng);
    out
}

pub fn generate(config: &SyntheticConfig) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut documents = Vec::with_capacity(config.pairs * 2);
    let mut pairs = Vec::with_capacity(config.pairs);
    let mut latent = Vec::with_capacity(config.pairs);
    let title_len = (config.tokens_per_doc / 6).max(1);

    for i in 0..config.pairs {
        let overlap: f64 = rng.gen_range(0.0..1.0);
        let tokens_a: Vec<String> = (0..config.tokens_per_doc)
            .map(|_| word(&mut rng, config.vocabulary))
            .collect();
        let mut copied = 0usize;
        let tokens_b: Vec<String> = tokens_a
            .iter()
            .map(|t| {
                if rng.gen_bool(overlap) {
                    copied += 1;
                    t.clone()
                } else {
                    word(&mut rng, config.vocabulary)
                }
            })
            .collect();
        let realized = copied as f64 / config.tokens_per_doc as f64;

        let universe: Vec<usize> = (0..config.key_universe).collect();
        let ka = rng.gen_range(1..=3usize);
        let keys_a: BTreeSet<usize> = universe.choose_multiple(&mut rng, ka).copied().collect();
        let shared = rng.gen_range(0..=ka);
        let kb = rng.gen_range(shared.max(1)..=3usize);
        let mut keys_b: BTreeSet<usize> = keys_a.iter().copied().take(shared).collect();
        let others: Vec<usize> = universe.iter().copied().filter(|k| !keys_a.contains(k)).collect();
        keys_b.extend(others.choose_multiple(&mut rng, kb - shared));
        let inter = keys_a.intersection(&keys_b).count();
        let jaccard = inter as f64 / (keys_a.len() + keys_b.len() - inter) as f64;

        let id_a = format!("S{}-{i:04}A", config.seed);
        let id_b = format!("S{}-{i:04}B", config.seed);
        for (id, tokens, keys) in [(&id_a, &tokens_a, &keys_a), (&id_b, &tokens_b, &keys_b)] {
            documents.push(PatentDocument {
                id: id.clone(),
                title: tokens[..title_len].join(" "),
                abstract_text: tokens[title_len..].join(" ") + ".",
                ipc_raw: raw_codes(&mut rng, keys),
                grant_year: Some(2000 + rng.gen_range(0..24)),
            });
        }

        let truth = 10.0 * (config.text_weight * realized + (1.0 - config.text_weight) * jaccard)
            + rng.gen_range(-config.truth_noise..=config.truth_noise);
        let mut rate = || snap_to_scale(truth + rng.gen_range(-config.rater_noise..=config.rater_noise));
        let (r1, r2, r3) = (rate(), rate(), rate());
        pairs.push(PatentPair {
            id_a,
            id_b,
            rating: Some(RatingRecord::new(r1, r2, r3, Some(snap_to_scale(truth)))),
        });
        latent.push(truth);
    }

    SyntheticDataset {
        documents,
        pairs,
        latent,
    }
}
