//! Expert-rating adjudication and correlation metrics.
//!
//! Panel ratings use a seven-value scale. When the three panelists disagree
//! too much (squared deviation from their mean reaching [`DISTANCE_THRESHOLD`])
//! the law expert's rating replaces the panel mean.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::SimilarityReport;
use crate::scalar::{mean_and_population_sd, Scalar};

/// Allowed rating values, from "totally different" (0) to "exactly same" (10).
pub const RATING_SCALE: [u8; 7] = [0, 1, 3, 5, 7, 9, 10];

/// Adjudication threshold on the panel's squared-deviation sum (inclusive).
pub const DISTANCE_THRESHOLD: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("rating {0} is not on the scale {{0,1,3,5,7,9,10}}")]
    InvalidRating(i64),
    #[error("pair {id_a},{id_b}: panel distance {distance:.6} >= {DISTANCE_THRESHOLD} requires a law-expert rating")]
    PendingExpert { id_a: String, id_b: String, distance: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation needs at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("correlation undefined: {0} sequence is constant")]
    ConstantInput(&'static str),
    #[error("non-finite value in {0} sequence")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct RatingScore(u8);

impl RatingScore {
    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for RatingScore {
    type Error = EvalError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match u8::try_from(v) {
            Ok(b) if RATING_SCALE.contains(&b) => Ok(RatingScore(b)),
            _ => Err(EvalError::InvalidRating(v)),
        }
    }
}

impl From<RatingScore> for u8 {
    fn from(r: RatingScore) -> u8 {
        r.0
    }
}

impl FromStr for RatingScore {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: i64 = s.trim().parse().map_err(|_| EvalError::InvalidRating(i64::MIN))?;
        v.try_into()
    }
}

impl fmt::Display for RatingScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Three panel ratings and, when collected, the law expert's rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub r1: RatingScore,
    pub r2: RatingScore,
    pub r3: RatingScore,
    pub expert: Option<RatingScore>,
}

impl RatingRecord {
    pub fn new(r1: RatingScore, r2: RatingScore, r3: RatingScore, expert: Option<RatingScore>) -> Self {
        Self { r1, r2, r3, expert }
    }

    /// Convenience constructor from raw integers.
    pub fn from_values(r1: i64, r2: i64, r3: i64, expert: Option<i64>) -> Result<Self, EvalError> {
        Ok(Self {
            r1: r1.try_into()?,
            r2: r2.try_into()?,
            r3: r3.try_into()?,
            expert: expert.map(RatingScore::try_from).transpose()?,
        })
    }

    fn panel(&self) -> [u32; 3] {
        [self.r1.0 as u32, self.r2.0 as u32, self.r3.0 as u32]
    }

    /// `9 × Σ(μ − rᵢ)²`, an exact integer since `3μ` is an integer.
    fn scaled_distance(&self) -> u32 {
        let r = self.panel();
        let sum: i64 = r.iter().map(|&v| v as i64).sum();
        r.iter()
            .map(|&v| {
                let d = 3 * v as i64 - sum;
                (d * d) as u32
            })
            .sum()
    }

    /// Squared-deviation sum of the three panel ratings around their mean.
    pub fn distance<T: Scalar>(&self) -> T {
        T::of_usize(self.scaled_distance() as usize) / T::of(9.0)
    }

    pub fn panel_mean<T: Scalar>(&self) -> T {
        let sum: u32 = self.panel().iter().sum();
        T::of_usize(sum as usize) / T::of(3.0)
    }

    /// Whether the panel disagreement routes this record to the law expert.
    /// Decided in exact integer arithmetic.
    pub fn needs_expert(&self) -> bool {
        self.scaled_distance() >= 9 * DISTANCE_THRESHOLD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    PanelMean,
    LawExpert,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::PanelMean => "panel_mean",
            Route::LawExpert => "law_expert",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjudicatedScore<T> {
    pub score: T,
    pub route: Route,
    pub distance: T,
}

/// Resolves a rating record to a single ground-truth score.
///
/// `pair` is only used to label a pending-expert error.
pub fn adjudicate<T: Scalar>(r: &RatingRecord, pair: (&str, &str)) -> Result<AdjudicatedScore<T>, EvalError> {
    let distance = r.distance::<T>();
    if r.needs_expert() {
        match r.expert {
            Some(e) => Ok(AdjudicatedScore {
                score: T::of_usize(e.0 as usize),
                route: Route::LawExpert,
                distance,
            }),
            None => Err(EvalError::PendingExpert {
                id_a: pair.0.to_string(),
                id_b: pair.1.to_string(),
                distance: distance.as_f64(),
            }),
        }
    } else {
        Ok(AdjudicatedScore {
            score: r.panel_mean(),
            route: Route::PanelMean,
            distance,
        })
    }
}

fn check_pair<T: Scalar>(x: &[T], y: &[T]) -> Result<(), EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(EvalError::TooFewObservations(x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite("first"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite("second"));
    }
    Ok(())
}

/// Pearson's product-moment correlation, clamped into `[-1, 1]`.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T, EvalError> {
    check_pair(x, y)?;
    let n = T::of_usize(x.len());
    let mx = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(EvalError::ConstantInput("first"));
    }
    if syy == T::zero() {
        return Err(EvalError::ConstantInput("second"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp_to(-T::one(), T::one()))
}

/// 1-based ranks; tied values share the average of the ranks they span.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = T::of_usize(i + 1 + j) / T::two();
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpearmanMode {
    /// Pearson correlation of average ranks. Exact under ties and equal to
    /// `1 − 6ΣD²/(n(n²−1))` when there are none.
    #[default]
    Standard,
    /// `1 − 6ΣD²/(n(n−1))` evaluated verbatim on average ranks. Not a proper
    /// correlation coefficient: it is not bounded by 1 in magnitude and is
    /// not clamped. Provided for side-by-side comparison only.
    PaperLiteral,
}

impl fmt::Display for SpearmanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpearmanMode::Standard => "standard",
            SpearmanMode::PaperLiteral => "paper-literal",
        })
    }
}

impl FromStr for SpearmanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(SpearmanMode::Standard),
            "paper-literal" => Ok(SpearmanMode::PaperLiteral),
            other => Err(format!("unknown spearman mode {other:?}")),
        }
    }
}

pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<T, EvalError> {
    spearman_with(x, y, SpearmanMode::Standard)
}

pub fn spearman_with<T: Scalar>(x: &[T], y: &[T], mode: SpearmanMode) -> Result<T, EvalError> {
    check_pair(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    match mode {
        SpearmanMode::Standard => pearson(&rx, &ry),
        SpearmanMode::PaperLiteral => {
            let first = x[0];
            if x.iter().all(|&v| v == first) {
                return Err(EvalError::ConstantInput("first"));
            }
            let first = y[0];
            if y.iter().all(|&v| v == first) {
                return Err(EvalError::ConstantInput("second"));
            }
            let n = T::of_usize(x.len());
            let d2 = rx
                .iter()
                .zip(&ry)
                .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
            Ok(T::one() - T::of(6.0) * d2 / (n * (n - T::one())))
        }
    }
}

/// Which report score is correlated against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreField {
    Sd,
    Td,
    Sdtd,
}

impl ScoreField {
    pub fn pick<T: Scalar>(self, r: &SimilarityReport<T>) -> T {
        match self {
            ScoreField::Sd => r.sd,
            ScoreField::Td => r.td,
            ScoreField::Sdtd => r.sdtd,
        }
    }
}

impl fmt::Display for ScoreField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreField::Sd => "sd",
            ScoreField::Td => "td",
            ScoreField::Sdtd => "sdtd",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary<T> {
    pub n: usize,
    pub field: ScoreField,
    pub spearman_mode: SpearmanMode,
    pub pearson: T,
    pub spearman: T,
    pub truth_mean: T,
    pub truth_sd: T,
    pub score_mean: T,
    pub score_sd: T,
}

/// Correlates one score field of `reports` against adjudicated ground truth.
/// The two lists are aligned by position.
pub fn evaluate<T: Scalar>(
    reports: &[SimilarityReport<T>],
    truths: &[AdjudicatedScore<T>],
    field: ScoreField,
    mode: SpearmanMode,
) -> Result<EvalSummary<T>, EvalError> {
    let scores: Vec<T> = reports.iter().map(|r| field.pick(r)).collect();
    let truth: Vec<T> = truths.iter().map(|t| t.score).collect();
    let pearson = pearson(&scores, &truth)?;
    let spearman = spearman_with(&scores, &truth, mode)?;
    let (truth_mean, truth_sd) = mean_and_population_sd(&truth).unwrap_or_default();
    let (score_mean, score_sd) = mean_and_population_sd(&scores).unwrap_or_default();
    Ok(EvalSummary {
        n: scores.len(),
        field,
        spearman_mode: mode,
        pearson,
        spearman,
        truth_mean,
        truth_sd,
        score_mean,
        score_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(a: i64, b: i64, c: i64, e: Option<i64>) -> RatingRecord {
        RatingRecord::from_values(a, b, c, e).unwrap()
    }

    #[test]
    fn rating_scale_enforced() {
        for v in RATING_SCALE {
            assert!(RatingScore::try_from(v as i64).is_ok());
        }
        for v in [-1, 2, 4, 6, 8, 11, 255] {
            assert_eq!(RatingScore::try_from(v), Err(EvalError::InvalidRating(v)));
        }
        assert!("7".parse::<RatingScore>().is_ok());
        assert!("x".parse::<RatingScore>().is_err());
    }

    #[test]
    fn unanimous_panel_uses_mean() {
        let a: AdjudicatedScore<f64> = adjudicate(&rec(5, 5, 5, None), ("A", "B")).unwrap();
        assert_eq!(a.route, Route::PanelMean);
        assert_eq!(a.distance, 0.0);
        assert_eq!(a.score, 5.0);
    }

    #[test]
    fn wide_disagreement_routes_to_expert() {
        // mu = 3, distance = 9 + 9 + 36 = 54
        let r = rec(0, 0, 9, Some(7));
        let a: AdjudicatedScore<f64> = adjudicate(&r, ("A", "B")).unwrap();
        assert_eq!(a.route, Route::LawExpert);
        assert_eq!(a.distance, 54.0);
        assert_eq!(a.score, 7.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        // mu = 3, distance = 4 + 0 + 4 = 8
        let r = rec(1, 3, 5, Some(3));
        assert_eq!(r.distance::<f64>(), 8.0);
        assert!(r.needs_expert());
        let a: AdjudicatedScore<f64> = adjudicate(&r, ("A", "B")).unwrap();
        assert_eq!(a.route, Route::LawExpert);
        // (0, 1, 3): mu = 4/3, distance = 42/9 < 8
        assert!(!rec(0, 1, 3, None).needs_expert());
    }

    #[test]
    fn missing_expert_is_pending() {
        let err = adjudicate::<f64>(&rec(0, 0, 9, None), ("P1", "P2")).unwrap_err();
        match err {
            EvalError::PendingExpert { id_a, id_b, distance } => {
                assert_eq!((id_a.as_str(), id_b.as_str()), ("P1", "P2"));
                assert_eq!(distance, 54.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn panel_mean_of_non_integer_mean() {
        let a: AdjudicatedScore<f64> = adjudicate(&rec(0, 1, 3, None), ("A", "B")).unwrap();
        assert!((a.score - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_three_point_oracle() {
        // cov = (−1·−1 + 0·1 + 1·0)/3 = 1/3, var x = var y = 2/3 → r = 0.5
        let r: f64 = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn correlation_errors() {
        assert_eq!(pearson(&[1.0f64], &[2.0]), Err(EvalError::TooFewObservations(1)));
        assert_eq!(
            pearson(&[1.0f64, 2.0], &[2.0]),
            Err(EvalError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(
            pearson(&[1.0f64, 1.0], &[2.0, 3.0]),
            Err(EvalError::ConstantInput("first"))
        );
        assert_eq!(
            spearman(&[1.0f64, 2.0], &[3.0, 3.0]),
            Err(EvalError::ConstantInput("second"))
        );
        assert_eq!(
            spearman_with(&[1.0f64, 1.0], &[2.0, 3.0], SpearmanMode::PaperLiteral),
            Err(EvalError::ConstantInput("first"))
        );
        assert_eq!(
            pearson(&[f64::NAN, 1.0], &[2.0, 3.0]),
            Err(EvalError::NonFinite("first"))
        );
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0f64, 2.0, 5.0, 9.0];
        assert!((spearman(&x, &[0.1, 0.2, 10.0, 11.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, -8.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0f64, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0f64, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[3.0f64, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn tied_spearman_matches_rank_then_pearson() {
        // ranks x = (1, 2.5, 2.5, 4), ranks y = (1, 2, 3, 4)
        // cov sum = 2.25 + 0 + 0 + 2.25 = 4.5; ssx = 4.5, ssy = 5 → 4.5/sqrt(22.5)
        let r: f64 = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / 22.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn paper_literal_differs_for_n_above_two() {
        let x = [1.0f64, 2.0, 3.0];
        // concordant data: D = 0 → both give 1
        assert_eq!(spearman_with(&x, &x, SpearmanMode::PaperLiteral).unwrap(), 1.0);
        // reversed: ΣD² = 8 → standard −1, literal 1 − 48/6 = −7
        let rev = [3.0f64, 2.0, 1.0];
        assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman_with(&x, &rev, SpearmanMode::PaperLiteral).unwrap(), -7.0);
    }

    #[test]
    fn evaluate_scale_invariance_and_small_n() {
        let reports: Vec<SimilarityReport<f64>> = [0.2, 0.5, 0.9, 0.4]
            .iter()
            .enumerate()
            .map(|(i, &s)| SimilarityReport {
                id_a: format!("A{i}"),
                id_b: format!("B{i}"),
                sd: s,
                td: 0.0,
                sdtd: s / 2.0,
                model_id: "m".into(),
            })
            .collect();
        let truths: Vec<AdjudicatedScore<f64>> = reports
            .iter()
            .map(|r| AdjudicatedScore {
                score: r.sdtd * 10.0,
                route: Route::PanelMean,
                distance: 0.0,
            })
            .collect();
        let s = evaluate(&reports, &truths, ScoreField::Sdtd, SpearmanMode::Standard).unwrap();
        assert!((s.pearson - 1.0).abs() < 1e-12);
        assert!((s.spearman - 1.0).abs() < 1e-12);
        assert_eq!(s.n, 4);
        assert!(matches!(
            evaluate(&reports[..1], &truths[..1], ScoreField::Sd, SpearmanMode::Standard),
            Err(EvalError::TooFewObservations(1))
        ));
    }

    fn arb_rating() -> impl Strategy<Value = i64> {
        prop::sample::select(RATING_SCALE.to_vec()).prop_map(|v| v as i64)
    }

    proptest! {
        #[test]
        fn routing_permutation_invariant(a in arb_rating(), b in arb_rating(), c in arb_rating()) {
            let base = rec(a, b, c, Some(5)).needs_expert();
            for (x, y, z) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                prop_assert_eq!(rec(x, y, z, Some(5)).needs_expert(), base);
            }
            prop_assert_eq!(rec(a, b, c, None).distance::<f64>() == 0.0, a == b && b == c);
        }

        #[test]
        fn routing_matches_float_definition(a in arb_rating(), b in arb_rating(), c in arb_rating()) {
            let (fa, fb, fc) = (a as f64, b as f64, c as f64);
            let mu = (fa + fb + fc) / 3.0;
            let dist = (mu - fa).powi(2) + (mu - fb).powi(2) + (mu - fc).powi(2);
            let r = rec(a, b, c, None);
            prop_assert!((r.distance::<f64>() - dist).abs() < 1e-9);
            // away from the boundary the float and exact routes must agree
            if (dist - 8.0).abs() > 1e-9 {
                prop_assert_eq!(r.needs_expert(), dist >= 8.0);
            }
        }

        #[test]
        fn correlations_symmetric_and_affine_invariant(
            xs in prop::collection::vec(-100.0f64..100.0, 3..40),
            seed in any::<u64>(),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = xs.iter().map(|x| x + rng.gen_range(-60.0..60.0)).collect();
            prop_assume!(xs.iter().any(|&v| v != xs[0]) && ys.iter().any(|&v| v != ys[0]));
            let p = pearson(&xs, &ys).unwrap();
            let s = spearman(&xs, &ys).unwrap();
            prop_assert!((p - pearson(&ys, &xs).unwrap()).abs() < 1e-12);
            prop_assert!((s - spearman(&ys, &xs).unwrap()).abs() < 1e-12);
            let ys2: Vec<f64> = ys.iter().map(|y| scale * y + shift).collect();
            prop_assert!((p - pearson(&xs, &ys2).unwrap()).abs() < 1e-12);
            prop_assert!((s - spearman(&xs, &ys2).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&p) && (-1.0..=1.0).contains(&s));
        }
    }
}
