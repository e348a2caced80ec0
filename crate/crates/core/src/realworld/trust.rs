use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RealWorldError;
use crate::scoring::{harmonic_rank, rank_criterion};

/// One expert rating of a model, 1 (strong distrust) to 5 (strong trust).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustRating {
    pub model_id: String,
    pub rating: u8,
    pub rater: String,
    pub timestamp: String,
}

impl TrustRating {
    pub fn new(
        model_id: impl Into<String>,
        rating: i64,
        rater: impl Into<String>,
        timestamp: impl Into<String>,
    ) -> Result<Self, RealWorldError> {
        if !(1..=5).contains(&rating) {
            return Err(RealWorldError::InvalidRating(rating));
        }
        Ok(TrustRating {
            model_id: model_id.into(),
            rating: rating as u8,
            rater: rater.into(),
            timestamp: timestamp.into(),
        })
    }
}

#[derive(Deserialize)]
struct RatingRow {
    model_id: String,
    rating: i64,
    rater: String,
    timestamp: String,
}

/// Reads a `model_id,rating,rater,timestamp` CSV.
pub fn read_ratings(path: &Path) -> Result<Vec<TrustRating>, RealWorldError> {
    let file = std::fs::File::open(path).map_err(|source| RealWorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    rdr.deserialize::<RatingRow>()
        .map(|r| {
            let r = r.map_err(|e| RealWorldError::Schema(e.to_string()))?;
            TrustRating::new(r.model_id, r.rating, r.rater, r.timestamp)
        })
        .collect()
}

/// Mean rating per model id across raters.
pub fn mean_trust(ratings: &[TrustRating]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in ratings {
        let e = acc.entry(r.model_id.clone()).or_default();
        e.0 += f64::from(r.rating);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealWorldEntry {
    pub algorithm: String,
    pub model_id: String,
    pub r2_test: f64,
    pub simplicity: f64,
    pub trust: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealWorldScore {
    pub algorithm: String,
    pub model_id: String,
    /// Ranks on R², simplicity and trust; the best of `k` gets `k`.
    pub ranks: [f64; 3],
    /// Harmonic mean of `ranks`.
    pub score: f64,
    /// Harmonic mean of the raw values when all are positive.
    pub raw_harmonic: Option<f64>,
}

/// Rank-transforms accuracy, simplicity and trust across entries and takes
/// the harmonic mean per entry. Output keeps the input order.
pub fn realworld_score(entries: &[RealWorldEntry]) -> Result<Vec<RealWorldScore>, RealWorldError> {
    let missing: Vec<String> = entries
        .iter()
        .filter(|e| e.trust.is_none())
        .map(|e| e.model_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(RealWorldError::MissingTrust(missing));
    }
    let col = |f: fn(&RealWorldEntry) -> f64| rank_criterion(&entries.iter().map(f).collect::<Vec<_>>(), true);
    let r2 = col(|e| e.r2_test);
    let simp = col(|e| e.simplicity);
    let trust = col(|e| e.trust.unwrap_or(f64::NAN));
    Ok(entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let ranks = [r2[i], simp[i], trust[i]];
            let raw = [e.r2_test, e.simplicity, e.trust.unwrap_or(f64::NAN)];
            RealWorldScore {
                algorithm: e.algorithm.clone(),
                model_id: e.model_id.clone(),
                ranks,
                score: harmonic_rank(&ranks).expect("ranks are at least 1"),
                raw_harmonic: raw.iter().all(|v| *v > 0.0).then(|| harmonic_rank(&raw).ok()).flatten(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(name: &str, r2: f64, simp: f64, trust: f64) -> RealWorldEntry {
        RealWorldEntry {
            algorithm: name.into(),
            model_id: format!("{name}-m"),
            r2_test: r2,
            simplicity: simp,
            trust: Some(trust),
        }
    }

    #[test]
    fn single_algorithm_scores_one() {
        let s = realworld_score(&[entry("a", 0.9, -1.0, 3.0)]).unwrap();
        assert_eq!(s[0].score, 1.0);
    }

    #[test]
    fn trust_breaks_ties() {
        let s = realworld_score(&[entry("a", 0.9, -1.0, 5.0), entry("b", 0.9, -1.0, 1.0)]).unwrap();
        assert!(s[0].score > s[1].score);
    }

    #[test]
    fn missing_trust_lists_models() {
        let mut e = entry("a", 0.9, -1.0, 3.0);
        e.trust = None;
        let err = realworld_score(&[e, entry("b", 0.5, -1.0, 2.0)]).unwrap_err();
        assert!(matches!(err, RealWorldError::MissingTrust(ref m) if m == &["a-m".to_string()]));
    }

    #[test]
    fn ratings_validated_and_averaged() {
        assert!(matches!(
            TrustRating::new("m", 6, "r", "t"),
            Err(RealWorldError::InvalidRating(6))
        ));
        let rs = vec![
            TrustRating::new("m", 2, "r1", "t").unwrap(),
            TrustRating::new("m", 5, "r2", "t").unwrap(),
        ];
        assert_eq!(mean_trust(&rs)["m"], 3.5);
    }

    #[test]
    fn ratings_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "model_id,rating,rater,timestamp\nm1,4,ann,2021-05-01T10:00:00Z\n").unwrap();
        let rs = read_ratings(&p).unwrap();
        assert_eq!(rs[0].rating, 4);
        std::fs::write(&p, "model_id,rating,rater,timestamp\nm1,0,ann,x\n").unwrap();
        assert!(matches!(read_ratings(&p), Err(RealWorldError::InvalidRating(0))));
    }
}
