//! Review-based rating prediction used to judge generated reviews.
//!
//! A DeepCoNN-style model reads a user document and an item document (the
//! concatenated reviews of each) and predicts the rating. It is trained once
//! on human reviews; each evaluation condition then swaps in its own review
//! texts when the documents are rebuilt, and the resulting RMSE is compared.

mod deepconn;
mod eval;

use serde::{Deserialize, Serialize};

pub use deepconn::{DeepConn, DeepConnConfig, FitRecord};
pub use eval::{
    build_eval_splits, compare_conditions, ConditionResult, ConditionTexts, Documents, EvalSplits, Evaluator,
    RecReport, TEST_PAIR,
};

use crate::error::{Error, Result};

/// |Δ| above this counts as an outlier.
pub const OUTLIER_DELTA: f64 = 2.0;

fn check_lengths(p: &[f64], t: &[f64]) -> Result<()> {
    if p.len() != t.len() || p.is_empty() {
        return Err(Error::Usage(format!(
            "{} predictions for {} truths",
            p.len(),
            t.len()
        )));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(predictions, truths)?;
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Δ statistics for pairs sharing one true rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    pub rating: u8,
    pub count: usize,
    pub mean_delta: f64,
    pub outliers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub deltas: Vec<f64>,
    pub truth_ratings: Vec<u8>,
    pub per_rating: Vec<RatingSummary>,
}

impl Discrepancy {
    pub fn truths(&self) -> impl Iterator<Item = u8> + '_ {
        self.truth_ratings.iter().copied()
    }

    pub fn mean_abs(&self) -> f64 {
        self.deltas.iter().map(|d| d.abs()).sum::<f64>() / self.deltas.len().max(1) as f64
    }

    pub fn outliers(&self) -> usize {
        self.per_rating.iter().map(|r| r.outliers).sum()
    }
}

/// `Δ_i = ŷ_i − y_i`, grouped by the (rounded) true rating.
pub fn rating_discrepancy(predictions: &[f64], truths: &[f64]) -> Result<Discrepancy> {
    check_lengths(predictions, truths)?;
    let deltas: Vec<f64> = predictions.iter().zip(truths).map(|(p, t)| p - t).collect();
    let mut per_rating = Vec::new();
    for r in 1..=5u8 {
        let group: Vec<f64> = deltas
            .iter()
            .zip(truths)
            .filter(|(_, &t)| t.round() as i64 == r as i64)
            .map(|(&d, _)| d)
            .collect();
        if group.is_empty() {
            continue;
        }
        per_rating.push(RatingSummary {
            rating: r,
            count: group.len(),
            mean_delta: group.iter().sum::<f64>() / group.len() as f64,
            outliers: group.iter().filter(|d| d.abs() > OUTLIER_DELTA).count(),
        });
    }
    let truth_ratings = truths.iter().map(|t| t.round().clamp(0.0, 255.0) as u8).collect();
    Ok(Discrepancy {
        deltas,
        truth_ratings,
        per_rating,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_fixtures() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[2.0, 4.0, 2.0], &[1.0, 5.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((rmse(&[3.0, 5.0], &[4.0, 3.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-12);
        assert!((rmse(&[3.0, 5.0], &[4.0, 3.0]).unwrap() - 1.5811).abs() < 1e-4);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn discrepancy_fixture() {
        let p = [4.0, 5.0, 2.0, 1.5, 4.5, 1.0];
        let t = [5.0, 5.0, 2.0, 1.0, 2.0, 5.0];
        let d = rating_discrepancy(&p, &t).unwrap();
        assert_eq!(d.deltas, vec![-1.0, 0.0, 0.0, 0.5, 2.5, -4.0]);
        let by = |r: u8| d.per_rating.iter().find(|s| s.rating == r).unwrap().clone();
        assert_eq!(by(5).count, 3);
        assert!((by(5).mean_delta - (-5.0 / 3.0)).abs() < 1e-12);
        assert_eq!(by(5).outliers, 1);
        assert!((by(2).mean_delta - 1.25).abs() < 1e-12);
        assert_eq!(by(2).outliers, 1);
        assert_eq!(by(1).mean_delta, 0.5);
        assert_eq!(d.outliers(), 2);
    }

    proptest! {
        #[test]
        fn rmse_properties(v in proptest::collection::vec((1.0f64..5.0, 1.0f64..5.0), 1..30), rot in 0usize..30) {
            let (p, t): (Vec<f64>, Vec<f64>) = v.iter().cloned().unzip();
            prop_assert_eq!(rmse(&p, &p).unwrap(), 0.0);
            let k = rot % p.len();
            let (mut p2, mut t2) = (p.clone(), t.clone());
            p2.rotate_left(k);
            t2.rotate_left(k);
            prop_assert!((rmse(&p, &t).unwrap() - rmse(&p2, &t2).unwrap()).abs() < 1e-12);
            let d = rating_discrepancy(&p, &t).unwrap();
            let md = d.deltas.iter().sum::<f64>() / p.len() as f64;
            let diff = p.iter().sum::<f64>() / p.len() as f64 - t.iter().sum::<f64>() / t.len() as f64;
            prop_assert!((md - diff).abs() < 1e-9);
        }
    }
}
