//! Pure metric functions over activation vectors and class decisions.

use serde::{Deserialize, Serialize};

use super::classify::Decision;
use crate::error::{AcavError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineAngle {
    pub cosine: f64,
    /// `arccos(cosine)` in degrees.
    pub degrees: f64,
}

pub fn cosine_angle(u: &[f64], v: &[f64]) -> Result<CosineAngle> {
    if u.len() != v.len() {
        return Err(AcavError::Dimension(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 || !(nu.is_finite() && nv.is_finite()) {
        return Err(AcavError::UndefinedAngle);
    }
    let cosine = (dot / (nu * nv)).clamp(-1.0, 1.0);
    Ok(CosineAngle {
        cosine,
        degrees: cosine.acos().to_degrees(),
    })
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Mean Euclidean norm of `augmented - original` over pairs.
pub fn delta_v<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for (original, augmented) in pairs {
        if original.len() != augmented.len() {
            return Err(AcavError::Dimension(format!(
                "pair {n} has vectors of length {} and {}",
                original.len(),
                augmented.len()
            )));
        }
        sum += original
            .iter()
            .zip(augmented)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(AcavError::Dimension("delta_v needs at least one pair".into()));
    }
    Ok(sum / n as f64)
}

/// Shannon entropy `-Σ p ln p` with `0 ln 0 = 0`.
pub fn pattern_entropy(proportions: &[f64]) -> Result<f64> {
    let sum: f64 = proportions.iter().sum();
    if proportions.is_empty()
        || proportions.iter().any(|p| !(p.is_finite() && *p >= 0.0))
        || (sum - 1.0).abs() > 1e-9
    {
        return Err(AcavError::Normalization { sum });
    }
    let h = -proportions
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>();
    // A single class gives -0.0; normalize so it prints as 0.
    Ok(h + 0.0)
}

/// Mean cosine similarity of original and augmented activations to a
/// reference vector, and the absolute difference of the two means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDeviation {
    pub original: f64,
    pub augmented: f64,
    pub deviation: f64,
    pub original_samples: Vec<f64>,
    pub augmented_samples: Vec<f64>,
}

pub fn similarity_deviation<'a, I>(reference: &[f64], pairs: I) -> Result<SimilarityDeviation>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut original_samples = Vec::new();
    let mut augmented_samples = Vec::new();
    for (o, a) in pairs {
        original_samples.push(cosine_angle(o, reference)?.cosine);
        augmented_samples.push(cosine_angle(a, reference)?.cosine);
    }
    if original_samples.is_empty() {
        return Err(AcavError::Dimension(
            "similarity deviation needs at least one pair".into(),
        ));
    }
    let original = mean(&original_samples);
    let augmented = mean(&augmented_samples);
    Ok(SimilarityDeviation {
        original,
        augmented,
        deviation: (original - augmented).abs(),
        original_samples,
        augmented_samples,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Label-change statistics for (original, augmented) decision pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipMetrics {
    /// Pairs whose original decision was not an abstention.
    pub decided: usize,
    pub flipped: usize,
    pub preserved: usize,
    /// Decided originals whose augmented version abstained; counted as non-flips.
    pub augmented_abstained: usize,
    /// Pairs excluded because the original abstained.
    pub original_abstained: usize,
    /// `flipped / decided`, in `[0, 1]`.
    pub flip_rate: f64,
    /// `flipped / preserved`; `f64::INFINITY` when nothing was preserved.
    pub literal_ratio: f64,
}

impl FlipMetrics {
    pub fn from_decisions<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Decision, Decision)>,
    {
        let (mut decided, mut flipped, mut preserved, mut aug_abstained, mut orig_abstained) =
            (0, 0, 0, 0, 0);
        for (original, augmented) in pairs {
            if original == Decision::Abstain {
                orig_abstained += 1;
                continue;
            }
            decided += 1;
            match augmented {
                Decision::Abstain => aug_abstained += 1,
                a if a == original => preserved += 1,
                _ => flipped += 1,
            }
        }
        if decided == 0 {
            return Err(AcavError::NoDecision);
        }
        let literal_ratio = if preserved == 0 {
            if flipped == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            flipped as f64 / preserved as f64
        };
        Ok(FlipMetrics {
            decided,
            flipped,
            preserved,
            augmented_abstained: aug_abstained,
            original_abstained: orig_abstained,
            flip_rate: flipped as f64 / decided as f64,
            literal_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Decision::*;

    #[test]
    fn cosine_examples() {
        let same = cosine_angle(&[0.3, -2.0], &[0.3, -2.0]).unwrap();
        assert!((same.cosine - 1.0).abs() < 1e-12);
        assert!(same.degrees.abs() < 1e-6);
        let ortho = cosine_angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(ortho.cosine, 0.0);
        assert!((ortho.degrees - 90.0).abs() < 1e-12);
        let diag = cosine_angle(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((diag.degrees - 45.0).abs() < 1e-9);
        assert!(matches!(
            cosine_angle(&[0.0, 0.0], &[1.0, 1.0]),
            Err(AcavError::UndefinedAngle)
        ));
        assert!(cosine_angle(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn delta_v_examples() {
        let o = [1.0, 2.0];
        assert_eq!(delta_v([(&o[..], &o[..])]).unwrap(), 0.0);
        let a = [4.0, 6.0];
        assert_eq!(delta_v([(&o[..], &a[..])]).unwrap(), 5.0);
        let short = [1.0];
        assert!(delta_v([(&o[..], &short[..])]).is_err());
        assert!(delta_v(std::iter::empty::<(&[f64], &[f64])>()).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(pattern_entropy(&[1.0]).unwrap(), 0.0);
        assert!(pattern_entropy(&[1.0]).unwrap().is_sign_positive());
        assert!((pattern_entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((pattern_entropy(&[0.5, 0.5]).unwrap() - 0.693147).abs() < 1e-6);
        assert!((pattern_entropy(&[0.7, 0.2, 0.1]).unwrap() - 0.8018).abs() < 1e-4);
        assert_eq!(pattern_entropy(&[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            pattern_entropy(&[0.5, 0.6]),
            Err(AcavError::Normalization { .. })
        ));
        assert!(pattern_entropy(&[-0.5, 1.5]).is_err());
    }

    #[test]
    fn table_one_row_arithmetic() {
        // original mean 0.864, augmented mean 0.835 -> deviation 0.029, printed as 0.03
        let deviation: f64 = (0.864f64 - 0.835).abs();
        assert_eq!(format!("{deviation:.2}"), "0.03");
    }

    #[test]
    fn flip_examples() {
        let none = FlipMetrics::from_decisions(vec![(Healthy, Healthy); 10]).unwrap();
        assert_eq!((none.flip_rate, none.literal_ratio), (0.0, 0.0));

        let mut pairs = vec![(Healthy, Diseased); 8];
        pairs.extend(vec![(Healthy, Healthy); 2]);
        let m = FlipMetrics::from_decisions(pairs).unwrap();
        assert_eq!(m.flip_rate, 0.8);
        assert_eq!(m.literal_ratio, 4.0);

        let all = FlipMetrics::from_decisions(vec![(Healthy, Diseased); 3]).unwrap();
        assert_eq!(all.flip_rate, 1.0);
        assert!(all.literal_ratio.is_infinite());

        let abst = FlipMetrics::from_decisions(vec![(Healthy, Abstain), (Abstain, Diseased)]).unwrap();
        assert_eq!((abst.decided, abst.flipped, abst.augmented_abstained, abst.original_abstained), (1, 0, 1, 1));

        assert!(matches!(
            FlipMetrics::from_decisions(vec![(Abstain, Healthy)]),
            Err(AcavError::NoDecision)
        ));
    }
}
