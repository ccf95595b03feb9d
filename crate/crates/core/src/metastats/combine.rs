use super::{ScoreVector, StatsError};

/// Min-max normalized scores; `constant` is set when the input had no range.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub scores: ScoreVector,
    pub constant: bool,
}

/// Maps values onto `[0, 1]` by `(v - min) / (max - min)`. A constant vector
/// maps to all 0.5 and logs a warning.
pub fn minmax_normalize(x: &ScoreVector) -> Result<Normalized, StatsError> {
    if x.is_empty() {
        return Err(StatsError::TooShort { needed: 1, got: 0 });
    }
    let min = x.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        log::warn!("constant score vector ({min}); normalizing to 0.5");
        let scores = ScoreVector { ids: x.ids.clone(), values: vec![0.5; x.len()] };
        return Ok(Normalized { scores, constant: true });
    }
    let values = x.values.iter().map(|v| ((v - min) / range).clamp(0.0, 1.0)).collect();
    Ok(Normalized { scores: ScoreVector { ids: x.ids.clone(), values }, constant: false })
}

/// Weighted mean of min-max normalized inputs, per instance. Weights default
/// to uniform and are rescaled to sum to 1.
pub fn combine(scores: &[ScoreVector], weights: Option<&[f64]>) -> Result<ScoreVector, StatsError> {
    let first = scores.first().ok_or(StatsError::TooShort { needed: 1, got: 0 })?;
    for other in &scores[1..] {
        first.check_aligned(other)?;
    }
    let weights: Vec<f64> = match weights {
        None => vec![1.0; scores.len()],
        Some(w) if w.len() != scores.len() => {
            return Err(StatsError::InvalidWeights(format!("{} weights for {} score vectors", w.len(), scores.len())))
        }
        Some(w) => w.to_vec(),
    };
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(StatsError::InvalidWeights("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(StatsError::InvalidWeights("weights sum to zero".into()));
    }

    let normalized = scores.iter().map(minmax_normalize).collect::<Result<Vec<_>, _>>()?;
    let values = (0..first.len())
        .map(|i| normalized.iter().zip(&weights).map(|(s, w)| w * s.scores.values[i]).sum::<f64>() / total)
        .collect();
    Ok(ScoreVector { ids: first.ids.clone(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(values: &[f64]) -> ScoreVector {
        ScoreVector::from_values(values.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(minmax_normalize(&sv(&[0.0, 5.0, 10.0])).unwrap().scores.values, vec![0.0, 0.5, 1.0]);
        let c = minmax_normalize(&sv(&[3.0, 3.0])).unwrap();
        assert!(c.constant);
        assert_eq!(c.scores.values, vec![0.5, 0.5]);
        let unit = [0.0, 0.25, 1.0, 0.6];
        assert_eq!(minmax_normalize(&sv(&unit)).unwrap().scores.values, unit.to_vec());
    }

    #[test]
    fn combine_examples() {
        let a = sv(&[2.0, 4.0, 6.0]);
        assert_eq!(combine(std::slice::from_ref(&a), None).unwrap().values, vec![0.0, 0.5, 1.0]);

        let constant = sv(&[7.0, 7.0, 7.0]);
        let mixed = combine(&[a.clone(), constant], None).unwrap();
        assert_eq!(mixed.values, vec![0.25, 0.5, 0.75]);

        // Hand evaluation:
        //   m1 (0, 10, 5)   -> (0, 1, 0.5)
        //   m2 (1, 2, 3)    -> (0, 0.5, 1)
        //   m3 (0.4, 0.2, 0) -> (1, 0.5, 0)
        //   mean            -> (1/3, 2/3, 1/2)
        let out = combine(&[sv(&[0.0, 10.0, 5.0]), sv(&[1.0, 2.0, 3.0]), sv(&[0.4, 0.2, 0.0])], None).unwrap();
        let expected = [1.0 / 3.0, 2.0 / 3.0, 0.5];
        for (got, want) in out.values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }

        let weighted = combine(&[sv(&[0.0, 1.0]), sv(&[1.0, 0.0])], Some(&[3.0, 1.0])).unwrap();
        assert_eq!(weighted.values, vec![0.25, 0.75]);
    }

    #[test]
    fn combine_rejects_misaligned_ids() {
        let a = ScoreVector::new(vec!["x".into(), "y".into()], vec![1.0, 2.0]).unwrap();
        let b = ScoreVector::new(vec!["x".into(), "z".into()], vec![1.0, 2.0]).unwrap();
        assert_eq!(
            combine(&[a.clone(), b], None),
            Err(StatsError::IdMismatch { index: 1, left: "y".into(), right: "z".into() })
        );
        assert!(matches!(combine(&[a], Some(&[1.0, 2.0])), Err(StatsError::InvalidWeights(_))));
    }

    proptest! {
        #[test]
        fn ranking_survives_affine_rescaling(
            cols in proptest::collection::vec(proptest::collection::vec(0u8..20, 6), 2..4),
            scale in 0.5f64..8.0,
            shift in -5.0f64..5.0,
        ) {
            let vecs: Vec<ScoreVector> = cols.iter().map(|c| sv(&c.iter().map(|&v| f64::from(v)).collect::<Vec<_>>())).collect();
            let mut moved = vecs.clone();
            moved[0].values.iter_mut().for_each(|v| *v = *v * scale + shift);
            let before = combine(&vecs, None).unwrap();
            let after = combine(&moved, None).unwrap();
            for (x, y) in before.values.iter().zip(&after.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let mut sorted = before.values.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).all(|w| w[1] - w[0] > 1e-9) {
                prop_assert_eq!(super::super::ranks(&before.values), super::super::ranks(&after.values));
            }
        }
    }
}
