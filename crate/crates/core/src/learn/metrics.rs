use crate::error::{Error, Result};

/// `counts[actual][predicted]`.
pub fn confusion_matrix(predicted: &[usize], actual: &[usize], n_classes: usize) -> Result<Vec<Vec<u64>>> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Shape("no predictions to score".into()));
    }
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &a) in predicted.iter().zip(actual) {
        if p >= n_classes || a >= n_classes {
            return Err(Error::Parameter(format!("class index outside 0..{n_classes}")));
        }
        m[a][p] += 1;
    }
    Ok(m)
}

/// F1 per class; `None` for classes that neither occur nor are predicted.
pub fn per_class_f1(predicted: &[usize], actual: &[usize], n_classes: usize) -> Result<Vec<Option<f64>>> {
    let m = confusion_matrix(predicted, actual, n_classes)?;
    Ok((0..n_classes)
        .map(|c| {
            let tp = m[c][c] as f64;
            let support: u64 = m[c].iter().sum();
            let predicted: u64 = m.iter().map(|row| row[c]).sum();
            if support == 0 && predicted == 0 {
                None
            } else {
                Some(2.0 * tp / (support + predicted) as f64)
            }
        })
        .collect())
}

/// Unweighted mean of the per-class F1 over classes that occur in either
/// the labels or the predictions.
pub fn macro_f1(predicted: &[usize], actual: &[usize], n_classes: usize) -> Result<f64> {
    let scores: Vec<f64> = per_class_f1(predicted, actual, n_classes)?
        .into_iter()
        .flatten()
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_worst() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(macro_f1(&[1, 0], &[0, 1], 2).unwrap(), 0.0);
    }

    #[test]
    fn constant_prediction_on_balanced_binary() {
        // class 0: tp 2, support 2, predicted 4 -> 2/3; class 1: 0
        let f1 = macro_f1(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(f1, 1.0 / 3.0);
    }

    #[test]
    fn hand_computed_example() {
        // actual: 0 0 0 1 1 2, predicted: 0 0 1 1 2 2
        // class 0: tp 2, support 3, predicted 2 -> 4/5
        // class 1: tp 1, support 2, predicted 2 -> 2/4
        // class 2: tp 1, support 1, predicted 2 -> 2/3
        let f1 = macro_f1(&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 2], 3).unwrap();
        let expected = (0.8 + 0.5 + 2.0 / 3.0) / 3.0;
        assert!((f1 - expected).abs() < 1e-15);
    }

    #[test]
    fn absent_classes_are_excluded() {
        let per = per_class_f1(&[0, 1], &[0, 1], 4).unwrap();
        assert_eq!(per, vec![Some(1.0), Some(1.0), None, None]);
        assert_eq!(macro_f1(&[0, 1], &[0, 1], 4).unwrap(), 1.0);
        // A predicted class without support counts as zero.
        assert_eq!(macro_f1(&[0, 3], &[0, 1], 4).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(macro_f1(&[0], &[0, 1], 2).is_err());
        assert!(macro_f1(&[], &[], 2).is_err());
    }
}
