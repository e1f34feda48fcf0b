use std::collections::BTreeSet;

use super::MetricsError;

fn fraction<T>(pairs: &[T], hit: impl Fn(&T) -> bool) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(pairs.iter().filter(|p| hit(p)).count() as f64 / pairs.len() as f64)
}

/// Exact-string-match fraction over `(predicted, truth)` pairs. A `None`
/// prediction (unparseable answer) counts as wrong.
pub fn classification_accuracy<S: AsRef<str>>(
    pairs: &[(Option<S>, S)],
) -> Result<f64, MetricsError> {
    fraction(pairs, |(p, t)| p.as_ref().is_some_and(|p| p.as_ref() == t.as_ref()))
}

/// Fraction of pairs whose sets are exactly equal.
pub fn qualities_set_accuracy(
    pairs: &[(Option<BTreeSet<String>>, BTreeSet<String>)],
) -> Result<f64, MetricsError> {
    fraction(pairs, |(p, t)| p.as_ref() == Some(t))
}

/// Mean Jaccard index between predicted and true sets; a diagnostic beside
/// the exact-match headline. Two empty sets score 1.
pub fn qualities_jaccard_mean(
    pairs: &[(Option<BTreeSet<String>>, BTreeSet<String>)],
) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: f64 = pairs
        .iter()
        .map(|(p, t)| match p {
            None => 0.0,
            Some(p) => {
                let union = p.union(t).count();
                if union == 0 {
                    1.0
                } else {
                    p.intersection(t).count() as f64 / union as f64
                }
            }
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

pub fn binary_detection_accuracy(pairs: &[(Option<bool>, bool)]) -> Result<f64, MetricsError> {
    fraction(pairs, |(p, t)| *p == Some(*t))
}

/// Chance agreement of a guess drawn with the same prior as the truth.
pub fn random_baseline_binary(p_yes: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&p_yes) {
        return Err(MetricsError::InvalidInput(format!(
            "p_yes must lie in [0, 1], got {p_yes}"
        )));
    }
    Ok(p_yes * p_yes + (1.0 - p_yes) * (1.0 - p_yes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn type_accuracy() {
        let mut pairs: Vec<(Option<&str>, &str)> = vec![(Some("A"), "A"); 99];
        pairs.push((Some("B"), "A"));
        assert!((classification_accuracy(&pairs).unwrap() - 0.99).abs() < 1e-12);
        let wrong = [(Some("A"), "B"), (None, "A")];
        assert_eq!(classification_accuracy(&wrong).unwrap(), 0.0);
        assert!(classification_accuracy::<&str>(&[]).is_err());
    }

    #[test]
    fn set_semantics() {
        let ok = [(Some(set(&["tracked", "turret"])), set(&["turret", "tracked"]))];
        assert_eq!(qualities_set_accuracy(&ok).unwrap(), 1.0);
        let missing = [(Some(set(&["tracked"])), set(&["turret", "tracked"]))];
        assert_eq!(qualities_set_accuracy(&missing).unwrap(), 0.0);
        assert!((qualities_jaccard_mean(&missing).unwrap() - 0.5).abs() < 1e-12);
        assert!(qualities_set_accuracy(&[]).is_err());
    }

    #[test]
    fn binary() {
        let pairs = [(Some(true), true), (Some(false), true), (None, false), (Some(false), false)];
        assert_eq!(binary_detection_accuracy(&pairs).unwrap(), 0.5);
        assert_eq!(random_baseline_binary(0.5).unwrap(), 0.5);
        assert!((random_baseline_binary(0.7).unwrap() - 0.58).abs() < 1e-12);
        assert!(random_baseline_binary(1.5).is_err());
    }

    #[test]
    fn binary_baseline_matches_simulation() {
        // Independent truth and guess draws with P(yes) = 0.7.
        let mut rng = SplitMix64::new(11);
        let trials = 1_000_000;
        let agree = (0..trials)
            .filter(|_| (rng.unit_f64() < 0.7) == (rng.unit_f64() < 0.7))
            .count();
        let simulated = agree as f64 / trials as f64;
        assert!((simulated - 0.58).abs() < 0.005, "simulated {simulated}");
    }
}
