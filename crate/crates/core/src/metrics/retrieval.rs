use serde::{Deserialize, Serialize};

use super::MetricsError;

/// The ordered neighbor types retrieved for one validation query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    pub query_id: String,
    pub query_type: String,
    pub hit_types: Vec<String>,
}

impl RetrievalOutcome {
    fn matches_in_top(&self, k: usize) -> usize {
        self.hit_types[..k]
            .iter()
            .filter(|t| **t == self.query_type)
            .count()
    }
}

fn check(outcomes: &[RetrievalOutcome], k: usize) -> Result<(), MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    if k == 0 {
        return Err(MetricsError::InvalidK);
    }
    if let Some(o) = outcomes.iter().find(|o| o.hit_types.len() < k) {
        return Err(MetricsError::TooFewHits {
            query_id: o.query_id.clone(),
            have: o.hit_types.len(),
            k,
        });
    }
    Ok(())
}

fn mean_by(outcomes: &[RetrievalOutcome], f: impl Fn(&RetrievalOutcome) -> f64) -> f64 {
    outcomes.iter().map(f).sum::<f64>() / outcomes.len() as f64
}

pub fn accuracy_at_1(outcomes: &[RetrievalOutcome]) -> Result<f64, MetricsError> {
    check(outcomes, 1)?;
    Ok(mean_by(outcomes, |o| f64::from(u8::from(o.hit_types[0] == o.query_type))))
}

pub fn precision_at_k(outcomes: &[RetrievalOutcome], k: usize) -> Result<f64, MetricsError> {
    check(outcomes, k)?;
    Ok(mean_by(outcomes, |o| o.matches_in_top(k) as f64 / k as f64))
}

pub fn any_correct_at_k(outcomes: &[RetrievalOutcome], k: usize) -> Result<f64, MetricsError> {
    check(outcomes, k)?;
    Ok(mean_by(outcomes, |o| f64::from(u8::from(o.matches_in_top(k) > 0))))
}

pub fn all_correct_at_k(outcomes: &[RetrievalOutcome], k: usize) -> Result<f64, MetricsError> {
    check(outcomes, k)?;
    Ok(mean_by(outcomes, |o| f64::from(u8::from(o.matches_in_top(k) == k))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcome(q: &str, hits: &[&str]) -> RetrievalOutcome {
        RetrievalOutcome {
            query_id: format!("q-{q}-{}", hits.join("")),
            query_type: q.into(),
            hit_types: hits.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn accuracy_examples() {
        let two = [outcome("A", &["A", "B"]), outcome("B", &["B", "B"])];
        assert_eq!(accuracy_at_1(&two).unwrap(), 1.0);
        let four = [
            outcome("A", &["A"]),
            outcome("A", &["A"]),
            outcome("B", &["B"]),
            outcome("B", &["A"]),
        ];
        assert_eq!(accuracy_at_1(&four).unwrap(), 0.75);
        assert!(matches!(accuracy_at_1(&[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn precision_examples() {
        let o = [outcome("A", &["A", "B", "A", "C", "A"])];
        assert!((precision_at_k(&o, 5).unwrap() - 0.6).abs() < 1e-12);
        let all = [outcome("A", &["A"; 5]), outcome("B", &["B"; 5])];
        assert_eq!(precision_at_k(&all, 5).unwrap(), 1.0);
        assert!(matches!(
            precision_at_k(&[outcome("A", &["A", "A"])], 3),
            Err(MetricsError::TooFewHits { have: 2, k: 3, .. })
        ));
    }

    #[test]
    fn any_all_examples() {
        let o = [outcome("T72", &["T72", "BMP", "BMP"])];
        assert_eq!(any_correct_at_k(&o, 3).unwrap(), 1.0);
        assert_eq!(all_correct_at_k(&o, 3).unwrap(), 0.0);
        let o = [outcome("T72", &["T72"; 3])];
        assert_eq!(any_correct_at_k(&o, 3).unwrap(), 1.0);
        assert_eq!(all_correct_at_k(&o, 3).unwrap(), 1.0);
    }

    fn outcomes() -> impl Strategy<Value = Vec<RetrievalOutcome>> {
        let types = prop::sample::select(vec!["A", "B", "C"]);
        prop::collection::vec(
            (types.clone(), prop::collection::vec(types, 5)),
            1..30,
        )
        .prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (q, hits))| RetrievalOutcome {
                    query_id: format!("q{i}"),
                    query_type: q.to_string(),
                    hit_types: hits.into_iter().map(String::from).collect(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn ordering_and_k1_identity(os in outcomes(), k in 1usize..=5) {
            let all = all_correct_at_k(&os, k).unwrap();
            let prec = precision_at_k(&os, k).unwrap();
            let any = any_correct_at_k(&os, k).unwrap();
            prop_assert!(all <= prec + 1e-12 && prec <= any + 1e-12);
            let acc = accuracy_at_1(&os).unwrap();
            prop_assert_eq!(all_correct_at_k(&os, 1).unwrap(), acc);
            prop_assert_eq!(any_correct_at_k(&os, 1).unwrap(), acc);
        }

        #[test]
        fn permutation_invariant(os in outcomes(), seed in any::<u64>()) {
            let mut shuffled = os.clone();
            crate::rng::SplitMix64::new(seed).shuffle(&mut shuffled);
            for k in [1, 3, 5] {
                prop_assert!((precision_at_k(&os, k).unwrap() - precision_at_k(&shuffled, k).unwrap()).abs() < 1e-12);
                prop_assert!((all_correct_at_k(&os, k).unwrap() - all_correct_at_k(&shuffled, k).unwrap()).abs() < 1e-12);
                prop_assert!((any_correct_at_k(&os, k).unwrap() - any_correct_at_k(&shuffled, k).unwrap()).abs() < 1e-12);
            }
        }
    }
}
