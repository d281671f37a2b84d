//! Next-answer prediction metrics pooled over every held-out step.

use std::fmt;
use std::io::Write;

use crate::dataio::InteractionSequence;
use crate::error::{Error, Result};
use crate::ktmodel::{self, ModelParams};
use crate::trainer::PROB_EPS;

/// Probability assigned to the question actually asked next, with the
/// observed answer.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredStep {
    pub student: String,
    /// Index of the scored interaction within its sequence (≥ 1).
    pub step: usize,
    pub question: usize,
    pub score: f64,
    pub label: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub auc: f64,
    /// Share of steps where `score ≥ 0.5` matches the label.
    pub accuracy: f64,
    /// Mean clamped cross-entropy.
    pub mean_loss: f64,
    pub steps: usize,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "auc={:.6} accuracy={:.6} mean_loss={:.6} steps={}",
            self.auc, self.accuracy, self.mean_loss, self.steps
        )
    }
}

/// Rank-based AUC with midranks for ties:
/// `(Σ ranks of positives − P(P+1)/2) / (P·N)`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            node: None,
            msg: format!("{} scores for {} labels", scores.len(), labels.len()),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::validation(format!("score {s} is not a number")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; the tie group i..=j shares its mean rank.
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += midrank * tied_pos as f64;
        i = j + 1;
    }
    let p = pos as f64;
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// One [`ScoredStep`] per predicted step, in sequence order then step order.
pub fn score_steps(params: &ModelParams, seqs: &[InteractionSequence]) -> Result<Vec<ScoredStep>> {
    let mut out = Vec::with_capacity(seqs.iter().map(|s| s.len().saturating_sub(1)).sum());
    for seq in seqs {
        let preds = ktmodel::forward_sequence(seq, params)?;
        for (t, (p, next)) in preds.iter().zip(&seq.interactions[1..]).enumerate() {
            if next.question >= p.len() {
                return Err(Error::Index {
                    what: "question",
                    index: next.question,
                    bound: p.len(),
                });
            }
            out.push(ScoredStep {
                student: seq.student.clone(),
                step: t + 1,
                question: next.question,
                score: p.get(next.question),
                label: next.correct,
            });
        }
    }
    Ok(out)
}

pub fn metrics(steps: &[ScoredStep]) -> Result<Metrics> {
    if steps.is_empty() {
        return Err(Error::validation("no steps to evaluate"));
    }
    let scores: Vec<f64> = steps.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = steps.iter().map(|s| s.label).collect();
    let n = steps.len() as f64;
    let hits = steps.iter().filter(|s| (s.score >= 0.5) == s.label).count();
    let mut loss = 0.0;
    for s in steps {
        let p = s.score.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss -= if s.label { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(Metrics {
        auc: auc(&scores, &labels)?,
        accuracy: hits as f64 / n,
        mean_loss: loss / n,
        steps: steps.len(),
    })
}

/// Scores every sequence and pools all steps into one set of metrics.
pub fn evaluate(params: &ModelParams, seqs: &[InteractionSequence]) -> Result<Metrics> {
    if seqs.is_empty() {
        return Err(Error::validation("test set is empty"));
    }
    if let Some(s) = seqs.iter().find(|s| s.len() < 2) {
        return Err(Error::validation(format!(
            "sequence of student `{}` has {} interaction(s), need at least 2",
            s.student,
            s.len()
        )));
    }
    metrics(&score_steps(params, seqs)?)
}

/// Rows `student_id<TAB>step<TAB>question_id<TAB>score<TAB>label`.
pub fn write_steps<W: Write>(mut w: W, steps: &[ScoredStep]) -> std::io::Result<()> {
    for s in steps {
        writeln!(
            w,
            "{}\t{}\t{}\t{:?}\t{}",
            s.student,
            s.step,
            s.question,
            s.score,
            u8::from(s.label)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    total += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn examples() {
        assert_eq!(auc(&[0.2, 0.8, 0.6], &[false, true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(
            auc(&[0.1, 0.2], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(auc(&[], &[]), Err(Error::UndefinedMetric(_))));
        assert!(auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn dump_format() {
        let steps = vec![ScoredStep {
            student: "s1".into(),
            step: 1,
            question: 4,
            score: 0.25,
            label: true,
        }];
        let mut buf = Vec::new();
        write_steps(&mut buf, &steps).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s1\t1\t4\t0.25\t1\n");
    }

    #[test]
    fn metrics_record() {
        let steps: Vec<ScoredStep> = [(0.9, true), (0.4, false), (0.6, false)]
            .iter()
            .enumerate()
            .map(|(i, &(score, label))| ScoredStep {
                student: "a".into(),
                step: i + 1,
                question: 0,
                score,
                label,
            })
            .collect();
        let m = metrics(&steps).unwrap();
        assert_eq!(m.auc, 1.0);
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
        let expected = -(0.9f64.ln() + 0.6f64.ln() + 0.4f64.ln()) / 3.0;
        assert!((m.mean_loss - expected).abs() < 1e-12);
        assert!(m.to_string().starts_with("auc=1.000000 accuracy=0.666667"));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..100).prop_flat_map(|n| {
            (
                // Coarse grid so ties are common.
                prop::collection::vec((0u8..12).prop_map(|k| k as f64 / 11.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_pairwise_oracle((scores, mut labels) in instance()) {
            labels[0] = true;
            labels[1] = false;
            let a = auc(&scores, &labels).unwrap();
            prop_assert!((a - pairwise(&scores, &labels)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            prop_assert!((a + auc(&scores, &flipped).unwrap() - 1.0).abs() < 1e-12);
            let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            prop_assert!((a - auc(&squashed, &labels).unwrap()).abs() < 1e-12);
            let constant = vec![0.3; scores.len()];
            prop_assert_eq!(auc(&constant, &labels).unwrap(), 0.5);
        }
    }
}
