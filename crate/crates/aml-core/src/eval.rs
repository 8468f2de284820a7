//! Ranking metrics and the evaluation protocol.
//!
//! Ties are scored pessimistically for both metrics: a candidate scoring
//! equal to the positive counts against it, which keeps thresholds
//! conservative and deterministic.

use crate::error::{CoreError, Result};

/// Evaluation positives plus negatives, either as one shared pool (the
/// Hits@K protocol) or as per-positive candidate lists (the MRR protocol).
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub positives: Vec<(u32, u32)>,
    pub negatives: EvalNegatives,
}

#[derive(Debug, Clone)]
pub enum EvalNegatives {
    SharedPool(Vec<(u32, u32)>),
    PerPositive(Vec<Vec<(u32, u32)>>),
}

impl EvalSplit {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let check = |pairs: &[(u32, u32)]| -> Result<()> {
            for &(h, t) in pairs {
                if h as usize >= num_nodes || t as usize >= num_nodes {
                    return Err(CoreError::NodeOutOfRange {
                        id: u64::from(h.max(t)),
                        num_nodes,
                    });
                }
            }
            Ok(())
        };
        check(&self.positives)?;
        let mut pos_sorted = self.positives.clone();
        pos_sorted.sort_unstable();
        let overlap = |negs: &[(u32, u32)]| negs.iter().any(|p| pos_sorted.binary_search(p).is_ok());
        match &self.negatives {
            EvalNegatives::SharedPool(pool) => {
                check(pool)?;
                if overlap(pool) {
                    return Err(CoreError::InvalidConfig(
                        "evaluation negatives overlap positives".into(),
                    ));
                }
            }
            EvalNegatives::PerPositive(lists) => {
                if lists.len() != self.positives.len() {
                    return Err(CoreError::InvalidConfig(
                        "per-positive candidate lists must match positives".into(),
                    ));
                }
                for list in lists {
                    check(list)?;
                    if overlap(list) {
                        return Err(CoreError::InvalidConfig(
                            "evaluation negatives overlap positives".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// What to compute over a split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricSpec {
    HitsAt(usize),
    Mrr,
}

impl MetricSpec {
    pub fn parse(s: &str) -> Result<MetricSpec> {
        if s == "mrr" {
            return Ok(MetricSpec::Mrr);
        }
        if let Some(k) = s.strip_prefix("hits@") {
            if let Ok(k) = k.parse::<usize>() {
                if k >= 1 {
                    return Ok(MetricSpec::HitsAt(k));
                }
            }
        }
        Err(CoreError::InvalidConfig(format!(
            "unknown metric '{s}' (expected hits@K or mrr)"
        )))
    }

    pub fn label(&self) -> String {
        match self {
            MetricSpec::HitsAt(k) => format!("hits@{k}"),
            MetricSpec::Mrr => "mrr".into(),
        }
    }
}

/// Fraction of positives scoring strictly above the K-th largest negative
/// in the shared pool. With K larger than the pool every positive is a hit.
pub fn hits_at_k(pos_scores: &[f64], neg_scores: &[f64], k: usize) -> Result<f64> {
    if neg_scores.is_empty() {
        return Err(CoreError::InvalidConfig(
            "hits_at_k needs a non-empty negative pool".into(),
        ));
    }
    if pos_scores.is_empty() {
        return Err(CoreError::InvalidConfig("hits_at_k needs positives".into()));
    }
    if k == 0 {
        return Err(CoreError::InvalidConfig("hits_at_k needs k >= 1".into()));
    }
    if k > neg_scores.len() {
        return Ok(1.0);
    }
    let mut sorted: Vec<f64> = neg_scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k - 1];
    let hits = pos_scores.iter().filter(|&&s| s > threshold).count();
    Ok(hits as f64 / pos_scores.len() as f64)
}

/// Reciprocal rank of one positive among its candidates; candidates scoring
/// at or above the positive push its rank down.
pub fn mrr(pos_score: f64, candidate_neg_scores: &[f64]) -> Result<f64> {
    if candidate_neg_scores.is_empty() {
        return Err(CoreError::InvalidConfig(
            "mrr needs a non-empty candidate list".into(),
        ));
    }
    let rank = 1 + candidate_neg_scores
        .iter()
        .filter(|&&s| s >= pos_score)
        .count();
    Ok(1.0 / rank as f64)
}

/// Applies a metric to already-computed scores.
pub fn apply_metric(
    metric: MetricSpec,
    pos_scores: &[f64],
    negatives: &NegScores,
) -> Result<f64> {
    match (metric, negatives) {
        (MetricSpec::HitsAt(k), NegScores::SharedPool(pool)) => hits_at_k(pos_scores, pool, k),
        (MetricSpec::Mrr, NegScores::PerPositive(lists)) => {
            if lists.len() != pos_scores.len() {
                return Err(CoreError::InvalidConfig(
                    "candidate lists must match positives".into(),
                ));
            }
            let mut acc = 0.0;
            for (p, negs) in pos_scores.iter().zip(lists) {
                acc += mrr(*p, negs)?;
            }
            Ok(acc / pos_scores.len() as f64)
        }
        // a shared pool doubles as every positive's candidate list
        (MetricSpec::Mrr, NegScores::SharedPool(pool)) => {
            let mut acc = 0.0;
            for p in pos_scores {
                acc += mrr(*p, pool)?;
            }
            Ok(acc / pos_scores.len() as f64)
        }
        (MetricSpec::HitsAt(_), NegScores::PerPositive(_)) => Err(CoreError::InvalidConfig(
            "hits@K uses a shared negative pool".into(),
        )),
    }
}

/// Negative scores in the shape matching the split's protocol.
#[derive(Debug, Clone)]
pub enum NegScores {
    SharedPool(Vec<f64>),
    PerPositive(Vec<Vec<f64>>),
}

/// Scores a split with the supplied pair scorer and applies the metric.
/// The scorer is called on whole pair lists so implementations can batch.
pub fn evaluate<F>(mut score_fn: F, split: &EvalSplit, metric: MetricSpec) -> Result<f64>
where
    F: FnMut(&[(u32, u32)]) -> Result<Vec<f64>>,
{
    if split.positives.is_empty() {
        return Err(CoreError::InvalidConfig(
            "evaluation split has no positives".into(),
        ));
    }
    let pos_scores = score_fn(&split.positives)?;
    let negatives = match &split.negatives {
        EvalNegatives::SharedPool(pool) => NegScores::SharedPool(score_fn(pool)?),
        EvalNegatives::PerPositive(lists) => {
            let mut out = Vec::with_capacity(lists.len());
            for list in lists {
                out.push(score_fn(list)?);
            }
            NegScores::PerPositive(out)
        }
    };
    apply_metric(metric, &pos_scores, &negatives)
}
