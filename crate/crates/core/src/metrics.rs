//! Ranking metrics: Hit@1, PERR, mAP and gAP.
//!
//! Definitions follow the YouTube-8M benchmark conventions. Every ranking
//! breaks score ties by the lower index.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default per-video cutoff for gAP.
pub const DEFAULT_GAP_TOP_K: usize = 20;

/// Scores and ground truth for one concept layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    classes: usize,
    scores: Vec<Vec<f64>>,
    positives: Vec<Vec<usize>>,
}

impl PredictionSet {
    pub fn new(classes: usize, scores: Vec<Vec<f64>>, positives: Vec<Vec<usize>>) -> Result<Self> {
        check_dim(scores.len(), positives.len(), "videos with ground truth")?;
        for (v, (s, p)) in scores.iter().zip(&positives).enumerate() {
            check_dim(classes, s.len(), "score vector")?;
            if !s.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(format!("scores of video {v}")));
            }
            if let Some(&bad) = p.iter().find(|&&c| c >= classes) {
                return Err(Error::LabelOutOfRange {
                    layer: 0,
                    index: bad,
                    len: classes,
                });
            }
        }
        let positives = positives
            .into_iter()
            .map(|mut p| {
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        Ok(Self {
            classes,
            scores,
            positives,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn videos(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn positives(&self) -> &[Vec<usize>] {
        &self.positives
    }

    fn is_positive(&self, video: usize, class: usize) -> bool {
        self.positives[video].binary_search(&class).is_ok()
    }
}

/// Descending by score, then ascending by index.
fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| desc(scores[a], scores[b]).then(a.cmp(&b)));
    idx
}

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Fraction of videos whose top-scored label is a positive.
pub fn hit_at_1(p: &PredictionSet) -> Result<f64> {
    if p.videos() == 0 || p.classes == 0 {
        return Err(Error::Empty("prediction set"));
    }
    let hits = (0..p.videos())
        .filter(|&v| {
            let s = &p.scores[v];
            // First maximum wins ties.
            let top = (1..s.len()).fold(0, |best, c| if s[c] > s[best] { c } else { best });
            p.is_positive(v, top)
        })
        .count();
    Ok(hits as f64 / p.videos() as f64)
}

/// Precision at equal recall rate: per video, precision within the top-G
/// labels where G is that video's positive count; averaged over videos.
pub fn perr(p: &PredictionSet) -> Result<f64> {
    if p.videos() == 0 {
        return Err(Error::Empty("prediction set"));
    }
    let mut total = 0.0;
    for v in 0..p.videos() {
        let g = p.positives[v].len();
        if g == 0 {
            return Err(Error::Malformed(format!(
                "video {v} has no ground-truth labels (PERR undefined)"
            )));
        }
        let order = rank_order(&p.scores[v]);
        let correct = order[..g].iter().filter(|&&c| p.is_positive(v, c)).count();
        total += correct as f64 / g as f64;
    }
    Ok(total / p.videos() as f64)
}

/// Average precision of a ranked relevance list, normalised by `total`.
fn average_precision(ranked_relevance: impl IntoIterator<Item = bool>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, rel) in ranked_relevance.into_iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

/// Macro mean of per-class AP over videos. Classes without positives are
/// skipped and reported as `None` in the per-class vector.
pub fn mean_average_precision(p: &PredictionSet) -> Result<(f64, Vec<Option<f64>>)> {
    if p.videos() == 0 {
        return Err(Error::Empty("prediction set"));
    }
    let mut per_class = Vec::with_capacity(p.classes);
    let mut column = vec![0.0; p.videos()];
    for c in 0..p.classes {
        let positives = (0..p.videos()).filter(|&v| p.is_positive(v, c)).count();
        if positives == 0 {
            per_class.push(None);
            continue;
        }
        for (v, s) in column.iter_mut().enumerate() {
            *s = p.scores[v][c];
        }
        let order = rank_order(&column);
        per_class.push(Some(average_precision(
            order.iter().map(|&v| p.is_positive(v, c)),
            positives,
        )));
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Empty("no class has a positive video"));
    }
    Ok((present.iter().sum::<f64>() / present.len() as f64, per_class))
}

/// AP over the pool of every video's top-`k` predictions, normalised by the
/// total number of ground-truth positives.
pub fn global_average_precision(p: &PredictionSet, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("gAP cutoff must be at least 1".into()));
    }
    // (score, video, class)
    let mut pool: Vec<(f64, usize, usize)> = Vec::new();
    for v in 0..p.videos() {
        let order = rank_order(&p.scores[v]);
        pool.extend(order.iter().take(k).map(|&c| (p.scores[v][c], v, c)));
    }
    if pool.is_empty() {
        return Err(Error::Empty("gAP pool"));
    }
    pool.sort_by(|a, b| desc(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let total: usize = p.positives.iter().map(Vec::len).sum();
    Ok(average_precision(
        pool.iter().map(|&(_, v, c)| p.is_positive(v, c)),
        total,
    ))
}

/// Metrics for one concept layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub layer: String,
    pub map: f64,
    pub perr: f64,
    pub hit_at_1: f64,
    pub gap: f64,
    /// AP per class; `None` where the class has no positive video.
    pub per_class_ap: Vec<Option<f64>>,
}

impl EvalReport {
    /// Evaluates every metric. Videos without positives are excluded from
    /// PERR only.
    pub fn compute(layer: impl Into<String>, p: &PredictionSet, gap_k: usize) -> Result<Self> {
        let (map, per_class_ap) = mean_average_precision(p)?;
        let with_truth: Vec<usize> = (0..p.videos())
            .filter(|&v| !p.positives[v].is_empty())
            .collect();
        let perr_set = PredictionSet {
            classes: p.classes,
            scores: with_truth.iter().map(|&v| p.scores[v].clone()).collect(),
            positives: with_truth.iter().map(|&v| p.positives[v].clone()).collect(),
        };
        Ok(Self {
            layer: layer.into(),
            map,
            perr: perr(&perr_set)?,
            hit_at_1: hit_at_1(p)?,
            gap: global_average_precision(p, gap_k)?,
            per_class_ap,
        })
    }

    /// `key = value` lines, six decimals, prefixed by the layer name.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("map", self.map),
            ("perr", self.perr),
            ("hit_at_1", self.hit_at_1),
            ("gap", self.gap),
        ] {
            let _ = writeln!(out, "{}.{k} = {v:.6}", self.layer);
        }
        out
    }
}

/// Writes reports as `key = value` text and as JSON.
pub fn write_reports(reports: &[EvalReport], text_path: &Path, json_path: &Path) -> Result<()> {
    let text: String = reports.iter().map(EvalReport::to_key_values).collect();
    std::fs::write(text_path, text).map_err(|e| Error::io(text_path, e))?;
    let json = serde_json::to_string_pretty(reports)
        .map_err(|e| Error::Malformed(format!("serializing reports: {e}")))?;
    std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))
}

pub fn read_reports_json(path: &Path) -> Result<Vec<EvalReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(classes: usize, scores: Vec<Vec<f64>>, pos: Vec<Vec<usize>>) -> PredictionSet {
        PredictionSet::new(classes, scores, pos).unwrap()
    }

    #[test]
    fn hit_at_1_cases() {
        assert_eq!(hit_at_1(&set(2, vec![vec![0.9, 0.1]], vec![vec![0]])).unwrap(), 1.0);
        assert_eq!(hit_at_1(&set(2, vec![vec![0.5, 0.5]], vec![vec![1]])).unwrap(), 0.0);
        assert!(hit_at_1(&set(2, vec![], vec![])).is_err());
    }

    #[test]
    fn perr_cases() {
        let p = set(4, vec![vec![0.9, 0.8, 0.1, 0.0]], vec![vec![0, 2]]);
        assert_eq!(perr(&p).unwrap(), 0.5);
        let p = set(3, vec![vec![0.2, 0.9, 0.8]], vec![vec![1, 2]]);
        assert_eq!(perr(&p).unwrap(), 1.0);
        assert!(perr(&set(2, vec![vec![0.1, 0.2]], vec![vec![]])).is_err());
    }

    #[test]
    fn map_hand_case() {
        let p = set(
            1,
            vec![vec![0.9], vec![0.8], vec![0.1]],
            vec![vec![0], vec![], vec![0]],
        );
        let (map, per) = mean_average_precision(&p).unwrap();
        assert!((map - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(per.len(), 1);
        let all = set(1, vec![vec![0.3], vec![0.2]], vec![vec![0], vec![0]]);
        assert_eq!(mean_average_precision(&all).unwrap().0, 1.0);
        let none = set(1, vec![vec![0.3]], vec![vec![]]);
        assert!(mean_average_precision(&none).is_err());
    }

    #[test]
    fn gap_hand_cases() {
        let perfect = set(3, vec![vec![0.9, 0.1, 0.8]], vec![vec![0, 2]]);
        assert_eq!(global_average_precision(&perfect, 5).unwrap(), 1.0);
        // Two positives ranked below three negatives.
        let p = set(
            5,
            vec![vec![0.9, 0.8, 0.7, 0.2, 0.1]],
            vec![vec![3, 4]],
        );
        let g = global_average_precision(&p, 20).unwrap();
        assert!((g - 0.325).abs() < 1e-15);
        assert!(global_average_precision(&p, 0).is_err());
    }

    #[test]
    fn report_text_has_six_decimals() {
        let p = set(2, vec![vec![0.9, 0.1], vec![0.2, 0.7]], vec![vec![0], vec![1]]);
        let r = EvalReport::compute("entities", &p, DEFAULT_GAP_TOP_K).unwrap();
        assert_eq!(r.map, 1.0);
        assert!(r.to_key_values().contains("entities.map = 1.000000"));
    }
}
