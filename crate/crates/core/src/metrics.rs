//! Ranking indicators (AUC, KS, banded GINI, KI, classification rate), lift
//! curves with the KR robustness indicator, and the default rate among
//! accepted applicants at an operating point.
//!
//! Every function takes parallel slices of scores and binary outcomes. The
//! position of a record in the slices acts as its id: whenever records must
//! be ordered, they are sorted by descending score with ascending position
//! breaking ties, so callers should pass records in ascending id order.

use crate::error::{Error, Result};

fn check_inputs(scores: &[f64], outcomes: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != outcomes.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} outcomes",
            scores.len(),
            outcomes.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Empty("score set".into()));
    }
    if let Some(y) = outcomes.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("outcome {y} is not binary")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("score is NaN"));
    }
    let pos = outcomes.iter().filter(|&&y| y == 1).count();
    Ok((pos, outcomes.len() - pos))
}

fn both_classes(scores: &[f64], outcomes: &[u8]) -> Result<(usize, usize)> {
    let (pos, neg) = check_inputs(scores, outcomes)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!("{pos} positives, {neg} negatives")));
    }
    Ok((pos, neg))
}

/// Positions sorted by descending score, ascending position on ties.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Number of records accepted at acceptance rate `a` out of `n`: ⌈a·n⌉,
/// with a tolerance so that e.g. 0.7 × 10 yields 7.
pub fn accepted_count(a: f64, n: usize) -> usize {
    let m = (a * n as f64 - 1e-9).ceil();
    (m.max(0.0) as usize).min(n)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Sort-based, O(n log n).
pub fn roc_auc(scores: &[f64], outcomes: &[u8]) -> Result<f64> {
    let (pos, neg) = both_classes(scores, outcomes)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the Mann-Whitney U statistic, kept integral.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if outcomes[order[j]] == 1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice_u += 2 * p * neg_below + p * q;
        neg_below += q;
        i = j;
    }
    Ok(twice_u as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Largest gap between the empirical score distributions of the two
/// classes, evaluated at every observed score.
pub fn ks_statistic(scores: &[f64], outcomes: &[u8]) -> Result<f64> {
    let (pos, neg) = both_classes(scores, outcomes)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut cp, mut cn) = (0usize, 0usize);
    let mut best = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if outcomes[order[i]] == 1 {
                cp += 1;
            } else {
                cn += 1;
            }
            i += 1;
        }
        let gap = (cp as f64 / pos as f64 - cn as f64 / neg as f64).abs();
        best = best.max(gap);
    }
    Ok(best)
}

/// Cumulative share of target-class records captured in the top fraction
/// `a` of the population, for each `a` of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub target_class: u8,
    /// Share of the target class in the set.
    pub prevalence: f64,
}

impl LiftCurve {
    /// The curve of a perfect ranking: min(1, a / prevalence).
    pub fn perfect(&self) -> Vec<f64> {
        self.grid.iter().map(|a| (a / self.prevalence).min(1.0)).collect()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("acceptance grid".into()));
    }
    if grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(Error::invalid("acceptance rates must lie in (0, 1]"));
    }
    Ok(())
}

pub fn lift_curve(scores: &[f64], outcomes: &[u8], target_class: u8, grid: &[f64]) -> Result<LiftCurve> {
    check_grid(grid)?;
    let (pos, neg) = check_inputs(scores, outcomes)?;
    let targets = if target_class == 1 { pos } else { neg };
    if targets == 0 {
        return Err(Error::SingleClass(format!("target class {target_class} absent")));
    }
    let n = scores.len();
    let order = descending_order(scores);
    let mut captured = Vec::with_capacity(n + 1);
    captured.push(0usize);
    for &i in &order {
        let last = *captured.last().unwrap_or(&0);
        captured.push(last + usize::from(outcomes[i] == target_class));
    }
    let values = grid
        .iter()
        .map(|&a| captured[accepted_count(a, n)] as f64 / targets as f64)
        .collect();
    Ok(LiftCurve {
        grid: grid.to_vec(),
        values,
        target_class,
        prevalence: targets as f64 / n as f64,
    })
}

/// Accuracy ratio of the default-capture (CAP) curve read only at the
/// boundaries of `bands` equal-frequency score bands, riskiest first, and
/// held flat across each band. Tied scores share their defaults evenly, so
/// the value never exceeds KI and approaches it as bands get finer. `None`
/// when there are fewer records than bands.
pub fn banded_gini(scores: &[f64], outcomes: &[u8], bands: usize) -> Result<Option<f64>> {
    let (_, defaults) = both_classes(scores, outcomes)?;
    if bands == 0 {
        return Err(Error::invalid("band count must be positive"));
    }
    let n = scores.len();
    if n < bands {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut cap = vec![0.0; n + 1];
    let (mut start, mut before) = (0, 0usize);
    while start < n {
        let mut end = start;
        let mut hits = 0;
        while end < n && scores[order[end]].total_cmp(&scores[order[start]]).is_eq() {
            hits += usize::from(outcomes[order[end]] == 0);
            end += 1;
        }
        let width = (end - start) as f64;
        for (step, c) in cap[start + 1..=end].iter_mut().enumerate() {
            *c = before as f64 + hits as f64 * (step + 1) as f64 / width;
        }
        before += hits;
        start = end;
    }
    let mut area = 0.0;
    let mut k = 0;
    for size in crate::scoring::band_sizes(n, bands) {
        area += size as f64 * cap[k];
        k += size;
    }
    area /= n as f64 * defaults as f64;
    let perfect = 1.0 - defaults as f64 / (2.0 * n as f64);
    Ok(Some((area - 0.5) / (perfect - 0.5)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalIndicators {
    pub auc: f64,
    pub ks: f64,
    /// `None` when the set is smaller than the band count.
    pub gini: Option<f64>,
    pub ki: f64,
    pub classification_rate: f64,
}

/// Cutoff used for the classification rate.
pub const CLASSIFICATION_CUTOFF: f64 = 0.5;

pub fn global_indicators(scores: &[f64], outcomes: &[u8], bands: usize) -> Result<GlobalIndicators> {
    let auc = roc_auc(scores, outcomes)?;
    let ks = ks_statistic(scores, outcomes)?;
    let gini = banded_gini(scores, outcomes, bands)?;
    let hits = scores
        .iter()
        .zip(outcomes)
        .filter(|(&s, &y)| (s >= CLASSIFICATION_CUTOFF) == (y == 1))
        .count();
    Ok(GlobalIndicators {
        auc,
        ks,
        gini,
        ki: ki_from_auc(auc),
        classification_rate: hits as f64 / scores.len() as f64,
    })
}

pub fn ki_from_auc(auc: f64) -> f64 {
    2.0 * auc - 1.0
}

/// Robustness of a model: one minus the mean absolute gap between its
/// estimation and validation lift curves, relative to the mean gap between
/// the ideal estimation curve and the diagonal. Clamped to [0, 1].
pub fn kr(estimation: &LiftCurve, validation: &LiftCurve) -> Result<f64> {
    if estimation.grid != validation.grid {
        return Err(Error::invalid("lift curves are on different grids"));
    }
    if estimation.target_class != validation.target_class {
        return Err(Error::invalid("lift curves have different target classes"));
    }
    let len = estimation.grid.len() as f64;
    let gap = estimation
        .values
        .iter()
        .zip(&validation.values)
        .map(|(e, v)| (e - v).abs())
        .sum::<f64>()
        / len;
    let room = estimation
        .perfect()
        .iter()
        .zip(&estimation.grid)
        .map(|(p, a)| p - a)
        .sum::<f64>()
        / len;
    if room <= 0.0 {
        return Err(Error::invalid("ideal lift curve coincides with the diagonal"));
    }
    Ok((1.0 - gap / room).clamp(0.0, 1.0))
}

/// Default rate among the top ⌈a·n⌉ records by score, with its binomial
/// standard error √(r(1−r)/m).
pub fn default_rate_among_accepted(scores: &[f64], outcomes: &[u8], a: f64) -> Result<(f64, f64)> {
    check_inputs(scores, outcomes)?;
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::invalid(format!("acceptance rate {a} is outside (0, 1]")));
    }
    let order = descending_order(scores);
    let m = accepted_count(a, scores.len()).max(1);
    let defaults = order[..m].iter().filter(|&&i| outcomes[i] == 0).count();
    Ok(rate_and_error(defaults, m))
}

fn rate_and_error(defaults: usize, m: usize) -> (f64, f64) {
    let rate = defaults as f64 / m as f64;
    (rate, (rate * (1.0 - rate) / m as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub acceptance_rate: f64,
    pub default_rate: f64,
    pub std_error: f64,
    pub accepted: usize,
}

/// Default rate among accepted at every grid point; the grid must be
/// strictly increasing.
pub fn default_rate_curve(scores: &[f64], outcomes: &[u8], grid: &[f64]) -> Result<Vec<CurvePoint>> {
    check_grid(grid)?;
    check_inputs(scores, outcomes)?;
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("acceptance grid must be strictly increasing"));
    }
    let n = scores.len();
    let order = descending_order(scores);
    let mut cum_defaults = Vec::with_capacity(n + 1);
    cum_defaults.push(0usize);
    for &i in &order {
        let last = *cum_defaults.last().unwrap_or(&0);
        cum_defaults.push(last + usize::from(outcomes[i] == 0));
    }
    Ok(grid
        .iter()
        .map(|&a| {
            let m = accepted_count(a, n).max(1);
            let (default_rate, std_error) = rate_and_error(cum_defaults[m], m);
            CurvePoint {
                acceptance_rate: a,
                default_rate,
                std_error,
                accepted: m,
            }
        })
        .collect())
}

/// Indicators of one model on its estimation and validation sets, plus its
/// validation default-rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub estimation: GlobalIndicators,
    pub validation: GlobalIndicators,
    pub kr: f64,
    pub curve: Vec<CurvePoint>,
}

impl MetricsReport {
    /// Rows of (set, indicator, value); KR is reported once, on set `model`.
    pub fn indicator_rows(&self) -> Vec<(&'static str, &'static str, Option<f64>)> {
        let mut rows = Vec::new();
        for (set, g) in [("estimation", &self.estimation), ("validation", &self.validation)] {
            rows.push((set, "AUC", Some(g.auc)));
            rows.push((set, "KS", Some(g.ks)));
            rows.push((set, "GINI", g.gini));
            rows.push((set, "KI", Some(g.ki)));
            rows.push((set, "ClassificationRate", Some(g.classification_rate)));
        }
        rows.push(("model", "KR", Some(self.kr)));
        rows
    }

    pub fn point_at(&self, a: f64) -> Option<&CurvePoint> {
        self.curve.iter().find(|p| (p.acceptance_rate - a).abs() < 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let s = [0.9, 0.8, 0.3, 0.2];
        assert_eq!(roc_auc(&s, &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&s, &[1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&s, &[1, 1, 1, 1]), Err(Error::SingleClass(_))));
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[0.1, 0.5, 0.1, 0.5], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert!(ks_statistic(&[0.1], &[0]).is_err());
    }

    #[test]
    fn lift_examples() {
        let s = [0.9, 0.8, 0.3, 0.2];
        let c = lift_curve(&s, &[1, 1, 0, 0], 1, &[0.5, 1.0]).unwrap();
        assert_eq!(c.values, vec![1.0, 1.0]);
        assert_eq!(c.perfect(), vec![1.0, 1.0]);

        let flat = vec![0.5; 100];
        let ys: Vec<u8> = (0..100).map(|i| u8::from(i % 2 == 0)).collect();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let c = lift_curve(&flat, &ys, 1, &grid).unwrap();
        for (a, v) in grid.iter().zip(&c.values) {
            assert!((a - v).abs() <= 1.0 / 100.0 + 1e-12);
        }
        assert_eq!(*c.values.last().unwrap(), 1.0);
        assert!(lift_curve(&s, &[1, 1, 0, 0], 1, &[]).is_err());
    }

    #[test]
    fn ki_from_published_auc() {
        assert!((ki_from_auc(0.899) - 0.798).abs() < 1e-12);
        assert_eq!(ki_from_auc(0.5), 0.0);
    }

    #[test]
    fn kr_examples() {
        let grid = vec![0.25, 0.5, 0.75, 1.0];
        let est = LiftCurve {
            grid: grid.clone(),
            values: vec![0.5, 1.0, 1.0, 1.0],
            target_class: 1,
            prevalence: 0.5,
        };
        assert_eq!(kr(&est, &est).unwrap(), 1.0);
        let diag = LiftCurve {
            values: grid.clone(),
            ..est.clone()
        };
        assert!(kr(&est, &diag).unwrap().abs() < 1e-15);
        let other = LiftCurve {
            grid: vec![0.5, 1.0],
            values: vec![1.0, 1.0],
            ..est.clone()
        };
        assert!(kr(&est, &other).is_err());
    }

    #[test]
    fn default_rate_examples() {
        let s = [0.9, 0.8, 0.7, 0.6];
        let y = [1, 1, 0, 1];
        assert_eq!(default_rate_among_accepted(&s, &y, 0.5).unwrap(), (0.0, 0.0));
        let (r, _) = default_rate_among_accepted(&s, &y, 1.0).unwrap();
        assert_eq!(r, 0.25);
        let (_, se) = rate_and_error(50, 100);
        assert!((se - 0.05).abs() < 1e-15);
        assert!(default_rate_among_accepted(&[], &[], 0.5).is_err());
        assert!(default_rate_among_accepted(&s, &y, 0.0).is_err());
    }

    #[test]
    fn accepted_count_avoids_float_overshoot() {
        assert_eq!(accepted_count(0.7, 10), 7);
        assert_eq!(accepted_count(0.55, 20), 11);
        assert_eq!(accepted_count(0.01, 10), 1);
        assert_eq!(accepted_count(1.0, 1800), 1800);
    }

    #[test]
    fn banded_gini_examples() {
        // Riskiest first the CAP reads 0, 1, 1, 2, 2, 2 (of 2 defaults) before
        // each record: step area 8/12 against a perfect 10/12.
        let s = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let y = [0, 1, 0, 1, 1, 1];
        let g6 = banded_gini(&s, &y, 6).unwrap().unwrap();
        assert!((g6 - 0.5).abs() < 1e-12);
        assert!(g6 <= 2.0 * roc_auc(&s, &y).unwrap() - 1.0);
        // Two bands: the CAP is read at 0, 3/6 (two of two defaults).
        // Step area 3/6 · 1 = 0.5; perfect area 1 − 2/12.
        let g = banded_gini(&s, &y, 2).unwrap().unwrap();
        assert!((g - (0.5 - 0.5) / (1.0 - 2.0 / 12.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn banded_gini_small_set_is_omitted() {
        let g = global_indicators(&[0.9, 0.1], &[1, 0], 20).unwrap();
        assert_eq!(g.gini, None);
        assert_eq!(g.auc, 1.0);
        assert_eq!(g.classification_rate, 1.0);
    }
}
