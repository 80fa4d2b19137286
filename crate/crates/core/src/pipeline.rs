//! End-to-end comparison of reject-inference techniques: split off a
//! second-period population (A2), fit every technique on the estimation part
//! of A1, compare on A1 validation at an operating acceptance rate, select the
//! winner and evaluate it on A2.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{
    generate_synthetic, load_csv, simulate_rejection_with, split_with, AuditSnapshot, CsvRoles, Dataset,
    RejectionConfig,
};
use crate::error::{Error, Result, StageExt};
use crate::metrics::{default_rate_curve, global_indicators, kr, lift_curve, CurvePoint, MetricsReport};
use crate::reject_inference::{fit_technique, ControlStrategy, Technique, TechniqueConfig, TechniqueFit};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, roles: CsvRoles },
    Synthetic { n: usize, k: usize, good_rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Simulated historical rejection; requires fully labelled data.
    pub rejection: Option<RejectionConfig>,
    /// Share of the population in A1; the rest is A2.
    pub a1_fraction: f64,
    /// Share of A1 used for estimation; the rest is validation.
    pub estimation_fraction: f64,
    pub stratify: bool,
    /// Techniques in report order. Their seeds are derived from the master
    /// seed; the `seed` field of each entry is ignored.
    pub techniques: Vec<TechniqueConfig>,
    pub operating_rate: f64,
    pub grid: Vec<f64>,
    /// Band count of the GINI indicator.
    pub gini_bands: usize,
    pub master_seed: u64,
}

/// Extrapolation, augmentation and the three control-group strategies.
pub fn default_techniques() -> Vec<Technique> {
    vec![
        Technique::Extrapolation,
        Technique::Augmentation,
        Technique::ControlGroup(ControlStrategy::Gc1),
        Technique::ControlGroup(ControlStrategy::Gc2),
        Technique::ControlGroup(ControlStrategy::Gc3),
    ]
}

pub fn default_grid() -> Vec<f64> {
    (10..=20).map(|i| i as f64 * 0.05).collect()
}

/// Grid of the lift curves compared by KR: 0.01, 0.02, …, 1.00.
pub fn kr_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

impl ExperimentConfig {
    pub fn synthetic(n: usize, k: usize, good_rate: f64, master_seed: u64) -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic { n, k, good_rate },
            rejection: Some(RejectionConfig::default()),
            a1_fraction: 0.7,
            estimation_fraction: 2.0 / 3.0,
            stratify: true,
            techniques: default_techniques().into_iter().map(TechniqueConfig::new).collect(),
            operating_rate: 0.8,
            grid: default_grid(),
            gini_bands: 20,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("A1 fraction", self.a1_fraction),
            ("estimation fraction", self.estimation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("{name} {f} is outside (0, 1)")));
            }
        }
        if self.techniques.is_empty() {
            return Err(Error::invalid("technique list is empty"));
        }
        for (i, t) in self.techniques.iter().enumerate() {
            t.validate()?;
            if self.techniques[..i].iter().any(|u| u.technique == t.technique) {
                return Err(Error::invalid(format!("technique `{}` listed twice", t.technique)));
            }
        }
        if self.grid.is_empty() || self.grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::invalid("grid rates must lie in (0, 1]"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if !self.grid.iter().any(|a| (a - self.operating_rate).abs() < 1e-12) {
            return Err(Error::invalid(format!(
                "operating rate {} is not a grid point",
                self.operating_rate
            )));
        }
        if self.gini_bands == 0 {
            return Err(Error::invalid("GINI band count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueResult {
    pub config: TechniqueConfig,
    pub fit: TechniqueFit,
    pub metrics: MetricsReport,
    pub a2_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub master_seed: u64,
    pub version: &'static str,
    pub n_records: usize,
    pub n_rejected: usize,
    pub estimation_size: usize,
    pub validation_size: usize,
    pub a2_size: usize,
    pub stratified: bool,
    pub timings_ms: Vec<(&'static str, u128)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub results: Vec<TechniqueResult>,
    pub selected: Technique,
    pub selection_value: f64,
    pub operating_rate: f64,
    /// True when outcomes were not available for every record, so
    /// evaluation sets were restricted to accepted applicants.
    pub evaluation_restricted: bool,
    pub audit: AuditSnapshot,
    pub metadata: RunMetadata,
}

impl ExperimentReport {
    pub fn result(&self, technique: Technique) -> Option<&TechniqueResult> {
        self.results.iter().find(|r| r.fit.technique == technique)
    }

    pub fn selected_a2_curve(&self) -> &[CurvePoint] {
        self.result(self.selected)
            .map(|r| r.a2_curve.as_slice())
            .unwrap_or_default()
    }
}

/// Technique with the lowest default rate among accepted at `operating_rate`
/// on the validation curve. Differences below 1e-12 keep the earlier entry.
pub fn select_best_model(reports: &[(Technique, &MetricsReport)], operating_rate: f64) -> Result<(Technique, f64)> {
    let mut best: Option<(Technique, f64)> = None;
    for (t, report) in reports {
        let point = report
            .point_at(operating_rate)
            .ok_or_else(|| Error::invalid(format!("curve of `{t}` has no point at {operating_rate}")))?;
        match best {
            Some((_, v)) if point.default_rate >= v - 1e-12 => {}
            _ => best = Some((*t, point.default_rate)),
        }
    }
    best.ok_or_else(|| Error::Empty("technique reports".into()))
}

/// Outcomes used to evaluate a set: ground truth for oracle data, otherwise
/// only the accepted records (returns `restricted = true`).
fn evaluation_labels(ds: &Dataset, ids: &[usize]) -> Result<(Vec<usize>, Vec<u8>, bool)> {
    if ds.oracle_mode() {
        let ys = ids.iter().map(|&id| ds.oracle_outcome(id)).collect::<Result<_>>()?;
        Ok((ids.to_vec(), ys, false))
    } else {
        let kept: Vec<usize> = ids.iter().copied().filter(|&id| ds.decision(id) == 1).collect();
        let ys = kept.iter().map(|&id| ds.outcome(id)).collect::<Result<_>>()?;
        Ok((kept, ys, true))
    }
}

struct EvalSet {
    ids: Vec<usize>,
    outcomes: Vec<u8>,
}

fn evaluate(
    ds: &Dataset,
    fit: &TechniqueFit,
    est: &EvalSet,
    val: &EvalSet,
    a2: &EvalSet,
    cfg: &ExperimentConfig,
) -> Result<(MetricsReport, Vec<CurvePoint>)> {
    let est_scores = fit.model.score_ids(ds, &est.ids)?;
    let val_scores = fit.model.score_ids(ds, &val.ids)?;
    let a2_scores = fit.model.score_ids(ds, &a2.ids)?;
    let grid = kr_grid();
    let lift_est = lift_curve(&est_scores, &est.outcomes, 1, &grid)?;
    let lift_val = lift_curve(&val_scores, &val.outcomes, 1, &grid)?;
    let metrics = MetricsReport {
        estimation: global_indicators(&est_scores, &est.outcomes, cfg.gini_bands)?,
        validation: global_indicators(&val_scores, &val.outcomes, cfg.gini_bands)?,
        kr: kr(&lift_est, &lift_val)?,
        curve: default_rate_curve(&val_scores, &val.outcomes, &cfg.grid)?,
    };
    let a2_curve = default_rate_curve(&a2_scores, &a2.outcomes, &cfg.grid)?;
    Ok((metrics, a2_curve))
}

pub fn load_source(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.source {
        DataSource::Csv { path, roles } => load_csv(path, roles),
        DataSource::Synthetic { n, k, good_rate } => {
            generate_synthetic(*n, *k, *good_rate, derive_seed(cfg.master_seed, "data"))
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate().stage("config")?;
    let mut timings = Vec::new();
    let t0 = Instant::now();
    let raw = load_source(cfg).stage("load")?;
    let ds = match &cfg.rejection {
        Some(rc) => {
            simulate_rejection_with(&raw, rc, derive_seed(cfg.master_seed, "rejection"))
                .stage("reject-simulation")?
                .dataset
        }
        None => raw,
    };
    timings.push(("data", t0.elapsed().as_millis()));
    run_on_dataset(&ds, cfg, timings)
}

/// Runs stages 3–7 on an already prepared dataset.
pub fn run_on_dataset(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    mut timings: Vec<(&'static str, u128)>,
) -> Result<ExperimentReport> {
    cfg.validate().stage("config")?;
    let t = Instant::now();
    let outer = split_with(
        ds,
        &ds.ids(),
        &[cfg.a1_fraction, 1.0 - cfg.a1_fraction],
        &["A1", "A2"],
        derive_seed(cfg.master_seed, "split-a2"),
        cfg.stratify,
    )
    .stage("split")?;
    let (a1, a2) = (&outer.splits[0].member_ids, &outer.splits[1].member_ids);
    let inner = split_with(
        ds,
        a1,
        &[cfg.estimation_fraction, 1.0 - cfg.estimation_fraction],
        &["A1-estimation", "A1-validation"],
        derive_seed(cfg.master_seed, "split-a1"),
        cfg.stratify,
    )
    .stage("split")?;
    let (est_ids, val_ids) = (&inner.splits[0].member_ids, &inner.splits[1].member_ids);
    timings.push(("split", t.elapsed().as_millis()));

    let t = Instant::now();
    let fits: Vec<(TechniqueConfig, TechniqueFit)> = cfg
        .techniques
        .par_iter()
        .map(|tc| {
            let mut tc = tc.clone();
            tc.seed = derive_seed(cfg.master_seed, tc.technique.tag());
            fit_technique(ds, est_ids, &tc).map(|fit| (tc, fit))
        })
        .collect::<Result<Vec<_>>>()
        .stage("fit")?;
    for (_, fit) in &fits {
        if fit.training_ids.iter().any(|id| a2.binary_search(id).is_ok()) {
            return Err(Error::invalid(format!("`{}` trained on A2 records", fit.technique))).stage("fit");
        }
    }
    timings.push(("fit", t.elapsed().as_millis()));

    let t = Instant::now();
    let mut restricted = false;
    let mut eval_set = |ids: &[usize]| -> Result<EvalSet> {
        let (ids, outcomes, r) = evaluation_labels(ds, ids)?;
        restricted |= r;
        Ok(EvalSet { ids, outcomes })
    };
    let est = eval_set(est_ids).stage("evaluate")?;
    let val = eval_set(val_ids).stage("evaluate")?;
    let a2_set = eval_set(a2).stage("evaluate")?;
    let evaluated: Vec<(MetricsReport, Vec<CurvePoint>)> = fits
        .par_iter()
        .map(|(_, fit)| evaluate(ds, fit, &est, &val, &a2_set, cfg))
        .collect::<Result<Vec<_>>>()
        .stage("evaluate")?;
    timings.push(("evaluate", t.elapsed().as_millis()));

    let results: Vec<TechniqueResult> = fits
        .into_iter()
        .zip(evaluated)
        .map(|((config, fit), (metrics, a2_curve))| TechniqueResult {
            config,
            fit,
            metrics,
            a2_curve,
        })
        .collect();
    let entries: Vec<(Technique, &MetricsReport)> = results.iter().map(|r| (r.fit.technique, &r.metrics)).collect();
    let (selected, selection_value) = select_best_model(&entries, cfg.operating_rate).stage("select")?;

    Ok(ExperimentReport {
        selected,
        selection_value,
        operating_rate: cfg.operating_rate,
        evaluation_restricted: restricted,
        audit: ds.audit(),
        metadata: RunMetadata {
            master_seed: cfg.master_seed,
            version: env!("CARGO_PKG_VERSION"),
            n_records: ds.len(),
            n_rejected: ds.n_rejected(),
            estimation_size: est_ids.len(),
            validation_size: val_ids.len(),
            a2_size: a2.len(),
            stratified: outer.stratified && inner.stratified,
            timings_ms: timings,
        },
        results,
    })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Indicators table: one row per (technique, set, indicator).
pub fn report_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["technique", "set", "indicator", "value"])?;
    for r in &report.results {
        for (set, name, value) in r.metrics.indicator_rows() {
            let v = value.map(num).unwrap_or_default();
            w.write_record([r.fit.technique.tag(), set, name, &v])?;
        }
    }
    finish(w)
}

/// Default-rate curves: one row per (technique, set, acceptance rate) for the
/// A1 validation set and A2.
pub fn curves_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "technique",
        "set",
        "acceptance_rate",
        "default_rate",
        "std_error",
        "accepted",
    ])?;
    for r in &report.results {
        for (set, curve) in [("validation", &r.metrics.curve), ("A2", &r.a2_curve)] {
            for p in curve {
                w.write_record([
                    r.fit.technique.tag(),
                    set,
                    &num(p.acceptance_rate),
                    &num(p.default_rate),
                    &num(p.std_error),
                    &p.accepted.to_string(),
                ])?;
            }
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

pub fn selection_text(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "selected {}", report.selected);
    let _ = writeln!(s, "operating_rate {}", num(report.operating_rate));
    let _ = writeln!(s, "validation_default_rate {}", num(report.selection_value));
    if let Some(p) = report
        .selected_a2_curve()
        .iter()
        .find(|p| (p.acceptance_rate - report.operating_rate).abs() < 1e-12)
    {
        let _ = writeln!(s, "a2_default_rate {}", num(p.default_rate));
        let _ = writeln!(s, "a2_std_error {}", num(p.std_error));
    }
    let scope = if report.evaluation_restricted {
        "accepted-only"
    } else {
        "all"
    };
    let _ = writeln!(s, "evaluation {scope}");
    let _ = writeln!(s, "master_seed {}", report.metadata.master_seed);
    s
}

/// Writes report.csv, curves.csv, selection.txt and models/<tag>.model.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let models = dir.join("models");
    std::fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
    let mut files = vec![
        (dir.join("report.csv"), report_csv(report)?),
        (dir.join("curves.csv"), curves_csv(report)?),
        (dir.join("selection.txt"), selection_text(report)),
    ];
    for r in &report.results {
        files.push((
            models.join(format!("{}.model", r.fit.technique)),
            r.fit.to_text(&r.config),
        ));
    }
    for (path, body) in &files {
        std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::GlobalIndicators;

    fn report_with(rate: f64) -> MetricsReport {
        let g = GlobalIndicators {
            auc: 0.8,
            ks: 0.5,
            gini: None,
            ki: 0.6,
            classification_rate: 0.9,
        };
        MetricsReport {
            estimation: g,
            validation: g,
            kr: 0.9,
            curve: vec![CurvePoint {
                acceptance_rate: 0.8,
                default_rate: rate,
                std_error: 0.01,
                accepted: 100,
            }],
        }
    }

    #[test]
    fn selection_is_argmin_with_list_order_ties() {
        let (m1, m3, m5) = (report_with(0.05), report_with(0.04), report_with(0.06));
        let gc = |s| Technique::ControlGroup(s);
        let entries = [
            (Technique::Extrapolation, &m1),
            (gc(ControlStrategy::Gc1), &m3),
            (gc(ControlStrategy::Gc3), &m5),
        ];
        assert_eq!(select_best_model(&entries, 0.8).unwrap().0, gc(ControlStrategy::Gc1));

        let tie = [(Technique::Extrapolation, &m1), (Technique::Augmentation, &m1)];
        assert_eq!(select_best_model(&tie, 0.8).unwrap().0, Technique::Extrapolation);
        assert!(select_best_model(&tie, 0.9).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::synthetic(500, 5, 0.9, 1);
        assert!(cfg.validate().is_ok());
        cfg.operating_rate = 0.83;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::synthetic(500, 5, 0.9, 1);
        cfg.techniques.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::synthetic(500, 5, 0.9, 1);
        cfg.techniques.push(TechniqueConfig::new(Technique::Extrapolation));
        assert!(cfg.validate().is_err());
    }
}
