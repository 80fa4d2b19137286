//! Applicant populations: loading, synthetic generation, simulated rejection
//! and splitting.
//!
//! Outcomes of rejected applicants are stored but masked. The only ways to
//! read them are [`Dataset::reveal`] (a control group granted credit) and
//! [`Dataset::oracle_outcome`] (ground truth of simulated data, used for
//! evaluation). Any other attempt fails and is counted by the label audit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scoring::band_sizes;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Num(f64),
    Cat(String),
}

impl FeatureValue {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureValue::Num(_) => FeatureKind::Numeric,
            FeatureValue::Cat(_) => FeatureKind::Categorical,
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Num(v) => write!(f, "{v}"),
            FeatureValue::Cat(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
}

impl Schema {
    pub fn new(names: Vec<String>, kinds: Vec<FeatureKind>) -> Result<Self> {
        if names.len() != kinds.len() {
            return Err(Error::Schema(format!(
                "{} feature names but {} kinds",
                names.len(),
                kinds.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        Ok(Schema { names, kinds })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    /// Checks that a feature vector has the declared length and kinds.
    pub fn check(&self, features: &[FeatureValue]) -> Result<()> {
        if features.len() != self.len() {
            return Err(Error::Schema(format!(
                "record has {} features, schema declares {}",
                features.len(),
                self.len()
            )));
        }
        for (j, (v, kind)) in features.iter().zip(&self.kinds).enumerate() {
            if v.kind() != *kind {
                return Err(Error::Schema(format!(
                    "feature `{}` expected {:?}, got {:?}",
                    self.names[j],
                    kind,
                    v.kind()
                )));
            }
            if let FeatureValue::Num(x) = v {
                if !x.is_finite() {
                    return Err(Error::Schema(format!("feature `{}` is not finite", self.names[j])));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplicantRecord {
    pub id: usize,
    pub features: Vec<FeatureValue>,
    outcome: Option<u8>,
    pub decision: u8,
}

impl ApplicantRecord {
    pub fn new(id: usize, features: Vec<FeatureValue>, outcome: Option<u8>, decision: u8) -> Self {
        ApplicantRecord {
            id,
            features,
            outcome,
            decision,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.decision == 1
    }

    /// Whether an outcome is stored, masked or not. Does not read it.
    pub fn has_stored_outcome(&self) -> bool {
        self.outcome.is_some()
    }
}

/// Counters for label access. Shared by concurrent readers.
#[derive(Debug, Default)]
pub struct LabelAudit {
    illegal_reads: AtomicU64,
    unmask_events: AtomicU64,
    oracle_reads: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuditSnapshot {
    /// Failed attempts to read a masked outcome.
    pub illegal_reads: u64,
    /// Reject outcomes revealed through a control group.
    pub unmask_events: u64,
    /// Ground-truth reads made for evaluation in oracle mode.
    pub oracle_reads: u64,
}

impl LabelAudit {
    pub fn snapshot(&self) -> AuditSnapshot {
        AuditSnapshot {
            illegal_reads: self.illegal_reads.load(Ordering::SeqCst),
            unmask_events: self.unmask_events.load(Ordering::SeqCst),
            oracle_reads: self.oracle_reads.load(Ordering::SeqCst),
        }
    }
}

/// Outcomes of reject ids revealed by granting them credit.
#[derive(Debug, Clone, Default)]
pub struct Revealed {
    outcomes: BTreeMap<usize, u8>,
}

impl Revealed {
    pub fn get(&self, id: usize) -> Option<u8> {
        self.outcomes.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.outcomes.iter().map(|(&id, &y)| (id, y))
    }
}

/// Ground-truth generator of a synthetic population: logit = w·x + b with one
/// additive effect per level of the categorical feature.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    /// One entry per feature; `None` for the categorical feature.
    pub numeric_weights: Vec<Option<f64>>,
    /// Effects of levels A, B, C of the categorical feature, if any.
    pub level_effects: Vec<f64>,
    pub intercept: f64,
}

impl TrueModel {
    /// Weights published for a given feature count and seed. The intercept is
    /// left at zero; [`generate_synthetic`] calibrates it.
    pub fn for_seed(k: usize, seed: u64) -> Self {
        let mut rng = seeded(derive_seed(seed, "synthetic-truth"));
        let has_cat = k >= SYNTH_CATEGORICAL_MIN_K;
        let numeric = if has_cat { k - 1 } else { k };
        let scale = 2.0 / (numeric as f64).sqrt();
        let mut numeric_weights = Vec::with_capacity(k);
        for _ in 0..numeric {
            let z: f64 = StandardNormal.sample(&mut rng);
            numeric_weights.push(Some(scale * z));
        }
        let mut level_effects = Vec::new();
        if has_cat {
            numeric_weights.push(None);
            for _ in 0..SYNTH_LEVELS.len() {
                let z: f64 = StandardNormal.sample(&mut rng);
                level_effects.push(0.5 * z);
            }
        }
        TrueModel {
            numeric_weights,
            level_effects,
            intercept: 0.0,
        }
    }

    fn linear_part(&self, features: &[FeatureValue]) -> f64 {
        let mut s = 0.0;
        for (w, v) in self.numeric_weights.iter().zip(features) {
            match (w, v) {
                (Some(w), FeatureValue::Num(x)) => s += w * x,
                (None, FeatureValue::Cat(level)) => {
                    if let Some(i) = SYNTH_LEVELS.iter().position(|l| l == level) {
                        s += self.level_effects[i];
                    }
                }
                _ => {}
            }
        }
        s
    }

    pub fn logit(&self, features: &[FeatureValue]) -> f64 {
        self.intercept + self.linear_part(features)
    }

    /// True probability of no default.
    pub fn probability(&self, features: &[FeatureValue]) -> f64 {
        crate::scoring::sigmoid(self.logit(features))
    }
}

const SYNTH_CATEGORICAL_MIN_K: usize = 5;
const SYNTH_LEVELS: [&str; 3] = ["A", "B", "C"];

#[derive(Debug)]
pub struct Dataset {
    records: Vec<ApplicantRecord>,
    schema: Schema,
    weights: Vec<f64>,
    oracle_mode: bool,
    truth: Option<TrueModel>,
    audit: LabelAudit,
}

impl Dataset {
    /// Builds a dataset. Record ids must equal their positions.
    pub fn new(schema: Schema, records: Vec<ApplicantRecord>) -> Result<Self> {
        let weights = vec![1.0; records.len()];
        Self::with_weights(schema, records, weights)
    }

    pub fn with_weights(schema: Schema, records: Vec<ApplicantRecord>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != records.len() {
            return Err(Error::invalid("one weight per record required"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("weight {w} is not finite and positive")));
        }
        for (i, r) in records.iter().enumerate() {
            if r.id != i {
                return Err(Error::invalid(format!("record at position {i} has id {}", r.id)));
            }
            if r.decision > 1 || r.outcome.is_some_and(|y| y > 1) {
                return Err(Error::invalid(format!("record {i} has a non-binary field")));
            }
            if r.decision == 1 && r.outcome.is_none() {
                return Err(Error::invalid(format!("accepted record {i} has no outcome")));
            }
            schema.check(&r.features)?;
        }
        let oracle_mode = !records.is_empty() && records.iter().all(|r| r.outcome.is_some());
        Ok(Dataset {
            records,
            schema,
            weights,
            oracle_mode,
            truth: None,
            audit: LabelAudit::default(),
        })
    }

    /// Same population with new decisions and a fresh audit.
    fn with_decisions(&self, decisions: &[u8]) -> Self {
        let records = self
            .records
            .iter()
            .zip(decisions)
            .map(|(r, &d)| ApplicantRecord {
                decision: d,
                ..r.clone()
            })
            .collect();
        Dataset {
            records,
            schema: self.schema.clone(),
            weights: self.weights.clone(),
            oracle_mode: self.oracle_mode,
            truth: self.truth.clone(),
            audit: LabelAudit::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn feature_count(&self) -> usize {
        self.schema.len()
    }

    pub fn record(&self, id: usize) -> &ApplicantRecord {
        &self.records[id]
    }

    pub fn records(&self) -> &[ApplicantRecord] {
        &self.records
    }

    pub fn ids(&self) -> Vec<usize> {
        (0..self.records.len()).collect()
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.weights[id]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn oracle_mode(&self) -> bool {
        self.oracle_mode
    }

    pub fn truth(&self) -> Option<&TrueModel> {
        self.truth.as_ref()
    }

    pub fn decision(&self, id: usize) -> u8 {
        self.records[id].decision
    }

    pub fn n_accepted(&self) -> usize {
        self.records.iter().filter(|r| r.is_accepted()).count()
    }

    pub fn n_rejected(&self) -> usize {
        self.len() - self.n_accepted()
    }

    pub fn accepted_ids(&self) -> Vec<usize> {
        self.records.iter().filter(|r| r.is_accepted()).map(|r| r.id).collect()
    }

    pub fn rejected_ids(&self) -> Vec<usize> {
        self.records.iter().filter(|r| !r.is_accepted()).map(|r| r.id).collect()
    }

    /// Outcome of an accepted record. Reading a rejected record's outcome
    /// fails and is counted as an illegal read.
    pub fn outcome(&self, id: usize) -> Result<u8> {
        let r = &self.records[id];
        if r.is_accepted() {
            r.outcome.ok_or(Error::OutcomeUnavailable { id })
        } else {
            self.audit.illegal_reads.fetch_add(1, Ordering::SeqCst);
            Err(Error::MaskedOutcome { id })
        }
    }

    /// Outcome if it is visible without any special access; never audited.
    pub fn visible_outcome(&self, id: usize) -> Option<u8> {
        let r = &self.records[id];
        if r.is_accepted() {
            r.outcome
        } else {
            None
        }
    }

    /// Grants credit to the given rejects and exposes their outcomes.
    /// Each newly revealed reject counts as one unmask event.
    pub fn reveal(&self, ids: &[usize]) -> Result<Revealed> {
        let mut outcomes = BTreeMap::new();
        for &id in ids {
            let r = self
                .records
                .get(id)
                .ok_or_else(|| Error::invalid(format!("unknown id {id}")))?;
            if r.is_accepted() {
                return Err(Error::invalid(format!("record {id} is not a reject")));
            }
            let y = r.outcome.ok_or(Error::OutcomeUnavailable { id })?;
            outcomes.insert(id, y);
        }
        self.audit
            .unmask_events
            .fetch_add(outcomes.len() as u64, Ordering::SeqCst);
        Ok(Revealed { outcomes })
    }

    /// Ground-truth outcome, available only in oracle mode.
    pub fn oracle_outcome(&self, id: usize) -> Result<u8> {
        if !self.oracle_mode {
            return Err(Error::invalid("ground truth requires an oracle-mode dataset"));
        }
        self.audit.oracle_reads.fetch_add(1, Ordering::SeqCst);
        self.records[id].outcome.ok_or(Error::OutcomeUnavailable { id })
    }

    pub fn audit(&self) -> AuditSnapshot {
        self.audit.snapshot()
    }

    /// Writes the dataset as CSV with features, then outcome and decision
    /// columns. Masked outcomes are written as empty cells unless
    /// `export_oracle` is set.
    pub fn write_csv(&self, path: &Path, roles: &CsvRoles, export_oracle: bool) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.schema.names.iter().map(String::as_str).collect();
        header.push(&roles.outcome);
        let decision_col = roles.decision.as_deref().unwrap_or("decision");
        header.push(decision_col);
        w.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
            let y = if r.is_accepted() || export_oracle {
                r.outcome
            } else {
                None
            };
            row.push(y.map(|y| y.to_string()).unwrap_or_default());
            row.push(r.decision.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Column roles of an input CSV. Every other column is a feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvRoles {
    pub outcome: String,
    /// Absent means every row is accepted.
    pub decision: Option<String>,
}

impl Default for CsvRoles {
    fn default() -> Self {
        CsvRoles {
            outcome: "outcome".into(),
            decision: None,
        }
    }
}

fn parse_binary(token: &str, row: usize, column: &str) -> Result<Option<u8>> {
    match token.trim() {
        "" => Ok(None),
        "0" => Ok(Some(0)),
        "1" => Ok(Some(1)),
        other => Err(Error::Parse {
            row,
            message: format!("column `{column}` has non-binary value `{other}`"),
        }),
    }
}

/// Loads applicants from a headered CSV file.
///
/// A feature column is numeric when every cell parses as a finite number,
/// categorical otherwise. Empty feature cells are rejected.
pub fn load_csv(path: &Path, roles: &CsvRoles) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Empty(format!("{} has no header row", path.display())));
    }
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let outcome_col =
        col(&roles.outcome).ok_or_else(|| Error::Schema(format!("missing outcome column `{}`", roles.outcome)))?;
    let decision_col = match &roles.decision {
        Some(name) => Some(col(name).ok_or_else(|| Error::Schema(format!("missing decision column `{name}`")))?),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != outcome_col && Some(c) != decision_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut raw: Vec<Vec<String>> = Vec::new();
    let mut outcomes = Vec::new();
    let mut decisions = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let y = parse_binary(rec.get(outcome_col).unwrap_or(""), row, &roles.outcome)?;
        let d = match decision_col {
            Some(c) => {
                let name = roles.decision.as_deref().unwrap_or_default();
                parse_binary(rec.get(c).unwrap_or(""), row, name)?.ok_or_else(|| Error::Parse {
                    row,
                    message: format!("decision column `{name}` is empty"),
                })?
            }
            None => 1,
        };
        if d == 1 && y.is_none() {
            return Err(Error::Parse {
                row,
                message: "accepted row has an empty outcome".into(),
            });
        }
        let mut cells = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = rec.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(Error::Parse {
                    row,
                    message: format!("missing value in feature `{}`", &headers[c]),
                });
            }
            cells.push(cell.to_string());
        }
        raw.push(cells);
        outcomes.push(y);
        decisions.push(d);
    }
    if raw.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }

    let kinds: Vec<FeatureKind> = (0..feature_cols.len())
        .map(|j| {
            let numeric = raw.iter().all(|r| r[j].parse::<f64>().is_ok_and(|v| v.is_finite()));
            if numeric {
                FeatureKind::Numeric
            } else {
                FeatureKind::Categorical
            }
        })
        .collect();
    let names = feature_cols.iter().map(|&c| headers[c].trim().to_string()).collect();
    let schema = Schema::new(names, kinds.clone())?;
    let records = raw
        .into_iter()
        .zip(outcomes.into_iter().zip(decisions))
        .enumerate()
        .map(|(id, (cells, (y, d)))| {
            let features = cells
                .into_iter()
                .zip(&kinds)
                .map(|(cell, kind)| match kind {
                    FeatureKind::Numeric => FeatureValue::Num(cell.parse().unwrap_or(f64::NAN)),
                    FeatureKind::Categorical => FeatureValue::Cat(cell),
                })
                .collect();
            ApplicantRecord::new(id, features, y, d)
        })
        .collect();
    Dataset::new(schema, records)
}

/// Generates a synthetic population with known ground truth.
///
/// Features are independent standard normals; when `k >= 5` the last feature
/// is instead a categorical with levels A, B, C drawn uniformly. The true
/// no-default logit is `w·x + b` with `w` from [`TrueModel::for_seed`]; `b`
/// is found by bisection so that the mean true probability over the sample
/// equals `target_good_rate`. Outcomes are Bernoulli draws, every applicant
/// starts accepted.
pub fn generate_synthetic(n: usize, k: usize, target_good_rate: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::invalid(format!("n = {n} is below the minimum of 10")));
    }
    if k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(target_good_rate > 0.0 && target_good_rate < 1.0) {
        return Err(Error::invalid(format!(
            "target good rate {target_good_rate} is outside (0, 1)"
        )));
    }
    let mut truth = TrueModel::for_seed(k, seed);
    let has_cat = k >= SYNTH_CATEGORICAL_MIN_K;

    let mut frng = seeded(derive_seed(seed, "synthetic-features"));
    let features: Vec<Vec<FeatureValue>> = (0..n)
        .map(|_| {
            (0..k)
                .map(|j| {
                    if has_cat && j == k - 1 {
                        let level = SYNTH_LEVELS[frng.random_range(0..SYNTH_LEVELS.len())];
                        FeatureValue::Cat(level.to_string())
                    } else {
                        FeatureValue::Num(StandardNormal.sample(&mut frng))
                    }
                })
                .collect()
        })
        .collect();

    let linear: Vec<f64> = features.iter().map(|f| truth.linear_part(f)).collect();
    let mean_prob = |b: f64| linear.iter().map(|l| crate::scoring::sigmoid(l + b)).sum::<f64>() / n as f64;
    let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_prob(mid) < target_good_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    truth.intercept = 0.5 * (lo + hi);

    let mut orng = seeded(derive_seed(seed, "synthetic-outcomes"));
    let records = features
        .into_iter()
        .zip(&linear)
        .enumerate()
        .map(|(id, (f, l))| {
            let p = crate::scoring::sigmoid(l + truth.intercept);
            let u: f64 = orng.random();
            let y = u8::from(u < p);
            ApplicantRecord::new(id, f, Some(y), 1)
        })
        .collect();

    let mut names = Vec::with_capacity(k);
    let mut kinds = Vec::with_capacity(k);
    for j in 0..k {
        if has_cat && j == k - 1 {
            names.push(format!("c{}", j + 1));
            kinds.push(FeatureKind::Categorical);
        } else {
            names.push(format!("x{}", j + 1));
            kinds.push(FeatureKind::Numeric);
        }
    }
    let mut ds = Dataset::new(Schema::new(names, kinds)?, records)?;
    ds.truth = Some(truth);
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionConfig {
    /// Final fraction of rejected applicants, in (0, 0.5).
    pub rate: f64,
    /// Size of the random extra draw, as a fraction of the worst segment.
    pub extra_fraction: f64,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        RejectionConfig {
            rate: 0.05,
            extra_fraction: 0.10,
        }
    }
}

#[derive(Debug)]
pub struct SimulatedRejection {
    pub dataset: Dataset,
    /// Features crossed to form the coarse segmentation.
    pub segment_features: Vec<usize>,
    /// Ids of the highest-default segment, before resizing.
    pub worst_segment: Vec<usize>,
    pub segment_default_rate: f64,
    pub population_default_rate: f64,
}

/// Bins of a feature for coarse segmentation: three equal-frequency bins
/// ordered by (value, id) for numeric features, the levels themselves for a
/// categorical with at most three levels. `None` if the feature is unusable.
fn coarse_bins(ds: &Dataset, j: usize) -> Option<Vec<usize>> {
    let n = ds.len();
    match ds.schema.kinds[j] {
        FeatureKind::Numeric => {
            let value = |id: usize| match ds.records[id].features[j] {
                FeatureValue::Num(v) => v,
                FeatureValue::Cat(_) => f64::NAN,
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let mut bins = vec![0; n];
            let mut pos = 0;
            for (b, size) in band_sizes(n, 3.min(n)).into_iter().enumerate() {
                for &id in &order[pos..pos + size] {
                    bins[id] = b;
                }
                pos += size;
            }
            Some(bins)
        }
        FeatureKind::Categorical => {
            let mut levels: Vec<&str> = Vec::new();
            let mut bins = Vec::with_capacity(n);
            for r in &ds.records {
                let FeatureValue::Cat(level) = &r.features[j] else {
                    return None;
                };
                let idx = match levels.iter().position(|l| l == level) {
                    Some(i) => i,
                    None => {
                        levels.push(level);
                        levels.len() - 1
                    }
                };
                bins.push(idx);
            }
            (levels.len() <= 3).then_some(bins)
        }
    }
}

fn default_rates(bins: &[usize], outcomes: &[u8], count: usize) -> Vec<Option<f64>> {
    let mut tot = vec![0usize; count];
    let mut bad = vec![0usize; count];
    for (&b, &y) in bins.iter().zip(outcomes) {
        tot[b] += 1;
        if y == 0 {
            bad[b] += 1;
        }
    }
    tot.iter()
        .zip(&bad)
        .map(|(&t, &d)| (t > 0).then(|| d as f64 / t as f64))
        .collect()
}

/// Simulates a historical acceptance policy on a fully labelled population.
pub fn simulate_rejection(ds: &Dataset, target_reject_rate: f64, seed: u64) -> Result<Dataset> {
    let cfg = RejectionConfig {
        rate: target_reject_rate,
        ..RejectionConfig::default()
    };
    simulate_rejection_with(ds, &cfg, seed).map(|s| s.dataset)
}

/// Marks the highest-default cell of a coarse segmentation as rejected, adds
/// a random draw from outside it, then resizes the rejected set at random to
/// exactly `round(rate × n)`.
///
/// The segmentation crosses the two features whose coarse bins differ most
/// in default rate (association = max minus min bin default rate).
pub fn simulate_rejection_with(ds: &Dataset, cfg: &RejectionConfig, seed: u64) -> Result<SimulatedRejection> {
    if !ds.oracle_mode {
        return Err(Error::invalid("rejection simulation needs outcomes for every record"));
    }
    if !(cfg.rate > 0.0 && cfg.rate < 0.5) {
        return Err(Error::invalid(format!("reject rate {} is outside (0, 0.5)", cfg.rate)));
    }
    if !(cfg.extra_fraction >= 0.0 && cfg.extra_fraction.is_finite()) {
        return Err(Error::invalid("extra fraction must be finite and non-negative"));
    }
    let n = ds.len();
    let target = (cfg.rate * n as f64).round() as usize;
    if target == 0 {
        return Err(Error::invalid(format!(
            "reject rate {} on {n} records rounds to zero rejects",
            cfg.rate
        )));
    }
    let outcomes: Vec<u8> = (0..n).map(|id| ds.oracle_outcome(id)).collect::<Result<_>>()?;
    let n_bad = outcomes.iter().filter(|&&y| y == 0).count();
    if n_bad == 0 {
        return Err(Error::invalid("degenerate segmentation: population has no defaults"));
    }
    let population_default_rate = n_bad as f64 / n as f64;

    let mut scored: Vec<(usize, f64, Vec<usize>)> = Vec::new();
    for j in 0..ds.feature_count() {
        let Some(bins) = coarse_bins(ds, j) else {
            continue;
        };
        let count = bins.iter().max().map_or(0, |m| m + 1);
        let rates: Vec<f64> = default_rates(&bins, &outcomes, count).into_iter().flatten().collect();
        let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        scored.push((j, hi - lo, bins));
    }
    if scored.is_empty() {
        return Err(Error::invalid("degenerate segmentation: no usable feature"));
    }
    // Stable sort keeps feature order among equal associations.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(2);
    let segment_features: Vec<usize> = scored.iter().map(|s| s.0).collect();
    let segment: Vec<usize> = (0..n)
        .map(|id| scored.iter().fold(0, |acc, s| acc * 3 + s.2[id]))
        .collect();
    let seg_count = 3usize.pow(scored.len() as u32);
    let rates = default_rates(&segment, &outcomes, seg_count);
    let (worst, worst_rate) = rates.iter().enumerate().filter_map(|(s, r)| r.map(|r| (s, r))).fold(
        (usize::MAX, f64::NEG_INFINITY),
        |best, (s, r)| {
            if r > best.1 {
                (s, r)
            } else {
                best
            }
        },
    );
    let worst_segment: Vec<usize> = (0..n).filter(|&id| segment[id] == worst).collect();

    let mut rng = seeded(seed);
    let mut outside: Vec<usize> = (0..n).filter(|&id| segment[id] != worst).collect();
    outside.shuffle(&mut rng);
    let extra = ((cfg.extra_fraction * worst_segment.len() as f64).round() as usize).min(outside.len());
    let mut rejected: Vec<usize> = worst_segment.clone();
    rejected.extend_from_slice(&outside[..extra]);
    let pool = &outside[extra..];

    if rejected.len() > target {
        rejected.shuffle(&mut rng);
        rejected.truncate(target);
    } else if rejected.len() < target {
        let need = target - rejected.len();
        if need > pool.len() {
            return Err(Error::invalid("reject target exceeds the population"));
        }
        rejected.extend_from_slice(&pool[..need]);
    }

    let mut decisions = vec![1u8; n];
    for id in rejected {
        decisions[id] = 0;
    }
    Ok(SimulatedRejection {
        dataset: ds.with_decisions(&decisions),
        segment_features,
        worst_segment,
        segment_default_rate: worst_rate,
        population_default_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub name: String,
    /// Sorted ascending.
    pub member_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub splits: Vec<Split>,
    /// False when some stratum was too small and the split fell back to
    /// unstratified sampling.
    pub stratified: bool,
}

/// Largest-remainder apportionment of `total` proportionally to `shares`.
/// Ties in remainders go to the earlier entry.
pub fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if shares.is_empty() || sum <= 0.0 {
        return vec![0; shares.len()];
    }
    let quotas: Vec<f64> = shares.iter().map(|s| total as f64 * s / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Splits `ids` into disjoint parts with sizes given by largest-remainder
/// apportionment of the fractions.
///
/// Records are stratified by (decision, visible outcome): ids are shuffled
/// within each stratum, strata are concatenated, and positions are dealt out
/// sequentially to the part furthest behind its quota. This keeps every
/// stratum's share within rounding of proportional in every part.
pub fn split(ds: &Dataset, ids: &[usize], fractions: &[f64], names: &[&str], seed: u64) -> Result<SplitResult> {
    split_with(ds, ids, fractions, names, seed, true)
}

pub fn split_with(
    ds: &Dataset,
    ids: &[usize],
    fractions: &[f64],
    names: &[&str],
    seed: u64,
    stratify: bool,
) -> Result<SplitResult> {
    if fractions.is_empty() || fractions.len() != names.len() {
        return Err(Error::invalid("one name per split fraction required"));
    }
    if fractions.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Error::invalid("split fractions must be positive"));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions sum to {sum}, not 1")));
    }
    let mut sorted_ids = ids.to_vec();
    sorted_ids.sort_unstable();
    sorted_ids.dedup();
    let n = sorted_ids.len();
    let sizes = largest_remainder(n, fractions);

    let mut strata: BTreeMap<(u8, Option<u8>), Vec<usize>> = BTreeMap::new();
    for &id in &sorted_ids {
        let key = (ds.decision(id), ds.visible_outcome(id));
        strata.entry(key).or_default().push(id);
    }
    let stratified = stratify && strata.values().all(|s| s.len() >= fractions.len());
    let mut rng = seeded(seed);
    let sequence: Vec<usize> = if stratified {
        strata
            .into_values()
            .flat_map(|mut s| {
                s.shuffle(&mut rng);
                s
            })
            .collect()
    } else {
        let mut s = sorted_ids.clone();
        s.shuffle(&mut rng);
        s
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for (i, &id) in sequence.iter().enumerate() {
        let progress = (i + 1) as f64 / n as f64;
        let part = (0..sizes.len())
            .filter(|&j| members[j].len() < sizes[j])
            .max_by(|&a, &b| {
                let da = sizes[a] as f64 * progress - members[a].len() as f64;
                let db = sizes[b] as f64 * progress - members[b].len() as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("sizes sum to n");
        members[part].push(id);
    }
    let splits = members
        .into_iter()
        .zip(names)
        .map(|(mut m, name)| {
            m.sort_unstable();
            Split {
                name: name.to_string(),
                member_ids: m,
            }
        })
        .collect();
    Ok(SplitResult { splits, stratified })
}
