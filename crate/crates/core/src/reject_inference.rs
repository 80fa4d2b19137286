//! The five reject-inference techniques and the control-group sampling
//! strategies.
//!
//! Every technique takes the dataset and the ids it may train on, and returns
//! a default scorecard. Only the control-group technique ever sees reject
//! outcomes, and only through [`Dataset::reveal`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};

use crate::dataset::{largest_remainder, Dataset};
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};
use crate::scoring::{
    decide, fit_scorecard, make_bands, BandDirection, BandTable, DecisionRule, ScoreModel, SolverOptions, TrainingSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlStrategy {
    /// Simple random sample of the rejects.
    Gc1,
    /// Band n (1 = best scores) sampled proportionally to 1/n.
    Gc2,
    /// As GC2 with bands numbered from the worst scores.
    Gc3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    Extrapolation,
    Reclassification,
    Augmentation,
    Parcelling,
    ControlGroup(ControlStrategy),
}

impl Technique {
    pub const ALL: [Technique; 7] = [
        Technique::Extrapolation,
        Technique::Reclassification,
        Technique::Augmentation,
        Technique::Parcelling,
        Technique::ControlGroup(ControlStrategy::Gc1),
        Technique::ControlGroup(ControlStrategy::Gc2),
        Technique::ControlGroup(ControlStrategy::Gc3),
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Technique::Extrapolation => "extrapolation",
            Technique::Reclassification => "reclassification",
            Technique::Augmentation => "augmentation",
            Technique::Parcelling => "parcelling",
            Technique::ControlGroup(ControlStrategy::Gc1) => "gc1",
            Technique::ControlGroup(ControlStrategy::Gc2) => "gc2",
            Technique::ControlGroup(ControlStrategy::Gc3) => "gc3",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Technique::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .or_else(|| (s == "control_group").then_some(Technique::ControlGroup(ControlStrategy::Gc1)))
            .ok_or_else(|| Error::invalid(format!("unknown technique `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReclassCutoff {
    /// Rejects scoring at or above the cutoff are labelled good.
    Fixed(f64),
    /// Label the lowest-scored rejects as defaults so that the rejects'
    /// predicted default rate equals the accepted observed default rate.
    PriorMatched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueConfig {
    pub technique: Technique,
    pub bands: usize,
    pub reclass_cutoff: ReclassCutoff,
    /// Reject default rate hypothesized as `kappa` times the accepted rate.
    pub kappa: f64,
    pub control_fraction: f64,
    pub lambda: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl TechniqueConfig {
    pub fn new(technique: Technique) -> Self {
        TechniqueConfig {
            technique,
            bands: 20,
            reclass_cutoff: ReclassCutoff::Fixed(0.5),
            kappa: 2.0,
            control_fraction: 0.30,
            lambda: 1.0,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 {
            return Err(Error::invalid("band count must be positive"));
        }
        if let ReclassCutoff::Fixed(c) = self.reclass_cutoff {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::invalid(format!("reclassification cutoff {c} is outside (0, 1)")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa {} must be positive", self.kappa)));
        }
        if !(self.control_fraction > 0.0 && self.control_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "control fraction {} is outside (0, 1]",
                self.control_fraction
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }

    fn control_strategy(&self) -> ControlStrategy {
        match self.technique {
            Technique::ControlGroup(s) => s,
            _ => ControlStrategy::Gc1,
        }
    }
}

/// What a technique did besides fitting: training-set size, control sample
/// and any warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub training_size: usize,
    pub control_sample: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueFit {
    pub technique: Technique,
    pub model: ScoreModel,
    pub provenance: Provenance,
    /// Ids of the training set actually used.
    pub training_ids: Vec<usize>,
}

impl TechniqueFit {
    /// Model document followed by a provenance block.
    pub fn to_text(&self, cfg: &TechniqueConfig) -> String {
        let mut s = self.model.to_text();
        s.push_str("provenance\n");
        s.push_str(&format!("technique {}\n", self.technique));
        s.push_str(&format!("bands {}\n", cfg.bands));
        match cfg.reclass_cutoff {
            ReclassCutoff::Fixed(c) => s.push_str(&format!("reclass_cutoff {c:.16e}\n")),
            ReclassCutoff::PriorMatched => s.push_str("reclass_cutoff prior-matched\n"),
        }
        s.push_str(&format!("kappa {:.16e}\n", cfg.kappa));
        s.push_str(&format!("control_fraction {:.16e}\n", cfg.control_fraction));
        s.push_str(&format!("seed {}\n", cfg.seed));
        s.push_str(&format!("training_size {}\n", self.provenance.training_size));
        let ids: Vec<String> = self.provenance.control_sample.iter().map(usize::to_string).collect();
        s.push_str(&format!("control_sample {}\n", ids.join(" ")));
        for w in &self.provenance.warnings {
            s.push_str(&format!("warning {w}\n"));
        }
        s
    }
}

fn partition(ds: &Dataset, ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.into_iter().partition(|&id| ds.decision(id) == 1)
}

fn accepted_rows(ds: &Dataset, accepted: &[usize]) -> Result<Vec<(usize, u8, f64)>> {
    accepted
        .iter()
        .map(|&id| ds.outcome(id).map(|y| (id, y, 1.0)))
        .collect()
}

fn fit_rows(ds: &Dataset, rows: Vec<(usize, u8, f64)>, cfg: &TechniqueConfig) -> Result<(ScoreModel, Vec<usize>)> {
    let train = TrainingSet::new(rows)?;
    let model = fit_scorecard(ds, &train, cfg.lambda, &cfg.solver)?;
    Ok((model, train.ids().to_vec()))
}

fn base_model(ds: &Dataset, accepted: &[usize], cfg: &TechniqueConfig) -> Result<(ScoreModel, Vec<usize>)> {
    fit_rows(ds, accepted_rows(ds, accepted)?, cfg)
}

fn scored(model: &ScoreModel, ds: &Dataset, ids: &[usize]) -> Result<Vec<(usize, f64)>> {
    ids.iter()
        .map(|&id| model.score_features(&ds.record(id).features).map(|s| (id, s)))
        .collect()
}

/// Default scorecard fitted on the accepted applicants only.
pub fn fit_extrapolation(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<ScoreModel> {
    extrapolation(ds, ids, cfg).map(|f| f.model)
}

fn extrapolation(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<TechniqueFit> {
    let (accepted, _) = partition(ds, ids);
    let (model, training_ids) = base_model(ds, &accepted, cfg)?;
    Ok(TechniqueFit {
        technique: cfg.technique,
        model,
        provenance: Provenance {
            training_size: training_ids.len(),
            ..Provenance::default()
        },
        training_ids,
    })
}

pub fn pseudo_label(score: f64, cutoff: f64) -> u8 {
    decide(score, &DecisionRule { threshold: cutoff })
}

/// Labels for rejects under a reclassification cutoff rule.
pub fn reclassification_labels(
    reject_scores: &[(usize, f64)],
    cutoff: ReclassCutoff,
    accepted_default_rate: f64,
) -> BTreeMap<usize, u8> {
    match cutoff {
        ReclassCutoff::Fixed(c) => reject_scores.iter().map(|&(id, s)| (id, pseudo_label(s, c))).collect(),
        ReclassCutoff::PriorMatched => {
            let mut order = reject_scores.to_vec();
            order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let bad = (accepted_default_rate * order.len() as f64).round() as usize;
            order
                .iter()
                .enumerate()
                .map(|(i, &(id, _))| (id, u8::from(i >= bad)))
                .collect()
        }
    }
}

/// Labels rejects with the accepted-only model and refits on the augmented
/// set of N + M applicants.
pub fn fit_reclassification(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<ScoreModel> {
    reclassification(ds, ids, cfg).map(|f| f.model)
}

fn reclassification(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<TechniqueFit> {
    let (accepted, rejected) = partition(ds, ids);
    if rejected.is_empty() {
        return extrapolation(ds, ids, cfg);
    }
    let rows = accepted_rows(ds, &accepted)?;
    let accepted_bad = rows.iter().filter(|r| r.1 == 0).count() as f64 / rows.len().max(1) as f64;
    let (base, _) = fit_rows(ds, rows.clone(), cfg)?;
    let labels = reclassification_labels(&scored(&base, ds, &rejected)?, cfg.reclass_cutoff, accepted_bad);
    let mut warnings = Vec::new();
    if labels
        .values()
        .all(|&y| y == labels.values().next().copied().unwrap_or(1))
    {
        warnings.push("all rejects received the same label".to_string());
    }
    let all_rows = rows
        .into_iter()
        .chain(labels.into_iter().map(|(id, y)| (id, y, 1.0)))
        .collect();
    let (model, training_ids) = fit_rows(ds, all_rows, cfg)?;
    Ok(TechniqueFit {
        technique: cfg.technique,
        model,
        provenance: Provenance {
            training_size: training_ids.len(),
            control_sample: Vec::new(),
            warnings,
        },
        training_ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandWeight {
    pub band: usize,
    pub total: usize,
    pub accepted: usize,
    /// total / accepted; `None` for a band without accepted applicants.
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationWeights {
    pub bands: Vec<BandWeight>,
    /// Weight of every accepted applicant in a non-excluded band.
    pub weights: BTreeMap<usize, f64>,
    /// Bands without accepted applicants.
    pub excluded: Vec<usize>,
}

/// Inverse acceptance-frequency weights per band: every accepted applicant
/// of band b gets n_b / n_b,accepted.
pub fn augmentation_weights(ds: &Dataset, bands: &BandTable) -> AugmentationWeights {
    let mut out = AugmentationWeights {
        bands: Vec::with_capacity(bands.band_count),
        weights: BTreeMap::new(),
        excluded: Vec::new(),
    };
    for b in 1..=bands.band_count {
        let members = bands.members(b);
        let accepted: Vec<usize> = members.iter().copied().filter(|&id| ds.decision(id) == 1).collect();
        let weight = (!accepted.is_empty()).then(|| members.len() as f64 / accepted.len() as f64);
        match weight {
            Some(w) => out.weights.extend(accepted.iter().map(|&id| (id, w))),
            None => out.excluded.push(b),
        }
        out.bands.push(BandWeight {
            band: b,
            total: members.len(),
            accepted: accepted.len(),
            weight,
        });
    }
    out
}

/// Re-weights accepted applicants by the inverse acceptance frequency of
/// their acceptance-score band, then fits the weighted default model.
pub fn fit_augmentation(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<ScoreModel> {
    augmentation(ds, ids, cfg).map(|f| f.model)
}

fn augmentation(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<TechniqueFit> {
    let (accepted, rejected) = partition(ds, ids);
    if rejected.is_empty() {
        return extrapolation(ds, ids, cfg);
    }
    let all: Vec<usize> = {
        let mut v = accepted.clone();
        v.extend_from_slice(&rejected);
        v.sort_unstable();
        v
    };
    let decision_rows = all.iter().map(|&id| (id, ds.decision(id), 1.0));
    let acceptance = fit_scorecard(ds, &TrainingSet::new(decision_rows)?, cfg.lambda, &cfg.solver)?;
    let table = make_bands(
        &scored(&acceptance, ds, &all)?,
        cfg.bands.min(all.len()),
        BandDirection::HighFirst,
    )?;
    let aw = augmentation_weights(ds, &table);
    let mut warnings = Vec::new();
    if !aw.excluded.is_empty() {
        warnings.push(format!("bands without accepted applicants excluded: {:?}", aw.excluded));
    }
    let rows = accepted
        .iter()
        .map(|&id| ds.outcome(id).map(|y| (id, y, aw.weights[&id])))
        .collect::<Result<Vec<_>>>()?;
    let (model, training_ids) = fit_rows(ds, rows, cfg)?;
    Ok(TechniqueFit {
        technique: cfg.technique,
        model,
        provenance: Provenance {
            training_size: training_ids.len(),
            control_sample: Vec::new(),
            warnings,
        },
        training_ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParcelBand {
    pub band: usize,
    pub accepted: usize,
    pub accepted_defaults: usize,
    /// Accepted default rate, possibly inherited from a neighbouring band.
    pub accepted_rate: f64,
    pub inherited_from: Option<usize>,
    /// Hypothesized reject default rate, min(1, κ·p).
    pub reject_rate: f64,
    pub rejects: Vec<usize>,
    /// round(reject_rate × rejects)
    pub reject_defaults: usize,
}

/// Per-band parcelling arithmetic on a high-first band table. A band with no
/// accepted applicants inherits the rate of the nearest band toward the
/// risky (low-score) end, or toward the safe end if there is none.
pub fn parcel_plan(ds: &Dataset, bands: &BandTable, kappa: f64) -> Result<Vec<ParcelBand>> {
    let count = bands.band_count;
    let mut raw: Vec<(usize, usize, Vec<usize>)> = Vec::with_capacity(count);
    for b in 1..=count {
        let (mut acc, mut bad, mut rejects) = (0, 0, Vec::new());
        for &id in bands.members(b) {
            if ds.decision(id) == 1 {
                acc += 1;
                if ds.outcome(id)? == 0 {
                    bad += 1;
                }
            } else {
                rejects.push(id);
            }
        }
        rejects.sort_unstable();
        raw.push((acc, bad, rejects));
    }
    let own_rate = |i: usize| (raw[i].0 > 0).then(|| raw[i].1 as f64 / raw[i].0 as f64);
    // High-first numbering: higher band index is riskier.
    let risky_end = match bands.direction {
        BandDirection::HighFirst => 1isize,
        BandDirection::LowFirst => -1isize,
    };
    let mut plan = Vec::with_capacity(count);
    for (i, (acc, bad, rejects)) in raw.iter().enumerate() {
        let (rate, inherited_from) = match own_rate(i) {
            Some(r) => (r, None),
            None => {
                let step = |dir: isize| {
                    let mut j = i as isize + dir;
                    while j >= 0 && (j as usize) < count {
                        if let Some(r) = own_rate(j as usize) {
                            return Some((r, j as usize + 1));
                        }
                        j += dir;
                    }
                    None
                };
                let (r, from) = step(risky_end)
                    .or_else(|| step(-risky_end))
                    .ok_or_else(|| Error::invalid("no band contains accepted applicants"))?;
                (r, Some(from))
            }
        };
        let reject_rate = (kappa * rate).min(1.0);
        plan.push(ParcelBand {
            band: i + 1,
            accepted: *acc,
            accepted_defaults: *bad,
            accepted_rate: rate,
            inherited_from,
            reject_rate,
            reject_defaults: (reject_rate * rejects.len() as f64).round() as usize,
            rejects: rejects.clone(),
        });
    }
    Ok(plan)
}

/// Random labelling of rejects following a parcel plan: in each band,
/// exactly `reject_defaults` rejects drawn without replacement are labelled
/// default, the rest good.
pub fn parcel_labels(plan: &[ParcelBand], seed: u64) -> BTreeMap<usize, u8> {
    let mut rng = seeded(seed);
    let mut labels = BTreeMap::new();
    for band in plan {
        let mut ids = band.rejects.clone();
        ids.shuffle(&mut rng);
        for (i, id) in ids.into_iter().enumerate() {
            labels.insert(id, u8::from(i >= band.reject_defaults));
        }
    }
    labels
}

/// Labels rejects band by band at a hypothesized default rate and refits on
/// accepted plus labelled rejects.
pub fn fit_parcelling(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<ScoreModel> {
    parcelling(ds, ids, cfg).map(|f| f.model)
}

fn parcelling(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<TechniqueFit> {
    let (accepted, rejected) = partition(ds, ids);
    if rejected.is_empty() {
        return extrapolation(ds, ids, cfg);
    }
    let (base, _) = base_model(ds, &accepted, cfg)?;
    let mut all = accepted.clone();
    all.extend_from_slice(&rejected);
    all.sort_unstable();
    let table = make_bands(
        &scored(&base, ds, &all)?,
        cfg.bands.min(all.len()),
        BandDirection::HighFirst,
    )?;
    let plan = parcel_plan(ds, &table, cfg.kappa)?;
    let warnings = plan
        .iter()
        .filter_map(|b| {
            b.inherited_from
                .map(|f| format!("band {} inherited the default rate of band {f}", b.band))
        })
        .collect();
    let labels = parcel_labels(&plan, cfg.seed);
    let rows = accepted_rows(ds, &accepted)?
        .into_iter()
        .chain(labels.into_iter().map(|(id, y)| (id, y, 1.0)))
        .collect();
    let (model, training_ids) = fit_rows(ds, rows, cfg)?;
    Ok(TechniqueFit {
        technique: cfg.technique,
        model,
        provenance: Provenance {
            training_size: training_ids.len(),
            control_sample: Vec::new(),
            warnings,
        },
        training_ids,
    })
}

/// Band structure and integer targets of a control-group draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPlan {
    pub strategy: ControlStrategy,
    pub size: usize,
    /// Band members in numbering order (a single band for GC1).
    pub bands: Vec<Vec<usize>>,
    /// Unclipped real-valued expected counts.
    pub expected: Vec<f64>,
    /// Integer per-band counts; sum to `size`.
    pub targets: Vec<usize>,
}

/// Apportions `m` over bands proportionally to `shares`, clipping at band
/// populations and redistributing overflow over the unclipped bands.
pub fn clipped_apportionment(m: usize, shares: &[f64], populations: &[usize]) -> Result<Vec<usize>> {
    let total: usize = populations.iter().sum();
    if m > total {
        return Err(Error::invalid(format!("cannot draw {m} from {total}")));
    }
    let mut clipped = vec![false; shares.len()];
    loop {
        let free: Vec<usize> = (0..shares.len()).filter(|&i| !clipped[i]).collect();
        let fixed: usize = (0..shares.len()).filter(|&i| clipped[i]).map(|i| populations[i]).sum();
        let free_shares: Vec<f64> = free.iter().map(|&i| shares[i]).collect();
        let alloc = largest_remainder(m - fixed, &free_shares);
        let mut overflow = false;
        for (k, &i) in free.iter().enumerate() {
            if alloc[k] > populations[i] {
                clipped[i] = true;
                overflow = true;
            }
        }
        if !overflow {
            let mut targets: Vec<usize> = populations.to_vec();
            for (k, &i) in free.iter().enumerate() {
                targets[i] = alloc[k];
            }
            return Ok(targets);
        }
    }
}

/// Builds the sampling plan for a control group of `round(fraction × M)`
/// rejects. GC2/GC3 band the rejects into `bands` equal-frequency bands
/// (fewer if there are fewer rejects) and give band n a share ∝ 1/n.
pub fn control_plan(
    reject_scores: &[(usize, f64)],
    strategy: ControlStrategy,
    fraction: f64,
    bands: usize,
) -> Result<ControlPlan> {
    if reject_scores.is_empty() {
        return Err(Error::Empty("reject ids".into()));
    }
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(Error::invalid(format!("control fraction {fraction} must be positive")));
    }
    let total = reject_scores.len();
    let size = (fraction * total as f64).round() as usize;
    if size > total {
        return Err(Error::invalid(format!(
            "control sample of {size} exceeds {total} rejects"
        )));
    }
    let direction = match strategy {
        ControlStrategy::Gc1 => {
            let mut ids: Vec<usize> = reject_scores.iter().map(|s| s.0).collect();
            ids.sort_unstable();
            return Ok(ControlPlan {
                strategy,
                size,
                bands: vec![ids],
                expected: vec![size as f64],
                targets: vec![size],
            });
        }
        ControlStrategy::Gc2 => BandDirection::HighFirst,
        ControlStrategy::Gc3 => BandDirection::LowFirst,
    };
    let table = make_bands(reject_scores, bands.min(total), direction)?;
    let members: Vec<Vec<usize>> = (1..=table.band_count).map(|b| table.members(b).to_vec()).collect();
    let shares: Vec<f64> = (1..=table.band_count).map(|n| 1.0 / n as f64).collect();
    let harmonic: f64 = shares.iter().sum();
    let populations: Vec<usize> = members.iter().map(Vec::len).collect();
    let targets = clipped_apportionment(size, &shares, &populations)?;
    Ok(ControlPlan {
        strategy,
        size,
        expected: shares.iter().map(|s| size as f64 * s / harmonic).collect(),
        bands: members,
        targets,
    })
}

impl ControlPlan {
    /// Draws the sample: `targets[b]` ids uniformly without replacement from
    /// each band. Returned ids are sorted.
    pub fn draw(&self, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size);
        for (members, &t) in self.bands.iter().zip(&self.targets) {
            out.extend(index::sample(rng, members.len(), t).into_iter().map(|i| members[i]));
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSample {
    pub strategy: ControlStrategy,
    /// Sorted sampled reject ids.
    pub ids: Vec<usize>,
    pub expected: Vec<f64>,
    pub realized: Vec<usize>,
}

/// Picks which rejects are granted credit as a control group.
pub fn sample_control_group(
    ds: &Dataset,
    reject_ids: &[usize],
    base_scores: &BTreeMap<usize, f64>,
    cfg: &TechniqueConfig,
) -> Result<ControlSample> {
    let mut pairs = Vec::with_capacity(reject_ids.len());
    for &id in reject_ids {
        if ds.decision(id) != 0 {
            return Err(Error::invalid(format!("record {id} is not a reject")));
        }
        let s = base_scores
            .get(&id)
            .ok_or_else(|| Error::invalid(format!("no base score for reject {id}")))?;
        pairs.push((id, *s));
    }
    let plan = control_plan(&pairs, cfg.control_strategy(), cfg.control_fraction, cfg.bands)?;
    let ids = plan.draw(&mut seeded(cfg.seed));
    let realized = plan
        .bands
        .iter()
        .map(|members| members.iter().filter(|id| ids.binary_search(id).is_ok()).count())
        .collect();
    Ok(ControlSample {
        strategy: plan.strategy,
        ids,
        expected: plan.expected,
        realized,
    })
}

/// Fits on accepted applicants plus the control group with its revealed
/// outcomes.
pub fn fit_control_group(
    ds: &Dataset,
    ids: &[usize],
    sample: &ControlSample,
    cfg: &TechniqueConfig,
) -> Result<ScoreModel> {
    control_group_fit(ds, ids, sample, cfg).map(|f| f.model)
}

fn control_group_fit(
    ds: &Dataset,
    ids: &[usize],
    sample: &ControlSample,
    cfg: &TechniqueConfig,
) -> Result<TechniqueFit> {
    let (accepted, rejected) = partition(ds, ids);
    if let Some(id) = sample.ids.iter().find(|id| rejected.binary_search(id).is_err()) {
        return Err(Error::invalid(format!(
            "sampled id {id} is not a reject of the fit set"
        )));
    }
    let revealed = ds.reveal(&sample.ids)?;
    let rows = accepted_rows(ds, &accepted)?
        .into_iter()
        .chain(revealed.iter().map(|(id, y)| (id, y, 1.0)))
        .collect();
    let (model, training_ids) = fit_rows(ds, rows, cfg)?;
    Ok(TechniqueFit {
        technique: cfg.technique,
        model,
        provenance: Provenance {
            training_size: training_ids.len(),
            control_sample: sample.ids.clone(),
            warnings: Vec::new(),
        },
        training_ids,
    })
}

/// Runs one technique end to end on the ids it may train on.
pub fn fit_technique(ds: &Dataset, ids: &[usize], cfg: &TechniqueConfig) -> Result<TechniqueFit> {
    cfg.validate()?;
    match cfg.technique {
        Technique::Extrapolation => extrapolation(ds, ids, cfg),
        Technique::Reclassification => reclassification(ds, ids, cfg),
        Technique::Augmentation => augmentation(ds, ids, cfg),
        Technique::Parcelling => parcelling(ds, ids, cfg),
        Technique::ControlGroup(_) => {
            let (accepted, rejected) = partition(ds, ids);
            if rejected.is_empty() {
                return extrapolation(ds, ids, cfg);
            }
            let (base, _) = base_model(ds, &accepted, cfg)?;
            let scores: BTreeMap<usize, f64> = scored(&base, ds, &rejected)?.into_iter().collect();
            let sample = sample_control_group(ds, &rejected, &scores, cfg)?;
            control_group_fit(ds, ids, &sample, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, simulate_rejection};

    fn biased(n: usize, seed: u64) -> Dataset {
        simulate_rejection(&generate_synthetic(n, 6, 0.85, seed).unwrap(), 0.1, seed).unwrap()
    }

    #[test]
    fn technique_tags_round_trip() {
        for t in Technique::ALL {
            assert_eq!(t.tag().parse::<Technique>().unwrap(), t);
        }
        assert!("mixture".parse::<Technique>().is_err());
    }

    #[test]
    fn fixed_cutoff_labels() {
        assert_eq!(pseudo_label(0.7, 0.5), 1);
        assert_eq!(pseudo_label(0.5, 0.5), 1);
        assert_eq!(pseudo_label(0.3, 0.5), 0);
    }

    #[test]
    fn prior_matched_labels_lowest_scores() {
        let scores: Vec<(usize, f64)> = (0..10).map(|i| (i, i as f64 / 10.0)).collect();
        let labels = reclassification_labels(&scores, ReclassCutoff::PriorMatched, 0.3);
        let bad: Vec<usize> = labels.iter().filter(|(_, &y)| y == 0).map(|(&id, _)| id).collect();
        assert_eq!(bad, vec![0, 1, 2]);
    }

    #[test]
    fn reclassification_uses_augmented_set() {
        let ds = biased(800, 3);
        let cfg = TechniqueConfig::new(Technique::Reclassification);
        let fit = fit_technique(&ds, &ds.ids(), &cfg).unwrap();
        assert_eq!(fit.provenance.training_size, ds.len());
        assert_eq!(ds.audit().illegal_reads, 0);
    }

    #[test]
    fn clipped_apportionment_redistributes() {
        let t = clipped_apportionment(10, &[1.0, 0.5, 0.25], &[2, 10, 10]).unwrap();
        assert_eq!(t[0], 2);
        assert_eq!(t.iter().sum::<usize>(), 10);
        assert_eq!(t, vec![2, 5, 3]);
        assert!(clipped_apportionment(30, &[1.0], &[3]).is_err());
    }

    #[test]
    fn gc1_sample_size() {
        let scores: Vec<(usize, f64)> = (0..300).map(|i| (i, i as f64)).collect();
        let plan = control_plan(&scores, ControlStrategy::Gc1, 0.3, 20).unwrap();
        let draw = plan.draw(&mut seeded(1));
        assert_eq!(draw.len(), 90);
        let mut d = draw.clone();
        d.dedup();
        assert_eq!(d.len(), 90);
    }

    #[test]
    fn gc3_targets_mirror_gc2() {
        let scores: Vec<(usize, f64)> = (0..400).map(|i| (i, i as f64)).collect();
        let g2 = control_plan(&scores, ControlStrategy::Gc2, 0.3, 20).unwrap();
        let g3 = control_plan(&scores, ControlStrategy::Gc3, 0.3, 20).unwrap();
        assert_eq!(g2.targets, g3.targets);
        // Band 1 of GC2 holds the best scores, band 1 of GC3 the worst.
        assert!(g2.bands[0].contains(&399));
        assert!(g3.bands[0].contains(&0));
        assert_eq!(g2.targets.iter().sum::<usize>(), 120);
    }

    #[test]
    fn empty_control_sample_matches_extrapolation() {
        let ds = biased(600, 8);
        let cfg = TechniqueConfig::new(Technique::ControlGroup(ControlStrategy::Gc1));
        let empty = ControlSample {
            strategy: ControlStrategy::Gc1,
            ids: Vec::new(),
            expected: vec![0.0],
            realized: vec![0],
        };
        let a = fit_control_group(&ds, &ds.ids(), &empty, &cfg).unwrap();
        let b = fit_extrapolation(&ds, &ds.ids(), &cfg).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn parcelling_is_deterministic() {
        let ds = biased(800, 5);
        let mut cfg = TechniqueConfig::new(Technique::Parcelling);
        cfg.seed = 77;
        let a = fit_technique(&ds, &ds.ids(), &cfg).unwrap();
        let b = fit_technique(&ds, &ds.ids(), &cfg).unwrap();
        assert_eq!(a.to_text(&cfg), b.to_text(&cfg));
        assert_eq!(ds.audit().illegal_reads, 0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TechniqueConfig::new(Technique::Parcelling);
        cfg.kappa = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TechniqueConfig::new(Technique::Reclassification);
        cfg.reclass_cutoff = ReclassCutoff::Fixed(1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = TechniqueConfig::new(Technique::ControlGroup(ControlStrategy::Gc2));
        cfg.control_fraction = 1.5;
        assert!(cfg.validate().is_err());
    }
}
