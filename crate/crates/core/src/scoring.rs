//! Scorecards: feature encoding, ridge-penalized logistic regression,
//! scoring, the threshold decision rule and equal-frequency score bands.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{ApplicantRecord, Dataset, FeatureKind, FeatureValue};
use crate::error::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEncoding {
    Numeric {
        mean: f64,
        sd: f64,
    },
    /// Zero variance over the fit ids; contributes nothing.
    Dropped,
    /// One indicator per level plus a trailing "other" indicator.
    Categorical {
        levels: Vec<String>,
    },
}

impl FeatureEncoding {
    fn width(&self) -> usize {
        match self {
            FeatureEncoding::Numeric { .. } => 1,
            FeatureEncoding::Dropped => 0,
            FeatureEncoding::Categorical { levels } => levels.len() + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    names: Vec<String>,
    encodings: Vec<FeatureEncoding>,
}

impl Encoder {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn encodings(&self) -> &[FeatureEncoding] {
        &self.encodings
    }

    pub fn dim(&self) -> usize {
        self.encodings.iter().map(FeatureEncoding::width).sum()
    }

    pub fn dropped(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.encodings)
            .filter(|(_, e)| matches!(e, FeatureEncoding::Dropped))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    fn check_kind(&self, j: usize, v: &FeatureValue) -> Result<()> {
        let ok = match (&self.encodings[j], v) {
            (FeatureEncoding::Categorical { .. }, FeatureValue::Cat(_)) => true,
            (FeatureEncoding::Categorical { .. }, FeatureValue::Num(_)) => false,
            (FeatureEncoding::Numeric { .. }, FeatureValue::Num(x)) => x.is_finite(),
            (FeatureEncoding::Numeric { .. }, FeatureValue::Cat(_)) => false,
            // Dropped features keep their kind only implicitly.
            (FeatureEncoding::Dropped, _) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Schema(format!(
                "feature `{}` does not match the encoder",
                self.names[j]
            )))
        }
    }

    /// Appends the encoding of `features` to `out`.
    pub fn encode_into(&self, features: &[FeatureValue], out: &mut Vec<f64>) -> Result<()> {
        if features.len() != self.encodings.len() {
            return Err(Error::Schema(format!(
                "record has {} features, encoder expects {}",
                features.len(),
                self.encodings.len()
            )));
        }
        for (j, (enc, v)) in self.encodings.iter().zip(features).enumerate() {
            self.check_kind(j, v)?;
            match (enc, v) {
                (FeatureEncoding::Numeric { mean, sd }, FeatureValue::Num(x)) => out.push((x - mean) / sd),
                (FeatureEncoding::Categorical { levels }, FeatureValue::Cat(level)) => {
                    let hit = levels.iter().position(|l| l == level).unwrap_or(levels.len());
                    out.extend((0..=levels.len()).map(|i| if i == hit { 1.0 } else { 0.0 }));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn encode(&self, record: &ApplicantRecord) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        self.encode_into(&record.features, &mut out)?;
        Ok(out)
    }
}

/// Standardization statistics and level maps computed over `ids` only.
/// Standard deviations are population (divide-by-n) values.
pub fn fit_encoder(ds: &Dataset, ids: &[usize]) -> Result<Encoder> {
    if ids.is_empty() {
        return Err(Error::Empty("encoder fit ids".into()));
    }
    let schema = ds.schema();
    let mut encodings = Vec::with_capacity(schema.len());
    for (j, kind) in schema.kinds().iter().enumerate() {
        let enc = match kind {
            FeatureKind::Numeric => {
                let values: Vec<f64> = ids
                    .iter()
                    .map(|&id| match ds.record(id).features[j] {
                        FeatureValue::Num(v) => v,
                        FeatureValue::Cat(_) => f64::NAN,
                    })
                    .collect();
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 * mean.abs().max(1.0) && sd.is_finite() {
                    FeatureEncoding::Numeric { mean, sd }
                } else {
                    FeatureEncoding::Dropped
                }
            }
            FeatureKind::Categorical => {
                let mut levels: Vec<String> = Vec::new();
                for &id in ids {
                    if let FeatureValue::Cat(level) = &ds.record(id).features[j] {
                        if !levels.contains(level) {
                            levels.push(level.clone());
                        }
                    }
                }
                FeatureEncoding::Categorical { levels }
            }
        };
        encodings.push(enc);
    }
    Ok(Encoder {
        names: schema.names().to_vec(),
        encodings,
    })
}

/// Weighted ridge-penalized logistic negative log-likelihood.
///
/// Parameters are laid out as `[intercept, coefficients...]`; the intercept
/// is not penalized:
/// `f = Σ wᵢ [log(1 + e^ηᵢ) − yᵢ ηᵢ] + λ/2 ‖β‖²`, `ηᵢ = b + xᵢ·β`.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    x: DMatrix<f64>,
    y: DVector<f64>,
    w: DVector<f64>,
    lambda: f64,
}

impl LogisticObjective {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, w: DVector<f64>, lambda: f64) -> Result<Self> {
        if x.nrows() != y.len() || y.len() != w.len() {
            return Err(Error::invalid("design, labels and weights disagree in length"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda {lambda} must be finite and >= 0")));
        }
        Ok(LogisticObjective { x, y, w, lambda })
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols() + 1
    }

    fn linear(&self, params: &DVector<f64>) -> DVector<f64> {
        let beta = params.rows(1, self.x.ncols());
        let mut eta = &self.x * beta;
        eta.add_scalar_mut(params[0]);
        eta
    }

    pub fn value(&self, params: &DVector<f64>) -> f64 {
        let eta = self.linear(params);
        let nll: f64 = eta
            .iter()
            .zip(self.y.iter().zip(self.w.iter()))
            .map(|(&e, (&y, &w))| w * (softplus(e) - y * e))
            .sum();
        let beta = params.rows(1, self.x.ncols());
        nll + 0.5 * self.lambda * beta.norm_squared()
    }

    pub fn gradient(&self, params: &DVector<f64>) -> DVector<f64> {
        let eta = self.linear(params);
        let resid = DVector::from_iterator(
            eta.len(),
            eta.iter()
                .zip(self.y.iter().zip(self.w.iter()))
                .map(|(&e, (&y, &w))| w * (sigmoid(e) - y)),
        );
        let mut g = DVector::zeros(self.n_params());
        g[0] = resid.sum();
        let gb = self.x.tr_mul(&resid) + params.rows(1, self.x.ncols()) * self.lambda;
        g.rows_mut(1, self.x.ncols()).copy_from(&gb);
        g
    }

    pub fn hessian(&self, params: &DVector<f64>) -> DMatrix<f64> {
        let eta = self.linear(params);
        let p = self.n_params();
        let mut h = DMatrix::zeros(p, p);
        let mut row = vec![0.0; p];
        for i in 0..self.x.nrows() {
            let s = sigmoid(eta[i]);
            let c = self.w[i] * s * (1.0 - s);
            if c == 0.0 {
                continue;
            }
            row[0] = 1.0;
            for (j, v) in row[1..].iter_mut().enumerate() {
                *v = self.x[(i, j)];
            }
            for a in 0..p {
                let ca = c * row[a];
                for b in a..p {
                    h[(a, b)] += ca * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        for j in 1..p {
            h[(j, j)] += self.lambda;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the gradient max-norm falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Newton's method with step halving. Every accepted step does not increase
/// the objective; the objective trace is returned for inspection.
pub fn minimize(
    obj: &LogisticObjective,
    start: DVector<f64>,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, FitDiagnostics, Vec<f64>)> {
    let mut params = start;
    let mut f = obj.value(&params);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut g = obj.gradient(&params);
    loop {
        let gnorm = g.amax();
        if !gnorm.is_finite() || !f.is_finite() {
            return Err(Error::Numerical("objective or gradient is not finite".into()));
        }
        if gnorm < opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        let h = obj.hessian(&params);
        let direction = match h.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                // Unpenalized and rank deficient: damp the Hessian.
                let damp = 1e-8 * h.diagonal().amax().max(1.0);
                let shifted = h + DMatrix::identity(g.len(), g.len()) * damp;
                match shifted.cholesky() {
                    Some(ch) => ch.solve(&(-&g)),
                    None => -&g,
                }
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &params + &direction * step;
            let fc = obj.value(&candidate);
            if fc.is_finite() && fc <= f {
                accepted = Some((candidate, fc));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((p, fc)) => {
                let stalled = fc == f;
                params = p;
                f = fc;
                trace.push(f);
                g = obj.gradient(&params);
                if stalled {
                    // No representable decrease left.
                    converged = g.amax() < opts.tolerance;
                    break;
                }
            }
            None => break,
        }
    }
    let gradient_norm = g.amax();
    Ok((
        params,
        FitDiagnostics {
            iterations,
            gradient_norm,
            converged,
        },
        trace,
    ))
}

/// Labelled, weighted training rows. Ids are kept sorted ascending so the
/// summation order of a fit does not depend on how the set was assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    ids: Vec<usize>,
    labels: Vec<u8>,
    weights: Vec<f64>,
}

impl TrainingSet {
    pub fn new(rows: impl IntoIterator<Item = (usize, u8, f64)>) -> Result<Self> {
        let mut rows: Vec<(usize, u8, f64)> = rows.into_iter().collect();
        rows.sort_by_key(|r| r.0);
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate id in training set"));
        }
        if let Some(r) = rows.iter().find(|r| r.1 > 1) {
            return Err(Error::invalid(format!("label of {} is not binary", r.0)));
        }
        if let Some(r) = rows.iter().find(|r| !(r.2.is_finite() && r.2 > 0.0)) {
            return Err(Error::invalid(format!("weight of {} is not positive", r.0)));
        }
        Ok(TrainingSet {
            ids: rows.iter().map(|r| r.0).collect(),
            labels: rows.iter().map(|r| r.1).collect(),
            weights: rows.iter().map(|r| r.2).collect(),
        })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Encodes `ids` into a row-major design matrix.
pub fn design_matrix(enc: &Encoder, ds: &Dataset, ids: &[usize]) -> Result<DMatrix<f64>> {
    let dim = enc.dim();
    let mut data = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        enc.encode_into(&ds.record(id).features, &mut data)?;
    }
    Ok(DMatrix::from_row_slice(ids.len(), dim, &data))
}

/// Fits encoder and ridge logistic model on a prepared training set.
pub fn fit_scorecard(ds: &Dataset, train: &TrainingSet, lambda: f64, opts: &SolverOptions) -> Result<ScoreModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let positives = train.labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::SingleClass(format!(
            "{} rows, all labelled {}",
            train.len(),
            train.labels[0]
        )));
    }
    let encoder = fit_encoder(ds, &train.ids)?;
    let x = design_matrix(&encoder, ds, &train.ids)?;
    let y = DVector::from_iterator(train.len(), train.labels.iter().map(|&l| f64::from(l)));
    let w = DVector::from_column_slice(&train.weights);
    let obj = LogisticObjective::new(x, y, w, lambda)?;
    let (params, diagnostics, _) = minimize(&obj, DVector::zeros(obj.n_params()), opts)?;
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("fitted parameters are not finite".into()));
    }
    Ok(ScoreModel {
        encoder,
        intercept: params[0],
        coefficients: params.rows(1, params.len() - 1).iter().copied().collect(),
        lambda,
        diagnostics,
    })
}

/// Fits a default scorecard on `ids`, reading their outcomes through the
/// label-visibility rules. `seed` is accepted for interface uniformity; the
/// objective is convex and the solver deterministic.
pub fn fit_logistic(ds: &Dataset, ids: &[usize], weights: &[f64], lambda: f64, _seed: u64) -> Result<ScoreModel> {
    fit_logistic_with(ds, ids, weights, lambda, &SolverOptions::default())
}

pub fn fit_logistic_with(
    ds: &Dataset,
    ids: &[usize],
    weights: &[f64],
    lambda: f64,
    opts: &SolverOptions,
) -> Result<ScoreModel> {
    if ids.len() != weights.len() {
        return Err(Error::invalid("one weight per id required"));
    }
    let rows = ids
        .iter()
        .zip(weights)
        .map(|(&id, &w)| ds.outcome(id).map(|y| (id, y, w)))
        .collect::<Result<Vec<_>>>()?;
    fit_scorecard(ds, &TrainingSet::new(rows)?, lambda, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    pub encoder: Encoder,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub diagnostics: FitDiagnostics,
}

const MODEL_HEADER: &str = "credit-ri-model v1";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl ScoreModel {
    /// Model with every coefficient zero.
    pub fn constant(encoder: Encoder, intercept: f64) -> Self {
        let dim = encoder.dim();
        ScoreModel {
            encoder,
            coefficients: vec![0.0; dim],
            intercept,
            lambda: 0.0,
            diagnostics: FitDiagnostics {
                iterations: 0,
                gradient_norm: 0.0,
                converged: true,
            },
        }
    }

    pub fn linear_predictor(&self, features: &[FeatureValue]) -> Result<f64> {
        let mut x = Vec::with_capacity(self.coefficients.len());
        self.encoder.encode_into(features, &mut x)?;
        Ok(self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn score_features(&self, features: &[FeatureValue]) -> Result<f64> {
        Ok(sigmoid(self.linear_predictor(features)?).clamp(f64::EPSILON, 1.0 - f64::EPSILON))
    }

    pub fn score_ids(&self, ds: &Dataset, ids: &[usize]) -> Result<Vec<f64>> {
        ids.iter().map(|&id| predict_score(self, ds.record(id))).collect()
    }

    /// Plain-text document: feature encodings, coefficients with 17
    /// significant digits, then fit diagnostics.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_HEADER}");
        let _ = writeln!(s, "lambda {}", num(self.lambda));
        let _ = writeln!(s, "intercept {}", num(self.intercept));
        let _ = writeln!(s, "features {}", self.encoder.names.len());
        for (name, enc) in self.encoder.names.iter().zip(&self.encoder.encodings) {
            let qname = serde_json::to_string(name).expect("string serializes");
            match enc {
                FeatureEncoding::Numeric { mean, sd } => {
                    let _ = writeln!(s, "numeric {} {} {qname}", num(*mean), num(*sd));
                }
                FeatureEncoding::Dropped => {
                    let _ = writeln!(s, "dropped {qname}");
                }
                FeatureEncoding::Categorical { levels } => {
                    let qlevels = serde_json::to_string(levels).expect("strings serialize");
                    let _ = writeln!(s, "categorical {qname} {qlevels}");
                }
            }
        }
        let _ = writeln!(s, "coefficients {}", self.coefficients.len());
        for c in &self.coefficients {
            let _ = writeln!(s, "{}", num(*c));
        }
        let _ = writeln!(s, "iterations {}", self.diagnostics.iterations);
        let _ = writeln!(s, "gradient_norm {}", num(self.diagnostics.gradient_norm));
        let _ = writeln!(s, "converged {}", self.diagnostics.converged);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::ModelFormat {
                line: 0,
                message: format!("unexpected end of document, expected {what}"),
            })
        };
        let bad = |line: usize, message: String| Error::ModelFormat { line, message };
        let field = |(line, l): (usize, &str), key: &str| -> Result<String> {
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(line, format!("expected `{key}`")))
        };
        let float = |line: usize, v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|e| bad(line, format!("bad number `{v}`: {e}")))
        };
        let int = |line: usize, v: &str| -> Result<usize> {
            v.trim()
                .parse::<usize>()
                .map_err(|e| bad(line, format!("bad count `{v}`: {e}")))
        };

        let (line, head) = next("header")?;
        if head != MODEL_HEADER {
            return Err(bad(line, format!("unsupported header `{head}`")));
        }
        let l = next("lambda")?;
        let lambda = float(l.0, &field(l, "lambda")?)?;
        let l = next("intercept")?;
        let intercept = float(l.0, &field(l, "intercept")?)?;
        let l = next("features")?;
        let nf = int(l.0, &field(l, "features")?)?;
        let mut names = Vec::with_capacity(nf);
        let mut encodings = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (line, l) = next("feature")?;
            let (kind, rest) = l.split_once(' ').ok_or_else(|| bad(line, "malformed feature".into()))?;
            let json_err = |e: serde_json::Error| bad(line, format!("bad quoted value: {e}"));
            match kind {
                "numeric" => {
                    let mut parts = rest.splitn(3, ' ');
                    let mean = float(line, parts.next().unwrap_or(""))?;
                    let sd = float(line, parts.next().unwrap_or(""))?;
                    let name: String = serde_json::from_str(parts.next().unwrap_or("")).map_err(json_err)?;
                    names.push(name);
                    encodings.push(FeatureEncoding::Numeric { mean, sd });
                }
                "dropped" => {
                    names.push(serde_json::from_str(rest).map_err(json_err)?);
                    encodings.push(FeatureEncoding::Dropped);
                }
                "categorical" => {
                    let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<serde_json::Value>();
                    let name = match stream.next() {
                        Some(Ok(serde_json::Value::String(s))) => s,
                        _ => return Err(bad(line, "expected quoted feature name".into())),
                    };
                    let levels: Vec<String> = match stream.next() {
                        Some(Ok(v)) => serde_json::from_value(v).map_err(json_err)?,
                        _ => return Err(bad(line, "expected level list".into())),
                    };
                    names.push(name);
                    encodings.push(FeatureEncoding::Categorical { levels });
                }
                other => return Err(bad(line, format!("unknown feature kind `{other}`"))),
            }
        }
        let encoder = Encoder { names, encodings };
        let l = next("coefficients")?;
        let nc = int(l.0, &field(l, "coefficients")?)?;
        if nc != encoder.dim() {
            return Err(bad(
                l.0,
                format!("{nc} coefficients for encoded dimension {}", encoder.dim()),
            ));
        }
        let mut coefficients = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (line, l) = next("coefficient")?;
            coefficients.push(float(line, l)?);
        }
        let l = next("iterations")?;
        let iterations = int(l.0, &field(l, "iterations")?)?;
        let l = next("gradient_norm")?;
        let gradient_norm = float(l.0, &field(l, "gradient_norm")?)?;
        let l = next("converged")?;
        let converged = match field(l, "converged")?.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(bad(l.0, format!("bad flag `{other}`"))),
        };
        Ok(ScoreModel {
            encoder,
            coefficients,
            intercept,
            lambda,
            diagnostics: FitDiagnostics {
                iterations,
                gradient_norm,
                converged,
            },
        })
    }
}

/// Estimated probability of no default, strictly inside (0, 1).
pub fn predict_score(model: &ScoreModel, record: &ApplicantRecord) -> Result<f64> {
    model.score_features(&record.features)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    pub threshold: f64,
}

impl DecisionRule {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(format!("threshold {threshold} is outside [0, 1]")));
        }
        Ok(DecisionRule { threshold })
    }
}

/// Accept (1) when the score reaches the threshold, inclusive.
pub fn decide(score: f64, rule: &DecisionRule) -> u8 {
    u8::from(score >= rule.threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandDirection {
    /// Band 1 holds the highest scores.
    HighFirst,
    /// Band 1 holds the lowest scores.
    LowFirst,
}

/// Sizes of `b` contiguous equal-frequency chunks of `n` items, larger
/// chunks first.
pub fn band_sizes(n: usize, b: usize) -> Vec<usize> {
    if b == 0 {
        return Vec::new();
    }
    let (q, r) = (n / b, n % b);
    (0..b).map(|i| q + usize::from(i < r)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub band_count: usize,
    pub direction: BandDirection,
    assignment: BTreeMap<usize, usize>,
    members: Vec<Vec<usize>>,
}

impl BandTable {
    /// Band number (1-based) of an id.
    pub fn band_of(&self, id: usize) -> Option<usize> {
        self.assignment.get(&id).copied()
    }

    /// Ids of band `band` (1-based), in banding order.
    pub fn members(&self, band: usize) -> &[usize] {
        &self.members[band - 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment.iter().map(|(&id, &b)| (id, b))
    }
}

/// Equal-frequency score bands. Records are ordered by score in the given
/// direction, ties broken by ascending id, then cut into `b` chunks whose
/// sizes differ by at most one.
pub fn make_bands(scores: &[(usize, f64)], b: usize, direction: BandDirection) -> Result<BandTable> {
    if b == 0 {
        return Err(Error::invalid("band count must be positive"));
    }
    if scores.len() < b {
        return Err(Error::invalid(format!("{} scores cannot fill {b} bands", scores.len())));
    }
    let mut order: Vec<(usize, f64)> = scores.to_vec();
    order.sort_by(|x, y| {
        let by_score = match direction {
            BandDirection::HighFirst => y.1.total_cmp(&x.1),
            BandDirection::LowFirst => x.1.total_cmp(&y.1),
        };
        by_score.then(x.0.cmp(&y.0))
    });
    let mut assignment = BTreeMap::new();
    let mut members = Vec::with_capacity(b);
    let mut pos = 0;
    for (i, size) in band_sizes(order.len(), b).into_iter().enumerate() {
        let chunk: Vec<usize> = order[pos..pos + size].iter().map(|s| s.0).collect();
        for &id in &chunk {
            if assignment.insert(id, i + 1).is_some() {
                return Err(Error::invalid(format!("id {id} scored twice")));
            }
        }
        members.push(chunk);
        pos += size;
    }
    Ok(BandTable {
        band_count: b,
        direction,
        assignment,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureKind, Schema};

    fn dataset(rows: &[(Vec<FeatureValue>, u8)], kinds: Vec<FeatureKind>) -> Dataset {
        let names = (0..kinds.len()).map(|j| format!("f{j}")).collect();
        let schema = Schema::new(names, kinds).unwrap();
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, (f, y))| ApplicantRecord::new(i, f.clone(), Some(*y), 1))
            .collect();
        Dataset::new(schema, records).unwrap()
    }

    #[test]
    fn encoder_standardizes_and_drops() {
        let rows = vec![
            (
                vec![
                    FeatureValue::Num(8.0),
                    FeatureValue::Num(5.0),
                    FeatureValue::Cat("A".into()),
                ],
                1,
            ),
            (
                vec![
                    FeatureValue::Num(10.0),
                    FeatureValue::Num(5.0),
                    FeatureValue::Cat("B".into()),
                ],
                0,
            ),
            (
                vec![
                    FeatureValue::Num(12.0),
                    FeatureValue::Num(5.0),
                    FeatureValue::Cat("A".into()),
                ],
                1,
            ),
        ];
        let ds = dataset(
            &rows,
            vec![FeatureKind::Numeric, FeatureKind::Numeric, FeatureKind::Categorical],
        );
        let enc = fit_encoder(&ds, &ds.ids()).unwrap();
        let sd = (8.0f64 / 3.0).sqrt();
        assert_eq!(enc.encodings()[0], FeatureEncoding::Numeric { mean: 10.0, sd });
        assert_eq!(enc.dropped(), vec!["f1"]);
        assert_eq!(enc.dim(), 1 + 3);

        let v = enc.encode(ds.record(2)).unwrap();
        assert!((v[0] - 2.0 / sd).abs() < 1e-15);
        assert_eq!(&v[1..], &[1.0, 0.0, 0.0]);
        assert_eq!(enc.encode(ds.record(1)).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);

        let unseen = ApplicantRecord::new(
            9,
            vec![
                FeatureValue::Num(10.0),
                FeatureValue::Num(1.0),
                FeatureValue::Cat("C".into()),
            ],
            None,
            0,
        );
        assert_eq!(enc.encode(&unseen).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        let wrong = ApplicantRecord::new(9, vec![FeatureValue::Num(1.0)], None, 0);
        assert!(matches!(enc.encode(&wrong), Err(Error::Schema(_))));
        assert!(fit_encoder(&ds, &[]).is_err());
    }

    #[test]
    fn predict_and_decide() {
        let rows = vec![(vec![FeatureValue::Num(1.0)], 1), (vec![FeatureValue::Num(2.0)], 0)];
        let ds = dataset(&rows, vec![FeatureKind::Numeric]);
        let enc = fit_encoder(&ds, &ds.ids()).unwrap();
        let m = ScoreModel::constant(enc.clone(), 0.0);
        assert_eq!(predict_score(&m, ds.record(0)).unwrap(), 0.5);
        let m = ScoreModel::constant(enc, logit(0.8));
        assert!((predict_score(&m, ds.record(0)).unwrap() - 0.8).abs() < 1e-15);

        let rule = DecisionRule::new(0.6).unwrap();
        assert_eq!(decide(0.6, &rule), 1);
        assert_eq!(decide(0.6 - 1e-12, &rule), 0);
        let all = DecisionRule::new(0.0).unwrap();
        assert_eq!(decide(0.0, &all), 1);
        assert!(DecisionRule::new(1.5).is_err());
    }

    #[test]
    fn separable_fit_ranks_perfectly() {
        let xs = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let rows: Vec<_> = xs
            .iter()
            .map(|&x| (vec![FeatureValue::Num(x)], u8::from(x > 0.0)))
            .collect();
        let ds = dataset(&rows, vec![FeatureKind::Numeric]);
        let m = fit_logistic(&ds, &ds.ids(), &[1.0; 6], 0.1, 0).unwrap();
        assert!(m.diagnostics.converged);
        let scores = m.score_ids(&ds, &ds.ids()).unwrap();
        let ys: Vec<u8> = rows.iter().map(|r| r.1).collect();
        assert_eq!(crate::metrics::roc_auc(&scores, &ys).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_an_error() {
        let rows = vec![(vec![FeatureValue::Num(1.0)], 1), (vec![FeatureValue::Num(2.0)], 1)];
        let ds = dataset(&rows, vec![FeatureKind::Numeric]);
        assert!(matches!(
            fit_logistic(&ds, &ds.ids(), &[1.0, 1.0], 1.0, 0),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn bands_split_evenly_and_break_ties_by_id() {
        let scores: Vec<(usize, f64)> = (0..40).map(|i| (i, i as f64 / 40.0)).collect();
        let t = make_bands(&scores, 20, BandDirection::HighFirst).unwrap();
        assert!(t.sizes().iter().all(|&s| s == 2));
        assert_eq!(t.members(1), &[39, 38]);

        let flat: Vec<(usize, f64)> = (0..40).rev().map(|i| (i, 0.3)).collect();
        let t = make_bands(&flat, 20, BandDirection::HighFirst).unwrap();
        assert_eq!(t.members(1), &[0, 1]);
        assert_eq!(t.band_of(39), Some(20));

        let few: Vec<(usize, f64)> = (0..10).map(|i| (i, 0.1)).collect();
        assert!(make_bands(&few, 20, BandDirection::LowFirst).is_err());
        assert_eq!(band_sizes(7, 3), vec![3, 2, 2]);
    }

    #[test]
    fn model_document_round_trips() {
        let ds = crate::dataset::generate_synthetic(300, 6, 0.8, 4).unwrap();
        let m = fit_logistic(&ds, &ds.ids(), &vec![1.0; 300], 1.0, 0).unwrap();
        let text = m.to_text();
        let back = ScoreModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        assert!(ScoreModel::from_text("nonsense").is_err());
    }
}
