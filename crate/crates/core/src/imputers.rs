//! Imputation methods behind a single [`impute`] entry point.
//!
//! Every method returns a complete [`Dataset`] in which the originally known
//! cells are untouched. All methods except the baseline work on the
//! normalized, one-hot encoded view and decode their predictions back.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{argmax, AttributeKind, Cell, Dataset, EncodedMatrix};
use crate::error::{Error, Result};
use crate::trainer::{self, epoch_order, run_schedule, stream, stream_rng, EpochRecord, Schedule, TrainConfig, TrainedModel};

/// Which imputer to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Fkm { k: usize, p: f64, m: f64 },
    Ibi { k: usize, weighting: Weighting },
    Mf { t: usize, lambda: f64 },
    Nlpca { t: usize, hidden: Vec<usize> },
    Ubp { t: usize, hidden: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Similarity,
    Uniform,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Fkm { .. } => "fkm",
            Method::Ibi { .. } => "ibi",
            Method::Mf { .. } => "mf",
            Method::Nlpca { .. } => "nlpca",
            Method::Ubp { .. } => "ubp",
        }
    }

    /// The parameter grid used in the original comparison for this method.
    pub fn paper_grid(name: &str) -> Result<Vec<Method>> {
        let hidden = |h: usize| if h == 0 { Vec::new() } else { vec![h] };
        Ok(match name {
            "baseline" => vec![Method::Baseline],
            "fkm" => {
                let mut g = Vec::new();
                for k in [4, 8, 16] {
                    for p in [1.0, 1.5, 2.0] {
                        for m in [1.3, 1.5] {
                            g.push(Method::Fkm { k, p, m });
                        }
                    }
                }
                g
            }
            "ibi" => [1, 5, 21]
                .into_iter()
                .map(|k| Method::Ibi {
                    k,
                    weighting: Weighting::Similarity,
                })
                .collect(),
            "mf" => {
                let mut g = Vec::new();
                for t in [2, 8, 16] {
                    for lambda in [0.001, 0.01, 0.1] {
                        g.push(Method::Mf { t, lambda });
                    }
                }
                g
            }
            "nlpca" | "ubp" => {
                let mut g = Vec::new();
                for h in [0, 8, 16] {
                    for t in [2, 8, 16, 32] {
                        g.push(if name == "ubp" {
                            Method::Ubp { t, hidden: hidden(h) }
                        } else {
                            Method::Nlpca { t, hidden: hidden(h) }
                        });
                    }
                }
                g
            }
            other => return Err(Error::arg(format!("unknown method '{other}'"))),
        })
    }
}

const GRAMMAR: &str = "expected name(:key=value(,key=value)*)?, e.g. ubp:t=8,hidden=16 or fkm:k=8,p=1,m=1.3";

fn hidden_str(hidden: &[usize]) -> String {
    if hidden.is_empty() {
        "0".into()
    } else {
        hidden.iter().map(usize::to_string).collect::<Vec<_>>().join("/")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Baseline => write!(f, "baseline"),
            Method::Fkm { k, p, m } => write!(f, "fkm:k={k},p={p},m={m}"),
            Method::Ibi { k, weighting } => match weighting {
                Weighting::Similarity => write!(f, "ibi:k={k}"),
                Weighting::Uniform => write!(f, "ibi:k={k},weighting=uniform"),
            },
            Method::Mf { t, lambda } => write!(f, "mf:t={t},lambda={lambda}"),
            Method::Nlpca { t, hidden } => write!(f, "nlpca:t={t},hidden={}", hidden_str(hidden)),
            Method::Ubp { t, hidden } => write!(f, "ubp:t={t},hidden={}", hidden_str(hidden)),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: String| Error::arg(format!("bad method spec '{s}': {why}; {GRAMMAR}"));
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (s.trim(), None),
        };
        let mut params: BTreeMap<String, String> = BTreeMap::new();
        if let Some(rest) = rest {
            for pair in rest.split(',') {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("'{pair}' is not key=value")))?;
                let (k, v) = (k.trim(), v.trim());
                if k.is_empty() || v.is_empty() {
                    return Err(bad(format!("empty key or value in '{pair}'")));
                }
                if params.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(bad(format!("key '{k}' given twice")));
                }
            }
        }
        let mut take = |key: &str| params.remove(key);
        fn num<T: FromStr>(v: Option<String>, default: T, key: &str) -> std::result::Result<T, String> {
            match v {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| format!("'{v}' is not a valid {key}")),
            }
        }
        let parse_hidden = |v: Option<String>| -> std::result::Result<Vec<usize>, String> {
            match v.as_deref() {
                None | Some("0") => Ok(Vec::new()),
                Some(v) => v
                    .split('/')
                    .map(|h| match h.trim().parse::<usize>() {
                        Ok(n) if n > 0 => Ok(n),
                        _ => Err(format!("'{v}' is not a hidden layer list like 16 or 16/8")),
                    })
                    .collect(),
            }
        };
        let method = match name {
            "baseline" | "bl" => Method::Baseline,
            "fkm" => Method::Fkm {
                k: num(take("k"), 4, "k").map_err(bad)?,
                p: num(take("p"), 1.0, "p").map_err(bad)?,
                m: num(take("m"), 1.3, "m").map_err(bad)?,
            },
            "ibi" => Method::Ibi {
                k: num(take("k"), 5, "k").map_err(bad)?,
                weighting: match take("weighting").as_deref() {
                    None | Some("similarity") => Weighting::Similarity,
                    Some("uniform") => Weighting::Uniform,
                    Some(w) => return Err(bad(format!("unknown weighting '{w}'"))),
                },
            },
            "mf" => Method::Mf {
                t: num(take("t"), 2, "t").map_err(bad)?,
                lambda: num(take("lambda"), DEFAULT_MF_LAMBDA, "lambda").map_err(bad)?,
            },
            "nlpca" => Method::Nlpca {
                t: num(take("t"), 2, "t").map_err(bad)?,
                hidden: parse_hidden(take("hidden")).map_err(bad)?,
            },
            "ubp" => Method::Ubp {
                t: num(take("t"), 2, "t").map_err(bad)?,
                hidden: parse_hidden(take("hidden")).map_err(bad)?,
            },
            other => return Err(bad(format!("unknown method '{other}'"))),
        };
        if let Some(k) = params.keys().next() {
            return Err(bad(format!("unknown key '{k}' for {name}")));
        }
        Ok(method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerSpec {
    pub method: Method,
    pub seed: u64,
}

impl ImputerSpec {
    pub fn new(method: Method, seed: u64) -> Self {
        ImputerSpec { method, seed }
    }
}

/// Training knobs shared by the SGD-based imputers. `latent_t`, `hidden`
/// and `seed` are taken from the [`ImputerSpec`] instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeOptions {
    pub train: TrainConfig,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        ImputeOptions {
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImputationResult {
    pub completed: Dataset,
    pub spec: ImputerSpec,
    pub diagnostics: BTreeMap<String, f64>,
    /// The fitted model for NLPCA and UBP.
    pub trained: Option<TrainedModel>,
}

pub fn impute(ds: &Dataset, spec: &ImputerSpec) -> Result<ImputationResult> {
    impute_with(ds, spec, &ImputeOptions::default(), &mut |_| {})
}

/// Runs the imputer named by `spec`, reporting training epochs of the
/// network-based methods to `observer`.
pub fn impute_with(
    ds: &Dataset,
    spec: &ImputerSpec,
    opts: &ImputeOptions,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<ImputationResult> {
    if ds.known_count() == 0 {
        return Err(Error::arg("dataset has no known cells"));
    }
    let mut diagnostics = BTreeMap::new();
    let mut trained = None;
    let completed = if ds.missing_count() == 0 {
        validate(&spec.method, ds)?;
        ds.clone()
    } else {
        match &spec.method {
            Method::Baseline => impute_baseline(ds),
            Method::Ibi { k, weighting } => impute_ibi(ds, *k, *weighting)?,
            Method::Fkm { k, p, m } => {
                let (out, iterations) = impute_fkm(ds, *k, *p, *m, spec.seed)?;
                diagnostics.insert("iterations".into(), iterations as f64);
                out
            }
            Method::Mf { t, lambda } => {
                let x = ds.encode();
                let mf = fit_mf(&x, *t, *lambda, &opts.train.schedule(), spec.seed)?;
                diagnostics.insert("rmse".into(), mf.final_rmse);
                diagnostics.insert("epochs".into(), mf.epochs as f64);
                x.decode(&mf.reconstruct(), ds)?
            }
            Method::Nlpca { t, hidden } | Method::Ubp { t, hidden } => {
                let x = ds.encode();
                let config = TrainConfig {
                    latent_t: *t,
                    hidden: hidden.clone(),
                    seed: spec.seed,
                    ..opts.train.clone()
                };
                let tm = if matches!(spec.method, Method::Ubp { .. }) {
                    trainer::ubp_train_observed(&x, &config, observer)?
                } else {
                    trainer::nlpca_train_observed(&x, &config, observer)?
                };
                if let Some(last) = tm.history.last() {
                    diagnostics.insert("rmse".into(), last.rmse);
                }
                diagnostics.insert("epochs".into(), tm.history.len() as f64);
                let out = x.decode(&tm.reconstruct()?, ds)?;
                trained = Some(tm);
                out
            }
        }
    };
    Ok(ImputationResult {
        completed,
        spec: spec.clone(),
        diagnostics,
        trained,
    })
}

fn validate(method: &Method, ds: &Dataset) -> Result<()> {
    let width: usize = ds.attrs().iter().map(|a| a.width()).sum();
    match *method {
        Method::Fkm { k, p, m } => check_fkm(k, p, m, ds.n_rows()),
        Method::Ibi { k, .. } if k == 0 => Err(Error::arg("ibi needs k >= 1")),
        Method::Mf { t, .. } => check_t(t, width),
        Method::Nlpca { t, .. } | Method::Ubp { t, .. } => check_t(t, width),
        _ => Ok(()),
    }
}

fn check_t(t: usize, width: usize) -> Result<()> {
    if t == 0 || t >= width {
        return Err(Error::arg(format!("latent size t={t} must satisfy 1 <= t < {width}")));
    }
    Ok(())
}

fn check_fkm(k: usize, p: f64, m: f64, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::arg(format!("fkm needs 1 <= k <= n ({n}), got {k}")));
    }
    if !(p >= 1.0) {
        return Err(Error::arg("fkm needs p >= 1"));
    }
    if !(m > 1.0) {
        return Err(Error::arg("fkm needs a fuzzifier m > 1"));
    }
    Ok(())
}

/// Per-attribute fill values: the mean of known values for continuous
/// attributes, the most common category (lowest index on ties) for
/// nominal ones. A column with no known cells gets the midpoint of its range
/// or its first category.
pub fn baseline_fill(ds: &Dataset) -> Vec<Cell> {
    ds.attrs()
        .iter()
        .enumerate()
        .map(|(a, spec)| {
            let known = (0..ds.n_rows()).map(|r| ds.cell(r, a)).filter(|c| !c.is_missing());
            match &spec.kind {
                AttributeKind::Continuous { .. } => {
                    let (sum, count) = known.fold((0.0, 0usize), |(s, n), c| match c {
                        Cell::Real(v) => (s + v, n + 1),
                        _ => (s, n),
                    });
                    if count == 0 {
                        Cell::Real(spec.denormalize(0.5))
                    } else {
                        Cell::Real(sum / count as f64)
                    }
                }
                AttributeKind::Nominal { categories } => {
                    let mut counts = vec![0usize; categories.len()];
                    for c in known {
                        if let Cell::Category(k) = c {
                            counts[k] += 1;
                        }
                    }
                    let mut best = 0;
                    for (k, &n) in counts.iter().enumerate() {
                        if n > counts[best] {
                            best = k;
                        }
                    }
                    Cell::Category(best)
                }
            }
        })
        .collect()
}

pub fn impute_baseline(ds: &Dataset) -> Dataset {
    let fill = baseline_fill(ds);
    let d = ds.n_attrs();
    let cells = ds
        .cells()
        .iter()
        .enumerate()
        .map(|(i, c)| if c.is_missing() { fill[i % d] } else { *c })
        .collect();
    ds.with_cells(cells)
}

/// Cosine similarity of two encoded rows over the columns known in both.
/// Zero when they share no known column or either side has zero norm there.
pub fn cosine_similarity(x: &EncodedMatrix, a: usize, b: usize) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for c in 0..x.width() {
        if let (Some(u), Some(v)) = (x.get(a, c), x.get(b, c)) {
            dot += u * v;
            na += u * u;
            nb += v * v;
        }
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Instance-based imputation: each missing cell is filled from the `k`
/// most cosine-similar rows that know that attribute.
pub fn impute_ibi(ds: &Dataset, k: usize, weighting: Weighting) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::arg("ibi needs k >= 1"));
    }
    let x = ds.encode();
    let fill = baseline_fill(ds);
    let n = ds.n_rows();
    let d = ds.n_attrs();
    let mut cells = ds.cells().to_vec();
    for r in 0..n {
        let missing: Vec<usize> = (0..d).filter(|&a| ds.cell(r, a).is_missing()).collect();
        if missing.is_empty() {
            continue;
        }
        let sims: Vec<f64> = (0..n).map(|s| if s == r { 0.0 } else { cosine_similarity(&x, r, s) }).collect();
        for a in missing {
            let mut candidates: Vec<usize> = (0..n).filter(|&s| s != r && !ds.cell(s, a).is_missing()).collect();
            // most similar first, lower row index on ties
            candidates.sort_by(|&p, &q| sims[q].total_cmp(&sims[p]).then(p.cmp(&q)));
            candidates.truncate(k);
            let total: f64 = candidates.iter().map(|&s| sims[s]).sum();
            if candidates.is_empty() || !(total > 0.0) {
                cells[r * d + a] = fill[a];
                continue;
            }
            let weight = |s: usize| match weighting {
                Weighting::Similarity => sims[s],
                Weighting::Uniform => 1.0,
            };
            let spec = &ds.attrs()[a];
            cells[r * d + a] = match &spec.kind {
                AttributeKind::Continuous { .. } => {
                    let (mut num, mut den) = (0.0, 0.0);
                    for &s in &candidates {
                        if let Cell::Real(v) = ds.cell(s, a) {
                            num += weight(s) * spec.normalize(v);
                            den += weight(s);
                        }
                    }
                    Cell::Real(spec.denormalize(num / den))
                }
                AttributeKind::Nominal { categories } => {
                    let mut votes = vec![0.0; categories.len()];
                    for &s in &candidates {
                        if let Cell::Category(c) = ds.cell(s, a) {
                            votes[c] += weight(s);
                        }
                    }
                    Cell::Category(argmax(&votes))
                }
            };
        }
    }
    Ok(ds.with_cells(cells))
}

/// Partial Minkowski distance: `p`-norm over the columns known in `row`,
/// rescaled by `width / known` so rows with different missingness compare.
/// `None` when the row has no known column.
fn partial_distance(x: &EncodedMatrix, row: usize, centroid: &[f64], p: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut known = 0usize;
    for (c, &z) in centroid.iter().enumerate() {
        if let Some(v) = x.get(row, c) {
            sum += (v - z).abs().powf(p);
            known += 1;
        }
    }
    (known > 0).then(|| (sum * x.width() as f64 / known as f64).powf(1.0 / p))
}

/// Fuzzy memberships of one row given its distance to every centroid.
fn memberships(dist: &[Option<f64>], m: f64, out: &mut [f64]) {
    let k = out.len();
    if dist.iter().any(Option::is_none) {
        out.fill(1.0 / k as f64);
        return;
    }
    let dist: Vec<f64> = dist.iter().map(|d| d.unwrap()).collect();
    let zeros = dist.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        for (u, &d) in out.iter_mut().zip(&dist) {
            *u = if d == 0.0 { 1.0 / zeros as f64 } else { 0.0 };
        }
        return;
    }
    let exp = 2.0 / (m - 1.0);
    for i in 0..k {
        let s: f64 = dist.iter().map(|dj| (dist[i] / dj).powf(exp)).sum();
        out[i] = 1.0 / s;
    }
}

/// Fitted fuzzy clustering over encoded rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyClusters {
    pub centroids: Vec<Vec<f64>>,
    /// `n x k` memberships, row-major.
    pub memberships: Vec<f64>,
    pub iterations: usize,
}

pub const FKM_TOLERANCE: f64 = 1e-4;
pub const FKM_MAX_ITERATIONS: usize = 300;

pub fn fuzzy_kmeans(x: &EncodedMatrix, k: usize, p: f64, m: f64, seed: u64) -> Result<FuzzyClusters> {
    check_fkm(k, p, m, x.n_rows())?;
    let (n, w) = (x.n_rows(), x.width());
    let col_means: Vec<f64> = (0..w)
        .map(|c| {
            let vals: Vec<f64> = (0..n).filter_map(|r| x.get(r, c)).collect();
            if vals.is_empty() {
                0.5
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    let mut rng = stream_rng(seed, stream::CLUSTER_INIT);
    let mut centroids: Vec<Vec<f64>> = index::sample(&mut rng, n, k)
        .into_iter()
        .map(|r| (0..w).map(|c| x.get(r, c).unwrap_or(col_means[c])).collect())
        .collect();

    let assign = |centroids: &[Vec<f64>], u: &mut [f64]| {
        for r in 0..n {
            let dist: Vec<Option<f64>> = centroids.iter().map(|z| partial_distance(x, r, z, p)).collect();
            memberships(&dist, m, &mut u[r * k..(r + 1) * k]);
        }
    };
    let mut u = vec![0.0; n * k];
    assign(&centroids, &mut u);
    let mut iterations = 0;
    let mut next = vec![0.0; n * k];
    while iterations < FKM_MAX_ITERATIONS {
        iterations += 1;
        for (j, z) in centroids.iter_mut().enumerate() {
            for (c, zc) in z.iter_mut().enumerate() {
                let (mut num, mut den) = (0.0, 0.0);
                for r in 0..n {
                    if let Some(v) = x.get(r, c) {
                        let wgt = u[r * k + j].powf(m);
                        num += wgt * v;
                        den += wgt;
                    }
                }
                if den > 0.0 {
                    *zc = num / den;
                }
            }
        }
        assign(&centroids, &mut next);
        let change = u.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut u, &mut next);
        if change < FKM_TOLERANCE {
            break;
        }
    }
    Ok(FuzzyClusters {
        centroids,
        memberships: u,
        iterations,
    })
}

/// Fuzzy k-means imputation: a missing entry becomes the membership-weighted
/// average of the centroids in that column. Returns the completed dataset and
/// the number of clustering iterations.
pub fn impute_fkm(ds: &Dataset, k: usize, p: f64, m: f64, seed: u64) -> Result<(Dataset, usize)> {
    let x = ds.encode();
    let fit = fuzzy_kmeans(&x, k, p, m, seed)?;
    let (n, w) = (x.n_rows(), x.width());
    let mut pred = vec![0.0; n * w];
    for r in 0..n {
        let u = &fit.memberships[r * k..(r + 1) * k];
        for c in 0..w {
            pred[r * w + c] = match x.get(r, c) {
                Some(v) => v,
                None => u.iter().zip(&fit.centroids).map(|(ui, z)| ui * z[c]).sum(),
            };
        }
    }
    Ok((x.decode(&pred, ds)?, fit.iterations))
}

/// Starting spread of the factor matrices.
pub const MF_INIT_STD: f64 = 0.1;
pub const DEFAULT_MF_LAMBDA: f64 = 0.01;

/// Two-factor model `x[r][c] ~ u_r . w_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFactors {
    pub rows: usize,
    pub cols: usize,
    pub t: usize,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub final_rmse: f64,
    pub epochs: usize,
}

impl MatrixFactors {
    pub fn predict(&self, r: usize, c: usize) -> f64 {
        let t = self.t;
        self.u[r * t..(r + 1) * t]
            .iter()
            .zip(&self.w[c * t..(c + 1) * t])
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Every prediction clamped into `[0, 1]`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(self.predict(r, c).clamp(0.0, 1.0));
            }
        }
        out
    }

    pub fn rmse(&self, entries: &[(usize, usize, f64)]) -> f64 {
        let sse: f64 = entries.iter().map(|&(r, c, x)| (x - self.predict(r, c)).powi(2)).sum();
        (sse / entries.len() as f64).sqrt()
    }
}

/// Fits a linear factorization by per-element SGD under the shared decay
/// schedule.
pub fn fit_mf(x: &EncodedMatrix, t: usize, lambda: f64, schedule: &Schedule, seed: u64) -> Result<MatrixFactors> {
    check_t(t, x.width())?;
    if !(lambda >= 0.0) {
        return Err(Error::arg("mf lambda must be non-negative"));
    }
    let entries = x.known_entries();
    if entries.is_empty() {
        return Err(Error::arg("no known cells to factor"));
    }
    let normal = Normal::new(0.0, MF_INIT_STD).expect("valid normal");
    let mut init = stream_rng(seed, stream::LATENT_INIT);
    let mut f = MatrixFactors {
        rows: x.n_rows(),
        cols: x.width(),
        t,
        u: (0..x.n_rows() * t).map(|_| normal.sample(&mut init)).collect(),
        w: (0..x.width() * t).map(|_| normal.sample(&mut init)).collect(),
        final_rmse: f64::INFINITY,
        epochs: 0,
    };
    let mut order_rng = stream_rng(seed, stream::EPOCH_ORDER);
    let outcome = run_schedule(schedule, |eta| {
        mf_epoch(&mut f, &entries, eta, lambda, &mut order_rng);
        Ok(f.rmse(&entries))
    })?;
    f.final_rmse = outcome.final_rmse;
    f.epochs = outcome.epochs;
    Ok(f)
}

fn mf_epoch<R: Rng + ?Sized>(f: &mut MatrixFactors, entries: &[(usize, usize, f64)], eta: f64, lambda: f64, rng: &mut R) {
    let t = f.t;
    for k in epoch_order(entries.len(), rng) {
        let (r, c, x) = entries[k];
        let e = x - f.predict(r, c);
        let (u, w) = (&mut f.u[r * t..(r + 1) * t], &mut f.w[c * t..(c + 1) * t]);
        for (ui, wi) in u.iter_mut().zip(w.iter_mut()) {
            let (u0, w0) = (*ui, *wi);
            *ui = u0 + eta * (e * w0 - lambda * u0);
            *wi = w0 + eta * (e * u0 - lambda * w0);
        }
    }
}

pub fn impute_mf(ds: &Dataset, t: usize, lambda: f64, seed: u64) -> Result<Dataset> {
    let x = ds.encode();
    let f = fit_mf(&x, t, lambda, &Schedule::default(), seed)?;
    x.decode(&f.reconstruct(), ds)
}
