//! Scoring imputations, running parameter sweeps, and comparing methods.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{corrupt_mcar, AttributeKind, AttributeSpec, Cell, CorruptionPlan, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::imputers::{impute_with, ImputeOptions, ImputerSpec, Method};
use crate::stats::{wilcoxon_greater, SignedRankTest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Summed error of the scored cells in each row.
    pub per_pattern_error: Vec<f64>,
    /// Mean of `per_pattern_error` over all rows.
    pub average_error: f64,
    pub per_attribute_error: Vec<f64>,
    pub cells_scored: usize,
    /// Same as `average_error` but with continuous errors in raw units.
    pub raw_average_error: f64,
}

fn same_schema(a: &AttributeSpec, b: &AttributeSpec) -> bool {
    match (&a.kind, &b.kind) {
        (AttributeKind::Continuous { .. }, AttributeKind::Continuous { .. }) => true,
        (AttributeKind::Nominal { categories: x }, AttributeKind::Nominal { categories: y }) => x == y,
        _ => false,
    }
}

/// Scores every cell listed in `plan`: squared difference of normalized
/// values for continuous attributes (using the original's ranges), 0/1
/// mismatch for nominal ones.
pub fn score(original: &Dataset, imputed: &Dataset, plan: &CorruptionPlan) -> Result<ErrorReport> {
    if original.n_rows() != imputed.n_rows()
        || original.n_attrs() != imputed.n_attrs()
        || !original.attrs().iter().zip(imputed.attrs()).all(|(a, b)| same_schema(a, b))
    {
        return Err(Error::arg("original and imputed datasets have different schemas"));
    }
    let (n, d) = (original.n_rows(), original.n_attrs());
    let mut per_pattern = vec![0.0; n];
    let mut raw_per_pattern = vec![0.0; n];
    let mut per_attr = vec![0.0; d];
    let mut seen = vec![false; n * d];
    for &(r, a) in &plan.removed {
        if r >= n || a >= d {
            return Err(Error::arg(format!("plan cell ({r}, {a}) is outside the dataset")));
        }
        if std::mem::replace(&mut seen[r * d + a], true) {
            return Err(Error::arg(format!("plan lists cell ({r}, {a}) twice")));
        }
        let spec = &original.attrs()[a];
        let (err, raw) = match (original.cell(r, a), imputed.cell(r, a)) {
            (Cell::Real(x), Cell::Real(y)) => {
                let e = spec.normalize(x) - spec.normalize(y);
                (e * e, (x - y) * (x - y))
            }
            (Cell::Category(x), Cell::Category(y)) => {
                let e = if x == y { 0.0 } else { 1.0 };
                (e, e)
            }
            (Cell::Missing, _) => {
                return Err(Error::arg(format!("plan cell ({r}, {a}) is missing in the original")));
            }
            (_, Cell::Missing) => return Err(Error::arg(format!("cell ({r}, {a}) was not imputed"))),
            _ => return Err(Error::arg(format!("cell ({r}, {a}) has mismatched types"))),
        };
        per_pattern[r] += err;
        raw_per_pattern[r] += raw;
        per_attr[a] += err;
    }
    Ok(ErrorReport {
        average_error: per_pattern.iter().sum::<f64>() / n as f64,
        raw_average_error: raw_per_pattern.iter().sum::<f64>() / n as f64,
        per_pattern_error: per_pattern,
        per_attribute_error: per_attr,
        cells_scored: plan.removed.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub p: f64,
    pub test: SignedRankTest,
}

/// Rounds onto a 1e-9 grid so near-identical scores count as ties.
fn tie_round(x: f64) -> f64 {
    (x * 1e9).round()
}

/// Win/tie/loss counts of `a` against `b` where lower is better, with a
/// one-sided signed-ranks p-value for "`a` is lower".
pub fn compare_pairwise(a: &[f64], b: &[f64]) -> Result<PairwiseComparison> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut out = (0, 0, 0);
    let mut diffs = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (tie_round(x), tie_round(y));
        if x < y {
            out.0 += 1;
        } else if x == y {
            out.1 += 1;
        } else {
            out.2 += 1;
        }
        diffs.push((y - x) * 1e-9);
    }
    let test = wilcoxon_greater(&diffs);
    Ok(PairwiseComparison {
        wins: out.0,
        ties: out.1,
        losses: out.2,
        p: test.p_value,
        test,
    })
}

/// A named family of imputer settings; best-of-grid picks one per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub name: String,
    pub specs: Vec<Method>,
}

impl Grid {
    /// Parses spec strings; the entry `"paper"` expands to the published
    /// grid for `name`.
    pub fn parse(name: &str, specs: &[String]) -> Result<Self> {
        let mut out = Vec::new();
        for s in specs {
            if s == "paper" {
                out.extend(Method::paper_grid(name)?);
            } else {
                out.push(s.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::arg(format!("grid '{name}' is empty")));
        }
        Ok(Grid {
            name: name.to_string(),
            specs: out,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    /// Optional JSON schema file.
    #[serde(default)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEntry {
    pub name: String,
    pub specs: Vec<String>,
}

/// Declarative description of a sweep, as read from a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub datasets: Vec<DatasetEntry>,
    pub u_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub grids: Vec<GridEntry>,
    /// Method the others are compared against in the summary.
    #[serde(default = "default_reference")]
    pub reference: String,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub train: Option<crate::trainer::TrainConfig>,
}

fn default_reference() -> String {
    "ubp".into()
}

impl SweepConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Loads every dataset, resolving relative paths against `base`.
    pub fn load_datasets(&self, base: &Path) -> Result<Vec<(String, Dataset)>> {
        self.datasets
            .iter()
            .map(|e| {
                let schema = e
                    .schema
                    .as_ref()
                    .map(|p| crate::dataset::load_schema(base.join(p)))
                    .transpose()?;
                let ds = Dataset::load(base.join(&e.path), schema.as_deref(), &LoadOptions::default())?;
                Ok((e.name.clone(), ds))
            })
            .collect()
    }

    pub fn grids(&self) -> Result<Vec<Grid>> {
        self.grids.iter().map(|g| Grid::parse(&g.name, &g.specs)).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` or 0 uses rayon's default.
    pub workers: Option<usize>,
    pub impute: ImputeOptions,
}

/// One `(dataset, u, seed, spec)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub dataset: String,
    pub u: f64,
    pub seed: u64,
    pub method: String,
    pub spec: String,
    pub report: Option<ErrorReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestOfGrid {
    pub dataset: String,
    pub u: f64,
    pub method: String,
    pub spec: String,
    /// Average error of the chosen spec, averaged over seeds.
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub u: f64,
    pub reference: String,
    pub competitor: String,
    pub datasets: usize,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub best_of_grid: Vec<BestOfGrid>,
}

impl SweepResult {
    pub fn best(&self, dataset: &str, u: f64, method: &str) -> Option<&BestOfGrid> {
        self.best_of_grid
            .iter()
            .find(|b| b.dataset == dataset && b.u == u && b.method == method)
    }

    /// Compares `reference` against `competitor` over the datasets where both
    /// have a best-of-grid score at sparsity `u`.
    pub fn pairwise(&self, u: f64, reference: &str, competitor: &str) -> Result<PairwiseSummary> {
        let mut datasets: Vec<&str> = Vec::new();
        for b in &self.best_of_grid {
            if !datasets.contains(&b.dataset.as_str()) {
                datasets.push(&b.dataset);
            }
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for ds in &datasets {
            if let (Some(x), Some(y)) = (self.best(ds, u, reference), self.best(ds, u, competitor)) {
                a.push(x.mean_error);
                b.push(y.mean_error);
            }
        }
        let c = compare_pairwise(&a, &b)?;
        Ok(PairwiseSummary {
            u,
            reference: reference.to_string(),
            competitor: competitor.to_string(),
            datasets: a.len(),
            wins: c.wins,
            ties: c.ties,
            losses: c.losses,
            p: c.p,
        })
    }

    /// Every comparison of `reference` with the other methods, per sparsity.
    pub fn summary(&self, reference: &str) -> Result<SweepSummary> {
        let mut us: Vec<f64> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        for b in &self.best_of_grid {
            if !us.contains(&b.u) {
                us.push(b.u);
            }
            if !methods.contains(&b.method.as_str()) {
                methods.push(&b.method);
            }
        }
        let mut pairwise = Vec::new();
        if methods.contains(&reference) {
            for &u in &us {
                for m in methods.iter().filter(|m| **m != reference) {
                    pairwise.push(self.pairwise(u, reference, m)?);
                }
            }
        }
        Ok(SweepSummary {
            best_of_grid: self.best_of_grid.clone(),
            pairwise,
        })
    }

    /// `dataset,u,seed,method,spec,avg_error,cells_scored`; failed runs
    /// leave the score columns empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["dataset", "u", "seed", "method", "spec", "avg_error", "cells_scored"])?;
        for r in &self.records {
            let (avg, cells) = match &r.report {
                Some(rep) => (rep.average_error.to_string(), rep.cells_scored.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                r.dataset.as_str(),
                &r.u.to_string(),
                &r.seed.to_string(),
                &r.method,
                &r.spec,
                &avg,
                &cells,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Best-of-grid error against sparsity, one gnuplot data block per
    /// dataset with a column per method.
    pub fn write_curves_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut datasets: Vec<&str> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        let mut us: Vec<f64> = Vec::new();
        for b in &self.best_of_grid {
            if !datasets.contains(&b.dataset.as_str()) {
                datasets.push(&b.dataset);
            }
            if !methods.contains(&b.method.as_str()) {
                methods.push(&b.method);
            }
            if !us.contains(&b.u) {
                us.push(b.u);
            }
        }
        us.sort_by(f64::total_cmp);
        for (i, ds) in datasets.iter().enumerate() {
            if i > 0 {
                writeln!(w, "\n")?;
            }
            writeln!(w, "# {ds}")?;
            writeln!(w, "u\t{}", methods.join("\t"))?;
            for &u in &us {
                let cols: Vec<String> = methods
                    .iter()
                    .map(|m| self.best(ds, u, m).map_or("NaN".to_string(), |b| b.mean_error.to_string()))
                    .collect();
                writeln!(w, "{u}\t{}", cols.join("\t"))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub best_of_grid: Vec<BestOfGrid>,
    pub pairwise: Vec<PairwiseSummary>,
}

/// Corrupts, imputes and scores every `(dataset, u, seed, spec)`
/// combination. Seeds are bound to cells, so results do not depend on the
/// number of workers. A failing run is recorded with its error and skipped
/// when choosing the best of a grid.
pub fn sweep(
    datasets: &[(String, Dataset)],
    u_levels: &[f64],
    seeds: &[u64],
    grids: &[Grid],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if datasets.is_empty() || u_levels.is_empty() || seeds.is_empty() || grids.is_empty() {
        return Err(Error::arg("sweep needs at least one dataset, sparsity, seed and grid"));
    }
    let mut corrupted = Vec::new();
    for (di, (_, ds)) in datasets.iter().enumerate() {
        for &u in u_levels {
            for &seed in seeds {
                corrupted.push(((di, u, seed), corrupt_mcar(ds, u, seed)?));
            }
        }
    }
    let mut jobs = Vec::new();
    for (ci, _) in corrupted.iter().enumerate() {
        for (gi, grid) in grids.iter().enumerate() {
            for si in 0..grid.specs.len() {
                jobs.push((ci, gi, si));
            }
        }
    }

    let run = |&(ci, gi, si): &(usize, usize, usize)| -> SweepRecord {
        let ((di, u, seed), (corrupt, plan)) = &corrupted[ci];
        let (name, original) = &datasets[*di];
        let method = &grids[gi].specs[si];
        let outcome = impute_with(corrupt, &ImputerSpec::new(method.clone(), *seed), &opts.impute, &mut |_| {})
            .and_then(|res| score(original, &res.completed, plan));
        let (report, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        SweepRecord {
            dataset: name.clone(),
            u: *u,
            seed: *seed,
            method: grids[gi].name.clone(),
            spec: method.to_string(),
            report,
            error,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::State(e.to_string()))?;
    let records: Vec<SweepRecord> = pool.install(|| jobs.par_iter().map(run).collect());

    let mut best_of_grid = Vec::new();
    for (name, _) in datasets {
        for &u in u_levels {
            for grid in grids {
                let mut best: Option<(String, f64)> = None;
                for spec in &grid.specs {
                    let spec = spec.to_string();
                    let scores: Vec<Option<f64>> = records
                        .iter()
                        .filter(|r| &r.dataset == name && r.u == u && r.method == grid.name && r.spec == spec)
                        .map(|r| r.report.as_ref().map(|rep| rep.average_error))
                        .collect();
                    if scores.is_empty() || scores.iter().any(Option::is_none) {
                        continue;
                    }
                    let mean = scores.iter().flatten().sum::<f64>() / scores.len() as f64;
                    if best.as_ref().is_none_or(|(_, b)| mean < *b) {
                        best = Some((spec, mean));
                    }
                }
                if let Some((spec, mean_error)) = best {
                    best_of_grid.push(BestOfGrid {
                        dataset: name.clone(),
                        u,
                        method: grid.name.clone(),
                        spec,
                        mean_error,
                    });
                }
            }
        }
    }
    Ok(SweepResult { records, best_of_grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttributeSpec;

    fn mixed() -> Dataset {
        Dataset::new(
            vec![
                AttributeSpec::continuous("x", 0.0, 1.0),
                AttributeSpec::nominal("c", ["a", "b"]),
            ],
            vec![
                vec![Cell::Real(0.8), Cell::Category(0)],
                vec![Cell::Real(0.2), Cell::Category(1)],
                vec![Cell::Real(0.4), Cell::Category(1)],
            ],
        )
        .unwrap()
    }

    fn plan(removed: Vec<(usize, usize)>) -> CorruptionPlan {
        CorruptionPlan { u: 30.0, seed: 0, removed }
    }

    #[test]
    fn perfect_imputation_scores_zero() {
        let ds = mixed();
        let rep = score(&ds, &ds, &plan(vec![(0, 0), (1, 1)])).unwrap();
        assert_eq!(rep.average_error, 0.0);
        assert_eq!(rep.cells_scored, 2);
    }

    #[test]
    fn hamming_error_on_a_wrong_category() {
        let ds = mixed();
        let mut imp = ds.clone();
        imp.set_cell(1, 1, Cell::Category(0)).unwrap();
        let rep = score(&ds, &imp, &plan(vec![(1, 1)])).unwrap();
        assert_eq!(rep.per_pattern_error, vec![0.0, 1.0, 0.0]);
        assert_eq!(rep.average_error, 1.0 / 3.0);
        assert_eq!(rep.per_attribute_error, vec![0.0, 1.0]);
    }

    #[test]
    fn squared_error_on_a_continuous_cell() {
        let ds = mixed();
        let mut imp = ds.clone();
        imp.set_cell(0, 0, Cell::Real(0.5)).unwrap();
        let rep = score(&ds, &imp, &plan(vec![(0, 0)])).unwrap();
        assert!((rep.per_pattern_error[0] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let ds = mixed();
        let other = Dataset::from_reals(&["x", "y"], &vec![vec![Some(1.0), Some(1.0)]; 3]).unwrap();
        assert!(score(&ds, &other, &plan(vec![])).is_err());
    }

    #[test]
    fn pairwise_counts_and_symmetry() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.2, 0.2, 0.1, 0.5];
        let ab = compare_pairwise(&a, &b).unwrap();
        let ba = compare_pairwise(&b, &a).unwrap();
        assert_eq!((ab.wins, ab.ties, ab.losses), (2, 1, 1));
        assert_eq!(ab.wins, ba.losses);
        assert!(compare_pairwise(&a, &b[..3]).is_err());
    }

    #[test]
    fn identical_lists_tie_everywhere() {
        let a = [0.5, 0.25, 0.125];
        let c = compare_pairwise(&a, &a).unwrap();
        assert_eq!((c.wins, c.ties, c.losses), (0, 3, 0));
        assert_eq!(c.p, 1.0);
    }

    #[test]
    fn tiny_differences_are_ties() {
        let c = compare_pairwise(&[0.1], &[0.1 + 1e-12]).unwrap();
        assert_eq!(c.ties, 1);
    }

    #[test]
    fn sweep_averages_seeds_and_picks_best() {
        let ds = Dataset::from_reals(
            &["a", "b", "c"],
            &(0..12)
                .map(|i| vec![Some(i as f64), Some((i * i) as f64), Some((12 - i) as f64)])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let datasets = vec![("toy".to_string(), ds)];
        let grids = vec![
            Grid::parse("baseline", &["baseline".into()]).unwrap(),
            Grid::parse("ibi", &["ibi:k=1".into(), "ibi:k=3".into()]).unwrap(),
        ];
        let res = sweep(&datasets, &[30.0], &[1, 2], &grids, &SweepOptions::default()).unwrap();
        assert_eq!(res.records.len(), 6);
        let bl: Vec<f64> = res
            .records
            .iter()
            .filter(|r| r.method == "baseline")
            .map(|r| r.report.as_ref().unwrap().average_error)
            .collect();
        let best = res.best("toy", 30.0, "baseline").unwrap();
        assert_eq!(best.mean_error, (bl[0] + bl[1]) / 2.0);

        let mean_of = |spec: &str| {
            let v: Vec<f64> = res
                .records
                .iter()
                .filter(|r| r.spec == spec)
                .map(|r| r.report.as_ref().unwrap().average_error)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let ibi = res.best("toy", 30.0, "ibi").unwrap();
        assert_eq!(ibi.mean_error, mean_of("ibi:k=1").min(mean_of("ibi:k=3")));
    }

    #[test]
    fn best_of_grid_ties_keep_the_first_spec() {
        let ds = Dataset::from_reals(&["a", "b"], &(0..6).map(|i| vec![Some(i as f64), Some(1.0)]).collect::<Vec<_>>()).unwrap();
        let grids = vec![Grid::parse("bl", &["baseline".into(), "bl".into()]).unwrap()];
        let res = sweep(&[("d".into(), ds)], &[30.0], &[4], &grids, &SweepOptions::default()).unwrap();
        assert_eq!(res.best_of_grid.len(), 1);
        assert_eq!(res.best_of_grid[0].spec, "baseline");
    }

    #[test]
    fn failed_runs_are_recorded_not_fatal() {
        let ds = Dataset::from_reals(&["a", "b"], &(0..6).map(|i| vec![Some(i as f64), Some(2.0 * i as f64)]).collect::<Vec<_>>()).unwrap();
        let grids = vec![Grid::parse("mf", &["mf:t=5".into()]).unwrap()];
        let res = sweep(&[("d".into(), ds)], &[30.0], &[1], &grids, &SweepOptions::default()).unwrap();
        assert!(res.records[0].error.is_some());
        assert!(res.best_of_grid.is_empty());
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",,"));
    }
}
