//! Python bindings: datasets, MCAR corruption, every imputer, scoring,
//! trained-model inspection and the pairwise comparison test.

use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ubp_core::dataset::{load_schema, parse_schema, MISSING_TOKEN};
use ubp_core::imputers::impute_with;
use ubp_core::{Cell, Error, ImputeOptions, ImputerSpec, LoadOptions, Method, TrainConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Argument(_) | Error::Schema(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A table of continuous and nominal attributes with missing cells.
#[pyclass(module = "ubp", from_py_object)]
#[derive(Clone)]
pub struct Dataset {
    inner: ubp_core::Dataset,
}

#[pymethods]
impl Dataset {
    /// Reads a CSV file; `schema` is an optional JSON schema path.
    #[staticmethod]
    #[pyo3(signature = (path, schema=None))]
    fn load(path: &str, schema: Option<&str>) -> PyResult<Self> {
        let schema = schema.map(load_schema).transpose().map_err(py_err)?;
        let inner = ubp_core::Dataset::load(path, schema.as_deref(), &LoadOptions::default()).map_err(py_err)?;
        Ok(Dataset { inner })
    }

    /// Parses CSV text; `schema` is an optional JSON schema string.
    #[staticmethod]
    #[pyo3(signature = (text, schema=None))]
    fn from_csv(text: &str, schema: Option<&str>) -> PyResult<Self> {
        let schema = schema.map(parse_schema).transpose().map_err(py_err)?;
        let inner = ubp_core::Dataset::from_csv_str(text, schema.as_deref(), &LoadOptions::default()).map_err(py_err)?;
        Ok(Dataset { inner })
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf, MISSING_TOKEN).map_err(py_err)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path, MISSING_TOKEN).map_err(py_err)
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_attrs(&self) -> usize {
        self.inner.n_attrs()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.attrs().iter().map(|a| a.name.clone()).collect()
    }

    fn missing_count(&self) -> usize {
        self.inner.missing_count()
    }

    /// The value at `(row, attr)`: a float, a category label, or None.
    fn cell<'py>(&self, py: Python<'py>, row: usize, attr: usize) -> PyResult<Bound<'py, PyAny>> {
        if row >= self.inner.n_rows() || attr >= self.inner.n_attrs() {
            return Err(PyIndexError::new_err(format!("cell ({row}, {attr}) out of range")));
        }
        Ok(match self.inner.cell(row, attr) {
            Cell::Missing => py.None().into_bound(py),
            Cell::Real(v) => v.into_pyobject(py)?.into_any(),
            Cell::Category(_) => self.inner.format_cell(row, attr, MISSING_TOKEN).into_pyobject(py)?.into_any(),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, attrs={}, missing={})",
            self.inner.n_rows(),
            self.inner.n_attrs(),
            self.inner.missing_count()
        )
    }
}

/// The cells removed by [`corrupt`].
#[pyclass(module = "ubp", from_py_object)]
#[derive(Clone)]
pub struct CorruptionPlan {
    inner: ubp_core::CorruptionPlan,
}

#[pymethods]
impl CorruptionPlan {
    #[getter]
    fn u(&self) -> f64 {
        self.inner.u
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn removed(&self) -> Vec<(usize, usize)> {
        self.inner.removed.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ubp_core::CorruptionPlan::from_json(text).map_err(py_err)?;
        Ok(CorruptionPlan { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.removed.len()
    }
}

#[pyclass(module = "ubp", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct ErrorReport {
    per_pattern_error: Vec<f64>,
    average_error: f64,
    per_attribute_error: Vec<f64>,
    cells_scored: usize,
    raw_average_error: f64,
}

#[pymethods]
impl ErrorReport {
    fn __repr__(&self) -> String {
        format!(
            "ErrorReport(average_error={}, cells_scored={})",
            self.average_error, self.cells_scored
        )
    }
}

/// Latent rows and decoder network fitted by `nlpca` or `ubp`.
#[pyclass(module = "ubp", from_py_object)]
#[derive(Clone)]
pub struct TrainedModel {
    inner: ubp_core::TrainedModel,
}

#[pymethods]
impl TrainedModel {
    #[getter]
    fn latent_dims(&self) -> usize {
        self.inner.latent.dims()
    }

    #[getter]
    fn outputs(&self) -> usize {
        self.inner.model.outputs()
    }

    /// Latent rows as a list of lists.
    fn latent(&self) -> Vec<Vec<f64>> {
        (0..self.inner.latent.n_rows())
            .map(|r| self.inner.latent.row(r).to_vec())
            .collect()
    }

    /// `(phase, epoch, rmse, eta)` for every training epoch.
    fn history(&self) -> Vec<(u8, usize, f64, f64)> {
        self.inner.history.iter().map(|e| (e.phase, e.epoch, e.rmse, e.eta)).collect()
    }

    /// Network outputs (encoded columns) for every row.
    fn reconstruct(&self) -> PyResult<Vec<Vec<f64>>> {
        let flat = self.inner.reconstruct().map_err(py_err)?;
        Ok(flat.chunks(self.inner.model.outputs().max(1)).map(<[f64]>::to_vec).collect())
    }

    /// Decodes a `steps x steps` grid over two latent dimensions. Returns
    /// `(latent, outputs)` pairs with the first dimension varying slowest.
    #[pyo3(signature = (dims=(0, 1), steps=10, bounds=None))]
    fn latent_grid(
        &self,
        dims: (usize, usize),
        steps: usize,
        bounds: Option<((f64, f64), (f64, f64))>,
    ) -> PyResult<Vec<(Vec<f64>, Vec<f64>)>> {
        let grid = self
            .inner
            .sample_latent_grid(dims, steps, bounds.map(|(a, b)| [a, b]))
            .map_err(py_err)?;
        Ok(grid.points.into_iter().map(|p| (p.latent, p.outputs)).collect())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| py_err(e.into()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| py_err(e.into()))?;
        Ok(TrainedModel { inner })
    }
}

/// Removes `round(u/100 * n * d)` known cells uniformly at random.
#[pyfunction]
#[pyo3(signature = (dataset, u, seed=0))]
fn corrupt(dataset: &Dataset, u: f64, seed: u64) -> PyResult<(Dataset, CorruptionPlan)> {
    let (ds, plan) = ubp_core::corrupt_mcar(&dataset.inner, u, seed).map_err(py_err)?;
    Ok((Dataset { inner: ds }, CorruptionPlan { inner: plan }))
}

/// Normalizes a method spec string such as `"ubp:t=2,hidden=8"`.
#[pyfunction]
fn parse_method(spec: &str) -> PyResult<String> {
    let m: Method = spec.parse().map_err(py_err)?;
    Ok(m.to_string())
}

/// Fills the missing cells of `dataset` with the method named by `method`.
/// Returns the completed dataset and, for `nlpca` and `ubp`, the trained
/// model. Trainer settings left as None keep their defaults.
#[pyfunction]
#[pyo3(signature = (
    dataset, method, seed=0, *, eta_start=None, eta_floor=None, gamma=None, lambda_=None,
    max_epochs=None, holdout_fraction=None, h_before_w=false, latent_init_std=None, progress=None
))]
#[allow(clippy::too_many_arguments)]
fn impute(
    py: Python<'_>,
    dataset: &Dataset,
    method: &str,
    seed: u64,
    eta_start: Option<f64>,
    eta_floor: Option<f64>,
    gamma: Option<f64>,
    lambda_: Option<f64>,
    max_epochs: Option<usize>,
    holdout_fraction: Option<f64>,
    h_before_w: bool,
    latent_init_std: Option<f64>,
    progress: Option<Py<PyAny>>,
) -> PyResult<(Dataset, Option<TrainedModel>)> {
    let method: Method = method.parse().map_err(py_err)?;
    let d = TrainConfig::default();
    let train = TrainConfig {
        eta_start: eta_start.unwrap_or(d.eta_start),
        eta_floor: eta_floor.unwrap_or(d.eta_floor),
        gamma: gamma.unwrap_or(d.gamma),
        lambda: lambda_.unwrap_or(d.lambda),
        max_epochs_per_phase: max_epochs.unwrap_or(d.max_epochs_per_phase),
        holdout_fraction: holdout_fraction.unwrap_or(d.holdout_fraction),
        h_before_w,
        latent_init_std: latent_init_std.unwrap_or(d.latent_init_std),
        ..d
    };
    train.validate().map_err(py_err)?;
    let spec = ImputerSpec::new(method, seed);
    let opts = ImputeOptions { train };
    let mut callback_error = None;
    let result = {
        let mut observer = |rec: &ubp_core::EpochRecord| {
            if let (Some(cb), None) = (&progress, &callback_error) {
                if let Err(e) = cb.call1(py, (rec.phase, rec.epoch, rec.rmse, rec.eta)) {
                    callback_error = Some(e);
                }
            }
        };
        impute_with(&dataset.inner, &spec, &opts, &mut observer).map_err(py_err)?
    };
    if let Some(e) = callback_error {
        return Err(e);
    }
    Ok((
        Dataset {
            inner: result.completed,
        },
        result.trained.map(|inner| TrainedModel { inner }),
    ))
}

/// Scores `imputed` against `original` on the cells listed in `plan`.
#[pyfunction]
fn score(original: &Dataset, imputed: &Dataset, plan: &CorruptionPlan) -> PyResult<ErrorReport> {
    let r = ubp_core::score(&original.inner, &imputed.inner, &plan.inner).map_err(py_err)?;
    Ok(ErrorReport {
        per_pattern_error: r.per_pattern_error,
        average_error: r.average_error,
        per_attribute_error: r.per_attribute_error,
        cells_scored: r.cells_scored,
        raw_average_error: r.raw_average_error,
    })
}

/// Wins, ties and losses of `a` against `b` (lower is better) and the
/// one-sided signed-ranks p-value for "`a` is lower".
#[pyfunction]
fn compare(a: Vec<f64>, b: Vec<f64>) -> PyResult<(usize, usize, usize, f64)> {
    let c = ubp_core::compare_pairwise(&a, &b).map_err(py_err)?;
    Ok((c.wins, c.ties, c.losses, c.p))
}

#[pymodule]
fn ubp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Dataset>()?;
    m.add_class::<CorruptionPlan>()?;
    m.add_class::<ErrorReport>()?;
    m.add_class::<TrainedModel>()?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_method, m)?)?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
