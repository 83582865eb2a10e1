//! Python bindings: BRDF maths, dataset generation and checkpoint evaluation.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use reflectance::brdf::{self, Direction, Metric, PerceptualBrdf, WardBrdf};
use reflectance::eval::{evaluate, model_report, prepare_scenes, Predictor};
use reflectance::math::Vec3;
use reflectance::synth::{generate_dataset, Dataset, DatasetConfig, Split};
use reflectance::training::TrainedModel;

fn err(e: reflectance::Error) -> PyErr {
    match e {
        reflectance::Error::Io(_) | reflectance::Error::Dataset(_) | reflectance::Error::Checkpoint(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Round-trips through JSON so Python gets plain dicts and lists.
fn to_py(py: Python<'_>, v: &impl serde::Serialize) -> PyResult<PyObject> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (s,))?.unbind())
}

fn ward(rho_d: [f64; 3], rho_s: f64, alpha: f64) -> PyResult<WardBrdf> {
    WardBrdf::new(rho_d, rho_s, alpha).map_err(err)
}

fn direction(v: [f64; 3]) -> PyResult<Direction> {
    Direction::normalize(Vec3::new(v[0], v[1], v[2])).map_err(err)
}

/// Ward reflectance for one pair of local-frame directions (normal is +z).
#[pyfunction]
fn ward_eval(rho_d: [f64; 3], rho_s: f64, alpha: f64, wi: [f64; 3], wo: [f64; 3]) -> PyResult<[f64; 3]> {
    brdf::eval_ward(direction(wi)?, direction(wo)?, &ward(rho_d, rho_s, alpha)?).map_err(err)
}

/// `(L, a, b, c, d)` for a Ward BRDF.
#[pyfunction]
fn to_perceptual(rho_d: [f64; 3], rho_s: f64, alpha: f64) -> PyResult<[f64; 5]> {
    Ok(brdf::to_perceptual(&ward(rho_d, rho_s, alpha)?).to_vec())
}

/// Inverse of `to_perceptual`: `((rho_d, rho_s, alpha), clamped)`.
#[pyfunction]
fn from_perceptual(p: [f64; 5]) -> (([f64; 3], f64, f64), bool) {
    let r = brdf::from_perceptual(&PerceptualBrdf::from_vec(&p));
    ((r.brdf.rho_d, r.brdf.rho_s, r.brdf.alpha), r.clamped)
}

/// Squared distance between two BRDFs given as `[r, g, b, rho_s, alpha]`.
#[pyfunction]
#[pyo3(signature = (a, b, metric = "rmse1"))]
fn distance(a: [f64; 5], b: [f64; 5], metric: &str) -> PyResult<f64> {
    let m: Metric = metric.parse().map_err(err)?;
    Ok(brdf::brdf_distance(&WardBrdf::from_vec(&a), &WardBrdf::from_vec(&b), m))
}

/// Render a dataset to `root`; returns the manifest.
#[pyfunction]
#[pyo3(signature = (root, scenes = 20, views = 10, seed = 0))]
fn gen_data(py: Python<'_>, root: PathBuf, scenes: usize, views: usize, seed: u64) -> PyResult<PyObject> {
    let cfg = DatasetConfig { scenes, views, seed, ..DatasetConfig::default() };
    let m = py.allow_threads(|| generate_dataset(&cfg, &root)).map_err(err)?;
    to_py(py, &m)
}

/// Evaluate a checkpoint on a dataset split.
#[pyfunction]
#[pyo3(signature = (checkpoint, data, split = "validation", seed = 0))]
fn eval_checkpoint(py: Python<'_>, checkpoint: PathBuf, data: PathBuf, split: &str, seed: u64) -> PyResult<PyObject> {
    let split = match split {
        "train" => Split::Train,
        "validation" => Split::Validation,
        other => return Err(PyValueError::new_err(format!("unknown split '{other}'"))),
    };
    let report = py
        .allow_threads(|| {
            let model = TrainedModel::<f64>::load(&checkpoint)?;
            let ds = Dataset::open(&data)?;
            let scenes = prepare_scenes(&ds, split, Some(&model.network.architecture()))?;
            evaluate(Predictor::Model(&model), &scenes, seed)
        })
        .map_err(err)?;
    to_py(py, &report)
}

/// Parameter count, file size and forward timing of a checkpoint.
#[pyfunction]
fn report(py: Python<'_>, checkpoint: PathBuf) -> PyResult<PyObject> {
    let r = py.allow_threads(|| model_report(&checkpoint)).map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
fn reflectance_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ward_eval, m)?)?;
    m.add_function(wrap_pyfunction!(to_perceptual, m)?)?;
    m.add_function(wrap_pyfunction!(from_perceptual, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(gen_data, m)?)?;
    m.add_function(wrap_pyfunction!(eval_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    Ok(())
}
