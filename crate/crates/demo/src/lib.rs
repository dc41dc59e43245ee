//! Browser bindings for three interactive views: a chain histogram against
//! the bimodal target, acceptance and correlation curves over the number of
//! tries, and an exhaustive detailed-balance check on a random finite model.
//!
//! Every export has a plain Rust twin returning [`multipoint::Result`], which
//! is what the native tests exercise.

use multipoint::diagnostics::{acceptance_rate, bin_masses, lag1_correlation, normalized_histogram};
use multipoint::discrete::DiscreteModel;
use multipoint::experiment::{run_experiment, sample_chain, ExperimentConfig, Series, WeightSpec};
use multipoint::verification::{check_detailed_balance, enumerate_kernel, enumeration_terms, stationary_distribution};
use multipoint::{Error, Result, Scheme};
use wasm_bindgen::prelude::*;

/// Largest enumeration the page may request, to keep the tab responsive.
const DEMO_TERMS: u128 = 20_000_000;

fn scheme(id: &str) -> Result<Scheme> {
    Scheme::from_id(id).ok_or_else(|| Error::Config(format!("unknown sampler '{id}'")))
}

fn study(sampler: &str, weights: &str, theta: f64, steps: usize, runs: usize, seed: u64) -> Result<ExperimentConfig> {
    let series = Series { sampler: scheme(sampler)?, weights: WeightSpec::from_id(weights, theta)? };
    let cfg = ExperimentConfig {
        series: vec![series],
        steps,
        burn_in: steps / 10,
        runs,
        seed,
        out: None,
        ..ExperimentConfig::bimodal_study()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Chain histogram next to the exact target bin densities.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Overlay {
    edges: Vec<f64>,
    density: Vec<f64>,
    target: Vec<f64>,
    acceptance: f64,
    correlation: f64,
}

#[wasm_bindgen]
impl Overlay {
    /// `bins + 1` bin edges.
    #[wasm_bindgen(getter)]
    pub fn edges(&self) -> Vec<f64> {
        self.edges.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn acceptance(&self) -> f64 {
        self.acceptance
    }

    /// NaN when the chain never moved.
    #[wasm_bindgen(getter)]
    pub fn correlation(&self) -> f64 {
        self.correlation
    }
}

pub fn overlay(
    sampler: &str,
    weights: &str,
    theta: f64,
    n: usize,
    steps: usize,
    seed: u64,
    bins: usize,
) -> Result<Overlay> {
    let cfg = study(sampler, weights, theta, steps, 2, seed)?;
    let trace = sample_chain(&cfg, &cfg.series[0], n, seed)?;
    let (lo, hi) = (-4.0, 4.0);
    let hist = normalized_histogram(&trace.states, bins, lo, hi)?;
    let width = hist.width();
    let target = bin_masses(|x| cfg.target.log_density(x), bins, lo, hi, 16).into_iter().map(|m| m / width).collect();
    Ok(Overlay {
        edges: hist.edges(),
        density: hist.densities,
        target,
        acceptance: acceptance_rate(&trace.accepted)?,
        correlation: lag1_correlation(&trace.states)?.value().unwrap_or(f64::NAN),
    })
}

#[wasm_bindgen(js_name = overlay)]
pub fn overlay_js(
    sampler: &str,
    weights: &str,
    theta: f64,
    n: usize,
    steps: usize,
    seed: u32,
    bins: usize,
) -> std::result::Result<Overlay, JsError> {
    overlay(sampler, weights, theta, n, steps, seed.into(), bins).map_err(js)
}

/// Rows of `[N, accept_mean, accept_se, corr_mean, corr_se]`, flattened; an
/// undefined correlation is NaN.
pub fn metric_curve(
    sampler: &str,
    weights: &str,
    theta: f64,
    n_list: &[u32],
    steps: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut cfg = study(sampler, weights, theta, steps, runs, seed)?;
    cfg.n_list = n_list.iter().map(|&n| n as usize).collect();
    cfg.validate()?;
    let mut out = Vec::with_capacity(5 * n_list.len());
    for row in run_experiment(&cfg)? {
        let m = row.metrics;
        let (c, se) = m.correlation.map_or((f64::NAN, f64::NAN), |c| (c.mean, c.se));
        out.extend([row.n as f64, m.acceptance.mean, m.acceptance.se, c, se]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = metricCurve)]
pub fn metric_curve_js(
    sampler: &str,
    weights: &str,
    theta: f64,
    n_list: Vec<u32>,
    steps: usize,
    runs: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    metric_curve(sampler, weights, theta, &n_list, steps, runs, seed.into()).map_err(js)
}

/// Enumerated kernel of a random model with its balance diagnostics.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct BalanceReport {
    states: usize,
    kernel: Vec<f64>,
    target: Vec<f64>,
    stationary: Vec<f64>,
    max_residual: f64,
    row_sum_error: f64,
}

#[wasm_bindgen]
impl BalanceReport {
    #[wasm_bindgen(getter)]
    pub fn states(&self) -> usize {
        self.states
    }

    /// Row-major transition matrix.
    #[wasm_bindgen(getter)]
    pub fn kernel(&self) -> Vec<f64> {
        self.kernel.clone()
    }

    /// Normalized target masses.
    #[wasm_bindgen(getter)]
    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn stationary(&self) -> Vec<f64> {
        self.stationary.clone()
    }

    #[wasm_bindgen(getter, js_name = maxResidual)]
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    #[wasm_bindgen(getter, js_name = rowSumError)]
    pub fn row_sum_error(&self) -> f64 {
        self.row_sum_error
    }
}

pub fn verify_random(
    sampler: &str,
    weights: &str,
    theta: f64,
    states: usize,
    n: usize,
    seed: u64,
) -> Result<BalanceReport> {
    let scheme = scheme(sampler)?;
    if states < 2 {
        return Err(Error::Argument("need at least two states".into()));
    }
    let terms = enumeration_terms(states, n, scheme);
    if terms > DEMO_TERMS {
        return Err(Error::Argument(format!("{terms} enumeration terms is too many for the demo")));
    }
    let model = DiscreteModel::random(states, seed);
    let kernel = enumerate_kernel(&model, &WeightSpec::from_id(weights, theta)?.build()?, n, scheme)?;
    Ok(BalanceReport {
        states,
        kernel: (0..states).flat_map(|x| kernel.row(x).to_vec()).collect(),
        target: model.normalized_target(),
        stationary: stationary_distribution(&kernel)?,
        max_residual: check_detailed_balance(&kernel, model.log_p())?,
        row_sum_error: kernel.max_row_sum_error(),
    })
}

#[wasm_bindgen(js_name = verifyRandom)]
pub fn verify_random_js(
    sampler: &str,
    weights: &str,
    theta: f64,
    states: usize,
    n: usize,
    seed: u32,
) -> std::result::Result<BalanceReport, JsError> {
    verify_random(sampler, weights, theta, states, n, seed.into()).map_err(js)
}
