//! JSON-configured experiments on the scalar toy problem and on discrete
//! verification models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{ProposalSequence, State, TargetDensity};
use crate::diagnostics::{averaged_metrics, CsvRow, RunPlan};
use crate::discrete::{DiscreteModel, DiscreteProposal};
use crate::error::{Error, Result};
use crate::samplers::{run_chain, ChainTrace, MultiPointConfig, Sampler, Scheme};
use crate::toy::{BimodalQuartic, GaussianTarget, WeightedMeanGaussian};
use crate::verification::{balance_flows, enumerate_kernel, BalanceFlow};
use crate::weights::{LambdaKind, WeightFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    BimodalQuartic,
    Gaussian { mean: f64, variance: f64 },
}

impl TargetSpec {
    pub fn build(&self) -> Result<Arc<dyn TargetDensity<f64>>> {
        match *self {
            TargetSpec::BimodalQuartic => Ok(Arc::new(BimodalQuartic)),
            TargetSpec::Gaussian { mean, variance } => {
                if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
                    return Err(Error::Config(format!("invalid gaussian target ({mean}, {variance})")));
                }
                Ok(Arc::new(GaussianTarget { mean, variance }))
            }
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            TargetSpec::BimodalQuartic => BimodalQuartic.log_density(&x),
            TargetSpec::Gaussian { mean, variance } => GaussianTarget { mean, variance }.log_density(&x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProposalSpec {
    WeightedMeanGaussian { sigma2: f64, gamma1: f64, gamma2: f64 },
}

impl ProposalSpec {
    pub fn build(&self) -> Result<WeightedMeanGaussian> {
        match *self {
            ProposalSpec::WeightedMeanGaussian { sigma2, gamma1, gamma2 } => {
                WeightedMeanGaussian::new(sigma2, gamma1, gamma2)
            }
        }
    }
}

/// Weight family by id plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    W1 { theta: f64 },
    W2,
    W3,
    RatioTheta { theta: f64 },
    RatioProduct,
    Lambda { lambda: LambdaKind },
}

impl WeightSpec {
    pub fn build<S: State>(&self) -> Result<WeightFamily<S>> {
        let finite = |theta: f64| {
            if theta.is_finite() {
                Ok(theta)
            } else {
                Err(Error::Config(format!("theta must be finite, got {theta}")))
            }
        };
        Ok(match self {
            WeightSpec::W1 { theta } => WeightFamily::TargetPower { theta: finite(*theta)? },
            WeightSpec::W2 => WeightFamily::TargetProduct,
            WeightSpec::W3 => WeightFamily::InverseProposal,
            WeightSpec::RatioTheta { theta } => WeightFamily::PathRatio { theta: finite(*theta)? },
            WeightSpec::RatioProduct => WeightFamily::PathRatioProduct,
            WeightSpec::Lambda { lambda } => WeightFamily::lambda(lambda.clone()),
        })
    }

    /// Parses a command-line id; `theta` fills the families that take one.
    pub fn from_id(id: &str, theta: f64) -> Result<Self> {
        Ok(match id {
            "w1" => WeightSpec::W1 { theta },
            "w2" => WeightSpec::W2,
            "w3" => WeightSpec::W3,
            "ratio-theta" => WeightSpec::RatioTheta { theta },
            "ratio-product" => WeightSpec::RatioProduct,
            "lambda" | "lambda-unit" => WeightSpec::Lambda { lambda: LambdaKind::Unit },
            "lambda-inverse-pair" => WeightSpec::Lambda { lambda: LambdaKind::InverseProposalPair },
            other => return Err(Error::Config(format!("unknown weight family '{other}'"))),
        })
    }

    /// Column value in the metrics CSV.
    pub fn label(&self) -> String {
        self.build::<f64>().map(|w| w.label()).unwrap_or_else(|_| "invalid".into())
    }
}

/// One curve of an experiment: a sampler paired with a weight family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub sampler: Scheme,
    pub weights: WeightSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub proposal: ProposalSpec,
    pub series: Vec<Series>,
    pub n_list: Vec<usize>,
    pub steps: usize,
    pub burn_in: usize,
    pub runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub initial_state: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    /// The bimodal study: the generic sampler with three weight families and
    /// the independent-candidate sampler with two, N from 1 to 100.
    pub fn bimodal_study() -> Self {
        let mut series = Vec::new();
        for weights in [WeightSpec::W1 { theta: 0.5 }, WeightSpec::W2, WeightSpec::W3] {
            series.push(Series { sampler: Scheme::Generic, weights });
        }
        // the product weight is not meaningful for independent candidates
        for weights in [WeightSpec::W1 { theta: 0.5 }, WeightSpec::W3] {
            series.push(Series { sampler: Scheme::Iid, weights });
        }
        Self {
            target: TargetSpec::BimodalQuartic,
            proposal: ProposalSpec::WeightedMeanGaussian { sigma2: 1.0, gamma1: 0.2, gamma2: 0.8 },
            series,
            n_list: vec![1, 2, 5, 10, 20, 50, 100],
            steps: 20_000,
            burn_in: 2_000,
            runs: 200,
            seed: 20_100_101,
            initial_state: 0.0,
            out: Some("fig1.csv".into()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.target.build()?;
        self.proposal.build()?;
        if self.series.is_empty() {
            return Err(Error::Config("at least one series is required".into()));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::Config("n_list must be non-empty with every N >= 1".into()));
        }
        if self.steps <= self.burn_in {
            return Err(Error::Config(format!("steps {} must exceed burn_in {}", self.steps, self.burn_in)));
        }
        if self.steps - self.burn_in < 3 {
            return Err(Error::Config("need at least 3 post-burn-in steps".into()));
        }
        if self.runs < 2 {
            return Err(Error::Config("runs must be at least 2".into()));
        }
        if !self.initial_state.is_finite() {
            return Err(Error::Config("initial_state must be finite".into()));
        }
        for s in &self.series {
            self.sampler(s, 1)?;
        }
        Ok(())
    }

    pub fn sampler(&self, series: &Series, n: usize) -> Result<Sampler<f64>> {
        let cfg = MultiPointConfig::new(
            n,
            self.target.build()?,
            Arc::new(self.proposal.build()?) as Arc<dyn ProposalSequence<f64>>,
            series.weights.build()?,
        )?;
        Sampler::new(series.sampler, cfg)
    }

    pub fn plan(&self) -> RunPlan {
        RunPlan { steps: self.steps, burn_in: self.burn_in, x0: self.initial_state }
    }
}

/// One CSV row per (series, N) cell, in configuration order. Every cell
/// uses replica seeds `seed, seed + 1, …`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CsvRow>> {
    run_experiment_with(cfg, |_| {})
}

/// As [`run_experiment`], calling `progress` after each finished cell.
pub fn run_experiment_with(cfg: &ExperimentConfig, mut progress: impl FnMut(&CsvRow)) -> Result<Vec<CsvRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.series.len() * cfg.n_list.len());
    for series in &cfg.series {
        for &n in &cfg.n_list {
            let sampler = cfg.sampler(series, n)?;
            let metrics = averaged_metrics(&sampler, cfg.plan(), cfg.runs, cfg.seed)?;
            let row = CsvRow { sampler: series.sampler.id().into(), weights: series.weights.label(), n, metrics };
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// A single chain of `series` with `n` tries, thinning 1.
pub fn sample_chain(cfg: &ExperimentConfig, series: &Series, n: usize, seed: u64) -> Result<ChainTrace<f64>> {
    let sampler = cfg.sampler(series, n)?;
    run_chain(&sampler, cfg.initial_state, cfg.steps, cfg.burn_in, 1, seed)
}

/// `step,state,accepted,alpha` rows of a recorded chain.
pub fn trace_csv(trace: &ChainTrace<f64>) -> String {
    let mut s = String::from("step,state,accepted,alpha\n");
    for (i, ((x, a), alpha)) in trace.states.iter().zip(&trace.accepted).zip(&trace.alphas).enumerate() {
        s.push_str(&format!("{i},{x},{},{alpha}\n", u8::from(*a)));
    }
    s
}

/// Target masses and the discrete proposal of a verification model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteModelSpec {
    pub masses: Vec<f64>,
    pub proposal: DiscreteProposal,
}

/// Exhaustive detailed-balance check of several kernels on one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    pub model: DiscreteModelSpec,
    pub series: Vec<Series>,
    pub n_list: Vec<usize>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-12
}

/// Result of one enumerated kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResult {
    pub sampler: Scheme,
    pub weights: String,
    pub n: usize,
    pub max_residual: f64,
    pub flows: Vec<BalanceFlow>,
}

impl BalanceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model()?;
        if cfg.series.is_empty() || cfg.n_list.is_empty() || cfg.n_list.contains(&0) {
            return Err(Error::Config("balance config needs series and a non-empty n_list of N >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<DiscreteModel> {
        DiscreteModel::from_masses(&self.model.masses, self.model.proposal.clone())
    }

    pub fn run(&self) -> Result<Vec<BalanceResult>> {
        let model = self.model()?;
        let mut out = Vec::new();
        for series in &self.series {
            let weights: WeightFamily<usize> = series.weights.build()?;
            for &n in &self.n_list {
                let kernel = enumerate_kernel(&model, &weights, n, series.sampler)?;
                let flows = balance_flows(&kernel, model.log_p())?;
                let max_residual = flows.iter().map(|f| f.residual).fold(0.0, f64::max);
                out.push(BalanceResult { sampler: series.sampler, weights: weights.label(), n, max_residual, flows });
            }
        }
        Ok(out)
    }
}

/// `x,y,forward_flow,backward_flow,residual` rows of one or more results.
pub fn residuals_csv(results: &[BalanceResult]) -> String {
    let mut s = String::from("x,y,forward_flow,backward_flow,residual\n");
    for r in results {
        for f in &r.flows {
            s.push_str(&format!("{},{},{},{},{}\n", f.x, f.y, f.forward_flow, f.backward_flow, f.residual));
        }
    }
    s
}
