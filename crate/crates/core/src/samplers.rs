//! Step kernels and the chain runner.
//!
//! Five schemes share one set of mechanics:
//!
//! * [`Scheme::Generic`]: correlated candidates, generic weights, the
//!   path-density acceptance ratio with normalized selection weights.
//! * [`Scheme::Qin`]: same draws, sum-of-weights acceptance. Valid only for
//!   lambda-form weights with a sequentially symmetric lambda.
//! * [`Scheme::Iid`]: i.i.d. candidates from `π(·|x)`, arity-1 generic
//!   weights, every non-anchor reference point redrawn.
//! * [`Scheme::Mtm`]: standard multiple-try Metropolis (same draws as `Iid`,
//!   lambda-form weights, sum-of-weights acceptance).
//! * [`Scheme::Mh`]: Metropolis-Hastings, the single-candidate
//!   baseline.
//!
//! Random numbers are consumed in a fixed order: candidates in index order,
//! one uniform for the selection (not for `Mh`), the freshly drawn reference
//! points in index order, then one uniform for the accept test. A step whose
//! candidate weights are all zero stops after the candidates and rejects.

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{
    log_sum_exp, sample_categorical, PointSet, ProposalSequence, SharedProposal, State, TargetDensity,
};
use crate::error::{check_log, Error, Result};
use crate::weights::{PathScores, WeightFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Generic,
    Qin,
    Iid,
    Mtm,
    Mh,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Generic, Scheme::Qin, Scheme::Iid, Scheme::Mtm, Scheme::Mh];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Generic => "generic",
            Scheme::Qin => "qin",
            Scheme::Iid => "iid",
            Scheme::Mtm => "mtm",
            Scheme::Mh => "mh",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.id() == id)
    }

    /// Candidates drawn i.i.d. from the first proposal.
    pub fn independent(self) -> bool {
        matches!(self, Scheme::Iid | Scheme::Mtm | Scheme::Mh)
    }

    /// Acceptance is the ratio of forward to reference weight sums.
    pub fn sum_ratio(self) -> bool {
        matches!(self, Scheme::Qin | Scheme::Mtm)
    }
}

/// Number of tries, target, proposals and weights of a multi-point step.
#[derive(Clone)]
pub struct MultiPointConfig<S> {
    pub n_tries: usize,
    pub target: Arc<dyn TargetDensity<S>>,
    pub proposals: Arc<dyn ProposalSequence<S>>,
    pub weights: WeightFamily<S>,
}

impl<S> MultiPointConfig<S> {
    pub fn new(
        n_tries: usize,
        target: Arc<dyn TargetDensity<S>>,
        proposals: Arc<dyn ProposalSequence<S>>,
        weights: WeightFamily<S>,
    ) -> Result<Self> {
        if n_tries == 0 {
            return Err(Error::Config("number of tries must be at least 1".into()));
        }
        if let Some(available) = proposals.max_index() {
            let needed = n_tries + weights.extra_proposals();
            if needed > available {
                return Err(Error::MissingProposal { needed, available });
            }
        }
        Ok(Self { n_tries, target, proposals, weights })
    }
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub next_state: S,
    pub accepted: bool,
    pub alpha: f64,
    /// 1-based index of the selected candidate; `None` when every weight was zero.
    pub selected: Option<usize>,
    pub candidates: PointSet<S>,
    pub references: PointSet<S>,
    pub log_wbar_y: f64,
    pub log_wbar_x: f64,
}

/// A point set scored against one anchor: target, proposal and weight values.
#[derive(Debug, Clone)]
pub(crate) struct Scored<S> {
    pub anchor_log_p: f64,
    pub points: Vec<S>,
    pub log_p: Vec<f64>,
    pub log_pi: Vec<f64>,
    pub log_w: Vec<f64>,
    pub log_norm: f64,
}

/// Borrowed view of everything a step needs.
pub(crate) struct StepView<'a, S> {
    pub scheme: Scheme,
    pub n: usize,
    pub target: &'a dyn TargetDensity<S>,
    pub props: &'a dyn ProposalSequence<S>,
    pub weights: Option<&'a WeightFamily<S>>,
}

impl<'a, S: State> StepView<'a, S> {
    pub fn new(scheme: Scheme, cfg: &'a MultiPointConfig<S>) -> Result<Self> {
        if scheme.sum_ratio() && !cfg.weights.is_lambda() {
            return Err(Error::Config(format!(
                "the {} scheme needs lambda-form weights, got {}",
                scheme.id(),
                cfg.weights.label()
            )));
        }
        let n = if scheme == Scheme::Mh { 1 } else { cfg.n_tries };
        Ok(Self {
            scheme,
            n,
            target: cfg.target.as_ref(),
            props: cfg.proposals.as_ref(),
            weights: (scheme != Scheme::Mh).then_some(&cfg.weights),
        })
    }

    pub fn mh(target: &'a dyn TargetDensity<S>, props: &'a dyn ProposalSequence<S>) -> Self {
        Self { scheme: Scheme::Mh, n: 1, target, props, weights: None }
    }

    fn log_target(&self, x: &S) -> Result<f64> {
        check_log(self.target.log_density(x), "target log density")
    }

    /// Scores `points` against `anchor` under this scheme's proposal structure.
    pub fn score(&self, anchor: &S, anchor_log_p: f64, points: Vec<S>) -> Result<Scored<S>> {
        let shared = SharedProposal::new(self.props);
        let props: &dyn ProposalSequence<S> = if self.scheme.independent() { &shared } else { self.props };

        let log_p = points.iter().map(|p| self.log_target(p)).collect::<Result<Vec<_>>>()?;
        let mut log_pi = Vec::with_capacity(points.len());
        if self.scheme.independent() {
            log_pi.extend(points.iter().map(|p| props.log_density(1, p, anchor, &[])));
        } else {
            props.path_log_densities(anchor, &points, 0, &mut log_pi);
        }
        for v in &log_pi {
            check_log(*v, "proposal log density")?;
        }

        let mut log_w = Vec::with_capacity(points.len());
        match self.weights {
            None => log_w.resize(points.len(), 0.0),
            Some(w) if self.scheme.independent() => {
                for i in 0..points.len() {
                    let scores = PathScores { log_p: &log_p[i..=i], anchor_log_p, log_pi: &log_pi[i..=i] };
                    w.eval_path(&points[i..=i], anchor, scores, self.target, props, &mut log_w)?;
                }
            }
            Some(w) => {
                let scores = PathScores { log_p: &log_p, anchor_log_p, log_pi: &log_pi };
                w.eval_path(&points, anchor, scores, self.target, props, &mut log_w)?;
            }
        }
        let log_norm = log_sum_exp(&log_w);
        Ok(Scored { anchor_log_p, points, log_p, log_pi, log_w, log_norm })
    }

    /// Reference points for selected index `k` (1-based). Only the points
    /// that are not fixed by the candidates are drawn from `rng`.
    pub fn references(&self, candidates: &[S], k: usize, x: &S, rng: &mut dyn RngCore) -> Vec<S> {
        let y = &candidates[k - 1];
        if self.scheme.independent() {
            (1..=self.n).map(|j| if j == k { x.clone() } else { self.props.sample(1, y, &[], rng) }).collect()
        } else {
            let mut refs = fixed_references(candidates, k, x, self.n);
            self.props.extend_path(y, &mut refs, self.n, rng);
            refs
        }
    }

    /// Acceptance probability and the two normalized selection weights
    /// (`log W̄_y`, `log W̄_x`) for candidate `k`.
    pub fn alpha(&self, fwd: &Scored<S>, refs: &Scored<S>, k: usize) -> Result<(f64, f64, f64)> {
        let i = k - 1;
        let log_wbar_y = fwd.log_w[i] - fwd.log_norm;
        let log_wbar_x =
            if refs.log_w[i] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { refs.log_w[i] - refs.log_norm };
        let log_ratio = if self.scheme.sum_ratio() {
            fwd.log_norm - refs.log_norm
        } else if refs.anchor_log_p == f64::NEG_INFINITY || log_wbar_x == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            let (log_q_ref, log_q_fwd) = if self.scheme.independent() {
                (refs.log_pi[i], fwd.log_pi[i])
            } else {
                (refs.log_pi[..k].iter().sum::<f64>(), fwd.log_pi[..k].iter().sum::<f64>())
            };
            (refs.anchor_log_p + log_q_ref) - (fwd.anchor_log_p + log_q_fwd) + log_wbar_x - log_wbar_y
        };
        Ok((alpha_from_log_ratio(log_ratio)?, log_wbar_y, log_wbar_x))
    }

    pub fn step(&self, x: &S, rng: &mut dyn RngCore) -> Result<StepOutcome<S>> {
        let log_p_x = self.log_target(x)?;
        if log_p_x == f64::NEG_INFINITY {
            return Err(Error::OutOfSupport);
        }

        let mut ys = Vec::with_capacity(self.n);
        if self.scheme.independent() {
            for _ in 0..self.n {
                ys.push(self.props.sample(1, x, &[], rng));
            }
        } else {
            self.props.extend_path(x, &mut ys, self.n, rng);
        }
        let fwd = self.score(x, log_p_x, ys)?;

        if fwd.log_norm == f64::NEG_INFINITY {
            return Ok(StepOutcome {
                next_state: x.clone(),
                accepted: false,
                alpha: 0.0,
                selected: None,
                candidates: PointSet::forward(fwd.points),
                references: PointSet::forward(Vec::new()),
                log_wbar_y: f64::NEG_INFINITY,
                log_wbar_x: f64::NEG_INFINITY,
            });
        }

        let k = if self.scheme == Scheme::Mh {
            1
        } else {
            let probs: Vec<f64> = fwd.log_w.iter().map(|w| (w - fwd.log_norm).exp()).collect();
            sample_categorical(&probs, rng.gen::<f64>())? + 1
        };

        let refs_points = self.references(&fwd.points, k, x, rng);
        let refs = self.score(&fwd.points[k - 1], fwd.log_p[k - 1], refs_points)?;
        let (alpha, log_wbar_y, log_wbar_x) = self.alpha(&fwd, &refs, k)?;

        let accepted = rng.gen::<f64>() < alpha;
        let next_state = if accepted { fwd.points[k - 1].clone() } else { x.clone() };
        Ok(StepOutcome {
            next_state,
            accepted,
            alpha,
            selected: Some(k),
            candidates: PointSet::forward(fwd.points),
            references: PointSet::forward(refs.points),
            log_wbar_y,
            log_wbar_x,
        })
    }
}

/// `min(1, exp(log_ratio))`, saturating before exponentiation.
pub fn alpha_from_log_ratio(log_ratio: f64) -> Result<f64> {
    if log_ratio.is_nan() {
        Err(Error::Numeric("acceptance log-ratio is NaN".into()))
    } else if log_ratio >= 0.0 {
        Ok(1.0)
    } else {
        Ok(log_ratio.exp())
    }
}

/// `x*_1 = y_{k-1}, …, x*_{k-1} = y_1, x*_k = x`, with room for `n` points.
fn fixed_references<S: Clone>(candidates: &[S], k: usize, x: &S, n: usize) -> Vec<S> {
    let mut refs = Vec::with_capacity(n);
    refs.extend(candidates[..k - 1].iter().rev().cloned());
    refs.push(x.clone());
    refs
}

/// Reference set for the correlated-candidate schemes: the first `k` points
/// are the reversed earlier candidates followed by `x`; the remaining
/// `N - k` are drawn from `π_j(· | y_k, x*_{1:j-1})`.
pub fn build_reference_set<S: State>(
    candidates: &PointSet<S>,
    k: usize,
    x: &S,
    props: &dyn ProposalSequence<S>,
    rng: &mut dyn RngCore,
) -> Result<PointSet<S>> {
    let ys = candidates.generation_order();
    if k == 0 || k > ys.len() {
        return Err(Error::Argument(format!("selected index {k} outside 1..={}", ys.len())));
    }
    let mut refs = fixed_references(ys, k, x, ys.len());
    props.extend_path(&ys[k - 1], &mut refs, ys.len(), rng);
    Ok(PointSet::forward(refs))
}

/// Generalized multi-point step with arbitrary weights.
pub fn mp_generic_step<S: State>(cfg: &MultiPointConfig<S>, x: &S, rng: &mut dyn RngCore) -> Result<StepOutcome<S>> {
    StepView::new(Scheme::Generic, cfg)?.step(x, rng)
}

/// Standard multi-point step (lambda-form weights, sum-ratio acceptance).
pub fn qin_mp_step<S: State>(cfg: &MultiPointConfig<S>, x: &S, rng: &mut dyn RngCore) -> Result<StepOutcome<S>> {
    StepView::new(Scheme::Qin, cfg)?.step(x, rng)
}

/// Independent-candidate step with generic arity-1 weights.
pub fn iid_generic_step<S: State>(cfg: &MultiPointConfig<S>, x: &S, rng: &mut dyn RngCore) -> Result<StepOutcome<S>> {
    StepView::new(Scheme::Iid, cfg)?.step(x, rng)
}

/// Standard multiple-try Metropolis step.
pub fn liu_mtm_step<S: State>(cfg: &MultiPointConfig<S>, x: &S, rng: &mut dyn RngCore) -> Result<StepOutcome<S>> {
    StepView::new(Scheme::Mtm, cfg)?.step(x, rng)
}

/// Metropolis-Hastings step using the first proposal of `proposal`.
pub fn mh_step<S: State>(
    target: &dyn TargetDensity<S>,
    proposal: &dyn ProposalSequence<S>,
    x: &S,
    rng: &mut dyn RngCore,
) -> Result<StepOutcome<S>> {
    StepView::mh(target, proposal).step(x, rng)
}

/// Anything that advances a chain by one step.
pub trait StepKernel<S>: Send + Sync {
    fn step(&self, x: &S, rng: &mut dyn RngCore) -> Result<StepOutcome<S>>;

    /// Human-readable description; hashed into the trace's config digest.
    fn describe(&self) -> String;
}

/// A scheme bound to its configuration.
#[derive(Clone)]
pub struct Sampler<S> {
    scheme: Scheme,
    config: MultiPointConfig<S>,
}

impl<S: State> Sampler<S> {
    pub fn new(scheme: Scheme, config: MultiPointConfig<S>) -> Result<Self> {
        StepView::new(scheme, &config)?;
        Ok(Self { scheme, config })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn config(&self) -> &MultiPointConfig<S> {
        &self.config
    }

    pub(crate) fn view(&self) -> StepView<'_, S> {
        // validated in `new`
        StepView::new(self.scheme, &self.config).expect("validated sampler")
    }
}

impl<S: State> StepKernel<S> for Sampler<S> {
    fn step(&self, x: &S, rng: &mut dyn RngCore) -> Result<StepOutcome<S>> {
        self.view().step(x, rng)
    }

    fn describe(&self) -> String {
        format!("{} N={} weights={}", self.scheme.id(), self.config.n_tries, self.config.weights.label())
    }
}

/// Recorded chain: post-burn-in, thinned states with their step metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace<S> {
    pub states: Vec<S>,
    pub accepted: Vec<bool>,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub sampler: String,
    pub config_digest: u64,
}

impl<S> ChainTrace<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Runs `steps` iterations from `x0` and keeps every `thin`-th state after
/// the first `burn_in` steps.
pub fn run_chain<S: State>(
    kernel: &dyn StepKernel<S>,
    x0: S,
    steps: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<ChainTrace<S>> {
    if steps == 0 {
        return Err(Error::Argument("chain needs at least one step".into()));
    }
    if burn_in >= steps {
        return Err(Error::Argument(format!("burn-in {burn_in} must be below steps {steps}")));
    }
    if thin == 0 {
        return Err(Error::Argument("thinning interval must be at least 1".into()));
    }
    let sampler = kernel.describe();
    let kept = (steps - burn_in).div_ceil(thin);
    let mut trace = ChainTrace {
        states: Vec::with_capacity(kept),
        accepted: Vec::with_capacity(kept),
        alphas: Vec::with_capacity(kept),
        seed,
        config_digest: fnv1a(sampler.as_bytes()),
        sampler,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0;
    for t in 0..steps {
        let out = kernel.step(&x, &mut rng).map_err(|e| Error::Step { index: t, source: Box::new(e) })?;
        x = out.next_state;
        if t >= burn_in && (t - burn_in).is_multiple_of(thin) {
            trace.states.push(x.clone());
            trace.accepted.push(out.accepted);
            trace.alphas.push(out.alpha);
        }
    }
    Ok(trace)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{BimodalQuartic, WeightedMeanGaussian};
    use crate::weights::LambdaKind;

    fn toy(n: usize, weights: WeightFamily<f64>) -> MultiPointConfig<f64> {
        MultiPointConfig::new(
            n,
            Arc::new(BimodalQuartic),
            Arc::new(WeightedMeanGaussian::new(1.0, 0.2, 0.8).unwrap()),
            weights,
        )
        .unwrap()
    }

    fn bimodal(x: f64) -> f64 {
        -(x * x - 4.0).powi(2) / 4.0
    }

    /// Proposal that replays scripted points.
    struct Scripted(Vec<f64>, std::sync::Mutex<usize>);

    impl ProposalSequence<f64> for Scripted {
        fn sample(&self, _: usize, _: &f64, _: &[f64], _: &mut dyn RngCore) -> f64 {
            let mut i = self.1.lock().unwrap();
            *i += 1;
            self.0[*i - 1]
        }
        fn log_density(&self, _: usize, c: &f64, p: &f64, _: &[f64]) -> f64 {
            -0.5 * (c - p).powi(2)
        }
    }

    #[test]
    fn single_try_is_metropolis_hastings() {
        // symmetric proposal from 0 to 2: alpha = min(1, p(2)/p(0)) = 1
        let cfg = MultiPointConfig::new(
            1,
            Arc::new(BimodalQuartic),
            Arc::new(Scripted(vec![2.0], Default::default())),
            WeightFamily::TargetPower { theta: 0.5 },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = mp_generic_step(&cfg, &0.0, &mut rng).unwrap();
        assert_eq!(out.alpha, 1.0);
        assert!(out.accepted);
        assert_eq!(out.next_state, 2.0);

        // the reverse move: alpha = p(0)/p(2) = e^-4
        let cfg = MultiPointConfig::new(
            1,
            Arc::new(BimodalQuartic),
            Arc::new(Scripted(vec![0.0], Default::default())),
            WeightFamily::TargetProduct,
        )
        .unwrap();
        let out = mp_generic_step(&cfg, &2.0, &mut rng).unwrap();
        assert!((out.alpha - (-4f64).exp()).abs() < 1e-15);
        assert_eq!(out.log_wbar_y, 0.0);
        assert_eq!(out.log_wbar_x, 0.0);
    }

    #[test]
    fn qin_unit_lambda_single_try() {
        let cfg = MultiPointConfig::new(
            1,
            Arc::new(BimodalQuartic),
            Arc::new(Scripted(vec![1.0], Default::default())),
            WeightFamily::lambda(LambdaKind::Unit),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = qin_mp_step(&cfg, &0.5, &mut rng).unwrap();
        let expect = (bimodal(1.0) - bimodal(0.5)).exp().min(1.0);
        assert!((out.alpha - expect).abs() < 1e-14);
    }

    #[test]
    fn qin_equal_candidates_accept() {
        // candidates equal to x: forward and reference sums coincide
        let cfg = MultiPointConfig::new(
            3,
            Arc::new(BimodalQuartic),
            Arc::new(Scripted(vec![0.7; 3], Default::default())),
            WeightFamily::lambda(LambdaKind::Unit),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = qin_mp_step(&cfg, &0.7, &mut rng).unwrap();
        assert_eq!(out.alpha, 1.0);
    }

    #[test]
    fn sum_ratio_schemes_need_lambda_weights() {
        let cfg = toy(3, WeightFamily::TargetProduct);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(qin_mp_step(&cfg, &0.0, &mut rng), Err(Error::Config(_))));
        assert!(matches!(liu_mtm_step(&cfg, &0.0, &mut rng), Err(Error::Config(_))));
        assert!(Sampler::new(Scheme::Qin, cfg).is_err());
    }

    #[test]
    fn reference_set_layout() {
        let props = WeightedMeanGaussian::new(1.0, 0.2, 0.8).unwrap();
        let ys = PointSet::forward(vec![1.0, 2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = build_reference_set(&ys, 3, &9.0, &props, &mut rng).unwrap();
        assert_eq!(full.generation_order(), &[2.0, 1.0, 9.0]);

        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = a.clone();
        let first = build_reference_set(&ys, 1, &9.0, &props, &mut a).unwrap();
        assert_eq!(first.generation_order()[0], 9.0);
        let mut tail = vec![9.0];
        props.extend_path(&1.0, &mut tail, 3, &mut b);
        assert_eq!(first.generation_order(), tail.as_slice());

        // N = 3, k = 2: x*_1 = y_1, x*_2 = x, x*_3 ~ pi_3(. | y_2, y_1, x)
        let mut a = ChaCha8Rng::seed_from_u64(8);
        let mut b = a.clone();
        let mid = build_reference_set(&ys, 2, &9.0, &props, &mut a).unwrap();
        let expect = props.sample(3, &2.0, &[1.0, 9.0], &mut b);
        assert_eq!(mid.generation_order(), &[1.0, 9.0, expect]);

        assert!(build_reference_set(&ys, 0, &9.0, &props, &mut a).is_err());
        assert!(build_reference_set(&ys, 4, &9.0, &props, &mut a).is_err());
    }

    #[test]
    fn rejected_steps_keep_the_state() {
        let cfg = toy(5, WeightFamily::InverseProposal);
        let sampler = Sampler::new(Scheme::Generic, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut x = 0.3;
        for _ in 0..2000 {
            let out = sampler.step(&x, &mut rng).unwrap();
            assert!((0.0..=1.0).contains(&out.alpha));
            if !out.accepted {
                assert_eq!(out.next_state, x);
            }
            assert_eq!(out.candidates.len(), 5);
            assert_eq!(out.references.len(), 5);
            x = out.next_state;
        }
    }

    #[test]
    fn degenerate_weights_reject() {
        let target = |x: &f64| if *x < 10.0 { 0.0 } else { f64::NEG_INFINITY };
        let cfg = MultiPointConfig::new(
            2,
            Arc::new(target),
            Arc::new(Scripted(vec![11.0, 12.0], Default::default())),
            WeightFamily::TargetPower { theta: 1.0 },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = mp_generic_step(&cfg, &0.0, &mut rng).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.alpha, 0.0);
        assert_eq!(out.selected, None);
        assert_eq!(out.next_state, 0.0);
    }

    #[test]
    fn out_of_support_start_is_an_error() {
        let target = |x: &f64| if *x < 10.0 { 0.0 } else { f64::NEG_INFINITY };
        let cfg = MultiPointConfig::new(
            1,
            Arc::new(target),
            Arc::new(WeightedMeanGaussian::new(1.0, 0.2, 0.8).unwrap()),
            WeightFamily::TargetProduct,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mp_generic_step(&cfg, &20.0, &mut rng), Err(Error::OutOfSupport));
    }

    #[test]
    fn config_rejects_zero_tries_and_short_sequences() {
        assert!(MultiPointConfig::new(
            0,
            Arc::new(BimodalQuartic),
            Arc::new(WeightedMeanGaussian::new(1.0, 0.2, 0.8).unwrap()),
            WeightFamily::TargetProduct
        )
        .is_err());
        let table = crate::discrete::DiscreteProposal::uniform(3).with_max_index(2);
        let err = MultiPointConfig::new(2, Arc::new(|_: &usize| 0.0), Arc::new(table), WeightFamily::InverseProposal)
            .err()
            .unwrap();
        assert_eq!(err, Error::MissingProposal { needed: 3, available: 2 });
    }

    #[test]
    fn alpha_clamps_without_overflow() {
        assert_eq!(alpha_from_log_ratio(800.0).unwrap(), 1.0);
        assert_eq!(alpha_from_log_ratio(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(alpha_from_log_ratio(f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(alpha_from_log_ratio(f64::NAN).is_err());
    }

    #[test]
    fn chain_runner_contract() {
        let sampler = Sampler::new(Scheme::Generic, toy(3, WeightFamily::TargetPower { theta: 0.5 })).unwrap();
        let one = run_chain(&sampler, 0.0, 1, 0, 1, 5).unwrap();
        assert_eq!(one.len(), 1);
        let a = run_chain(&sampler, 0.0, 500, 100, 3, 42).unwrap();
        let b = run_chain(&sampler, 0.0, 500, 100, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 134);
        assert_eq!(a.states.len(), a.accepted.len());
        assert_eq!(a.states.len(), a.alphas.len());
        assert_eq!(a.sampler, "generic N=3 weights=w1(0.5)");
        assert!(run_chain(&sampler, 0.0, 10, 10, 1, 0).is_err());
        assert!(run_chain(&sampler, 0.0, 0, 0, 1, 0).is_err());
    }

    #[test]
    fn chain_errors_carry_the_step_index() {
        let target = |x: &f64| if *x < 10.0 { 0.0 } else { f64::NEG_INFINITY };
        let cfg = MultiPointConfig::new(
            2,
            Arc::new(target),
            Arc::new(WeightedMeanGaussian::new(1.0, 0.2, 0.8).unwrap()),
            WeightFamily::TargetProduct,
        )
        .unwrap();
        let sampler = Sampler::new(Scheme::Generic, cfg).unwrap();
        let err = run_chain(&sampler, 50.0, 10, 0, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Step { index: 0, .. }));
    }

    #[test]
    fn scheme_ids_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::from_id(s.id()), Some(s));
        }
        assert_eq!(Scheme::from_id("nope"), None);
    }
}
