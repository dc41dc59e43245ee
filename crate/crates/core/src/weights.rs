//! Weight-function families behind one evaluation interface.
//!
//! A weight of arity `j` is evaluated on `(z_1, …, z_{j+1})` where `z_1` is
//! the most recently generated point, `z_j` the first one drawn and
//! `z_{j+1}` the state the step started from. Internally every family works
//! on the generation-order path `[z_j, …, z_1]` plus the anchor `z_{j+1}`,
//! which is how candidates and reference points are stored.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::density::{log_joint_path, PointSet, ProposalSequence, State, TargetDensity};
use crate::error::{check_log, Error, Result};

/// Auxiliary function `λ_j(z_1, …, z_{j+1})` of the lambda-form weights.
pub trait Lambda<S>: Send + Sync {
    /// `log λ_j` on the tuple `zs = [z_1, …, z_{j+1}]`.
    fn log_eval(&self, zs: &[S], props: &dyn ProposalSequence<S>) -> f64;

    /// True when `λ_j(z_1, z_{2:j+1}) = λ_j(z_{j+1:2}, z_1)` is claimed,
    /// i.e. the value is unchanged by reversing the whole tuple.
    fn declared_symmetric(&self) -> bool;

    fn name(&self) -> String;
}

/// Built-in lambda functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LambdaKind {
    /// `λ ≡ 1`.
    Unit,
    /// `λ = exp(scale · Σ_i f(z_i)²)`.
    ExpSumSquares { scale: f64 },
    /// `λ = exp(scale · Σ_i c_i f(z_i))` with palindromic coefficients
    /// `c_i = i (j + 2 - i) / (j + 1)²`. Order-dependent but reversal-invariant.
    Palindromic { scale: f64 },
    /// `λ = 1 / (π(z_{j+1} | z_1) π(z_1 | z_{j+1}))` using the first proposal.
    InverseProposalPair,
    /// `λ = 1 / π(z_1 | z_{j+1})`. Sequentially symmetric only when the
    /// proposal is symmetric, which the caller declares.
    InverseProposal { symmetric_proposal: bool },
    /// `λ = exp(scale · f(z_1))`. Not symmetric.
    FirstArgument { scale: f64 },
}

impl<S: State> Lambda<S> for LambdaKind {
    fn log_eval(&self, zs: &[S], props: &dyn ProposalSequence<S>) -> f64 {
        let first = &zs[0];
        let last = &zs[zs.len() - 1];
        match self {
            LambdaKind::Unit => 0.0,
            LambdaKind::ExpSumSquares { scale } => scale * zs.iter().map(|z| z.feature().powi(2)).sum::<f64>(),
            LambdaKind::Palindromic { scale } => {
                let n = zs.len() as f64;
                let total: f64 = zs
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let i = (i + 1) as f64;
                        i * (n + 1.0 - i) * z.feature()
                    })
                    .sum();
                scale * total / (n * n)
            }
            LambdaKind::InverseProposalPair => {
                -props.log_density(1, last, first, &[]) - props.log_density(1, first, last, &[])
            }
            LambdaKind::InverseProposal { .. } => -props.log_density(1, first, last, &[]),
            LambdaKind::FirstArgument { scale } => scale * first.feature(),
        }
    }

    fn declared_symmetric(&self) -> bool {
        match self {
            LambdaKind::InverseProposal { symmetric_proposal } => *symmetric_proposal,
            LambdaKind::FirstArgument { .. } => false,
            _ => true,
        }
    }

    fn name(&self) -> String {
        match self {
            LambdaKind::Unit => "1".into(),
            LambdaKind::ExpSumSquares { scale } => format!("exp-sum-squares({scale})"),
            LambdaKind::Palindromic { scale } => format!("palindromic({scale})"),
            LambdaKind::InverseProposalPair => "inverse-proposal-pair".into(),
            LambdaKind::InverseProposal { .. } => "inverse-proposal".into(),
            LambdaKind::FirstArgument { scale } => format!("first-argument({scale})"),
        }
    }
}

/// Lambda backed by a closure over the tuple `[z_1, …, z_{j+1}]`.
pub struct FnLambda<F> {
    f: F,
    symmetric: bool,
    name: String,
}

impl<F> FnLambda<F> {
    pub fn new(name: impl Into<String>, symmetric: bool, f: F) -> Self {
        Self { f, symmetric, name: name.into() }
    }
}

impl<S, F> Lambda<S> for FnLambda<F>
where
    F: Fn(&[S]) -> f64 + Send + Sync,
{
    fn log_eval(&self, zs: &[S], _props: &dyn ProposalSequence<S>) -> f64 {
        (self.f)(zs)
    }

    fn declared_symmetric(&self) -> bool {
        self.symmetric
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// User-supplied weight function.
pub trait CustomWeight<S>: Send + Sync {
    /// `log ω_j` for the generation-order `path` (length `j`) and `anchor`.
    fn log_weight(&self, path: &[S], anchor: &S, target: &dyn TargetDensity<S>, props: &dyn ProposalSequence<S>)
        -> f64;

    /// Shift of the log-weight under `p → c·p`, in units of `log c`.
    fn shift_degree(&self, arity: usize) -> f64;

    fn name(&self) -> String {
        "custom".into()
    }
}

/// Weight-function family used to score candidates and reference points.
#[derive(Clone)]
pub enum WeightFamily<S> {
    /// `ω_j = p(z_1)^θ`.
    TargetPower {
        theta: f64,
    },
    /// `ω_j = p(z_1) p(z_2) ⋯ p(z_{j+1})`.
    TargetProduct,
    /// `ω_j = p(z_1) / π_{j+1}(z_1 | z_{j+1}, z_j, …, z_2)`.
    InverseProposal,
    /// `ω_j = [p(z_1) / q_j(z_{1:j} | z_{j+1})]^θ`.
    PathRatio {
        theta: f64,
    },
    /// `ω_j = Π_{i=j}^{1} p(z_i) / q_{j-i+1}(z_{i:j} | z_{j+1})`.
    PathRatioProduct,
    /// `ω_j = p(z_1) q_j(z_{2:j+1} | z_1) λ_j(z_1, …, z_{j+1})`.
    Lambda(Arc<dyn Lambda<S>>),
    Custom(Arc<dyn CustomWeight<S>>),
}

impl<S> fmt::Debug for WeightFamily<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Cached per-point quantities of a generation-order path.
#[derive(Debug, Clone, Copy)]
pub struct PathScores<'a> {
    /// `log p` of every path point.
    pub log_p: &'a [f64],
    pub anchor_log_p: f64,
    /// `log π_{i+1}(path[i] | anchor, path[..i])` for every `i`.
    pub log_pi: &'a [f64],
}

impl<S> WeightFamily<S> {
    pub fn lambda(l: impl Lambda<S> + 'static) -> Self {
        WeightFamily::Lambda(Arc::new(l))
    }

    /// Short identifier used in CSV output and configuration files.
    pub fn label(&self) -> String {
        match self {
            WeightFamily::TargetPower { theta } => format!("w1({theta})"),
            WeightFamily::TargetProduct => "w2".into(),
            WeightFamily::InverseProposal => "w3".into(),
            WeightFamily::PathRatio { theta } => format!("ratio-theta({theta})"),
            WeightFamily::PathRatioProduct => "ratio-product".into(),
            WeightFamily::Lambda(l) => format!("lambda({})", l.name()),
            WeightFamily::Custom(c) => c.name(),
        }
    }

    pub fn is_lambda(&self) -> bool {
        matches!(self, WeightFamily::Lambda(_))
    }

    /// Number of proposal indices needed beyond the number of tries.
    pub fn extra_proposals(&self) -> usize {
        usize::from(matches!(self, WeightFamily::InverseProposal))
    }

    /// Shift of `log ω_j` under `p → c·p`, in units of `log c`.
    pub fn shift_degree(&self, arity: usize) -> f64 {
        match self {
            WeightFamily::TargetPower { theta } => *theta,
            WeightFamily::TargetProduct => (arity + 1) as f64,
            WeightFamily::InverseProposal => 1.0,
            WeightFamily::PathRatio { theta } => *theta,
            WeightFamily::PathRatioProduct => arity as f64,
            WeightFamily::Lambda(_) => 1.0,
            WeightFamily::Custom(c) => c.shift_degree(arity),
        }
    }

    /// True when the shift degree does not depend on the arity, so that
    /// rescaling the target leaves every normalized weight unchanged.
    pub fn arity_independent_shift(&self) -> bool {
        !matches!(self, WeightFamily::TargetProduct | WeightFamily::PathRatioProduct)
            && !matches!(self, WeightFamily::Custom(_))
    }
}

impl<S: State> WeightFamily<S> {
    /// `log ω_j(z_1, …, z_{j+1})` where `z_1, …, z_j` are the first `j`
    /// points of `points` in generation order (most recent last) and
    /// `z_{j+1}` is `anchor`.
    pub fn eval_log(
        &self,
        j: usize,
        points: &PointSet<S>,
        anchor: &S,
        target: &dyn TargetDensity<S>,
        props: &dyn ProposalSequence<S>,
    ) -> Result<f64> {
        let all = points.generation_order();
        if j == 0 || j > all.len() {
            return Err(Error::Argument(format!("weight arity {j} needs between 1 and {} points", all.len())));
        }
        self.eval_direct(&all[..j], anchor, target, props)
    }

    /// Evaluates one weight straight from the definition, with no caching.
    pub(crate) fn eval_direct(
        &self,
        path: &[S],
        anchor: &S,
        target: &dyn TargetDensity<S>,
        props: &dyn ProposalSequence<S>,
    ) -> Result<f64> {
        let j = path.len();
        let z1 = &path[j - 1];
        let log_p = |s: &S| check_log(target.log_density(s), "target log density");
        let value = match self {
            WeightFamily::TargetPower { theta } => theta * log_p(z1)?,
            WeightFamily::TargetProduct => {
                let mut total = log_p(anchor)?;
                for z in path {
                    total += log_p(z)?;
                }
                total
            }
            WeightFamily::InverseProposal => {
                require_index(props, j + 1)?;
                let log_pi = check_log(props.log_density(j + 1, z1, anchor, &path[..j - 1]), "proposal log density")?;
                if log_pi == f64::NEG_INFINITY {
                    return Err(Error::UnboundedWeight { arity: j });
                }
                log_p(z1)? - log_pi
            }
            WeightFamily::PathRatio { theta } => {
                require_index(props, j)?;
                let log_q = log_joint_path(props, anchor, path)?;
                if log_q == f64::NEG_INFINITY {
                    return Err(Error::UnboundedWeight { arity: j });
                }
                theta * (log_p(z1)? - log_q)
            }
            WeightFamily::PathRatioProduct => {
                require_index(props, j)?;
                let mut total = 0.0;
                for m in 1..=j {
                    let log_q = log_joint_path(props, anchor, &path[..m])?;
                    if log_q == f64::NEG_INFINITY {
                        return Err(Error::UnboundedWeight { arity: j });
                    }
                    total += log_p(&path[m - 1])? - log_q;
                }
                total
            }
            WeightFamily::Lambda(lambda) => {
                require_index(props, j)?;
                let zs = z_order(path, anchor);
                let log_q = log_joint_path(props, &zs[0], &zs[1..])?;
                lambda_term(lambda.as_ref(), &zs, props)? + log_p(z1)? + log_q
            }
            WeightFamily::Custom(custom) => custom.log_weight(path, anchor, target, props),
        };
        check_log(value, "log-weight")
    }

    /// Pushes `log ω_j` of every prefix `path[..j]`, `j = 1, …, path.len()`.
    ///
    /// Uses the cached scores to run in linear time for the families whose
    /// weights are built from prefix sums.
    pub fn eval_path(
        &self,
        path: &[S],
        anchor: &S,
        scores: PathScores<'_>,
        target: &dyn TargetDensity<S>,
        props: &dyn ProposalSequence<S>,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let n = path.len();
        debug_assert_eq!(scores.log_p.len(), n);
        debug_assert_eq!(scores.log_pi.len(), n);
        let start = out.len();
        match self {
            WeightFamily::TargetPower { theta } => {
                out.extend(scores.log_p.iter().map(|lp| theta * lp));
            }
            WeightFamily::TargetProduct => {
                let mut total = scores.anchor_log_p;
                for lp in scores.log_p {
                    total += lp;
                    out.push(total);
                }
            }
            WeightFamily::InverseProposal => {
                require_index(props, n + 1)?;
                let mut shifted = Vec::with_capacity(n);
                props.path_log_densities(anchor, path, 1, &mut shifted);
                for (j, (lp, lpi)) in scores.log_p.iter().zip(&shifted).enumerate() {
                    let lpi = check_log(*lpi, "proposal log density")?;
                    if lpi == f64::NEG_INFINITY {
                        return Err(Error::UnboundedWeight { arity: j + 1 });
                    }
                    out.push(lp - lpi);
                }
            }
            WeightFamily::PathRatio { theta } => {
                let mut log_q = 0.0;
                for (j, (lp, lpi)) in scores.log_p.iter().zip(scores.log_pi).enumerate() {
                    log_q += lpi;
                    if log_q == f64::NEG_INFINITY {
                        return Err(Error::UnboundedWeight { arity: j + 1 });
                    }
                    out.push(theta * (lp - log_q));
                }
            }
            WeightFamily::PathRatioProduct => {
                let (mut log_q, mut total) = (0.0, 0.0);
                for (j, (lp, lpi)) in scores.log_p.iter().zip(scores.log_pi).enumerate() {
                    log_q += lpi;
                    if log_q == f64::NEG_INFINITY {
                        return Err(Error::UnboundedWeight { arity: j + 1 });
                    }
                    total += lp - log_q;
                    out.push(total);
                }
            }
            WeightFamily::Lambda(_) | WeightFamily::Custom(_) => {
                for j in 1..=n {
                    out.push(self.eval_direct(&path[..j], anchor, target, props)?);
                }
            }
        }
        for v in &out[start..] {
            check_log(*v, "log-weight")?;
        }
        Ok(())
    }

    /// Largest log-weight seen over randomly generated paths.
    ///
    /// Boundedness of a custom family is the caller's obligation; this only
    /// catches non-finite values on the sampled points.
    pub fn sampled_sup(
        &self,
        target: &dyn TargetDensity<S>,
        props: &dyn ProposalSequence<S>,
        anchors: &[S],
        max_arity: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let mut sup = f64::NEG_INFINITY;
        for anchor in anchors {
            let mut path = Vec::with_capacity(max_arity);
            props.extend_path(anchor, &mut path, max_arity, rng);
            for j in 1..=max_arity {
                let w = self.eval_direct(&path[..j], anchor, target, props)?;
                sup = sup.max(w);
            }
        }
        Ok(sup)
    }
}

fn require_index<S>(props: &dyn ProposalSequence<S>, needed: usize) -> Result<()> {
    match props.max_index() {
        Some(available) if needed > available => Err(Error::MissingProposal { needed, available }),
        _ => Ok(()),
    }
}

/// `[z_1, …, z_{j+1}]` from a generation-order path and its anchor.
fn z_order<S: Clone>(path: &[S], anchor: &S) -> Vec<S> {
    let mut zs: Vec<S> = path.iter().rev().cloned().collect();
    zs.push(anchor.clone());
    zs
}

fn lambda_term<S>(lambda: &dyn Lambda<S>, zs: &[S], props: &dyn ProposalSequence<S>) -> Result<f64> {
    let value = lambda.log_eval(zs, props);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidLambda { arity: zs.len() - 1 })
    }
}

/// Largest relative discrepancy `|λ(z) - λ(rev z)| / max(λ(z), λ(rev z))`
/// over random tuples of arity `1..=max_arity`.
pub fn check_sequential_symmetry<S: Clone>(
    lambda: &dyn Lambda<S>,
    props: &dyn ProposalSequence<S>,
    max_arity: usize,
    trials: usize,
    draw_state: &mut dyn FnMut(&mut dyn RngCore) -> S,
    rng: &mut dyn RngCore,
) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let arity = 1 + t % max_arity.max(1);
        let zs: Vec<S> = (0..=arity).map(|_| draw_state(rng)).collect();
        let mut rev = zs.clone();
        rev.reverse();
        let a = lambda.log_eval(&zs, props);
        let b = lambda.log_eval(&rev, props);
        let gap = (a - b).abs();
        let rel = if gap.is_nan() { 1.0 } else { -(-gap).exp_m1() };
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{BimodalQuartic, WeightedMeanGaussian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN_2PI: f64 = 1.837_877_066_409_345_5;

    fn gauss_log(x: f64, mu: f64, var: f64) -> f64 {
        -0.5 * (LN_2PI + var.ln()) - (x - mu).powi(2) / (2.0 * var)
    }

    fn bimodal(x: f64) -> f64 {
        -(x * x - 4.0).powi(2) / 4.0
    }

    fn toy_props() -> WeightedMeanGaussian {
        WeightedMeanGaussian::new(1.0, 0.2, 0.8).unwrap()
    }

    struct Uniform(usize);

    impl ProposalSequence<usize> for Uniform {
        fn sample(&self, _: usize, _: &usize, _: &[usize], rng: &mut dyn RngCore) -> usize {
            rng.gen_range(0..self.0)
        }
        fn log_density(&self, _: usize, _: &usize, _: &usize, _: &[usize]) -> f64 {
            -(self.0 as f64).ln()
        }
    }

    fn discrete_target(x: &usize) -> f64 {
        [0.3f64, 1.2, 0.7, 2.0][*x].ln()
    }

    fn z(points: &[f64]) -> PointSet<f64> {
        PointSet::from_reversed(points.to_vec())
    }

    #[test]
    fn target_power_values() {
        let t = BimodalQuartic;
        let props = toy_props();
        let w = WeightFamily::TargetPower { theta: 1.0 };
        assert_eq!(w.eval_log(1, &z(&[2.0]), &0.0, &t, &props).unwrap(), 0.0);
        let w = WeightFamily::TargetPower { theta: 0.5 };
        assert_eq!(w.eval_log(1, &z(&[0.0]), &0.3, &t, &props).unwrap(), -2.0);
        // linear in theta, ignores the rest of the tuple
        let pts = z(&[1.3, -0.4, 2.2]);
        let a = WeightFamily::TargetPower { theta: 0.7 }.eval_log(2, &pts, &9.0, &t, &props).unwrap();
        let b = WeightFamily::TargetPower { theta: 1.4 }.eval_log(2, &pts, &-9.0, &t, &props).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-14);
    }

    #[test]
    fn target_product_values() {
        let t = BimodalQuartic;
        let props = toy_props();
        let w = WeightFamily::TargetProduct;
        let v = w.eval_log(1, &z(&[0.5]), &1.5, &t, &props).unwrap();
        assert!((v - bimodal(0.5) - bimodal(1.5)).abs() < 1e-14);
        let v = w.eval_log(3, &z(&[1.1, 1.1, 1.1]), &1.1, &t, &props).unwrap();
        assert!((v - 4.0 * bimodal(1.1)).abs() < 1e-13);
        let a = w.eval_log(2, &z(&[0.3, -1.7]), &2.4, &t, &props).unwrap();
        let b = w.eval_log(2, &z(&[2.4, 0.3]), &-1.7, &t, &props).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn inverse_proposal_values() {
        let t = BimodalQuartic;
        let props = toy_props();
        let w = WeightFamily::InverseProposal;
        let v = w.eval_log(1, &z(&[1.0]), &0.0, &t, &props).unwrap();
        assert!((v - (bimodal(1.0) - gauss_log(1.0, 0.0, 1.0))).abs() < 1e-14);

        let shared = crate::density::SharedProposal::new(&props);
        let v = w.eval_log(3, &z(&[0.4, -1.0, 2.0]), &0.9, &t, &shared).unwrap();
        assert!((v - (bimodal(0.4) - gauss_log(0.4, 0.9, 1.0))).abs() < 1e-14);

        let w3 = WeightFamily::<usize>::InverseProposal;
        let v = w3.eval_log(2, &PointSet::forward(vec![1usize, 3]), &0, &discrete_target, &Uniform(4));
        assert!((v.unwrap() - (2.0f64.ln() + 4f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn inverse_proposal_reports_unbounded_weight() {
        struct Narrow;
        impl ProposalSequence<f64> for Narrow {
            fn sample(&self, _: usize, p: &f64, _: &[f64], _: &mut dyn RngCore) -> f64 {
                *p
            }
            fn log_density(&self, _: usize, c: &f64, p: &f64, _: &[f64]) -> f64 {
                if (c - p).abs() < 1.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
        let w = WeightFamily::InverseProposal;
        let err = w.eval_log(1, &z(&[5.0]), &0.0, &BimodalQuartic, &Narrow).unwrap_err();
        assert_eq!(err, Error::UnboundedWeight { arity: 1 });
    }

    #[test]
    fn missing_proposal_index_is_reported() {
        let model = crate::discrete::DiscreteProposal::last_point(vec![vec![vec![0.5, 0.5]; 2]; 2]).unwrap();
        let w = WeightFamily::InverseProposal;
        let err = w.eval_log(2, &PointSet::forward(vec![0usize, 1]), &0, &|_: &usize| 0.0, &model).unwrap_err();
        assert_eq!(err, Error::MissingProposal { needed: 3, available: 2 });
    }

    #[test]
    fn path_ratio_values() {
        let props = Uniform(4);
        let pts = PointSet::forward(vec![2usize, 0, 3]);
        for theta in [0.5, 1.0, 2.0] {
            let w = WeightFamily::PathRatio { theta };
            let v = w.eval_log(3, &pts, &1, &discrete_target, &props).unwrap();
            let expect = theta * (discrete_target(&3) + 3.0 * 4f64.ln());
            assert!((v - expect).abs() < 1e-13);
        }
        // theta = 1, j = 1 matches the inverse-proposal family when the
        // conditioning of pi_1 and pi_2 coincide
        let t = BimodalQuartic;
        let g = toy_props();
        let a = WeightFamily::PathRatio { theta: 1.0 }.eval_log(1, &z(&[0.7]), &-0.2, &t, &g).unwrap();
        let b = WeightFamily::InverseProposal.eval_log(1, &z(&[0.7]), &-0.2, &t, &g).unwrap();
        assert!((a - b).abs() < 1e-14);
        let c = WeightFamily::PathRatio { theta: 2.0 }.eval_log(1, &z(&[0.7]), &-0.2, &t, &g).unwrap();
        assert!((c - 2.0 * a).abs() < 1e-13);
    }

    #[test]
    fn path_ratio_product_values() {
        let props = Uniform(5);
        let pts = PointSet::forward(vec![1usize, 3]);
        let v = WeightFamily::PathRatioProduct.eval_log(2, &pts, &0, &discrete_target, &props).unwrap();
        let expect = discrete_target(&1) + discrete_target(&3) + 3.0 * 5f64.ln();
        assert!((v - expect).abs() < 1e-13);

        let t = BimodalQuartic;
        let g = toy_props();
        let a = WeightFamily::PathRatioProduct.eval_log(1, &z(&[0.7]), &-0.2, &t, &g).unwrap();
        let b = WeightFamily::PathRatio { theta: 1.0 }.eval_log(1, &z(&[0.7]), &-0.2, &t, &g).unwrap();
        assert!((a - b).abs() < 1e-14);

        // j = 2 on the toy setup: anchor x = 0.5, generation order (y1, y2) = (1.5, -0.3)
        let (x, y1, y2) = (0.5, 1.5, -0.3);
        let mu2 = 0.2 * x + 0.8 * y1;
        let first = bimodal(y1) - gauss_log(y1, x, 1.0);
        let second = bimodal(y2) - gauss_log(y1, x, 1.0) - gauss_log(y2, mu2, 1.0);
        let v = WeightFamily::PathRatioProduct.eval_log(2, &PointSet::forward(vec![y1, y2]), &x, &t, &g).unwrap();
        assert!((v - (first + second)).abs() < 1e-13);
    }

    #[test]
    fn lambda_form_values() {
        let t = BimodalQuartic;
        let g = toy_props();
        // lambda = 1: p(z1) q_1(z2 | z1)
        let w = WeightFamily::lambda(LambdaKind::Unit);
        let v = w.eval_log(1, &z(&[1.2]), &-0.5, &t, &g).unwrap();
        assert!((v - (bimodal(1.2) + gauss_log(-0.5, 1.2, 1.0))).abs() < 1e-14);

        // j = 2: q_2(z2, z3 | z1) generates z2 then z3
        let (y1, y2, x) = (0.4, 1.9, -0.6);
        let v = w.eval_log(2, &PointSet::forward(vec![y1, y2]), &x, &t, &g).unwrap();
        let mu = 0.2 * y2 + 0.8 * y1;
        let expect = bimodal(y2) + gauss_log(y1, y2, 1.0) + gauss_log(x, mu, 1.0);
        assert!((v - expect).abs() < 1e-13);

        // inverse proposal pair collapses to the w3 form at arity 1
        let w = WeightFamily::lambda(LambdaKind::InverseProposalPair);
        let a = w.eval_log(1, &z(&[1.2]), &-0.5, &t, &g).unwrap();
        let b = WeightFamily::InverseProposal.eval_log(1, &z(&[1.2]), &-0.5, &t, &g).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn lambda_must_be_positive() {
        let bad = FnLambda::new("zero", true, |_: &[f64]| f64::NEG_INFINITY);
        let w = WeightFamily::lambda(bad);
        let err = w.eval_log(1, &z(&[1.0]), &0.0, &BimodalQuartic, &toy_props()).unwrap_err();
        assert_eq!(err, Error::InvalidLambda { arity: 1 });
    }

    #[test]
    fn sequential_symmetry_checks() {
        let g = toy_props();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = |r: &mut dyn RngCore| r.gen_range(-3.0..3.0);
        let constant = FnLambda::new("c", true, |_: &[f64]| 0.3);
        assert_eq!(check_sequential_symmetry(&constant, &g, 4, 200, &mut draw, &mut rng), 0.0);
        let sum = FnLambda::new("sum", true, |zs: &[f64]| (1.0 + zs.iter().sum::<f64>().abs()).ln());
        assert!(check_sequential_symmetry(&sum, &g, 4, 200, &mut draw, &mut rng) <= 1e-12);
        for kind in [
            LambdaKind::ExpSumSquares { scale: 0.3 },
            LambdaKind::Palindromic { scale: 0.8 },
            LambdaKind::InverseProposalPair,
            LambdaKind::InverseProposal { symmetric_proposal: true },
        ] {
            // the toy proposal is symmetric at index 1
            assert!(check_sequential_symmetry(&kind, &g, 4, 500, &mut draw, &mut rng) <= 1e-12);
        }
        let first = LambdaKind::FirstArgument { scale: 1.0 };
        assert!(check_sequential_symmetry(&first, &g, 1, 50, &mut draw, &mut rng) > 1e-3);
    }

    #[test]
    fn palindromic_lambda_is_order_dependent() {
        let g = toy_props();
        let l = LambdaKind::Palindromic { scale: 1.0 };
        let a = Lambda::<f64>::log_eval(&l, &[0.0, 1.0, 0.0, 0.0], &g);
        let b = Lambda::<f64>::log_eval(&l, &[1.0, 0.0, 0.0, 0.0], &g);
        assert!((a - b).abs() > 1e-3);
    }

    fn families() -> Vec<WeightFamily<f64>> {
        vec![
            WeightFamily::TargetPower { theta: 0.5 },
            WeightFamily::TargetProduct,
            WeightFamily::InverseProposal,
            WeightFamily::PathRatio { theta: 1.0 },
            WeightFamily::PathRatio { theta: 0.3 },
            WeightFamily::PathRatioProduct,
            WeightFamily::lambda(LambdaKind::Unit),
            WeightFamily::lambda(LambdaKind::Palindromic { scale: 0.5 }),
        ]
    }

    #[test]
    fn batch_route_matches_direct_route() {
        let t = BimodalQuartic;
        let g = toy_props();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let anchor: f64 = rng.gen_range(-3.0..3.0);
            let mut path = Vec::new();
            g.extend_path(&anchor, &mut path, 6, &mut rng);
            let log_p: Vec<f64> = path.iter().map(|v| t.log_density(v)).collect();
            let mut log_pi = Vec::new();
            g.path_log_densities(&anchor, &path, 0, &mut log_pi);
            let scores = PathScores { log_p: &log_p, anchor_log_p: t.log_density(&anchor), log_pi: &log_pi };
            for w in families() {
                let mut batch = Vec::new();
                w.eval_path(&path, &anchor, scores, &t, &g, &mut batch).unwrap();
                for j in 1..=path.len() {
                    let direct = w.eval_direct(&path[..j], &anchor, &t, &g).unwrap();
                    assert!(
                        (batch[j - 1] - direct).abs() <= 1e-10 * (1.0 + direct.abs()),
                        "{w:?} j={j}: {} vs {direct}",
                        batch[j - 1]
                    );
                }
            }
        }
    }

    #[test]
    fn log_weight_shift_matches_declared_degree() {
        let g = toy_props();
        let log_c = 1.75;
        let scaled = move |x: &f64| BimodalQuartic.log_density(x) + log_c;
        let pts = PointSet::forward(vec![0.3, -1.1, 2.5, 1.9]);
        for w in families() {
            for j in 1..=4 {
                let a = w.eval_log(j, &pts, &0.8, &BimodalQuartic, &g).unwrap();
                let b = w.eval_log(j, &pts, &0.8, &scaled, &g).unwrap();
                let expect = w.shift_degree(j) * log_c;
                assert!((b - a - expect).abs() < 1e-12, "{w:?} j={j}");
            }
        }
    }

    #[test]
    fn sampled_sup_is_finite_for_builtin_families() {
        let g = toy_props();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for w in families() {
            let sup = w.sampled_sup(&BimodalQuartic, &g, &[-2.0, 0.0, 1.5], 5, &mut rng).unwrap();
            assert!(sup.is_finite());
        }
    }

    #[test]
    fn arity_out_of_range_is_an_argument_error() {
        let w: WeightFamily<f64> = WeightFamily::TargetProduct;
        let e = w.eval_log(3, &z(&[1.0, 2.0]), &0.0, &BimodalQuartic, &toy_props());
        assert!(matches!(e, Err(Error::Argument(_))));
    }

    #[test]
    fn labels() {
        assert_eq!(WeightFamily::<f64>::TargetPower { theta: 0.5 }.label(), "w1(0.5)");
        assert_eq!(WeightFamily::<f64>::InverseProposal.label(), "w3");
        assert_eq!(WeightFamily::<f64>::lambda(LambdaKind::Unit).label(), "lambda(1)");
    }
}
