//! Target and proposal evaluation interfaces plus the log-domain helpers
//! every sampler shares.
//!
//! All densities are handled as natural logarithms. `f64::NEG_INFINITY`
//! encodes zero density; NaN and `+inf` are always errors.

use std::fmt::Debug;

use rand::RngCore;

use crate::error::{check_log, Error, Result};

/// A point of the state space.
///
/// `feature` maps the state to a scalar summary. It is only used by the
/// built-in lambda functions, which need a numeric view of a state.
pub trait State: Clone + PartialEq + Debug + Send + Sync + 'static {
    fn feature(&self) -> f64;
}

impl State for f64 {
    fn feature(&self) -> f64 {
        *self
    }
}

impl State for usize {
    fn feature(&self) -> f64 {
        *self as f64
    }
}

impl State for Vec<f64> {
    fn feature(&self) -> f64 {
        self.iter().sum()
    }
}

/// Unnormalized log target density `log p(x)`.
pub trait TargetDensity<S>: Send + Sync {
    fn log_density(&self, x: &S) -> f64;
}

impl<S, F> TargetDensity<S> for F
where
    F: Fn(&S) -> f64 + Send + Sync,
{
    fn log_density(&self, x: &S) -> f64 {
        self(x)
    }
}

/// Ordered family of conditional proposals `π_j(· | x, z_1, …, z_{j-1})`.
///
/// Indices are 1-based. `prev` is the chain state the step starts from and
/// `earlier` holds the points already generated in the same step, oldest
/// first.
pub trait ProposalSequence<S>: Send + Sync {
    /// Highest index with a defined conditional, `None` when unbounded.
    fn max_index(&self) -> Option<usize> {
        None
    }

    fn sample(&self, j: usize, prev: &S, earlier: &[S], rng: &mut dyn RngCore) -> S;

    fn log_density(&self, j: usize, candidate: &S, prev: &S, earlier: &[S]) -> f64;

    /// Appends freshly drawn points to `path` until it holds `upto` points.
    /// The point at position `i` (0-based) is drawn from `π_{i+1}`.
    fn extend_path(&self, prev: &S, path: &mut Vec<S>, upto: usize, rng: &mut dyn RngCore) {
        while path.len() < upto {
            let next = self.sample(path.len() + 1, prev, path, rng);
            path.push(next);
        }
    }

    /// Pushes `log π_{i+1+shift}(path[i] | prev, path[..i])` for every `i`.
    fn path_log_densities(&self, prev: &S, path: &[S], shift: usize, out: &mut Vec<f64>) {
        for i in 0..path.len() {
            out.push(self.log_density(i + 1 + shift, &path[i], prev, &path[..i]));
        }
    }
}

/// Presents a single conditional `π(· | x)` (index 1 of `inner`) as a
/// sequence whose every member ignores the earlier points.
///
/// This is the proposal structure of the independent-candidate schemes.
pub struct SharedProposal<'a, S> {
    inner: &'a dyn ProposalSequence<S>,
}

impl<'a, S> SharedProposal<'a, S> {
    pub fn new(inner: &'a dyn ProposalSequence<S>) -> Self {
        Self { inner }
    }
}

impl<S> ProposalSequence<S> for SharedProposal<'_, S> {
    fn sample(&self, _j: usize, prev: &S, _earlier: &[S], rng: &mut dyn RngCore) -> S {
        self.inner.sample(1, prev, &[], rng)
    }

    fn log_density(&self, _j: usize, candidate: &S, prev: &S, _earlier: &[S]) -> f64 {
        self.inner.log_density(1, candidate, prev, &[])
    }
}

/// Order in which a [`PointSet`] presents its items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Generation order: first drawn point first (`y_{1:m}`).
    Forward,
    /// Most recent point first (`y_{m:1}`), the order weight functions use.
    Reversed,
}

/// Points generated within one step, stored in generation order and viewed
/// through an orientation marker.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<S> {
    items: Vec<S>,
    orientation: Orientation,
}

impl<S> PointSet<S> {
    /// Builds a set from points listed in generation order.
    pub fn forward(items: Vec<S>) -> Self {
        Self { items, orientation: Orientation::Forward }
    }

    /// Builds a set from points listed most-recent-first, i.e. `z_1, …, z_m`.
    pub fn from_reversed(mut items: Vec<S>) -> Self {
        items.reverse();
        Self { items, orientation: Orientation::Reversed }
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Flips the presentation order. Applying it twice is the identity.
    pub fn reversed(mut self) -> Self {
        self.orientation = match self.orientation {
            Orientation::Forward => Orientation::Reversed,
            Orientation::Reversed => Orientation::Forward,
        };
        self
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Item `i` (0-based) in the presented orientation.
    pub fn get(&self, i: usize) -> Option<&S> {
        match self.orientation {
            Orientation::Forward => self.items.get(i),
            Orientation::Reversed => {
                let n = self.items.len();
                if i < n {
                    self.items.get(n - 1 - i)
                } else {
                    None
                }
            }
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = &S> + '_> {
        match self.orientation {
            Orientation::Forward => Box::new(self.items.iter()),
            Orientation::Reversed => Box::new(self.items.iter().rev()),
        }
    }

    /// The points in generation order, whatever the orientation.
    pub fn generation_order(&self) -> &[S] {
        &self.items
    }
}

/// `log q_k(y_{1:k} | x) = Σ_{j=1}^{k} log π_j(y_j | x, y_{1:j-1})`.
pub fn log_joint_proposal<S>(props: &dyn ProposalSequence<S>, x: &S, ys: &PointSet<S>, k: usize) -> Result<f64> {
    let path = ys.generation_order();
    if k == 0 || k > path.len() {
        return Err(Error::Argument(format!("joint proposal needs 1 <= k <= {}, got {k}", path.len())));
    }
    if let Some(max) = props.max_index() {
        if k > max {
            return Err(Error::MissingProposal { needed: k, available: max });
        }
    }
    log_joint_path(props, x, &path[..k])
}

pub(crate) fn log_joint_path<S>(props: &dyn ProposalSequence<S>, x: &S, path: &[S]) -> Result<f64> {
    let mut total = 0.0;
    for j in 1..=path.len() {
        let term = check_log(props.log_density(j, &path[j - 1], x, &path[..j - 1]), "proposal log density")?;
        total += term;
    }
    Ok(total)
}

/// Max-shifted `log Σ exp(v_i)`. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Turns log-weights into a probability vector.
pub fn normalize_log_weights(logw: &[f64]) -> Result<Vec<f64>> {
    if logw.is_empty() {
        return Err(Error::Argument("no weights to normalize".into()));
    }
    for &w in logw {
        check_log(w, "log-weight")?;
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let shifted: Vec<f64> = logw.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = shifted.iter().sum();
    Ok(shifted.into_iter().map(|w| w / total).collect())
}

/// Inverse-CDF draw: the smallest index whose cumulative probability exceeds `u`.
pub fn sample_categorical(probs: &[f64], u: f64) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::Argument("empty probability vector".into()));
    }
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if cumulative > u {
            return Ok(i);
        }
    }
    // u landed in the rounding gap above the last cumulative sum.
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}
