//! Exact one-step kernels on finite state spaces.
//!
//! [`enumerate_kernel`] sums, for every pair `(x, y)`, the probability of
//! every candidate tuple, every selection index and every freshly drawn
//! reference tuple, times the acceptance probability. The acceptance is
//! computed by the same code the samplers run. Rejected mass lands on the
//! diagonal, so each row is a full probability distribution.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::{normalize_log_weights, ProposalSequence, State, TargetDensity};
use crate::discrete::DiscreteModel;
use crate::error::{Error, Result};
use crate::samplers::{MultiPointConfig, Scheme, StepView};
use crate::weights::{Lambda, WeightFamily};

/// Upper bound on enumerated terms.
pub const MAX_TERMS: u128 = 100_000_000;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Row-stochastic matrix `A[x][y] = P(next = y | current = x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    states: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        if states == 0 || rows.iter().any(|r| r.len() != states) {
            return Err(Error::Argument("kernel must be a non-empty square matrix".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let kernel = Self { states, data };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Checks non-negativity and unit row sums within 1e-12.
    pub fn validate(&self) -> Result<()> {
        for x in 0..self.states {
            let row = self.row(x);
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Argument(format!("row {x} has a negative or non-finite entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Argument(format!("row {x} sums to {total}")));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.states + y]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[x * self.states + y] = value;
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.states..(x + 1) * self.states]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.states).map(|x| (self.row(x).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `B[perm[x]][perm[y]] = A[x][y]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for x in 0..self.states {
            for y in 0..self.states {
                out.set(perm[x], perm[y], self.get(x, y));
            }
        }
        out
    }

    fn multiply(&self, other: &Self) -> Self {
        let n = self.states;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Self { states: n, data }
    }
}

/// Number of terms the enumeration of `scheme` visits, over all rows.
pub fn enumeration_terms(states: usize, n: usize, scheme: Scheme) -> u128 {
    let m = states as u128;
    if scheme == Scheme::Mh {
        return m * m;
    }
    let candidates = m.saturating_pow(n as u32);
    let tails: u128 = if scheme.independent() {
        (n as u128).saturating_mul(m.saturating_pow(n as u32 - 1))
    } else {
        (1..=n).map(|k| m.saturating_pow((n - k) as u32)).sum()
    };
    m.saturating_mul(candidates).saturating_mul(tails)
}

/// Exact transition matrix of `scheme` with `n` tries on `model`.
pub fn enumerate_kernel(
    model: &DiscreteModel,
    weights: &WeightFamily<usize>,
    n: usize,
    scheme: Scheme,
) -> Result<KernelMatrix> {
    let terms = enumeration_terms(model.states(), n, scheme);
    if terms > MAX_TERMS {
        return Err(Error::Intractable { terms, limit: MAX_TERMS });
    }
    let model = Arc::new(model.clone());
    let cfg = MultiPointConfig::new(
        n,
        model.clone() as Arc<dyn TargetDensity<usize>>,
        Arc::new(model.proposal().clone()) as Arc<dyn ProposalSequence<usize>>,
        weights.clone(),
    )?;
    let view = StepView::new(scheme, &cfg)?;
    let m = model.states();

    let row = |x: usize| enumerate_row(&view, m, x);
    #[cfg(feature = "parallel")]
    let rows: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<Vec<f64>>> = (0..m).map(row).collect();

    let mut data = Vec::with_capacity(m * m);
    for r in rows {
        data.extend(r?);
    }
    Ok(KernelMatrix { states: m, data })
}

fn enumerate_row(view: &StepView<'_, usize>, m: usize, x: usize) -> Result<Vec<f64>> {
    let n = view.n;
    let mut acc = vec![CompensatedSum::default(); m];
    let log_p_x = view.target.log_density(&x);
    if log_p_x == f64::NEG_INFINITY {
        // the chain never visits x; keep the row stochastic
        acc[x].add(1.0);
        return Ok(acc.iter().map(CompensatedSum::value).collect());
    }

    let mut ys = vec![0usize; n];
    loop {
        let fwd = view.score(&x, log_p_x, ys.clone())?;
        let log_q: f64 = fwd.log_pi.iter().sum();
        if log_q > f64::NEG_INFINITY {
            let q = log_q.exp();
            if fwd.log_norm == f64::NEG_INFINITY {
                acc[x].add(q);
            } else {
                for k in 1..=n {
                    let log_sel = if view.scheme == Scheme::Mh { 0.0 } else { fwd.log_w[k - 1] - fwd.log_norm };
                    if log_sel == f64::NEG_INFINITY {
                        continue;
                    }
                    let y = ys[k - 1];
                    let free = free_reference_slots(view.scheme, n, k);
                    let mut tail = vec![0usize; free.len()];
                    loop {
                        let refs_points = reference_points(view, &ys, k, x, &free, &tail);
                        let refs = view.score(&y, fwd.log_p[k - 1], refs_points)?;
                        let log_tail: f64 = free.iter().map(|&i| refs.log_pi[i]).sum();
                        if log_tail > f64::NEG_INFINITY {
                            let mass = (log_q + log_sel + log_tail).exp();
                            let (alpha, _, _) = view.alpha(&fwd, &refs, k)?;
                            acc[y].add(mass * alpha);
                            acc[x].add(mass * (1.0 - alpha));
                        }
                        if !advance(&mut tail, m) {
                            break;
                        }
                    }
                }
            }
        }
        if !advance(&mut ys, m) {
            break;
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// 0-based reference positions that are drawn rather than fixed.
fn free_reference_slots(scheme: Scheme, n: usize, k: usize) -> Vec<usize> {
    if scheme.independent() {
        (0..n).filter(|&i| i != k - 1).collect()
    } else {
        (k..n).collect()
    }
}

fn reference_points(
    view: &StepView<'_, usize>,
    ys: &[usize],
    k: usize,
    x: usize,
    free: &[usize],
    tail: &[usize],
) -> Vec<usize> {
    let mut refs = vec![0usize; view.n];
    if !view.scheme.independent() {
        for i in 0..k - 1 {
            refs[i] = ys[k - 2 - i];
        }
    }
    refs[k - 1] = x;
    for (slot, value) in free.iter().zip(tail) {
        refs[*slot] = *value;
    }
    refs
}

/// Odometer increment over `{0..m}^len`; false once it wraps around.
fn advance(digits: &mut [usize], m: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < m {
            return true;
        }
        *d = 0;
    }
    false
}

/// Probability flows between one pair of states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceFlow {
    pub x: usize,
    pub y: usize,
    pub forward_flow: f64,
    pub backward_flow: f64,
    pub residual: f64,
}

/// `p̄(x) A[x][y]` against `p̄(y) A[y][x]` for every ordered pair `x < y`.
pub fn balance_flows(kernel: &KernelMatrix, log_p: &[f64]) -> Result<Vec<BalanceFlow>> {
    if log_p.len() != kernel.states() {
        return Err(Error::Argument("target length does not match the kernel".into()));
    }
    let p = normalize_log_weights(log_p)?;
    let mut flows = Vec::new();
    for x in 0..kernel.states() {
        for y in x + 1..kernel.states() {
            let forward_flow = p[x] * kernel.get(x, y);
            let backward_flow = p[y] * kernel.get(y, x);
            flows.push(BalanceFlow {
                x,
                y,
                forward_flow,
                backward_flow,
                residual: (forward_flow - backward_flow).abs(),
            });
        }
    }
    Ok(flows)
}

/// Largest detailed-balance residual `|p̄(x)A(y|x) - p̄(y)A(x|y)|`.
pub fn check_detailed_balance(kernel: &KernelMatrix, log_p: &[f64]) -> Result<f64> {
    Ok(balance_flows(kernel, log_p)?.iter().map(|f| f.residual).fold(0.0, f64::max))
}

/// Fixed point of `v A = v`.
///
/// Requires a primitive kernel: some power (at most `(M-1)² + 1`, Wielandt's
/// bound) must be strictly positive.
pub fn stationary_distribution(kernel: &KernelMatrix) -> Result<Vec<f64>> {
    let m = kernel.states();
    let bound = (m - 1) * (m - 1) + 1;
    let mut power = kernel.clone();
    let mut exponent = 1;
    while power.data.iter().any(|v| *v <= 0.0) {
        if exponent >= bound {
            return Err(Error::NotErgodic(format!("no power up to {bound} of the kernel is strictly positive")));
        }
        power = power.multiply(kernel);
        // keep the pattern, drop the magnitudes
        for v in &mut power.data {
            *v = if *v > 0.0 { 1.0 } else { 0.0 };
        }
        exponent += 1;
    }

    const MAX_ITERS: usize = 1_000_000;
    let mut v = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for _ in 0..MAX_ITERS {
        for (j, slot) in next.iter_mut().enumerate() {
            let mut s = CompensatedSum::default();
            for (i, vi) in v.iter().enumerate() {
                s.add(vi * kernel.get(i, j));
            }
            *slot = s.value();
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if change < 1e-15 {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence(MAX_ITERS))
}

/// Outcome of driving the generalized and the standard multi-point kernels
/// with the same random inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionReport {
    pub steps: usize,
    pub max_alpha_gap: f64,
    /// Steps where the two kernels selected different candidates or drew
    /// different reference points. Non-zero means the inputs were not shared.
    pub draw_mismatches: usize,
}

/// Runs `trials` steps of the generalized kernel with lambda-form weights
/// and, at each step, the standard multi-point kernel on a clone of the
/// same generator; reports the largest gap between the two acceptance
/// probabilities.
pub fn check_reduction_to_qin<S: State>(
    target: Arc<dyn TargetDensity<S>>,
    proposals: Arc<dyn ProposalSequence<S>>,
    lambda: Arc<dyn Lambda<S>>,
    n: usize,
    x0: S,
    trials: usize,
    seed: u64,
) -> Result<ReductionReport> {
    let cfg = MultiPointConfig::new(n, target, proposals, WeightFamily::Lambda(lambda))?;
    let generic = StepView::new(Scheme::Generic, &cfg)?;
    let qin = StepView::new(Scheme::Qin, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0;
    let mut report = ReductionReport { steps: trials, max_alpha_gap: 0.0, draw_mismatches: 0 };
    for t in 0..trials {
        let mut shadow = rng.clone();
        let a = generic.step(&x, &mut rng).map_err(|e| Error::Step { index: t, source: Box::new(e) })?;
        let b = qin.step(&x, &mut shadow).map_err(|e| Error::Step { index: t, source: Box::new(e) })?;
        if a.selected != b.selected || a.candidates != b.candidates || a.references != b.references {
            report.draw_mismatches += 1;
        }
        report.max_alpha_gap = report.max_alpha_gap.max((a.alpha - b.alpha).abs());
        x = a.next_state;
    }
    Ok(report)
}

/// Random stochastic matrix helper for tests and demos: rows drawn from a
/// seeded generator, every entry strictly positive.
pub fn random_kernel(states: usize, seed: u64) -> KernelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..states)
        .map(|_| {
            let raw: Vec<f64> = (0..states).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    KernelMatrix::from_rows(rows).expect("valid random kernel")
}
