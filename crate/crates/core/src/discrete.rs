//! Finite state spaces: target mass vectors and conditional proposal tables.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{log_sum_exp, normalize_log_weights, sample_categorical, ProposalSequence, TargetDensity};
use crate::error::{Error, Result};

/// Conditional proposals `π_j(y | x, z_1, …, z_m)` on states `0..states`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiscreteProposal {
    /// Every conditional is uniform.
    Uniform {
        states: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_index: Option<usize>,
    },
    /// Rows generated by hashing `(seed, j, x, z_1, …, z_m)`: every index and
    /// every full conditioning tuple gets its own strictly positive row.
    /// `spread` scales the logits, 0 gives uniform rows.
    Hashed {
        states: usize,
        seed: u64,
        spread: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_index: Option<usize>,
    },
    /// `tables[j-1][c][y]` with `c` the most recent conditioning point
    /// (`z_m`, or `x` when nothing was drawn yet).
    LastPoint { tables: Vec<Vec<Vec<f64>>> },
}

impl DiscreteProposal {
    pub fn uniform(states: usize) -> Self {
        DiscreteProposal::Uniform { states, max_index: None }
    }

    pub fn hashed(states: usize, seed: u64, spread: f64) -> Self {
        DiscreteProposal::Hashed { states, seed, spread, max_index: None }
    }

    pub fn last_point(tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let p = DiscreteProposal::LastPoint { tables };
        p.validate()?;
        Ok(p)
    }

    /// Caps the number of defined conditionals (no effect on explicit tables).
    pub fn with_max_index(mut self, limit: usize) -> Self {
        match &mut self {
            DiscreteProposal::Uniform { max_index, .. } | DiscreteProposal::Hashed { max_index, .. } => {
                *max_index = Some(limit)
            }
            DiscreteProposal::LastPoint { .. } => {}
        }
        self
    }

    pub fn states(&self) -> usize {
        match self {
            DiscreteProposal::Uniform { states, .. } | DiscreteProposal::Hashed { states, .. } => *states,
            DiscreteProposal::LastPoint { tables } => tables.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.states();
        if m == 0 {
            return Err(Error::Model("proposal has no states".into()));
        }
        match self {
            DiscreteProposal::Hashed { spread, .. } if !spread.is_finite() => {
                Err(Error::Model(format!("hashed proposal spread must be finite, got {spread}")))
            }
            DiscreteProposal::LastPoint { tables } => {
                for (j, table) in tables.iter().enumerate() {
                    if table.len() != m {
                        return Err(Error::Model(format!("table {} has {} rows, expected {m}", j + 1, table.len())));
                    }
                    for (c, row) in table.iter().enumerate() {
                        if row.len() != m || row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                            return Err(Error::Model(format!("table {} row {c} is not a probability row", j + 1)));
                        }
                        let total: f64 = row.iter().sum();
                        if (total - 1.0).abs() > 1e-12 {
                            return Err(Error::Model(format!("table {} row {c} sums to {total}, not 1", j + 1)));
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Log probabilities of the conditional `π_j(· | prev, earlier)`.
    pub fn log_row(&self, j: usize, prev: usize, earlier: &[usize]) -> Vec<f64> {
        match self {
            DiscreteProposal::Uniform { states, .. } => vec![-(*states as f64).ln(); *states],
            DiscreteProposal::Hashed { states, seed, spread, .. } => {
                let mut h = mix(*seed ^ 0x6a09_e667_f3bc_c908, j as u64);
                h = mix(h, prev as u64);
                for z in earlier {
                    h = mix(h, *z as u64 + 1);
                }
                h = mix(h, earlier.len() as u64);
                let logits: Vec<f64> = (0..*states)
                    .map(|y| {
                        let bits = mix(h, y as u64) >> 11;
                        spread * (2.0 * bits as f64 / (1u64 << 53) as f64 - 1.0)
                    })
                    .collect();
                let norm = log_sum_exp(&logits);
                logits.into_iter().map(|l| l - norm).collect()
            }
            DiscreteProposal::LastPoint { tables } => {
                let c = earlier.last().copied().unwrap_or(prev);
                tables[j - 1][c].iter().map(|p| p.ln()).collect()
            }
        }
    }
}

fn mix(state: u64, value: u64) -> u64 {
    // splitmix64 finalizer over the combined word
    let mut z = state.wrapping_add(value.wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ProposalSequence<usize> for DiscreteProposal {
    fn max_index(&self) -> Option<usize> {
        match self {
            DiscreteProposal::Uniform { max_index, .. } | DiscreteProposal::Hashed { max_index, .. } => *max_index,
            DiscreteProposal::LastPoint { tables } => Some(tables.len()),
        }
    }

    fn sample(&self, j: usize, prev: &usize, earlier: &[usize], rng: &mut dyn RngCore) -> usize {
        let probs: Vec<f64> = self.log_row(j, *prev, earlier).into_iter().map(f64::exp).collect();
        // rows are valid distributions by construction
        sample_categorical(&probs, rng.gen::<f64>()).expect("non-empty row")
    }

    fn log_density(&self, j: usize, candidate: &usize, prev: &usize, earlier: &[usize]) -> f64 {
        self.log_row(j, *prev, earlier)[*candidate]
    }
}

/// Finite-state target (log masses) with its proposal tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    log_p: Vec<f64>,
    proposal: DiscreteProposal,
}

impl DiscreteModel {
    pub fn new(log_p: Vec<f64>, proposal: DiscreteProposal) -> Result<Self> {
        proposal.validate()?;
        if log_p.len() != proposal.states() {
            return Err(Error::Model(format!(
                "target has {} states but the proposal has {}",
                log_p.len(),
                proposal.states()
            )));
        }
        if log_p.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Model("target log masses must be finite or -inf".into()));
        }
        if log_p.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::Model("target has no positive mass".into()));
        }
        Ok(Self { log_p, proposal })
    }

    /// Builds the model from unnormalized (linear) masses.
    pub fn from_masses(masses: &[f64], proposal: DiscreteProposal) -> Result<Self> {
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Model("target masses must be finite and non-negative".into()));
        }
        Self::new(masses.iter().map(|m| m.ln()).collect(), proposal)
    }

    /// Strictly positive random masses in `[0.2, 2)` with a hashed proposal.
    pub fn random(states: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let masses: Vec<f64> = (0..states).map(|_| rng.gen_range(0.2..2.0)).collect();
        let proposal = DiscreteProposal::hashed(states, rng.gen(), 1.0);
        Self::from_masses(&masses, proposal).expect("valid random model")
    }

    pub fn states(&self) -> usize {
        self.log_p.len()
    }

    pub fn log_p(&self) -> &[f64] {
        &self.log_p
    }

    pub fn proposal(&self) -> &DiscreteProposal {
        &self.proposal
    }

    pub fn normalized_target(&self) -> Vec<f64> {
        normalize_log_weights(&self.log_p).expect("validated target")
    }
}

impl TargetDensity<usize> for DiscreteModel {
    fn log_density(&self, x: &usize) -> f64 {
        self.log_p[*x]
    }
}
