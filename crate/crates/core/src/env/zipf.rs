//! Zipf content popularity and request sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{domain, Result};

/// Probability of the content at `rank` (1-based) in a Zipf law with
/// exponent `exponent` over `population` items.
pub fn zipf_pmf(rank: usize, exponent: f64, population: usize) -> Result<f64> {
    if population == 0 || rank == 0 || rank > population {
        return Err(domain(format!("zipf rank {rank} outside 1..={population}")));
    }
    if !(exponent >= 0.0) || !exponent.is_finite() {
        return Err(domain(format!("zipf exponent {exponent} must be finite and >= 0")));
    }
    Ok((rank as f64).powf(-exponent) / harmonic(exponent, population))
}

/// The full popularity vector, index `i` holding the probability of rank `i + 1`.
pub fn zipf_distribution(exponent: f64, population: usize) -> Result<Vec<f64>> {
    if population == 0 {
        return Err(domain("zipf population must be at least 1"));
    }
    if !(exponent >= 0.0) || !exponent.is_finite() {
        return Err(domain(format!("zipf exponent {exponent} must be finite and >= 0")));
    }
    let norm = harmonic(exponent, population);
    Ok((1..=population).map(|k| (k as f64).powf(-exponent) / norm).collect())
}

// Generalized harmonic number, summed smallest-first.
fn harmonic(exponent: f64, population: usize) -> f64 {
    (1..=population).rev().map(|i| (i as f64).powf(-exponent)).sum()
}

/// Draws a 1-based content id with probabilities `pmf`.
///
/// Panics if `pmf` is empty, has a negative entry, or sums to zero.
pub fn sample_request<R: Rng + ?Sized>(rng: &mut R, pmf: &[f64]) -> usize {
    let index = WeightedIndex::new(pmf).expect("request pmf must be a valid probability vector");
    index.sample(rng) + 1
}

/// Reusable sampler for a fixed popularity vector.
#[derive(Debug, Clone)]
pub struct RequestSampler {
    index: WeightedIndex<f64>,
}

impl RequestSampler {
    pub fn new(pmf: &[f64]) -> Result<Self> {
        let index = WeightedIndex::new(pmf).map_err(|e| domain(format!("invalid pmf: {e}")))?;
        Ok(Self { index })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng) + 1
    }
}
