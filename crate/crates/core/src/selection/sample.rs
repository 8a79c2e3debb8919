//! Weighted sampling without replacement.
//!
//! Uses Efraimidis–Spirakis exponential keys: item `i` draws `u_i ~ U(0, 1]`
//! from a ChaCha8 stream seeded with the run seed (one draw per item, in input
//! order) and gets key `ln(u_i) / w_i`. Sorting keys in descending order yields
//! a draw sequence distributed exactly like repeated draws with probability
//! proportional to weight among the remaining items.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Full draw order over `weights` (indices into the input).
pub fn weighted_order(weights: &[f64], seed: u64) -> Result<Vec<usize>> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "sampling weights must be finite and positive, got {w}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u = 1.0 - rng.random::<f64>();
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}
