//! Discrete Hardy inequality for running averages of positive sequences.

use rand::RngExt;

use crate::error::{invalid, Result};
use crate::par::{map_range, Exec};
use crate::rng::probe_rng;

/// The explicit constant of the inequality.
pub const HARDY_CONSTANT: f64 = 18.0;

/// `sum_{l=1}^L R_l^2 / sum_{l=0}^L r_l^2` with `R_l = (1/l) sum_{m=0}^l r_m`,
/// for `r = (r_0, ..., r_L)`.
pub fn hardy_ratio(r: &[f64]) -> Result<f64> {
    if r.len() < 2 {
        return Err(invalid("a Hardy sequence needs at least two terms"));
    }
    if let Some(m) = r.iter().position(|&x| !(x > 0.0)) {
        return Err(invalid(format!("entry {m} of the sequence is not positive ({})", r[m])));
    }
    let mut partial = r[0];
    let mut num = 0.0;
    for (l, &x) in r.iter().enumerate().skip(1) {
        partial += x;
        let big_r = partial / l as f64;
        num += big_r * big_r;
    }
    let den: f64 = r.iter().map(|x| x * x).sum();
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HardyReport {
    pub trials: usize,
    pub max_len: usize,
    pub max_ratio: f64,
    /// Index of the sequence attaining the maximum.
    pub argmax: usize,
}

impl HardyReport {
    pub fn passed(&self) -> bool {
        self.max_ratio <= HARDY_CONSTANT
    }
}

pub fn check_hardy(sequences: &[Vec<f64>], exec: Exec) -> Result<HardyReport> {
    let ratios = map_range(exec, sequences.len(), |i| hardy_ratio(&sequences[i]));
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, r) in ratios.into_iter().enumerate() {
        let r = r?;
        if r > best.0 {
            best = (r, i);
        }
    }
    Ok(HardyReport {
        trials: sequences.len(),
        max_len: sequences.iter().map(|s| s.len() - 1).max().unwrap_or(0),
        max_ratio: best.0,
        argmax: best.1,
    })
}

/// Random positive test sequences `r_0..r_L` with `1 <= L <= max_len`.
///
/// Sequences cycle through four shapes: uniform entries, geometric decay,
/// geometric growth and a single dominant spike over a tiny floor.
pub fn random_sequences(trials: usize, max_len: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..trials)
        .map(|i| {
            let mut rng = probe_rng(seed, i as u64);
            let len = rng.random_range(1..=max_len.max(1)) + 1;
            match i % 4 {
                0 => (0..len).map(|_| rng.random_range(1e-3..1.0)).collect(),
                1 => {
                    let q: f64 = rng.random_range(0.1..1.0);
                    (0..len).map(|m| q.powi(m as i32).max(1e-300)).collect()
                }
                2 => {
                    let q: f64 = rng.random_range(1.0..1.05);
                    (0..len).map(|m| q.powi(m as i32)).collect()
                }
                _ => {
                    let spike = rng.random_range(0..len);
                    (0..len).map(|m| if m == spike { 1.0 } else { 1e-9 }).collect()
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequence() {
        let r = hardy_ratio(&[1.0; 4]).unwrap();
        let expect = (4.0 + 9.0 / 4.0 + 16.0 / 9.0) / 4.0;
        assert!((r - expect).abs() < 1e-15);
    }

    #[test]
    fn leading_spike_tends_to_basel_sum() {
        let mut r = vec![1e-9; 2001];
        r[0] = 1.0;
        let ratio = hardy_ratio(&r).unwrap();
        let basel = std::f64::consts::PI.powi(2) / 6.0;
        assert!(ratio < basel && basel - ratio < 1e-3);
    }

    #[test]
    fn rejects_nonpositive_entries() {
        assert!(hardy_ratio(&[1.0, 0.0]).is_err());
        assert!(hardy_ratio(&[1.0]).is_err());
    }

    #[test]
    fn random_sequences_respect_the_bound() {
        let seqs = random_sequences(400, 50, 3);
        assert!(seqs.iter().all(|s| s.len() >= 2 && s.len() <= 51 && s.iter().all(|&x| x > 0.0)));
        let rep = check_hardy(&seqs, Exec::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
