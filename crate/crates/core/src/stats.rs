//! Block-jackknife error estimation.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Default jackknife block length: `⌊√n⌋`, at least 1.
pub fn default_block(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

/// Block jackknife of `estimator(⟨x_1⟩, ..., ⟨x_K⟩)` over `K` observables
/// recorded per sample. Trailing samples that do not fill a block are dropped
/// from the resampling but kept in the central value.
pub fn block_jackknife<const K: usize>(
    samples: &[[f64; K]],
    block: usize,
    estimator: impl Fn(&[f64; K]) -> f64,
) -> Estimate {
    let n = samples.len();
    let mut total = [0.0; K];
    for s in samples {
        for k in 0..K {
            total[k] += s[k];
        }
    }
    let value = estimator(&total.map(|t| t / n as f64));
    let block = block.max(1);
    let nb = n / block;
    if nb < 2 {
        return Estimate {
            value,
            error: f64::NAN,
        };
    }
    let used = nb * block;
    let mut used_total = [0.0; K];
    let mut block_sums = vec![[0.0; K]; nb];
    for (i, s) in samples[..used].iter().enumerate() {
        for k in 0..K {
            block_sums[i / block][k] += s[k];
            used_total[k] += s[k];
        }
    }
    let leave_out: Vec<f64> = block_sums
        .iter()
        .map(|b| {
            let mut m = [0.0; K];
            for k in 0..K {
                m[k] = (used_total[k] - b[k]) / (used - block) as f64;
            }
            estimator(&m)
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / nb as f64;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (nb as f64 - 1.0) / nb as f64;
    Estimate {
        value,
        error: var.sqrt(),
    }
}

/// Mean with a block-jackknife standard error.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let samples: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
    block_jackknife(&samples, default_block(xs.len()), |m| m[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_of_mean_is_standard_error_for_iid_blocks() {
        let xs: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let samples: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        let e = block_jackknife(&samples, 1, |m| m[0]);
        assert_eq!(e.value, 0.0);
        // unit-variance samples: σ/√n with the n-1 convention
        let sd = (100.0f64 / 99.0).sqrt() / 10.0;
        assert!((e.error - sd).abs() < 1e-12);
    }

    #[test]
    fn too_few_blocks_gives_nan_error() {
        let e = mean_estimate(&[1.0]);
        assert_eq!(e.value, 1.0);
        assert!(e.error.is_nan());
    }
}
