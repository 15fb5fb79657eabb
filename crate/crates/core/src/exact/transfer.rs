//! Transfer matrices for translation-invariant 1D chains of range `R`.
//!
//! The state is a block of `R` consecutive spins and the matrix maps a block
//! to the next one, so every entry is strictly positive. It is applied as `R`
//! single-spin shifts, each costing `2 · 2^R`.

use crate::error::{invalid, Error, Result};
use crate::model::SpinModel;

pub const MAX_TRANSFER_RANGE: usize = 14;

const RELATIVE_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200_000;

#[derive(Clone, Debug)]
pub struct TransferMatrix {
    range: usize,
    beta: f64,
    couplings: Vec<f64>,
    field: f64,
    /// Per shift state, `beta` times the local field felt by the incoming spin.
    local: Vec<f64>,
    /// Subtracted from every log shift weight to keep entries `≤ 1`.
    shift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeadingEigenvalue {
    /// `log λ` of the single-spin shift, i.e. `(1/R) log λ_block`.
    pub log_per_site: f64,
    pub iterations: usize,
    /// Relative width of the final Collatz-Wielandt bracket.
    pub bracket: f64,
}

impl TransferMatrix {
    /// `couplings[r-1] = J(r)` for `r = 1..=R`.
    pub fn new(couplings: &[f64], field: f64, beta: f64) -> Result<Self> {
        let range = couplings.len().max(1);
        if range > MAX_TRANSFER_RANGE {
            return Err(Error::TransferRangeCap {
                range,
                cap: MAX_TRANSFER_RANGE,
            });
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(invalid("beta", "transfer-matrix free energy needs 0 < beta < ∞"));
        }
        let mut couplings = couplings.to_vec();
        couplings.resize(range, 0.0);
        let local: Vec<f64> = (0..1usize << range)
            .map(|s| {
                let f = field
                    + couplings
                        .iter()
                        .enumerate()
                        .map(|(r, j)| j * spin(s, r))
                        .sum::<f64>();
                beta * f
            })
            .collect();
        let shift = local.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        Ok(TransferMatrix {
            range,
            beta,
            couplings,
            field,
            local,
            shift,
        })
    }

    /// Couplings of a 1D model; `field` replaces its uniform field.
    pub fn from_model(model: &SpinModel, field: f64) -> Result<Self> {
        if model.dim() != 1 {
            return Err(invalid("model", "transfer matrices need a 1D model"));
        }
        if model.quenched().is_some() || !model.interaction().site_fields().is_empty() {
            return Err(invalid("model", "transfer matrices need a translation-invariant model"));
        }
        let range = model.interaction().range();
        if range > MAX_TRANSFER_RANGE {
            return Err(Error::TransferRangeCap {
                range,
                cap: MAX_TRANSFER_RANGE,
            });
        }
        let couplings: Vec<f64> = (1..=range as i64)
            .map(|r| model.interaction().coupling(&crate::Site::new([r])))
            .collect();
        TransferMatrix::new(&couplings, field, model.beta())
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn dimension(&self) -> usize {
        1 << self.range
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    /// Block entry `T(s, s')`: weight of appending the `R` spins of `s'`
    /// (bit 0 = most recent) after block `s`.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        let mut state = from;
        let mut log_w = 0.0;
        for k in (0..self.range).rev() {
            let up = to >> k & 1 == 1;
            log_w += if up { self.local[state] } else { -self.local[state] };
            state = self.next(state, up);
        }
        debug_assert_eq!(state, to);
        log_w.exp()
    }

    #[inline]
    fn next(&self, state: usize, up: bool) -> usize {
        ((state << 1) | usize::from(up)) & (self.dimension() - 1)
    }

    /// `out = S v` for the scaled single-spin shift `S`.
    fn apply_shift(&self, v: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            let l = self.local[s];
            let up = (l - self.shift).exp() * v[self.next(s, true)];
            let down = (-l - self.shift).exp() * v[self.next(s, false)];
            *o = up + down;
        }
    }

    /// Power iteration on the block matrix until the Collatz-Wielandt
    /// bracket `[min_i (Tv)_i/v_i, max_i (Tv)_i/v_i]` is tighter than `1e-12`
    /// relative.
    pub fn leading_eigenvalue(&self) -> Result<LeadingEigenvalue> {
        let n = self.dimension();
        let mut v = vec![1.0; n];
        let mut w = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut width = f64::INFINITY;
        for it in 1..=MAX_ITERATIONS {
            tmp.copy_from_slice(&v);
            for _ in 0..self.range {
                self.apply_shift(&tmp, &mut w);
                std::mem::swap(&mut tmp, &mut w);
            }
            let (lo, hi) = tmp
                .iter()
                .zip(&v)
                .map(|(a, b)| a / b)
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
            width = (hi - lo) / hi;
            let norm = tmp.iter().sum::<f64>();
            for (x, y) in v.iter_mut().zip(&tmp) {
                *x = y / norm;
            }
            if width <= RELATIVE_TOLERANCE {
                let lambda_block = 0.5 * (lo + hi);
                return Ok(LeadingEigenvalue {
                    log_per_site: lambda_block.ln() / self.range as f64 + self.shift,
                    iterations: it,
                    bracket: width,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            last_change: width,
        })
    }

    /// Free energy per site `-(1/beta) log λ`.
    pub fn free_energy(&self) -> Result<f64> {
        Ok(-self.leading_eigenvalue()?.log_per_site / self.beta)
    }

    /// `log Tr S^L`, the partition function of a periodic ring of `L > R`
    /// sites.
    pub fn log_partition_ring(&self, len: usize) -> Result<f64> {
        if len <= self.range {
            return Err(invalid("len", format!("ring length must exceed the range {}", self.range)));
        }
        let n = self.dimension();
        let mut trace = 0.0;
        let mut v = vec![0.0; n];
        let mut w = vec![0.0; n];
        for s in 0..n {
            v.iter_mut().for_each(|x| *x = 0.0);
            v[s] = 1.0;
            for _ in 0..len {
                self.apply_shift(&v, &mut w);
                std::mem::swap(&mut v, &mut w);
            }
            trace += v[s];
        }
        Ok(trace.ln() + len as f64 * self.shift)
    }
}

#[inline]
fn spin(state: usize, bit: usize) -> f64 {
    if state >> bit & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Free energy per site of a 1D translation-invariant model in field `h`.
pub fn transfer_matrix_free_energy(model: &SpinModel, h: f64) -> Result<f64> {
    TransferMatrix::from_model(model, h)?.free_energy()
}
