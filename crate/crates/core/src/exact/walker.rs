//! Gray-code enumeration with analytic summation over an independent set.
//!
//! The free sites are split into an enumerated set `E` and an independent
//! set `I` (no bonds inside `I`). For each of the `2^|E|` configurations of
//! `E` the spins of `I` are summed in closed form, each contributing
//! `2 cosh(beta · h_i)` with `h_i` its field given the `E` spins.

use rayon::prelude::*;

use crate::hamiltonian::Hamiltonian;

/// `ln(2 cosh x)` without overflow.
#[inline]
pub(crate) fn ln_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Streaming `log Σ exp(x_k)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub(crate) fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

pub(crate) struct Plan {
    pub(crate) enumerated: Vec<usize>,
    e_field: Vec<f64>,
    i_field: Vec<f64>,
    e_adj: Vec<Vec<(usize, f64)>>,
    e_to_i: Vec<Vec<(usize, f64)>>,
    constant: f64,
}

/// Largest independent set found: the bigger colour class of each bipartite
/// component, otherwise greedy by ascending degree.
fn independent_set(h: &Hamiltonian) -> Vec<bool> {
    let n = h.len();
    let greedy = {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&k| (h.neighbors(k).len(), k));
        let mut chosen = vec![false; n];
        let mut blocked = vec![false; n];
        for k in order {
            if !blocked[k] {
                chosen[k] = true;
                blocked[k] = true;
                for &(j, _) in h.neighbors(k) {
                    blocked[j] = true;
                }
            }
        }
        chosen
    };
    let bipartite = (|| {
        let mut colour: Vec<Option<bool>> = vec![None; n];
        let mut chosen = vec![false; n];
        for start in 0..n {
            if colour[start].is_some() {
                continue;
            }
            colour[start] = Some(false);
            let mut component = vec![start];
            let mut stack = vec![start];
            while let Some(k) = stack.pop() {
                let c = colour[k].unwrap();
                for &(j, _) in h.neighbors(k) {
                    match colour[j] {
                        None => {
                            colour[j] = Some(!c);
                            component.push(j);
                            stack.push(j);
                        }
                        Some(cj) if cj == c => return None,
                        Some(_) => {}
                    }
                }
            }
            let ones = component.iter().filter(|&&k| colour[k] == Some(true)).count();
            let pick = ones > component.len() - ones;
            for k in component {
                chosen[k] = colour[k] == Some(pick);
            }
        }
        Some(chosen)
    })();
    let count = |v: &Vec<bool>| v.iter().filter(|&&b| b).count();
    match bipartite {
        Some(b) if count(&b) >= count(&greedy) => b,
        _ => greedy,
    }
}

impl Plan {
    /// `eliminate = false` enumerates every site (needed for observables
    /// that depend on all spins).
    pub(crate) fn new(h: &Hamiltonian, eliminate: bool) -> Plan {
        let n = h.len();
        let in_i = if eliminate {
            independent_set(h)
        } else {
            vec![false; n]
        };
        let mut local = vec![0usize; n];
        let mut enumerated = Vec::new();
        let mut eliminated = Vec::new();
        for k in 0..n {
            if in_i[k] {
                local[k] = eliminated.len();
                eliminated.push(k);
            } else {
                local[k] = enumerated.len();
                enumerated.push(k);
            }
        }
        let mut e_adj = vec![Vec::new(); enumerated.len()];
        let mut e_to_i = vec![Vec::new(); enumerated.len()];
        for b in h.bonds() {
            match (in_i[b.a], in_i[b.b]) {
                (false, false) => {
                    e_adj[local[b.a]].push((local[b.b], b.coupling));
                    e_adj[local[b.b]].push((local[b.a], b.coupling));
                }
                (false, true) => e_to_i[local[b.a]].push((local[b.b], b.coupling)),
                (true, false) => e_to_i[local[b.b]].push((local[b.a], b.coupling)),
                (true, true) => unreachable!("independent set contains a bond"),
            }
        }
        Plan {
            e_field: enumerated.iter().map(|&k| h.fields()[k]).collect(),
            i_field: eliminated.iter().map(|&k| h.fields()[k]).collect(),
            enumerated,
            e_adj,
            e_to_i,
            constant: h.constant(),
        }
    }

    pub(crate) fn num_enumerated(&self) -> usize {
        self.enumerated.len()
    }

    /// Runs `visit` over every configuration of the enumerated set, in
    /// parallel blocks. Returns the per-block accumulators in block order, so
    /// a sequential fold over them is independent of the thread count.
    pub(crate) fn walk<T, M, V>(&self, beta: f64, make: M, visit: V) -> Vec<T>
    where
        T: Send,
        M: Fn() -> T + Sync,
        V: Fn(&mut T, &Walker<'_>) + Sync,
    {
        let n = self.num_enumerated();
        let low = n.min(14);
        let high = n - low;
        (0..1u64 << high)
            .into_par_iter()
            .map(|block| {
                let mut acc = make();
                let mut w = Walker::new(self, beta);
                w.reset(block << low);
                visit(&mut acc, &w);
                for t in 1..1u64 << low {
                    w.flip(t.trailing_zeros() as usize);
                    visit(&mut acc, &w);
                }
                acc
            })
            .collect()
    }
}

pub(crate) struct Walker<'a> {
    plan: &'a Plan,
    beta: f64,
    pub(crate) spins: Vec<i8>,
    /// Energy of the enumerated spins alone (bonds inside `E` and fields on `E`).
    e_energy: f64,
    i_local: Vec<f64>,
    sum_ln_2cosh: f64,
    magnetization: i64,
}

impl<'a> Walker<'a> {
    fn new(plan: &'a Plan, beta: f64) -> Self {
        Walker {
            plan,
            beta,
            spins: vec![-1; plan.enumerated.len()],
            e_energy: 0.0,
            i_local: plan.i_field.clone(),
            sum_ln_2cosh: 0.0,
            magnetization: 0,
        }
    }

    fn reset(&mut self, bits: u64) {
        let p = self.plan;
        for (k, s) in self.spins.iter_mut().enumerate() {
            *s = if bits >> k & 1 == 1 { 1 } else { -1 };
        }
        let mut e = 0.0;
        for (k, adj) in p.e_adj.iter().enumerate() {
            let sk = f64::from(self.spins[k]);
            e -= p.e_field[k] * sk;
            for &(j, c) in adj {
                if j > k {
                    e -= c * sk * f64::from(self.spins[j]);
                }
            }
        }
        self.e_energy = e;
        self.i_local.copy_from_slice(&p.i_field);
        for (k, links) in p.e_to_i.iter().enumerate() {
            for &(i, c) in links {
                self.i_local[i] += c * f64::from(self.spins[k]);
            }
        }
        self.sum_ln_2cosh = self.i_local.iter().map(|&h| ln_2cosh(self.beta * h)).sum();
        self.magnetization = self.spins.iter().map(|&s| i64::from(s)).sum();
    }

    #[inline]
    fn flip(&mut self, k: usize) {
        let p = self.plan;
        let old = f64::from(self.spins[k]);
        let mut local = p.e_field[k];
        for &(j, c) in &p.e_adj[k] {
            local += c * f64::from(self.spins[j]);
        }
        self.e_energy += 2.0 * old * local;
        for &(i, c) in &p.e_to_i[k] {
            let before = self.i_local[i];
            let after = before - 2.0 * c * old;
            self.i_local[i] = after;
            self.sum_ln_2cosh += ln_2cosh(self.beta * after) - ln_2cosh(self.beta * before);
        }
        self.spins[k] = -self.spins[k];
        self.magnetization += 2 * i64::from(self.spins[k]);
    }

    /// Log of the weight of this `E` configuration summed over `I`.
    #[inline]
    pub(crate) fn log_weight(&self) -> f64 {
        -self.beta * (self.plan.constant + self.e_energy) + self.sum_ln_2cosh
    }

    /// Lowest energy over the `I` spins for this `E` configuration, and the
    /// number of `I` sites whose field vanishes (each doubles the degeneracy).
    pub(crate) fn min_energy(&self, zero_tol: f64) -> (f64, u32) {
        let mut e = self.plan.constant + self.e_energy;
        let mut zeros = 0;
        for &h in &self.i_local {
            if h.abs() <= zero_tol {
                zeros += 1;
            } else {
                e -= h.abs();
            }
        }
        (e, zeros)
    }

    /// Sum of the enumerated spins; only the total magnetization when
    /// nothing was eliminated.
    pub(crate) fn magnetization(&self) -> i64 {
        self.magnetization
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [-3.0, 0.5, 2.0, -700.0, 1.0];
        let mut acc = LogSumExp::new();
        for x in xs {
            acc.add(x);
        }
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((acc.value() - direct).abs() < 1e-14);

        let mut a = LogSumExp::new();
        let mut b = LogSumExp::new();
        a.add(1.0);
        b.add(5.0);
        b.add(-2.0);
        a.merge(&b);
        let direct = (1f64.exp() + 5f64.exp() + (-2f64).exp()).ln();
        assert!((a.value() - direct).abs() < 1e-14);
    }

    #[test]
    fn ln_2cosh_is_stable() {
        assert!((ln_2cosh(0.3) - (2.0 * 0.3f64.cosh()).ln()).abs() < 1e-15);
        assert!((ln_2cosh(-800.0) - 800.0).abs() < 1e-12);
    }
}
