//! Curie-Weiss computations: fixed points, the decimated single-spin
//! conditional at fixed empirical magnetization of the conditioning spins,
//! jump scans in `β`, and an exact finite-`N` sector sum.
//!
//! Weights are `exp((β/2N)(Σσ)² + βh Σσ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::logistic;
use crate::output::{Cell, Csv};

/// `I(m)`: negative entropy per spin at magnetization `m`, zero at `m = ±1`.
pub fn neg_entropy(m: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() };
    term(0.5 * (1.0 + m)) + term(0.5 * (1.0 - m))
}

/// `f(m) = -β m²/2 - h m + I(m)`.
pub fn cw_free_energy(beta: f64, h: f64, m: f64) -> f64 {
    -0.5 * beta * m * m - h * m + neg_entropy(m)
}

/// Local minima of the Curie-Weiss functional and the global choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwSolution {
    /// Global minimizer; the positive branch when two minima tie.
    pub m: f64,
    /// Local minima in increasing order (one or two).
    pub minima: Vec<f64>,
    /// Two minima with equal free energy.
    pub tie: bool,
}

impl CwSolution {
    pub fn plus(&self) -> Option<f64> {
        let m = *self.minima.last()?;
        (self.minima.len() == 2 || m >= 0.0).then_some(m)
    }

    pub fn minus(&self) -> Option<f64> {
        let m = *self.minima.first()?;
        (self.minima.len() == 2 || m <= 0.0).then_some(m)
    }
}

/// Root of the increasing function `g` on `(lo, hi)`, bisected down to
/// adjacent floats.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return if g(lo).abs() <= g(hi).abs() { lo } else { hi };
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Stable solutions of `m = tanh(β m + h)`, compared by free energy.
pub fn cw_magnetization(beta_eff: f64, h_eff: f64) -> Result<CwSolution> {
    if !(beta_eff >= 0.0 && beta_eff.is_finite()) {
        return Err(invalid("beta_eff", "must be finite and ≥ 0"));
    }
    if !h_eff.is_finite() {
        return Err(invalid("h_eff", "must be finite"));
    }
    // g = atanh(m) - β m - h; local minima of f are its up-crossings.
    let g = |m: f64| m.atanh() - beta_eff * m - h_eff;
    let below = -1.0f64;
    let above = 1.0f64;
    let mut minima = Vec::new();
    if beta_eff <= 1.0 {
        minima.push(bisect(g, below, above));
    } else {
        let mc = (1.0 - 1.0 / beta_eff).sqrt();
        if g(-mc) >= 0.0 {
            minima.push(bisect(g, below, -mc));
        }
        if g(mc) <= 0.0 {
            minima.push(bisect(g, mc, above));
        }
        if minima.is_empty() {
            return Err(Error::Degenerate("no stable Curie-Weiss solution found".into()));
        }
    }
    let (m, tie) = match minima.as_slice() {
        [m] => (*m, false),
        [a, b] => {
            let (fa, fb) = (cw_free_energy(beta_eff, h_eff, *a), cw_free_energy(beta_eff, h_eff, *b));
            let tie = (fa - fb).abs() <= 1e-13 * (1.0 + fa.abs());
            (if tie || fb < fa { *b } else { *a }, tie)
        }
        _ => unreachable!(),
    };
    Ok(CwSolution { m, minima, tie })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwParams {
    pub beta: f64,
    pub h: f64,
    /// Fraction of spins decimated away.
    pub p: f64,
    /// Empirical magnetization of the conditioning spins.
    pub alpha: f64,
}

impl CwParams {
    pub fn new(beta: f64, h: f64, p: f64, alpha: f64) -> Result<Self> {
        let c = CwParams { beta, h, p, alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be finite and ≥ 0"));
        }
        if !self.h.is_finite() {
            return Err(invalid("h", "must be finite"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid("p", format!("must lie in (0, 1), got {}", self.p)));
        }
        if !(-1.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", format!("must lie in [-1, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRecord {
    pub probability: f64,
    /// Magnetization of the hidden spins on the chosen branch.
    pub m: f64,
    pub x: f64,
    pub branches: usize,
    pub tie: bool,
}

/// Limit conditional probability that a retained spin is `+1` given the
/// conditioning spins have empirical magnetization `alpha`.
pub fn cw_decimated_conditional(params: &CwParams, branch: Branch) -> Result<f64> {
    Ok(cw_decimated_conditional_detail(params, branch)?.probability)
}

pub fn cw_decimated_conditional_detail(params: &CwParams, branch: Branch) -> Result<ConditionalRecord> {
    params.validate()?;
    let CwParams { beta, h, p, alpha } = *params;
    let sol = cw_magnetization(p * beta, beta * ((1.0 - p) * alpha + h))?;
    let m = match branch {
        Branch::Auto => sol.m,
        Branch::Plus => sol.plus().ok_or(Error::NoSuchBranch("plus"))?,
        Branch::Minus => sol.minus().ok_or(Error::NoSuchBranch("minus"))?,
    };
    let x = beta * (p * m + (1.0 - p) * alpha) + beta * h;
    Ok(ConditionalRecord {
        probability: logistic(2.0 * x),
        m,
        x,
        branches: sol.minima.len(),
        tie: sol.tie,
    })
}

pub const JUMP_OFFSET: f64 = 1e-8;
pub const JUMP_DETECTION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpPoint {
    pub beta: f64,
    /// `raw` when it exceeds the detection threshold, otherwise 0.
    pub jump: f64,
    /// `|P(α = +ε) - P(α = -ε)|`.
    pub raw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpScan {
    pub p: f64,
    pub h: f64,
    pub offset: f64,
    pub detection: f64,
    pub points: Vec<JumpPoint>,
    /// First grid `β` with a detected jump.
    pub threshold: Option<f64>,
}

impl JumpScan {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["beta", "jump"]);
        for pt in &self.points {
            csv.row(vec![Cell::from(pt.beta), pt.jump.into()]);
        }
        csv.into_string()
    }

    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "p": self.p,
            "h": self.h,
            "offset": self.offset,
            "detection": self.detection,
            "threshold": self.threshold,
            "points": self.points.len(),
        })
        .to_string()
    }
}

/// One-sided jump of the auto-branch conditional at `α = 0` for each `β`.
pub fn cw_jump_scan(betas: &[f64], p: f64, h: f64) -> Result<JumpScan> {
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("betas", "grid must be sorted"));
    }
    let points: Vec<JumpPoint> = betas
        .par_iter()
        .map(|&beta| {
            let up = cw_decimated_conditional(&CwParams::new(beta, h, p, JUMP_OFFSET)?, Branch::Auto)?;
            let down = cw_decimated_conditional(&CwParams::new(beta, h, p, -JUMP_OFFSET)?, Branch::Auto)?;
            let raw = (up - down).abs();
            Ok(JumpPoint {
                beta,
                jump: if raw > JUMP_DETECTION { raw } else { 0.0 },
                raw,
            })
        })
        .collect::<Result<_>>()?;
    let threshold = points.iter().find(|pt| pt.jump > 0.0).map(|pt| pt.beta);
    Ok(JumpScan {
        p,
        h,
        offset: JUMP_OFFSET,
        detection: JUMP_DETECTION,
        points,
        threshold,
    })
}

fn integral(x: f64, name: &'static str) -> Result<u64> {
    let r = x.round();
    if (x - r).abs() > 1e-9 || r < 0.0 {
        return Err(invalid(name, format!("{x} is not a non-negative integer")));
    }
    Ok(r as u64)
}

/// Hidden spins, conditioning spins and up conditioning spins for the
/// finite-N oracle; errors when any of them is not an integer.
fn oracle_counts(n: usize, params: &CwParams) -> Result<(u64, u64, u64)> {
    params.validate()?;
    if n == 0 || n > 10_000 {
        return Err(invalid("n", "must lie in 1..=10000"));
    }
    let hidden = integral(params.p * n as f64, "p·N")?;
    let cond = integral((1.0 - params.p) * n as f64, "(1-p)·N")?;
    let cond_up = integral(cond as f64 * (1.0 + params.alpha) / 2.0, "(1-p)N(1+α)/2")?;
    Ok((hidden, cond, cond_up))
}

/// Checks that [`cw_oracle_extrapolated`] accepts `(n, params)` without
/// evaluating it.
pub fn validate_extrapolated_oracle(n: usize, params: &CwParams) -> Result<()> {
    oracle_counts(n, params)?;
    oracle_counts(2 * n, params)?;
    Ok(())
}

/// Exact conditional for `pN` hidden spins, `(1-p)N` conditioning spins of
/// magnetization `alpha`, and one target spin, summing over the hidden
/// magnetization sectors with log-binomial weights.
pub fn cw_finite_n_oracle(n: usize, params: &CwParams) -> Result<f64> {
    let (hidden, cond, cond_up) = oracle_counts(n, params)?;
    let CwParams { beta, h, .. } = *params;
    let cond_sum = 2.0 * cond_up as f64 - cond as f64;
    let mut ln_fact = vec![0.0f64; hidden as usize + 1];
    for k in 1..=hidden as usize {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let scale = beta / (2.0 * n as f64);
    let mut terms = [Vec::new(), Vec::new()];
    for up in 0..=hidden as usize {
        let ln_binom = ln_fact[hidden as usize] - ln_fact[up] - ln_fact[hidden as usize - up];
        let s_hidden = 2.0 * up as f64 - hidden as f64;
        for (slot, target) in [1.0, -1.0].into_iter().enumerate() {
            let total = s_hidden + cond_sum + target;
            terms[slot].push(ln_binom + scale * total * total + beta * h * total);
        }
    }
    let lse = |xs: &[f64]| {
        let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    };
    Ok(logistic(lse(&terms[0]) - lse(&terms[1])))
}

/// Richardson extrapolation `2 P(2N) - P(N)` of the oracle in `1/N`.
pub fn cw_oracle_extrapolated(n: usize, params: &CwParams) -> Result<f64> {
    Ok(2.0 * cw_finite_n_oracle(2 * n, params)? - cw_finite_n_oracle(n, params)?)
}

/// Curie-Weiss magnetization with two-valued random fields `±h`, `+h` on a
/// fraction `q` of the spins: stable solutions of
/// `m = q tanh(βm + βh) + (1 - q) tanh(βm - βh)`.
pub fn cw_random_field_magnetization(beta: f64, h: f64, q: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid("q", "must lie in [0, 1]"));
    }
    let rhs = |m: f64| q * (beta * m + beta * h).tanh() + (1.0 - q) * (beta * m - beta * h).tanh();
    // stable fixed points are down-crossings of rhs(m) - m on a fine grid
    let grid = 4000;
    let d = |m: f64| rhs(m) - m;
    let mut out = Vec::new();
    let mut prev = -1.0;
    for k in 1..=grid {
        let m = -1.0 + 2.0 * k as f64 / grid as f64;
        if d(prev) > 0.0 && d(m) <= 0.0 {
            out.push(bisect(|x| -d(x), prev, m));
        }
        prev = m;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Damped iteration from both saturated starts, then free-energy choice.
    fn damped(beta: f64, h: f64) -> f64 {
        let run = |mut m: f64| {
            for _ in 0..100_000 {
                let next = 0.5 * m + 0.5 * (beta * m + h).tanh();
                if (next - m).abs() < 1e-12 {
                    return next;
                }
                m = next;
            }
            m
        };
        let (a, b) = (run(1.0), run(-1.0));
        if cw_free_energy(beta, h, a) <= cw_free_energy(beta, h, b) + 1e-14 {
            a
        } else {
            b
        }
    }

    #[test]
    fn magnetization_examples() {
        for beta in [0.2, 0.7, 1.0] {
            assert_abs_diff_eq!(cw_magnetization(beta, 0.0).unwrap().m, 0.0, epsilon = 1e-4);
        }
        let s = cw_magnetization(1.5, 0.0).unwrap();
        assert!(s.tie);
        assert_eq!(s.minima.len(), 2);
        assert_abs_diff_eq!(s.m, 0.8578, epsilon = 1e-3);
        assert_abs_diff_eq!(s.m, (1.5 * s.m).tanh(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.m, damped(1.5, 0.0), epsilon = 1e-10);
        assert!((cw_magnetization(1.0, 10.0).unwrap().m - 1.0).abs() < 1e-8);
        assert!((cw_magnetization(1.0, -10.0).unwrap().m + 1.0).abs() < 1e-8);
    }

    #[test]
    fn solver_agrees_with_damped_iteration() {
        for (beta, h) in [(0.5, 0.3), (1.2, -0.1), (2.0, 0.05), (3.0, -0.4), (1.5, 0.0)] {
            let m = cw_magnetization(beta, h).unwrap().m;
            assert_abs_diff_eq!(m, damped(beta, h), epsilon = 1e-9);
        }
    }

    #[test]
    fn branches_exist_only_where_stable() {
        let weak = CwParams::new(1.0, 0.0, 0.75, 0.3).unwrap();
        assert!(cw_decimated_conditional(&weak, Branch::Plus).is_ok());
        assert!(matches!(cw_decimated_conditional(&weak, Branch::Minus), Err(Error::NoSuchBranch(_))));
        let strong = CwParams::new(2.0, 0.0, 0.75, 0.01).unwrap();
        let plus = cw_decimated_conditional(&strong, Branch::Plus).unwrap();
        let minus = cw_decimated_conditional(&strong, Branch::Minus).unwrap();
        assert!(plus > 0.5 && minus < 0.5);
    }

    #[test]
    fn jump_at_beta_two() {
        let up = cw_decimated_conditional_detail(&CwParams::new(2.0, 0.0, 0.75, 1e-8).unwrap(), Branch::Auto).unwrap();
        let down = cw_decimated_conditional(&CwParams::new(2.0, 0.0, 0.75, -1e-8).unwrap(), Branch::Auto).unwrap();
        assert_abs_diff_eq!(up.probability - down, up.x.tanh(), epsilon = 1e-6);
        assert_abs_diff_eq!(up.probability - down, 0.858, epsilon = 1e-3);
    }

    #[test]
    fn oracle_examples() {
        let p = CwParams::new(0.0, 0.0, 0.75, 0.2).unwrap();
        assert_eq!(cw_finite_n_oracle(1000, &p).unwrap(), 0.5);
        for alpha in [0.2, 0.6] {
            let a = cw_finite_n_oracle(1000, &CwParams::new(1.6, 0.0, 0.75, alpha).unwrap()).unwrap();
            let b = cw_finite_n_oracle(1000, &CwParams::new(1.6, 0.0, 0.75, -alpha).unwrap()).unwrap();
            assert_abs_diff_eq!(a + b, 1.0, epsilon = 1e-12);
        }
        assert!(cw_finite_n_oracle(2000, &CwParams::new(2.0, 0.0, 0.75, 0.05).unwrap()).is_err());
    }

    #[test]
    fn half_decimation_threshold_is_two() {
        let betas: Vec<f64> = (0..=200).map(|k| 1.5 + k as f64 * 0.01).collect();
        let scan = cw_jump_scan(&betas, 0.5, 0.0).unwrap();
        assert!((scan.threshold.unwrap() - 2.0).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn random_field_mean_field_branches() {
        assert_eq!(cw_random_field_magnetization(0.5, 0.3, 0.5).unwrap().len(), 1);
        assert_eq!(cw_random_field_magnetization(3.0, 0.3, 0.5).unwrap().len(), 2);
    }
}
