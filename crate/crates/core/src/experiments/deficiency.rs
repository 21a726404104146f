//! Growth probe on a birth–death chain: solve `L_V u = -alpha u` by the
//! exact three-term recursion from the vertex relations, track the partial
//! sums `P_N = sum_{n<=N} mu(n) u(n)^2`, and classify their growth.  A
//! rapidly divergent `P_N` is evidence that no square-summable solution of
//! this type exists; a convergent one is evidence that one does.  The
//! recursion runs in signed log space so geometric weights and solutions far
//! beyond floating-point range stay representable.

use crate::graph::{GraphError, Vertex, WeightSeq};
use crate::potential::Potential;

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthClass {
    Divergent,
    Convergent,
    Inconclusive,
}

impl GrowthClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GrowthClass::Divergent => "divergent",
            GrowthClass::Convergent => "convergent",
            GrowthClass::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeficiencyReport {
    /// The leading solution values in plain arithmetic (up to index 30 and
    /// only while they stay within floating-point range).
    pub u_head: Vec<f64>,
    /// `(n, log|u(n)|, sign u(n))` at doubling indices and the endpoint.
    pub checkpoints: Vec<(usize, f64, i8)>,
    /// `(N, log P_N)` at the same indices.
    pub partial_log_sums: Vec<(usize, f64)>,
    /// `log P_N / log N` at the endpoint.
    pub growth_ratio: f64,
    pub classification: GrowthClass,
    pub alpha: f64,
    pub n: usize,
}

/// Signed log-space value: `sign * exp(log_abs)`, sign 0 for exact zero.
#[derive(Clone, Copy)]
struct SignedLog {
    sign: i8,
    log_abs: f64,
}

impl SignedLog {
    const ZERO: SignedLog = SignedLog {
        sign: 0,
        log_abs: f64::NEG_INFINITY,
    };

    fn from_value(v: f64) -> SignedLog {
        if v == 0.0 {
            SignedLog::ZERO
        } else {
            SignedLog {
                sign: if v > 0.0 { 1 } else { -1 },
                log_abs: v.abs().ln(),
            }
        }
    }

    /// Multiply by a plain scalar.
    fn scale(self, c: f64) -> SignedLog {
        if self.sign == 0 || c == 0.0 {
            return SignedLog::ZERO;
        }
        SignedLog {
            sign: if c > 0.0 { self.sign } else { -self.sign },
            log_abs: self.log_abs + c.abs().ln(),
        }
    }

    fn add(self, other: SignedLog) -> SignedLog {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_abs >= other.log_abs {
            (self, other)
        } else {
            (other, self)
        };
        let inner = big.sign as f64 + small.sign as f64 * (small.log_abs - big.log_abs).exp();
        if inner == 0.0 {
            return SignedLog::ZERO;
        }
        SignedLog {
            sign: if inner > 0.0 { 1 } else { -1 },
            log_abs: big.log_abs + inner.abs().ln(),
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Solve the chain recursion for `u(0) = 1` out to index `n`, reporting the
/// growth of the measure-weighted partial sums.
pub fn deficiency_probe_birth_death(
    b_seq: &WeightSeq,
    mu_seq: &WeightSeq,
    v: &Potential,
    alpha: f64,
    n: usize,
) -> Result<DeficiencyReport, ExperimentError> {
    assert!(n >= 2, "the probe needs at least two steps");
    assert!(
        alpha >= 0.0 && alpha.is_finite(),
        "the spectral parameter must be a finite nonnegative number"
    );
    b_seq.require_positive(Some(n)).map_err(|e| match e {
        GraphError::NonPositiveWeight { index, .. } => ExperimentError::ZeroWeight { index },
        other => ExperimentError::Graph(other),
    })?;
    mu_seq.require_positive(Some(n + 1))?;

    let checkpoints_at: Vec<usize> = {
        let mut cs = Vec::new();
        let mut c = 1usize;
        while c < n {
            cs.push(c);
            c *= 2;
        }
        cs.push(n);
        cs
    };

    // Signed-log track.
    let prev0 = SignedLog::from_value(1.0);
    let log_b0 = b_seq.log_value(0);
    let log_mu0 = mu_seq.log_value(0);
    let c0 = 1.0 + (log_mu0 - log_b0).exp() * (v.value(0) + alpha);
    let mut prev = prev0;
    let mut cur = prev0.scale(c0);

    // Plain-number track for the leading values.
    let b0 = b_seq.value(0);
    let first = if b0.is_finite() && b0 > 0.0 {
        1.0 + mu_seq.value(0) * (v.value(0) + alpha) / b0
    } else {
        c0
    };
    let mut u_head = vec![1.0f64];
    let mut plain_prev = 1.0f64;
    let mut plain_cur = first;
    let mut plain_alive = first.is_finite();
    if plain_alive {
        u_head.push(first);
    }

    // Partial sums in log space: start with n = 0 and n = 1 contributions.
    let term = |log_mu: f64, value: SignedLog| -> f64 {
        if value.sign == 0 {
            f64::NEG_INFINITY
        } else {
            log_mu + 2.0 * value.log_abs
        }
    };
    let mut log_p = term(log_mu0, prev);
    log_p = log_add_exp(log_p, term(mu_seq.log_value(1), cur));

    let mut checkpoints = Vec::new();
    let mut partial_log_sums = Vec::new();
    let mut record = |idx: usize, val: SignedLog, log_p: f64| {
        checkpoints.push((idx, val.log_abs, val.sign));
        partial_log_sums.push((idx, log_p));
    };
    if checkpoints_at.contains(&1) {
        record(1, cur, log_p);
    }

    let mut log_b_prev = log_b0;
    for m in 1..n {
        let log_b_cur = b_seq.log_value(m);
        let log_mu_cur = mu_seq.log_value(m);
        let ratio_prev = (log_b_prev - log_b_cur).exp();
        let mu_over_b = (log_mu_cur - log_b_cur).exp();
        let c1 = 1.0 + ratio_prev + mu_over_b * (v.value(m as Vertex) + alpha);
        let next = cur.scale(c1).add(prev.scale(-ratio_prev));
        if plain_alive {
            let b_prev = b_seq.value(m - 1);
            let b_cur = b_seq.value(m);
            let mu_cur = mu_seq.value(m);
            let num = (b_prev + b_cur + mu_cur * (v.value(m as Vertex) + alpha)) * plain_cur
                - b_prev * plain_prev;
            let plain_next = num / b_cur;
            if plain_next.is_finite() && b_cur.is_finite() && b_prev.is_finite() {
                plain_prev = plain_cur;
                plain_cur = plain_next;
                if u_head.len() <= 30 {
                    u_head.push(plain_next);
                }
            } else {
                plain_alive = false;
            }
        }
        prev = cur;
        cur = next;
        log_b_prev = log_b_cur;
        log_p = log_add_exp(log_p, term(mu_seq.log_value(m + 1), cur));
        if checkpoints_at.contains(&(m + 1)) {
            record(m + 1, cur, log_p);
        }
    }

    // Classification over the doubling increments of log P.
    let doubling_steps: Vec<f64> = partial_log_sums
        .windows(2)
        .filter(|w| w[1].0 == 2 * w[0].0)
        .map(|w| w[1].1 - w[0].1)
        .collect();
    let last3 = doubling_steps.iter().rev().take(3);
    let divergent = doubling_steps.len() >= 3 && last3.clone().all(|&d| d >= 1.5f64.ln());
    let convergent = doubling_steps
        .last()
        .map(|&d| d <= 1e-10)
        .unwrap_or(false);
    let classification = if divergent {
        GrowthClass::Divergent
    } else if convergent {
        GrowthClass::Convergent
    } else {
        GrowthClass::Inconclusive
    };
    let final_log_p = partial_log_sums.last().map(|&(_, p)| p).unwrap_or(0.0);
    Ok(DeficiencyReport {
        u_head,
        checkpoints,
        partial_log_sums,
        growth_ratio: final_log_p / (n as f64).ln(),
        classification,
        alpha,
        n,
    })
}
