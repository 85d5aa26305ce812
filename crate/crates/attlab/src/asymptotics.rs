//! Special functions and the vanishing-transmissivity limit machinery:
//! the two limit distributions q_k(N,c) (two-sided, Bessel) and p_k(N,c)
//! (one-sided, Laguerre), their entropy gap, and convergence diagnostics
//! for the shifted finite-n distributions.

use crate::error::{Error, Result};
use crate::fock::{shannon_entropy, FockDistribution};
use crate::numeric::{ln_factorial, KahanSum};
use crate::thermal::p_distribution;

/// Overflow guard for the Bessel argument.
pub const BESSEL_Z_MAX: f64 = 700.0;

/// ln I_k(z) for k ≥ 0, z ≥ 0, from the ascending series
/// I_k(z) = (z/2)^k Σ_m (z/2)^{2m} / (m!(k+m)!).
/// The series is summed with a term-ratio stop: quits once
/// term/partial-sum < 1e−16 twice in a row.
pub fn ln_bessel_i(k: usize, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("I_k needs z ≥ 0, got {z}")));
    }
    if z > BESSEL_Z_MAX {
        return Err(Error::Domain(format!(
            "I_k argument {z} exceeds the overflow guard {BESSEL_Z_MAX}"
        )));
    }
    if z == 0.0 {
        return Ok(if k == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let half = z / 2.0;
    let ln_first = k as f64 * half.ln() - ln_factorial(k);
    // relative series Σ t_m with t_0 = 1, t_m = t_{m−1}·(z/2)²/(m(k+m))
    let mut sum = KahanSum::default();
    let mut term = 1.0_f64;
    sum.add(term);
    let mut small_streak = 0;
    let mut m = 1.0_f64;
    loop {
        term *= half * half / (m * (m + k as f64));
        sum.add(term);
        if term < 1e-16 * sum.value() {
            small_streak += 1;
            if small_streak >= 2 {
                break;
            }
        } else {
            small_streak = 0;
        }
        m += 1.0;
        if m > 100_000.0 {
            return Err(Error::Cutoff("Bessel series failed to converge".into()));
        }
    }
    Ok(ln_first + sum.value().ln())
}

/// Modified Bessel function of the first kind I_k(z) (series evaluation,
/// chosen over upward recurrence, which is unstable).
pub fn bessel_i(k: usize, z: f64) -> Result<f64> {
    Ok(ln_bessel_i(k, z)?.exp())
}

/// Maximum Laguerre order accepted by the recurrence.
pub const LAGUERRE_K_MAX: usize = 2000;

/// ln L_k(x) for x ≤ 0 (where every recurrence value is positive), via the
/// three-term recurrence with scaled mantissa/exponent pairs so that large
/// k at large |x| cannot overflow.
pub fn ln_laguerre_neg(k: usize, x: f64) -> Result<f64> {
    if x > 0.0 {
        return Err(Error::Domain(format!(
            "ln_laguerre_neg needs x ≤ 0, got {x}"
        )));
    }
    if k > LAGUERRE_K_MAX {
        return Err(Error::Domain(format!(
            "Laguerre order {k} exceeds supported {LAGUERRE_K_MAX}"
        )));
    }
    // L_0 = 1, L_1 = 1 − x; (j+1)L_{j+1} = (2j+1−x)L_j − j L_{j−1}
    let mut prev = 1.0_f64;
    let mut cur = 1.0 - x;
    let mut ln_scale = 0.0_f64;
    if k == 0 {
        return Ok(0.0);
    }
    for j in 1..k {
        let next = ((2 * j + 1) as f64 - x) * cur - j as f64 * prev;
        let next = next / (j + 1) as f64;
        prev = cur;
        cur = next;
        if cur > 1e280 {
            prev /= 1e280;
            cur /= 1e280;
            ln_scale += 1e280_f64.ln();
        }
    }
    Ok(cur.ln() + ln_scale)
}

/// Laguerre polynomial L_k(x) = Σ_m (−1)^m/m! (k choose m) x^m by the
/// three-term recurrence (plain doubles; callers needing large k at
/// negative arguments should use [`ln_laguerre_neg`]).
pub fn laguerre(k: usize, x: f64) -> Result<f64> {
    if k > LAGUERRE_K_MAX {
        return Err(Error::Domain(format!(
            "Laguerre order {k} exceeds supported {LAGUERRE_K_MAX}"
        )));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let mut prev = 1.0_f64;
    let mut cur = 1.0 - x;
    for j in 1..k {
        let next = (((2 * j + 1) as f64 - x) * cur - j as f64 * prev) / (j + 1) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// ln q_k(N,c) of the two-sided limit distribution
/// q_k = e^{−c(2N+1)} (N/(N+1))^{k/2} I_{|k|}(2c√(N(N+1))).
pub fn ln_q_weight(n_env: f64, c: f64, k: i64) -> Result<f64> {
    let z = 2.0 * c * (n_env * (n_env + 1.0)).sqrt();
    Ok(-c * (2.0 * n_env + 1.0)
        + k as f64 / 2.0 * (n_env / (n_env + 1.0)).ln()
        + ln_bessel_i(k.unsigned_abs() as usize, z)?)
}

/// ln p_k(N,c) of the one-sided limit distribution
/// p_k = N^k/(N+1)^{k+1} e^{−c/(N+1)} L_k(−c/(N(N+1))), k ≥ 0.
pub fn ln_p_weight(n_env: f64, c: f64, k: usize) -> Result<f64> {
    let y = c / (n_env * (n_env + 1.0));
    Ok(k as f64 * (n_env / (n_env + 1.0)).ln() - (n_env + 1.0).ln() - c / (n_env + 1.0)
        + ln_laguerre_neg(k, -y)?)
}

/// The pair of limit distributions at (N, c), truncated at |k| ≤ kmax for q
/// and k ≤ kmax_p for p, with recorded tails.
#[derive(Debug, Clone)]
pub struct LimitDistributions {
    pub n_env: f64,
    pub c: f64,
    pub q: FockDistribution,
    pub p: FockDistribution,
    pub kmax: usize,
    pub q_tail: f64,
    pub p_tail: f64,
}

/// Build both limit distributions with the given symmetric cutoff `kmax`.
/// Errors if the combined two-sided tail of q (or the tail of p) exceeds
/// 1e−8 at that cutoff.
pub fn limit_distributions(n_env: f64, c: f64, kmax: usize) -> Result<LimitDistributions> {
    if !(n_env > 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!(
            "limit distributions need N > 0 and c > 0, got ({n_env}, {c})"
        )));
    }
    let mut q_weights = Vec::with_capacity(2 * kmax + 1);
    let mut q_sum = KahanSum::default();
    for k in -(kmax as i64)..=kmax as i64 {
        let w = ln_q_weight(n_env, c, k)?.exp();
        q_weights.push(w);
        q_sum.add(w);
    }
    let q_tail = (1.0 - q_sum.value()).max(0.0);

    // p needs headroom above its mean N + c
    let p_cap = (kmax.max((2.0 * (n_env + c)) as usize + 16)).min(LAGUERRE_K_MAX);
    let mut p_weights = Vec::with_capacity(p_cap + 1);
    let mut p_sum = KahanSum::default();
    for k in 0..=p_cap {
        let w = ln_p_weight(n_env, c, k)?.exp();
        p_weights.push(w);
        p_sum.add(w);
    }
    let p_tail = (1.0 - p_sum.value()).max(0.0);
    if q_tail > 1e-8 || p_tail > 1e-8 {
        return Err(Error::Cutoff(format!(
            "kmax = {kmax} leaves tails q: {q_tail:.3e}, p: {p_tail:.3e} above 1e−8"
        )));
    }
    Ok(LimitDistributions {
        n_env,
        c,
        q: FockDistribution::new(-(kmax as i64), q_weights, 1e-7)?,
        p: FockDistribution::new(0, p_weights, 1e-7)?,
        kmax,
        q_tail,
        p_tail,
    })
}

/// Build the limit distributions growing kmax geometrically until the
/// two-sided tail of q falls below 1e−10.
pub fn limit_distributions_auto(n_env: f64, c: f64) -> Result<LimitDistributions> {
    let mut kmax = ((2.0 * c * (n_env * (n_env + 1.0)).sqrt()) as usize + 24).max(32);
    for _ in 0..8 {
        match limit_distributions(n_env, c, kmax) {
            Ok(ld) if ld.q_tail < 1e-10 && ld.p_tail < 1e-10 => return Ok(ld),
            Ok(_) | Err(Error::Cutoff(_)) => kmax *= 2,
            Err(e) => return Err(e),
        }
        if kmax > LAGUERRE_K_MAX {
            break;
        }
    }
    Err(Error::Cutoff(format!(
        "no kmax ≤ {LAGUERRE_K_MAX} reaches the 1e−10 tail at (N={n_env}, c={c})"
    )))
}

/// Entropy gap H(q(N,c)) − H(p(N,c)) in bits, the Theorem-style lower
/// bound on the coherent information along λ = c/n.
pub fn entropy_gap(n_env: f64, c: f64) -> Result<f64> {
    let ld = limit_distributions_auto(n_env, c)?;
    Ok(shannon_entropy(&ld.q)? - shannon_entropy(&ld.p)?)
}

/// ℓ1 distances of the finite-n distributions from their limits:
/// (‖T₋ₙ P(N,n,c/n) − q‖₁, ‖P(N,n,1−c/n) − p‖₁).
pub fn shifted_convergence(n_env: f64, n: usize, c: f64) -> Result<(f64, f64)> {
    if (n as f64) < c {
        return Err(Error::Domain(format!(
            "need n ≥ c so that λ = c/n ≤ 1; got n = {n}, c = {c}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("need n ≥ 1".into()));
    }
    let lambda = c / n as f64;
    let ld = limit_distributions_auto(n_env, c)?;
    let shifted = p_distribution(n_env, n, lambda, 1e-10)?.shift(-(n as i64));
    let dist_q = shifted.l1_distance(&ld.q) + shifted.tail_mass() + ld.q_tail;
    let wide = p_distribution(n_env, n, 1.0 - lambda, 1e-10)?;
    let dist_p = wide.l1_distance(&ld.p) + wide.tail_mass() + ld.p_tail;
    Ok((dist_q, dist_p))
}
