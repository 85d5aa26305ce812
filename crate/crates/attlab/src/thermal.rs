//! Closed-form thermal-attenuator machinery derived from the Lindblad
//! master equation: the output eigenvalues P_l(N, n, λ), the dyad action
//! f_{n,i,l}(λ, ν), two independent Kraus representations, and an RK4
//! integrator for the master equation itself as a third oracle.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::beamsplitter::bs_coefficient;
use crate::error::{Error, Result};
use crate::fock::{trace_distance, FockDistribution, TruncatedDensityMatrix};
use crate::numeric::{
    binomial, ln_binomial, ln_factorial, positive_logsum, KahanSum,
};

/// Above this n + l the eigenvalue sum moves to log-space binomials.
const DIRECT_LIMIT: usize = 40;

/// P_l(N, n, λ) = ⟨l|Φ_{λ,|n⟩⟨n|}(τ_N)|l⟩, evaluated from the closed form
///
/// P_l = (1+Nλ)^{−(l+n+1)} Σ_m λ^{2m+l−n}(1−λ)^{n−m} N^{l+m−n}(N+1)^m
///       (n choose m)(l choose n−m),  m = max(0, n−l) ..= n.
///
/// λ = 0 and λ = 1 are exact branch cases (the formula has removable 0⁰
/// ambiguities there); N = 0 reduces to the binomial pure-loss law under
/// the 0⁰ = 1 convention.
pub fn p_eigenvalue(n_env: f64, n: usize, lambda: f64, l: usize) -> Result<f64> {
    if !(n_env >= 0.0) {
        return Err(Error::Domain(format!("P_l needs N ≥ 0, got {n_env}")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("P_l needs λ ∈ [0,1], got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(if l == n { 1.0 } else { 0.0 });
    }
    if lambda == 1.0 {
        return Ok(n_env.powi(l as i32) / (n_env + 1.0).powi(l as i32 + 1));
    }
    if n_env == 0.0 {
        // pure-loss environment: Binomial(n, 1−λ)
        if l > n {
            return Ok(0.0);
        }
        return Ok(binomial(n, l) * lambda.powi((n - l) as i32) * (1.0 - lambda).powi(l as i32));
    }
    let m_lo = n.saturating_sub(l);
    if n + l <= DIRECT_LIMIT {
        let mut acc = KahanSum::default();
        for m in m_lo..=n {
            acc.add(
                lambda.powi((2 * m + l - n) as i32)
                    * (1.0 - lambda).powi((n - m) as i32)
                    * n_env.powi((l + m - n) as i32)
                    * (n_env + 1.0).powi(m as i32)
                    * binomial(n, m)
                    * binomial(l, n - m),
            );
        }
        Ok(acc.value() / (1.0 + n_env * lambda).powi((l + n + 1) as i32))
    } else {
        let ln_lam = lambda.ln();
        let ln_mu = (1.0 - lambda).ln();
        let ln_nn = n_env.ln();
        let ln_np = (n_env + 1.0).ln();
        let mut terms = Vec::with_capacity(n - m_lo + 1);
        for m in m_lo..=n {
            terms.push(
                (2 * m + l - n) as f64 * ln_lam
                    + (n - m) as f64 * ln_mu
                    + (l + m - n) as f64 * ln_nn
                    + m as f64 * ln_np
                    + ln_binomial(n, m)
                    + ln_binomial(l, n - m),
            );
        }
        let ln_pref = -((l + n + 1) as f64) * (1.0 + n_env * lambda).ln();
        Ok(positive_logsum(
            &terms.iter().map(|t| t + ln_pref).collect::<Vec<_>>(),
        ))
    }
}

/// The full output distribution {P_l}_l accumulated until its tail drops
/// below `tail_tol`.
pub fn p_distribution(
    n_env: f64,
    n: usize,
    lambda: f64,
    tail_tol: f64,
) -> Result<FockDistribution> {
    let mean = lambda * n_env + (1.0 - lambda) * n as f64;
    let l_max = (8 * (mean as usize + n + 8)).max(256);
    let mut weights = Vec::with_capacity(n + 16);
    let mut cum = KahanSum::default();
    for l in 0..=l_max {
        let w = p_eigenvalue(n_env, n, lambda, l)?;
        weights.push(w);
        cum.add(w);
        if 1.0 - cum.value() < tail_tol && l as f64 > mean && l >= n {
            return FockDistribution::new(0, weights, tail_tol * 2.0 + 1e-12);
        }
    }
    Err(Error::Cutoff(format!(
        "P(N={n_env}, n={n}, λ={lambda}) tail still {} at l = {l_max}",
        1.0 - cum.value()
    )))
}

/// Action of the thermal attenuator on a Fock dyad:
/// Φ_{λ,τ_ν}(|n⟩⟨i|) = Σ_{l ≥ max(i−n,0)} f_{n,i,l}(λ,ν) |l+n−i⟩⟨l|.
/// `values[idx]` holds f at l = l_min + idx, computed up to l < `l_cap`.
#[derive(Debug, Clone)]
pub struct DyadAction {
    pub n: usize,
    pub i: usize,
    pub l_min: usize,
    pub values: Vec<f64>,
}

impl DyadAction {
    pub fn value_at(&self, l: usize) -> f64 {
        if l < self.l_min || l - self.l_min >= self.values.len() {
            0.0
        } else {
            self.values[l - self.l_min]
        }
    }
}

/// f_{n,i,l}(λ, ν) of the dyad action, a finite sum over
/// m = max(i−l, 0) ..= min(n, i). For n = i it reduces to
/// P_l(ν, n, 1−λ).
pub fn thermal_dyad_coefficient(n: usize, i: usize, l: usize, lambda: f64, nu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) || !(nu >= 0.0) {
        return Err(Error::Domain(format!(
            "f needs λ ∈ [0,1] and ν ≥ 0, got ({lambda}, {nu})"
        )));
    }
    if l < i.saturating_sub(n) {
        return Ok(0.0);
    }
    let m_lo = i.saturating_sub(l);
    let m_hi = n.min(i);
    if m_lo > m_hi {
        return Ok(0.0);
    }
    let denom = (1.0 - lambda) * nu + 1.0;
    if n + i + l <= DIRECT_LIMIT {
        let mut acc = KahanSum::default();
        for m in m_lo..=m_hi {
            let nu_pow = int_pow0(nu, l + m - i);
            if nu_pow == 0.0 {
                continue;
            }
            let num = (crate::numeric::factorial(n)
                * crate::numeric::factorial(i)
                * crate::numeric::factorial(l)
                * crate::numeric::factorial(l + n - i))
            .sqrt();
            let den = crate::numeric::factorial(n - m)
                * crate::numeric::factorial(i - m)
                * crate::numeric::factorial(m)
                * crate::numeric::factorial(l + m - i);
            acc.add(
                num / den
                    * nu_pow
                    * (nu + 1.0).powi(m as i32)
                    * (1.0 - lambda).powi((2 * m + l - i) as i32)
                    * lambda.powf((n + i) as f64 / 2.0 - m as f64),
            );
        }
        Ok(acc.value() / denom.powi((l + n + 1) as i32))
    } else {
        let mut terms = Vec::with_capacity(m_hi + 1 - m_lo);
        for m in m_lo..=m_hi {
            let e_nu = l + m - i;
            if nu == 0.0 && e_nu > 0 {
                continue;
            }
            let ln_nu = if e_nu == 0 { 0.0 } else { e_nu as f64 * nu.ln() };
            let lam_exp = (n + i) as f64 / 2.0 - m as f64;
            let ln_lam = if lambda == 0.0 {
                if lam_exp == 0.0 {
                    0.0
                } else {
                    continue;
                }
            } else {
                lam_exp * lambda.ln()
            };
            let mu_exp = (2 * m + l - i) as f64;
            let ln_mu = if lambda == 1.0 {
                if mu_exp == 0.0 {
                    0.0
                } else {
                    continue;
                }
            } else {
                mu_exp * (1.0 - lambda).ln()
            };
            terms.push(
                0.5 * (ln_factorial(n) + ln_factorial(i) + ln_factorial(l) + ln_factorial(l + n - i))
                    - ln_factorial(n - m)
                    - ln_factorial(i - m)
                    - ln_factorial(m)
                    - ln_factorial(l + m - i)
                    + ln_nu
                    + m as f64 * (nu + 1.0).ln()
                    + ln_mu
                    + ln_lam
                    - (l + n + 1) as f64 * denom.ln(),
            );
        }
        Ok(positive_logsum(&terms))
    }
}

fn int_pow0(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        1.0
    } else {
        base.powi(exp as i32)
    }
}

/// The dyad action map l ↦ f_{n,i,l} for l < `l_cap`.
pub fn thermal_dyad_action(
    n: usize,
    i: usize,
    lambda: f64,
    nu: f64,
    l_cap: usize,
) -> Result<DyadAction> {
    let l_min = i.saturating_sub(n);
    let mut values = Vec::new();
    for l in l_min..l_cap {
        values.push(thermal_dyad_coefficient(n, i, l, lambda, nu)?);
    }
    Ok(DyadAction {
        n,
        i,
        l_min,
        values,
    })
}

/// One Kraus operator that shifts Fock levels by a fixed offset:
/// M|s⟩ = vals[s] |s + shift⟩ (zero outside the stored range).
#[derive(Debug, Clone)]
pub struct ShiftedDiagOp {
    pub shift: i64,
    pub vals: Vec<f64>,
}

/// A Kraus set for Φ_{λ,τ_ν} on a `d_in`-level truncation, together with
/// its completeness deficit max_s |1 − Σ (M†M)_{ss}|.
#[derive(Debug, Clone)]
pub struct KrausSet {
    pub ops: Vec<ShiftedDiagOp>,
    pub d_in: usize,
    pub max_raise: usize,
    pub deficit: f64,
}

impl KrausSet {
    fn finish(ops: Vec<ShiftedDiagOp>, d_in: usize) -> Self {
        let mut col = vec![0.0_f64; d_in];
        let mut max_raise = 0usize;
        for op in &ops {
            if op.shift > 0 {
                max_raise = max_raise.max(op.shift as usize);
            }
            for (s, &v) in op.vals.iter().enumerate() {
                col[s] += v * v;
            }
        }
        let deficit = col
            .iter()
            .map(|&c| (1.0 - c).abs())
            .fold(0.0_f64, f64::max);
        Self {
            ops,
            d_in,
            max_raise,
            deficit,
        }
    }

    /// Σ_k M_k ρ M_k†. The output gains `max_raise` levels of headroom so
    /// photon-adding operators are not clipped.
    pub fn apply(&self, rho: &TruncatedDensityMatrix) -> Result<TruncatedDensityMatrix> {
        if rho.dim() > self.d_in {
            return Err(Error::Shape(format!(
                "Kraus set built for dim {} applied to dim {}",
                self.d_in,
                rho.dim()
            )));
        }
        let d_out = rho.dim() + self.max_raise;
        let mut out = DMatrix::<Complex64>::zeros(d_out, d_out);
        for op in &self.ops {
            for (s, &v) in op.vals.iter().enumerate() {
                if s >= rho.dim() || v == 0.0 {
                    continue;
                }
                let r = (s as i64 + op.shift) as usize;
                for (sp, &vp) in op.vals.iter().enumerate() {
                    if sp >= rho.dim() || vp == 0.0 {
                        continue;
                    }
                    let rp = (sp as i64 + op.shift) as usize;
                    out[(r, rp)] += v * vp * rho.entries()[(s, sp)];
                }
            }
        }
        // whatever is missing relative to unit trace is truncation loss
        let trace: f64 = (0..d_out).map(|i| out[(i, i)].re).sum();
        let tail = (1.0 - trace).clamp(0.0, 1.0);
        TruncatedDensityMatrix::new(out, tail)
    }
}

/// Kraus representation from the master-equation solution:
/// M_{k,m} = √(ν^k(ν+1)^m(1−λ)^{m+k} / (k! m! [(1−λ)ν+1]^{m+k+1}))
///           (a†)^k (√λ/((1−λ)ν+1))^{a†a} a^m.
/// Cutoffs (k ≤ k_max, m ≤ m_max) are grown geometrically until the
/// completeness deficit on the `d_in` truncation drops below `tol`.
pub fn kraus_me(lambda: f64, nu: f64, d_in: usize, tol: f64) -> Result<KrausSet> {
    if !(0.0..=1.0).contains(&lambda) || !(nu >= 0.0) {
        return Err(Error::Domain(format!(
            "kraus_me needs λ ∈ [0,1], ν ≥ 0, got ({lambda}, {nu})"
        )));
    }
    let denom = (1.0 - lambda) * nu + 1.0;
    let base = lambda.sqrt() / denom;
    let mut k_max = 8usize;
    // a^m annihilates every truncated level once m ≥ d_in, so the m cutoff
    // never needs to grow past the space itself
    let m_max = d_in - 1;
    loop {
        let mut ops = Vec::new();
        for k in 0..=k_max {
            let nu_pow = int_pow0(nu, k);
            if nu_pow == 0.0 {
                continue;
            }
            for m in 0..=m_max {
                let pref2 = nu_pow * (nu + 1.0).powi(m as i32)
                    * int_pow0(1.0 - lambda, m + k)
                    / (crate::numeric::factorial(k)
                        * crate::numeric::factorial(m)
                        * denom.powi((m + k + 1) as i32));
                if pref2 == 0.0 {
                    continue;
                }
                let pref = pref2.sqrt();
                let mut vals = vec![0.0_f64; d_in];
                let mut nonzero = false;
                for s in m..d_in {
                    // a^m, then the diagonal base^{a†a}, then (a†)^k
                    let amp = if base == 0.0 {
                        // λ = 0: base^{s−m} is 1 only at s = m, and the
                        // surviving amplitude is √(m!)·√(k!)
                        if s == m {
                            (crate::numeric::factorial(m) * crate::numeric::factorial(k)).sqrt()
                        } else {
                            0.0
                        }
                    } else {
                        (0.5 * (ln_factorial(s) - ln_factorial(s - m) + ln_factorial(s - m + k)
                            - ln_factorial(s - m))
                            + (s - m) as f64 * base.ln())
                        .exp()
                    };
                    let v = pref * amp;
                    if v != 0.0 {
                        nonzero = true;
                    }
                    vals[s] = v;
                }
                if nonzero {
                    ops.push(ShiftedDiagOp {
                        shift: k as i64 - m as i64,
                        vals,
                    });
                }
            }
        }
        let set = KrausSet::finish(ops, d_in);
        if set.deficit < tol {
            return Ok(set);
        }
        if k_max > 2048 {
            return Err(Error::Cutoff(format!(
                "kraus_me deficit {} at k_max = {k_max}, m_max = {m_max}; \
                 suggest a photon-adding cutoff ≥ {}",
                set.deficit,
                2 * k_max
            )));
        }
        k_max *= 2;
    }
}

/// Kraus representation obtained from the explicit beam-splitter formula:
/// M̃_{k,m} = √(ν^k/(ν+1)^{k+1}) Σ_l c_m^{(l,k)}(λ) |l+k−m⟩⟨l|.
///
/// The environment cutoff k_max grows until the exact thermal weight tail
/// (ν/(ν+1))^{k_max+1} drops below `tol`; the recorded deficit rechecks
/// completeness numerically (at large d it also reflects the coefficient
/// round-off of the big alternating sums, not just the discarded weight).
pub fn kraus_bs(lambda: f64, nu: f64, d_in: usize, tol: f64) -> Result<KrausSet> {
    if !(0.0..=1.0).contains(&lambda) || !(nu >= 0.0) {
        return Err(Error::Domain(format!(
            "kraus_bs needs λ ∈ [0,1], ν ≥ 0, got ({lambda}, {nu})"
        )));
    }
    let mut k_max = 0usize;
    let mut weight_tail = 1.0;
    loop {
        let w = int_pow0(nu, k_max) / (nu + 1.0).powi(k_max as i32 + 1);
        weight_tail -= w;
        if weight_tail < tol || nu == 0.0 {
            break;
        }
        k_max += 1;
        if k_max > 512 {
            return Err(Error::Cutoff(format!(
                "kraus_bs weight tail {weight_tail} above {tol} at k_max = 512; \
                 suggest a larger cutoff"
            )));
        }
    }
    let mut ops = Vec::new();
    for k in 0..=k_max {
        let w = int_pow0(nu, k) / (nu + 1.0).powi(k as i32 + 1);
        if w == 0.0 {
            continue;
        }
        let sqrt_w = w.sqrt();
        for m in 0..=(d_in - 1 + k) {
            let mut vals = vec![0.0_f64; d_in];
            let mut nonzero = false;
            for (l, val) in vals.iter_mut().enumerate().take(d_in).skip(m.saturating_sub(k)) {
                if m > l + k {
                    continue;
                }
                let c = bs_coefficient(l, k, m, lambda)?;
                if c != 0.0 {
                    nonzero = true;
                }
                *val = sqrt_w * c;
            }
            if nonzero {
                ops.push(ShiftedDiagOp {
                    shift: k as i64 - m as i64,
                    vals,
                });
            }
        }
    }
    Ok(KrausSet::finish(ops, d_in))
}

/// Right-hand side of the thermal-attenuator master equation
/// dρ/dt = N[a†ρa − ½{ρ, aa†}] + (N+1)[aρa† − ½{ρ, a†a}],
/// evaluated elementwise (a and a† are shift operators in the Fock basis).
fn lindblad_rhs(rho: &DMatrix<Complex64>, n_env: f64, out: &mut DMatrix<Complex64>) {
    let d = rho.nrows();
    for i in 0..d {
        for j in 0..d {
            let mut v = Complex64::new(0.0, 0.0);
            if i > 0 && j > 0 {
                v += n_env * ((i * j) as f64).sqrt() * rho[(i - 1, j - 1)];
            }
            if i + 1 < d && j + 1 < d {
                v += (n_env + 1.0) * (((i + 1) * (j + 1)) as f64).sqrt() * rho[(i + 1, j + 1)];
            }
            let decay = n_env * (i + j + 2) as f64 / 2.0 + (n_env + 1.0) * (i + j) as f64 / 2.0;
            v -= decay * rho[(i, j)];
            out[(i, j)] = v;
        }
    }
}

fn rk4_run(rho0: &DMatrix<Complex64>, n_env: f64, t: f64, steps: usize) -> DMatrix<Complex64> {
    let d = rho0.nrows();
    let h = t / steps as f64;
    let mut rho = rho0.clone();
    let mut k1 = DMatrix::zeros(d, d);
    let mut k2 = DMatrix::zeros(d, d);
    let mut k3 = DMatrix::zeros(d, d);
    let mut k4 = DMatrix::zeros(d, d);
    let c = |x: f64| Complex64::new(x, 0.0);
    for _ in 0..steps {
        lindblad_rhs(&rho, n_env, &mut k1);
        let tmp = &rho + &k1 * c(h / 2.0);
        lindblad_rhs(&tmp, n_env, &mut k2);
        let tmp = &rho + &k2 * c(h / 2.0);
        lindblad_rhs(&tmp, n_env, &mut k3);
        let tmp = &rho + &k3 * c(h);
        lindblad_rhs(&tmp, n_env, &mut k4);
        rho += (k1.clone() + &k2 * c(2.0) + &k3 * c(2.0) + &k4) * c(h / 6.0);
        // enforce exact Hermiticity against drift
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
                rho[(i, j)] = avg;
                rho[(j, i)] = avg.conj();
            }
            rho[(i, i)] = Complex64::new(rho[(i, i)].re, 0.0);
        }
    }
    rho
}

/// Integrate the master equation with fixed-step RK4, doubling the step
/// count until two consecutive runs differ by less than 1e−9 in trace
/// norm: the classic independent oracle for ρ_N(t) = Φ_{e^{−t},τ_N}(ρ₀).
pub fn lindblad_integrate(
    rho0: &TruncatedDensityMatrix,
    n_env: f64,
    t: f64,
    steps: usize,
) -> Result<TruncatedDensityMatrix> {
    if !(n_env >= 0.0) || !(t >= 0.0) || steps == 0 {
        return Err(Error::Domain(format!(
            "lindblad_integrate needs N ≥ 0, t ≥ 0, steps ≥ 1; got ({n_env}, {t}, {steps})"
        )));
    }
    let pack = |m: DMatrix<Complex64>, base_tail: f64| -> Result<TruncatedDensityMatrix> {
        let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
        let tail = (base_tail + (1.0 - base_tail - trace)).clamp(0.0, 1.0);
        TruncatedDensityMatrix::new(m, tail)
    };
    let mut steps = steps;
    let mut current = rk4_run(rho0.entries(), n_env, t, steps);
    for _ in 0..24 {
        let finer = rk4_run(rho0.entries(), n_env, t, steps * 2);
        let a = pack(current.clone(), rho0.tail_mass())?;
        let b = pack(finer.clone(), rho0.tail_mass())?;
        if trace_distance(&a, &b)? < 1e-9 {
            return Ok(b);
        }
        steps *= 2;
        current = finer;
        if steps > (1 << 22) {
            break;
        }
    }
    Err(Error::Integrator(format!(
        "step-halving did not converge below 1e−9 by {steps} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{default_cutoff, thermal_state, TruncatedDensityMatrix};

    #[test]
    fn p_eigenvalue_branches() {
        // λ = 1 → thermal law
        for l in 0..10 {
            let p = p_eigenvalue(2.0, 4, 1.0, l).unwrap();
            assert!((p - 2.0_f64.powi(l as i32) / 3.0_f64.powi(l as i32 + 1)).abs() < 1e-14);
        }
        // λ = 0 → point mass at n
        assert_eq!(p_eigenvalue(2.0, 4, 0.0, 4).unwrap(), 1.0);
        assert_eq!(p_eigenvalue(2.0, 4, 0.0, 3).unwrap(), 0.0);
        // N = 0 → Binomial(n, 1−λ)
        let p = p_eigenvalue(0.0, 5, 0.3, 2).unwrap();
        let expect = binomial(5, 2) * 0.3_f64.powi(3) * 0.7_f64.powi(2);
        assert!((p - expect).abs() < 1e-14);
    }

    #[test]
    fn p_distribution_mean_and_norm() {
        for (n_env, n, lambda) in [(2.0, 5, 0.35), (0.5, 20, 0.4), (3.0, 0, 0.8)] {
            let p = p_distribution(n_env, n, lambda, 1e-12).unwrap();
            let mean_expect = lambda * n_env + (1.0 - lambda) * n as f64;
            assert!((p.mean() - mean_expect).abs() < 1e-9, "mean at {n_env},{n},{lambda}");
            assert!(p.tail_mass() < 1e-11);
        }
    }

    #[test]
    fn p_matches_explicit_bs_series() {
        // independent route: P_l = (N+1)^{-1} Σ_k (N/(N+1))^k |c_{n+k-l}^{(k,n)}|²
        let (n_env, n, lambda) = (2.0_f64, 5usize, 0.35_f64);
        for l in 0..18usize {
            let mut acc = KahanSum::default();
            let ratio = n_env / (n_env + 1.0);
            let mut w = 1.0 / (n_env + 1.0);
            for k in 0..400usize {
                if k + n >= l && (k + n - l) <= k + n {
                    let c = bs_coefficient(k, n, k + n - l, lambda).unwrap();
                    acc.add(w * c * c);
                }
                w *= ratio;
                if w < 1e-18 {
                    break;
                }
            }
            let direct = p_eigenvalue(n_env, n, lambda, l).unwrap();
            assert!(
                (acc.value() - direct).abs() < 1e-10,
                "l={l}: series {} vs closed {direct}",
                acc.value()
            );
        }
    }

    #[test]
    fn dyad_action_examples() {
        // Φ_{λ,|0⟩}(|1⟩⟨0|) = √λ |1⟩⟨0|: only l = 0 survives at ν = 0
        let act = thermal_dyad_action(1, 0, 0.37, 0.0, 6).unwrap();
        assert!((act.value_at(0) - 0.37_f64.sqrt()).abs() < 1e-14);
        for l in 1..6 {
            assert_eq!(act.value_at(l), 0.0);
        }
        // diagonal case: trace preservation Σ_l f_{n,n,l} = 1
        let act = thermal_dyad_action(3, 3, 0.6, 1.0, 400).unwrap();
        let total: f64 = act.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // and f_{n,n,l} = P_l(ν, n, 1−λ)
        for l in 0..30 {
            let p = p_eigenvalue(1.0, 3, 1.0 - 0.6, l).unwrap();
            assert!((act.value_at(l) - p).abs() < 1e-12);
        }
        // support constraint: f = 0 for l < i − n
        let act = thermal_dyad_action(1, 4, 0.5, 0.7, 12).unwrap();
        assert_eq!(act.l_min, 3);
        assert!(thermal_dyad_coefficient(1, 4, 2, 0.5, 0.7).unwrap() == 0.0);
    }

    #[test]
    fn dyad_action_matches_bs_kraus_series() {
        // Remark-style cross-check: f_{n,i,l} = Σ_k w_k c_{k+i−l}^{(n,k)} c_{k+i−l}^{(i,k)}
        let (lambda, nu) = (0.45_f64, 0.8_f64);
        for n in 0..=5usize {
            for i in 0..=5usize {
                for l in i.saturating_sub(n)..=5 {
                    let mut acc = KahanSum::default();
                    let ratio = nu / (nu + 1.0);
                    let mut w = 1.0 / (nu + 1.0);
                    for k in 0..400usize {
                        if k + i >= l {
                            let m = k + i - l;
                            if m <= n + k && m <= i + k {
                                let c1 = bs_coefficient(n, k, m, lambda).unwrap();
                                let c2 = bs_coefficient(i, k, m, lambda).unwrap();
                                acc.add(w * c1 * c2);
                            }
                        }
                        w *= ratio;
                        if w < 1e-18 {
                            break;
                        }
                    }
                    let f = thermal_dyad_coefficient(n, i, l, lambda, nu).unwrap();
                    assert!(
                        (f - acc.value()).abs() < 1e-10,
                        "n={n} i={i} l={l}: {f} vs {}",
                        acc.value()
                    );
                }
            }
        }
    }

    #[test]
    fn kraus_me_pure_loss_and_completeness() {
        // ν = 0: only k = 0 terms survive
        let set = kraus_me(0.4, 0.0, 12, 1e-8).unwrap();
        assert!(set.ops.iter().all(|op| op.shift <= 0));
        assert!(set.deficit < 1e-8);
        // completeness at ν > 0
        let set = kraus_me(0.4, 1.5, 12, 1e-8).unwrap();
        assert!(set.deficit < 1e-8);
    }

    #[test]
    fn kraus_routes_agree_on_random_state() {
        let nu = 1.5;
        let lambda = 0.4;
        let d = 12;
        // a fixed full-rank test state: normalised mixture of thermal and a coherent-ish pure state
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        let th = thermal_state(0.8, d).unwrap();
        for i in 0..d {
            m[(i, i)] += Complex64::new(0.6 * th.weights()[i] / th.total_mass(), 0.0);
        }
        let amp: Vec<Complex64> = (0..d)
            .map(|i| Complex64::new(0.8_f64.powi(i as i32), 0.1 * (i as f64 * 0.4).sin()))
            .collect();
        let norm2: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += 0.4 * amp[i] * amp[j].conj() / norm2;
            }
        }
        let rho = TruncatedDensityMatrix::new(m, 0.0).unwrap();
        let set_me = kraus_me(lambda, nu, d, 1e-9).unwrap();
        let set_bs = kraus_bs(lambda, nu, d, 1e-9).unwrap();
        let out_me = set_me.apply(&rho).unwrap();
        let out_bs = set_bs.apply(&rho).unwrap();
        let dim = out_me.dim().min(out_bs.dim());
        for i in 0..dim {
            for j in 0..dim {
                assert!(
                    (out_me.entries()[(i, j)] - out_bs.entries()[(i, j)]).norm() < 1e-9,
                    "({i},{j})"
                );
            }
        }
    }

    #[test]
    fn lindblad_fixed_point_is_thermal() {
        let n_env = 1.0;
        let d = default_cutoff(0, n_env) + 22; // (1/2)^d ≈ 1e-12 headroom
        let rho0 = TruncatedDensityMatrix::fock(3, d).unwrap();
        let out = lindblad_integrate(&rho0, n_env, 30.0, 4096).unwrap();
        let tau = TruncatedDensityMatrix::from_diagonal(&thermal_state(n_env, out.dim()).unwrap())
            .unwrap();
        assert!(trace_distance(&out, &tau).unwrap() < 1e-8);
    }

    #[test]
    fn lindblad_matches_closed_form_and_composes() {
        let n_env = 1.0;
        let lambda: f64 = 0.45;
        let t = -lambda.ln();
        let d = default_cutoff(4, n_env) + 10;
        let rho0 = TruncatedDensityMatrix::fock(4, d).unwrap();
        let out = lindblad_integrate(&rho0, n_env, t, 1024).unwrap();
        // Φ_{λ,τ_N}(|n⟩⟨n|) has diagonal P_l(N, n, 1−λ)
        for l in 0..d {
            let p = p_eigenvalue(n_env, 4, 1.0 - lambda, l).unwrap();
            assert!(
                (out.entries()[(l, l)].re - p).abs() < 1e-8,
                "l={l}: {} vs {p}",
                out.entries()[(l, l)].re
            );
        }
        // semigroup: integrate(t₁) then integrate(t₂) = integrate(t₁+t₂)
        let t1 = 0.3;
        let t2 = 0.5;
        let step1 = lindblad_integrate(&rho0, n_env, t1, 256).unwrap();
        let step2 = lindblad_integrate(&step1, n_env, t2, 256).unwrap();
        let joint = lindblad_integrate(&rho0, n_env, t1 + t2, 256).unwrap();
        assert!(trace_distance(&step2, &joint).unwrap() < 1e-8);
    }
}
