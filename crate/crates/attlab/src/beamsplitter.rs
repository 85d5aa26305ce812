//! Beam-splitter machinery: the closed-form two-mode coefficients
//! c_m^{(i,j)}(λ), the general attenuator Φ_{λ,σ} and its weak
//! complementary channel applied dyad by dyad, closed-form output energies,
//! and an independent dense sector-exponential oracle for the unitary
//! U_λ = exp[arccos√λ (a₁†a₂ − a₁a₂†)].

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockDistribution, TruncatedDensityMatrix};
use crate::numeric::{binomial, factorial, ln_binomial, ln_factorial, signed_logsum, KahanSum};

/// Above this total photon number the coefficient sum switches to
/// log-magnitude + sign bookkeeping (binomial terms overflow doubles).
const DIRECT_SUM_LIMIT: usize = 40;

/// Sector cutoff for the dense matrix-exponential oracle.
pub const DENSE_ORACLE_MAX_TOTAL: usize = 60;

/// Coefficient c_m^{(i,j)}(λ) of U_λ|i⟩|j⟩ = Σ_m c_m^{(i,j)}|i+j−m⟩|m⟩:
///
/// c_m^{(i,j)}(λ) = 1/√(i!j!) Σ_k (−1)^k (i choose k)(j choose m−k)
///                  λ^{(i+m−2k)/2} (1−λ)^{(j+2k−m)/2} √(m!(i+j−m)!),
///
/// with k running over max(0, m−j) ..= min(i, m). The coefficients are real.
pub fn bs_coefficient(i: usize, j: usize, m: usize, lambda: f64) -> Result<f64> {
    if m > i + j {
        return Err(Error::Shape(format!(
            "c_m^{{({i},{j})}} needs m ≤ i+j, got m = {m}"
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("λ must lie in [0,1], got {lambda}")));
    }
    let k_lo = m.saturating_sub(j);
    let k_hi = i.min(m);
    if k_lo > k_hi {
        return Ok(0.0);
    }
    if i + j <= DIRECT_SUM_LIMIT {
        // direct evaluation with compensated summation
        let pref = (factorial(m) * factorial(i + j - m) / (factorial(i) * factorial(j))).sqrt();
        let mut acc = KahanSum::default();
        for k in k_lo..=k_hi {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let lam_pow = lambda.powf((i + m - 2 * k) as f64 / 2.0);
            let mu_pow = (1.0 - lambda).powf((j + 2 * k) as f64 / 2.0 - m as f64 / 2.0);
            acc.add(sign * binomial(i, k) * binomial(j, m - k) * lam_pow * mu_pow);
        }
        Ok(pref * acc.value())
    } else {
        let ln_pref =
            0.5 * (ln_factorial(m) + ln_factorial(i + j - m) - ln_factorial(i) - ln_factorial(j));
        let mut terms = Vec::with_capacity(k_hi - k_lo + 1);
        for k in k_lo..=k_hi {
            let e_lam = (i + m) as f64 / 2.0 - k as f64;
            let e_mu = (j + 2 * k) as f64 / 2.0 - m as f64 / 2.0;
            let ln_lam = match pow_ln(lambda, e_lam) {
                Some(v) => v,
                None => continue, // exact zero factor
            };
            let ln_mu = match pow_ln(1.0 - lambda, e_mu) {
                Some(v) => v,
                None => continue,
            };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let ln_mag =
                ln_pref + ln_binomial(i, k) + ln_binomial(j, m - k) + ln_lam + ln_mu;
            terms.push((sign, ln_mag));
        }
        Ok(signed_logsum(&terms))
    }
}

/// ln(base^exp) treating base = 0 with exp = 0 as 1 (→ Some(0)) and
/// base = 0 with exp > 0 as an exact zero factor (→ None).
fn pow_ln(base: f64, exp: f64) -> Option<f64> {
    if base == 0.0 {
        if exp == 0.0 {
            Some(0.0)
        } else {
            None
        }
    } else {
        Some(exp * base.ln())
    }
}

/// All coefficients c_m^{(i,j)}(λ) for m = 0..=i+j, with the unitarity sum
/// Σ_m c_m² = 1 available as a check.
#[derive(Debug, Clone)]
pub struct BsCoefficients {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
    pub values: Vec<f64>,
}

impl BsCoefficients {
    pub fn compute(i: usize, j: usize, lambda: f64) -> Result<Self> {
        let values = (0..=i + j)
            .map(|m| bs_coefficient(i, j, m, lambda))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            i,
            j,
            lambda,
            values,
        })
    }

    /// Σ_m c_m², which equals 1 by unitarity.
    pub fn unitarity_sum(&self) -> f64 {
        let mut s = KahanSum::default();
        for &c in &self.values {
            s.add(c * c);
        }
        s.value()
    }
}

/// Environment state of a general attenuator. Fock-diagonal environments
/// take a cheaper code path.
#[derive(Debug, Clone)]
pub enum EnvState {
    Diagonal(FockDistribution),
    Matrix(TruncatedDensityMatrix),
}

impl EnvState {
    pub fn dim(&self) -> usize {
        match self {
            EnvState::Diagonal(p) => (p.offset() as usize) + p.weights().len(),
            EnvState::Matrix(m) => m.dim(),
        }
    }

    pub fn tail_mass(&self) -> f64 {
        match self {
            EnvState::Diagonal(p) => p.tail_mass(),
            EnvState::Matrix(m) => m.tail_mass(),
        }
    }

    pub fn mean_photon(&self) -> f64 {
        match self {
            EnvState::Diagonal(p) => p.mean(),
            EnvState::Matrix(m) => m.diagonal().mean(),
        }
    }

    pub fn annihilation_expectation(&self) -> Complex64 {
        match self {
            EnvState::Diagonal(_) => Complex64::new(0.0, 0.0),
            EnvState::Matrix(m) => m.annihilation_expectation(),
        }
    }
}

/// A general attenuator Φ_{λ,σ}: transmissivity λ plus environment state σ.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    lambda: f64,
    env: EnvState,
}

impl ChannelSpec {
    pub fn new(lambda: f64, env: EnvState) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("λ must lie in [0,1], got {lambda}")));
        }
        if let EnvState::Diagonal(p) = &env {
            if p.offset() < 0 {
                return Err(Error::Domain(
                    "environment distribution must live on ℕ".into(),
                ));
            }
        }
        Ok(Self { lambda, env })
    }

    pub fn diagonal(lambda: f64, env: FockDistribution) -> Result<Self> {
        Self::new(lambda, EnvState::Diagonal(env))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn env(&self) -> &EnvState {
        &self.env
    }
}

/// Environment dyads (j, j′, weight) with negligible ones skipped.
fn env_dyads(env: &EnvState) -> Vec<(usize, usize, Complex64)> {
    match env {
        EnvState::Diagonal(p) => p
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(idx, &w)| {
                let j = p.offset() as usize + idx;
                (j, j, Complex64::new(w, 0.0))
            })
            .collect(),
        EnvState::Matrix(m) => {
            let mut out = Vec::new();
            for j in 0..m.dim() {
                for jp in 0..m.dim() {
                    let w = m.entries()[(j, jp)];
                    if w.norm() > 0.0 {
                        out.push((j, jp, w));
                    }
                }
            }
            out
        }
    }
}

/// Coefficient table c_m^{(i,j)} for i = 0..d_in, fixed j.
fn coeff_table(d_in: usize, j: usize, lambda: f64) -> Result<Vec<Vec<f64>>> {
    (0..d_in)
        .map(|i| Ok(BsCoefficients::compute(i, j, lambda)?.values))
        .collect()
}

/// Apply Φ_{λ,σ}(ρ) = Tr_E[U_λ ρ⊗σ U_λ†] dyad by dyad. The output lives on
/// d_in + d_env − 1 Fock levels so that no probability is clipped; its tail
/// mass combines both input tails.
pub fn attenuator_apply(
    spec: &ChannelSpec,
    rho: &TruncatedDensityMatrix,
) -> Result<TruncatedDensityMatrix> {
    let d_in = rho.dim();
    let d_env = spec.env().dim();
    let d_out = d_in + d_env - 1;
    let mut out = DMatrix::<Complex64>::zeros(d_out, d_out);
    let lambda = spec.lambda();

    let dyads = env_dyads(spec.env());
    // group dyads by j so the coefficient table for (·, j) is built once
    let mut tables: std::collections::BTreeMap<usize, Vec<Vec<f64>>> =
        std::collections::BTreeMap::new();
    for &(j, jp, _) in &dyads {
        for jj in [j, jp] {
            if !tables.contains_key(&jj) {
                tables.insert(jj, coeff_table(d_in, jj, lambda)?);
            }
        }
    }

    for &(j, jp, w) in &dyads {
        let tj = &tables[&j];
        let tjp = &tables[&jp];
        for i in 0..d_in {
            for ip in 0..d_in {
                let r = rho.entries()[(i, ip)];
                if r.norm() == 0.0 {
                    continue;
                }
                let m_max = (i + j).min(ip + jp);
                for m in 0..=m_max {
                    let c = tj[i][m] * tjp[ip][m];
                    if c != 0.0 {
                        out[(i + j - m, ip + jp - m)] += w * r * c;
                    }
                }
            }
        }
    }
    let t_in = rho.tail_mass();
    let t_env = spec.env().tail_mass();
    let tail = (t_in + t_env - t_in * t_env).clamp(0.0, 1.0);
    TruncatedDensityMatrix::new(out, tail)
}

/// Apply the weak complementary channel
/// Φ̃^{wc}_{λ,σ}(ρ) = Tr_S[U_λ ρ⊗σ U_λ†], i.e. the environment output:
/// λ = 0 returns ρ, λ = 1 returns σ.
pub fn weak_complementary_apply(
    spec: &ChannelSpec,
    rho: &TruncatedDensityMatrix,
) -> Result<TruncatedDensityMatrix> {
    let d_in = rho.dim();
    let d_env = spec.env().dim();
    let d_out = d_in + d_env - 1;
    let mut out = DMatrix::<Complex64>::zeros(d_out, d_out);
    let lambda = spec.lambda();

    let dyads = env_dyads(spec.env());
    let mut tables: std::collections::BTreeMap<usize, Vec<Vec<f64>>> =
        std::collections::BTreeMap::new();
    for &(j, jp, _) in &dyads {
        for jj in [j, jp] {
            if !tables.contains_key(&jj) {
                tables.insert(jj, coeff_table(d_in, jj, lambda)?);
            }
        }
    }

    for &(j, jp, w) in &dyads {
        let tj = &tables[&j];
        let tjp = &tables[&jp];
        for i in 0..d_in {
            for ip in 0..d_in {
                let r = rho.entries()[(i, ip)];
                if r.norm() == 0.0 {
                    continue;
                }
                let m_max = (i + j).min(ip + jp);
                for m in 0..=m_max {
                    let c = tj[i][i + j - m] * tjp[ip][ip + jp - m];
                    if c != 0.0 {
                        out[(i + j - m, ip + jp - m)] += w * r * c;
                    }
                }
            }
        }
    }
    let t_in = rho.tail_mass();
    let t_env = spec.env().tail_mass();
    let tail = (t_in + t_env - t_in * t_env).clamp(0.0, 1.0);
    TruncatedDensityMatrix::new(out, tail)
}

/// Closed-form mean photon number of the channel output:
/// λ⟨a†a⟩_ρ + (1−λ)⟨b†b⟩_σ + 2√(λ(1−λ)) Re(⟨a⟩_ρ ⟨b†⟩_σ).
pub fn output_mean_photon(spec: &ChannelSpec, rho: &TruncatedDensityMatrix) -> f64 {
    let lambda = spec.lambda();
    let cross = (rho.annihilation_expectation() * spec.env().annihilation_expectation().conj()).re;
    lambda * rho.diagonal().mean()
        + (1.0 - lambda) * spec.env().mean_photon()
        + 2.0 * (lambda * (1.0 - lambda)).sqrt() * cross
}

/// Closed-form mean photon number of the weak complementary output:
/// (1−λ)⟨a†a⟩_ρ + λ⟨b†b⟩_σ − 2√(λ(1−λ)) Re(⟨a⟩_ρ ⟨b†⟩_σ).
pub fn weak_complementary_mean_photon(spec: &ChannelSpec, rho: &TruncatedDensityMatrix) -> f64 {
    let lambda = spec.lambda();
    let cross = (rho.annihilation_expectation() * spec.env().annihilation_expectation().conj()).re;
    (1.0 - lambda) * rho.diagonal().mean() + lambda * spec.env().mean_photon()
        - 2.0 * (lambda * (1.0 - lambda)).sqrt() * cross
}

/// Dense two-mode beam-splitter unitary built by exponentiating the
/// antisymmetric generator arccos√λ (a₁†a₂ − a₁a₂†) sector by sector.
/// Sector T uses the basis |T−e⟩|e⟩ for e = 0..=T, so
/// ⟨i+j−m, m|U_λ|i, j⟩ = `sectors[i+j][(m, j)]`.
#[derive(Debug, Clone)]
pub struct BsUnitaryDense {
    pub lambda: f64,
    pub max_total: usize,
    sectors: Vec<DMatrix<f64>>,
}

impl BsUnitaryDense {
    pub fn build(lambda: f64, max_total: usize) -> Result<Self> {
        if max_total > DENSE_ORACLE_MAX_TOTAL {
            return Err(Error::Resource(format!(
                "dense oracle sector cutoff {max_total} exceeds {DENSE_ORACLE_MAX_TOTAL} photons"
            )));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("λ must lie in [0,1], got {lambda}")));
        }
        let theta = lambda.sqrt().acos();
        let mut sectors = Vec::with_capacity(max_total + 1);
        for total in 0..=max_total {
            let n = total + 1;
            let mut gen = DMatrix::<f64>::zeros(n, n);
            // a₁†a₂ |T−e, e⟩ = √(e (T−e+1)) |T−e+1, e−1⟩
            for e in 1..=total {
                let amp = (e as f64 * (total - e + 1) as f64).sqrt();
                gen[(e - 1, e)] += amp;
                gen[(e, e - 1)] -= amp;
            }
            let u = expm_real(&(theta * gen));
            // unitarity check, tolerance 1e−10
            let err = (&u * u.transpose() - DMatrix::<f64>::identity(n, n)).abs().max();
            if err > 1e-10 {
                return Err(Error::InvariantViolation(format!(
                    "sector {total} exponential lost unitarity: {err}"
                )));
            }
            sectors.push(u);
        }
        Ok(Self {
            lambda,
            max_total,
            sectors,
        })
    }

    /// ⟨i+j−m, m|U_λ|i, j⟩.
    pub fn coefficient(&self, i: usize, j: usize, m: usize) -> Result<f64> {
        let total = i + j;
        if total > self.max_total || m > total {
            return Err(Error::Shape(format!(
                "sector {total} or index m = {m} outside the oracle"
            )));
        }
        Ok(self.sectors[total][(m, j)])
    }

    pub fn sector(&self, total: usize) -> &DMatrix<f64> {
        &self.sectors[total]
    }

    /// The unitary as one matrix on the product basis |i⟩|j⟩ (i < d1, j < d2),
    /// column index i·d2 + j. Intended for small oracle comparisons.
    pub fn full_matrix(&self, d1: usize, d2: usize) -> Result<DMatrix<f64>> {
        if d1 + d2 < 2 || d1 + d2 - 2 > self.max_total {
            return Err(Error::Resource(format!(
                "full matrix needs sector {} > oracle cutoff {}",
                d1 + d2 - 2,
                self.max_total
            )));
        }
        let n = d1 * d2;
        let mut u = DMatrix::<f64>::zeros(n, n);
        for i in 0..d1 {
            for j in 0..d2 {
                let total = i + j;
                for m in 0..=total {
                    let out_s = i + j - m;
                    if out_s < d1 && m < d2 {
                        u[(out_s * d2 + m, i * d2 + j)] = self.sectors[total][(m, j)];
                    }
                }
            }
        }
        Ok(u)
    }
}

/// Matrix exponential by scaling and squaring with a Taylor series.
fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a / 2.0_f64.powi(s as i32);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=30 {
        term = (&term * &b) / k as f64;
        result += &term;
        if term.abs().max() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
