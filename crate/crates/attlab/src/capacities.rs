//! Capacity formulas and lower bounds: coherent information for Fock
//! environments, the known closed forms for pure-loss and thermal
//! attenuators, the Fock-diagonal lower bound, and the diamond-norm
//! continuity-bound evaluator.
//!
//! Everything is in bits.

use crate::error::{Error, Result};
use crate::fock::{bosonic_entropy_g, entropy_of_weights, shannon_entropy, FockDistribution};
use crate::thermal::p_distribution;

/// Entropy-sum truncation: stop once cumulative mass exceeds 1 − 1e−12.
pub const ENTROPY_TAIL_TOL: f64 = 1e-12;

/// Strict-positivity tolerance for I_coh > 0 decisions (borderline values
/// within it count as non-positive, biasing thresholds upward).
pub const POSITIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityKind {
    ExactFormula,
    LowerBound,
    UpperBound,
}

/// One computed capacity figure with its provenance and the entropy-tail
/// error budget accumulated while evaluating it.
#[derive(Debug, Clone)]
pub struct CapacityReport {
    pub value_bits: f64,
    pub kind: CapacityKind,
    pub provenance: String,
    pub tail_budget: f64,
}

fn tail_entropy_budget(tail: f64) -> f64 {
    if tail > 0.0 {
        -tail * tail.log2()
    } else {
        0.0
    }
}

/// Coherent information of the general attenuator with Fock environment
/// |n⟩⟨n| on the thermal input τ_N:
/// I_coh = H(P(N,n,λ)) − H(P(N,n,1−λ)).
/// Antisymmetric under λ ↔ 1−λ and zero at λ = ½.
pub fn coherent_info_fock_env(n_env: f64, n: usize, lambda: f64) -> Result<f64> {
    Ok(coherent_info_report(n_env, n, lambda)?.value_bits)
}

/// Same as [`coherent_info_fock_env`] but carrying the tail budget.
pub fn coherent_info_report(n_env: f64, n: usize, lambda: f64) -> Result<CapacityReport> {
    if !(n_env > 0.0) {
        return Err(Error::Domain(format!("I_coh needs N > 0, got {n_env}")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("I_coh needs λ ∈ [0,1], got {lambda}")));
    }
    let out = p_distribution(n_env, n, lambda, ENTROPY_TAIL_TOL)?;
    let wc = p_distribution(n_env, n, 1.0 - lambda, ENTROPY_TAIL_TOL)?;
    let value = shannon_entropy(&out)? - shannon_entropy(&wc)?;
    Ok(CapacityReport {
        value_bits: value,
        kind: CapacityKind::LowerBound,
        provenance: "coherent-information(thermal input, Fock environment)".into(),
        tail_budget: tail_entropy_budget(out.tail_mass()) + tail_entropy_budget(wc.tail_mass()),
    })
}

/// Entanglement-assisted classical capacity of the pure-loss channel:
/// C_ea(Φ_{λ,|0⟩}, N) = g(N) + g(λN) − g((1−λ)N).
pub fn cea_pure_loss(lambda: f64, n_mean: f64) -> Result<f64> {
    check_lambda_n(lambda, n_mean)?;
    Ok(bosonic_entropy_g(n_mean)? + bosonic_entropy_g(lambda * n_mean)?
        - bosonic_entropy_g((1.0 - lambda) * n_mean)?)
}

/// Quantum capacity of the pure-loss channel:
/// g(λN) − g((1−λ)N) for λ ≥ ½, else 0.
pub fn q_pure_loss(lambda: f64, n_mean: f64) -> Result<f64> {
    check_lambda_n(lambda, n_mean)?;
    if lambda >= 0.5 {
        Ok(bosonic_entropy_g(lambda * n_mean)? - bosonic_entropy_g((1.0 - lambda) * n_mean)?)
    } else {
        Ok(0.0)
    }
}

/// Classical capacity of the thermal attenuator:
/// g(λN + (1−λ)ν) − g((1−λ)ν).
pub fn c_classical_thermal(lambda: f64, nu: f64, n_mean: f64) -> Result<f64> {
    check_lambda_n(lambda, n_mean)?;
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("ν must be ≥ 0, got {nu}")));
    }
    Ok(bosonic_entropy_g(lambda * n_mean + (1.0 - lambda) * nu)?
        - bosonic_entropy_g((1.0 - lambda) * nu)?)
}

/// Entanglement-assisted classical capacity of the thermal attenuator:
/// g(N) + g(N′) − g((D+N′−N−1)/2) − g((D−N′+N−1)/2) with
/// N′ = λN + (1−λ)ν and D = √((N+N′+1)² − 4λN(N+1)).
pub fn cea_thermal(lambda: f64, nu: f64, n_mean: f64) -> Result<f64> {
    check_lambda_n(lambda, n_mean)?;
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("ν must be ≥ 0, got {nu}")));
    }
    let np = lambda * n_mean + (1.0 - lambda) * nu;
    let disc = (n_mean + np + 1.0) * (n_mean + np + 1.0) - 4.0 * lambda * n_mean * (n_mean + 1.0);
    let d = disc.max(0.0).sqrt();
    let a1 = ((d + np - n_mean - 1.0) / 2.0).max(0.0);
    let a2 = ((d - np + n_mean - 1.0) / 2.0).max(0.0);
    Ok(bosonic_entropy_g(n_mean)? + bosonic_entropy_g(np)? - bosonic_entropy_g(a1)?
        - bosonic_entropy_g(a2)?)
}

/// The three capacity lower bounds fed by I_coh with a Fock environment:
/// C_ea ≥ g(N) + I_coh,  Q_ea ≥ (g(N) + I_coh)/2,  Q ≥ max(I_coh, 0).
pub fn capacity_lower_bounds(n_env: f64, n: usize, lambda: f64) -> Result<[CapacityReport; 3]> {
    let icoh = coherent_info_report(n_env, n, lambda)?;
    let g = bosonic_entropy_g(n_env)?;
    Ok([
        CapacityReport {
            value_bits: g + icoh.value_bits,
            kind: CapacityKind::LowerBound,
            provenance: "C_ea ≥ g(N) + I_coh".into(),
            tail_budget: icoh.tail_budget,
        },
        CapacityReport {
            value_bits: (g + icoh.value_bits) / 2.0,
            kind: CapacityKind::LowerBound,
            provenance: "Q_ea ≥ (g(N) + I_coh)/2".into(),
            tail_budget: icoh.tail_budget / 2.0,
        },
        CapacityReport {
            value_bits: icoh.value_bits.max(0.0),
            kind: CapacityKind::LowerBound,
            provenance: "Q ≥ max(I_coh, 0)".into(),
            tail_budget: icoh.tail_budget,
        },
    ])
}

/// Coherent-information lower bound for a Fock-diagonal environment
/// σ = Σ_i q_i |i⟩⟨i|:
///
/// f(N, λ) = H(Σ_i q_i P(N,i,λ)) − H(Σ_i q_i P(N,i,1−λ)) − H(q).
///
/// The argument order follows the subadditivity derivation (so q = δ_n
/// reproduces the Fock-environment coherent information), not the swapped
/// order of the printed definition.
pub fn fock_diag_lower_bound(q: &FockDistribution, n_env: f64, lambda: f64) -> Result<f64> {
    if q.offset() < 0 {
        return Err(Error::Domain(
            "environment distribution must live on ℕ".into(),
        ));
    }
    if !(n_env > 0.0) {
        return Err(Error::Domain(format!("needs N > 0, got {n_env}")));
    }
    let direct = mixture_output_weights(q, n_env, lambda)?;
    let flipped = mixture_output_weights(q, n_env, 1.0 - lambda)?;
    Ok(entropy_of_weights(&direct) - entropy_of_weights(&flipped) - shannon_entropy(q)?)
}

/// Eigenvalues {Σ_i q_i P_l(N,i,λ)}_l of Φ_{λ,σ}(τ_N) for Fock-diagonal σ.
pub fn mixture_output_weights(
    q: &FockDistribution,
    n_env: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for (idx, &w) in q.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let i = q.offset() as usize + idx;
        let p = p_distribution(n_env, i, lambda, ENTROPY_TAIL_TOL)?;
        if p.weights().len() > out.len() {
            out.resize(p.weights().len(), 0.0);
        }
        for (l, &pw) in p.weights().iter().enumerate() {
            out[l] += w * pw;
        }
    }
    Ok(out)
}

/// Diamond-norm continuity bound on the capacity difference of two
/// energy-limited channels: 56√ε g(4(αN+N₀)/√ε) + 6 g(4√ε), ε ∈ (0,1).
/// Vanishes as ε → 0⁺ and is numerically monotone on small ε.
pub fn continuity_bound(eps: f64, alpha: f64, n0: f64, n_mean: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!(
            "continuity bound needs ε ∈ (0,1), got {eps}"
        )));
    }
    let root = eps.sqrt();
    Ok(56.0 * root * bosonic_entropy_g(4.0 * (alpha * n_mean + n0) / root)?
        + 6.0 * bosonic_entropy_g(4.0 * root)?)
}

/// Symmetric-point identity: with a parity-eigenstate pure environment,
/// the entanglement-assisted capacity at λ = ½ equals g(N). Returns
/// g(N) + I_coh(Φ_{½,|n⟩⟨n|}, τ_N) and errors if it differs from g(N)
/// by more than 1e−10.
pub fn mutual_info_half_check(n: usize, n_env: f64) -> Result<f64> {
    let g = bosonic_entropy_g(n_env)?;
    let v = g + coherent_info_fock_env(n_env, n, 0.5)?;
    if (v - g).abs() > 1e-10 {
        return Err(Error::InvariantViolation(format!(
            "g(N) + I_coh at λ = ½ is {v}, expected g(N) = {g}"
        )));
    }
    Ok(v)
}

fn check_lambda_n(lambda: f64, n_mean: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("λ must lie in [0,1], got {lambda}")));
    }
    if !(n_mean >= 0.0) {
        return Err(Error::Domain(format!("N must be ≥ 0, got {n_mean}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamsplitter::{attenuator_apply, ChannelSpec, EnvState};
    use crate::fock::{thermal_state, TruncatedDensityMatrix};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn coherent_info_endpoints_and_antisymmetry() {
        let g1 = bosonic_entropy_g(1.0).unwrap();
        assert!(coherent_info_fock_env(1.0, 7, 0.5).unwrap().abs() < 1e-12);
        assert!((coherent_info_fock_env(1.0, 7, 1.0).unwrap() - g1).abs() < 1e-9);
        assert!((coherent_info_fock_env(1.0, 7, 0.0).unwrap() + g1).abs() < 1e-9);
        for lambda in [0.12, 0.3, 0.41] {
            let a = coherent_info_fock_env(0.8, 6, lambda).unwrap();
            let b = coherent_info_fock_env(0.8, 6, 1.0 - lambda).unwrap();
            assert!((a + b).abs() < 1e-10, "λ={lambda}");
        }
        // the positive region used throughout: (N=0.5, n=20, λ=0.4) > 0
        assert!(coherent_info_fock_env(0.5, 20, 0.4).unwrap() > POSITIVITY_TOL);
    }

    #[test]
    fn pure_loss_formulas() {
        let n = 1.3;
        let g = |x: f64| bosonic_entropy_g(x).unwrap();
        assert!((cea_pure_loss(1.0, n).unwrap() - 2.0 * g(n)).abs() < 1e-12);
        assert!((cea_pure_loss(0.5, n).unwrap() - g(n)).abs() < 1e-12);
        assert!(cea_pure_loss(0.0, n).unwrap().abs() < 1e-12);
        assert!(q_pure_loss(0.5, n).unwrap().abs() < 1e-12);
        assert!((q_pure_loss(1.0, n).unwrap() - g(n)).abs() < 1e-12);
        assert_eq!(q_pure_loss(0.3, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn thermal_formulas_and_reduction() {
        let g = |x: f64| bosonic_entropy_g(x).unwrap();
        assert!(cea_thermal(0.0, 0.7, 1.2).unwrap().abs() < 1e-12);
        assert!((cea_thermal(1.0, 0.7, 1.2).unwrap() - 2.0 * g(1.2)).abs() < 1e-12);
        // ν → 0 reduction to the pure-loss formula
        let a = cea_thermal(0.7, 0.0, 1.0).unwrap();
        let b = cea_pure_loss(0.7, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
        // classical capacity endpoints
        assert!(c_classical_thermal(0.0, 0.7, 1.2).unwrap().abs() < 1e-12);
        // monotone in λ on a grid at formula level
        for (nu, n) in [(0.0, 1.0), (0.5, 1.0), (2.0, 0.5)] {
            let mut prev_c = -1.0;
            let mut prev_cea = -1.0;
            for i in 0..=20 {
                let lambda = i as f64 / 20.0;
                let c = c_classical_thermal(lambda, nu, n).unwrap();
                let cea = cea_thermal(lambda, nu, n).unwrap();
                assert!(c >= prev_c - 1e-12, "C at λ={lambda}");
                assert!(cea >= prev_cea - 1e-12, "C_ea at λ={lambda}");
                prev_c = c;
                prev_cea = cea;
            }
        }
    }

    #[test]
    fn lower_bound_reports() {
        let [cea, qea, q] = capacity_lower_bounds(1.0, 4, 0.5).unwrap();
        let g1 = bosonic_entropy_g(1.0).unwrap();
        assert!((cea.value_bits - g1).abs() < 1e-10);
        assert!((qea.value_bits - g1 / 2.0).abs() < 1e-10);
        assert!(q.value_bits.abs() < 1e-10);
        let [cea, qea, q] = capacity_lower_bounds(1.0, 4, 1.0).unwrap();
        assert!((cea.value_bits - 2.0 * g1).abs() < 1e-9);
        assert!((qea.value_bits - g1).abs() < 1e-9);
        assert!((q.value_bits - g1).abs() < 1e-9);
        // the conditional noise-neutralisation regime: C_ea-lb > C(Id,N)
        let [cea, _, _] = capacity_lower_bounds(0.5, 20, 0.4).unwrap();
        assert!(cea.value_bits > bosonic_entropy_g(0.5).unwrap());
        assert!(cea.tail_budget < 1e-9);
    }

    #[test]
    fn fock_diag_bound_reductions() {
        // q = δ_n reproduces the Fock-environment coherent information
        let q = crate::fock::FockDistribution::point_mass(6);
        let a = fock_diag_lower_bound(&q, 1.0, 0.35).unwrap();
        let b = coherent_info_fock_env(1.0, 6, 0.35).unwrap();
        assert!((a - b).abs() < 1e-12);
        // q = δ₀ gives the pure-loss coherent information with thermal input
        let q0 = crate::fock::FockDistribution::point_mass(0);
        let a = fock_diag_lower_bound(&q0, 1.0, 0.9).unwrap();
        let g = |x: f64| bosonic_entropy_g(x).unwrap();
        assert!((a - (g(0.9) - g(0.1))).abs() < 1e-9);
        // uniform over {0,1} at λ = ½: the two entropies cancel, leaving −1
        let u = crate::fock::FockDistribution::new(0, vec![0.5, 0.5], 1e-12).unwrap();
        let a = fock_diag_lower_bound(&u, 1.0, 0.5).unwrap();
        assert!((a + 1.0).abs() < 1e-10);
    }

    #[test]
    fn continuity_bound_behaviour() {
        // the bound vanishes as ε → 0⁺ (at ε = 1e−12 it is still ~1.4e−3)
        assert!(continuity_bound(1e-14, 1.0, 1.0, 1.0).unwrap() < 1e-3);
        assert!(continuity_bound(1e-12, 1.0, 1.0, 1.0).unwrap() < 2e-3);
        assert!(continuity_bound(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(continuity_bound(1.0, 1.0, 1.0, 1.0).is_err());
        // frozen oracle value: 5.6·g(160) + 6·g(0.4) = 56.357297065021706
        let v = continuity_bound(0.01, 1.0, 3.0, 1.0).unwrap();
        assert!((v - 56.357_297_065_021_706).abs() < 1e-10);
        // monotone scaling on the ε/4 family
        for eps in [0.04, 0.01, 0.0025] {
            let big = continuity_bound(eps, 1.0, 3.0, 1.0).unwrap();
            let small = continuity_bound(eps / 4.0, 1.0, 3.0, 1.0).unwrap();
            assert!(small < big);
        }
    }

    #[test]
    fn symmetric_point_identity() {
        for (n, n_env) in [(0usize, 1.0), (5, 0.5), (12, 2.0)] {
            let v = mutual_info_half_check(n, n_env).unwrap();
            assert!((v - bosonic_entropy_g(n_env).unwrap()).abs() < 1e-10);
        }
    }

    /// True coherent information via a purification of the thermal input:
    /// I_coh = S(Φ(ρ)) − S((Φ⊗Id)(|ψ_ρ⟩⟨ψ_ρ|)), used as an independent
    /// oracle for the Theorem-5-style sandwich below.
    fn coherent_info_purified(env: &crate::fock::FockDistribution, lambda: f64, d: usize) -> f64 {
        let tau = thermal_state(1.0, d).unwrap();
        let spec = ChannelSpec::diagonal(lambda, env.clone()).unwrap();
        let rho = TruncatedDensityMatrix::from_diagonal(&tau).unwrap();
        let out = attenuator_apply(&spec, &rho).unwrap();
        // (Φ⊗Id)(|ψ⟩⟨ψ|) with |ψ⟩ = Σ √w_n |n⟩|n⟩: block (n, n') holds
        // √(w_n w_n') Φ(|n⟩⟨n'|)
        let d_out = out.dim();
        let mut joint = DMatrix::<Complex64>::zeros(d_out * d, d_out * d);
        for n in 0..d {
            for np in 0..d {
                let w = (tau.weights()[n] * tau.weights()[np]).sqrt();
                if w < 1e-18 {
                    continue;
                }
                let mut dyad = DMatrix::<Complex64>::zeros(d, d);
                dyad[(n, np)] = Complex64::new(1.0, 0.0);
                // reuse the channel on the (unnormalised) dyad via linearity:
                // build |n⟩⟨n'| as ½(|+⟩⟨+| − |−⟩⟨−| ± …) is overkill — apply
                // the dyad action directly through the spec's env dyads.
                let block = apply_to_dyad(&spec, n, np, d);
                for a in 0..d_out {
                    for b in 0..d_out {
                        joint[(a * d + n, b * d + np)] = w * block[(a, b)];
                    }
                }
            }
        }
        let s_out = out.entropy_bits();
        let evs = joint.symmetric_eigenvalues();
        let mut s_joint = 0.0;
        for &ev in evs.iter() {
            if ev > 1e-16 {
                s_joint -= ev * ev.log2();
            }
        }
        s_out - s_joint
    }

    /// Φ_{λ,σ}(|n⟩⟨n'|) for Fock-diagonal σ, dense output block.
    fn apply_to_dyad(spec: &ChannelSpec, n: usize, np: usize, d: usize) -> DMatrix<Complex64> {
        let lambda = spec.lambda();
        let EnvState::Diagonal(q) = spec.env() else {
            panic!("diagonal env expected")
        };
        let d_out = d + q.weights().len() + q.offset() as usize - 1;
        let mut out = DMatrix::<Complex64>::zeros(d_out, d_out);
        for (idx, &w) in q.weights().iter().enumerate() {
            let j = q.offset() as usize + idx;
            if w == 0.0 {
                continue;
            }
            for m in 0..=(n + j).min(np + j) {
                let c1 = crate::beamsplitter::bs_coefficient(n, j, m, lambda).unwrap();
                let c2 = crate::beamsplitter::bs_coefficient(np, j, m, lambda).unwrap();
                out[(n + j - m, np + j - m)] += Complex64::new(w * c1 * c2, 0.0);
            }
        }
        out
    }

    #[test]
    fn theorem5_sandwich_for_parity_invariant_mixtures() {
        // Fock-diagonal σ are parity-invariant; at λ = ½ the true coherent
        // information obeys −S(σ) ≤ I_coh ≤ 0.
        let d = 14;
        for weights in [vec![0.5, 0.0, 0.5], vec![0.2, 0.5, 0.3], vec![1.0]] {
            let env = crate::fock::FockDistribution::new(0, weights, 1e-12).unwrap();
            let icoh = coherent_info_purified(&env, 0.5, d);
            let s_env = shannon_entropy(&env).unwrap();
            assert!(icoh <= 1e-9, "upper side: {icoh}");
            assert!(icoh >= -s_env - 1e-6, "lower side: {icoh} vs {}", -s_env);
        }
    }
}
