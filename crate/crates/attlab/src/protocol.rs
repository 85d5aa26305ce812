//! The noise-attenuation protocol: trigger-state construction through the
//! beam-splitter interferometer, exact multimode evolution of the channel
//! environment, closed-form output moments, thermalisation interleaving,
//! and the trace-distance guarantees that make the protocol work.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::asymptotics::ln_bessel_i;
use crate::capacities::fock_diag_lower_bound;
use crate::error::{Error, Result};
use crate::fock::{
    bosonic_entropy_g, thermal_state, trace_distance, FockDistribution, MomentSummary,
    TruncatedDensityMatrix,
};
use crate::numeric::{binomial, ln_factorial, KahanSum};
use crate::sector::{SectorBasis, SectorMixed, SectorPure};
use crate::thermal::p_distribution;

/// Desk-scale guards for the exact simulation.
pub const EXACT_K_MAX: usize = 6;
pub const EXACT_N_MAX: usize = 8;
/// Default total-photon budget for the two-trigger runs.
pub const DEFAULT_SECTOR_BUDGET: usize = 30;
/// Largest density block the interleaved (δt > 0) path will allocate.
const MIXED_BLOCK_DIM_MAX: f64 = 4096.0;
/// Environment Fock components are kept until the thermal tail is below this.
const ENV_COMPONENT_TAIL: f64 = 1e-12;

/// Stationary environment state σ₀ of the transmission line.
#[derive(Debug, Clone)]
pub enum SigmaZero {
    Vacuum,
    Thermal(f64),
    Explicit(TruncatedDensityMatrix),
}

impl SigmaZero {
    /// ⟨b†b⟩ and ⟨(b†b)²⟩ of σ₀.
    pub fn moments(&self) -> Result<MomentSummary> {
        match self {
            SigmaZero::Vacuum => MomentSummary::new(0.0, 0.0),
            SigmaZero::Thermal(nu) => {
                if !(*nu >= 0.0) {
                    return Err(Error::Domain(format!("thermal σ₀ needs ν ≥ 0, got {nu}")));
                }
                // ⟨n̂⟩ = ν, ⟨n̂²⟩ = ν(2ν+1)
                MomentSummary::from_mean_and_second(*nu, nu * (2.0 * nu + 1.0))
            }
            SigmaZero::Explicit(m) => m.moments(),
        }
    }

    /// Fock components (j, weight) with tail below `tail_tol`, for the
    /// diagonal part; explicit matrices also report off-diagonal dyads.
    fn diagonal_components(&self, tail_tol: f64) -> Result<(Vec<(usize, f64)>, f64)> {
        match self {
            SigmaZero::Vacuum => Ok((vec![(0, 1.0)], 0.0)),
            SigmaZero::Thermal(nu) => {
                if *nu == 0.0 {
                    return Ok((vec![(0, 1.0)], 0.0));
                }
                let ratio = nu / (nu + 1.0);
                let mut comps = Vec::new();
                let mut w = 1.0 / (nu + 1.0);
                let mut cum = 0.0;
                let mut j = 0usize;
                while 1.0 - cum > tail_tol {
                    comps.push((j, w));
                    cum += w;
                    w *= ratio;
                    j += 1;
                    if j > 4096 {
                        return Err(Error::Cutoff(format!(
                            "thermal σ₀ with ν = {nu} does not reach tail {tail_tol}"
                        )));
                    }
                }
                Ok((comps, 1.0 - cum))
            }
            SigmaZero::Explicit(m) => {
                let comps = (0..m.dim())
                    .map(|j| (j, m.entries()[(j, j)].re))
                    .filter(|&(_, w)| w > 0.0)
                    .collect();
                Ok((comps, m.tail_mass()))
            }
        }
    }

    fn is_diagonal(&self) -> bool {
        match self {
            SigmaZero::Vacuum | SigmaZero::Thermal(_) => true,
            SigmaZero::Explicit(m) => {
                let mut off = 0.0;
                for i in 0..m.dim() {
                    for j in 0..m.dim() {
                        if i != j {
                            off += m.entries()[(i, j)].norm();
                        }
                    }
                }
                off < 1e-14
            }
        }
    }

    /// σ₀ as a distribution on ℕ (diagonal stationary states only).
    pub fn as_distribution(&self, d: usize) -> Result<FockDistribution> {
        match self {
            SigmaZero::Vacuum => Ok(FockDistribution::point_mass(0)),
            SigmaZero::Thermal(nu) => thermal_state(*nu, d),
            SigmaZero::Explicit(m) => {
                if !self.is_diagonal() {
                    return Err(Error::Domain(
                        "explicit σ₀ must be Fock-diagonal here".into(),
                    ));
                }
                Ok(m.diagonal())
            }
        }
    }
}

/// How the environment relaxes toward σ₀ between signals: an effective
/// transmissivity η(δt) with η(0) = 1 and η(δt) = 0 once δt ≥ t_E, so that
/// ξ_{δt} = Φ_{η(δt),σ₀} interpolates between the identity and a hard
/// reset.
#[derive(Debug, Clone, Copy)]
pub struct ThermalizationModel {
    pub t_e: f64,
    pub shape: EtaShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaShape {
    /// η(δt) = max(0, 1 − δt/t_E) (default).
    Linear,
    /// η(δt) = e^{−5 δt/t_E} for δt < t_E, 0 beyond.
    Exponential,
}

impl ThermalizationModel {
    pub fn new(t_e: f64, shape: EtaShape) -> Result<Self> {
        if !(t_e > 0.0) {
            return Err(Error::Domain(format!("t_E must be > 0, got {t_e}")));
        }
        Ok(Self { t_e, shape })
    }

    pub fn eta(&self, delta_t: f64) -> f64 {
        if delta_t <= 0.0 {
            return 1.0;
        }
        if delta_t >= self.t_e {
            return 0.0;
        }
        match self.shape {
            EtaShape::Linear => 1.0 - delta_t / self.t_e,
            EtaShape::Exponential => (-5.0 * delta_t / self.t_e).exp(),
        }
    }
}

impl Default for ThermalizationModel {
    fn default() -> Self {
        Self {
            t_e: 1.0,
            shape: EtaShape::Linear,
        }
    }
}

/// One run of the noise-attenuation protocol: k trigger signals prepared
/// in |n,λ⟩ are flashed into the line, each separated by δt.
#[derive(Debug, Clone)]
pub struct TriggerPlan {
    pub n: usize,
    pub lambda: f64,
    pub k: usize,
    pub sigma0: SigmaZero,
    pub delta_t: f64,
    pub therm: ThermalizationModel,
}

impl TriggerPlan {
    pub fn new(n: usize, lambda: f64, k: usize, sigma0: SigmaZero) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("need k ≥ 1 trigger signals".into()));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain(format!(
                "the protocol needs λ ∈ (0,1), got {lambda}"
            )));
        }
        Ok(Self {
            n,
            lambda,
            k,
            sigma0,
            delta_t: 0.0,
            therm: ThermalizationModel::default(),
        })
    }

    pub fn with_delay(mut self, delta_t: f64, therm: ThermalizationModel) -> Result<Self> {
        if !(delta_t >= 0.0) {
            return Err(Error::Domain(format!("δt must be ≥ 0, got {delta_t}")));
        }
        self.delta_t = delta_t;
        self.therm = therm;
        Ok(self)
    }
}

/// Mode weights of h_{λ,k} = √((1−λ)/(1−λ^k)) Σ_l λ^{(k−l)/2} a_l,
/// indexed by l − 1. Their squares sum to exactly 1 (the commutator
/// normalisation [h, h†] = 1).
pub fn h_mode_coeffs(lambda: f64, k: usize) -> Result<Vec<f64>> {
    if k == 0 || !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "h_mode_coeffs needs k ≥ 1 and λ ∈ (0,1), got k = {k}, λ = {lambda}"
        )));
    }
    let pref = ((1.0 - lambda) / (1.0 - lambda.powi(k as i32))).sqrt();
    Ok((1..=k)
        .map(|l| pref * lambda.powf((k - l) as f64 / 2.0))
        .collect())
}

/// The k-mode trigger state |n,λ⟩, built by feeding |0…0, n⟩ through the
/// beam-splitter chain U^{(S₁S₂)}…U^{(S_{k−1}S_k)}; for k = 1 this is |n⟩.
pub fn trigger_state(n: usize, lambda: f64, k: usize) -> Result<SectorPure> {
    if k == 0 || !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "trigger_state needs k ≥ 1 and λ ∈ (0,1), got k = {k}, λ = {lambda}"
        )));
    }
    let mut occ = vec![0u16; k];
    occ[k - 1] = n as u16;
    let mut psi = SectorPure::from_occupation(&occ);
    // rightmost splitter first: pair (S_i, S_{i+1}) at (1−λ)/(1−λ^{i+1})
    for i in (1..k).rev() {
        let mu = (1.0 - lambda) / (1.0 - lambda.powi(i as i32 + 1));
        psi.apply_bs(i - 1, i, mu)?;
    }
    Ok(psi)
}

/// The same state from its definition (h†_{λ,k})ⁿ/√n! |0…0⟩, expanded
/// multinomially — the independent construction used to validate the
/// interferometer recipe.
pub fn trigger_state_direct(n: usize, lambda: f64, k: usize) -> Result<SectorPure> {
    let coeffs = h_mode_coeffs(lambda, k)?;
    let basis = SectorBasis::new(k, n);
    let mut amp = vec![0.0; basis.dim()];
    for (idx, state) in basis.states().iter().enumerate() {
        // √(n!) Π_l c_l^{n_l}/√(n_l!)
        let mut ln_mag = 0.5 * ln_factorial(n);
        let mut value = 1.0;
        for (l, &occ) in state.iter().enumerate() {
            value *= coeffs[l].powi(occ as i32);
            ln_mag -= 0.5 * ln_factorial(occ as usize);
        }
        amp[idx] = value * ln_mag.exp();
    }
    Ok(SectorPure { basis, amp })
}

fn check_exact_budget(n: usize, k: usize) -> Result<()> {
    if n > EXACT_N_MAX || k > EXACT_K_MAX {
        return Err(Error::Resource(format!(
            "exact simulation is desk-scaled to n ≤ {EXACT_N_MAX}, k ≤ {EXACT_K_MAX} \
             (got n = {n}, k = {k}); use env_moments for the closed-form moments"
        )));
    }
    Ok(())
}

/// Environment state after the k trigger signals with no thermalisation in
/// between (δt = 0): Δ^{(k)}_{λ,σ₀}(|n,λ⟩⟨n,λ|) by exact sector evolution.
pub fn env_after_triggers(plan: &TriggerPlan) -> Result<TruncatedDensityMatrix> {
    if plan.delta_t != 0.0 {
        return Err(Error::Domain(
            "env_after_triggers is the δt = 0 path; use env_after_triggers_exact".into(),
        ));
    }
    check_exact_budget(plan.n, plan.k)?;
    let trigger = trigger_state(plan.n, plan.lambda, plan.k)?;
    if plan.sigma0.is_diagonal() {
        let (comps, tail) = plan.sigma0.diagonal_components(ENV_COMPONENT_TAIL)?;
        let j_max = comps.iter().map(|&(j, _)| j).max().unwrap_or(0);
        let d_out = plan.n + j_max + 1;
        let mut diag = vec![0.0_f64; d_out];
        for &(j, w) in &comps {
            let evolved = evolve_with_env(&trigger, j as u16, plan.lambda, plan.k)?;
            let red = evolved.cross_reduced(&evolved, plan.k);
            for e in 0..red.nrows() {
                diag[e] += w * red[(e, e)];
            }
        }
        let mut m = DMatrix::<Complex64>::zeros(d_out, d_out);
        for (e, &v) in diag.iter().enumerate() {
            m[(e, e)] = Complex64::new(v, 0.0);
        }
        TruncatedDensityMatrix::new(m, tail)
    } else {
        let SigmaZero::Explicit(sigma) = &plan.sigma0 else {
            unreachable!()
        };
        let d_env = sigma.dim();
        let d_out = plan.n + d_env;
        let evolved: Vec<SectorPure> = (0..d_env)
            .map(|j| evolve_with_env(&trigger, j as u16, plan.lambda, plan.k))
            .collect::<Result<Vec<_>>>()?;
        let mut out = DMatrix::<Complex64>::zeros(d_out, d_out);
        for j in 0..d_env {
            for jp in 0..d_env {
                let w = sigma.entries()[(j, jp)];
                if w.norm() == 0.0 {
                    continue;
                }
                let block = evolved[j].cross_reduced(&evolved[jp], plan.k);
                for e in 0..block.nrows() {
                    for ep in 0..block.ncols() {
                        if block[(e, ep)] != 0.0 {
                            out[(e, ep)] += w * block[(e, ep)];
                        }
                    }
                }
            }
        }
        TruncatedDensityMatrix::new(out, sigma.tail_mass())
    }
}

fn evolve_with_env(trigger: &SectorPure, j: u16, lambda: f64, k: usize) -> Result<SectorPure> {
    let mut psi = trigger.tensor_fock(j);
    for i in 0..k {
        psi.apply_bs(i, k, lambda)?;
    }
    Ok(psi)
}

/// Environment state with the thermalisation channel ξ_{δt} = Φ_{η(δt),σ₀}
/// interleaved after every trigger interaction (the exact expression of
/// the protocol). δt = 0 reduces to [`env_after_triggers`]; δt ≥ t_E
/// returns σ₀ exactly.
pub fn env_after_triggers_exact(plan: &TriggerPlan) -> Result<TruncatedDensityMatrix> {
    check_exact_budget(plan.n, plan.k)?;
    if !plan.sigma0.is_diagonal() {
        return Err(Error::Domain(
            "the interleaved path needs a Fock-diagonal σ₀".into(),
        ));
    }
    let eta = plan.therm.eta(plan.delta_t);
    let (comps, sigma_tail) = plan.sigma0.diagonal_components(ENV_COMPONENT_TAIL)?;
    let j_max = comps.iter().map(|&(j, _)| j).max().unwrap_or(0);
    // headroom for photons injected by the thermalisation channel
    let extra = if matches!(plan.sigma0, SigmaZero::Vacuum) {
        0
    } else {
        8
    };
    let max_total = plan.n + j_max + extra;
    let block_dim = SectorBasis::dim_for(plan.k + 1, max_total);
    if block_dim > MIXED_BLOCK_DIM_MAX {
        return Err(Error::Resource(format!(
            "interleaved run needs blocks of dimension ~{block_dim:.0} \
             (> {MIXED_BLOCK_DIM_MAX}); reduce k, n, or the σ₀ temperature"
        )));
    }
    let trigger = trigger_state(plan.n, plan.lambda, plan.k)?;
    let xi_env = plan.sigma0.as_distribution(j_max + extra + 1)?;
    let top = plan.n + j_max + extra + 1;
    let mut diag = vec![0.0_f64; top];
    let mut lost = 0.0;
    for &(j, w) in &comps {
        let psi = trigger.tensor_fock(j as u16);
        let mut state = SectorMixed::from_pure(&psi, max_total)?;
        for _ in 0..plan.k {
            // S_i is always the current first mode; E the last
            let env_mode = state.modes - 1;
            state.apply_bs(0, env_mode, plan.lambda)?;
            state.trace_out(0);
            let env_mode = state.modes - 1;
            state.apply_attenuator_on_mode(env_mode, eta, &xi_env)?;
        }
        lost += w * state.lost_mass;
        let d = state.into_single_mode_diagonal()?;
        for (e, &v) in d.iter().enumerate() {
            diag[e] += w * v;
        }
    }
    let mut m = DMatrix::<Complex64>::zeros(top, top);
    for (e, &v) in diag.iter().enumerate() {
        m[(e, e)] = Complex64::new(v.max(0.0), 0.0);
    }
    let trace: f64 = diag.iter().sum();
    let tail = (sigma_tail + lost + (1.0 - sigma_tail - lost - trace).max(0.0)).clamp(0.0, 1.0);
    TruncatedDensityMatrix::new(m, tail)
}

/// Closed-form moments of the protocol's output environment state:
/// mean (1−λᵏ)n + λᵏ⟨b†b⟩₀ and the matching variance expansion.
pub fn env_moments(
    n: usize,
    lambda: f64,
    k: usize,
    sigma0: &MomentSummary,
) -> Result<MomentSummary> {
    if k == 0 || !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "env_moments needs k ≥ 1 and λ ∈ (0,1), got k = {k}, λ = {lambda}"
        )));
    }
    let lk = lambda.powi(k as i32);
    let n = n as f64;
    let m0 = sigma0.mean_photon;
    let v0 = sigma0.photon_variance;
    let mean = (1.0 - lk) * n + lk * m0;
    let variance = 2.0 * n * lk * (1.0 - lk) * m0
        + lk * lk * v0
        + lk * (1.0 - lk) * n
        + lk * (1.0 - lk) * m0;
    MomentSummary::new(mean, variance)
}

/// Photon-number variance of the output environment for arbitrary trigger
/// moments — the quantity whose strict positivity shows environmental Fock
/// states are not exactly reachable from a thermal line:
/// (1−λᵏ)² V_trig + λ^{2k} ν(ν+1) + λᵏ(1−λᵏ)[(2ν+1)⟨h†h⟩ + ν].
pub fn no_go_variance(
    lambda: f64,
    k: usize,
    nu: f64,
    trigger_mean: f64,
    trigger_variance: f64,
) -> Result<f64> {
    if !(nu >= 0.0) || k == 0 || !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "no_go_variance needs ν ≥ 0, k ≥ 1, λ ∈ (0,1); got ({lambda}, {k}, {nu})"
        )));
    }
    let lk = lambda.powi(k as i32);
    Ok((1.0 - lk) * (1.0 - lk) * trigger_variance
        + lk * lk * nu * (nu + 1.0)
        + lk * (1.0 - lk) * ((2.0 * nu + 1.0) * trigger_mean + nu))
}

/// η of the k-trigger distance bound ‖σ_{λ,n,k} − |n⟩⟨n|‖₁ ≤ η λ^{k/2}:
/// η = 2√(n² + ⟨(b†b)²⟩₀ + (2n+1)⟨b†b⟩₀ + n).
pub fn eta_bound_constant(n: usize, sigma0: &MomentSummary) -> f64 {
    let n = n as f64;
    2.0 * (n * n + sigma0.second_moment + (2.0 * n + 1.0) * sigma0.mean_photon + n).sqrt()
}

/// k₀ of the two-trigger bound: [2 + 3⟨b†b⟩₀ + ⟨(b†b)²⟩₀]^{1/2}.
pub fn k0_bound_constant(sigma0: &MomentSummary) -> f64 {
    (2.0 + 3.0 * sigma0.mean_photon + sigma0.second_moment).sqrt()
}

/// Outcome of the two-trigger run at small λ.
#[derive(Debug, Clone)]
pub struct TwoTriggerOutcome {
    pub sigma: TruncatedDensityMatrix,
    pub n_lambda: usize,
    pub exact_distance: f64,
    pub bound: f64,
}

/// Exact 3-mode simulation of the two-trigger protocol with
/// |n_λ,λ⟩ = U_{1/(1+λ)}|0⟩|n_λ⟩ and 1/λ − 1 ≤ n_λ ≤ 1/λ. Returns the
/// resulting environment state, the exact trace distance from |n_λ⟩⟨n_λ|,
/// and the 2k₀√λ bound that must dominate it.
pub fn two_trigger_env(
    lambda: f64,
    sigma0: &SigmaZero,
    budget: usize,
) -> Result<TwoTriggerOutcome> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "two_trigger_env needs λ ∈ (0,1), got {lambda}"
        )));
    }
    let n_lambda = (1.0 / lambda).floor() as usize;
    let (comps, _) = sigma0.diagonal_components(ENV_COMPONENT_TAIL)?;
    let j_max = comps.iter().map(|&(j, _)| j).max().unwrap_or(0);
    if !sigma0.is_diagonal() {
        return Err(Error::Domain(
            "two_trigger_env expects a Fock-diagonal σ₀".into(),
        ));
    }
    if n_lambda + j_max > budget {
        return Err(Error::Resource(format!(
            "two-trigger run needs total photons up to {} > budget {budget} \
             (λ = {lambda}); raise the budget or λ",
            n_lambda + j_max
        )));
    }
    // trigger |n_λ,λ⟩ on modes (S₁, S₂)
    let mut trigger = SectorPure::from_occupation(&[0, n_lambda as u16]);
    trigger.apply_bs(0, 1, 1.0 / (1.0 + lambda))?;
    let d_out = n_lambda + j_max + 1;
    let mut diag = vec![0.0_f64; d_out];
    let mut tail = match sigma0 {
        SigmaZero::Vacuum => 0.0,
        SigmaZero::Thermal(_) => {
            let total: f64 = comps.iter().map(|&(_, w)| w).sum();
            1.0 - total
        }
        SigmaZero::Explicit(m) => m.tail_mass(),
    };
    for &(j, w) in &comps {
        let evolved = evolve_with_env(&trigger, j as u16, lambda, 2)?;
        let red = evolved.cross_reduced(&evolved, 2);
        for e in 0..red.nrows().min(d_out) {
            diag[e] += w * red[(e, e)];
        }
    }
    let mut m = DMatrix::<Complex64>::zeros(d_out, d_out);
    for (e, &v) in diag.iter().enumerate() {
        m[(e, e)] = Complex64::new(v, 0.0);
    }
    tail = tail.clamp(0.0, 1.0);
    let sigma = TruncatedDensityMatrix::new(m, tail)?;
    let fock = TruncatedDensityMatrix::fock(n_lambda, d_out)?;
    let exact_distance = trace_distance(&sigma, &fock)?;
    let bound = 2.0 * k0_bound_constant(&sigma0.moments()?) * lambda.sqrt();
    Ok(TwoTriggerOutcome {
        sigma,
        n_lambda,
        exact_distance,
        bound,
    })
}

/// The single-trigger appendix setup on a pure-loss line: one Fock-|n⟩
/// trigger turns the vacuum environment into Binomial(n, 1−λ), and the
/// Fock-diagonal lower bound gives the entanglement-assisted rate
/// z = g(N) + f(N, λ) reachable afterwards.
pub fn single_trigger_binomial(
    n: usize,
    lambda: f64,
    n_mean: f64,
) -> Result<(FockDistribution, f64)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("λ must lie in [0,1], got {lambda}")));
    }
    let weights: Vec<f64> = (0..=n)
        .map(|l| binomial(n, l) * (1.0 - lambda).powi(l as i32) * lambda.powi((n - l) as i32))
        .collect();
    let env = FockDistribution::new(0, weights, 1e-10)?;
    let z = bosonic_entropy_g(n_mean)? + fock_diag_lower_bound(&env, n_mean, lambda)?;
    Ok((env, z))
}

/// λ → 0⁺ limit of the distance between the one-trigger environment and
/// the target Fock state: 2[1 − e^{−(2ν+1)} I₀(2√(ν(ν+1)))] > 0, the
/// quantitative reason a single trigger is not enough.
pub fn one_trigger_limit_distance(nu: f64) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("needs ν ≥ 0, got {nu}")));
    }
    let z = 2.0 * (nu * (nu + 1.0)).sqrt();
    let q0 = (-(2.0 * nu + 1.0) + ln_bessel_i(0, z)?).exp();
    Ok(2.0 * (1.0 - q0))
}

/// The same distance at finite λ: ‖Φ̃^{wc}_{λ,τ_ν}(|n_λ⟩⟨n_λ|) − |n_λ⟩⟨n_λ|‖₁
/// with n_λ = ⌊1/λ⌋, which approaches [`one_trigger_limit_distance`] as
/// λ → 0⁺.
pub fn one_trigger_distance_at(lambda: f64, nu: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("needs λ ∈ (0,1), got {lambda}")));
    }
    let n_lambda = (1.0 / lambda).floor() as usize;
    let p = p_distribution(nu, n_lambda, lambda, 1e-12)?;
    let mut acc = KahanSum::default();
    for (l, &w) in p.weights().iter().enumerate() {
        if l == n_lambda {
            acc.add((1.0 - w).abs());
        } else {
            acc.add(w);
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_coeffs_examples() {
        assert_eq!(h_mode_coeffs(0.3, 1).unwrap(), vec![1.0]);
        let c = h_mode_coeffs(0.5, 2).unwrap();
        assert!((c[0] - (1.0_f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((c[1] - (2.0_f64 / 3.0).sqrt()).abs() < 1e-14);
        let c = h_mode_coeffs(0.9, 40).unwrap();
        let norm: f64 = c.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trigger_state_constructions_agree() {
        // k = 1 is |n⟩ itself
        let t = trigger_state(4, 0.3, 1).unwrap();
        assert_eq!(t.basis.dim(), 1);
        assert!((t.amp[0] - 1.0).abs() < 1e-14);
        // n = 0 is the k-mode vacuum
        let t = trigger_state(0, 0.3, 4).unwrap();
        assert!((t.amp[0] - 1.0).abs() < 1e-14);
        // interferometer vs (h†)ⁿ expansion: overlap 1
        for (n, k, lambda) in [(3usize, 3usize, 0.4_f64), (2, 4, 0.7), (5, 2, 0.25)] {
            let a = trigger_state(n, lambda, k).unwrap();
            let b = trigger_state_direct(n, lambda, k).unwrap();
            assert!((a.norm() - 1.0).abs() < 1e-12);
            assert!((b.norm() - 1.0).abs() < 1e-12);
            assert!(
                (a.overlap(&b) - 1.0).abs() < 1e-10,
                "n={n} k={k} λ={lambda}: overlap {}",
                a.overlap(&b)
            );
        }
    }

    #[test]
    fn vacuum_triggers_leave_vacuum() {
        let plan = TriggerPlan::new(0, 0.37, 3, SigmaZero::Vacuum).unwrap();
        let out = env_after_triggers(&plan).unwrap();
        assert!((out.entries()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn env_moments_examples_and_match_with_simulation() {
        // (n=2, λ=0.5, k=2, vacuum): mean 1.5, variance λᵏ(1−λᵏ)n = 0.375
        let m = env_moments(2, 0.5, 2, &SigmaZero::Vacuum.moments().unwrap()).unwrap();
        assert!((m.mean_photon - 1.5).abs() < 1e-12);
        assert!((m.photon_variance - 0.375).abs() < 1e-12);
        // k → ∞ proxy
        let m = env_moments(3, 0.4, 50, &SigmaZero::Thermal(0.7).moments().unwrap()).unwrap();
        assert!((m.mean_photon - 3.0).abs() < 1e-12);
        assert!(m.photon_variance < 1e-12);
        // exact simulation agrees
        for sigma0 in [SigmaZero::Vacuum, SigmaZero::Thermal(0.5)] {
            for (n, k, lambda) in [(2usize, 2usize, 0.5_f64), (3, 3, 0.3), (1, 4, 0.6)] {
                let plan = TriggerPlan::new(n, lambda, k, sigma0.clone()).unwrap();
                let out = env_after_triggers(&plan).unwrap();
                let sim = out.moments().unwrap();
                let closed = env_moments(n, lambda, k, &sigma0.moments().unwrap()).unwrap();
                assert!(
                    (sim.mean_photon - closed.mean_photon).abs() < 1e-9,
                    "mean n={n} k={k} λ={lambda}"
                );
                assert!(
                    (sim.photon_variance - closed.photon_variance).abs() < 1e-7,
                    "variance n={n} k={k} λ={lambda}: {} vs {}",
                    sim.photon_variance,
                    closed.photon_variance
                );
            }
        }
    }

    #[test]
    fn no_go_variance_examples() {
        // the only exact case: ν = 0, vacuum triggers
        assert_eq!(no_go_variance(0.5, 3, 0.0, 0.0, 0.0).unwrap(), 0.0);
        // thermal floor: ≥ λ^{2k} ν(ν+1)
        let v = no_go_variance(0.5, 3, 1.0, 5.0, 0.0).unwrap();
        assert!(v >= 0.5_f64.powi(6) * 2.0);
        // middle term with ν = 0 and ⟨h†h⟩ = 2
        let v = no_go_variance(0.5, 3, 0.0, 2.0, 0.0).unwrap();
        let lk = 0.5_f64.powi(3);
        assert!((v - lk * (1.0 - lk) * 2.0).abs() < 1e-15);
    }

    #[test]
    fn eta_bound_holds_on_small_grid() {
        for sigma0 in [SigmaZero::Vacuum, SigmaZero::Thermal(0.5)] {
            let moments = sigma0.moments().unwrap();
            for n in [1usize, 3] {
                for k in 1..=4usize {
                    let lambda = 0.3;
                    let plan = TriggerPlan::new(n, lambda, k, sigma0.clone()).unwrap();
                    let out = env_after_triggers(&plan).unwrap();
                    let fock = TruncatedDensityMatrix::fock(n, out.dim()).unwrap();
                    let exact = trace_distance(&out, &fock).unwrap();
                    let mid = crate::fock::fock_distance_bound(
                        &env_moments(n, lambda, k, &moments).unwrap(),
                        n,
                    );
                    let eta = eta_bound_constant(n, &moments) * lambda.powf(k as f64 / 2.0);
                    assert!(
                        exact <= mid + 1e-9 && mid <= eta + 1e-9,
                        "chain broken at n={n} k={k}: {exact} ≤ {mid} ≤ {eta}"
                    );
                }
            }
        }
    }

    #[test]
    fn two_trigger_bound_and_window() {
        // σ₀ = vacuum → k₀ = √2
        assert!((k0_bound_constant(&SigmaZero::Vacuum.moments().unwrap()) - 2.0_f64.sqrt()).abs() < 1e-14);
        let out = two_trigger_env(0.1, &SigmaZero::Vacuum, 30).unwrap();
        assert!(out.n_lambda == 9 || out.n_lambda == 10);
        assert!(out.exact_distance <= 2.0 * 2.0_f64.sqrt() * 0.1_f64.sqrt());
        assert!(out.exact_distance <= out.bound);
        // λ = 0.5 edge
        let out = two_trigger_env(0.5, &SigmaZero::Vacuum, 30).unwrap();
        assert!(out.n_lambda == 1 || out.n_lambda == 2);
        assert!(out.exact_distance <= out.bound);
        // budget guard
        assert!(two_trigger_env(0.01, &SigmaZero::Vacuum, 30).is_err());
    }

    #[test]
    fn interleaved_reduces_to_plain_at_zero_delay_and_resets_at_t_e() {
        let therm = ThermalizationModel::new(2.0, EtaShape::Linear).unwrap();
        let base = TriggerPlan::new(2, 0.4, 3, SigmaZero::Vacuum).unwrap();
        let plain = env_after_triggers(&base).unwrap();
        let zero = env_after_triggers_exact(&base.clone().with_delay(0.0, therm).unwrap()).unwrap();
        for e in 0..plain.dim().min(zero.dim()) {
            assert!(
                (plain.entries()[(e, e)].re - zero.entries()[(e, e)].re).abs() < 1e-10,
                "e={e}"
            );
        }
        // δt ≥ t_E: full reset to σ₀
        let reset =
            env_after_triggers_exact(&base.clone().with_delay(2.5, therm).unwrap()).unwrap();
        assert!((reset.entries()[(0, 0)].re - 1.0).abs() < 1e-10);
        // distance to the δt = 0 state shrinks as δt → 0
        let mut prev = f64::INFINITY;
        for dt in [1.0, 0.3, 0.02] {
            let out = env_after_triggers_exact(&base.clone().with_delay(dt, therm).unwrap())
                .unwrap();
            let d = plain.dim().max(out.dim());
            let a = embed(&plain, d);
            let b = embed(&out, d);
            let dist = trace_distance(&a, &b).unwrap();
            assert!(dist < prev + 1e-12, "δt={dt}");
            prev = dist;
        }
        assert!(prev < 0.08);
    }

    fn embed(m: &TruncatedDensityMatrix, d: usize) -> TruncatedDensityMatrix {
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                out[(i, j)] = m.entries()[(i, j)];
            }
        }
        TruncatedDensityMatrix::new(out, m.tail_mass()).unwrap()
    }

    #[test]
    fn single_trigger_endpoints() {
        // λ = 1: env = δ₀
        let (env, z) = single_trigger_binomial(5, 1.0, 0.5).unwrap();
        assert_eq!(env.weight_at(0), 1.0);
        let g = |x: f64| bosonic_entropy_g(x).unwrap();
        assert!((z - (g(0.5) + g(0.5) - g(0.0))).abs() < 1e-9);
        // λ = 0: env = δ_n
        let (env, _) = single_trigger_binomial(5, 0.0, 0.5).unwrap();
        assert_eq!(env.weight_at(5), 1.0);
    }

    #[test]
    fn one_trigger_limit_values() {
        // frozen oracle values
        let v0 = one_trigger_limit_distance(0.0).unwrap();
        assert!((v0 - 1.264_241_117_657_115_4).abs() < 1e-12);
        let v1 = one_trigger_limit_distance(1.0).unwrap();
        assert!((v1 - 1.576_575_832_076_113_0).abs() < 1e-12);
        // finite-λ distances approach the limit monotonically as λ → 0⁺
        let limit = one_trigger_limit_distance(0.5).unwrap();
        let mut prev_gap = f64::INFINITY;
        for lambda in [0.1, 0.05, 0.02] {
            let d = one_trigger_distance_at(lambda, 0.5).unwrap();
            let gap = (d - limit).abs();
            assert!(gap < prev_gap, "λ={lambda}");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.01);
    }
}
