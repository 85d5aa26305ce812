//! Truncated Fock-space state representations shared by every other module:
//! probability vectors over (possibly shifted) Fock indices, dense density
//! matrices with explicit truncation-tail bookkeeping, entropies, trace
//! distance, photon-number moments, and the variance-based distance bound
//! to a Fock state.
//!
//! All entropies are in bits (base-2 logarithm).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// Default tolerance below which truncation tails are considered harmless.
/// The CLI can override it through the `ATTLAB_TAIL_TOL` environment
/// variable; the library takes explicit arguments where it matters.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Hermiticity tolerance for density-matrix construction.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues more negative than this signal a truncation failure.
pub const EIGENVALUE_FLOOR: f64 = -1e-12;
/// |trace + tail − 1| tolerance.
pub const TRACE_TOL: f64 = 1e-10;

/// Default Fock cutoff for thermal-dominated states: room for the largest
/// Fock index involved plus ~10 thermal widths of headroom.
pub fn default_cutoff(n_max: usize, nu: f64) -> usize {
    n_max + (10.0 * (nu + 1.0)).ceil() as usize + 8
}

/// Bosonic entropy g(ν) = (ν+1)log₂(ν+1) − ν log₂ν, the entropy of a
/// thermal state with mean photon number ν, in bits.
pub fn bosonic_entropy_g(nu: f64) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("g(ν) needs ν ≥ 0, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(0.0);
    }
    Ok((nu + 1.0) * (nu + 1.0).log2() - nu * nu.log2())
}

/// Probability vector over Fock indices. `offset` is the index of
/// `weights[0]` and may be negative, supporting the shifted alphabet ℤ
/// used by the T₋ₙ-conjugated states.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    offset: i64,
    weights: Vec<f64>,
}

impl FockDistribution {
    /// Validating constructor. Weights below −1e−12 or total mass outside
    /// [1 − tail_tol, 1 + 1e−10] are rejected; small negatives are clamped.
    pub fn new(offset: i64, weights: Vec<f64>, tail_tol: f64) -> Result<Self> {
        let mut weights = weights;
        let mut sum = KahanSum::default();
        for w in &mut weights {
            if *w < -1e-12 {
                return Err(Error::InvalidDistribution(format!(
                    "negative weight {w}"
                )));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
            sum.add(*w);
        }
        let total = sum.value();
        if total > 1.0 + 1e-10 || total < 1.0 - tail_tol {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} outside [1 − {tail_tol}, 1]"
            )));
        }
        Ok(Self { offset, weights })
    }

    /// Point mass δ at index `at`.
    pub fn point_mass(at: i64) -> Self {
        Self {
            offset: at,
            weights: vec![1.0],
        }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at absolute index `k` (0 outside the stored range).
    pub fn weight_at(&self, k: i64) -> f64 {
        let i = k - self.offset;
        if i < 0 || i as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[i as usize]
        }
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = KahanSum::default();
        for &w in &self.weights {
            s.add(w);
        }
        s.value()
    }

    /// Trace deficit attributed to truncation.
    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.total_mass()).max(0.0)
    }

    /// Index shift T_k: moves every index up by `k`. Entropy-invariant.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            offset: self.offset + k,
            weights: self.weights.clone(),
        }
    }

    /// Mean index Σ k·w_k (may be negative for shifted distributions).
    pub fn mean(&self) -> f64 {
        let mut s = KahanSum::default();
        for (i, &w) in self.weights.iter().enumerate() {
            s.add((self.offset + i as i64) as f64 * w);
        }
        s.value()
    }

    /// Second moment Σ k²·w_k.
    pub fn second_moment(&self) -> f64 {
        let mut s = KahanSum::default();
        for (i, &w) in self.weights.iter().enumerate() {
            let k = (self.offset + i as i64) as f64;
            s.add(k * k * w);
        }
        s.value()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// ℓ1 distance Σ|p_k − q_k| over the union of supports.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        let lo = self.offset.min(other.offset);
        let hi = (self.offset + self.weights.len() as i64)
            .max(other.offset + other.weights.len() as i64);
        let mut s = KahanSum::default();
        for k in lo..hi {
            s.add((self.weight_at(k) - other.weight_at(k)).abs());
        }
        s.value()
    }

    /// ⟨(−1)^k⟩ over the distribution.
    pub fn parity_expectation(&self) -> f64 {
        let mut s = KahanSum::default();
        for (i, &w) in self.weights.iter().enumerate() {
            let k = self.offset + i as i64;
            s.add(if k.rem_euclid(2) == 0 { w } else { -w });
        }
        s.value()
    }

    /// Photon-number moments; requires a non-negative mean (physical state).
    pub fn moments(&self) -> Result<MomentSummary> {
        MomentSummary::from_mean_and_second(self.mean(), self.second_moment())
    }
}

/// Thermal state τ_ν truncated at `d` Fock levels:
/// weights[n] = ν^n/(ν+1)^{n+1}. ν = 0 yields the vacuum point mass.
pub fn thermal_state(nu: f64, d: usize) -> Result<FockDistribution> {
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("thermal_state needs ν ≥ 0, got {nu}")));
    }
    if d == 0 {
        return Err(Error::Domain("thermal_state needs d ≥ 1".into()));
    }
    let mut weights = Vec::with_capacity(d);
    let ratio = nu / (nu + 1.0);
    let mut w = 1.0 / (nu + 1.0);
    for _ in 0..d {
        weights.push(w);
        w *= ratio;
    }
    // tail is the exact geometric remainder (ν/(ν+1))^d
    Ok(FockDistribution {
        offset: 0,
        weights,
    })
}

/// Shannon entropy in bits with the 0·log₂0 ≔ 0 convention.
pub fn shannon_entropy(p: &FockDistribution) -> Result<f64> {
    let mut h = KahanSum::default();
    for &w in p.weights() {
        if w < -1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "negative weight {w} in entropy"
            )));
        }
        if w > 0.0 {
            h.add(-w * w.log2());
        }
    }
    Ok(h.value())
}

/// Entropy of a bare weight slice (same convention as [`shannon_entropy`]).
pub fn entropy_of_weights(ws: &[f64]) -> f64 {
    let mut h = KahanSum::default();
    for &w in ws {
        if w > 0.0 {
            h.add(-w * w.log2());
        }
    }
    h.value()
}

/// Photon-number moment triple with the redundancy
/// second_moment = variance + mean² kept explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub mean_photon: f64,
    pub photon_variance: f64,
    pub second_moment: f64,
}

impl MomentSummary {
    pub fn new(mean_photon: f64, photon_variance: f64) -> Result<Self> {
        if !(mean_photon >= 0.0) || !(photon_variance >= 0.0) {
            return Err(Error::Domain(format!(
                "moments need mean ≥ 0 and variance ≥ 0, got ({mean_photon}, {photon_variance})"
            )));
        }
        Ok(Self {
            mean_photon,
            photon_variance,
            second_moment: photon_variance + mean_photon * mean_photon,
        })
    }

    pub fn from_mean_and_second(mean: f64, second: f64) -> Result<Self> {
        if !(mean >= 0.0) {
            return Err(Error::Domain(format!(
                "mean photon number must be ≥ 0, got {mean}"
            )));
        }
        let var = (second - mean * mean).max(0.0);
        Ok(Self {
            mean_photon: mean,
            photon_variance: var,
            second_moment: second,
        })
    }
}

/// Right-hand side of the variance bound
/// ‖ρ − |n⟩⟨n|‖₁ ≤ 2√(V_ρ + (⟨a†a⟩_ρ − n)²).
pub fn fock_distance_bound(m: &MomentSummary, n: usize) -> f64 {
    let d = m.mean_photon - n as f64;
    2.0 * (m.photon_variance + d * d).sqrt()
}

/// Hermitian PSD matrix in the Fock basis {|0⟩..|d−1⟩} with the trace
/// deficit attributed to truncation recorded alongside.
#[derive(Debug, Clone)]
pub struct TruncatedDensityMatrix {
    dim: usize,
    entries: DMatrix<Complex64>,
    tail_mass: f64,
}

impl TruncatedDensityMatrix {
    /// Validating constructor: Hermitian within 1e−12, eigenvalues ≥ −1e−12,
    /// trace + tail_mass = 1 within 1e−10.
    pub fn new(entries: DMatrix<Complex64>, tail_mass: f64) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim || dim == 0 {
            return Err(Error::Shape(format!(
                "density matrix must be square and non-empty, got {}×{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..dim {
            for j in i..dim {
                let delta = entries[(i, j)] - entries[(j, i)].conj();
                if delta.norm() > HERMITICITY_TOL {
                    return Err(Error::Domain(format!(
                        "matrix not Hermitian at ({i},{j}): asymmetry {}",
                        delta.norm()
                    )));
                }
            }
        }
        let trace: f64 = (0..dim).map(|i| entries[(i, i)].re).sum();
        if (trace + tail_mass - 1.0).abs() > TRACE_TOL {
            return Err(Error::Domain(format!(
                "trace {trace} + tail {tail_mass} differs from 1 by more than {TRACE_TOL}"
            )));
        }
        let tdm = Self {
            dim,
            entries,
            tail_mass,
        };
        let min = tdm
            .eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < EIGENVALUE_FLOOR {
            return Err(Error::Domain(format!(
                "eigenvalue {min} below the −1e−12 floor: truncation failure"
            )));
        }
        Ok(tdm)
    }

    /// Fock state |n⟩⟨n| on a `d`-dimensional truncation.
    pub fn fock(n: usize, d: usize) -> Result<Self> {
        if n >= d {
            return Err(Error::Shape(format!("fock state |{n}⟩ needs dim > {n}")));
        }
        let mut m = DMatrix::zeros(d, d);
        m[(n, n)] = Complex64::new(1.0, 0.0);
        Self::new(m, 0.0)
    }

    /// Pure state |ψ⟩⟨ψ| from amplitudes (normalised internally).
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::Domain("zero state vector".into()));
        }
        let d = psi.len();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi[i] * psi[j].conj() / norm2;
            }
        }
        Self::new(m, 0.0)
    }

    /// Diagonal state from a Fock distribution (offset must be ≥ 0).
    pub fn from_diagonal(p: &FockDistribution) -> Result<Self> {
        if p.offset() < 0 {
            return Err(Error::Domain(
                "cannot embed negative Fock indices in a density matrix".into(),
            ));
        }
        let d = p.offset() as usize + p.weights().len();
        let mut m = DMatrix::zeros(d, d);
        for (i, &w) in p.weights().iter().enumerate() {
            let k = p.offset() as usize + i;
            m[(k, k)] = Complex64::new(w, 0.0);
        }
        Self::new(m, p.tail_mass())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[(i, i)].re).sum()
    }

    /// Real eigenvalue spectrum of the Hermitian matrix.
    pub fn eigenvalues(&self) -> DVector<f64> {
        self.entries.clone().symmetric_eigenvalues()
    }

    /// Von Neumann entropy in bits. Eigenvalues are clipped at the −1e−12
    /// floor (already enforced at construction).
    pub fn entropy_bits(&self) -> f64 {
        let mut h = KahanSum::default();
        for &ev in self.eigenvalues().iter() {
            if ev > 0.0 {
                h.add(-ev * ev.log2());
            }
        }
        h.value()
    }

    /// Diagonal as a Fock distribution.
    pub fn diagonal(&self) -> FockDistribution {
        FockDistribution {
            offset: 0,
            weights: (0..self.dim).map(|i| self.entries[(i, i)].re).collect(),
        }
    }

    /// Photon-number moments ⟨a†a⟩ and variance read off the diagonal.
    pub fn moments(&self) -> Result<MomentSummary> {
        self.diagonal().moments()
    }

    /// ⟨(−1)^{a†a}⟩ ∈ [−1, 1].
    pub fn parity_expectation(&self) -> f64 {
        self.diagonal().parity_expectation()
    }

    /// ⟨a⟩ = Tr[ρ a] with a|n⟩ = √n|n−1⟩.
    pub fn annihilation_expectation(&self) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for m in 1..self.dim {
            s += (m as f64).sqrt() * self.entries[(m, m - 1)];
        }
        s
    }

    /// Fidelity against a pure state: F = √⟨ψ|ρ|ψ⟩.
    pub fn fidelity_pure(&self, psi: &[Complex64]) -> Result<f64> {
        if psi.len() != self.dim {
            return Err(Error::Shape(format!(
                "state vector length {} vs dim {}",
                psi.len(),
                self.dim
            )));
        }
        let mut val = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                val += psi[i].conj() * self.entries[(i, j)] * psi[j];
            }
        }
        Ok(val.re.max(0.0).sqrt())
    }
}

/// Trace norm ‖ρ − σ‖₁ = Σ|eigenvalues(ρ − σ)|. The conventional factor ½
/// is left to callers, matching how the bounds in this crate are stated.
pub fn trace_distance(rho: &TruncatedDensityMatrix, sigma: &TruncatedDensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape(format!(
            "trace_distance dims {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let diff = rho.entries() - sigma.entries();
    let evs = diff.symmetric_eigenvalues();
    let mut s = KahanSum::default();
    for &ev in evs.iter() {
        s.add(ev.abs());
    }
    Ok(s.value())
}

/// Trace norm between two diagonal states given as distributions,
/// including any index shift.
pub fn trace_distance_diagonal(p: &FockDistribution, q: &FockDistribution) -> f64 {
    p.l1_distance(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn thermal_state_examples() {
        // ν = 0 is the vacuum point mass
        let vac = thermal_state(0.0, 8).unwrap();
        assert_eq!(vac.weight_at(0), 1.0);
        assert_eq!(vac.weight_at(1), 0.0);
        // ν = 1 geometric law
        let t1 = thermal_state(1.0, 32).unwrap();
        assert!((t1.weight_at(0) - 0.5).abs() < 1e-15);
        assert!((t1.weight_at(1) - 0.25).abs() < 1e-15);
        // ν = 2 geometric tail sum: Σ weights = 1 − (2/3)^64
        let t2 = thermal_state(2.0, 64).unwrap();
        let expect = 1.0 - (2.0_f64 / 3.0).powi(64);
        assert!((t2.total_mass() - expect).abs() < 1e-12);
    }

    #[test]
    fn thermal_moments_are_geometric() {
        for nu in [0.3, 1.0, 2.5] {
            let t = thermal_state(nu, default_cutoff(0, nu) + 60).unwrap();
            let m = t.moments().unwrap();
            assert!((m.mean_photon - nu).abs() < 1e-9, "nu={nu}");
            assert!((m.photon_variance - nu * (nu + 1.0)).abs() < 1e-8, "nu={nu}");
        }
    }

    #[test]
    fn entropy_examples() {
        let point = FockDistribution::point_mass(4);
        assert_eq!(shannon_entropy(&point).unwrap(), 0.0);
        let uniform = FockDistribution::new(0, vec![0.5, 0.5], 1e-12).unwrap();
        assert!((shannon_entropy(&uniform).unwrap() - 1.0).abs() < 1e-15);
        // thermal ν = 1 has entropy g(1) = 2 bits
        let t1 = thermal_state(1.0, 64).unwrap();
        assert!((shannon_entropy(&t1).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn bosonic_entropy_examples() {
        assert_eq!(bosonic_entropy_g(0.0).unwrap(), 0.0);
        assert!((bosonic_entropy_g(1.0).unwrap() - 2.0).abs() < 1e-15);
        // frozen from a 40-digit oracle evaluation
        assert!((bosonic_entropy_g(0.5).unwrap() - 1.377_443_751_081_734_3).abs() < 1e-14);
        assert!(bosonic_entropy_g(-0.1).is_err());
        // continuity at 0 and monotonicity
        assert!(bosonic_entropy_g(1e-14).unwrap() < 1e-11);
        let mut prev = 0.0;
        for i in 1..50 {
            let v = bosonic_entropy_g(i as f64 * 0.2).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn trace_distance_examples() {
        let f0 = TruncatedDensityMatrix::fock(0, 4).unwrap();
        let f1 = TruncatedDensityMatrix::fock(1, 4).unwrap();
        assert!(trace_distance(&f0, &f0).unwrap() < 1e-14);
        assert!((trace_distance(&f0, &f1).unwrap() - 2.0).abs() < 1e-12);
        // |ψ_{ε,n}⟩ = √(1−ε)|n⟩ + √ε|n+1⟩ vs |n⟩⟨n| at ε = 0.09 → 2√ε = 0.6
        let eps = 0.09_f64;
        let n = 3;
        let mut psi = vec![c(0.0, 0.0); 6];
        psi[n] = c((1.0 - eps).sqrt(), 0.0);
        psi[n + 1] = c(eps.sqrt(), 0.0);
        let rho = TruncatedDensityMatrix::pure(&psi).unwrap();
        let fock_n = TruncatedDensityMatrix::fock(n, 6).unwrap();
        assert!((trace_distance(&rho, &fock_n).unwrap() - 0.6).abs() < 1e-12);
        // dim mismatch is a shape error
        let f0_small = TruncatedDensityMatrix::fock(0, 3).unwrap();
        assert!(trace_distance(&f0, &f0_small).is_err());
    }

    #[test]
    fn fock_distance_bound_examples() {
        // exact Fock moments → bound 0
        let m = MomentSummary::new(3.0, 0.0).unwrap();
        assert_eq!(fock_distance_bound(&m, 3), 0.0);
        // ψ_{ε,n} moments at ε = 0.09 saturate the bound: 2√ε = 0.6
        let eps = 0.09_f64;
        let n = 3.0;
        let mean = n + eps;
        let second = n * n * (1.0 - eps) + (n + 1.0) * (n + 1.0) * eps;
        let m = MomentSummary::from_mean_and_second(mean, second).unwrap();
        assert!((fock_distance_bound(&m, 3) - 0.6).abs() < 1e-12);
        // thermal ν = 1 vs |0⟩: exact ℓ1 distance is 2ν/(ν+1) = 1 ≤ bound
        let t1 = thermal_state(1.0, 200).unwrap();
        let exact = t1.l1_distance(&FockDistribution::point_mass(0));
        assert!((exact - 1.0).abs() < 1e-10);
        let bound = fock_distance_bound(&t1.moments().unwrap(), 0);
        assert!(bound >= exact);
    }

    #[test]
    fn shift_and_parity_examples() {
        let p = FockDistribution::point_mass(0).shift(-3);
        assert_eq!(p.weight_at(-3), 1.0);
        assert_eq!(shannon_entropy(&p).unwrap(), 0.0);
        let f2 = TruncatedDensityMatrix::fock(2, 5).unwrap();
        let f3 = TruncatedDensityMatrix::fock(3, 5).unwrap();
        assert_eq!(f2.parity_expectation(), 1.0);
        assert_eq!(f3.parity_expectation(), -1.0);
    }

    #[test]
    fn construction_rejects_bad_matrices() {
        // non-Hermitian
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(TruncatedDensityMatrix::new(m, 0.0).is_err());
        // negative eigenvalue beyond the floor
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(TruncatedDensityMatrix::new(m, 0.0).is_err());
        // trace deficit without declared tail
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 0)] = c(0.9, 0.0);
        assert!(TruncatedDensityMatrix::new(m, 0.0).is_err());
        assert!(TruncatedDensityMatrix::new(
            {
                let mut m = DMatrix::<Complex64>::zeros(2, 2);
                m[(0, 0)] = c(0.9, 0.0);
                m
            },
            0.1
        )
        .is_ok());
    }

    // --- property tests -------------------------------------------------

    /// Random diagonal-dominant Hermitian PSD matrix as a mixture of random
    /// pure states, dim ≤ 8.
    fn arb_density(dim: usize) -> impl Strategy<Value = TruncatedDensityMatrix> {
        let comp = (-1.0f64..1.0, -1.0f64..1.0);
        proptest::collection::vec(
            (proptest::collection::vec(comp, dim), 0.05f64..1.0),
            1..4,
        )
        .prop_map(move |states| {
            let mut m = DMatrix::<Complex64>::zeros(dim, dim);
            let wsum: f64 = states.iter().map(|(_, w)| *w).sum();
            for (amps, w) in &states {
                let norm2: f64 = amps.iter().map(|(re, im)| re * re + im * im).sum();
                let norm2 = norm2.max(1e-6);
                for i in 0..dim {
                    for j in 0..dim {
                        let ai = Complex64::new(amps[i].0, amps[i].1);
                        let aj = Complex64::new(amps[j].0, amps[j].1);
                        m[(i, j)] += (w / wsum) * ai * aj.conj() / norm2;
                    }
                }
            }
            TruncatedDensityMatrix::new(m, 0.0).expect("valid by construction")
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn entropy_is_shift_invariant(ws in proptest::collection::vec(0.0f64..1.0, 1..20),
                                      k in -30i64..30) {
            let total: f64 = ws.iter().sum();
            prop_assume!(total > 1e-6);
            let ws: Vec<f64> = ws.iter().map(|w| w / total).collect();
            let p = FockDistribution::new(0, ws, 1e-6).unwrap();
            let h0 = shannon_entropy(&p).unwrap();
            let h1 = shannon_entropy(&p.shift(k)).unwrap();
            prop_assert_eq!(h0, h1);
        }

        #[test]
        fn trace_distance_triangle_and_unitary_invariance(
            a in arb_density(6), b in arb_density(6), c_ in arb_density(6),
            seed in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36)
        ) {
            let dab = trace_distance(&a, &b).unwrap();
            let dbc = trace_distance(&b, &c_).unwrap();
            let dac = trace_distance(&a, &c_).unwrap();
            prop_assert!(dac <= dab + dbc + 1e-10);
            // unitary invariance: Q from the QR decomposition of a random matrix
            let g = DMatrix::from_fn(6, 6, |i, j| {
                Complex64::new(seed[6 * i + j].0, seed[6 * i + j].1)
            });
            let qr = g.qr();
            let q = qr.q();
            let ua = TruncatedDensityMatrix::new(&q * a.entries() * q.adjoint(), 0.0).unwrap();
            let ub = TruncatedDensityMatrix::new(&q * b.entries() * q.adjoint(), 0.0).unwrap();
            let duab = trace_distance(&ua, &ub).unwrap();
            prop_assert!((dab - duab).abs() < 1e-10);
        }

        #[test]
        fn fidelity_trace_distance_sandwich(
            rho in arb_density(6),
            amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6)
        ) {
            let norm2: f64 = amps.iter().map(|(re, im)| re * re + im * im).sum();
            prop_assume!(norm2 > 1e-4);
            let psi: Vec<Complex64> = amps
                .iter()
                .map(|(re, im)| Complex64::new(*re, *im) / norm2.sqrt())
                .collect();
            let pure = TruncatedDensityMatrix::pure(&psi).unwrap();
            let f = rho.fidelity_pure(&psi).unwrap();
            let half_t = 0.5 * trace_distance(&rho, &pure).unwrap();
            prop_assert!(1.0 - f <= half_t + 1e-10);
            prop_assert!(half_t <= (1.0 - f * f).max(0.0).sqrt() + 1e-10);
        }

        #[test]
        fn variance_bound_dominates_exact_distance_on_diagonal_states(
            ws in proptest::collection::vec(0.0f64..1.0, 1..12),
            n in 0usize..12
        ) {
            let total: f64 = ws.iter().sum();
            prop_assume!(total > 1e-6);
            let ws: Vec<f64> = ws.iter().map(|w| w / total).collect();
            let p = FockDistribution::new(0, ws, 1e-9).unwrap();
            let exact = p.l1_distance(&FockDistribution::point_mass(n as i64));
            let bound = fock_distance_bound(&p.moments().unwrap(), n);
            prop_assert!(bound + 1e-12 >= exact);
        }
    }
}
