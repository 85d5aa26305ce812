//! Multimode occupation-number machinery restricted to total-photon
//! sectors. Beam splitters conserve the total photon number, so a pure
//! product of trigger modes and one environment mode lives in a single
//! sector; mixed states produced by interleaved thermalisation stay
//! block-diagonal across sectors.
//!
//! Iteration anywhere a float accumulation happens is over ordered maps so
//! results are bit-reproducible run to run.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::beamsplitter::bs_coefficient;
use crate::error::{Error, Result};
use crate::fock::FockDistribution;
use crate::numeric::ln_factorial;

/// Occupation-number basis of `modes` modes with total photon number
/// exactly `total`, in lexicographic order. Lookups go through a
/// combinatorial (stars-and-bars) rank, so no hashing is involved.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub modes: usize,
    pub total: usize,
    states: Vec<Vec<u16>>,
    /// counts[m][t] = number of states of m modes with total exactly t
    counts: Vec<Vec<usize>>,
}

impl SectorBasis {
    pub fn new(modes: usize, total: usize) -> Self {
        let mut states = Vec::new();
        let mut cur = vec![0u16; modes];
        enumerate(&mut states, &mut cur, 0, total);
        let mut counts = vec![vec![0usize; total + 1]; modes + 1];
        for t in 0..=total {
            counts[1][t] = 1;
        }
        for m in 2..=modes {
            for t in 0..=total {
                // Σ_{w ≤ t} counts[m−1][t−w]
                counts[m][t] = (0..=t).map(|w| counts[m - 1][t - w]).sum();
            }
        }
        Self {
            modes,
            total,
            states,
            counts,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u16>] {
        &self.states
    }

    /// Lexicographic rank of an occupation tuple (None if it does not sum
    /// to this sector's total).
    pub fn index_of(&self, state: &[u16]) -> Option<usize> {
        if state.len() != self.modes {
            return None;
        }
        let mut remaining = self.total;
        let mut rank = 0usize;
        for (pos, &v) in state.iter().enumerate().take(self.modes - 1) {
            let v = v as usize;
            if v > remaining {
                return None;
            }
            let tail_modes = self.modes - pos - 1;
            for w in 0..v {
                rank += self.counts[tail_modes][remaining - w];
            }
            remaining -= v;
        }
        if state[self.modes - 1] as usize != remaining {
            return None;
        }
        Some(rank)
    }

    /// Number of basis states without building them: C(total+modes−1, modes−1).
    pub fn dim_for(modes: usize, total: usize) -> f64 {
        (ln_factorial(total + modes - 1) - ln_factorial(total) - ln_factorial(modes - 1)).exp()
    }
}

fn enumerate(out: &mut Vec<Vec<u16>>, cur: &mut Vec<u16>, mode: usize, remaining: usize) {
    if mode + 1 == cur.len() {
        cur[mode] = remaining as u16;
        out.push(cur.clone());
        return;
    }
    for v in 0..=remaining {
        cur[mode] = v as u16;
        enumerate(out, cur, mode + 1, remaining - v);
    }
}

/// Per-sector beam-splitter matrix on a mode pair: entry (i_out, i_in) is
/// the amplitude from (i_in, s−i_in) to (i_out, s−i_out) where s is the
/// photon number held by the pair.
fn pair_matrix(s: usize, lambda: f64) -> Result<DMatrix<f64>> {
    let mut b = DMatrix::<f64>::zeros(s + 1, s + 1);
    for i_in in 0..=s {
        for i_out in 0..=s {
            // U|i⟩_p|j⟩_q = Σ_m c_m^{(i,j)} |i+j−m⟩_p|m⟩_q, so the second
            // mode ends with m = s − i_out
            b[(i_out, i_in)] = bs_coefficient(i_in, s - i_in, s - i_out, lambda)?;
        }
    }
    Ok(b)
}

/// Visit the groups of basis states sharing every occupation outside the
/// (p, q) pair. Representatives are the states with zero occupation in
/// mode p; members are listed by the occupation of mode p. Iteration
/// order follows the basis enumeration, so accumulations are
/// reproducible.
fn for_each_pair_group(
    basis: &SectorBasis,
    p: usize,
    q: usize,
    mut f: impl FnMut(usize, &[usize]),
) {
    let mut members: Vec<usize> = Vec::with_capacity(basis.total + 1);
    let mut probe: Vec<u16> = vec![0; basis.modes];
    for state in basis.states() {
        if state[p] != 0 {
            continue;
        }
        let s = state[q] as usize;
        members.clear();
        probe.copy_from_slice(state);
        for i in 0..=s {
            probe[p] = i as u16;
            probe[q] = (s - i) as u16;
            members.push(basis.index_of(&probe).expect("member in sector"));
        }
        f(s, &members);
    }
}

/// Pure state with a definite total photon number.
#[derive(Debug, Clone)]
pub struct SectorPure {
    pub basis: SectorBasis,
    pub amp: Vec<f64>,
}

impl SectorPure {
    /// Product occupation state |occ₁ … occ_m⟩.
    pub fn from_occupation(occ: &[u16]) -> Self {
        let total = occ.iter().map(|&v| v as usize).sum();
        let basis = SectorBasis::new(occ.len(), total);
        let mut amp = vec![0.0; basis.dim()];
        amp[basis.index_of(occ).expect("occupation state in its own sector")] = 1.0;
        Self { basis, amp }
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn overlap(&self, other: &Self) -> f64 {
        if self.basis.modes != other.basis.modes || self.basis.total != other.basis.total {
            return 0.0;
        }
        self.basis
            .states()
            .iter()
            .enumerate()
            .map(|(i, s)| self.amp[i] * other.amp[other.basis.index_of(s).unwrap()])
            .sum()
    }

    /// Append one more mode holding exactly `j` photons.
    pub fn tensor_fock(&self, j: u16) -> Self {
        let modes = self.basis.modes + 1;
        let basis = SectorBasis::new(modes, self.basis.total + j as usize);
        let mut amp = vec![0.0; basis.dim()];
        for (i, s) in self.basis.states().iter().enumerate() {
            if self.amp[i] == 0.0 {
                continue;
            }
            let mut ext = s.clone();
            ext.push(j);
            amp[basis.index_of(&ext).unwrap()] = self.amp[i];
        }
        Self { basis, amp }
    }

    /// Apply the beam splitter U_λ on the mode pair (p, q); total photon
    /// number is conserved exactly by construction.
    pub fn apply_bs(&mut self, p: usize, q: usize, lambda: f64) -> Result<()> {
        let mut mats: Vec<Option<DMatrix<f64>>> = vec![None; self.basis.total + 1];
        for s in 0..=self.basis.total {
            mats[s] = Some(pair_matrix(s, lambda)?);
        }
        let mut out = vec![0.0; self.amp.len()];
        for_each_pair_group(&self.basis, p, q, |s, members| {
            let b = mats[s].as_ref().unwrap();
            for (i_out, &dst) in members.iter().enumerate() {
                let mut acc = 0.0;
                for (i_in, &src) in members.iter().enumerate() {
                    acc += b[(i_out, i_in)] * self.amp[src];
                }
                out[dst] = acc;
            }
        });
        self.amp = out;
        Ok(())
    }

    /// Photon-number distribution of one mode (diagonal of its reduced
    /// state) without building the full reduced matrix.
    pub fn mode_distribution(&self, mode: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.total + 1];
        for (i, s) in self.basis.states().iter().enumerate() {
            out[s[mode] as usize] += self.amp[i] * self.amp[i];
        }
        out
    }

    /// Tr over every mode except `keep` of |self⟩⟨other|. The result is
    /// indexed by (occupation in self, occupation in other); for
    /// self = other it is the reduced density matrix of `keep`
    /// (diagonal, because the totals pin the kept occupation per
    /// configuration).
    pub fn cross_reduced(&self, other: &Self, keep: usize) -> DMatrix<f64> {
        let rows = self.basis.total + 1;
        let cols = other.basis.total + 1;
        let mut out = DMatrix::<f64>::zeros(rows, cols);
        for (i, s) in self.basis.states().iter().enumerate() {
            if self.amp[i] == 0.0 {
                continue;
            }
            let e_self = s[keep] as usize;
            // the matching state in `other` shares every spectator occupation
            let delta = other.basis.total as i64 - self.basis.total as i64;
            let e_other = e_self as i64 + delta;
            if e_other < 0 {
                continue;
            }
            let mut probe = s.clone();
            probe[keep] = e_other as u16;
            if let Some(jdx) = other.basis.index_of(&probe) {
                out[(e_self, e_other as usize)] += self.amp[i] * other.amp[jdx];
            }
        }
        out
    }
}

/// Mixed state stored as density blocks per total photon number
/// (beam splitters act within blocks; thermalisation shifts whole blocks).
#[derive(Debug, Clone)]
pub struct SectorMixed {
    pub modes: usize,
    pub max_total: usize,
    pub blocks: BTreeMap<usize, (SectorBasis, DMatrix<f64>)>,
    /// Probability clipped by the max_total cutoff.
    pub lost_mass: f64,
}

impl SectorMixed {
    pub fn from_pure(p: &SectorPure, max_total: usize) -> Result<Self> {
        if p.basis.total > max_total {
            return Err(Error::Resource(format!(
                "pure state total {} exceeds the sector budget {max_total}",
                p.basis.total
            )));
        }
        let n = p.basis.dim();
        let mut mat = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] = p.amp[i] * p.amp[j];
            }
        }
        let mut blocks = BTreeMap::new();
        blocks.insert(p.basis.total, (p.basis.clone(), mat));
        Ok(Self {
            modes: p.basis.modes,
            max_total,
            blocks,
            lost_mass: 0.0,
        })
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .values()
            .map(|(_, m)| (0..m.nrows()).map(|i| m[(i, i)]).sum::<f64>())
            .sum()
    }

    pub fn apply_bs(&mut self, p: usize, q: usize, lambda: f64) -> Result<()> {
        let mut mats: Vec<Option<DMatrix<f64>>> = vec![None; self.max_total + 1];
        for s in 0..=self.max_total {
            mats[s] = Some(pair_matrix(s, lambda)?);
        }
        for (_, (basis, mat)) in self.blocks.iter_mut() {
            // conjugate by the block-diagonal pair unitary: rows then columns
            for pass in 0..2 {
                for_each_pair_group(basis, p, q, |s, members| {
                    let b = mats[s].as_ref().unwrap();
                    apply_group(mat, members, b, pass == 0);
                });
            }
        }
        Ok(())
    }

    /// Trace out mode `p`, keeping block-diagonality.
    pub fn trace_out(&mut self, p: usize) {
        let mut next: BTreeMap<usize, (SectorBasis, DMatrix<f64>)> = BTreeMap::new();
        let new_modes = self.modes - 1;
        for (total, (basis, mat)) in &self.blocks {
            for (x, sx) in basis.states().iter().enumerate() {
                let v = sx[p] as usize;
                let sub_total = total - v;
                let (nb, nm) = next.entry(sub_total).or_insert_with(|| {
                    let b = SectorBasis::new(new_modes, sub_total);
                    let d = b.dim();
                    (b, DMatrix::zeros(d, d))
                });
                let mut rx = sx.clone();
                rx.remove(p);
                let nx = nb.index_of(&rx).unwrap();
                for (y, sy) in basis.states().iter().enumerate() {
                    if sy[p] as usize != v {
                        continue;
                    }
                    let val = mat[(x, y)];
                    if val == 0.0 {
                        continue;
                    }
                    let mut ry = sy.clone();
                    ry.remove(p);
                    let ny = nb.index_of(&ry).unwrap();
                    nm[(nx, ny)] += val;
                }
            }
        }
        self.blocks = next;
        self.modes = new_modes;
    }

    /// Apply a general attenuator Φ_{η,ξ_env} on mode `p` (the
    /// thermalisation step). ξ_env must be a distribution on ℕ. Mass pushed
    /// past max_total is clipped into `lost_mass`.
    pub fn apply_attenuator_on_mode(
        &mut self,
        p: usize,
        eta: f64,
        xi_env: &FockDistribution,
    ) -> Result<()> {
        if xi_env.offset() < 0 {
            return Err(Error::Domain("ξ environment must live on ℕ".into()));
        }
        let mut next: BTreeMap<usize, (SectorBasis, DMatrix<f64>)> = BTreeMap::new();
        let mut lost = 0.0;
        // coefficient cache: c_m^{(e,j)}(η) keyed by (e, j)
        let mut coeffs: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for (total, (basis, mat)) in &self.blocks {
            for (jdx, &w) in xi_env.weights().iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let j = xi_env.offset() as usize + jdx;
                for (x, sx) in basis.states().iter().enumerate() {
                    let e_x = sx[p] as usize;
                    for (y, sy) in basis.states().iter().enumerate() {
                        let val = mat[(x, y)];
                        if val == 0.0 {
                            continue;
                        }
                        let e_y = sy[p] as usize;
                        let m_max = (e_x + j).min(e_y + j);
                        for m in 0..=m_max {
                            let shift = j as i64 - m as i64;
                            let t_new = (*total as i64 + shift) as usize;
                            let cx = coeff(&mut coeffs, e_x, j, eta)?[m];
                            let cy = coeff(&mut coeffs, e_y, j, eta)?[m];
                            let contrib = w * cx * cy * val;
                            if contrib == 0.0 {
                                continue;
                            }
                            if t_new > self.max_total {
                                if x == y {
                                    lost += contrib;
                                }
                                continue;
                            }
                            let (nb, nm) = next.entry(t_new).or_insert_with(|| {
                                let b = SectorBasis::new(self.modes, t_new);
                                let d = b.dim();
                                (b, DMatrix::zeros(d, d))
                            });
                            let mut rx = sx.clone();
                            rx[p] = (e_x as i64 + shift) as u16;
                            let mut ry = sy.clone();
                            ry[p] = (e_y as i64 + shift) as u16;
                            nm[(nb.index_of(&rx).unwrap(), nb.index_of(&ry).unwrap())] += contrib;
                        }
                    }
                }
            }
        }
        self.blocks = next;
        self.lost_mass += lost + xi_env.tail_mass() * self.trace();
        Ok(())
    }

    /// Once only one mode remains, its state is diagonal across blocks.
    pub fn into_single_mode_diagonal(self) -> Result<Vec<f64>> {
        if self.modes != 1 {
            return Err(Error::Shape(format!(
                "{} modes still present, expected 1",
                self.modes
            )));
        }
        let top = self.blocks.keys().next_back().copied().unwrap_or(0);
        let mut out = vec![0.0; top + 1];
        for (total, (_, m)) in &self.blocks {
            out[*total] += m[(0, 0)];
        }
        Ok(out)
    }
}

fn coeff<'a>(
    cache: &'a mut BTreeMap<(usize, usize), Vec<f64>>,
    e: usize,
    j: usize,
    eta: f64,
) -> Result<&'a Vec<f64>> {
    if !cache.contains_key(&(e, j)) {
        let vals = (0..=e + j)
            .map(|m| bs_coefficient(e, j, m, eta))
            .collect::<Result<Vec<_>>>()?;
        cache.insert((e, j), vals);
    }
    Ok(&cache[&(e, j)])
}

/// Multiply the group slice of `mat` by `b` on rows (`on_rows`) or columns.
fn apply_group(mat: &mut DMatrix<f64>, slots: &[usize], b: &DMatrix<f64>, on_rows: bool) {
    let n = if on_rows { mat.ncols() } else { mat.nrows() };
    let k = slots.len();
    let mut scratch = vec![0.0_f64; k];
    for lane in 0..n {
        for (ii, &src) in slots.iter().enumerate() {
            scratch[ii] = if on_rows { mat[(src, lane)] } else { mat[(lane, src)] };
        }
        for (io, &dst) in slots.iter().enumerate() {
            let mut acc = 0.0;
            for (ii, &v) in scratch.iter().enumerate() {
                acc += b[(io, ii)] * v;
            }
            if on_rows {
                mat[(dst, lane)] = acc;
            } else {
                mat[(lane, dst)] = acc;
            }
        }
    }
}
