//! Shared low-level numerics: log-factorials, compensated summation,
//! signed log-space accumulation, and the deterministic float format used
//! by every table emitter.

use std::sync::OnceLock;

const LN_FACT_TABLE_LEN: usize = 1 << 16;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0_f64; LN_FACT_TABLE_LEN];
        let mut acc = KahanSum::default();
        for k in 1..LN_FACT_TABLE_LEN {
            acc.add((k as f64).ln());
            t[k] = acc.value();
        }
        t
    })
}

/// ln(k!) — table-backed for k < 2^16, Stirling series beyond.
pub fn ln_factorial(k: usize) -> f64 {
    if k < LN_FACT_TABLE_LEN {
        ln_fact_table()[k]
    } else {
        let x = k as f64;
        // Stirling with 1/x^5 correction; absolute error < 1e-15 here.
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

/// k! as f64 (exact for k ≤ 22, correctly rounded well past that).
pub fn factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut t = vec![1.0_f64; 171];
        for k in 1..171 {
            t[k] = t[k - 1] * k as f64;
        }
        t
    });
    if k < t.len() {
        t[k]
    } else {
        f64::INFINITY
    }
}

/// ln C(n, k); requires k ≤ n.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// C(n, k) in f64 via the log form when the direct product would overflow.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= 60 {
        let k = k.min(n - k);
        let mut acc = 1.0_f64;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    } else {
        ln_binomial(n, k).exp()
    }
}

/// Kahan-compensated accumulator.
#[derive(Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Sum of signed terms given as (sign, ln|term|) pairs, evaluated by
/// factoring out the largest magnitude. Returns the plain f64 sum.
pub fn signed_logsum(terms: &[(f64, f64)]) -> f64 {
    let max_ln = terms
        .iter()
        .filter(|(s, _)| *s != 0.0)
        .map(|&(_, l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_ln == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut acc = KahanSum::default();
    for &(sign, ln_mag) in terms {
        if sign != 0.0 {
            acc.add(sign * (ln_mag - max_ln).exp());
        }
    }
    acc.value() * max_ln.exp()
}

/// Sum of positive terms given as ln(term), factored against the maximum.
/// Returns (sum, ln_scale) with sum already multiplied back to linear scale
/// when representable, otherwise +inf is avoided by the caller using
/// `positive_logsum_ln`.
pub fn positive_logsum(ln_terms: &[f64]) -> f64 {
    positive_logsum_ln(ln_terms).exp()
}

/// ln Σ exp(ln_terms[i]) via max factoring.
pub fn positive_logsum_ln(ln_terms: &[f64]) -> f64 {
    let max_ln = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_ln == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = KahanSum::default();
    for &l in ln_terms {
        acc.add((l - max_ln).exp());
    }
    max_ln + acc.value().ln()
}

/// Deterministic 17-significant-digit decimal rendering used by every
/// emitted table, so reruns are byte-identical.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalise -0.0
        return "0.0000000000000000e0".to_string();
    }
    format!("{:.16e}", x)
}
