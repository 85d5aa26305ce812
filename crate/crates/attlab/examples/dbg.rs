use attlab::fock::{default_cutoff, trace_distance, TruncatedDensityMatrix};
use attlab::thermal::{kraus_bs, kraus_me, lindblad_integrate, p_distribution, p_eigenvalue};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::time::Instant;

fn embed(m: &TruncatedDensityMatrix, d: usize) -> TruncatedDensityMatrix {
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..m.dim().min(d) {
        for j in 0..m.dim().min(d) {
            out[(i, j)] = m.entries()[(i, j)];
        }
    }
    TruncatedDensityMatrix::new(out, m.tail_mass()).unwrap()
}

fn main() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for nu in [0.0, 1.0, 3.0] {
        for n in 0..=8usize {
            for lambda in [0.2, 0.5, 0.8] {
                // size the truncation from the actual output tail
                let d = if nu == 0.0 {
                    default_cutoff(n, nu)
                } else {
                    p_distribution(nu, n, 1.0 - lambda, 1e-10).unwrap().weights().len() + 16
                };
                let rho0 = TruncatedDensityMatrix::fock(n, d).unwrap();
                // route 1: closed-form eigenvalues (diagonal of the output)
                let mut diag = DMatrix::<Complex64>::zeros(d, d);
                let mut acc = 0.0;
                for l in 0..d {
                    let p = p_eigenvalue(nu, n, 1.0 - lambda, l).unwrap();
                    diag[(l, l)] = Complex64::new(p, 0.0);
                    acc += p;
                }
                let closed = TruncatedDensityMatrix::new(diag, (1.0 - acc).max(0.0)).unwrap();
                let me = kraus_me(lambda, nu, d, 1e-9).unwrap().apply(&rho0).unwrap();
                let bs = kraus_bs(lambda, nu, d, 1e-9).unwrap().apply(&rho0).unwrap();
                let steps = ((-(lambda.ln())) * d as f64 * (nu + 1.0)).ceil() as usize + 64;
                let li = lindblad_integrate(&rho0, nu, -lambda.ln(), steps).unwrap();
                let dd = me.dim().max(bs.dim()).max(d);
                let states = [embed(&closed, dd), embed(&me, dd), embed(&bs, dd), embed(&li, dd)];
                for a in 0..4 {
                    for b in a + 1..4 {
                        let dist = trace_distance(&states[a], &states[b]).unwrap();
                        if dist > 1e-8 {
                            println!("nu={nu} n={n} λ={lambda}: pair ({a},{b}) dist {dist:.3e}");
                        }
                        worst = worst.max(dist);
                    }
                }
            }
        }
    }
    println!("criterion-1 grid worst pairwise distance {worst:.3e} in {:?}", t0.elapsed());
}
