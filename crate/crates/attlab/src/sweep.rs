//! Deterministic table emission for the batch front end: every sweep
//! produces a [`Table`] whose CSV/JSON rendering is byte-identical across
//! runs (fixed 17-significant-digit decimals, fixed row order, parallel
//! evaluation merged in grid order).

use rayon::prelude::*;
use std::io::Write;

use crate::asymptotics::{limit_distributions_auto, shifted_convergence};
use crate::capacities::{
    cea_pure_loss, coherent_info_report, mutual_info_half_check,
};
use crate::error::{Error, Result};
use crate::fock::{
    bosonic_entropy_g, fock_distance_bound, shannon_entropy, trace_distance, MomentSummary,
    TruncatedDensityMatrix,
};
use crate::numeric::fmt_f64;
use crate::protocol::{
    env_after_triggers, env_after_triggers_exact, env_moments, eta_bound_constant,
    one_trigger_distance_at, one_trigger_limit_distance, single_trigger_binomial, two_trigger_env,
    SigmaZero, TriggerPlan, DEFAULT_SECTOR_BUDGET,
};
use crate::search::{k_of_n_fit, KFit};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn render_json(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "[")?;
        for (ri, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> = self
                .columns
                .iter()
                .zip(row.iter())
                .map(|(c, v)| format!("\"{}\":{}", c, v.render_json()))
                .collect();
            let comma = if ri + 1 < self.rows.len() { "," } else { "" };
            writeln!(w, "{{{}}}{}", fields.join(","), comma)?;
        }
        writeln!(w, "]")?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W, format: OutputFormat) -> std::io::Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
    }
}

/// Transmissivity of a fibre of length `l_km`: λ = 10^(−γ·L/10 km).
pub fn lambda_from_length(l_km: f64, gamma: f64) -> Result<f64> {
    if !(l_km >= 0.0) || !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "need L ≥ 0 and γ > 0, got ({l_km}, {gamma})"
        )));
    }
    Ok(10.0_f64.powf(-gamma * l_km / 10.0))
}

/// Fibre length that yields transmissivity λ under attenuation exponent γ.
pub fn length_from_lambda(lambda: f64, gamma: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) || !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "need λ ∈ (0,1] and γ > 0, got ({lambda}, {gamma})"
        )));
    }
    Ok(-10.0 * lambda.log10() / gamma)
}

/// Grid for the coherent-information sweep.
#[derive(Debug, Clone)]
pub struct IcohGrid {
    pub energies: Vec<f64>,
    pub fock_numbers: Vec<usize>,
    pub lambdas: Vec<f64>,
}

/// Rows (λ, N, n, I_coh, tail budget), sorted by (N, n, λ).
pub fn icoh_sweep(grid: &IcohGrid) -> Result<Table> {
    validate_nonempty(&[
        grid.energies.len(),
        grid.fock_numbers.len(),
        grid.lambdas.len(),
    ])?;
    let mut points = Vec::new();
    for &n_env in &grid.energies {
        for &n in &grid.fock_numbers {
            for &lambda in &grid.lambdas {
                points.push((n_env, n, lambda));
            }
        }
    }
    let rows: Result<Vec<Vec<Cell>>> = points
        .par_iter()
        .map(|&(n_env, n, lambda)| {
            let rep = coherent_info_report(n_env, n, lambda)?;
            Ok(vec![
                Cell::Float(lambda),
                Cell::Float(n_env),
                Cell::Int(n as i64),
                Cell::Float(rep.value_bits),
                Cell::Float(rep.tail_budget),
            ])
        })
        .collect();
    Ok(Table {
        columns: vec!["lambda", "N", "n", "icoh_bits", "tail_budget"],
        rows: rows?,
    })
}

/// Grid for the threshold search and K(N) fit.
#[derive(Debug, Clone)]
pub struct NbarGrid {
    pub energies: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub n_cap: usize,
}

/// Rows (N, λ, n̄, I_coh at n̄) plus one `fit` row per N carrying K and the
/// residual.
pub fn nbar_table(grid: &NbarGrid) -> Result<Table> {
    validate_nonempty(&[grid.energies.len(), grid.lambdas.len()])?;
    let fits: Result<Vec<KFit>> = grid
        .energies
        .par_iter()
        .map(|&n_env| k_of_n_fit(n_env, &grid.lambdas, grid.n_cap))
        .collect();
    let mut rows = Vec::new();
    for fit in fits? {
        for rec in &fit.records {
            rows.push(vec![
                Cell::Text("point".into()),
                Cell::Float(fit.n_env),
                Cell::Float(rec.lambda),
                Cell::Int(rec.n_bar.map(|v| v as i64).unwrap_or(-1)),
                Cell::Float(rec.icoh_at_nbar.unwrap_or(f64::NAN)),
            ]);
        }
        rows.push(vec![
            Cell::Text("fit".into()),
            Cell::Float(fit.n_env),
            Cell::Float(f64::NAN),
            Cell::Int(fit.missing as i64),
            Cell::Float(fit.k),
        ]);
    }
    Ok(Table {
        columns: vec!["kind", "N", "lambda", "n_bar_or_missing", "icoh_or_K"],
        rows,
    })
}

/// Grid for the entropy-gap table: c = N + α per α, or fixed c values.
#[derive(Debug, Clone)]
pub struct EntropyGapGrid {
    pub energies: Vec<f64>,
    pub alphas: Vec<f64>,
    pub fixed_c: Vec<f64>,
}

/// Rows (N, c, H(q), H(p), gap, normalisation audit).
pub fn entropy_gap_table(grid: &EntropyGapGrid) -> Result<Table> {
    if grid.energies.is_empty() || (grid.alphas.is_empty() && grid.fixed_c.is_empty()) {
        return Err(Error::Usage("empty entropy-gap grid".into()));
    }
    let mut points = Vec::new();
    for &n_env in &grid.energies {
        for &alpha in &grid.alphas {
            points.push((n_env, n_env + alpha));
        }
        for &c in &grid.fixed_c {
            points.push((n_env, c));
        }
    }
    let rows: Result<Vec<Vec<Cell>>> = points
        .par_iter()
        .map(|&(n_env, c)| {
            let ld = limit_distributions_auto(n_env, c)?;
            let hq = shannon_entropy(&ld.q)?;
            let hp = shannon_entropy(&ld.p)?;
            let audit = (1.0 - ld.q.total_mass()).abs().max((1.0 - ld.p.total_mass()).abs());
            Ok(vec![
                Cell::Float(n_env),
                Cell::Float(c),
                Cell::Float(hq),
                Cell::Float(hp),
                Cell::Float(hq - hp),
                Cell::Float(audit),
            ])
        })
        .collect();
    Ok(Table {
        columns: vec!["N", "c", "H_q", "H_p", "gap_bits", "norm_audit"],
        rows: rows?,
    })
}

/// Convergence table of the shifted distributions toward their limits.
pub fn prob_convergence_table(n_env: f64, c: f64, ns: &[usize]) -> Result<Table> {
    validate_nonempty(&[ns.len()])?;
    let rows: Result<Vec<Vec<Cell>>> = ns
        .par_iter()
        .map(|&n| {
            let (dq, dp) = shifted_convergence(n_env, n, c)?;
            Ok(vec![
                Cell::Float(n_env),
                Cell::Float(c),
                Cell::Int(n as i64),
                Cell::Float(dq),
                Cell::Float(dp),
            ])
        })
        .collect();
    Ok(Table {
        columns: vec!["N", "c", "n", "dist_q_l1", "dist_p_l1"],
        rows: rows?,
    })
}

/// One protocol run: closed-form moments, the η and k₀ bounds, and the
/// exact distance when the plan is inside the desk-scale budget.
pub fn protocol_report(plan: &TriggerPlan) -> Result<Table> {
    let sigma0_moments = plan.sigma0.moments()?;
    let closed = env_moments(plan.n, plan.lambda, plan.k, &sigma0_moments)?;
    let eta = eta_bound_constant(plan.n, &sigma0_moments);
    let eta_bound = eta * plan.lambda.powf(plan.k as f64 / 2.0);
    let moment_bound = fock_distance_bound(&closed, plan.n);
    let mut rows = vec![
        row_kv("mean_closed_form", closed.mean_photon),
        row_kv("variance_closed_form", closed.photon_variance),
        row_kv("eta_constant", eta),
        row_kv("eta_bound", eta_bound),
        row_kv("moment_distance_bound", moment_bound),
    ];
    let exact = if plan.delta_t == 0.0 {
        env_after_triggers(plan)
    } else {
        env_after_triggers_exact(plan)
    };
    match exact {
        Ok(env) => {
            let sim = env.moments()?;
            let fock = TruncatedDensityMatrix::fock(plan.n, env.dim())?;
            let exact_dist = trace_distance(&env, &fock)?;
            rows.push(row_kv("mean_exact", sim.mean_photon));
            rows.push(row_kv("variance_exact", sim.photon_variance));
            rows.push(row_kv("exact_distance", exact_dist));
            rows.push(row_kv("tail_mass", env.tail_mass()));
        }
        Err(Error::Resource(msg)) => {
            rows.push(vec![
                Cell::Text("exact_simulation".into()),
                Cell::Text(format!("skipped: {msg}")),
            ]);
        }
        Err(e) => return Err(e),
    }
    Ok(Table {
        columns: vec!["quantity", "value"],
        rows,
    })
}

fn row_kv(name: &str, v: f64) -> Vec<Cell> {
    vec![Cell::Text(name.into()), Cell::Float(v)]
}

/// The single-trigger appendix table: z(λ, N, n) against the pure-loss
/// C_ea, with the headline ratio in the last column.
pub fn appendix_b_table(n_mean: f64, n: usize, lambdas: &[f64]) -> Result<Table> {
    validate_nonempty(&[lambdas.len()])?;
    let rows: Result<Vec<Vec<Cell>>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let (_, z) = single_trigger_binomial(n, lambda, n_mean)?;
            let cea = cea_pure_loss(lambda, n_mean)?;
            Ok(vec![
                Cell::Float(lambda),
                Cell::Float(n_mean),
                Cell::Int(n as i64),
                Cell::Float(z),
                Cell::Float(cea),
                Cell::Float(z / cea),
            ])
        })
        .collect();
    Ok(Table {
        columns: vec!["lambda", "N", "n", "z_bits", "cea_pure_loss", "ratio"],
        rows: rows?,
    })
}

/// The one-trigger failure table: the λ → 0⁺ limiting distance per ν and
/// its finite-λ approach.
pub fn appendix_c_table(nus: &[f64], lambdas: &[f64]) -> Result<Table> {
    validate_nonempty(&[nus.len()])?;
    let mut rows = Vec::new();
    for &nu in nus {
        let limit = one_trigger_limit_distance(nu)?;
        rows.push(vec![
            Cell::Float(nu),
            Cell::Float(f64::NAN),
            Cell::Float(limit),
            Cell::Text("limit".into()),
        ]);
        for &lambda in lambdas {
            let d = one_trigger_distance_at(lambda, nu)?;
            rows.push(vec![
                Cell::Float(nu),
                Cell::Float(lambda),
                Cell::Float(d),
                Cell::Text("finite".into()),
            ]);
        }
    }
    Ok(Table {
        columns: vec!["nu", "lambda", "distance_l1", "kind"],
        rows,
    })
}

/// λ ↔ L conversion table.
pub fn fiber_table(lambda: Option<f64>, l_km: Option<f64>, gamma: f64) -> Result<Table> {
    let (lambda, l_km) = match (lambda, l_km) {
        (Some(l), None) => (l, length_from_lambda(l, gamma)?),
        (None, Some(d)) => (lambda_from_length(d, gamma)?, d),
        _ => {
            return Err(Error::Usage(
                "fiber needs exactly one of --lambda or --length-km".into(),
            ))
        }
    };
    Ok(Table {
        columns: vec!["lambda", "length_km", "gamma"],
        rows: vec![vec![
            Cell::Float(lambda),
            Cell::Float(l_km),
            Cell::Float(gamma),
        ]],
    })
}

/// The deterministic invariant suite behind `attlab selftest`: returns the
/// per-check lines and whether everything passed.
pub fn selftest() -> (Vec<String>, bool) {
    let mut lines = Vec::new();
    let mut all_ok = true;
    let mut check = |name: &str, outcome: Result<f64>, tol: f64| match outcome {
        Ok(v) if v.abs() <= tol => {
            lines.push(format!("ok   {name} (deviation {})", fmt_f64(v)));
        }
        Ok(v) => {
            all_ok = false;
            lines.push(format!("FAIL {name} (deviation {})", fmt_f64(v)));
        }
        Err(e) => {
            all_ok = false;
            lines.push(format!("FAIL {name} ({e})"));
        }
    };

    check(
        "beam-splitter unitarity (i+j ≤ 20, λ = 0.3)",
        (|| {
            let mut worst = 0.0_f64;
            for total in 0..=20usize {
                for i in 0..=total {
                    let s = crate::beamsplitter::BsCoefficients::compute(i, total - i, 0.3)?
                        .unitarity_sum();
                    worst = worst.max((s - 1.0).abs());
                }
            }
            Ok(worst)
        })(),
        1e-9,
    );
    check(
        "swap identity Φ_{λ,σ}(ρ) = Φ_{1−λ,ρ}(σ)",
        (|| {
            let rho_d = crate::fock::thermal_state(0.6, 20)?;
            let sig_d = crate::fock::thermal_state(1.2, 24)?;
            let rho = TruncatedDensityMatrix::from_diagonal(&rho_d)?;
            let sig = TruncatedDensityMatrix::from_diagonal(&sig_d)?;
            let a = crate::beamsplitter::attenuator_apply(
                &crate::beamsplitter::ChannelSpec::diagonal(0.31, sig_d)?,
                &rho,
            )?;
            let b = crate::beamsplitter::attenuator_apply(
                &crate::beamsplitter::ChannelSpec::diagonal(0.69, rho_d)?,
                &sig,
            )?;
            let mut worst = 0.0_f64;
            for l in 0..a.dim().min(b.dim()) {
                worst = worst.max((a.entries()[(l, l)].re - b.entries()[(l, l)].re).abs());
            }
            Ok(worst)
        })(),
        1e-10,
    );
    check(
        "closed form vs Kraus on Φ_{0.5,τ_1}(|3⟩⟨3|)",
        (|| {
            let d = 40;
            let rho = TruncatedDensityMatrix::fock(3, d)?;
            let set = crate::thermal::kraus_me(0.5, 1.0, d, 1e-9)?;
            let out = set.apply(&rho)?;
            let mut worst = 0.0_f64;
            for l in 0..20 {
                let p = crate::thermal::p_eigenvalue(1.0, 3, 0.5, l)?;
                worst = worst.max((out.entries()[(l, l)].re - p).abs());
            }
            Ok(worst)
        })(),
        1e-8,
    );
    check(
        "limit distribution normalisation and mean at (N=2, c=3)",
        (|| {
            let ld = limit_distributions_auto(2.0, 3.0)?;
            Ok((ld.q.total_mass() - 1.0).abs().max((ld.q.mean() + 3.0).abs()))
        })(),
        1e-9,
    );
    check(
        "symmetric-point identity g(N) + I_coh(½) − g(N) at (n=5, N=1)",
        (|| Ok(mutual_info_half_check(5, 1.0)? - bosonic_entropy_g(1.0)?))(),
        1e-10,
    );
    check(
        "k-trigger bound slack min over k ≤ 3 (negative means violated)",
        (|| {
            let sigma0 = SigmaZero::Thermal(0.5);
            let moments = sigma0.moments()?;
            let mut min_slack = f64::INFINITY;
            for k in 1..=3usize {
                let plan = TriggerPlan::new(2, 0.3, k, sigma0.clone())?;
                let env = env_after_triggers(&plan)?;
                let fock = TruncatedDensityMatrix::fock(2, env.dim())?;
                let exact = trace_distance(&env, &fock)?;
                let bound = eta_bound_constant(2, &moments) * 0.3_f64.powf(k as f64 / 2.0);
                min_slack = min_slack.min(bound - exact);
            }
            Ok(if min_slack < 0.0 { min_slack } else { 0.0 })
        })(),
        0.0,
    );
    check(
        "two-trigger bound slack at λ = 0.1 (negative means violated)",
        (|| {
            let out = two_trigger_env(0.1, &SigmaZero::Vacuum, DEFAULT_SECTOR_BUDGET)?;
            let slack = out.bound - out.exact_distance;
            Ok(if slack < 0.0 { slack } else { 0.0 })
        })(),
        0.0,
    );
    check(
        "moment identity exact vs closed form (n=2, k=2, λ=0.5, vacuum)",
        (|| {
            let plan = TriggerPlan::new(2, 0.5, 2, SigmaZero::Vacuum)?;
            let env = env_after_triggers(&plan)?;
            let sim = env.moments()?;
            let closed = env_moments(2, 0.5, 2, &MomentSummary::new(0.0, 0.0)?)?;
            Ok((sim.mean_photon - closed.mean_photon)
                .abs()
                .max((sim.photon_variance - closed.photon_variance).abs()))
        })(),
        1e-9,
    );
    (lines, all_ok)
}

fn validate_nonempty(lens: &[usize]) -> Result<()> {
    if lens.iter().any(|&l| l == 0) {
        return Err(Error::Usage("empty sweep grid".into()));
    }
    Ok(())
}
