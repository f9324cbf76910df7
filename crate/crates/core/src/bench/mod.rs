//! Monte Carlo comparison of the joint diagonalizers on synthetic mixtures.

mod amari;
mod data;
mod export;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ajd::{AjdProblem, Algorithm, SolveOptions};
use crate::error::{Error, Result};

pub use amari::amari_moreau;
pub use data::{generate_dataset, simulation_rng, Dataset};
pub use export::{export, read_records, records_csv, write_plots};

fn default_k() -> usize {
    20
}
fn default_mu_nu() -> f64 {
    1e-6
}
fn default_alphas() -> Vec<f64> {
    vec![0.0]
}
fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}
fn default_tol() -> f64 {
    SolveOptions::default().tol
}
fn default_max_iter() -> usize {
    SolveOptions::default().max_iter
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    #[serde(default = "default_k")]
    pub k_matrices: usize,
    pub snr: f64,
    #[serde(default = "default_mu_nu")]
    pub mu_nu_product: f64,
    pub n_simulations: usize,
    pub seed: u64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Drop the noise and ridge terms so the set is exactly jointly diagonalizable.
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 10,
            k_matrices: default_k(),
            snr: 1.0,
            mu_nu_product: default_mu_nu(),
            n_simulations: 1,
            seed: 0,
            alphas: default_alphas(),
            algorithms: default_algorithms(),
            noiseless: false,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.k_matrices < 2 || self.n_simulations == 0 {
            return Err(Error::domain("need n >= 2, k_matrices >= 2 and at least one simulation"));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) || !(self.mu_nu_product > 0.0) {
            return Err(Error::domain("snr and mu_nu_product must be positive"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::domain("alphas must be a non-empty list inside [-1, 1]"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::domain("at least one algorithm is required"));
        }
        self.solve_options().validate()
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter, ..SolveOptions::default() }
    }

    /// `(algorithm, alpha)` cells in output order; alpha is `None` for algorithms that ignore it.
    pub fn cells(&self) -> Vec<(Algorithm, Option<f64>)> {
        let mut out = Vec::new();
        for &alg in &self.algorithms {
            if alg.uses_alpha() {
                out.extend(self.alphas.iter().map(|a| (alg, Some(*a))));
            } else {
                out.push((alg, None));
            }
        }
        out
    }
}

/// Cost reported for algorithms that ignore alpha: the left-KL (alpha = 1) criterion.
pub const BASELINE_COST_ALPHA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub k_matrices: usize,
    pub snr: f64,
    pub seed: u64,
    pub sim_index: u64,
    pub algorithm: Algorithm,
    pub alpha: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub final_cost: f64,
    pub final_pi: f64,
    /// Index at the start and after every iteration.
    pub pi_trace: Vec<f64>,
    pub cost_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub alpha: Option<f64>,
    pub n: usize,
    pub snr: f64,
    pub k_matrices: usize,
    pub runs: usize,
    pub converged: usize,
    pub mean_pi: f64,
    pub median_pi: f64,
    pub mean_iterations: f64,
    pub mean_wall_time_s: f64,
    /// Mean wall time divided by the smallest mean wall time among the cells.
    pub relative_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ScenarioConfig,
    pub cells: Vec<CellSummary>,
}

/// Runs every cell on one simulated dataset.
pub fn run_simulation(cfg: &ScenarioConfig, sim_index: u64) -> Result<Vec<RunRecord>> {
    let ds = generate_dataset(cfg, sim_index)?;
    let n = cfg.n;
    let c0 = DMatrix::<f64>::identity(n, n);
    let opts = cfg.solve_options();
    let mut out = Vec::new();
    for (alg, alpha) in cfg.cells() {
        let problem = AjdProblem::new(ds.matrices.clone(), alpha.unwrap_or(BASELINE_COST_ALPHA))?;
        let mut pi_trace = vec![amari_moreau(&(&c0 * &ds.mixing))?];
        let mut pi_err = None;
        let start = Instant::now();
        let res = alg.run(&problem, &c0, &opts, |_, c| match amari_moreau(&(c * &ds.mixing)) {
            Ok(v) => pi_trace.push(v),
            Err(e) => pi_err = Some(e),
        })?;
        let wall_time_s = start.elapsed().as_secs_f64();
        if let Some(e) = pi_err {
            return Err(e);
        }
        out.push(RunRecord {
            n,
            k_matrices: cfg.k_matrices,
            snr: cfg.snr,
            seed: cfg.seed,
            sim_index,
            algorithm: alg,
            alpha,
            iterations: res.iterations,
            converged: res.converged,
            wall_time_s,
            final_cost: res.final_cost(),
            final_pi: *pi_trace.last().expect("trace starts with the initial index"),
            pi_trace,
            cost_trace: std::iter::once(res.initial_cost).chain(res.trace.iter().map(|e| e.cost)).collect(),
        });
    }
    Ok(out)
}

/// Runs all simulations, in parallel across simulations, and summarizes them per cell.
/// Records come back in `(sim_index, cell)` order regardless of scheduling.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<(Vec<RunRecord>, Summary)> {
    cfg.validate()?;
    let per_sim: Vec<Vec<RunRecord>> =
        (0..cfg.n_simulations as u64).into_par_iter().map(|s| run_simulation(cfg, s)).collect::<Result<_>>()?;
    let records: Vec<RunRecord> = per_sim.into_iter().flatten().collect();
    let summary = summarize(cfg, &records);
    Ok((records, summary))
}

pub fn summarize(cfg: &ScenarioConfig, records: &[RunRecord]) -> Summary {
    let mut cells: Vec<CellSummary> = cfg
        .cells()
        .into_iter()
        .map(|(alg, alpha)| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == alg && r.alpha == alpha).collect();
            let m = rs.len().max(1) as f64;
            let mut pis: Vec<f64> = rs.iter().map(|r| r.final_pi).collect();
            pis.sort_by(f64::total_cmp);
            let median_pi = match pis.len() {
                0 => f64::NAN,
                l if l % 2 == 1 => pis[l / 2],
                l => 0.5 * (pis[l / 2 - 1] + pis[l / 2]),
            };
            CellSummary {
                algorithm: alg,
                alpha,
                n: cfg.n,
                snr: cfg.snr,
                k_matrices: cfg.k_matrices,
                runs: rs.len(),
                converged: rs.iter().filter(|r| r.converged).count(),
                mean_pi: rs.iter().map(|r| r.final_pi).sum::<f64>() / m,
                median_pi,
                mean_iterations: rs.iter().map(|r| r.iterations as f64).sum::<f64>() / m,
                mean_wall_time_s: rs.iter().map(|r| r.wall_time_s).sum::<f64>() / m,
                relative_time: 0.0,
            }
        })
        .collect();
    let fastest = cells.iter().map(|c| c.mean_wall_time_s).filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    for c in &mut cells {
        c.relative_time = if fastest.is_finite() { c.mean_wall_time_s / fastest } else { 1.0 };
    }
    Summary { config: cfg.clone(), cells }
}
