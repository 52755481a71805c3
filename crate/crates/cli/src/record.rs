use std::io::Write;

use gridlq::diagnostics::KktResiduals;
use gridlq::pcgm::SolveReport;
use serde::Serialize;

/// One row of the run report. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub case: String,
    pub solver: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    /// Entries of `x̃` and `ũ`.
    pub unknowns: usize,
    /// Entries of `δ̃`.
    pub multipliers: usize,
    pub steps: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub objective: f64,
    pub assembly_s: f64,
    pub factorization_s: f64,
    pub solve_s: f64,
    pub factor_flops: u64,
    pub solve_flops: u64,
    pub kkt_stationarity_x: f64,
    pub kkt_stationarity_u: f64,
    pub kkt_primal: f64,
    pub kappa_delta: Option<f64>,
    pub kappa_preconditioned: Option<f64>,
    pub rho_inner: Option<f64>,
    pub rho_outer: Option<f64>,
}

impl Record {
    pub fn set_kkt(&mut self, k: &KktResiduals) {
        self.kkt_stationarity_x = k.stationarity_x;
        self.kkt_stationarity_u = k.stationarity_u;
        self.kkt_primal = k.primal;
    }

    pub fn clear_timings(&mut self) {
        self.assembly_s = 0.0;
        self.factorization_s = 0.0;
        self.solve_s = 0.0;
    }
}

/// Record plus the full iteration report, for the JSON format.
#[derive(Debug, Serialize)]
pub struct DetailedRecord {
    #[serde(flatten)]
    pub record: Record,
    pub report: SolveReport,
}

pub fn write_csv<W: Write, R: Serialize>(out: W, rows: &[R]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Side-by-side comparison of two solvers on one problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub case: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub solver_a: String,
    pub solver_b: String,
    pub steps_a: usize,
    pub steps_b: usize,
    pub steps_diff: i64,
    pub solve_s_a: f64,
    pub solve_s_b: f64,
    pub final_residual_a: f64,
    pub final_residual_b: f64,
    pub objective_a: f64,
    pub objective_b: f64,
    pub objective_rel_diff: f64,
}
