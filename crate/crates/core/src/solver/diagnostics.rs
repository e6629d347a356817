use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One PADMM iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `‖Z‖_{U,1}` (TC-U1) or the slice nuclear-norm sum (TC-SL).
    pub objective: f64,
    /// `‖Ψ(M) − X − E‖_F`.
    pub residual: f64,
    pub rel_residual: f64,
    pub mu: f64,
    pub eta: f64,
    pub dz: f64,
    pub dx: f64,
    pub du_max: f64,
    pub y_norm: f64,
    /// `η · ‖[Z, U, E]⁺ − [Z, U, E]‖_F²`.
    pub weighted_delta: f64,
    /// Largest increase of a per-mode Procrustes objective (≤ 0 when the
    /// update did not make it worse).
    pub procrustes_increase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
    /// ‖Y‖_F left the configured bound or became non-finite.
    Diverged,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub status: Status,
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
    /// Divisor applied to the penalty parameters (1 for absolute scaling).
    pub penalty_scale: f64,
    /// `η` reached `η̄` before the stopping test passed.
    pub eta_capped_early: bool,
    /// Largest `‖UᴴU − I‖_F` seen on any factor at any iteration.
    pub max_unitarity_error: f64,
    /// Observed entries where `E` was nonzero, summed over iterations.
    pub e_support_violations: usize,
    /// Largest relative imaginary part discarded when mapping back to real.
    pub max_imag_residue: f64,
    pub max_y_norm: f64,
}

impl Diagnostics {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_rel_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.rel_residual)
    }

    /// `Σ_t η_t ‖Δ_t‖²`.
    pub fn weighted_delta_sum(&self) -> f64 {
        self.records.iter().map(|r| r.weighted_delta).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
