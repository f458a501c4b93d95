//! Role interpretation: express roles as non-negative combinations of
//! classical node measures by solving G E ~ M per timestep and averaging
//! the contributions over time.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{NodeMeasureMatrix, MEASURE_NAMES};
use crate::nnls::nnls_columns;
use crate::roles::MembershipMatrix;

/// Per-timestep and time-averaged role-by-measure contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleExplanation {
    /// One r-by-5 matrix per timestep; `None` where the fit was skipped.
    pub per_timestep: Vec<Option<Array2<f64>>>,
    /// Entrywise mean over the fitted timesteps.
    pub averaged: Array2<f64>,
    /// Frobenius residual of each fitted timestep.
    pub residuals: Vec<Option<f64>>,
    /// 1-based timesteps that entered the average.
    pub used_timesteps: Vec<usize>,
}

/// Solve `min ||G_t E - M_t||_F, E >= 0` per timestep and average the
/// results. Timesteps with fewer active nodes than roles are skipped as
/// under-determined; it is an error if every timestep is skipped.
pub fn interpret_roles(
    g_seq: &[MembershipMatrix],
    m_seq: &[NodeMeasureMatrix],
    use_normalized_measures: bool,
) -> Result<RoleExplanation> {
    if g_seq.len() != m_seq.len() {
        return Err(Error::Schema(format!(
            "{} membership matrices vs {} measure matrices",
            g_seq.len(),
            m_seq.len()
        )));
    }
    let rank = g_seq.iter().map(MembershipMatrix::rank).max().unwrap_or(0);
    if rank == 0 {
        return Err(Error::InsufficientData("no roles to interpret".into()));
    }
    for (g, m) in g_seq.iter().zip(m_seq) {
        if g.nodes != m.nodes {
            return Err(Error::Schema(format!(
                "timestep {}: membership and measure rows disagree",
                g.timestep
            )));
        }
    }

    let fits: Vec<Option<(Array2<f64>, f64)>> = g_seq
        .par_iter()
        .zip(m_seq.par_iter())
        .map(|(g, m)| {
            if g.node_count() < rank || g.node_count() == 0 {
                return Ok(None);
            }
            let target = m.values(use_normalized_measures);
            let e = nnls_columns(g.values.view(), target.view())?;
            let residual = (&g.values.dot(&e) - target).mapv(|v| v * v).sum().sqrt();
            Ok(Some((e, residual)))
        })
        .collect::<Result<_>>()?;

    let mut averaged = Array2::zeros((rank, MEASURE_NAMES.len()));
    let mut used_timesteps = Vec::new();
    let mut per_timestep = Vec::with_capacity(fits.len());
    let mut residuals = Vec::with_capacity(fits.len());
    for (g, fit) in g_seq.iter().zip(fits) {
        match fit {
            Some((e, residual)) => {
                averaged += &e;
                used_timesteps.push(g.timestep);
                per_timestep.push(Some(e));
                residuals.push(Some(residual));
            }
            None => {
                log::warn!(
                    "timestep {}: skipped under-determined interpretation fit ({} nodes < {} roles)",
                    g.timestep,
                    g.node_count(),
                    rank
                );
                per_timestep.push(None);
                residuals.push(None);
            }
        }
    }
    if used_timesteps.is_empty() {
        return Err(Error::InsufficientData(
            "every timestep has fewer active nodes than roles".into(),
        ));
    }
    averaged /= used_timesteps.len() as f64;
    Ok(RoleExplanation {
        per_timestep,
        averaged,
        residuals,
        used_timesteps,
    })
}

/// The measure that dominates a role's averaged contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DominantMeasure {
    pub measure: &'static str,
    /// Set when the role's row is all zero and the first column won by
    /// tie-break.
    pub degenerate: bool,
}

/// Argmax column of the averaged row for a role; ties break by the fixed
/// column order.
pub fn dominant_measure(explanation: &RoleExplanation, role: usize) -> DominantMeasure {
    let row = explanation.averaged.row(role);
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    DominantMeasure {
        measure: MEASURE_NAMES[best],
        degenerate: row.iter().all(|&v| v == 0.0),
    }
}
