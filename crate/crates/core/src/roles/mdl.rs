//! Rank selection by minimum description length.
//!
//! Each candidate rank is scored as the bits needed to store the two
//! quantized factor matrices plus the bits needed to encode what the
//! quantized reconstruction gets wrong. The cheapest total wins; ties go
//! to the smaller rank.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::nmf::{nmf, NmfFit, NmfOptions};
use super::quantize::quantize_matrix;

/// How reconstruction errors are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModel {
    /// Elementwise squared error under a fixed-precision encoding.
    #[default]
    Squared,
    /// Generalized KL divergence in bits.
    KlDivergence,
}

impl std::str::FromStr for ErrorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Self::Squared),
            "kl" | "kl-divergence" => Ok(Self::KlDivergence),
            other => Err(Error::InvalidArgument(format!(
                "unknown error model '{other}' (expected squared or kl)"
            ))),
        }
    }
}

/// Settings for [`mdl_select_rank`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MdlOptions {
    /// Bits per stored factor value.
    pub bits: u32,
    pub error_model: ErrorModel,
    pub nmf: NmfOptions,
    /// NMF restarts per candidate rank; best objective is kept.
    pub restarts: usize,
}

impl Default for MdlOptions {
    fn default() -> Self {
        Self {
            bits: 4,
            error_model: ErrorModel::Squared,
            nmf: NmfOptions::default(),
            restarts: 3,
        }
    }
}

/// One scored candidate in the MDL scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdlCandidate {
    pub rank: usize,
    pub model_bits: f64,
    pub error_bits: f64,
    pub total_bits: f64,
}

/// Outcome of an MDL scan: the winning factorization plus the full trace.
#[derive(Debug, Clone)]
pub struct RankSelection {
    pub fit: NmfFit,
    pub trace: Vec<MdlCandidate>,
}

impl RankSelection {
    pub fn rank(&self) -> usize {
        self.fit.rank()
    }
}

/// Reconstruction-error bits of the quantized factorization, streamed one
/// row at a time so no n-by-f reconstruction is ever materialized.
fn error_bits(v: &Array2<f64>, g_hat: &Array2<f64>, f_hat: &Array2<f64>, model: ErrorModel) -> f64 {
    let mut total = 0.0;
    for (v_row, g_row) in v.rows().into_iter().zip(g_hat.rows()) {
        let recon_row = g_row.dot(f_hat);
        match model {
            ErrorModel::Squared => {
                for (&x, &y) in v_row.iter().zip(recon_row.iter()) {
                    let d = x - y;
                    total += d * d;
                }
            }
            ErrorModel::KlDivergence => {
                for (&x, &y) in v_row.iter().zip(recon_row.iter()) {
                    let y = y.max(1e-12);
                    total += if x > 0.0 { x * (x / y).ln() - x + y } else { y };
                }
            }
        }
    }
    match model {
        ErrorModel::Squared => total,
        ErrorModel::KlDivergence => total / std::f64::consts::LN_2,
    }
}

/// Fit NMF with restarts at a single rank, keeping the best objective.
pub fn nmf_best_of(v: &Array2<f64>, rank: usize, opts: &MdlOptions) -> Result<NmfFit> {
    let restarts = opts.restarts.max(1);
    let mut best: Option<NmfFit> = None;
    for restart in 0..restarts {
        let run = NmfOptions {
            // Spread restarts over distinct, reproducible streams.
            seed: opts
                .nmf
                .seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(rank as u64)
                .wrapping_add((restart as u64) << 32),
            ..opts.nmf
        };
        let fit = nmf(v, rank, &run)?;
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

/// Scan ranks in `[r_min, r_max]`, score each by description length and
/// return the minimizer (ties break toward the smaller rank).
pub fn mdl_select_rank(
    v: &Array2<f64>,
    r_min: usize,
    r_max: usize,
    opts: &MdlOptions,
) -> Result<RankSelection> {
    let (n, f) = v.dim();
    if !(1 <= r_min && r_min <= r_max && r_max < n.min(f)) {
        return Err(Error::InvalidArgument(format!(
            "invalid rank range [{r_min}, {r_max}] for a {n}x{f} matrix"
        )));
    }
    let bits = opts.bits.max(1);
    let mut trace = Vec::with_capacity(r_max - r_min + 1);
    let mut best: Option<(MdlCandidate, NmfFit)> = None;
    for rank in r_min..=r_max {
        let fit = nmf_best_of(v, rank, opts)?;
        let g_hat = quantize_matrix(&fit.g, bits);
        let f_hat = quantize_matrix(&fit.f, bits);
        let model_bits = bits as f64 * (n * rank + rank * f) as f64;
        let err = error_bits(v, &g_hat, &f_hat, opts.error_model);
        let candidate = MdlCandidate {
            rank,
            model_bits,
            error_bits: err,
            total_bits: model_bits + err,
        };
        trace.push(candidate);
        if best
            .as_ref()
            .is_none_or(|(c, _)| candidate.total_bits < c.total_bits)
        {
            best = Some((candidate, fit));
        }
    }
    let (_, fit) = best.unwrap();
    Ok(RankSelection { fit, trace })
}
