//! Analytical training cost of a decoder-only transformer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// Sequences per batch.
    pub batch: u64,
    /// Tokens per sequence.
    pub seq_len: u64,
    pub layers: u64,
    pub hidden: u64,
    pub vocab: u64,
}

impl Default for CostParams {
    /// 2.6B-parameter reference model, batch of one sequence.
    fn default() -> Self {
        CostParams {
            batch: 1,
            seq_len: 2048,
            layers: 32,
            hidden: 2560,
            vocab: 50_000,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("batch", self.batch),
            ("seq_len", self.seq_len),
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("vocab", self.vocab),
        ];
        match fields.iter().find(|f| f.1 == 0) {
            Some((name, _)) => Err(Error::InvalidInput(format!(
                "cost parameter {name} must be >= 1"
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// FLOPs for one forward and backward pass over a batch.
    pub step_flops: f64,
    pub flops_per_token: f64,
    pub flops_per_word: f64,
    pub fertility_used: f64,
}

/// C = 96·B·s·l·h²·(1 + s/(6h) + V/(16·l·h)).
pub fn step_cost(p: &CostParams) -> Result<f64> {
    p.validate()?;
    let (b, s, l, h, v) = (
        p.batch as f64,
        p.seq_len as f64,
        p.layers as f64,
        p.hidden as f64,
        p.vocab as f64,
    );
    let c = 96.0 * b * s * l * h * h * (1.0 + s / (6.0 * h) + v / (16.0 * l * h));
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::CostOverflow)
    }
}

pub fn cost_per_word(p: &CostParams, fertility: f64) -> Result<CostReport> {
    if !(fertility >= 0.0 && fertility.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "fertility {fertility} must be finite and >= 0"
        )));
    }
    let step = step_cost(p)?;
    let per_token = step / (p.batch as f64 * p.seq_len as f64);
    Ok(CostReport {
        step_flops: step,
        flops_per_token: per_token,
        flops_per_word: per_token * fertility,
        fertility_used: fertility,
    })
}

pub fn gflops(flops: f64) -> f64 {
    flops / 1e9
}
