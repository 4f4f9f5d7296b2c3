//! Naive Monte Carlo permanent estimator: average the products of uniformly
//! drawn permutations and scale by `n!`. Unbiased, with variance that makes it
//! useless beyond small `n`; kept as the timing-matched baseline.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::Result;
use crate::logspace::{ln_factorial, LogSumExp};
use crate::matrix::{RngSpec, SquareMatrix};

/// Samples between clock reads in wall-time mode.
const CLOCK_STRIDE: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Count(u64),
    /// Keep sampling until this much time has passed (checked every 256 draws).
    WallTime(Duration),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleEstimate {
    /// `ln(n!/s * sum of sampled products)`; `-inf` when every product was zero.
    pub log_estimate: f64,
    pub samples_used: u64,
    pub elapsed_secs: f64,
    /// Log-estimate after every `trace_every` samples, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub running_mean_trace: Option<Vec<f64>>,
}

impl SampleEstimate {
    pub fn linear(&self) -> f64 {
        self.log_estimate.exp()
    }
}

pub fn sample_permanent(m: &SquareMatrix, budget: Budget, rng: &RngSpec) -> Result<SampleEstimate> {
    sample_permanent_traced(m, budget, rng, None)
}

pub fn sample_permanent_traced(
    m: &SquareMatrix,
    budget: Budget,
    rng: &RngSpec,
    trace_every: Option<u64>,
) -> Result<SampleEstimate> {
    let n = m.n();
    let mut rng = rng.rng()?;
    let started = Instant::now();
    let ln_w: Vec<f64> = m.as_slice().iter().map(|w| w.ln()).collect();
    let ln_scale = ln_factorial(n);

    if n == 1 {
        let samples_used = match budget {
            Budget::Count(s) => s.max(1),
            Budget::WallTime(_) => 1,
        };
        return Ok(SampleEstimate {
            log_estimate: ln_w[0],
            samples_used,
            elapsed_secs: started.elapsed().as_secs_f64(),
            running_mean_trace: trace_every.map(|_| vec![ln_w[0]]),
        });
    }

    let mut perm: Vec<usize> = (0..n).collect();
    let mut acc = LogSumExp::default();
    let mut trace = trace_every.map(|_| Vec::new());
    let mut s: u64 = 0;
    loop {
        match budget {
            Budget::Count(limit) if s >= limit.max(1) => break,
            Budget::WallTime(d)
                if s > 0 && s.is_multiple_of(CLOCK_STRIDE) && started.elapsed() >= d =>
            {
                break
            }
            _ => {}
        }
        // reshuffling the previous draw is still a uniform draw
        perm.shuffle(&mut rng);
        let log_product: f64 = perm.iter().enumerate().map(|(i, &j)| ln_w[i * n + j]).sum();
        acc.push(log_product);
        s += 1;
        if let (Some(every), Some(t)) = (trace_every, trace.as_mut()) {
            if s.is_multiple_of(every) {
                t.push(ln_scale - (s as f64).ln() + acc.ln_sum());
            }
        }
    }

    Ok(SampleEstimate {
        log_estimate: ln_scale - (s as f64).ln() + acc.ln_sum(),
        samples_used: s,
        elapsed_secs: started.elapsed().as_secs_f64(),
        running_mean_trace: trace,
    })
}
