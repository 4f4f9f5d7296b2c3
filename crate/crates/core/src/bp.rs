//! Sum-product belief propagation on the bipartite matching model whose
//! partition function is the permanent, and the Bethe free energy of the
//! resulting beliefs.
//!
//! Row variables `x_i` and column variables `y_j` both range over `0..n`.
//! Unary potentials are `phi(x_i = j) = phi(y_j = i) = sqrt(W_ij)` and the
//! pairwise potential between `x_i` and `y_j` vanishes exactly when one of
//! `x_i = j`, `y_j = i` holds without the other. Every full message vector
//! takes only two distinct values (matched / not matched), so each message is
//! stored as the single log-ratio `ln(m_match / m_not)`:
//!
//! * `mx[i][j]`: message from `x_i` to `y_j`
//! * `my[j][i]`: message from `y_j` to `x_i`
//!
//! The reduced update is `mx[i][j] = phi(x_i=j) / sum_{k!=j} phi(x_i=k) my[k][i]`
//! (and symmetrically for `my`), applied synchronously with log-space damping.
//! One sweep costs O(n^2); evaluating the Bethe free energy costs O(n^3).

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::logspace::log_add_exp;
use crate::matrix::{RngSpec, SquareMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Init {
    /// All log-messages zero.
    Uniform,
    /// Log-messages i.i.d. uniform on `[-1, 1]`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ZeroEntryPolicy {
    /// Fail on any zero entry.
    Reject,
    /// Raise entries below `relative_floor * max(W)` to that floor.
    Clamp { relative_floor: f64 },
}

impl Default for ZeroEntryPolicy {
    fn default() -> Self {
        ZeroEntryPolicy::Clamp {
            relative_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BpConfig {
    /// Log-space damping rate in `(0, 1]`; 1 means no damping.
    pub damping: f64,
    /// Convergence threshold on the summed absolute change of all `2n^2`
    /// log-messages in one sweep.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub init: Init,
    pub zero_entry_policy: ZeroEntryPolicy,
    /// Keep the per-sweep residuals in the result.
    pub record_trace: bool,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 10_000,
            init: Init::Uniform,
            zero_entry_policy: ZeroEntryPolicy::default(),
            record_trace: false,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Domain(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be positive".into()));
        }
        if let ZeroEntryPolicy::Clamp { relative_floor } = self.zero_entry_policy {
            if !(relative_floor > 0.0 && relative_floor.is_finite()) {
                return Err(Error::Domain(format!(
                    "clamp floor must be positive, got {relative_floor}"
                )));
            }
        }
        Ok(())
    }
}

/// Reduced messages, in log domain. `log_mx[i * n + j]` is `ln mx[i][j]` and
/// `log_my[j * n + i]` is `ln my[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    n: usize,
    pub log_mx: Vec<f64>,
    pub log_my: Vec<f64>,
}

impl MessageState {
    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            log_mx: vec![0.0; n * n],
            log_my: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln mx[i][j]`, message from row variable `i` to column variable `j`.
    #[inline]
    pub fn ln_mx(&self, i: usize, j: usize) -> f64 {
        self.log_mx[i * self.n + j]
    }

    /// `ln my[j][i]`, message from column variable `j` to row variable `i`.
    #[inline]
    pub fn ln_my(&self, j: usize, i: usize) -> f64 {
        self.log_my[j * self.n + i]
    }

    fn check_finite(&self) -> Result<()> {
        if self
            .log_mx
            .iter()
            .chain(&self.log_my)
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Numeric("message left the finite range".into()))
        }
    }
}

/// Outcome of a belief-propagation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetheResult {
    pub f_bethe: f64,
    /// `-f_bethe`, the log of the permanent estimate.
    pub log_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Summed absolute log-message change of the final sweep.
    pub residual: f64,
    pub message_passing_secs: f64,
    pub energy_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_trace: Option<Vec<f64>>,
}

impl BetheResult {
    pub fn elapsed_secs(&self) -> f64 {
        self.message_passing_secs + self.energy_secs
    }
}

/// The matching model for one weight matrix: `ln phi` for every entry after
/// the zero-entry policy is applied.
#[derive(Debug, Clone)]
pub struct MatchingModel {
    n: usize,
    ln_phi: Vec<f64>,
}

impl MatchingModel {
    pub fn new(m: &SquareMatrix, policy: ZeroEntryPolicy) -> Result<Self> {
        let weights = match policy {
            ZeroEntryPolicy::Reject => {
                if let Some(idx) = m.as_slice().iter().position(|&w| w <= 0.0) {
                    return Err(Error::Domain(format!(
                        "entry ({}, {}) is zero and zero entries are rejected",
                        idx / m.n(),
                        idx % m.n()
                    )));
                }
                m.clone()
            }
            ZeroEntryPolicy::Clamp { relative_floor } => {
                let max = m.max_entry();
                if max <= 0.0 {
                    return Err(Error::Domain("matrix is identically zero".into()));
                }
                m.clamped_below(relative_floor * max)
            }
        };
        Ok(Self {
            n: m.n(),
            ln_phi: weights.as_slice().iter().map(|w| 0.5 * w.ln()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln phi(x_i = j) = ln phi(y_j = i) = ln(W_ij) / 2`.
    #[inline]
    pub fn ln_phi(&self, i: usize, j: usize) -> f64 {
        self.ln_phi[i * self.n + j]
    }

    pub fn init_messages(&self, init: Init) -> Result<MessageState> {
        let mut state = MessageState::uniform(self.n);
        if let Init::Random { seed } = init {
            let mut rng = RngSpec::new(seed).rng()?;
            for v in state.log_mx.iter_mut().chain(state.log_my.iter_mut()) {
                *v = rng.random_range(-1.0..=1.0);
            }
        }
        Ok(state)
    }

    /// One synchronous damped sweep from `old` into `new`, returning the
    /// summed absolute change of all log-messages.
    pub fn sweep_into(
        &self,
        old: &MessageState,
        new: &mut MessageState,
        damping: f64,
        scratch: &mut SweepScratch,
    ) -> Result<f64> {
        let n = self.n;
        if n < 2 {
            return Err(Error::Domain(
                "message updates need n >= 2; a 1x1 permanent is its entry".into(),
            ));
        }
        assert_eq!(old.n, n);
        new.n = n;
        scratch.resize(n);
        let damp = |old: f64, raw: f64| {
            if damping == 1.0 {
                raw
            } else {
                old + damping * (raw - old)
            }
        };
        let mut residual = 0.0;

        // x_i -> y_j
        for i in 0..n {
            for k in 0..n {
                scratch.terms[k] = self.ln_phi(i, k) + old.ln_my(k, i);
            }
            leave_one_out_log_sums(&scratch.terms, &mut scratch.excl, &mut scratch.exps);
            for j in 0..n {
                let raw = self.ln_phi(i, j) - scratch.excl[j];
                let prev = old.log_mx[i * n + j];
                let next = damp(prev, raw);
                residual += (next - prev).abs();
                new.log_mx[i * n + j] = next;
            }
        }
        // y_j -> x_i
        for j in 0..n {
            for l in 0..n {
                scratch.terms[l] = self.ln_phi(l, j) + old.ln_mx(l, j);
            }
            leave_one_out_log_sums(&scratch.terms, &mut scratch.excl, &mut scratch.exps);
            for i in 0..n {
                let raw = self.ln_phi(i, j) - scratch.excl[i];
                let prev = old.log_my[j * n + i];
                let next = damp(prev, raw);
                residual += (next - prev).abs();
                new.log_my[j * n + i] = next;
            }
        }

        if !residual.is_finite() {
            return Err(Error::Numeric(format!(
                "message update produced a non-finite residual ({residual})"
            )));
        }
        Ok(residual)
    }

    pub fn sweep(&self, state: &MessageState, damping: f64) -> Result<(MessageState, f64)> {
        let mut next = MessageState::uniform(self.n);
        let r = self.sweep_into(state, &mut next, damping, &mut SweepScratch::default())?;
        Ok((next, r))
    }

    /// Iterates sweeps from `state` until the residual drops to the
    /// tolerance or the iteration cap is hit.
    pub fn run(
        &self,
        mut state: MessageState,
        config: &BpConfig,
    ) -> Result<(MessageState, BetheResult)> {
        config.validate()?;
        let started = Instant::now();
        let mut iterations = 0;
        let mut residual = 0.0;
        let mut converged = self.n == 1;
        let mut trace = config.record_trace.then(Vec::new);
        if !converged {
            let mut next = state.clone();
            let mut scratch = SweepScratch::default();
            while iterations < config.max_iterations {
                residual = self.sweep_into(&state, &mut next, config.damping, &mut scratch)?;
                std::mem::swap(&mut state, &mut next);
                iterations += 1;
                if let Some(t) = trace.as_mut() {
                    t.push(residual);
                }
                if residual <= config.tolerance {
                    converged = true;
                    break;
                }
            }
        }
        let message_passing_secs = started.elapsed().as_secs_f64();
        state.check_finite()?;

        let started = Instant::now();
        let f_bethe = self.bethe_free_energy(&state)?;
        let energy_secs = started.elapsed().as_secs_f64();

        Ok((
            state,
            BetheResult {
                f_bethe,
                log_estimate: -f_bethe,
                iterations,
                converged,
                residual,
                message_passing_secs,
                energy_secs,
                residual_trace: trace,
            },
        ))
    }

    fn summarize_rows(&self, s: &MessageState, with_means: bool) -> SideSummary {
        SideSummary::build(self.n, with_means, |i, k| {
            (self.ln_phi(i, k), s.ln_my(k, i))
        })
    }

    fn summarize_cols(&self, s: &MessageState, with_means: bool) -> SideSummary {
        SideSummary::build(self.n, with_means, |j, l| {
            (self.ln_phi(l, j), s.ln_mx(l, j))
        })
    }

    pub fn beliefs(&self, s: &MessageState) -> Result<BeliefState> {
        s.check_finite()?;
        let n = self.n;
        let rows = self.summarize_rows(s, false);
        let cols = self.summarize_cols(s, false);
        let belief_matrix = SquareMatrix::from_vec(n, rows.belief.clone())
            .map_err(|e| Error::Numeric(format!("row beliefs: {e}")))?;
        // cols.belief is indexed [j][i]; store as [i][j]
        let column_beliefs = SquareMatrix::from_vec(n, cols.belief.clone())
            .map_err(|e| Error::Numeric(format!("column beliefs: {e}")))?
            .transpose();
        Ok(BeliefState {
            n,
            belief_matrix,
            column_beliefs,
            ln_z_rows: rows.ln_total,
            ln_z_cols: cols.ln_total,
            ln_excl_rows: rows.ln_excl,
            ln_excl_cols: cols.ln_excl,
            ln_w: self.ln_phi.iter().map(|p| 2.0 * p).collect(),
        })
    }

    /// Bethe free energy of the beliefs induced by `s`.
    ///
    /// For the pair `(x_i, y_j)` write `u_k = phi(x_i=k) my[k][i]` and
    /// `v_l = phi(y_j=l) mx[l][j]`. The pairwise belief puts mass `W_ij / Z_ij`
    /// on the matched state and `u_k v_l / Z_ij` on each doubly-unmatched state
    /// `(k != j, l != i)`, with `Z_ij = W_ij + U V`, `U = sum_{k!=j} u_k`,
    /// `V = sum_{l!=i} v_l`. Its entropy minus energy collapses to
    /// `(UV / Z_ij) (<ln my>_u + <ln mx>_v) - ln Z_ij`, where `<.>_u` averages
    /// over `k != j` with weights `u_k`. Each singleton adds
    /// `(n - 1) (ln Z_i - <ln my>_{b_i})`, the entropy less the unary energy.
    pub fn bethe_free_energy(&self, s: &MessageState) -> Result<f64> {
        s.check_finite()?;
        let n = self.n;
        let rows = self.summarize_rows(s, true);
        let cols = self.summarize_cols(s, true);

        let mut pair_terms = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ln_w = 2.0 * self.ln_phi(i, j);
                let ln_uv = rows.ln_excl[i * n + j] + cols.ln_excl[j * n + i];
                let ln_z = log_add_exp(ln_w, ln_uv);
                pair_terms -= ln_z;
                if ln_uv > f64::NEG_INFINITY {
                    let unmatched = (ln_uv - ln_z).exp();
                    pair_terms +=
                        unmatched * (rows.excl_mean[i * n + j] + cols.excl_mean[j * n + i]);
                }
            }
        }
        let singleton_terms: f64 = (0..n)
            .map(|v| (rows.ln_total[v] - rows.mean[v]) + (cols.ln_total[v] - cols.mean[v]))
            .sum();
        let f = pair_terms + (n as f64 - 1.0) * singleton_terms;
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::Numeric(format!("Bethe free energy is {f}")))
        }
    }
}

/// Reusable buffers for [`MatchingModel::sweep_into`].
#[derive(Debug, Default)]
pub struct SweepScratch {
    terms: Vec<f64>,
    excl: Vec<f64>,
    exps: Vec<f64>,
}

impl SweepScratch {
    fn resize(&mut self, n: usize) {
        self.terms.resize(n, 0.0);
        self.excl.resize(n, 0.0);
        self.exps.resize(n, 0.0);
    }
}

/// Writes `ln sum_{k != j} exp(t_k)` into `excl[j]` for every `j` and returns
/// `ln sum_k exp(t_k)`, in O(n).
///
/// Sums are factored by the maximum term. Removing a non-maximal term leaves
/// the maximum (scaled to 1) in the sum, so the subtraction loses at most a
/// factor `n` in relative precision; the sum without the maximal term is
/// always recomputed directly, scaled by its own maximum, so it cannot cancel
/// or underflow to zero.
fn leave_one_out_log_sums(t: &[f64], excl: &mut [f64], exps: &mut [f64]) -> f64 {
    let n = t.len();
    let (argmax, max) =
        t.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, v)| {
                if v > best.1 {
                    (k, v)
                } else {
                    best
                }
            });
    let mut total = 0.0;
    for k in 0..n {
        exps[k] = (t[k] - max).exp();
        total += exps[k];
    }
    for j in 0..n {
        if j != argmax {
            excl[j] = max + (total - exps[j]).ln();
        }
    }
    let second = (0..n)
        .filter(|&k| k != argmax)
        .map(|k| t[k])
        .fold(f64::NEG_INFINITY, f64::max);
    excl[argmax] = if second == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        second
            + (0..n)
                .filter(|&k| k != argmax)
                .map(|k| (t[k] - second).exp())
                .sum::<f64>()
                .ln()
    };
    max + total.ln()
}

/// Per-variable aggregates for one side of the bipartite graph. For node `v`
/// with states `k`, the unnormalized singleton weight is
/// `exp(ln_phi(v, k) + ln_msg(v, k))`.
struct SideSummary {
    /// `ln` of the singleton normalizer, per node.
    ln_total: Vec<f64>,
    /// `[v * n + j]`: log of the weight sum with state `j` left out.
    ln_excl: Vec<f64>,
    /// `[v * n + k]`: normalized singleton belief.
    belief: Vec<f64>,
    /// Belief-weighted mean incoming log-message, per node.
    mean: Vec<f64>,
    /// `[v * n + j]`: the same mean restricted to states `k != j`.
    excl_mean: Vec<f64>,
}

impl SideSummary {
    fn build(n: usize, with_means: bool, term: impl Fn(usize, usize) -> (f64, f64)) -> Self {
        let mut out = SideSummary {
            ln_total: vec![0.0; n],
            ln_excl: vec![0.0; n * n],
            belief: vec![0.0; n * n],
            mean: vec![0.0; n],
            excl_mean: vec![0.0; if with_means { n * n } else { 0 }],
        };
        let mut t = vec![0.0; n];
        let mut msg = vec![0.0; n];
        let mut exps = vec![0.0; n];
        let mut second_exps = vec![0.0; n];
        for v in 0..n {
            for k in 0..n {
                let (ln_phi, ln_msg) = term(v, k);
                t[k] = ln_phi + ln_msg;
                msg[k] = ln_msg;
            }
            let row = v * n..(v + 1) * n;
            let ln_total = leave_one_out_log_sums(&t, &mut out.ln_excl[row.clone()], &mut exps);
            out.ln_total[v] = ln_total;
            let total: f64 = exps.iter().sum();
            let mut mean = 0.0;
            for k in 0..n {
                let b = exps[k] / total;
                out.belief[v * n + k] = b;
                mean += b * msg[k];
            }
            out.mean[v] = mean;
            if !with_means || n < 2 {
                continue;
            }

            // Weighted means over k != j. For every j except the argmax the
            // weights relative to the global maximum keep the top term at 1;
            // for the argmax itself rescale by the runner-up.
            let argmax = (0..n).find(|&k| exps[k] == 1.0).unwrap_or(0);
            let second = (0..n)
                .filter(|&k| k != argmax)
                .map(|k| t[k])
                .fold(f64::NEG_INFINITY, f64::max);
            for k in 0..n {
                second_exps[k] = if k == argmax {
                    0.0
                } else {
                    (t[k] - second).exp()
                };
            }
            for j in 0..n {
                let weights = if j == argmax { &second_exps } else { &exps };
                let (mut num, mut den) = (0.0, 0.0);
                for k in (0..n).filter(|&k| k != j) {
                    num += weights[k] * msg[k];
                    den += weights[k];
                }
                out.excl_mean[v * n + j] = num / den;
            }
        }
        out
    }
}

/// Pseudo-marginals read off a message state.
#[derive(Debug, Clone)]
pub struct BeliefState {
    n: usize,
    /// `B_ij = b(x_i = j)`; rows sum to one by construction.
    pub belief_matrix: SquareMatrix,
    /// `b(y_j = i)` stored at `[i][j]`; columns sum to one by construction and
    /// agree with `belief_matrix` at a fixed point.
    pub column_beliefs: SquareMatrix,
    /// `ln Z_i` for the row singletons.
    pub ln_z_rows: Vec<f64>,
    /// `ln Z_j` for the column singletons.
    pub ln_z_cols: Vec<f64>,
    ln_excl_rows: Vec<f64>,
    ln_excl_cols: Vec<f64>,
    ln_w: Vec<f64>,
}

impl BeliefState {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln Z_ij`, the normalizer of the pairwise belief on `(x_i, y_j)`.
    pub fn ln_pair_normalizer(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        log_add_exp(
            self.ln_w[i * n + j],
            self.ln_excl_rows[i * n + j] + self.ln_excl_cols[j * n + i],
        )
    }

    /// `b(x_i = k, y_j = l)` from the factorized pairwise belief.
    pub fn pairwise(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let ln_z = self.ln_pair_normalizer(i, j);
        match (k == j, l == i) {
            (true, true) => (self.ln_w[i * self.n + j] - ln_z).exp(),
            (false, false) => {
                let u = self.belief_matrix.get(i, k).ln() + self.ln_z_rows[i];
                let v = self.column_beliefs.get(l, j).ln() + self.ln_z_cols[j];
                (u + v - ln_z).exp()
            }
            _ => 0.0,
        }
    }

    /// Largest `|sum - 1|` over the rows and columns of `belief_matrix`.
    pub fn doubly_stochastic_error(&self) -> f64 {
        stochastic_error(&self.belief_matrix)
    }

    /// Largest `|b(x_i = j) - b(y_j = i)|`.
    pub fn consistency_error(&self) -> f64 {
        self.belief_matrix
            .as_slice()
            .iter()
            .zip(self.column_beliefs.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Largest deviation of any row or column sum from one.
pub fn stochastic_error(m: &SquareMatrix) -> f64 {
    let n = m.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let row: f64 = m.row(i).iter().sum();
        let col: f64 = (0..n).map(|r| m.get(r, i)).sum();
        worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
    }
    worst
}

pub fn init_messages(m: &SquareMatrix, config: &BpConfig) -> Result<MessageState> {
    config.validate()?;
    MatchingModel::new(m, config.zero_entry_policy)?.init_messages(config.init)
}

pub fn update_messages(
    m: &SquareMatrix,
    s: &MessageState,
    config: &BpConfig,
) -> Result<(MessageState, f64)> {
    config.validate()?;
    MatchingModel::new(m, config.zero_entry_policy)?.sweep(s, config.damping)
}

pub fn run_bp(m: &SquareMatrix, config: &BpConfig) -> Result<(MessageState, BetheResult)> {
    config.validate()?;
    let model = MatchingModel::new(m, config.zero_entry_policy)?;
    let init = model.init_messages(config.init)?;
    model.run(init, config)
}

pub fn compute_beliefs(
    m: &SquareMatrix,
    s: &MessageState,
    config: &BpConfig,
) -> Result<BeliefState> {
    MatchingModel::new(m, config.zero_entry_policy)?.beliefs(s)
}

pub fn bethe_free_energy(m: &SquareMatrix, s: &MessageState, config: &BpConfig) -> Result<f64> {
    MatchingModel::new(m, config.zero_entry_policy)?.bethe_free_energy(s)
}

/// `ln per(W)` estimated as `-min F_Bethe`. A 1x1 matrix is answered exactly.
pub fn estimate_permanent(m: &SquareMatrix, config: &BpConfig) -> Result<BetheResult> {
    config.validate()?;
    if m.n() == 1 {
        let ln_w = m.get(0, 0).ln();
        return Ok(BetheResult {
            f_bethe: -ln_w,
            log_estimate: ln_w,
            iterations: 0,
            converged: true,
            residual: 0.0,
            message_passing_secs: 0.0,
            energy_secs: 0.0,
            residual_trace: config.record_trace.then(Vec::new),
        });
    }
    run_bp(m, config).map(|(_, r)| r)
}

pub fn extract_belief_matrix(b: &BeliefState) -> SquareMatrix {
    b.belief_matrix.clone()
}

#[derive(Debug, Clone, Serialize)]
pub struct SinkhornResult {
    #[serde(serialize_with = "serialize_rows")]
    pub matrix: SquareMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Largest row or column sum deviation from one at exit.
    pub max_deviation: f64,
}

pub(crate) fn serialize_rows<S: serde::Serializer>(
    m: &SquareMatrix,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.n()))?;
    for row in m.rows() {
        seq.serialize_element(row)?;
    }
    seq.end()
}

/// Alternating row and column normalization towards a doubly stochastic
/// matrix.
pub fn sinkhorn_scale(m: &SquareMatrix, tol: f64, max_iter: usize) -> Result<SinkhornResult> {
    let n = m.n();
    for i in 0..n {
        if m.row(i).iter().all(|&w| w == 0.0) {
            return Err(Error::Domain(format!("row {i} is all zero")));
        }
        if (0..n).all(|r| m.get(r, i) == 0.0) {
            return Err(Error::Domain(format!("column {i} is all zero")));
        }
    }
    let mut a = m.as_slice().to_vec();
    let deviation =
        |a: &[f64]| stochastic_error(&SquareMatrix::from_vec(n, a.to_vec()).expect("nonnegative"));
    let mut dev = deviation(&a);
    let mut iterations = 0;
    while dev > tol && iterations < max_iter {
        for row in a.chunks_exact_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|w| *w /= s);
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| a[i * n + j]).sum();
            (0..n).for_each(|i| a[i * n + j] /= s);
        }
        iterations += 1;
        dev = deviation(&a);
    }
    Ok(SinkhornResult {
        matrix: SquareMatrix::from_vec(n, a)?,
        iterations,
        converged: dev <= tol,
        max_deviation: dev,
    })
}

/// `sum_ij B_ij ln(B_ij / A_ij)` with `0 ln 0 = 0`; `+inf` when `B` puts mass
/// where `A` has none.
pub fn pseudo_kl(b: &SquareMatrix, a: &SquareMatrix) -> f64 {
    b.as_slice()
        .iter()
        .zip(a.as_slice())
        .map(|(&b, &a)| match (b > 0.0, a > 0.0) {
            (false, _) => 0.0,
            (true, false) => f64::INFINITY,
            (true, true) => b * (b / a).ln(),
        })
        .sum()
}
