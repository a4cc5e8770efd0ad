//! Receivers: time-domain MMSE, hard-decision iterative cancellation and the
//! soft iterative detector with variance-ranked redetection.
//!
//! The soft detector works on the MMSE output `x̄ = C_α x + w̄`. Each iteration
//! cancels `(C_{α,D} - I)·x̂` using the previous hard decisions (the MMSE
//! output itself on the first pass), clips the result to the alphabet's
//! bounding box, turns Euclidean distances into bit LLRs and symbol
//! posteriors, and re-decides. After the last iteration the least reliable
//! symbols are revisited against the full received vector `y = H_eff x + w`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::afm::{all_finite, CMat, CVec};
use crate::error::{dim, param, Error, Result};
use crate::ici::CorrelationMatrix;
use crate::modem::{demodulate, WaveformConfig};
use crate::qam::{Constellation, QamOrder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Cancellation iterations `K`.
    pub iterations: usize,
    /// ICI span `D` used to prune the correlation matrix.
    pub ici_span: usize,
    /// Number of symbols revisited by redetection, `|U|`.
    pub redetect: usize,
    /// Time-domain noise variance used in the LLRs.
    pub sigma2: f64,
    pub qam: QamOrder,
}

impl DetectorConfig {
    /// Defaults: `K = 10`, `D = N - 1`, `|U| = ⌈N/4⌉`.
    pub fn new(n: usize, sigma2: f64, qam: QamOrder) -> Self {
        Self { iterations: 10, ici_span: n.saturating_sub(1), redetect: n.div_ceil(4), sigma2, qam }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(param(format!("noise variance {} must be positive and finite", self.sigma2)));
        }
        if self.redetect > n {
            return Err(param(format!("redetection size {} exceeds N = {n}", self.redetect)));
        }
        if n > 0 && self.ici_span >= n {
            return Err(param(format!("ICI span {} must be below N = {n}", self.ici_span)));
        }
        Ok(())
    }
}

/// `ŝ = (H^H H + σ²I)^{-1} H^H r`, solved by Cholesky factorisation.
pub fn mmse_time(r: &CVec, ht: &CMat, sigma2: f64) -> Result<CVec> {
    let n = ht.nrows();
    if !ht.is_square() || r.len() != n {
        return Err(dim(format!("channel is {}x{}, received vector has {}", n, ht.ncols(), r.len())));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(param(format!("noise variance {sigma2} must be positive and finite")));
    }
    if !all_finite(r.iter()) || !all_finite(ht.iter()) {
        return Err(Error::Numerical("non-finite MMSE input".into()));
    }
    let mut gram = ht.ad_mul(ht);
    for i in 0..n {
        gram[(i, i)] += sigma2;
    }
    let rhs = ht.ad_mul(r);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("regularised Gram matrix is not positive definite".into()))?;
    let s = chol.solve(&rhs);
    if !all_finite(s.iter()) {
        return Err(Error::Numerical("MMSE solve produced non-finite values".into()));
    }
    Ok(s)
}

/// `x̄ = A_α ŝ`.
pub fn mmse_affine(s_hat: &CVec, cfg: &WaveformConfig) -> Result<CVec> {
    demodulate(s_hat.as_slice(), cfg)
}

/// Componentwise clipping of real and imaginary parts to the alphabet's range.
#[inline]
pub fn clip(z: Complex64, constellation: &Constellation) -> Complex64 {
    let b = constellation.max_amplitude();
    Complex64::new(z.re.clamp(-b, b), z.im.clamp(-b, b))
}

fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + vals.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bit LLRs `log P(b=0)/P(b=1)` of a clipped symbol under the max-log-free
/// Gaussian metric `exp(-|z - X|² / 2σ²)`.
pub fn bit_llrs(z: Complex64, sigma2: f64, constellation: &Constellation, out: &mut [f64]) {
    let k = constellation.bits_per_symbol();
    let metric: Vec<f64> =
        constellation.points().iter().map(|p| -(z - p).norm_sqr() / (2.0 * sigma2)).collect();
    for (b, llr) in out.iter_mut().enumerate().take(k) {
        let zero = log_sum_exp(
            metric.iter().enumerate().filter(|(m, _)| constellation.label_bit(*m, b) == 0).map(|(_, v)| *v),
        );
        let one = log_sum_exp(
            metric.iter().enumerate().filter(|(m, _)| constellation.label_bit(*m, b) == 1).map(|(_, v)| *v),
        );
        *llr = zero - one;
    }
}

/// Symbol posteriors as products of per-bit probabilities.
pub fn symbol_posteriors(llrs: &[f64], constellation: &Constellation, out: &mut [f64]) {
    let k = constellation.bits_per_symbol();
    let p0: Vec<f64> = llrs[..k].iter().map(|&l| sigmoid(l)).collect();
    let p1: Vec<f64> = llrs[..k].iter().map(|&l| sigmoid(-l)).collect();
    for (m, slot) in out.iter_mut().enumerate().take(constellation.len()) {
        *slot = (0..k).map(|b| if constellation.label_bit(m, b) == 0 { p0[b] } else { p1[b] }).product();
    }
}

/// Per-iteration soft detector state, all indexed by subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftState {
    /// After interference cancellation.
    pub zbar: CVec,
    /// After clipping.
    pub z: CVec,
    /// `N × log2 M` bit LLRs.
    pub llrs: DMatrix<f64>,
    /// `N × M` symbol posteriors.
    pub post: DMatrix<f64>,
    /// Posterior means.
    pub zsoft: CVec,
    /// Hard decisions as alphabet indices.
    pub decisions: Vec<usize>,
    /// Posterior variances.
    pub var: Vec<f64>,
}

impl SoftState {
    pub fn xhat(&self, constellation: &Constellation) -> CVec {
        CVec::from_iterator(self.decisions.len(), self.decisions.iter().map(|&i| constellation.point(i)))
    }
}

/// Soft stage for one cancelled vector: clip, LLRs, posteriors, decisions,
/// posterior mean and variance.
pub fn soft_stage(zbar: CVec, sigma2: f64, constellation: &Constellation) -> Result<SoftState> {
    let n = zbar.len();
    let k = constellation.bits_per_symbol();
    let m = constellation.len();
    if !all_finite(zbar.iter()) {
        return Err(Error::Numerical("non-finite symbol estimate".into()));
    }
    let z = zbar.map(|v| clip(v, constellation));
    let mut llrs = DMatrix::zeros(n, k);
    let mut post = DMatrix::zeros(n, m);
    let mut zsoft = CVec::zeros(n);
    let mut decisions = vec![0; n];
    let mut var = vec![0.0; n];
    let mut lbuf = vec![0.0; k];
    let mut pbuf = vec![0.0; m];
    for i in 0..n {
        bit_llrs(z[i], sigma2, constellation, &mut lbuf);
        if lbuf.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite LLR at subcarrier {i}")));
        }
        symbol_posteriors(&lbuf, constellation, &mut pbuf);
        let mean: Complex64 = pbuf.iter().zip(constellation.points()).map(|(p, x)| x * *p).sum();
        let spread: f64 = pbuf.iter().zip(constellation.points()).map(|(p, x)| (x - mean).norm_sqr() * p).sum();
        let best = pbuf
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, &p)| if p > acc.1 { (j, p) } else { acc })
            .0;
        for b in 0..k {
            llrs[(i, b)] = lbuf[b];
        }
        for j in 0..m {
            post[(i, j)] = pbuf[j];
        }
        zsoft[i] = mean;
        decisions[i] = best;
        var[i] = spread;
    }
    Ok(SoftState { zbar, z, llrs, post, zsoft, decisions, var })
}

/// `(C - I)·v`.
fn interference(c: &CMat, v: &CVec) -> CVec {
    let n = v.len();
    CVec::from_fn(n, |i, _| {
        (0..n).filter(|&j| j != i).map(|j| c[(i, j)] * v[j]).sum::<Complex64>()
    })
}

/// Runs the `K` cancellation iterations, handing every iteration's state to
/// `observe`, and returns the final state. With `K = 0` the soft stage runs
/// once on the uncancelled input.
pub fn soft_iterate(
    xbar: &CVec,
    c_d: &CorrelationMatrix,
    det: &DetectorConfig,
    mut observe: impl FnMut(usize, &SoftState),
) -> Result<SoftState> {
    let n = xbar.len();
    if c_d.n != n {
        return Err(dim(format!("correlation matrix is {}x{0}, vector has {n}", c_d.n)));
    }
    det.validate(n)?;
    if !all_finite(xbar.iter()) {
        return Err(Error::Numerical("non-finite MMSE output".into()));
    }
    let constellation = Constellation::new(det.qam);
    if det.iterations == 0 {
        let st = soft_stage(xbar.clone(), det.sigma2, &constellation)?;
        observe(0, &st);
        return Ok(st);
    }
    let mut prev = xbar.clone();
    let mut state = None;
    for k in 1..=det.iterations {
        let zbar = xbar - interference(&c_d.entries, &prev);
        let st = soft_stage(zbar, det.sigma2, &constellation)?;
        observe(k, &st);
        prev = st.xhat(&constellation);
        state = Some(st);
    }
    Ok(state.expect("at least one iteration"))
}

/// Outcome of sequential redetection.
#[derive(Debug, Clone, PartialEq)]
pub struct Redetection {
    pub decisions: Vec<usize>,
    /// `y - H_eff x̂` for the final decisions.
    pub residual: CVec,
    /// Indices visited, in processing order.
    pub visited: Vec<usize>,
}

/// Revisits the `size` highest-variance symbols (ties to the lower index) in
/// descending-variance order. Each one is set to the alphabet point that
/// minimises `‖y - H_eff x̂‖²`, using the rank-one residual update
/// `r' = r - h_n (X - x̂_n)`; candidates are scanned in descending posterior
/// order and only a strict improvement replaces the incumbent.
pub fn redetect(
    decisions: &[usize],
    var: &[f64],
    post: &DMatrix<f64>,
    y: &CVec,
    h_eff: &CMat,
    size: usize,
    constellation: &Constellation,
) -> Result<Redetection> {
    let n = decisions.len();
    if var.len() != n || y.len() != n || h_eff.shape() != (n, n) || post.nrows() != n {
        return Err(dim("redetection inputs disagree on N"));
    }
    if size > n {
        return Err(param(format!("redetection size {size} exceeds N = {n}")));
    }
    let mut xhat = decisions.to_vec();
    let x_vec = CVec::from_iterator(n, xhat.iter().map(|&i| constellation.point(i)));
    let mut residual = y - h_eff * x_vec;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    order.truncate(size);

    let m = constellation.len();
    let mut cand: Vec<usize> = Vec::with_capacity(m);
    for &nu in &order {
        let col = h_eff.column(nu);
        let current = constellation.point(xhat[nu]);
        cand.clear();
        cand.extend(0..m);
        cand.sort_by(|&a, &b| post[(nu, b)].total_cmp(&post[(nu, a)]).then(a.cmp(&b)));
        let mut best = (xhat[nu], residual.norm_squared());
        for &c in &cand {
            if c == xhat[nu] {
                continue;
            }
            let delta = constellation.point(c) - current;
            let cost: f64 = residual.iter().zip(col.iter()).map(|(r, h)| (r - h * delta).norm_sqr()).sum();
            if cost < best.1 {
                best = (c, cost);
            }
        }
        if best.0 != xhat[nu] {
            let delta = constellation.point(best.0) - current;
            for (r, h) in residual.iter_mut().zip(col.iter()) {
                *r -= h * delta;
            }
            xhat[nu] = best.0;
        }
    }
    Ok(Redetection { decisions: xhat, residual, visited: order })
}

/// Soft detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftIdOutput {
    pub decisions: Vec<usize>,
    pub symbols: CVec,
    /// State of the final cancellation iteration, before redetection.
    pub state: SoftState,
}

/// Soft iterative detection with pruned cancellation and redetection.
pub fn soft_id(
    xbar: &CVec,
    y: &CVec,
    h_eff: &CMat,
    c_d: &CorrelationMatrix,
    det: &DetectorConfig,
) -> Result<SoftIdOutput> {
    let state = soft_iterate(xbar, c_d, det, |_, _| {})?;
    let constellation = Constellation::new(det.qam);
    let decisions = if det.redetect == 0 {
        state.decisions.clone()
    } else {
        redetect(&state.decisions, &state.var, &state.post, y, h_eff, det.redetect, &constellation)?.decisions
    };
    let symbols = CVec::from_iterator(decisions.len(), decisions.iter().map(|&i| constellation.point(i)));
    Ok(SoftIdOutput { decisions, symbols, state })
}

/// Hard-decision iterative cancellation: `x̂⁰ = slice(x̄)`,
/// `x̂ᵏ = slice(x̄ - (C - I)x̂ᵏ⁻¹)`. Returns alphabet indices.
pub fn hard_id(xbar: &CVec, c: &CMat, iterations: usize, constellation: &Constellation) -> Result<Vec<usize>> {
    let n = xbar.len();
    if c.shape() != (n, n) {
        return Err(dim("correlation matrix does not match the symbol vector"));
    }
    if !all_finite(xbar.iter()) {
        return Err(Error::Numerical("non-finite MMSE output".into()));
    }
    let mut idx: Vec<usize> = xbar.iter().map(|&z| constellation.slice_index(z)).collect();
    for _ in 0..iterations {
        let prev = CVec::from_iterator(n, idx.iter().map(|&i| constellation.point(i)));
        let z = xbar - interference(c, &prev);
        idx = z.iter().map(|&v| constellation.slice_index(v)).collect();
    }
    Ok(idx)
}
