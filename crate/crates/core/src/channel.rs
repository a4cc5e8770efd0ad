//! Doubly selective channels: Jakes Doppler sampling, the exact time-domain
//! matrix, sample-level propagation and the affine-domain subchannels.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::afm::{cis_turns, CMat, CVec};
use crate::error::{dim, param, Error, Result};
use crate::modem::WaveformConfig;

/// One propagation path: complex gain, integer delay in samples and Doppler
/// normalised to the subcarrier spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: Complex64,
    pub delay: usize,
    pub doppler: f64,
}

impl Path {
    pub fn new(gain: Complex64, delay: usize, doppler: f64) -> Self {
        Self { gain, delay, doppler }
    }

    /// Integer part `a` of `nu = a + beta`, `beta ∈ (-½, ½]`.
    pub fn integer_doppler(&self) -> i64 {
        (self.doppler - 0.5).ceil() as i64
    }

    pub fn fractional_doppler(&self) -> f64 {
        self.doppler - self.integer_doppler() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub paths: Vec<Path>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(param("a channel needs at least one path"));
        }
        if paths.iter().any(|p| !p.doppler.is_finite() || !p.gain.re.is_finite() || !p.gain.im.is_finite()) {
            return Err(param("path parameters must be finite"));
        }
        Ok(Self { paths })
    }

    /// Single-tap, static, unit-gain channel.
    pub fn identity() -> Self {
        Self { paths: vec![Path::new(Complex64::new(1.0, 0.0), 0, 0.0)] }
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    pub fn max_doppler(&self) -> f64 {
        self.paths.iter().map(|p| p.doppler.abs()).fold(0.0, f64::max)
    }
}

/// Distribution of the per-path gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainModel {
    /// `h ~ CN(0, 1/P)`.
    #[default]
    Rayleigh,
    /// `|h|² = 1/P` with a uniform phase.
    EqualPower,
}

/// Draws a `P`-path channel. Delays sit on the fixed grid
/// `l_i = min(i, l_max)`; gains follow `gain_model`; Dopplers follow Jakes,
/// `nu_i = nu_max·cos(theta_i)` with `theta_i ~ U[-π, π]`.
pub fn sample_channel<R: Rng + ?Sized>(
    paths: usize,
    l_max: usize,
    nu_max: f64,
    gain_model: GainModel,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if paths == 0 {
        return Err(param("a channel needs at least one path"));
    }
    if !(nu_max.is_finite() && nu_max >= 0.0) {
        return Err(param(format!("nu_max = {nu_max} must be finite and non-negative")));
    }
    let p = paths as f64;
    let out = (0..paths)
        .map(|i| {
            let gain = match gain_model {
                GainModel::Rayleigh => {
                    let sd = (0.5 / p).sqrt();
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re * sd, im * sd)
                }
                GainModel::EqualPower => {
                    let ph: f64 = rng.random_range(-0.5..0.5);
                    cis_turns(ph) / p.sqrt()
                }
            };
            let theta: f64 = rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI);
            Path::new(gain, i.min(l_max), nu_max * theta.cos())
        })
        .collect();
    Ok(ChannelRealization { paths: out })
}

/// `H_T = Σ_i h_i Δ_{f_i} Π^{l_i}` with `Δ_f = diag(e^{-i2πfn})`, `f = nu/N`.
pub fn time_channel_matrix(ch: &ChannelRealization, n: usize) -> Result<CMat> {
    if n <= ch.max_delay() {
        return Err(dim(format!("N = {n} must exceed the maximum delay {}", ch.max_delay())));
    }
    let mut h = CMat::zeros(n, n);
    for path in &ch.paths {
        let f = path.doppler / n as f64;
        for row in 0..n {
            let col = (row + n - path.delay) % n;
            h[(row, col)] += path.gain * cis_turns(-f * row as f64);
        }
    }
    Ok(h)
}

/// Sample-level propagation of a CP-prefixed frame followed by CP removal.
/// Doppler phase is referenced to the first payload sample.
pub fn propagate(s_cp: &[Complex64], ch: &ChannelRealization, cfg: &WaveformConfig) -> Result<CVec> {
    let n = cfg.n;
    if cfg.cp_len < ch.max_delay() {
        return Err(Error::InsufficientCp { cp_len: cfg.cp_len, l_max: ch.max_delay() });
    }
    if s_cp.len() != n + cfg.cp_len {
        return Err(dim(format!("frame has {} samples, expected {}", s_cp.len(), n + cfg.cp_len)));
    }
    let mut r = CVec::zeros(n);
    for path in &ch.paths {
        let f = path.doppler / n as f64;
        for (t, slot) in r.iter_mut().enumerate() {
            *slot += path.gain * cis_turns(-f * t as f64) * s_cp[cfg.cp_len + t - path.delay];
        }
    }
    Ok(r)
}

/// Adds `CN(0, sigma2)` noise. Draws are unit normals scaled by `√(sigma2/2)`,
/// so the same RNG state yields proportional noise at every SNR.
pub fn add_noise<R: Rng + ?Sized>(r: &mut [Complex64], sigma2: f64, rng: &mut R) {
    let sd = (sigma2 / 2.0).sqrt();
    for v in r {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re * sd, im * sd);
    }
}

/// `r = H_T s + w_T` on the post-CP samples of `s_cp`.
pub fn apply_channel<R: Rng + ?Sized>(
    s_cp: &[Complex64],
    ch: &ChannelRealization,
    sigma2: f64,
    cfg: &WaveformConfig,
    rng: &mut R,
) -> Result<CVec> {
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(param(format!("noise variance {sigma2} must be finite and non-negative")));
    }
    let mut r = propagate(s_cp, ch, cfg)?;
    if sigma2 > 0.0 {
        add_noise(r.as_mut_slice(), sigma2, rng);
    }
    Ok(r)
}

/// `H_eff = A H_T A^H`.
pub fn effective_channel(ch: &ChannelRealization, cfg: &WaveformConfig) -> Result<CMat> {
    let a = cfg.modulation_matrix()?;
    let ht = time_channel_matrix(ch, cfg.n)?;
    Ok(effective_from_parts(&a, &ht))
}

pub fn effective_from_parts(a: &CMat, ht: &CMat) -> CMat {
    a * ht * a.adjoint()
}

fn frac_distance(v: f64) -> f64 {
    (v - v.round()).abs()
}

/// True when `Λ_{c1}` commutes with the cyclic wrap of `Π`, i.e. `2N·c1`
/// and `N²·c1` are integers. The textbook AFDM chirp rates satisfy this.
pub fn chirp_wrap_is_trivial(cfg: &WaveformConfig) -> bool {
    let n = cfg.n as f64;
    frac_distance(2.0 * n * cfg.c1) < 1e-12 && frac_distance(n * n * cfg.c1) < 1e-12
}

const SINGULAR_TOL: f64 = 1e-9;

/// `Σ_{n=from}^{to-1} g^n`.
fn direct_sum(g: Complex64, from: usize, to: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut pw = g.powu(from as u32);
    for _ in from..to {
        acc += pw;
        pw *= g;
    }
    acc
}

/// Phase-only factor `η(α, l, p, q)`.
pub fn subchannel_phase(delay: usize, cfg: &WaveformConfig, p: usize, q: usize) -> Complex64 {
    let (l, pf, qf, n) = (delay as f64, p as f64, q as f64, cfg.n as f64);
    let alpha = cfg.alpha.value();
    cis_turns(cfg.c1 * l * l - alpha * qf * l / n + cfg.c2 * (qf * qf - pf * pf))
}

/// Amplitude-shaping factor `ζ(α, l, nu, p, q)`.
pub fn subchannel_spread(delay: usize, doppler: f64, cfg: &WaveformConfig, p: usize, q: usize) -> Complex64 {
    let n = cfg.n;
    let nf = n as f64;
    let alpha = cfg.alpha.value();
    let l = delay;
    let phi = alpha * (p as f64 - q as f64) + doppler + 2.0 * nf * cfg.c1 * l as f64;
    let g = cis_turns(-phi / nf);
    let wrap = cis_turns(alpha * q as f64);
    let one = Complex64::new(1.0, 0.0);

    if !chirp_wrap_is_trivial(cfg) {
        // Wrapped samples pick up e^{i2πc1(N² + 2N(n-l))} relative to the unwrapped chirp.
        let kappa = cis_turns(cfg.c1 * (nf * nf - 2.0 * nf * l as f64));
        let g_wrap = g * cis_turns(2.0 * nf * cfg.c1);
        return wrap * kappa * direct_sum(g_wrap, 0, l) + direct_sum(g, l, n);
    }

    let denom = g - one;
    if denom.norm() < SINGULAR_TOL {
        return (wrap - one) * direct_sum(g, 0, l) + direct_sum(g, 0, n);
    }
    let gl = cis_turns(-(l as f64) * phi / nf);
    let gn = cis_turns(-phi);
    ((wrap - one) * (gl - one) + (gn - one)) / denom
}

/// Closed-form entry `H_i[p, q] = η·ζ / N` of the unit-gain subchannel
/// `A Δ_{f_i} Π^{l_i} A^H`.
pub fn subchannel_closed_form(delay: usize, doppler: f64, cfg: &WaveformConfig, p: usize, q: usize) -> Complex64 {
    subchannel_phase(delay, cfg, p, q) * subchannel_spread(delay, doppler, cfg, p, q) / cfg.n as f64
}

/// Full closed-form subchannel matrix for one path (gain excluded).
pub fn subchannel_matrix(delay: usize, doppler: f64, cfg: &WaveformConfig) -> Result<CMat> {
    cfg.validate()?;
    if delay >= cfg.n {
        return Err(dim(format!("delay {delay} must be below N = {}", cfg.n)));
    }
    Ok(CMat::from_fn(cfg.n, cfg.n, |p, q| subchannel_closed_form(delay, doppler, cfg, p, q)))
}

/// `Σ_i h_i H_i` from the closed form.
pub fn effective_channel_closed_form(ch: &ChannelRealization, cfg: &WaveformConfig) -> Result<CMat> {
    let mut h = CMat::zeros(cfg.n, cfg.n);
    for path in &ch.paths {
        h += subchannel_matrix(path.delay, path.doppler, cfg)? * path.gain;
    }
    Ok(h)
}

/// Where a subchannel row concentrates its energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakColumn {
    /// Ideal (generally fractional) peak position `q*`.
    pub q_star: f64,
    /// Nearest integer column to `q*`, or `None` when it falls outside `0..N`.
    pub predicted: Option<usize>,
    /// Observed `argmax_q |H_i[p, q]|`.
    pub argmax: usize,
}

impl PeakColumn {
    /// True when the observed peak is the integer nearest to `q*`. For
    /// `alpha < 1` the row is not exactly symmetric about `q*`, so when `q*`
    /// sits within 0.1 of a midpoint either bracketing integer is accepted.
    pub fn agrees(&self) -> bool {
        let Some(q) = self.predicted else { return true };
        if q == self.argmax {
            return true;
        }
        let frac = self.q_star - self.q_star.floor();
        (frac - 0.5).abs() < 0.1 && (self.argmax as f64 - self.q_star).abs() < 1.0
    }
}

/// Predicted and observed peak column of row `p` of the path's subchannel.
pub fn peak_column(delay: usize, doppler: f64, cfg: &WaveformConfig, p: usize) -> Result<PeakColumn> {
    if p >= cfg.n {
        return Err(dim(format!("row {p} out of range for N = {}", cfg.n)));
    }
    let n = cfg.n as f64;
    let alpha = cfg.alpha.value();
    let period = n / alpha;
    let ind = ((doppler + 2.0 * n * cfg.c1 * delay as f64) / alpha).rem_euclid(period);
    let q_star = (p as f64 + ind).rem_euclid(period);
    let rounded = q_star.round();
    let predicted = if rounded <= n - 1.0 {
        Some(rounded as usize)
    } else if period - q_star < 0.5 && cfg.alpha.is_one() {
        Some(0)
    } else {
        None
    };
    let argmax = (0..cfg.n)
        .map(|q| (q, subchannel_spread(delay, doppler, cfg, p, q).norm()))
        .fold((0, f64::NEG_INFINITY), |best, (q, v)| if v > best.1 { (q, v) } else { best })
        .0;
    Ok(PeakColumn { q_star, predicted, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afm::{max_abs_diff, max_abs_diff_vec};
    use crate::modem::{add_cp, modulate, Alpha, Preset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg_fig2(alpha: Alpha) -> WaveformConfig {
        let c = 3.0 / 32.0;
        WaveformConfig { preset: Preset::Custom, ..WaveformConfig::custom(16, alpha, c, c) }
    }

    fn random_frame(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn doppler_split() {
        for (nu, a, b) in [(1.0, 1, 0.0), (0.4, 0, 0.4), (0.5, 0, 0.5), (-0.5, -1, 0.5), (-1.7, -2, 0.3), (2.0, 2, 0.0)] {
            let p = Path::new(Complex64::new(1.0, 0.0), 0, nu);
            assert_eq!(p.integer_doppler(), a, "nu={nu}");
            assert!((p.fractional_doppler() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn static_channel_has_zero_doppler() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = sample_channel(4, 3, 0.0, GainModel::Rayleigh, &mut rng).unwrap();
        assert!(ch.paths.iter().all(|p| p.doppler == 0.0));
    }

    #[test]
    fn delay_grid_covers_all_delays() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = sample_channel(4, 3, 2.0, GainModel::Rayleigh, &mut rng).unwrap();
        let d: Vec<usize> = ch.paths.iter().map(|p| p.delay).collect();
        assert_eq!(d, vec![0, 1, 2, 3]);
        let ch = sample_channel(6, 2, 2.0, GainModel::Rayleigh, &mut rng).unwrap();
        assert_eq!(ch.max_delay(), 2);
    }

    #[test]
    fn gain_and_doppler_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p, draws) = (4, 100_000 / 4);
        let mut power = vec![0.0; p];
        for _ in 0..draws {
            let ch = sample_channel(p, 3, 2.0, GainModel::Rayleigh, &mut rng).unwrap();
            for (acc, path) in power.iter_mut().zip(&ch.paths) {
                *acc += path.gain.norm_sqr();
                assert!(path.doppler.abs() <= 2.0);
            }
        }
        let total: f64 = power.iter().sum::<f64>() / (draws * p) as f64;
        assert!((total - 0.25).abs() < 0.03 * 0.25, "E|h|² = {total}");

        let ch = sample_channel(4, 3, 1.0, GainModel::EqualPower, &mut rng).unwrap();
        assert!(ch.paths.iter().all(|q| (q.gain.norm_sqr() - 0.25).abs() < 1e-12));
    }

    #[test]
    fn time_matrix_basic_shapes() {
        let id = time_channel_matrix(&ChannelRealization::identity(), 5).unwrap();
        assert_eq!(id, CMat::identity(5, 5));

        let shift = ChannelRealization::new(vec![Path::new(Complex64::new(1.0, 0.0), 1, 0.0)]).unwrap();
        let pi = time_channel_matrix(&shift, 4).unwrap();
        // forward cyclic shift: first row has its one in the last column
        assert_eq!(pi[(0, 3)], Complex64::new(1.0, 0.0));
        for r in 1..4 {
            assert_eq!(pi[(r, r - 1)], Complex64::new(1.0, 0.0));
        }
        assert_eq!(pi.iter().filter(|v| v.norm() > 0.0).count(), 4);

        assert!(time_channel_matrix(&shift, 1).is_err());
    }

    #[test]
    fn time_matrix_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 8;
        let ch = sample_channel(2, 3, 2.0, GainModel::Rayleigh, &mut rng).unwrap();
        let h = time_channel_matrix(&ch, n).unwrap();
        for row in 0..n {
            for col in 0..n {
                let mut want = Complex64::new(0.0, 0.0);
                for p in &ch.paths {
                    if col == (row + n - p.delay) % n {
                        let ang = -2.0 * std::f64::consts::PI * p.doppler / n as f64 * row as f64;
                        want += p.gain * Complex64::new(ang.cos(), ang.sin());
                    }
                }
                assert!((h[(row, col)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_path_equals_matrix_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = WaveformConfig::preset(Preset::Nafdm, 16, Alpha::new(4, 5).unwrap(), 2.0, 1.0)
            .unwrap()
            .with_cp_len(4);
        for _ in 0..20 {
            let ch = sample_channel(4, 3, 2.0, GainModel::Rayleigh, &mut rng).unwrap();
            let s = modulate(&random_frame(&mut rng, 16), &cfg).unwrap();
            let r = apply_channel(&add_cp(s.as_slice(), &cfg).unwrap(), &ch, 0.0, &cfg, &mut rng).unwrap();
            let want = time_channel_matrix(&ch, 16).unwrap() * &s;
            assert!(max_abs_diff_vec(r.as_slice(), want.as_slice()) < 1e-10);
        }
    }

    #[test]
    fn identity_channel_is_transparent_and_cp_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = WaveformConfig::custom(8, Alpha::ONE, 0.0, 0.0).with_cp_len(2);
        let s = random_frame(&mut rng, 8);
        let r = apply_channel(&add_cp(&s, &cfg).unwrap(), &ChannelRealization::identity(), 0.0, &cfg, &mut rng).unwrap();
        assert_eq!(r.as_slice(), &s[..]);

        let deep = ChannelRealization::new(vec![Path::new(Complex64::new(1.0, 0.0), 3, 0.0)]).unwrap();
        let err = apply_channel(&add_cp(&s, &cfg).unwrap(), &deep, 0.0, &cfg, &mut rng).unwrap_err();
        assert_eq!(err, Error::InsufficientCp { cp_len: 2, l_max: 3 });
    }

    #[test]
    fn noise_power_is_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = WaveformConfig::custom(100, Alpha::ONE, 0.0, 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); 100];
        let mut acc = 0.0;
        for _ in 0..1000 {
            let r = apply_channel(&zero, &ChannelRealization::identity(), 1.0, &cfg, &mut rng).unwrap();
            acc += r.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        let p = acc / 100_000.0;
        assert!((p - 1.0).abs() < 0.03, "noise power {p}");
    }

    #[test]
    fn effective_channel_special_cases() {
        let afdm = WaveformConfig::preset(Preset::Afdm, 16, Alpha::ONE, 1.0, 1.0).unwrap();
        let h = effective_channel(&ChannelRealization::identity(), &afdm).unwrap();
        assert!(max_abs_diff(&h, &CMat::identity(16, 16)) < 1e-12);

        let cfg = WaveformConfig::preset(Preset::Nafdm, 16, Alpha::new(9, 10).unwrap(), 1.0, 1.0).unwrap();
        let h = effective_channel(&ChannelRealization::identity(), &cfg).unwrap();
        let a = cfg.modulation_matrix().unwrap();
        assert!(max_abs_diff(&h, &(&a * a.adjoint())) < 1e-12);
    }

    #[test]
    fn closed_form_matches_bruteforce_fig2_grid() {
        for alpha in [Alpha::new(4, 5).unwrap(), Alpha::new(9, 10).unwrap(), Alpha::ONE] {
            let cfg = cfg_fig2(alpha);
            for nu in [0.0, 0.4, 1.0] {
                for l in 0..4 {
                    let ch = ChannelRealization::new(vec![Path::new(Complex64::new(1.0, 0.0), l, nu)]).unwrap();
                    let brute = effective_channel(&ch, &cfg).unwrap();
                    let closed = subchannel_matrix(l, nu, &cfg).unwrap();
                    let err = max_abs_diff(&brute, &closed);
                    assert!(err < 1e-9, "alpha={alpha} nu={nu} l={l}: {err}");
                }
            }
        }
    }

    #[test]
    fn closed_form_handles_non_commuting_chirps() {
        // 2N·c1 not integral: the wrapped-sample correction is needed.
        let cfg = WaveformConfig::custom(12, Alpha::new(5, 6).unwrap(), 0.0137, 0.21);
        assert!(!chirp_wrap_is_trivial(&cfg));
        for (l, nu) in [(0, 0.3), (2, -1.2), (3, 0.9)] {
            let ch = ChannelRealization::new(vec![Path::new(Complex64::new(1.0, 0.0), l, nu)]).unwrap();
            let err = max_abs_diff(&effective_channel(&ch, &cfg).unwrap(), &subchannel_matrix(l, nu, &cfg).unwrap());
            assert!(err < 1e-9, "l={l}: {err}");
        }
    }

    #[test]
    fn phase_factor_has_unit_modulus() {
        for alpha in [Alpha::new(4, 5).unwrap(), Alpha::new(9, 10).unwrap(), Alpha::ONE] {
            let cfg = cfg_fig2(alpha);
            for l in 0..4 {
                for p in 0..16 {
                    for q in 0..16 {
                        assert!((subchannel_phase(l, &cfg, p, q).norm() - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn integer_doppler_afdm_has_one_entry_per_row() {
        let cfg = cfg_fig2(Alpha::ONE);
        for l in 0..4 {
            for nu in [0.0, 1.0, -2.0] {
                let h = subchannel_matrix(l, nu, &cfg).unwrap();
                for p in 0..16 {
                    let nz: Vec<usize> = (0..16).filter(|&q| h[(p, q)].norm() > 1e-9).collect();
                    assert_eq!(nz.len(), 1, "l={l} nu={nu} row {p}");
                    let ind = (nu as i64 + 3 * l as i64).rem_euclid(16) as usize;
                    assert_eq!(nz[0], (p + ind) % 16);
                }
            }
        }
    }

    #[test]
    fn peak_column_orthogonal_cases() {
        let cfg = cfg_fig2(Alpha::ONE);
        for p in 0..16 {
            let pk = peak_column(1, 1.0, &cfg, p).unwrap();
            assert_eq!(pk.argmax, (p + 4) % 16);
            assert!(pk.agrees());
            let pk = peak_column(0, 0.0, &cfg, p).unwrap();
            assert_eq!(pk.argmax, p);
        }
    }

    #[test]
    fn peak_column_compressed() {
        let cfg = cfg_fig2(Alpha::new(9, 10).unwrap());
        let mut checked = 0;
        for p in 0..16 {
            let pk = peak_column(1, 1.0, &cfg, p).unwrap();
            if pk.predicted.is_some() {
                checked += 1;
            }
            assert!(pk.agrees(), "row {p}: {pk:?}");
        }
        assert!(checked > 8);
        assert!(peak_column(1, 1.0, &cfg, 16).is_err());
        // q* = 6.44: the two bracketing columns are within 2% of each other
        let pk = peak_column(1, 1.0, &cfg, 2).unwrap();
        assert_eq!((pk.predicted, pk.argmax), (Some(6), 7));
        for (l, nu) in [(0, 0.0), (0, 1.0), (1, 0.0), (2, 0.4)] {
            for p in 0..16 {
                let pk = peak_column(l, nu, &cfg, p).unwrap();
                assert!(pk.predicted.is_none_or(|q| q == pk.argmax), "l={l} nu={nu} row {p}: {pk:?}");
            }
        }
    }

    #[test]
    fn decomposition_over_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [8usize, 16, 32] {
            for (num, den) in [(4, 5), (9, 10), (1, 1)] {
                let alpha = Alpha::new(num, den).unwrap();
                let kind = if alpha.is_one() { Preset::Afdm } else { Preset::Nafdm };
                let cfg = WaveformConfig::preset(kind, n, alpha, 2.0, 1.0).unwrap();
                let a = cfg.modulation_matrix().unwrap();
                for _ in 0..50 {
                    let ch = sample_channel(4, 3.min(n - 1), 2.0, GainModel::Rayleigh, &mut rng).unwrap();
                    let ht = time_channel_matrix(&ch, n).unwrap();
                    let brute = effective_from_parts(&a, &ht);
                    let closed = effective_channel_closed_form(&ch, &cfg).unwrap();
                    assert!(max_abs_diff(&brute, &closed) < 1e-9, "N={n} alpha={alpha}");
                }
            }
        }
    }
}
