//! nAFDM modulation and demodulation.
//!
//! A frame of `N` QAM symbols is spread over `N` chirp subcarriers whose
//! spacing is compressed by `alpha = N / N'`. Two equivalent generators are
//! provided: the direct sum and a fast path that zero-pads to `N'`, runs a
//! length-`N'` orthogonal chirp transform and keeps the first `N` samples.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::afm::{self, cis_turns, CMat, CVec, Direction};
use crate::error::{dim, param, Error, Result};
use crate::qam::{Constellation, QamOrder};

/// Compression factor held as a reduced fraction `num / den` with `0 < num <= den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alpha {
    num: u32,
    den: u32,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Alpha {
    pub const ONE: Alpha = Alpha { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 || num > den {
            return Err(param(format!("compression factor {num}/{den} outside (0, 1]")));
        }
        let g = gcd(num as u64, den as u64) as u32;
        Ok(Self { num: num / g, den: den / g })
    }

    /// `alpha = n / nprime`, the ratio of subcarriers to transform length.
    pub fn from_lengths(n: usize, nprime: usize) -> Result<Self> {
        if n == 0 || nprime < n {
            return Err(param(format!("need 1 <= N <= N', got N={n}, N'={nprime}")));
        }
        let (n, nprime) = (u32::try_from(n).map_err(|_| param("N too large"))?, u32::try_from(nprime).map_err(|_| param("N' too large"))?);
        Self::new(n, nprime)
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }

    /// `N' = N / alpha` when it is an integer.
    pub fn extended_length(self, n: usize) -> Option<usize> {
        let prod = n as u64 * self.den as u64;
        (prod % self.num as u64 == 0).then(|| (prod / self.num as u64) as usize)
    }

    /// Whether `alpha * k` is an integer.
    pub fn times_is_integer(self, k: i64) -> bool {
        (k.unsigned_abs() * self.num as u64) % self.den as u64 == 0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Waveform families reachable from one `(alpha, c1, c2)` parameterisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ofdm,
    Ocdm,
    Afdm,
    Sefdm,
    Nafdm,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Ofdm => "ofdm",
            Preset::Ocdm => "ocdm",
            Preset::Afdm => "afdm",
            Preset::Sefdm => "sefdm",
            Preset::Nafdm => "nafdm",
            Preset::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ofdm" => Ok(Preset::Ofdm),
            "ocdm" => Ok(Preset::Ocdm),
            "afdm" => Ok(Preset::Afdm),
            "sefdm" => Ok(Preset::Sefdm),
            "nafdm" => Ok(Preset::Nafdm),
            "custom" => Ok(Preset::Custom),
            other => Err(param(format!("unknown waveform preset '{other}'"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// AFDM chirp rate `c1 = (2(nu_max + xi) + 1) / 2N`.
pub fn afdm_chirp(n: usize, nu_max: f64, xi: f64) -> f64 {
    (2.0 * (nu_max + xi) + 1.0) / (2.0 * n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    pub n: usize,
    pub alpha: Alpha,
    pub c1: f64,
    pub c2: f64,
    pub cp_len: usize,
    pub qam: QamOrder,
    pub preset: Preset,
}

impl WaveformConfig {
    /// A custom configuration; call [`validate`](Self::validate) or use it
    /// through an operation to check it.
    pub fn custom(n: usize, alpha: Alpha, c1: f64, c2: f64) -> Self {
        Self { n, alpha, c1, c2, cp_len: 0, qam: QamOrder::Qam4, preset: Preset::Custom }
    }

    /// Instantiates a waveform family. `nu_max` and `xi` only matter for the
    /// chirped AFDM/nAFDM kinds, where `c2` defaults to `c1`.
    pub fn preset(kind: Preset, n: usize, alpha: Alpha, nu_max: f64, xi: f64) -> Result<Self> {
        let (c1, c2) = match kind {
            Preset::Ofdm | Preset::Sefdm => (0.0, 0.0),
            Preset::Ocdm => {
                let c = 1.0 / (2.0 * n as f64);
                (c, c)
            }
            Preset::Afdm | Preset::Nafdm => {
                let c = afdm_chirp(n, nu_max, xi);
                (c, c)
            }
            Preset::Custom => return Err(param("custom waveforms have no preset chirp rates")),
        };
        let cfg = Self { n, alpha, c1, c2, cp_len: 0, qam: QamOrder::Qam4, preset: kind };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cp_len(mut self, cp_len: usize) -> Self {
        self.cp_len = cp_len;
        self
    }

    pub fn with_qam(mut self, qam: QamOrder) -> Self {
        self.qam = qam;
        self
    }

    pub fn with_c2(mut self, c2: f64) -> Self {
        self.c2 = c2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(dim("N must be at least 1"));
        }
        if !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(param("chirp rates must be finite"));
        }
        if self.cp_len > self.n {
            return Err(param(format!("cp_len {} exceeds N = {}", self.cp_len, self.n)));
        }
        let orth = self.alpha.is_one();
        let zero = self.c1 == 0.0 && self.c2 == 0.0;
        let ok = match self.preset {
            Preset::Ofdm => orth && zero,
            Preset::Ocdm => {
                let c = 1.0 / (2.0 * self.n as f64);
                orth && (self.c1 - c).abs() < 1e-15 && (self.c2 - c).abs() < 1e-15
            }
            Preset::Afdm => orth,
            Preset::Sefdm => !orth && zero,
            Preset::Nafdm => !orth,
            Preset::Custom => true,
        };
        if !ok {
            return Err(param(format!(
                "{} is inconsistent with alpha={}, c1={}, c2={}",
                self.preset, self.alpha, self.c1, self.c2
            )));
        }
        Ok(())
    }

    pub fn nprime(&self) -> Option<usize> {
        self.alpha.extended_length(self.n)
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.qam)
    }

    /// `A_α = Λ_{c2} F_α Λ_{c1}`.
    pub fn modulation_matrix(&self) -> Result<CMat> {
        self.validate()?;
        let n = self.n;
        let l1 = afm::chirp_phases(self.c1, n);
        let l2 = afm::chirp_phases(self.c2, n);
        let scale = 1.0 / (n as f64).sqrt();
        Ok(CMat::from_fn(n, n, |m, k| l2[m] * self.dft_kernel(m, k).conj() * l1[k] * scale))
    }

    /// `e^{+i2π·alpha·m·k/N}`, evaluated on the exact rational phase.
    #[inline]
    fn dft_kernel(&self, m: usize, k: usize) -> Complex64 {
        let period = self.alpha.den as u64 * self.n as u64;
        let turns = (self.alpha.num as u64 * m as u64 * k as u64) % period;
        cis_turns(turns as f64 / period as f64)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(dim(format!("frame has {len} entries, expected N = {}", self.n)));
        }
        Ok(())
    }
}

/// Direct evaluation of the chirp-subcarrier sum, `s = A^H x`.
pub fn modulate_direct(x: &[Complex64], cfg: &WaveformConfig) -> Result<CVec> {
    cfg.validate()?;
    cfg.check_len(x.len())?;
    let n = cfg.n;
    let pre: Vec<Complex64> =
        x.iter().enumerate().map(|(m, &v)| v * cis_turns(cfg.c2 * (m * m) as f64)).collect();
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CVec::from_fn(n, |t, _| {
        let sum: Complex64 = pre.iter().enumerate().map(|(m, v)| v * cfg.dft_kernel(t, m)).sum();
        sum * cis_turns(cfg.c1 * (t * t) as f64) * scale
    }))
}

/// Evaluates the modulation sum at any integer time index, including
/// indices outside `0..N`.
pub fn modulate_sample(x: &[Complex64], cfg: &WaveformConfig, t: i64) -> Result<Complex64> {
    cfg.check_len(x.len())?;
    let n = cfg.n as f64;
    let alpha = cfg.alpha.value();
    let tf = t as f64;
    let sum: Complex64 = x
        .iter()
        .enumerate()
        .map(|(m, &v)| {
            let mf = m as f64;
            v * cis_turns(cfg.c2 * mf * mf + alpha * tf * mf / n)
        })
        .sum();
    Ok(sum * cis_turns(cfg.c1 * tf * tf) / n.sqrt())
}

/// `max_n |s[n+N]·e^{-i2πc1(N²+2Nn)} - s[n]|`: zero for orthogonal AFDM,
/// whose signal is chirp-periodic, and generally non-zero once `alpha < 1`.
pub fn chirp_periodicity_error(x: &[Complex64], cfg: &WaveformConfig) -> Result<f64> {
    let n = cfg.n as i64;
    let mut worst: f64 = 0.0;
    for t in 0..n {
        let base = modulate_sample(x, cfg, t)?;
        let ext = modulate_sample(x, cfg, t + n)?;
        let nf = n as f64;
        let tf = t as f64;
        let rot = cis_turns(-cfg.c1 * (nf * nf + 2.0 * nf * tf));
        worst = worst.max((ext * rot - base).norm());
    }
    Ok(worst)
}

/// Zero-pad to `N'`, chirp-IDFT of length `N'`, truncate to `N`, scale by `1/√alpha`.
pub fn modulate_fast(x: &[Complex64], cfg: &WaveformConfig) -> Result<CVec> {
    cfg.validate()?;
    cfg.check_len(x.len())?;
    let n = cfg.n;
    let nprime = cfg.nprime().ok_or(Error::FastPathUnavailable {
        n,
        num: cfg.alpha.num,
        den: cfg.alpha.den,
    })?;
    let mut buf = vec![Complex64::new(0.0, 0.0); nprime];
    for (m, (slot, &v)) in buf.iter_mut().zip(x).enumerate() {
        *slot = v * cis_turns(cfg.c2 * (m * m) as f64);
    }
    afm::transform_in_place(&mut buf, Direction::Inverse)?;
    let gain = (nprime as f64 / n as f64).sqrt();
    Ok(CVec::from_fn(n, |t, _| buf[t] * cis_turns(cfg.c1 * (t * t) as f64) * gain))
}

/// Fast path when `N'` is integral, direct sum otherwise.
pub fn modulate(x: &[Complex64], cfg: &WaveformConfig) -> Result<CVec> {
    match modulate_fast(x, cfg) {
        Err(Error::FastPathUnavailable { .. }) => modulate_direct(x, cfg),
        other => other,
    }
}

/// Prepends the last `cp_len` samples.
pub fn add_cp(s: &[Complex64], cfg: &WaveformConfig) -> Result<Vec<Complex64>> {
    cfg.check_len(s.len())?;
    if cfg.cp_len > cfg.n {
        return Err(param(format!("cp_len {} exceeds N = {}", cfg.cp_len, cfg.n)));
    }
    let mut out = Vec::with_capacity(cfg.n + cfg.cp_len);
    out.extend_from_slice(&s[cfg.n - cfg.cp_len..]);
    out.extend_from_slice(s);
    Ok(out)
}

pub fn remove_cp(r: &[Complex64], cfg: &WaveformConfig) -> Result<CVec> {
    if r.len() != cfg.n + cfg.cp_len {
        return Err(dim(format!("received {} samples, expected {}", r.len(), cfg.n + cfg.cp_len)));
    }
    Ok(CVec::from_column_slice(&r[cfg.cp_len..]))
}

/// `y = A_α r` by direct summation.
pub fn demodulate(r: &[Complex64], cfg: &WaveformConfig) -> Result<CVec> {
    cfg.validate()?;
    cfg.check_len(r.len())?;
    let n = cfg.n;
    let pre: Vec<Complex64> =
        r.iter().enumerate().map(|(t, &v)| v * cis_turns(-cfg.c1 * (t * t) as f64)).collect();
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CVec::from_fn(n, |m, _| {
        let sum: Complex64 = pre.iter().enumerate().map(|(t, v)| v * cfg.dft_kernel(m, t).conj()).sum();
        sum * cis_turns(-cfg.c2 * (m * m) as f64) * scale
    }))
}

/// Receiver mirror of [`modulate_fast`]: de-chirp, zero-pad to `N'`, length-`N'`
/// DFT, keep the first `N` bins, re-chirp.
pub fn demodulate_fast(r: &[Complex64], cfg: &WaveformConfig) -> Result<CVec> {
    cfg.validate()?;
    cfg.check_len(r.len())?;
    let n = cfg.n;
    let nprime = cfg.nprime().ok_or(Error::FastPathUnavailable {
        n,
        num: cfg.alpha.num,
        den: cfg.alpha.den,
    })?;
    let mut buf = vec![Complex64::new(0.0, 0.0); nprime];
    for (t, (slot, &v)) in buf.iter_mut().zip(r).enumerate() {
        *slot = v * cis_turns(-cfg.c1 * (t * t) as f64);
    }
    afm::transform_in_place(&mut buf, Direction::Forward)?;
    let gain = (nprime as f64 / n as f64).sqrt();
    Ok(CVec::from_fn(n, |m, _| buf[m] * cis_turns(-cfg.c2 * (m * m) as f64) * gain))
}

/// A validated configuration with its modulation matrix cached, for
/// repeated per-frame use.
#[derive(Debug, Clone)]
pub struct Modem {
    cfg: WaveformConfig,
    matrix: CMat,
    constellation: Constellation,
}

impl Modem {
    pub fn new(cfg: WaveformConfig) -> Result<Self> {
        let matrix = cfg.modulation_matrix()?;
        Ok(Self { cfg, matrix, constellation: cfg.constellation() })
    }

    pub fn config(&self) -> &WaveformConfig {
        &self.cfg
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn modulate(&self, x: &[Complex64]) -> Result<CVec> {
        match modulate_fast(x, &self.cfg) {
            Err(Error::FastPathUnavailable { .. }) => {
                self.cfg.check_len(x.len())?;
                Ok(self.matrix.ad_mul(&CVec::from_column_slice(x)))
            }
            other => other,
        }
    }

    pub fn demodulate(&self, r: &[Complex64]) -> Result<CVec> {
        self.cfg.check_len(r.len())?;
        Ok(&self.matrix * CVec::from_column_slice(r))
    }
}
