//! Monte-Carlo BER/SE harness.
//!
//! A [`SuiteSpec`] holds a base seed and a list of [`RunSpec`]s; every run is
//! swept over its SNR grid and produces one [`SimResult`] per SNR point.
//!
//! Randomness: frame `f` of run `r` draws from a ChaCha8 generator keyed by
//! `mix(base_seed, stream)` on stream `f`, where `stream` defaults to the
//! run's position in the suite. Inside a frame the draw order is fixed (bits,
//! channel, noise), and the noise is unit normals scaled by `σ`, so every SNR
//! point of a run sees the same bits, channels and noise shapes. Frames are
//! simulated in fixed-size batches and merged in frame order, so the output
//! does not depend on the number of worker threads.

mod config;
mod csv;
mod runner;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::channel::GainModel;
use crate::detect::DetectorConfig;
use crate::error::{Error, Result};
use crate::modem::WaveformConfig;

pub use config::{default_suite, emit_default, emit_suite, parse_config, parse_config_file};
pub use csv::{emit_csv, format_decimal, write_csv, CSV_HEADER};
pub use runner::{frame_stream, run_point, run_suite, RunOptions};

/// Receiver used after the time-domain MMSE stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// Slice the MMSE output directly.
    Mmse,
    /// Hard-decision iterative cancellation with the full correlation matrix.
    Id,
    /// Soft iterative detection with pruned ICI and redetection.
    SoftId,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Mmse => "mmse",
            DetectorKind::Id => "id",
            DetectorKind::SoftId => "softid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    /// Number of paths `P`.
    pub paths: usize,
    pub l_max: usize,
    pub nu_max: f64,
    pub gains: GainModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub iterations: usize,
    pub ici_span: usize,
    pub redetect: usize,
}

impl DetectorSpec {
    /// Soft ID with `K = 10`, `D = N - 1` and `|U| = ⌈N/4⌉`.
    pub fn soft_id(n: usize) -> Self {
        let d = DetectorConfig::new(n, 1.0, crate::qam::QamOrder::Qam4);
        Self { kind: DetectorKind::SoftId, iterations: d.iterations, ici_span: d.ici_span, redetect: d.redetect }
    }

    pub fn hard_id(n: usize) -> Self {
        Self { kind: DetectorKind::Id, redetect: 0, ..Self::soft_id(n) }
    }

    pub fn mmse() -> Self {
        Self { kind: DetectorKind::Mmse, iterations: 0, ici_span: 0, redetect: 0 }
    }

    /// `(K, D, U)` as reported in the CSV: zeros for settings the detector
    /// does not use.
    pub fn reported(&self, n: usize) -> (usize, usize, usize) {
        match self.kind {
            DetectorKind::Mmse => (0, 0, 0),
            DetectorKind::Id => (self.iterations, n.saturating_sub(1), 0),
            DetectorKind::SoftId => (self.iterations, self.ici_span, self.redetect),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub name: String,
    pub waveform: WaveformConfig,
    pub channel: ChannelSpec,
    pub detector: DetectorSpec,
    pub snr_db: Vec<f64>,
    pub frames_per_point: u64,
    /// Stop a point once this many bit errors have been counted.
    pub min_bit_errors: u64,
    /// Code rate, used only for the SE figures.
    pub r_c: f64,
    /// RNG stream key; runs sharing a key see identical bits, channels and
    /// noise. Defaults to the run's index in the suite.
    pub stream: Option<u64>,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| Err(Error::Config(format!("run '{}', {field}: {msg}", self.name)));
        let w = &self.waveform;
        if let Err(e) = w.validate() {
            return fail("waveform", e.to_string());
        }
        if self.channel.paths == 0 {
            return fail("channel.paths", "at least one path is required".into());
        }
        if !(self.channel.nu_max.is_finite() && self.channel.nu_max >= 0.0) {
            return fail("channel.nu_max", format!("{} must be finite and non-negative", self.channel.nu_max));
        }
        if self.channel.l_max >= w.n {
            return fail("channel.l_max", format!("{} must be below N = {}", self.channel.l_max, w.n));
        }
        if w.cp_len < self.channel.l_max {
            return fail("cp_len", Error::InsufficientCp { cp_len: w.cp_len, l_max: self.channel.l_max }.to_string());
        }
        if self.snr_db.is_empty() {
            return fail("snr_db", "the SNR grid is empty".into());
        }
        if let Some(v) = self.snr_db.iter().find(|v| !v.is_finite()) {
            return fail("snr_db", format!("{v} is not finite"));
        }
        if self.frames_per_point == 0 {
            return fail("frames", "must be at least 1".into());
        }
        if !(self.r_c > 0.0 && self.r_c <= 1.0) {
            return fail("r_c", format!("{} outside (0, 1]", self.r_c));
        }
        let d = &self.detector;
        if d.kind == DetectorKind::SoftId {
            if d.ici_span >= w.n {
                return fail("detector.ici_span", format!("{} must be below N = {}", d.ici_span, w.n));
            }
            if d.redetect > w.n {
                return fail("detector.redetect", format!("{} exceeds N = {}", d.redetect, w.n));
            }
        }
        Ok(())
    }

    pub fn se_max(&self) -> f64 {
        se_max(self.r_c, self.waveform.qam.order(), self.waveform.alpha.value(), self.waveform.cp_len, self.waveform.n)
    }

    pub(crate) fn detector_config(&self, sigma2: f64) -> DetectorConfig {
        DetectorConfig {
            iterations: self.detector.iterations,
            ici_span: self.detector.ici_span,
            redetect: self.detector.redetect,
            sigma2,
            qam: self.waveform.qam,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub base_seed: u64,
    pub runs: Vec<RunSpec>,
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, run) in self.runs.iter().enumerate() {
            if self.runs[..i].iter().any(|r| r.name == run.name) {
                return Err(Error::Config(format!("duplicate run name '{}'", run.name)));
            }
            run.validate()?;
        }
        Ok(())
    }
}

/// Counters for one `(run, SNR)` point. Rates are derived on demand.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub run_id: String,
    pub waveform: WaveformConfig,
    pub detector: DetectorSpec,
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    /// Sum over frames of the squared per-frame bit-error count.
    pub bit_errors_sq: u64,
    pub se_max: f64,
    pub seed: u64,
    pub wall_time: Duration,
}

impl SimResult {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 { 0.0 } else { self.bit_errors as f64 / self.bits as f64 }
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 { 0.0 } else { self.frame_errors as f64 / self.frames as f64 }
    }

    pub fn se_eff(&self) -> f64 {
        effective_se(self.se_max, self.fer())
    }

    /// Standard error of the BER estimate treating frames, not bits, as the
    /// independent trials (errors cluster within a frame).
    pub fn ber_std_error(&self) -> f64 {
        if self.frames < 2 {
            return f64::INFINITY;
        }
        let f = self.frames as f64;
        let mean = self.bit_errors as f64 / f;
        let var = (self.bit_errors_sq as f64 / f - mean * mean).max(0.0) * f / (f - 1.0);
        let bits_per_frame = self.bits as f64 / f;
        (var / f).sqrt() / bits_per_frame
    }

    /// Everything except the wall time.
    pub fn same_outcome(&self, other: &SimResult) -> bool {
        self.run_id == other.run_id
            && self.waveform == other.waveform
            && self.detector == other.detector
            && self.snr_db.to_bits() == other.snr_db.to_bits()
            && (self.frames, self.bits, self.bit_errors, self.frame_errors, self.bit_errors_sq, self.seed)
                == (other.frames, other.bits, other.bit_errors, other.frame_errors, other.bit_errors_sq, other.seed)
            && self.se_max.to_bits() == other.se_max.to_bits()
    }
}

/// `r_c·log2 M / (α(1 + cp_len/N))` bits/s/Hz.
pub fn se_max(r_c: f64, m: usize, alpha: f64, cp_len: usize, n: usize) -> f64 {
    r_c * (m as f64).log2() / (alpha * (1.0 + cp_len as f64 / n as f64))
}

/// Goodput `se_max·(1 - FER)`.
pub fn effective_se(se_max: f64, fer: f64) -> f64 {
    se_max * (1.0 - fer)
}

/// `σ² = 10^{-SNR/10}` for unit transmit power.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
