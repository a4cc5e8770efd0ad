use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{noise_variance, DetectorKind, RunSpec, SimResult, SuiteSpec};
use crate::afm::CVec;
use crate::channel::{add_noise, effective_from_parts, propagate, sample_channel, time_channel_matrix};
use crate::detect::{hard_id, mmse_time, soft_id};
use crate::error::{Error, Result};
use crate::ici::{correlation_matrix, truncate_correlation, CorrelationMatrix};
use crate::modem::{add_cp, Modem};
use crate::qam::Constellation;

/// Frames simulated per parallel batch. Fixed so that early stopping lands
/// on the same frame whatever the thread count.
const BATCH: u64 = 64;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Run names or indices to execute; `None` runs everything.
    pub runs: Option<Vec<String>>,
    /// Overrides the suite's base seed.
    pub seed: Option<u64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one frame: a ChaCha8 key derived from `(base_seed, stream)`
/// by SplitMix64 mixing, positioned on ChaCha stream `frame`.
pub fn frame_stream(base_seed: u64, stream: u64, frame: u64) -> ChaCha8Rng {
    let key = splitmix64(base_seed ^ splitmix64(stream));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(frame);
    rng
}

struct RunContext<'a> {
    spec: &'a RunSpec,
    modem: Modem,
    corr: Option<CorrelationMatrix>,
    pruned: Option<CorrelationMatrix>,
}

impl<'a> RunContext<'a> {
    fn new(spec: &'a RunSpec) -> Result<Self> {
        spec.validate()?;
        let modem = Modem::new(spec.waveform)?;
        let (corr, pruned) = match spec.detector.kind {
            DetectorKind::Mmse => (None, None),
            DetectorKind::Id => (Some(correlation_matrix(&spec.waveform)?), None),
            DetectorKind::SoftId => {
                let c = correlation_matrix(&spec.waveform)?;
                (None, Some(truncate_correlation(&c, spec.detector.ici_span)?))
            }
        };
        Ok(Self { spec, modem, corr, pruned })
    }

    fn constellation(&self) -> &Constellation {
        self.modem.constellation()
    }

    /// Bit errors in one frame.
    fn frame(&self, sigma2: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
        let cfg = self.modem.config();
        let ch_spec = &self.spec.channel;
        let c = self.constellation();
        let k = c.bits_per_symbol();
        let n = cfg.n;

        let labels: Vec<usize> = (0..n).map(|_| (0..k).fold(0, |acc, _| (acc << 1) | rng.random::<bool>() as usize)).collect();
        let x: Vec<Complex64> = labels.iter().map(|&i| c.point(i)).collect();
        let ch = sample_channel(ch_spec.paths, ch_spec.l_max, ch_spec.nu_max, ch_spec.gains, rng)?;

        let s = self.modem.modulate(&x)?;
        let s_cp = add_cp(s.as_slice(), cfg)?;
        let mut r = propagate(&s_cp, &ch, cfg)?;
        add_noise(r.as_mut_slice(), sigma2, rng);

        let ht = time_channel_matrix(&ch, n)?;
        let s_hat = mmse_time(&r, &ht, sigma2)?;
        let xbar = self.modem.demodulate(s_hat.as_slice())?;

        let decisions = match self.spec.detector.kind {
            DetectorKind::Mmse => xbar.iter().map(|&z| c.slice_index(z)).collect(),
            DetectorKind::Id => {
                let corr = self.corr.as_ref().expect("built for hard ID");
                hard_id(&xbar, &corr.entries, self.spec.detector.iterations, c)?
            }
            DetectorKind::SoftId => {
                let pruned = self.pruned.as_ref().expect("built for soft ID");
                let y: CVec = self.modem.demodulate(r.as_slice())?;
                let h_eff = effective_from_parts(self.modem.matrix(), &ht);
                soft_id(&xbar, &y, &h_eff, pruned, &self.spec.detector_config(sigma2))?.decisions
            }
        };
        Ok(labels.iter().zip(&decisions).map(|(&a, &b)| c.bit_distance(a, b) as u64).sum())
    }

    fn point(&self, snr_db: f64, base_seed: u64, stream: u64) -> Result<SimResult> {
        let start = Instant::now();
        let spec = self.spec;
        let sigma2 = noise_variance(snr_db);
        let bits_per_frame = (spec.waveform.n * self.constellation().bits_per_symbol()) as u64;
        let (mut frames, mut bit_errors, mut frame_errors, mut bit_errors_sq) = (0u64, 0u64, 0u64, 0u64);
        let enough = |errs: u64| spec.min_bit_errors > 0 && errs >= spec.min_bit_errors;
        let mut next = 0;
        'outer: while next < spec.frames_per_point && !enough(bit_errors) {
            let end = (next + BATCH).min(spec.frames_per_point);
            let outcomes: Vec<Result<u64>> = (next..end)
                .into_par_iter()
                .map(|f| self.frame(sigma2, &mut frame_stream(base_seed, stream, f)))
                .collect();
            for errs in outcomes {
                let errs = errs?;
                frames += 1;
                bit_errors += errs;
                frame_errors += (errs > 0) as u64;
                bit_errors_sq += errs * errs;
                if enough(bit_errors) {
                    break 'outer;
                }
            }
            next = end;
        }
        Ok(SimResult {
            run_id: spec.name.clone(),
            waveform: spec.waveform,
            detector: spec.detector,
            snr_db,
            frames,
            bits: frames * bits_per_frame,
            bit_errors,
            frame_errors,
            bit_errors_sq,
            se_max: spec.se_max(),
            seed: base_seed,
            wall_time: start.elapsed(),
        })
    }
}

/// Simulates one SNR point of `spec` on RNG stream `stream`, using the
/// current rayon pool.
pub fn run_point(spec: &RunSpec, snr_db: f64, base_seed: u64, stream: u64) -> Result<SimResult> {
    if !snr_db.is_finite() {
        return Err(Error::Config(format!("SNR {snr_db} dB is not finite")));
    }
    RunContext::new(spec)?.point(snr_db, base_seed, stream)
}

fn selected(suite: &SuiteSpec, filter: &Option<Vec<String>>) -> Result<Vec<usize>> {
    let Some(filter) = filter else { return Ok((0..suite.runs.len()).collect()) };
    let mut picked = Vec::new();
    for item in filter {
        let idx = suite
            .runs
            .iter()
            .position(|r| &r.name == item)
            .or_else(|| item.parse::<usize>().ok().filter(|&i| i < suite.runs.len()))
            .ok_or_else(|| Error::Config(format!("no run named or numbered '{item}'")))?;
        if !picked.contains(&idx) {
            picked.push(idx);
        }
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Runs every selected run over its SNR grid, in suite order.
pub fn run_suite(suite: &SuiteSpec, opts: &RunOptions) -> Result<Vec<SimResult>> {
    suite.validate()?;
    let picked = selected(suite, &opts.runs)?;
    let seed = opts.seed.unwrap_or(suite.base_seed);
    let body = || -> Result<Vec<SimResult>> {
        let mut out = Vec::new();
        for &i in &picked {
            let run = &suite.runs[i];
            let ctx = RunContext::new(run)?;
            let stream = run.stream.unwrap_or(i as u64);
            for &snr in &run.snr_db {
                out.push(ctx.point(snr, seed, stream)?);
            }
        }
        Ok(out)
    };
    match opts.workers {
        None => body(),
        Some(0) => Err(Error::Config("workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(body),
    }
}
