//! TOML suite files.
//!
//! ```toml
//! seed = 1
//!
//! [[run]]
//! name = "nafdm-softid"
//! waveform = "nafdm"        # ofdm | ocdm | afdm | sefdm | nafdm | custom
//! n = 32
//! alpha_num = 9             # or `nprime = 40`; omitted means alpha = 1
//! alpha_den = 10
//! cp_len = 8
//! qam = 4
//! snr_db = [10.0, 15.0, 20.0]
//! frames = 10000
//! min_bit_errors = 500
//!
//! [run.channel]
//! paths = 4
//! l_max = 3
//! nu_max = 2.0
//!
//! [run.detector]
//! kind = "softid"           # mmse | id | softid
//! iterations = 10
//! ici_span = 31
//! redetect = 8
//! ```
//!
//! Chirp rates default to the preset's rule (`xi` defaults to 1); `c1` and
//! `c2` override them, and `c2` falls back to `c1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChannelSpec, DetectorKind, DetectorSpec, RunSpec, SuiteSpec};
use crate::channel::GainModel;
use crate::error::{Error, Result};
use crate::modem::{Alpha, Preset, WaveformConfig};
use crate::qam::QamOrder;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    run: Vec<RawRun>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    waveform: Preset,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    nprime: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_num: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_den: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cp_len: Option<usize>,
    #[serde(default = "default_qam")]
    qam: QamOrder,
    snr_db: Vec<f64>,
    frames: u64,
    #[serde(default = "default_min_errors")]
    min_bit_errors: u64,
    #[serde(default = "default_rate")]
    r_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stream: Option<u64>,
    channel: RawChannel,
    detector: RawDetector,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    paths: usize,
    l_max: usize,
    nu_max: f64,
    #[serde(default)]
    gains: GainModel,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    kind: DetectorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ici_span: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    redetect: Option<usize>,
}

fn default_qam() -> QamOrder {
    QamOrder::Qam4
}

fn default_min_errors() -> u64 {
    500
}

fn default_rate() -> f64 {
    1.0
}

impl RawRun {
    fn into_spec(self, index: usize) -> Result<RunSpec> {
        let name = self.name.unwrap_or_else(|| format!("run{index}"));
        let fail = |field: &str, msg: String| Error::Config(format!("run '{name}', {field}: {msg}"));

        let alpha = match (self.nprime, self.alpha_num, self.alpha_den) {
            (None, None, None) => Alpha::ONE,
            (Some(np), None, None) => Alpha::from_lengths(self.n, np).map_err(|e| fail("nprime", e.to_string()))?,
            (None, Some(a), Some(b)) => Alpha::new(a, b).map_err(|e| fail("alpha_num/alpha_den", e.to_string()))?,
            (Some(_), _, _) => return Err(fail("nprime", "give either nprime or alpha_num/alpha_den".into())),
            _ => return Err(fail("alpha_num/alpha_den", "both must be given".into())),
        };
        let xi = self.xi.unwrap_or(1.0);
        let mut waveform = match self.waveform {
            Preset::Custom => {
                let c1 = self.c1.ok_or_else(|| fail("c1", "required for custom waveforms".into()))?;
                WaveformConfig::custom(self.n, alpha, c1, self.c2.unwrap_or(c1))
            }
            kind => {
                let mut w = WaveformConfig::preset(kind, self.n, alpha, self.channel.nu_max, xi)
                    .map_err(|e| fail("waveform", e.to_string()))?;
                if let Some(c1) = self.c1 {
                    w.c1 = c1;
                    w.c2 = c1;
                }
                if let Some(c2) = self.c2 {
                    w.c2 = c2;
                }
                w
            }
        };
        waveform.cp_len = self.cp_len.unwrap_or(self.channel.l_max);
        waveform.qam = self.qam;

        let n = self.n;
        let base = match self.detector.kind {
            DetectorKind::Mmse => DetectorSpec::mmse(),
            DetectorKind::Id => DetectorSpec::hard_id(n),
            DetectorKind::SoftId => DetectorSpec::soft_id(n),
        };
        let detector = DetectorSpec {
            iterations: self.detector.iterations.unwrap_or(base.iterations),
            ici_span: self.detector.ici_span.unwrap_or(base.ici_span),
            redetect: self.detector.redetect.unwrap_or(base.redetect),
            ..base
        };
        let spec = RunSpec {
            name,
            waveform,
            channel: ChannelSpec {
                paths: self.channel.paths,
                l_max: self.channel.l_max,
                nu_max: self.channel.nu_max,
                gains: self.channel.gains,
            },
            detector,
            snr_db: self.snr_db,
            frames_per_point: self.frames,
            min_bit_errors: self.min_bit_errors,
            r_c: self.r_c,
            stream: self.stream,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn from_spec(spec: &RunSpec) -> Self {
        let w = &spec.waveform;
        let alpha = (!w.alpha.is_one()).then_some((w.alpha.num(), w.alpha.den()));
        RawRun {
            name: Some(spec.name.clone()),
            waveform: w.preset,
            n: w.n,
            nprime: None,
            alpha_num: alpha.map(|a| a.0),
            alpha_den: alpha.map(|a| a.1),
            c1: Some(w.c1),
            c2: Some(w.c2),
            xi: None,
            cp_len: Some(w.cp_len),
            qam: w.qam,
            snr_db: spec.snr_db.clone(),
            frames: spec.frames_per_point,
            min_bit_errors: spec.min_bit_errors,
            r_c: spec.r_c,
            stream: spec.stream,
            channel: RawChannel {
                paths: spec.channel.paths,
                l_max: spec.channel.l_max,
                nu_max: spec.channel.nu_max,
                gains: spec.channel.gains,
            },
            detector: RawDetector {
                kind: spec.detector.kind,
                iterations: Some(spec.detector.iterations),
                ici_span: Some(spec.detector.ici_span),
                redetect: Some(spec.detector.redetect),
            },
        }
    }
}

/// Parses a suite from TOML text. Syntax errors carry line and column;
/// semantic errors name the run and field.
pub fn parse_config(text: &str) -> Result<SuiteSpec> {
    let raw: RawSuite = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let runs = raw.run.into_iter().enumerate().map(|(i, r)| r.into_spec(i)).collect::<Result<Vec<_>>>()?;
    let suite = SuiteSpec { base_seed: raw.seed, runs };
    suite.validate()?;
    Ok(suite)
}

pub fn parse_config_file(path: impl AsRef<Path>) -> Result<SuiteSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serialises a suite with every setting spelled out.
pub fn emit_suite(suite: &SuiteSpec) -> Result<String> {
    if suite.base_seed > i64::MAX as u64 {
        return Err(Error::Config(format!("seed {} does not fit a TOML integer", suite.base_seed)));
    }
    let raw = RawSuite { seed: suite.base_seed, run: suite.runs.iter().map(RawRun::from_spec).collect() };
    toml::to_string(&raw).map_err(|e| Error::Config(e.to_string()))
}

/// The reference setup: N = 32, 4-QAM, cp = 8, four Rayleigh paths with
/// `l_max = 3`, `nu_max = 2`, comparing AFDM + MMSE against nAFDM
/// (alpha = 9/10) with hard and soft iterative detection.
pub fn default_suite() -> SuiteSpec {
    let channel = ChannelSpec { paths: 4, l_max: 3, nu_max: 2.0, gains: GainModel::Rayleigh };
    let afdm = WaveformConfig::preset(Preset::Afdm, 32, Alpha::ONE, 2.0, 1.0).expect("valid preset").with_cp_len(8);
    let nafdm = WaveformConfig::preset(Preset::Nafdm, 32, Alpha::new(9, 10).expect("valid alpha"), 2.0, 1.0)
        .expect("valid preset")
        .with_cp_len(8);
    let run = |name: &str, waveform, detector| RunSpec {
        name: name.into(),
        waveform,
        channel,
        detector,
        snr_db: vec![10.0, 15.0, 20.0],
        frames_per_point: 10_000,
        min_bit_errors: 500,
        r_c: 1.0,
        stream: None,
    };
    SuiteSpec {
        base_seed: 1,
        runs: vec![
            run("afdm-mmse", afdm, DetectorSpec::mmse()),
            run("nafdm-id", nafdm, DetectorSpec::hard_id(32)),
            run("nafdm-softid", nafdm, DetectorSpec::soft_id(32)),
        ],
    }
}

pub fn emit_default() -> String {
    emit_suite(&default_suite()).expect("default suite serialises")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7

[[run]]
waveform = "nafdm"
n = 16
nprime = 20
snr_db = [5, 10.5]
frames = 10

[run.channel]
paths = 2
l_max = 1
nu_max = 1.0

[run.detector]
kind = "softid"
"#;

    #[test]
    fn default_round_trip() {
        assert_eq!(parse_config(&emit_default()).unwrap(), default_suite());
    }

    #[test]
    fn minimal_run_defaults() {
        let s = parse_config(MINIMAL).unwrap();
        assert_eq!(s.base_seed, 7);
        let r = &s.runs[0];
        assert_eq!(r.name, "run0");
        assert_eq!(r.waveform.alpha, Alpha::new(4, 5).unwrap());
        assert_eq!(r.waveform.cp_len, 1);
        assert_eq!(r.waveform.c1, (2.0 * (1.0 + 1.0) + 1.0) / 32.0);
        assert_eq!(r.waveform.c2, r.waveform.c1);
        assert_eq!(r.snr_db, vec![5.0, 10.5]);
        assert_eq!((r.detector.iterations, r.detector.ici_span, r.detector.redetect), (10, 15, 4));
        assert_eq!((r.min_bit_errors, r.r_c), (500, 1.0));
        assert_eq!(parse_config(&emit_suite(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn empty_suite() {
        let s = parse_config("seed = 3").unwrap();
        assert!(s.runs.is_empty());
    }

    fn err(text: &str) -> String {
        parse_config(text).unwrap_err().to_string()
    }

    #[test]
    fn syntax_errors_report_lines() {
        let bad = MINIMAL.replace("frames = 10", "frames = ");
        assert!(err(&bad).contains("line 9, column 10"), "{}", err(&bad));
    }

    #[test]
    fn field_errors_name_the_field() {
        assert!(err(&MINIMAL.replace("frames = 10", "frames = 10\nbogus = 1")).contains("bogus"));
        assert!(err(&MINIMAL.replace("frames = 10", "frames = 0")).contains("frames"));
        assert!(err(&MINIMAL.replace("l_max = 1", "l_max = 2").replace("nprime = 20", "nprime = 20\ncp_len = 1"))
            .contains("cp_len"));
        assert!(err(&MINIMAL.replace("nprime = 20", "nprime = 12")).contains("nprime"));
        assert!(err(&MINIMAL.replace("kind = \"softid\"", "kind = \"softid\"\nici_span = 16")).contains("ici_span"));
        assert!(err(&MINIMAL.replace("\"nafdm\"", "\"ofdm\"")).contains("waveform"));
        assert!(err(&MINIMAL.replace("snr_db = [5, 10.5]", "snr_db = [5, nan]")).contains("snr_db"));
        assert!(err(&MINIMAL.replace("kind = \"softid\"", "kind = \"zf\"")).contains("zf"));
        assert!(err(&MINIMAL.replace("frames = 10", "frames = 10\nqam = 8")).contains("8"));
    }

    #[test]
    fn duplicate_names_rejected() {
        let two = format!("{MINIMAL}\n{}", MINIMAL.replace("seed = 7", "")).replace("waveform", "name = \"a\"\nwaveform");
        assert!(err(&two).contains("duplicate"));
    }

    #[test]
    fn custom_waveform_needs_c1() {
        let t = MINIMAL.replace("\"nafdm\"", "\"custom\"");
        assert!(err(&t).contains("c1"));
        let s = parse_config(&t.replace("nprime = 20", "nprime = 20\nc1 = 0.25")).unwrap();
        assert_eq!((s.runs[0].waveform.c1, s.runs[0].waveform.c2), (0.25, 0.25));
    }
}
