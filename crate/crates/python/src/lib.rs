use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nafdm::detect::{soft_id, DetectorConfig};
use nafdm::sim::{parse_config, run_suite, RunOptions};
use nafdm::{correlation_matrix, truncate_correlation, Alpha, CMat, CVec, Modem, Preset, QamOrder, WaveformConfig};

fn err(e: nafdm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<Complex64>]) -> PyResult<CMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMat::from_fn(n, n, |r, c| rows[r][c]))
}

/// Waveform configuration: preset, size, compression factor and chirp rates.
#[pyclass(name = "Waveform", frozen)]
struct PyWaveform {
    cfg: WaveformConfig,
}

#[pymethods]
impl PyWaveform {
    #[new]
    #[pyo3(signature = (preset, n, nprime=None, alpha_num=None, alpha_den=None, nu_max=2.0, xi=1.0, c1=None, c2=None, cp_len=0, qam=4))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        preset: &str,
        n: usize,
        nprime: Option<usize>,
        alpha_num: Option<u32>,
        alpha_den: Option<u32>,
        nu_max: f64,
        xi: f64,
        c1: Option<f64>,
        c2: Option<f64>,
        cp_len: usize,
        qam: u32,
    ) -> PyResult<Self> {
        let alpha = match (nprime, alpha_num, alpha_den) {
            (None, None, None) => Alpha::ONE,
            (Some(np), None, None) => Alpha::from_lengths(n, np).map_err(err)?,
            (None, Some(a), Some(b)) => Alpha::new(a, b).map_err(err)?,
            _ => return Err(PyValueError::new_err("give either nprime or both alpha_num and alpha_den")),
        };
        let kind = Preset::parse(preset).map_err(err)?;
        let mut cfg = match kind {
            Preset::Custom => {
                let c1 = c1.ok_or_else(|| PyValueError::new_err("custom waveforms need c1"))?;
                WaveformConfig::custom(n, alpha, c1, c2.unwrap_or(c1))
            }
            kind => {
                let mut w = WaveformConfig::preset(kind, n, alpha, nu_max, xi).map_err(err)?;
                if let Some(c1) = c1 {
                    w.c1 = c1;
                    w.c2 = c1;
                }
                if let Some(c2) = c2 {
                    w.c2 = c2;
                }
                w
            }
        };
        cfg.cp_len = cp_len;
        cfg.qam = QamOrder::from_order(qam).map_err(err)?;
        cfg.validate().map_err(err)?;
        Ok(Self { cfg })
    }

    #[getter]
    fn n(&self) -> usize {
        self.cfg.n
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.cfg.alpha.value()
    }

    #[getter]
    fn alpha_fraction(&self) -> (u32, u32) {
        (self.cfg.alpha.num(), self.cfg.alpha.den())
    }

    #[getter]
    fn c1(&self) -> f64 {
        self.cfg.c1
    }

    #[getter]
    fn c2(&self) -> f64 {
        self.cfg.c2
    }

    #[getter]
    fn cp_len(&self) -> usize {
        self.cfg.cp_len
    }

    #[getter]
    fn qam(&self) -> usize {
        self.cfg.qam.order()
    }

    #[getter]
    fn preset(&self) -> &'static str {
        self.cfg.preset.name()
    }

    /// `N / alpha`, or None when it is not an integer.
    #[getter]
    fn nprime(&self) -> Option<usize> {
        self.cfg.nprime()
    }

    /// Time-domain samples `A^H x` (no cyclic prefix).
    fn modulate(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        Ok(nafdm::modem::modulate(&x, &self.cfg).map_err(err)?.iter().copied().collect())
    }

    /// `A r`.
    fn demodulate(&self, r: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        Ok(nafdm::modem::demodulate(&r, &self.cfg).map_err(err)?.iter().copied().collect())
    }

    fn modulation_matrix(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(to_rows(&self.cfg.modulation_matrix().map_err(err)?))
    }

    /// `C = A A^H`, optionally keeping only the `span` largest off-diagonal
    /// entries per row.
    #[pyo3(signature = (span=None))]
    fn correlation_matrix(&self, span: Option<usize>) -> PyResult<Vec<Vec<Complex64>>> {
        let mut c = correlation_matrix(&self.cfg).map_err(err)?;
        if let Some(d) = span {
            c = truncate_correlation(&c, d).map_err(err)?;
        }
        Ok(to_rows(&c.entries))
    }

    #[pyo3(signature = (r_c=1.0))]
    fn se_max(&self, r_c: f64) -> f64 {
        nafdm::sim::se_max(r_c, self.cfg.qam.order(), self.cfg.alpha.value(), self.cfg.cp_len, self.cfg.n)
    }

    /// Soft iterative detection. Returns alphabet indices.
    #[pyo3(signature = (xbar, y, h_eff, sigma2, iterations=10, ici_span=None, redetect=None))]
    #[allow(clippy::too_many_arguments)]
    fn soft_id(
        &self,
        xbar: Vec<Complex64>,
        y: Vec<Complex64>,
        h_eff: Vec<Vec<Complex64>>,
        sigma2: f64,
        iterations: usize,
        ici_span: Option<usize>,
        redetect: Option<usize>,
    ) -> PyResult<Vec<usize>> {
        let n = self.cfg.n;
        let defaults = DetectorConfig::new(n, sigma2, self.cfg.qam);
        let det = DetectorConfig {
            iterations,
            ici_span: ici_span.unwrap_or(defaults.ici_span),
            redetect: redetect.unwrap_or(defaults.redetect),
            ..defaults
        };
        let c = correlation_matrix(&self.cfg).map_err(err)?;
        let c_d = truncate_correlation(&c, det.ici_span).map_err(err)?;
        let out = soft_id(&CVec::from_vec(xbar), &CVec::from_vec(y), &from_rows(&h_eff)?, &c_d, &det).map_err(err)?;
        Ok(out.decisions)
    }

    fn __repr__(&self) -> String {
        format!(
            "Waveform(preset='{}', n={}, alpha={}, c1={}, c2={}, cp_len={}, qam={})",
            self.cfg.preset,
            self.cfg.n,
            self.cfg.alpha,
            self.cfg.c1,
            self.cfg.c2,
            self.cfg.cp_len,
            self.cfg.qam.order()
        )
    }
}

/// Modem with a cached modulation matrix.
#[pyclass(name = "Modem", frozen)]
struct PyModem {
    inner: Modem,
}

#[pymethods]
impl PyModem {
    #[new]
    fn new(waveform: &PyWaveform) -> PyResult<Self> {
        Ok(Self { inner: Modem::new(waveform.cfg).map_err(err)? })
    }

    fn modulate(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.modulate(&x).map_err(err)?.iter().copied().collect())
    }

    fn demodulate(&self, r: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.demodulate(&r).map_err(err)?.iter().copied().collect())
    }
}

#[pyfunction]
fn qam_map(bits: Vec<u8>, m: u32) -> PyResult<Vec<Complex64>> {
    nafdm::qam::qam_map(&bits, m).map_err(err)
}

#[pyfunction]
fn qam_slice(sym: Complex64, m: u32) -> PyResult<(Complex64, Vec<u8>)> {
    nafdm::qam::qam_slice(sym, m).map_err(err)
}

#[pyfunction]
fn se_max(r_c: f64, m: usize, alpha: f64, cp_len: usize, n: usize) -> f64 {
    nafdm::sim::se_max(r_c, m, alpha, cp_len, n)
}

#[pyfunction]
fn effective_se(se_max: f64, fer: f64) -> f64 {
    nafdm::sim::effective_se(se_max, fer)
}

#[pyfunction]
fn default_config() -> String {
    nafdm::sim::emit_default()
}

/// Runs a TOML suite and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (config, seed=None, workers=None, runs=None))]
fn simulate(py: Python<'_>, config: &str, seed: Option<u64>, workers: Option<usize>, runs: Option<Vec<String>>) -> PyResult<String> {
    let suite = parse_config(config).map_err(err)?;
    let opts = RunOptions { workers, runs, seed };
    let results = py.detach(|| run_suite(&suite, &opts)).map_err(err)?;
    let mut buf = Vec::new();
    nafdm::sim::emit_csv(&results, &mut buf).map_err(|e| PyValueError::new_err(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pynafdm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWaveform>()?;
    m.add_class::<PyModem>()?;
    m.add_function(wrap_pyfunction!(qam_map, m)?)?;
    m.add_function(wrap_pyfunction!(qam_slice, m)?)?;
    m.add_function(wrap_pyfunction!(se_max, m)?)?;
    m.add_function(wrap_pyfunction!(effective_se, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows_round_trip() {
        let m = CMat::from_fn(3, 3, |r, c| Complex64::new(r as f64, c as f64));
        assert_eq!(from_rows(&to_rows(&m)).unwrap(), m);
    }

    #[test]
    fn waveform_presets() {
        let w = PyWaveform::new("nafdm", 16, Some(20), None, None, 2.0, 1.0, None, None, 4, 4).unwrap();
        assert_eq!(w.alpha_fraction(), (4, 5));
        assert_eq!(w.nprime(), Some(20));
        assert_eq!(w.c1(), w.c2());
        let x = qam_map(vec![0; 32], 4).unwrap();
        let s = w.modulate(x.clone()).unwrap();
        let back = w.demodulate(s).unwrap();
        let c = w.correlation_matrix(None).unwrap();
        for i in 0..16 {
            let want: Complex64 = (0..16).map(|j| c[i][j] * x[j]).sum();
            assert!((back[i] - want).norm() < 1e-10);
        }
    }
}
