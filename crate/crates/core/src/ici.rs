//! Inter-carrier interference: the modulation correlation matrix
//! `C_α = A_α A_α^H`, its magnitude law and magnitude-based pruning.

use std::io::Write;

use num_complex::Complex64;

use crate::afm::{cis_turns, CMat};
use crate::error::{param, Result};
use crate::modem::WaveformConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub n: usize,
    pub alpha: f64,
    pub c2: f64,
    pub entries: CMat,
}

impl CorrelationMatrix {
    pub fn get(&self, m1: usize, m2: usize) -> Complex64 {
        self.entries[(m1, m2)]
    }

    /// Column indices of the structurally non-zero entries of row `i`.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.entries[(i, j)] != Complex64::new(0.0, 0.0)).collect()
    }

    pub fn magnitudes(&self) -> nalgebra::DMatrix<f64> {
        self.entries.map(|z| z.norm())
    }

    /// Writes `|C|` as text, one row per line, values separated by spaces.
    pub fn write_magnitude_grid<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_magnitude_grid(&self.entries, out)
    }
}

/// Writes `|m|` row by row as space-separated decimals.
pub fn write_magnitude_grid<W: Write>(m: &CMat, mut out: W) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|c| format!("{:.12}", m[(r, c)].norm())).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Closed-form `C_α(m1, m2)`: unit diagonal and
/// `(1/N)·e^{-i2πc2(m1²-m2²)}·(1 - e^{-i2πα(m1-m2)}) / (1 - e^{-i2πα(m1-m2)/N})`
/// elsewhere. Entries with `α(m1 - m2) ∈ ℤ` are exact zeros.
pub fn correlation_matrix(cfg: &WaveformConfig) -> Result<CorrelationMatrix> {
    cfg.validate()?;
    let n = cfg.n;
    let nf = n as f64;
    let alpha = cfg.alpha.value();
    let one = Complex64::new(1.0, 0.0);
    let entries = CMat::from_fn(n, n, |m1, m2| {
        if m1 == m2 {
            return one;
        }
        let delta = m1 as i64 - m2 as i64;
        if cfg.alpha.times_is_integer(delta) {
            return Complex64::new(0.0, 0.0);
        }
        let d = delta as f64;
        let num = one - cis_turns(-alpha * d);
        let den = one - cis_turns(-alpha * d / nf);
        let (a, b) = (m1 as f64, m2 as f64);
        cis_turns(-cfg.c2 * (a * a - b * b)) * num / den / nf
    });
    Ok(CorrelationMatrix { n, alpha, c2: cfg.c2, entries })
}

/// `|sin(Nθ) / (N sin θ)|` with `θ = πα(m1 - m2)/N`.
pub fn correlation_magnitude(cfg: &WaveformConfig, m1: usize, m2: usize) -> f64 {
    if m1 == m2 {
        return 1.0;
    }
    let nf = cfg.n as f64;
    let theta = std::f64::consts::PI * cfg.alpha.value() * (m1 as f64 - m2 as f64) / nf;
    ((nf * theta).sin() / (nf * theta.sin())).abs()
}

// Magnitudes are compared on a 1e-12 grid so that mirror-image entries,
// which are equal analytically, tie and fall back to the column order.
fn magnitude_key(z: Complex64) -> i64 {
    (z.norm() * 1e12).round() as i64
}

/// Keeps the diagonal and the `span` largest-magnitude off-diagonal entries of
/// every row; ties go to the smaller column index.
pub fn truncate_correlation(c: &CorrelationMatrix, span: usize) -> Result<CorrelationMatrix> {
    let n = c.n;
    if span >= n.max(1) {
        return Err(param(format!("ICI span {span} must be in 0..={}", n.saturating_sub(1))));
    }
    let mut entries = CMat::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        entries[(i, i)] = c.entries[(i, i)];
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by_key(|&j| (std::cmp::Reverse(magnitude_key(c.entries[(i, j)])), j));
        for &j in order.iter().take(span) {
            entries[(i, j)] = c.entries[(i, j)];
        }
    }
    Ok(CorrelationMatrix { entries, ..c.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afm::max_abs_diff;
    use crate::modem::{Alpha, Preset};

    fn nafdm(n: usize, num: u32, den: u32) -> WaveformConfig {
        let alpha = Alpha::new(num, den).unwrap();
        let kind = if alpha.is_one() { Preset::Afdm } else { Preset::Nafdm };
        WaveformConfig::preset(kind, n, alpha, 1.0, 0.0).unwrap()
    }

    fn zero_offsets(c: &CorrelationMatrix) -> Vec<usize> {
        let mut d: Vec<usize> = (0..c.n)
            .flat_map(|i| (0..c.n).map(move |j| (i, j)))
            .filter(|&(i, j)| c.get(i, j).norm() < 1e-10)
            .map(|(i, j)| i.abs_diff(j))
            .collect();
        d.sort();
        d.dedup();
        d
    }

    #[test]
    fn orthogonal_correlation_is_identity() {
        let c = correlation_matrix(&nafdm(16, 1, 1)).unwrap();
        assert_eq!(c.entries, CMat::identity(16, 16));
    }

    #[test]
    fn zero_ici_offsets() {
        let c = correlation_matrix(&nafdm(16, 4, 5)).unwrap();
        assert_eq!(zero_offsets(&c), vec![5, 10, 15]);
        let c = correlation_matrix(&nafdm(16, 9, 10)).unwrap();
        assert_eq!(zero_offsets(&c), vec![10]);
    }

    #[test]
    fn gram_identity_and_magnitude_law() {
        for n in [8usize, 16, 32] {
            for (num, den) in [(2, 5), (4, 5), (17, 20), (9, 10), (1, 1)] {
                let cfg = nafdm(n, num, den);
                let a = cfg.modulation_matrix().unwrap();
                let c = correlation_matrix(&cfg).unwrap();
                assert!(max_abs_diff(&c.entries, &(&a * a.adjoint())) < 1e-10, "N={n} {num}/{den}");
                for i in 0..n {
                    for j in 0..n {
                        let law = correlation_magnitude(&cfg, i, j);
                        assert!((c.get(i, j).norm() - law).abs() < 1e-12);
                        assert!((c.get(i, j) - c.get(j, i).conj()).norm() < 1e-12);
                        assert!((0.0..=1.0 + 1e-15).contains(&law));
                    }
                }
            }
        }
    }

    #[test]
    fn magnitude_decays_with_distance() {
        let cfg = nafdm(16, 4, 5);
        assert_eq!(correlation_magnitude(&cfg, 3, 3), 1.0);
        assert!(correlation_magnitude(&cfg, 0, 5) < 1e-12);
        assert!(correlation_magnitude(&cfg, 4, 5) > correlation_magnitude(&cfg, 3, 5));
    }

    #[test]
    fn truncation_extremes() {
        let c = correlation_matrix(&nafdm(16, 17, 20)).unwrap();
        let d0 = truncate_correlation(&c, 0).unwrap();
        assert_eq!(d0.entries, CMat::identity(16, 16));
        let full = truncate_correlation(&c, 15).unwrap();
        assert_eq!(full.entries, c.entries);
        assert!(truncate_correlation(&c, 16).is_err());
    }

    #[test]
    fn truncation_matches_sort_oracle() {
        let c = correlation_matrix(&nafdm(16, 17, 20)).unwrap();
        let t = truncate_correlation(&c, 4).unwrap();
        for i in 0..16 {
            // oracle: rank by the magnitude law, which depends on |i - j| only
            let mut cand: Vec<(usize, f64)> = (0..16)
                .filter(|&j| j != i)
                .map(|j| {
                    let th = std::f64::consts::PI * 0.85 * (i as f64 - j as f64) / 16.0;
                    (j, ((16.0 * th).sin() / (16.0 * th.sin())).abs())
                })
                .collect();
            cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let mut want: Vec<usize> = cand[..4].iter().map(|x| x.0).collect();
            want.push(i);
            want.sort();
            assert_eq!(t.row_support(i), want, "row {i}");
        }
    }

    #[test]
    fn truncation_is_idempotent() {
        for span in [0, 3, 8, 15] {
            let c = correlation_matrix(&nafdm(16, 4, 5)).unwrap();
            let once = truncate_correlation(&c, span).unwrap();
            let twice = truncate_correlation(&once, span).unwrap();
            assert_eq!(once.entries, twice.entries);
        }
    }

    #[test]
    fn magnitude_grid_format() {
        let c = correlation_matrix(&nafdm(4, 1, 1)).unwrap();
        let mut buf = Vec::new();
        c.write_magnitude_grid(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<f64>> =
            text.lines().map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2], vec![0.0, 0.0, 1.0, 0.0]);
    }
}
