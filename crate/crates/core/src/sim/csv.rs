use std::io::Write;
use std::path::Path;

use super::SimResult;

pub const CSV_HEADER: &str = "run_id,waveform,alpha_num,alpha_den,c1,c2,N,cp_len,M,detector,K,D,U,snr_db,\
frames,bits,bit_errors,frame_errors,ber,fer,se_max,se_eff,seed";

/// Twelve significant digits, fixed notation for moderate magnitudes and
/// scientific otherwise.
pub fn format_decimal(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..12).contains(&exp) {
        format!("{:.*}", (11 - exp) as usize, v)
    } else {
        format!("{v:.11e}")
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn emit_csv<W: Write>(results: &[SimResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in results {
        let w = &r.waveform;
        let (k, d, u) = r.detector.reported(w.n);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            quote(&r.run_id),
            w.preset,
            w.alpha.num(),
            w.alpha.den(),
            format_decimal(w.c1),
            format_decimal(w.c2),
            w.n,
            w.cp_len,
            w.qam.order(),
            r.detector.kind.name(),
            k,
            d,
            u,
            format_decimal(r.snr_db),
            r.frames,
            r.bits,
            r.bit_errors,
            r.frame_errors,
            format_decimal(r.ber()),
            format_decimal(r.fer()),
            format_decimal(r.se_max),
            format_decimal(r.se_eff()),
            r.seed,
        )?;
    }
    Ok(())
}

pub fn write_csv(results: &[SimResult], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    emit_csv(results, &mut file)?;
    file.flush()
}
