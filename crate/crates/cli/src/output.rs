//! Result rows and their CSV form.

use anyhow::{anyhow, bail, Context, Result};
use std::io::Write;
use std::path::Path;

pub const HEADER: [&str; 8] = ["regime", "a", "estimate_re", "estimate_im", "stat_err", "trunc_err", "predicted", "ratio"];

/// One grid point. For ψ experiments `a` holds `t`; fit summary rows carry
/// the regime label prefixed with `fit-`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub regime: String,
    pub a: f64,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub stat_err: f64,
    pub trunc_err: f64,
    pub predicted: f64,
    pub ratio: f64,
}

impl ResultRow {
    pub fn real(regime: impl Into<String>, a: f64, estimate: f64, stat_err: f64, trunc_err: f64, predicted: f64) -> Self {
        Self {
            regime: regime.into(),
            a,
            estimate_re: estimate,
            estimate_im: 0.0,
            stat_err,
            trunc_err,
            predicted,
            ratio: estimate / predicted,
        }
    }

    pub fn is_fit_summary(&self) -> bool {
        self.regime.starts_with("fit-")
    }
}

/// 17 significant digits; exact zeros print as `0`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    if rows.is_empty() {
        bail!("no result rows to write");
    }
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(HEADER)?;
    for r in rows {
        out.write_record([
            r.regime.clone(),
            format_f64(r.a),
            format_f64(r.estimate_re),
            format_f64(r.estimate_im),
            format_f64(r.stat_err),
            format_f64(r.trunc_err),
            format_f64(r.predicted),
            format_f64(r.ratio),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(rows, std::io::BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(HEADER.iter().copied()) {
        bail!("unexpected CSV header {:?}", rdr.headers()?);
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|e| anyhow!("row {}: column {}: '{}': {e}", i + 2, HEADER[j], &rec[j]))
        };
        rows.push(ResultRow {
            regime: rec[0].to_string(),
            a: num(1)?,
            estimate_re: num(2)?,
            estimate_im: num(3)?,
            stat_err: num(4)?,
            trunc_err: num(5)?,
            predicted: num(6)?,
            ratio: num(7)?,
        });
    }
    Ok(rows)
}

pub fn load_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_csv(file).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn same(a: f64, b: f64) -> bool {
        a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
    }

    #[test]
    fn one_row_is_two_lines() {
        let s = to_csv_string(&[ResultRow::real("C1", 25.0, 1.0 / 3.0, 1e-3, 0.0, 0.3)]).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.ends_with('\n'));
        assert!(s.starts_with("regime,a,estimate_re,estimate_im,stat_err,trunc_err,predicted,ratio\n"));
        let fields: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields[3], "0");
        assert_eq!(fields[5], "0");
        assert_eq!(fields[2], "3.3333333333333331e-1");
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![
            ResultRow::real("psi-power-law", 0.05, 12.345678901234567, 0.0123, 1e-300, 11.0),
            ResultRow {
                regime: "fit-level".into(),
                a: f64::NAN,
                estimate_re: -std::f64::consts::PI,
                estimate_im: 2.0f64.sqrt() * 1e-17,
                stat_err: f64::MIN_POSITIVE,
                trunc_err: 0.0,
                predicted: f64::MAX,
                ratio: f64::NAN,
            },
        ];
        let back = read_csv(to_csv_string(&rows).unwrap().as_bytes()).unwrap();
        assert_eq!(back.len(), rows.len());
        for (x, y) in rows.iter().zip(&back) {
            assert_eq!(x.regime, y.regime);
            for (u, v) in [
                (x.a, y.a),
                (x.estimate_re, y.estimate_re),
                (x.estimate_im, y.estimate_im),
                (x.stat_err, y.stat_err),
                (x.trunc_err, y.trunc_err),
                (x.predicted, y.predicted),
                (x.ratio, y.ratio),
            ] {
                assert!(same(u, v), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn empty_output_is_rejected() {
        assert!(to_csv_string(&[]).is_err());
    }
}
