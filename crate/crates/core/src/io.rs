//! CSV readers and writers for densities, weight functions and results.
//!
//! Matrix entries are addressed by zero-based `row, col`. Floats are written
//! with 17 significant digits so that output bodies are reproducible.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::EstimateSolution;
use crate::factorization::Factorization;
use crate::lift::{compute_weights, FunctionalWeights, Horizon, LiftConfig};
use crate::spectral::{GridMatrixFunction, SpectralDensity};
use crate::{CMat, C64};

struct EntryRow {
    m: i64,
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

/// Formats a float for CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a density table with header `m,row,col,re,im`. Lags present only
/// with one sign get their partner `F(-m) = F(m)^*` filled in (with a
/// warning); entries not listed are zero.
pub fn parse_density<R: Read>(reader: R, grid_size: usize) -> Result<SpectralDensity> {
    let rows = read_entries(reader, "m")?;
    let dim = rows.iter().map(|r| r.row.max(r.col) + 1).max().unwrap_or(0);
    if dim == 0 {
        return Err(Error::InvalidInput("density table is empty".into()));
    }
    let mut coeffs: BTreeMap<i64, CMat> = BTreeMap::new();
    for r in &rows {
        let c = coeffs.entry(r.m).or_insert_with(|| CMat::zeros(dim, dim));
        c[(r.row, r.col)] = C64::new(r.re, r.im);
    }
    let missing: Vec<i64> = coeffs
        .keys()
        .copied()
        .filter(|&m| m != 0 && !coeffs.contains_key(&-m))
        .collect();
    for m in missing {
        log::warn!(
            "density lag {} absent; filled from lag {m} by Hermitian symmetry",
            -m
        );
        let partner = coeffs[&m].adjoint();
        coeffs.insert(-m, partner);
    }
    SpectralDensity::new(dim, coeffs, grid_size)
}

pub fn read_density(path: &Path, grid_size: usize) -> Result<SpectralDensity> {
    let file = std::fs::File::open(path)?;
    parse_density(file, grid_size)
}

fn read_entries<R: Read>(reader: R, index: &str) -> Result<Vec<EntryRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = [index, "row", "col", "re", "im"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::InvalidInput(format!(
            "expected header `{}`, got `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (m, row, col, re, im): (i64, usize, usize, f64, f64) = rec.deserialize(None)?;
        out.push(EntryRow {
            m,
            row,
            col,
            re,
            im,
        });
    }
    Ok(out)
}

/// Writes all stored lags of `f` as `m,row,col,re,im`.
pub fn write_density<W: Write>(w: W, f: &SpectralDensity) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["m", "row", "col", "re", "im"])?;
    for (&m, c) in f.coeffs() {
        write_matrix(&mut wtr, &m.to_string(), c)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the factor coefficients `d(u)` as `u,row,col,re,im`.
pub fn write_factor<W: Write>(w: W, fact: &Factorization) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["u", "row", "col", "re", "im"])?;
    for (u, c) in fact.coefficients().iter().enumerate() {
        write_matrix(&mut wtr, &u.to_string(), c)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses a factor table written by [`write_factor`].
pub fn parse_factor<R: Read>(reader: R, grid_size: usize) -> Result<Factorization> {
    let rows = read_entries(reader, "u")?;
    let nrows = rows.iter().map(|r| r.row + 1).max().unwrap_or(0);
    let ncols = rows.iter().map(|r| r.col + 1).max().unwrap_or(0);
    let len = rows.iter().map(|r| r.m).max().unwrap_or(-1) + 1;
    if nrows == 0 || rows.iter().any(|r| r.m < 0) {
        return Err(Error::InvalidInput(
            "factor table must list coefficients u >= 0".into(),
        ));
    }
    let mut d = vec![CMat::zeros(nrows, ncols); len as usize];
    for r in rows {
        d[r.m as usize][(r.row, r.col)] = C64::new(r.re, r.im);
    }
    Factorization::from_coefficients(d, grid_size)
}

fn write_matrix<W: Write>(wtr: &mut csv::Writer<W>, index: &str, c: &CMat) -> Result<()> {
    for row in 0..c.nrows() {
        for col in 0..c.ncols() {
            let z = c[(row, col)];
            wtr.write_record([
                index.to_string(),
                row.to_string(),
                col.to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
            ])?;
        }
    }
    Ok(())
}

/// Writes a `K × 1` grid function as `lambda,component,re_h,im_h`.
pub fn write_h_grid<W: Write>(w: W, h: &GridMatrixFunction) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["lambda", "component", "re_h", "im_h"])?;
    for g in 0..h.grid_size() {
        let v = h.value(g);
        for k in 0..v.nrows() {
            let z = v[(k, 0)];
            wtr.write_record([
                fmt_f64(h.lambda(g)),
                k.to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the Fourier coefficients of `h` as `j,component,re,im`.
pub fn write_h_coefficients<W: Write>(w: W, sol: &EstimateSolution) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["j", "component", "re", "im"])?;
    for (j, v) in &sol.h_coeffs {
        for (k, z) in v.iter().enumerate() {
            wtr.write_record([j.to_string(), k.to_string(), fmt_f64(z.re), fmt_f64(z.im)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `key,value` records in the given order.
pub fn write_key_values<W: Write>(w: W, records: &[(String, String)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["key", "value"])?;
    for (k, v) in records {
        wtr.write_record([k, v])?;
    }
    wtr.flush()?;
    Ok(())
}

/// A weight function tabulated at increasing times `t` and interpolated
/// linearly; zero outside the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    t: Vec<f64>,
    a: Vec<f64>,
}

impl WeightTable {
    pub fn new(t: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != a.len() {
            return Err(Error::InvalidInput(
                "weight table needs matching, non-empty t and a columns".into(),
            ));
        }
        if t.iter().chain(&a).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "weight table contains non-finite values".into(),
            ));
        }
        if t[0] < 0.0 {
            return Err(Error::InvalidInput(
                "weight table times must be >= 0".into(),
            ));
        }
        if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "weight table times not increasing at row {}",
                i + 2
            )));
        }
        Ok(Self { t, a })
    }

    /// Parses a table with header `t,a`.
    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "a"] {
            return Err(Error::InvalidInput(
                "weight table header must be `t,a`".into(),
            ));
        }
        let (mut t, mut a) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let (ti, ai): (f64, f64) = rec?.deserialize(None)?;
            t.push(ti);
            a.push(ai);
        }
        Self::new(t, a)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(std::fs::File::open(path)?)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x < self.t[0] || x > self.t[n - 1] {
            return 0.0;
        }
        let i = self.t.partition_point(|&s| s <= x);
        if i == n {
            return self.a[n - 1];
        }
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let s = (x - t0) / (t1 - t0);
        self.a[i - 1] * (1.0 - s) + self.a[i] * s
    }

    /// Last block touched by the table for period `T`.
    pub fn last_block(&self, period: f64) -> usize {
        let end = self.t[self.t.len() - 1];
        ((end / period).ceil() as usize).saturating_sub(1)
    }

    /// Lifts the table over blocks `0..=j_max` (default: every block the
    /// table reaches, or `N` for finite horizons).
    pub fn weights(
        &self,
        cfg: &LiftConfig,
        horizon: Horizon,
        j_max: Option<usize>,
    ) -> Result<FunctionalWeights> {
        let j_max = match horizon {
            Horizon::Interpolation(n) | Horizon::ExtrapolationFinite(n) => n,
            _ => j_max.unwrap_or_else(|| self.last_block(cfg.period)),
        };
        let q = cfg.quadrature_points;
        let samples: Vec<C64> = (0..=(j_max + 1) * q)
            .map(|i| C64::new(self.eval(i as f64 * cfg.period / q as f64), 0.0))
            .collect();
        compute_weights(&samples, cfg, j_max, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_round_trip_and_fill() {
        let text = "m,row,col,re,im\n0,0,0,1.25,0\n1,0,0,0.5,0\n";
        let f = parse_density(text.as_bytes(), 64).unwrap();
        assert_eq!(f.coeff(-1)[(0, 0)], C64::new(0.5, 0.0));
        let mut buf = Vec::new();
        write_density(&mut buf, &f).unwrap();
        let g = parse_density(buf.as_slice(), 64).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn density_header_checked() {
        assert!(parse_density("lag,row,col,re,im\n0,0,0,1,0\n".as_bytes(), 64).is_err());
    }

    #[test]
    fn weight_table_interpolates() {
        let w = WeightTable::parse("t,a\n0,1\n1,3\n".as_bytes()).unwrap();
        assert_eq!(w.eval(0.5), 2.0);
        assert_eq!(w.eval(1.0), 3.0);
        assert_eq!(w.eval(1.5), 0.0);
        assert_eq!(w.last_block(1.0), 0);
        assert!(WeightTable::parse("t,a\n1,1\n0,3\n".as_bytes()).is_err());
    }
}
