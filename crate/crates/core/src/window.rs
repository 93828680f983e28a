//! Finite truncations of bi-infinite matrices over an integer index window.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::toeplitz::CoeffSequence;

/// A dense matrix indexed by `[lo, hi] × [lo, hi]`.
///
/// Only the interior `[lo + pad, hi - pad]` is meant to be read by
/// certified computations; the pad absorbs edge effects of truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMatrix {
    lo: i64,
    hi: i64,
    pad: usize,
    entries: DMatrix<f64>,
}

/// Window bounds plus pad, for serialization and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub lo: i64,
    pub hi: i64,
    pub pad: usize,
}

impl WindowSpec {
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn interior(&self) -> (i64, i64) {
        (self.lo + self.pad as i64, self.hi - self.pad as i64)
    }

    /// Window `[lo - pad, hi + pad]` whose interior is `[lo, hi]`.
    pub fn around(lo: i64, hi: i64, pad: usize) -> Self {
        Self { lo: lo - pad as i64, hi: hi + pad as i64, pad }
    }
}

impl WindowMatrix {
    pub fn new(lo: i64, hi: i64, pad: usize, entries: DMatrix<f64>) -> Result<Self> {
        if hi < lo {
            return Err(Error::Dimension(format!("empty window [{lo}, {hi}]")));
        }
        let n = (hi - lo + 1) as usize;
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Dimension(format!(
                "window [{lo}, {hi}] needs {n}x{n} entries, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if 2 * pad >= n {
            return Err(Error::Dimension(format!("pad {pad} leaves no interior in [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, pad, entries })
    }

    pub fn zeros(spec: WindowSpec) -> Self {
        let n = spec.len();
        Self::new(spec.lo, spec.hi, spec.pad, DMatrix::zeros(n, n)).expect("valid window spec")
    }

    pub fn from_fn(spec: WindowSpec, mut f: impl FnMut(i64, i64) -> f64) -> Self {
        let n = spec.len();
        let entries = DMatrix::from_fn(n, n, |i, j| f(spec.lo + i as i64, spec.lo + j as i64));
        Self::new(spec.lo, spec.hi, spec.pad, entries).expect("valid window spec")
    }

    pub fn identity(spec: WindowSpec) -> Self {
        Self::from_fn(spec, |n, m| if n == m { 1.0 } else { 0.0 })
    }

    /// The right shift `δ_m ↦ δ_{m+1}`, i.e. entries `δ_{n, m+1}`.
    pub fn shift(spec: WindowSpec) -> Self {
        Self::from_fn(spec, |n, m| if n == m + 1 { 1.0 } else { 0.0 })
    }

    /// Symmetric Toeplitz truncation with entries `a_{|n-m|}`.
    pub fn toeplitz(seq: &CoeffSequence, spec: WindowSpec) -> Self {
        Self::from_fn(spec, |n, m| seq.at(n - m))
    }

    pub fn spec(&self) -> WindowSpec {
        WindowSpec { lo: self.lo, hi: self.hi, pad: self.pad }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.lo && n <= self.hi
    }

    /// Entry `(n, m)`; zero outside the window.
    pub fn get(&self, n: i64, m: i64) -> f64 {
        if self.contains(n) && self.contains(m) {
            self.entries[((n - self.lo) as usize, (m - self.lo) as usize)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, n: i64, m: i64, v: f64) {
        assert!(self.contains(n) && self.contains(m), "({n}, {m}) outside window");
        self.entries[((n - self.lo) as usize, (m - self.lo) as usize)] = v;
    }

    pub fn interior(&self) -> (i64, i64) {
        self.spec().interior()
    }

    pub fn interior_matrix(&self) -> DMatrix<f64> {
        let p = self.pad;
        let k = self.len() - 2 * p;
        self.entries.view((p, p), (k, k)).into_owned()
    }

    /// Same data over `[lo, hi] ⊇ self`, zero-filled, with a new pad.
    pub fn embed(&self, spec: WindowSpec) -> Result<Self> {
        if spec.lo > self.lo || spec.hi < self.hi {
            return Err(Error::WindowTooSmall { lo: spec.lo, hi: spec.hi, need_lo: self.lo, need_hi: self.hi });
        }
        let mut out = Self::zeros(spec);
        let off = (self.lo - spec.lo) as usize;
        let n = self.len();
        out.entries.view_mut((off, off), (n, n)).copy_from(&self.entries);
        Ok(out)
    }

    /// Sub-block over `[lo, hi] ⊆ self`.
    pub fn restrict(&self, spec: WindowSpec) -> Result<Self> {
        if spec.lo < self.lo || spec.hi > self.hi {
            return Err(Error::WindowTooSmall { lo: self.lo, hi: self.hi, need_lo: spec.lo, need_hi: spec.hi });
        }
        let off = (spec.lo - self.lo) as usize;
        let n = spec.len();
        Self::new(spec.lo, spec.hi, spec.pad, self.entries.view((off, off), (n, n)).into_owned())
    }

    /// `self + c * other` over the union window; pad is the larger of the two.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        let spec = WindowSpec {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            pad: self.pad.max(other.pad),
        };
        let mut a = self.embed(spec).expect("union contains self");
        let b = other.embed(spec).expect("union contains other");
        a.entries += b.entries * c;
        a
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { entries: &self.entries * c, ..self.clone() }
    }

    pub fn transpose(&self) -> Self {
        Self { entries: self.entries.transpose(), ..self.clone() }
    }

    /// Product over a common window.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.lo != other.lo || self.hi != other.hi {
            return Err(Error::Dimension("product needs identical windows".into()));
        }
        Ok(Self { entries: &self.entries * &other.entries, ..self.clone() })
    }

    /// Largest singular value of the whole window.
    pub fn op_norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// Largest singular value of the interior block.
    pub fn interior_norm(&self) -> f64 {
        spectral_norm(&self.interior_matrix())
    }

    /// Largest absolute entry on diagonals with `|n - m| > offset`, interior only.
    pub fn off_band_max(&self, offset: usize) -> f64 {
        let (ilo, ihi) = self.interior();
        let mut worst: f64 = 0.0;
        for n in ilo..=ihi {
            for m in ilo..=ihi {
                if (n - m).unsigned_abs() as usize > offset {
                    worst = worst.max(self.get(n, m).abs());
                }
            }
        }
        worst
    }

    pub fn apply(&self, x: &LatticeVector) -> Result<LatticeVector> {
        let spec = self.spec();
        let v = x.embed(spec.lo, spec.hi)?;
        let y = &self.entries * DVector::from_vec(v.values);
        Ok(LatticeVector { lo: self.lo, values: y.iter().copied().collect() })
    }

    /// Dense CSV: two `#` metadata lines, a header of column indices, then one row per `n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# window={}..{}", self.lo, self.hi)?;
        writeln!(out, "# pad={}", self.pad)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["n".to_string()];
        header.extend((self.lo..=self.hi).map(|m| m.to_string()));
        w.write_record(&header)?;
        for (i, n) in (self.lo..=self.hi).enumerate() {
            let mut rec = vec![n.to_string()];
            rec.extend(self.entries.row(i).iter().map(|v| format_float(*v)));
            w.write_record(&rec)?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lo = None;
        let mut hi = None;
        let mut pad = None;
        let mut body = String::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::Dimension(e.to_string()))?;
            if let Some(meta) = line.strip_prefix("# ") {
                if let Some(w) = meta.strip_prefix("window=") {
                    let (a, b) = w.split_once("..").ok_or_else(|| Error::Dimension("bad window line".into()))?;
                    lo = a.parse::<i64>().ok();
                    hi = b.parse::<i64>().ok();
                } else if let Some(p) = meta.strip_prefix("pad=") {
                    pad = p.parse::<usize>().ok();
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let (lo, hi, pad) = match (lo, hi, pad) {
            (Some(a), Some(b), Some(p)) => (a, b, p),
            _ => return Err(Error::Dimension("missing window metadata".into())),
        };
        let n = (hi - lo + 1).max(0) as usize;
        let mut data = Vec::with_capacity(n * n);
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Dimension(e.to_string()))?;
            for field in rec.iter().skip(1) {
                data.push(field.parse::<f64>().map_err(|e| Error::Dimension(e.to_string()))?);
            }
        }
        if data.len() != n * n {
            return Err(Error::Dimension(format!("expected {} entries, found {}", n * n, data.len())));
        }
        Self::new(lo, hi, pad, DMatrix::from_row_slice(n, n, &data))
    }
}

/// A finitely supported vector on `ℤ`, starting at index `lo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeVector {
    pub lo: i64,
    pub values: Vec<f64>,
}

impl LatticeVector {
    pub fn new(lo: i64, values: Vec<f64>) -> Self {
        Self { lo, values }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> f64 {
        if n < self.lo || n > self.hi() {
            0.0
        } else {
            self.values[(n - self.lo) as usize]
        }
    }

    /// Indices of the first and last nonzero entries.
    pub fn support(&self) -> Option<(i64, i64)> {
        let first = self.values.iter().position(|v| *v != 0.0)?;
        let last = self.values.iter().rposition(|v| *v != 0.0)?;
        Some((self.lo + first as i64, self.lo + last as i64))
    }

    pub fn embed(&self, lo: i64, hi: i64) -> Result<Self> {
        if let Some((a, b)) = self.support() {
            if a < lo || b > hi {
                return Err(Error::SupportViolation { lo: a, hi: b, min: lo, max: hi });
            }
        }
        Ok(Self { lo, values: (lo..=hi).map(|n| self.get(n)).collect() })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Largest singular value by dense SVD.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0f64, |a, b| a.max(*b))
}

/// Shortest round-trip representation, so reports are byte-stable.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:e}")
    }
}
