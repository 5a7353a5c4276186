//! Value types shared across the crate: observations, index segments,
//! parameter vectors and their admissible boxes.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x m` block of observations, stored row-major (one row per time point).
///
/// Count data is stored as `f64` but flagged, and every entry is checked to be a
/// non-negative integer when the flag is set.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    data: Vec<f64>,
    n: usize,
    m: usize,
    counts: bool,
}

impl TimeSeries {
    pub fn new(data: Vec<f64>, m: usize, counts: bool) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSeries("dimension m must be >= 1".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(m) {
            return Err(Error::InvalidSeries(format!(
                "{} values cannot form a non-empty series of dimension {m}",
                data.len()
            )));
        }
        let n = data.len() / m;
        for (idx, &v) in data.iter().enumerate() {
            check_value(v, counts).map_err(|msg| Error::Parse {
                row: idx / m + 1,
                msg,
            })?;
        }
        Ok(Self { data, n, m, counts })
    }

    pub fn from_rows(rows: &[Vec<f64>], counts: bool) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * m);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("expected {m} columns, found {}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(data, m, counts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_counts(&self) -> bool {
        self.counts
    }

    /// Observation `Y_t` for `1 <= t <= n`.
    pub fn row(&self, t: usize) -> &[f64] {
        assert!(
            t >= 1 && t <= self.n,
            "time index {t} outside 1..={}",
            self.n
        );
        &self.data[(t - 1) * self.m..t * self.m]
    }

    /// `Y_{t-1}` under the truncated-past convention: `Y_0` is the zero vector.
    pub fn lagged(&self, t: usize) -> Option<&[f64]> {
        if t <= 1 {
            None
        } else {
            Some(self.row(t - 1))
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }

    /// The full-sample segment `T_{1,n}`.
    pub fn full(&self) -> Segment {
        Segment { lo: 1, hi: self.n }
    }

    pub fn check_segment(&self, seg: Segment) -> Result<()> {
        if seg.lo < 1 || seg.hi > self.n || seg.lo > seg.hi {
            return Err(Error::InvalidSegment {
                lo: seg.lo,
                hi: seg.hi,
                n: self.n,
            });
        }
        Ok(())
    }

    /// Column means over a segment.
    pub fn mean(&self, seg: Segment) -> Vec<f64> {
        let mut acc = vec![0.0; self.m];
        for t in seg.lo..=seg.hi {
            for (a, y) in acc.iter_mut().zip(self.row(t)) {
                *a += y;
            }
        }
        let len = seg.len() as f64;
        acc.iter_mut().for_each(|a| *a /= len);
        acc
    }

    /// Strict CSV ingestion. The header must read `y1,...,ym`; NaN and infinite
    /// values are rejected, as are non-integers when `counts` is set.
    pub fn read_csv<R: Read>(reader: R, counts: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let m = headers.len();
        if m == 0 {
            return Err(Error::Parse {
                row: 1,
                msg: "empty header".into(),
            });
        }
        for (j, h) in headers.iter().enumerate() {
            let want = format!("y{}", j + 1);
            if h != want {
                return Err(Error::Parse {
                    row: 1,
                    msg: format!("header column {} is '{h}', expected '{want}'", j + 1),
                });
            }
        }
        let mut data = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            // line 1 is the header
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse {
                row: line,
                msg: e.to_string(),
            })?;
            if record.len() != m {
                return Err(Error::Parse {
                    row: line,
                    msg: format!("expected {m} fields, found {}", record.len()),
                });
            }
            for field in record.iter() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row: line,
                    msg: format!("'{field}' is not a number"),
                })?;
                check_value(v, counts).map_err(|msg| Error::Parse { row: line, msg })?;
                data.push(v);
            }
        }
        if data.is_empty() {
            return Err(Error::InvalidSeries("no observations".into()));
        }
        Ok(Self {
            n: data.len() / m,
            data,
            m,
            counts,
        })
    }

    /// Writes the series in the same format [`TimeSeries::read_csv`] accepts.
    /// Floats use the shortest representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.m).map(|j| format!("y{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                if self.counts {
                    line.push_str(&format!("{}", *v as u64));
                } else {
                    line.push_str(&format!("{v:?}"));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn check_value(v: f64, counts: bool) -> std::result::Result<(), String> {
    if !v.is_finite() {
        return Err(format!("non-finite value {v}"));
    }
    if counts && (v < 0.0 || v.fract() != 0.0) {
        return Err(format!("{v} is not a non-negative integer count"));
    }
    Ok(())
}

/// Inclusive, 1-based index range `T_{lo,hi} = {lo, ..., hi}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub lo: usize,
    pub hi: usize,
}

impl Segment {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo < 1 || lo > hi {
            return Err(Error::InvalidSegment { lo, hi, n: hi });
        }
        Ok(Self { lo, hi })
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

pub fn segment_len(s: Segment) -> usize {
    s.len()
}

/// A point in the parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Compact box `[lower_i, upper_i]` containing the admissible parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidModel(format!(
                "empty box in coordinate {i}: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &ParamVector) -> bool {
        theta.len() == self.dim()
            && theta
                .0
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn project_in_place(&self, theta: &mut [f64]) {
        for (v, (lo, hi)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn project(&self, theta: &ParamVector) -> ParamVector {
        let mut out = theta.clone();
        self.project_in_place(&mut out.0);
        out
    }
}

/// Boundary length `u_n` and scan margin `v_n` for a sample of size `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tuning {
    pub u_n: usize,
    pub v_n: usize,
}

fn raw_tuning(n: usize) -> Tuning {
    let l = (n as f64).ln();
    Tuning {
        u_n: (l * l).floor() as usize,
        v_n: l.powf(2.5).floor() as usize,
    }
}

fn tuning_ok(n: usize, d: usize) -> bool {
    let t = raw_tuning(n);
    2 * t.v_n < n && t.u_n > d
}

/// Smallest admissible sample size for a `d`-parameter model.
pub fn min_sample_size(d: usize) -> usize {
    (2..).find(|&n| tuning_ok(n, d)).expect("unbounded search")
}

/// `u_n = floor(ln(n)^2)`, `v_n = floor(ln(n)^{5/2})`.
pub fn tuning_sequences(n: usize, d: usize) -> Result<Tuning> {
    if n < min_sample_size(d) || !tuning_ok(n, d) {
        return Err(Error::SampleTooSmall {
            n,
            n_min: min_sample_size(d),
        });
    }
    Ok(raw_tuning(n))
}
