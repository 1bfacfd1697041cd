//! Core domain types: point patterns, distortion choices, codebooks and
//! rate-distortion records.
//!
//! A [`PointPattern`] is a finite multiset of `d`-dimensional points. Points
//! are stored row-major in one flat buffer; the stored order carries no
//! meaning and equality ignores it.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A finite multiset of points in `R^d`.
#[derive(Debug, Clone)]
pub struct PointPattern {
    dim: usize,
    coords: Vec<f64>,
}

impl PointPattern {
    /// Builds a pattern from a flat row-major coordinate buffer.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} coordinates do not split into points of dimension {}",
                coords.len(),
                dim
            )));
        }
        Ok(Self { dim, coords })
    }

    /// The empty pattern in `R^dim`.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::Dimension(format!(
                    "point {} has {} coordinates, expected {}",
                    i,
                    p.len(),
                    dim
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cardinality `|X|`.
    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Flat row-major coordinates in stored order.
    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Same multiset with points in canonical (lexicographic, `total_cmp`) order.
    pub fn canonical(&self) -> PointPattern {
        let mut pts: Vec<&[f64]> = self.points().collect();
        pts.sort_by(|a, b| lex_cmp(a, b));
        let coords = pts.into_iter().flatten().copied().collect();
        PointPattern {
            dim: self.dim,
            coords,
        }
    }

    /// Squared Euclidean norm of the flattened vector, i.e. `||x_{1:k}||^2`.
    pub fn vector_sq_norm(&self) -> f64 {
        self.coords.iter().map(|v| v * v).sum()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl PartialEq for PointPattern {
    fn eq(&self, other: &Self) -> bool {
        if self.dim != other.dim || self.coords.len() != other.coords.len() {
            return false;
        }
        let a = self.canonical();
        let b = other.canonical();
        a.coords
            .iter()
            .zip(&b.coords)
            .all(|(x, y)| x.to_bits() == y.to_bits())
    }
}

impl Eq for PointPattern {}

/// Maps an ordered vector `(x_1, ..., x_k)` in `(R^d)^k` to the pattern
/// `{x_1, ..., x_k}`, forgetting the order.
pub fn pattern_from_vector(coords: &[f64], k: usize, d: usize) -> Result<PointPattern> {
    if d == 0 {
        return Err(Error::Dimension("dimension must be positive".into()));
    }
    if coords.len() != k * d {
        return Err(Error::Dimension(format!(
            "expected k*d = {}*{} = {} coordinates, got {}",
            k,
            d,
            k * d,
            coords.len()
        )));
    }
    PointPattern::new(d, coords.to_vec())
}

/// Serializes as `k;d;x1,y1;x2,y2;...`.
impl fmt::Display for PointPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{}", self.len(), self.dim)?;
        for p in self.points() {
            f.write_str(";")?;
            for (j, v) in p.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", v)?;
            }
        }
        Ok(())
    }
}

impl FromStr for PointPattern {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let mut fields = line.trim().split(';');
        let mut header = |name: &str| -> Result<usize> {
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {} in pattern line", name)))?
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad {}: {}", name, e)))
        };
        let k = header("cardinality")?;
        let d = header("dimension")?;
        let mut coords = Vec::with_capacity(k * d);
        let mut count = 0;
        for field in fields {
            count += 1;
            let before = coords.len();
            for v in field.split(',') {
                coords.push(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad coordinate '{}': {}", v, e)))?,
                );
            }
            if coords.len() - before != d {
                return Err(Error::Parse(format!(
                    "point {} has {} coordinates, expected {}",
                    count,
                    coords.len() - before,
                    d
                )));
            }
        }
        if count != k {
            return Err(Error::Parse(format!(
                "header announces {} points, found {}",
                k, count
            )));
        }
        PointPattern::new(d, coords)
    }
}

/// Which distortion a codebook or evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistortionSpec {
    /// Minimum-assignment squared error; equal cardinalities only.
    FixedCardinalitySquared,
    /// Unnormalized squared OSPA with cut-off `c`.
    Usospa { cutoff: f64 },
}

impl DistortionSpec {
    pub fn usospa(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::Config(format!(
                "cut-off must be positive and finite, got {}",
                cutoff
            )));
        }
        Ok(DistortionSpec::Usospa { cutoff })
    }

    pub fn cutoff(&self) -> Option<f64> {
        match *self {
            DistortionSpec::FixedCardinalitySquared => None,
            DistortionSpec::Usospa { cutoff } => Some(cutoff),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistortionSpec::FixedCardinalitySquared => "rho2",
            DistortionSpec::Usospa { .. } => "usospa",
        }
    }

    /// Evaluates the distortion between two patterns.
    pub fn eval(&self, x: &PointPattern, y: &PointPattern) -> Result<f64> {
        match *self {
            DistortionSpec::FixedCardinalitySquared => crate::distortion::rho2(x, y),
            DistortionSpec::Usospa { cutoff } => crate::distortion::usospa(x, y, cutoff),
        }
    }
}

/// Training provenance carried with a codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookMeta {
    pub heuristic: String,
    pub training_samples: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Average distortion on the training set of the returned codebook.
    pub training_distortion: f64,
}

impl CodebookMeta {
    pub fn untrained(heuristic: &str, seed: u64) -> Self {
        Self {
            heuristic: heuristic.to_string(),
            training_samples: 0,
            seed,
            iterations: 0,
            training_distortion: f64::NAN,
        }
    }
}

/// An indexed sequence of codeword patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Vec<PointPattern>,
    pub distortion: DistortionSpec,
    pub meta: CodebookMeta,
}

impl Codebook {
    pub fn new(
        codewords: Vec<PointPattern>,
        distortion: DistortionSpec,
        meta: CodebookMeta,
    ) -> Result<Self> {
        let first = codewords
            .first()
            .ok_or_else(|| Error::Input("codebook needs at least one codeword".into()))?;
        let d = first.dim();
        if let Some(bad) = codewords.iter().position(|c| c.dim() != d) {
            return Err(Error::Dimension(format!(
                "codeword {} has dimension {}, expected {}",
                bad,
                codewords[bad].dim(),
                d
            )));
        }
        Ok(Self {
            codewords,
            distortion,
            meta,
        })
    }

    /// Number of codewords `M`.
    pub fn size(&self) -> usize {
        self.codewords.len()
    }

    pub fn dim(&self) -> usize {
        self.codewords[0].dim()
    }

    /// Header `M;d;distortion;c;heuristic;seed` followed by one codeword per line.
    pub fn to_text(&self) -> String {
        let cutoff = self
            .distortion
            .cutoff()
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".to_string());
        let mut out = format!(
            "{};{};{};{};{};{}\n",
            self.size(),
            self.dim(),
            self.distortion.name(),
            cutoff,
            self.meta.heuristic,
            self.meta.seed
        );
        for cw in &self.codewords {
            out.push_str(&cw.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses one or more consecutive codebook blocks.
    pub fn parse_blocks(text: &str) -> Result<Vec<Codebook>> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut books = Vec::new();
        while let Some(header) = lines.next() {
            let f: Vec<&str> = header.split(';').collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!("bad codebook header '{}'", header)));
            }
            let m: usize = f[0]
                .parse()
                .map_err(|e| Error::Parse(format!("bad M: {}", e)))?;
            let d: usize = f[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad d: {}", e)))?;
            let distortion = match f[2] {
                "rho2" => DistortionSpec::FixedCardinalitySquared,
                "usospa" => DistortionSpec::usospa(
                    f[3].parse()
                        .map_err(|e| Error::Parse(format!("bad cut-off: {}", e)))?,
                )?,
                other => return Err(Error::Parse(format!("unknown distortion '{}'", other))),
            };
            let seed: u64 = f[5]
                .parse()
                .map_err(|e| Error::Parse(format!("bad seed: {}", e)))?;
            let mut codewords = Vec::with_capacity(m);
            for _ in 0..m {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse("codebook truncated".into()))?;
                let cw: PointPattern = line.parse()?;
                if cw.dim() != d {
                    return Err(Error::Dimension(format!(
                        "codeword dimension {} does not match header {}",
                        cw.dim(),
                        d
                    )));
                }
                codewords.push(cw);
            }
            books.push(Codebook::new(
                codewords,
                distortion,
                CodebookMeta::untrained(f[4], seed),
            )?);
        }
        Ok(books)
    }
}

/// One `(D, R)` row of a bound curve. Rates are in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub distortion: f64,
    pub rate: f64,
    pub bound_id: String,
    pub params: BTreeMap<String, String>,
}

impl RdPoint {
    pub fn new(distortion: f64, rate: f64, bound_id: impl Into<String>) -> Result<Self> {
        if !(distortion >= 0.0) {
            return Err(Error::Domain(format!(
                "distortion must be nonnegative, got {}",
                distortion
            )));
        }
        Ok(Self {
            distortion,
            rate,
            bound_id: bound_id.into(),
            params: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}
