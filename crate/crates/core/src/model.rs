//! Problem parameters, datasets, signals, supports and sample splitting.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, CowArray, Ix1, Ix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters `(n, p, s, a, sigma)` of a sparse recovery problem together
/// with the sizes of the two subsamples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub a: f64,
    pub sigma: f64,
    pub n1: usize,
    pub n2: usize,
}

impl ProblemInstance {
    /// Validates the parameters and fills in `n2 = n - n1`.
    pub fn new(n: usize, p: usize, s: usize, a: f64, sigma: f64, n1: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Self::build(n, p, s, a, sigma, n1)
    }

    /// An instance with `sigma = 0`, for exact-fit experiments.
    pub fn noiseless(n: usize, p: usize, s: usize, a: f64, n1: usize) -> Result<Self> {
        Self::build(n, p, s, a, 0.0, n1)
    }

    fn build(n: usize, p: usize, s: usize, a: f64, sigma: f64, n1: usize) -> Result<Self> {
        let n2 = n.saturating_sub(n1);
        let out = ProblemInstance {
            n,
            p,
            s,
            a,
            sigma,
            n1,
            n2,
        };
        out.validate()?;
        Ok(out)
    }

    /// Checks every field; `sigma = 0` is accepted.
    pub fn validate(&self) -> Result<()> {
        let &ProblemInstance {
            n,
            p,
            s,
            a,
            sigma,
            n1,
            n2,
        } = self;
        if n == 0 || p == 0 || s == 0 || n1 == 0 {
            return Err(Error::invalid("n, p, s and n1 must be positive"));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!(
                "a must be positive and finite, got {a}"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        if s > p {
            return Err(Error::invalid(format!(
                "sparsity s={s} exceeds dimension p={p}"
            )));
        }
        if n1 >= n {
            return Err(Error::invalid(format!(
                "first subsample size n1={n1} must be smaller than n={n}"
            )));
        }
        if n1 + n2 != n {
            return Err(Error::invalid(format!(
                "n1 + n2 = {} differs from n = {n}",
                n1 + n2
            )));
        }
        Ok(())
    }

    /// Same instance with a different noise level, keeping every other field.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        if sigma == 0.0 {
            return Self::noiseless(self.n, self.p, self.s, self.a, self.n1);
        }
        Self::new(self.n, self.p, self.s, self.a, sigma, self.n1)
    }

    /// The default split: the first `n1` rows against the remaining `n2`.
    pub fn default_split(&self) -> SplitScheme {
        SplitScheme::leading(self.n, self.n1)
    }
}

/// Design matrix `X` (n x p, row-major) and response `Y` (length n).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        let x = if x.is_standard_layout() {
            x
        } else {
            x.as_standard_layout().into_owned()
        };
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn view(&self) -> DatasetView<'_> {
        DatasetView {
            x: CowArray::from(self.x.view()),
            y: CowArray::from(self.y.view()),
        }
    }
}

/// Rows of a [`Dataset`]. Contiguous row ranges borrow the parent storage;
/// scattered index sets are gathered.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    x: CowArray<'a, f64, Ix2>,
    y: CowArray<'a, f64, Ix1>,
}

impl<'a> DatasetView<'a> {
    pub fn from_views(x: ArrayView2<'a, f64>, y: ArrayView1<'a, f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        Ok(DatasetView {
            x: CowArray::from(x),
            y: CowArray::from(y),
        })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Whether the rows are borrowed from the parent dataset.
    pub fn is_borrowed(&self) -> bool {
        self.x.is_view()
    }

    /// Sub-view over a contiguous range of this view's rows.
    pub fn rows(&self, range: std::ops::Range<usize>) -> DatasetView<'_> {
        DatasetView {
            x: CowArray::from(self.x.slice(s![range.clone(), ..])),
            y: CowArray::from(self.y.slice(s![range])),
        }
    }

    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            x: self.x.to_owned(),
            y: self.y.to_owned(),
        }
    }
}

/// The signal `beta`. Membership in the sparse class is checked by
/// [`SparseVector::in_class`], not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn new(values: Vec<f64>) -> Self {
        SparseVector { values }
    }

    pub fn zeros(p: usize) -> Self {
        SparseVector {
            values: vec![0.0; p],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_array(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.values[..])
    }

    pub fn l0(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// True iff at most `s` entries are nonzero and every nonzero entry has
    /// magnitude at least `a`.
    pub fn in_class(&self, s: usize, a: f64) -> bool {
        self.l0() <= s && self.values.iter().all(|&v| v == 0.0 || v.abs() >= a)
    }

    /// Indicator of the nonzero entries. Zero detection is exact.
    pub fn support(&self) -> SupportMask {
        SupportMask {
            bits: self.values.iter().map(|&v| v != 0.0).collect(),
        }
    }

    pub fn distance(&self, other: &SparseVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Array1<f64>> for SparseVector {
    fn from(a: Array1<f64>) -> Self {
        SparseVector { values: a.to_vec() }
    }
}

/// Free-function form of [`SparseVector::in_class`].
pub fn membership_omega(beta: &SparseVector, s: usize, a: f64) -> bool {
    beta.in_class(s, a)
}

pub fn support_of(beta: &SparseVector) -> SupportMask {
    beta.support()
}

/// A binary vector in `{0,1}^p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportMask {
    pub bits: Vec<bool>,
}

impl SupportMask {
    pub fn zeros(p: usize) -> Self {
        SupportMask {
            bits: vec![false; p],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid(format!(
                    "support entry {other} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(|bits| SupportMask { bits })
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| b as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Whether every selected position of `self` is also selected in `other`.
    pub fn is_subset_of(&self, other: &SupportMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn hamming(&self, other: &SupportMask) -> Result<usize> {
        hamming_distance(self, other)
    }
}

impl Serialize for SupportMask {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_bits().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SupportMask {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<u8>::deserialize(deserializer)?;
        SupportMask::from_bits(&bits).map_err(serde::de::Error::custom)
    }
}

pub fn hamming_distance(eta1: &SupportMask, eta2: &SupportMask) -> Result<usize> {
    if eta1.len() != eta2.len() {
        return Err(Error::DimensionMismatch {
            expected: eta1.len(),
            found: eta2.len(),
        });
    }
    Ok(eta1
        .bits
        .iter()
        .zip(&eta2.bits)
        .filter(|(a, b)| a != b)
        .count())
}

/// Two disjoint row index sets, the first used for the pilot estimate and the
/// second for the debiased statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitScheme {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl SplitScheme {
    /// Rows `0..n1` against `n1..n`.
    pub fn leading(n: usize, n1: usize) -> Self {
        SplitScheme {
            first: (0..n1.min(n)).collect(),
            second: (n1.min(n)..n).collect(),
        }
    }

    pub fn new(first: Vec<usize>, second: Vec<usize>) -> Result<Self> {
        let scheme = SplitScheme { first, second };
        if scheme.first.is_empty() || scheme.second.is_empty() {
            return Err(Error::invalid("both subsamples must be non-empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for &i in scheme.first.iter().chain(&scheme.second) {
            if !seen.insert(i) {
                return Err(Error::invalid(format!(
                    "row {i} appears twice in the split"
                )));
            }
        }
        Ok(scheme)
    }

    pub fn n1(&self) -> usize {
        self.first.len()
    }

    pub fn n2(&self) -> usize {
        self.second.len()
    }

    /// Checks the scheme against a problem's declared split sizes.
    pub fn check_sizes(&self, problem: &ProblemInstance) -> Result<()> {
        if self.n1() != problem.n1 || self.n2() != problem.n2 {
            return Err(Error::invalid(format!(
                "split sizes ({}, {}) do not match problem ({}, {})",
                self.n1(),
                self.n2(),
                problem.n1,
                problem.n2
            )));
        }
        Ok(())
    }
}

fn contiguous(idx: &[usize]) -> Option<std::ops::Range<usize>> {
    let first = *idx.first()?;
    idx.iter()
        .enumerate()
        .all(|(k, &i)| i == first + k)
        .then(|| first..first + idx.len())
}

fn view_rows<'a>(data: &'a Dataset, idx: &[usize]) -> DatasetView<'a> {
    match contiguous(idx) {
        Some(r) => DatasetView {
            x: CowArray::from(data.x.slice(s![r.clone(), ..])),
            y: CowArray::from(data.y.slice(s![r])),
        },
        None => DatasetView {
            x: CowArray::from(data.x.select(Axis(0), idx)),
            y: CowArray::from(data.y.select(Axis(0), idx)),
        },
    }
}

/// Splits `data` into the two row-disjoint subsamples described by `scheme`.
pub fn split_sample<'a>(
    data: &'a Dataset,
    scheme: &SplitScheme,
) -> Result<(DatasetView<'a>, DatasetView<'a>)> {
    if scheme.first.is_empty() || scheme.second.is_empty() {
        return Err(Error::invalid("both subsamples must be non-empty"));
    }
    let n = data.n();
    if let Some(&bad) = scheme.first.iter().chain(&scheme.second).find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    Ok((
        view_rows(data, &scheme.first),
        view_rows(data, &scheme.second),
    ))
}
