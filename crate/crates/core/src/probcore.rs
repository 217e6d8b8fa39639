//! Finite distributions, stochastic kernels and their composition algebra.
//!
//! Alphabets are index sets `0..k`. A [`CondDist`] is a dense row-stochastic
//! table `rows[input][output]`. Kernels that also depend on a conditioning
//! symbol `u` are passed through [`Kernel::PerContext`]; kernels that ignore
//! it are passed through [`Kernel::Shared`]. The broadcast is always chosen by
//! the caller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rows summing to one within this tolerance are accepted unchanged.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Rows drifting by less than this are renormalized; anything larger is rejected.
pub const RENORMALIZE_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,
    #[error("entry {index} of row {row} is {value}; probabilities must be finite and non-negative")]
    InvalidEntry { row: usize, index: usize, value: f64 },
    #[error("row {row} sums to {sum}")]
    NotNormalized { row: usize, sum: f64 },
    #[error("rows have differing lengths")]
    Ragged,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("output symbol {output} receives mass from inputs {first} and {second}; kernel is not determining")]
    NotDetermining { output: usize, first: usize, second: usize },
}

pub type Result<T> = std::result::Result<T, ProbError>;

fn normalize_row(row: &mut [f64], row_index: usize) -> Result<()> {
    if row.is_empty() {
        return Err(ProbError::EmptyAlphabet);
    }
    for (index, &value) in row.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ProbError::InvalidEntry { row: row_index, index, value });
        }
    }
    let sum: f64 = row.iter().sum();
    let drift = (sum - 1.0).abs();
    if drift <= NORMALIZATION_TOL {
        Ok(())
    } else if drift < RENORMALIZE_LIMIT {
        row.iter_mut().for_each(|p| *p /= sum);
        Ok(())
    } else {
        Err(ProbError::NotNormalized { row: row_index, sum })
    }
}

/// A probability vector over `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Dist {
    mass: Vec<f64>,
}

impl Dist {
    pub fn new(mut mass: Vec<f64>) -> Result<Self> {
        normalize_row(&mut mass, 0)?;
        Ok(Dist { mass })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        Ok(Dist { mass: vec![1.0 / size as f64; size] })
    }

    pub fn point(size: usize, symbol: usize) -> Result<Self> {
        if symbol >= size {
            return Err(ProbError::Dimension(format!("symbol {symbol} outside alphabet of size {size}")));
        }
        let mut mass = vec![0.0; size];
        mass[symbol] = 1.0;
        Ok(Dist { mass })
    }

    /// `[1 - p, p]`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Dist::new(vec![1.0 - p, p])
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, symbol: usize) -> f64 {
        self.mass[symbol]
    }

    /// The distribution as a kernel with a single input symbol.
    pub fn as_kernel(&self) -> CondDist {
        CondDist { in_size: 1, out_size: self.len(), data: self.mass.clone() }
    }
}

impl TryFrom<Vec<f64>> for Dist {
    type Error = ProbError;
    fn try_from(mass: Vec<f64>) -> Result<Self> {
        Dist::new(mass)
    }
}

impl From<Dist> for Vec<f64> {
    fn from(d: Dist) -> Self {
        d.mass
    }
}

/// Wire form shared by every kernel type: `{"rows": [[...], ...]}`.
#[derive(Serialize, Deserialize)]
struct RowsRepr {
    rows: Vec<Vec<f64>>,
}

/// A row-stochastic kernel `v(out | in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RowsRepr", into = "RowsRepr")]
pub struct CondDist {
    in_size: usize,
    out_size: usize,
    data: Vec<f64>,
}

impl CondDist {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let in_size = rows.len();
        if in_size == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        let out_size = rows[0].len();
        if rows.iter().any(|r| r.len() != out_size) {
            return Err(ProbError::Ragged);
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        CondDist::from_flat(in_size, out_size, data)
    }

    /// Builds from row-major data of length `in_size * out_size`.
    pub fn from_flat(in_size: usize, out_size: usize, mut data: Vec<f64>) -> Result<Self> {
        if in_size == 0 || out_size == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        if data.len() != in_size * out_size {
            return Err(ProbError::Dimension(format!(
                "{} entries for a {in_size}x{out_size} kernel",
                data.len()
            )));
        }
        for (r, row) in data.chunks_mut(out_size).enumerate() {
            normalize_row(row, r)?;
        }
        Ok(CondDist { in_size, out_size, data })
    }

    pub fn identity(size: usize) -> Result<Self> {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        CondDist::from_flat(size, size, data)
    }

    /// Binary symmetric kernel flipping with probability `flip` (any value in `[0, 1]`).
    pub fn bsc(flip: f64) -> Result<Self> {
        CondDist::new(vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]])
    }

    /// Every row equal to `dist`.
    pub fn constant(in_size: usize, dist: &Dist) -> Result<Self> {
        let data = (0..in_size).flat_map(|_| dist.mass.iter().copied()).collect();
        CondDist::from_flat(in_size, dist.len(), data)
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.data[input * self.out_size..(input + 1) * self.out_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.out_size)
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.data[input * self.out_size + output]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Output law when the input is drawn from `input`, i.e. `Σ_w v(u|w) input(w)`.
    pub fn push(&self, input: &Dist) -> Result<Dist> {
        if input.len() != self.in_size {
            return Err(ProbError::Dimension(format!(
                "input law over {} symbols for a kernel with {} inputs",
                input.len(),
                self.in_size
            )));
        }
        let mut out = vec![0.0; self.out_size];
        for (w, row) in self.rows().enumerate() {
            let weight = input.mass[w];
            if weight == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += weight * p;
            }
        }
        Dist::new(out)
    }

    /// `true` when every entry matches `other` within `tol`.
    pub fn approx_eq(&self, other: &CondDist, tol: f64) -> bool {
        self.in_size == other.in_size
            && self.out_size == other.out_size
            && self.data.iter().zip(&other.data).all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl TryFrom<RowsRepr> for CondDist {
    type Error = ProbError;
    fn try_from(r: RowsRepr) -> Result<Self> {
        CondDist::new(r.rows)
    }
}

impl From<CondDist> for RowsRepr {
    fn from(c: CondDist) -> Self {
        RowsRepr { rows: c.to_rows() }
    }
}

/// A kernel in `P(U ≫ W)`: every output symbol has positive mass under at
/// most one input, so the output determines the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CondDist", into = "CondDist")]
pub struct DetCondDist(CondDist);

impl DetCondDist {
    pub fn new(kernel: CondDist) -> Result<Self> {
        for output in 0..kernel.out_size {
            let mut owner: Option<usize> = None;
            for input in 0..kernel.in_size {
                if kernel.get(input, output) > 0.0 {
                    if let Some(first) = owner {
                        return Err(ProbError::NotDetermining { output, first, second: input });
                    }
                    owner = Some(input);
                }
            }
        }
        Ok(DetCondDist(kernel))
    }

    pub fn kernel(&self) -> &CondDist {
        &self.0
    }

    /// The unique input that can produce `output`, if any.
    pub fn owner(&self, output: usize) -> Option<usize> {
        (0..self.0.in_size).find(|&i| self.0.get(i, output) > 0.0)
    }
}

impl TryFrom<CondDist> for DetCondDist {
    type Error = ProbError;
    fn try_from(c: CondDist) -> Result<Self> {
        DetCondDist::new(c)
    }
}

impl From<DetCondDist> for CondDist {
    fn from(d: DetCondDist) -> Self {
        d.0
    }
}

impl AsRef<CondDist> for DetCondDist {
    fn as_ref(&self) -> &CondDist {
        &self.0
    }
}

/// How a kernel `v(y|x[,u])` sees the conditioning symbol `u` of the law it is
/// composed with.
#[derive(Debug, Clone, Copy)]
pub enum Kernel<'a> {
    /// `v(y|x)`, identical for every `u`.
    Shared(&'a CondDist),
    /// `v(y|x,u)`, with row index `u * |X| + x`.
    PerContext(&'a CondDist),
}

impl<'a> From<&'a CondDist> for Kernel<'a> {
    fn from(v: &'a CondDist) -> Self {
        Kernel::Shared(v)
    }
}

impl<'a> Kernel<'a> {
    pub fn out_size(&self) -> usize {
        match self {
            Kernel::Shared(v) | Kernel::PerContext(v) => v.out_size(),
        }
    }

    fn check(&self, x_size: usize, u_size: usize) -> Result<()> {
        let (v, expected) = match self {
            Kernel::Shared(v) => (v, x_size),
            Kernel::PerContext(v) => (v, x_size * u_size),
        };
        if v.in_size() != expected {
            return Err(ProbError::Dimension(format!(
                "kernel has {} input rows, expected {expected}",
                v.in_size()
            )));
        }
        Ok(())
    }

    /// The row `v(·|x,u)`.
    pub fn row(&self, x: usize, u: usize, x_size: usize) -> &'a [f64] {
        match self {
            Kernel::Shared(v) => v.row(x),
            Kernel::PerContext(v) => v.row(u * x_size + x),
        }
    }
}

/// A kernel over pairs, `ζ(y, x | u)`, stored per `u` in `y * |X| + x` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointKernel {
    y_size: usize,
    x_size: usize,
    inner: CondDist,
}

impl JointKernel {
    pub fn new(y_size: usize, x_size: usize, inner: CondDist) -> Result<Self> {
        if inner.out_size() != y_size * x_size {
            return Err(ProbError::Dimension(format!(
                "joint rows of length {} for a {y_size}x{x_size} pair alphabet",
                inner.out_size()
            )));
        }
        Ok(JointKernel { y_size, x_size, inner })
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn u_size(&self) -> usize {
        self.inner.in_size()
    }

    pub fn get(&self, u: usize, y: usize, x: usize) -> f64 {
        self.inner.get(u, y * self.x_size + x)
    }

    pub fn as_cond(&self) -> &CondDist {
        &self.inner
    }

    /// `Σ_x ζ(y,x|u)`.
    pub fn y_marginal(&self) -> CondDist {
        let mut data = vec![0.0; self.u_size() * self.y_size];
        for u in 0..self.u_size() {
            for y in 0..self.y_size {
                data[u * self.y_size + y] = (0..self.x_size).map(|x| self.get(u, y, x)).sum();
            }
        }
        CondDist { in_size: self.u_size(), out_size: self.y_size, data }
    }

    /// `Σ_y ζ(y,x|u)`.
    pub fn x_marginal(&self) -> CondDist {
        let mut data = vec![0.0; self.u_size() * self.x_size];
        for u in 0..self.u_size() {
            for x in 0..self.x_size {
                data[u * self.x_size + x] = (0..self.y_size).map(|y| self.get(u, y, x)).sum();
            }
        }
        CondDist { in_size: self.u_size(), out_size: self.x_size, data }
    }
}

/// `vρ(y|u) = Σ_x v(y|x,u) ρ(x|u)`.
pub fn compose<'a>(v: impl Into<Kernel<'a>>, rho: &CondDist) -> Result<CondDist> {
    let v = v.into();
    let (x_size, u_size) = (rho.out_size(), rho.in_size());
    v.check(x_size, u_size)?;
    let y_size = v.out_size();
    let mut data = vec![0.0; u_size * y_size];
    for u in 0..u_size {
        let out = &mut data[u * y_size..(u + 1) * y_size];
        for (x, &px) in rho.row(u).iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(v.row(x, u, x_size)) {
                *o += p * px;
            }
        }
    }
    CondDist::from_flat(u_size, y_size, data)
}

/// `(v×ρ)(y,x|u) = v(y|x,u) ρ(x|u)`.
pub fn joint<'a>(v: impl Into<Kernel<'a>>, rho: &CondDist) -> Result<JointKernel> {
    let v = v.into();
    let (x_size, u_size) = (rho.out_size(), rho.in_size());
    v.check(x_size, u_size)?;
    let y_size = v.out_size();
    let mut data = vec![0.0; u_size * y_size * x_size];
    for u in 0..u_size {
        for x in 0..x_size {
            let px = rho.get(u, x);
            for (y, &p) in v.row(x, u, x_size).iter().enumerate() {
                data[u * y_size * x_size + y * x_size + x] = p * px;
            }
        }
    }
    JointKernel::new(y_size, x_size, CondDist::from_flat(u_size, y_size * x_size, data)?)
}

/// The main channel `t: X → Y` and the adversary's channel `q: X → Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub t: CondDist,
    pub q: CondDist,
}

impl ChannelPair {
    pub fn new(t: CondDist, q: CondDist) -> Result<Self> {
        if t.in_size() != q.in_size() {
            return Err(ProbError::Dimension(format!(
                "main channel has {} inputs, adversary channel {}",
                t.in_size(),
                q.in_size()
            )));
        }
        Ok(ChannelPair { t, q })
    }

    pub fn bsc(lambda_t: f64, lambda_q: f64) -> Result<Self> {
        ChannelPair::new(CondDist::bsc(lambda_t)?, CondDist::bsc(lambda_q)?)
    }

    pub fn input_size(&self) -> usize {
        self.t.in_size()
    }
}
