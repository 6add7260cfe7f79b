//! Dense row-major tensors, the seeded generator, and the finite-difference
//! gradient check every differentiable operation is validated against.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Dense row-major array of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor").field("shape", &self.shape).field("data", &self.data).finish()
    }
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            bail!(Shape, "extents must be positive, got {:?}", shape);
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            bail!(Shape, "shape {:?} needs {} values, got {}", shape, n, data.len());
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(Argument, "non-finite value at flat index {}", i);
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Builds a tensor the caller already knows to be consistent.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), vec![0.0; n])
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), vec![value; n])
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::from_parts(vec![1, 1], vec![value])
    }

    /// One-row matrix holding `values`.
    pub fn row(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            bail!(Argument, "empty row");
        }
        Tensor::new(&[1, values.len()], values.to_vec())
    }

    /// Matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else { bail!(Argument, "no rows") };
        let cols = first.len();
        if rows.iter().any(|r| r.len() != cols) {
            bail!(Shape, "ragged rows");
        }
        Tensor::new(&[rows.len(), cols], rows.concat())
    }

    /// Entries drawn from N(0, std²).
    pub fn randn(shape: &[usize], std: f64, rng: &mut Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.normal() * std).collect();
        Tensor::from_parts(shape.to_vec(), data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows of a matrix view; higher ranks fold leading extents into rows.
    pub fn rows(&self) -> usize {
        self.data.len() / self.cols()
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().expect("rank >= 1")
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_slice_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            bail!(Shape, "{:?} vs {:?}", self.shape, other.shape);
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor::from_parts(self.shape.clone(), data))
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn add_assign_scaled(&mut self, other: &Tensor, s: f64) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::from_parts(vec![c, r], out)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = (self.rows(), self.cols());
        let (k2, m) = (other.rows(), other.cols());
        if k != k2 {
            bail!(Shape, "matmul {}x{} by {}x{}", n, k, k2, m);
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let o = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[p * m..(p + 1) * m];
                for (oj, bj) in o.iter_mut().zip(b) {
                    *oj += a * bj;
                }
            }
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }

    /// `self · otherᵀ`.
    pub fn matmul_bt(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = (self.rows(), self.cols());
        let (m, k2) = (other.rows(), other.cols());
        if k != k2 {
            bail!(Shape, "matmul_bt {}x{} by ({}x{})ᵀ", n, k, m, k2);
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * m + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }

    /// `selfᵀ · other`.
    pub fn matmul_at(&self, other: &Tensor) -> Result<Tensor> {
        let (k, n) = (self.rows(), self.cols());
        let (k2, m) = (other.rows(), other.cols());
        if k != k2 {
            bail!(Shape, "matmul_at ({}x{})ᵀ by {}x{}", k, n, k2, m);
        }
        let mut out = vec![0.0; n * m];
        for p in 0..k {
            let a = &self.data[p * n..(p + 1) * n];
            let b = &other.data[p * m..(p + 1) * m];
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let o = &mut out[i * m..(i + 1) * m];
                for (oj, bj) in o.iter_mut().zip(b) {
                    *oj += ai * bj;
                }
            }
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }
}

/// Seeded, platform-independent generator (ChaCha8 stream).
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, keyed by `stream`.
    pub fn fork(&mut self, stream: u64) -> Rng {
        let s = self.next_u64() ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Rng::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    /// Uniform on the open interval `(0, 1)`; zero draws are redrawn.
    pub fn open_uniform(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 && u < 1.0 {
                return u;
            }
        }
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.open_uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// A scalar function with an analytic gradient.
pub trait ScalarFunction {
    fn value(&mut self, x: &Tensor) -> Result<f64>;
    fn gradient(&mut self, x: &Tensor) -> Result<Tensor>;
}

/// Pairs a value closure with a gradient closure.
pub struct FnWithGradient<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> ScalarFunction for FnWithGradient<F, G>
where
    F: FnMut(&Tensor) -> Result<f64>,
    G: FnMut(&Tensor) -> Result<Tensor>,
{
    fn value(&mut self, x: &Tensor) -> Result<f64> {
        (self.value)(x)
    }

    fn gradient(&mut self, x: &Tensor) -> Result<Tensor> {
        (self.gradient)(x)
    }
}

pub const DEFAULT_GRADIENT_STEP: f64 = 1e-5;

/// Largest `|analytic - central| / max(1, |central|)` over all coordinates.
pub fn check_gradient<F: ScalarFunction + ?Sized>(f: &mut F, x: &Tensor, step: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&step) {
        bail!(Argument, "step {} outside [1e-7, 1e-3]", step);
    }
    let analytic = f.gradient(x)?;
    if analytic.len() != x.len() {
        return Err(Error::Shape(alloc::format!("gradient has {} entries, input has {}", analytic.len(), x.len())));
    }
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x.data[i];
        probe.data[i] = orig + step;
        let up = f.value(&probe)?;
        probe.data[i] = orig - step;
        let down = f.value(&probe)?;
        probe.data[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        let numeric = (up - down) / (2.0 * step);
        let err = libm::fabs(analytic.data[i] - numeric) / libm::fmax(1.0, libm::fabs(numeric));
        worst = worst.max(err);
    }
    Ok(worst)
}
