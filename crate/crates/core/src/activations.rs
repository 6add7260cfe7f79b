//! Softmax and sparsemax over score rows, with their reverse-mode rules.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Which normalizer turns a score row into attention weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Softmax,
    Sparsemax,
}

/// A point on the probability simplex plus the indices of its positive entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexVector {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SimplexVector {
    fn from_values(values: Vec<f64>) -> Self {
        let support = values.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect();
        SimplexVector { values, support }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_row(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        bail!(Argument, "empty score row");
    }
    if z.iter().any(|v| !v.is_finite()) {
        bail!(Argument, "non-finite score");
    }
    Ok(())
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Result<SimplexVector> {
    check_row(z)?;
    Ok(SimplexVector::from_values(softmax_unchecked(z)))
}

pub(crate) fn softmax_unchecked(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| libm::exp(v - max)).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Euclidean projection of `z` onto the probability simplex (sort-threshold).
///
/// The support is the largest `k` with `1 + k·z_(k) > Σ_{j≤k} z_(j)` over the
/// descending sort; the strict inequality resolves exact ties toward the
/// smaller support.
pub fn sparsemax(z: &[f64]) -> Result<SimplexVector> {
    check_row(z)?;
    Ok(SimplexVector::from_values(sparsemax_unchecked(z)))
}

pub(crate) fn sparsemax_unchecked(z: &[f64]) -> Vec<f64> {
    let tau = sparsemax_threshold(z);
    z.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// Threshold `τ` such that `sparsemax(z)_i = max(0, z_i − τ)`.
pub fn sparsemax_threshold(z: &[f64]) -> f64 {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support_sum = sorted[0];
    let mut k_star = 1usize;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let k = (i + 1) as f64;
        if 1.0 + k * v > cumsum {
            k_star = i + 1;
            support_sum = cumsum;
        }
    }
    (support_sum - 1.0) / k_star as f64
}

/// Gradient of `upstream · sparsemax(z)` with respect to `z`.
pub fn sparsemax_vjp(output: &SimplexVector, upstream: &[f64]) -> Result<Vec<f64>> {
    if output.len() != upstream.len() {
        bail!(Argument, "output has {} entries, upstream {}", output.len(), upstream.len());
    }
    Ok(sparsemax_vjp_raw(output.values(), upstream))
}

pub(crate) fn sparsemax_vjp_raw(p: &[f64], upstream: &[f64]) -> Vec<f64> {
    let (sum, count) = p.iter().zip(upstream).filter(|(&pi, _)| pi > 0.0).fold((0.0, 0usize), |(s, c), (_, &g)| (s + g, c + 1));
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    p.iter().zip(upstream).map(|(&pi, &g)| if pi > 0.0 { g - mean } else { 0.0 }).collect()
}

/// Gradient of `upstream · softmax(z)` with respect to `z`.
pub fn softmax_vjp(output: &SimplexVector, upstream: &[f64]) -> Result<Vec<f64>> {
    if output.len() != upstream.len() {
        bail!(Argument, "output has {} entries, upstream {}", output.len(), upstream.len());
    }
    Ok(softmax_vjp_raw(output.values(), upstream))
}

pub(crate) fn softmax_vjp_raw(p: &[f64], upstream: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(upstream).map(|(a, b)| a * b).sum();
    p.iter().zip(upstream).map(|(&pi, &g)| pi * (g - dot)).collect()
}

impl ActivationKind {
    pub fn apply(self, z: &[f64]) -> Result<SimplexVector> {
        match self {
            ActivationKind::Softmax => softmax(z),
            ActivationKind::Sparsemax => sparsemax(z),
        }
    }

    pub(crate) fn apply_raw(self, z: &[f64]) -> Vec<f64> {
        match self {
            ActivationKind::Softmax => softmax_unchecked(z),
            ActivationKind::Sparsemax => sparsemax_unchecked(z),
        }
    }

    pub(crate) fn vjp_raw(self, p: &[f64], upstream: &[f64]) -> Vec<f64> {
        match self {
            ActivationKind::Softmax => softmax_vjp_raw(p, upstream),
            ActivationKind::Sparsemax => sparsemax_vjp_raw(p, upstream),
        }
    }
}

/// Normalizes every row of a `queries × keys` score matrix.
///
/// With `causal`, row `i` only covers keys `0..=i`; later keys get weight 0.
pub fn attention_weights(scores: &Tensor, kind: ActivationKind, causal: bool) -> Result<Tensor> {
    if scores.shape().len() != 2 {
        bail!(Shape, "scores must be a matrix, got {:?}", scores.shape());
    }
    let (q, k) = (scores.rows(), scores.cols());
    let mut out = vec![0.0; q * k];
    for i in 0..q {
        let row = scores.row_slice(i);
        let width = if causal { (i + 1).min(k) } else { k };
        check_row(&row[..width])?;
        let p = kind.apply_raw(&row[..width]);
        out[i * k..i * k + width].copy_from_slice(&p);
    }
    Ok(Tensor::from_parts(vec![q, k], out))
}

/// Backward of [`attention_weights`]: `weights` are the forward output.
pub(crate) fn attention_weights_vjp(weights: &Tensor, upstream: &Tensor, kind: ActivationKind, causal: bool) -> Tensor {
    let (q, k) = (weights.rows(), weights.cols());
    let mut out = vec![0.0; q * k];
    for i in 0..q {
        let width = if causal { (i + 1).min(k) } else { k };
        let p = &weights.row_slice(i)[..width];
        let g = &upstream.row_slice(i)[..width];
        out[i * k..i * k + width].copy_from_slice(&kind.vjp_raw(p, g));
    }
    Tensor::from_parts(vec![q, k], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{check_gradient, FnWithGradient, Rng};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    /// Projection oracle: try every nonempty support, solve the equality
    /// constrained least squares on it, keep the feasible point closest to z.
    fn projection_oracle(z: &[f64]) -> Vec<f64> {
        let k = z.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << k) {
            let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let shift = (idx.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / idx.len() as f64;
            let mut p = vec![0.0; k];
            let mut feasible = true;
            for &i in &idx {
                p[i] = z[i] - shift;
                if p[i] < -1e-15 {
                    feasible = false;
                }
            }
            if !feasible {
                continue;
            }
            let dist: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, p));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn softmax_examples() {
        assert!(close(softmax(&[0.0, 0.0]).unwrap().values(), &[0.5, 0.5], 1e-15));
        for c in [-1e3, 0.0, 3.7, 1e3] {
            assert!(close(softmax(&[c; 4]).unwrap().values(), &[0.25; 4], 1e-15));
        }
        let p = softmax(&[libm::log(1.0), libm::log(3.0)]).unwrap();
        assert!(close(p.values(), &[0.25, 0.75], 1e-15));
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn sparsemax_examples() {
        assert_eq!(sparsemax(&[0.5, 0.5]).unwrap().values(), &[0.5, 0.5]);
        assert_eq!(projection_oracle(&[2.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(sparsemax(&[2.0, 0.0]).unwrap().values(), &[1.0, 0.0]);
        let oracle = projection_oracle(&[0.6, 0.4, -5.0]);
        let p = sparsemax(&[0.6, 0.4, -5.0]).unwrap();
        assert!(close(&oracle, &[0.6, 0.4, 0.0], 1e-12));
        assert!(close(p.values(), &oracle, 1e-12));
        assert_eq!(p.support(), &[0, 1]);
        assert!(sparsemax(&[]).is_err());
    }

    #[test]
    fn sparsemax_tie_takes_smaller_support() {
        // 1 + 2·z_(2) == z_(1) + z_(2) exactly: the second entry sits on the boundary.
        let p = sparsemax(&[1.0, 0.0]).unwrap();
        assert_eq!(p.values(), &[1.0, 0.0]);
        assert_eq!(p.support(), &[0]);
    }

    #[test]
    fn sparsemax_matches_oracle_on_random_rows() {
        let mut rng = Rng::new(11);
        for _ in 0..500 {
            let k = 2 + rng.below(7);
            let z: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
            let p = sparsemax(&z).unwrap();
            assert!(close(p.values(), &projection_oracle(&z), 1e-8), "{z:?}");
            assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vjp_examples() {
        let one_hot = sparsemax(&[2.0, 0.0]).unwrap();
        assert_eq!(sparsemax_vjp(&one_hot, &[3.0, -7.0]).unwrap(), vec![0.0, 0.0]);
        let half = sparsemax(&[0.5, 0.5]).unwrap();
        assert_eq!(sparsemax_vjp(&half, &[1.0, 0.0]).unwrap(), vec![0.5, -0.5]);
        assert!(sparsemax_vjp(&half, &[1.0]).is_err());
    }

    #[test]
    fn sparsemax_vjp_matches_finite_differences() {
        let mut rng = Rng::new(5);
        let mut checked = 0;
        while checked < 50 {
            let k = 2 + rng.below(10);
            let z: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
            let w: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
            let tau = sparsemax_threshold(&z);
            if z.iter().any(|v| (v - tau).abs() < 1e-6) {
                continue;
            }
            let w2 = w.clone();
            let mut f = FnWithGradient {
                value: move |x: &Tensor| {
                    let p = sparsemax(x.data())?;
                    Ok(p.values().iter().zip(&w).map(|(a, b)| a * b).sum())
                },
                gradient: move |x: &Tensor| {
                    let p = sparsemax(x.data())?;
                    Tensor::row(&sparsemax_vjp(&p, &w2)?)
                },
            };
            let err = check_gradient(&mut f, &Tensor::row(&z).unwrap(), 1e-7).unwrap();
            assert!(err <= 1e-4, "{err} at {z:?}");
            checked += 1;
        }
    }

    #[test]
    fn softmax_vjp_matches_finite_differences() {
        let mut rng = Rng::new(6);
        for _ in 0..20 {
            let k = 1 + rng.below(12);
            let z: Vec<f64> = (0..k).map(|_| 2.0 * rng.normal()).collect();
            let w: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
            let w2 = w.clone();
            let mut f = FnWithGradient {
                value: move |x: &Tensor| {
                    let p = softmax(x.data())?;
                    Ok(p.values().iter().zip(&w).map(|(a, b)| a * b).sum())
                },
                gradient: move |x: &Tensor| Tensor::row(&softmax_vjp(&softmax(x.data())?, &w2)?),
            };
            assert!(check_gradient(&mut f, &Tensor::row(&z).unwrap(), 1e-5).unwrap() <= 1e-4);
        }
    }

    #[test]
    fn attention_weight_examples() {
        let s = Tensor::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let w = attention_weights(&s, ActivationKind::Softmax, false).unwrap();
        assert!(close(w.data(), &[1.0 / 3.0; 3], 1e-15));
        let s = Tensor::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.6, 0.4, -5.0]]).unwrap();
        let w = attention_weights(&s, ActivationKind::Sparsemax, false).unwrap();
        assert!(close(w.row_slice(0), &[1.0, 0.0, 0.0], 1e-15));
        assert!(close(w.row_slice(1), &[0.6, 0.4, 0.0], 1e-12));
    }

    #[test]
    fn causal_rows_ignore_future_keys() {
        let s = Tensor::from_rows(&[vec![0.0, 9.0], vec![0.0, 0.0]]).unwrap();
        let w = attention_weights(&s, ActivationKind::Softmax, true).unwrap();
        assert_eq!(w.row_slice(0), &[1.0, 0.0]);
        assert!(close(w.row_slice(1), &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn large_gap_gives_one_hot() {
        let mut rng = Rng::new(9);
        for _ in 0..200 {
            let k = 2 + rng.below(8);
            let mut z: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
            let top = rng.below(k);
            let rest = z.iter().enumerate().filter(|(i, _)| *i != top).map(|(_, v)| *v).fold(f64::MIN, f64::max);
            z[top] = rest + 1.0 + rng.uniform();
            let p = sparsemax(&z).unwrap();
            assert_eq!(p.support(), &[top]);
            assert_eq!(p.values()[top], 1.0);
        }
    }
}
