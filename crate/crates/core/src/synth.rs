//! Seeded synthetic data: controlled-condition ground truths, sparse
//! corruptions, Bernoulli masks, and SNR-calibrated Gaussian noise.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)] // float methods are inherent only when std is linked
use num_traits::Float;
use crate::error::{invalid, Error, Result};
use crate::metrics::GroundTruth;
use crate::solvers::ObservationSet;
use crate::talg;
use crate::tensor::Tensor3;
use crate::transform::{SpectralTensor, TransformSpec};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child seed for stream `stream` of a base seed (splitmix64).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sign_tensor(n1: usize, n2: usize, n3: usize, rng: &mut ChaCha8Rng) -> Tensor3 {
    Tensor3::from_fn(n1, n2, n3, |_, _, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

/// Ground truth with orthogonal factors drawn from random-sign tensors and
/// transformed singular values `1, ..., 1/kappa` (linearly spaced) in every
/// slice.
pub fn gen_ground_truth(
    n1: usize,
    n2: usize,
    n3: usize,
    r: usize,
    kappa: f64,
    spec: &TransformSpec,
    seed: u64,
) -> Result<GroundTruth> {
    let max = n1.min(n2);
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(invalid("kappa", format!("must be a finite value >= 1, got {kappa}")));
    }
    spec.check_n3(n3, "gen_ground_truth")?;
    let mut rng = rng(seed);
    let a = sign_tensor(n1, r, n3, &mut rng);
    let b = sign_tensor(n2, r, n3, &mut rng);
    let u = talg::truncate(&talg::t_svd(&a, spec)?, r)?.u;
    let v = talg::truncate(&talg::t_svd(&b, spec)?, r)?.u;
    let diag: Vec<Complex64> = linear_spectrum(r, kappa)
        .into_iter()
        .map(|s| Complex64::new(s, 0.0))
        .collect();
    let gk = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    let g = spec.inverse(&SpectralTensor::from_slices((0..n3).map(|_| gk.clone()).collect())?)?;
    GroundTruth::from_svd(u, g, v, spec.clone())
}

/// `r` values linearly spaced from 1 down to `1/kappa`.
pub fn linear_spectrum(r: usize, kappa: f64) -> Vec<f64> {
    if r == 1 {
        return alloc::vec![1.0];
    }
    let lo = 1.0 / kappa;
    (0..r)
        .map(|i| 1.0 - (1.0 - lo) * i as f64 / (r - 1) as f64)
        .collect()
}

/// `floor(alpha N)` entries chosen uniformly without replacement, with
/// values uniform on `[-m, m]`, `m` the mean absolute entry of `xstar`.
pub fn gen_sparse_corruption(xstar: &Tensor3, alpha: f64, seed: u64) -> Result<Tensor3> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1), got {alpha}")));
    }
    let (n1, n2, n3) = xstar.dims();
    let total = xstar.len();
    let count = (alpha * total as f64).floor() as usize;
    let m = xstar.as_slice().iter().map(|v| v.abs()).sum::<f64>() / total as f64;
    let mut rng = rng(seed);
    let mut out = Tensor3::zeros(n1, n2, n3);
    let locs = rand::seq::index::sample(&mut rng, total, count);
    let data = out.as_mut_slice();
    for idx in locs.iter() {
        data[idx] = m * (2.0 * rng.random::<f64>() - 1.0);
    }
    Ok(out)
}

/// Realized per-tube sparsity of a tensor: the largest fraction of nonzeros
/// along any mode-1, mode-2, and mode-3 tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityProfile {
    pub nonzeros: usize,
    pub mode1: f64,
    pub mode2: f64,
    pub mode3: f64,
}

impl SparsityProfile {
    /// Smallest `alpha` for which the tensor is `alpha`-sparse.
    pub fn alpha(&self) -> f64 {
        self.mode1.max(self.mode2).max(self.mode3)
    }
}

pub fn sparsity_profile(s: &Tensor3) -> SparsityProfile {
    let (n1, n2, n3) = s.dims();
    let mut col = alloc::vec![0usize; n2 * n3];
    let mut row = alloc::vec![0usize; n1 * n3];
    let mut tube = alloc::vec![0usize; n1 * n2];
    let mut nonzeros = 0;
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                if s.get(i, j, k) != 0.0 {
                    nonzeros += 1;
                    col[j + n2 * k] += 1;
                    row[i + n1 * k] += 1;
                    tube[i + n1 * j] += 1;
                }
            }
        }
    }
    let frac = |v: &[usize], n: usize| v.iter().copied().max().unwrap_or(0) as f64 / n as f64;
    SparsityProfile {
        nonzeros,
        mode1: frac(&col, n1),
        mode2: frac(&row, n2),
        mode3: frac(&tube, n3),
    }
}

/// I.i.d. Bernoulli(`p`) observation mask.
pub fn gen_bernoulli_mask(n1: usize, n2: usize, n3: usize, p: f64, seed: u64) -> Result<ObservationSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    let mut rng = rng(seed);
    let mask = (0..n1 * n2 * n3).map(|_| rng.random::<f64>() < p).collect();
    ObservationSet::new(n1, n2, n3, mask, p)
}

/// Adds i.i.d. `N(0, s^2)` noise with `s^2 = ||X||_F^2 / (N 10^{snr/10})`.
/// An infinite SNR returns `x` unchanged.
pub fn add_gaussian_noise(x: &Tensor3, snr_db: f64, seed: u64) -> Result<Tensor3> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    if !snr_db.is_finite() {
        return Err(invalid("snr_db", format!("must be finite or +inf, got {snr_db}")));
    }
    let energy = x.fro_norm().powi(2);
    if energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sigma = (energy / (x.len() as f64 * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut rng = rng(seed);
    Ok(x.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
}
