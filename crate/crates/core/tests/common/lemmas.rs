//! Random instances of the norm inequalities used in the convergence
//! analysis, each reported as `small <= big`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tsvd_core::synth::{gen_sparse_corruption, sparsity_profile};
use tsvd_core::*;

use super::{random_tensor, sparse_tensor};

#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub name: &'static str,
    pub small: f64,
    pub big: f64,
}

impl Bound {
    /// Relative slack `(big - small) / |big|`; negative means violated.
    pub fn slack(&self) -> f64 {
        (self.big - self.small) / self.big.abs().max(f64::MIN_POSITIVE)
    }
}

fn spec(kind: TransformKind, n3: usize) -> TransformSpec {
    make_transform(kind, n3).unwrap()
}

fn two_inf(t: &Tensor3, s: &TransformSpec) -> f64 {
    norm(t, NormKind::TwoInf, s).unwrap()
}

fn sigma_min_transformed(b: &Tensor3, s: &TransformSpec) -> f64 {
    t_svd(b, s)
        .unwrap()
        .transformed_singular_values(s)
        .unwrap()
        .iter()
        .flat_map(|v| v.iter().copied())
        .fold(f64::INFINITY, f64::min)
}

/// Spectral and row-norm bounds for a sparse tensor, with `alpha` the
/// realized tube sparsity. Returns nothing for an all-zero draw.
pub fn sparse_bounds(kind: TransformKind, trial: u64, g: &mut ChaCha8Rng) -> Vec<Bound> {
    let (n1, n2, n3) = (g.random_range(2..8), g.random_range(2..8), g.random_range(1..5));
    let s = spec(kind, n3);
    let base = random_tensor(n1, n2, n3, g);
    let sp = if trial % 2 == 0 {
        gen_sparse_corruption(&base, 0.2, trial).unwrap()
    } else {
        sparse_tensor(n1, n2, n3, 0.3, g)
    };
    if sp.count_nonzero() == 0 {
        return Vec::new();
    }
    let alpha = sparsity_profile(&sp).alpha();
    let inf = sp.max_abs();
    vec![
        Bound {
            name: "sparse spectral",
            small: norm(&sp, NormKind::Spectral, &s).unwrap(),
            big: alpha * s.ell().sqrt() / 2.0 * (n1 + n2 * n3) as f64 * inf,
        },
        Bound {
            name: "sparse 2,inf",
            small: two_inf(&sp, &s),
            big: (alpha * (n2 * n3) as f64).sqrt() * inf,
        },
    ]
}

/// `||A * B^H||_inf <= sqrt(ell) ||A||_{2,inf} ||B||_{2,inf}`.
pub fn infnorm_bound(kind: TransformKind, g: &mut ChaCha8Rng) -> Bound {
    let n3 = g.random_range(1..5);
    let s = spec(kind, n3);
    let n2 = g.random_range(2..5);
    let a = random_tensor(g.random_range(1..6), n2, n3, g);
    let b = random_tensor(g.random_range(1..6), n2, n3, g);
    Bound {
        name: "product inf",
        small: t_product(&a, &conj_transpose(&b, &s).unwrap(), &s).unwrap().max_abs(),
        big: s.ell().sqrt() * two_inf(&a, &s) * two_inf(&b, &s),
    }
}

/// Frobenius and row norms of `A * B` between `sigma_min(B)` and `||B||`
/// times those of `A`, for a square full-rank `B`.
pub fn sandwich_bounds(kind: TransformKind, g: &mut ChaCha8Rng) -> Vec<Bound> {
    let n3 = g.random_range(1..5);
    let s = spec(kind, n3);
    let m = g.random_range(2..5);
    let a = random_tensor(g.random_range(1..6), m, n3, g);
    let b = &random_tensor(m, m, n3, g) + &identity_tensor(m, &s).unwrap().scale(2.0);
    let ab = t_product(&a, &b, &s).unwrap();
    let (lo, hi) = (sigma_min_transformed(&b, &s), norm(&b, NormKind::Spectral, &s).unwrap());
    vec![
        Bound { name: "product F lower", small: a.fro_norm() * lo, big: ab.fro_norm() },
        Bound { name: "product F upper", small: ab.fro_norm(), big: a.fro_norm() * hi },
        Bound { name: "product 2,inf lower", small: two_inf(&a, &s) * lo, big: two_inf(&ab, &s) },
        Bound { name: "product 2,inf upper", small: two_inf(&ab, &s), big: two_inf(&a, &s) * hi },
    ]
}

/// `||A * B||_{2,inf} <= sqrt(n2 ell) ||A||_{2,inf} ||B||_{2,inf}`.
pub fn row_product_bound(kind: TransformKind, g: &mut ChaCha8Rng) -> Bound {
    let n3 = g.random_range(1..5);
    let s = spec(kind, n3);
    let n2 = g.random_range(2..5);
    let a = random_tensor(g.random_range(1..6), n2, n3, g);
    let b = random_tensor(n2, g.random_range(1..6), n3, g);
    Bound {
        name: "product 2,inf",
        small: two_inf(&t_product(&a, &b, &s).unwrap(), &s),
        big: (n2 as f64 * s.ell()).sqrt() * two_inf(&a, &s) * two_inf(&b, &s),
    }
}
