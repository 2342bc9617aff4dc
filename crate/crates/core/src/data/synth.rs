use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

/// Centre of class `c`: the signed unit vector `+-e_{c mod dim}`, growing by one
/// unit of length each time all `2 * dim` signed axes have been used.
pub fn blob_mean(class: usize, dim: usize) -> Vec<f64> {
    let axis = class % dim;
    let sign = if (class / dim).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let radius = 1.0 + (class / (2 * dim)) as f64;
    let mut m = vec![0.0; dim];
    m[axis] = sign * radius;
    m
}

/// Isotropic Gaussian clusters around [`blob_mean`] with standard deviation `spread`.
///
/// Examples are interleaved by class (`0, 1, .., k-1, 0, 1, ..`).
pub fn synth_blobs(
    n_classes: usize,
    n_per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<(DenseMatrix, Vec<usize>)> {
    if n_classes == 0 || n_per_class == 0 || dim == 0 {
        return Err(Error::config("blob counts and dimension must be >= 1"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::config("blob spread must be finite and >= 0"));
    }
    let means: Vec<Vec<f64>> = (0..n_classes).map(|c| blob_mean(c, dim)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_classes * n_per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n_per_class {
        for (c, mean) in means.iter().enumerate() {
            for &m in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(m + spread * z);
            }
            labels.push(c);
        }
    }
    Ok((DenseMatrix::from_vec(n, dim, data)?, labels))
}
