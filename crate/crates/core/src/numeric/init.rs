use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Half-width of the uniform initialisation interval.
pub const INIT_RANGE: f64 = 0.08;

/// I.i.d. samples from `[-0.08, 0.08]`, deterministic in `seed`.
pub fn init_uniform<F: Real>(shape: &[usize], seed: u64) -> Result<Tensor<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_uniform_with(shape, &mut rng)
}

pub fn init_uniform_with<F: Real, R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Result<Tensor<F>> {
    let n: usize = shape.iter().product();
    let values = (0..n)
        .map(|_| F::from_f64(rng.gen_range(-INIT_RANGE..=INIT_RANGE)))
        .collect();
    Tensor::new(shape.to_vec(), values)
}

fn check_keep(keep_prob: f64) -> Result<()> {
    if keep_prob > 0.0 && keep_prob <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("keep_prob {keep_prob} outside (0, 1]")))
    }
}

/// Inverted-dropout mask: each entry is `1/keep_prob` with probability
/// `keep_prob`, else 0.
pub fn dropout_mask<F: Real, R: Rng + ?Sized>(n: usize, keep_prob: f64, rng: &mut R) -> Result<Vec<F>> {
    check_keep(keep_prob)?;
    let scale = F::from_f64(1.0 / keep_prob);
    Ok((0..n)
        .map(|_| {
            if keep_prob >= 1.0 || rng.gen::<f64>() < keep_prob {
                scale
            } else {
                F::zero()
            }
        })
        .collect())
}

/// Inverted dropout. Identity in evaluation mode or when `keep_prob == 1`.
pub fn dropout<F: Real, R: Rng + ?Sized>(
    x: &Tensor<F>,
    keep_prob: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor<F>> {
    check_keep(keep_prob)?;
    if !training || keep_prob >= 1.0 {
        return Ok(x.clone());
    }
    let mask: Vec<F> = dropout_mask(x.len(), keep_prob, rng)?;
    let values = x.values().iter().zip(mask).map(|(&v, m)| v * m).collect();
    Tensor::new(x.shape().to_vec(), values)
}
