use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::noise::apply_noise;
use super::types::{AnchorSet, NoiseModel, RangeVector, Scenario};
use crate::error::{Error, Result};

/// Generator for Monte Carlo run `stream` of a seeded experiment.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random scenario with anchors and source uniform on the box
/// `[-box_half_width, box_half_width]^n`.
pub fn generate_scenario(
    m: usize,
    n: usize,
    box_half_width: f64,
    noise: NoiseModel,
    seed: u64,
) -> Result<Scenario> {
    generate_scenario_with(m, n, box_half_width, noise, seed, 0)
}

/// Like [`generate_scenario`] on generator stream `stream`.
///
/// Geometry is drawn before noise, so runs sharing `(seed, stream)` see the
/// same anchors and source whatever the noise model.
pub fn generate_scenario_with(
    m: usize,
    n: usize,
    box_half_width: f64,
    noise: NoiseModel,
    seed: u64,
    stream: u64,
) -> Result<Scenario> {
    if m < 1 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidInput(format!("n must be 2 or 3, got {n}")));
    }
    if !(box_half_width.is_finite() && box_half_width > 0.0) {
        return Err(Error::InvalidInput("box half width must be positive".into()));
    }
    noise.validate()?;
    let mut rng = run_rng(seed, stream);
    let draw = |rng: &mut ChaCha8Rng| rng.random_range(-box_half_width..box_half_width);
    let mut positions = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            positions[(i, j)] = draw(&mut rng);
        }
    }
    let source = DVector::from_fn(n, |_, _| draw(&mut rng));
    let anchors = AnchorSet::new(positions)?;
    let true_ranges = RangeVector::from_geometry(&anchors, &source)?;
    let measured_ranges = apply_noise(&true_ranges, &noise, &mut rng)?;
    Ok(Scenario { anchors, source, true_ranges, measured_ranges, noise, seed, stream })
}
