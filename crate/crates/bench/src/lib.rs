//! Shared fixtures for the benchmarks.

use nvdressed::dynamics::{fid_signal, measured_conditions, uniform_grid, DEFAULT_STRETCH};
use nvdressed::spin::{FieldConfiguration, FieldPreset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn main_text() -> FieldConfiguration {
    FieldPreset::MainText.fields()
}

/// Transverse fields spread over the weak-field regime.
pub fn random_fields(count: usize, seed: u64) -> Vec<FieldConfiguration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = Normal::new(0.0, 3.0).unwrap();
    let pi = Normal::new(0.0, 8e4).unwrap();
    (0..count)
        .map(|_| {
            FieldConfiguration::new(
                [b.sample(&mut rng), b.sample(&mut rng), 0.0],
                [pi.sample(&mut rng), pi.sample(&mut rng), 0.0],
            )
            .expect("finite")
        })
        .collect()
}

/// Noisy trace for one row of the measured conditions, with the point-B
/// splittings fixed at their model values.
pub fn noisy_row(row: usize, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let rows = measured_conditions(0.674, 1.480);
    let grid = uniform_grid(7.5, 0.01).unwrap();
    let mut y = fid_signal(&rows[row].components(DEFAULT_STRETCH), &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise).unwrap();
    for v in &mut y {
        *v += n.sample(&mut rng);
    }
    (grid, y)
}
