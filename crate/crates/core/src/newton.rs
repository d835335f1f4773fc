//! Synthetic gravitation dataset: two masses and a distance, target
//! `G * m1 * m2 / d^2`.
//!
//! Values are drawn uniformly with a ChaCha8 generator seeded from a `u64`,
//! in the order x1, x2, x3 per pattern, so a seed fully determines the data.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;

pub const GRAVITATIONAL_CONSTANT: f64 = 6.67392e-11;
pub const DEFAULT_PATTERNS: usize = 1000;

pub fn newton_dataset(patterns: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass = Uniform::new_inclusive(1e23, 1e25);
    let distance = Uniform::new_inclusive(1e8, 1e12);
    let (mut x1, mut x2, mut x3, mut t) = (vec![], vec![], vec![], vec![]);
    for _ in 0..patterns {
        let m1 = mass.sample(&mut rng);
        let m2 = mass.sample(&mut rng);
        let d = distance.sample(&mut rng);
        x1.push(m1);
        x2.push(m2);
        x3.push(d);
        t.push(GRAVITATIONAL_CONSTANT * m1 * m2 / (d * d));
    }
    Dataset::new(vec![x1, x2, x3], t).expect("generated values are finite")
}
