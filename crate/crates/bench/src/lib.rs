//! Shared setup for the criterion benchmarks.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use regulink::quat::{sample_s3, Stereographic, UnitQuaternion};

/// Deterministic batch of sphere points.
pub fn quaternion_batch(n: usize, seed: u64) -> Vec<UnitQuaternion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_s3(&mut rng)).collect()
}

/// Projected polygonal Hopf fibers for the linking kernel.
pub fn projected_circles(n: usize) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let a = regulink::curves::great_circle(UnitQuaternion::ONE, UnitQuaternion::I, n);
    let b = regulink::curves::great_circle(UnitQuaternion::J, UnitQuaternion::K, n);
    let pole = UnitQuaternion::new(0.5, 0.5, 0.5, 0.5).unwrap();
    let projection = Stereographic::new(pole);
    (
        a.project(&projection).unwrap(),
        b.project(&projection).unwrap(),
    )
}
