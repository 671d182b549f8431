//! Feeds random gradients through the rank-one inverse Hessian update and
//! compares the result with a direct inverse of the accumulated Hessian.

use froth_ident::estimator::woodbury_update;
use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for lambda in [1.0, 0.99, 0.95] {
        let mut l = Matrix2::identity();
        let mut h = Matrix2::identity();
        for _ in 0..500 {
            let psi = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            l = woodbury_update(&l, &psi, lambda).expect("positive denominator").0;
            h = lambda * h + psi * psi.transpose();
        }
        let direct = h.try_inverse().expect("invertible");
        println!("lambda {lambda}: relative error {:.2e}, trace(L) {:.4e}", (l - direct).norm() / direct.norm(), l.trace());
    }
}
