use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::model::FrothParameters;

use super::{EstimatorConfig, EstimatorError, EstimatorState, PerturbedState, Prediction};

/// Per-sample record of an online update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    /// `y − ŷ`.
    pub residual: f64,
    pub psi: [f64; 2],
    /// Applied parameter step after projection.
    pub step: [f64; 2],
    /// `λ + ψᵀLψ`.
    pub denominator: f64,
    /// The unprojected estimate left the box.
    pub projected: bool,
    /// Set when the sample was frozen instead of updated.
    pub fault: Option<String>,
}

/// `L₀ = diag((scale·θ̂₀)²)`.
pub fn initial_inverse_hessian(theta: &FrothParameters, scale: f64) -> Matrix2<f64> {
    Matrix2::new((scale * theta.n).powi(2), 0.0, 0.0, (scale * theta.c).powi(2))
}

/// Rank-one update of the inverse Hessian, `L⁺ = (λL⁻¹ + ψψᵀ)⁻¹`, written in
/// Woodbury form and symmetrised. Returns `(L⁺, λ + ψᵀLψ)`.
pub fn woodbury_update(l: &Matrix2<f64>, psi: &Vector2<f64>, lambda: f64) -> Result<(Matrix2<f64>, f64), EstimatorError> {
    let l_psi = l * psi;
    let denominator = lambda + psi.dot(&l_psi);
    if !(denominator > 0.0) || !denominator.is_finite() {
        return Err(EstimatorError::Denominator(denominator));
    }
    let next = (l - l_psi * l_psi.transpose() / denominator) / lambda;
    Ok((0.5 * (next + next.transpose()), denominator))
}

/// One Gauss-Newton step with forgetting.
///
/// `prediction` is the nominal one-step prediction; its post-state becomes the
/// new carried predictor state. `carried` holds the advanced perturbed states
/// in parallel-trajectory mode.
pub fn rpem_update(
    est: &EstimatorState,
    g1_measured: f64,
    psi: &Vector2<f64>,
    prediction: &Prediction,
    carried: Option<Vec<Prediction>>,
    cfg: &EstimatorConfig,
) -> Result<(EstimatorState, UpdateDiagnostics), EstimatorError> {
    let residual = g1_measured - prediction.g1;
    let (l, denominator) = woodbury_update(&est.l, psi, cfg.lambda)?;
    debug_assert!(l.cholesky().is_some(), "inverse Hessian lost positive definiteness: {l}");
    let raw = est.theta_hat.to_array();
    let delta = l * psi * residual;
    let unprojected = FrothParameters::new(raw[0] + delta[0], raw[1] + delta[1]);
    let theta_hat = cfg.project(unprojected);
    let projected = theta_hat != unprojected;
    let step = [theta_hat.n - raw[0], theta_hat.c - raw[1]];

    let perturbed = carried.map(|preds| {
        preds.into_iter().map(|p| PerturbedState { state: p.state, q_conc: p.q_conc }).collect()
    });
    let next = EstimatorState {
        theta_hat,
        l,
        predictor_state: prediction.state.clone(),
        q_conc: prediction.q_conc,
        step_count: est.step_count + 1,
        perturbed,
    };
    let diag = UpdateDiagnostics {
        residual,
        psi: [psi[0], psi[1]],
        step,
        denominator,
        projected,
        fault: None,
    };
    Ok((next, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlantState;
    use proptest::prelude::*;

    fn dummy_state(h_p: f64) -> PlantState {
        PlantState { q_tails: 1e-5, h_p, m: vec![1.0, 2.0], eps0: vec![0.01; 5] }
    }

    fn estimator(theta: FrothParameters, l: Matrix2<f64>) -> EstimatorState {
        EstimatorState::new(theta, l, dummy_state(0.38), 1e-7)
    }

    fn prediction(g1: f64) -> Prediction {
        Prediction { g1, state: dummy_state(0.39), q_conc: 2e-7 }
    }

    #[test]
    fn woodbury_matches_direct_inverse() {
        let l = Matrix2::new(0.01, 0.0, 0.0, 4.07e-9);
        let psi = Vector2::new(0.3, 250.0);
        for lambda in [1.0, 0.995, 0.9] {
            let (w, _) = woodbury_update(&l, &psi, lambda).unwrap();
            let direct = (lambda * l.try_inverse().unwrap() + psi * psi.transpose()).try_inverse().unwrap();
            let rel = (w - direct).norm() / direct.norm();
            assert!(rel < 1e-10, "lambda {lambda}: rel {rel}");
        }
    }

    #[test]
    fn zero_gradient_only_inflates_by_forgetting() {
        let l = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let (w, d) = woodbury_update(&l, &Vector2::zeros(), 0.5).unwrap();
        assert_eq!(d, 0.5);
        assert_eq!(w, l * 2.0);
    }

    #[test]
    fn non_positive_denominator_is_an_error() {
        let l = Matrix2::new(-1.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            woodbury_update(&l, &Vector2::new(1.0, 1.0), 1.0),
            Err(EstimatorError::Denominator(_))
        ));
    }

    #[test]
    fn initial_inverse_hessian_is_scaled_square() {
        let l0 = initial_inverse_hessian(&FrothParameters::new(1.0, 6.38e-4), 0.1);
        assert_eq!(l0[(0, 1)], 0.0);
        assert!((l0[(0, 0)] - 0.01).abs() < 1e-15);
        assert!((l0[(1, 1)] - 4.07044e-9).abs() < 1e-22);
    }

    #[test]
    fn zero_residual_keeps_the_estimate_but_updates_l() {
        let est = estimator(FrothParameters::new(1.0, 6.38e-4), Matrix2::new(0.01, 0.0, 0.0, 4e-9));
        let cfg = EstimatorConfig::default();
        let psi = Vector2::new(0.05, 30.0);
        let (next, diag) = rpem_update(&est, 0.42, &psi, &prediction(0.42), None, &cfg).unwrap();
        assert_eq!(next.theta_hat, est.theta_hat);
        assert_ne!(next.l, est.l);
        assert_eq!(diag.residual, 0.0);
        assert_eq!(diag.step, [0.0, 0.0]);
        assert_eq!(next.predictor_state, dummy_state(0.39));
        assert_eq!(next.q_conc, 2e-7);
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn unit_gradient_on_identity() {
        let est = estimator(FrothParameters::new(1.0, 1.0), Matrix2::identity());
        let cfg = EstimatorConfig { lambda: 1.0, ..EstimatorConfig::around(FrothParameters::new(1.0, 1.0)) };
        let (next, diag) = rpem_update(&est, 0.5, &Vector2::new(1.0, 0.0), &prediction(0.4), None, &cfg).unwrap();
        let h_inv = Matrix2::new(2.0, 0.0, 0.0, 1.0).try_inverse().unwrap();
        assert!((next.l - h_inv).norm() < 1e-15);
        assert_eq!(diag.denominator, 2.0);
        assert!((next.theta_hat.n - 1.05).abs() < 1e-15);
        assert_eq!(next.theta_hat.c, 1.0);
    }

    #[test]
    fn uninformative_sample_changes_nothing() {
        let l = Matrix2::new(0.01, 1e-7, 1e-7, 4e-9);
        let est = estimator(FrothParameters::new(1.0, 6.38e-4), l);
        let cfg = EstimatorConfig { lambda: 1.0, ..EstimatorConfig::default() };
        let (next, _) = rpem_update(&est, 0.9, &Vector2::zeros(), &prediction(0.4), None, &cfg).unwrap();
        assert_eq!(next.l, l);
        assert_eq!(next.theta_hat, est.theta_hat);
    }

    #[test]
    fn estimate_is_projected_into_the_box() {
        let est = estimator(FrothParameters::new(1.0, 6.38e-4), Matrix2::identity() * 100.0);
        let cfg = EstimatorConfig::default();
        let (next, diag) = rpem_update(&est, 10.0, &Vector2::new(1.0, 0.0), &prediction(0.0), None, &cfg).unwrap();
        assert!(diag.projected);
        assert_eq!(next.theta_hat.n, cfg.theta_max.n);
    }

    fn spd() -> impl Strategy<Value = Matrix2<f64>> {
        (0.1f64..10.0, 0.1f64..10.0, -0.9f64..0.9).prop_map(|(a, b, rho)| Matrix2::new(a, rho * (a * b).sqrt(), rho * (a * b).sqrt(), b))
    }

    fn gradients() -> impl Strategy<Value = Vec<Vector2<f64>>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Vector2::new(a, b)), 1..100)
    }

    proptest! {
        #[test]
        fn recursion_matches_the_discounted_direct_inverse(l0 in spd(), psis in gradients(), lambda in 0.95f64..=1.0) {
            let mut l = l0;
            let mut h = l0.try_inverse().unwrap();
            for psi in &psis {
                l = woodbury_update(&l, psi, lambda).unwrap().0;
                h = lambda * h + psi * psi.transpose();
                prop_assert!(l.cholesky().is_some());
                prop_assert_eq!(l, l.transpose());
            }
            let direct = h.try_inverse().unwrap();
            prop_assert!((l - direct).norm() / direct.norm() < 1e-8);
        }

        #[test]
        fn update_points_along_the_single_sample_gauss_newton_direction(
            l in spd(),
            a in -1.0f64..1.0,
            b in -1.0f64..1.0,
            residual in -1.0f64..1.0,
        ) {
            let psi = Vector2::new(a, b);
            let (next, _) = woodbury_update(&l, &psi, 1.0).unwrap();
            let step = next * psi * residual;
            prop_assert!(step.dot(&(psi * residual)) >= 0.0);
        }
    }
}
