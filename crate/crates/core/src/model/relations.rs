//! Closed-form algebraic relations of the cell model.
//!
//! Every function here is a pure map of scalars. Piecewise relations switch on
//! the air recovery `alpha` at 0.5; the `alpha_star` argument is the
//! bursting-corrected air recovery.

use super::ModelError;

/// Empirical coefficient of the concentrate flow relation.
pub const CONCENTRATE_FLOW_COEFF: f64 = 6.815;

/// Largest `f64` strictly below one.
pub const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// `(Q_feed − Q_tails − Q_conc + Q_air) / A_cell` [m/s].
pub fn interfacial_gas_velocity(q_feed: f64, q_tails: f64, q_conc: f64, q_air: f64, a_cell: f64) -> f64 {
    (q_feed - q_tails - q_conc + q_air) / a_cell
}

/// Bubble diameter at the top of the froth, `(n·C·τ_f + d_int^n)^(1/n)`.
pub fn froth_top_bubble_size(n: f64, c: f64, tau_f: f64, d_b_int: f64) -> Result<f64, ModelError> {
    let base = n * c * tau_f + d_b_int.powf(n);
    if !(base > 0.0) || !base.is_finite() {
        return Err(ModelError::Domain { what: "froth-top bubble size base", value: base });
    }
    if tau_f == 0.0 {
        // skip the powf round trip, which is not exact
        return Ok(d_b_int);
    }
    Ok(base.powf(1.0 / n))
}

/// Air recovery pair `(α, α*)` from the bursting rate and interfacial gas velocity.
///
/// `α* = 1 − v_b / v_g*` is confined to `[0, 1]`; the simulated `α` is `α*`
/// clipped to `[0, 1)` since the camera-based definition has no model.
pub fn air_recovery(v_b: f64, v_g_star: f64) -> Result<(f64, f64), ModelError> {
    if !(v_g_star > 0.0) {
        return Err(ModelError::FrothCollapse { v_g_star });
    }
    let alpha_star = (1.0 - v_b / v_g_star).clamp(0.0, 1.0);
    let alpha = alpha_star.clamp(0.0, ONE_MINUS_ULP);
    Ok((alpha, alpha_star))
}

/// Froth recovery before clipping. Callers clip into `[0, 1]`.
pub fn froth_recovery_raw(
    alpha: f64,
    alpha_star: f64,
    v_g_star: f64,
    v_set: f64,
    d_b_int: f64,
    d_b_froth_out: f64,
) -> Result<f64, ModelError> {
    let size_factor = (d_b_int / d_b_froth_out).sqrt();
    let radicand = if alpha < 0.5 {
        alpha_star * (1.0 - alpha_star) * v_g_star / v_set
    } else {
        v_g_star / (4.0 * v_set)
    };
    if radicand < 0.0 || !radicand.is_finite() {
        return Err(ModelError::Domain { what: "froth recovery radicand", value: radicand });
    }
    Ok(radicand.powf(0.25) * size_factor)
}

/// Froth recovery clipped to `[0, 1]`; the flag reports whether clipping fired.
pub fn froth_recovery(
    alpha: f64,
    alpha_star: f64,
    v_g_star: f64,
    v_set: f64,
    d_b_int: f64,
    d_b_froth_out: f64,
) -> Result<(f64, bool), ModelError> {
    let raw = froth_recovery_raw(alpha, alpha_star, v_g_star, v_set, d_b_int, d_b_froth_out)?;
    if raw > 1.0 {
        log::warn!("froth recovery {raw:.4} clipped to 1");
        Ok((1.0, true))
    } else {
        Ok((raw, false))
    }
}

/// Entrainment factor: fraction of the water recovery carrying particles of a class.
pub fn entrainment_factor(
    alpha: f64,
    alpha_star: f64,
    v_g_star: f64,
    v_set: f64,
    froth_depth: f64,
    d_axial: f64,
) -> Result<f64, ModelError> {
    let lift = v_set.powf(1.5) * froth_depth;
    let exponent = if alpha < 0.5 {
        let remaining = 1.0 - alpha_star;
        if !(remaining > 0.0) {
            return Err(ModelError::Domain { what: "entrainment 1 - alpha*", value: remaining });
        }
        -lift / (d_axial * (v_g_star * remaining).sqrt())
    } else {
        -2.0 * lift / (d_axial * v_g_star.sqrt())
    };
    Ok(exponent.exp())
}

/// Concentrate (overflow) flow [m³/s].
pub fn concentrate_flow(alpha: f64, alpha_star: f64, v_g_star: f64, d_b_froth_out: f64, k1: f64, a_cell: f64) -> f64 {
    let base = CONCENTRATE_FLOW_COEFF * a_cell * v_g_star * v_g_star / (k1 * d_b_froth_out * d_b_froth_out);
    if alpha < 0.5 {
        base * (1.0 - alpha_star) * alpha_star
    } else {
        base / 4.0
    }
}

/// Concentrate grade of class 0 from per-class true-flotation and entrainment terms.
///
/// `c_tails[i]` is the pulp concentration `m_i / V_pulp`, `s_b` the bubble
/// surface area flux `6 v_g* / d_int`.
pub fn concentrate_grade(
    c_tails: &[f64],
    floatability: &[f64],
    v_cell: f64,
    s_b: f64,
    q_conc: f64,
    r_f: &[f64],
    r_ent: &[f64],
) -> Result<f64, ModelError> {
    let flow = |i: usize| c_tails[i] * (v_cell * floatability[i] * s_b * r_f[i] + q_conc * r_ent[i]);
    let num = flow(0);
    let den: f64 = (0..c_tails.len()).map(flow).sum();
    if !(den > f64::MIN_POSITIVE) {
        return Err(ModelError::DegenerateGrade { denominator: den });
    }
    Ok((num / den).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bubble_size_examples() {
        assert_eq!(froth_top_bubble_size(1.3, 6.38e-4, 0.0, 1e-3).unwrap(), 1e-3);
        let linear = froth_top_bubble_size(1.0, 6.38e-4, 10.0, 1e-3).unwrap();
        assert!((linear - 7.38e-3).abs() < 1e-15);
        let quadratic = froth_top_bubble_size(2.0, 6.38e-4, 10.0, 1e-3).unwrap();
        assert!((quadratic - (2.0 * 6.38e-4 * 10.0 + 1e-6f64).sqrt()).abs() < 1e-15);
        assert!((quadratic - 0.11297).abs() < 1e-5);
        assert!(froth_top_bubble_size(1.0, -1.0, 10.0, 1e-3).is_err());
    }

    #[test]
    fn air_recovery_examples() {
        assert_eq!(air_recovery(0.02, 0.02).unwrap(), (0.0, 0.0));
        let (a, s) = air_recovery(0.0, 0.02).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(a, ONE_MINUS_ULP);
        assert!(a < 1.0);
        let (a, s) = air_recovery(0.005, 0.02).unwrap();
        assert_eq!((a, s), (0.75, 0.75));
        assert!(matches!(air_recovery(0.01, 0.0), Err(ModelError::FrothCollapse { .. })));
    }

    #[test]
    fn froth_recovery_examples() {
        let (r, clipped) = froth_recovery(0.7, 0.7, 0.04, 0.01, 1e-3, 1e-3).unwrap();
        assert_eq!((r, clipped), (1.0, false));
        let r = froth_recovery_raw(0.3, 0.2, 0.01, 0.001, 1.0, 4.0).unwrap();
        assert!((r - 1.6f64.powf(0.25) * 0.5).abs() < 1e-15);
        assert!((r - 0.5624).abs() < 1e-4);
        let (r, clipped) = froth_recovery(0.7, 0.7, 0.4, 0.01, 1e-3, 1e-3).unwrap();
        assert_eq!((r, clipped), (1.0, true));
    }

    #[test]
    fn entrainment_examples() {
        assert_eq!(entrainment_factor(0.3, 0.3, 0.02, 1e-3, 0.0, 1e-3).unwrap(), 1.0);
        assert_eq!(entrainment_factor(0.3, 0.3, 0.02, 1e6, 0.1, 1e-3).unwrap(), 0.0);
        let e = entrainment_factor(0.7, 0.7, 0.04, 0.01, 0.1, 1e-3).unwrap();
        assert!((e - (-1.0f64).exp()).abs() < 1e-14);
        assert!(entrainment_factor(0.3, 1.0, 0.02, 1e-3, 0.1, 1e-3).is_err());
    }

    #[test]
    fn concentrate_flow_examples() {
        assert_eq!(concentrate_flow(0.0, 0.0, 0.01, 0.01, 100.0, 0.1), 0.0);
        let q = concentrate_flow(0.7, 0.7, 0.01, 0.01, 100.0, 0.1);
        assert!((q - 6.815 * 0.1 * 1e-4 / (4.0 * 100.0 * 1e-4)).abs() < 1e-18);
        assert!((q - 1.70e-3).abs() < 1e-5);
    }

    #[test]
    fn grade_examples() {
        let p = [1e-4, 1e-5];
        let r = [0.5, 0.5];
        let g = |m: [f64; 2]| concentrate_grade(&m, &p, 1e-4, 10.0, 1e-6, &r, &r).unwrap();
        assert_eq!(g([1.0, 0.0]), 1.0);
        assert_eq!(g([0.0, 1.0]), 0.0);
        let sym = concentrate_grade(&[2.0, 2.0], &[1e-4, 1e-4], 1e-4, 10.0, 1e-6, &r, &r).unwrap();
        assert_eq!(sym, 0.5);
        assert!(matches!(
            concentrate_grade(&[0.0, 0.0], &p, 1e-4, 10.0, 1e-6, &r, &r),
            Err(ModelError::DegenerateGrade { .. })
        ));
    }

    proptest! {
        #[test]
        fn branches_meet_at_one_half(
            v_g in 1e-4f64..0.1,
            v_set in 1e-5f64..1e-2,
            d_int in 1e-4f64..3e-3,
            d_out in 1e-4f64..5e-2,
            k1 in 1e2f64..1e5,
        ) {
            let below = 0.5 - f64::EPSILON;
            let rf_low = froth_recovery_raw(below, 0.5, v_g, v_set, d_int, d_out).unwrap();
            let rf_high = froth_recovery_raw(0.5, 0.5, v_g, v_set, d_int, d_out).unwrap();
            prop_assert!((rf_low - rf_high).abs() <= 4.0 * f64::EPSILON * rf_high);
            let q_low = concentrate_flow(below, 0.5, v_g, d_out, k1, 2e-4);
            let q_high = concentrate_flow(0.5, 0.5, v_g, d_out, k1, 2e-4);
            prop_assert!((q_low - q_high).abs() <= 4.0 * f64::EPSILON * q_high);
        }

        #[test]
        fn bubble_size_grows_with_residence_time_and_rate(
            n in 0.3f64..4.0,
            c in 1e-5f64..5e-3,
            tau in 0.0f64..200.0,
            d_int in 1e-4f64..3e-3,
            bump in 1.01f64..2.0,
        ) {
            let d = froth_top_bubble_size(n, c, tau, d_int).unwrap();
            prop_assert!(froth_top_bubble_size(n, c, tau * bump + 1.0, d_int).unwrap() > d);
            if tau > 0.0 {
                prop_assert!(froth_top_bubble_size(n, c * bump, tau, d_int).unwrap() > d);
            }
        }

        #[test]
        fn larger_top_bubbles_lower_flow_and_recovery(
            alpha_star in 0.01f64..0.99,
            v_g in 1e-4f64..0.1,
            d_out in 1e-4f64..5e-2,
            bump in 1.01f64..3.0,
        ) {
            let alpha = alpha_star.min(ONE_MINUS_ULP);
            let q = concentrate_flow(alpha, alpha_star, v_g, d_out, 3e4, 2e-4);
            prop_assert!(concentrate_flow(alpha, alpha_star, v_g, d_out * bump, 3e4, 2e-4) < q);
            let r = froth_recovery_raw(alpha, alpha_star, v_g, 1e-3, 1e-3, d_out).unwrap();
            prop_assert!(froth_recovery_raw(alpha, alpha_star, v_g, 1e-3, 1e-3, d_out * bump).unwrap() < r);
        }

        #[test]
        fn grade_is_bounded_and_scale_free(
            m1 in 0.0f64..10.0,
            m2 in 1e-6f64..10.0,
            rf1 in 0.0f64..1.0,
            rf2 in 0.0f64..1.0,
            re1 in 0.0f64..1.0,
            re2 in 1e-3f64..1.0,
            scale in 1e-3f64..1e3,
        ) {
            let p = [1.3e-4, 1e-5];
            let g = concentrate_grade(&[m1, m2], &p, 1.2e-4, 50.0, 1e-7, &[rf1, rf2], &[re1, re2]).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            let gs = concentrate_grade(&[m1 * scale, m2 * scale], &p, 1.2e-4, 50.0, 1e-7, &[rf1, rf2], &[re1, re2]).unwrap();
            prop_assert!((g - gs).abs() <= 1e-14);
        }
    }
}
