use std::f64::consts::PI;

use proptest::prelude::*;
use purity_core::channel::{
    asymptotic_cov, channel_asymptote, evolve_cov, find_purity_minimum, has_purity_minimum, integrate_cov_ode, mu_of_t,
    mu_optimal, optimal_input, phi_of_t, r_of_t,
};
use purity_core::gaussian::{angle_distance, cov_from_params, params_from_cov, purity, purity_from_nbar, wigner_eval};
use purity_core::quadrature::{purity_by_phase_space_integral, seralian_weighted_integral, QuadratureGrid};
use purity_core::sampling::{read_homodyne_csv, write_homodyne_csv};
use purity_core::{BathParams, GaussianParams, GaussianState, HomodyneBatch, PhasePoint, QSampleBatch, Sym2};

fn params() -> impl Strategy<Value = GaussianParams> {
    (-5.0..5.0f64, -5.0..5.0f64, 0.0..10.0f64, 0.0..2.0f64, 0.0..PI)
        .prop_map(|(x0, p0, nbar, r, phi)| GaussianParams::new(x0, p0, nbar, r, phi).unwrap())
}

fn bath() -> impl Strategy<Value = BathParams> {
    (0.1..3.0f64, 0.0..3.0f64, 0.0..0.95f64, 0.0..2.0 * PI).prop_map(|(gamma, n, ratio, arg)| {
        let m = (n * (n + 1.0)).sqrt() * ratio;
        BathParams::new(gamma, n, m * arg.cos(), m * arg.sin()).unwrap()
    })
}

fn thermal_bath() -> impl Strategy<Value = BathParams> {
    (0.1..3.0f64, 0.0..3.0f64).prop_map(|(gamma, n)| BathParams::thermal(gamma, n).unwrap())
}

proptest! {
    #[test]
    fn params_round_trip(p in params()) {
        let back = params_from_cov(&p.to_state().unwrap()).unwrap();
        // n̄ comes from a determinant that cancels by ~cosh² 2r, so for n̄ > 1
        // the tolerance is relative.
        prop_assert!((back.nbar - p.nbar).abs() < 1e-12 * p.nbar.max(1.0));
        prop_assert!((back.r - p.r).abs() < 1e-12);
        prop_assert!((back.x0 - p.x0).abs() < 1e-15 && (back.p0 - p.p0).abs() < 1e-15);
        // The angle is only defined to O(eps / sinh 2r).
        if p.r > 1e-3 {
            prop_assert!(angle_distance(back.phi, p.phi) < 1e-12);
        }
    }

    #[test]
    fn purity_depends_only_on_nbar(p in params(), r2 in 0.0..2.0f64, phi2 in 0.0..PI) {
        let other = GaussianParams { r: r2, phi: phi2, ..p };
        let a = purity(&cov_from_params(&p).unwrap());
        let b = purity(&cov_from_params(&other).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((a - purity_from_nbar(p.nbar).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn det_is_fixed_by_nbar(p in params()) {
        let det = cov_from_params(&p).unwrap().det();
        let expected = (2.0 * p.nbar + 1.0).powi(2) / 4.0;
        prop_assert!((det - expected).abs() <= 1e-12 * expected);
        prop_assert!(det >= 0.25 - 1e-12);
    }

    #[test]
    fn wigner_is_positive_and_peaks_at_mean(p in params(), dx in -1.0..1.0f64, dp in -1.0..1.0f64) {
        let s = p.to_state().unwrap();
        let peak = wigner_eval(&s, PhasePoint::new(p.x0, p.p0));
        let w = wigner_eval(&s, PhasePoint::new(p.x0 + dx, p.p0 + dp));
        prop_assert!(w > 0.0 && w <= peak);
    }

    #[test]
    fn evolution_stays_physical_and_matches_closed_form(p in params(), b in bath(), gt in 0.0..8.0f64) {
        let t = gt / b.gamma;
        let s = evolve_cov(&p.to_state().unwrap(), &b, t).unwrap();
        prop_assert!(s.cov.det() >= 0.25 - 1e-12);
        prop_assert!((purity(&s.cov) - mu_of_t(&p, &b, t).unwrap()).abs() < 1e-10);
        // Mean decays as e^{−Γt/2}.
        prop_assert!((s.mean.x - p.x0 * (-0.5 * gt).exp()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_r_and_phi_match_evolved_covariance(p in params(), b in bath(), gt in 0.0..8.0f64) {
        let t = gt / b.gamma;
        let from_cov = params_from_cov(&evolve_cov(&p.to_state().unwrap(), &b, t).unwrap()).unwrap();
        let r = r_of_t(&p, &b, t).unwrap();
        prop_assert!((r - from_cov.r).abs() < 1e-9);
        if r > 1e-4 {
            prop_assert!(angle_distance(phi_of_t(&p, &b, t).unwrap(), from_cov.phi) < 1e-8);
        }
    }

    #[test]
    fn optimal_input_cancels_bath_squeezing(b in bath(), gt in 0.0..10.0f64) {
        let t = gt / b.gamma;
        let mu = mu_of_t(&optimal_input(&b).unwrap(), &b, t).unwrap();
        prop_assert!((mu - mu_optimal(1.0, &b, t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn optimal_input_beats_other_angles(b in bath(), phi0 in 0.0..PI) {
        let best = optimal_input(&b).unwrap();
        let other = GaussianParams { phi: phi0, ..best };
        let t = 1.0 / b.gamma;
        prop_assert!(mu_of_t(&best, &b, t).unwrap() >= mu_of_t(&other, &b, t).unwrap() - 1e-15);
    }

    #[test]
    fn asymptote_reached(p in params(), b in bath()) {
        let t = 30.0 / b.gamma;
        let a = channel_asymptote(&b).unwrap();
        prop_assert!((mu_of_t(&p, &b, t).unwrap() - a.mu_inf).abs() < 1e-9);
        prop_assert!((r_of_t(&p, &b, t).unwrap() - a.r_inf).abs() < 1e-9);
        // The angle is ill-conditioned as r → 0; compare sinh 2r·(cos 2φ, sin 2φ) instead.
        let aniso = |r: f64, phi: f64| ((2.0 * r).sinh() * (2.0 * phi).cos(), (2.0 * r).sinh() * (2.0 * phi).sin());
        let got = aniso(r_of_t(&p, &b, t).unwrap(), phi_of_t(&p, &b, t).unwrap());
        let want = aniso(a.r_inf, a.phi_inf);
        prop_assert!((got.0 - want.0).abs() < 1e-9 && (got.1 - want.1).abs() < 1e-9, "{got:?} vs {want:?}");
    }

    #[test]
    fn asymptotic_state_is_fixed(b in bath(), gt in 0.0..10.0f64) {
        let s = GaussianState::new(PhasePoint::new(0.0, 0.0), asymptotic_cov(&b).unwrap());
        let e = evolve_cov(&s, &b, gt / b.gamma).unwrap();
        prop_assert!((e.cov.sxx() - s.cov.sxx()).abs() < 1e-12);
        prop_assert!((e.cov.spp() - s.cov.spp()).abs() < 1e-12);
        prop_assert!((e.cov.sxp() - s.cov.sxp()).abs() < 1e-12);
    }

    #[test]
    fn purity_minimum_detected_away_from_threshold(
        nbar in 0.0..3.0f64, r in 0.0..2.5f64, phi in 0.0..PI, b in thermal_bath(),
    ) {
        let p = GaussianParams::squeezed_thermal(nbar, r, phi).unwrap();
        let (mu0, mu_inf) = (p.purity().unwrap(), 1.0 / (2.0 * b.n + 1.0));
        let margin = (2.0 * r).cosh() / (mu0 / mu_inf).max(mu_inf / mu0);
        prop_assume!(!(0.98..1.02).contains(&margin));
        let found = find_purity_minimum(&p, &b).unwrap();
        prop_assert_eq!(has_purity_minimum(&p, &b).unwrap(), found.is_some());
    }

    #[test]
    fn q_batch_csv_round_trip(pts in prop::collection::vec((-1e6..1e6f64, -1e6..1e6f64), 1..50)) {
        let batch = QSampleBatch::new(pts.iter().map(|&(x, p)| PhasePoint::new(x, p)).collect()).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        prop_assert!(buf.starts_with(b"x,p\n"));
        prop_assert_eq!(QSampleBatch::read_csv(buf.as_slice()).unwrap(), batch);
    }

    #[test]
    fn homodyne_csv_round_trip(values in prop::collection::vec(-1e3..1e3f64, 2..30)) {
        let batches = vec![
            HomodyneBatch::new(0.0, values.clone()).unwrap(),
            HomodyneBatch::new(PI / 4.0, values.iter().map(|v| -v).collect()).unwrap(),
        ];
        let mut buf = Vec::new();
        write_homodyne_csv(&batches, &mut buf).unwrap();
        prop_assert!(buf.starts_with(b"theta,value\n"));
        prop_assert_eq!(read_homodyne_csv(buf.as_slice()).unwrap(), batches);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn phase_space_oracles(
        p in params(),
        g in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
    ) {
        let s = p.to_state().unwrap();
        let grid = QuadratureGrid::default();
        prop_assert!((purity_by_phase_space_integral(&s, &grid).unwrap() - purity(&s.cov)).abs() < 1e-6);
        // γ in span{I, A, B}.
        let gamma = Sym2::IDENTITY.scale(g.0).add(&Sym2::A.scale(g.1)).add(&Sym2::B.scale(g.2));
        prop_assert!(seralian_weighted_integral(&s, &gamma, &grid).unwrap().abs() < 1e-8);
    }

    #[test]
    fn closed_form_matches_rk4(p in params(), b in bath(), gt in 0.0..5.0f64) {
        let t = gt / b.gamma;
        let numeric = integrate_cov_ode(&p.to_state().unwrap(), &b, t, 1e-3 / b.gamma).unwrap();
        prop_assert!((mu_of_t(&p, &b, t).unwrap() - purity(&numeric.cov)).abs() < 1e-8);
    }
}

/// Along an RK4 trajectory in a thermal bath, μ and r obey
/// μ̇ = Γ(μ − μ² cosh 2r / μ∞) and ṙ = −(Γ/2)(μ/μ∞) sinh 2r.
#[test]
fn integrator_satisfies_coupled_system() {
    let b = BathParams::thermal(0.7, 0.8).unwrap();
    let mu_inf = 1.0 / (2.0 * b.n + 1.0);
    let start = GaussianParams::squeezed_thermal(0.3, 1.2, 0.4)
        .unwrap()
        .to_state()
        .unwrap();
    let at = |t: f64| params_from_cov(&integrate_cov_ode(&start, &b, t, 1e-4).unwrap()).unwrap();
    let h = 1e-4;
    for t in [0.2, 0.5, 1.0, 2.0, 4.0] {
        let (lo, mid, hi) = (at(t - h), at(t), at(t + h));
        let (mu_lo, mu_mid, mu_hi) = (lo.purity().unwrap(), mid.purity().unwrap(), hi.purity().unwrap());
        let mu_dot = (mu_hi - mu_lo) / (2.0 * h);
        let r_dot = (hi.r - lo.r) / (2.0 * h);
        let mu_rhs = b.gamma * (mu_mid - mu_mid * mu_mid * (2.0 * mid.r).cosh() / mu_inf);
        let r_rhs = -0.5 * b.gamma * (mu_mid / mu_inf) * (2.0 * mid.r).sinh();
        assert!((mu_dot - mu_rhs).abs() < 1e-6, "t={t}: {mu_dot} vs {mu_rhs}");
        assert!((r_dot - r_rhs).abs() < 1e-6, "t={t}: {r_dot} vs {r_rhs}");
    }
}

/// μ(t) rises with cos(2φ∞ − 2φ₀) and, at the optimal angle, falls as r₀
/// moves away from r∞.
#[test]
fn monotone_dependence_on_angle_and_squeezing() {
    let b = BathParams::new(1.3, 0.9, 0.4, -0.3).unwrap();
    let a = channel_asymptote(&b).unwrap();
    for gt in [0.5, 1.0, 2.0] {
        let t = gt / b.gamma;
        let mut by_angle: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let phi0 = PI * i as f64 / 50.0;
                let p = GaussianParams::squeezed_thermal(0.2, 0.8, phi0).unwrap();
                ((2.0 * a.phi_inf - 2.0 * phi0).cos(), mu_of_t(&p, &b, t).unwrap())
            })
            .collect();
        by_angle.sort_by(|x, y| x.0.total_cmp(&y.0));
        assert!(by_angle.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-15));

        let mut by_r: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let r0 = 2.0 * i as f64 / 49.0;
                let p = GaussianParams::squeezed_thermal(0.2, r0, a.phi_inf).unwrap();
                ((2.0 * a.r_inf - 2.0 * r0).cosh(), mu_of_t(&p, &b, t).unwrap())
            })
            .collect();
        by_r.sort_by(|x, y| x.0.total_cmp(&y.0));
        assert!(by_r.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15));
    }
}

#[test]
fn thermal_stationary_state_is_the_only_fixed_point() {
    let b = BathParams::thermal(1.0, 0.7).unwrap();
    let fixed = GaussianParams::thermal(0.7).unwrap();
    let s = fixed.to_state().unwrap();
    for gt in [0.3, 1.0, 5.0] {
        let e = evolve_cov(&s, &b, gt).unwrap();
        assert!((e.cov.sxx() - s.cov.sxx()).abs() < 1e-12 && e.cov.sxp().abs() < 1e-12);
    }
    // Same purity but squeezed, or same squeezing but different purity: both move.
    for p in [
        GaussianParams::squeezed_thermal(0.7, 0.3, 0.0).unwrap(),
        GaussianParams::thermal(0.2).unwrap(),
    ] {
        assert!((mu_of_t(&p, &b, 0.5).unwrap() - p.purity().unwrap()).abs() > 1e-4);
    }
}
