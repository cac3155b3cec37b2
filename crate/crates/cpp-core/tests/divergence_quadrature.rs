//! Closed-form Gaussian divergences cross-checked against adaptive
//! Gauss-Kronrod quadrature of the defining integrals, and score functions
//! cross-checked against numerical derivatives of those quadratures.

mod common;

use common::{gaussian_support, integrate, normal_pdf, uniform};
use cpp_core::divergence::{
    bhattacharyya_coefficient, dpd, hellinger_sq, neg_log_bc, DivergenceKind, GaussianLaw,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const QUAD_TOL: f64 = 1e-12;

fn random_pair(rng: &mut ChaCha8Rng) -> (GaussianLaw, GaussianLaw) {
    let p = GaussianLaw::new(uniform(rng, -3.0, 3.0), uniform(rng, 0.1, 5.0)).unwrap();
    let q = GaussianLaw::new(uniform(rng, -3.0, 3.0), uniform(rng, 0.1, 5.0)).unwrap();
    (p, q)
}

#[test]
fn bhattacharyya_and_hellinger_match_quadrature_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for _ in 0..30 {
        let (p, q) = random_pair(&mut rng);
        let (lo, hi) = gaussian_support(p.mean, p.var, q.mean, q.var);
        let bc_quad = integrate(
            |x| (normal_pdf(x, p.mean, p.var) * normal_pdf(x, q.mean, q.var)).sqrt(),
            lo,
            hi,
            QUAD_TOL,
        );
        let bc = bhattacharyya_coefficient(&p, &q);
        assert!(
            (bc - bc_quad).abs() <= 1e-10,
            "affinity {bc} vs quadrature {bc_quad}"
        );
        assert!((neg_log_bc(&p, &q) + bc_quad.ln()).abs() <= 1e-10);
        // Hellinger by its own defining integral, not via the affinity.
        let h2_quad = 0.5
            * integrate(
                |x| {
                    let d = normal_pdf(x, p.mean, p.var).sqrt()
                        - normal_pdf(x, q.mean, q.var).sqrt();
                    d * d
                },
                lo,
                hi,
                QUAD_TOL,
            );
        assert!(
            (hellinger_sq(&p, &q) - h2_quad).abs() <= 1e-10,
            "hellinger {} vs quadrature {h2_quad}",
            hellinger_sq(&p, &q)
        );
    }
}

#[test]
fn density_power_divergence_matches_quadrature_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let alphas = [0.1, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];
    for (k, &alpha) in alphas.iter().enumerate().cycle().take(28) {
        let (p, q) = random_pair(&mut rng);
        let (lo, hi) = gaussian_support(p.mean, p.var, q.mean, q.var);
        let integral = integrate(
            |x| {
                let pd = normal_pdf(x, p.mean, p.var);
                let qd = normal_pdf(x, q.mean, q.var);
                alpha * qd.powf(1.0 + alpha) - (1.0 + alpha) * pd * qd.powf(alpha)
                    + pd.powf(1.0 + alpha)
            },
            lo,
            hi,
            QUAD_TOL,
        );
        let closed = dpd(&p, &q, alpha);
        assert!(
            (closed - integral).abs() <= 1e-10,
            "instance {k}: dpd {closed} vs quadrature {integral} at alpha {alpha}"
        );
    }
}

#[test]
fn evaluate_dispatch_agrees_with_the_free_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    for _ in 0..10 {
        let (p, q) = random_pair(&mut rng);
        assert_eq!(DivergenceKind::LogBc.evaluate(&p, &q), neg_log_bc(&p, &q));
        assert_eq!(
            DivergenceKind::Hellinger.evaluate(&p, &q),
            hellinger_sq(&p, &q)
        );
        assert_eq!(
            DivergenceKind::Dpd { alpha: 0.7 }.evaluate(&p, &q),
            dpd(&p, &q, 0.7)
        );
    }
}

/// Scores are the derivative of each divergence in the mean gap. The oracle
/// here recomputes the divergence by quadrature at shifted means and takes a
/// central difference, touching none of the closed forms.
#[test]
fn scores_match_central_differences_of_the_quadrature_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let kinds = [
        DivergenceKind::LogBc,
        DivergenceKind::Hellinger,
        DivergenceKind::Dpd { alpha: 0.5 },
        DivergenceKind::Dpd { alpha: 1.0 },
    ];
    for &kind in &kinds {
        for _ in 0..6 {
            let s1_sq = uniform(&mut rng, 0.3, 3.0);
            let s2_sq = uniform(&mut rng, 0.3, 3.0);
            let delta = uniform(&mut rng, -3.0, 3.0);
            let h = 1e-4;
            let at = |gap: f64| {
                // First law plays the swapped predictive (variance s1_sq)
                // with mean offset `gap` below the second law's mean.
                let p_mean = -gap;
                let (lo, hi) = gaussian_support(p_mean, s1_sq, 0.0, s2_sq);
                match kind {
                    DivergenceKind::LogBc => -integrate(
                        |x| {
                            (normal_pdf(x, p_mean, s1_sq) * normal_pdf(x, 0.0, s2_sq)).sqrt()
                        },
                        lo,
                        hi,
                        QUAD_TOL,
                    )
                    .ln(),
                    DivergenceKind::Hellinger => {
                        1.0 - integrate(
                            |x| {
                                (normal_pdf(x, p_mean, s1_sq) * normal_pdf(x, 0.0, s2_sq))
                                    .sqrt()
                            },
                            lo,
                            hi,
                            QUAD_TOL,
                        )
                    }
                    DivergenceKind::Dpd { alpha } => integrate(
                        |x| {
                            let pd = normal_pdf(x, p_mean, s1_sq);
                            let qd = normal_pdf(x, 0.0, s2_sq);
                            alpha * qd.powf(1.0 + alpha) - (1.0 + alpha) * pd * qd.powf(alpha)
                                + pd.powf(1.0 + alpha)
                        },
                        lo,
                        hi,
                        QUAD_TOL,
                    ),
                }
            };
            let fd = (at(delta + h) - at(delta - h)) / (2.0 * h);
            let score = kind.score(delta, s1_sq, s2_sq);
            assert!(
                (score - fd).abs() <= 1e-6 * score.abs().max(1.0),
                "{kind:?}: score {score} vs quadrature derivative {fd} at delta {delta}"
            );
        }
    }
}
