//! Frozen expected values for the long-sum and root-finding operations,
//! cross-checked against independent in-test oracles.
//!
//! The frozen constants were computed before the build by a 60-digit
//! summation/bisection script; the in-test oracles recompute the same
//! quantities through a different summation path (ascending-order Neumaier
//! accumulation over scalar formulas) so the library, the frozen values, and
//! the oracle must all agree.

// frozen constants keep every digit of the 60-digit oracle output
#![allow(clippy::excessive_precision)]

use specreg_core::{ProblemInstance, Scheme, SpectralVector, Spectrum};

/// Neumaier summation over terms fed in ascending-magnitude order; written
/// here, independent of the crate's internal accumulation.
fn oracle_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn oracle_n(a: f64, j_max: usize, lambda: f64) -> f64 {
    oracle_sum(
        (1..=j_max)
            .map(|j| {
                let t = (j as f64).powf(-2.0 * a);
                t / (t + lambda)
            })
            .collect(),
    )
}

#[test]
fn effective_dimension_power_spectrum_frozen() {
    let spectrum = Spectrum::power_law(1.0, 1000).unwrap();
    let n = spectrum.effective_dimension(1e-4).unwrap();
    let frozen = 146.61771629159653;
    assert!((n - frozen).abs() <= 1e-12 * frozen, "N = {n}");
    let oracle = oracle_n(1.0, 1000, 1e-4);
    assert!(
        (n - oracle).abs() <= 1e-12 * frozen,
        "oracle disagrees: {oracle}"
    );
}

#[test]
fn rho_n_power_spectrum_frozen() {
    let spectrum = Spectrum::power_law(1.0, 1000).unwrap();
    let rho = spectrum.rho_n(0.01).unwrap();
    let frozen = 2.5727422203720306;
    assert!((rho - frozen).abs() <= 1e-12 * frozen, "rho = {rho}");
    let oracle = 1.0 / (0.01 * oracle_n(1.0, 1000, 0.01)).sqrt();
    assert!((rho - oracle).abs() <= 1e-12 * frozen);
}

#[test]
fn rho_n_is_non_increasing_between_sampled_points() {
    let spectrum = Spectrum::power_law(1.0, 1000).unwrap();
    let grid = specreg_core::geometric_grid(1e-6, 1.0, 50);
    let rhos: Vec<f64> = grid.iter().map(|&t| spectrum.rho_n(t).unwrap()).collect();
    assert!(rhos.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn invert_theta_at_effective_noise_level_frozen() {
    // target = delta (1 + sqrt(log(1/delta))) at delta = 1e-3.
    let spectrum = Spectrum::power_law(1.0, 1000).unwrap();
    let delta: f64 = 1e-3;
    let target = delta * (1.0 + (1.0 / delta).ln().abs().sqrt());
    assert!((target - 0.0036282608848784660).abs() < 1e-18);
    let t = spectrum.invert_theta(target, 1e-12, 1.0).unwrap();
    let frozen = 0.00073718188300883123;
    // bisection guarantees the value tolerance, and Theta is locally ~t^(3/4),
    // so the argument matches the frozen root to ~rtol as well
    assert!(
        (t - frozen).abs() <= 1e-8 * frozen,
        "t = {t}, frozen = {frozen}"
    );
    // value-level check against the independent oracle summation
    let theta_at = (t / oracle_n(1.0, 1000, t)).sqrt();
    assert!((theta_at - target).abs() <= 1e-9 * target);
}

#[test]
fn reconstruct_three_eigenvalue_frozen_triple() {
    // Tikhonov at alpha = 1/4 on the 3-eigenvalue instance with explicit
    // noise: coefficients are exact decimals.
    let spectrum = Spectrum::new(vec![1.0, 0.25, 0.0625]).unwrap();
    let instance = ProblemInstance::new(
        spectrum,
        SpectralVector::new(vec![1.0, 1.0, 1.0]),
        SpectralVector::zeros(3),
        0.1,
    )
    .unwrap();
    let zeta = SpectralVector::new(vec![0.3, -0.2, 0.1]);
    let z_delta = instance.observed(&zeta).unwrap();
    let x =
        specreg_core::spectrum::reconstruct(&instance, Scheme::Tikhonov, 0.25, &z_delta).unwrap();
    let frozen = [0.824, 0.46, 0.232];
    for (got, want) in x.coefficients().iter().zip(frozen) {
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }
    // scalar-formula oracle: x_j = z_j / (t_j + alpha)
    let ts = [1.0, 0.25, 0.0625];
    for ((&t, &zeta_j), &x_j) in ts.iter().zip(zeta.coefficients()).zip(x.coefficients()) {
        let z = t + 0.1 * zeta_j;
        assert!((x_j - z / (t + 0.25)).abs() < 1e-16);
    }
}

#[test]
fn weighted_misfit_three_eigenvalue_frozen() {
    let spectrum = Spectrum::new(vec![1.0, 0.25, 0.0625]).unwrap();
    let instance = ProblemInstance::new(
        spectrum,
        SpectralVector::new(vec![1.0, 1.0, 1.0]),
        SpectralVector::zeros(3),
        0.1,
    )
    .unwrap();
    let zeta = SpectralVector::new(vec![0.3, -0.2, 0.1]);
    let z_delta = instance.observed(&zeta).unwrap();
    let m =
        specreg_core::rules::weighted_misfit(&instance, Scheme::Tikhonov, 0.25, &z_delta).unwrap();
    let frozen = 0.084596985761905252;
    assert!((m - frozen).abs() <= 1e-14, "misfit = {m}");
    // independent scalar evaluation with s = r = alpha/(t + alpha)
    let ts = [1.0f64, 0.25, 0.0625];
    let mut acc = 0.0;
    for (&t, &zeta_j) in ts.iter().zip(zeta.coefficients()) {
        let z = t + 0.1 * zeta_j;
        let s = 0.25 / (t + 0.25);
        acc += (s * s * z) * (s * s * z);
    }
    assert!((m - acc.sqrt()).abs() <= 1e-15);
}

#[test]
fn kappa_auto_power_spectrum_frozen() {
    let spectrum = Spectrum::power_law(1.0, 1000).unwrap();
    let n1 = spectrum.effective_dimension(1.0).unwrap();
    assert!((n1 - 1.0756745476347480).abs() <= 1e-13);
    let kappa = specreg_core::rules::kappa_auto(1e-2, n1).unwrap();
    let frozen = 5.8523108963656472;
    assert!((kappa - frozen).abs() <= 1e-12 * frozen, "kappa = {kappa}");
}

#[test]
fn oracle_rhs_statistical_power_benchmark_frozen() {
    // x_j = j^(-1.55) on the power-law spectrum (a = 1, J = 2000), Tikhonov,
    // alpha = 0.01, delta = 1e-3.
    let spectrum = Spectrum::power_law(1.0, 2000).unwrap();
    let x_dag = SpectralVector::new((1..=2000).map(|j| (j as f64).powf(-1.55)).collect());
    let instance =
        ProblemInstance::new(spectrum, x_dag, SpectralVector::zeros(2000), 1e-3).unwrap();
    let v = specreg_core::rules::oracle_rhs_statistical(&instance, Scheme::Tikhonov, 0.01).unwrap();
    let frozen = 0.20432999958716707;
    assert!((v - frozen).abs() <= 1e-11 * frozen, "oracle rhs = {v}");
    // oracle re-derivation: bias and Theta from ascending sums
    let bias_sq = oracle_sum(
        (1..=2000usize)
            .map(|j| {
                let t = (j as f64).powi(-2);
                let r = 0.01 / (t + 0.01);
                let x = (j as f64).powf(-1.55);
                (r * x) * (r * x)
            })
            .collect(),
    );
    let theta = (0.01 / oracle_n(1.0, 2000, 0.01)).sqrt();
    assert!((bias_sq.sqrt() - 0.063070027209692505).abs() <= 1e-13);
    assert!((theta - 0.025684989341375743).abs() <= 1e-14);
    let delta: f64 = 1e-3;
    let expected = bias_sq.sqrt() + delta * (1.0 + (1.0 / delta).ln().sqrt()) / theta;
    assert!((v - expected).abs() <= 1e-12);
}

#[test]
fn check_kn_power_spectrum_frozen_ratio() {
    // j^-2 spectrum (J = 500), v_j = 1/j, Tikhonov, c1 = 4, c2 = 1/4,
    // t0 = 0.1, 20 geometric probes in [t_J, t0].
    let spectrum = Spectrum::power_law(1.0, 500).unwrap();
    let v = SpectralVector::new((1..=500).map(|j| 1.0 / j as f64).collect());
    let probes = specreg_core::geometric_grid(spectrum.smallest(), 0.1, 20);
    let cfg = specreg_core::KnConfig::new(4.0, 0.25, 0.1, 0.9, probes.clone()).unwrap();
    let report = specreg_core::selfsim::check_kn(&spectrum, &v, Scheme::Tikhonov, &cfg).unwrap();
    assert!(report.pass());
    let frozen = 0.18317746538476755;
    assert!(
        (report.worst_ratio - frozen).abs() <= 1e-10 * frozen,
        "worst ratio {}",
        report.worst_ratio
    );

    // independent double-loop summation oracle over every probe
    let ts: Vec<f64> = (1..=500).map(|j| (j as f64).powi(-2)).collect();
    let mut worst = 0.0f64;
    for &alpha in &probes {
        let lhs = oracle_sum(
            ts.iter()
                .zip(v.coefficients())
                .filter(|(&t, _)| t <= alpha)
                .map(|(_, &c)| c * c)
                .collect(),
        );
        let rhs = 16.0
            * oracle_sum(
                ts.iter()
                    .zip(v.coefficients())
                    .filter(|(&t, _)| t >= 0.25 * alpha)
                    .map(|(&t, &c)| {
                        let r = alpha / (t + alpha);
                        r * r * c * c
                    })
                    .collect(),
            );
        worst = worst.max(lhs / rhs);
    }
    assert!((report.worst_ratio - worst).abs() <= 1e-12);
}

#[test]
fn check_projector_form_power_spectrum_frozen_ratio() {
    let spectrum = Spectrum::power_law(1.0, 500).unwrap();
    let v = SpectralVector::new((1..=500).map(|j| 1.0 / j as f64).collect());
    let probes = specreg_core::geometric_grid(spectrum.smallest(), 0.1, 20);
    let cfg = specreg_core::KnConfig::new(4.0, 0.25, 0.1, 0.9, probes.clone()).unwrap();
    let report = specreg_core::selfsim::check_projector_form(&spectrum, &v, &cfg).unwrap();
    assert!(report.pass());
    assert_eq!(report.skipped_probes, 0);
    let frozen = 0.73330425020815461;
    assert!(
        (report.worst_ratio - frozen).abs() <= 1e-10 * frozen,
        "worst ratio {}",
        report.worst_ratio
    );

    // partial-sum oracle
    let ts: Vec<f64> = (1..=500).map(|j| (j as f64).powi(-2)).collect();
    let partial = |cut: f64| -> f64 {
        oracle_sum(
            ts.iter()
                .zip(v.coefficients())
                .filter(|(&t, _)| t <= cut)
                .map(|(_, &c)| c * c)
                .collect(),
        )
    };
    let mut worst = 0.0f64;
    for &alpha in &probes {
        let rhs = partial(alpha);
        if rhs == 0.0 {
            continue;
        }
        worst = worst.max((partial(0.25 * alpha) / rhs).sqrt());
    }
    assert!((report.worst_ratio - worst).abs() <= 1e-12);
}

#[test]
fn weighted_noise_second_moment_montecarlo() {
    // E ||s_alpha^{1/2} zeta||^2 = alpha N(alpha): Monte Carlo mean within
    // 5 standard errors, j^-2 spectrum at J = 500, alpha = 0.01.
    let spectrum = Spectrum::power_law(1.0, 500).unwrap();
    let alpha = 0.01;
    let expected = alpha * spectrum.effective_dimension(alpha).unwrap();
    let r = 2000u64;
    let mut samples = Vec::with_capacity(r as usize);
    for i in 0..r {
        let zeta = specreg_core::noise::sample_zeta(&spectrum, 2468, i);
        let norm = specreg_core::noise::weighted_noise_norm(&spectrum, &zeta, alpha).unwrap();
        samples.push(norm * norm);
    }
    let mean = samples.iter().sum::<f64>() / r as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (r - 1) as f64;
    let se = (var / r as f64).sqrt();
    assert!(
        (mean - expected).abs() <= 5.0 * se,
        "mean {mean} vs expected {expected} (se {se})"
    );
}
