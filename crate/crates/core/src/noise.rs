//! Noise realizations in the eigenbasis of `A` and admissible noise bounds.
//!
//! Gaussian white noise enters the symmetrized equation only through
//! `zeta = T* xi`, whose coefficients are independent centered Gaussians with
//! variance `t_j`. Deterministic general noise is carried either as an
//! explicit coefficient vector or as a power-bounded direction with
//! `||A^(-mu) zeta|| <= 1`.
//!
//! Reproducibility contract: the random stream for replicate `r` of seed `s`
//! is `ChaCha8` keyed by `seed_from_u64(s)` (SplitMix64 key expansion) with
//! the ChaCha stream index set to `r`. Coefficients are drawn in index order
//! `j = 1..=J` as `sqrt(t_j) * StandardNormal` (ziggurat). Replicates are
//! therefore reproducible and order-independent; no global random state is
//! used. Bit-exactness across platforms is not promised; the statistical
//! contracts are.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::compensated_sum;
use crate::rules::{GridPoint, GridTables};
use crate::spectrum::{SpectralVector, Spectrum};

/// One realization of `zeta_j ~ N(0, t_j)`, deterministic in
/// `(seed, replicate)`.
pub fn sample_zeta(spectrum: &Spectrum, seed: u64, replicate: u64) -> SpectralVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    SpectralVector::new(
        spectrum
            .eigenvalues()
            .iter()
            .map(|&t| t.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )
}

/// Weighted noise norm `||s_alpha^{1/2}(A) zeta|| =
/// sqrt(sum_j alpha/(t_j + alpha) zeta_j^2)`.
///
/// Under Gaussian `zeta` its squared expectation is `alpha * N(alpha)`.
pub fn weighted_noise_norm(spectrum: &Spectrum, zeta: &SpectralVector, alpha: f64) -> Result<f64> {
    zeta.check_paired(spectrum)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain {
            what: "alpha",
            value: alpha,
            constraint: "must be finite and > 0",
        });
    }
    Ok(compensated_sum(
        spectrum
            .eigenvalues()
            .iter()
            .zip(zeta.coefficients())
            .map(|(&t, &z)| alpha / (t + alpha) * z * z),
    )
    .sqrt())
}

/// Source of noise realizations for an experiment.
#[derive(Debug, Clone)]
pub enum NoiseSpec {
    /// White noise in the eigenbasis; fresh draw per replicate.
    Gaussian { seed: u64 },
    /// Fixed direction with `||A^(-mu) direction|| <= 1`; identical across
    /// replicates.
    PowerBounded { mu: f64, direction: SpectralVector },
    /// Fully explicit noise vector.
    Explicit { zeta: SpectralVector },
}

impl NoiseSpec {
    pub fn gaussian(seed: u64) -> Self {
        NoiseSpec::Gaussian { seed }
    }

    /// Validates the power bound `sum_j t_j^(-2 mu) d_j^2 <= 1` and the
    /// admissible range `0 <= mu <= 1/2`.
    pub fn power_bounded(spectrum: &Spectrum, mu: f64, direction: SpectralVector) -> Result<Self> {
        check_mu(mu)?;
        direction.check_paired(spectrum)?;
        let weight = compensated_sum(
            spectrum
                .eigenvalues()
                .iter()
                .zip(direction.coefficients())
                .map(|(&t, &d)| t.powf(-2.0 * mu) * d * d),
        );
        if weight > 1.0 + 1e-9 {
            return Err(Error::Domain {
                what: "power-bounded direction weight",
                value: weight,
                constraint: "sum t_j^(-2 mu) d_j^2 <= 1",
            });
        }
        Ok(NoiseSpec::PowerBounded { mu, direction })
    }

    /// Constructed worst-case direction saturating the power bound:
    /// `d_j = t_j^mu / sqrt(J)`, which spreads the admissible budget over the
    /// whole spectrum and attains `sum t_j^(-2 mu) d_j^2 = 1`.
    pub fn power_bounded_saturated(spectrum: &Spectrum, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let scale = 1.0 / (spectrum.len() as f64).sqrt();
        let direction = SpectralVector::new(
            spectrum
                .eigenvalues()
                .iter()
                .map(|&t| t.powf(mu) * scale)
                .collect(),
        );
        Self::power_bounded(spectrum, mu, direction)
    }

    pub fn explicit(spectrum: &Spectrum, zeta: SpectralVector) -> Result<Self> {
        zeta.check_paired(spectrum)?;
        Ok(NoiseSpec::Explicit { zeta })
    }

    /// Realizes the noise for one replicate. Gaussian noise depends on the
    /// replicate index; the deterministic kinds do not.
    pub fn realize(&self, spectrum: &Spectrum, replicate: u64) -> Result<SpectralVector> {
        match self {
            NoiseSpec::Gaussian { seed } => Ok(sample_zeta(spectrum, *seed, replicate)),
            NoiseSpec::PowerBounded { direction, .. } => {
                direction.check_paired(spectrum)?;
                Ok(direction.clone())
            }
            NoiseSpec::Explicit { zeta } => {
                zeta.check_paired(spectrum)?;
                Ok(zeta.clone())
            }
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    // The regime mu < 0 ("small noise") is not admissible here; reject
    // rather than extrapolate.
    if !(0.0..=0.5).contains(&mu) || !mu.is_finite() {
        return Err(Error::Domain {
            what: "mu",
            value: mu,
            constraint: "admissible power range is 0 <= mu <= 1/2",
        });
    }
    Ok(())
}

/// Admissible bounding function `alpha -> delta(alpha) > 0`: non-decreasing,
/// with `delta(alpha)/sqrt(alpha)` non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaBound {
    /// `delta(alpha) = delta * alpha^mu`, `0 <= mu <= 1/2`.
    PowerLaw { delta: f64, mu: f64 },
    /// `delta(alpha) = (1 + kappa) * delta / rho_N(alpha)`, the statistical
    /// weight induced by Gaussian noise.
    StatisticalWeight { delta: f64, kappa: f64 },
}

impl DeltaBound {
    pub fn power_law(delta: f64, mu: f64) -> Result<Self> {
        check_delta(delta)?;
        check_mu(mu)?;
        Ok(DeltaBound::PowerLaw { delta, mu })
    }

    pub fn statistical_weight(delta: f64, kappa: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Domain {
                what: "kappa",
                value: kappa,
                constraint: "must be finite and >= 0",
            });
        }
        Ok(DeltaBound::StatisticalWeight { delta, kappa })
    }

    /// Evaluates `delta(alpha)` from first principles.
    pub fn eval(&self, spectrum: &Spectrum, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain {
                what: "alpha",
                value: alpha,
                constraint: "must be finite and > 0",
            });
        }
        Ok(match *self {
            DeltaBound::PowerLaw { delta, mu } => delta * alpha.powf(mu),
            DeltaBound::StatisticalWeight { delta, kappa } => {
                (1.0 + kappa) * delta / spectrum.rho_n(alpha)?
            }
        })
    }

    /// Evaluates `delta(alpha_k)` against precomputed grid tables; the
    /// statistical weight reads the cached `1/rho_N` values.
    pub fn eval_at(&self, tables: &GridTables, k: usize) -> f64 {
        match *self {
            DeltaBound::PowerLaw { delta, mu } => delta * tables.alpha(k).powf(mu),
            DeltaBound::StatisticalWeight { delta, kappa } => {
                (1.0 + kappa) * delta * tables.inv_rho(k)
            }
        }
    }

    /// Checks the two monotonicity contracts on a descending alpha grid:
    /// `delta(alpha)` non-decreasing in alpha and `delta(alpha)/sqrt(alpha)`
    /// non-increasing in alpha.
    pub fn validate_on_grid(&self, spectrum: &Spectrum, alphas_descending: &[f64]) -> Result<()> {
        const SLACK: f64 = 1e-12;
        for w in alphas_descending.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            if !(lo < hi) {
                return Err(Error::Config(
                    "alpha grid must be strictly descending".into(),
                ));
            }
            let d_hi = self.eval(spectrum, hi)?;
            let d_lo = self.eval(spectrum, lo)?;
            if d_lo > d_hi * (1.0 + SLACK) {
                return Err(Error::Config(format!(
                    "delta(alpha) increases as alpha decreases: delta({lo}) = {d_lo} > delta({hi}) = {d_hi}"
                )));
            }
            if d_lo / lo.sqrt() < d_hi / hi.sqrt() * (1.0 - SLACK) {
                return Err(Error::Config(format!(
                    "delta(alpha)/sqrt(alpha) decreases as alpha decreases at alpha = {lo}"
                )));
            }
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain {
            what: "delta",
            value: delta,
            constraint: "must be finite and > 0",
        });
    }
    Ok(())
}

/// Outcome of a `Z_kappa` membership test.
#[derive(Debug, Clone, Copy)]
pub struct ZMembership {
    pub member: bool,
    /// `max over grid alpha >= alpha_hat of (||s_alpha^{1/2} zeta|| * rho_N(alpha) - (1 + kappa))`;
    /// non-positive exactly when the noise is admissible.
    pub worst_margin: f64,
}

/// Tests membership in the good-noise set: `||s_alpha^{1/2}(A) zeta|| <=
/// (1 + kappa)/rho_N(alpha)` for every grid alpha with `alpha >= alpha_hat`.
/// Comparisons are closed (<=).
pub fn in_z_kappa(
    tables: &GridTables,
    zeta: &SpectralVector,
    kappa: f64,
    alpha_hat: GridPoint,
) -> Result<ZMembership> {
    zeta.check_paired(tables.spectrum())?;
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Domain {
            what: "kappa",
            value: kappa,
            constraint: "must be finite and >= 0",
        });
    }
    if alpha_hat.index >= tables.len() {
        return Err(Error::Config(format!(
            "alpha_hat index {} outside grid of {} points",
            alpha_hat.index,
            tables.len()
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=alpha_hat.index {
        let alpha = tables.alpha(k);
        let norm_sq = compensated_sum(
            tables
                .spectrum()
                .eigenvalues()
                .iter()
                .zip(zeta.coefficients())
                .map(|(&t, &z)| alpha / (t + alpha) * z * z),
        );
        // norm * rho = sqrt(norm_sq / (alpha N(alpha))); the ratio form keeps
        // exact boundary cases exact.
        let margin = (norm_sq / (alpha * tables.n_eff(k))).sqrt() - (1.0 + kappa);
        worst = worst.max(margin);
    }
    Ok(ZMembership {
        member: worst <= 0.0,
        worst_margin: worst,
    })
}
