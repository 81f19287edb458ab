//! Sequence-space representation of the symmetrized problem
//! `z = A x + delta * zeta`, spectral calculus, effective-dimension
//! functions, and the regularized estimator.
//!
//! The operator `A = T*T` is represented by its `J` largest eigenvalues
//! `t_1 >= t_2 >= ... >= t_J > 0`; every quantity (trace, effective
//! dimension, norms) is the corresponding truncated sum. All types are
//! immutable values after construction and every operation is a pure
//! function, so evaluation from many threads is safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::compensated_sum;
use crate::schemes::Scheme;

/// Relative tolerance of the monotone bisection in [`Spectrum::invert_theta`].
pub const THETA_INVERT_RTOL: f64 = 1e-10;

/// Finite decreasing list of positive eigenvalues of `A = T*T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    trace: f64,
}

impl Spectrum {
    /// Builds a spectrum from an explicit eigenvalue list.
    ///
    /// Requires at least one eigenvalue, all strictly positive and finite,
    /// in non-increasing order. Repeated eigenvalues are allowed and treated
    /// as distinct indices.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Config(
                "spectrum must contain at least one eigenvalue".into(),
            ));
        }
        for (j, &t) in eigenvalues.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Domain {
                    what: "eigenvalue",
                    value: t,
                    constraint: "all eigenvalues must be finite and > 0",
                });
            }
            if j > 0 && t > eigenvalues[j - 1] {
                return Err(Error::Config(format!(
                    "eigenvalues must be non-increasing; t[{}] = {} > t[{}] = {}",
                    j + 1,
                    t,
                    j,
                    eigenvalues[j - 1]
                )));
            }
        }
        let trace = compensated_sum(eigenvalues.iter().copied());
        Ok(Self { eigenvalues, trace })
    }

    /// Power-law spectrum `t_j = j^(-2a)`, `j = 1..=j_max`. The exponent must
    /// satisfy `a > 1/2` so the full-operator trace is finite.
    pub fn power_law(a: f64, j_max: usize) -> Result<Self> {
        if !(a > 0.5) {
            return Err(Error::Domain {
                what: "power-law exponent a",
                value: a,
                constraint: "a > 1/2 (finite trace)",
            });
        }
        if j_max == 0 {
            return Err(Error::Config("power-law spectrum needs J >= 1".into()));
        }
        let eigenvalues = (1..=j_max).map(|j| (j as f64).powf(-2.0 * a)).collect();
        Self::new(eigenvalues)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of retained eigenvalues `J`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees J >= 1
    }

    /// Truncated trace `sum_j t_j`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Largest eigenvalue `t_1 = ||A||`.
    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Smallest retained eigenvalue `t_J`.
    pub fn smallest(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    fn check_positive(value: f64, what: &'static str) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Domain {
                what,
                value,
                constraint: "must be finite and > 0",
            });
        }
        Ok(())
    }

    /// Effective dimension `N(lambda) = sum_j t_j / (t_j + lambda)`.
    ///
    /// Strictly decreasing in `lambda`, with `0 < N(lambda) < J`.
    pub fn effective_dimension(&self, lambda: f64) -> Result<f64> {
        Self::check_positive(lambda, "lambda")?;
        Ok(self.n_unchecked(lambda))
    }

    pub(crate) fn n_unchecked(&self, lambda: f64) -> f64 {
        compensated_sum(self.eigenvalues.iter().map(|&t| t / (t + lambda)))
    }

    /// Noise-calibration function `rho_N(t) = 1 / sqrt(t N(t))`, non-increasing.
    pub fn rho_n(&self, t: f64) -> Result<f64> {
        Self::check_positive(t, "t")?;
        Ok(1.0 / (t * self.n_unchecked(t)).sqrt())
    }

    /// Companion function `Theta_{rho_N}(t) = t rho_N(t) = sqrt(t / N(t))`,
    /// continuous and strictly increasing.
    pub fn theta_rho_n(&self, t: f64) -> Result<f64> {
        Self::check_positive(t, "t")?;
        Ok((t / self.n_unchecked(t)).sqrt())
    }

    /// Inverts `Theta_{rho_N}` on the bracket `[lo, hi]` by monotone
    /// bisection, to relative tolerance [`THETA_INVERT_RTOL`] on the value.
    ///
    /// Errors if the target lies outside `[Theta(lo), Theta(hi)]`.
    pub fn invert_theta(&self, target: f64, lo: f64, hi: f64) -> Result<f64> {
        Self::check_positive(target, "target")?;
        Self::check_positive(lo, "bracket lower end")?;
        if !(hi > lo) || !hi.is_finite() {
            return Err(Error::Domain {
                what: "bracket upper end",
                value: hi,
                constraint: "must be finite and > lower end",
            });
        }
        let th_lo = self.theta_rho_n(lo)?;
        let th_hi = self.theta_rho_n(hi)?;
        if target < th_lo || target > th_hi {
            return Err(Error::OutOfBracket {
                target,
                lo_image: th_lo,
                hi_image: th_hi,
            });
        }
        let (mut lo, mut hi) = (lo, hi);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let th = self.theta_rho_n(mid)?;
            if (th - target).abs() <= THETA_INVERT_RTOL * target {
                return Ok(mid);
            }
            if th < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

/// Coefficient sequence of an element of `X` in the eigenbasis of `A`,
/// indexed against a [`Spectrum`] of the same length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralVector {
    coefficients: Vec<f64>,
}

impl SpectralVector {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            coefficients: vec![0.0; len],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        compensated_sum(self.coefficients.iter().map(|&v| v * v))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Coefficientwise difference `self - other`; lengths must agree.
    pub fn sub(&self, other: &SpectralVector) -> Result<SpectralVector> {
        if self.len() != other.len() {
            return Err(Error::Pairing {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(SpectralVector::new(
            self.coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub(crate) fn check_paired(&self, spectrum: &Spectrum) -> Result<()> {
        if self.len() != spectrum.len() {
            return Err(Error::Pairing {
                expected: spectrum.len(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// One simulated problem: spectrum, exact solution `x_dag`, initial guess
/// `x0`, and noise level `delta`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    spectrum: Spectrum,
    x_dag: SpectralVector,
    x0: SpectralVector,
    delta: f64,
}

impl ProblemInstance {
    pub fn new(
        spectrum: Spectrum,
        x_dag: SpectralVector,
        x0: SpectralVector,
        delta: f64,
    ) -> Result<Self> {
        x_dag.check_paired(&spectrum)?;
        x0.check_paired(&spectrum)?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain {
                what: "delta",
                value: delta,
                constraint: "noise level must be finite and > 0",
            });
        }
        Ok(Self {
            spectrum,
            x_dag,
            x0,
            delta,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn x_dag(&self) -> &SpectralVector {
        &self.x_dag
    }

    pub fn x0(&self) -> &SpectralVector {
        &self.x0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Noise-free data `z = A x_dag`.
    pub fn noise_free_data(&self) -> SpectralVector {
        SpectralVector::new(
            self.spectrum
                .eigenvalues()
                .iter()
                .zip(self.x_dag.coefficients())
                .map(|(&t, &x)| t * x)
                .collect(),
        )
    }

    /// Observed data `z_delta = A x_dag + delta * zeta`.
    pub fn observed(&self, zeta: &SpectralVector) -> Result<SpectralVector> {
        zeta.check_paired(&self.spectrum)?;
        Ok(SpectralVector::new(
            self.spectrum
                .eigenvalues()
                .iter()
                .zip(self.x_dag.coefficients())
                .zip(zeta.coefficients())
                .map(|((&t, &x), &z)| t * x + self.delta * z)
                .collect(),
        ))
    }

    /// Difference `x_dag - x0`, the element the self-similarity gate inspects.
    pub fn difference(&self) -> SpectralVector {
        self.x_dag.sub(&self.x0).expect("paired by construction")
    }
}

/// Applies a scalar function of the eigenvalue to a paired vector:
/// `(f(t_j) v_j)_j`. Carrier for `g_alpha(A)`, `r_alpha(A)`, `s_alpha(A)`.
pub fn spectral_apply<F: Fn(f64) -> f64>(
    f: F,
    spectrum: &Spectrum,
    v: &SpectralVector,
) -> Result<SpectralVector> {
    v.check_paired(spectrum)?;
    Ok(SpectralVector::new(
        spectrum
            .eigenvalues()
            .iter()
            .zip(v.coefficients())
            .map(|(&t, &c)| f(t) * c)
            .collect(),
    ))
}

/// Squared norm of the spectral projector applied to `v`:
/// `||E_alpha v||^2 = sum over t_j <= alpha of v_j^2`.
///
/// The projector is closed at the right endpoint: an eigenvalue equal to
/// `alpha` is counted inside.
pub fn projector_norm_sq(spectrum: &Spectrum, v: &SpectralVector, alpha: f64) -> Result<f64> {
    v.check_paired(spectrum)?;
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
            .zip(v.coefficients())
            .filter(|(&t, _)| t <= alpha)
            .map(|(_, &c)| c * c),
    ))
}

/// Regularized estimator `x_alpha = x0 - g_alpha(A)(A x0 - z_delta)`,
/// coefficientwise `x_j = x0_j - g_alpha(t_j) (t_j x0_j - z_j)`.
pub fn reconstruct(
    instance: &ProblemInstance,
    scheme: Scheme,
    alpha: f64,
    z_delta: &SpectralVector,
) -> Result<SpectralVector> {
    z_delta.check_paired(instance.spectrum())?;
    let ts = instance.spectrum().eigenvalues();
    let mut out = Vec::with_capacity(ts.len());
    for ((&t, &x0), &z) in ts
        .iter()
        .zip(instance.x0().coefficients())
        .zip(z_delta.coefficients())
    {
        let g = scheme.filter(alpha, t)?;
        out.push(x0 - g * (t * x0 - z));
    }
    Ok(SpectralVector::new(out))
}

/// Bias norm `||r_alpha(A)(x_dag - x0)||`, non-decreasing in `alpha` for the
/// monotone schemes.
pub fn bias_norm(instance: &ProblemInstance, scheme: Scheme, alpha: f64) -> Result<f64> {
    let ts = instance.spectrum().eigenvalues();
    let mut terms = Vec::with_capacity(ts.len());
    for ((&t, &xd), &x0) in ts
        .iter()
        .zip(instance.x_dag().coefficients())
        .zip(instance.x0().coefficients())
    {
        let r = scheme.residual(alpha, t)?;
        let d = r * (xd - x0);
        terms.push(d * d);
    }
    Ok(compensated_sum(terms).sqrt())
}
