//! The five regularization filter families with their `g_alpha` / `r_alpha`
//! evaluations, numeric verification of the filter axioms, and empirical
//! qualification estimation.
//!
//! A filter family is given by `g_alpha`; the residual is
//! `r_alpha(t) = 1 - t g_alpha(t)`. All five families are monotone
//! (`r_alpha <= r_beta` for `alpha <= beta`) with `0 <= r <= 1`, and satisfy
//! `alpha |g_alpha(t)| <= gamma_star` with `gamma_star = 1` (Tikhonov, TSVD,
//! Landweber, Showalter) or `n` (n-times iterated Tikhonov).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the axiom sweeps; all filter formulas are
/// well-conditioned rational/exponential expressions on unit-scale
/// quantities.
pub const AXIOM_TOL: f64 = 1e-12;

/// Tagged choice of regularization filter family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheme {
    /// `r_alpha(t) = alpha / (t + alpha)`.
    Tikhonov,
    /// `r_alpha(t) = alpha^n / (t + alpha)^n`, `n >= 1`.
    IteratedTikhonov { n: u32 },
    /// Spectral cutoff: `r_alpha(t) = 0` for `t >= alpha`, else `1`.
    Tsvd,
    /// `r_alpha(t) = (1 - t)^m` with `m = floor(1/alpha)`; requires the
    /// paired spectrum to satisfy `t <= 1` and `alpha <= 1` so `m >= 1`.
    Landweber,
    /// Asymptotic (Showalter) regularization: `r_alpha(t) = exp(-t/alpha)`.
    Showalter,
}

// Derived deserialization of internally tagged enums tolerates unknown keys
// on unit variants; configs must fail closed, so the proxy rejects them.
impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Proxy {
            kind: String,
            #[serde(default)]
            n: Option<u32>,
        }
        let proxy = Proxy::deserialize(deserializer)?;
        let needs_no_n = |scheme: Scheme| {
            if proxy.n.is_some() {
                Err(serde::de::Error::custom(format!(
                    "scheme \"{}\" takes no field n",
                    proxy.kind
                )))
            } else {
                Ok(scheme)
            }
        };
        match proxy.kind.as_str() {
            "tikhonov" => needs_no_n(Scheme::Tikhonov),
            "iterated-tikhonov" => match proxy.n {
                Some(n) if n >= 1 => Ok(Scheme::IteratedTikhonov { n }),
                _ => Err(serde::de::Error::custom(
                    "iterated-tikhonov needs a field n >= 1",
                )),
            },
            "tsvd" => needs_no_n(Scheme::Tsvd),
            "landweber" => needs_no_n(Scheme::Landweber),
            "showalter" => needs_no_n(Scheme::Showalter),
            other => Err(serde::de::Error::custom(format!(
                "unknown scheme kind \"{other}\"; expected tikhonov | iterated-tikhonov | \
                 tsvd | landweber | showalter"
            ))),
        }
    }
}

impl Scheme {
    /// Analytic bound on `alpha |g_alpha(t)|`.
    pub fn gamma_star(self) -> f64 {
        match self {
            Scheme::IteratedTikhonov { n } => n as f64,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Tikhonov => "tikhonov",
            Scheme::IteratedTikhonov { .. } => "iterated-tikhonov",
            Scheme::Tsvd => "tsvd",
            Scheme::Landweber => "landweber",
            Scheme::Showalter => "showalter",
        }
    }

    fn check_args(self, alpha: f64, t: f64) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain {
                what: "alpha",
                value: alpha,
                constraint: "must be finite and > 0",
            });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain {
                what: "t",
                value: t,
                constraint: "must be finite and >= 0",
            });
        }
        match self {
            Scheme::IteratedTikhonov { n: 0 } => Err(Error::Domain {
                what: "iterated-tikhonov n",
                value: 0.0,
                constraint: "n >= 1",
            }),
            Scheme::Landweber if t > 1.0 => Err(Error::Domain {
                what: "t",
                value: t,
                constraint: "Landweber requires t <= 1 (normalize so ||A|| <= 1)",
            }),
            Scheme::Landweber if alpha > 1.0 => Err(Error::Domain {
                what: "alpha",
                value: alpha,
                constraint: "Landweber requires alpha <= 1 so m = floor(1/alpha) >= 1",
            }),
            _ => Ok(()),
        }
    }

    /// Residual function `r_alpha(t) in [0, 1]`.
    pub fn residual(self, alpha: f64, t: f64) -> Result<f64> {
        self.check_args(alpha, t)?;
        Ok(match self {
            Scheme::Tikhonov => alpha / (t + alpha),
            Scheme::IteratedTikhonov { n } => (alpha / (t + alpha)).powi(n as i32),
            Scheme::Tsvd => {
                if t >= alpha {
                    0.0
                } else {
                    1.0
                }
            }
            // (1 - t)^m computed as exp(m ln(1 - t)); m can reach 2^40 on
            // deep grids, far past what powi admits.
            Scheme::Landweber => {
                let m = (1.0 / alpha).floor();
                (m * (-t).ln_1p()).exp()
            }
            Scheme::Showalter => (-t / alpha).exp(),
        })
    }

    /// Filter function `g_alpha(t) = (1 - r_alpha(t)) / t`, with the analytic
    /// limit at `t = 0`. Each arm uses a cancellation-free form.
    pub fn filter(self, alpha: f64, t: f64) -> Result<f64> {
        self.check_args(alpha, t)?;
        Ok(match self {
            Scheme::Tikhonov => 1.0 / (t + alpha),
            // g = (1 + s + ... + s^(n-1)) / (t + alpha) with s = alpha/(t+alpha);
            // at t = 0 this is the limit n / alpha.
            Scheme::IteratedTikhonov { n } => {
                let s = alpha / (t + alpha);
                let mut acc = 1.0;
                let mut pow = 1.0;
                for _ in 1..n {
                    pow *= s;
                    acc += pow;
                }
                acc / (t + alpha)
            }
            Scheme::Tsvd => {
                if t >= alpha {
                    1.0 / t
                } else {
                    0.0
                }
            }
            Scheme::Landweber => {
                let m = (1.0 / alpha).floor();
                if t == 0.0 {
                    m
                } else {
                    -(m * (-t).ln_1p()).exp_m1() / t
                }
            }
            Scheme::Showalter => {
                if t == 0.0 {
                    1.0 / alpha
                } else {
                    -(-t / alpha).exp_m1() / t
                }
            }
        })
    }
}

/// Result of a numeric axiom sweep over a `(t, alpha)` grid.
///
/// `gamma1` and `gamma_star` are the observed suprema of `|r_alpha(t)|` and
/// `alpha g_alpha(t)`. The flags report, in order: the range axiom
/// `0 <= r <= 1` together with `0 <= t g <= 1`; monotonicity of `r` in
/// `alpha`; the filter bound `alpha g <= gamma_star(analytic)`; and the
/// residual-difference bound
/// `0 <= r_beta - r_alpha <= (1 + gamma_star) t/(alpha + t) r_beta` for
/// `alpha <= beta`.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub scheme: Scheme,
    pub gamma1: f64,
    pub gamma_star: f64,
    pub range_ok: bool,
    pub monotone_ok: bool,
    pub filter_bound_ok: bool,
    pub difference_bound_ok: bool,
    /// Largest positive excess over any checked inequality (0 if none).
    pub worst_violation: f64,
    /// `(t, alpha, beta)` attaining the worst violation; `beta = alpha` for
    /// single-parameter checks.
    pub witness: Option<(f64, f64, f64)>,
}

impl AxiomReport {
    /// A sweep passes when the worst violation is within [`AXIOM_TOL`].
    pub fn pass(&self) -> bool {
        self.worst_violation <= AXIOM_TOL
    }
}

fn check_grid(grid: &[f64], what: &'static str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{what} grid must be non-empty")));
    }
    for w in grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Config(format!(
                "{what} grid must be strictly ascending"
            )));
        }
    }
    if !(grid[0] > 0.0) {
        return Err(Error::Config(format!("{what} grid must be positive")));
    }
    Ok(())
}

/// Sweeps the filter axioms over `t_grid x alpha_grid` (both ascending).
/// Violations are reported, not raised.
pub fn verify_axioms(scheme: Scheme, t_grid: &[f64], alpha_grid: &[f64]) -> Result<AxiomReport> {
    verify_axioms_with(
        scheme,
        |alpha, t| scheme.residual(alpha, t),
        |alpha, t| scheme.filter(alpha, t),
        scheme.gamma_star(),
        t_grid,
        alpha_grid,
    )
}

/// Sweep core, generic in the residual/filter evaluators so tests can plant
/// corrupted filters.
fn verify_axioms_with(
    scheme: Scheme,
    residual: impl Fn(f64, f64) -> Result<f64>,
    filter: impl Fn(f64, f64) -> Result<f64>,
    gamma_star_analytic: f64,
    t_grid: &[f64],
    alpha_grid: &[f64],
) -> Result<AxiomReport> {
    check_grid(t_grid, "t")?;
    check_grid(alpha_grid, "alpha")?;

    let mut report = AxiomReport {
        scheme,
        gamma1: 0.0,
        gamma_star: 0.0,
        range_ok: true,
        monotone_ok: true,
        filter_bound_ok: true,
        difference_bound_ok: true,
        worst_violation: 0.0,
        witness: None,
    };
    let worst = |report: &mut AxiomReport, excess: f64, witness: (f64, f64, f64)| {
        if excess > report.worst_violation {
            report.worst_violation = excess;
            report.witness = Some(witness);
        }
    };

    let mut rs = vec![0.0; alpha_grid.len()];
    for &t in t_grid {
        for (i, &alpha) in alpha_grid.iter().enumerate() {
            let r = residual(alpha, t)?;
            let g = filter(alpha, t)?;
            rs[i] = r;
            report.gamma1 = report.gamma1.max(r.abs());
            report.gamma_star = report.gamma_star.max(alpha * g.abs());

            let range_excess = (-r).max(r - 1.0).max(-t * g).max(t * g - 1.0).max(0.0);
            if range_excess > AXIOM_TOL {
                report.range_ok = false;
            }
            worst(&mut report, range_excess, (t, alpha, alpha));

            let filter_excess = (alpha * g.abs() - gamma_star_analytic).max(0.0);
            if filter_excess > AXIOM_TOL {
                report.filter_bound_ok = false;
            }
            worst(&mut report, filter_excess, (t, alpha, alpha));
        }

        // Pairwise checks: alpha_grid is ascending, so i < j means
        // alpha_i <= alpha_j and monotonicity requires r_i <= r_j.
        for i in 0..alpha_grid.len() {
            for j in (i + 1)..alpha_grid.len() {
                let (alpha, beta) = (alpha_grid[i], alpha_grid[j]);
                let diff = rs[j] - rs[i];
                let mono_excess = (-diff).max(0.0);
                if mono_excess > AXIOM_TOL {
                    report.monotone_ok = false;
                }
                worst(&mut report, mono_excess, (t, alpha, beta));

                let bound = (1.0 + gamma_star_analytic) * t / (alpha + t) * rs[j];
                let diff_excess = (diff - bound).max(0.0);
                if diff_excess > AXIOM_TOL {
                    report.difference_bound_ok = false;
                }
                worst(&mut report, diff_excess, (t, alpha, beta));
            }
        }
    }
    Ok(report)
}

/// Empirical qualification constant: the supremum over the grid of
/// `r_alpha(t) t^nu / alpha^nu`. Finite-and-small means the scheme exploits
/// smoothness order `nu`; blow-up as `alpha` shrinks exposes saturation.
pub fn qualification_constant(
    scheme: Scheme,
    nu: f64,
    t_grid: &[f64],
    alpha_grid: &[f64],
) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::Domain {
            what: "nu",
            value: nu,
            constraint: "must be finite and > 0",
        });
    }
    check_grid(t_grid, "t")?;
    check_grid(alpha_grid, "alpha")?;
    let mut sup: f64 = 0.0;
    for &alpha in alpha_grid {
        let denom = alpha.powf(nu);
        for &t in t_grid {
            let r = scheme.residual(alpha, t)?;
            sup = sup.max(r * t.powf(nu) / denom);
        }
    }
    Ok(sup)
}
