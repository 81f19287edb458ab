//! Self-similarity admission gate on `x_dag - x0`.
//!
//! The oracle guarantees hold only for solutions whose lower spectral tail is
//! dominated by the filtered middle spectrum. Two testable forms are
//! provided: the general filter form
//!
//! `||E_alpha v||^2 <= c1^2 * sum over t_j >= c2 alpha of r_alpha(t_j)^2 v_j^2`
//!
//! for all probes `alpha <= t0`, and the projector form
//!
//! `||E_{c2 alpha} v|| <= theta ||E_alpha v||`.
//!
//! Boundary conventions are fixed once: the lower integral includes
//! `t_j <= alpha`, the tail sum includes `t_j >= c2 alpha` (both closed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, geometric_grid};
use crate::schemes::Scheme;
use crate::spectrum::{SpectralVector, Spectrum};

/// Constants of the self-similarity condition plus the probe set on which it
/// is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnConfig {
    /// Filter-form constant, `> 1`.
    pub c1: f64,
    /// Tail fraction, in `(0, 1)`.
    pub c2: f64,
    /// Upper end of the probed range, in `(0, t_1)`.
    pub t0: f64,
    /// Projector-form contraction factor, in `(0, 1)`.
    pub theta: f64,
    /// Probe values, all in `(0, t0]`.
    pub alpha_probe: Vec<f64>,
}

impl KnConfig {
    pub fn new(c1: f64, c2: f64, t0: f64, theta: f64, alpha_probe: Vec<f64>) -> Result<Self> {
        if !(c1 > 1.0) || !c1.is_finite() {
            return Err(Error::Domain {
                what: "c1",
                value: c1,
                constraint: "must be finite and > 1",
            });
        }
        if !(c2 > 0.0 && c2 < 1.0) {
            return Err(Error::Domain {
                what: "c2",
                value: c2,
                constraint: "must satisfy 0 < c2 < 1",
            });
        }
        if !(t0 > 0.0) || !t0.is_finite() {
            return Err(Error::Domain {
                what: "t0",
                value: t0,
                constraint: "must be finite and > 0",
            });
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain {
                what: "theta",
                value: theta,
                constraint: "must satisfy 0 < theta < 1",
            });
        }
        if alpha_probe.is_empty() {
            return Err(Error::Config("probe list must be non-empty".into()));
        }
        for &a in &alpha_probe {
            if !(a > 0.0) || a > t0 * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "probe alpha = {a} outside the admissible range (0, t0 = {t0}]"
                )));
            }
        }
        Ok(Self {
            c1,
            c2,
            t0,
            theta,
            alpha_probe,
        })
    }

    /// Builds the config with the default probe set for `spectrum`.
    pub fn with_default_probes(
        c1: f64,
        c2: f64,
        t0: f64,
        theta: f64,
        spectrum: &Spectrum,
    ) -> Result<Self> {
        let probes = default_probes(spectrum, t0)?;
        Self::new(c1, c2, t0, theta, probes)
    }
}

/// Default probe set: 20 geometric points in `[t_J, t0]`, plus points just
/// below and just above each eigenvalue in range (offset factor 1 +- 1e-9),
/// clamped to `(0, t0]`. Both sides of the inequality are piecewise constant
/// in alpha between adjacent eigenvalues, so these probes see every jump.
pub fn default_probes(spectrum: &Spectrum, t0: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && t0 < spectrum.largest()) {
        return Err(Error::Domain {
            what: "t0",
            value: t0,
            constraint: "must satisfy 0 < t0 < t_1",
        });
    }
    let t_j = spectrum.smallest();
    let lo = if t_j < t0 { t_j } else { t0 * 1e-2 };
    let mut probes = geometric_grid(lo, t0, 20);
    for &t in spectrum.eigenvalues() {
        for factor in [1.0 - 1e-9, 1.0 + 1e-9] {
            let p = t * factor;
            if p > 0.0 && p <= t0 {
                probes.push(p);
            }
        }
    }
    probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    probes.dedup();
    Ok(probes)
}

/// Verdict of a self-similarity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnOutcome {
    Pass,
    Fail,
    /// Every probe was degenerate (projector form only): nothing was tested.
    Inconclusive,
}

/// Per-probe evaluation of the checked inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnRow {
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Report of a self-similarity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnReport {
    pub outcome: KnOutcome,
    /// Max over probes of lhs/rhs. Pass requires `<= 1` for the filter form
    /// (with `c1^2` folded into the rhs) and `<= theta` for the projector
    /// form.
    pub worst_ratio: f64,
    /// Probe attaining the worst ratio when the check fails.
    pub witness_alpha: Option<f64>,
    /// Degenerate probes skipped (projector form).
    pub skipped_probes: usize,
    pub rows: Vec<KnRow>,
}

impl KnReport {
    pub fn pass(&self) -> bool {
        self.outcome == KnOutcome::Pass
    }
}

/// Filter-form check:
/// lhs = `sum over t_j <= alpha of v_j^2`,
/// rhs = `c1^2 * sum over t_j >= c2 alpha of r_alpha(t_j)^2 v_j^2`.
/// Passes when lhs <= rhs at every probe.
pub fn check_kn(
    spectrum: &Spectrum,
    v: &SpectralVector,
    scheme: Scheme,
    cfg: &KnConfig,
) -> Result<KnReport> {
    v.check_paired(spectrum)?;
    check_t0(spectrum, cfg)?;
    let mut rows = Vec::with_capacity(cfg.alpha_probe.len());
    let mut worst = 0.0f64;
    let mut witness = None;
    for &alpha in &cfg.alpha_probe {
        let lhs = compensated_sum(
            spectrum
                .eigenvalues()
                .iter()
                .zip(v.coefficients())
                .filter(|(&t, _)| t <= alpha)
                .map(|(_, &c)| c * c),
        );
        let cut = cfg.c2 * alpha;
        let mut tail_terms = Vec::new();
        for (&t, &c) in spectrum.eigenvalues().iter().zip(v.coefficients()) {
            if t >= cut {
                let r = scheme.residual(alpha, t)?;
                tail_terms.push(r * r * c * c);
            }
        }
        let rhs = cfg.c1 * cfg.c1 * compensated_sum(tail_terms);
        let ratio = ratio_of(lhs, rhs);
        if ratio > worst {
            worst = ratio;
            witness = Some(alpha);
        }
        rows.push(KnRow {
            alpha,
            lhs,
            rhs,
            ratio,
        });
    }
    let outcome = if worst <= 1.0 {
        KnOutcome::Pass
    } else {
        KnOutcome::Fail
    };
    Ok(KnReport {
        outcome,
        worst_ratio: worst,
        witness_alpha: if outcome == KnOutcome::Fail {
            witness
        } else {
            None
        },
        skipped_probes: 0,
        rows,
    })
}

/// Projector-form check: `||E_{c2 alpha} v|| <= theta ||E_alpha v||` at every
/// probe where `||E_alpha v|| > 0`; degenerate probes are skipped and
/// reported, and an all-degenerate run is inconclusive rather than a pass.
pub fn check_projector_form(
    spectrum: &Spectrum,
    v: &SpectralVector,
    cfg: &KnConfig,
) -> Result<KnReport> {
    v.check_paired(spectrum)?;
    check_t0(spectrum, cfg)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut skipped = 0usize;
    for &alpha in &cfg.alpha_probe {
        let rhs_sq = partial_norm_sq(spectrum, v, alpha);
        if rhs_sq == 0.0 {
            skipped += 1;
            continue;
        }
        let lhs = partial_norm_sq(spectrum, v, cfg.c2 * alpha).sqrt();
        let rhs = rhs_sq.sqrt();
        let ratio = lhs / rhs;
        if ratio > worst {
            worst = ratio;
            witness = Some(alpha);
        }
        rows.push(KnRow {
            alpha,
            lhs,
            rhs,
            ratio,
        });
    }
    let outcome = if rows.is_empty() {
        KnOutcome::Inconclusive
    } else if worst <= cfg.theta {
        KnOutcome::Pass
    } else {
        KnOutcome::Fail
    };
    Ok(KnReport {
        outcome,
        worst_ratio: worst,
        witness_alpha: if outcome == KnOutcome::Fail {
            witness
        } else {
            None
        },
        skipped_probes: skipped,
        rows,
    })
}

fn check_t0(spectrum: &Spectrum, cfg: &KnConfig) -> Result<()> {
    if !(cfg.t0 < spectrum.largest()) {
        return Err(Error::Domain {
            what: "t0",
            value: cfg.t0,
            constraint: "must be < t_1 for the paired spectrum",
        });
    }
    Ok(())
}

fn partial_norm_sq(spectrum: &Spectrum, v: &SpectralVector, alpha: f64) -> f64 {
    compensated_sum(
        spectrum
            .eigenvalues()
            .iter()
            .zip(v.coefficients())
            .filter(|(&t, _)| t <= alpha)
            .map(|(_, &c)| c * c),
    )
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
