//! Parameter-choice rules on the geometric grid: the statistical RG rule,
//! its deterministic general-noise counterpart, emergency thresholds, the
//! automatic kappa formula, and oracle baselines.
//!
//! "Largest parameter" is realized by scanning `k = 0, 1, 2, ...` upward
//! (alpha descending) and returning the first grid point where a stopping
//! condition holds. All threshold comparisons are closed (`<=`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::DeltaBound;
use crate::numerics::compensated_sum;
use crate::schemes::Scheme;
use crate::spectrum::{bias_norm, reconstruct, ProblemInstance, SpectralVector, Spectrum};

/// Geometric parameter grid `alpha_k = q^k * alpha0`, `k = 0..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    alpha0: f64,
    q: f64,
    k_max: usize,
}

impl Grid {
    pub fn new(alpha0: f64, q: f64, k_max: usize) -> Result<Self> {
        if !(alpha0 > 0.0) || !alpha0.is_finite() {
            return Err(Error::Domain {
                what: "alpha0",
                value: alpha0,
                constraint: "must be finite and > 0",
            });
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain {
                what: "q",
                value: q,
                constraint: "must satisfy 0 < q < 1",
            });
        }
        if k_max == 0 {
            return Err(Error::Config("grid needs k_max >= 1".into()));
        }
        Ok(Self { alpha0, q, k_max })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of grid points, `k_max + 1`.
    pub fn len(&self) -> usize {
        self.k_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.q.powi(k as i32) * self.alpha0
    }

    /// Descending grid values `alpha_0, alpha_1, ...`.
    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.k_max).map(move |k| self.alpha(k))
    }
}

/// A grid point identified by index and value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub alpha: f64,
}

/// Per-grid spectral tables: `N(alpha_k)`, `1/rho_N(alpha_k)` and
/// `Theta_{rho_N}(alpha_k)` are `O(J)` sums evaluated many times during
/// selection, so they are computed once per (spectrum, grid).
#[derive(Debug, Clone)]
pub struct GridTables {
    spectrum: Spectrum,
    grid: Grid,
    alphas: Vec<f64>,
    n_eff: Vec<f64>,
    inv_rho: Vec<f64>,
    theta: Vec<f64>,
}

impl GridTables {
    pub fn new(spectrum: &Spectrum, grid: Grid) -> Self {
        let alphas: Vec<f64> = grid.alphas().collect();
        let n_eff: Vec<f64> = alphas.iter().map(|&a| spectrum.n_unchecked(a)).collect();
        let inv_rho: Vec<f64> = alphas
            .iter()
            .zip(&n_eff)
            .map(|(&a, &n)| (a * n).sqrt())
            .collect();
        let theta: Vec<f64> = alphas
            .iter()
            .zip(&n_eff)
            .map(|(&a, &n)| (a / n).sqrt())
            .collect();
        Self {
            spectrum: spectrum.clone(),
            grid,
            alphas,
            n_eff,
            inv_rho,
            theta,
        }
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k]
    }

    pub fn n_eff(&self, k: usize) -> f64 {
        self.n_eff[k]
    }

    /// `1/rho_N(alpha_k) = sqrt(alpha_k N(alpha_k))`.
    pub fn inv_rho(&self, k: usize) -> f64 {
        self.inv_rho[k]
    }

    pub fn rho(&self, k: usize) -> f64 {
        1.0 / self.inv_rho[k]
    }

    /// `Theta_{rho_N}(alpha_k) = sqrt(alpha_k / N(alpha_k))`.
    pub fn theta(&self, k: usize) -> f64 {
        self.theta[k]
    }

    pub fn point(&self, k: usize) -> GridPoint {
        GridPoint {
            index: k,
            alpha: self.alphas[k],
        }
    }
}

/// Choice of the tuning constant kappa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KappaChoice {
    /// `kappa = sqrt(8 |log(1/delta)| / N(alpha0))`, the concentration-tuned
    /// value.
    Auto,
    Fixed(f64),
}

/// Constants of the RG rule: `tau > 1`, `eta > 0`, `kappa >= 0` or auto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub tau: f64,
    pub eta: f64,
    pub kappa: KappaChoice,
}

impl RuleConfig {
    pub fn new(tau: f64, eta: f64, kappa: KappaChoice) -> Result<Self> {
        if !(tau > 1.0) || !tau.is_finite() {
            return Err(Error::Domain {
                what: "tau",
                value: tau,
                constraint: "must be finite and > 1",
            });
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Domain {
                what: "eta",
                value: eta,
                constraint: "must be finite and > 0",
            });
        }
        if let KappaChoice::Fixed(k) = kappa {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::Domain {
                    what: "kappa",
                    value: k,
                    constraint: "must be finite and >= 0",
                });
            }
        }
        Ok(Self { tau, eta, kappa })
    }

    /// Resolves kappa, evaluating the automatic formula when requested.
    pub fn resolve_kappa(&self, delta: f64, n_alpha0: f64) -> Result<f64> {
        match self.kappa {
            KappaChoice::Fixed(k) => Ok(k),
            KappaChoice::Auto => kappa_auto(delta, n_alpha0),
        }
    }
}

/// `kappa = sqrt(8 |log(1/delta)| / N(alpha0))`. At `delta = 1` the log
/// term vanishes and the result is 0.
pub fn kappa_auto(delta: f64, n_alpha0: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain {
            what: "delta",
            value: delta,
            constraint: "must be finite and > 0",
        });
    }
    if !(n_alpha0 > 0.0) || !n_alpha0.is_finite() {
        return Err(Error::Domain {
            what: "N(alpha0)",
            value: n_alpha0,
            constraint: "must be finite and > 0",
        });
    }
    Ok((8.0 * (1.0 / delta).ln().abs() / n_alpha0).sqrt())
}

/// Which stopping clause ended a selection scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    /// The weighted-misfit threshold fired.
    Regular,
    /// The noise-floor clause fired (statistical rule) or the scan fell back
    /// to alpha_hat (deterministic rule).
    Emergency,
    /// No clause fired within `k_max` grid points; diagnostic, not silent.
    Exhausted,
}

/// One scanned grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub alpha: f64,
    pub misfit: f64,
    pub regular_threshold: f64,
    pub emergency_lhs: f64,
    pub emergency_rhs: f64,
}

/// Output of a parameter-choice run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub alpha_selected: f64,
    pub stop_kind: StopKind,
    pub steps: usize,
    pub trace: Vec<TraceRow>,
}

/// Doubly weighted misfit `||s_alpha(A)(A x_alpha - z_delta)|| =
/// ||s_alpha(A) r_alpha(A)(A x0 - z_delta)||`, evaluated in the reduced
/// (right-hand) form, which is algebraically identical and needs no
/// intermediate estimator.
pub fn weighted_misfit(
    instance: &ProblemInstance,
    scheme: Scheme,
    alpha: f64,
    z_delta: &SpectralVector,
) -> Result<f64> {
    z_delta.check_paired(instance.spectrum())?;
    let ts = instance.spectrum().eigenvalues();
    let mut terms = Vec::with_capacity(ts.len());
    for ((&t, &x0), &z) in ts
        .iter()
        .zip(instance.x0().coefficients())
        .zip(z_delta.coefficients())
    {
        let r = scheme.residual(alpha, t)?;
        let s = alpha / (t + alpha);
        let w = s * r * (t * x0 - z);
        terms.push(w * w);
    }
    Ok(compensated_sum(terms).sqrt())
}

/// Same quantity evaluated through the estimator itself
/// (`A x_alpha - z_delta`); agrees with [`weighted_misfit`] to within 1e-10
/// relative and exists so tests can cross-check the two routes.
pub fn weighted_misfit_via_estimator(
    instance: &ProblemInstance,
    scheme: Scheme,
    alpha: f64,
    z_delta: &SpectralVector,
) -> Result<f64> {
    let x = reconstruct(instance, scheme, alpha, z_delta)?;
    let ts = instance.spectrum().eigenvalues();
    let mut terms = Vec::with_capacity(ts.len());
    for ((&t, &xj), &z) in ts.iter().zip(x.coefficients()).zip(z_delta.coefficients()) {
        let s = alpha / (t + alpha);
        let w = s * (t * xj - z);
        terms.push(w * w);
    }
    Ok(compensated_sum(terms).sqrt())
}

/// Largest grid alpha with `Theta_{rho_N}(alpha) <= eta (1 + kappa) delta`,
/// the floor below which the statistical rule always stops.
pub fn alpha_hat_statistical(
    tables: &GridTables,
    eta: f64,
    kappa: f64,
    delta: f64,
) -> Result<GridPoint> {
    let target = eta * (1.0 + kappa) * delta;
    for k in 0..tables.len() {
        if tables.theta(k) <= target {
            return Ok(tables.point(k));
        }
    }
    Err(Error::GridExhausted {
        points: tables.len(),
        context: "searching for the statistical noise floor alpha_hat",
    })
}

/// Largest grid alpha with `alpha <= eta * delta(alpha)`; well-defined since
/// `delta(alpha)/sqrt(alpha)` is non-increasing.
pub fn alpha_hat_deterministic(
    tables: &GridTables,
    bound: &DeltaBound,
    eta: f64,
) -> Result<GridPoint> {
    for k in 0..tables.len() {
        if tables.alpha(k) <= eta * bound.eval_at(tables, k) {
            return Ok(tables.point(k));
        }
    }
    Err(Error::GridExhausted {
        points: tables.len(),
        context: "searching for the deterministic floor alpha_hat",
    })
}

/// Statistical RG rule: the largest grid alpha at which either the regular
/// stop `misfit <= tau (1 + kappa) delta / rho_N(alpha)` or the emergency
/// stop `Theta_{rho_N}(alpha) <= eta (1 + kappa) delta` holds. When both hold
/// at the same point, the stop is reported as Regular; the selected alpha is
/// identical either way.
pub fn select_statistical_rg(
    instance: &ProblemInstance,
    scheme: Scheme,
    tables: &GridTables,
    rule: &RuleConfig,
    z_delta: &SpectralVector,
) -> Result<SelectionResult> {
    let delta = instance.delta();
    let kappa = rule.resolve_kappa(delta, tables.n_eff(0))?;
    let emergency_rhs = rule.eta * (1.0 + kappa) * delta;
    let mut trace = Vec::new();
    for k in 0..tables.len() {
        let alpha = tables.alpha(k);
        let misfit = weighted_misfit(instance, scheme, alpha, z_delta)?;
        let regular_threshold = rule.tau * (1.0 + kappa) * delta * tables.inv_rho(k);
        let emergency_lhs = tables.theta(k);
        trace.push(TraceRow {
            alpha,
            misfit,
            regular_threshold,
            emergency_lhs,
            emergency_rhs,
        });
        let stop_kind = if misfit <= regular_threshold {
            Some(StopKind::Regular)
        } else if emergency_lhs <= emergency_rhs {
            Some(StopKind::Emergency)
        } else {
            None
        };
        if let Some(stop_kind) = stop_kind {
            return Ok(SelectionResult {
                alpha_selected: alpha,
                stop_kind,
                steps: trace.len(),
                trace,
            });
        }
    }
    Ok(SelectionResult {
        alpha_selected: tables.alpha(tables.len() - 1),
        stop_kind: StopKind::Exhausted,
        steps: trace.len(),
        trace,
    })
}

/// Deterministic RG rule under a general noise bound: the largest grid alpha
/// with `alpha >= alpha_hat` passing `misfit <= tau delta(alpha)`; if none
/// passes, falls back to `alpha_hat` with an Emergency stop. Total: never
/// exhausts.
pub fn select_deterministic_rg(
    instance: &ProblemInstance,
    scheme: Scheme,
    tables: &GridTables,
    tau: f64,
    bound: &DeltaBound,
    alpha_hat: GridPoint,
    z_delta: &SpectralVector,
) -> Result<SelectionResult> {
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
            constraint: "must be finite and > 1",
        });
    }
    if alpha_hat.index >= tables.len() {
        return Err(Error::Config(format!(
            "alpha_hat index {} outside grid of {} points",
            alpha_hat.index,
            tables.len()
        )));
    }
    let mut trace = Vec::new();
    for k in 0..=alpha_hat.index {
        let alpha = tables.alpha(k);
        let misfit = weighted_misfit(instance, scheme, alpha, z_delta)?;
        let regular_threshold = tau * bound.eval_at(tables, k);
        trace.push(TraceRow {
            alpha,
            misfit,
            regular_threshold,
            emergency_lhs: alpha,
            emergency_rhs: alpha_hat.alpha,
        });
        if misfit <= regular_threshold {
            return Ok(SelectionResult {
                alpha_selected: alpha,
                stop_kind: StopKind::Regular,
                steps: trace.len(),
                trace,
            });
        }
    }
    Ok(SelectionResult {
        alpha_selected: alpha_hat.alpha,
        stop_kind: StopKind::Emergency,
        steps: trace.len(),
        trace,
    })
}

/// Refined oracle grid: geometric with ratio `q^(1/4)` descending from
/// `alpha0` down to `alpha_min` (both included).
pub fn refined_grid(alpha0: f64, alpha_min: f64, q: f64) -> Vec<f64> {
    assert!(alpha0 > 0.0 && alpha_min > 0.0 && alpha_min < alpha0 && q > 0.0 && q < 1.0);
    let ratio = q.powf(0.25);
    let mut out = Vec::new();
    let mut alpha = alpha0;
    while alpha > alpha_min * (1.0 + 1e-12) {
        out.push(alpha);
        alpha *= ratio;
    }
    out.push(alpha_min);
    out
}

/// Baseline: minimizer of the true reconstruction error over a refined grid.
/// With observed data the objective is `||x_dag - x_alpha(z_delta)||`; with
/// `None` it is the noise-free bias. Ties break toward the largest alpha, so
/// the grid must be passed in descending order.
pub fn oracle_alpha(
    instance: &ProblemInstance,
    scheme: Scheme,
    refined_descending: &[f64],
    z_delta: Option<&SpectralVector>,
) -> Result<(f64, f64)> {
    if refined_descending.is_empty() {
        return Err(Error::Config("oracle grid must be non-empty".into()));
    }
    let mut best = (f64::NAN, f64::INFINITY);
    for &alpha in refined_descending {
        let value = match z_delta {
            Some(z) => {
                let x = reconstruct(instance, scheme, alpha, z)?;
                instance.x_dag().sub(&x)?.norm()
            }
            None => bias_norm(instance, scheme, alpha)?,
        };
        if value < best.1 {
            best = (alpha, value);
        }
    }
    Ok(best)
}

/// Statistical oracle objective at one alpha:
/// `||x_alpha - x_dag|| + delta (1 + sqrt(|log(1/delta)|)) / Theta_{rho_N}(alpha)`.
/// Its infimum over a refined grid is the denominator of the oracle ratio.
pub fn oracle_rhs_statistical(
    instance: &ProblemInstance,
    scheme: Scheme,
    alpha: f64,
) -> Result<f64> {
    let delta = instance.delta();
    let bias = bias_norm(instance, scheme, alpha)?;
    let theta = instance.spectrum().theta_rho_n(alpha)?;
    let log_term = 1.0 + (1.0 / delta).ln().abs().sqrt();
    Ok(bias + delta * log_term / theta)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle constants keep all digits
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;

    fn three_eig_instance(delta: f64) -> (ProblemInstance, SpectralVector) {
        let spectrum = Spectrum::new(vec![1.0, 0.25, 0.0625]).unwrap();
        let x_dag = SpectralVector::new(vec![1.0, 1.0, 1.0]);
        let x0 = SpectralVector::zeros(3);
        let zeta = SpectralVector::new(vec![0.3, -0.2, 0.1]);
        let instance = ProblemInstance::new(spectrum, x_dag, x0, delta).unwrap();
        let z_delta = instance.observed(&zeta).unwrap();
        (instance, z_delta)
    }

    #[test]
    fn grid_values_are_geometric() {
        let g = Grid::new(1.0, 0.5, 4).unwrap();
        let alphas: Vec<f64> = g.alphas().collect();
        assert_eq!(alphas, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert!(Grid::new(0.0, 0.5, 4).is_err());
        assert!(Grid::new(1.0, 1.0, 4).is_err());
        assert!(Grid::new(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn kappa_auto_values() {
        // delta = e^-1, N = 8: sqrt(8 * 1 / 8) = 1
        let k = kappa_auto((-1.0f64).exp(), 8.0).unwrap();
        assert!((k - 1.0).abs() < 1e-14);
        // delta = e^-2, N = 4: sqrt(16 / 4) = 2
        let k = kappa_auto((-2.0f64).exp(), 4.0).unwrap();
        assert!((k - 2.0).abs() < 1e-14);
        // delta = 1: log term vanishes
        assert_eq!(kappa_auto(1.0, 3.0).unwrap(), 0.0);
        assert!(kappa_auto(0.0, 3.0).is_err());
    }

    #[test]
    fn misfit_scalar_case_and_zero_noise() {
        // spectrum {1}, x_dag = (1), x0 = 0, zero noise, Tikhonov alpha = 1:
        // s * r * |A x0 - z| = 0.5 * 0.5 * 1 = 0.25
        let spectrum = Spectrum::new(vec![1.0]).unwrap();
        let instance = ProblemInstance::new(
            spectrum,
            SpectralVector::new(vec![1.0]),
            SpectralVector::zeros(1),
            0.1,
        )
        .unwrap();
        let z = instance.noise_free_data();
        let m = weighted_misfit(&instance, Scheme::Tikhonov, 1.0, &z).unwrap();
        assert!((m - 0.25).abs() < 1e-15);

        // x0 = x_dag with zero noise: misfit vanishes for every scheme.
        let s2 = Spectrum::new(vec![1.0, 0.5]).unwrap();
        let x = SpectralVector::new(vec![2.0, -1.0]);
        let inst2 = ProblemInstance::new(s2, x.clone(), x, 0.1).unwrap();
        let z2 = inst2.noise_free_data();
        assert_eq!(
            weighted_misfit(&inst2, Scheme::Showalter, 0.5, &z2).unwrap(),
            0.0
        );
    }

    #[test]
    fn misfit_routes_agree() {
        let (instance, z_delta) = three_eig_instance(0.1);
        for scheme in [
            Scheme::Tikhonov,
            Scheme::IteratedTikhonov { n: 2 },
            Scheme::Tsvd,
            Scheme::Landweber,
            Scheme::Showalter,
        ] {
            for &alpha in &[1.0, 0.25, 0.01] {
                let a = weighted_misfit(&instance, scheme, alpha, &z_delta).unwrap();
                let b = weighted_misfit_via_estimator(&instance, scheme, alpha, &z_delta).unwrap();
                let scale = a.abs().max(1e-300);
                assert!(
                    (a - b).abs() <= 1e-10 * scale,
                    "{scheme:?} alpha={alpha}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn alpha_hat_statistical_hand_scan() {
        // spectrum {1}: Theta(alpha) = sqrt(alpha (1 + alpha)); target 0.5
        // (eta = 5, kappa = 0, delta = 0.1) is first met at alpha = 0.125.
        let spectrum = Spectrum::new(vec![1.0]).unwrap();
        let tables = GridTables::new(&spectrum, Grid::new(1.0, 0.5, 10).unwrap());
        let hat = alpha_hat_statistical(&tables, 5.0, 0.0, 0.1).unwrap();
        assert_eq!(hat.index, 3);
        assert_eq!(hat.alpha, 0.125);

        // target above Theta(alpha0): first grid point qualifies
        let hat0 = alpha_hat_statistical(&tables, 100.0, 0.0, 0.1).unwrap();
        assert_eq!(hat0.index, 0);

        // doubling eta can only increase alpha_hat
        let hat_small = alpha_hat_statistical(&tables, 2.5, 0.0, 0.1).unwrap();
        assert!(hat_small.alpha <= hat.alpha);

        // unreachable target exhausts with advice
        let err = alpha_hat_statistical(&tables, 1e-12, 0.0, 1e-9).unwrap_err();
        assert!(matches!(err, Error::GridExhausted { .. }));
    }

    #[test]
    fn alpha_hat_deterministic_hand_cases() {
        let spectrum = Spectrum::new(vec![1.0]).unwrap();
        let tables = GridTables::new(&spectrum, Grid::new(1.0, 0.5, 20).unwrap());
        // mu = 0: delta(alpha) = 0.1; largest alpha <= 0.1 is 1/16.
        let flat = DeltaBound::power_law(0.1, 0.0).unwrap();
        let hat = alpha_hat_deterministic(&tables, &flat, 1.0).unwrap();
        assert_eq!(hat.alpha, 0.0625);
        // eta *= 2 weakly increases alpha_hat.
        let hat2 = alpha_hat_deterministic(&tables, &flat, 2.0).unwrap();
        assert!(hat2.alpha >= hat.alpha);
        // mu = 0.5, delta = 0.01: alpha <= 0.01 sqrt(alpha) means
        // alpha <= 1e-4; largest grid point is 2^-14.
        let root = DeltaBound::power_law(0.01, 0.5).unwrap();
        let hat3 = alpha_hat_deterministic(&tables, &root, 1.0).unwrap();
        assert_eq!(hat3.alpha, 0.5f64.powi(14));
        assert_eq!(hat3.index, 14);
    }

    #[test]
    fn statistical_selection_immediate_stops() {
        // zero noise, x0 = x_dag: misfit 0 at alpha0, Regular, 1 step.
        let spectrum = Spectrum::new(vec![1.0, 0.5]).unwrap();
        let x = SpectralVector::new(vec![1.0, 2.0]);
        let instance = ProblemInstance::new(spectrum.clone(), x.clone(), x, 0.1).unwrap();
        let z = instance.noise_free_data();
        let tables = GridTables::new(&spectrum, Grid::new(1.0, 0.5, 10).unwrap());
        let rule = RuleConfig::new(1.5, 1.0, KappaChoice::Fixed(0.0)).unwrap();
        let sel = select_statistical_rg(&instance, Scheme::Tikhonov, &tables, &rule, &z).unwrap();
        assert_eq!(sel.stop_kind, StopKind::Regular);
        assert_eq!(sel.steps, 1);
        assert_eq!(sel.alpha_selected, 1.0);
        assert_eq!(sel.trace.len(), sel.steps);

        // enormous kappa: regular stop at alpha0 for any bounded data.
        let (instance, z_delta) = three_eig_instance(0.1);
        let tables3 = GridTables::new(instance.spectrum(), Grid::new(1.0, 0.5, 10).unwrap());
        let rule_huge = RuleConfig::new(1.5, 1.0, KappaChoice::Fixed(1e6)).unwrap();
        let sel =
            select_statistical_rg(&instance, Scheme::Tikhonov, &tables3, &rule_huge, &z_delta)
                .unwrap();
        assert_eq!(sel.stop_kind, StopKind::Regular);
        assert_eq!(sel.steps, 1);
    }

    // Brute-force oracle: evaluate both stopping conditions at every grid
    // point from scalar formulas, independently of the selector's scan.
    #[allow(clippy::too_many_arguments)]
    fn brute_force_statistical(
        ts: &[f64],
        z: &[f64],
        tau: f64,
        eta: f64,
        kappa: f64,
        delta: f64,
        alpha0: f64,
        q: f64,
        k_max: usize,
    ) -> (f64, &'static str, usize) {
        for k in 0..=k_max {
            let alpha = alpha0 * q.powi(k as i32);
            let mut misfit_sq = 0.0;
            let mut n_eff = 0.0;
            for (&t, &zj) in ts.iter().zip(z) {
                let s = alpha / (t + alpha);
                let r = alpha / (t + alpha);
                misfit_sq += (s * r * zj) * (s * r * zj);
                n_eff += t / (t + alpha);
            }
            let misfit = misfit_sq.sqrt();
            let regular = misfit <= tau * (1.0 + kappa) * delta * (alpha * n_eff).sqrt();
            let emergency = (alpha / n_eff).sqrt() <= eta * (1.0 + kappa) * delta;
            if regular {
                return (alpha, "regular", k + 1);
            }
            if emergency {
                return (alpha, "emergency", k + 1);
            }
        }
        (f64::NAN, "exhausted", k_max + 1)
    }

    #[test]
    fn statistical_selection_matches_brute_force_and_frozen_value() {
        let (instance, z_delta) = three_eig_instance(0.1);
        let tables = GridTables::new(instance.spectrum(), Grid::new(1.0, 0.5, 30).unwrap());
        let rule = RuleConfig::new(1.5, 1.0, KappaChoice::Fixed(0.0)).unwrap();
        let sel =
            select_statistical_rg(&instance, Scheme::Tikhonov, &tables, &rule, &z_delta).unwrap();

        // x0 = 0, so A x0 - z_delta = -z_delta and the oracle uses z directly.
        let (alpha, kind, steps) = brute_force_statistical(
            instance.spectrum().eigenvalues(),
            z_delta.coefficients(),
            1.5,
            1.0,
            0.0,
            0.1,
            1.0,
            0.5,
            30,
        );
        assert_eq!(sel.alpha_selected, alpha);
        assert_eq!(sel.steps, steps);
        assert_eq!(sel.stop_kind, StopKind::Regular);
        assert_eq!(kind, "regular");

        // Frozen from the high-precision scan oracle: alpha = 0.25, 3 steps,
        // regular stop (misfit 0.084596985761905252 <= threshold
        // 0.091855865354369179).
        assert_eq!(sel.alpha_selected, 0.25);
        assert_eq!(sel.steps, 3);
        let last = sel.trace.last().unwrap();
        assert!((last.misfit - 0.084596985761905252).abs() < 1e-15);
        assert!((last.regular_threshold - 0.091855865354369179).abs() < 1e-15);
    }

    #[test]
    fn deterministic_selection_matches_brute_force_and_frozen_value() {
        let (instance, z_delta) = three_eig_instance(0.1);
        let tables = GridTables::new(instance.spectrum(), Grid::new(1.0, 0.5, 30).unwrap());
        let bound = DeltaBound::power_law(0.1, 0.0).unwrap();
        let hat = alpha_hat_deterministic(&tables, &bound, 1.0).unwrap();
        assert_eq!(hat.alpha, 0.0625);
        let sel = select_deterministic_rg(
            &instance,
            Scheme::Tikhonov,
            &tables,
            1.5,
            &bound,
            hat,
            &z_delta,
        )
        .unwrap();
        // Frozen scan oracle: first hit at alpha = 0.25 (misfit
        // 0.0846 <= tau delta = 0.15), Regular, 3 steps.
        assert_eq!(sel.alpha_selected, 0.25);
        assert_eq!(sel.stop_kind, StopKind::Regular);
        assert_eq!(sel.steps, 3);

        // Brute-force re-scan.
        let mut expected = None;
        for k in 0..=hat.index {
            let alpha = tables.alpha(k);
            let misfit = weighted_misfit(&instance, Scheme::Tikhonov, alpha, &z_delta).unwrap();
            if misfit <= 1.5 * 0.1 {
                expected = Some(alpha);
                break;
            }
        }
        assert_eq!(sel.alpha_selected, expected.unwrap());
    }

    #[test]
    fn deterministic_selection_fallback_branch() {
        // Tiny tau * delta(alpha) with a floor at alpha0 (huge eta): the one
        // admissible grid point fails the misfit test, so the rule falls
        // back to alpha_hat.
        let (instance, z_delta) = three_eig_instance(0.1);
        let tables = GridTables::new(instance.spectrum(), Grid::new(1.0, 0.5, 30).unwrap());
        let bound = DeltaBound::power_law(1e-9, 0.0).unwrap();
        let hat = alpha_hat_deterministic(&tables, &bound, 1e9).unwrap();
        assert_eq!(hat.index, 0);
        let sel = select_deterministic_rg(
            &instance,
            Scheme::Tikhonov,
            &tables,
            1.5,
            &bound,
            hat,
            &z_delta,
        )
        .unwrap();
        assert_eq!(sel.stop_kind, StopKind::Emergency);
        assert_eq!(sel.alpha_selected, hat.alpha);
        assert_eq!(sel.steps, hat.index + 1);
        assert_eq!(sel.trace.len(), sel.steps);

        // zero noise, x0 = x_dag still stops Regular at alpha0.
        let spectrum = instance.spectrum().clone();
        let x = instance.x_dag().clone();
        let clean = ProblemInstance::new(spectrum, x.clone(), x, 0.1).unwrap();
        let z = clean.noise_free_data();
        let bound2 = DeltaBound::power_law(0.1, 0.0).unwrap();
        let hat2 = alpha_hat_deterministic(&tables, &bound2, 1.0).unwrap();
        let sel2 =
            select_deterministic_rg(&clean, Scheme::Tikhonov, &tables, 1.5, &bound2, hat2, &z)
                .unwrap();
        assert_eq!(sel2.stop_kind, StopKind::Regular);
        assert_eq!(sel2.alpha_selected, 1.0);
    }

    #[test]
    fn statistical_selection_stops_at_or_before_alpha_hat() {
        // Adversarial noise never passes the regular test, so the scan must
        // end exactly at the emergency floor.
        let spectrum = Spectrum::power_law(1.0, 50).unwrap();
        let instance = ProblemInstance::new(
            spectrum.clone(),
            SpectralVector::new((1..=50).map(|j| (j as f64).powf(-1.5)).collect()),
            SpectralVector::zeros(50),
            1e-3,
        )
        .unwrap();
        let zeta = NoiseSpec::gaussian(99).realize(&spectrum, 0).unwrap();
        let z_delta = instance.observed(&zeta).unwrap();
        let tables = GridTables::new(&spectrum, Grid::new(1.0, 0.7, 80).unwrap());
        let rule = RuleConfig::new(1.0 + 1e-9, 1.0, KappaChoice::Fixed(0.0)).unwrap();
        let sel =
            select_statistical_rg(&instance, Scheme::Tikhonov, &tables, &rule, &z_delta).unwrap();
        let hat = alpha_hat_statistical(&tables, 1.0, 0.0, 1e-3).unwrap();
        assert!(sel.steps <= hat.index + 1);
        assert_ne!(sel.stop_kind, StopKind::Exhausted);
    }

    #[test]
    fn oracle_alpha_tie_break_and_bias_only() {
        let (instance, z_delta) = three_eig_instance(0.1);
        let refined = refined_grid(1.0, 1e-4, 0.5);
        assert!(refined.windows(2).all(|w| w[0] > w[1]));

        // zero noise with x0 = x_dag: every alpha attains 0; largest wins.
        let x = instance.x_dag().clone();
        let clean = ProblemInstance::new(instance.spectrum().clone(), x.clone(), x, 0.1).unwrap();
        let (alpha, value) = oracle_alpha(&clean, Scheme::Tikhonov, &refined, None).unwrap();
        assert_eq!(alpha, 1.0);
        assert_eq!(value, 0.0);

        // bias-only: objective decreases as alpha shrinks, smallest wins.
        let (alpha, _) = oracle_alpha(&instance, Scheme::Tikhonov, &refined, None).unwrap();
        assert_eq!(alpha, *refined.last().unwrap());

        // noisy objective: brute-force argmin agrees.
        let (alpha, value) =
            oracle_alpha(&instance, Scheme::Tikhonov, &refined, Some(&z_delta)).unwrap();
        let mut best = (f64::NAN, f64::INFINITY);
        for &a in &refined {
            let x = reconstruct(&instance, Scheme::Tikhonov, a, &z_delta).unwrap();
            let v = instance.x_dag().sub(&x).unwrap().norm();
            if v < best.1 {
                best = (a, v);
            }
        }
        assert_eq!(alpha, best.0);
        assert_eq!(value, best.1);
    }

    #[test]
    fn oracle_rhs_statistical_scalar_case() {
        // x0 = x_dag, spectrum {1}, alpha = 1, delta = e^-1:
        // 0 + e^-1 (1 + 1) / sqrt(2) = 2 / (e sqrt(2)).
        let spectrum = Spectrum::new(vec![1.0]).unwrap();
        let x = SpectralVector::new(vec![1.0]);
        let instance = ProblemInstance::new(spectrum, x.clone(), x, (-1.0f64).exp()).unwrap();
        let v = oracle_rhs_statistical(&instance, Scheme::Tikhonov, 1.0).unwrap();
        let expected = 2.0 / ((1.0f64).exp() * 2.0f64.sqrt());
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.5202601).abs() < 1e-6);

        // second term vanishes as delta -> 0 at fixed alpha
        let x2 = SpectralVector::new(vec![1.0]);
        let spectrum2 = Spectrum::new(vec![1.0]).unwrap();
        let tiny = ProblemInstance::new(spectrum2, x2.clone(), x2, 1e-12).unwrap();
        let v2 = oracle_rhs_statistical(&tiny, Scheme::Tikhonov, 1.0).unwrap();
        assert!(v2 < 1e-11);
    }
}
