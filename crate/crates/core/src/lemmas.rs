//! Testable inequality battery for the deterministic RG rule under general
//! noise bounds.
//!
//! Each case runs one deterministic selection and then checks, numerically
//! on the scanned grid range, the chain of inequalities behind the
//! deterministic oracle bound:
//!
//! - `rejected-alpha-bias-floor`: every rejected grid point (alpha > alpha*)
//!   satisfies `delta(alpha)/alpha <= ||x_alpha - x_dag|| / (tau - 1)`.
//! - `selected-misfit-bound`: the noise-free weighted misfit at alpha* is at
//!   most `gamma0 delta(alpha*)`, `gamma0 = max(1 + tau, eta ||x_dag - x0||)`.
//! - `increment-weighted-bias`: for grid pairs `alpha <= beta`,
//!   `||x_beta - x_alpha|| <= (1 + gamma_star)/sqrt(alpha) *
//!   ||A^{1/2} s_beta^{1/2} r_beta (x_dag - x0)||` (scheme-only bound).
//! - `weighted-bias-self-similarity`: under the admission gate,
//!   `||A^{1/2} s_alpha^{1/2} r_alpha (x_dag - x0)|| <= C/sqrt(alpha) *
//!   ||s_alpha r_alpha A (x_dag - x0)||` with the closed-form constant
//!   `C(c1, c2, t0, alpha0)`.
//! - `increment-combined`: the two combined,
//!   `||x_beta - x_alpha|| <= (1 + gamma_star) C / sqrt(alpha beta) *
//!   ||s_beta r_beta A (x_dag - x0)||`.
//! - `no-emergency-small-eta`: when `eta < (tau - 1)/(q ||x0 - x_dag||)` the
//!   selection never takes the emergency fallback.
//!
//! Cases must pair the noise with a valid bound (`delta ||s_alpha^{1/2}
//! zeta|| <= delta(alpha)` on the scanned range); power-bounded noise with
//! the matching power-law bound does this by construction. Checks that
//! require the self-similarity gate are asserted only for admitted cases and
//! reported otherwise.

use serde::Serialize;

use crate::config::LemmaCaseSpec;
use crate::error::{Error, Result};
use crate::noise::{DeltaBound, NoiseSpec};
use crate::numerics::compensated_sum;
use crate::rules::{
    alpha_hat_deterministic, select_deterministic_rg, GridTables, SelectionResult, StopKind,
};
use crate::schemes::Scheme;
use crate::selfsim::{check_kn, KnConfig};
use crate::spectrum::{bias_norm, ProblemInstance, SpectralVector};

/// Tolerance on mathematically exact inequality checks: pass means
/// `lhs <= rhs (1 + LEMMA_SLACK)`.
pub const LEMMA_SLACK: f64 = 1e-9;

/// One resolved battery case.
#[derive(Debug, Clone)]
pub struct LemmaCase {
    pub label: String,
    pub instance: ProblemInstance,
    pub scheme: Scheme,
    pub tau: f64,
    pub eta: f64,
    pub grid: crate::rules::Grid,
    pub bound: DeltaBound,
    pub zeta: SpectralVector,
    pub kn: Option<KnConfig>,
}

impl LemmaCase {
    pub fn resolve(spec: &LemmaCaseSpec) -> Result<Self> {
        let spectrum = spec.spectrum.resolve()?;
        let x_dag = spec.x_dag.resolve(&spectrum)?;
        let x0 = spec.x0.resolve(&spectrum)?;
        let (rule, grid) = spec.rule.resolve(&spectrum)?;
        let noise = spec.noise.resolve(&spectrum, spec.seed)?;
        let zeta = match &noise {
            NoiseSpec::Gaussian { .. } => {
                return Err(Error::Config(format!(
                    "case {}: the lemma battery needs deterministic noise (power or explicit)",
                    spec.label
                )))
            }
            other => other.realize(&spectrum, 0)?,
        };
        let tables = GridTables::new(&spectrum, grid);
        let bound = spec.bound.resolve(spec.delta, tables.n_eff(0))?;
        let kn = spec
            .kn_gate
            .as_ref()
            .map(|g| g.resolve(&spectrum))
            .transpose()?;
        let instance = ProblemInstance::new(spectrum, x_dag, x0, spec.delta)?;
        Ok(LemmaCase {
            label: spec.label.clone(),
            instance,
            scheme: spec.scheme,
            tau: rule.tau,
            eta: rule.eta,
            grid,
            bound,
            zeta,
            kn,
        })
    }
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    /// Whether the check is asserted for this case (gate-dependent checks
    /// are reported but not asserted on non-admitted cases).
    pub applicable: bool,
    pub pass: bool,
    /// Worst lhs/rhs over the checked range (0 when nothing was checked).
    pub worst_ratio: f64,
}

/// Per-case battery report.
#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub label: String,
    /// Admission verdict: `None` when no gate was configured.
    pub admitted: Option<bool>,
    pub kn_worst_ratio: Option<f64>,
    pub alpha_selected: f64,
    pub stop_kind: StopKind,
    pub checks: Vec<CheckResult>,
}

/// Battery report over all cases.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub cases: Vec<CaseReport>,
}

impl LemmaReport {
    /// True when every applicable check passes in every case.
    pub fn all_pass(&self) -> bool {
        self.cases
            .iter()
            .all(|c| c.checks.iter().all(|ch| !ch.applicable || ch.pass))
    }
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

struct Worst {
    ratio: f64,
}

impl Worst {
    fn new() -> Self {
        Worst { ratio: 0.0 }
    }

    fn feed(&mut self, lhs: f64, rhs: f64) {
        let r = ratio_of(lhs, rhs);
        if r > self.ratio {
            self.ratio = r;
        }
    }

    fn into_check(self, name: &'static str, applicable: bool) -> CheckResult {
        CheckResult {
            name,
            applicable,
            pass: self.ratio <= 1.0 + LEMMA_SLACK,
            worst_ratio: self.ratio,
        }
    }
}

/// Closed-form constant of the self-similarity strengthening:
/// `(2 + c1^2 (1+c2)^2 / c2^2 + (alpha0 + t0)/t0 + c1^2 ((c2 t0 + alpha0)/(c2 t0))^2)^{1/2}`.
pub fn self_similarity_constant(c1: f64, c2: f64, t0: f64, alpha0: f64) -> f64 {
    (2.0 + c1 * c1 * (1.0 + c2) * (1.0 + c2) / (c2 * c2)
        + (alpha0 + t0) / t0
        + c1 * c1 * ((c2 * t0 + alpha0) / (c2 * t0)).powi(2))
    .sqrt()
}

/// Norm `||A^{1/2} s_alpha^{1/2} r_alpha (x_dag - x0)||`.
fn weighted_half_bias(case: &LemmaCase, alpha: f64) -> Result<f64> {
    let ts = case.instance.spectrum().eigenvalues();
    let diff = case.instance.difference();
    let mut terms = Vec::with_capacity(ts.len());
    for (&t, &d) in ts.iter().zip(diff.coefficients()) {
        let r = case.scheme.residual(alpha, t)?;
        let w = (t * alpha / (t + alpha)).sqrt() * r * d;
        terms.push(w * w);
    }
    Ok(compensated_sum(terms).sqrt())
}

/// Norm `||s_alpha r_alpha A (x_dag - x0)||`.
fn weighted_full_bias(case: &LemmaCase, alpha: f64) -> Result<f64> {
    let ts = case.instance.spectrum().eigenvalues();
    let diff = case.instance.difference();
    let mut terms = Vec::with_capacity(ts.len());
    for (&t, &d) in ts.iter().zip(diff.coefficients()) {
        let r = case.scheme.residual(alpha, t)?;
        let w = alpha / (t + alpha) * r * t * d;
        terms.push(w * w);
    }
    Ok(compensated_sum(terms).sqrt())
}

/// Noise-free reconstruction `x_alpha` as coefficients.
fn noise_free_reconstruction(case: &LemmaCase, alpha: f64) -> Result<Vec<f64>> {
    let ts = case.instance.spectrum().eigenvalues();
    let mut out = Vec::with_capacity(ts.len());
    for ((&t, &x0), &xd) in ts
        .iter()
        .zip(case.instance.x0().coefficients())
        .zip(case.instance.x_dag().coefficients())
    {
        let g = case.scheme.filter(alpha, t)?;
        // z = t x_dag
        out.push(x0 - g * (t * x0 - t * xd));
    }
    Ok(out)
}

fn run_case(case: &LemmaCase) -> Result<CaseReport> {
    let spectrum = case.instance.spectrum();
    let tables = GridTables::new(spectrum, case.grid);
    let alpha_hat = alpha_hat_deterministic(&tables, &case.bound, case.eta)?;
    let z_delta = case.instance.observed(&case.zeta)?;
    let selection: SelectionResult = select_deterministic_rg(
        &case.instance,
        case.scheme,
        &tables,
        case.tau,
        &case.bound,
        alpha_hat,
        &z_delta,
    )?;
    let selected_index = selection.steps - 1;

    let (admitted, kn_worst_ratio) = match &case.kn {
        Some(cfg) => {
            let report = check_kn(spectrum, &case.instance.difference(), case.scheme, cfg)?;
            (Some(report.pass()), Some(report.worst_ratio))
        }
        None => (None, None),
    };
    let gate_ok = admitted == Some(true);

    let scan_range = 0..=alpha_hat.index;
    let alphas: Vec<f64> = scan_range.clone().map(|k| tables.alpha(k)).collect();
    let biases: Vec<f64> = alphas
        .iter()
        .map(|&a| bias_norm(&case.instance, case.scheme, a))
        .collect::<Result<_>>()?;
    let bounds: Vec<f64> = scan_range
        .clone()
        .map(|k| case.bound.eval_at(&tables, k))
        .collect();
    let reconstructions: Vec<Vec<f64>> = alphas
        .iter()
        .map(|&a| noise_free_reconstruction(case, a))
        .collect::<Result<_>>()?;
    let half_bias: Vec<f64> = alphas
        .iter()
        .map(|&a| weighted_half_bias(case, a))
        .collect::<Result<_>>()?;
    let full_bias: Vec<f64> = alphas
        .iter()
        .map(|&a| weighted_full_bias(case, a))
        .collect::<Result<_>>()?;

    let mut checks = Vec::new();

    // rejected-alpha-bias-floor: alpha > alpha* means k < selected_index.
    let mut w = Worst::new();
    for k in 0..selected_index {
        let lhs = bounds[k] / alphas[k];
        let rhs = biases[k] / (case.tau - 1.0);
        w.feed(lhs, rhs);
    }
    checks.push(w.into_check("rejected-alpha-bias-floor", true));

    // selected-misfit-bound at alpha*.
    let mut w = Worst::new();
    let diff_norm = case.instance.difference().norm();
    let gamma0 = (1.0 + case.tau).max(case.eta * diff_norm);
    let lhs = {
        // noise-free weighted misfit ||s r (A x0 - z)|| = weighted_full_bias
        // rewritten: s r A (x0 - x_dag) has the same norm as s r A (x_dag - x0).
        weighted_full_bias(case, selection.alpha_selected)?
    };
    w.feed(lhs, gamma0 * case.bound.eval_at(&tables, selected_index));
    checks.push(w.into_check("selected-misfit-bound", true));

    // increment-weighted-bias over pairs i < j (alpha_i > alpha_j).
    let gamma_star = case.scheme.gamma_star();
    let mut w = Worst::new();
    let mut w_combined = Worst::new();
    let c = case
        .kn
        .as_ref()
        .map(|cfg| self_similarity_constant(cfg.c1, cfg.c2, cfg.t0, case.grid.alpha0()));
    for i in 0..alphas.len() {
        for j in (i + 1)..alphas.len() {
            let (beta, alpha) = (alphas[i], alphas[j]);
            let diff_sq: Vec<f64> = reconstructions[i]
                .iter()
                .zip(&reconstructions[j])
                .map(|(a, b)| (a - b) * (a - b))
                .collect();
            let increment = compensated_sum(diff_sq).sqrt();
            let rhs = (1.0 + gamma_star) / alpha.sqrt() * half_bias[i];
            w.feed(increment, rhs);
            if let Some(c) = c {
                let rhs_combined = (1.0 + gamma_star) * c / (alpha * beta).sqrt() * full_bias[i];
                w_combined.feed(increment, rhs_combined);
            }
        }
    }
    checks.push(w.into_check("increment-weighted-bias", true));

    // weighted-bias-self-similarity per grid alpha.
    let mut w = Worst::new();
    if let Some(c) = c {
        for k in 0..alphas.len() {
            let rhs = c / alphas[k].sqrt() * full_bias[k];
            w.feed(half_bias[k], rhs);
        }
    }
    checks.push(w.into_check("weighted-bias-self-similarity", gate_ok));
    checks.push(w_combined.into_check("increment-combined", gate_ok));

    // no-emergency-small-eta.
    let applicable = diff_norm == 0.0 || case.eta < (case.tau - 1.0) / (case.grid.q() * diff_norm);
    checks.push(CheckResult {
        name: "no-emergency-small-eta",
        applicable,
        pass: selection.stop_kind != StopKind::Emergency,
        worst_ratio: if selection.stop_kind == StopKind::Emergency {
            f64::INFINITY
        } else {
            0.0
        },
    });

    Ok(CaseReport {
        label: case.label.clone(),
        admitted,
        kn_worst_ratio,
        alpha_selected: selection.alpha_selected,
        stop_kind: selection.stop_kind,
        checks,
    })
}

/// Runs the battery over all cases; failures are reported, not raised.
pub fn lemma_suite(cases: &[LemmaCase]) -> Result<LemmaReport> {
    let reports = cases.iter().map(run_case).collect::<Result<Vec<_>>>()?;
    Ok(LemmaReport { cases: reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LemmasConfig;

    fn battery_config(mu: f64, delta: f64, eta: f64) -> LemmaCaseSpec {
        serde_json::from_value(serde_json::json!({
            "label": format!("power mu={mu} delta={delta}"),
            "spectrum": {"kind": "power", "a": 1.0, "J": 300},
            "x_dag": {"kind": "power-law", "scale": 1.0, "exponent": 1.5},
            "x0": {"kind": "zero"},
            "scheme": {"kind": "tikhonov"},
            "rule": {"tau": 1.5, "eta": eta, "kappa": 0.0, "q": 0.7,
                     "alpha0": "norm", "k_max": 80},
            "noise": {"kind": "power", "mu": mu},
            "bound": {"kind": "power-law", "mu": mu},
            "delta": delta,
            "kn_gate": {"c1": 4.0, "c2": 0.25, "t0": 0.1}
        }))
        .unwrap()
    }

    #[test]
    fn zero_noise_battery_is_trivially_satisfied() {
        // x0 = x_dag and explicit zero noise: both sides of every inequality
        // collapse to zero or bias-only quantities.
        let spec: LemmaCaseSpec = serde_json::from_value(serde_json::json!({
            "label": "clean",
            "spectrum": {"kind": "explicit", "eigenvalues": [1.0, 0.25, 0.0625]},
            "x_dag": {"kind": "explicit", "coefficients": [1.0, 1.0, 1.0]},
            "x0": {"kind": "explicit", "coefficients": [1.0, 1.0, 1.0]},
            "scheme": {"kind": "tikhonov"},
            "rule": {"tau": 1.5, "eta": 1.0, "kappa": 0.0, "q": 0.5,
                     "alpha0": 1.0, "k_max": 30},
            "noise": {"kind": "explicit", "zeta": [0.0, 0.0, 0.0]},
            "bound": {"kind": "power-law", "mu": 0.0},
            "delta": 0.1
        }))
        .unwrap();
        let case = LemmaCase::resolve(&spec).unwrap();
        let report = lemma_suite(&[case]).unwrap();
        assert!(report.all_pass(), "{report:?}");
        assert_eq!(report.cases[0].stop_kind, StopKind::Regular);
    }

    #[test]
    fn power_law_battery_passes_all_applicable_checks() {
        let mut cases = Vec::new();
        for &mu in &[0.0, 0.25, 0.5] {
            cases.push(LemmaCase::resolve(&battery_config(mu, 1e-2, 1.0)).unwrap());
        }
        let report = lemma_suite(&cases).unwrap();
        for case in &report.cases {
            assert_eq!(case.admitted, Some(true), "{}", case.label);
        }
        assert!(report.all_pass(), "{report:#?}");
    }

    #[test]
    fn gaussian_noise_is_rejected_for_the_battery() {
        let mut spec = battery_config(0.0, 1e-2, 1.0);
        spec.noise = serde_json::from_value(serde_json::json!({"kind": "gaussian"})).unwrap();
        assert!(matches!(LemmaCase::resolve(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn non_admitted_case_reports_without_asserting() {
        // Mass on the smallest eigenvalue with a cutoff filter: the gate
        // fails, so gate-dependent checks are reported as non-applicable.
        let spec: LemmaCaseSpec = serde_json::from_value(serde_json::json!({
            "label": "planted violation",
            "spectrum": {"kind": "explicit", "eigenvalues": [1.0, 0.5, 0.01]},
            "x_dag": {"kind": "explicit", "coefficients": [0.0, 0.0, 1.0]},
            "x0": {"kind": "zero"},
            "scheme": {"kind": "tsvd"},
            "rule": {"tau": 1.5, "eta": 1.0, "kappa": 0.0, "q": 0.5,
                     "alpha0": 1.0, "k_max": 30},
            "noise": {"kind": "explicit", "zeta": [0.0, 0.0, 0.0]},
            "bound": {"kind": "power-law", "mu": 0.0},
            "delta": 0.1,
            "kn_gate": {"c1": 4.0, "c2": 0.25, "t0": 0.1, "probes": [0.01]}
        }))
        .unwrap();
        let case = LemmaCase::resolve(&spec).unwrap();
        let report = lemma_suite(&[case]).unwrap();
        assert_eq!(report.cases[0].admitted, Some(false));
        for check in &report.cases[0].checks {
            if check.name == "weighted-bias-self-similarity" || check.name == "increment-combined" {
                assert!(!check.applicable);
            }
        }
        // non-applicable failures do not fail the battery
        assert!(report.all_pass());
    }

    #[test]
    fn small_eta_discussion_check_applies_and_passes() {
        // eta chosen below (tau-1)/(q ||x0 - x_dag||): the fallback branch
        // must never fire.
        let spec = battery_config(0.25, 1e-3, 0.05);
        let case = LemmaCase::resolve(&spec).unwrap();
        let diff_norm = case.instance.difference().norm();
        assert!(case.eta < (case.tau - 1.0) / (case.grid.q() * diff_norm));
        let report = lemma_suite(&[case]).unwrap();
        let check = report.cases[0]
            .checks
            .iter()
            .find(|c| c.name == "no-emergency-small-eta")
            .unwrap();
        assert!(check.applicable);
        assert!(check.pass);
    }

    #[test]
    fn lemmas_config_validation() {
        let cfg: LemmasConfig = serde_json::from_value(serde_json::json!({
            "schema_version": 1,
            "cases": []
        }))
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
