//! Seeded Monte Carlo experiments: RMSE of the RG-selected estimator,
//! oracle-inequality ratios, convergence-rate slopes, concentration of the
//! good-noise set, and step-count growth.
//!
//! Replicates are embarrassingly parallel; per-replicate randomness is
//! derived from `(seed, replicate_index)` and aggregation runs over the
//! collected outcomes in fixed index order (pairwise summation), so any
//! worker count produces the identical report. The worker count follows the
//! rayon default and can be pinned with `RAYON_NUM_THREADS`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::noise::{in_z_kappa, sample_zeta, weighted_noise_norm, DeltaBound};
use crate::numerics::{geometric_grid, least_squares_slope, pairwise_sum};
use crate::report::{DeltaRow, MCReport};
use crate::rules::{
    alpha_hat_deterministic, alpha_hat_statistical, kappa_auto, oracle_rhs_statistical,
    refined_grid, select_deterministic_rg, select_statistical_rg, GridPoint, GridTables,
    KappaChoice, SelectionResult, StopKind,
};
use crate::schemes::qualification_constant;
use crate::selfsim::check_kn;
use crate::spectrum::{bias_norm, reconstruct, ProblemInstance, Spectrum};
use crate::ARTIFACT_VERSION;

/// Effective noise level `delta (1 + sqrt(|log(1/delta)|))`, the abscissa of
/// rate regressions and the numerator scale of the statistical oracle.
pub fn delta_effective(delta: f64) -> f64 {
    delta * (1.0 + (1.0 / delta).ln().abs().sqrt())
}

/// Empirical-qualification gate threshold: a scheme whose measured constant
/// for `psi(t) = t^nu` stays below this exploits smoothness `nu`; saturation
/// shows up as growth past 1e3 on deep grids.
pub const QUALIFICATION_GATE: f64 = 10.0;

/// Outcome of a single replicate.
#[derive(Debug, Clone, Copy)]
pub struct ReplicateOutcome {
    pub squared_error: f64,
    pub alpha: f64,
    pub stop: StopKind,
    pub steps: usize,
    /// Membership in the good-noise set (statistical runs; `true` otherwise).
    pub in_z: bool,
    /// Pointwise error bound `||x_dag - x0|| + c_star delta
    /// ||s_{alpha_hat}^{1/2} zeta|| / alpha_hat`, valid for every noise draw.
    pub pointwise_bound: f64,
}

/// Aggregated Monte Carlo results at one noise level.
#[derive(Debug, Clone)]
pub struct RmseRun {
    pub delta: f64,
    pub rmse: f64,
    /// Standard error of the RMSE: the variance of squared errors propagated
    /// through the square root to first order.
    pub rmse_stderr: f64,
    pub mean_steps: f64,
    pub emergency_fraction: f64,
    pub exhausted: usize,
    pub z_violations: usize,
    /// Resolved kappa (0 for deterministic-rule runs, where the set is not
    /// used).
    pub kappa: f64,
    pub alpha_hat: GridPoint,
    /// Largest error among replicates inside the good-noise set.
    pub z_restricted_worst_error: Option<f64>,
    pub outcomes: Vec<ReplicateOutcome>,
}

enum SelectionMode {
    Statistical {
        kappa: f64,
        alpha_hat: GridPoint,
    },
    Deterministic {
        bound: DeltaBound,
        alpha_hat: GridPoint,
    },
}

impl SelectionMode {
    fn resolve(exp: &Experiment, tables: &GridTables, delta: f64) -> Result<Self> {
        match &exp.bound {
            None => {
                let kappa = exp.rule.resolve_kappa(delta, tables.n_eff(0))?;
                let alpha_hat = alpha_hat_statistical(tables, exp.rule.eta, kappa, delta)?;
                Ok(SelectionMode::Statistical { kappa, alpha_hat })
            }
            Some(spec) => {
                let bound = spec.resolve(delta, tables.n_eff(0))?;
                let alphas: Vec<f64> = exp.grid.alphas().collect();
                bound.validate_on_grid(&exp.spectrum, &alphas)?;
                let alpha_hat = alpha_hat_deterministic(tables, &bound, exp.rule.eta)?;
                Ok(SelectionMode::Deterministic { bound, alpha_hat })
            }
        }
    }

    fn alpha_hat(&self) -> GridPoint {
        match self {
            SelectionMode::Statistical { alpha_hat, .. } => *alpha_hat,
            SelectionMode::Deterministic { alpha_hat, .. } => *alpha_hat,
        }
    }

    fn select(
        &self,
        exp: &Experiment,
        instance: &ProblemInstance,
        tables: &GridTables,
        z_delta: &crate::spectrum::SpectralVector,
    ) -> Result<SelectionResult> {
        match self {
            SelectionMode::Statistical { .. } => {
                select_statistical_rg(instance, exp.scheme, tables, &exp.rule, z_delta)
            }
            SelectionMode::Deterministic { bound, alpha_hat } => select_deterministic_rg(
                instance,
                exp.scheme,
                tables,
                exp.rule.tau,
                bound,
                *alpha_hat,
                z_delta,
            ),
        }
    }
}

/// Refuses an experiment whose `x_dag - x0` fails the configured
/// self-similarity gate, naming the witness probe.
fn admission_gate(exp: &Experiment) -> Result<()> {
    if let Some(kn) = &exp.kn {
        let v = exp.x_dag.sub(&exp.x0)?;
        let report = check_kn(&exp.spectrum, &v, exp.scheme, kn)?;
        if !report.pass() {
            return Err(Error::Admission {
                witness_alpha: report.witness_alpha.unwrap_or(f64::NAN),
                worst_ratio: report.worst_ratio,
            });
        }
    }
    Ok(())
}

/// Runs `exp.replicates` replicates at noise level `delta`: sample the
/// noise, form the observation, select alpha by the configured RG rule,
/// reconstruct, and accumulate squared errors.
pub fn run_rmse(exp: &Experiment, delta: f64) -> Result<RmseRun> {
    admission_gate(exp)?;
    let instance = ProblemInstance::new(
        exp.spectrum.clone(),
        exp.x_dag.clone(),
        exp.x0.clone(),
        delta,
    )?;
    let tables = GridTables::new(&exp.spectrum, exp.grid);
    let mode = SelectionMode::resolve(exp, &tables, delta)?;
    let alpha_hat = mode.alpha_hat();
    let kappa = match &mode {
        SelectionMode::Statistical { kappa, .. } => *kappa,
        SelectionMode::Deterministic { .. } => 0.0,
    };
    let diff_norm = exp.x_dag.sub(&exp.x0)?.norm();
    let gamma_star = exp.scheme.gamma_star();
    let c_star = (gamma_star * (1.0 + gamma_star)).sqrt();

    let outcomes: Vec<ReplicateOutcome> = (0..exp.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<ReplicateOutcome> {
            let zeta = exp.noise.realize(&exp.spectrum, r)?;
            let z_delta = instance.observed(&zeta)?;
            let sel = mode.select(exp, &instance, &tables, &z_delta)?;
            let x = reconstruct(&instance, exp.scheme, sel.alpha_selected, &z_delta)?;
            let squared_error = exp.x_dag.sub(&x)?.norm_sq();
            let in_z = match &mode {
                SelectionMode::Statistical { kappa, alpha_hat } => {
                    in_z_kappa(&tables, &zeta, *kappa, *alpha_hat)?.member
                }
                SelectionMode::Deterministic { .. } => true,
            };
            let weighted_at_hat = weighted_noise_norm(&exp.spectrum, &zeta, alpha_hat.alpha)?;
            let pointwise_bound = diff_norm + c_star * delta * weighted_at_hat / alpha_hat.alpha;
            Ok(ReplicateOutcome {
                squared_error,
                alpha: sel.alpha_selected,
                stop: sel.stop_kind,
                steps: sel.steps,
                in_z,
                pointwise_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let r = exp.replicates as f64;
    let sq: Vec<f64> = outcomes.iter().map(|o| o.squared_error).collect();
    let mean_sq = pairwise_sum(&sq) / r;
    let rmse = mean_sq.sqrt();
    let centered: Vec<f64> = sq.iter().map(|&e| (e - mean_sq) * (e - mean_sq)).collect();
    let var_sq = pairwise_sum(&centered) / (r - 1.0);
    let se_mean_sq = (var_sq / r).sqrt();
    let rmse_stderr = if rmse > 0.0 {
        se_mean_sq / (2.0 * rmse)
    } else {
        0.0
    };

    let mean_steps = outcomes.iter().map(|o| o.steps as f64).sum::<f64>() / r;
    let emergency = outcomes
        .iter()
        .filter(|o| o.stop == StopKind::Emergency)
        .count();
    let exhausted = outcomes
        .iter()
        .filter(|o| o.stop == StopKind::Exhausted)
        .count();
    let z_violations = outcomes.iter().filter(|o| !o.in_z).count();
    let z_restricted_worst_error = outcomes
        .iter()
        .filter(|o| o.in_z)
        .map(|o| o.squared_error.sqrt())
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.max(e)))
        });

    Ok(RmseRun {
        delta,
        rmse,
        rmse_stderr,
        mean_steps,
        emergency_fraction: emergency as f64 / r,
        exhausted,
        z_violations,
        kappa,
        alpha_hat,
        z_restricted_worst_error,
        outcomes,
    })
}

/// Infimum of the oracle objective over the refined grid (ratio `q^(1/4)`,
/// from `alpha_hat q^2` up to `alpha0`). Statistical experiments use
/// `bias(alpha) + delta_eff / Theta_{rho_N}(alpha)`; deterministic ones use
/// `bias(alpha) + delta(alpha) / alpha`.
pub fn oracle_infimum(exp: &Experiment, delta: f64, alpha_hat: GridPoint) -> Result<f64> {
    let instance = ProblemInstance::new(
        exp.spectrum.clone(),
        exp.x_dag.clone(),
        exp.x0.clone(),
        delta,
    )?;
    let alpha_min = alpha_hat.alpha * exp.grid.q() * exp.grid.q();
    let refined = refined_grid(exp.grid.alpha0(), alpha_min, exp.grid.q());
    let mut inf = f64::INFINITY;
    match &exp.bound {
        None => {
            for &alpha in &refined {
                inf = inf.min(oracle_rhs_statistical(&instance, exp.scheme, alpha)?);
            }
        }
        Some(spec) => {
            let tables = GridTables::new(&exp.spectrum, exp.grid);
            let bound = spec.resolve(delta, tables.n_eff(0))?;
            for &alpha in &refined {
                let value = bias_norm(&instance, exp.scheme, alpha)?
                    + bound.eval(&exp.spectrum, alpha)? / alpha;
                inf = inf.min(value);
            }
        }
    }
    Ok(inf)
}

/// Oracle-inequality ratio of a completed run: `rmse / oracle_infimum`.
pub fn oracle_ratio(exp: &Experiment, run: &RmseRun) -> Result<f64> {
    let inf = oracle_infimum(exp, run.delta, run.alpha_hat)?;
    Ok(run.rmse / inf)
}

/// Infimum of the deterministic oracle objective under the statistical
/// weight `delta(alpha) = (1 + kappa) delta / rho_N(alpha)`, i.e.
/// `bias(alpha) + (1 + kappa) delta / Theta_{rho_N}(alpha)`. This is the
/// bound that errors restricted to the good-noise set must track.
pub fn z_restricted_oracle_infimum(
    exp: &Experiment,
    delta: f64,
    kappa: f64,
    alpha_hat: GridPoint,
) -> Result<f64> {
    let instance = ProblemInstance::new(
        exp.spectrum.clone(),
        exp.x_dag.clone(),
        exp.x0.clone(),
        delta,
    )?;
    let alpha_min = alpha_hat.alpha * exp.grid.q() * exp.grid.q();
    let refined = refined_grid(exp.grid.alpha0(), alpha_min, exp.grid.q());
    let mut inf = f64::INFINITY;
    for &alpha in &refined {
        let value = bias_norm(&instance, exp.scheme, alpha)?
            + (1.0 + kappa) * delta / exp.spectrum.theta_rho_n(alpha)?;
        inf = inf.min(value);
    }
    Ok(inf)
}

fn validate_rate_preconditions(exp: &Experiment) -> Result<f64> {
    let nu = exp
        .source_nu
        .ok_or_else(|| Error::Config("rate study needs source_nu".into()))?;
    if exp.delta_ladder.len() < 3 {
        return Err(Error::Config(
            "rate study needs a delta ladder of at least 3 points".into(),
        ));
    }
    // Source membership: sum (v_j / t_j^nu)^2 <= 1 up to normalization slack.
    let v = exp.x_dag.sub(&exp.x0)?;
    let weight: f64 = v
        .coefficients()
        .iter()
        .zip(exp.spectrum.eigenvalues())
        .map(|(&c, &t)| (c / t.powf(nu)).powi(2))
        .sum();
    if weight > 1.0 + 1e-9 {
        return Err(Error::Config(format!(
            "x_dag - x0 lies outside the source ball of order nu = {nu}: weight {weight} > 1"
        )));
    }
    // Qualification: the scheme must exploit smoothness nu.
    let (t_lo, t_hi) = (exp.spectrum.smallest(), exp.spectrum.largest());
    let t_grid = if t_lo < t_hi {
        geometric_grid(t_lo, t_hi, 40)
    } else {
        vec![t_hi]
    };
    let a_grid = geometric_grid(exp.grid.alpha(exp.grid.k_max()), exp.grid.alpha0(), 40);
    let gamma = qualification_constant(exp.scheme, nu, &t_grid, &a_grid)?;
    if gamma > QUALIFICATION_GATE {
        return Err(Error::Config(format!(
            "scheme {} shows saturation at nu = {nu}: empirical qualification constant {gamma}",
            exp.scheme.name()
        )));
    }
    Ok(nu)
}

/// Solves `Theta_{rho_N}(t) * t^nu = target` for `t` by bisection below `hi`.
fn invert_theta_psi(spectrum: &Spectrum, nu: f64, target: f64, hi: f64) -> Result<f64> {
    let f = |t: f64| (t / spectrum.n_unchecked(t)).sqrt() * t.powf(nu);
    if f(hi) < target {
        return Err(Error::OutOfBracket {
            target,
            lo_image: 0.0,
            hi_image: f(hi),
        });
    }
    let mut lo = hi;
    while f(lo) > target {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(Error::Config(format!(
                "cannot bracket the rate equation at target {target}"
            )));
        }
    }
    let (mut lo, mut hi) = (lo, hi.min(lo * 1e6).max(lo));
    // Re-expand hi geometrically until f(hi) >= target again (lo shrank fast).
    while f(hi) < target {
        hi *= 10.0;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..300 {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - target).abs() <= 1e-10 * target {
            return Ok(mid);
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Theoretical rate slope: regress `log psi(t_delta)` on `log delta_eff`,
/// where `t_delta` solves `Theta_{rho_N}(t) psi(t) = delta_eff` and
/// `psi(t) = t^nu`.
pub fn rate_slope_theory(spectrum: &Spectrum, nu: f64, alpha0: f64, ladder: &[f64]) -> Result<f64> {
    let mut xs = Vec::with_capacity(ladder.len());
    let mut ys = Vec::with_capacity(ladder.len());
    for &delta in ladder {
        let de = delta_effective(delta);
        let t = invert_theta_psi(spectrum, nu, de, alpha0)?;
        xs.push(de.ln());
        ys.push(nu * t.ln());
    }
    Ok(least_squares_slope(&xs, &ys))
}

/// Full experiment driver: one [`DeltaRow`] per ladder point, plus rate
/// slopes when `with_rate` is set (requires `source_nu`, a ladder of >= 3
/// points, source membership, and scheme qualification).
pub fn run_experiment(exp: &Experiment, with_rate: bool) -> Result<MCReport> {
    let nu = if with_rate {
        Some(validate_rate_preconditions(exp)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(exp.delta_ladder.len());
    let mut log_de = Vec::new();
    let mut log_rmse = Vec::new();
    for &delta in &exp.delta_ladder {
        let run = run_rmse(exp, delta)?;
        let oracle_inf = oracle_infimum(exp, delta, run.alpha_hat)?;
        if with_rate {
            if run.rmse <= 0.0 {
                return Err(Error::Config(format!(
                    "rate study needs positive rmse; got 0 at delta = {delta}"
                )));
            }
            log_de.push(delta_effective(delta).ln());
            log_rmse.push(run.rmse.ln());
        }
        rows.push(DeltaRow {
            delta,
            rmse: run.rmse,
            rmse_stderr: run.rmse_stderr,
            oracle_inf,
            ratio: run.rmse / oracle_inf,
            mean_steps: run.mean_steps,
            emergency_fraction: run.emergency_fraction,
            z_violations: run.z_violations,
            replicates: exp.replicates,
            seed: exp.seed,
        });
    }
    let (rate_slope, rate_slope_theory_value) = match nu {
        Some(nu) => {
            let slope = least_squares_slope(&log_de, &log_rmse);
            let theory =
                rate_slope_theory(&exp.spectrum, nu, exp.grid.alpha0(), &exp.delta_ladder)?;
            (Some(slope), Some(theory))
        }
        None => (None, None),
    };
    Ok(MCReport {
        artifact_version: ARTIFACT_VERSION.to_owned(),
        config: exp.config_echo.clone(),
        rows,
        rate_slope,
        rate_slope_theory: rate_slope_theory_value,
    })
}

/// Convenience wrapper matching the rate-study contract: returns
/// `(rate_slope, rate_slope_theory)`.
pub fn rate_study(exp: &Experiment) -> Result<(f64, f64)> {
    let report = run_experiment(exp, true)?;
    Ok((
        report.rate_slope.unwrap(),
        report.rate_slope_theory.unwrap(),
    ))
}

/// Result of a concentration study of the good-noise set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub delta: f64,
    pub kappa: f64,
    pub alpha_hat: GridPoint,
    /// Replicates whose noise left the good-noise set.
    pub violations: usize,
    /// Union bound `sum over grid alpha >= alpha_hat of exp(-kappa^2 N(alpha)/2)`.
    pub union_bound: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// Samples `replicates` Gaussian noise draws and counts exits from the
/// good-noise set, next to the per-alpha Gaussian tail union bound.
pub fn concentration_study(
    spectrum: &Spectrum,
    grid: crate::rules::Grid,
    kappa: KappaChoice,
    eta: f64,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if replicates < 1000 {
        return Err(Error::Config(format!(
            "concentration study needs at least 1000 replicates, got {replicates}"
        )));
    }
    let tables = GridTables::new(spectrum, grid);
    let kappa = match kappa {
        KappaChoice::Fixed(k) => k,
        KappaChoice::Auto => kappa_auto(delta, tables.n_eff(0))?,
    };
    let alpha_hat = alpha_hat_statistical(&tables, eta, kappa, delta)?;
    let violations = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let zeta = sample_zeta(spectrum, seed, r);
            Ok(usize::from(
                !in_z_kappa(&tables, &zeta, kappa, alpha_hat)?.member,
            ))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let union_bound = (0..=alpha_hat.index)
        .map(|k| (-kappa * kappa * tables.n_eff(k) / 2.0).exp())
        .sum();
    Ok(ConcentrationReport {
        delta,
        kappa,
        alpha_hat,
        violations,
        union_bound,
        replicates,
        seed,
    })
}
