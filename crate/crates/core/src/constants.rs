//! Explicit constants from the Harnack proofs and the chain covering.
//!
//! `λ` and `γ̄` overflow `f64` as `q → 2⁻` (`λ_min ≈ 10^{860}` at `q = 1.999`),
//! so each formula that can blow up has a log-space twin and the chain records
//! carry `ln` fields next to the plain ones.

use serde::Serialize;

use crate::closed_forms::ln_lambda_min;
use crate::error::{LabError, Result};
use crate::params::Params;

/// Placeholder for the forward-Harnack constant `μ`; not a derived value.
pub const DEFAULT_MU: f64 = 4.0;
/// Placeholder for the waiting-time constant `c`; not a derived value.
pub const DEFAULT_C: f64 = 0.1;
pub const DEFAULT_SIGMA: f64 = 2.0;

fn check_singular(q: f64) -> Result<()> {
    if !(q > 1.0 && q < 2.0) {
        return Err(LabError::OutOfRange(format!("needs 1 < q < 2, got q = {q}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(LabError::InvalidParams(format!("{name} = {v} must be positive and finite")));
    }
    Ok(())
}

/// `ln(eᵃ + eᵇ)` without overflow.
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `μ̃ = (c/ĉ)^{1/(2-q)}`.
pub fn mu_tilde(c: f64, c_hat: f64, q: f64) -> Result<f64> {
    check_singular(q)?;
    check_positive("c", c)?;
    check_positive("ĉ", c_hat)?;
    if c_hat >= c {
        return Err(LabError::Domain(format!("ĉ = {c_hat} must be smaller than c = {c}")));
    }
    Ok((c / c_hat).powf(1.0 / (2.0 - q)))
}

/// `μ̂ = μ (c/ĉ)^{1/(2-q)}`.
pub fn mu_hat(mu: f64, c: f64, c_hat: f64, q: f64) -> Result<f64> {
    if !(mu > 1.0 && mu.is_finite()) {
        return Err(LabError::InvalidParams(format!("μ = {mu} must exceed 1")));
    }
    Ok(mu * mu_tilde(c, c_hat, q)?)
}

/// `α = (2μ̂)^{(q-2)/q}`, in `(0, 1)` for `μ̂ > 2`.
pub fn alpha(mu_hat: f64, q: f64) -> Result<f64> {
    check_singular(q)?;
    if !(mu_hat > 2.0) {
        return Err(LabError::Domain(format!("μ̂ = {mu_hat} must exceed 2")));
    }
    Ok((2.0 * mu_hat).powf((q - 2.0) / q))
}

/// `ln` of the q-dependent factor `2^{q/(2-q)} (2^{1/(1-q)}(2^{q/(q-1)} - 1))^{q/(q-2)}`.
fn ln_gamma_bar_factor(q: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let inner = ln2 / (1.0 - q) + (q / (q - 1.0) * ln2).exp_m1().ln();
    q / (2.0 - q) * ln2 + q / (q - 2.0) * inner
}

fn gamma_bar_inputs(c: f64, mu: f64, q: f64) -> Result<()> {
    check_singular(q)?;
    check_positive("c", c)?;
    check_positive("μ", mu)
}

/// `ln γ̄` from `ln λ`; finite even when `λ` or `γ̄` overflow.
pub fn ln_gamma_bar(ln_lambda: f64, c: f64, mu: f64, q: f64) -> Result<f64> {
    gamma_bar_inputs(c, mu, q)?;
    if !ln_lambda.is_finite() {
        return Err(LabError::InvalidParams(format!("ln λ = {ln_lambda} must be finite")));
    }
    let ln_first = ln_lambda + c.ln() / (2.0 - q) + ln_gamma_bar_factor(q);
    Ok(log_add_exp(ln_first, mu.ln()))
}

/// `γ̄ = λ c^{1/(2-q)} 2^{q/(2-q)} (2^{1/(1-q)}(2^{q/(q-1)} - 1))^{q/(q-2)} + μ`.
pub fn gamma_bar(lambda: f64, c: f64, mu: f64, q: f64) -> Result<f64> {
    check_positive("λ", lambda)?;
    Ok(ln_gamma_bar(lambda.ln(), c, mu, q)?.exp())
}

/// The condition on `ĉ` in the backward estimate: `2(1 - 2λ ĉ^{1/(2-q)}) > 1`.
pub fn c_hat_admissible(lambda: f64, c_hat: f64, q: f64) -> bool {
    match ln_c_hat_bound(lambda.ln(), q) {
        Ok(ln_bound) => c_hat > 0.0 && c_hat.ln() < ln_bound,
        Err(_) => false,
    }
}

/// `ln` of the supremum `(4λ)^{q-2}` of admissible `ĉ`.
pub fn ln_c_hat_bound(ln_lambda: f64, q: f64) -> Result<f64> {
    check_singular(q)?;
    Ok((q - 2.0) * (4f64.ln() + ln_lambda))
}

pub fn c_hat_bound(lambda: f64, q: f64) -> Result<f64> {
    check_positive("λ", lambda)?;
    Ok(ln_c_hat_bound(lambda.ln(), q)?.exp())
}

/// Geometry of the chain from `x₀` toward `ŷ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainGeometry {
    pub rho: f64,
    pub points: Vec<Vec<f64>>,
    pub k: usize,
}

const MAX_CHAIN: usize = 100_000_000;
const MEMBERSHIP_TOL: f64 = 1e-9;

/// `ρ = rα(σ-1)/13`, `y_k = x₀ + kρ e` and the first `K` with `|ŷ - y_K| < ρ`.
///
/// Distances within a relative `1e-9` of `ρ` count as boundary hits and are outside.
pub fn chain_plan(x0: &[f64], y_hat: &[f64], r: f64, sigma: f64, alpha: f64) -> Result<ChainGeometry> {
    if x0.len() != y_hat.len() || x0.is_empty() {
        return Err(LabError::InvalidParams("x₀ and ŷ must have the same positive dimension".into()));
    }
    check_positive("r", r)?;
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(LabError::InvalidParams(format!("σ = {sigma} must exceed 1")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::InvalidParams(format!("α = {alpha} must lie in (0, 1)")));
    }
    let diff: Vec<f64> = y_hat.iter().zip(x0).map(|(y, x)| y - x).collect();
    let dist = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dist == 0.0 {
        return Err(LabError::Domain("ŷ = x₀ leaves the chain direction undefined".into()));
    }
    if (dist - r).abs() > 1e-9 * r {
        return Err(LabError::InvalidParams(format!("|ŷ - x₀| = {dist} differs from r = {r}")));
    }
    let dir: Vec<f64> = diff.iter().map(|v| v / dist).collect();
    let rho = r * alpha * (sigma - 1.0) / 13.0;
    let point = |k: usize| -> Vec<f64> { x0.iter().zip(&dir).map(|(x, e)| x + k as f64 * rho * e).collect() };
    let inside = |y: &[f64]| {
        let d = y_hat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        d < rho * (1.0 - MEMBERSHIP_TOL)
    };
    let mut points = vec![point(0)];
    while !inside(points.last().expect("non-empty")) {
        if points.len() > MAX_CHAIN {
            return Err(LabError::Domain(format!("chain longer than {MAX_CHAIN} balls")));
        }
        points.push(point(points.len()));
    }
    let k = points.len() - 1;
    Ok(ChainGeometry { rho, points, k })
}

/// `ln c = ln c′ + q ln((σ-1)/σ) + K(2-q) ln γ̄` and `ln γ = (K+1) ln γ̄`.
pub fn ln_chain_constants(c_prime: f64, sigma: f64, q: f64, ln_gamma_bar: f64, k: usize) -> Result<(f64, f64)> {
    check_singular(q)?;
    check_positive("c′", c_prime)?;
    if !(sigma > 1.0 && sigma.is_finite()) {
        return Err(LabError::InvalidParams(format!("σ = {sigma} must exceed 1")));
    }
    if !(ln_gamma_bar >= 0.0 && ln_gamma_bar.is_finite()) {
        return Err(LabError::InvalidParams(format!("γ̄ must be >= 1, got ln γ̄ = {ln_gamma_bar}")));
    }
    let kf = k as f64;
    let ln_c = c_prime.ln() + q * ((sigma - 1.0) / sigma).ln() + kf * (2.0 - q) * ln_gamma_bar;
    Ok((ln_c, (kf + 1.0) * ln_gamma_bar))
}

/// `(c, γ) = (c′((σ-1)/σ)^q γ̄^{K(2-q)}, γ̄^{K+1})`.
pub fn chain_constants(c_prime: f64, sigma: f64, q: f64, gamma_bar: f64, k: usize) -> Result<(f64, f64)> {
    let (ln_c, ln_gamma) = ln_chain_constants(c_prime, sigma, q, gamma_bar.ln(), k)?;
    Ok((ln_c.exp(), ln_gamma.exp()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainPlan {
    pub x0: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub r: f64,
    pub rho: f64,
    pub points: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma_bar: f64,
    pub c_prime: f64,
    pub c: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub ln_gamma_bar: f64,
    pub ln_c: f64,
    pub ln_gamma: f64,
}

impl ChainPlan {
    /// Multiplies `c` by `factor`, keeping the log field in step.
    pub fn scale_c(&mut self, factor: f64) {
        self.ln_c += factor.ln();
        self.c = self.ln_c.exp();
    }
}

/// Checks `(13ρ/α)^q c′ γ̄^{k(2-q)} ≤ (σr)^q c` for `k = 0..=K` in log form.
///
/// `k = K` holds with equality for pipeline plans, so a relative `1e-12` slack absorbs rounding.
pub fn induction_margin_check(plan: &ChainPlan, c_prime: f64, q: f64) -> bool {
    if !(c_prime > 0.0) {
        return false;
    }
    let rhs = q * (plan.sigma * plan.r).ln() + plan.ln_c;
    let base = q * (13.0 * plan.rho / plan.alpha).ln() + c_prime.ln();
    let slack = 1e-12 * rhs.abs().max(1.0);
    (0..=plan.k).all(|k| base + k as f64 * (2.0 - q) * plan.ln_gamma_bar <= rhs + slack)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantLedger {
    pub mu: f64,
    pub c: f64,
    pub c_hat: f64,
    pub mu_tilde: f64,
    pub mu_hat: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub gamma_bar: f64,
    pub ln_lambda: f64,
    pub ln_gamma_bar: f64,
    pub c_hat_admissible: bool,
}

/// Inputs to the constant pipeline. `None` fields take documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantInputs {
    pub mu: f64,
    pub c: f64,
    /// Defaults to `½ min(c, (4λ)^{q-2})`.
    pub c_hat: Option<f64>,
    /// Defaults to `λ_min`.
    pub ln_lambda: Option<f64>,
    /// Defaults to `c`.
    pub c_prime: Option<f64>,
    pub sigma: f64,
}

impl Default for ConstantInputs {
    fn default() -> Self {
        Self { mu: DEFAULT_MU, c: DEFAULT_C, c_hat: None, ln_lambda: None, c_prime: None, sigma: DEFAULT_SIGMA }
    }
}

/// `λ → (μ̃, μ̂, α) → γ̄`.
pub fn constant_ledger(params: &Params, inputs: &ConstantInputs) -> Result<ConstantLedger> {
    let q = params.q();
    check_singular(q)?;
    let ln_lambda = match inputs.ln_lambda {
        Some(v) => v,
        None => ln_lambda_min(params)?,
    };
    let c_hat = match inputs.c_hat {
        Some(v) => v,
        None => 0.5 * inputs.c.min(ln_c_hat_bound(ln_lambda, q)?.exp()),
    };
    let mu_tilde = mu_tilde(inputs.c, c_hat, q)?;
    let mu_hat = mu_hat(inputs.mu, inputs.c, c_hat, q)?;
    let alpha = alpha(mu_hat, q)?;
    let ln_gamma_bar = ln_gamma_bar(ln_lambda, inputs.c, inputs.mu, q)?;
    Ok(ConstantLedger {
        mu: inputs.mu,
        c: inputs.c,
        c_hat,
        mu_tilde,
        mu_hat,
        alpha,
        lambda: ln_lambda.exp(),
        gamma_bar: ln_gamma_bar.exp(),
        ln_lambda,
        ln_gamma_bar,
        c_hat_admissible: c_hat > 0.0 && c_hat.ln() < ln_c_hat_bound(ln_lambda, q)?,
    })
}

/// Full dependency order `λ → γ̄ → (ρ, K) → (c, γ)` for the chain from `x₀` to `ŷ`.
pub fn chain_pipeline(
    params: &Params,
    inputs: &ConstantInputs,
    x0: &[f64],
    y_hat: &[f64],
) -> Result<(ConstantLedger, ChainPlan)> {
    let ledger = constant_ledger(params, inputs)?;
    let r = y_hat.iter().zip(x0).map(|(y, x)| (y - x) * (y - x)).sum::<f64>().sqrt();
    let geometry = chain_plan(x0, y_hat, r, inputs.sigma, ledger.alpha)?;
    let c_prime = inputs.c_prime.unwrap_or(inputs.c);
    let q = params.q();
    let (ln_c, ln_gamma) = ln_chain_constants(c_prime, inputs.sigma, q, ledger.ln_gamma_bar, geometry.k)?;
    let plan = ChainPlan {
        x0: x0.to_vec(),
        y_hat: y_hat.to_vec(),
        r,
        rho: geometry.rho,
        points: geometry.points,
        k: geometry.k,
        gamma_bar: ledger.gamma_bar,
        c_prime,
        c: ln_c.exp(),
        gamma: ln_gamma.exp(),
        sigma: inputs.sigma,
        alpha: ledger.alpha,
        ln_gamma_bar: ledger.ln_gamma_bar,
        ln_c,
        ln_gamma,
    };
    Ok((ledger, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::lambda_min;

    #[test]
    fn mu_hat_examples() {
        assert_rel!(mu_hat(3.0, 0.2, 0.05, 1.5).unwrap(), 48.0, 1e-14);
        assert_rel!(mu_hat(3.0, 0.2, 0.2 * (1.0 - 1e-12), 1.5).unwrap(), 3.0, 1e-10);
        assert!(matches!(mu_hat(3.0, 0.2, 0.2, 1.5), Err(LabError::Domain(_))));
        let a = mu_hat(3.0, 0.2, 0.05, 1.7).unwrap();
        let b = mu_hat(3.0, 0.2, 0.06, 1.7).unwrap();
        assert!(a > b);
    }

    #[test]
    fn alpha_examples() {
        let a = alpha(8.0, 1.5).unwrap();
        assert_rel!(a, 0.396_850_262_992_049_9, 1e-14);
        assert_rel!(a.powi(3) * 16.0, 1.0, 1e-14);
        assert!(alpha(8.0, 2.0 - 1e-9).unwrap() > 1.0 - 1e-8);
        assert!(matches!(alpha(2.0, 1.5), Err(LabError::Domain(_))));
    }

    #[test]
    fn gamma_bar_example() {
        // 8 / 1.75³ + 1
        assert_eq!(1.75f64.powi(3), 5.359375);
        assert_rel!(gamma_bar(1.0, 1.0, 1.0, 1.5).unwrap(), 8.0 / 5.359375 + 1.0, 1e-14);
        let g = gamma_bar(1.0, 1.0, 1.0, 1.5).unwrap();
        assert!(gamma_bar(1.1, 1.0, 1.0, 1.5).unwrap() > g);
        assert!(gamma_bar(1.0, 1.1, 1.0, 1.5).unwrap() > g);
        assert!(gamma_bar(1.0, 1.0, 1.1, 1.5).unwrap() > g);
    }

    #[test]
    fn gamma_bar_grows_toward_two() {
        let ln: Vec<f64> = [1.9, 1.99, 1.999]
            .iter()
            .map(|&q| {
                let p = Params::new(2, 2.0, q).unwrap();
                ln_gamma_bar(ln_lambda_min(&p).unwrap(), DEFAULT_C, DEFAULT_MU, q).unwrap()
            })
            .collect();
        assert!(ln[0] < ln[1] && ln[1] < ln[2], "{ln:?}");
        assert!(lambda_min(&Params::new(2, 2.0, 1.999).unwrap()).unwrap().is_infinite());
    }

    #[test]
    fn c_hat_predicate() {
        let q = 1.5;
        let lam = 4556.25;
        let bound = c_hat_bound(lam, q).unwrap();
        assert_rel!(bound, (4.0f64 * lam).powf(q - 2.0), 1e-13);
        assert!(c_hat_admissible(lam, 0.99 * bound, q));
        assert!(!c_hat_admissible(lam, 1.01 * bound, q));
        // direct form of the predicate
        let c_hat = 0.5 * bound;
        assert!(2.0 * (1.0 - 2.0 * lam * c_hat.powf(1.0 / (2.0 - q))) > 1.0);
    }

    #[test]
    fn chain_examples() {
        let g = chain_plan(&[0.0, 0.0], &[13.0, 0.0], 13.0, 3.0, 0.5).unwrap();
        assert_eq!((g.rho, g.k), (1.0, 13));
        let g = chain_plan(&[0.0], &[1.0], 1.0, 2.0, 0.65).unwrap();
        assert_rel!(g.rho, 0.05, 1e-15);
        assert_eq!(g.k, 20);
        assert_eq!(g.points.len(), 21);
        let g = chain_plan(&[0.0], &[1.0], 1.0, 30.0, 0.9).unwrap();
        assert_eq!(g.k, 0);
        assert!(matches!(chain_plan(&[1.0], &[1.0], 1.0, 2.0, 0.5), Err(LabError::Domain(_))));
        assert!(chain_plan(&[0.0], &[2.0], 1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn chain_is_scale_free() {
        for &(sigma, alpha) in &[(2.0, 0.65), (3.0, 0.5), (1.3, 0.27), (5.0, 0.11)] {
            let k = chain_plan(&[0.0], &[1.0], 1.0, sigma, alpha).unwrap().k;
            for &s in &[0.01, 7.0, 1234.5] {
                assert_eq!(chain_plan(&[0.0], &[s], s, sigma, alpha).unwrap().k, k);
            }
        }
    }

    #[test]
    fn chain_constant_examples() {
        let (c, gamma) = chain_constants(1.0, 2.0, 1.5, 2.0, 2).unwrap();
        assert_rel!(c, 0.5f64.powf(1.5) * 2.0, 1e-14);
        assert_rel!(c, 0.707_106_781_186_547_5, 1e-14);
        assert_rel!(gamma, 8.0, 1e-14);
        let (c0, g0) = chain_constants(0.3, 2.5, 1.7, 3.0, 0).unwrap();
        assert_rel!(c0, 0.3 * 0.6f64.powf(1.7), 1e-14);
        assert_rel!(g0, 3.0, 1e-14);
    }

    #[test]
    fn pipeline_plan_passes_margin_check_and_halving_fails() {
        let params = Params::new(2, 2.0, 1.5).unwrap();
        let inputs = ConstantInputs::default();
        let (ledger, mut plan) = chain_pipeline(&params, &inputs, &[0.0, 0.0], &[0.6, 0.8]).unwrap();
        assert!(ledger.c_hat_admissible);
        assert_rel!(ledger.lambda, 4556.25, 1e-12);
        assert_rel!(ledger.mu_hat, ledger.mu * ledger.mu_tilde, 1e-14);
        assert!(induction_margin_check(&plan, plan.c_prime, 1.5));
        plan.scale_c(0.5);
        assert!(!induction_margin_check(&plan, plan.c_prime, 1.5));
    }

    #[test]
    fn zero_length_chain_is_tight() {
        let ln_gb = 2f64.ln();
        let (ln_c, ln_gamma) = ln_chain_constants(1.0, 2.0, 1.5, ln_gb, 0).unwrap();
        let plan = ChainPlan {
            x0: vec![0.0],
            y_hat: vec![1.0],
            r: 1.0,
            rho: 1.0 * 0.5 * 1.0 / 13.0,
            points: vec![vec![0.0]],
            k: 0,
            gamma_bar: 2.0,
            c_prime: 1.0,
            c: ln_c.exp(),
            gamma: ln_gamma.exp(),
            sigma: 2.0,
            alpha: 0.5,
            ln_gamma_bar: ln_gb,
            ln_c,
            ln_gamma,
        };
        assert!(induction_margin_check(&plan, 1.0, 1.5));
        let mut halved = plan.clone();
        halved.scale_c(0.5);
        assert!(!induction_margin_check(&halved, 1.0, 1.5));
    }
}
