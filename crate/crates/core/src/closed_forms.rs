//! Explicit solutions: the barrier with infinite lateral values and its
//! mirrored subsolution, and the critical-exponent counterexample.
//!
//! The barrier on `B_R(c) × (t₀, ∞)` is
//!
//! ```text
//! v(x, t) = s · λ τ^{1/(2-q)} (1 - z^{q/(q-1)})^{q/(q-2)} + m,
//!     z = |x - c| / R,   τ = (t - t₀) / R^q,
//! ```
//!
//! with `s = +1` for the supersolution and `s = -1` for the subsolution mirror.
//! All derivatives are evaluated in closed form.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::params::{radial_q_laplacian, Jet2, Params};

fn check_singular_range(params: &Params) -> Result<()> {
    let q = params.q();
    if !(q > 1.0 && q < 2.0) {
        return Err(LabError::OutOfRange(format!("the infinite-boundary barrier needs 1 < q < 2, got q = {q}")));
    }
    Ok(())
}

/// Sum of the three coefficient magnitudes bounding `(p-1)w'' + (n-1)/r w'`.
pub fn blow_up_constant(params: &Params) -> Result<f64> {
    check_singular_range(params)?;
    let (n, p, q) = (params.n() as f64, params.p(), params.q());
    let qm1 = q - 1.0;
    let tmq = 2.0 - q;
    Ok(q * q * (p - 1.0) / (qm1 * qm1 * tmq)
        + 2.0 * q.powi(3) * (p - 1.0) / (qm1 * qm1 * tmq * tmq)
        + q * q * (n - 1.0) / (qm1 * tmq))
}

/// `ln λ_min` with `λ_min = ((2-q) C)^{1/(2-q)}`; stays finite where `λ_min` overflows.
pub fn ln_lambda_min(params: &Params) -> Result<f64> {
    let c = blow_up_constant(params)?;
    let tmq = 2.0 - params.q();
    Ok((tmq * c).ln() / tmq)
}

/// Smallest `λ` with `λ^{2-q}/(2-q) ≥ C(n,p,q)`. May be `+∞` as `q → 2⁻`.
pub fn lambda_min(params: &Params) -> Result<f64> {
    Ok(ln_lambda_min(params)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `+λ(...)`: supersolution blowing up to `+∞` at the lateral boundary.
    Super,
    /// `-λ(...)`: subsolution mirror tending to `-∞`.
    Sub,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Super => 1.0,
            Orientation::Sub => -1.0,
        }
    }
}

/// Radial derivatives of a closed form at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub u_r: f64,
    pub u_rr: f64,
    pub u_t: f64,
}

/// Barrier record: exponents, `λ`, radius, center, bottom time, orientation and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct SupersolutionParams {
    pub params: Params,
    pub lambda: f64,
    pub radius: f64,
    pub center: DVector<f64>,
    pub t_origin: f64,
    pub orientation: Orientation,
    pub shift: f64,
}

impl SupersolutionParams {
    /// Supersolution centred at `center` with zero shift.
    pub fn new(params: Params, lambda: f64, radius: f64, center: DVector<f64>, t_origin: f64) -> Result<Self> {
        check_singular_range(&params)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(LabError::InvalidParams(format!("λ = {lambda} must be finite and >= 0")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidParams(format!("radius {radius} must be positive")));
        }
        if center.len() != params.n() {
            return Err(LabError::InvalidParams(format!(
                "center has {} coordinates, expected n = {}",
                center.len(),
                params.n()
            )));
        }
        Ok(Self { params, lambda, radius, center, t_origin, orientation: Orientation::Super, shift: 0.0 })
    }

    /// Barrier with `λ = λ_min` on the unit ball at the origin.
    pub fn unit(params: Params) -> Result<Self> {
        let n = params.n();
        Self::new(params, lambda_min(&params)?, 1.0, DVector::zeros(n), 0.0)
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Subsolution mirror `-λ(...) + m`.
    pub fn mirrored(self, m: f64) -> Self {
        self.with_orientation(Orientation::Sub).with_shift(m)
    }

    /// Whether `λ ≥ λ_min`, the regime in which the one-sided inequality is guaranteed.
    pub fn is_guaranteed(&self) -> bool {
        match ln_lambda_min(&self.params) {
            Ok(ln_min) => self.lambda > 0.0 && self.lambda.ln() >= ln_min,
            Err(_) => false,
        }
    }

    fn exponents(&self) -> (f64, f64, f64) {
        let q = self.params.q();
        (q / (q - 1.0), q / (q - 2.0), 1.0 / (2.0 - q))
    }

    /// Value and radial/time derivatives at distance `rho` from the centre.
    pub fn radial_jet(&self, rho: f64, t: f64) -> Result<RadialJet> {
        if !(rho >= 0.0) || rho >= self.radius {
            return Err(LabError::Domain(format!("distance {rho} outside the open ball of radius {}", self.radius)));
        }
        let s = t - self.t_origin;
        if s < 0.0 {
            return Err(LabError::Domain(format!("t = {t} precedes the barrier origin {}", self.t_origin)));
        }
        let sign = self.orientation.sign();
        if s == 0.0 || self.lambda == 0.0 {
            return Ok(RadialJet { value: self.shift, u_r: 0.0, u_rr: 0.0, u_t: 0.0 });
        }
        let q = self.params.q();
        let (a, b, e) = self.exponents();
        let big_r = self.radius;
        let z = rho / big_r;
        let tau = s / big_r.powf(q);
        let lam = self.lambda;
        let base = 1.0 - z.powf(a);
        let time = tau.powf(e);
        let w = lam * time * base.powf(b);
        let w_t = lam * e * tau.powf(e - 1.0) * base.powf(b) / big_r.powf(q);
        let ab = a * b;
        let w_z = -lam * ab * time * z.powf(a - 1.0) * base.powf(b - 1.0);
        let w_zz = -lam
            * ab
            * time
            * ((a - 1.0) * z.powf(a - 2.0) * base.powf(b - 1.0)
                - (b - 1.0) * a * z.powf(2.0 * a - 2.0) * base.powf(b - 2.0));
        Ok(RadialJet {
            value: sign * w + self.shift,
            u_r: sign * w_z / big_r,
            u_rr: sign * w_zz / (big_r * big_r),
            u_t: sign * w_t,
        })
    }

    pub fn value_at_radius(&self, rho: f64, t: f64) -> Result<f64> {
        Ok(self.radial_jet(rho, t)?.value)
    }

    /// Full jet at `x`; at the centre the gradient vanishes and `D²v = v_rr(0) I`.
    pub fn eval(&self, x: &DVector<f64>, t: f64) -> Result<Jet2> {
        if x.len() != self.center.len() {
            return Err(LabError::InvalidParams(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.center.len()
            )));
        }
        let offset = x - &self.center;
        let j = self.radial_jet(offset.norm(), t)?;
        Ok(Jet2::radial(&offset, j.value, j.u_r, j.u_rr, Some(j.u_t)))
    }

    pub fn value(&self, x: &DVector<f64>, t: f64) -> Result<f64> {
        Ok(self.eval(x, t)?.value)
    }

    /// `∂ₜv - |v_r|^{q-2}((p-1)v_rr + (n-1)/r v_r)` at radius `r ∈ (0, R)`, `t > t₀`.
    pub fn residual(&self, r: f64, t: f64) -> Result<f64> {
        if !(r > 0.0 && r < self.radius) {
            return Err(LabError::Domain(format!("r = {r} outside (0, {})", self.radius)));
        }
        if !(t > self.t_origin) {
            return Err(LabError::Domain(format!("t = {t} must exceed the origin {}", self.t_origin)));
        }
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        let j = self.radial_jet(r, t)?;
        let (n, p, q) = (self.params.n() as f64, self.params.p(), self.params.q());
        let spatial = j.u_r.abs().powf(q - 2.0) * ((p - 1.0) * j.u_rr + (n - 1.0) / r * j.u_r);
        Ok(j.u_t - spatial)
    }
}

/// Dimension `2q/(2-q)` in which the barrier profile solves the equation exactly.
///
/// For `g = (1-z^a)^b` one has `Δ_{q,d} g = (-ab)^{q-1} g (d - (d + 2q/(q-2)) z^a)`,
/// so the `z^a` term drops out exactly at this dimension.
pub fn self_similar_dimension(q: f64) -> f64 {
    2.0 * q / (2.0 - q)
}

/// `p` making the fictitious dimension equal [`self_similar_dimension`].
pub fn self_similar_p(n: usize, q: f64) -> Result<f64> {
    if n < 2 || !(q > 1.0 && q < 2.0) {
        return Err(LabError::InvalidParams(format!("need n >= 2 and 1 < q < 2, got n = {n}, q = {q}")));
    }
    Ok(1.0 + (n as f64 - 1.0) * (q - 1.0) / (self_similar_dimension(q) - 1.0))
}

/// `λ` at which the barrier is an exact solution, `(β / (κ d (-ab)^{q-1}))^{1/(q-2)}`
/// with `β = 1/(2-q)`; only defined when `d = 2q/(2-q)`.
pub fn self_similar_lambda(params: &Params) -> Result<f64> {
    check_singular_range(params)?;
    let q = params.q();
    let d = params.fictitious_dimension();
    let target = self_similar_dimension(q);
    if (d - target).abs() > 1e-9 * target {
        return Err(LabError::InvalidParams(format!("fictitious dimension {d} differs from 2q/(2-q) = {target}")));
    }
    let ab = -(q / (q - 1.0)) * (q / (q - 2.0));
    let beta = 1.0 / (2.0 - q);
    Ok((beta / (params.kappa() * target * ab.powf(q - 1.0))).powf(1.0 / (q - 2.0)))
}

/// Critical-exponent counterexample `u(r,t) = (|r|^{2d/(d-1)} + e^{κbt})^{-(d-1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    pub params: Params,
    pub d: f64,
    pub kappa: f64,
    pub b: f64,
}

/// `q = 2(n-p)/(n-1)`, the lower end of the range condition for `p < (1+n)/2`.
pub fn critical_q(n: usize, p: f64) -> Result<f64> {
    let nf = n as f64;
    if n < 2 || !(p > 1.0 && p < (1.0 + nf) / 2.0) {
        return Err(LabError::InvalidParams(format!(
            "critical exponent needs n >= 2 and 1 < p < (1+n)/2, got n = {n}, p = {p}"
        )));
    }
    Ok(2.0 * (nf - p) / (nf - 1.0))
}

fn check_critical(params: &Params) -> Result<()> {
    let q_crit = critical_q(params.n(), params.p())?;
    if (params.q() - q_crit).abs() > 1e-12 {
        return Err(LabError::InvalidParams(format!("q = {} is not the critical exponent {q_crit}", params.q())));
    }
    let d = params.fictitious_dimension();
    if !(d > 1.0) {
        return Err(LabError::InvalidParams(format!("fictitious dimension {d} must exceed 1")));
    }
    Ok(())
}

/// Spatial derivatives of the profile for a fixed value of `E = e^{κbt}`.
fn profile_jet(d: f64, r: f64, e: f64) -> (f64, f64, f64) {
    let m = 2.0 * d / (d - 1.0);
    let k = 0.5 * (d - 1.0);
    let rr = r.abs();
    let g = rr.powf(m) + e;
    let u = g.powf(-k);
    let u_r = -k * m * rr.powf(m - 1.0) * g.powf(-k - 1.0);
    let u_rr = -k
        * m
        * ((m - 1.0) * rr.powf(m - 2.0) * g.powf(-k - 1.0) - (k + 1.0) * m * rr.powf(2.0 * m - 2.0) * g.powf(-k - 2.0));
    (u, u_r, u_rr)
}

const B_SAMPLE_RADII: [f64; 5] = [0.3, 0.7, 1.0, 1.6, 2.5];
const B_SAMPLE_E: [f64; 3] = [0.5, 1.0, 2.0];

/// Rate constant `b` making the counterexample an exact solution of `∂ₜu = κΔ_{q,d}u`.
///
/// For each sample `(r, E)` the condition is linear in `b`:
/// `∂ₜu = -κ b k E g^{-k-1}` must equal `κ Δ_{q,d} u`, evaluated through
/// [`Params::radial_operator`]. All samples must agree to `1e-10`.
pub fn counterexample_b(params: &Params) -> Result<f64> {
    check_agreement(&counterexample_b_samples(params)?, 1e-10)
}

/// The per-sample solutions for `b` at 5 radii times 3 values of `E`.
pub fn counterexample_b_samples(params: &Params) -> Result<Vec<f64>> {
    check_critical(params)?;
    let d = params.fictitious_dimension();
    let k = 0.5 * (d - 1.0);
    let m = 2.0 * d / (d - 1.0);
    let mut samples = Vec::with_capacity(B_SAMPLE_RADII.len() * B_SAMPLE_E.len());
    for &r in &B_SAMPLE_RADII {
        for &e in &B_SAMPLE_E {
            let (_, u_r, u_rr) = profile_jet(d, r, e);
            let lap = params.radial_operator(u_r, u_rr, r)?;
            let g = r.powf(m) + e;
            samples.push(-lap * g.powf(k + 1.0) / (k * e));
        }
    }
    Ok(samples)
}

fn check_agreement(samples: &[f64], tol: f64) -> Result<f64> {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let spread = samples.iter().map(|b| (b - mean).abs()).fold(0.0, f64::max);
    if !(spread <= tol * mean.abs()) {
        return Err(LabError::Consistency(format!("rate constant samples disagree: spread {spread:e} around {mean}")));
    }
    Ok(mean)
}

impl CounterexampleParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        let q = critical_q(n, p)?;
        Self::from_params(Params::new(n, p, q)?)
    }

    pub fn from_params(params: Params) -> Result<Self> {
        let b = counterexample_b(&params)?;
        Ok(Self { params, d: params.fictitious_dimension(), kappa: params.kappa(), b })
    }

    fn growth(&self, t: f64) -> f64 {
        (self.kappa * self.b * t).exp()
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        profile_jet(self.d, r, self.growth(t)).0
    }

    /// Value and radial/time derivatives; `r` is taken as `|r|`.
    pub fn radial_jet(&self, r: f64, t: f64) -> RadialJet {
        let e = self.growth(t);
        let (u, u_r, u_rr) = profile_jet(self.d, r, e);
        let k = 0.5 * (self.d - 1.0);
        let m = 2.0 * self.d / (self.d - 1.0);
        let g = r.abs().powf(m) + e;
        let u_t = -k * g.powf(-k - 1.0) * self.kappa * self.b * e;
        RadialJet { value: u, u_r, u_rr, u_t }
    }

    /// `∂ₜu - κΔ_{q,d}u` at `r > 0`.
    pub fn residual(&self, r: f64, t: f64) -> Result<f64> {
        let j = self.radial_jet(r, t);
        let lap = radial_q_laplacian(self.params.q(), self.d, j.u_r, j.u_rr, r)?;
        Ok(j.u_t - self.kappa * lap)
    }

    /// `u(0,t)/u(1,t) = (1 + e^{-κbt})^{(d-1)/2}`.
    pub fn ratio(&self, t: f64) -> f64 {
        (0.5 * (self.d - 1.0) * (-self.kappa * self.b * t).exp().ln_1p()).exp()
    }

    /// `max(ratio, 1/ratio)`.
    pub fn two_sided_ratio(&self, t: f64) -> f64 {
        let r = self.ratio(t);
        r.max(1.0 / r)
    }
}
