//! Exponent triple `(n, p, q)`, the pointwise operators and the range condition.
//!
//! The operator is
//!
//! ```text
//! Δ_p^q u = |∇u|^{q-2} (Δu + (p-2) Δ_∞^N u)
//! ```
//!
//! and radial functions reduce to `κ Δ_{q,d}` with `κ = (p-1)/(q-1)` and the
//! fictitious dimension `d = (n-1)(q-1)/(p-1) + 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Spatial dimension and the two exponents of `∂ₜu = Δ_p^q u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    n: usize,
    p: f64,
    q: f64,
}

impl Params {
    pub fn new(n: usize, p: f64, q: f64) -> Result<Self> {
        if n < 1 {
            return Err(LabError::InvalidParams(format!("dimension n = {n} must be >= 1")));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(LabError::InvalidParams(format!("p = {p} must be > 1")));
        }
        if !(q.is_finite() && q > 1.0) {
            return Err(LabError::InvalidParams(format!("q = {q} must be > 1")));
        }
        Ok(Self { n, p, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `κ = (p-1)/(q-1)`.
    pub fn kappa(&self) -> f64 {
        (self.p - 1.0) / (self.q - 1.0)
    }

    /// `d = (n-1)(q-1)/(p-1) + 1`, not rounded.
    pub fn fictitious_dimension(&self) -> f64 {
        (self.n as f64 - 1.0) * (self.q - 1.0) / (self.p - 1.0) + 1.0
    }

    /// Lower end of the admissible `q` interval.
    pub fn range_lower_bound(&self) -> f64 {
        let n = self.n as f64;
        if self.p >= (1.0 + n) / 2.0 {
            1.0
        } else {
            2.0 * (n - self.p) / (n - 1.0)
        }
    }

    /// `true` iff `q` lies strictly inside `(lower, 2)`.
    pub fn range_condition_holds(&self) -> bool {
        self.q < 2.0 && self.q > self.range_lower_bound()
    }

    /// `max(q/(q-1), 2)`: every `r^β` with `β` strictly above it is admissible.
    pub fn admissible_power_threshold(&self) -> f64 {
        (self.q / (self.q - 1.0)).max(2.0)
    }

    pub fn is_admissible_power(&self, beta: f64) -> bool {
        beta > self.admissible_power_threshold()
    }

    /// `F(η, X) = |η|^{q-2} (Tr X + (p-2) ηᵀXη / |η|²)`.
    pub fn operator_f(&self, eta: &DVector<f64>, x: &DMatrix<f64>) -> Result<f64> {
        let dim = eta.len();
        if x.nrows() != dim || x.ncols() != dim {
            return Err(LabError::InvalidParams(format!(
                "gradient has length {dim} but matrix is {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let norm2 = eta.norm_squared();
        if norm2 == 0.0 {
            return Err(LabError::SingularPoint("F(η, X) is undefined at η = 0; use the regularized scheme".into()));
        }
        let trace = x.trace();
        let infinity = eta.dot(&(x * eta)) / norm2;
        Ok(norm2.powf(0.5 * (self.q - 2.0)) * (trace + (self.p - 2.0) * infinity))
    }

    /// `Δ_{q,d} u = |u_r|^{q-2} ((q-1) u_rr + (d-1)/r u_r)` with `d` the fictitious dimension.
    pub fn radial_operator(&self, u_r: f64, u_rr: f64, r: f64) -> Result<f64> {
        radial_q_laplacian(self.q, self.fictitious_dimension(), u_r, u_rr, r)
    }
}

/// `Δ_{q,d}` for an explicit dimension `d`.
pub fn radial_q_laplacian(q: f64, d: f64, u_r: f64, u_rr: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(LabError::SingularPoint(
            "r = 0: use the symmetry rule u_r(0) = 0, (d-1)/r u_r -> (d-1) u_rr".into(),
        ));
    }
    if r < 0.0 || !r.is_finite() {
        return Err(LabError::Domain(format!("radius {r} must be positive")));
    }
    if u_r == 0.0 {
        return Err(LabError::SingularPoint("u_r = 0 in Δ_{q,d}".into()));
    }
    Ok(u_r.abs().powf(q - 2.0) * ((q - 1.0) * u_rr + (d - 1.0) / r * u_r))
}

/// Value, spatial gradient, Hessian and optional time derivative at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub time_derivative: Option<f64>,
}

impl Jet2 {
    /// Builds a jet, symmetrising the Hessian.
    pub fn new(value: f64, gradient: DVector<f64>, hessian: DMatrix<f64>, time_derivative: Option<f64>) -> Self {
        let hessian = 0.5 * (&hessian + hessian.transpose());
        Self { value, gradient, hessian, time_derivative }
    }

    /// Jet of a radial function `x ↦ w(|x - c|)` from its radial derivatives.
    ///
    /// With `e = (x - c)/ρ`: `∇v = e w'` and `D²v = e⊗e w'' + (I - e⊗e) w'/ρ`.
    /// At `ρ = 0` the gradient vanishes and `D²v = w''(0) I`.
    pub fn radial(offset: &DVector<f64>, value: f64, w_r: f64, w_rr: f64, time_derivative: Option<f64>) -> Self {
        let dim = offset.len();
        let rho = offset.norm();
        if rho == 0.0 {
            return Self {
                value,
                gradient: DVector::zeros(dim),
                hessian: DMatrix::identity(dim, dim) * w_rr,
                time_derivative,
            };
        }
        let e = offset / rho;
        let outer = &e * e.transpose();
        let ident = DMatrix::<f64>::identity(dim, dim);
        let hessian = &outer * w_rr + (ident - &outer) * (w_r / rho);
        Self { value, gradient: e * w_r, hessian, time_derivative }
    }

    pub fn apply_operator(&self, params: &Params) -> Result<f64> {
        params.operator_f(&self.gradient, &self.hessian)
    }
}
