//! Explicit finite-difference solvers.
//!
//! Two grids share one state type:
//!
//! - planar: the square `[-L, L]²` with `(M+1)²` nodes, discretising
//!   `∂ₜu = (|∇u|²+ε²)^{(q-2)/2} (Δu + (p-2) ⟨D²u ∇u, ∇u⟩ / (|∇u|²+ε²))`
//!   with centred differences;
//! - radial: `r_i = i h` on `[0, R]`, discretising `∂ₜu = κ Δ_{q,d} u` for a
//!   (possibly non-integer) dimension `d`.
//!
//! The default radial stencil is the finite-volume form of
//! `κ r^{1-d} (r^{d-1} φ(u_r))_r` with `φ(s) = (s²+ε²)^{(q-2)/2} s`, which is
//! the same operator as `κ|u_r|^{q-2}((q-1)u_rr + (d-1)/r u_r)` at `ε = 0` and
//! is monotone under the step bound. The pointwise centred form is kept as
//! [`RadialStencil::Centered`].
//!
//! Every stencil reads values only through differences, so adding a constant
//! to the data and the boundary values commutes with a step.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_forms::{CounterexampleParams, SupersolutionParams};
use crate::error::{LabError, Result};
use crate::params::Params;

pub const DEFAULT_SAFETY: f64 = 0.9;
/// Default regularisation relative to the data range.
pub const DEFAULT_EPSILON_FACTOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialStencil {
    Conservative,
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    Radial { d_eff: f64, stencil: RadialStencil },
    Planar,
}

/// Physical location of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodePosition {
    Radial(f64),
    Planar(f64, f64),
}

impl NodePosition {
    /// Distance from the origin.
    pub fn norm(&self) -> f64 {
        match *self {
            NodePosition::Radial(r) => r.abs(),
            NodePosition::Planar(x, y) => x.hypot(y),
        }
    }
}

/// Discrete field with its grid geometry, time and regularisation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    kind: GridKind,
    params: Params,
    values: Vec<f64>,
    intervals: usize,
    h: f64,
    domain_radius: f64,
    time: f64,
    epsilon: f64,
}

fn default_epsilon(values: &[f64]) -> f64 {
    let (lo, hi) = min_max(values);
    let range = hi - lo;
    if range > 0.0 {
        DEFAULT_EPSILON_FACTOR * range
    } else {
        DEFAULT_EPSILON_FACTOR
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

impl GridState {
    /// Radial grid on `[0, radius]` with `intervals` cells and `d_eff` the fictitious dimension.
    pub fn radial_from_fn(
        params: Params,
        intervals: usize,
        radius: f64,
        time: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if intervals < 2 {
            return Err(LabError::InvalidParams("radial grid needs at least 2 intervals".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidParams(format!("domain radius {radius} must be positive")));
        }
        let h = radius / intervals as f64;
        let values: Vec<f64> = (0..=intervals).map(|i| f(i as f64 * h)).collect();
        Self::assemble(
            GridKind::Radial { d_eff: params.fictitious_dimension(), stencil: RadialStencil::Conservative },
            params,
            values,
            intervals,
            h,
            radius,
            time,
        )
    }

    /// Planar grid on `[-half_width, half_width]²`; `intervals` must be even so the origin is a node.
    pub fn planar_from_fn(
        params: Params,
        intervals: usize,
        half_width: f64,
        time: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if params.n() != 2 {
            return Err(LabError::InvalidParams(format!("planar solver is two-dimensional, got n = {}", params.n())));
        }
        if intervals < 2 || !intervals.is_multiple_of(2) {
            return Err(LabError::InvalidParams(format!(
                "planar grid needs an even number of intervals >= 2, got {intervals}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(LabError::InvalidParams(format!("half width {half_width} must be positive")));
        }
        let h = 2.0 * half_width / intervals as f64;
        let side = intervals + 1;
        let mut values = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                values.push(f(coordinate(i, intervals, h), coordinate(j, intervals, h)));
            }
        }
        Self::assemble(GridKind::Planar, params, values, intervals, h, half_width, time)
    }

    fn assemble(
        kind: GridKind,
        params: Params,
        values: Vec<f64>,
        intervals: usize,
        h: f64,
        domain_radius: f64,
        time: f64,
    ) -> Result<Self> {
        check_finite(&values)?;
        let epsilon = default_epsilon(&values);
        Ok(Self { kind, params, values, intervals, h, domain_radius, time, epsilon })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LabError::InvalidParams(format!("ε = {epsilon} must be positive")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Overrides the radial dimension (defaults to the fictitious dimension of the params).
    pub fn with_d_eff(mut self, d: f64) -> Result<Self> {
        match &mut self.kind {
            GridKind::Radial { d_eff, .. } => {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(LabError::InvalidParams(format!("d_eff = {d} must be positive")));
                }
                *d_eff = d;
                Ok(self)
            }
            GridKind::Planar => Err(LabError::InvalidParams("d_eff applies to radial grids".into())),
        }
    }

    pub fn with_stencil(mut self, s: RadialStencil) -> Result<Self> {
        match &mut self.kind {
            GridKind::Radial { stencil, .. } => {
                *stencil = s;
                Ok(self)
            }
            GridKind::Planar => Err(LabError::InvalidParams("stencil applies to radial grids".into())),
        }
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Same geometry with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(LabError::InvalidParams(format!(
                "expected {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { values, ..self.clone() })
    }

    /// Adds `c` to every node value.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v + c).collect())
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, GridKind::Radial { .. })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spatial dimension of the grid itself (1 or 2).
    pub fn grid_dimension(&self) -> usize {
        match self.kind {
            GridKind::Radial { .. } => 1,
            GridKind::Planar => 2,
        }
    }

    pub fn d_eff(&self) -> Option<f64> {
        match self.kind {
            GridKind::Radial { d_eff, .. } => Some(d_eff),
            GridKind::Planar => None,
        }
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = min_max(&self.values);
        hi - lo
    }

    pub fn min(&self) -> f64 {
        min_max(&self.values).0
    }

    pub fn max(&self) -> f64 {
        min_max(&self.values).1
    }

    fn side(&self) -> usize {
        self.intervals + 1
    }

    pub fn position(&self, node: usize) -> NodePosition {
        match self.kind {
            GridKind::Radial { .. } => NodePosition::Radial(node as f64 * self.h),
            GridKind::Planar => {
                let (i, j) = (node % self.side(), node / self.side());
                NodePosition::Planar(coordinate(i, self.intervals, self.h), coordinate(j, self.intervals, self.h))
            }
        }
    }

    /// Index of node `(i, j)` on the planar grid.
    pub fn planar_index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    /// Boundary nodes carry Dirichlet data; `r = 0` is interior on radial grids.
    pub fn is_boundary(&self, node: usize) -> bool {
        match self.kind {
            GridKind::Radial { .. } => node == self.intervals,
            GridKind::Planar => {
                let (i, j) = (node % self.side(), node / self.side());
                i == 0 || j == 0 || i == self.intervals || j == self.intervals
            }
        }
    }

    fn check_interior(&self, node: usize) -> Result<()> {
        if node >= self.values.len() {
            return Err(LabError::Domain(format!("node {node} out of range")));
        }
        if self.is_boundary(node) {
            return Err(LabError::Domain(format!("node {node} is a boundary node")));
        }
        Ok(())
    }

    /// Regularised operator at an interior node.
    pub fn regularized_operator(&self, node: usize) -> Result<f64> {
        self.check_interior(node)?;
        Ok(self.operator_at(node))
    }

    fn operator_at(&self, node: usize) -> f64 {
        match self.kind {
            GridKind::Radial { d_eff, stencil } => match stencil {
                RadialStencil::Conservative => self.radial_conservative(node, d_eff),
                RadialStencil::Centered => self.radial_centered(node, d_eff),
            },
            GridKind::Planar => self.planar(node),
        }
    }

    fn weight(&self, slope: f64) -> f64 {
        (slope * slope + self.epsilon * self.epsilon).powf(0.5 * (self.params.q() - 2.0))
    }

    fn flux(&self, slope: f64) -> f64 {
        self.weight(slope) * slope
    }

    /// Face areas over cell volume, times `h`: `(a₊, a₋)` with `L = κ (a₊ φ₊ - a₋ φ₋) / h`.
    fn radial_face_weights(node: usize, d: f64) -> (f64, f64) {
        if node == 0 {
            return (2.0 * d, 0.0);
        }
        let i = node as f64;
        let outer = i + 0.5;
        let inner = i - 0.5;
        let vol = outer.powf(d) - inner.powf(d);
        (d * outer.powf(d - 1.0) / vol, d * inner.powf(d - 1.0) / vol)
    }

    fn radial_conservative(&self, node: usize, d: f64) -> f64 {
        let u = &self.values;
        let h = self.h;
        let kappa = self.params.kappa();
        let (w_out, w_in) = Self::radial_face_weights(node, d);
        let outer = self.flux((u[node + 1] - u[node]) / h);
        if node == 0 {
            return kappa * w_out * outer / h;
        }
        let inner = self.flux((u[node] - u[node - 1]) / h);
        kappa * (w_out * outer - w_in * inner) / h
    }

    fn radial_centered(&self, node: usize, d: f64) -> f64 {
        let u = &self.values;
        let h = self.h;
        let q = self.params.q();
        let kappa = self.params.kappa();
        if node == 0 {
            // reflected ghost u_{-1} = u_1: u_r = 0 and (d-1)/r u_r -> (d-1) u_rr
            let u_rr = 2.0 * (u[1] - u[0]) / (h * h);
            return kappa * self.weight(0.0) * (q - 1.0 + d - 1.0) * u_rr;
        }
        let fwd = u[node + 1] - u[node];
        let bwd = u[node] - u[node - 1];
        let u_r = (fwd + bwd) / (2.0 * h);
        let u_rr = (fwd - bwd) / (h * h);
        let r = node as f64 * h;
        kappa * self.weight(u_r) * ((q - 1.0) * u_rr + (d - 1.0) / r * u_r)
    }

    fn planar(&self, node: usize) -> f64 {
        let u = &self.values;
        let s = self.side();
        let h = self.h;
        let c = u[node];
        let e = u[node + 1];
        let w = u[node - 1];
        let n = u[node + s];
        let so = u[node - s];
        let gx = (e - w) / (2.0 * h);
        let gy = (n - so) / (2.0 * h);
        let uxx = ((e - c) + (w - c)) / (h * h);
        let uyy = ((n - c) + (so - c)) / (h * h);
        let uxy = ((u[node + s + 1] - u[node + s - 1]) - (u[node - s + 1] - u[node - s - 1])) / (4.0 * h * h);
        let eps2 = self.epsilon * self.epsilon;
        let g2 = (gx * gx + gy * gy) + eps2;
        let a = g2.powf(0.5 * (self.params.q() - 2.0));
        let lap = uxx + uyy;
        let infinity = ((uxx * gx * gx + uyy * gy * gy) + 2.0 * uxy * gx * gy) / g2;
        a * (lap + (self.params.p() - 2.0) * infinity)
    }

    /// Largest diagonal coefficient `|∂L_i/∂u_i|` bound over the grid.
    ///
    /// With `a = (s²+ε²)^{(q-2)/2}` the bounds are `κ max(1, q-1) (a₊ a(s₊) + a₋ a(s₋)) / h²`
    /// (conservative radial), `2κ(q-1+max(d-1,0)) a / h²` (centred radial) and
    /// `4 (1+|p-2|) a / h²` (planar).
    fn max_diagonal(&self, weight_cap: Option<f64>) -> f64 {
        let q = self.params.q();
        let p = self.params.p();
        let kappa = self.params.kappa();
        let h2 = self.h * self.h;
        let w = |slope: f64| weight_cap.unwrap_or_else(|| self.weight(slope));
        let nodes = (0..self.values.len()).filter(|&i| !self.is_boundary(i));
        let u = &self.values;
        let h = self.h;
        match self.kind {
            GridKind::Radial { d_eff, stencil } => match stencil {
                RadialStencil::Conservative => nodes
                    .map(|i| {
                        let (w_out, w_in) = Self::radial_face_weights(i, d_eff);
                        let a_out = w((u[i + 1] - u[i]) / h);
                        let a_in = if i == 0 { 0.0 } else { w((u[i] - u[i - 1]) / h) };
                        kappa * (q - 1.0).max(1.0) * (w_out * a_out + w_in * a_in) / h2
                    })
                    .fold(0.0, f64::max),
                RadialStencil::Centered => nodes
                    .map(|i| {
                        let slope = if i == 0 { 0.0 } else { (u[i + 1] - u[i - 1]) / (2.0 * h) };
                        2.0 * kappa * (q - 1.0 + (d_eff - 1.0).max(0.0)) * w(slope) / h2
                    })
                    .fold(0.0, f64::max),
            },
            GridKind::Planar => {
                let s = self.side();
                nodes
                    .map(|i| {
                        let gx = (u[i + 1] - u[i - 1]) / (2.0 * h);
                        let gy = (u[i + s] - u[i - s]) / (2.0 * h);
                        let a = weight_cap.unwrap_or_else(|| {
                            ((gx * gx + gy * gy) + self.epsilon * self.epsilon).powf(0.5 * (q - 2.0))
                        });
                        4.0 * (1.0 + (p - 2.0).abs()) * a / h2
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// `safety / max_i |∂L_i/∂u_i|`, i.e. `safety·h²/(2·D·Λ)` with `Λ` the scheme's
    /// diagonal bound divided by `2D/h²`.
    pub fn stable_dt_with(&self, safety: f64) -> f64 {
        let diag = self.max_diagonal(None);
        if diag > 0.0 {
            safety / diag
        } else {
            f64::INFINITY
        }
    }

    pub fn stable_dt(&self) -> f64 {
        self.stable_dt_with(DEFAULT_SAFETY)
    }

    /// Step bound valid for every state sharing this grid and `ε` when `q ≤ 2`,
    /// using `(s²+ε²)^{(q-2)/2} ≤ ε^{q-2}`.
    pub fn uniform_dt(&self, safety: f64) -> Result<f64> {
        let q = self.params.q();
        if q > 2.0 {
            return Err(LabError::OutOfRange(format!("no state-independent step bound for q = {q} > 2")));
        }
        let cap = self.epsilon.powf(q - 2.0);
        Ok(safety / self.max_diagonal(Some(cap)))
    }

    /// `Λ` in `dt = safety·h²/(2·D·Λ)`.
    pub fn lambda_bound(&self) -> f64 {
        let dim = self.grid_dimension() as f64;
        self.max_diagonal(None) * self.h * self.h / (2.0 * dim)
    }
}

fn coordinate(i: usize, intervals: usize, h: f64) -> f64 {
    (i as f64 - 0.5 * intervals as f64) * h
}

fn check_finite(values: &[f64]) -> Result<()> {
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(LabError::InvalidParams(format!("value {v} at node {i} is not finite")));
    }
    Ok(())
}

/// Dirichlet data on the boundary nodes.
#[derive(Clone)]
pub enum BoundaryCondition {
    Constant(f64),
    Function(Arc<dyn Fn(NodePosition, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            BoundaryCondition::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl BoundaryCondition {
    pub fn function(f: impl Fn(NodePosition, f64) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryCondition::Function(Arc::new(f))
    }

    /// Exact data from a barrier (radial grids use the node radius as the distance to the centre).
    pub fn supersolution(sp: SupersolutionParams) -> Self {
        Self::function(move |pos, t| {
            let rho = match pos {
                NodePosition::Radial(r) => r,
                NodePosition::Planar(x, y) => {
                    let cx = sp.center.get(0).copied().unwrap_or(0.0);
                    let cy = sp.center.get(1).copied().unwrap_or(0.0);
                    (x - cx).hypot(y - cy)
                }
            };
            sp.value_at_radius(rho, t).unwrap_or(f64::NAN)
        })
    }

    pub fn counterexample(ce: CounterexampleParams) -> Self {
        Self::function(move |pos, t| ce.eval(pos.norm(), t))
    }

    pub fn value(&self, pos: NodePosition, t: f64) -> f64 {
        match self {
            BoundaryCondition::Constant(c) => *c,
            BoundaryCondition::Function(f) => f(pos, t),
        }
    }

    /// Same data plus `c`.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            BoundaryCondition::Constant(v) => BoundaryCondition::Constant(v + c),
            BoundaryCondition::Function(f) => {
                let f = Arc::clone(f);
                Self::function(move |pos, t| f(pos, t) + c)
            }
        }
    }
}

fn advance(state: &GridState, bc: &BoundaryCondition, dt: f64, new_time: f64) -> Result<GridState> {
    let values: Vec<f64> = (0..state.values.len())
        .into_par_iter()
        .map(|i| {
            if state.is_boundary(i) {
                bc.value(state.position(i), new_time)
            } else {
                state.values[i] + dt * state.operator_at(i)
            }
        })
        .collect();
    if let Some(node) = values.iter().position(|v| !v.is_finite()) {
        return Err(LabError::Divergence { node, time: new_time });
    }
    Ok(GridState { values, time: new_time, ..state.clone() })
}

const DT_SLACK: f64 = 1e-12;

/// One explicit Euler step: interior nodes advance by `dt·L`, boundary nodes take `bc` at `t + dt`.
pub fn step(state: &GridState, bc: &BoundaryCondition, dt: f64) -> Result<GridState> {
    check_dt(state, dt, DEFAULT_SAFETY)?;
    advance(state, bc, dt, state.time + dt)
}

fn check_dt(state: &GridState, dt: f64, safety: f64) -> Result<()> {
    let bound = state.stable_dt_with(safety);
    if !(dt > 0.0) || dt > bound * (1.0 + DT_SLACK) {
        return Err(LabError::Stability { dt, bound });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Intermediate snapshot times, strictly increasing and inside `(t_initial, t_end]`.
    pub snapshot_times: Vec<f64>,
    pub safety: f64,
    /// Upper bound on every step, e.g. [`GridState::uniform_dt`] for lockstep runs.
    pub dt_cap: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { snapshot_times: Vec::new(), safety: DEFAULT_SAFETY, dt_cap: None }
    }
}

impl SolveOptions {
    pub fn with_snapshots(times: Vec<f64>) -> Self {
        Self { snapshot_times: times, ..Self::default() }
    }
}

/// Snapshots of a run, in time order; the first is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<GridState>,
}

impl Trajectory {
    pub fn new(snapshots: Vec<GridState>) -> Self {
        Self { snapshots }
    }

    pub fn initial(&self) -> &GridState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &GridState {
        self.snapshots.last().expect("trajectory holds at least the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(GridState::time).collect()
    }

    /// Snapshot whose time matches `t` to `1e-12·max(1, |t|)`.
    pub fn at_time(&self, t: f64) -> Option<&GridState> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.snapshots.iter().find(|s| (s.time - t).abs() <= tol)
    }
}

/// Steps from `initial` to `t_end`, clipping steps so every requested time is hit exactly.
pub fn solve(initial: &GridState, bc: &BoundaryCondition, t_end: f64, opts: &SolveOptions) -> Result<Trajectory> {
    let t0 = initial.time;
    if t_end < t0 {
        return Err(LabError::Scheduling(format!("t_end = {t_end} precedes the start {t0}")));
    }
    let mut targets = Vec::with_capacity(opts.snapshot_times.len() + 1);
    let mut last = t0;
    for &t in &opts.snapshot_times {
        if !(t > last) || t > t_end {
            return Err(LabError::Scheduling(format!(
                "snapshot times must increase strictly inside ({t0}, {t_end}], got {t} after {last}"
            )));
        }
        targets.push(t);
        last = t;
    }
    if t_end > last {
        targets.push(t_end);
    }

    let mut snapshots = vec![initial.clone()];
    let mut state = initial.clone();
    for &target in &targets {
        while state.time < target {
            let mut dt = state.stable_dt_with(opts.safety);
            if let Some(cap) = opts.dt_cap {
                dt = dt.min(cap);
            }
            if !(dt > 0.0 && dt.is_finite()) {
                if dt.is_infinite() {
                    dt = target - state.time;
                } else {
                    return Err(LabError::Stability { dt, bound: dt });
                }
            }
            let (dt, new_time) =
                if state.time + dt >= target { (target - state.time, target) } else { (dt, state.time + dt) };
            check_dt(&state, dt, opts.safety)?;
            state = advance(&state, bc, dt, new_time)?;
        }
        snapshots.push(state.clone());
    }
    Ok(Trajectory { snapshots })
}

/// A planar run and the matching radial run of the same radially symmetric data.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSolverRun {
    pub planar: GridState,
    pub radial: GridState,
    /// `max |u_planar - u_radial(|x|)| / max |u_radial|` over the planar nodes at the end time.
    pub discrepancy: f64,
    pub steps: usize,
}

fn radial_interp(values: &[f64], h: f64, r: f64) -> f64 {
    let s = r / h;
    let i = (s.floor() as usize).min(values.len() - 2);
    let f = s - i as f64;
    values[i] + f * (values[i + 1] - values[i])
}

/// Runs the planar solver on `[-L, L]²` and the radial solver in the fictitious
/// dimension on a disc covering the square, with a shared step.
///
/// The radial solution supplies the square's lateral data, so both runs
/// discretise the same problem and the discrepancy measures only the schemes.
pub fn cross_solver_run(
    params: Params,
    profile: impl Fn(f64) -> f64,
    intervals: usize,
    half_width: f64,
    t_end: f64,
    epsilon: Option<f64>,
) -> Result<CrossSolverRun> {
    let mut planar = GridState::planar_from_fn(params, intervals, half_width, 0.0, |x, y| profile(x.hypot(y)))?;
    let h = planar.h();
    let radial_intervals = (std::f64::consts::SQRT_2 * half_width / h).ceil() as usize + 2;
    let mut radial = GridState::radial_from_fn(params, radial_intervals, radial_intervals as f64 * h, 0.0, &profile)?;
    let eps = epsilon.unwrap_or_else(|| planar.epsilon());
    planar = planar.with_epsilon(eps)?;
    radial = radial.with_epsilon(eps)?;
    if !(t_end >= 0.0) {
        return Err(LabError::Scheduling(format!("t_end = {t_end} must be >= 0")));
    }
    let outer = BoundaryCondition::Constant(radial.values()[radial_intervals]);
    let mut steps = 0;
    while planar.time < t_end {
        let dt = planar.stable_dt().min(radial.stable_dt());
        let (dt, new_time) =
            if planar.time + dt >= t_end { (t_end - planar.time, t_end) } else { (dt, planar.time + dt) };
        radial = advance(&radial, &outer, dt, new_time)?;
        let lateral = Arc::new(radial.values.clone());
        let bc = BoundaryCondition::function(move |pos, _| radial_interp(&lateral, h, pos.norm()));
        planar = advance(&planar, &bc, dt, new_time)?;
        steps += 1;
    }
    let scale = radial.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = (0..planar.len())
        .map(|k| (planar.values[k] - radial_interp(&radial.values, h, planar.position(k).norm())).abs())
        .fold(0.0f64, f64::max);
    let discrepancy = if scale > 0.0 { worst / scale } else { worst };
    Ok(CrossSolverRun { planar, radial, discrepancy, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prm(n: usize, p: f64, q: f64) -> Params {
        Params::new(n, p, q).unwrap()
    }

    #[test]
    fn constant_field_has_zero_operator() {
        let radial = GridState::radial_from_fn(prm(3, 1.5, 1.7), 16, 1.0, 0.0, |_| 2.0).unwrap();
        let centered = radial.clone().with_stencil(RadialStencil::Centered).unwrap();
        let planar = GridState::planar_from_fn(prm(2, 3.0, 1.4), 8, 1.0, 0.0, |_, _| 2.0).unwrap();
        for s in [&radial, &centered] {
            for i in 0..16 {
                assert_eq!(s.regularized_operator(i).unwrap(), 0.0);
            }
        }
        for i in 0..planar.len() {
            if !planar.is_boundary(i) {
                assert_eq!(planar.regularized_operator(i).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn boundary_index_is_rejected() {
        let radial = GridState::radial_from_fn(prm(2, 2.0, 2.0), 8, 1.0, 0.0, |r| r).unwrap();
        assert!(matches!(radial.regularized_operator(8), Err(LabError::Domain(_))));
        let planar = GridState::planar_from_fn(prm(2, 2.0, 2.0), 8, 1.0, 0.0, |x, _| x).unwrap();
        assert!(planar.regularized_operator(0).is_err());
        assert!(planar.regularized_operator(planar.planar_index(8, 3)).is_err());
    }

    #[test]
    fn planar_heat_quadratic() {
        let planar = GridState::planar_from_fn(prm(2, 2.0, 2.0), 8, 1.0, 0.0, |x, y| x * x + y * y).unwrap();
        for i in 0..planar.len() {
            if !planar.is_boundary(i) {
                assert_rel!(planar.regularized_operator(i).unwrap(), 4.0, 1e-12);
            }
        }
    }

    #[test]
    fn radial_quadratic_is_exact_for_q_two() {
        // κ r^{1-d}(r^{d-1} u_r)_r = 2d for u = r², any real d
        for &d in &[1.0, 2.0, 2.7, 9.0] {
            let s =
                GridState::radial_from_fn(prm(2, 2.0, 2.0), 10, 1.0, 0.0, |r| r * r).unwrap().with_d_eff(d).unwrap();
            for i in 0..10 {
                assert_rel!(s.regularized_operator(i).unwrap(), 2.0 * d, 1e-10);
            }
        }
    }

    #[test]
    fn radial_operator_tracks_counterexample_time_derivative() {
        let ce = CounterexampleParams::new(3, 1.2).unwrap();
        let t = 0.1;
        let errors: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&m| {
                let s = GridState::radial_from_fn(ce.params, m, 2.0, t, |r| ce.eval(r, t))
                    .unwrap()
                    .with_epsilon(1e-7)
                    .unwrap();
                (1..m)
                    .filter(|&i| s.position(i).norm() >= 0.25)
                    .map(|i| {
                        let r = s.position(i).norm();
                        (s.regularized_operator(i).unwrap() - ce.radial_jet(r, t).u_t).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let scale = ce.radial_jet(0.5, t).u_t.abs();
        assert!(errors[0] < 0.05 * scale, "{errors:?} vs {scale}");
        assert!(errors[1] < errors[0] / 3.0, "{errors:?}");
    }

    #[test]
    fn stencils_agree_on_smooth_data() {
        let p = prm(3, 1.8, 1.6);
        let f = |r: f64| 1.0 + r * r * (1.0 + 0.3 * r);
        let a = GridState::radial_from_fn(p, 200, 1.0, 0.0, f).unwrap().with_epsilon(1e-6).unwrap();
        let b = a.clone().with_stencil(RadialStencil::Centered).unwrap();
        for i in (20..200).step_by(17) {
            let x = a.regularized_operator(i).unwrap();
            let y = b.regularized_operator(i).unwrap();
            assert_rel!(x, y, 1e-3);
        }
    }

    #[test]
    fn stable_dt_scaling_and_flat_field() {
        let p = prm(2, 2.0, 1.5);
        let flat = GridState::planar_from_fn(p, 200, 1.0, 0.0, |_, _| 1.0).unwrap().with_epsilon(1e-3).unwrap();
        // Λ = (1+|p-2|)·ε^{q-2}: 4 a / h² on the diagonal
        let a = (1e-6f64).powf(-0.25);
        assert_rel!(flat.lambda_bound(), a, 1e-12);
        assert_rel!(flat.stable_dt(), 0.9 * 1e-4 / (4.0 * a), 1e-12);

        let q2 = GridState::planar_from_fn(prm(2, 2.0, 2.0), 20, 1.0, 0.0, |_, _| 0.0).unwrap();
        let q2b = q2.clone().with_epsilon(0.5).unwrap();
        assert_eq!(q2.stable_dt(), q2b.stable_dt());

        let coarse = GridState::radial_from_fn(p, 50, 1.0, 0.0, |r| r * r).unwrap();
        let fine = GridState::radial_from_fn(p, 100, 1.0, 0.0, |_| 0.0).unwrap();
        let coarse_flat = GridState::radial_from_fn(p, 50, 1.0, 0.0, |_| 0.0).unwrap();
        assert_rel!(coarse_flat.stable_dt(), 4.0 * fine.stable_dt(), 1e-12);
        assert!(coarse.stable_dt() >= coarse_flat.with_epsilon(coarse.epsilon()).unwrap().stable_dt());
    }

    #[test]
    fn step_rejects_oversized_dt() {
        let s = GridState::radial_from_fn(prm(2, 2.0, 1.5), 16, 1.0, 0.0, |r| r * r).unwrap();
        let dt = 2.0 * s.stable_dt();
        assert!(matches!(step(&s, &BoundaryCondition::Constant(1.0), dt), Err(LabError::Stability { .. })));
    }

    #[test]
    fn step_reports_divergence() {
        let s = GridState::radial_from_fn(prm(2, 2.0, 2.0), 8, 1.0, 0.0, |r| r * r).unwrap();
        let bc = BoundaryCondition::function(|_, _| f64::NAN);
        let err = step(&s, &bc, 0.5 * s.stable_dt()).unwrap_err();
        assert_eq!(err, LabError::Divergence { node: 8, time: 0.5 * s.stable_dt() });
    }

    #[test]
    fn constant_field_is_stationary() {
        let s = GridState::planar_from_fn(prm(2, 1.5, 1.5), 10, 1.0, 0.0, |_, _| 3.0).unwrap();
        let next = step(&s, &BoundaryCondition::Constant(3.0), 0.5 * s.stable_dt()).unwrap();
        assert_eq!(next.values(), s.values());
    }

    #[test]
    fn solve_without_horizon_returns_initial() {
        let s = GridState::radial_from_fn(prm(2, 2.0, 1.5), 8, 1.0, 0.25, |r| r).unwrap();
        let traj = solve(&s, &BoundaryCondition::Constant(1.0), 0.25, &SolveOptions::default()).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.initial(), &s);
    }

    #[test]
    fn snapshots_land_exactly() {
        let s = GridState::radial_from_fn(prm(2, 2.0, 1.5), 16, 1.0, 0.0, |r| 1.0 + r * r).unwrap();
        let opts = SolveOptions::with_snapshots(vec![1e-3, 2.5e-3]);
        let traj = solve(&s, &BoundaryCondition::Constant(2.0), 4e-3, &opts).unwrap();
        assert_eq!(traj.times(), vec![0.0, 1e-3, 2.5e-3, 4e-3]);
        assert!(traj.at_time(2.5e-3).is_some());
        assert!(traj.at_time(2.0e-3).is_none());
        let bad = SolveOptions::with_snapshots(vec![2e-3, 1e-3]);
        assert!(matches!(solve(&s, &BoundaryCondition::Constant(2.0), 4e-3, &bad), Err(LabError::Scheduling(_))));
    }

    #[test]
    fn planar_rejects_bad_geometry() {
        assert!(GridState::planar_from_fn(prm(3, 2.0, 2.0), 8, 1.0, 0.0, |_, _| 0.0).is_err());
        assert!(GridState::planar_from_fn(prm(2, 2.0, 2.0), 7, 1.0, 0.0, |_, _| 0.0).is_err());
        assert!(GridState::radial_from_fn(prm(2, 2.0, 2.0), 8, 1.0, 0.0, |_| f64::NAN).is_err());
    }

    #[test]
    fn default_epsilon_follows_range() {
        let s = GridState::radial_from_fn(prm(2, 2.0, 1.5), 8, 1.0, 0.0, |r| 10.0 * r).unwrap();
        assert_rel!(s.epsilon(), 1e-3, 1e-12);
        let flat = GridState::radial_from_fn(prm(2, 2.0, 1.5), 8, 1.0, 0.0, |_| 5.0).unwrap();
        assert_eq!(flat.epsilon(), DEFAULT_EPSILON_FACTOR);
    }

    #[test]
    fn cross_solver_agrees_with_p_not_q() {
        // p ≠ q: the radial run uses d = (q-1)/(p-1) + 1
        let bump = |r: f64| 1.0 + (-r * r / 0.02).exp();
        let coarse = cross_solver_run(prm(2, 3.0, 1.8), bump, 16, 0.5, 2e-3, Some(1e-3)).unwrap();
        let fine = cross_solver_run(prm(2, 3.0, 1.8), bump, 32, 0.5, 2e-3, Some(1e-3)).unwrap();
        assert!(coarse.discrepancy < 0.05, "{}", coarse.discrepancy);
        assert!(fine.discrepancy < coarse.discrepancy);
        assert_rel!(fine.radial.d_eff().unwrap(), 1.4, 1e-14);
    }
}
