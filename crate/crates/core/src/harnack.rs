//! Empirical Harnack ratios on solver trajectories and the barrier comparison audit.
//!
//! Probes are points of `ℝⁿ`. On radial grids only `|x₀|` matters and the node at
//! radius `r_i` stands for the sphere `|x| = r_i`, which meets `B_r(x₀)` iff
//! `| r_i - |x₀| | < r`.

use serde::Serialize;

use crate::closed_forms::{lambda_min, Orientation, SupersolutionParams};
use crate::error::{LabError, Result};
use crate::fd_solver::{GridKind, GridState, NodePosition, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CylinderKind {
    Backward,
    Forward,
    Both,
}

/// `B_r(x₀)` times a time span of length `θ r^q` before and/or after `t₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cylinder {
    pub center: Vec<f64>,
    pub t0: f64,
    pub r: f64,
    pub theta: f64,
    pub q: f64,
    pub kind: CylinderKind,
}

impl Cylinder {
    pub fn new(center: Vec<f64>, t0: f64, r: f64, theta: f64, q: f64, kind: CylinderKind) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(LabError::InvalidParams(format!("cylinder radius {r} must be positive")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(LabError::InvalidParams(format!("θ = {theta} must be positive")));
        }
        if center.iter().chain([&t0, &q]).any(|v| !v.is_finite()) {
            return Err(LabError::InvalidParams("cylinder data must be finite".into()));
        }
        Ok(Self { center, t0, r, theta, q, kind })
    }

    pub fn time_length(&self) -> f64 {
        self.theta * self.r.powf(self.q)
    }

    /// Closure of the time span, `[start, end]`.
    pub fn time_span(&self) -> (f64, f64) {
        let len = self.time_length();
        match self.kind {
            CylinderKind::Backward => (self.t0 - len, self.t0),
            CylinderKind::Forward => (self.t0, self.t0 + len),
            CylinderKind::Both => (self.t0 - len, self.t0 + len),
        }
    }
}

/// `θ = c u₀^{2-q}`.
pub fn intrinsic_theta(u0: f64, c: f64, q: f64) -> f64 {
    if q == 2.0 {
        return c;
    }
    if u0 == 0.0 {
        return if q < 2.0 { 0.0 } else { f64::INFINITY };
    }
    c * u0.powf(2.0 - q)
}

/// Whether the cylinder lies in `B₁ × (-1, 0]`.
pub fn cylinder_contained(cyl: &Cylinder) -> bool {
    let dist = cyl.center.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dist + cyl.r > 1.0 {
        return false;
    }
    let (lo, hi) = cyl.time_span();
    // the backward span is half-open (t₀-θr^q, t₀], so its start may equal -1
    lo >= -1.0 && hi <= 0.0 && !(cyl.kind == CylinderKind::Backward && cyl.t0 > 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub r: f64,
}

impl Probe {
    pub fn new(x0: Vec<f64>, t0: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(LabError::InvalidParams(format!("probe radius {r} must be positive")));
        }
        if x0.is_empty() || x0.iter().chain([&t0]).any(|v| !v.is_finite()) {
            return Err(LabError::InvalidParams("probe point must be finite".into()));
        }
        Ok(Self { x0, t0, r })
    }

    fn norm(&self) -> f64 {
        self.x0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    Forward,
    Backward,
    Elliptic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub kind: RatioKind,
    pub probe: Probe,
    pub theta: Option<f64>,
    pub u0: f64,
    pub sup_before: Option<f64>,
    pub inf_after: Option<f64>,
    pub sup_same: Option<f64>,
    pub inf_same: Option<f64>,
    /// `+∞` when the denominator vanishes; serialised as `null` in JSON.
    pub ratio: f64,
    pub bound_used: Option<f64>,
    pub pass: bool,
}

impl HarnackReport {
    /// Judges the ratio against a theoretical or empirical bound.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound_used = Some(bound);
        self.pass = self.ratio <= bound;
        self
    }
}

fn snapshot(traj: &Trajectory, t: f64) -> Result<&GridState> {
    traj.at_time(t).ok_or_else(|| LabError::Scheduling(format!("no snapshot at t = {t}; available {:?}", traj.times())))
}

fn planar_center(probe: &Probe) -> Result<(f64, f64)> {
    match probe.x0.as_slice() {
        [x, y] => Ok((*x, *y)),
        other => Err(LabError::Domain(format!("planar probes need 2 coordinates, got {}", other.len()))),
    }
}

fn check_ball_inside(state: &GridState, probe: &Probe) -> Result<()> {
    let l = state.domain_radius();
    let slack = 1e-12 * l;
    let inside = match state.kind() {
        GridKind::Radial { .. } => probe.norm() + probe.r <= l + slack,
        GridKind::Planar => {
            let (x, y) = planar_center(probe)?;
            x.abs() + probe.r <= l + slack && y.abs() + probe.r <= l + slack
        }
    };
    if inside {
        Ok(())
    } else {
        Err(LabError::Domain(format!("ball of radius {} at {:?} leaves the grid of half width {l}", probe.r, probe.x0)))
    }
}

/// Value at `x₀`: linear in `r` on radial grids, bilinear on planar grids.
pub fn interpolate(state: &GridState, x0: &[f64]) -> Result<f64> {
    let h = state.h();
    let m = state.intervals();
    let u = state.values();
    let locate = |s: f64| -> Result<(usize, f64)> {
        if !(-1e-9..=m as f64 + 1e-9).contains(&s) {
            return Err(LabError::Domain(format!("point {x0:?} lies outside the grid")));
        }
        let i = (s.floor().max(0.0) as usize).min(m - 1);
        Ok((i, (s - i as f64).clamp(0.0, 1.0)))
    };
    match state.kind() {
        GridKind::Radial { .. } => {
            let rho = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
            let (i, f) = locate(rho / h)?;
            Ok(u[i] + f * (u[i + 1] - u[i]))
        }
        GridKind::Planar => {
            let [x, y] = x0 else {
                return Err(LabError::Domain(format!("planar points need 2 coordinates, got {}", x0.len())));
            };
            let l = state.domain_radius();
            let (i, fx) = locate((x + l) / h)?;
            let (j, fy) = locate((y + l) / h)?;
            let at = |i, j| u[state.planar_index(i, j)];
            let bottom = at(i, j) + fx * (at(i + 1, j) - at(i, j));
            let top = at(i, j + 1) + fx * (at(i + 1, j + 1) - at(i, j + 1));
            Ok(bottom + fy * (top - bottom))
        }
    }
}

/// Indices of nodes lying strictly inside `B_r(x₀)`.
pub fn ball_nodes(state: &GridState, x0: &[f64], r: f64) -> Result<Vec<usize>> {
    let nodes: Vec<usize> = match state.kind() {
        GridKind::Radial { .. } => {
            let rho = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
            (0..state.len()).filter(|&i| (state.position(i).norm() - rho).abs() < r).collect()
        }
        GridKind::Planar => {
            let [cx, cy] = x0 else {
                return Err(LabError::Domain(format!("planar points need 2 coordinates, got {}", x0.len())));
            };
            (0..state.len())
                .filter(|&i| match state.position(i) {
                    NodePosition::Planar(x, y) => (x - cx).hypot(y - cy) < r,
                    NodePosition::Radial(_) => false,
                })
                .collect()
        }
    };
    if nodes.is_empty() {
        return Err(LabError::EmptyBall(format!("no node lies strictly inside B_{r}({x0:?}) at h = {}", state.h())));
    }
    Ok(nodes)
}

fn ball_extrema(state: &GridState, probe: &Probe, shift: f64) -> Result<(f64, f64)> {
    check_ball_inside(state, probe)?;
    let nodes = ball_nodes(state, &probe.x0, probe.r)?;
    let u = state.values();
    let (lo, hi) = nodes
        .iter()
        .map(|&i| u[i] + shift)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo < 0.0 {
        return Err(LabError::Domain(format!("Harnack ratios need nonnegative data, found {lo} in the ball")));
    }
    Ok((lo, hi))
}

fn center_value(state: &GridState, probe: &Probe, shift: f64) -> Result<f64> {
    let u0 = interpolate(state, &probe.x0)? + shift;
    if u0 < 0.0 {
        return Err(LabError::Domain(format!("negative centre value {u0}")));
    }
    Ok(u0)
}

/// `a / b` for nonnegative data with `0/0 = 1` and `a/0 = ∞`.
fn quotient(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

fn base_report(kind: RatioKind, probe: &Probe, theta: Option<f64>, u0: f64, ratio: f64) -> HarnackReport {
    HarnackReport {
        kind,
        probe: probe.clone(),
        theta,
        u0,
        sup_before: None,
        inf_after: None,
        sup_same: None,
        inf_same: None,
        ratio,
        bound_used: None,
        pass: ratio.is_finite(),
    }
}

fn intrinsic_cylinder(state: &GridState, probe: &Probe, theta: f64, kind: CylinderKind) -> Result<Cylinder> {
    let cyl = Cylinder::new(probe.x0.clone(), probe.t0, probe.r, theta, state.params().q(), kind)?;
    if !cylinder_contained(&cyl) {
        return Err(LabError::Domain(format!(
            "cylinder {:?} × {:?} is not contained in B₁ × (-1, 0]",
            probe.x0,
            cyl.time_span()
        )));
    }
    Ok(cyl)
}

/// Time `t₀ ± θ r^q` the forward/backward ratio will read, for scheduling snapshots.
pub fn intrinsic_target_time(traj: &Trajectory, probe: &Probe, c: f64, kind: CylinderKind) -> Result<f64> {
    let state = snapshot(traj, probe.t0)?;
    let u0 = center_value(state, probe, 0.0)?;
    let len = intrinsic_theta(u0, c, state.params().q()) * probe.r.powf(state.params().q());
    Ok(match kind {
        CylinderKind::Backward => probe.t0 - len,
        _ => probe.t0 + len,
    })
}

/// `u(x₀,t₀) / inf_{B_r(x₀)} u(·, t₀+θr^q)` with `θ = c u(x₀,t₀)^{2-q}`.
pub fn forward_ratio(traj: &Trajectory, probe: &Probe, c: f64) -> Result<HarnackReport> {
    forward_ratio_shifted(traj, probe, c, 0.0)
}

pub fn forward_ratio_shifted(traj: &Trajectory, probe: &Probe, c: f64, shift: f64) -> Result<HarnackReport> {
    let now = snapshot(traj, probe.t0)?;
    let u0 = center_value(now, probe, shift)?;
    let q = now.params().q();
    let theta = intrinsic_theta(u0, c, q);
    if u0 == 0.0 {
        return Ok(base_report(RatioKind::Forward, probe, Some(theta), u0, 1.0));
    }
    let cyl = intrinsic_cylinder(now, probe, theta, CylinderKind::Forward)?;
    let later = snapshot(traj, cyl.time_span().1)?;
    let (inf, _) = ball_extrema(later, probe, shift)?;
    let mut report = base_report(RatioKind::Forward, probe, Some(theta), u0, quotient(u0, inf));
    report.inf_after = Some(inf);
    Ok(report)
}

/// `sup_{B_r(x₀)} u(·, t₀-θr^q) / u(x₀,t₀)`.
pub fn backward_sup_ratio(traj: &Trajectory, probe: &Probe, c: f64) -> Result<HarnackReport> {
    backward_sup_ratio_shifted(traj, probe, c, 0.0)
}

pub fn backward_sup_ratio_shifted(traj: &Trajectory, probe: &Probe, c: f64, shift: f64) -> Result<HarnackReport> {
    let now = snapshot(traj, probe.t0)?;
    let u0 = center_value(now, probe, shift)?;
    let q = now.params().q();
    let theta = intrinsic_theta(u0, c, q);
    if u0 == 0.0 && theta == 0.0 {
        // zero-length cylinder: the sup is read at t₀ itself
        let (_, sup) = ball_extrema(now, probe, shift)?;
        let mut report = base_report(RatioKind::Backward, probe, Some(theta), u0, quotient(sup, u0));
        report.sup_before = Some(sup);
        return Ok(report);
    }
    let cyl = intrinsic_cylinder(now, probe, theta, CylinderKind::Backward)?;
    let earlier = snapshot(traj, cyl.time_span().0)?;
    let (_, sup) = ball_extrema(earlier, probe, shift)?;
    let mut report = base_report(RatioKind::Backward, probe, Some(theta), u0, quotient(sup, u0));
    report.sup_before = Some(sup);
    Ok(report)
}

/// `max(sup_B u / u(x₀), u(x₀) / inf_B u)` on the snapshot at `t₀`.
pub fn elliptic_ratio(traj: &Trajectory, probe: &Probe) -> Result<HarnackReport> {
    elliptic_ratio_shifted(traj, probe, 0.0)
}

pub fn elliptic_ratio_shifted(traj: &Trajectory, probe: &Probe, shift: f64) -> Result<HarnackReport> {
    elliptic_ratio_of_state(snapshot(traj, probe.t0)?, probe, shift)
}

/// Elliptic ratio of a single field; the probe time is not checked against the state.
pub fn elliptic_ratio_of_state(state: &GridState, probe: &Probe, shift: f64) -> Result<HarnackReport> {
    let u0 = center_value(state, probe, shift)?;
    let (inf, sup) = ball_extrema(state, probe, shift)?;
    let ratio = quotient(sup, u0).max(quotient(u0, inf));
    let mut report = base_report(RatioKind::Elliptic, probe, None, u0, ratio);
    report.sup_same = Some(sup);
    report.inf_same = Some(inf);
    Ok(report)
}

/// Linear extrapolation `ε̂ → 0` from ratios computed on `u+ε̂` and `u+2ε̂`.
pub fn shift_extrapolated(eps_hat: f64, ratio_at: impl Fn(f64) -> Result<HarnackReport>) -> Result<HarnackReport> {
    if !(eps_hat > 0.0 && eps_hat.is_finite()) {
        return Err(LabError::InvalidParams(format!("ε̂ = {eps_hat} must be positive")));
    }
    let one = ratio_at(eps_hat)?;
    let two = ratio_at(2.0 * eps_hat)?;
    let ratio = (2.0 * one.ratio - two.ratio).max(1.0);
    Ok(HarnackReport { ratio, pass: ratio.is_finite(), ..one })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonAudit {
    /// Largest `barrier - u` seen (negative means strict domination).
    pub worst_violation: f64,
    pub worst_node: usize,
    pub worst_time: f64,
    pub tolerance: f64,
    pub snapshots_checked: usize,
    pub nodes_checked: usize,
    pub pass: bool,
}

fn barrier_distance(state: &GridState, barrier: &SupersolutionParams, node: usize) -> Result<f64> {
    let c = barrier.center.as_slice();
    match state.position(node) {
        NodePosition::Radial(r) => {
            if c.iter().any(|&v| v != 0.0) {
                return Err(LabError::Setup(
                    "radial trajectories can only be audited against a barrier centred at the origin".into(),
                ));
            }
            Ok(r)
        }
        NodePosition::Planar(x, y) => match c {
            [cx, cy] => Ok((x - cx).hypot(y - cy)),
            _ => Err(LabError::Setup(format!("barrier centre {c:?} is not planar"))),
        },
    }
}

/// Checks `u ≥ m - w` on the barrier's ball at every snapshot.
///
/// The tolerance is `1e-3·range(u at start) + allowance`.
pub fn comparison_audit(traj: &Trajectory, barrier: &SupersolutionParams, allowance: f64) -> Result<ComparisonAudit> {
    if barrier.orientation != Orientation::Sub {
        return Err(LabError::Setup("comparison audit needs the subsolution mirror".into()));
    }
    let start = traj.initial();
    let params = start.params();
    if barrier.params != *params {
        return Err(LabError::Setup("barrier and trajectory use different (n, p, q)".into()));
    }
    let floor = lambda_min(params)?;
    if barrier.lambda < floor * (1.0 - 1e-12) {
        return Err(LabError::Setup(format!(
            "λ = {} is below λ_min = {floor}; the barrier is not guaranteed",
            barrier.lambda
        )));
    }
    if (barrier.t_origin - start.time()).abs() > 1e-12 * start.time().abs().max(1.0) {
        return Err(LabError::Setup(format!(
            "barrier origin {} differs from trajectory start {}",
            barrier.t_origin,
            start.time()
        )));
    }
    let mut ball = Vec::new();
    for node in 0..start.len() {
        let rho = barrier_distance(start, barrier, node)?;
        if rho < barrier.radius {
            ball.push((node, rho));
        }
    }
    if ball.is_empty() {
        return Err(LabError::EmptyBall("no node inside the barrier's ball".into()));
    }
    if let Some(&(node, _)) = ball.iter().find(|&&(i, _)| start.values()[i] < barrier.shift) {
        return Err(LabError::Setup(format!(
            "initial value {} at node {node} is below m = {}",
            start.values()[node],
            barrier.shift
        )));
    }
    let tolerance = 1e-3 * start.range() + allowance;
    let mut worst = (f64::NEG_INFINITY, 0, start.time());
    for state in &traj.snapshots {
        for &(node, rho) in &ball {
            let gap = barrier.value_at_radius(rho, state.time())? - state.values()[node];
            if gap > worst.0 {
                worst = (gap, node, state.time());
            }
        }
    }
    Ok(ComparisonAudit {
        worst_violation: worst.0,
        worst_node: worst.1,
        worst_time: worst.2,
        tolerance,
        snapshots_checked: traj.snapshots.len(),
        nodes_checked: ball.len(),
        pass: worst.0 <= tolerance,
    })
}
