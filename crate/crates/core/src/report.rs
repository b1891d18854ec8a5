//! Report rows and the CSV/JSON writers.
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which round-trips every `f64`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::fd_solver::{NodePosition, Trajectory};
use crate::harnack::HarnackReport;

/// One checked or informational quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub quantity: String,
    pub value: f64,
    /// Bound or tolerance the value was judged against, when there is one.
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl ReportRow {
    /// Informational row; always passes.
    pub fn info(scenario: &str, quantity: &str, value: f64) -> Self {
        Self { scenario: scenario.into(), quantity: quantity.into(), value, tolerance: None, pass: true }
    }

    /// `|value - target| ≤ tol`.
    pub fn near(scenario: &str, quantity: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            scenario: scenario.into(),
            quantity: quantity.into(),
            value,
            tolerance: Some(tol),
            pass: (value - target).abs() <= tol,
        }
    }

    /// `value ≤ bound`.
    pub fn at_most(scenario: &str, quantity: &str, value: f64, bound: f64) -> Self {
        Self {
            scenario: scenario.into(),
            quantity: quantity.into(),
            value,
            tolerance: Some(bound),
            pass: value <= bound,
        }
    }

    /// `value ≥ bound`.
    pub fn at_least(scenario: &str, quantity: &str, value: f64, bound: f64) -> Self {
        Self {
            scenario: scenario.into(),
            quantity: quantity.into(),
            value,
            tolerance: Some(bound),
            pass: value >= bound,
        }
    }

    /// Boolean outcome written as `1` or `0`.
    pub fn flag(scenario: &str, quantity: &str, ok: bool) -> Self {
        Self {
            scenario: scenario.into(),
            quantity: quantity.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: None,
            pass: ok,
        }
    }
}

/// `{:.16e}` for finite values, `inf`, `-inf` or `nan` otherwise.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn rows_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("scenario,quantity,value,tolerance,pass\n");
    for r in rows {
        let tol = r.tolerance.map(fmt_real).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{}", r.scenario, r.quantity, fmt_real(r.value), tol, r.pass);
    }
    out
}

/// All snapshots, ordered by time then node index.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let radial = traj.initial().is_radial();
    let mut out = String::from(if radial { "time,node,r,value\n" } else { "time,node,x,y,value\n" });
    for s in &traj.snapshots {
        let t = fmt_real(s.time());
        for (i, v) in s.values().iter().enumerate() {
            match s.position(i) {
                NodePosition::Radial(r) => {
                    let _ = writeln!(out, "{t},{i},{},{}", fmt_real(r), fmt_real(*v));
                }
                NodePosition::Planar(x, y) => {
                    let _ = writeln!(out, "{t},{i},{},{},{}", fmt_real(x), fmt_real(y), fmt_real(*v));
                }
            }
        }
    }
    out
}

pub fn ratios_csv(reports: &[HarnackReport]) -> String {
    let mut out = String::from("probe,kind,t,x0,r,theta,u0,ratio,pass\n");
    for (i, rep) in reports.iter().enumerate() {
        let x0: Vec<String> = rep.probe.x0.iter().map(|v| fmt_real(*v)).collect();
        let kind = serde_json::to_value(rep.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{i},{kind},{},{},{},{},{},{},{}",
            fmt_real(rep.probe.t0),
            x0.join(" "),
            fmt_real(rep.probe.r),
            rep.theta.map(fmt_real).unwrap_or_default(),
            fmt_real(rep.u0),
            fmt_real(rep.ratio),
            rep.pass
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd_solver::GridState;
    use crate::Params;

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 4556.25, std::f64::consts::PI] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn row_csv_layout() {
        let rows = vec![ReportRow::flag("rc", "range_condition", true), ReportRow::at_most("rc", "err", 0.01, 0.05)];
        let csv = rows_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "scenario,quantity,value,tolerance,pass");
        assert_eq!(lines[1], "rc,range_condition,1.0000000000000000e0,,true");
        assert_eq!(lines[2], "rc,err,1.0000000000000000e-2,5.0000000000000003e-2,true");
    }

    #[test]
    fn grid_csv_is_ordered() {
        let p = Params::new(2, 2.0, 1.5).unwrap();
        let s = GridState::radial_from_fn(p, 2, 1.0, 0.0, |r| r).unwrap();
        let csv = trajectory_csv(&Trajectory::new(vec![s]));
        assert_eq!(
            csv,
            "time,node,r,value\n\
             0.0000000000000000e0,0,0.0000000000000000e0,0.0000000000000000e0\n\
             0.0000000000000000e0,1,5.0000000000000000e-1,5.0000000000000000e-1\n\
             0.0000000000000000e0,2,1.0000000000000000e0,1.0000000000000000e0\n"
        );
    }
}
