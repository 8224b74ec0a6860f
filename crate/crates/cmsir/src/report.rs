//! Output artifacts: trajectory/limit-curve CSV and summary JSON.
//!
//! Floats are written with the shortest round-trip representation, so every
//! artifact is byte-deterministic for a fixed configuration.

use std::io::Write;

use serde::Serialize;

use crate::ensemble::{EnsembleReport, ReplicaRow};
use crate::error::Result;
use crate::limit::{LimitFunctions, Mode, ThetaPath, VPaths};
use crate::scalar::Real;
use crate::simulate::{SimOutcome, Trajectory};

/// `t,event,S,I,R,X_S,X_I,X_R,X`
pub fn write_trajectory_csv<R: Real>(w: &mut impl Write, traj: &Trajectory<R>) -> Result<()> {
    writeln!(w, "t,event,S,I,R,X_S,X_I,X_R,X")?;
    for j in 0..traj.times.len() {
        let c = &traj.counts[j];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            traj.times[j],
            traj.kinds[j].label(),
            c.s,
            c.i,
            c.r,
            c.x_s,
            c.x_i,
            c.x_r,
            c.x
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct SimSummary<R> {
    pub seed: u64,
    pub n: u64,
    pub s_inf: u64,
    pub t_stop: R,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<R>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub is_simple: Option<bool>,
}

impl<R: Real> SimSummary<R> {
    pub fn new(outcome: &SimOutcome<R>, t_star: Option<R>) -> Self {
        Self {
            seed: outcome.seed,
            n: outcome.trajectory.n,
            s_inf: outcome.trajectory.s_inf,
            t_stop: outcome.trajectory.t_stop,
            t_star,
            is_simple: outcome.is_simple,
        }
    }
}

/// `t,theta,v_S,v_I,v_R,h_S,h_I,h_R,h_X` on the solved knots.
pub fn write_limit_csv<R: Real>(
    w: &mut impl Write,
    path: &ThetaPath<R>,
    v: &VPaths<R>,
    lf: &LimitFunctions<R>,
) -> Result<()> {
    writeln!(w, "t,theta,v_S,v_I,v_R,h_S,h_I,h_R,h_X")?;
    for (j, &t) in v.ts.iter().enumerate() {
        let theta = path.curve.ys[j][0];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            t,
            theta,
            v.v_s[j],
            v.v_i[j],
            v.v_r[j],
            lf.h_s(theta),
            lf.h_i(theta),
            lf.h_r(theta),
            lf.h_x(theta)
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct LimitSummary<R> {
    pub theta_inf: R,
    pub final_size: R,
    #[serde(rename = "R0")]
    pub r0: R,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<R>,
}

/// `n,replica,sup_S,...,sup_X,s_inf_frac,t_star` per ensemble replica.
pub fn write_replica_csv<R: Real>(w: &mut impl Write, rows: &[ReplicaRow<R>]) -> Result<()> {
    writeln!(
        w,
        "n,replica,sup_S,sup_I,sup_R,sup_X_S,sup_X_I,sup_X_R,sup_X,s_inf_frac,t_star"
    )?;
    for row in rows {
        write!(w, "{},{}", row.n, row.replica)?;
        match &row.sup {
            Some(sup) => {
                for v in sup {
                    write!(w, ",{v}")?;
                }
            }
            None => write!(w, ",,,,,,,")?,
        }
        write!(w, ",{}", row.s_inf_frac)?;
        match &row.t_star {
            Some(t) => writeln!(w, ",{t}")?,
            None => writeln!(w, ",")?,
        }
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::Config(format!("serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// The ensemble report together with its per-replica table.
pub fn ensemble_artifacts<R: Real>(report: &EnsembleReport<R>) -> Result<(String, String)> {
    let json = to_json_pretty(report)?;
    let mut csv = Vec::new();
    write_replica_csv(&mut csv, &report.replica_rows)?;
    Ok((json, String::from_utf8(csv).expect("csv is utf-8")))
}
