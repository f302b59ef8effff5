//! Trajectory and table persistence.
//!
//! Trajectory files hold one record per configuration change plus the
//! initial configuration, with positions in units of both `a` and `L` and
//! times in units of `L`. Reals are written as `{:.12e}` so files are
//! byte-identical across runs with the same inputs.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fock::{decode_sites, ConfigIndex};
use crate::jump::{JumpEvent, Trajectory};
use crate::scalar::Real;

pub const TRAJECTORY_HEADER: [&str; 11] = [
    "trajectory_id",
    "time",
    "t_over_l",
    "sector",
    "site_1",
    "site_2",
    "x1_over_a",
    "x1_over_l",
    "x2_over_a",
    "x2_over_l",
    "raw_config_index",
];

/// Formats a real with 13 significant digits in scientific notation.
pub fn sci<T: Real>(v: T) -> String {
    format!("{:.12e}", v.to_f64_lossy())
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// One parsed trajectory record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory_id: u64,
    pub time: f64,
    pub sector: usize,
    pub sites: Vec<usize>,
    pub config: ConfigIndex,
}

/// Writes the header and every trajectory, ordered as given.
pub fn write_trajectories<T: Real, W: Write>(w: W, trajs: &[Trajectory<T>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER).map_err(io_err)?;
    for t in trajs {
        write_trajectory_rows(&mut out, t)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

fn write_trajectory_rows<T: Real, W: Write>(out: &mut csv::Writer<W>, traj: &Trajectory<T>) -> Result<()> {
    let spec = &traj.spec;
    let n = spec.n_sites();
    let l = spec.length();
    let first = JumpEvent { time: traj.t0, config: traj.initial };
    for e in std::iter::once(&first).chain(&traj.events) {
        let cfg = decode_sites(e.config, n, spec.m_max())?;
        let s = cfg.sites();
        let pos = |k: usize| -> [String; 3] {
            match s.get(k) {
                Some(&site) => {
                    let c = spec.coordinate(site);
                    [site.to_string(), c.to_string(), sci(T::from_i64_exact(c) / T::from_usize_exact(n))]
                }
                None => [String::new(), String::new(), String::new()],
            }
        };
        let [s1, a1, l1] = pos(0);
        let [s2, a2, l2] = pos(1);
        out.write_record([
            traj.id.to_string(),
            sci(e.time),
            sci(e.time / l),
            s.len().to_string(),
            s1,
            s2,
            a1,
            l1,
            a2,
            l2,
            e.config.value().to_string(),
        ])
        .map_err(io_err)?;
    }
    Ok(())
}

/// Reads records written by [`write_trajectories`].
pub fn read_trajectories<R: Read>(r: R) -> Result<Vec<TrajectoryRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(io_err)?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(io_err("unexpected trajectory header"));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(io_err)?;
        let num = |k: usize| -> Result<u64> { rec[k].parse::<u64>().map_err(io_err) };
        let mut sites = Vec::new();
        for k in [4, 5] {
            if !rec[k].is_empty() {
                sites.push(num(k)? as usize);
            }
        }
        out.push(TrajectoryRecord {
            trajectory_id: num(0)?,
            time: rec[1].parse::<f64>().map_err(io_err)?,
            sector: num(3)? as usize,
            sites,
            config: ConfigIndex(num(10)?),
        });
    }
    Ok(out)
}

/// Writes a numeric table with the given header; every value is formatted with [`sci`].
pub fn write_table<T: Real, W: Write>(w: W, header: &[&str], rows: &[Vec<T>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(io_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::LengthMismatch { expected: header.len(), actual: row.len() });
        }
        out.write_record(row.iter().map(|v| sci(*v))).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}
