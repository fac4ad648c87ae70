//! Trajectory and diagnostics files: comma-separated values with a header
//! row, floats at 17 significant digits so parsing an emitted file
//! reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use hdp_core::{FullState, ReducedState, Rot3, Trajectory, Vec3};

/// 17 significant digits; round-trips every finite f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_rot(out: &mut String, r: &Rot3) {
    let m = r.matrix();
    for i in 0..3 {
        for j in 0..3 {
            out.push(',');
            out.push_str(&fmt_f64(m[(i, j)]));
        }
    }
}

fn push_vec(out: &mut String, v: &Vec3) {
    for i in 0..3 {
        out.push(',');
        out.push_str(&fmt_f64(v[i]));
    }
}

fn rot_header(prefix: &str) -> String {
    let mut h = String::new();
    for i in 1..=3 {
        for j in 1..=3 {
            let _ = write!(h, ",{prefix}{i}{j}");
        }
    }
    h
}

fn vec_header(prefix: &str) -> String {
    format!(",{prefix}1,{prefix}2,{prefix}3")
}

pub fn full_csv(traj: &Trajectory<FullState>) -> String {
    let mut out = format!(
        "t{}{}{}{}{}{}\n",
        rot_header("r"),
        vec_header("pi"),
        vec_header("e"),
        vec_header("sigma"),
        rot_header("c"),
        vec_header("gamma")
    );
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        out.push_str(&fmt_f64(*t));
        push_rot(&mut out, &s.r);
        push_vec(&mut out, &s.pi);
        push_vec(&mut out, &s.e);
        push_vec(&mut out, &s.sigma);
        push_rot(&mut out, &s.c);
        push_vec(&mut out, &s.gamma);
        out.push('\n');
    }
    out
}

pub fn reduced_csv(traj: &Trajectory<ReducedState>) -> String {
    let mut out = format!(
        "t{}{}{}{}{}\n",
        rot_header("r"),
        vec_header("pi"),
        vec_header("e"),
        vec_header("sigma"),
        vec_header("mu")
    );
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        out.push_str(&fmt_f64(*t));
        push_rot(&mut out, &s.x.r);
        push_vec(&mut out, &s.y.pi);
        push_vec(&mut out, &s.x.e);
        push_vec(&mut out, &s.y.sigma);
        push_vec(&mut out, &s.mu);
        out.push('\n');
    }
    out
}

pub fn rotation_csv(times: &[f64], path: &[Rot3]) -> String {
    let mut out = format!("t{}\n", rot_header("c"));
    for (t, r) in times.iter().zip(path.iter()) {
        out.push_str(&fmt_f64(*t));
        push_rot(&mut out, r);
        out.push('\n');
    }
    out
}

/// Pointwise deviation between the projected full trajectory and the
/// reduced one: per-slot infinity norms plus the overall maximum.
pub fn deviation_csv(full: &Trajectory<FullState>, reduced: &Trajectory<ReducedState>) -> String {
    let mut out = String::from("t,max,r,pi,e,sigma,mu\n");
    for ((t, f), r) in full
        .times
        .iter()
        .zip(full.states.iter())
        .zip(reduced.states.iter())
    {
        let p = hdp_core::reduce_trivial(f);
        let dr = (p.x.r.matrix() - r.x.r.matrix()).amax();
        let dpi = (p.y.pi - r.y.pi).amax();
        let de = (p.x.e - r.x.e).amax();
        let dsigma = (p.y.sigma - r.y.sigma).amax();
        let dmu = (p.mu - r.mu).amax();
        let max = dr.max(dpi).max(de).max(dsigma).max(dmu);
        out.push_str(&fmt_f64(*t));
        for v in [max, dr, dpi, de, dsigma, dmu] {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, content: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, content)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_formatting_round_trips() {
        for x in [
            0.1,
            -3.0e-17,
            std::f64::consts::PI,
            1.0 / 3.0,
            9.81,
            f64::MIN_POSITIVE,
        ] {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
