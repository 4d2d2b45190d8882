//! CSV renderings of fields, diagnostics, coefficients and dispersion scans.
//!
//! Every float is written with 17 significant digits, which round-trips an
//! `f64` exactly.

use std::io::{self, Write};

use crate::integrator::{SeriesRow, State};
use crate::spectral::InfectionFreeSolution;
use crate::stability::DispersionPoint;

/// `v` in scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Short label for a time in file names: at most six decimals, trailing zeros
/// dropped (`1.0 → "1"`, `0.25 → "0.25"`).
pub fn time_label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn row<W: Write + ?Sized>(w: &mut W, values: &[f64]) -> io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(fmt_f64(*v).as_bytes())?;
    }
    w.write_all(b"\n")
}

/// `x,y,S,I,R`, one row per cell, x varying fastest.
pub fn write_field_csv<W: Write + ?Sized>(w: &mut W, state: &State) -> io::Result<()> {
    writeln!(w, "x,y,S,I,R")?;
    let g = state.grid();
    for iy in 0..g.nx() {
        for ix in 0..g.nx() {
            let k = g.index(iy, ix);
            let (x, y) = (g.center(ix), g.center(iy));
            row(
                w,
                &[
                    x,
                    y,
                    state.s.values()[k],
                    state.i.values()[k],
                    state.r.values()[k],
                ],
            )?;
        }
    }
    Ok(())
}

pub const TIMESERIES_HEADER: &str = "t,N,mass_s,mass_i,mass_r,linf_s,linf_i,linf_r,l2_i,min_value";

pub fn write_timeseries_csv<W: Write + ?Sized>(w: &mut W, series: &[SeriesRow]) -> io::Result<()> {
    writeln!(w, "{TIMESERIES_HEADER}")?;
    for r in series {
        row(
            w,
            &[
                r.t,
                r.n,
                r.mass_s,
                r.mass_i,
                r.mass_r,
                r.linf_s,
                r.linf_i,
                r.linf_r,
                r.l2_i,
                r.min_value,
            ],
        )?;
    }
    Ok(())
}

/// `n,m,c,d,e,f,resonant` with `resonant` as 0 or 1.
pub fn write_coeffs_csv<W: Write + ?Sized>(
    w: &mut W,
    sol: &InfectionFreeSolution,
) -> io::Result<()> {
    writeln!(w, "n,m,c,d,e,f,resonant")?;
    for (n, m, c) in sol.c.iter() {
        let vals = [c, sol.d.get(n, m), sol.e.get(n, m), sol.f.get(n, m)].map(fmt_f64);
        writeln!(
            w,
            "{n},{m},{},{}",
            vals.join(","),
            u8::from(sol.is_resonant(n, m))
        )?;
    }
    Ok(())
}

pub fn write_dispersion_csv<W: Write + ?Sized>(
    w: &mut W,
    points: &[DispersionPoint],
) -> io::Result<()> {
    writeln!(w, "k2,re1,im1,re2,im2,re3,im3,max_re")?;
    for p in points {
        let [a, b, c] = p.eigs;
        row(w, &[p.k2, a.re, a.im, b.re, b.im, c.re, c.im, p.max_re])?;
    }
    Ok(())
}

/// Renders any of the writers above into a `String`.
pub fn to_csv_string(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}
