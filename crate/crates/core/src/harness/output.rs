//! CSV and JSON writers.

use std::io::Write;

use super::{ConvergenceReport, RunReport};
use crate::realizability::RealizablePolytope;
use crate::Result;

/// `x,u_0,...,u_n` at cell centres.
pub fn write_profile(w: &mut impl Write, report: &RunReport) -> Result<()> {
    let n = report.state.n_mom();
    let header: Vec<String> = std::iter::once("x".to_string())
        .chain((0..n).map(|i| format!("u_{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let mesh = report.mesh();
    for j in 0..report.state.len() {
        let u = report.state.eval(j, 0.0);
        write!(w, "{:e}", mesh.center(j))?;
        for v in u.iter() {
            write!(w, ",{v:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `t,x,theta`
pub fn write_theta_log(w: &mut impl Write, report: &RunReport) -> Result<()> {
    writeln!(w, "t,x,theta")?;
    for e in &report.theta_log {
        writeln!(w, "{:e},{:e},{:e}", e.t, e.x, e.theta)?;
    }
    Ok(())
}

/// `t,x,r`
pub fn write_regularization_log(w: &mut impl Write, report: &RunReport) -> Result<()> {
    writeln!(w, "t,x,r")?;
    for e in &report.regularization_log {
        writeln!(w, "{:e},{:e},{:e}", e.t, e.x, e.r)?;
    }
    Ok(())
}

/// `t,mass,predicted_change`
pub fn write_mass(w: &mut impl Write, report: &RunReport) -> Result<()> {
    writeln!(w, "t,mass,predicted_change")?;
    for s in &report.mass {
        writeln!(w, "{:e},{:e},{:e}", s.t, s.mass, s.predicted_change)?;
    }
    Ok(())
}

pub fn write_summary(w: &mut impl Write, report: &RunReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, report).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

/// One line per row: `J`, then `E1,nu1,Einf,nuinf` per component, then `theta_max`.
pub fn write_convergence(w: &mut impl Write, report: &ConvergenceReport) -> Result<()> {
    let comps: Vec<usize> = report
        .rows
        .first()
        .map(|r| r.errors.iter().map(|e| e.component).collect())
        .unwrap_or_default();
    let mut header = vec!["J".to_string()];
    for c in &comps {
        header.extend([format!("E1_u{c}"), format!("nu1_u{c}"), format!("Einf_u{c}"), format!("nuinf_u{c}")]);
    }
    header.push("theta_max".into());
    writeln!(w, "{}", header.join(","))?;
    let fmt_nu = |nu: Option<f64>| nu.map_or(String::new(), |v| format!("{v:.3}"));
    for r in &report.rows {
        write!(w, "{}", r.cells)?;
        for e in &r.errors {
            write!(w, ",{:.4e},{},{:.4e},{}", e.e1, fmt_nu(e.nu1), e.einf, fmt_nu(e.nuinf))?;
        }
        match r.theta_max {
            Some(t) => writeln!(w, ",{t:.3e}")?,
            None => writeln!(w, ",")?,
        }
    }
    Ok(())
}

/// Slice facets `a . (u_1, ..., u_N) <= b` as `a_0,...,a_{N-1},b`.
pub fn write_facets(w: &mut impl Write, poly: &RealizablePolytope) -> Result<()> {
    let d = poly.dim();
    let header: Vec<String> = (0..d).map(|i| format!("a_{i}")).chain(std::iter::once("b".into())).collect();
    writeln!(w, "{}", header.join(","))?;
    for f in poly.facets() {
        let row: Vec<String> = f.normal.iter().map(|a| format!("{a:e}")).collect();
        writeln!(w, "{},{:e}", row.join(","), f.offset)?;
    }
    Ok(())
}
