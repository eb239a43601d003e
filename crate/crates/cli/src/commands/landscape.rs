use std::io::Write;

use simodel::orthopoly::GegenbauerBasis;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Output;
use crate::svg::{Mark, Plot, PALETTE};

/// Curves `m ↦ P_{s,d}(m)` with their largest zeros.
pub fn cmd_landscape(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let s = config.landscape.as_ref().expect("validated");
    let mut curves = Vec::new();
    let mut zeros = Vec::new();
    for &d in &s.dimensions {
        let basis = GegenbauerBasis::new(d, s.degree)?;
        let pts: Vec<(f64, f64)> = (0..s.points)
            .map(|i| {
                let m = -1.0 + 2.0 * i as f64 / (s.points - 1) as f64;
                basis.eval(s.degree, m).map(|p| (m, p))
            })
            .collect::<Result<_, _>>()?;
        let z = if s.degree >= 2 {
            basis.largest_root(s.degree)?
        } else {
            0.0
        };
        curves.push((d, pts));
        zeros.push((d, z));
    }
    out.csv("landscape_curves.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["d", "m", "p"])?;
        for (d, pts) in &curves {
            for (m, p) in pts {
                w.write_record([d.to_string(), m.to_string(), p.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    out.csv("largest_zeros.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["d", "z", "z_sqrt_d"])?;
        for (d, z) in &zeros {
            w.write_record([d.to_string(), z.to_string(), (z * (*d as f64).sqrt()).to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let mut plot = Plot::new(&format!("degree-{} Gegenbauer polynomials", s.degree), "m", "P(m)");
    for (k, ((d, pts), (_, z))) in curves.iter().zip(&zeros).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        plot.add(&format!("d = {d}"), color, Mark::Line, pts.clone());
        plot.add("", color, Mark::Points, vec![(*z, 0.0), (-*z, 0.0)]);
    }
    out.svg("landscape.svg", plot.render())?;
    let mut summary = Vec::new();
    for (d, z) in &zeros {
        writeln!(summary, "d = {d}: largest zero {z:.6}")?;
    }
    log::info!("{}", String::from_utf8_lossy(&summary).trim_end());
    Ok(())
}
