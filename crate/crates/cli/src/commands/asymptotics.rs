use serde_json::json;
use tfe10_core::asymptotics::{
    hj_residual, interface_position, interface_similarity, kato_gap, lambda_root, spectrum, SpectralModel,
};

use crate::args::{AsymptoticsCommand, OutputArgs};
use crate::check::gaussian;
use crate::config::Overrides;
use crate::output::{OutputTable, Run};
use crate::svg::{line_plot, Series};
use crate::CliError;

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// These subcommands take no config keys; any key in the file is unknown.
fn no_config(o: &OutputArgs) -> Result<(), CliError> {
    Overrides::load(o.config.as_deref())?.finish()
}

pub fn run(cmd: AsymptoticsCommand) -> Result<(), CliError> {
    match cmd {
        AsymptoticsCommand::Interface { n, t, output } => {
            no_config(&output)?;
            if n.iter().any(|&v| !(v > 0.0 && v.is_finite())) || t.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(CliError::Usage("n and t must be positive".into()));
            }
            let mut run = Run::start("asymptotics interface", json!({ "n": n, "t": t }), json!({}), output.out.as_deref())?;
            let mut tab = OutputTable::new("interface", &["n", "t", "y0", "x0"]);
            let mut rows = Vec::new();
            for &nv in &n {
                for &tv in &t {
                    let (y0, x0) = (interface_similarity(nv), interface_position(nv, tv));
                    println!("n = {nv}, t = {tv}: y0 = {y0}, x0 = {x0}");
                    tab.push(&[nv, tv, y0, x0])?;
                    rows.push(json!({ "n": nv, "t": tv, "y0": y0, "x0": x0 }));
                }
            }
            run.write_table("interface", &tab)?;
            if output.svg {
                let pts = n.iter().map(|&v| (v, interface_similarity(v))).collect();
                run.write_svg("interface", &line_plot("Interface asymptote", "n", "y0", &[Series::new("y0", pts)]))?;
            }
            run.finish("ok", json!({ "rows": rows }))?;
        }
        AsymptoticsCommand::Spectrum { big_n, k_max, n, output } => {
            no_config(&output)?;
            if !(n >= 0.0 && n.is_finite()) || big_n == 0 {
                return Err(CliError::Usage("need n ≥ 0 and N ≥ 1".into()));
            }
            let params = json!({ "N": big_n, "K": k_max, "n": n });
            let mut run = Run::start("asymptotics spectrum", params, json!({}), output.out.as_deref())?;
            let s = spectrum(big_n, k_max, n);
            let mut tab = OutputTable::new("spectrum", &["k", "lambda", "alpha", "sigma_bn"]);
            let mut alphas = Vec::new();
            for k in 0..=k_max {
                let a = SpectralModel::new(big_n, k).alpha_k(n);
                println!("k = {k}: lambda = {}, alpha = {a}", s.sigma_b[k]);
                tab.push(&[k as f64, s.sigma_b[k], a, s.sigma_bn[k]])?;
                alphas.push(a);
            }
            run.write_table("spectrum", &tab)?;
            run.finish("ok", json!({ "alpha": alphas, "sigma_b": s.sigma_b, "sigma_bn": s.sigma_bn }))?;
        }
        AsymptoticsCommand::Lambda { output } => {
            no_config(&output)?;
            let mut run = Run::start("asymptotics lambda", json!({}), json!({}), output.out.as_deref())?;
            let r = lambda_root();
            println!("lambda = {}", r.lambda);
            println!("sextic residual = {:e}", r.sextic_residual);
            println!("decic residual = {:e}", r.decic_residual);
            let mut tab = OutputTable::new("lambda", &["lambda", "sextic_residual", "decic_residual"]);
            tab.push(&[r.lambda, r.sextic_residual, r.decic_residual])?;
            run.write_table("lambda", &tab)?;
            run.finish("ok", serde_json::to_value(r)?)?;
        }
        AsymptoticsCommand::Hj { x, t, h, levels, output } => {
            no_config(&output)?;
            if levels < 2 || !(h > 0.0) {
                return Err(CliError::Usage("need h > 0 and at least two levels".into()));
            }
            let params = json!({ "x": x, "t": t, "h": h, "levels": levels });
            let mut run = Run::start("asymptotics hj", params, json!({}), output.out.as_deref())?;
            let mut tab = OutputTable::new("hj", &["h", "residual"]);
            let mut res = Vec::new();
            for i in 0..levels {
                let hi = h / 2f64.powi(i as i32);
                let r = hj_residual(x, t, hi).map_err(usage)?;
                tab.push(&[hi, r])?;
                res.push(r);
            }
            let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
            println!("residuals {res:?}");
            println!("observed orders {orders:?}");
            run.write_table("hj", &tab)?;
            run.finish("ok", json!({ "residuals": res, "orders": orders }))?;
        }
        AsymptoticsCommand::Kato { n, k, big_n, points, width, output } => {
            no_config(&output)?;
            if n.iter().any(|&v| !(v > 0.0 && v.is_finite())) || !(width > 0.0) {
                return Err(CliError::Usage("need n > 0 and width > 0".into()));
            }
            let params = json!({ "n": n, "k": k, "N": big_n, "points": points, "width": width });
            let mut run = Run::start("asymptotics kato", params, json!({}), output.out.as_deref())?;
            let u = gaussian(points, width);
            let mut tab = OutputTable::new("kato", &["n", "measured", "bound", "u_norm"]);
            let mut rows = Vec::new();
            for &nv in &n {
                let g = kato_gap(&u, nv, k, big_n).map_err(usage)?;
                println!("n = {nv}: measured {:e}, bound {:e}", g.measured, g.bound);
                tab.push(&[nv, g.measured, g.bound, g.u_norm])?;
                rows.push(g);
            }
            run.write_table("kato", &tab)?;
            let within = rows.iter().all(|g| g.measured <= g.bound);
            if !within {
                run.warn("measured operator difference exceeds the bound");
            }
            run.finish("ok", json!({ "rows": rows, "bound_holds": within }))?;
        }
    }
    Ok(())
}
