//! Plot data for the four diagnostic panels, written as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pwdeming::diagnostics::{blom_quantiles, ResidualSet};
use pwdeming::MCDataset;

use crate::Failure;

pub const LINE_SAMPLES: usize = 101;

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::write(dir.join(name), body).map_err(|e| Failure::Data(format!("cannot write {name}: {e}")))
}

pub fn write_all(dir: &Path, data: &MCDataset, alpha: f64, beta: f64, res: &ResidualSet) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))?;
    let s = data.samples();

    let mut scatter = String::from("index,x,y\n");
    for p in s {
        let _ = writeln!(scatter, "{},{},{}", p.index, p.x, p.y);
    }
    write(dir, "scatter.csv", &scatter)?;

    let lo = s.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi = s.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let mut line = String::from("x,fitted\n");
    for k in 0..LINE_SAMPLES {
        let x = lo + (hi - lo) * k as f64 / (LINE_SAMPLES - 1) as f64;
        let _ = writeln!(line, "{x},{}", alpha + beta * x);
    }
    write(dir, "scatter_line.csv", &line)?;

    let mut by_x = String::from("index,x,residual\n");
    for (p, e) in s.iter().zip(&res.e) {
        let _ = writeln!(by_x, "{},{},{e}", p.index, p.x);
    }
    write(dir, "residuals_vs_x.csv", &by_x)?;

    let mut by_index = String::from("index,scaled_residual\n");
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by_key(|&i| s[i].index);
    for &i in &order {
        let _ = writeln!(by_index, "{},{}", s[i].index, res.r[i]);
    }
    write(dir, "scaled_residuals_vs_index.csv", &by_index)?;

    let mut sorted = res.r.clone();
    sorted.sort_by(f64::total_cmp);
    let mut qq = String::from("theoretical,ordered_residual\n");
    for (t, r) in blom_quantiles(sorted.len()).iter().zip(&sorted) {
        let _ = writeln!(qq, "{t},{r}");
    }
    write(dir, "qq.csv", &qq)
}
