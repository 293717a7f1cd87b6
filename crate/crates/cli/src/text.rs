use std::fmt::Write as _;

use pwdeming::inference::LineFit;

use crate::report::AnalysisReport;

pub fn render(r: &AnalysisReport) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "Input {}  n {}", r.input.source, r.input.n);
    let _ = writeln!(o, "Pearson correlation {:.4}  Spearman {:.4}", r.input.pearson, r.input.spearman);
    match &r.fit {
        LineFit::Known(f) => {
            let _ = writeln!(o, "Known precision profiles  X: {}  Y: {}", f.profile_x, f.profile_y);
        }
        LineFit::Rl(f) => {
            let _ = writeln!(
                o,
                "Common profile fitted  sigma {:.4}  kappa {:.4}  lambda {}",
                f.sigma, f.kappa, f.lambda
            );
        }
    }
    let _ = writeln!(o, "-2 log likelihood {:.4}", r.fit.minus2_log_l());
    let i = &r.inference;
    let pct = 100.0 * i.level;
    let _ = writeln!(o, "\nCoefficient  Estimate      se    {pct:.0}% CI");
    let _ = writeln!(o, "Intercept   {:>9.3} {:>7.3}  {:>8.3} {:>8.3}", i.alpha, i.se_alpha, i.ci_alpha.0, i.ci_alpha.1);
    let _ = writeln!(o, "Slope       {:>9.3} {:>7.3}  {:>8.3} {:>8.3}", i.beta, i.se_beta, i.ci_beta.0, i.ci_beta.1);
    let _ = writeln!(o, "Covariance  {:.6}", i.cov_ab);
    if let Some(p) = &r.prediction {
        let _ = writeln!(o, "MDL {:.3}  prediction {:.3}  se {:.3}  CI {:.3} {:.3}", p.x0, p.yhat, p.se, p.ci.0, p.ci.1);
    }
    let s = &r.residuals;
    let _ = writeln!(o, "\nScaled residual SD and CI  {:.3}  {:.3}  {:.3}", s.sd_r, s.sd_r_ci.0, s.sd_r_ci.1);
    if let Some(p) = &r.residual_profile {
        let _ = writeln!(o, "Residual profile  sigma_r {:.4}  kappa_r {:.4}", p.sigma_r, p.kappa_r);
        let _ = writeln!(o, "P constant SD {:.4}  P constant CV {:.4}", p.p_const_sd, p.p_const_cv);
    }
    if let Some(q) = &r.qq {
        let _ = writeln!(o, "QQ correlation {:.4}  normality P {:.4}", q.correlation, q.p_value);
    }
    if let Some(pb) = &r.passing_bablok {
        let _ = writeln!(o, "\nPassing-Bablok  intercept {:.3}  slope {:.3}", pb.alpha, pb.beta);
        if let (Some(a), Some(b)) = (pb.ci_alpha, pb.ci_beta) {
            let _ = writeln!(o, "  intercept CI {:.3} {:.3}  slope CI {:.3} {:.3}", a.0, a.1, b.0, b.1);
        }
    }
    if let Some(out) = &r.outliers {
        let _ = writeln!(o, "\nOutlier screen  K {}  alpha {}", out.k_max, out.alpha_level);
        for t in &out.forward_trace {
            let _ = writeln!(o, "Suspect {} outlier Z {:.2}", t.index, t.z);
        }
        for step in &out.backward_trace {
            for t in &step.tests {
                let _ = writeln!(
                    o,
                    "  clean {}  case {}  Z {:.2}  Bonferroni P {:.4}",
                    step.clean_n, t.index, t.z, t.bonferroni_p
                );
            }
            if let Some(back) = step.reincluded {
                let _ = writeln!(o, "  reinclude {back}");
            }
        }
        if out.outliers.is_empty() {
            let _ = writeln!(o, "No significant outliers");
        } else {
            let ids: Vec<String> = out.outliers.iter().map(|t| t.index.to_string()).collect();
            let _ = writeln!(o, "Outliers: {}", ids.join(" "));
            let _ = writeln!(
                o,
                "Clean fit  intercept {:.3}  slope {:.3}",
                out.clean_fit.alpha(),
                out.clean_fit.beta()
            );
        }
    }
    o
}
