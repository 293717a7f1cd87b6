//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test --release --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use pwdeming::diagnostics::{fit_residual_profile, residuals, QqReference, QQ_DRAWS};
use pwdeming::inference::{jackknife, Fitter, LineFit};
use pwdeming::outliers::{detect_outliers, OutlierOptions};
use pwdeming::simlab::{generate, run_study, SimDesign, SimResult};
use pwdeming::{fit_known, fit_rl, MCDataset, PairedSample, PrecisionProfile};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(cond: bool, failures: &mut Vec<String>, what: String) {
    if !cond {
        failures.push(what);
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome { pass: true, detail: summary }
    } else {
        Outcome {
            pass: false,
            detail: format!("{summary}; failed: {}", failures.join("; ")),
        }
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load(name: &str) -> SimDesign {
    let text = fs::read_to_string(repo_root().join("configs").join(name)).expect("config exists");
    serde_json::from_str(&text).expect("config parses")
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn rel_within(value: f64, target: f64, rel: f64) -> bool {
    (value / target - 1.0).abs() <= rel
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Order-statistic band around the median holding it with about
/// three Monte-Carlo standard errors of coverage.
fn median_band(v: &[f64]) -> (f64, f64, f64) {
    let s = sorted(v.to_vec());
    let n = s.len() as f64;
    let half = 1.5 * n.sqrt();
    let lo = ((n / 2.0 - half).floor() as usize).max(0);
    let hi = ((n / 2.0 + half).ceil() as usize).min(s.len() - 1);
    (s[s.len() / 2], s[lo], s[hi])
}

fn bias_study() -> SimResult {
    run_study(&load("standalone_bias.json")).expect("figure 1 study runs")
}

fn criterion1(study: &SimResult) -> Outcome {
    let known = study.summary("Utopia").unwrap();
    let rl = study.summary("R_L").unwrap();
    let mut f = Vec::new();
    check(within(known.mean_alpha, -0.098, 0.25), &mut f, format!("known mean alpha {:.4}", known.mean_alpha));
    check(within(known.sd_alpha, 2.33, 0.25), &mut f, format!("known sd alpha {:.4}", known.sd_alpha));
    check(within(known.mean_beta, 1.002, 0.006), &mut f, format!("known mean beta {:.5}", known.mean_beta));
    check(within(known.sd_beta, 0.051, 0.006), &mut f, format!("known sd beta {:.5}", known.sd_beta));
    check(within(rl.mean_alpha, -0.090, 0.25), &mut f, format!("rl mean alpha {:.4}", rl.mean_alpha));
    check(within(rl.mean_beta, 1.004, 0.006), &mut f, format!("rl mean beta {:.5}", rl.mean_beta));
    check(rl.n_failed == 0 && known.n_failed == 0, &mut f, format!("failed fits {} {}", known.n_failed, rl.n_failed));
    verdict(
        f,
        format!(
            "known alpha {:.3} (sd {:.3}) beta {:.4} (sd {:.4}); rl alpha {:.3} beta {:.4}",
            known.mean_alpha, known.sd_alpha, known.mean_beta, known.sd_beta, rl.mean_alpha, rl.mean_beta
        ),
    )
}

fn criterion2(study: &SimResult) -> Outcome {
    let known = study.summary("Utopia").unwrap();
    let rl = study.summary("R_L").unwrap();
    let sigmas: Vec<f64> = rl.raw.iter().map(|e| e.sigma.unwrap()).collect();
    let kappas: Vec<f64> = rl.raw.iter().map(|e| e.kappa.unwrap()).collect();
    let (ms, ls, hs) = median_band(&sigmas);
    let (mk, lk, hk) = median_band(&kappas);
    let ratio = rl.rmse_beta / known.rmse_beta;
    let mut f = Vec::new();
    check(!(ls..=hs).contains(&5.0), &mut f, format!("sigma median band [{ls:.3}, {hs:.3}] holds 5"));
    check(!(lk..=hk).contains(&0.1), &mut f, format!("kappa median band [{lk:.4}, {hk:.4}] holds 0.1"));
    check((ratio - 1.0).abs() <= 0.05, &mut f, format!("slope RMSE ratio {ratio:.4}"));
    verdict(
        f,
        format!("median sigma {ms:.3} [{ls:.3}, {hs:.3}], median kappa {mk:.4} [{lk:.4}, {hk:.4}], slope RMSE rl/known {ratio:.4}"),
    )
}

fn criterion3() -> Outcome {
    let mut f = Vec::new();
    let mut parts = Vec::new();
    for (config, targets) in [
        ("constant_cv.json", [("L 1", 0.8082, 0.2355), ("ML 1", 0.2533, 0.0932)]),
        ("constant_cv_identity.json", [("L 1", 0.1120, 0.0500), ("ML 1", 0.1259, 0.0535)]),
    ] {
        let mut design = load(config);
        if config == "constant_cv_identity.json" {
            assert_eq!((design.alpha_true, design.beta_true), (0.0, 1.0));
        }
        design.keep_raw = false;
        let study = run_study(&design).expect("constant-CV study runs");
        for (label, ra, rb) in targets {
            let s = study.summary(label).unwrap();
            check(rel_within(s.rmse_alpha, ra, 0.10), &mut f, format!("{config} {label} intercept {:.4} vs {ra}", s.rmse_alpha));
            check(rel_within(s.rmse_beta, rb, 0.10), &mut f, format!("{config} {label} slope {:.4} vs {rb}", s.rmse_beta));
            parts.push(format!("{label} {:.4}/{:.4}", s.rmse_alpha, s.rmse_beta));
        }
    }
    verdict(f, parts.join(", "))
}

fn criterion4() -> Outcome {
    // (config, mean r, PB efficiencies, RL efficiencies) for intercept, slope, MDL.
    let rows = [
        ("efficiency_row11.json", "1 1", 0.9973, [84.7, 86.9, 74.5], [98.5, 98.7, 99.0]),
        ("efficiency_row22.json", "2 2", 0.9758, [80.3, 80.1, 70.8], [95.4, 100.5, 91.4]),
        ("efficiency_row33.json", "3 3", 0.9917, [84.9, 89.1, 74.7], [98.2, 98.9, 98.2]),
        ("efficiency_row44.json", "4 4", 0.9952, [84.8, 87.6, 74.0], [97.7, 98.4, 97.8]),
    ];
    let mut f = Vec::new();
    let mut parts = Vec::new();
    for (config, row, r, pb, rl) in rows {
        let study = run_study(&load(config)).expect("table study runs");
        check(within(study.mean_correlation, r, 0.002), &mut f, format!("row {row} mean r {:.4} vs {r}", study.mean_correlation));
        let mut line = format!("row {row}: r {:.4}", study.mean_correlation);
        for (label, want) in [("P_B", pb), ("R_L", rl)] {
            let s = study.summary(label).unwrap();
            let got = [s.eff_alpha.unwrap(), s.eff_beta.unwrap(), s.eff_mdl.unwrap()];
            for (k, what) in ["intercept", "slope", "MDL"].iter().enumerate() {
                check(
                    within(got[k], want[k], 5.0),
                    &mut f,
                    format!("row {row} {label} {what} eff {:.1} vs {}", got[k], want[k]),
                );
            }
            line.push_str(&format!(" {label} {:.1}/{:.1}/{:.1}", got[0], got[1], got[2]));
        }
        parts.push(line);
    }
    verdict(f, parts.join("; "))
}

fn criterion5() -> Outcome {
    let p = PrecisionProfile::rocke_lorenzato(5.0, 0.1).unwrap();
    let mut f = Vec::new();
    let (mut worst_known, mut worst_rl) = (0.0f64, 0.0f64);
    let mut count = 0;
    for k in 0..21u64 {
        let n = [8usize, 10, 12][(k % 3) as usize];
        let d = common::rl_dataset(n, 5000 + k, 0);
        let known = fit_known(&d, &p, &p).expect("known fit");
        let (a, b) = common::oracle_known(&d, &p, &p);
        let dk = (known.alpha - a).abs().max((known.beta - b).abs());
        worst_known = worst_known.max(dk);
        check(dk < 1e-5, &mut f, format!("dataset {k} known diff {dk:.2e}"));
        let rl = fit_rl(&d, 1.0).expect("rl fit");
        let (a, b, _) = common::oracle_rl(&d, 1.0);
        let dr = (rl.alpha - a).abs().max((rl.beta - b).abs());
        worst_rl = worst_rl.max(dr);
        check(dr < 1e-5, &mut f, format!("dataset {k} rl diff {dr:.2e}"));
        count += 1;
    }
    verdict(f, format!("{count} datasets, largest difference known {worst_known:.2e}, rl {worst_rl:.2e}"))
}

fn criterion6() -> Outcome {
    let families = [
        PrecisionProfile::rocke_lorenzato(5.0, 0.1).unwrap(),
        PrecisionProfile::constant_cv(0.12).unwrap(),
        PrecisionProfile::linear_sd(2.0, 0.05).unwrap(),
        PrecisionProfile::constant_variance(30.0).unwrap(),
    ];
    let mut f = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let profile = families[(k % 4) as usize];
        let d = generate(&common::design(40, profile, 6000 + k), 0).unwrap();
        let base = fit_known(&d, &profile, &profile).expect("base fit");
        for lambda in [0.1, 1.0, 25.0] {
            let scaled = profile.scale(lambda).unwrap();
            let fit = fit_known(&d, &scaled, &scaled).expect("scaled fit");
            // Intercepts near zero are compared on the unit concentration scale.
            let rel = ((fit.alpha - base.alpha).abs() / base.alpha.abs().max(1.0))
                .max((fit.beta - base.beta).abs() / base.beta.abs());
            worst = worst.max(rel);
            check(rel <= 1e-8, &mut f, format!("dataset {k} lambda {lambda}: {rel:.2e}"));
        }
    }
    verdict(f, format!("100 datasets x 3 scalings, largest relative change {worst:.2e}"))
}

/// Places the cases at the lowest and highest `x` six residual SDs above and
/// below the true line, in opposite directions.
fn contaminate(data: &MCDataset, design: &SimDesign, sign: f64) -> (MCDataset, Vec<usize>) {
    let mu = design.mu_grid();
    let mut samples: Vec<PairedSample> = data.samples().to_vec();
    let lo = (0..samples.len()).min_by(|&a, &b| samples[a].x.total_cmp(&samples[b].x)).unwrap();
    let hi = (0..samples.len()).max_by(|&a, &b| samples[a].x.total_cmp(&samples[b].x)).unwrap();
    for (pos, s) in [(lo, sign), (hi, -sign)] {
        let m = mu[samples[pos].index - 1];
        let b = design.beta_true;
        let sd = (design.profile_y.at(design.alpha_true + b * m) + b * b * design.profile_x.at(m)).sqrt();
        samples[pos].y = design.alpha_true + b * samples[pos].x + s * 6.0 * sd;
    }
    let mut planted = vec![samples[lo].index, samples[hi].index];
    planted.sort_unstable();
    (MCDataset::new(samples).unwrap(), planted)
}

fn criterion7() -> Outcome {
    let profile = PrecisionProfile::rocke_lorenzato(5.0, 0.1).unwrap();
    let fitter = Fitter::Rl { lambda: 1.0 };
    let opts = OutlierOptions { k_max: Some(5), alpha_level: 0.05 };
    let design = common::design(100, profile, 7001);
    let mut recovered = 0usize;
    let mut close = 0usize;
    let mut errors = 0usize;
    for r in 0..500u64 {
        let clean = generate(&design, r).unwrap();
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        let (data, planted) = contaminate(&clean, &design, sign);
        match detect_outliers(&data, &fitter, &opts) {
            Ok(rep) => {
                let mut found = rep.outlier_indices();
                found.sort_unstable();
                if found == planted {
                    recovered += 1;
                    // Post-removal line against the uncontaminated fit and its jackknife SEs.
                    if let Ok(base) = jackknife(&clean, &fitter) {
                        let fit = &rep.clean_fit;
                        if (fit.alpha() - base.alpha).abs() <= base.se_alpha
                            && (fit.beta() - base.beta).abs() <= base.se_beta
                        {
                            close += 1;
                        }
                    }
                }
            }
            Err(_) => errors += 1,
        }
    }
    let clean_design = common::design(100, profile, 7002);
    let mut alarms = 0usize;
    let mut clean_errors = 0usize;
    for r in 0..1000u64 {
        let data = generate(&clean_design, r).unwrap();
        match detect_outliers(&data, &fitter, &opts) {
            Ok(rep) if !rep.outliers.is_empty() => alarms += 1,
            Ok(_) => {}
            Err(_) => clean_errors += 1,
        }
    }
    let recovery = recovered as f64 / 500.0;
    let false_alarm = (alarms + clean_errors) as f64 / 1000.0;
    let mut f = Vec::new();
    check(recovery >= 0.95, &mut f, format!("recovery {recovery:.3}"));
    check(false_alarm <= 0.10, &mut f, format!("false alarm {false_alarm:.3}"));
    check(close == recovered, &mut f, format!("{} recovered runs off by more than 1 SE", recovered - close));
    verdict(
        f,
        format!(
            "exact recovery {recovered}/500 ({errors} errors), {close} within 1 jackknife SE, clean runs flagged {alarms}/1000 ({clean_errors} errors)"
        ),
    )
}

fn criterion8() -> Outcome {
    let n = 100;
    let profile = PrecisionProfile::rocke_lorenzato(5.0, 0.1).unwrap();
    let design = common::design(n, profile, 8001);
    let fitter = Fitter::Known { gx: profile, hy: profile };
    let reference = QqReference::new(n, QQ_DRAWS, 8002).unwrap();
    let (mut sd_sum, mut rejections) = (0.0, 0usize);
    for r in 0..1000u64 {
        let d = generate(&design, r).unwrap();
        let fit = fitter.fit(&d).unwrap();
        let res = residuals(&d, &fit).unwrap();
        sd_sum += res.sd_r;
        if reference.p_value(&res.r).unwrap() < 0.05 {
            rejections += 1;
        }
    }
    let mean_sd = sd_sum / 1000.0;
    let reject_rate = rejections as f64 / 1000.0;

    let flat = PrecisionProfile::constant_variance(16.0).unwrap();
    let flat_design = common::design(n, flat, 8003);
    let mut accepted = 0usize;
    for r in 0..1000u64 {
        let d = generate(&flat_design, r).unwrap();
        let fit = fit_known(&d, &flat, &flat).unwrap();
        let res = residuals(&d, &LineFit::Known(fit)).unwrap();
        if fit_residual_profile(&d.xs(), &res.r).unwrap().p_const_sd > 0.05 {
            accepted += 1;
        }
    }
    let accept_rate = accepted as f64 / 1000.0;

    let mut f = Vec::new();
    check((0.97..=1.03).contains(&mean_sd), &mut f, format!("mean sd(r) {mean_sd:.4}"));
    check(accept_rate >= 0.90, &mut f, format!("constant-SD acceptance {accept_rate:.3}"));
    check((0.03..=0.07).contains(&reject_rate), &mut f, format!("QQ rejection {reject_rate:.3}"));
    verdict(
        f,
        format!("mean sd(r) {mean_sd:.4}, constant-SD p > 0.05 in {accept_rate:.3}, QQ rejection {reject_rate:.3}"),
    )
}

fn criterion9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_pwdeming");
    let dir = std::env::temp_dir().join(format!("pwdeming-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let d = common::rl_dataset(60, 9001, 0);
    let mut csv = String::from("id,x,y\n");
    for s in d.samples() {
        csv.push_str(&format!("{},{:?},{:?}\n", s.index, s.x, s.y));
    }
    let data = dir.join("data.csv");
    fs::write(&data, csv).unwrap();
    let mut design = load("efficiency_row11.json");
    design.replicates = 20;
    let config = dir.join("design.json");
    fs::write(&config, serde_json::to_string(&design).unwrap()).unwrap();
    let rl = r#"{"family":"RockeLorenzato","params":{"sigma":5.0,"kappa":0.1}}"#;
    let (data_s, config_s) = (data.to_str().unwrap(), config.to_str().unwrap());
    let invocations: Vec<Vec<&str>> = vec![
        vec!["fit", data_s, "--format", "json", "--mdl", "30", "--outliers", "--seed", "11"],
        vec!["fit", data_s, "--format", "json", "--profile-x", rl, "--profile-y", rl, "--outliers"],
        vec!["simulate", "--config", config_s, "--format", "json"],
    ];
    let mut f = Vec::new();
    for args in &invocations {
        let a = Command::new(bin).args(args).output().unwrap();
        let b = Command::new(bin).args(args).output().unwrap();
        check(a.status.success(), &mut f, format!("{} exited {:?}", args[0], a.status.code()));
        check(!a.stdout.is_empty() && a.stdout == b.stdout, &mut f, format!("{} output differs", args[0]));
    }
    let _ = fs::remove_dir_all(&dir);
    verdict(f, format!("{} invocations repeated, outputs byte-identical", invocations.len()))
}

fn report(out: &mut impl Write, id: usize, name: &str, started: Instant, outcome: &Outcome) {
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        out,
        "{tag} criterion {id} {name} [{:.1}s]: {}",
        started.elapsed().as_secs_f64(),
        outcome.detail
    );
    let _ = out.flush();
}

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut all = true;
    let mut run = |id: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        all &= o.pass;
        report(&mut out, id, name, t, &o);
    };
    let t = Instant::now();
    let study = bias_study();
    let setup = t.elapsed();
    run(1, "standalone fit accuracy", &|| criterion1(&study));
    run(2, "standalone profile bias", &|| criterion2(&study));
    run(3, "constant-CV comparison", &criterion3);
    run(4, "efficiency table rows", &criterion4);
    run(5, "oracle equivalence", &criterion5);
    run(6, "scale invariance", &criterion6);
    run(7, "outlier screen", &criterion7);
    run(8, "diagnostic calibration", &criterion8);
    run(9, "deterministic output", &criterion9);
    let _ = writeln!(
        std::io::stdout(),
        "bias study setup {:.1}s; {}",
        setup.as_secs_f64(),
        if all { "all criteria pass" } else { "some criteria fail" }
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
