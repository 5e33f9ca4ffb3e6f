//! Pilot runs for the statistical acceptance bands. Not part of the test
//! suite; prints the observed statistics so bands and seeds can be pinned.

use hsn_core::data::SyntheticSpec;
use hsn_core::experiments::{
    clt_diagnostic, hessian_convergence, mse_curve, qsl_diagnostic, rate_slope, value_at,
    CltConfig, HessianConfig, QslConfig, SynthRunConfig, DEFAULT_RATE_WINDOW,
};
use hsn_core::model::HybridWeights;
use hsn_core::optim::{Algorithm, Cadence, TruncationSchedule};

fn hsn(alpha: f64, beta: f64) -> Algorithm {
    Algorithm::Hsn {
        weights: HybridWeights::new(alpha, beta).unwrap(),
    }
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let all = which.is_empty();
    let has = |name: &str| all || which.iter().any(|w| w == name);
    let rate_seeds: Vec<u64> = vec![42, 7, 1234];
    let clt_seeds: Vec<u64> = vec![37, 24, 52];
    let qsl_seeds: Vec<u64> = vec![39, 27, 2];

    if has("rates") {
        for &seed in &rate_seeds {
            let spec = SyntheticSpec::new(5, seed, seed);
            let mut config = SynthRunConfig::new(hsn(0.5, 0.5), spec, 100_000);
            config.cadence = Cadence::powers_of_two_with(100_000, &[1_000, 10_000, 100_000]);
            let t0 = std::time::Instant::now();
            let curve = mse_curve(&config, 20).unwrap();
            let slope = rate_slope(&curve, DEFAULT_RATE_WINDOW).unwrap();
            let at_1e3 = value_at(&curve, 1_000).unwrap();
            let at_1e5 = value_at(&curve, 100_000).unwrap();
            println!(
                "[rates seed={seed}] mse(1e3)={at_1e3:.5e} mse(1e5)={at_1e5:.5e} ratio={:.1} slope={slope:.3} ({:.1?})",
                at_1e3 / at_1e5,
                t0.elapsed()
            );
        }
    }

    if has("hessian") {
        for &seed in &rate_seeds {
            let spec = SyntheticSpec::new(5, seed, seed);
            let t0 = std::time::Instant::now();
            let mut hc = HessianConfig::new(hsn(0.5, 0.5), spec, 100_000, 20);
            hc.oracle_seed = seed;
            let (report, _) = hessian_convergence(&hc).unwrap();
            let hsn_slope = report.entry("sbar_sq_slope").unwrap().statistic;
            let mut tc = HessianConfig::new(
                Algorithm::Tsn {
                    schedule: TruncationSchedule::new(1.0, 0.49).unwrap(),
                },
                spec,
                100_000,
                20,
            );
            tc.oracle_seed = seed;
            let (treport, _) = hessian_convergence(&tc).unwrap();
            let tsn_slope = treport.entry("sbar_sq_slope").unwrap().statistic;
            println!(
                "[hessian seed={seed}] hsn_slope={hsn_slope:.3} tsn_slope={tsn_slope:.3} gap={:.3} ({:.1?})",
                tsn_slope - hsn_slope,
                t0.elapsed()
            );
            for (k, v) in &report.info {
                if k.contains("dist") {
                    println!("    hsn {k} = {v:.4e}");
                }
            }
            for (k, v) in &treport.info {
                if k.contains("sbar_dist") {
                    println!("    tsn {k} = {v:.4e}");
                }
            }
        }
    }

    if has("clt") {
        for &seed in &clt_seeds {
            let spec = SyntheticSpec::new(3, seed, seed);
            let config = CltConfig {
                algo: hsn(0.5, 0.5),
                spec,
                n: 20_000,
                replications: 500,
                oracle_seed: seed,
                oracle_samples: 1_000_000,
                eval_seed: seed,
                eval_samples: 2_000,
                null_seed: seed,
                null_sims: 200,
            };
            let t0 = std::time::Instant::now();
            let report = clt_diagnostic(&config).unwrap();
            let cov = report.entry("covariance_rel_err").unwrap();
            let maha = report.entry("mahalanobis_mean").unwrap();
            println!(
                "[clt seed={seed}] cov_rel_err={:.4} tol={:.4} | maha={:.4} target=3 tol={:.4} | null_mean={:.4} null_sd={:.4} ks_maha={:.3} ks_excess={:.3} pass={} ({:.1?})",
                cov.statistic,
                cov.tolerance,
                maha.statistic,
                maha.tolerance,
                report.info["null_mean"],
                report.info["null_sd"],
                report.info["ks_mahalanobis_chi2"],
                report.info["ks_scaled_excess_chi2"],
                report.pass,
                t0.elapsed()
            );
        }
    }

    if has("cltscan") {
        for seed in 0..60u64 {
            let spec = SyntheticSpec::new(3, seed, seed);
            let theta = hsn_core::data::gen_theta(&spec);
            let sum_abs: f64 = theta.iter().map(|x| x.abs()).sum();
            if sum_abs > 12.0 {
                continue;
            }
            let config = CltConfig {
                algo: hsn(0.5, 0.5),
                spec,
                n: 20_000,
                replications: 500,
                oracle_seed: seed,
                oracle_samples: 300_000,
                eval_seed: seed,
                eval_samples: 500,
                null_seed: seed,
                null_sims: 100,
            };
            let report = clt_diagnostic(&config).unwrap();
            let cov = report.entry("covariance_rel_err").unwrap();
            let maha = report.entry("mahalanobis_mean").unwrap();
            println!(
                "[cltscan seed={seed}] theta={:?} cov={:.4}/{:.4} maha={:.4}/{:.4} pass={}",
                theta.as_slice(),
                cov.statistic,
                cov.tolerance,
                maha.statistic,
                maha.tolerance,
                report.pass
            );
        }
    }

    if has("qsl") {
        for &seed in &qsl_seeds {
            let spec = SyntheticSpec::new(3, seed, seed);
            let config = QslConfig {
                algo: hsn(0.5, 0.5),
                spec,
                n: 100_000,
                oracle_seed: seed,
                oracle_samples: 1_000_000,
                eval_seed: seed,
                eval_samples: 2_000,
                null_seed: seed,
                null_sims: 50,
            };
            let t0 = std::time::Instant::now();
            let (report, _) = qsl_diagnostic(&config).unwrap();
            println!(
                "[qsl seed={seed}] excess_stat={:.4} (target 1.5) at_1e3={:.4} at_1e4={:.4} outer={:.4} tol={:.4} pass={} ({:.1?})",
                report.entry("excess_stat").unwrap().statistic,
                report.info["excess_stat_at_1000"],
                report.info["excess_stat_at_10000"],
                report.entry("outer_rel_err").unwrap().statistic,
                report.entry("outer_rel_err").unwrap().tolerance,
                report.pass,
                t0.elapsed()
            );
        }
    }

    if has("qslscan") {
        for seed in 0..48u64 {
            let spec = SyntheticSpec::new(3, seed, seed);
            let theta = hsn_core::data::gen_theta(&spec);
            let config = QslConfig {
                algo: hsn(0.5, 0.5),
                spec,
                n: 100_000,
                oracle_seed: seed,
                oracle_samples: 200_000,
                eval_seed: seed,
                eval_samples: 1_000,
                null_seed: seed,
                null_sims: 12,
            };
            match qsl_diagnostic(&config) {
                Ok((report, _)) => {
                    let stat = report.entry("excess_stat").unwrap();
                    let trend = report.entry("excess_trend_ratio");
                    println!(
                        "[qslscan seed={seed}] theta={:?} stat={:.3} at_1e3={:.3} trend_ratio={:.3} outer={:.3}/{:.3} pass={}",
                        theta.as_slice(),
                        stat.statistic,
                        report.info["excess_stat_at_1000"],
                        trend.map(|t| t.statistic).unwrap_or(f64::NAN),
                        report.entry("outer_rel_err").unwrap().statistic,
                        report.entry("outer_rel_err").unwrap().tolerance,
                        report.pass
                    );
                }
                Err(e) => println!("[qslscan seed={seed}] ERR {e}"),
            }
        }
    }

    if has("coincide") {
        for &(d, n, reps) in &[(10usize, 100_000u64, 100u64), (50, 100_000, 25)] {
            let seed = 42;
            let spec = SyntheticSpec::new(d, seed, seed);
            let mut ch = SynthRunConfig::new(hsn(1e-10, 1.0 - 1e-10), spec, n);
            ch.cadence = Cadence::powers_of_two_with(n, &[1_000, 10_000, 100_000]);
            let mut co = ch.clone();
            co.algo = Algorithm::Ons;
            let t0 = std::time::Instant::now();
            let hsn_curve = mse_curve(&ch, reps).unwrap();
            let ons_curve = mse_curve(&co, reps).unwrap();
            let max_rel = hsn_curve
                .iter()
                .zip(&ons_curve)
                .map(|(a, b)| (a.value - b.value).abs() / a.value.abs().max(b.value.abs()).max(1e-300))
                .fold(0.0f64, f64::max);
            let max_abs = hsn_curve
                .iter()
                .zip(&ons_curve)
                .map(|(a, b)| (a.value - b.value).abs())
                .fold(0.0f64, f64::max);
            println!(
                "[coincide d={d}] max_rel_diff={max_rel:.3e} max_abs_diff={max_abs:.3e} ({:.1?})",
                t0.elapsed()
            );
        }
    }

    if has("ordering") {
        let seed = 42;
        let spec = SyntheticSpec::new(10, seed, seed);
        let algos = [
            hsn(1e-10, 1.0 - 1e-10),
            Algorithm::Ons,
            Algorithm::Sn,
            Algorithm::Tsn {
                schedule: TruncationSchedule::default(),
            },
            Algorithm::Sgd { step_scale: 1.0 },
        ];
        let t0 = std::time::Instant::now();
        for algo in algos {
            let config = SynthRunConfig::new(algo, spec, 100_000);
            let curve = mse_curve(&config, 5).unwrap();
            println!(
                "[ordering] {:4} final mse = {:.5e}",
                algo.tag(),
                curve.last().unwrap().value
            );
        }
        println!("[ordering] ({:.1?})", t0.elapsed());
    }
}
