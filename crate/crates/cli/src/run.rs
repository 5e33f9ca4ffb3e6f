//! Command implementations: resolve configuration, run, emit files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use hsn_core::data::{
    apply_standardizer, fit_standardizer, gen_stream, gen_theta, load_csv, split, CsvSpec,
    SyntheticSpec,
};
use hsn_core::experiments::{
    clt_diagnostic, compare_algorithms, hessian_convergence, mse_curve, qsl_diagnostic,
    rate_slope, real_excess_curve, value_at, CltConfig, CurveSeries, DiagnosticEntry,
    DiagnosticReport, HessianConfig, QslConfig, RealRunConfig, RunRecord, SynthRunConfig,
    DEFAULT_RATE_WINDOW,
};
use hsn_core::linalg::{direct_inverse, rank1_accumulate, smw_update, SymMatrix};
use hsn_core::model::{HybridWeights, Sample};
use hsn_core::optim::{Algorithm, Cadence, OptimizerState, TruncationSchedule};
use hsn_core::oracle::{batch_newton_fit, NEWTON_DEFAULT_MAX_ITER, NEWTON_DEFAULT_TOL};
use hsn_core::seed::{sub_rng, Purpose};
use hsn_core::{Error, Result};

use crate::args::{
    algo_config, AlgoConfig, AlgoTag, CltArgs, CompareArgs, FileConfig, HessianArgs, Profile,
    QslArgs, RatesArgs, RealArgs, SelftestArgs, SynthArgs,
};
use crate::emit::{
    config_hash, config_json, fmt_f64, out_file, write_columns, write_json, write_records,
    OutputDocument,
};

pub struct CommandOutcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

fn print_seed(command: &str, seed: u64) {
    println!("{command}: seed = {seed}");
}

fn validate_shape(dim: usize, reps: u64) -> Result<()> {
    if dim < 1 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    if reps < 1 {
        return Err(Error::InvalidConfig(
            "replication count must be at least 1".into(),
        ));
    }
    Ok(())
}

fn curve_rows(algo: &str, series: &CurveSeries, fill: fn(&mut RunRecord, f64)) -> Vec<(String, RunRecord)> {
    series
        .iter()
        .map(|p| {
            let mut r = RunRecord::at(p.n);
            fill(&mut r, p.value);
            (algo.to_string(), r)
        })
        .collect()
}

fn curve_cadence(n: u64) -> Cadence {
    Cadence::powers_of_two_with(n, &[1_000, 10_000, 100_000])
}

// ---------------------------------------------------------------- synth

#[derive(Serialize)]
pub struct SynthResolved {
    pub profile: Option<Profile>,
    pub dim: usize,
    pub algo: AlgoConfig,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub theta_seed: u64,
    pub stream_seed: u64,
    pub cadence: String,
}

pub fn run_synth(args: &SynthArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.synth;
    let profile = args.profile.or(f.profile);
    let preset = profile.map(Profile::settings);
    let dim = args
        .dim
        .or(preset.map(|p| p.0))
        .or(f.dim)
        .ok_or_else(|| Error::InvalidConfig("synth needs --dim or --profile".into()))?;
    let tag = args.algo.or(f.algo).unwrap_or(AlgoTag::Hsn);
    let alpha = args.alpha.or(preset.map(|p| p.1)).or(f.alpha);
    let beta = args.beta.or(preset.map(|p| p.2)).or(f.beta);
    let seed = args.seed.or(f.seed).unwrap_or(42);
    let n = args.n.or(f.n).unwrap_or(100_000);
    let reps = args.reps.or(f.reps).unwrap_or(100);
    let algo = algo_config(
        tag,
        alpha,
        beta,
        args.tsn_floor_scale.or(f.tsn_floor_scale),
        args.tsn_exponent.or(f.tsn_exponent),
        args.sgd_step_scale.or(f.sgd_step_scale),
    );
    let resolved = SynthResolved {
        profile,
        dim,
        algo,
        n,
        reps,
        seed,
        theta_seed: seed,
        stream_seed: seed,
        cadence: "pow2+decades".into(),
    };
    validate_shape(dim, reps)?;
    print_seed("synth", seed);

    let algorithm = resolved.algo.build()?;
    let spec = SyntheticSpec::new(dim, seed, seed);
    let config = SynthRunConfig {
        algo: algorithm,
        spec,
        n,
        cadence: curve_cadence(n),
    };
    let curve = mse_curve(&config, reps)?;
    let final_mse = curve.last().map(|p| p.value).unwrap_or(f64::NAN);

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let report = DiagnosticReport::new("synth_mse_curve", reps, Vec::new())
        .with_info("final_mse", final_mse)
        .with_info("points", curve.len() as f64)
        .with_seed("seed", seed);

    let csv_path = out_file(out_dir, "synth_curve.csv")?;
    write_records(
        &csv_path,
        &json,
        &hash,
        &curve_rows(algorithm.tag(), &curve, |r, v| r.sq_error = Some(v)),
    )?;
    let json_path = out_file(out_dir, "synth_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "synth".into(),
            config_hash: hash,
            config: resolved,
            pass: true,
            reports: vec![report],
        },
    )?;
    Ok(CommandOutcome {
        pass: true,
        files: vec![csv_path, json_path],
    })
}

// ----------------------------------------------------------------- real

#[derive(Serialize)]
pub struct RealResolved {
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    pub split_fraction: f64,
    pub label_column: String,
    pub positive_label: String,
    pub categorical: Vec<String>,
    pub delimiter: String,
    pub algo: AlgoConfig,
    pub reps: u64,
    pub seed: u64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

pub fn run_real(args: &RealArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.real;
    let train_path = args
        .train
        .clone()
        .or_else(|| f.train.clone())
        .ok_or_else(|| Error::InvalidConfig("real needs --train".into()))?;
    let label_column = args
        .label_column
        .clone()
        .or_else(|| f.label_column.clone())
        .ok_or_else(|| Error::InvalidConfig("real needs --label-column".into()))?;
    let positive_label = args
        .positive_label
        .clone()
        .or_else(|| f.positive_label.clone())
        .ok_or_else(|| Error::InvalidConfig("real needs --positive-label".into()))?;
    let categorical = if args.categorical.is_empty() {
        f.categorical.clone().unwrap_or_default()
    } else {
        args.categorical.clone()
    };
    let delimiter = args.delimiter.or(f.delimiter).unwrap_or(',');
    let tag = args.algo.or(f.algo).unwrap_or(AlgoTag::Hsn);
    let algo = algo_config(
        tag,
        args.alpha.or(f.alpha),
        args.beta.or(f.beta),
        args.tsn_floor_scale.or(f.tsn_floor_scale),
        args.tsn_exponent.or(f.tsn_exponent),
        args.sgd_step_scale.or(f.sgd_step_scale),
    );
    let resolved = RealResolved {
        train: train_path.clone(),
        test: args.test.clone().or_else(|| f.test.clone()),
        split_fraction: args.split_fraction.or(f.split_fraction).unwrap_or(0.99),
        label_column,
        positive_label,
        categorical,
        delimiter: delimiter.to_string(),
        algo,
        reps: args.reps.or(f.reps).unwrap_or(100),
        seed: args.seed.or(f.seed).unwrap_or(42),
        newton_tol: args.newton_tol.or(f.newton_tol).unwrap_or(NEWTON_DEFAULT_TOL),
        newton_max_iter: args
            .newton_max_iter
            .or(f.newton_max_iter)
            .unwrap_or(NEWTON_DEFAULT_MAX_ITER),
    };
    validate_shape(1, resolved.reps)?;
    print_seed("real", resolved.seed);

    let mut csv_spec = CsvSpec::new(&resolved.label_column, &resolved.positive_label);
    csv_spec.categorical_columns = resolved.categorical.clone();
    csv_spec.delimiter = delimiter as u8;

    let loaded = load_csv(&train_path, &csv_spec)?;
    let (raw_train, raw_test) = match &resolved.test {
        Some(test_path) => (loaded, load_csv(test_path, &csv_spec)?),
        None => split(&loaded, resolved.split_fraction, resolved.seed)?,
    };
    let scaling = fit_standardizer(&raw_train)?;
    let train = apply_standardizer(&scaling, &raw_train)?;
    let test = apply_standardizer(&scaling, &raw_test)?;

    let truth = batch_newton_fit(&train.samples, resolved.newton_tol, resolved.newton_max_iter)?;
    let algorithm = resolved.algo.build()?;
    let run_config = RealRunConfig {
        algo: algorithm,
        shuffle_seed: resolved.seed,
        cadence: curve_cadence(train.len() as u64),
    };
    let curve = real_excess_curve(&run_config, &train, &truth, &test.samples, resolved.reps)?;

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let report = DiagnosticReport::new("real_excess_curve", resolved.reps, Vec::new())
        .with_info("train_rows", train.len() as f64)
        .with_info("test_rows", test.len() as f64)
        .with_info("dim", train.dim() as f64)
        .with_info("reference_loss", truth.g_at_star)
        .with_info("final_excess_risk", curve.last().map(|p| p.value).unwrap_or(f64::NAN))
        .with_seed("seed", resolved.seed);

    let csv_path = out_file(out_dir, "real_curve.csv")?;
    write_records(
        &csv_path,
        &json,
        &hash,
        &curve_rows(algorithm.tag(), &curve, |r, v| r.excess_risk = Some(v)),
    )?;
    let json_path = out_file(out_dir, "real_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "real".into(),
            config_hash: hash,
            config: resolved,
            pass: true,
            reports: vec![report],
        },
    )?;
    Ok(CommandOutcome {
        pass: true,
        files: vec![csv_path, json_path],
    })
}

// ------------------------------------------------------------------ clt

#[derive(Serialize)]
pub struct StatResolved {
    pub dim: usize,
    pub n: u64,
    pub reps: u64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub oracle_samples: u64,
    pub eval_samples: u64,
    pub null_sims: u64,
}

fn hybrid(alpha: f64, beta: f64) -> Result<Algorithm> {
    Ok(Algorithm::Hsn {
        weights: HybridWeights::new(alpha, beta)?,
    })
}

pub fn run_clt(args: &CltArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.clt;
    let resolved = StatResolved {
        dim: args.dim.or(f.dim).unwrap_or(3),
        n: args.n.or(f.n).unwrap_or(20_000),
        reps: args.reps.or(f.reps).unwrap_or(500),
        alpha: args.alpha.or(f.alpha).unwrap_or(0.5),
        beta: args.beta.or(f.beta).unwrap_or(0.5),
        seed: args.seed.or(f.seed).unwrap_or(37),
        oracle_samples: args.oracle_samples.or(f.oracle_samples).unwrap_or(1_000_000),
        eval_samples: args.eval_samples.or(f.eval_samples).unwrap_or(2_000),
        null_sims: args.null_sims.or(f.null_sims).unwrap_or(200),
    };
    validate_shape(resolved.dim, resolved.reps)?;
    print_seed("clt", resolved.seed);

    let config = CltConfig {
        algo: hybrid(resolved.alpha, resolved.beta)?,
        spec: SyntheticSpec::new(resolved.dim, resolved.seed, resolved.seed),
        n: resolved.n,
        replications: resolved.reps,
        oracle_seed: resolved.seed,
        oracle_samples: resolved.oracle_samples,
        eval_seed: resolved.seed,
        eval_samples: resolved.eval_samples,
        null_seed: resolved.seed,
        null_sims: resolved.null_sims,
    };
    let report = clt_diagnostic(&config)?;
    let pass = report.pass;

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let json_path = out_file(out_dir, "clt_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "clt".into(),
            config_hash: hash,
            config: resolved,
            pass,
            reports: vec![report],
        },
    )?;
    Ok(CommandOutcome {
        pass,
        files: vec![json_path],
    })
}

// ------------------------------------------------------------------ qsl

pub fn run_qsl(args: &QslArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.qsl;
    let resolved = StatResolved {
        dim: args.dim.or(f.dim).unwrap_or(3),
        n: args.n.or(f.n).unwrap_or(100_000),
        reps: 1,
        alpha: args.alpha.or(f.alpha).unwrap_or(0.5),
        beta: args.beta.or(f.beta).unwrap_or(0.5),
        seed: args.seed.or(f.seed).unwrap_or(39),
        oracle_samples: args.oracle_samples.or(f.oracle_samples).unwrap_or(1_000_000),
        eval_samples: args.eval_samples.or(f.eval_samples).unwrap_or(2_000),
        null_sims: args.null_sims.or(f.null_sims).unwrap_or(50),
    };
    validate_shape(resolved.dim, 1)?;
    print_seed("qsl", resolved.seed);

    let config = QslConfig {
        algo: hybrid(resolved.alpha, resolved.beta)?,
        spec: SyntheticSpec::new(resolved.dim, resolved.seed, resolved.seed),
        n: resolved.n,
        oracle_seed: resolved.seed,
        oracle_samples: resolved.oracle_samples,
        eval_seed: resolved.seed,
        eval_samples: resolved.eval_samples,
        null_seed: resolved.seed,
        null_sims: resolved.null_sims,
    };
    let (report, checkpoints) = qsl_diagnostic(&config)?;
    let pass = report.pass;

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let csv_path = out_file(out_dir, "qsl_checkpoints.csv")?;
    let rows: Vec<Vec<String>> = checkpoints
        .iter()
        .map(|c| vec![c.n.to_string(), fmt_f64(c.outer_rel_err), fmt_f64(c.excess_stat)])
        .collect();
    write_columns(
        &csv_path,
        &json,
        &hash,
        &["iteration", "outer_rel_err", "excess_stat"],
        &rows,
    )?;
    let json_path = out_file(out_dir, "qsl_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "qsl".into(),
            config_hash: hash,
            config: resolved,
            pass,
            reports: vec![report],
        },
    )?;
    Ok(CommandOutcome {
        pass,
        files: vec![csv_path, json_path],
    })
}

// ---------------------------------------------------------------- rates

#[derive(Serialize)]
pub struct RatesResolved {
    pub dim: usize,
    pub n: u64,
    pub reps: u64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

pub fn run_rates(args: &RatesArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.rates;
    let resolved = RatesResolved {
        dim: args.dim.or(f.dim).unwrap_or(5),
        n: args.n.or(f.n).unwrap_or(100_000),
        reps: args.reps.or(f.reps).unwrap_or(20),
        alpha: args.alpha.or(f.alpha).unwrap_or(0.5),
        beta: args.beta.or(f.beta).unwrap_or(0.5),
        seed: args.seed.or(f.seed).unwrap_or(42),
    };
    validate_shape(resolved.dim, resolved.reps)?;
    print_seed("rates", resolved.seed);

    let algorithm = hybrid(resolved.alpha, resolved.beta)?;
    let spec = SyntheticSpec::new(resolved.dim, resolved.seed, resolved.seed);
    let config = SynthRunConfig {
        algo: algorithm,
        spec,
        n: resolved.n,
        cadence: curve_cadence(resolved.n),
    };
    let curve = mse_curve(&config, resolved.reps)?;
    let slope = rate_slope(&curve, DEFAULT_RATE_WINDOW)?;
    let early = value_at(&curve, 1_000)
        .ok_or_else(|| Error::DiagnosticPrecondition("no checkpoint at n = 1000".into()))?;
    let final_mse = curve.last().map(|p| p.value).unwrap_or(f64::NAN);

    let entries = vec![
        DiagnosticEntry::band("mse_slope", slope, -1.2, -0.7),
        // final MSE at least 10x below its value at n = 1000
        DiagnosticEntry::band("final_over_early_mse", final_mse / early, 0.0, 0.1),
    ];
    let report = DiagnosticReport::new("mse_rates", resolved.reps, entries)
        .with_info("mse_at_1000", early)
        .with_info("final_mse", final_mse)
        .with_seed("seed", resolved.seed);
    let pass = report.pass;

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let csv_path = out_file(out_dir, "rates_curve.csv")?;
    write_records(
        &csv_path,
        &json,
        &hash,
        &curve_rows(algorithm.tag(), &curve, |r, v| r.sq_error = Some(v)),
    )?;
    let json_path = out_file(out_dir, "rates_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "rates".into(),
            config_hash: hash,
            config: resolved,
            pass,
            reports: vec![report],
        },
    )?;
    Ok(CommandOutcome {
        pass,
        files: vec![csv_path, json_path],
    })
}

// -------------------------------------------------------------- hessian

#[derive(Serialize)]
pub struct HessianResolved {
    pub dim: usize,
    pub n: u64,
    pub reps: u64,
    pub algo: AlgoConfig,
    pub seed: u64,
    pub oracle_samples: u64,
    pub tsn_baseline: bool,
    pub tsn_floor_scale: f64,
    pub tsn_exponent: f64,
}

pub fn run_hessian(args: &HessianArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.hessian;
    let tag = args.algo.or(f.algo).unwrap_or(AlgoTag::Hsn);
    let resolved = HessianResolved {
        dim: args.dim.or(f.dim).unwrap_or(5),
        n: args.n.or(f.n).unwrap_or(100_000),
        reps: args.reps.or(f.reps).unwrap_or(20),
        algo: algo_config(
            tag,
            args.alpha.or(f.alpha),
            args.beta.or(f.beta),
            None,
            None,
            None,
        ),
        seed: args.seed.or(f.seed).unwrap_or(42),
        oracle_samples: args.oracle_samples.or(f.oracle_samples).unwrap_or(1_000_000),
        tsn_baseline: args.tsn_baseline.or(f.tsn_baseline).unwrap_or(true),
        tsn_floor_scale: args.tsn_floor_scale.or(f.tsn_floor_scale).unwrap_or(1.0),
        tsn_exponent: args.tsn_exponent.or(f.tsn_exponent).unwrap_or(0.49),
    };
    validate_shape(resolved.dim, resolved.reps)?;
    print_seed("hessian", resolved.seed);

    let algorithm = resolved.algo.build()?;
    let spec = SyntheticSpec::new(resolved.dim, resolved.seed, resolved.seed);
    let mut config = HessianConfig::new(algorithm, spec, resolved.n, resolved.reps);
    config.oracle_seed = resolved.seed;
    config.oracle_samples = resolved.oracle_samples;
    let (main_report, main_curves) = hessian_convergence(&config)?;
    let main_slope = main_report.info["sbar_sq_slope"];

    let mut rows: Vec<(String, RunRecord)> = Vec::new();
    let mut push_rows = |tag: &str, curves: &hsn_core::experiments::HessianCurves| {
        for (i, p) in curves.sbar_dist.iter().enumerate() {
            let mut r = RunRecord::at(p.n);
            r.sbar_dist = Some(p.value);
            r.sbar_inv_dist = Some(curves.sbar_inv_dist[i].value);
            r.hbar_dist = Some(curves.hbar_dist[i].value);
            r.sigbar_dist = Some(curves.sigbar_dist[i].value);
            rows.push((tag.to_string(), r));
        }
    };
    push_rows(algorithm.tag(), &main_curves);

    let mut reports = vec![main_report];
    let mut pass = reports[0].pass;
    if resolved.tsn_baseline {
        let schedule = TruncationSchedule::new(resolved.tsn_floor_scale, resolved.tsn_exponent)?;
        let mut tsn_config = HessianConfig::new(
            Algorithm::Tsn { schedule },
            spec,
            resolved.n,
            resolved.reps,
        );
        tsn_config.oracle_seed = resolved.seed;
        tsn_config.oracle_samples = resolved.oracle_samples;
        tsn_config.slope_band = None;
        let (tsn_report, tsn_curves) = hessian_convergence(&tsn_config)?;
        let tsn_slope = tsn_report.info["sbar_sq_slope"];
        push_rows("TSN", &tsn_curves);
        // truncation slows the curvature rate: the baseline slope must sit
        // measurably above (shallower than) the main algorithm's
        let gap_report = DiagnosticReport::new(
            "tsn_slope_gap",
            resolved.reps,
            vec![DiagnosticEntry::band(
                "slope_gap",
                tsn_slope - main_slope,
                0.2,
                6.0,
            )],
        )
        .with_info("main_slope", main_slope)
        .with_info("tsn_slope", tsn_slope);
        pass = pass && gap_report.pass;
        reports.push(tsn_report);
        reports.push(gap_report);
    }

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let csv_path = out_file(out_dir, "hessian_curve.csv")?;
    write_records(&csv_path, &json, &hash, &rows)?;
    let json_path = out_file(out_dir, "hessian_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "hessian".into(),
            config_hash: hash,
            config: resolved,
            pass,
            reports,
        },
    )?;
    Ok(CommandOutcome {
        pass,
        files: vec![csv_path, json_path],
    })
}

// -------------------------------------------------------------- compare

#[derive(Serialize)]
pub struct CompareResolved {
    pub profile: Option<Profile>,
    pub dim: usize,
    pub n: u64,
    pub reps: u64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

pub fn run_compare(args: &CompareArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.compare;
    let profile = args.profile.or(f.profile);
    let preset = profile.map(Profile::settings);
    let dim = args.dim.or(preset.map(|p| p.0)).or(f.dim).unwrap_or(10);
    let dim_preset = Profile::for_dim(dim).map(Profile::settings);
    let resolved = CompareResolved {
        profile,
        dim,
        n: args.n.or(f.n).unwrap_or(100_000),
        reps: args.reps.or(f.reps).unwrap_or(100),
        alpha: args
            .alpha
            .or(preset.map(|p| p.1))
            .or(f.alpha)
            .or(dim_preset.map(|p| p.1))
            .unwrap_or(0.5),
        beta: args
            .beta
            .or(preset.map(|p| p.2))
            .or(f.beta)
            .or(dim_preset.map(|p| p.2))
            .unwrap_or(0.5),
        seed: args.seed.or(f.seed).unwrap_or(42),
    };
    validate_shape(resolved.dim, resolved.reps)?;
    print_seed("compare", resolved.seed);

    let spec = SyntheticSpec::new(resolved.dim, resolved.seed, resolved.seed);
    let algos = [
        hybrid(resolved.alpha, resolved.beta)?,
        Algorithm::Ons,
        Algorithm::Sn,
        Algorithm::Tsn {
            schedule: TruncationSchedule::default(),
        },
        Algorithm::Sgd { step_scale: 1.0 },
    ];
    let (curves, ordering) = compare_algorithms(&algos, &spec, resolved.n, resolved.reps)?;

    let finals: BTreeMap<String, f64> = curves
        .iter()
        .map(|c| (c.algo.clone(), c.series.last().map(|p| p.value).unwrap_or(f64::NAN)))
        .collect();
    let sgd_final = finals["SGD"];
    let worst_second_order = finals
        .iter()
        .filter(|(k, _)| k.as_str() != "SGD")
        .map(|(_, v)| *v)
        .fold(f64::MIN, f64::max);
    let entries = vec![DiagnosticEntry::band(
        "worst_second_order_over_sgd",
        worst_second_order / sgd_final,
        0.0,
        1.0 - 1e-12,
    )];
    let mut report = DiagnosticReport::new("compare", resolved.reps, entries)
        .with_seed("seed", resolved.seed)
        .with_info("ordering_best_to_worst", ordering.len() as f64);
    for (rank, name) in ordering.iter().enumerate() {
        report = report.with_info(&format!("rank_{}_{}", rank + 1, name), finals[name]);
    }
    let pass = report.pass;

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let mut rows: Vec<(String, RunRecord)> = Vec::new();
    for c in &curves {
        rows.extend(curve_rows(&c.algo, &c.series, |r, v| r.sq_error = Some(v)));
    }
    let csv_path = out_file(out_dir, "compare_curve.csv")?;
    write_records(&csv_path, &json, &hash, &rows)?;
    let json_path = out_file(out_dir, "compare_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "compare".into(),
            config_hash: hash,
            config: resolved,
            pass,
            reports: vec![report],
        },
    )?;
    Ok(CommandOutcome {
        pass,
        files: vec![csv_path, json_path],
    })
}

// ------------------------------------------------------------- selftest

#[derive(Serialize)]
pub struct SelftestResolved {
    pub cases: u64,
    pub seed: u64,
}

pub fn run_selftest(args: &SelftestArgs, file: &FileConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let f = &file.selftest;
    let resolved = SelftestResolved {
        cases: args.cases.or(f.cases).unwrap_or(200),
        seed: args.seed.or(f.seed).unwrap_or(42),
    };
    print_seed("selftest", resolved.seed);

    let mut entries = Vec::new();

    // 1) SMW against direct inversion, plus shift and trace identities.
    {
        use rand::Rng;
        let mut rng = sub_rng(resolved.seed, Purpose::Stream, 0);
        let mut worst_inv = 0.0f64;
        let mut worst_shift = 0.0f64;
        let mut worst_trace = 0.0f64;
        for case in 0..resolved.cases {
            let d = 1 + (case % 12) as usize;
            let a = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let spd = &a * a.transpose() + nalgebra::DMatrix::identity(d, d) * (d as f64);
            let s = SymMatrix::from_matrix(spd)?;
            let s_inv = direct_inverse(&s)?;
            let phi = nalgebra::DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let c = rng.random::<f64>();
            let (updated, g) = smw_update(&s_inv, &phi, c)?;
            let direct = direct_inverse(&rank1_accumulate(&s, &phi, c)?)?;
            worst_inv = worst_inv
                .max(updated.frobenius_distance(&direct) / direct.frobenius_norm());
            let lhs = updated.mul_vec(&phi);
            let rhs = s_inv.mul_vec(&phi) / (1.0 + g);
            worst_shift = worst_shift.max(
                lhs.iter()
                    .zip(rhs.iter())
                    .map(|(x, y)| (x - y).abs() / (1.0 + y.abs()))
                    .fold(0.0, f64::max),
            );
            let s_inv_phi = s_inv.mul_vec(&phi);
            let expected = s_inv.trace() - c / (1.0 + g) * s_inv_phi.dot(&s_inv_phi);
            worst_trace = worst_trace
                .max((updated.trace() - expected).abs() / (1.0 + expected.abs()));
        }
        entries.push(DiagnosticEntry::new("smw_vs_direct_rel", worst_inv, 0.0, 1e-9));
        entries.push(DiagnosticEntry::new("shift_relation", worst_shift, 0.0, 1e-12));
        entries.push(DiagnosticEntry::new("trace_recursion", worst_trace, 0.0, 1e-10));
    }

    // 2) Worked one-dimensional step.
    {
        let weights = HybridWeights::new(0.5, 0.5)?;
        let mut state = OptimizerState::at_origin(Algorithm::Hsn { weights }, 1)?;
        let sample = Sample::new(nalgebra::DVector::from_element(1, 1.0), true)?;
        state.step(&sample)?;
        let theta_err = (state.theta()[0] - 0.4).abs();
        let sinv_err = (state.s_inv().unwrap().matrix()[(0, 0)] - 0.8).abs();
        entries.push(DiagnosticEntry::new(
            "worked_step",
            theta_err.max(sinv_err),
            0.0,
            1e-15,
        ));
    }

    // 3) ONS ≡ HSN(0, 1) bitwise on a short stream.
    {
        let spec = SyntheticSpec::new(4, resolved.seed, resolved.seed);
        let mut ons = OptimizerState::at_origin(Algorithm::Ons, 4)?;
        let mut hsn01 = OptimizerState::at_origin(
            Algorithm::Hsn {
                weights: HybridWeights::new(0.0, 1.0)?,
            },
            4,
        )?;
        let mut identical = true;
        for sample in gen_stream(&spec, 2_000) {
            ons.step(&sample)?;
            hsn01.step(&sample)?;
            identical &= ons.theta() == hsn01.theta();
        }
        entries.push(DiagnosticEntry::new(
            "ons_equals_hsn01_bitwise",
            if identical { 0.0 } else { 1.0 },
            0.0,
            0.0,
        ));
    }

    // 4) Stream determinism.
    {
        let spec = SyntheticSpec::new(3, resolved.seed, resolved.seed);
        let a: Vec<Sample> = gen_stream(&spec, 500).collect();
        let b: Vec<Sample> = gen_stream(&spec, 500).collect();
        entries.push(DiagnosticEntry::new(
            "stream_determinism",
            if a == b { 0.0 } else { 1.0 },
            0.0,
            0.0,
        ));
    }

    // 5) Config hash re-derivation through a serialize/deserialize cycle.
    {
        let json = config_json(&resolved);
        let first = config_hash(&json);
        let value: serde_json::Value = serde_json::from_str(&json).expect("round trip");
        let rejson = serde_json::to_string(&value).expect("round trip");
        let second = config_hash(&rejson);
        entries.push(DiagnosticEntry::new(
            "config_hash_rederivation",
            if first == second { 0.0 } else { 1.0 },
            0.0,
            0.0,
        ));
    }

    // 6) Truth parameter draw respects its law.
    {
        let spec = SyntheticSpec::new(2_000, resolved.seed, resolved.seed);
        let theta = gen_theta(&spec);
        let in_law = theta
            .iter()
            .all(|&x| x == x.round() && (-10.0..=10.0).contains(&x));
        entries.push(DiagnosticEntry::new(
            "theta_law",
            if in_law { 0.0 } else { 1.0 },
            0.0,
            0.0,
        ));
    }

    let report = DiagnosticReport::new("selftest", resolved.cases, entries)
        .with_seed("seed", resolved.seed);
    let pass = report.pass;

    let json = config_json(&resolved);
    let hash = config_hash(&json);
    let json_path = out_file(out_dir, "selftest_report.json")?;
    write_json(
        &json_path,
        &OutputDocument {
            command: "selftest".into(),
            config_hash: hash,
            config: resolved,
            pass,
            reports: vec![report],
        },
    )?;
    Ok(CommandOutcome {
        pass,
        files: vec![json_path],
    })
}
