//! Implementations of the certify, learn, and fixture commands.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use psr_core::fixtures::{self, FixtureName};
use psr_core::io::{ClassFile, ModelFile};
use psr_core::learners::{
    explorative_e2d, mops, omle, rf_e2d, ClassContext, E2dConfig, MopsConfig, OmleConfig,
    OptimisticCover, RfE2dConfig, RunLog,
};
use psr_core::model::PomdpModel;
use psr_core::psr::{
    brep_decodable, brep_future_sufficient, brep_regular_psr, brep_revealing, validate_brep, BRep,
    CoreMatrixMode, CoreTestSet, Decoder, LeftInverseMode, NaturalMode,
};
use psr_core::stability::{certify_stability, check_weak_stability, sample_weak_pairs, StabilityReport};
use psr_core::{Caps, Error};

use crate::artifacts::{Manifest, StagedDir};
use crate::cli::{Algorithm, CertifyArgs, Construction, FixtureArgs, LearnArgs};
use crate::CliError;

/// Loads a model from a fixture name or a JSON file path.
pub fn resolve_model(spec: &str, seed: u64, sigma_floor: f64, caps: &Caps) -> Result<PomdpModel, CliError> {
    if let Ok(name) = spec.parse::<FixtureName>() {
        return fixtures::generate_fixture(name, seed, sigma_floor).map_err(CliError::from);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Config(format!("model file not found: {spec}")));
    }
    let file: ModelFile = psr_core::io::load_json(path)
        .with_context(|| format!("reading model file {spec}"))
        .map_err(CliError::Run)?;
    let model = file.to_model()?;
    let _ = caps;
    Ok(model)
}

fn decoder_for(spec: &str, model: &PomdpModel, m: usize) -> Decoder {
    if spec.eq_ignore_ascii_case("FIX-DEC2") {
        fixtures::fix_dec2_decoder()
    } else {
        // Works whenever the latest window observation identifies the state;
        // `Decoder::verify` rejects anything else with a clear error.
        fixtures::identity_decoder(model, m)
    }
}

#[derive(Debug, Serialize)]
struct CertifyReport {
    construction: String,
    window_m: usize,
    validation_residual: f64,
    validation_decomposition: f64,
    validation_one_step: f64,
    validation_future: f64,
    stability: StabilityReport,
    weak_worst_ratio: f64,
    weak_fused_vs_weak: f64,
    greedy_core_matrix: bool,
}

pub fn certify(args: &CertifyArgs, caps: &Caps) -> Result<(), CliError> {
    let model = resolve_model(&args.model, args.seed, 0.3, caps)?;
    let mut greedy_core = false;
    let brep: BRep = match args.construct {
        Construction::Revealing => brep_revealing(&model, args.m, LeftInverseMode::PseudoInverse, caps)?,
        Construction::Decodable => {
            let dec = decoder_for(&args.model, &model, args.m);
            brep_decodable(&model, &dec, args.m, caps)?
        }
        Construction::FutureSuff => {
            brep_future_sufficient(&model, args.m, NaturalMode::PseudoInverse, caps)?.0
        }
        Construction::Regular => {
            let core = CoreTestSet::windowed(model.horizon, model.n_obs, model.n_actions, args.m, caps)?;
            match brep_regular_psr(&model, &core, CoreMatrixMode::Exhaustive, caps) {
                Ok((b, _)) => b,
                Err(Error::Capacity { .. }) => {
                    greedy_core = true;
                    brep_regular_psr(&model, &core, CoreMatrixMode::Greedy, caps)?.0
                }
                Err(e) => return Err(e.into()),
            }
        }
    };

    let validation = validate_brep(&brep, &model, caps)?;
    let stability = certify_stability(&brep, args.samples, args.seed);
    let mut weak_worst = 0.0_f64;
    let mut weak_rel = 0.0_f64;
    for h in 1..=model.horizon {
        let pairs = sample_weak_pairs(&brep, h, args.weak_pairs, args.seed, &[&model])?;
        let rep = check_weak_stability(&brep, h, &pairs);
        weak_worst = weak_worst.max(rep.worst_ratio);
        weak_rel = weak_rel.max(rep.worst_fused_vs_weak);
    }

    let report = CertifyReport {
        construction: format!("{:?}", args.construct),
        window_m: args.m,
        validation_residual: validation.max(),
        validation_decomposition: validation.decomposition,
        validation_one_step: validation.one_step,
        validation_future: validation.future,
        stability,
        weak_worst_ratio: weak_worst,
        weak_fused_vs_weak: weak_rel,
        greedy_core_matrix: greedy_core,
    };

    print_certify_table(&report);
    if let Some(out) = &args.out {
        let staged = StagedDir::create(out)?;
        staged.write_json("report.json", &report)?;
        let seeds = [args.seed];
        staged.write_json("manifest.json", &Manifest::new(args, &seeds))?;
        let published = staged.publish()?;
        println!("artifacts: {}", published.display());
    }
    Ok(())
}

fn print_certify_table(r: &CertifyReport) {
    println!("construction       : {} (m = {})", r.construction, r.window_m);
    println!("validation residual: {:.3e}", r.validation_residual);
    let s = &r.stability;
    for (h0, l) in s.per_step.iter().enumerate() {
        println!("  L_{:<2}             : {:.12}", h0 + 1, l);
    }
    println!("lambda bracket     : [{:.12}, {:.12}]", s.lambda_lo, s.lambda_hi);
    println!("bracket exact      : {} (U_A = {})", s.exact, s.u_a);
    println!("R_B                : {:.12}", s.r_b);
    match (s.theory_bound, s.theory_satisfied) {
        (Some(b), Some(ok)) => println!("theory bound       : {:.12} (satisfied: {ok})", b),
        _ => println!("theory bound       : n/a"),
    }
    println!("weak worst ratio   : {:.12}", r.weak_worst_ratio);
    if r.greedy_core_matrix {
        println!("note               : greedy core-matrix selection (exhaustive over cap)");
    }
}

/// Loads a class from NOISY-CLASS or a JSON file path.
pub fn resolve_class(spec: &str, caps: &Caps) -> Result<psr_core::psr::ModelClass, CliError> {
    if spec.eq_ignore_ascii_case("NOISY-CLASS") {
        return fixtures::noisy_class(caps).map_err(CliError::from);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Config(format!("class file not found: {spec}")));
    }
    let file: ClassFile = psr_core::io::load_json(path)
        .with_context(|| format!("reading class file {spec}"))
        .map_err(CliError::Run)?;
    file.to_class(caps).map_err(CliError::from)
}

#[derive(Debug, Serialize)]
struct SeedOutcome {
    seed: u64,
    final_metric: f64,
    estimated_model: Option<usize>,
}

#[derive(Debug, Serialize)]
struct LearnSummary {
    algorithm: String,
    metric: &'static str,
    per_seed: Vec<SeedOutcome>,
    mean: f64,
    stderr: f64,
}

pub fn learn(args: &LearnArgs, caps: &Caps) -> Result<(), CliError> {
    if args.seeds.is_empty() {
        return Err(CliError::Config("at least one seed is required".into()));
    }
    let mut sorted = args.seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != args.seeds.len() {
        return Err(CliError::Config("seeds must be distinct".into()));
    }
    let class = resolve_class(&args.class, caps)?;
    let ctx = ClassContext::new(class, *caps)?;
    let cover = OptimisticCover::exact(&ctx.class, caps)?;

    struct RunOut {
        log: RunLog,
        final_metric: f64,
        estimated_model: Option<usize>,
    }
    let run_one = |seed: u64| -> Result<RunOut, Error> {
        match args.alg {
            Algorithm::Omle => {
                let cfg = OmleConfig {
                    iterations: args.t,
                    beta: args.beta,
                    seed,
                };
                let run = omle(&ctx, &cfg)?;
                Ok(RunOut {
                    log: run.log,
                    final_metric: run.final_subopt,
                    estimated_model: None,
                })
            }
            Algorithm::E2d => {
                let mut cfg = E2dConfig::new(args.t, args.gamma, seed);
                if let Some(eta) = args.eta {
                    cfg.eta = eta;
                }
                let run = explorative_e2d(&ctx, &cover, &cfg)?;
                Ok(RunOut {
                    log: run.log,
                    final_metric: run.final_subopt,
                    estimated_model: None,
                })
            }
            Algorithm::Mops => {
                let mut cfg = MopsConfig::new(args.t, args.gamma, seed);
                if let Some(eta) = args.eta {
                    cfg.eta = eta;
                }
                let run = mops(&ctx, &cover, &cfg)?;
                Ok(RunOut {
                    log: run.log,
                    final_metric: run.final_subopt,
                    estimated_model: None,
                })
            }
            Algorithm::Rfe2d => {
                let mut cfg = RfE2dConfig::new(args.t, args.gamma, seed);
                if let Some(eta) = args.eta {
                    cfg.eta = eta;
                }
                let run = rf_e2d(&ctx, &cover, &cfg)?;
                Ok(RunOut {
                    log: run.log,
                    final_metric: run.estimation_error,
                    estimated_model: Some(run.theta_hat),
                })
            }
        }
    };

    let results = psr_core::exec::par_map(args.seeds.clone(), |s| (s, run_one(s)));
    let mut runs = Vec::with_capacity(results.len());
    for (seed, r) in results {
        runs.push((seed, r.map_err(CliError::from)?));
    }

    let alg_name = format!("{:?}", args.alg).to_lowercase();
    let staged = StagedDir::create(&args.out)?;
    let mut finals = Vec::with_capacity(runs.len());
    for (seed, run) in &runs {
        let mut csv = Vec::new();
        run.log.write_csv(&mut csv).map_err(|e| CliError::Run(e.into()))?;
        staged.write_bytes(&format!("{alg_name}-seed{seed}.csv"), &csv)?;
        finals.push(run.final_metric);
    }
    // Aggregate curve: mean and standard error of the running output metric.
    let iters = args.t;
    let mut curve = String::from("iteration,mean,stderr\n");
    for k in 1..=iters {
        let vals: Vec<f64> = runs
            .iter()
            .map(|(_, r)| r.log.subopt_at(k).unwrap_or(f64::NAN))
            .collect();
        let (mean, stderr) = mean_stderr(&vals);
        curve.push_str(&format!("{k},{mean:.17e},{stderr:.17e}\n"));
    }
    staged.write_bytes("curve.csv", curve.as_bytes())?;

    let (mean, stderr) = mean_stderr(&finals);
    let summary = LearnSummary {
        algorithm: alg_name.clone(),
        metric: if matches!(args.alg, Algorithm::Rfe2d) {
            "sup_tv_estimation_error"
        } else {
            "output_policy_suboptimality"
        },
        per_seed: runs
            .iter()
            .map(|(seed, r)| SeedOutcome {
                seed: *seed,
                final_metric: r.final_metric,
                estimated_model: r.estimated_model,
            })
            .collect(),
        mean,
        stderr,
    };
    staged.write_json("summary.json", &summary)?;
    staged.write_json("manifest.json", &Manifest::new(args, &args.seeds))?;
    let published = staged.publish()?;
    println!(
        "{alg_name}: {} seeds, {}: mean {mean:.6} +- {stderr:.6}",
        args.seeds.len(),
        summary.metric
    );
    println!("artifacts: {}", published.display());
    Ok(())
}

fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn fixture(args: &FixtureArgs, caps: &Caps) -> Result<(), CliError> {
    let json = if args.name.eq_ignore_ascii_case("NOISY-CLASS") {
        let class = fixtures::noisy_class(caps)?;
        serde_json::to_vec_pretty(&ClassFile::from_class(&class, 1)).map_err(anyhow::Error::new)?
    } else {
        let name: FixtureName = args
            .name
            .parse()
            .map_err(|e: Error| CliError::Config(e.to_string()))?;
        let model = fixtures::generate_fixture(name, args.seed, args.sigma_floor)?;
        serde_json::to_vec_pretty(&ModelFile::from_model(&model)).map_err(anyhow::Error::new)?
    };
    let tmp = args.out.with_extension("json.partial");
    std::fs::write(&tmp, &json).map_err(|e| CliError::Run(e.into()))?;
    std::fs::rename(&tmp, &args.out).map_err(|e| CliError::Run(e.into()))?;
    println!("wrote {}", args.out.display());
    Ok(())
}
