//! Verification suites: structural checks over fixtures and randomized
//! falsification runs for the decorrelation lemmas.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use psr_core::fixtures;
use psr_core::model::{trajectory_distribution, tv_distance, Policy};
use psr_core::psr::{
    brep_decodable, brep_future_sufficient, brep_regular_psr, brep_revealing, validate_brep,
    CoreMatrixMode, CoreTestSet, LeftInverseMode, NaturalMode,
};
use psr_core::oracles::{
    barycentric_spanner, decoupling_check, eluder_l2_check, elliptical_potential_check,
    random_decoupling_instance, random_eluder_instance, random_psd_sequence,
};
use psr_core::rng::rng_for;
use psr_core::stability::{
    certify_stability, check_weak_stability, expected_b_errors, hellinger_domination_check,
    sample_weak_pairs, well_conditioned_check,
};
use psr_core::{Caps, Error};

use crate::artifacts::{Manifest, StagedDir};
use crate::cli::{Suite, VerifyArgs};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    /// Signed margin: nonnegative means the check holds.
    pub margin: f64,
}

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub worst_margin: f64,
    pub checks: Vec<CheckLine>,
}

pub fn verify(args: &VerifyArgs, caps: &Caps) -> Result<(), CliError> {
    let checks = match args.suite {
        Suite::Brep => brep_suite(caps)?,
        Suite::Stability => stability_suite(&args.seeds, caps)?,
        Suite::Decomp => decomp_suite(&args.seeds, args.per_seed, caps)?,
        Suite::Hellinger => hellinger_suite(&args.seeds, args.per_seed, caps)?,
        Suite::Eluder => eluder_suite(&args.seeds, args.per_seed)?,
    };
    let pass = checks.iter().all(|c| c.pass);
    let worst = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let report = SuiteReport {
        suite: format!("{:?}", args.suite).to_lowercase(),
        pass,
        worst_margin: worst,
        checks,
    };
    for c in &report.checks {
        println!(
            "[{}] {:<58} margin {:+.3e}",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.margin
        );
    }
    println!(
        "suite {}: {} ({} checks, worst margin {:+.3e})",
        report.suite,
        if report.pass { "pass" } else { "FAIL" },
        report.checks.len(),
        report.worst_margin
    );
    if let Some(out) = &args.out {
        let staged = StagedDir::create(out)?;
        staged.write_json("suite.json", &report)?;
        staged.write_json("manifest.json", &Manifest::new(args, &args.seeds))?;
        staged.publish()?;
    }
    if !pass {
        return Err(CliError::ChecksFailed(format!(
            "suite {} found violations (worst margin {:.3e})",
            report.suite, report.worst_margin
        )));
    }
    Ok(())
}

fn line(name: String, margin: f64) -> CheckLine {
    CheckLine {
        name,
        pass: margin >= 0.0,
        margin,
    }
}

/// Constructor/fixture applicability matrix with exactness thresholds.
fn brep_suite(caps: &Caps) -> Result<Vec<CheckLine>, CliError> {
    let tol = 1e-9;
    let mut checks = Vec::new();
    let fixtures_named: Vec<(&str, psr_core::model::PomdpModel)> = vec![
        ("FIX-ID", fixtures::fix_id()),
        ("FIX-NOISY", fixtures::fix_noisy()),
        ("FIX-DEC2", fixtures::fix_dec2()),
        ("FIX-LMDP", fixtures::fix_lmdp()),
    ];
    for (name, model) in &fixtures_named {
        for m in [1usize, 2] {
            if m > model.horizon {
                continue;
            }
            // Revealing applies when every windowed emission matrix has
            // full rank (FIX-LMDP needs the 2-step window).
            match brep_revealing(model, m, LeftInverseMode::PseudoInverse, caps) {
                Ok(b) => {
                    let r = validate_brep(&b, model, caps)?.max();
                    checks.push(line(format!("revealing m={m} on {name}"), tol - r));
                }
                Err(Error::RankDeficient { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            match brep_future_sufficient(model, m, NaturalMode::PseudoInverse, caps) {
                Ok((b, _)) => {
                    let r = validate_brep(&b, model, caps)?.max();
                    checks.push(line(format!("future-suff m={m} on {name}"), tol - r));
                }
                Err(Error::ConstraintViolation { .. }) | Err(Error::RankDeficient { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    // Decodable: FIX-ID with the identity decoder at m in {1, 2}, FIX-DEC2
    // with its window decoder at m = 2.
    for m in [1usize, 2] {
        let model = fixtures::fix_id();
        let dec = fixtures::identity_decoder(&model, m);
        let b = brep_decodable(&model, &dec, m, caps)?;
        let r = validate_brep(&b, &model, caps)?.max();
        checks.push(line(format!("decodable m={m} on FIX-ID"), tol - r));
    }
    {
        let model = fixtures::fix_dec2();
        let b = brep_decodable(&model, &fixtures::fix_dec2_decoder(), 2, caps)?;
        let r = validate_brep(&b, &model, caps)?.max();
        checks.push(line("decodable m=2 on FIX-DEC2".to_string(), tol - r));
    }
    // Regular PSR applies everywhere.
    for (name, model) in &fixtures_named {
        let core = CoreTestSet::windowed(model.horizon, model.n_obs, model.n_actions, 1, caps)?;
        let mode = if model.horizon <= 2 {
            CoreMatrixMode::Exhaustive
        } else {
            CoreMatrixMode::Greedy
        };
        let (b, _) = brep_regular_psr(model, &core, mode, caps)?;
        let r = validate_brep(&b, model, caps)?.max();
        checks.push(line(format!("regular-psr on {name}"), tol - r));
    }
    Ok(checks)
}

fn stability_suite(seeds: &[u64], caps: &Caps) -> Result<Vec<CheckLine>, CliError> {
    let mut checks = Vec::new();
    let seed = seeds.first().copied().unwrap_or(0);

    // Decodable constructions sit exactly at Lambda = 1 when the bracket is
    // tight, and under sqrt(U_A) otherwise.
    let id = fixtures::fix_id();
    let b = brep_decodable(&id, &fixtures::identity_decoder(&id, 1), 1, caps)?;
    let rep = certify_stability(&b, 64, seed);
    checks.push(line("decodable FIX-ID m=1 lambda exact 1".into(), 1e-10 - (rep.lambda_hi - 1.0).abs()));

    let dec2 = fixtures::fix_dec2();
    let b2 = brep_decodable(&dec2, &fixtures::fix_dec2_decoder(), 2, caps)?;
    let rep2 = certify_stability(&b2, 64, seed);
    checks.push(line(
        "decodable FIX-DEC2 m=2 lambda_hi <= sqrt(U_A)".into(),
        (rep2.u_a as f64).sqrt() + 1e-9 - rep2.lambda_hi,
    ));

    let noisy = fixtures::fix_noisy();
    let br = brep_revealing(&noisy, 1, LeftInverseMode::PseudoInverse, caps)?;
    let repr = certify_stability(&br, 64, seed);
    checks.push(line(
        "revealing FIX-NOISY m=1 lambda_hi <= sqrt(2)/0.6".into(),
        2.0_f64.sqrt() / 0.6 + 1e-9 - repr.lambda_hi,
    ));

    // Weak-stability sampling against the certified bracket.
    for (name, model, brep, rep) in [
        ("FIX-ID", &id, &b, &rep),
        ("FIX-NOISY", &noisy, &br, &repr),
    ] {
        for &s in seeds {
            for h in 1..=model.horizon {
                let pairs = sample_weak_pairs(brep, h, 48, s, &[model, &fixtures::fix_id()])?;
                let weak = check_weak_stability(brep, h, &pairs);
                checks.push(line(
                    format!("weak ratio {name} h={h} seed={s} <= lambda_hi"),
                    rep.lambda_hi + 1e-9 - weak.worst_ratio,
                ));
                checks.push(line(
                    format!("fused<=sqrt(2 U_A) weak {name} h={h} seed={s}"),
                    1.0 + 1e-9 - weak.worst_fused_vs_weak,
                ));
            }
        }
    }

    // Well-conditioned diagnostics cohere with the bracket.
    for (name, brep, rep) in [("FIX-ID", &b, &rep), ("FIX-NOISY", &br, &repr)] {
        let (g1, _g2) = well_conditioned_check(brep);
        checks.push(line(
            format!("gamma1^-1 <= sqrt(U_A) lambda_hi on {name}"),
            (rep.u_a as f64).sqrt() * rep.lambda_hi + 1e-9 - g1,
        ));
    }
    Ok(checks)
}

/// Random `(theta, theta_bar, pi)` triples at FIX-NOISY scale.
fn random_triple(
    seed: u64,
    k: usize,
    caps: &Caps,
) -> Result<
    (
        psr_core::model::PomdpModel,
        psr_core::model::PomdpModel,
        Policy,
    ),
    Error,
> {
    let mut rng = rng_for(seed, &[0xD0, k as u64]);
    let m1 = fixtures::random_revealing_model(2, 2, 2, 2, 0.2, &mut rng)?;
    let m2 = fixtures::random_revealing_model(2, 2, 2, 2, 0.2, &mut rng)?;
    let pi = fixtures::random_stochastic_policy(&m1, &mut rng);
    let _ = caps;
    Ok((m1, m2, pi))
}

fn decomp_suite(seeds: &[u64], per_seed: usize, caps: &Caps) -> Result<Vec<CheckLine>, CliError> {
    let mut checks = Vec::new();
    for &seed in seeds {
        let mut worst = f64::INFINITY;
        for k in 0..per_seed {
            let (m1, m2, pi) = random_triple(seed, k, caps)?;
            let b1 = brep_revealing(&m1, 1, LeftInverseMode::PseudoInverse, caps)?;
            let b2 = brep_revealing(&m2, 1, LeftInverseMode::PseudoInverse, caps)?;
            let d1 = trajectory_distribution(&m1, &pi, 2, caps)?;
            let d2 = trajectory_distribution(&m2, &pi, 2, caps)?;
            let tv = tv_distance(&d1, &d2)?;
            let errs = expected_b_errors(&b1, &b2, &m2, &pi, caps)?;
            worst = worst.min(errs.iter().sum::<f64>() + 1e-9 - tv);
        }
        checks.push(line(
            format!("TV <= E_0 + sum E[E_h] ({per_seed} triples, seed {seed})"),
            worst,
        ));
    }
    Ok(checks)
}

fn hellinger_suite(seeds: &[u64], per_seed: usize, caps: &Caps) -> Result<Vec<CheckLine>, CliError> {
    let mut checks = Vec::new();
    for &seed in seeds {
        let mut worst = f64::INFINITY;
        for k in 0..per_seed {
            let (m1, m2, pi) = random_triple(seed, k, caps)?;
            let b1 = brep_revealing(&m1, 1, LeftInverseMode::PseudoInverse, caps)?;
            let b2 = brep_revealing(&m2, 1, LeftInverseMode::PseudoInverse, caps)?;
            let lambda = certify_stability(&b1, 16, seed).lambda_hi;
            let slacks = hellinger_domination_check(&b1, &b2, &m1, &m2, &pi, lambda, caps)?;
            for s in slacks {
                worst = worst.min(s + 1e-9);
            }
        }
        checks.push(line(
            format!("Hellinger domination slacks ({per_seed} triples, seed {seed})"),
            worst,
        ));
    }
    Ok(checks)
}

fn eluder_suite(seeds: &[u64], per_seed: usize) -> Result<Vec<CheckLine>, CliError> {
    let mut checks = Vec::new();
    for &seed in seeds {
        let mut worst_eluder = f64::INFINITY;
        let mut worst_elliptic = f64::INFINITY;
        let mut worst_decoupling = f64::INFINITY;
        let mut worst_spanner = f64::INFINITY;
        for k in 0..per_seed {
            let mut rng = rng_for(seed, &[0xE1, k as u64]);
            use rand::Rng as _;
            let dim = 1 + rng.random_range(0..5);
            let rounds = 1 + rng.random_range(0..50);
            let inst = random_eluder_instance(dim, rounds, 3, 2, 3, &mut rng);
            worst_eluder = worst_eluder.min(eluder_l2_check(&inst, 1.0).slack + 1e-9);

            let d = 1 + rng.random_range(0..4);
            let phis = random_psd_sequence(d, 1 + rng.random_range(0..30), &mut rng);
            worst_elliptic =
                worst_elliptic.min(elliptical_potential_check(&phis, 0.5).map_err(Error::from)?.slack + 1e-9);

            let dinst = random_decoupling_instance(4, 8, 3, 2, 2, &mut rng);
            worst_decoupling = worst_decoupling.min(decoupling_check(&dinst).slack + 1e-9);

            // Spanner on a random low-rank family.
            let span_d = 1 + rng.random_range(0..3);
            let basis: Vec<DVector<f64>> = (0..span_d)
                .map(|_| {
                    DVector::from_fn(5, |_, _| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g
                    })
                })
                .collect();
            let xs: Vec<DVector<f64>> = (0..10)
                .map(|_| {
                    let mut v = DVector::zeros(5);
                    for b in &basis {
                        let c: f64 = StandardNormal.sample(&mut rng);
                        v += b * c;
                    }
                    v
                })
                .collect();
            let sp = barycentric_spanner(&xs, span_d).map_err(Error::from)?;
            let max_l1 = xs
                .iter()
                .map(|x| x.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            worst_spanner = worst_spanner
                .min(1e-9 - sp.residual(&xs))
                .min(2.0 + 1e-9 - sp.max_coeff())
                .min(max_l1 + 1e-12 - sp.f_norm_1());
        }
        checks.push(line(format!("eluder-l2 ({per_seed} instances, seed {seed})"), worst_eluder));
        checks.push(line(
            format!("elliptical potential ({per_seed} sequences, seed {seed})"),
            worst_elliptic,
        ));
        checks.push(line(
            format!("decoupling ({per_seed} instances, seed {seed})"),
            worst_decoupling,
        ));
        checks.push(line(
            format!("barycentric spanner ({per_seed} families, seed {seed})"),
            worst_spanner,
        ));
    }
    Ok(checks)
}
