//! Acceptance gate: one test per criterion, each printing a pass/fail line.
//!
//! Thresholds and tolerances are pinned in the constants below. Every
//! expected value is either computed by an independent oracle inside the
//! test (exhaustive enumeration, Monte-Carlo, hand arithmetic) or is a
//! structural bound checked at its stated tolerance.

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;

use psr_core::fixtures::{self, FixtureName};
use psr_core::index::TrajIndexer;
use psr_core::learners::{
    edec_saddle, explorative_e2d, mle_hellinger_check, mops, omle, rf_e2d, ClassContext, E2dConfig,
    MopsConfig, OmleConfig, OptimisticCover, RfE2dConfig, SaddleConfig,
};
use psr_core::model::{trajectory_distribution, tv_distance, DetTable, Policy, PomdpModel};
use psr_core::oracles::{
    barycentric_spanner, decoupling_check, eluder_l2_check, elliptical_potential_check,
    random_decoupling_instance, random_eluder_instance, random_psd_sequence,
};
use psr_core::psr::{
    brep_decodable, brep_future_sufficient, brep_regular_psr, brep_revealing, psr_rank,
    validate_brep, CoreMatrixMode, CoreTestSet, LeftInverseMode, NaturalMode,
};
use psr_core::rng::rng_for;
use psr_core::stability::{
    certify_stability, expected_b_errors, hellinger_domination_check, pi_norm,
};
use psr_core::{Caps, Error};

const RESIDUAL_TOL: f64 = 1e-9;
const EXACT_TOL: f64 = 1e-12;
const LAMBDA_EXACT_TOL: f64 = 1e-10;
const SLACK_TOL: f64 = 1e-9;
/// Learner hyperparameters pinned for the 8-model class.
const E2D_GAMMA: f64 = 10.0;
const MOPS_GAMMA: f64 = 10.0;
const RFE2D_GAMMA: f64 = 20.0;

fn caps() -> Caps {
    Caps::default()
}

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "[criterion {criterion:>2}] {}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Criterion 1: every applicable constructor on every fixture validates to
/// residual <= 1e-9, within 10 seconds total.
#[test]
fn criterion_01_brep_exactness() {
    let t0 = Instant::now();
    let caps = caps();
    let named: Vec<(&str, PomdpModel)> = vec![
        ("FIX-ID", fixtures::fix_id()),
        ("FIX-NOISY", fixtures::fix_noisy()),
        ("FIX-DEC2", fixtures::fix_dec2()),
        ("FIX-LMDP", fixtures::fix_lmdp()),
    ];
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (name, model) in &named {
        for m in [1usize, 2] {
            if m > model.horizon {
                continue;
            }
            match brep_revealing(model, m, LeftInverseMode::PseudoInverse, &caps) {
                Ok(b) => {
                    let r = validate_brep(&b, model, &caps).unwrap().max();
                    assert!(r <= RESIDUAL_TOL, "revealing m={m} on {name}: {r:.3e}");
                    worst = worst.max(r);
                    count += 1;
                }
                Err(Error::RankDeficient { .. }) => {
                    // The revealing precondition genuinely fails (FIX-LMDP
                    // needs the two-step window); outside the matrix.
                    assert_eq!((*name, m), ("FIX-LMDP", 1));
                }
                Err(e) => panic!("revealing m={m} on {name}: {e}"),
            }
            match brep_future_sufficient(model, m, NaturalMode::PseudoInverse, &caps) {
                Ok((b, nu)) => {
                    let r = validate_brep(&b, model, &caps).unwrap().max();
                    assert!(r <= RESIDUAL_TOL, "future-suff m={m} on {name}: {r:.3e}");
                    assert!(nu >= 1.0, "nu = {nu} < 1 on {name}");
                    worst = worst.max(r);
                    count += 1;
                }
                Err(Error::ConstraintViolation { .. }) | Err(Error::RankDeficient { .. }) => {
                    assert_eq!((*name, m), ("FIX-LMDP", 1));
                }
                Err(e) => panic!("future-suff m={m} on {name}: {e}"),
            }
        }
    }
    // Decodable fixtures with their verified decoders.
    for m in [1usize, 2] {
        let model = fixtures::fix_id();
        let dec = fixtures::identity_decoder(&model, m);
        let b = brep_decodable(&model, &dec, m, &caps).unwrap();
        let r = validate_brep(&b, &model, &caps).unwrap().max();
        assert!(r <= RESIDUAL_TOL, "decodable m={m} on FIX-ID: {r:.3e}");
        worst = worst.max(r);
        count += 1;
    }
    {
        let model = fixtures::fix_dec2();
        let b = brep_decodable(&model, &fixtures::fix_dec2_decoder(), 2, &caps).unwrap();
        let r = validate_brep(&b, &model, &caps).unwrap().max();
        assert!(r <= RESIDUAL_TOL, "decodable m=2 on FIX-DEC2: {r:.3e}");
        worst = worst.max(r);
        count += 1;
    }
    for (name, model) in &named {
        let core = CoreTestSet::windowed(model.horizon, model.n_obs, model.n_actions, 1, &caps).unwrap();
        let mode = if model.horizon <= 2 {
            CoreMatrixMode::Exhaustive
        } else {
            CoreMatrixMode::Greedy
        };
        let (b, _) = brep_regular_psr(model, &core, mode, &caps).unwrap();
        let r = validate_brep(&b, model, &caps).unwrap().max();
        assert!(r <= RESIDUAL_TOL, "regular on {name}: {r:.3e}");
        worst = worst.max(r);
        count += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        1,
        worst <= RESIDUAL_TOL && secs < 10.0,
        &format!("{count} constructions, worst residual {worst:.3e}, {secs:.2}s"),
    );
}

/// Exhaustive deterministic-future-policy oracle for the Pi-norm at O=A=2.
fn pi_norm_exhaustive(b: &[f64], len: usize) -> f64 {
    assert!(len <= 2);
    let ix = TrajIndexer::new(2, 2, len);
    // Decision nodes: depth-0 obs (2 nodes), depth-1 (prefix, obs) nodes (8).
    let n_nodes = if len == 1 { 2 } else { 2 + 8 };
    let mut best = f64::NEG_INFINITY;
    for bits in 0u32..(1 << n_nodes) {
        let mut total = 0.0;
        for idx in 0..ix.count() {
            let tau = ix.decode(idx);
            // Policy consistency for the deterministic assignment in `bits`.
            let a0 = ((bits >> tau[0].0) & 1) as usize;
            if tau[0].1 != a0 {
                continue;
            }
            if len == 2 {
                let node = 2 + (tau[0].0 * 2 + tau[0].1) * 2 + tau[1].0;
                let a1 = ((bits >> node) & 1) as usize;
                if tau[1].1 != a1 {
                    continue;
                }
            }
            total += b[idx].abs();
        }
        best = best.max(total);
    }
    best
}

/// Criterion 2: the Pi-norm DP equals exhaustive policy enumeration on 200
/// seeded random vectors at future lengths 1 and 2, to 1e-12.
#[test]
fn criterion_02_pi_norm_oracle_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0_f64;
    for trial in 0..200u64 {
        let len = 1 + (trial % 2) as usize;
        let mut rng = rng_for(0xAC02, &[trial]);
        let b: Vec<f64> = (0..4usize.pow(len as u32))
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let dp = pi_norm(&b, 2, 2, len);
        let oracle = pi_norm_exhaustive(&b, len);
        worst = worst.max((dp - oracle).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        2,
        worst <= EXACT_TOL && secs < 5.0,
        &format!("200 vectors, worst |DP - exhaustive| = {worst:.3e}, {secs:.2}s"),
    );
}

/// Criterion 3: decodable constructions certify at Lambda = 1 when the
/// bracket is tight, and at lambda_hi <= sqrt(U_A) otherwise.
#[test]
fn criterion_03_decodable_stability() {
    let t0 = Instant::now();
    let caps = caps();
    let id = fixtures::fix_id();
    let b1 = brep_decodable(&id, &fixtures::identity_decoder(&id, 1), 1, &caps).unwrap();
    let r1 = certify_stability(&b1, 64, 0xAC03);
    let tight_ok = r1.exact
        && (r1.lambda_hi - 1.0).abs() <= LAMBDA_EXACT_TOL
        && (r1.lambda_lo - 1.0).abs() <= LAMBDA_EXACT_TOL;

    let dec2 = fixtures::fix_dec2();
    let b2 = brep_decodable(&dec2, &fixtures::fix_dec2_decoder(), 2, &caps).unwrap();
    let r2 = certify_stability(&b2, 64, 0xAC03);
    let loose_ok = !r2.exact && r2.lambda_hi <= (r2.u_a as f64).sqrt() + SLACK_TOL;

    let secs = t0.elapsed().as_secs_f64();
    report(
        3,
        tight_ok && loose_ok && secs < 5.0,
        &format!(
            "FIX-ID lambda = {:.12} (exact), FIX-DEC2 lambda_hi = {:.12} <= sqrt({}), {secs:.2}s",
            r1.lambda_hi, r2.lambda_hi, r2.u_a
        ),
    );
}

/// Criterion 4: the revealing construction on FIX-NOISY certifies under
/// sqrt(S) / sigma_min = sqrt(2) / 0.6.
#[test]
fn criterion_04_revealing_bound() {
    let t0 = Instant::now();
    let caps = caps();
    let noisy = fixtures::fix_noisy();
    let b = brep_revealing(&noisy, 1, LeftInverseMode::PseudoInverse, &caps).unwrap();
    let rep = certify_stability(&b, 64, 0xAC04);
    let bound = 2.0_f64.sqrt() / 0.6;
    let secs = t0.elapsed().as_secs_f64();
    report(
        4,
        rep.lambda_hi <= bound + SLACK_TOL && rep.theory_satisfied == Some(true) && secs < 5.0,
        &format!("lambda_hi = {:.12} <= {bound:.12}, {secs:.2}s", rep.lambda_hi),
    );
}

fn seeded_triple(k: u64) -> (PomdpModel, PomdpModel, Policy) {
    let mut rng = rng_for(0xAC05, &[k]);
    let m1 = fixtures::random_revealing_model(2, 2, 2, 2, 0.2, &mut rng).unwrap();
    let m2 = fixtures::random_revealing_model(2, 2, 2, 2, 0.2, &mut rng).unwrap();
    let pi = fixtures::random_stochastic_policy(&m1, &mut rng);
    (m1, m2, pi)
}

/// Criterion 5: the performance decomposition dominates the TV distance on
/// 100 seeded random triples.
#[test]
fn criterion_05_performance_decomposition() {
    let t0 = Instant::now();
    let caps = caps();
    let mut worst = f64::INFINITY;
    for k in 0..100u64 {
        let (m1, m2, pi) = seeded_triple(k);
        let b1 = brep_revealing(&m1, 1, LeftInverseMode::PseudoInverse, &caps).unwrap();
        let b2 = brep_revealing(&m2, 1, LeftInverseMode::PseudoInverse, &caps).unwrap();
        let d1 = trajectory_distribution(&m1, &pi, 2, &caps).unwrap();
        let d2 = trajectory_distribution(&m2, &pi, 2, &caps).unwrap();
        let tv = tv_distance(&d1, &d2).unwrap();
        let errs = expected_b_errors(&b1, &b2, &m2, &pi, &caps).unwrap();
        worst = worst.min(errs.iter().sum::<f64>() + SLACK_TOL - tv);
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        5,
        worst >= 0.0 && secs < 60.0,
        &format!("100 triples, worst slack {worst:+.3e}, {secs:.2}s"),
    );
}

/// Criterion 6: the Hellinger domination slacks stay above -1e-9 on the same
/// 100 triples, including the h = 0 and h = H cases.
#[test]
fn criterion_06_hellinger_domination() {
    let t0 = Instant::now();
    let caps = caps();
    let mut worst = f64::INFINITY;
    for k in 0..100u64 {
        let (m1, m2, pi) = seeded_triple(k);
        let b1 = brep_revealing(&m1, 1, LeftInverseMode::PseudoInverse, &caps).unwrap();
        let b2 = brep_revealing(&m2, 1, LeftInverseMode::PseudoInverse, &caps).unwrap();
        let lambda = certify_stability(&b1, 16, k).lambda_hi;
        let slacks = hellinger_domination_check(&b1, &b2, &m1, &m2, &pi, lambda, &caps).unwrap();
        assert_eq!(slacks.len(), m1.horizon + 1);
        for s in slacks {
            worst = worst.min(s + SLACK_TOL);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        6,
        worst >= 0.0 && secs < 60.0,
        &format!("100 triples x (H+1) steps, worst slack {worst:+.3e}, {secs:.2}s"),
    );
}

/// Criterion 7: over 100 seeded OMLE runs at K=200, beta = 2 ln(8 * 100),
/// the truth stays in every confidence set in at least 95 runs and the
/// Hellinger-sum guarantee holds in at least 95 runs.
#[test]
fn criterion_07_mle_confidence() {
    let t0 = Instant::now();
    let caps = caps();
    let class = fixtures::noisy_class(&caps).unwrap();
    let ctx = ClassContext::new(class, caps).unwrap();
    let beta = 2.0 * (8.0_f64 * 100.0).ln();
    let outcomes = psr_core::exec::par_map_range(100, |seed| {
        let run = omle(
            &ctx,
            &OmleConfig {
                iterations: 200,
                beta,
                seed: seed as u64,
            },
        )
        .unwrap();
        let slacks = mle_hellinger_check(&ctx, &run, beta).unwrap();
        (
            run.truth_always_in_set,
            slacks.iter().all(|&s| s <= 0.0),
        )
    });
    let in_set = outcomes.iter().filter(|(a, _)| *a).count();
    let slack_ok = outcomes.iter().filter(|(_, b)| *b).count();
    let secs = t0.elapsed().as_secs_f64();
    report(
        7,
        in_set >= 95 && slack_ok >= 95 && secs < 600.0,
        &format!("truth in set {in_set}/100, Hellinger guarantee {slack_ok}/100, beta = {beta:.3}, {secs:.1}s"),
    );
}

/// Criterion 8: OMLE (K=500), Explorative E2D (T=400), and MOPS (T=400) each
/// reach mean output suboptimality <= 0.05 over 20 seeds, with the curve at
/// the full horizon at most half its value at the quarter mark.
#[test]
fn criterion_08_learner_convergence_trends() {
    let t0 = Instant::now();
    let caps = caps();
    let class = fixtures::noisy_class(&caps).unwrap();
    let ctx = ClassContext::new(class, caps).unwrap();
    let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
    let beta = 2.0 * (8.0_f64 * 100.0).ln();

    let mut lines = Vec::new();
    let mut all_ok = true;
    {
        let (k, kq) = (500usize, 125usize);
        let runs = psr_core::exec::par_map_range(20, |seed| {
            let run = omle(&ctx, &OmleConfig { iterations: k, beta, seed: seed as u64 }).unwrap();
            (run.final_subopt, run.log.subopt_at(kq).unwrap())
        });
        let mean: f64 = runs.iter().map(|(f, _)| f).sum::<f64>() / 20.0;
        let mean_q: f64 = runs.iter().map(|(_, q)| q).sum::<f64>() / 20.0;
        let ok = mean <= 0.05 && mean <= 0.5 * mean_q;
        all_ok &= ok;
        lines.push(format!("omle {mean:.4} (K/4: {mean_q:.4})"));
    }
    {
        let (t, tq) = (400usize, 100usize);
        let runs = psr_core::exec::par_map_range(20, |seed| {
            let run = explorative_e2d(&ctx, &cover, &E2dConfig::new(t, E2D_GAMMA, seed as u64)).unwrap();
            (run.final_subopt, run.log.subopt_at(tq).unwrap())
        });
        let mean: f64 = runs.iter().map(|(f, _)| f).sum::<f64>() / 20.0;
        let mean_q: f64 = runs.iter().map(|(_, q)| q).sum::<f64>() / 20.0;
        let ok = mean <= 0.05 && mean <= 0.5 * mean_q;
        all_ok &= ok;
        lines.push(format!("e2d {mean:.4} (T/4: {mean_q:.4})"));
    }
    {
        let (t, tq) = (400usize, 100usize);
        let runs = psr_core::exec::par_map_range(20, |seed| {
            let run = mops(&ctx, &cover, &MopsConfig::new(t, MOPS_GAMMA, seed as u64)).unwrap();
            (run.final_subopt, run.log.subopt_at(tq).unwrap())
        });
        let mean: f64 = runs.iter().map(|(f, _)| f).sum::<f64>() / 20.0;
        let mean_q: f64 = runs.iter().map(|(_, q)| q).sum::<f64>() / 20.0;
        let ok = mean <= 0.05 && mean <= 0.5 * mean_q;
        all_ok &= ok;
        lines.push(format!("mops {mean:.4} (T/4: {mean_q:.4})"));
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        8,
        all_ok && secs < 1800.0,
        &format!("{}, {secs:.1}s", lines.join("; ")),
    );
}

/// Criterion 9: the EDEC saddle value stays under
/// `9 d A U_A lambda_hi^2 H^2 / gamma + eps_saddle` at gamma in {10, 100}.
#[test]
fn criterion_09_edec_bound() {
    let t0 = Instant::now();
    let caps = caps();
    let class = fixtures::noisy_class(&caps).unwrap();
    // Class-level constants: rank bound and certified stability over members.
    let mut d_max = 0usize;
    let mut lambda_hi = 0.0_f64;
    for m in &class.members {
        d_max = d_max.max(psr_rank(m, &class.core, &caps).unwrap());
        let b = brep_revealing(m, 1, LeftInverseMode::PseudoInverse, &caps).unwrap();
        lambda_hi = lambda_hi.max(certify_stability(&b, 16, 0xAC09).lambda_hi);
    }
    let u_a = class.core.u_a();
    let h = class.members[0].horizon;
    let a = class.members[0].n_actions;
    let ctx = ClassContext::new(class, caps).unwrap();
    let mu = vec![1.0 / 8.0; 8];
    let mut ok = true;
    let mut details = Vec::new();
    for gamma in [10.0, 100.0] {
        let out = edec_saddle(&ctx, &mu, gamma, &SaddleConfig::default(), None);
        let bound =
            9.0 * d_max as f64 * a as f64 * u_a as f64 * lambda_hi * lambda_hi * (h * h) as f64 / gamma;
        ok &= out.value <= bound + out.gap.max(0.0) + SLACK_TOL;
        details.push(format!(
            "gamma={gamma}: value {:.4} <= bound {bound:.2} + eps {:.2e}",
            out.value, out.gap
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    report(9, ok && secs < 300.0, &format!("{}, {secs:.1}s", details.join("; ")));
}

/// Criterion 10: RF-E2D at T=400 estimates the truth within sup-policy TV
/// 0.1 in at least 16 of 20 seeds, with the distance computed exactly by the
/// Pi-norm DP.
#[test]
fn criterion_10_rf_e2d_estimation() {
    let t0 = Instant::now();
    let caps = caps();
    let class = fixtures::noisy_class(&caps).unwrap();
    let ctx = ClassContext::new(class, caps).unwrap();
    let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
    let errors = psr_core::exec::par_map_range(20, |seed| {
        rf_e2d(&ctx, &cover, &RfE2dConfig::new(400, RFE2D_GAMMA, seed as u64))
            .unwrap()
            .estimation_error
    });
    let ok_count = errors.iter().filter(|&&e| e <= 0.1).count();
    let mean: f64 = errors.iter().sum::<f64>() / 20.0;
    let secs = t0.elapsed().as_secs_f64();
    report(
        10,
        ok_count >= 16 && secs < 600.0,
        &format!("{ok_count}/20 seeds within 0.1 (mean sup-TV {mean:.4}), {secs:.1}s"),
    );
}

/// Criterion 11: 200 randomized instances per decorrelation check, all with
/// slack >= -1e-9, and the spanner contract on random low-rank families.
#[test]
fn criterion_11_appendix_suites() {
    let t0 = Instant::now();
    let mut worst_eluder = f64::INFINITY;
    let mut worst_elliptic = f64::INFINITY;
    let mut worst_decoupling = f64::INFINITY;
    for k in 0..200u64 {
        let mut rng = rng_for(0xAC11, &[k]);
        let dim = 1 + rng.random_range(0..5);
        let rounds = 1 + rng.random_range(0..50);
        let inst = random_eluder_instance(dim, rounds, 3, 2, 3, &mut rng);
        worst_eluder = worst_eluder.min(eluder_l2_check(&inst, 1.0).slack);

        let d = 1 + rng.random_range(0..4);
        let phis = random_psd_sequence(d, 1 + rng.random_range(0..30), &mut rng);
        worst_elliptic = worst_elliptic.min(elliptical_potential_check(&phis, 0.5).unwrap().slack);

        let dinst = random_decoupling_instance(4, 8, 3, 2, 2, &mut rng);
        worst_decoupling = worst_decoupling.min(decoupling_check(&dinst).slack);
    }
    let mut worst_resid = 0.0_f64;
    let mut worst_coeff = 0.0_f64;
    let mut norm_ok = true;
    for k in 0..50u64 {
        let mut rng = rng_for(0xAC12, &[k]);
        let span_d = 1 + rng.random_range(0..3);
        let basis: Vec<DVector<f64>> = (0..span_d)
            .map(|_| DVector::from_fn(5, |_, _| rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let xs: Vec<DVector<f64>> = (0..12)
            .map(|_| {
                let mut v = DVector::zeros(5);
                for b in &basis {
                    v += b * (rng.random::<f64>() * 2.0 - 1.0);
                }
                v
            })
            .collect();
        let sp = barycentric_spanner(&xs, span_d).unwrap();
        worst_resid = worst_resid.max(sp.residual(&xs));
        worst_coeff = worst_coeff.max(sp.max_coeff());
        let max_l1 = xs
            .iter()
            .map(|x| x.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        norm_ok &= sp.f_norm_1() <= max_l1 + 1e-12;
    }
    let pass = worst_eluder >= -SLACK_TOL
        && worst_elliptic >= -SLACK_TOL
        && worst_decoupling >= -SLACK_TOL
        && worst_resid <= 1e-9
        && worst_coeff <= 2.0 + 1e-9
        && norm_ok;
    let secs = t0.elapsed().as_secs_f64();
    report(
        11,
        pass && secs < 60.0,
        &format!(
            "eluder {worst_eluder:+.3e}, elliptic {worst_elliptic:+.3e}, decoupling {worst_decoupling:+.3e}, spanner resid {worst_resid:.2e} coeff {worst_coeff:.3}, {secs:.1}s"
        ),
    );
}

/// Criterion 12: rerunning any seeded pipeline produces byte-identical CSV
/// artifacts.
#[test]
fn criterion_12_reproducibility() {
    let t0 = Instant::now();
    let caps = caps();
    let class = fixtures::noisy_class(&caps).unwrap();
    let ctx = ClassContext::new(class, caps).unwrap();
    let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();

    let csv_of = |log: &psr_core::learners::RunLog| {
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        buf
    };

    let beta = 2.0 * (8.0_f64 * 100.0).ln();
    let o1 = omle(&ctx, &OmleConfig { iterations: 50, beta, seed: 7 }).unwrap();
    let o2 = omle(&ctx, &OmleConfig { iterations: 50, beta, seed: 7 }).unwrap();
    let omle_same = csv_of(&o1.log) == csv_of(&o2.log);

    let e1 = explorative_e2d(&ctx, &cover, &E2dConfig::new(25, E2D_GAMMA, 7)).unwrap();
    let e2 = explorative_e2d(&ctx, &cover, &E2dConfig::new(25, E2D_GAMMA, 7)).unwrap();
    let e2d_same = csv_of(&e1.log) == csv_of(&e2.log);

    let m1 = mops(&ctx, &cover, &MopsConfig::new(40, MOPS_GAMMA, 7)).unwrap();
    let m2 = mops(&ctx, &cover, &MopsConfig::new(40, MOPS_GAMMA, 7)).unwrap();
    let mops_same = csv_of(&m1.log) == csv_of(&m2.log);

    let r1 = rf_e2d(&ctx, &cover, &RfE2dConfig::new(25, RFE2D_GAMMA, 7)).unwrap();
    let r2 = rf_e2d(&ctx, &cover, &RfE2dConfig::new(25, RFE2D_GAMMA, 7)).unwrap();
    let rf_same = csv_of(&r1.log) == csv_of(&r2.log) && r1.theta_hat == r2.theta_hat;

    // Distinct seeds must actually change the byte stream.
    let o3 = omle(&ctx, &OmleConfig { iterations: 50, beta, seed: 8 }).unwrap();
    let differs = csv_of(&o1.log) != csv_of(&o3.log);

    // Trajectory CSV export reproduces byte-for-byte as well.
    let d = trajectory_distribution(
        &fixtures::generate_fixture(FixtureName::RandomRevealing, 3, 0.3).unwrap(),
        &Policy::Uniform,
        2,
        &caps,
    )
    .unwrap();
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    psr_core::io::write_trajectory_csv(&d, &mut t1).unwrap();
    psr_core::io::write_trajectory_csv(&d, &mut t2).unwrap();

    let pass = omle_same && e2d_same && mops_same && rf_same && differs && t1 == t2;
    let secs = t0.elapsed().as_secs_f64();
    report(
        12,
        pass,
        &format!(
            "omle {omle_same}, e2d {e2d_same}, mops {mops_same}, rf-e2d {rf_same}, seeds distinguish {differs}, {secs:.1}s"
        ),
    );
}

/// Supporting check used alongside the acceptance gate: the regular-PSR
/// bracket obeys `lambda_hi <= sqrt(U_A) * alpha_psr^{-1}` and the exhaustive
/// core-matrix search dominates the greedy one.
#[test]
fn regular_psr_bracket_consistency() {
    let caps = caps();
    let model = fixtures::fix_noisy();
    let core = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
    let (b, rep) = brep_regular_psr(&model, &core, CoreMatrixMode::Exhaustive, &caps).unwrap();
    let cert = certify_stability(&b, 32, 0xAC13);
    let bound = (core.u_a() as f64).sqrt() * rep.alpha_psr_inv;
    assert!(
        cert.lambda_hi <= bound + SLACK_TOL,
        "lambda_hi {} > sqrt(U_A) alpha^-1 {}",
        cert.lambda_hi,
        bound
    );
    let (_, greedy) = brep_regular_psr(&model, &core, CoreMatrixMode::Greedy, &caps).unwrap();
    assert!(rep.alpha_psr_inv <= greedy.alpha_psr_inv + 1e-12);
    // A full-column-rank square D_h forces K_h = D_h.
    assert!(!rep.greedy_used);
}

/// Supporting check: the DetTable oracle for optimal planning also holds on
/// FIX-NOISY via 100 random-policy dominance (exhaustive is covered in unit
/// tests at H=2).
#[test]
fn planning_dominance_on_class_members() {
    let caps = caps();
    let class = fixtures::noisy_class(&caps).unwrap();
    let mut rng = rng_for(0xAC14, &[0]);
    for m in class.members.iter().take(4) {
        let (_, v_star) = psr_core::model::optimal_policy(m, &caps).unwrap();
        for _ in 0..25 {
            let pi = fixtures::random_stochastic_policy(m, &mut rng);
            let v = psr_core::model::value(m, &pi, &caps).unwrap();
            assert!(v <= v_star + 1e-12);
        }
    }
    let _ = DetTable::new(2, 2, 2);
}
