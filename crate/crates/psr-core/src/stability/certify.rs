//! Stability certification: per-step operator norms, the bracket for the
//! fused-norm stability parameter, weak stability, and the well-conditioned
//! diagnostics.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{fused_norm, pi_norm, pi_norm_on_tests};
use crate::exec;
use crate::model::PomdpModel;
use crate::psr::{predictive_state, BRep};
use crate::rng::rng_for;
use crate::Result;

/// Certified stability summary of a B-representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Exact `l1 -> Pi` operator norms `max_t ||B_{H:h} e_t||_Pi` per step.
    pub per_step: Vec<f64>,
    /// Lower end of the bracket for the fused-norm parameter.
    pub lambda_lo: f64,
    /// Upper end: `sqrt(U_A) * max_h per_step[h]`.
    pub lambda_hi: f64,
    /// Bracket is tight (`U_A = 1`), so `lambda_lo = lambda_hi` is exact.
    pub exact: bool,
    /// `R_B = max_h max { 1, max_{||v||_1 = 1} sum_{o,a} ||B_h(o,a) v||_1 }`.
    pub r_b: f64,
    pub u_a: usize,
    /// Constructor-specific claimed bound on the stability parameter.
    pub theory_bound: Option<f64>,
    /// Whether `lambda_hi <= theory_bound + 1e-9`.
    pub theory_satisfied: Option<bool>,
    /// Best sampled ratio `||B q||_Pi / ||q||_*` (refines `lambda_lo`).
    pub best_sampled_ratio: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Exact `l1 -> Pi` norm of `B_{H:h}` (vertices of the l1 ball suffice by
/// convexity, and signs are irrelevant under the absolute value).
fn l1_to_pi_norm(brep: &BRep, h: usize) -> f64 {
    let dim = brep.core.size(h);
    let len = brep.horizon() - h + 1;
    (0..dim)
        .map(|t| {
            let e = DVector::from_fn(dim, |i, _| if i == t { 1.0 } else { 0.0 });
            pi_norm(&brep.future_values(h, &e), brep.n_obs(), brep.n_act(), len)
        })
        .fold(0.0, f64::max)
}

/// `max_{||v||_1=1} sum_{o,a} ||B_h(o,a) v||_1`, exact on the vertices.
fn one_step_l1_mass(brep: &BRep, h: usize) -> f64 {
    let dim = brep.core.size(h);
    (0..dim)
        .map(|t| {
            let mut s = 0.0;
            for o in 0..brep.n_obs() {
                for a in 0..brep.n_act() {
                    s += brep.op(h, o, a).column(t).iter().map(|v| v.abs()).sum::<f64>();
                }
            }
            s
        })
        .fold(0.0, f64::max)
}

/// Certifies the bracket `[lambda_lo, lambda_hi]` for the stability parameter
/// of a B-representation, together with `R_B` and the comparison against the
/// constructor's theoretical bound. `n_samples` random fused-unit directions
/// per step refine the lower end.
pub fn certify_stability(brep: &BRep, n_samples: usize, seed: u64) -> StabilityReport {
    let horizon = brep.horizon();
    let u_a = brep.core.u_a();

    let per_step = exec::par_map_range(horizon, |h0| l1_to_pi_norm(brep, h0 + 1));
    let l_max = per_step.iter().copied().fold(0.0, f64::max);

    let r_b = (1..=horizon)
        .map(|h| one_step_l1_mass(brep, h).max(1.0))
        .fold(0.0, f64::max);

    // Randomized refinement of the lower bound: ratios at random directions
    // are valid lower bounds for the fused -> Pi operator norm.
    let ratios = exec::par_map_range(horizon, |h0| {
        let h = h0 + 1;
        let dim = brep.core.size(h);
        let len = horizon - h + 1;
        let mut rng = rng_for(seed, &[h as u64]);
        let mut best = 0.0_f64;
        for _ in 0..n_samples {
            let q = DVector::from_fn(dim, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g
            });
            let denom = fused_norm(&q, &brep.core, h).fused;
            if denom <= 1e-300 {
                continue;
            }
            let num = pi_norm(&brep.future_values(h, &q), brep.n_obs(), brep.n_act(), len);
            best = best.max(num / denom);
        }
        best
    });
    let best_sampled_ratio = ratios.into_iter().fold(0.0, f64::max);

    let lambda_lo = l_max.max(best_sampled_ratio);
    let lambda_hi = (u_a as f64).sqrt() * l_max;
    let theory_bound = brep.theory_bound();
    StabilityReport {
        per_step,
        lambda_lo,
        lambda_hi,
        exact: u_a == 1,
        r_b,
        u_a,
        theory_bound,
        theory_satisfied: theory_bound.map(|b| lambda_hi <= b + 1e-9),
        best_sampled_ratio,
        n_samples,
        seed,
    }
}

/// The weak-stability ratio of one nonnegative pair `(p, q)`:
/// `||B_{H:h}(p - q)||_Pi / (sqrt(2 (||p||_{Pi,U_h} + ||q||_{Pi,U_h})) * ||sqrt p - sqrt q||_2)`,
/// with 0 when `p = q`.
pub fn weak_stability_ratio(brep: &BRep, h: usize, p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    let diff = p - q;
    if diff.amax() == 0.0 {
        return 0.0;
    }
    let len = brep.horizon() - h + 1;
    let num = pi_norm(&brep.future_values(h, &diff), brep.n_obs(), brep.n_act(), len);
    let root_gap: f64 = p
        .iter()
        .zip(q.iter())
        .map(|(&a, &b)| {
            let d = a.max(0.0).sqrt() - b.max(0.0).sqrt();
            d * d
        })
        .sum::<f64>()
        .sqrt();
    let mass = pi_norm_on_tests(p, &brep.core, h) + pi_norm_on_tests(q, &brep.core, h);
    let denom = (2.0 * mass).sqrt() * root_gap;
    if denom <= 1e-300 {
        return 0.0;
    }
    num / denom
}

/// Report of a sampled weak-stability falsification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakStabilityReport {
    /// Worst sampled weak ratio.
    pub worst_ratio: f64,
    /// Worst sampled fused ratio divided by `sqrt(2 U_A)` times the weak
    /// ratio of the disjoint split of the same difference vector; at most 1
    /// up to numerics.
    pub worst_fused_vs_weak: f64,
    pub n_pairs: usize,
}

/// Checks the weak-stability inequality on explicit nonnegative pairs,
/// returning the worst ratios.
pub fn check_weak_stability(brep: &BRep, h: usize, pairs: &[(DVector<f64>, DVector<f64>)]) -> WeakStabilityReport {
    let mut worst = 0.0_f64;
    let mut worst_rel = 0.0_f64;
    let sqrt_2ua = (2.0 * brep.core.u_a() as f64).sqrt();
    let len = brep.horizon() - h + 1;
    for (p, q) in pairs {
        let r = weak_stability_ratio(brep, h, p, q);
        worst = worst.max(r);
        // Fused ratio of the difference, compared against the weak ratio of
        // its disjoint decomposition x = x_+ - x_-.
        let x = p - q;
        let xp = x.map(|v| v.max(0.0));
        let xn = x.map(|v| (-v).max(0.0));
        let f = fused_norm(&x, &brep.core, h).fused;
        if f > 1e-300 {
            let fused_ratio =
                pi_norm(&brep.future_values(h, &x), brep.n_obs(), brep.n_act(), len) / f;
            let weak_disjoint = weak_stability_ratio(brep, h, &xp, &xn);
            if weak_disjoint > 1e-300 {
                worst_rel = worst_rel.max(fused_ratio / (sqrt_2ua * weak_disjoint));
            }
        }
    }
    WeakStabilityReport {
        worst_ratio: worst,
        worst_fused_vs_weak: worst_rel,
        n_pairs: pairs.len(),
    }
}

/// Samples nonnegative test-probability-like pairs for weak-stability checks:
/// Dirichlet-style vectors plus, when a model is supplied, adversarial pairs
/// of exact predictive states at random histories.
pub fn sample_weak_pairs(
    brep: &BRep,
    h: usize,
    n: usize,
    seed: u64,
    models: &[&PomdpModel],
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let dim = brep.core.size(h);
    let mut rng = rng_for(seed, &[h as u64, 0x77]);
    let gamma = Gamma::new(1.0, 1.0).expect("valid shape");
    let draw = |rng: &mut crate::rng::Seeded| -> DVector<f64> {
        let mut v = DVector::from_fn(dim, |_, _| gamma.sample(rng));
        let s = v.sum();
        if s > 0.0 {
            v /= s;
        }
        v
    };
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        pairs.push((draw(&mut rng), draw(&mut rng)));
    }
    // Predictive states of random histories under each model pair.
    if models.len() >= 2 && h <= brep.horizon() {
        let ix = crate::index::TrajIndexer::new(brep.n_obs(), brep.n_act(), h - 1);
        for _ in 0..n.min(64) {
            let idx = rng.random_range(0..ix.count());
            let tau = ix.decode(idx);
            let a = predictive_state(models[0], &brep.core, &tau).q;
            let b = predictive_state(models[1], &brep.core, &tau).q;
            pairs.push((a, b));
        }
    }
    Ok(pairs)
}

/// Well-conditioned diagnostics: `gamma1^{-1}` is the exact `l1 -> Pi`
/// operator norm over steps, `gamma2^{-1}` the one-step policy-weighted l1
/// mass `max_h max_t sum_o max_a ||B_h(o, a) e_t||_1`.
pub fn well_conditioned_check(brep: &BRep) -> (f64, f64) {
    let horizon = brep.horizon();
    let gamma1_inv = (1..=horizon).map(|h| l1_to_pi_norm(brep, h)).fold(0.0, f64::max);
    let mut gamma2_inv = 0.0_f64;
    for h in 1..=horizon {
        let dim = brep.core.size(h);
        for t in 0..dim {
            let mut total = 0.0;
            for o in 0..brep.n_obs() {
                let mut best = 0.0_f64;
                for a in 0..brep.n_act() {
                    let mass: f64 = brep.op(h, o, a).column(t).iter().map(|v| v.abs()).sum();
                    best = best.max(mass);
                }
                total += best;
            }
            gamma2_inv = gamma2_inv.max(total);
        }
    }
    (gamma1_inv, gamma2_inv)
}
