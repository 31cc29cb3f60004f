//! Per-step representation-error functionals between two B-representations,
//! their exact expectations, and the Hellinger domination inequalities.

use nalgebra::DVector;

use super::pi_norm;
use crate::index::TrajIndexer;
use crate::model::{compose_exploration, hellinger_sq, trajectory_distribution, Policy, PomdpModel};
use crate::psr::{joint_state, BRep};
use crate::{Caps, Error, Result};

fn check_shared_core(bt: &BRep, bb: &BRep) -> Result<()> {
    if bt.core != bb.core {
        return Err(Error::DimensionMismatch(
            "B-representations must share core test sets".into(),
        ));
    }
    Ok(())
}

/// Initial error
/// `E_0 = 0.5 ||B^theta_{H:1} (q0^theta - q0^bar)||_Pi`.
pub fn b_error_initial(bt: &BRep, bb: &BRep) -> Result<f64> {
    check_shared_core(bt, bb)?;
    let diff = &bt.q0 - &bb.q0;
    let vals = bt.future_values(1, &diff);
    Ok(0.5 * pi_norm(&vals, bt.n_obs(), bt.n_act(), bt.horizon()))
}

/// Step error at a fixed step-`h` state vector of the reference model:
/// `E_h = 0.5 max_{pi_h} sum_{o,a} pi_h(a|o) ||B^theta_{H:h+1} (B^theta_h(o,a) - B^bar_h(o,a)) qbar||_Pi`.
/// The inner maximum is taken greedily per observation, which is exact
/// because the objective is linear in each conditional `pi_h(.|o)`.
pub fn b_error_at(bt: &BRep, bb: &BRep, h: usize, qbar: &DVector<f64>) -> Result<f64> {
    check_shared_core(bt, bb)?;
    let len = bt.horizon() - h;
    let mut total = 0.0;
    for o in 0..bt.n_obs() {
        let mut best = 0.0_f64;
        for a in 0..bt.n_act() {
            let v = (bt.op(h, o, a) - bb.op(h, o, a)) * qbar;
            let vals = bt.future_values(h + 1, &v);
            best = best.max(pi_norm(&vals, bt.n_obs(), bt.n_act(), len));
        }
        total += best;
    }
    Ok(0.5 * total)
}

/// Exact expectations `[E_0, E_{bar,pi}[E_1], ..., E_{bar,pi}[E_H]]` of the
/// step errors over histories drawn from the reference model under `policy`.
pub fn expected_b_errors(
    bt: &BRep,
    bb: &BRep,
    model_bar: &PomdpModel,
    policy: &Policy,
    caps: &Caps,
) -> Result<Vec<f64>> {
    check_shared_core(bt, bb)?;
    let horizon = bt.horizon();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(b_error_initial(bt, bb)?);
    for h in 1..=horizon {
        let ix = TrajIndexer::checked(bt.n_obs(), bt.n_act(), h - 1, caps, "expected_b_errors")?;
        let mut acc = 0.0;
        for idx in 0..ix.count() {
            let tau = ix.decode(idx);
            let weight = policy.factor(&tau, bt.n_act());
            if weight <= 0.0 {
                continue;
            }
            // Unnormalized state P(tau) * qbar(tau) folds the do-probability
            // into the homogeneous error functional.
            let x = joint_state(model_bar, &bt.core, &tau);
            acc += weight * b_error_at(bt, bb, h, &x)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Exact second moments `[E_0^2, E[E_1^2], ..., E[E_H^2]]` under the
/// reference model and `policy`.
pub fn expected_sq_b_errors(
    bt: &BRep,
    bb: &BRep,
    model_bar: &PomdpModel,
    policy: &Policy,
    caps: &Caps,
) -> Result<Vec<f64>> {
    check_shared_core(bt, bb)?;
    let horizon = bt.horizon();
    let mut out = Vec::with_capacity(horizon + 1);
    let e0 = b_error_initial(bt, bb)?;
    out.push(e0 * e0);
    for h in 1..=horizon {
        let ix = TrajIndexer::checked(bt.n_obs(), bt.n_act(), h - 1, caps, "expected_sq_b_errors")?;
        let mut acc = 0.0;
        for idx in 0..ix.count() {
            let tau = ix.decode(idx);
            let weight = policy.factor(&tau, bt.n_act());
            if weight <= 0.0 {
                continue;
            }
            let (p_tau, _) = model_bar.forward(&tau);
            if p_tau <= 0.0 {
                continue;
            }
            let qbar = joint_state(model_bar, &bt.core, &tau) / p_tau;
            let e = b_error_at(bt, bb, h, &qbar)?;
            acc += weight * p_tau * e * e;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Signed slacks of the Hellinger domination inequalities, one per step
/// `h in 0..=H`: `rhs_h - lhs_h` where
///
/// - `h = 0`: `lhs = E_0^2`, `rhs = Lambda^2 U_A D_H^2(pi_{0,exp})`;
/// - `1 <= h <= H-1`: `lhs = E[E_h^2]`,
///   `rhs = 4 Lambda^2 A U_A (D_H^2(pi_{h,exp}) + D_H^2(pi_{h-1,exp}))`;
/// - `h = H`: `lhs = E[E_H^2]`, `rhs = 2 (Lambda + 1)^2 D_H^2(pi_{H-1,exp})`.
///
/// `lambda` must upper-bound the stability parameter of `bt` (a certified
/// `lambda_hi` is sound; the right-hand sides are monotone in it).
pub fn hellinger_domination_check(
    bt: &BRep,
    bb: &BRep,
    model_t: &PomdpModel,
    model_bar: &PomdpModel,
    policy: &Policy,
    lambda: f64,
    caps: &Caps,
) -> Result<Vec<f64>> {
    check_shared_core(bt, bb)?;
    let horizon = bt.horizon();
    let u_a = bt.core.u_a() as f64;
    let n_act = bt.n_act() as f64;

    // Squared Hellinger distances under each exploration composition.
    let mut dh = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let pexp = compose_exploration(policy, h, &bt.core)?;
        let dt = trajectory_distribution(model_t, &pexp, horizon, caps)?;
        let db = trajectory_distribution(model_bar, &pexp, horizon, caps)?;
        dh.push(hellinger_sq(&dt, &db)?);
    }

    let sq = expected_sq_b_errors(bt, bb, model_bar, policy, caps)?;
    let mut slacks = Vec::with_capacity(horizon + 1);
    slacks.push(lambda * lambda * u_a * dh[0] - sq[0]);
    for h in 1..horizon {
        let rhs = 4.0 * lambda * lambda * n_act * u_a * (dh[h] + dh[h - 1]);
        slacks.push(rhs - sq[h]);
    }
    let rhs_last = 2.0 * (lambda + 1.0) * (lambda + 1.0) * dh[horizon - 1];
    slacks.push(rhs_last - sq[horizon]);
    Ok(slacks)
}
