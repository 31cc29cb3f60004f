//! B-representations (observable operators) and exact validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{joint_state, predictive_state, CoreTestSet};
use crate::index::{Act, Obs, Step, TrajIndexer};
use crate::model::PomdpModel;
use crate::{Caps, Result};

/// Which construction produced a B-representation, with the parameter that
/// drives its theoretical stability bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// `sigma_min`-revealing with window `m`; bound `sqrt(S)/sigma_min` for
    /// the pseudo-inverse route, `sqrt(A^{m-1}) * max||M^+||_1` for the
    /// l1-optimized left inverse.
    Revealing { m: usize, alpha_inv: f64, l1_mode: bool },
    /// `nu`-future-sufficient with window `m`; bound `sqrt(A^{m-1}) * nu`.
    FutureSufficient { m: usize, nu: f64 },
    /// `m`-step decodable; bound 1.
    Decodable { m: usize },
    /// Regular PSR with `alpha_psr^{-1}`; bound `sqrt(U_A) * alpha_psr^{-1}`.
    RegularPsr { alpha_psr_inv: f64 },
    /// No construction-specific bound.
    Raw,
}

impl Provenance {
    /// The claimed stability bound, when the construction provides one.
    pub fn theory_bound(&self, n_states: usize, u_a: usize) -> Option<f64> {
        match *self {
            Provenance::Revealing { alpha_inv, l1_mode, .. } => {
                if l1_mode {
                    Some((u_a as f64).sqrt() * alpha_inv)
                } else {
                    Some((n_states as f64).sqrt() * alpha_inv)
                }
            }
            Provenance::FutureSufficient { nu, .. } => Some((u_a as f64).sqrt() * nu),
            Provenance::Decodable { .. } => Some(1.0),
            Provenance::RegularPsr { alpha_psr_inv } => Some((u_a as f64).sqrt() * alpha_psr_inv),
            Provenance::Raw => None,
        }
    }
}

/// Per-step operator matrices `B_h(o, a)` plus the initial predictive state.
///
/// `B_h(o, a)` has shape `|U_{h+1}| x |U_h|` (1-based `h`), and products along
/// a trajectory satisfy `B_{h:1}(tau_h) q0 = [P(tau_h, t)]_{t in U_{h+1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BRep {
    pub core: CoreTestSet,
    /// `ops[h-1][o * A + a]` is `B_h(o, a)`.
    pub ops: Vec<Vec<DMatrix<f64>>>,
    pub q0: DVector<f64>,
    pub provenance: Provenance,
    /// Latent-state count of the source model, for bound instantiation.
    pub n_states: usize,
}

impl BRep {
    pub fn horizon(&self) -> usize {
        self.core.horizon
    }

    pub fn n_obs(&self) -> usize {
        self.core.n_obs
    }

    pub fn n_act(&self) -> usize {
        self.core.n_act
    }

    /// `B_h(o, a)` for 1-based step `h`.
    #[inline]
    pub fn op(&self, h: usize, o: Obs, a: Act) -> &DMatrix<f64> {
        &self.ops[h - 1][o * self.core.n_act + a]
    }

    /// `B_{h:1}(tau_h) q0` for an observable history (possibly empty).
    pub fn product(&self, tau: &[Step]) -> DVector<f64> {
        let mut v = self.q0.clone();
        for (i, &(o, a)) in tau.iter().enumerate() {
            v = self.op(i + 1, o, a) * v;
        }
        v
    }

    /// `[B_{H:h}(tau_{h:H}) x]` over all futures `tau_{h:H}`, in trajectory
    /// index order. The result has length `(O*A)^{H-h+1}`; each entry is the
    /// scalar obtained by pushing `x` through the operator chain.
    pub fn future_values(&self, h: usize, x: &DVector<f64>) -> Vec<f64> {
        let len = self.horizon() + 1 - h;
        let ix = TrajIndexer::new(self.n_obs(), self.n_act(), len);
        let mut out = Vec::with_capacity(ix.count());
        self.future_rec(h, x, &mut out);
        out
    }

    fn future_rec(&self, h: usize, x: &DVector<f64>, out: &mut Vec<f64>) {
        if h > self.horizon() {
            debug_assert_eq!(x.len(), 1);
            out.push(x[0]);
            return;
        }
        for o in 0..self.n_obs() {
            for a in 0..self.n_act() {
                let y = self.op(h, o, a) * x;
                self.future_rec(h + 1, &y, out);
            }
        }
    }

    /// The theoretical stability bound attached by the constructor, if any.
    pub fn theory_bound(&self) -> Option<f64> {
        self.provenance.theory_bound(self.n_states, self.core.u_a())
    }
}

/// Residuals of a B-representation against exact model probabilities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BRepValidation {
    /// `max |e_t' B_{h:1}(tau_h) q0 - P(tau_h, t)|` over all `h, tau_h, t`.
    pub decomposition: f64,
    /// `max |B_h(o,a) q(tau) - P(o|tau) q(tau,o,a)|` over reachable `tau`.
    pub one_step: f64,
    /// `max |B_{H:h}(tau_{h:H}) q(tau_{h-1}) - P(tau_{h:H}|tau_{h-1})|` over
    /// reachable histories.
    pub future: f64,
}

impl BRepValidation {
    pub fn max(&self) -> f64 {
        self.decomposition.max(self.one_step).max(self.future)
    }
}

/// Exhaustive validation of a B-representation against its source model.
pub fn validate_brep(brep: &BRep, model: &PomdpModel, caps: &Caps) -> Result<BRepValidation> {
    let h_max = model.horizon;
    TrajIndexer::checked(model.n_obs, model.n_actions, h_max, caps, "validate_brep")?;
    let core = &brep.core;

    let mut decomposition = 0.0_f64;
    let mut one_step = 0.0_f64;
    let mut future = 0.0_f64;

    for h in 0..=h_max {
        let ix = TrajIndexer::new(model.n_obs, model.n_actions, h);
        for idx in 0..ix.count() {
            let tau = ix.decode(idx);
            let got = brep.product(&tau);
            let want = joint_state(model, core, &tau);
            decomposition = decomposition.max((got - &want).abs().max());

            if h < h_max {
                let ps = predictive_state(model, core, &tau);
                let (p_tau, _) = model.forward(&tau);
                if p_tau > 0.0 {
                    // One-step identity P(o|tau) q(tau, o, a) = B(o, a) q(tau).
                    for o in 0..model.n_obs {
                        let mut ext = tau.clone();
                        ext.push((o, 0));
                        let p_obs = model.do_prob(&ext) / p_tau;
                        for a in 0..model.n_actions {
                            ext[h] = (o, a);
                            let lhs = brep.op(h + 1, o, a) * &ps.q;
                            let rhs = predictive_state(model, core, &ext).q * p_obs;
                            one_step = one_step.max((lhs - rhs).abs().max());
                        }
                    }
                    // Future identity B_{H:h+1}(tau') q(tau) = P(tau' | tau).
                    let vals = brep.future_values(h + 1, &ps.q);
                    let fix = TrajIndexer::new(model.n_obs, model.n_actions, h_max - h);
                    for (fi, &v) in vals.iter().enumerate() {
                        let mut full = tau.clone();
                        full.extend(fix.decode(fi));
                        let cond = model.do_prob(&full) / p_tau;
                        future = future.max((v - cond).abs());
                    }
                }
            }
        }
    }
    Ok(BRepValidation {
        decomposition,
        one_step,
        future,
    })
}
