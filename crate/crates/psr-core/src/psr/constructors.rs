//! Constructors realizing B-representations for the tractable POMDP classes.

use std::collections::{HashMap, HashSet};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{d_matrix, enumerate_tests, joint_state, CoreTestSet, Provenance, Test};
use crate::index::{Act, Obs, State, TrajIndexer};
use crate::la;
use crate::model::PomdpModel;
use crate::psr::BRep;
use crate::{Caps, Error, Result};

/// Left-inverse choice for the revealing construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeftInverseMode {
    /// Moore-Penrose pseudo-inverse (the `l2` revealing route).
    PseudoInverse,
    /// Left inverse minimizing `||M^+||_{1->1}` subject to `M^+ M = I`,
    /// found by linear programming (the `l1` revealing route).
    L1Optimized,
}

/// The `m`-step emission-action matrix `M_h` at 1-based step `h <= H-m+1`:
/// `M_h[(o_seq, a_seq), s] = P(o_{h:h+m-1} = o_seq | s_h = s, do(a_seq))`.
/// Rows are ordered exactly like the full-window core tests at step `h`.
pub fn emission_action_matrix(model: &PomdpModel, h: usize, m: usize) -> DMatrix<f64> {
    assert!(h >= 1 && h + m - 1 <= model.horizon, "window must fit the horizon");
    let tests = enumerate_tests(model.n_obs, model.n_actions, m);
    let mut mat = DMatrix::zeros(tests.len(), model.n_states);
    for s in 0..model.n_states {
        let e_s = DVector::from_fn(model.n_states, |i, _| if i == s { 1.0 } else { 0.0 });
        for (r, t) in tests.iter().enumerate() {
            mat[(r, s)] = model.test_success_from(h - 1, &e_s, &t.obs, &t.acts);
        }
    }
    mat
}

/// Indicator shift operator for the window-truncated steps `h > H - m`:
/// `B_h(o, a)[t', t] = 1` iff `t = (o, a, t')`.
fn indicator_op(core: &CoreTestSet, h: usize, o: Obs, a: Act) -> DMatrix<f64> {
    let rows = core.size(h + 1);
    let cols = core.size(h);
    let mut b = DMatrix::zeros(rows, cols);
    for (ci, t) in core.tests(h).iter().enumerate() {
        if !t.starts_with(o, a) {
            continue;
        }
        let tail = t.tail();
        for (ri, t_next) in core.tests(h + 1).iter().enumerate() {
            if *t_next == tail {
                b[(ri, ci)] = 1.0;
            }
        }
    }
    b
}

fn l1_left_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let bound = pb.add_var(1.0, (0.0, f64::INFINITY));
    // X = P - N with P, N >= 0; X is cols x rows.
    let pos: Vec<Vec<_>> = (0..cols)
        .map(|_| (0..rows).map(|_| pb.add_var(0.0, (0.0, f64::INFINITY))).collect())
        .collect();
    let neg: Vec<Vec<_>> = (0..cols)
        .map(|_| (0..rows).map(|_| pb.add_var(0.0, (0.0, f64::INFINITY))).collect())
        .collect();
    // Column sums of |X| bounded by the objective variable.
    for u in 0..rows {
        let mut terms = vec![(bound, -1.0)];
        for i in 0..cols {
            terms.push((pos[i][u], 1.0));
            terms.push((neg[i][u], 1.0));
        }
        pb.add_constraint(&terms, ComparisonOp::Le, 0.0);
    }
    // X M = I.
    for i in 0..cols {
        for j in 0..cols {
            let mut terms = Vec::with_capacity(2 * rows);
            for u in 0..rows {
                terms.push((pos[i][u], m[(u, j)]));
                terms.push((neg[i][u], -m[(u, j)]));
            }
            let rhs = if i == j { 1.0 } else { 0.0 };
            pb.add_constraint(&terms, ComparisonOp::Eq, rhs);
        }
    }
    let sol = pb
        .solve()
        .map_err(|e| Error::InvalidModel(format!("l1 left-inverse LP failed: {e}")))?;
    let mut x = DMatrix::zeros(cols, rows);
    for i in 0..cols {
        for u in 0..rows {
            x[(i, u)] = sol[pos[i][u]] - sol[neg[i][u]];
        }
    }
    Ok(x)
}

/// B-representation of an `m`-step revealing POMDP:
/// `B_h(o, a) = M_{h+1} T_{h,a} diag(O_h(o|.)) M_h^+` for `h <= H - m`,
/// indicator shifts for `h > H - m`, and `q0 = M_1 mu_1`.
pub fn brep_revealing(
    model: &PomdpModel,
    m: usize,
    mode: LeftInverseMode,
    caps: &Caps,
) -> Result<BRep> {
    let core = CoreTestSet::windowed(model.horizon, model.n_obs, model.n_actions, m, caps)?;
    let h_full = model.horizon + 1 - m; // last step with a full-window matrix
    let mut emis: Vec<DMatrix<f64>> = Vec::with_capacity(h_full);
    let mut left: Vec<DMatrix<f64>> = Vec::with_capacity(h_full);
    let mut alpha_inv = 0.0_f64;
    let mut sigma_min_all = f64::INFINITY;
    for h in 1..=h_full {
        let mh = emission_action_matrix(model, h, m);
        let sv = la::singular_values(&mh);
        let (smax, smin) = (sv[0], *sv.last().unwrap());
        if sv.len() < model.n_states || smin <= la::RANK_REL_TOL * smax {
            return Err(Error::RankDeficient { h, sigma_min: smin });
        }
        sigma_min_all = sigma_min_all.min(smin);
        let inv = match mode {
            LeftInverseMode::PseudoInverse => la::pinv(&mh),
            LeftInverseMode::L1Optimized => l1_left_inverse(&mh)?,
        };
        alpha_inv = alpha_inv.max(la::norm_1_to_1(&inv));
        emis.push(mh);
        left.push(inv);
    }
    let alpha_inv = match mode {
        LeftInverseMode::PseudoInverse => 1.0 / sigma_min_all,
        LeftInverseMode::L1Optimized => alpha_inv,
    };

    let mut ops = Vec::with_capacity(model.horizon);
    for h in 1..=model.horizon {
        let mut per_oa = Vec::with_capacity(model.n_obs * model.n_actions);
        for o in 0..model.n_obs {
            for a in 0..model.n_actions {
                let b = if h <= model.horizon - m {
                    let mut diag = left[h - 1].clone();
                    // diag(O_h(o|.)) M_h^+ applied row-wise.
                    for s in 0..model.n_states {
                        let w = model.emit[h - 1][(o, s)];
                        diag.row_mut(s).scale_mut(w);
                    }
                    &emis[h] * &model.trans[h - 1][a] * diag
                } else {
                    indicator_op(&core, h, o, a)
                };
                per_oa.push(b);
            }
        }
        ops.push(per_oa);
    }
    let q0 = &emis[0] * &model.init;
    Ok(BRep {
        core,
        ops,
        q0,
        provenance: Provenance::Revealing {
            m,
            alpha_inv,
            l1_mode: mode == LeftInverseMode::L1Optimized,
        },
        n_states: model.n_states,
    })
}

/// A family of suffix decoders `phi_h` mapping the last `min(m, h)` steps of
/// observations (with the actions between them) to the latent state at `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoder {
    pub m: usize,
    /// `phi[h-1]` (1-based step h): window -> latent state.
    pub phi: Vec<HashMap<Test, State>>,
}

impl Decoder {
    pub fn new(m: usize, horizon: usize) -> Self {
        Decoder {
            m,
            phi: vec![HashMap::new(); horizon],
        }
    }

    /// Decoded state for the suffix window ending at 1-based step `h`.
    pub fn decode(&self, h: usize, window: &Test) -> Option<State> {
        self.phi[h - 1].get(window).copied()
    }

    /// Checks that on every trajectory with positive probability under some
    /// action sequence, the decoder reproduces the realized latent state.
    /// Explores `(step, state, window)` triples with memoization.
    pub fn verify(&self, model: &PomdpModel) -> Result<()> {
        let mut seen: HashSet<(usize, State, Vec<Obs>, Vec<Act>)> = HashSet::new();
        let mut stack: Vec<(usize, State, Test)> = Vec::new();
        for s in 0..model.n_states {
            if model.init[s] > 0.0 {
                stack.push((1, s, Test::dummy()));
            }
        }
        while let Some((h, s, partial)) = stack.pop() {
            for o in 0..model.n_obs {
                if model.emit[h - 1][(o, s)] <= 0.0 {
                    continue;
                }
                let mut window = partial.clone();
                window.obs.push(o);
                // Trim to the last min(m, h) observations.
                while window.obs.len() > self.m.min(h) {
                    window.obs.remove(0);
                    window.acts.remove(0);
                }
                match self.decode(h, &window) {
                    Some(dec) if dec == s => {}
                    other => {
                        return Err(Error::DecoderInconsistent(format!(
                            "step {h}, window {window:?}: expected state {s}, decoder returned {other:?}"
                        )));
                    }
                }
                if h == model.horizon {
                    continue;
                }
                for a in 0..model.n_actions {
                    let mut next_partial = window.clone();
                    next_partial.acts.push(a);
                    for s2 in 0..model.n_states {
                        if model.trans[h - 1][a][(s2, s)] > 0.0 {
                            let key = (h + 1, s2, next_partial.obs.clone(), next_partial.acts.clone());
                            if seen.insert(key) {
                                stack.push((h + 1, s2, next_partial.clone()));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// B-representation of an `m`-step decodable POMDP: operators carry the
/// deterministic window shift together with the decoded one-step transition
/// probability `P_h(t_{h+1} | t_h)`.
pub fn brep_decodable(model: &PomdpModel, decoder: &Decoder, m: usize, caps: &Caps) -> Result<BRep> {
    decoder.verify(model)?;
    let core = CoreTestSet::windowed(model.horizon, model.n_obs, model.n_actions, m, caps)?;
    let h_big = model.horizon.saturating_sub(m); // steps h <= h_big have full next window
    let mut ops = Vec::with_capacity(model.horizon);
    for h in 1..=model.horizon {
        let mut per_oa = Vec::with_capacity(model.n_obs * model.n_actions);
        for o in 0..model.n_obs {
            for a in 0..model.n_actions {
                let b = if h <= h_big {
                    decodable_op(model, decoder, &core, h, m, o, a)?
                } else {
                    indicator_op(&core, h, o, a)
                };
                per_oa.push(b);
            }
        }
        ops.push(per_oa);
    }
    let q0 = joint_state(model, &core, &[]);
    Ok(BRep {
        core,
        ops,
        q0,
        provenance: Provenance::Decodable { m },
        n_states: model.n_states,
    })
}

fn decodable_op(
    model: &PomdpModel,
    decoder: &Decoder,
    core: &CoreTestSet,
    h: usize,
    m: usize,
    o: Obs,
    a: Act,
) -> Result<DMatrix<f64>> {
    let rows = core.size(h + 1);
    let cols = core.size(h);
    let mut b = DMatrix::zeros(rows, cols);
    for (ci, t) in core.tests(h).iter().enumerate() {
        if !t.starts_with(o, a) {
            continue;
        }
        // Decoded state at step h + m - 1 from the window t itself.
        let s = match decoder.decode(h + m - 1, t) {
            Some(s) => s,
            // Windows that cannot occur have no decode; the operator column
            // stays zero, matching the zero predictive mass they carry.
            None => continue,
        };
        for (ri, t_next) in core.tests(h + 1).iter().enumerate() {
            // Overlap: t_{h+1} repeats t_h shifted by one step (vacuous at m=1).
            if m >= 2 && (t.obs[1..] != t_next.obs[..m - 1] || t.acts[1..] != t_next.acts[..m - 2]) {
                continue;
            }
            let o_new = *t_next.obs.last().unwrap();
            let a_last = if m == 1 { a } else { *t_next.acts.last().unwrap() };
            // P(o_{h+m} = o_new | s_{h+m-1} = s, a_{h+m-1} = a_last).
            let mut p = 0.0;
            for s2 in 0..model.n_states {
                p += model.emit[h + m - 1][(o_new, s2)] * model.trans[h + m - 2][a_last][(s2, s)];
            }
            b[(ri, ci)] = p;
        }
    }
    Ok(b)
}

/// How the generalized left inverse for the future-sufficient construction
/// is chosen.
pub enum NaturalMode<'a> {
    /// Plain pseudo-inverse of `M_h` (coincides with the revealing route in
    /// the full-rank tabular case).
    PseudoInverse,
    /// `M_h^nat = Psi_{h-1} (M_h Psi_{h-1})^dagger` from a transition
    /// factorization `T_{h-1, a} = Psi_{h-1} Phi_{h-1, a}`; `psi[h - 2]`
    /// supplies `Psi_{h-1}` for 1-based `h >= 2`, step 1 falls back to the
    /// pseudo-inverse.
    FactoredPsi(&'a [DMatrix<f64>]),
    /// Explicit matrices `M_h^nat`, one per step `1..=H-m+1`.
    Supplied(Vec<DMatrix<f64>>),
}

/// B-representation of an `m`-step future-sufficient POMDP:
/// `B_h(o, a) = M_{h+1} T_{h,a} diag(O_h(o|.)) M_h^nat`, where `M_h^nat`
/// satisfies `M_h^nat M_h T_{h-1} = T_{h-1}` (with `T_0 = mu_1`). Returns the
/// representation together with `nu = max_h ||M_h^nat||_{1->1}`.
pub fn brep_future_sufficient(
    model: &PomdpModel,
    m: usize,
    natural: NaturalMode<'_>,
    caps: &Caps,
) -> Result<(BRep, f64)> {
    let core = CoreTestSet::windowed(model.horizon, model.n_obs, model.n_actions, m, caps)?;
    let h_full = model.horizon + 1 - m;
    let mut emis = Vec::with_capacity(h_full);
    for h in 1..=h_full {
        emis.push(emission_action_matrix(model, h, m));
    }
    let naturals: Vec<DMatrix<f64>> = match natural {
        NaturalMode::PseudoInverse => emis.iter().map(la::pinv).collect(),
        NaturalMode::FactoredPsi(psi) => (1..=h_full)
            .map(|h| {
                if h == 1 {
                    la::pinv(&emis[0])
                } else {
                    let p = &psi[h - 2];
                    p * la::pinv(&(&emis[h - 1] * p))
                }
            })
            .collect(),
        NaturalMode::Supplied(ms) => {
            if ms.len() != h_full {
                return Err(Error::DimensionMismatch(format!(
                    "expected {h_full} natural left inverses"
                )));
            }
            ms
        }
    };

    // Constraint M_h^nat M_h T_{h-1} = T_{h-1}, where T_0 = mu_1 and T_{h-1}
    // stacks the per-action transition matrices.
    for h in 1..=h_full {
        let t_prev: DMatrix<f64> = if h == 1 {
            DMatrix::from_column_slice(model.n_states, 1, model.init.as_slice())
        } else {
            let mut t = DMatrix::zeros(model.n_states, model.n_states * model.n_actions);
            for a in 0..model.n_actions {
                t.view_mut((0, a * model.n_states), (model.n_states, model.n_states))
                    .copy_from(&model.trans[h - 2][a]);
            }
            t
        };
        let resid = (&naturals[h - 1] * &emis[h - 1] * &t_prev - &t_prev).abs().max();
        if resid > 1e-9 {
            return Err(Error::ConstraintViolation { h, residual: resid });
        }
    }
    // The future-sufficiency parameter is defined on [1, inf): the stability
    // bound max{nu ||x||_1, ||x||_Pi} <= nu ||x||_1 needs nu >= 1 even when
    // the left inverses are smaller in norm.
    let nu = naturals.iter().map(la::norm_1_to_1).fold(1.0, f64::max);

    let mut ops = Vec::with_capacity(model.horizon);
    for h in 1..=model.horizon {
        let mut per_oa = Vec::with_capacity(model.n_obs * model.n_actions);
        for o in 0..model.n_obs {
            for a in 0..model.n_actions {
                let b = if h <= model.horizon - m {
                    let mut nat = naturals[h - 1].clone();
                    for s in 0..model.n_states {
                        let w = model.emit[h - 1][(o, s)];
                        nat.row_mut(s).scale_mut(w);
                    }
                    &emis[h] * &model.trans[h - 1][a] * nat
                } else {
                    indicator_op(&core, h, o, a)
                };
                per_oa.push(b);
            }
        }
        ops.push(per_oa);
    }
    let q0 = &emis[0] * &model.init;
    Ok((
        BRep {
            core,
            ops,
            q0,
            provenance: Provenance::FutureSufficient { m, nu },
            n_states: model.n_states,
        },
        nu,
    ))
}

/// Core-matrix search strategy for the regular-PSR construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoreMatrixMode {
    /// Scan all column subsets of size `rank(D_h)` (errors past the cap).
    Exhaustive,
    /// Pivoted column selection (may be suboptimal; flagged in the report).
    Greedy,
}

/// Outcome of the regular-PSR construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularPsrReport {
    /// `alpha_psr^{-1} = max_h ||K_h^dagger||_{1->1}` over `h in 0..H`.
    pub alpha_psr_inv: f64,
    /// Selected history-column indices per step `h in 0..H`.
    pub core_columns: Vec<Vec<usize>>,
    /// Whether any step fell back to greedy selection.
    pub greedy_used: bool,
}

/// B-representation of a general (regular) PSR, solved from the predictive
/// state matrices so that `rowspan(B_h(o, a)) ⊆ colspan(D_{h-1})`, together
/// with core matrices `K_h` minimizing `||K_h^dagger||_{1->1}`.
pub fn brep_regular_psr(
    model: &PomdpModel,
    core: &CoreTestSet,
    mode: CoreMatrixMode,
    caps: &Caps,
) -> Result<(BRep, RegularPsrReport)> {
    let h_max = model.horizon;
    TrajIndexer::checked(model.n_obs, model.n_actions, h_max, caps, "brep_regular_psr")?;

    // Unnormalized state matrices X_h = [P(tau_{h-1}, t)]_{t, tau_{h-1}}.
    let mut xs: Vec<DMatrix<f64>> = Vec::with_capacity(h_max + 1);
    for h in 1..=h_max + 1 {
        let ix = TrajIndexer::new(model.n_obs, model.n_actions, h - 1);
        let rows = if h == h_max + 1 { 1 } else { core.size(h) };
        let mut x = DMatrix::zeros(rows, ix.count());
        for col in 0..ix.count() {
            let tau = ix.decode(col);
            x.set_column(col, &joint_state(model, core, &tau));
        }
        xs.push(x);
    }

    let radix = model.n_obs * model.n_actions;
    let mut ops = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let x = &xs[h - 1];
        let xp = la::pinv(x);
        let mut per_oa = Vec::with_capacity(radix);
        for o in 0..model.n_obs {
            for a in 0..model.n_actions {
                // Columns of X_{h+1} for histories ending in (o, a), laid out
                // over the step-(h-1) histories.
                let next = &xs[h];
                let n_hist = x.ncols();
                let mut y = DMatrix::zeros(next.nrows(), n_hist);
                for c in 0..n_hist {
                    y.set_column(c, &next.column(c * radix + o * model.n_actions + a));
                }
                per_oa.push(&y * &xp);
            }
        }
        ops.push(per_oa);
    }
    let q0 = xs[0].column(0).into_owned();

    // Core matrices over D_h for h in 0..H (driving the B_{H:h+1} bounds).
    let mut alpha_psr_inv = 0.0_f64;
    let mut core_columns = Vec::with_capacity(h_max);
    let mut greedy_used = false;
    for h in 0..h_max {
        let d = d_matrix(model, core, h, caps)?;
        let (cols, norm, fellback) = select_core_matrix(&d, mode, caps)?;
        alpha_psr_inv = alpha_psr_inv.max(norm);
        core_columns.push(cols);
        greedy_used |= fellback;
    }

    Ok((
        BRep {
            core: core.clone(),
            ops,
            q0,
            provenance: Provenance::RegularPsr { alpha_psr_inv },
            n_states: model.n_states,
        },
        RegularPsrReport {
            alpha_psr_inv,
            core_columns,
            greedy_used,
        },
    ))
}

/// Picks rank-many columns of `d` forming a core matrix `K` with
/// `rank(K) = rank(D)`, minimizing `||K^dagger||_{1->1}` exhaustively or by
/// pivoted selection. Returns `(columns, norm, greedy_used)`.
fn select_core_matrix(
    d: &DMatrix<f64>,
    mode: CoreMatrixMode,
    caps: &Caps,
) -> Result<(Vec<usize>, f64, bool)> {
    let rank = la::numerical_rank(d);
    if rank == 0 {
        return Ok((Vec::new(), 0.0, false));
    }
    let n = d.ncols();
    let n_subsets = binomial(n, rank);
    match mode {
        CoreMatrixMode::Exhaustive => {
            if n_subsets > caps.max_core_subsets as u128 {
                return Err(Error::Capacity {
                    required: n_subsets.min(usize::MAX as u128) as usize,
                    cap: caps.max_core_subsets,
                    context: "exhaustive core-matrix search".into(),
                });
            }
            let mut best: Option<(Vec<usize>, f64)> = None;
            let mut subset: Vec<usize> = (0..rank).collect();
            loop {
                let k = d.select_columns(subset.iter());
                if la::numerical_rank(&k) == rank {
                    let norm = la::norm_1_to_1(&la::pinv(&k));
                    if best.as_ref().is_none_or(|(_, b)| norm < *b) {
                        best = Some((subset.clone(), norm));
                    }
                }
                if !next_subset(&mut subset, n) {
                    break;
                }
            }
            let (cols, norm) = best.expect("a full-rank column subset exists");
            Ok((cols, norm, false))
        }
        CoreMatrixMode::Greedy => {
            let cols = pivoted_columns(d, rank);
            let k = d.select_columns(cols.iter());
            let norm = la::norm_1_to_1(&la::pinv(&k));
            Ok((cols, norm, true))
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    out
}

fn next_subset(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Greedy pivoted column selection: repeatedly takes the column with the
/// largest residual after projecting out the span of the chosen ones.
fn pivoted_columns(d: &DMatrix<f64>, rank: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(rank);
    let mut residual: Vec<DVector<f64>> = (0..d.ncols()).map(|c| d.column(c).into_owned()).collect();
    for _ in 0..rank {
        let (best_col, best_norm) = residual
            .iter()
            .enumerate()
            .map(|(c, v)| (c, v.norm()))
            .fold((0, -1.0), |acc, (c, n)| if n > acc.1 { (c, n) } else { acc });
        if best_norm <= 0.0 {
            break;
        }
        let q = &residual[best_col] / best_norm;
        for v in residual.iter_mut() {
            let proj = q.dot(v);
            *v -= &q * proj;
        }
        chosen.push(best_col);
    }
    chosen.sort_unstable();
    chosen
}
