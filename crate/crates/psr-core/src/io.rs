//! JSON file schemas for models and classes, and CSV emission for
//! trajectory distributions.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::model::{PomdpModel, TrajectoryDist};
use crate::psr::{CoreTestSet, ModelClass};
use crate::{Caps, Error, Result};

fn to_rows(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

fn from_rows(rows: usize, cols: usize, data: &[f64], what: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected {rows}x{cols} = {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

/// On-disk model schema: cardinalities plus row-major matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub horizon: usize,
    pub n_states: usize,
    pub n_obs: usize,
    pub n_actions: usize,
    /// `trans[h][a]`: row-major `S x S` (`T_h(s' | s, a)` at row `s'`, col `s`).
    pub trans: Vec<Vec<Vec<f64>>>,
    /// `emit[h]`: row-major `O x S`.
    pub emit: Vec<Vec<f64>>,
    pub init: Vec<f64>,
    /// `reward[h]`: row-major `O x A`.
    pub reward: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(m: &PomdpModel) -> Self {
        ModelFile {
            horizon: m.horizon,
            n_states: m.n_states,
            n_obs: m.n_obs,
            n_actions: m.n_actions,
            trans: m.trans.iter().map(|per_a| per_a.iter().map(to_rows).collect()).collect(),
            emit: m.emit.iter().map(to_rows).collect(),
            init: m.init.iter().copied().collect(),
            reward: m.reward.iter().map(to_rows).collect(),
        }
    }

    pub fn to_model(&self) -> Result<PomdpModel> {
        let (s, o, a) = (self.n_states, self.n_obs, self.n_actions);
        let trans = self
            .trans
            .iter()
            .enumerate()
            .map(|(h, per_a)| {
                per_a
                    .iter()
                    .map(|d| from_rows(s, s, d, &format!("trans[{h}]")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let emit = self
            .emit
            .iter()
            .enumerate()
            .map(|(h, d)| from_rows(o, s, d, &format!("emit[{h}]")))
            .collect::<Result<Vec<_>>>()?;
        let reward = self
            .reward
            .iter()
            .enumerate()
            .map(|(h, d)| from_rows(o, a, d, &format!("reward[{h}]")))
            .collect::<Result<Vec<_>>>()?;
        PomdpModel::new(
            self.horizon,
            s,
            o,
            a,
            trans,
            emit,
            DVector::from_vec(self.init.clone()),
            reward,
        )
    }
}

/// On-disk model-class schema; all members share the windowed core test set
/// with window `core_window_m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassFile {
    pub models: Vec<ModelFile>,
    pub truth_index: usize,
    pub core_window_m: usize,
}

impl ClassFile {
    pub fn from_class(class: &ModelClass, core_window_m: usize) -> Self {
        ClassFile {
            models: class.members.iter().map(ModelFile::from_model).collect(),
            truth_index: class.truth,
            core_window_m,
        }
    }

    pub fn to_class(&self, caps: &Caps) -> Result<ModelClass> {
        let members = self
            .models
            .iter()
            .map(|m| m.to_model())
            .collect::<Result<Vec<_>>>()?;
        let first = members
            .first()
            .ok_or_else(|| Error::DimensionMismatch("class file holds no models".into()))?;
        let core = CoreTestSet::windowed(
            first.horizon,
            first.n_obs,
            first.n_actions,
            self.core_window_m,
            caps,
        )?;
        ModelClass::new(members, self.truth_index, core)
    }
}

/// Serializes any value as pretty JSON at `path`.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let data = serde_json::to_vec_pretty(value)?;
    std::fs::write(path, data)?;
    Ok(())
}

/// Loads a JSON value from `path`.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let data = std::fs::read(path)?;
    Ok(serde_json::from_slice(&data)?)
}

/// Writes a trajectory distribution as CSV rows
/// `trajectory,p_do,pi_factor,probability` with the trajectory rendered as
/// space-separated `o a` pairs.
pub fn write_trajectory_csv<W: Write>(dist: &TrajectoryDist, mut w: W) -> Result<()> {
    writeln!(w, "trajectory,p_do,pi_factor,probability")?;
    for idx in 0..dist.indexer.count() {
        let tau = dist.indexer.decode(idx);
        let text: Vec<String> = tau.iter().map(|&(o, a)| format!("{o} {a}")).collect();
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e}",
            text.join(" "),
            dist.p_do[idx],
            dist.pi_fac[idx],
            dist.prob(idx)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{trajectory_distribution, Policy};

    #[test]
    fn model_roundtrip_through_file_schema() {
        for m in [fixtures::fix_id(), fixtures::fix_noisy(), fixtures::fix_lmdp()] {
            let f = ModelFile::from_model(&m);
            let text = serde_json::to_string(&f).unwrap();
            let back: ModelFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_model().unwrap(), m);
        }
    }

    #[test]
    fn class_roundtrip() {
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let f = ClassFile::from_class(&class, 1);
        let text = serde_json::to_string(&f).unwrap();
        let back: ClassFile = serde_json::from_str(&text).unwrap();
        let rt = back.to_class(&caps).unwrap();
        assert_eq!(rt.members, class.members);
        assert_eq!(rt.truth, class.truth);
    }

    #[test]
    fn csv_export_is_deterministic() {
        let caps = Caps::default();
        let m = fixtures::fix_noisy();
        let d = trajectory_distribution(&m, &Policy::Uniform, 2, &caps).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trajectory_csv(&d, &mut a).unwrap();
        write_trajectory_csv(&d, &mut b).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(b"trajectory,"));
    }
}
