//! Named parameter storage and the Adam update rule.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

use super::Matrix;

/// Adam hyperparameters. Defaults are the textbook values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Named parameter matrices plus their Adam first/second moments and the
/// shared step counter. Iteration order is always name order (BTreeMap), so
/// updates are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Matrix>,
    moments: BTreeMap<String, (Matrix, Matrix)>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        let name = name.into();
        let (r, c) = value.shape();
        self.moments
            .insert(name.clone(), (Matrix::zeros(r, c), Matrix::zeros(r, c)));
        self.params.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.params.get_mut(name)
    }

    pub(crate) fn moments(&self, name: &str) -> Option<&(Matrix, Matrix)> {
        self.moments.get(name)
    }

    pub(crate) fn set_state(&mut self, name: &str, m: Matrix, v: Matrix) {
        self.moments.insert(name.to_string(), (m, v));
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    /// Parameter names in sorted order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|m| m.data().len()).sum()
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction. Parameters without a gradient
    /// entry are treated as having a zero gradient (their moments still
    /// decay). Gradient shapes must match their parameters.
    pub fn adam_step(&mut self, grads: &BTreeMap<String, Matrix>, hp: AdamParams) -> Result<()> {
        for (name, g) in grads {
            match self.params.get(name) {
                None => {
                    return Err(Error::Config {
                        msg: format!("gradient for unknown parameter {name:?}"),
                    })
                }
                Some(p) if p.shape() != g.shape() => {
                    return Err(Error::shape(
                        "adam_step",
                        format!("{}x{} for {name}", p.rows(), p.cols()),
                        format!("{}x{}", g.rows(), g.cols()),
                    ));
                }
                Some(_) => {}
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - hp.beta1.powi(t);
        let bc2 = 1.0 - hp.beta2.powi(t);

        for (name, p) in self.params.iter_mut() {
            let (m, v) = self.moments.get_mut(name).expect("moments tracked with params");
            let zero;
            let g = match grads.get(name) {
                Some(g) => g,
                None => {
                    zero = Matrix::zeros(p.rows(), p.cols());
                    &zero
                }
            };
            let (pd, md, vd, gd) = (p.data_mut(), m.data_mut(), v.data_mut(), g.data());
            for i in 0..pd.len() {
                md[i] = hp.beta1 * md[i] + (1.0 - hp.beta1) * gd[i];
                vd[i] = hp.beta2 * vd[i] + (1.0 - hp.beta2) * gd[i] * gd[i];
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
            }
        }
        Ok(())
    }

    /// Rounds every parameter and moment through f32 — the precision the
    /// checkpoint format stores. Calling this right after writing a
    /// checkpoint puts the live training state exactly where a reloaded run
    /// would start, so a killed-and-resumed run replays the same trajectory
    /// as an uninterrupted one.
    pub fn quantize_f32(&mut self) {
        let squash = |m: &mut Matrix| {
            for v in m.data_mut() {
                *v = *v as f32 as f64;
            }
        };
        for p in self.params.values_mut() {
            squash(p);
        }
        for (m, v) in self.moments.values_mut() {
            squash(m);
            squash(v);
        }
    }
}
