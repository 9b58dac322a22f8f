//! Central-finite-difference verification of tape gradients.
//!
//! [`grad_check`] records the function once, takes the analytic gradients
//! from the tape, then re-evaluates the function with every parameter entry
//! nudged by ±h. Entries whose perturbation changes the tape's structure
//! signature (a nearest-neighbor assignment flip inside a chamfer loss) are
//! skipped rather than compared — the loss is not differentiable there.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{Matrix, NodeId, ParamStore, Tape};

/// Outcome of a finite-difference sweep.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over all compared entries.
    pub max_rel_err: f64,
    /// Parameter name and flat entry index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    /// Entries compared.
    pub checked: usize,
    /// Entries skipped because the perturbation changed the tape structure.
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_err < tol
    }
}

/// Checks the tape's own gradients of `build` (a scalar function of the
/// parameters, recorded through the tape it is handed) against central
/// finite differences with step `h`.
pub fn grad_check<F>(params: &ParamStore, build: F, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let root = build(params, &mut tape)?;
    let grads = tape.backward(root)?;
    let analytic = tape.param_grads(&grads);
    grad_check_against(params, &analytic, h, |p| {
        let mut tape = Tape::new();
        let root = build(p, &mut tape)?;
        Ok((tape.value(root).get(0, 0), tape.signature()))
    })
}

/// The same sweep with externally supplied "analytic" gradients — the
/// negative-control hook: hand in corrupted gradients and the report must
/// fail. `eval` returns the scalar value and a structure signature; entries
/// whose ±h signatures differ from the base are skipped.
pub fn grad_check_against<F>(
    params: &ParamStore,
    analytic: &BTreeMap<String, Matrix>,
    h: f64,
    eval: F,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, u64)>,
{
    if !(h > 0.0) {
        return Err(Error::Config {
            msg: format!("finite-difference step must be positive, got {h}"),
        });
    }
    let (_, base_sig) = eval(params)?;

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for (name, ag) in analytic {
        let p = params.get(name).ok_or_else(|| Error::Config {
            msg: format!("gradient refers to unknown parameter {name:?}"),
        })?;
        if p.shape() != ag.shape() {
            return Err(Error::shape(
                "grad_check",
                format!("{}x{} for {name}", p.rows(), p.cols()),
                format!("{}x{}", ag.rows(), ag.cols()),
            ));
        }
        for idx in 0..p.data().len() {
            let probe = |delta: f64| -> Result<(f64, u64)> {
                let mut shifted = params.clone();
                shifted
                    .get_mut(name)
                    .expect("checked above")
                    .data_mut()[idx] += delta;
                eval(&shifted)
            };
            let (f_plus, sig_plus) = probe(h)?;
            let (f_minus, sig_minus) = probe(-h)?;
            if sig_plus != base_sig || sig_minus != base_sig {
                report.skipped += 1;
                continue;
            }
            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = ag.data()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), idx));
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
