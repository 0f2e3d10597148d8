//! Gradients of circuit expectation values.
//!
//! Every trainable angle enters as `exp(-i c θ P / 2)` for a Pauli word `P`,
//! so the derivative with respect to the gate angle is
//! `[E(φ + π/2) − E(φ − π/2)] / 2`. A shared parameter collects one such
//! term per gate, scaled by that gate's coefficient.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::ansatz::AnsatzProgram;
use crate::error::{Error, Result};
use crate::simulator::Statevector;

/// Step for central differences.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMethod {
    ParameterShift,
    CentralDifference,
}

impl fmt::Display for GradientMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientMethod::ParameterShift => "parameter-shift",
            GradientMethod::CentralDifference => "central-difference",
        })
    }
}

impl FromStr for GradientMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parameter-shift" | "shift" => Ok(GradientMethod::ParameterShift),
            "central-difference" | "fd" => Ok(GradientMethod::CentralDifference),
            other => Err(Error::InvalidArgument(format!("unknown gradient method {other:?}"))),
        }
    }
}

/// `∂ f(U(θ)|0⟩) / ∂θ_k` for every trainable parameter `k`.
pub fn expectation_gradient<F>(
    program: &AnsatzProgram,
    params: &[f64],
    method: GradientMethod,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(&Statevector) -> Result<f64>,
{
    let mut grad = vec![0.0; program.n_trainable()];
    match method {
        GradientMethod::ParameterShift => {
            for (k, g) in grad.iter_mut().enumerate() {
                for &(op, coeff) in program.binding(k) {
                    if coeff == 0.0 {
                        continue;
                    }
                    let plus = f(&program.evaluate_shifted(params, op, FRAC_PI_2)?)?;
                    let minus = f(&program.evaluate_shifted(params, op, -FRAC_PI_2)?)?;
                    *g += coeff * (plus - minus) / 2.0;
                }
            }
        }
        GradientMethod::CentralDifference => {
            let mut shifted = params.to_vec();
            for (k, g) in grad.iter_mut().enumerate() {
                shifted[k] = params[k] + FD_STEP;
                let plus = f(&program.evaluate(&shifted)?)?;
                shifted[k] = params[k] - FD_STEP;
                let minus = f(&program.evaluate(&shifted)?)?;
                shifted[k] = params[k];
                *g = (plus - minus) / (2.0 * FD_STEP);
            }
        }
    }
    Ok(grad)
}
