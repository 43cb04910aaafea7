//! SGD with momentum and Adam.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub const SGD: Self = Self::SgdMomentum { momentum: 0.9 };
    pub const ADAM: Self = Self::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SgdMomentum { .. } => f.write_str("sgd"),
            Self::Adam { .. } => f.write_str("adam"),
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" | "sgd+momentum" | "momentum" => Ok(Self::SGD),
            "adam" => Ok(Self::ADAM),
            other => Err(Error::config(format!("unknown optimizer {other:?} (expected sgd or adam)"))),
        }
    }
}

#[derive(Clone, Debug)]
enum Slot<T> {
    Velocity(Vec<T>),
    Moments { first: Vec<T>, second: Vec<T> },
}

/// Per-parameter optimizer state for one training loop.
///
/// Slots are allocated on the first step and must keep the same shapes
/// afterwards.
#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    kind: OptimizerKind,
    learning_rate: T,
    slots: Vec<(usize, usize, Slot<T>)>,
    steps: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self { kind, learning_rate: T::lit(learning_rate), slots: Vec::new(), steps: 0 }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to `params` given matching `grads`.
    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[&Matrix<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape { op: "optimizer step", left: (params.len(), 1), right: (grads.len(), 1) });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape { op: "optimizer step", left: p.shape(), right: g.shape() });
            }
        }
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| {
                    let n = p.as_slice().len();
                    let slot = match self.kind {
                        OptimizerKind::SgdMomentum { .. } => Slot::Velocity(vec![T::zero(); n]),
                        OptimizerKind::Adam { .. } => {
                            Slot::Moments { first: vec![T::zero(); n], second: vec![T::zero(); n] }
                        }
                    };
                    (p.rows(), p.cols(), slot)
                })
                .collect();
        } else if self.slots.len() != params.len()
            || self.slots.iter().zip(params.iter()).any(|((r, c, _), p)| (*r, *c) != p.shape())
        {
            return Err(Error::config("optimizer state does not match parameter shapes"));
        }

        self.steps += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                let mu = T::lit(momentum);
                for ((_, _, slot), (p, g)) in self.slots.iter_mut().zip(params.iter_mut().zip(grads)) {
                    let Slot::Velocity(v) = slot else { unreachable!() };
                    sgd_momentum_update(p.as_mut_slice(), g.as_slice(), v, mu, lr);
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let t = self.steps as i32;
                let hyper = AdamHyper {
                    lr,
                    beta1: T::lit(beta1),
                    beta2: T::lit(beta2),
                    epsilon: T::lit(epsilon),
                    correction1: T::one() - T::lit(beta1).powi(t),
                    correction2: T::one() - T::lit(beta2).powi(t),
                };
                for ((_, _, slot), (p, g)) in self.slots.iter_mut().zip(params.iter_mut().zip(grads)) {
                    let Slot::Moments { first, second } = slot else { unreachable!() };
                    adam_update(p.as_mut_slice(), g.as_slice(), first, second, &hyper);
                }
            }
        }
        Ok(())
    }
}

/// `v ← μv − ηg; θ ← θ + v`
fn sgd_momentum_update<T: Real>(params: &mut [T], grads: &[T], velocity: &mut [T], mu: T, lr: T) {
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity) {
        *v = mu * *v - lr * g;
        *p += *v;
    }
}

struct AdamHyper<T> {
    lr: T,
    beta1: T,
    beta2: T,
    epsilon: T,
    correction1: T,
    correction2: T,
}

fn adam_update<T: Real>(params: &mut [T], grads: &[T], first: &mut [T], second: &mut [T], h: &AdamHyper<T>) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(first).zip(second) {
        *m = h.beta1 * *m + (T::one() - h.beta1) * g;
        *v = h.beta2 * *v + (T::one() - h.beta2) * g * g;
        let m_hat = *m / h.correction1;
        let v_hat = *v / h.correction2;
        *p -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
    }
}
