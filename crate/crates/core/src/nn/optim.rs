use serde::{Deserialize, Serialize};

use super::QNetwork;

/// Update rule applied to the network parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// `param ← param − σ·grad`.
pub fn sgd_update(params: &mut [f64], grads: &[f64], step: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= step * g;
    }
}

/// Optimizer state; Adam keeps first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam {
        first: Vec<f64>,
        second: Vec<f64>,
        steps: u64,
    },
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, parameter_count: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                first: vec![0.0; parameter_count],
                second: vec![0.0; parameter_count],
                steps: 0,
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Sgd => OptimizerKind::Sgd,
            Optimizer::Adam { .. } => OptimizerKind::Adam,
        }
    }

    pub fn apply(&mut self, net: &mut QNetwork, grad: &QNetwork, step: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in net.params_mut().into_iter().zip(grad.params()) {
                    sgd_update(p, g, step);
                }
            }
            Optimizer::Adam {
                first,
                second,
                steps,
            } => {
                *steps += 1;
                let c1 = 1.0 - BETA1.powi(*steps as i32);
                let c2 = 1.0 - BETA2.powi(*steps as i32);
                let mut offset = 0;
                for (p, g) in net.params_mut().into_iter().zip(grad.params()) {
                    let m = &mut first[offset..offset + p.len()];
                    let v = &mut second[offset..offset + p.len()];
                    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *p -= step * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    }
                    offset += p.len();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        let mut p = [1.0];
        sgd_update(&mut p, &[2.0], 0.1);
        assert!((p[0] - 0.8).abs() < 1e-15);
        let mut q = [1.0, -3.0];
        sgd_update(&mut q, &[5.0, 7.0], 0.0);
        assert_eq!(q, [1.0, -3.0]);
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        // f(x) = 3 (x - 2)^2, minimum at 2.
        let mut x = [-7.0];
        let mut steps = 0;
        while (x[0] - 2.0f64).abs() >= 1e-6 && steps < 10_000 {
            let grad = [6.0 * (x[0] - 2.0)];
            sgd_update(&mut x, &grad, 0.01);
            steps += 1;
        }
        assert!((x[0] - 2.0).abs() < 1e-6, "x = {}", x[0]);
        assert!(steps <= 10_000);
    }
}
