//! First-order optimizers.

use serde::{Deserialize, Serialize};

use super::params::{ParamGrads, ParamStore};
use super::DiffError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    /// SGD with heavy-ball momentum; weight decay is added to the gradient.
    Sgd {
        lr: f64,
        #[serde(default)]
        momentum: f64,
        #[serde(default)]
        weight_decay: f64,
    },
    /// Adam with decoupled weight decay.
    AdamW {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        weight_decay: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Sgd {
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr, .. } | OptimizerConfig::AdamW { lr, .. } => lr,
        }
    }
}

/// Optimizer state for one parameter store.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, store: &ParamStore) -> Self {
        let zeros = || store.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Optimizer {
            config,
            first: zeros(),
            second: zeros(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update in place.
    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads) -> Result<(), DiffError> {
        grads.check_against(store)?;
        if self.first.len() != store.tensors().len() {
            return Err(DiffError::ShapeMismatch {
                name: "<optimizer state>".into(),
                expected: store.tensors().len(),
                got: self.first.len(),
            });
        }
        self.steps += 1;
        match self.config {
            OptimizerConfig::Sgd {
                lr,
                momentum,
                weight_decay,
            } => sgd_step(store, grads, &mut self.first, lr, momentum, weight_decay),
            OptimizerConfig::AdamW {
                lr,
                beta1,
                beta2,
                eps,
                weight_decay,
            } => adamw_step(
                store,
                grads,
                (&mut self.first, &mut self.second),
                self.steps,
                [lr, beta1, beta2, eps, weight_decay],
            ),
        }
        Ok(())
    }
}

fn sgd_step(
    store: &mut ParamStore,
    grads: &ParamGrads,
    velocity: &mut [Vec<f64>],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for id in store.ids().collect::<Vec<_>>() {
        let g = grads.tensor(id);
        let v = &mut velocity[id.0];
        let theta = store.values_mut(id);
        for i in 0..theta.len() {
            let d = g[i] + weight_decay * theta[i];
            v[i] = momentum * v[i] + d;
            theta[i] -= lr * v[i];
        }
    }
}

fn adamw_step(
    store: &mut ParamStore,
    grads: &ParamGrads,
    (m, v): (&mut [Vec<f64>], &mut [Vec<f64>]),
    t: u64,
    [lr, beta1, beta2, eps, weight_decay]: [f64; 5],
) {
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for id in store.ids().collect::<Vec<_>>() {
        let g = grads.tensor(id);
        let (m, v) = (&mut m[id.0], &mut v[id.0]);
        let theta = store.values_mut(id);
        for i in 0..theta.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            theta[i] -= lr * (update + weight_decay * theta[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.register("theta", vec![1], vec![x]).unwrap();
        s
    }

    fn grad_of_square(store: &ParamStore) -> ParamGrads {
        let mut g = ParamGrads::zeros_like(store);
        let id = store.require("theta").unwrap();
        g.tensor_mut(id)[0] = 2.0 * store.get(id, 0);
        g
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        for cfg in [
            OptimizerConfig::Sgd {
                lr: 0.0,
                momentum: 0.9,
                weight_decay: 0.0,
            },
            OptimizerConfig::AdamW {
                lr: 0.0,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.01,
            },
        ] {
            let mut s = scalar_store(0.7);
            let mut opt = Optimizer::new(cfg, &s);
            for _ in 0..5 {
                let g = grad_of_square(&s);
                opt.step(&mut s, &g).unwrap();
            }
            assert_eq!(s.get(s.require("theta").unwrap(), 0), 0.7);
        }
    }

    #[test]
    fn sgd_on_quadratic_bowl_decays_geometrically() {
        let mut s = scalar_store(1.0);
        let mut opt = Optimizer::new(
            OptimizerConfig::Sgd {
                lr: 0.1,
                momentum: 0.0,
                weight_decay: 0.0,
            },
            &s,
        );
        for _ in 0..50 {
            let g = grad_of_square(&s);
            opt.step(&mut s, &g).unwrap();
        }
        let theta = s.get(s.require("theta").unwrap(), 0);
        assert!((theta - 0.8f64.powi(50)).abs() < 1e-15);
        assert!(theta.abs() < 1e-3);
    }

    #[test]
    fn adamw_descends_the_bowl() {
        let mut s = scalar_store(1.0);
        let mut opt = Optimizer::new(
            OptimizerConfig::AdamW {
                lr: 0.05,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.0,
            },
            &s,
        );
        for _ in 0..300 {
            let g = grad_of_square(&s);
            opt.step(&mut s, &g).unwrap();
        }
        assert!(s.get(s.require("theta").unwrap(), 0).abs() < 0.05);
    }

    #[test]
    fn reference_configuration_is_accepted() {
        let cfg: OptimizerConfig = toml_like(r#"{"kind":"adam_w","lr":1e-5,"weight_decay":0.01}"#);
        assert_eq!(cfg.lr(), 1e-5);
    }

    fn toml_like(json: &str) -> OptimizerConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut s = scalar_store(1.0);
        let other = {
            let mut o = ParamStore::new();
            o.register("theta", vec![2], vec![0.0, 0.0]).unwrap();
            o
        };
        let mut opt = Optimizer::new(OptimizerConfig::default(), &s);
        let g = ParamGrads::zeros_like(&other);
        assert!(matches!(opt.step(&mut s, &g), Err(DiffError::ShapeMismatch { .. })));
    }
}
