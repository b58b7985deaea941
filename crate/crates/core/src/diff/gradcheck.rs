//! Central-difference gradient checking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamStore, TensorId};
use super::tape::{Scalar, Tape};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub tolerance: f64,
    /// Cap on checked coordinates that the loss actually reaches.
    pub max_coords: usize,
    /// Extra coordinates the loss never touches; their analytic gradient is
    /// zero and the numeric one must agree.
    pub untouched: usize,
    /// Denominator floor for the relative error, so that two near-zero
    /// gradients are not reported as wildly different.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            epsilon: 1e-5,
            tolerance: 1e-4,
            max_coords: 64,
            untouched: 8,
            abs_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckFailure {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.failures.extend(other.failures);
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the tape gradient of `loss` against central differences.
///
/// `loss` must be deterministic in the parameter values. Coordinates are
/// sampled with a seeded RNG: up to `max_coords` of those the loss reaches and
/// up to `untouched` of the rest.
pub fn gradcheck<F, E>(store: &ParamStore, config: &GradCheckConfig, loss: F) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Scalar, E>,
{
    let mut tape = Tape::new();
    let out = loss(&mut tape, store)?;
    let grads = match tape.backward(out) {
        Ok(g) => g.param_grads(store),
        Err(e) => {
            // A non-finite forward pass cannot be compared coordinate-wise.
            return Ok(GradCheckReport {
                checked: 0,
                max_rel_err: f64::INFINITY,
                failures: vec![GradCheckFailure {
                    tensor: format!("<{e}>"),
                    index: 0,
                    analytic: f64::NAN,
                    numeric: f64::NAN,
                    rel_err: f64::INFINITY,
                }],
            });
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut touched: Vec<(TensorId, usize)> = tape.param_leaves().collect();
    touched.sort();
    touched.shuffle(&mut rng);
    touched.truncate(config.max_coords);

    let mut coords = touched.clone();
    if config.untouched > 0 {
        let reached: std::collections::BTreeSet<_> = tape.param_leaves().collect();
        let mut rest: Vec<(TensorId, usize)> = store
            .ids()
            .flat_map(|t| (0..store.tensor(t).len()).map(move |i| (t, i)))
            .filter(|c| !reached.contains(c))
            .collect();
        // Partial Fisher-Yates is enough; the pool can be large.
        let (picked, _) = rest.partial_shuffle(&mut rng, config.untouched);
        coords.extend_from_slice(picked);
    }

    let mut report = GradCheckReport::default();
    let mut probe = store.clone();
    for (t, i) in coords {
        let x = store.get(t, i);
        let eval = |probe: &ParamStore| -> Result<f64, E> {
            let mut t = Tape::inference();
            Ok(loss(&mut t, probe)?.value())
        };
        probe.set(t, i, x + config.epsilon).expect("finite probe");
        let plus = eval(&probe)?;
        probe.set(t, i, x - config.epsilon).expect("finite probe");
        let minus = eval(&probe)?;
        probe.set(t, i, x).expect("finite probe");

        let numeric = (plus - minus) / (2.0 * config.epsilon);
        let analytic = grads.tensor(t)[i];
        let rel_err = relative_error(analytic, numeric, config.abs_floor);
        report.checked += 1;
        if rel_err.is_nan() || rel_err > report.max_rel_err {
            report.max_rel_err = rel_err;
        }
        if rel_err.is_nan() || rel_err > config.tolerance {
            report.failures.push(GradCheckFailure {
                tensor: store.tensor(t).name().to_string(),
                index: i,
                analytic,
                numeric,
                rel_err,
            });
        }
    }
    Ok(report)
}
