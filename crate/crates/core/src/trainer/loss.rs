use super::TrainError;
use crate::diff::{Scalar, Tape};
use crate::value::{Categorical, Value};

/// Probabilities below this are treated as this, so the loss stays finite.
pub const NLL_CLAMP: f64 = 1e-12;

fn same_kind(v: &Value, label: &str) -> bool {
    match v {
        Value::Int(_) => label.parse::<i64>().is_ok(),
        Value::Token(_) => true,
        _ => false,
    }
}

/// `-log p(label)` for one prediction. A label missing from the support
/// counts as probability zero (clamped) as long as the support holds values
/// of the label's kind; otherwise the label cannot be expressed at all.
pub fn example_nll(tape: &mut Tape, prediction: &Categorical, label: &str) -> Result<Scalar, TrainError> {
    match prediction.iter().find(|(v, _)| v.matches_label(label)) {
        Some((_, p)) if p.value() >= NLL_CLAMP => {
            let l = tape.log(p);
            Ok(tape.neg(l))
        }
        Some(_) => Ok(Scalar::constant(-NLL_CLAMP.ln())),
        None if prediction.support().iter().any(|v| same_kind(v, label)) => Ok(Scalar::constant(-NLL_CLAMP.ln())),
        None => Err(TrainError::LabelNotInSupport {
            label: label.to_string(),
            support: prediction
                .support()
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        }),
    }
}

/// Mean negative log-likelihood of the labels.
pub fn nll_loss(tape: &mut Tape, batch: &[(Categorical, &str)]) -> Result<Scalar, TrainError> {
    let mut terms = Vec::with_capacity(batch.len());
    for (pred, label) in batch {
        terms.push(example_nll(tape, pred, label)?);
    }
    let total = tape.sum(&terms);
    Ok(tape.scale(total, 1.0 / batch.len().max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yes_no(p: f64) -> Categorical {
        Categorical::from_f64([(Value::token("yes"), p), (Value::token("no"), 1.0 - p)]).unwrap()
    }

    #[test]
    fn one_hot_and_uniform() {
        let mut t = Tape::new();
        assert_eq!(example_nll(&mut t, &yes_no(1.0), "yes").unwrap().value(), 0.0);
        let u = example_nll(&mut t, &yes_no(0.5), "no").unwrap().value();
        assert!((u - std::f64::consts::LN_2).abs() < 1e-15);
        let m = nll_loss(&mut t, &[(yes_no(1.0), "yes"), (yes_no(0.5), "yes")]).unwrap();
        assert!((m.value() - std::f64::consts::LN_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn clamps_impossible_labels() {
        let mut t = Tape::new();
        let l = example_nll(&mut t, &yes_no(1.0), "no").unwrap();
        assert!((l.value() + NLL_CLAMP.ln()).abs() < 1e-9);
        assert!(l.is_constant());
        let l = example_nll(&mut t, &yes_no(1.0), "maybe").unwrap();
        assert!(l.value().is_finite());
    }

    #[test]
    fn integer_predictions_reject_word_labels() {
        let mut t = Tape::new();
        let d = Categorical::from_f64([(Value::Int(1), 0.5), (Value::Int(2), 0.5)]).unwrap();
        assert!((example_nll(&mut t, &d, "2").unwrap().value() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(example_nll(&mut t, &d, "9").is_ok());
        assert!(matches!(
            example_nll(&mut t, &d, "yes"),
            Err(TrainError::LabelNotInSupport { .. })
        ));
    }

    #[test]
    fn gradient_is_minus_inverse_probability() {
        let mut t = Tape::new();
        let p = t.var(0.25);
        let q = t.complement(p);
        let d = Categorical::new(vec![Value::token("yes"), Value::token("no")], vec![p, q]).unwrap();
        let l = example_nll(&mut t, &d, "yes").unwrap();
        let g = t.backward(l).unwrap();
        assert!((g.wrt(p) + 4.0).abs() < 1e-12);
    }
}
