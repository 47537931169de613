use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// The objective evaluated with one parameter element shifted.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub value: f64,
    /// Identifies the linear piece of a piecewise objective, such as the
    /// sign pattern of every ReLU input. `None` for smooth objectives.
    pub region: Option<Vec<u64>>,
}

/// A scalar function of a list of parameter tensors with an analytic gradient.
pub trait Objective {
    fn parameters(&self) -> Vec<Tensor>;

    fn evaluate(&self, params: &[Tensor]) -> Result<f64>;

    /// Analytic gradients, one tensor per parameter, same shapes.
    fn gradients(&self, params: &[Tensor]) -> Result<Vec<Tensor>>;

    /// Value at `params` with element `element` of tensor `index` moved by
    /// `delta`. Objectives that can re-evaluate incrementally, or that
    /// know their linear pieces, override this.
    fn probe(&self, params: &[Tensor], index: usize, element: usize, delta: f64) -> Result<Probe> {
        let mut shifted = params.to_vec();
        shifted[index].data_mut()[element] += delta;
        Ok(Probe { value: self.evaluate(&shifted)?, region: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst disagreement over every element.
    pub max_relative_error: f64,
    /// `(parameter index, element index)` of that disagreement.
    pub worst: (usize, usize),
    pub checked: usize,
    /// Elements whose central difference straddles a kink, detected from
    /// differing probe regions. There it no longer estimates the
    /// derivative.
    pub kinks: usize,
    /// Worst disagreement over the elements free of kinks.
    pub smooth_max_relative_error: f64,
    pub smooth_worst: (usize, usize),
}

/// `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compare analytic gradients against central differences for every
/// parameter element.
pub fn gradient_check<O: Objective + ?Sized>(objective: &O, epsilon: f64) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let params = objective.parameters();
    let analytic = objective.gradients(&params)?;
    if analytic.len() != params.len() {
        return Err(Error::shape(
            "gradient_check",
            format!("{} gradients for {} parameters", analytic.len(), params.len()),
        ));
    }
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        checked: 0,
        kinks: 0,
        smooth_max_relative_error: 0.0,
        smooth_worst: (0, 0),
    };
    for p in 0..params.len() {
        if analytic[p].shape() != params[p].shape() {
            return Err(Error::shape(
                "gradient_check",
                format!("gradient {:?} vs parameter {:?}", analytic[p].shape(), params[p].shape()),
            ));
        }
        for e in 0..params[p].numel() {
            let plus = objective.probe(&params, p, e, epsilon)?;
            let minus = objective.probe(&params, p, e, -epsilon)?;
            let numeric = (plus.value - minus.value) / (2.0 * epsilon);
            let err = relative_error(analytic[p].data()[e], numeric);
            report.checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = (p, e);
            }
            if plus.region != minus.region {
                report.kinks += 1;
            } else if err > report.smooth_max_relative_error {
                report.smooth_max_relative_error = err;
                report.smooth_worst = (p, e);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    /// loss = sum(x . W + b) for a fixed input row.
    struct Linear {
        input: Tensor,
        corrupt: f64,
    }

    impl Linear {
        fn loss(&self, params: &[Tensor]) -> Result<(f64, Vec<Tensor>)> {
            let mut tape = Tape::new();
            let x = tape.leaf(self.input.clone());
            let w = tape.leaf(params[0].clone());
            let b = tape.leaf(params[1].clone());
            let y = tape.dense(x, w, b)?;
            let s = tape.sum(y);
            let value = tape.value(s).data()[0];
            let grads = tape.backward(s)?.take(&[w, b]);
            Ok((value, grads))
        }
    }

    impl Objective for Linear {
        fn parameters(&self) -> Vec<Tensor> {
            vec![
                Tensor::new(vec![3, 2], vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap(),
                Tensor::new(vec![2], vec![0.05, -0.05]).unwrap(),
            ]
        }

        fn evaluate(&self, params: &[Tensor]) -> Result<f64> {
            Ok(self.loss(params)?.0)
        }

        fn gradients(&self, params: &[Tensor]) -> Result<Vec<Tensor>> {
            let grads = self.loss(params)?.1;
            Ok(grads.into_iter().map(|g| g.map(|v| v * self.corrupt)).collect())
        }
    }

    fn linear(corrupt: f64) -> Linear {
        Linear { input: Tensor::new(vec![1, 3], vec![0.7, -1.3, 2.1]).unwrap(), corrupt }
    }

    #[test]
    fn linear_model_is_exact() {
        let report = gradient_check(&linear(1.0), 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        assert_eq!(report.checked, 8);
    }

    #[test]
    fn doubled_gradient_is_detected() {
        // |2g - g| / max(|2g|, |g|) = 1/2
        let report = gradient_check(&linear(2.0), 1e-5).unwrap();
        assert!((report.max_relative_error - 0.5).abs() < 1e-6, "{report:?}");
    }

    /// `|w|` around `w = 0`, reporting the sign of `w` as its region.
    struct Abs {
        at: f64,
    }

    impl Objective for Abs {
        fn parameters(&self) -> Vec<Tensor> {
            vec![Tensor::new(vec![1], vec![self.at]).unwrap()]
        }

        fn evaluate(&self, params: &[Tensor]) -> Result<f64> {
            Ok(params[0].data()[0].abs())
        }

        fn gradients(&self, params: &[Tensor]) -> Result<Vec<Tensor>> {
            Ok(vec![params[0].map(|w| if w > 0.0 { 1.0 } else { -1.0 })])
        }

        fn probe(&self, params: &[Tensor], _: usize, _: usize, delta: f64) -> Result<Probe> {
            let w = params[0].data()[0] + delta;
            Ok(Probe { value: w.abs(), region: Some(vec![u64::from(w > 0.0)]) })
        }
    }

    #[test]
    fn kink_crossings_are_reported_apart() {
        let report = gradient_check(&Abs { at: 2e-6 }, 1e-5).unwrap();
        assert_eq!((report.checked, report.kinks), (1, 1));
        assert_eq!(report.smooth_max_relative_error, 0.0);
        // The straddling difference is 0.2 against a slope of 1.
        assert!((report.max_relative_error - 0.8).abs() < 1e-6, "{report:?}");

        let report = gradient_check(&Abs { at: 0.3 }, 1e-5).unwrap();
        assert_eq!((report.checked, report.kinks), (1, 0));
        assert!(report.max_relative_error < 1e-9, "{report:?}");
        assert_eq!(report.smooth_max_relative_error, report.max_relative_error);
    }

    #[test]
    fn default_probe_matches_evaluate() {
        let obj = linear(1.0);
        let params = obj.parameters();
        let probe = obj.probe(&params, 0, 3, 0.25).unwrap();
        let mut shifted = params.clone();
        shifted[0].data_mut()[3] += 0.25;
        assert_eq!(probe, Probe { value: obj.evaluate(&shifted).unwrap(), region: None });
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        assert!(gradient_check(&linear(1.0), 0.0).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(2.0, 1.0), 0.5);
    }
}
