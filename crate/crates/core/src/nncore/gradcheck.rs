use crate::error::{Error, Result};

/// Pre-activations within this distance of a ReLU kink exclude a coordinate.
pub const KINK_MARGIN: f64 = 1e-3;

/// A function evaluation together with every ReLU pre-activation it produced.
#[derive(Debug, Clone)]
pub struct Probe {
    pub value: f64,
    pub preactivations: Vec<f64>,
}

impl Probe {
    pub fn smooth(value: f64) -> Self {
        Probe {
            value,
            preactivations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over checked coordinates of |g_analytic - g_fd| / max(1, |g_fd|)
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded: usize,
    pub worst_coordinate: Option<usize>,
}

/// Compares `analytic` against central finite differences of `f` at `params`.
///
/// A coordinate is skipped when perturbing it moves any ReLU pre-activation
/// that lies within [`KINK_MARGIN`] of zero, or flips its sign.
pub fn gradient_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    h: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<Probe>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::shape("gradient_check", params.len(), analytic.len()));
    }
    let base = f(params)?;
    let mut theta = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded: 0,
        worst_coordinate: None,
    };
    for k in 0..params.len() {
        theta[k] = params[k] + h;
        let plus = f(&theta)?;
        theta[k] = params[k] - h;
        let minus = f(&theta)?;
        theta[k] = params[k];
        if !plus.value.is_finite() || !minus.value.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value at perturbed coordinate {k}"
            )));
        }
        if near_kink(&base, &plus, &minus) {
            report.excluded += 1;
            continue;
        }
        let fd = (plus.value - minus.value) / (2.0 * h);
        let err = (analytic[k] - fd).abs() / fd.abs().max(1.0);
        report.checked += 1;
        if err > report.max_rel_error || report.worst_coordinate.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_coordinate = Some(k);
        }
    }
    Ok(report)
}

fn near_kink(base: &Probe, plus: &Probe, minus: &Probe) -> bool {
    if plus.preactivations.len() != minus.preactivations.len()
        || base.preactivations.len() != plus.preactivations.len()
    {
        return true;
    }
    base.preactivations
        .iter()
        .zip(&plus.preactivations)
        .zip(&minus.preactivations)
        .any(|((&z0, &zp), &zm)| {
            zp != zm
                && ((zp > 0.0) != (zm > 0.0)
                    || z0.abs().min(zp.abs()).min(zm.abs()) < KINK_MARGIN)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_is_exact() {
        let x = [0.3, -1.2, 2.5];
        let w = [0.7, 0.1, -0.4];
        let f = |w: &[f64]| Ok(Probe::smooth(w.iter().zip(&x).map(|(a, b)| a * b).sum()));
        let r = gradient_check(f, &w, &x, 1e-5).unwrap();
        assert_eq!(r.checked, 3);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn relu_at_kink_is_excluded() {
        // f(w) = relu(w0·x) + w1, evaluated with w0·x = 0 exactly.
        let f = |w: &[f64]| {
            let z = w[0] * 2.0;
            Ok(Probe {
                value: z.max(0.0) + w[1],
                preactivations: vec![z],
            })
        };
        let r = gradient_check(f, &[0.0, 1.0], &[123.0, 1.0], 1e-5).unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.checked, 1);
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let f = |w: &[f64]| Ok(Probe::smooth(w[0] * w[0]));
        let r = gradient_check(f, &[3.0], &[5.0], 1e-5).unwrap();
        assert!((r.max_rel_error - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_step_and_nonfinite() {
        let f = |w: &[f64]| Ok(Probe::smooth(w[0]));
        assert!(gradient_check(f, &[1.0], &[1.0], 1e-2).is_err());
        let g = |w: &[f64]| Ok(Probe::smooth(if w[0] > 1.0 { f64::NAN } else { 0.0 }));
        assert!(matches!(
            gradient_check(g, &[1.0], &[0.0], 1e-5),
            Err(Error::NonFinite(_))
        ));
    }
}
