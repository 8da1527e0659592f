use super::{DiffError, Tape, Tensor, Var};

/// One coordinate whose analytic and numeric derivatives disagree, or whose
/// perturbed loss was not finite (`numeric` is NaN in that case).
#[derive(Clone, Debug)]
pub struct CoordinateFailure {
    pub param: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ParamCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates skipped because a hinge changed side across the stencil.
    pub nondifferentiable: usize,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub failures: Vec<CoordinateFailure>,
    /// `(param, index)` pairs excluded as hinge kinks.
    pub kinks: Vec<(usize, usize)>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

struct Probe {
    value: f64,
    hinges: Vec<f64>,
}

fn evaluate<F>(f: &F, params: &[Tensor]) -> Result<Probe, DiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, DiffError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    Ok(Probe {
        value: tape.scalar(loss),
        hinges: tape.hinge_inputs().to_vec(),
    })
}

fn same_hinge_pattern(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (*x > 0.0) == (*y > 0.0))
}

/// Compares reverse-mode gradients of `f` against central differences at
/// every entry of every parameter.
///
/// A coordinate whose ± perturbations put some hinge on different sides of
/// its kink is reported in `kinks` and not compared.
pub fn gradient_check<F>(f: F, params: &[Tensor], step: f64, tol: f64) -> Result<GradCheckReport, DiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, DiffError>,
{
    if !(step > 0.0) {
        return Err(DiffError::BadStep(step));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut report = GradCheckReport::default();
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        let mut check = ParamCheck::default();
        for idx in 0..params[pi].len() {
            let original = params[pi].as_slice()[idx];
            work[pi].as_mut_slice()[idx] = original + step;
            let plus = evaluate(&f, &work);
            work[pi].as_mut_slice()[idx] = original - step;
            let minus = evaluate(&f, &work);
            work[pi].as_mut_slice()[idx] = original;

            let g = analytic.as_slice()[idx];
            let (plus, minus) = match (plus, minus) {
                (Ok(p), Ok(m)) if p.value.is_finite() && m.value.is_finite() => (p, m),
                _ => {
                    report.failures.push(CoordinateFailure {
                        param: pi,
                        index: idx,
                        analytic: g,
                        numeric: f64::NAN,
                        rel_error: f64::INFINITY,
                    });
                    continue;
                }
            };
            if !same_hinge_pattern(&plus.hinges, &minus.hinges) {
                check.nondifferentiable += 1;
                report.kinks.push((pi, idx));
                continue;
            }
            let numeric = (plus.value - minus.value) / (2.0 * step);
            let rel = relative_error(g, numeric);
            check.checked += 1;
            check.max_rel_error = check.max_rel_error.max(rel);
            if !(rel < tol) {
                report.failures.push(CoordinateFailure {
                    param: pi,
                    index: idx,
                    analytic: g,
                    numeric,
                    rel_error: rel,
                });
            }
        }
        report.max_rel_error = report.max_rel_error.max(check.max_rel_error);
        report.params.push(check);
    }
    Ok(report)
}
