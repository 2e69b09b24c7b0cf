use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Score at and above which a decay is classified as stretched.
pub const STRETCHED_SCORE: f64 = 2.0;
/// Relative exponential residual below which a decay counts as
/// exponential regardless of the score.
pub const EXP_RESIDUAL_TOL: f64 = 1e-3;
const BETA_RANGE: (f64, f64) = (0.2, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    Exponential,
    Stretched,
}

impl DecayModel {
    pub fn as_str(self) -> &'static str {
        match self {
            DecayModel::Exponential => "exponential",
            DecayModel::Stretched => "stretched",
        }
    }
}

/// `A·exp(−t/T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub amplitude: f64,
    pub time_constant: f64,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.time_constant).exp()
    }
}

/// `A·exp(−(t/T)^β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchedFit {
    pub amplitude: f64,
    pub time_constant: f64,
    pub beta: f64,
    pub residual: f64,
}

impl StretchedFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-(t / self.time_constant).powf(self.beta)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `1/T` of the exponential fit, 1/s.
    pub rate: f64,
    pub exponential: ExpFit,
    pub stretched: StretchedFit,
    /// `residual(exponential) / residual(stretched)`; 1 for a clean
    /// exponential, larger the worse the exponential fits.
    pub score: f64,
}

impl DecayFit {
    pub fn residual(&self) -> f64 {
        self.exponential.residual
    }
}

fn check_input(t: &[f64], y: &[f64]) -> Result<()> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), found: y.len() });
    }
    if t.len() < 4 {
        return Err(Error::DegenerateFit(format!("need >= 4 points, got {}", t.len())));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite input".into()));
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateFit("all amplitudes are zero".into()));
    }
    if t.iter().any(|&v| v < 0.0) {
        return Err(Error::DegenerateFit("times must be >= 0".into()));
    }
    Ok(())
}

/// Damped Gauss-Newton (Levenberg-Marquardt). `model` returns the value
/// and gradient at one sample; `project` keeps parameters feasible.
fn levenberg_marquardt(
    t: &[f64],
    y: &[f64],
    mut p: DVector<f64>,
    model: impl Fn(&DVector<f64>, f64) -> (f64, DVector<f64>),
    project: impl Fn(&mut DVector<f64>),
) -> (DVector<f64>, f64) {
    let k = p.len();
    let cost = |p: &DVector<f64>| -> f64 { t.iter().zip(y).map(|(&ti, &yi)| (model(p, ti).0 - yi).powi(2)).sum() };
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = DMatrix::<f64>::zeros(k, k);
        let mut jtr = DVector::<f64>::zeros(k);
        for (&ti, &yi) in t.iter().zip(y) {
            let (f, g) = model(&p, ti);
            jtj += &g * g.transpose();
            jtr += &g * (f - yi);
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..k {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut q = &p + &step;
            project(&mut q);
            let cq = cost(&q);
            if cq.is_finite() && cq < c {
                let rel = (c - cq) / c.max(f64::MIN_POSITIVE);
                p = q;
                c = cq;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, c.sqrt())
}

/// Least-squares `A·exp(−t/T)`.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<ExpFit> {
    check_input(t, y)?;
    // start from a log-linear fit of the positive samples
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(&a, &b)| (a, b.ln())).collect();
    let (a0, k0) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (st, sl) = pts.iter().fold((0.0, 0.0), |(a, b), (ti, li)| (a + ti, b + li));
        let (mt, ml) = (st / n, sl / n);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (ti, li)| (a + (ti - mt) * (li - ml), b + (ti - mt).powi(2)));
        let slope = if den > 0.0 { num / den } else { 0.0 };
        ((ml - slope * mt).exp(), (-slope).max(1e-9 / t.iter().copied().fold(1e-300, f64::max)))
    } else {
        (y[0], 1.0 / t.iter().copied().fold(1e-300, f64::max))
    };
    let model = |p: &DVector<f64>, ti: f64| {
        let e = (-p[1] * ti).exp();
        (p[0] * e, DVector::from_vec(vec![e, -ti * p[0] * e]))
    };
    let project = |p: &mut DVector<f64>| p[1] = p[1].max(1e-12);
    let (p, residual) = levenberg_marquardt(t, y, DVector::from_vec(vec![a0, k0]), model, project);
    Ok(ExpFit { amplitude: p[0], time_constant: 1.0 / p[1], residual })
}

/// Least-squares `A·exp(−(t/T)^β)`, started from the exponential fit.
pub fn fit_stretched(t: &[f64], y: &[f64]) -> Result<StretchedFit> {
    let e = fit_exponential(t, y)?;
    let model = |p: &DVector<f64>, ti: f64| {
        let (a, k, b) = (p[0], p[1], p[2]);
        let kt = k * ti;
        if kt <= 0.0 {
            return (a, DVector::from_vec(vec![1.0, 0.0, 0.0]));
        }
        let u = kt.powf(b);
        let ex = (-u).exp();
        (a * ex, DVector::from_vec(vec![ex, -a * ex * b * u / k, -a * ex * u * kt.ln()]))
    };
    let project = |p: &mut DVector<f64>| {
        p[1] = p[1].max(1e-12);
        p[2] = p[2].clamp(BETA_RANGE.0, BETA_RANGE.1);
    };
    let start = DVector::from_vec(vec![e.amplitude, 1.0 / e.time_constant, 1.0]);
    let (p, residual) = levenberg_marquardt(t, y, start, model, project);
    Ok(StretchedFit { amplitude: p[0], time_constant: 1.0 / p[1], beta: p[2], residual: residual.min(e.residual) })
}

/// Exponential fit plus a non-exponentiality score against a stretched
/// exponential.
pub fn fit_decay(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    let exponential = fit_exponential(t, y)?;
    let stretched = fit_stretched(t, y)?;
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let floor = 1e-12 * norm;
    let score = exponential.residual.max(floor) / stretched.residual.max(floor);
    let stretched_like = score >= STRETCHED_SCORE && exponential.residual > EXP_RESIDUAL_TOL * norm;
    let model = if stretched_like { DecayModel::Stretched } else { DecayModel::Exponential };
    Ok(DecayFit { model, rate: 1.0 / exponential.time_constant, exponential, stretched, score })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn recovers_exponential() {
        let t = grid(40, 5e-3);
        let y: Vec<f64> = t.iter().map(|&ti| 0.8 * (-ti / 0.1).exp()).collect();
        let f = fit_decay(&t, &y).unwrap();
        assert!((f.exponential.time_constant - 0.1).abs() < 1e-3 * 0.1);
        assert!(f.exponential.residual < 1e-9);
        assert_eq!(f.model, DecayModel::Exponential);
    }

    #[test]
    fn gaussian_decay_is_flagged() {
        let t = grid(30, 3.44e-3);
        let y: Vec<f64> = t.iter().map(|&ti| (-(ti / 0.04).powi(2)).exp()).collect();
        let f = fit_decay(&t, &y).unwrap();
        assert!(f.score > 10.0, "score {}", f.score);
        assert!((f.stretched.beta - 2.0).abs() < 1e-3);
        assert_eq!(f.model, DecayModel::Stretched);
    }

    #[test]
    fn near_exponential_stays_exponential() {
        // a tiny stretch improves the ratio but not the absolute fit
        let t = grid(16, 3.44e-3);
        let y: Vec<f64> = t.iter().map(|&ti| (-(ti / 0.8f64).powf(0.998)).exp()).collect();
        let f = fit_decay(&t, &y).unwrap();
        assert!(f.score > 1.0);
        assert_eq!(f.model, DecayModel::Exponential);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_decay(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.2]).is_err());
        assert!(fit_decay(&[0.0, 1.0, 2.0, 3.0], &[0.0; 4]).is_err());
        assert!(fit_decay(&[0.0, 1.0, 2.0, 3.0], &[1.0, f64::NAN, 0.2, 0.1]).is_err());
    }
}
