//! BFGS maximization with forward-difference gradients and a strong-Wolfe line search.
//!
//! The objective is maximized by minimizing its negation; all line-search
//! quantities below refer to the minimized function `φ = −f`.

use thiserror::Error;

/// Default `√ε`-scale relative step for forward differences.
pub const DEFAULT_STEP_SCALE: f64 = 1.49e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    GradientTol,
    MaxIter,
    LineSearchFail,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizeReport {
    pub x_star: Vec<f64>,
    pub value: f64,
    /// Max-norm of the gradient at `x_star`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub objective_evals: usize,
    pub converged: bool,
    pub termination: Termination,
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("objective is not finite at {x:?}")]
    Evaluation {
        x: Vec<f64>,
        /// Best iterate reached before the failure, if any.
        partial: Option<Box<OptimizeReport>>,
    },
    #[error("invalid optimizer settings: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, OptimizeError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsSettings {
    pub gtol: f64,
    pub max_iter: usize,
    pub step_scale: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        Self {
            gtol: 1e-3,
            max_iter: 200,
            step_scale: DEFAULT_STEP_SCALE,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

/// Forward differences `[f(x + h_i e_i) − f(x)]/h_i`, `h_i = step_scale·max(1, |x_i|)`.
pub fn finite_diff_gradient<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    step_scale: f64,
) -> Result<Vec<f64>> {
    let f0 = f(x);
    if !f0.is_finite() {
        return Err(OptimizeError::Evaluation {
            x: x.to_vec(),
            partial: None,
        });
    }
    let mut probe = Counted::new(&mut f);
    probe.gradient(x, f0, step_scale).map_err(|x| OptimizeError::Evaluation { x, partial: None })
}

/// Objective wrapper that counts calls.
struct Counted<'a, F> {
    f: &'a mut F,
    evals: usize,
}

impl<'a, F: FnMut(&[f64]) -> f64> Counted<'a, F> {
    fn new(f: &'a mut F) -> Self {
        Self { f, evals: 0 }
    }

    fn eval(&mut self, x: &[f64]) -> std::result::Result<f64, Vec<f64>> {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(x.to_vec())
        }
    }

    fn gradient(&mut self, x: &[f64], fx: f64, step_scale: f64) -> std::result::Result<Vec<f64>, Vec<f64>> {
        let mut probe = x.to_vec();
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() {
            let h = step_scale * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            // Use the representable step actually taken.
            let dx = probe[i] - x[i];
            g[i] = (self.eval(&probe)? - fx) / dx;
            probe[i] = x[i];
        }
        Ok(g)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// A point evaluated for the minimized function: value and gradient of `−f`.
#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    phi: f64,
    grad: Vec<f64>,
}

fn evaluate<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<'_, F>,
    x: Vec<f64>,
    step_scale: f64,
) -> std::result::Result<Point, Vec<f64>> {
    let fx = obj.eval(&x)?;
    let g = obj.gradient(&x, fx, step_scale)?;
    Ok(Point {
        phi: -fx,
        grad: g.into_iter().map(|v| -v).collect(),
        x,
    })
}

/// Minimizer of the cubic through `(a, fa)` with slope `fpa` and the points `(b, fb)`, `(c, fc)`.
fn cubicmin(a: f64, fa: f64, fpa: f64, b: f64, fb: f64, c: f64, fc: f64) -> Option<f64> {
    let cc = fpa;
    let db = b - a;
    let dc = c - a;
    let denom = (db * dc).powi(2) * (db - dc);
    if denom == 0.0 {
        return None;
    }
    let (d1, d2) = (fb - fa - cc * db, fc - fa - cc * dc);
    let aa = (dc * dc * d1 - db * db * d2) / denom;
    let bb = (-dc * dc * dc * d1 + db * db * db * d2) / denom;
    if aa == 0.0 {
        return None;
    }
    let radical = bb * bb - 3.0 * aa * cc;
    if radical < 0.0 {
        return None;
    }
    let x = a + (-bb + radical.sqrt()) / (3.0 * aa);
    x.is_finite().then_some(x)
}

/// Minimizer of the quadratic through `(a, fa)` with slope `fpa` and `(b, fb)`.
fn quadmin(a: f64, fa: f64, fpa: f64, b: f64, fb: f64) -> Option<f64> {
    let db = b - a;
    let bb = (fb - fa - fpa * db) / (db * db);
    if bb <= 0.0 {
        return None;
    }
    let x = a - fpa / (2.0 * bb);
    x.is_finite().then_some(x)
}

enum Search {
    Found(Point),
    Failed,
}

struct LineSearch<'s> {
    x: &'s [f64],
    dir: &'s [f64],
    phi0: f64,
    dphi0: f64,
    settings: &'s BfgsSettings,
}

impl LineSearch<'_> {
    fn at<F: FnMut(&[f64]) -> f64>(
        &self,
        obj: &mut Counted<'_, F>,
        alpha: f64,
    ) -> std::result::Result<(Point, f64), Vec<f64>> {
        let x: Vec<f64> = self.x.iter().zip(self.dir).map(|(x, d)| x + alpha * d).collect();
        let p = evaluate(obj, x, self.settings.step_scale)?;
        let slope = dot(&p.grad, self.dir);
        Ok((p, slope))
    }

    fn armijo_fails(&self, alpha: f64, phi: f64) -> bool {
        phi > self.phi0 + self.settings.c1 * alpha * self.dphi0
    }

    fn curvature_holds(&self, slope: f64) -> bool {
        slope.abs() <= -self.settings.c2 * self.dphi0
    }

    /// Bracketing phase of the strong-Wolfe search.
    fn run<F: FnMut(&[f64]) -> f64>(
        &self,
        obj: &mut Counted<'_, F>,
        alpha1: f64,
    ) -> std::result::Result<Search, Vec<f64>> {
        let (mut a0, mut phi_prev, mut slope_prev) = (0.0, self.phi0, self.dphi0);
        let mut a1 = alpha1;
        for i in 0..10 {
            let (p, slope) = self.at(obj, a1)?;
            if self.armijo_fails(a1, p.phi) || (i > 0 && p.phi >= phi_prev) {
                return self.zoom(obj, (a0, phi_prev, slope_prev), (a1, p.phi));
            }
            if self.curvature_holds(slope) {
                return Ok(Search::Found(p));
            }
            if slope >= 0.0 {
                return self.zoom(obj, (a1, p.phi, slope), (a0, phi_prev));
            }
            a0 = a1;
            phi_prev = p.phi;
            slope_prev = slope;
            a1 *= 2.0;
        }
        Ok(Search::Failed)
    }

    fn zoom<F: FnMut(&[f64]) -> f64>(
        &self,
        obj: &mut Counted<'_, F>,
        lo: (f64, f64, f64),
        hi: (f64, f64),
    ) -> std::result::Result<Search, Vec<f64>> {
        let (mut a_lo, mut phi_lo, mut slope_lo) = lo;
        let (mut a_hi, mut phi_hi) = hi;
        let (mut a_rec, mut phi_rec) = (0.0, self.phi0);
        for i in 0..10 {
            let d = a_hi - a_lo;
            let (a, b) = if d < 0.0 { (a_hi, a_lo) } else { (a_lo, a_hi) };
            let mut trial = None;
            if i > 0 {
                let chk = 0.2 * d.abs();
                trial = cubicmin(a_lo, phi_lo, slope_lo, a_hi, phi_hi, a_rec, phi_rec)
                    .filter(|&t| t > a + chk && t < b - chk);
            }
            if trial.is_none() {
                let chk = 0.1 * d.abs();
                trial = quadmin(a_lo, phi_lo, slope_lo, a_hi, phi_hi).filter(|&t| t > a + chk && t < b - chk);
            }
            let aj = trial.unwrap_or(a_lo + 0.5 * d);
            let (p, slope) = self.at(obj, aj)?;
            if self.armijo_fails(aj, p.phi) || p.phi >= phi_lo {
                a_rec = a_hi;
                phi_rec = phi_hi;
                a_hi = aj;
                phi_hi = p.phi;
            } else {
                if self.curvature_holds(slope) {
                    return Ok(Search::Found(p));
                }
                if slope * (a_hi - a_lo) >= 0.0 {
                    a_rec = a_hi;
                    phi_rec = phi_hi;
                    a_hi = a_lo;
                    phi_hi = phi_lo;
                } else {
                    a_rec = a_lo;
                    phi_rec = phi_lo;
                }
                a_lo = aj;
                phi_lo = p.phi;
                slope_lo = slope;
            }
        }
        Ok(Search::Failed)
    }
}

/// Maximizes `f` from `x0` with BFGS inverse-Hessian updates.
///
/// `iterations` counts outer passes, each of which checks the gradient and, if
/// not yet converged, takes one line-search step. Convergence means the max-norm
/// of the gradient is at most `gtol`. A failed line search ends the run at the
/// current iterate.
pub fn bfgs_maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    settings: &BfgsSettings,
) -> Result<OptimizeReport> {
    if !(settings.gtol > 0.0) || settings.max_iter == 0 || !(settings.step_scale > 0.0) {
        return Err(OptimizeError::Invalid(format!("{settings:?}")));
    }
    if !(0.0 < settings.c1 && settings.c1 < settings.c2 && settings.c2 < 1.0) {
        return Err(OptimizeError::Invalid(format!("Wolfe constants c1={} c2={}", settings.c1, settings.c2)));
    }
    let n = x0.len();
    let mut obj = Counted::new(&mut f);
    let mut cur = evaluate(&mut obj, x0.to_vec(), settings.step_scale).map_err(|x| OptimizeError::Evaluation {
        x,
        partial: None,
    })?;
    let mut h = identity(n);
    let mut old_old_phi = cur.phi + l2(&cur.grad) / 2.0;
    let mut iterations = 0;
    let report = |cur: &Point, iterations: usize, evals: usize, termination: Termination| OptimizeReport {
        x_star: cur.x.clone(),
        value: -cur.phi,
        gradient_norm: max_norm(&cur.grad),
        iterations,
        objective_evals: evals,
        converged: termination == Termination::GradientTol,
        termination,
    };
    loop {
        iterations += 1;
        if max_norm(&cur.grad) <= settings.gtol {
            return Ok(report(&cur, iterations, obj.evals, Termination::GradientTol));
        }
        if iterations > settings.max_iter {
            return Ok(report(&cur, iterations - 1, obj.evals, Termination::MaxIter));
        }
        let mut dir = mat_vec_neg(&h, &cur.grad);
        let mut dphi0 = dot(&cur.grad, &dir);
        if !(dphi0 < 0.0) {
            // Lost positive definiteness numerically; restart from steepest descent.
            h = identity(n);
            dir = cur.grad.iter().map(|g| -g).collect();
            dphi0 = dot(&cur.grad, &dir);
        }
        let mut alpha1 = 1.0;
        if dphi0 != 0.0 {
            let guess = 1.01 * 2.0 * (cur.phi - old_old_phi) / dphi0;
            if guess > 0.0 && guess.is_finite() {
                alpha1 = guess.min(1.0);
            }
        }
        let search = LineSearch {
            x: &cur.x,
            dir: &dir,
            phi0: cur.phi,
            dphi0,
            settings,
        };
        let outcome = search.run(&mut obj, alpha1).map_err(|x| OptimizeError::Evaluation {
            x,
            partial: Some(Box::new(report(&cur, iterations, obj.evals, Termination::LineSearchFail))),
        })?;
        let next = match outcome {
            Search::Found(p) => p,
            Search::Failed => {
                return Ok(report(&cur, iterations, obj.evals, Termination::LineSearchFail));
            }
        };
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            bfgs_update(&mut h, &s, &y, sy);
        }
        old_old_phi = cur.phi;
        cur = next;
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn mat_vec_neg(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    h.iter().map(|row| -dot(row, g)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(yᵀs)`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let rho = 1.0 / sy;
    let n = s.len();
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    let k = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i][j] += k * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
