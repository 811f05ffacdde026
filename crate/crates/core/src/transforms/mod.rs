//! Cauchy and R-transforms: exact series, the functional relation, a numerical
//! solver for `G = 1/(z - R(G))`, Stieltjes inversion, quantiles and the
//! quasi-linear PDE residual.

mod quantile;
mod rtransform;

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::cumulants::{moments_from_cumulants, CumulantSequence, MomentSequence};
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::series::{FormalLaurentSeries, Variable};

pub use quantile::{quantiles, quantiles_with_eps, SpectralCdf, QUANTILE_EPS};
pub use rtransform::RTransform;

/// A point of the complex plane; Cauchy transforms are evaluated for `im > 0`.
pub type ComplexPoint = Complex64;

/// Largest order accepted by [`verify_functional_relation`].
pub const MAX_RELATION_ORDER: usize = 12;

/// `G(z) = sum_{k=0..order} m_k z^-(k+1)` with `m_0 = 1`, as a series in `1/z`.
pub fn cauchy_series(m: &MomentSequence, order: usize) -> Result<FormalLaurentSeries> {
    let mut coeffs = Vec::with_capacity(order + 1);
    for k in 0..=order {
        coeffs.push(m.get(k)?);
    }
    Ok(FormalLaurentSeries::new(
        Variable::InverseZ,
        1,
        coeffs,
        order as i64 + 2,
    ))
}

/// Coefficients of `G(1/z + R(z)) - z` at `z^0..z^order`, with `G` built from
/// `moments` and `R` from `cumulants`. Needs `m_1..m_(order-1)` and
/// `r_1..r_(order-1)`.
pub fn relation_residual(
    moments: &[Rational],
    cumulants: &[Rational],
    order: usize,
) -> Result<Vec<Rational>> {
    let need = order.saturating_sub(1);
    if moments.len() < need {
        return Err(Error::Truncation {
            requested: need,
            available: moments.len(),
        });
    }
    if cumulants.len() < need {
        return Err(Error::Truncation {
            requested: need,
            available: cumulants.len(),
        });
    }
    let prec = order as i64 + 1;
    // G(zeta) = g(1/zeta) with g(x) = sum_k m_k x^(k+1)
    let mut g = vec![Rational::zero(), Rational::one()];
    g.extend(moments[..need].iter().cloned());
    let g = FormalLaurentSeries::power_series(Variable::Z, g, prec);
    // 1/(1/z + R(z)) = z / (1 + z R(z))
    let mut denom = vec![Rational::one()];
    denom.extend(cumulants[..need].iter().cloned());
    let denom = FormalLaurentSeries::power_series(Variable::Z, denom, prec);
    let z = FormalLaurentSeries::monomial(Variable::Z, 1, Rational::one(), prec);
    let u = &z * &denom.inverse()?;
    let composed = g.compose(&u)?;
    let diff = &composed - &z;
    (0..=order as i64).map(|e| diff.coeff(e)).collect()
}

/// Checks `G(1/z + R(z)) = z` through `z^order` for the moments generated by
/// `r` via the noncrossing-partition sum.
pub fn verify_functional_relation(r: &CumulantSequence, order: usize) -> Result<bool> {
    if order == 0 || order > MAX_RELATION_ORDER {
        return Err(Error::Size(format!(
            "relation order must be in 1..={MAX_RELATION_ORDER}, got {order}"
        )));
    }
    let need = order.saturating_sub(1);
    let cumulants = r.prefix(need)?;
    let moments = if need == 0 {
        Vec::new()
    } else {
        moments_from_cumulants(r, need)?.values().to_vec()
    };
    Ok(relation_residual(&moments, &cumulants, order)?
        .iter()
        .all(Zero::is_zero))
}

const FIXED_POINT_ITERS: usize = 600;
const NEWTON_ITERS: usize = 60;
const CONTINUATION_LEVELS: usize = 240;

fn tolerance(g: Complex64) -> f64 {
    1e-12 * g.norm().max(1.0)
}

fn fixed_point_residual(rt: &RTransform, scale: f64, z: Complex64, g: Complex64) -> f64 {
    (g - (z - scale * rt.eval(g)).inv()).norm()
}

fn newton(rt: &RTransform, scale: f64, z: Complex64, mut g: Complex64) -> Option<Complex64> {
    // F(g) = g (z - s R(g)) - 1
    for _ in 0..NEWTON_ITERS {
        let (r, dr) = rt.eval_with_derivative(g);
        let f = g * (z - scale * r) - 1.0;
        let df = z - scale * r - scale * g * dr;
        if !df.is_finite() || df.norm() == 0.0 {
            return None;
        }
        let step = f / df;
        g -= step;
        if !g.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * g.norm().max(1.0) {
            break;
        }
    }
    Some(g)
}

fn acceptable(rt: &RTransform, scale: f64, z: Complex64, g: Complex64) -> bool {
    g.is_finite()
        && g.im <= 1e-10 * g.norm().max(1.0)
        && fixed_point_residual(rt, scale, z, g) <= tolerance(g)
}

/// Damped fixed-point iteration from `start`, finished by Newton steps.
fn attempt(rt: &RTransform, scale: f64, z: Complex64, start: Complex64) -> Option<Complex64> {
    let mut g = start;
    for _ in 0..FIXED_POINT_ITERS {
        let next = 0.5 * g + 0.5 * (z - scale * rt.eval(g)).inv();
        if !next.is_finite() {
            return None;
        }
        let moved = (next - g).norm();
        g = next;
        if moved <= 1e-10 * g.norm().max(1.0) {
            break;
        }
    }
    let g = newton(rt, scale, z, g)?;
    acceptable(rt, scale, z, g).then_some(g)
}

/// Solves `G = 1/(z - s R(G))` on the branch with `G ~ 1/z` at infinity.
///
/// The damped iteration is tried first; if it stalls (typically very close
/// to the support) the root is followed down from a point high above `z`.
pub fn solve_cauchy(rt: &RTransform, scale: f64, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!(
            "Cauchy transform needs im(z) > 0, got {z}"
        )));
    }
    if let Some(g) = attempt(rt, scale, z, z.inv()) {
        return Ok(g);
    }
    let top = 10.0 * (1.0 + z.norm());
    let ratio = (top / z.im).ln();
    let mut g = attempt(
        rt,
        scale,
        Complex64::new(z.re, top),
        Complex64::new(z.re, top).inv(),
    );
    for level in 1..=CONTINUATION_LEVELS {
        let Some(prev) = g else { break };
        let frac = 1.0 - level as f64 / CONTINUATION_LEVELS as f64;
        let zl = Complex64::new(z.re, z.im * (ratio * frac).exp());
        g = newton(rt, scale, zl, prev).filter(|&c| acceptable(rt, scale, zl, c));
    }
    match g {
        Some(g) => Ok(g),
        None => {
            let g = z.inv();
            Err(Error::Numerical {
                message: format!("Cauchy transform solver did not converge at z = {z}"),
                residual: fixed_point_residual(rt, scale, z, g),
            })
        }
    }
}

/// `G_mu(z)` for the law with free cumulants `r`.
pub fn cauchy_numeric(r: &CumulantSequence, z: ComplexPoint) -> Result<Complex64> {
    solve_cauchy(&RTransform::from_cumulants(r), 1.0, z)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-8..=1e-2).contains(&eps) {
        return Err(Error::domain(format!(
            "Stieltjes smoothing must lie in [1e-8, 1e-2], got {eps}"
        )));
    }
    Ok(())
}

/// Stieltjes inversion `-im G(x + i eps) / pi`, clamped at zero.
pub fn density(r: &CumulantSequence, x: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    density_with(&RTransform::from_cumulants(r), 1.0, x, eps)
}

pub(crate) fn density_with(rt: &RTransform, scale: f64, x: f64, eps: f64) -> Result<f64> {
    let g = solve_cauchy(rt, scale, Complex64::new(x, eps))?;
    Ok((-g.im / std::f64::consts::PI).max(0.0))
}

/// `|d_t G + R(G) d_z G|` for `G = G_{mu_t}` by central differences.
pub fn pde_residual(r: &CumulantSequence, z: ComplexPoint, t: f64, h: f64) -> Result<f64> {
    if z.im < 0.5 {
        return Err(Error::domain(format!(
            "PDE check needs im(z) >= 0.5, got {}",
            z.im
        )));
    }
    if !(1e-5..=1e-2).contains(&h) {
        return Err(Error::domain(format!(
            "difference step must lie in [1e-5, 1e-2], got {h}"
        )));
    }
    if !(t > h) {
        return Err(Error::domain(format!("time {t} must exceed the step {h}")));
    }
    let rt = RTransform::from_cumulants(r);
    let g = solve_cauchy(&rt, t, z)?;
    let dt = (solve_cauchy(&rt, t + h, z)? - solve_cauchy(&rt, t - h, z)?) / (2.0 * h);
    let dz = (solve_cauchy(&rt, t, z + h)? - solve_cauchy(&rt, t, z - h)?) / (2.0 * h);
    Ok((dt + rt.eval(g) * dz).norm())
}
