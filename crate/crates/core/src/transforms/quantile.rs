//! Distribution function and quantiles recovered from the Cauchy transform.
//!
//! The continuous part is integrated with adaptive Simpson on a fine scan
//! grid over `[-M, M]`; point masses are located as sign changes of
//! `re G(x + i eps)` and weighed by `eps * |im G|`, which stays constant in
//! `eps` only at a genuine atom. Within each accepted Simpson panel the CDF
//! is the exact integral of the quadratic density interpolant.

use num_complex::Complex64;

use super::rtransform::RTransform;
use super::{density_with, solve_cauchy};
use crate::cumulants::CumulantSequence;
use crate::error::{Error, Result};
use crate::rational;

/// Stieltjes smoothing used for quantile placement.
pub const QUANTILE_EPS: f64 = 1e-8;

const SCAN_CELLS: usize = 4000;
const PANEL_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 40;
const ATOM_WINDOW: f64 = 1e-4;
const MIN_ATOM: f64 = 1e-7;
const MASS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
}

impl Segment {
    fn mass_to(&self, s: f64) -> f64 {
        let c1 = -3.0 * self.fa + 4.0 * self.fm - self.fb;
        let c2 = 2.0 * self.fa - 4.0 * self.fm + 2.0 * self.fb;
        (self.b - self.a) * s * (self.fa + s * (c1 / 2.0 + s * c2 / 3.0))
    }

    fn mass(&self) -> f64 {
        self.mass_to(1.0)
    }
}

/// Continuous CDF pieces plus point masses of one law.
#[derive(Debug, Clone)]
pub struct SpectralCdf {
    segments: Vec<Segment>,
    atoms: Vec<(f64, f64)>,
    total: f64,
    bound: f64,
}

impl SpectralCdf {
    pub fn new(r: &CumulantSequence, eps: f64) -> Result<Self> {
        let rt = RTransform::from_cumulants(r);
        let bound = support_bound(r);
        build(&rt, bound, eps)
    }

    /// Located point masses as `(position, weight)`.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Total recovered mass (continuous plus atoms).
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn support_bound(&self) -> f64 {
        self.bound
    }

    /// Unnormalized CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let continuous: f64 = self
            .segments
            .iter()
            .map(|s| {
                if x >= s.b {
                    s.mass()
                } else if x > s.a {
                    s.mass_to((x - s.a) / (s.b - s.a))
                } else {
                    0.0
                }
            })
            .sum();
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|&&(a, _)| a <= x)
            .map(|&(_, w)| w)
            .sum();
        continuous + atoms
    }

    /// `x_k` with normalized CDF `(k - 1/2)/n`, `k = 1..n`, nondecreasing.
    pub fn quantiles(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::domain("quantile count must be positive"));
        }
        // knots of the piecewise CDF, atoms as vertical steps
        enum Piece<'a> {
            Seg(&'a Segment),
            Atom(f64, f64),
        }
        let mut pieces: Vec<(f64, Piece)> =
            self.segments.iter().map(|s| (s.a, Piece::Seg(s))).collect();
        pieces.extend(self.atoms.iter().map(|&(a, w)| (a, Piece::Atom(a, w))));
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut out = Vec::with_capacity(n);
        let mut cumulative = 0.0;
        let mut iter = pieces.iter().peekable();
        let mut last_x = -self.bound;
        for k in 1..=n {
            let target = (k as f64 - 0.5) / n as f64 * self.total;
            loop {
                let Some((_, piece)) = iter.peek() else { break };
                let (mass, hit) = match piece {
                    Piece::Seg(s) => {
                        let m = s.mass();
                        if cumulative + m >= target && m > 0.0 {
                            (m, Some(invert_segment(s, target - cumulative)))
                        } else {
                            (m, None)
                        }
                    }
                    Piece::Atom(a, w) => {
                        if cumulative + w >= target {
                            (*w, Some(*a))
                        } else {
                            (*w, None)
                        }
                    }
                };
                if let Some(x) = hit {
                    last_x = last_x.max(x);
                    break;
                }
                cumulative += mass;
                if let Piece::Seg(s) = piece {
                    last_x = last_x.max(s.b);
                }
                iter.next();
            }
            out.push(last_x);
        }
        Ok(out)
    }
}

fn invert_segment(seg: &Segment, want: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if seg.mass_to(mid) < want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    seg.a + 0.5 * (lo + hi) * (seg.b - seg.a)
}

/// `M = 2 max(1, max_k |r_k|^(1/k)) (K + 1)`.
pub(crate) fn support_bound(r: &CumulantSequence) -> f64 {
    let vals = r.to_f64();
    let growth = vals
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs().powf(1.0 / (i + 1) as f64))
        .fold(1.0f64, f64::max);
    2.0 * growth * (vals.len() + 1) as f64
}

fn build(rt: &RTransform, bound: f64, eps: f64) -> Result<SpectralCdf> {
    let h = 2.0 * bound / SCAN_CELLS as f64;
    let grid: Vec<f64> = (0..=SCAN_CELLS).map(|i| -bound + h * i as f64).collect();
    let gs: Vec<Complex64> = grid
        .iter()
        .map(|&x| solve_cauchy(rt, 1.0, Complex64::new(x, eps)))
        .collect::<Result<_>>()?;

    let atoms = find_atoms(rt, &grid, &gs, eps)?;

    // breakpoints: grid minus atom windows, plus window edges
    let mut cuts: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&x| atoms.iter().all(|&(a, _)| (x - a).abs() > ATOM_WINDOW))
        .collect();
    for &(a, _) in &atoms {
        cuts.push((a - ATOM_WINDOW).max(-bound));
        cuts.push((a + ATOM_WINDOW).min(bound));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let dens = |x: f64| density_with(rt, 1.0, x, eps);
    let mut segments = Vec::new();
    let mut continuous = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        if atoms.iter().any(|&(x, _)| (mid - x).abs() < ATOM_WINDOW) {
            continue;
        }
        let (fa, fm, fb) = (dens(a)?, dens(mid)?, dens(b)?);
        let mut pieces = Vec::new();
        simpson(&dens, a, b, fa, fm, fb, PANEL_TOL, MAX_DEPTH, &mut pieces)?;
        continuous += pieces.iter().map(Segment::mass).sum::<f64>();
        segments.extend(pieces);
    }
    let atom_total: f64 = atoms.iter().map(|&(_, w)| w).sum();
    let total = continuous + atom_total;
    if !((total - 1.0).abs() <= MASS_TOL) {
        return Err(Error::Calibration(format!(
            "recovered mass {} deviates from 1 by more than {MASS_TOL}",
            rational::decimal(total)
        )));
    }
    Ok(SpectralCdf {
        segments,
        atoms,
        total,
        bound,
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
    out: &mut Vec<Segment>,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let (flm, frm) = (f(0.5 * (a + m))?, f(0.5 * (m + b))?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        out.push(Segment {
            a,
            b: m,
            fa,
            fm: flm,
            fb: fm,
        });
        out.push(Segment {
            a: m,
            b,
            fa: fm,
            fm: frm,
            fb,
        });
        return Ok(());
    }
    simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1, out)?;
    simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1, out)
}

fn find_atoms(
    rt: &RTransform,
    grid: &[f64],
    gs: &[Complex64],
    eps: f64,
) -> Result<Vec<(f64, f64)>> {
    let re_at = |x: f64| solve_cauchy(rt, 1.0, Complex64::new(x, eps)).map(|g| g.re);
    let mut candidates = Vec::new();
    for i in 0..grid.len() - 1 {
        if gs[i].re < 0.0 && gs[i + 1].re >= 0.0 {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if re_at(mid)? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            candidates.push(hi);
        }
    }
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for a in candidates {
        let weight = |e: f64| solve_cauchy(rt, 1.0, Complex64::new(a, e)).map(|g| -e * g.im);
        let (w1, w2) = (weight(eps)?, weight(10.0 * eps)?);
        if w1 > MIN_ATOM && (w1 - w2).abs() <= 0.05 * w1 {
            if atoms
                .last()
                .is_some_and(|&(prev, _)| (a - prev).abs() < ATOM_WINDOW)
            {
                continue;
            }
            // bisection leaves roundoff around an atom sitting at the origin
            let a = if a.abs() < 1e-9 { 0.0 } else { a };
            atoms.push((a, w1.min(1.0)));
        }
    }
    Ok(atoms)
}

/// `N` quantiles of the law with cumulants `r`, at smoothing [`QUANTILE_EPS`].
pub fn quantiles(r: &CumulantSequence, n: usize) -> Result<Vec<f64>> {
    quantiles_with_eps(r, n, QUANTILE_EPS)
}

pub fn quantiles_with_eps(r: &CumulantSequence, n: usize, eps: f64) -> Result<Vec<f64>> {
    super::check_eps(eps)?;
    if n == 0 {
        return Err(Error::domain("quantile count must be positive"));
    }
    SpectralCdf::new(r, eps)?.quantiles(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::catalog;
    use crate::rational::{int, ratio};

    fn semicircle_cdf(x: f64) -> f64 {
        let x = x.clamp(-2.0, 2.0);
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI)
            + (x / 2.0).asin() / std::f64::consts::PI
    }

    fn invert(cdf: impl Fn(f64) -> f64, p: f64) -> f64 {
        let (mut lo, mut hi) = (-2.0, 2.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn semicircle_two_quantiles() {
        let r = catalog("semicircular", 0).unwrap();
        let q = quantiles(&r, 2).unwrap();
        let want = invert(semicircle_cdf, 0.25);
        assert!((q[0] - want).abs() < 1e-6, "{q:?} vs {want}");
        assert!((q[1] + want).abs() < 1e-6);
    }

    #[test]
    fn semicircle_quantiles_match_closed_form() {
        let r = catalog("semicircular", 0).unwrap();
        let q = quantiles(&r, 64).unwrap();
        for (k, x) in q.iter().enumerate() {
            let want = invert(semicircle_cdf, (k as f64 + 0.5) / 64.0);
            assert!((x - want).abs() < 1e-5, "k={k}: {x} vs {want}");
        }
    }

    #[test]
    fn point_mass_quantiles_are_zero() {
        let r = CumulantSequence::finitely_supported(vec![int(0)]).unwrap();
        let q = quantiles(&r, 5).unwrap();
        assert!(q.iter().all(|x| x.abs() < 1e-9), "{q:?}");
    }

    #[test]
    fn symmetric_law_gives_antisymmetric_quantiles() {
        // compound Poisson, rate 3/2, jumps +-1 with equal weight
        let moments: Vec<_> = (1..=12)
            .map(|k| if k % 2 == 0 { int(1) } else { int(0) })
            .collect();
        let r = crate::cumulants::Distribution::FreeCompoundPoisson {
            rate: ratio(3, 2),
            jump_moments: moments,
        }
        .cumulants(0)
        .unwrap();
        let q = quantiles(&r, 33).unwrap();
        for k in 0..33 {
            assert!((q[k] + q[32 - k]).abs() < 1e-6);
        }
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn free_poisson_small_time_has_an_atom_at_zero() {
        let r = catalog("free_poisson:1/4", 12).unwrap();
        let cdf = SpectralCdf::new(&r, QUANTILE_EPS).unwrap();
        assert_eq!(cdf.atoms().len(), 1);
        let (a, w) = cdf.atoms()[0];
        assert!(a.abs() < 1e-9);
        assert!((w - 0.75).abs() < 1e-6);
        let q = cdf.quantiles(8).unwrap();
        assert!(q[..6].iter().all(|x| x.abs() < 1e-9));
        assert!(q[6] > 0.2 && q[7] > q[6]);
    }

    #[test]
    fn marchenko_pastur_mass_is_one() {
        let r = catalog("free_poisson:1", 12).unwrap();
        let cdf = SpectralCdf::new(&r, QUANTILE_EPS).unwrap();
        assert!((cdf.total_mass() - 1.0).abs() < 1e-3);
        assert!((cdf.cdf(4.5) - cdf.total_mass()).abs() < 1e-9);
    }
}
