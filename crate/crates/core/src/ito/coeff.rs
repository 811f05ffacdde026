//! Coefficients `U_(m,n)` of the free Itô formula for `M(t)^n`.
//!
//! Closed form:
//! `U_(m,n) = sum_(k=1..m) (1/k!) phi_(k+1)[ d^k(x^n)(M) # S(m,k) ]`, where
//! `S(m,k)` sums `#m_k(U_(i_1), ..., U_(i_k))` over compositions of `m` into
//! `k` positive parts. Recursion:
//! `U_(m,n+1) = (M^n (x) 1) U_m + (1 (x) M) U_(m,n) + sum_(i+j=m) U_(i,n) (x)_2 U_j`.

use faer::c64;

use super::poly::{for_each_composition, partial_k, Polynomial};
use super::tensor::{otimes2, OperatorTensor};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rational;

fn check_inputs(us: &[OperatorTensor], m_mat: &CMat) -> Result<usize> {
    let n = m_mat.nrows();
    linalg::check_square(m_mat, n)?;
    for u in us {
        if u.arity() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: u.arity(),
            });
        }
        if u.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: u.dim(),
            });
        }
    }
    Ok(n)
}

/// Closed-form `U_(m,n)`; `us[j-1] = U_j`, missing indices are zero.
pub fn ito_coeff_closed(
    n: usize,
    m: usize,
    us: &[OperatorTensor],
    m_mat: &CMat,
) -> Result<OperatorTensor> {
    let dim = check_inputs(us, m_mat)?;
    let big_k = us.len();
    if n == 0 || m == 0 || m > n * big_k.max(1) {
        return Ok(OperatorTensor::zero(2, dim));
    }
    let powers: Vec<CMat> = {
        let mut p = vec![linalg::identity(dim)];
        for i in 1..=n {
            let next = &p[i - 1] * m_mat;
            p.push(next);
        }
        p
    };
    let mut out = OperatorTensor::zero(2, dim);
    let mut kfact = 1.0;
    for k in 1..=m.min(n) {
        kfact *= k as f64;
        let derivative = partial_k(&Polynomial::monomial(n), k);
        // compositions of m into k positive parts, each at most K
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for_each_composition(m - k, k, |c| {
            let parts: Vec<usize> = c.iter().map(|x| x + 1).collect();
            if parts.iter().all(|&p| p <= big_k) {
                comps.push(parts);
            }
        });
        for (word, c) in derivative.terms() {
            let word_coeff = rational::to_f64(c) / kfact;
            for comp in &comps {
                accumulate_word(&mut out, word, word_coeff, comp, us, &powers)?;
            }
        }
        out = out.compact()?;
    }
    Ok(out)
}

/// Adds `phi_(k+1)[ (M^(i_0) (x) ... (x) M^(i_k)) # (U_(c_1), ..., U_(c_k)) ]`.
///
/// Slot `s` carries `U_(c_s) = sum A (x) B`, acting on the word by
/// `a_(s-1) <- a_(s-1) A`, `a_s <- B a_s`; the middle factors are then traced.
fn accumulate_word(
    out: &mut OperatorTensor,
    word: &[usize],
    coeff: f64,
    comp: &[usize],
    us: &[OperatorTensor],
    powers: &[CMat],
) -> Result<()> {
    let k = comp.len();
    let choices: Vec<&[super::tensor::ElementaryTensor]> =
        comp.iter().map(|&j| us[j - 1].terms()).collect();
    if choices.iter().any(|c| c.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; k];
    loop {
        let picked: Vec<&super::tensor::ElementaryTensor> =
            (0..k).map(|s| &choices[s][idx[s]]).collect();
        let mut weight = c64::new(coeff, 0.0);
        for t in &picked {
            weight *= t.coeff;
        }
        // middle factors B_s M^(i_s) A_(s+1), s = 1..k-1
        for s in 1..k {
            let middle = &(&picked[s - 1].factors[1] * &powers[word[s]]) * &picked[s].factors[0];
            weight *= linalg::ntrace(&middle);
        }
        let left = &powers[word[0]] * &picked[0].factors[0];
        let right = &picked[k - 1].factors[1] * &powers[word[k]];
        out.push(weight, vec![left, right])?;

        // next index tuple
        let mut s = 0;
        loop {
            if s == k {
                return Ok(());
            }
            idx[s] += 1;
            if idx[s] < choices[s].len() {
                break;
            }
            idx[s] = 0;
            s += 1;
        }
    }
}

/// `U_(m,n)` for `n = 1..=n_max`, `m = 1..=n K`, by the recursion.
/// Entry `[n-1][m-1]` holds `U_(m,n)`.
pub fn ito_coeff_recursive(
    n_max: usize,
    us: &[OperatorTensor],
    m_mat: &CMat,
) -> Result<Vec<Vec<OperatorTensor>>> {
    let dim = check_inputs(us, m_mat)?;
    let big_k = us.len();
    let mut table: Vec<Vec<OperatorTensor>> = Vec::with_capacity(n_max);
    if n_max == 0 {
        return Ok(table);
    }
    table.push(us.to_vec());
    let one = linalg::identity(dim);
    let mut m_pow = m_mat.clone();
    for n in 1..n_max {
        let prev = &table[n - 1];
        let mut row = Vec::with_capacity((n + 1) * big_k);
        for m in 1..=(n + 1) * big_k {
            let mut acc = OperatorTensor::zero(2, dim);
            if let Some(u) = us.get(m - 1) {
                acc = acc.add(&u.left_mul(&m_pow, &one)?)?;
            }
            if let Some(u) = prev.get(m - 1) {
                acc = acc.add(&u.left_mul(&one, m_mat)?)?;
            }
            for i in 1..m {
                let j = m - i;
                if let (Some(a), Some(b)) = (prev.get(i - 1), us.get(j - 1)) {
                    acc = acc.add(&otimes2(a, b)?)?;
                }
            }
            row.push(acc.compact()?);
        }
        table.push(row);
        m_pow = &m_pow * m_mat;
    }
    Ok(table)
}

/// `U_(m,n)` read from a recursion table, zero outside its range.
pub fn table_entry(
    table: &[Vec<OperatorTensor>],
    n: usize,
    m: usize,
    dim: usize,
) -> OperatorTensor {
    table
        .get(n.wrapping_sub(1))
        .and_then(|row| row.get(m.wrapping_sub(1)))
        .cloned()
        .unwrap_or_else(|| OperatorTensor::zero(2, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ginibre;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pair(n: usize, rng: &mut ChaCha8Rng) -> OperatorTensor {
        OperatorTensor::pair(ginibre(n, rng), ginibre(n, rng)).unwrap()
    }

    #[test]
    fn n_equals_one_returns_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let us: Vec<_> = (0..3).map(|_| random_pair(3, &mut rng)).collect();
        let m = ginibre(3, &mut rng);
        for j in 1..=3 {
            let c = ito_coeff_closed(1, j, &us, &m).unwrap();
            assert!(c.distance(&us[j - 1]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn second_power_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u1 = random_pair(3, &mut rng);
        let m = ginibre(3, &mut rng);
        let one = linalg::identity(3);
        let us = vec![u1.clone()];
        let want = u1
            .left_mul(&m, &one)
            .unwrap()
            .add(&u1.left_mul(&one, &m).unwrap())
            .unwrap();
        assert!(
            ito_coeff_closed(2, 1, &us, &m)
                .unwrap()
                .distance(&want)
                .unwrap()
                < 1e-12
        );
        let want = otimes2(&u1, &u1).unwrap();
        assert!(
            ito_coeff_closed(2, 2, &us, &m)
                .unwrap()
                .distance(&want)
                .unwrap()
                < 1e-12
        );

        let table = ito_coeff_recursive(2, &us, &m).unwrap();
        assert!(
            table_entry(&table, 2, 1, 3)
                .distance(&ito_coeff_closed(2, 1, &us, &m).unwrap())
                .unwrap()
                < 1e-12
        );
        assert!(
            table_entry(&table, 2, 2, 3)
                .distance(&ito_coeff_closed(2, 2, &us, &m).unwrap())
                .unwrap()
                < 1e-12
        );
    }

    #[test]
    fn closed_form_equals_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3] {
            let us: Vec<_> = (0..2).map(|_| random_pair(dim, &mut rng)).collect();
            let m = ginibre(dim, &mut rng);
            let table = ito_coeff_recursive(4, &us, &m).unwrap();
            for n in 1..=4 {
                for mm in 1..=5 {
                    let closed = ito_coeff_closed(n, mm, &us, &m).unwrap();
                    let rec = table_entry(&table, n, mm, dim);
                    let scale = closed.dense_norm().unwrap().max(1.0);
                    assert!(
                        closed.distance(&rec).unwrap() <= 1e-10 * scale,
                        "n={n} m={mm}"
                    );
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let us = vec![random_pair(3, &mut rng)];
        let m = ginibre(2, &mut rng);
        assert!(matches!(
            ito_coeff_closed(2, 1, &us, &m),
            Err(Error::Dimension { .. })
        ));
    }
}
