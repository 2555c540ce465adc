//! Polynomial root finding through balanced companion matrices.
//!
//! The pipeline is: strip zero roots, deflate `p(w) = q(w^g)` when every
//! exponent shares a factor `g`, rescale so the roots cluster around the unit
//! circle, balance the companion matrix, take its eigenvalues, then polish
//! every root with Newton steps on the original coefficients. Clusters that
//! behave like a multiple root are replaced by their centroid and refined on
//! the appropriate derivative, since the centroid of a perturbed cluster is
//! far better conditioned than its members.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use num_integer::Integer;

use crate::error::{Error, Result};

/// Roots of a real polynomial together with an accuracy certificate.
#[derive(Clone, Debug)]
pub struct PolyRoots {
    /// Roots with multiplicity.
    pub roots: Vec<Complex64>,
    /// Largest relative backward error `|p(r)| / Σ|c_k||r|^k` over all roots.
    pub max_backward_error: f64,
    /// Exponent stride used for deflation (1 when none applied).
    pub stride: usize,
}

/// Horner evaluation of a descending-coefficient polynomial and its derivative.
pub fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn abs_bound(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * r + c.abs())
}

/// Relative backward error of `z` as a root of `coeffs`.
pub fn backward_error(coeffs: &[f64], z: Complex64) -> f64 {
    let (p, _) = horner(coeffs, z);
    let bound = abs_bound(coeffs, z.norm());
    if bound == 0.0 {
        0.0
    } else {
        p.norm() / bound
    }
}

/// Descending coefficients of the k-th derivative.
fn derivative(coeffs: &[f64], k: usize) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    for _ in 0..k {
        let n = c.len() - 1;
        if n == 0 {
            return vec![0.0];
        }
        c = c[..n].iter().enumerate().map(|(i, &a)| a * (n - i) as f64).collect();
    }
    c
}

/// In-place Parlett–Reinsch balancing with radix 2.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

fn companion_eigenvalues(monic_tail: &[f64]) -> Result<Vec<Complex64>> {
    // monic_tail = [a_{n-1}, …, a_0] of w^n + a_{n-1} w^{n-1} + … + a_0
    let n = monic_tail.len();
    if n == 1 {
        return Ok(vec![Complex64::new(-monic_tail[0], 0.0)]);
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for (k, &a) in monic_tail.iter().enumerate() {
        // last column holds −a_0 … −a_{n−1} from the top
        m[(n - 1 - k, n - 1)] = -a;
    }
    balance(&mut m);
    let schur = Schur::try_new(m, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Indeterminate("companion eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn newton_polish(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut best = z;
    let mut best_res = horner(coeffs, z).0.norm();
    let mut cur = z;
    for _ in 0..8 {
        let (p, dp) = horner(coeffs, cur);
        if dp.norm() == 0.0 || !p.is_finite() {
            break;
        }
        let next = cur - p / dp;
        let res = horner(coeffs, next).0.norm();
        if !(res < best_res) {
            break;
        }
        best = next;
        best_res = res;
        cur = next;
    }
    best
}

/// Groups near-coincident roots and refines genuine multiple roots.
fn refine_clusters(coeffs: &[f64], roots: Vec<Complex64>) -> Vec<Complex64> {
    let n = roots.len();
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if used[i] {
            continue;
        }
        let scale = roots[i].norm().max(f64::MIN_POSITIVE);
        let members: Vec<usize> = (i..n)
            .filter(|&j| !used[j] && (roots[j] - roots[i]).norm() <= 1e-3 * scale)
            .collect();
        if members.len() == 1 {
            used[i] = true;
            out.push(newton_polish(coeffs, roots[i]));
            continue;
        }
        let k = members.len();
        let centroid: Complex64 = members.iter().map(|&j| roots[j]).sum::<Complex64>() / k as f64;
        // the cluster is a k-fold root if p, p', …, p^(k−1) all nearly vanish there
        let dk = derivative(coeffs, k - 1);
        let refined = newton_polish(&dk, centroid);
        let genuine = (0..k).all(|j| backward_error(&derivative(coeffs, j), refined) < 1e-9);
        for &j in &members {
            used[j] = true;
        }
        if genuine {
            out.extend(std::iter::repeat_n(refined, k));
        } else {
            out.extend(members.iter().map(|&j| newton_polish(coeffs, roots[j])));
        }
    }
    out
}

/// Roots of `coeffs` (descending degree).
pub fn roots(coeffs: &[f64]) -> Result<PolyRoots> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite polynomial coefficient".into()));
    }
    let first = coeffs
        .iter()
        .position(|&c| c != 0.0)
        .ok_or_else(|| Error::InvalidArgument("zero polynomial has no roots".into()))?;
    let coeffs = &coeffs[first..];
    let last = coeffs.iter().rposition(|&c| c != 0.0).unwrap();
    let zero_roots = coeffs.len() - 1 - last;
    let core = &coeffs[..=last];
    let deg = core.len() - 1;

    let mut all = vec![Complex64::new(0.0, 0.0); zero_roots];
    if deg == 0 {
        return Ok(PolyRoots {
            roots: all,
            max_backward_error: 0.0,
            stride: 1,
        });
    }

    // deflate p(w) = q(w^g)
    let stride = core
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, _)| deg - i)
        .fold(0usize, |g, k| g.gcd(&k))
        .max(1);
    let reduced: Vec<f64> = core.iter().step_by(stride).copied().collect();
    let rdeg = reduced.len() - 1;

    // rescale w = ρ v so the root magnitudes centre on 1
    let rho = (reduced[rdeg].abs() / reduced[0].abs()).powf(1.0 / rdeg as f64);
    let rho = if rho.is_finite() && rho > 0.0 { rho } else { 1.0 };
    let lead = reduced[0];
    let tail: Vec<f64> = (1..=rdeg).map(|i| reduced[i] / lead / rho.powi(i as i32)).collect();
    let scaled = companion_eigenvalues(&tail)?;
    let mut reduced_roots: Vec<Complex64> = scaled.into_iter().map(|v| v * rho).collect();
    reduced_roots = refine_clusters(&reduced, reduced_roots);

    let mut found = Vec::with_capacity(deg);
    if stride == 1 {
        found = reduced_roots;
    } else {
        for r in reduced_roots {
            let (mag, arg) = (r.norm(), r.arg());
            let m = mag.powf(1.0 / stride as f64);
            for k in 0..stride {
                let theta = (arg + 2.0 * std::f64::consts::PI * k as f64) / stride as f64;
                found.push(newton_polish(core, Complex64::from_polar(m, theta)));
            }
        }
    }

    let max_be = found.iter().map(|&z| backward_error(core, z)).fold(0.0, f64::max);
    all.extend(found);
    Ok(PolyRoots {
        roots: all,
        max_backward_error: max_be,
        stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn quadratic_and_linear() {
        let r = roots(&[1.0, -3.0, 2.0]).unwrap();
        let r = sorted_re(r.roots);
        assert!((r[0].re - 1.0).abs() < 1e-14 && (r[1].re - 2.0).abs() < 1e-14);
        let r = roots(&[2.0, 4.0]).unwrap();
        assert!((r.roots[0].re + 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_roots_and_stride() {
        // w^6 + 1 times w^2
        let mut c = vec![0.0; 9];
        c[0] = 1.0;
        c[6] = 1.0;
        let r = roots(&c).unwrap();
        assert_eq!(r.roots.len(), 8);
        assert_eq!(r.stride, 6);
        assert_eq!(r.roots.iter().filter(|z| z.norm() == 0.0).count(), 2);
        for z in r.roots.iter().filter(|z| z.norm() > 0.0) {
            assert!((z.norm() - 1.0).abs() < 1e-13);
            assert!((z.powi(6) + 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn multiple_root_is_recovered_to_high_accuracy() {
        for &w0 in &[10.0, 500.0, 1200.0] {
            for n in 2..=4u32 {
                // (w + ω0)^n
                let mut c = vec![1.0];
                for _ in 0..n {
                    let mut next = vec![0.0; c.len() + 1];
                    for (i, &a) in c.iter().enumerate() {
                        next[i] += a;
                        next[i + 1] += a * w0;
                    }
                    c = next;
                }
                let r = roots(&c).unwrap();
                let worst = r.roots.iter().map(|z| (z + w0).norm() / w0).fold(0.0, f64::max);
                assert!(worst < 1e-9, "ω0={w0} n={n}: {worst}");
            }
        }
    }

    #[test]
    fn wide_dynamic_range() {
        // roots at −1, −1e3, −1e6
        let c = [1.0, 1_001_001.0, 1_001_001_000.0, 1e9];
        let r = sorted_re(roots(&c).unwrap().roots);
        for (z, want) in r.iter().zip([-1e6, -1e3, -1.0]) {
            assert!((z.re - want).abs() <= 1e-9 * want.abs(), "{z} vs {want}");
        }
    }

    #[test]
    fn rejects_zero_polynomial() {
        assert!(roots(&[0.0, 0.0]).is_err());
    }
}
