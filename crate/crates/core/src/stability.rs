//! Stability tests: commensurate sector checks, boundary polynomials of the
//! two-state closed loop, and Routh–Hurwitz tables.
//!
//! A fractional polynomial whose orders are all multiples of `λ` becomes an
//! integer polynomial in `w = s^λ`. It is stable iff every root satisfies
//! `|arg w| > λπ/2`.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_integer::{binomial, Integer};
use num_traits::{One, Zero};

use crate::adrc::{closed_loop_char_poly, AdrcDesign, AdrcOrders, Variant};
use crate::error::{Error, Result};
use crate::fracnum::{commensurate, FracPoly, Order};
use crate::plant::PlantModel;
use crate::polyroots::roots;
use crate::report::fmt_g;

/// Angular tolerance of the sector test, in radians.
pub const SECTOR_TOL: f64 = 1e-9;
/// Largest relative backward error accepted from the root finder.
pub const MAX_BACKWARD_ERROR: f64 = 1e-6;

/// Relative size below which a Routh entry counts as zero.
const ROUTH_RTOL: f64 = 1e-10;

/// Integer polynomial in `w = s^λ`, descending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CommensuratePoly {
    pub coeffs: Vec<f64>,
    pub lambda: Order,
}

impl CommensuratePoly {
    pub fn new(coeffs: Vec<f64>, lambda: Order) -> Result<Self> {
        if lambda <= Order::zero() || lambda > Order::one() {
            return Err(Error::InvalidArgument(format!(
                "base order λ={lambda} must lie in (0, 1]"
            )));
        }
        match coeffs.first() {
            Some(c) if *c != 0.0 && c.is_finite() => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "leading coefficient must be finite and non-zero".into(),
                ))
            }
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(CommensuratePoly { coeffs, lambda })
    }

    /// Rewrites `p` in `w = s^λ`.
    pub fn from_frac(p: &FracPoly, lambda: Order) -> Result<Self> {
        Self::new(commensurate(p, lambda)?, lambda)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Choice of commensurate base order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LambdaConvention {
    /// `1/lcm` of the order denominators.
    #[default]
    Lcm,
    /// `1/(q₁q₂q₃)`, the product of the denominators of `χ`, `γ`, `ν`.
    Paper,
}

/// Base order of `orders` under `conv`.
pub fn base_order(orders: &[Order], conv: LambdaConvention) -> Order {
    match conv {
        LambdaConvention::Lcm => Order::new(1, orders.iter().fold(1i64, |acc, o| acc.lcm(o.denom()))),
        LambdaConvention::Paper => Order::new(1, orders.iter().map(|o| *o.denom()).product()),
    }
}

fn design_base(design: &AdrcDesign, conv: LambdaConvention) -> Order {
    let q = &design.eso.q;
    match (conv, design.eso.variant) {
        (LambdaConvention::Paper, Variant::Ifo) => {
            let gamma = if q.len() > 2 { q[1] } else { Order::one() };
            base_order(&[q[0], gamma, q[q.len() - 1]], conv)
        }
        (LambdaConvention::Paper, _) => {
            let mut dens: Vec<Order> = Vec::new();
            for o in q {
                if !dens.iter().any(|d| d.denom() == o.denom()) {
                    dens.push(*o);
                }
            }
            base_order(&dens, conv)
        }
        (LambdaConvention::Lcm, _) => base_order(q, conv),
    }
}

/// `s^{(n−1)γ+χ+ν} + Σ β_i s^{(n−i)γ+ν} + β_{n+1}`.
pub fn char_poly_eso(orders: &AdrcOrders, gains: &[f64]) -> Result<FracPoly> {
    let n = orders.n;
    if gains.len() != n + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} gains for {} states",
            gains.len(),
            n + 1
        )));
    }
    let g = |k: usize| orders.gamma * Order::from_integer(k as i64);
    let mut terms = vec![(1.0, g(n - 1) + orders.chi + orders.nu)];
    for (i, b) in gains[..n].iter().enumerate() {
        terms.push((*b, g(n - 1 - i) + orders.nu));
    }
    terms.push((gains[n], Order::zero()));
    FracPoly::new(terms)
}

/// Closed-loop characteristic polynomial in `w = s^λ`; requires `b = b0`.
pub fn char_poly_closed(p: &PlantModel, design: &AdrcDesign, conv: LambdaConvention) -> Result<CommensuratePoly> {
    let b0 = design.eso.b0;
    if (p.b() - b0).abs() > 1e-12 * b0.abs().max(p.b().abs()) {
        return Err(Error::Precondition(format!(
            "sector test needs b = b0, got b = {} and b0 = {b0}",
            p.b()
        )));
    }
    let poly = closed_loop_char_poly(p, design);
    CommensuratePoly::from_frac(&poly, design_base(design, conv))
}

/// Outcome of a sector test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
    Indeterminate,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub roots: Vec<Complex64>,
    pub lambda: Order,
    /// `min |arg w_i| − λπ/2`.
    pub min_arg_margin: f64,
    pub verdict: Verdict,
    pub condition_warning: bool,
    pub backward_error: f64,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }

    /// `index,re,im,arg_margin` per root.
    pub fn to_csv(&self) -> String {
        let half = crate::fracnum::order_to_f64(self.lambda) * FRAC_PI_2;
        let mut s = String::from("index,re,im,arg_margin\n");
        for (i, r) in self.roots.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{}", fmt_g(r.re), fmt_g(r.im), fmt_g(root_arg(*r) - half));
        }
        s
    }

    /// Flat `key=value` lines.
    pub fn summary(&self) -> String {
        format!(
            "verdict={}\nlambda={}\ndegree={}\nmin_arg_margin={}\nbackward_error={}\ncondition_warning={}\n",
            self.verdict.name(),
            self.lambda,
            self.roots.len(),
            fmt_g(self.min_arg_margin),
            fmt_g(self.backward_error),
            self.condition_warning
        )
    }
}

fn root_arg(r: Complex64) -> f64 {
    if r.norm() == 0.0 {
        0.0
    } else {
        r.arg().abs()
    }
}

/// Sector test `|arg w_i| > λπ/2` on every root.
pub fn sector_check(cp: &CommensuratePoly) -> Result<StabilityReport> {
    if cp.degree() < 1 {
        return Err(Error::InvalidArgument("sector test needs degree ≥ 1".into()));
    }
    let found = roots(&cp.coeffs)?;
    let half = crate::fracnum::order_to_f64(cp.lambda) * FRAC_PI_2;
    let nz: Vec<f64> = cp.coeffs.iter().filter(|c| **c != 0.0).map(|c| c.abs()).collect();
    let range = nz.iter().cloned().fold(0.0, f64::max) / nz.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_warning = cp.degree() > 60 || range > 1e12;
    let min_arg_margin = found
        .roots
        .iter()
        .map(|r| root_arg(*r) - half)
        .fold(f64::INFINITY, f64::min);
    let has_zero = found.roots.iter().any(|r| r.norm() == 0.0);
    let verdict = if found.max_backward_error > MAX_BACKWARD_ERROR {
        Verdict::Indeterminate
    } else if min_arg_margin > SECTOR_TOL {
        Verdict::Stable
    } else if has_zero || min_arg_margin >= -SECTOR_TOL {
        let others = found
            .roots
            .iter()
            .filter(|r| r.norm() != 0.0)
            .map(|r| root_arg(*r) - half);
        if others.fold(f64::INFINITY, f64::min) < -SECTOR_TOL {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        }
    } else {
        Verdict::Unstable
    };
    Ok(StabilityReport {
        roots: found.roots,
        lambda: cp.lambda,
        min_arg_margin,
        verdict,
        condition_warning,
        backward_error: found.max_backward_error,
    })
}

/// Parameters of a boundary-polynomial family.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryParams {
    /// Observer with `n + 1` states and gains `β`.
    Eso { gains: Vec<f64> },
    /// Two-state closed loop with plant `s² + a₁s + a₀`.
    Closed2(Closed2),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Closed2 {
    pub a0: f64,
    pub a1: f64,
    pub kp: f64,
    pub kd1: f64,
    pub omega0: f64,
}

/// Boundary polynomials, descending coefficients.
pub fn kharitonov_boundaries(params: &BoundaryParams) -> Result<Vec<Vec<f64>>> {
    match params {
        BoundaryParams::Eso { gains } => kharitonov_eso(gains),
        BoundaryParams::Closed2(c) => Ok(kharitonov_closed2(c).to_vec()),
    }
}

/// Corners of the observer polynomial: all orders 0, all 0 but the last
/// which is 1, and all orders 1.
pub fn kharitonov_eso(gains: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n1 = gains.len();
    if n1 < 2 {
        return Err(Error::InvalidArgument("at least two observer gains required".into()));
    }
    let (head, last) = gains.split_at(n1 - 1);
    let head_sum: f64 = head.iter().sum();
    let first = vec![1.0, head_sum + last[0]];
    let second = vec![1.0, head_sum, last[0]];
    let mut third = vec![1.0];
    third.extend_from_slice(gains);
    Ok(vec![first, second, third])
}

/// The three corner polynomials of the two-state closed loop.
pub fn kharitonov_closed2(c: &Closed2) -> [Vec<f64>; 3] {
    let Closed2 {
        a0,
        a1,
        kp,
        kd1: kd,
        omega0: w,
    } = *c;
    let w2 = w * w;
    let w3 = w2 * w;
    let a = vec![
        1.0 + kd + 3.0 * w + 3.0 * kd * w,
        a1 + a1 * kd,
        a0 + a0 * kd + kp + 3.0 * kp * w + 3.0 * w2 + 3.0 * kd * w2 + w3 + kd * w3,
        a1 * kp + 3.0 * a1 * w + 3.0 * a1 * kd * w + 3.0 * a1 * w2,
        a0 * kp + 3.0 * a0 * w + 3.0 * a0 * kd * w + 3.0 * a0 * w2 + 3.0 * kp * w2 + kp * w3,
    ];
    let b = vec![
        1.0 + kd,
        a1 + a1 * kd + 3.0 * w + 3.0 * kd * w,
        a0 + a0 * kd + kp + 3.0 * w2 + 3.0 * kd * w2,
        a1 * kp + 3.0 * a1 * w + 3.0 * a1 * kd * w + 3.0 * kp * w + 3.0 * a1 * w2 + w3 + kd * w3,
        a0 * kp + 3.0 * a0 * w + 3.0 * a0 * kd * w + 3.0 * a0 * w2 + 3.0 * kp * w2,
        kp * w3,
    ];
    let cc = vec![
        1.0,
        a1 + kd + 3.0 * w,
        a0 + a1 * kd + kp + 3.0 * a1 * w + 3.0 * kd * w + 3.0 * w2,
        a0 * kd + a1 * kp + 3.0 * a0 * w + 3.0 * a1 * kd * w + 3.0 * kp * w + 3.0 * a1 * w2 + 3.0 * kd * w2 + w3,
        a0 * kp + 3.0 * a0 * kd * w + 3.0 * a0 * w2 + 3.0 * kp * w2 + kd * w3,
        kp * w3,
    ];
    [a, b, cc]
}

/// Routh array and its verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct RouthTable {
    pub rows: Vec<Vec<f64>>,
    /// Strictly positive first column without any substitution.
    pub hurwitz: bool,
    pub sign_changes: usize,
    /// A zero pivot was replaced by `ε`.
    pub epsilon_used: bool,
    /// An all-zero row was replaced by the auxiliary-polynomial derivative.
    pub marginal: bool,
}

impl RouthTable {
    pub fn first_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }
}

/// Routh array of a descending-coefficient polynomial.
pub fn routh_table(poly: &[f64]) -> Result<RouthTable> {
    let start = poly
        .iter()
        .position(|c| *c != 0.0)
        .ok_or_else(|| Error::InvalidArgument("zero polynomial".into()))?;
    let poly = &poly[start..];
    if poly.len() < 2 {
        return Err(Error::InvalidArgument("Routh table needs degree ≥ 1".into()));
    }
    if poly.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coefficient".into()));
    }
    let sign = poly[0].signum();
    let poly: Vec<f64> = poly.iter().map(|c| c * sign).collect();
    let deg = poly.len() - 1;
    let width = deg / 2 + 1;
    let tiny = poly
        .iter()
        .filter(|c| **c != 0.0)
        .fold(f64::INFINITY, |m, c| m.min(c.abs()));
    let row_of = |parity: usize| -> Vec<f64> {
        let mut r: Vec<f64> = poly.iter().skip(parity).step_by(2).copied().collect();
        r.resize(width, 0.0);
        r
    };
    // entry is zero up to the cancellation that produced it
    let is_zero = |x: f64, mag: f64| x.abs() <= ROUTH_RTOL * mag;
    let abs_row = |r: &[f64]| r.iter().map(|c| c.abs()).collect::<Vec<f64>>();
    let mut rows = vec![row_of(0), row_of(1)];
    let mut mags = vec![abs_row(&rows[0]), abs_row(&rows[1])];
    let mut epsilon_used = false;
    let mut marginal = false;
    for k in 2..=deg + 1 {
        let prev_deg = deg + 1 - k;
        if (0..width).all(|j| is_zero(rows[k - 1][j], mags[k - 1][j])) && k <= deg {
            // all-zero row: replace by the derivative of the auxiliary polynomial
            marginal = true;
            let aux_deg = prev_deg + 1;
            let mut d = vec![0.0; width];
            for (j, c) in rows[k - 2].iter().enumerate() {
                let p = aux_deg as i64 - 2 * j as i64;
                if p > 0 {
                    d[j] = c * p as f64;
                }
            }
            mags[k - 1] = abs_row(&d);
            rows[k - 1] = d;
        }
        if is_zero(rows[k - 1][0], mags[k - 1][0]) {
            epsilon_used = true;
            let m = mags[k - 1][0];
            rows[k - 1][0] = if m > 0.0 { ROUTH_RTOL * m } else { ROUTH_RTOL * tiny };
            mags[k - 1][0] = rows[k - 1][0];
        }
        if k > deg {
            break;
        }
        let (a, b) = (&rows[k - 2], &rows[k - 1]);
        let (ma, mb) = (&mags[k - 2], &mags[k - 1]);
        let mut next = vec![0.0; width];
        let mut mnext = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (b[0] * a[j + 1] - a[0] * b[j + 1]) / b[0];
            mnext[j] = (b[0].abs() * ma[j + 1] + a[0].abs() * mb[j + 1]) / b[0].abs();
        }
        rows.push(next);
        mags.push(mnext);
    }
    let col: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let sign_changes = col.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    let hurwitz = !epsilon_used && !marginal && col.iter().all(|c| *c > 0.0);
    Ok(RouthTable {
        rows,
        hurwitz,
        sign_changes,
        epsilon_used,
        marginal,
    })
}

/// Result of the `ω0` search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Omega0Search {
    /// Smallest `ω0` found with all three boundary polynomials Hurwitz.
    pub omega0: f64,
    /// Largest failing `ω0` below it, if any was seen.
    pub failing_below: Option<f64>,
    /// Every grid point above the first pass also passes.
    pub monotone: bool,
    /// Some boundary polynomial at `omega0` is only marginally stable.
    pub marginal: bool,
}

/// All three two-state boundary polynomials are Hurwitz.
pub fn closed2_hurwitz(c: &Closed2) -> bool {
    kharitonov_closed2(c)
        .iter()
        .all(|p| routh_table(p).map(|t| t.hurwitz).unwrap_or(false))
}

/// No boundary polynomial has a right-half-plane root; simple imaginary-axis
/// roots found through an all-zero row are tolerated.
pub fn closed2_not_unstable(c: &Closed2) -> bool {
    kharitonov_closed2(c).iter().all(|p| {
        routh_table(p)
            .map(|t| t.hurwitz || (t.marginal && !t.epsilon_used && t.sign_changes == 0))
            .unwrap_or(false)
    })
}

/// Smallest `ω0` in `search` with all boundary polynomials Hurwitz.
pub fn find_omega0(p: &PlantModel, kp: f64, kd1: f64, search: (f64, f64)) -> Result<Omega0Search> {
    let a = p.a();
    if a.len() != 2 {
        return Err(Error::Precondition(format!("plant order must be 2, got {}", a.len())));
    }
    let (a0, a1) = (a[0], a[1]);
    if !(a0 >= 0.0) {
        return Err(Error::Precondition(format!("a0 ≥ 0 violated (a0 = {a0})")));
    }
    if !(a1 >= 0.0) {
        return Err(Error::Precondition(format!("a1 ≥ 0 violated (a1 = {a1})")));
    }
    if !(kp > 0.0) {
        return Err(Error::Precondition(format!("kp > 0 violated (kp = {kp})")));
    }
    if !(kd1 > 8.0) {
        return Err(Error::Precondition(format!("kd1 > 8 violated (kd1 = {kd1})")));
    }
    let (lo, hi) = search;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid search interval ({lo}, {hi})")));
    }
    // marginal plants can only give marginal boundaries
    let lenient = a0 == 0.0 || a1 == 0.0;
    let at = |w: f64| Closed2 {
        a0,
        a1,
        kp,
        kd1,
        omega0: w,
    };
    let pass = |w: f64| {
        if lenient {
            closed2_not_unstable(&at(w))
        } else {
            closed2_hurwitz(&at(w))
        }
    };
    let mut grid = Vec::new();
    let mut w = lo;
    while w < hi {
        grid.push(w);
        w *= 1.2;
    }
    grid.push(hi);
    let verdicts: Vec<bool> = grid.iter().map(|&w| pass(w)).collect();
    let first = verdicts
        .iter()
        .position(|&v| v)
        .ok_or_else(|| Error::NotFound(format!("no ω0 in [{lo}, {hi}] passes all boundary tests")))?;
    let monotone = verdicts[first..].iter().all(|&v| v);
    if first == 0 {
        let marginal = !closed2_hurwitz(&at(grid[0]));
        return Ok(Omega0Search {
            omega0: grid[0],
            failing_below: None,
            monotone,
            marginal,
        });
    }
    let (mut bad, mut good) = (grid[first - 1], grid[first]);
    while good - bad > 1e-9 * good {
        let mid = 0.5 * (bad + good);
        if pass(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Omega0Search {
        omega0: good,
        failing_below: Some(bad),
        monotone,
        marginal: !closed2_hurwitz(&at(good)),
    })
}

/// `(w + ω0)^k`, descending.
pub fn binomial_poly(k: usize, omega0: f64) -> Vec<f64> {
    (0..=k)
        .map(|i| binomial(k as u64, i as u64) as f64 * omega0.powi(i as i32))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adrc::{derive_orders, eso_gains, EsoConfig, FilterBank, TrackingConfig};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Order {
        Order::new(n, d)
    }

    #[test]
    fn eso_poly_exponents() {
        let o = derive_orders(2, 1.2, 1.2).unwrap();
        let g = eso_gains(3, 10.0).unwrap();
        let p = char_poly_eso(&o, &g).unwrap();
        let orders: Vec<Order> = p.terms().iter().map(|t| t.order).collect();
        assert_eq!(orders, vec![r(16, 5), r(2, 1), r(6, 5), r(0, 1)]);
        assert_eq!(p.coeff(r(2, 1)), 30.0);
        let unit = char_poly_eso(&o, &eso_gains(3, 1.0).unwrap()).unwrap();
        assert_eq!(unit.coeff(Order::zero()), 1.0);
        assert_eq!(commensurate(&p, r(1, 5)).unwrap().len() - 1, 16);
    }

    #[test]
    fn eso_poly_matches_observer_loop() {
        let o = derive_orders(2, 1.2, 1.0).unwrap();
        let cfg = EsoConfig::ifo(&o, 300.0, 5.0, 8000.0, FilterBank::oracle()).unwrap();
        let a = char_poly_eso(&o, &cfg.gains).unwrap();
        let b = crate::adrc::observer_char_poly(&cfg);
        assert!((&a - &b).is_zero(), "{a} vs {b}");
    }

    #[test]
    fn sector_examples() {
        let s = sector_check(&CommensuratePoly::new(binomial_poly(3, 4.0), Order::one()).unwrap()).unwrap();
        assert_eq!(s.verdict, Verdict::Stable);
        assert!((s.min_arg_margin - FRAC_PI_2).abs() < 1e-9);
        let s = sector_check(&CommensuratePoly::new(vec![1.0, 0.0, 1.0], Order::one()).unwrap()).unwrap();
        assert_eq!(s.verdict, Verdict::Marginal);
        let s = sector_check(&CommensuratePoly::new(vec![1.0, 0.0, -1.0], Order::one()).unwrap()).unwrap();
        assert_eq!(s.verdict, Verdict::Unstable);
        let s = sector_check(&CommensuratePoly::new(vec![1.0, 1.0, 0.0], Order::one()).unwrap()).unwrap();
        assert_eq!(s.verdict, Verdict::Marginal);
        // s^{1/2} + 1: root w = −1 lies outside the λπ/2 sector
        let s = sector_check(&CommensuratePoly::new(vec![1.0, 1.0], r(1, 2)).unwrap()).unwrap();
        assert_eq!(s.verdict, Verdict::Stable);
        // w² − w + 1 has |arg| = π/3, stable for λ = 1/2, unstable for λ = 1
        let s = sector_check(&CommensuratePoly::new(vec![1.0, -1.0, 1.0], r(1, 2)).unwrap()).unwrap();
        assert_eq!(s.verdict, Verdict::Stable);
        let s = sector_check(&CommensuratePoly::new(vec![1.0, -1.0, 1.0], Order::one()).unwrap()).unwrap();
        assert_eq!(s.verdict, Verdict::Unstable);
    }

    #[test]
    fn commensurate_poly_rejects_bad_input() {
        assert!(CommensuratePoly::new(vec![0.0, 1.0], Order::one()).is_err());
        assert!(CommensuratePoly::new(vec![1.0, 1.0], r(3, 2)).is_err());
        assert!(sector_check(&CommensuratePoly::new(vec![2.0], Order::one()).unwrap()).is_err());
    }

    #[test]
    fn report_text() {
        let s = sector_check(&CommensuratePoly::new(vec![1.0, 2.0], Order::one()).unwrap()).unwrap();
        assert_eq!(s.to_csv(), "index,re,im,arg_margin\n0,-2,0,1.57079632679\n");
        assert!(s.summary().starts_with("verdict=stable\nlambda=1\ndegree=1\n"));
    }

    #[test]
    fn eso_boundaries() {
        for n in 2..=3usize {
            for &w0 in &[10.0, 500.0, 1200.0] {
                let g = eso_gains(n + 1, w0).unwrap();
                let b = kharitonov_eso(&g).unwrap();
                let total: f64 = g.iter().sum();
                assert_eq!(b[0], vec![1.0, total]);
                let third = roots(&b[2]).unwrap();
                let worst = third.roots.iter().map(|z| (z + w0).norm() / w0).fold(0.0, f64::max);
                assert!(worst < 1e-6, "n={n} ω0={w0}: {worst}");
                for p in &b {
                    assert!(routh_table(p).unwrap().hurwitz);
                }
            }
        }
    }

    /// Expands the two-state loop polynomial at integer corner orders with
    /// the observer term `β₁s²`.
    fn corner_expansion(c: &Closed2, gamma: i64, nu: i64) -> Vec<f64> {
        let s = |k: i64| FracPoly::s_pow(Order::from_integer(k));
        let k = |v: f64| FracPoly::constant(v);
        let chi = 2 - gamma;
        let b1 = 3.0 * c.omega0;
        let b2 = 3.0 * c.omega0 * c.omega0;
        let b3 = c.omega0.powi(3);
        let dg = &(&s(2) + &s(chi).scale(c.kd1)) + &k(c.kp);
        let cp = &(&(&s(chi + gamma + nu) + &s(2).scale(b1)) + &s(nu).scale(b2)) + &k(b3);
        let gm = &(&(&(&k(c.kp) + &(&s(chi) + &k(b1)).scale(c.kd1)) + &s(2)) + &s(gamma).scale(b1)) + &k(b2);
        let hn = &s(nu) * &(&k(c.a0) + &s(1).scale(c.a1));
        let p = &(&dg * &cp) + &(&gm * &hn);
        commensurate(&p, Order::one()).unwrap()
    }

    #[test]
    fn closed2_coefficients_match_corner_expansion() {
        let c = Closed2 {
            a0: 10.0,
            a1: 10.0,
            kp: 1.0,
            kd1: 9.0,
            omega0: 100.0,
        };
        let [a, b, cc] = kharitonov_closed2(&c);
        assert_eq!(a[0], 3010.0);
        for (got, (g, n)) in [a, b, cc].iter().zip([(0, 0), (0, 1), (1, 1)]) {
            let want = corner_expansion(&c, g, n);
            assert_eq!(got.len(), want.len());
            for (x, y) in got.iter().zip(&want) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn routh_examples() {
        assert!(routh_table(&[1.0, 2.0, 1.0]).unwrap().hurwitz);
        let t = routh_table(&[1.0, 0.0, -1.0]).unwrap();
        assert!(!t.hurwitz);
        let t = routh_table(&[1.0, 0.0, 1.0]).unwrap();
        assert!(!t.hurwitz && t.marginal);
        // s^4 + s^3 + 2s^2 + 2s + 3 has a zero pivot and two right-half roots
        let t = routh_table(&[1.0, 1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!(t.epsilon_used && !t.hurwitz && t.sign_changes == 2);
        assert!(routh_table(&[-1.0, -3.0, -2.0]).unwrap().hurwitz);
        assert!(routh_table(&[0.0]).is_err());
        assert!(routh_table(&[3.0]).is_err());
    }

    #[test]
    fn routh_badly_scaled_pivot_is_not_zero() {
        let a = [
            3300010.0,
            100.0,
            1.33103630003301e16,
            363033000010.0,
            1331399333000010.0,
        ];
        let t = routh_table(&a).unwrap();
        assert!(t.hurwitz && !t.epsilon_used, "{:?}", t.first_column());
        assert_eq!(t.first_column()[1], 100.0);
    }

    #[test]
    fn quartic_routh_equals_printed_inequality() {
        for &w0 in &[1.0, 5.0, 20.0, 100.0, 1000.0] {
            for &kp in &[1.0, 1e3, 1e6] {
                let c = Closed2 {
                    a0: 10.0,
                    a1: 10.0,
                    kp,
                    kd1: 9.0,
                    omega0: w0,
                };
                let a = &kharitonov_closed2(&c)[0];
                let ineq = a[1] * a[2] * a[3] > a[0] * a[3] * a[3] + a[1] * a[1] * a[4];
                assert_eq!(routh_table(a).unwrap().hurwitz, ineq, "ω0={w0} kp={kp}");
            }
        }
    }

    #[test]
    fn omega0_search() {
        let p = PlantModel::new(vec![10.0, 10.0], 5.0).unwrap();
        let found = find_omega0(&p, 1.2e6, 4000.0, (1e-2, 1e6)).unwrap();
        let at = |w: f64| {
            closed2_hurwitz(&Closed2 {
                a0: 10.0,
                a1: 10.0,
                kp: 1.2e6,
                kd1: 4000.0,
                omega0: w,
            })
        };
        assert!(at(found.omega0) && at(2.0 * found.omega0));
        assert!(!at(found.failing_below.unwrap()));
        let dbl = PlantModel::new(vec![0.0, 0.0], 1.0).unwrap();
        let found = find_omega0(&dbl, 1.0, 9.0, (1e-3, 1e6)).unwrap();
        assert!(found.omega0.is_finite() && found.marginal);
        match find_omega0(&p, 1.0, 5.0, (1.0, 1e3)) {
            Err(Error::Precondition(m)) => assert!(m.contains("kd1 > 8")),
            other => panic!("{other:?}"),
        }
    }

    fn sec5_design(nu: f64, omega0: f64) -> (PlantModel, AdrcDesign) {
        let p = PlantModel::new(vec![10.0, 10.0], 5.0).unwrap();
        let o = derive_orders(2, 1.2, nu).unwrap();
        let eso = EsoConfig::ifo(&o, omega0, 5.0, 8000.0, FilterBank::oracle()).unwrap();
        let trk = TrackingConfig::from_gains(1.2e6, vec![4000.0], o.chi).unwrap();
        (p, AdrcDesign::new(eso, trk).unwrap())
    }

    #[test]
    fn closed_loop_degrees_and_conventions() {
        let (p, d) = sec5_design(1.2, 1200.0);
        let lcm = char_poly_closed(&p, &d, LambdaConvention::Lcm).unwrap();
        assert_eq!(lcm.lambda, r(1, 5));
        let frac = closed_loop_char_poly(&p, &d);
        assert_eq!(
            lcm.degree() as i64,
            (frac.degree() * Order::from_integer(5)).to_integer()
        );
        let paper = char_poly_closed(&p, &d, LambdaConvention::Paper).unwrap();
        assert_eq!(paper.lambda, r(1, 125));
        assert_eq!(paper.degree(), 25 * lcm.degree());
        let a = sector_check(&lcm).unwrap();
        let b = sector_check(&paper).unwrap();
        assert_eq!(a.verdict, Verdict::Stable);
        assert_eq!(a.verdict, b.verdict);
        assert!(b.condition_warning);
    }

    #[test]
    fn double_integrator_factors() {
        let p = PlantModel::new(vec![0.0, 0.0], 5.0).unwrap();
        let (_, d) = sec5_design(1.2, 1200.0);
        let cl = closed_loop_char_poly(&p, &d);
        let lp = crate::adrc::loop_polys(&d.eso);
        let s2 = FracPoly::s_pow(Order::from_integer(2));
        let trk = &(&s2 + &FracPoly::s_pow(r(6, 5)).scale(4000.0)) + &FracPoly::constant(1.2e6);
        let diff = &cl - &(&trk * &lp.cp);
        assert!(diff.is_zero(), "{diff}");
    }

    #[test]
    fn gain_mismatch_is_flagged() {
        let (_, d) = sec5_design(1.2, 1200.0);
        let p = PlantModel::new(vec![10.0, 10.0], 4.0).unwrap();
        assert!(matches!(
            char_poly_closed(&p, &d, LambdaConvention::Lcm),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn eso_sector_stable_for_binomial_gains() {
        for (chi, nu) in [(1.2, 1.2), (1.2, 1.0)] {
            let o = derive_orders(2, chi, nu).unwrap();
            for &w0 in &[2.0, 250.0, 1200.0, 5000.0] {
                let g = eso_gains(o.n + 1, w0).unwrap();
                let p = char_poly_eso(&o, &g).unwrap();
                let lam = base_order(&[o.chi, o.gamma, o.nu], LambdaConvention::Lcm);
                let rep = sector_check(&CommensuratePoly::from_frac(&p, lam).unwrap()).unwrap();
                assert_eq!(rep.verdict, Verdict::Stable, "χ={chi} ν={nu} ω0={w0}");
            }
        }
    }

    #[test]
    fn eso_with_nu_equal_gamma_loses_stability_at_high_bandwidth() {
        let o = derive_orders(2, 1.2, 0.8).unwrap();
        let verdict = |w0: f64| {
            let p = char_poly_eso(&o, &eso_gains(3, w0).unwrap()).unwrap();
            sector_check(&CommensuratePoly::from_frac(&p, r(1, 5)).unwrap())
                .unwrap()
                .verdict
        };
        assert_eq!(verdict(100.0), Verdict::Stable);
        assert_eq!(verdict(500.0), Verdict::Unstable);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn eso_stable_over_bandwidths(w0 in 1.0f64..2e4) {
            let o = derive_orders(2, 1.2, 1.2).unwrap();
            let p = char_poly_eso(&o, &eso_gains(3, w0).unwrap()).unwrap();
            let rep = sector_check(&CommensuratePoly::from_frac(&p, r(1, 5)).unwrap()).unwrap();
            prop_assert_eq!(rep.verdict, Verdict::Stable);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn routh_agrees_with_sector(lead in 1i32..4, rest in proptest::collection::vec(-6i32..7, 1..=8)) {
            let mut c = vec![lead as f64];
            c.extend(rest.iter().map(|&v| v as f64));
            let t = routh_table(&c).unwrap();
            let s = sector_check(&CommensuratePoly::new(c.clone(), Order::one()).unwrap()).unwrap();
            prop_assert_eq!(t.hurwitz, s.verdict == Verdict::Stable, "{:?}", c);
        }
    }
}
