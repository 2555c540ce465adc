//! Fractional polynomial and rational-function algebra.
//!
//! A [`FracPoly`] is a finite sum `Σ c_k s^{α_k}` with exact rational orders
//! `α_k ≥ 0`. Orders stay rational through every operation so exponent
//! bookkeeping (commensurate substitution, characteristic polynomials) is exact;
//! they are converted to `f64` only when the polynomial is evaluated.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational order of a fractional operator.
pub type Order = Ratio<i64>;

/// Default denominator bound for [`rationalize`].
pub const DEFAULT_MAX_DEN: i64 = 100;

/// Relative tolerance under which merged like terms are considered cancelled.
pub const MERGE_TOL: f64 = 1e-12;

pub fn order_to_f64(order: Order) -> f64 {
    order.to_f64().unwrap_or(f64::NAN)
}

/// Best rational approximation `p/q` of `x` with `1 ≤ q ≤ max_den`, reduced.
///
/// Uses continued-fraction convergents and the final semiconvergent, so the
/// result minimises `|p/q − x|` over all admissible denominators.
pub fn rationalize(x: f64, max_den: i64) -> (i64, i64) {
    let max_den = max_den.max(1);
    if !x.is_finite() || x == 0.0 {
        return (0, 1);
    }
    let sign = if x < 0.0 { -1 } else { 1 };
    let target = x.abs();

    // (p_{k-2}, q_{k-2}) and (p_{k-1}, q_{k-1})
    let (mut p0, mut q0, mut p1, mut q1): (i64, i64, i64, i64) = (0, 1, 1, 0);
    let mut v = target;
    loop {
        let a = v.floor();
        if a > i64::MAX as f64 / 4.0 {
            break;
        }
        let a = a as i64;
        let q2 = a.saturating_mul(q1).saturating_add(q0);
        if q2 > max_den {
            // semiconvergent (p0 + k p1)/(q0 + k q1) with the largest admissible k
            if q1 > 0 {
                let k = (max_den - q0) / q1;
                let (ps, qs) = (p0 + k * p1, q0 + k * q1);
                let err_semi = (ps as f64 / qs as f64 - target).abs();
                let err_conv = (p1 as f64 / q1 as f64 - target).abs();
                if qs >= 1 && err_semi < err_conv {
                    p1 = ps;
                    q1 = qs;
                }
            }
            break;
        }
        let p2 = a.saturating_mul(p1).saturating_add(p0);
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let approx = p1 as f64 / q1 as f64;
        if (approx - target).abs() <= 1e-13 * target.max(1.0) {
            break;
        }
        let frac = v - a as f64;
        if frac <= 0.0 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        // target exceeded every admissible convergent before the first step
        return (sign * target.round() as i64, 1);
    }
    let g = p1.gcd(&q1).max(1);
    (sign * p1 / g, q1 / g)
}

/// Converts a real order to an exact rational, failing when no fraction with
/// denominator ≤ [`DEFAULT_MAX_DEN`] reproduces it to 1e-9.
pub fn order_from_f64(x: f64) -> Result<Order> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("order {x} is not finite")));
    }
    let (p, q) = rationalize(x, DEFAULT_MAX_DEN);
    if (p as f64 / q as f64 - x).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(Error::IncommensurateOrder {
            order: format!("{x}"),
            base: format!("1/{DEFAULT_MAX_DEN} grid"),
        });
    }
    Ok(Order::new(p, q))
}

/// Grünwald–Letnikov binomial weights `c_j = (−1)^j binom(α, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlCoeffs {
    pub alpha: f64,
    pub coeffs: Vec<f64>,
}

/// Returns `c_0 … c_count` via `c_j = c_{j−1}(1 − (α+1)/j)`.
pub fn gl_coefficients(alpha: f64, count: usize) -> Result<GlCoeffs> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("GL order {alpha} is not finite")));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("GL coefficient count must be ≥ 1".into()));
    }
    let mut coeffs = Vec::with_capacity(count + 1);
    coeffs.push(1.0);
    for j in 1..=count {
        let prev = coeffs[j - 1];
        coeffs.push(prev * (1.0 - (alpha + 1.0) / j as f64));
    }
    Ok(GlCoeffs { alpha, coeffs })
}

/// One `coeff · s^order` term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub order: Order,
}

/// `(jω)^α` on the principal branch.
pub fn jw_pow(omega: f64, order: Order) -> Complex64 {
    if order.is_zero() {
        return Complex64::new(1.0, 0.0);
    }
    if order.is_integer() {
        let k = order.to_integer();
        let mag = omega.powi(k as i32);
        return match k.rem_euclid(4) {
            0 => Complex64::new(mag, 0.0),
            1 => Complex64::new(0.0, mag),
            2 => Complex64::new(-mag, 0.0),
            _ => Complex64::new(0.0, -mag),
        };
    }
    let a = order_to_f64(order);
    Complex64::from_polar(omega.powf(a), a * FRAC_PI_2)
}

/// Sum of `c_k s^{α_k}` with distinct orders in strictly descending order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FracPoly {
    terms: Vec<Term>,
}

impl FracPoly {
    /// Builds a polynomial from `(coeff, order)` pairs, merging like terms.
    pub fn new<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Order)>,
    {
        let mut out = Vec::new();
        for (coeff, order) in terms {
            if !coeff.is_finite() {
                return Err(Error::InvalidArgument(format!("coefficient {coeff} is not finite")));
            }
            if order < Order::zero() {
                return Err(Error::InvalidArgument(format!("negative order {order}")));
            }
            out.push(Term { coeff, order });
        }
        Ok(Self::normalized(out))
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, Order::zero())
    }

    /// `c · s^order`. Panics on a negative order.
    pub fn monomial(c: f64, order: Order) -> Self {
        assert!(order >= Order::zero(), "negative order {order}");
        Self::normalized(vec![Term { coeff: c, order }])
    }

    /// `s^order`.
    pub fn s_pow(order: Order) -> Self {
        Self::monomial(1.0, order)
    }

    /// Integer-order polynomial from ascending coefficients `c_0 + c_1 s + …`.
    pub fn from_ascending(coeffs: &[f64]) -> Self {
        Self::normalized(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| Term {
                    coeff: c,
                    order: Order::from_integer(k as i64),
                })
                .collect(),
        )
    }

    fn normalized(mut terms: Vec<Term>) -> Self {
        terms.sort_by_key(|t| std::cmp::Reverse(t.order));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        let mut i = 0;
        while i < terms.len() {
            let order = terms[i].order;
            let mut sum = 0.0;
            let mut abs_sum = 0.0;
            while i < terms.len() && terms[i].order == order {
                sum += terms[i].coeff;
                abs_sum += terms[i].coeff.abs();
                i += 1;
            }
            if sum != 0.0 && sum.abs() > MERGE_TOL * abs_sum {
                out.push(Term { coeff: sum, order });
            }
        }
        Self { terms: out }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest order present (zero for the zero polynomial).
    pub fn degree(&self) -> Order {
        self.terms.first().map(|t| t.order).unwrap_or_else(Order::zero)
    }

    /// Lowest order present (zero for the zero polynomial).
    pub fn lowest_order(&self) -> Order {
        self.terms.last().map(|t| t.order).unwrap_or_else(Order::zero)
    }

    pub fn leading_coeff(&self) -> f64 {
        self.terms.first().map(|t| t.coeff).unwrap_or(0.0)
    }

    /// Coefficient of `s^order` (zero when absent).
    pub fn coeff(&self, order: Order) -> f64 {
        self.terms
            .iter()
            .find(|t| t.order == order)
            .map(|t| t.coeff)
            .unwrap_or(0.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::normalized(
            self.terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * c,
                    order: t.order,
                })
                .collect(),
        )
    }

    /// Multiplies by `s^order`.
    pub fn shift(&self, order: Order) -> Self {
        Self::normalized(
            self.terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff,
                    order: t.order + order,
                })
                .collect(),
        )
    }

    /// Divides by `s^order`; every term must have order ≥ `order`.
    pub fn unshift(&self, order: Order) -> Self {
        assert!(self.is_zero() || self.lowest_order() >= order);
        Self::normalized(
            self.terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff,
                    order: t.order - order,
                })
                .collect(),
        )
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let p = if t.order.is_integer() {
                    s.powi(t.order.to_integer() as i32)
                } else {
                    s.powf(order_to_f64(t.order))
                };
                p * t.coeff
            })
            .sum()
    }

    pub fn eval_jw(&self, omega: f64) -> Complex64 {
        self.terms.iter().map(|t| jw_pow(omega, t.order) * t.coeff).sum()
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.coeff * x.powf(order_to_f64(t.order))).sum()
    }

    /// `Σ |c_k| ω^{α_k}`, the scale against which a value at `jω` is judged zero.
    pub fn magnitude_bound(&self, omega: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff.abs() * omega.powf(order_to_f64(t.order)))
            .sum()
    }

    /// Integer power.
    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(), |acc, _| &acc * self)
    }

    /// Denominators of every order, for commensurate-base computations.
    pub fn order_denominators(&self) -> Vec<i64> {
        self.terms.iter().map(|t| *t.order.denom()).collect()
    }
}

impl fmt::Display for FracPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let c = if i == 0 {
                t.coeff
            } else {
                write!(f, " {} ", if t.coeff < 0.0 { '-' } else { '+' })?;
                t.coeff.abs()
            };
            if t.order.is_zero() {
                write!(f, "{c}")?;
            } else if c == 1.0 {
                write!(f, "s^{}", t.order)?;
            } else {
                write!(f, "{c}·s^{}", t.order)?;
            }
        }
        Ok(())
    }
}

impl Add for &FracPoly {
    type Output = FracPoly;
    fn add(self, rhs: &FracPoly) -> FracPoly {
        FracPoly::normalized(self.terms.iter().chain(rhs.terms.iter()).copied().collect())
    }
}

impl Sub for &FracPoly {
    type Output = FracPoly;
    fn sub(self, rhs: &FracPoly) -> FracPoly {
        self + &(-rhs)
    }
}

impl Neg for &FracPoly {
    type Output = FracPoly;
    fn neg(self) -> FracPoly {
        self.scale(-1.0)
    }
}

impl Mul for &FracPoly {
    type Output = FracPoly;
    fn mul(self, rhs: &FracPoly) -> FracPoly {
        let mut out = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                out.push(Term {
                    coeff: a.coeff * b.coeff,
                    order: a.order + b.order,
                });
            }
        }
        FracPoly::normalized(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for FracPoly {
            type Output = FracPoly;
            fn $m(self, rhs: FracPoly) -> FracPoly {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&FracPoly> for FracPoly {
            type Output = FracPoly;
            fn $m(self, rhs: &FracPoly) -> FracPoly {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for FracPoly {
    type Output = FracPoly;
    fn neg(self) -> FracPoly {
        -&self
    }
}

/// Ratio of two fractional polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct FracRational {
    num: FracPoly,
    den: FracPoly,
}

impl FracRational {
    pub fn new(num: FracPoly, den: FracPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DegenerateSystem("zero denominator".into()));
        }
        Ok(Self { num, den }.cancel_monomial())
    }

    pub fn from_poly(p: FracPoly) -> Self {
        Self {
            num: p,
            den: FracPoly::one(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_poly(FracPoly::constant(c))
    }

    pub fn num(&self) -> &FracPoly {
        &self.num
    }

    pub fn den(&self) -> &FracPoly {
        &self.den
    }

    /// Removes a common `s^k` factor shared by numerator and denominator.
    fn cancel_monomial(self) -> Self {
        if self.num.is_zero() {
            return Self {
                num: self.num,
                den: self.den,
            };
        }
        let k = self.num.lowest_order().min(self.den.lowest_order());
        if k.is_zero() {
            return self;
        }
        Self {
            num: self.num.unshift(k),
            den: self.den.unshift(k),
        }
    }

    /// Value at `s = jω`, or `None` when the denominator vanishes there.
    pub fn eval_jw(&self, omega: f64) -> Option<Complex64> {
        let d = self.den.eval_jw(omega);
        let bound = self.den.magnitude_bound(omega);
        if !(d.norm() > 1e-14 * bound) || !d.norm().is_finite() {
            return None;
        }
        Some(self.num.eval_jw(omega) / d)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, rhs: &FracRational) -> FracRational {
        Self {
            num: &self.num * &rhs.num,
            den: &self.den * &rhs.den,
        }
        .cancel_monomial()
    }

    pub fn add(&self, rhs: &FracRational) -> FracRational {
        let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        Self {
            num,
            den: &self.den * &rhs.den,
        }
        .cancel_monomial()
    }

    pub fn inv(&self) -> Result<FracRational> {
        FracRational::new(self.den.clone(), self.num.clone())
    }

    /// Negative-feedback closure `g / (1 + g·h)`.
    pub fn feedback(&self, h: &FracRational) -> Result<FracRational> {
        let num = &self.num * &h.den;
        let den = &(&self.den * &h.den) + &(&self.num * &h.num);
        if den.is_zero() {
            return Err(Error::DegenerateSystem("1 + g·h is identically zero".into()));
        }
        FracRational::new(num, den)
    }
}

impl fmt::Display for FracRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// `g / (1 + g·h)`.
pub fn fr_feedback(g: &FracRational, h: &FracRational) -> Result<FracRational> {
    g.feedback(h)
}

/// Pointwise `g(jω)`; entries are `None` where the denominator vanishes.
pub fn freq_response(g: &FracRational, omegas: &[f64]) -> Result<Vec<Option<Complex64>>> {
    if omegas.is_empty() {
        return Err(Error::InvalidArgument("empty frequency grid".into()));
    }
    if let Some(w) = omegas.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!("frequency {w} is not positive")));
    }
    Ok(omegas.iter().map(|&w| g.eval_jw(w)).collect())
}

/// Rewrites `p(s)` as an integer polynomial in `w = s^λ`.
///
/// Returns coefficients in descending degree; the leading entry is nonzero.
pub fn commensurate(p: &FracPoly, lambda: Order) -> Result<Vec<f64>> {
    if lambda <= Order::zero() {
        return Err(Error::InvalidArgument(format!("base order {lambda} must be positive")));
    }
    if p.is_zero() {
        return Ok(vec![0.0]);
    }
    let mut degrees = Vec::with_capacity(p.terms().len());
    for t in p.terms() {
        let k = t.order / lambda;
        if !k.is_integer() {
            return Err(Error::IncommensurateOrder {
                order: t.order.to_string(),
                base: lambda.to_string(),
            });
        }
        degrees.push(k.to_integer() as usize);
    }
    let deg = degrees[0];
    let mut coeffs = vec![0.0; deg + 1];
    for (t, &k) in p.terms().iter().zip(&degrees) {
        coeffs[deg - k] = t.coeff;
    }
    Ok(coeffs)
}

/// `1/lcm` of every order denominator in `p`.
pub fn lcm_base(orders: impl IntoIterator<Item = Order>) -> Order {
    let l = orders.into_iter().fold(1i64, |acc, o| acc.lcm(o.denom()));
    Order::new(1, l)
}
