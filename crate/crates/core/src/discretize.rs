//! Digital realizations of `s^α`.
//!
//! Two constructors are provided. [`gl_fir`] is the truncated
//! Grünwald–Letnikov FIR, exact up to memory truncation and used as the
//! reference. [`iir_fit`] is a low-order IIR fitted to `(jω)^α` over a band.
//!
//! Filters are stored as a gain times a cascade of sections. A fitted filter
//! of order 6 with poles close to `z = 1` loses most of its accuracy when the
//! sections are multiplied out, so the expanded `b`/`a` vectors are only
//! produced on request for export.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fracnum::gl_coefficients;

/// Default short-memory length for GL oracle filters.
pub const DEFAULT_MEMORY_LEN: usize = 2048;

/// One direct-form section with its own delay lines.
#[derive(Clone, Debug)]
struct Section {
    b: Vec<f64>,
    a: Vec<f64>,
    // input history, newest first, mirrored so a contiguous slice is always available
    xh: Vec<f64>,
    xpos: usize,
    yh: Vec<f64>,
    ypos: usize,
}

impl Section {
    fn new(b: Vec<f64>, a: Vec<f64>) -> Self {
        let nx = b.len();
        let ny = a.len() - 1;
        Section {
            b,
            a,
            xh: vec![0.0; 2 * nx],
            xpos: 0,
            yh: vec![0.0; 2 * ny],
            ypos: 0,
        }
    }

    fn reset(&mut self) {
        self.xh.iter_mut().for_each(|v| *v = 0.0);
        self.yh.iter_mut().for_each(|v| *v = 0.0);
        self.xpos = 0;
        self.ypos = 0;
    }

    /// Output contribution of everything except the current input.
    fn free(&self) -> f64 {
        let nx = self.b.len();
        let ny = self.a.len() - 1;
        let mut acc = 0.0;
        if nx > 1 {
            // after the next push the current sample sits at xpos-1; older ones follow
            let past = &self.xh[self.xpos..self.xpos + nx - 1];
            acc += self.b[1..].iter().zip(past).map(|(b, x)| b * x).sum::<f64>();
        }
        if ny > 0 {
            let past = &self.yh[self.ypos..self.ypos + ny];
            acc -= self.a[1..].iter().zip(past).map(|(a, y)| a * y).sum::<f64>();
        }
        acc
    }

    fn push(buf: &mut [f64], pos: &mut usize, v: f64) {
        let n = buf.len() / 2;
        if n == 0 {
            return;
        }
        *pos = (*pos + n - 1) % n;
        buf[*pos] = v;
        buf[*pos + n] = v;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.free();
        // the input line keeps nx samples; the oldest drops out on push
        Self::push(&mut self.xh, &mut self.xpos, x);
        Self::push(&mut self.yh, &mut self.ypos, y);
        y
    }

    fn response(&self, w: Complex64) -> Complex64 {
        let eval = |c: &[f64]| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * w + v);
        eval(&self.b) / eval(&self.a)
    }
}

/// Discrete-time filter `gain · Π B_i(z⁻¹)/A_i(z⁻¹)` with `a_0 = 1` per section.
#[derive(Clone, Debug)]
pub struct DigitalFilter {
    gain: f64,
    sections: Vec<Section>,
    fs: f64,
    poisoned: bool,
}

impl DigitalFilter {
    /// Single-section filter from raw coefficients; normalizes `a_0` to 1.
    pub fn from_coeffs(b: Vec<f64>, a: Vec<f64>, fs: f64) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::InvalidArgument("coefficient lists must be non-empty".into()));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample rate {fs} must be positive")));
        }
        if b.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite filter coefficient".into()));
        }
        let a0 = a[0];
        if a0 == 0.0 {
            return Err(Error::InvalidArgument("a_0 must be non-zero".into()));
        }
        let b = b.into_iter().map(|v| v / a0).collect();
        let a = a.into_iter().map(|v| v / a0).collect();
        Ok(DigitalFilter {
            gain: 1.0,
            sections: vec![Section::new(b, a)],
            fs,
            poisoned: false,
        })
    }

    /// Identity filter at `fs`.
    pub fn identity(fs: f64) -> Result<Self> {
        Self::from_coeffs(vec![1.0], vec![1.0], fs)
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// Number of cascaded sections.
    pub fn section_count(&self) -> usize {
        self.sections.len()
    }

    /// Expanded numerator, gain included.
    pub fn b(&self) -> Vec<f64> {
        let mut out = vec![self.gain];
        for s in &self.sections {
            out = poly_mul(&out, &s.b);
        }
        out
    }

    /// Expanded denominator with `a_0 = 1`.
    pub fn a(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        for s in &self.sections {
            out = poly_mul(&out, &s.a);
        }
        out
    }

    /// Poles of every section.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for s in &self.sections {
            // roots of z^k + a_1 z^{k−1} + … + a_k
            if s.a.len() > 1 {
                if let Ok(r) = crate::polyroots::roots(&s.a) {
                    out.extend(r.roots);
                }
            }
        }
        out
    }

    /// Frequency response at `omega` rad/s.
    pub fn response(&self, omega: f64) -> Complex64 {
        let w = Complex64::from_polar(1.0, -omega / self.fs);
        self.sections
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, s| acc * s.response(w))
    }

    /// Returns `(g, f)` such that the next output for input `u` is `g·u + f`.
    pub fn peek(&self) -> (f64, f64) {
        let (mut g, mut f) = (1.0, 0.0);
        for s in &self.sections {
            f = s.b[0] * f + s.free();
            g *= s.b[0];
        }
        (self.gain * g, self.gain * f)
    }

    /// Advances one sample.
    pub fn step(&mut self, u: f64) -> Result<f64> {
        if self.poisoned {
            return Err(Error::PoisonedState);
        }
        if !u.is_finite() {
            self.poisoned = true;
            return Err(Error::PoisonedState);
        }
        let mut x = u;
        for s in &mut self.sections {
            x = s.step(x);
        }
        Ok(self.gain * x)
    }

    /// Clears the delay lines and the poisoned flag.
    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(Section::reset);
        self.poisoned = false;
    }

    /// Long-format CSV, `vector,index,value`, numerator rows first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vector,index,value\n");
        for (name, v) in [("b", self.b()), ("a", self.a())] {
            for (i, c) in v.iter().enumerate() {
                let _ = writeln!(out, "{name},{i},{}", crate::report::fmt_g(*c));
            }
        }
        out
    }
}

/// Advances `f` by one sample.
pub fn filter_step(f: &mut DigitalFilter, u: f64) -> Result<f64> {
    f.step(u)
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Truncated GL FIR for `s^α` with `memory_len` taps.
pub fn gl_fir(alpha: f64, fs: f64, memory_len: usize) -> Result<DigitalFilter> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample rate {fs} must be positive")));
    }
    if memory_len < 2 {
        return Err(Error::InvalidArgument("memory_len must be at least 2".into()));
    }
    let c = gl_coefficients(alpha, memory_len - 1)?;
    let scale = fs.powf(alpha);
    let b = c.coeffs.iter().map(|v| v * scale).collect();
    DigitalFilter::from_coeffs(b, vec![1.0], fs)
}

/// Tuning knobs for [`iir_fit_with`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Grid density on the log-frequency axis.
    pub points_per_decade: usize,
    /// Largest acceptable RMS of the complex log residual.
    pub max_rms: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            points_per_decade: 40,
            max_rms: 0.25,
            max_iter: 400,
        }
    }
}

/// Default fit band `(0.02π, 0.4π·fs)` rad/s.
pub fn default_band(fs: f64) -> (f64, f64) {
    (0.02 * PI, 0.4 * PI * fs)
}

/// Fitted IIR of `order` first-order sections approximating `(jω)^α` on `band`.
pub fn iir_fit(alpha: f64, fs: f64, order: usize, band: (f64, f64)) -> Result<DigitalFilter> {
    iir_fit_with(alpha, fs, order, band, &FitOptions::default())
}

/// Outcome of a fit with its residual diagnostics.
#[derive(Clone, Debug)]
pub struct FitReport {
    pub rms: f64,
    pub max_mag_db: f64,
    pub max_phase_deg: f64,
}

/// Worst magnitude and phase deviation from `(jω)^α` on a log grid over `band`.
pub fn deviation_from_ideal(f: &DigitalFilter, alpha: f64, band: (f64, f64), points: usize) -> FitReport {
    let grid = log_grid(band.0, band.1, points.max(2));
    let mut sum = 0.0;
    let (mut mag, mut ph) = (0.0f64, 0.0f64);
    for &w in &grid {
        let r = f.response(w).ln() - Complex64::new(alpha * w.ln(), alpha * FRAC_PI_2);
        // bring the phase error into (−π, π]
        let dph = (r.im + PI).rem_euclid(2.0 * PI) - PI;
        sum += r.re * r.re + dph * dph;
        mag = mag.max(r.re.abs() * 20.0 / std::f64::consts::LN_10);
        ph = ph.max(dph.abs().to_degrees());
    }
    FitReport {
        rms: (sum / grid.len() as f64).sqrt(),
        max_mag_db: mag,
        max_phase_deg: ph,
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

struct Fit<'a> {
    h: f64,
    n: usize,
    grid: &'a [f64],
    target: &'a [Complex64],
    prior: Option<(&'a [f64], f64)>,
}

impl Fit<'_> {
    // p = [ln K, φ_1..φ_n, θ_1..θ_n]
    fn residual(&self, p: &[f64], jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
        let g = self.grid.len();
        let extra = if self.prior.is_some() { 2 * self.n } else { 0 };
        let mut r = DVector::zeros(2 * g + extra);
        let mut jac = jac;
        for (k, &om) in self.grid.iter().enumerate() {
            let w = Complex64::from_polar(1.0, -om * self.h);
            let mut lh = Complex64::new(p[0], 0.0);
            for i in 0..self.n {
                let ez = p[1 + i].exp();
                let ep = p[1 + self.n + i].exp();
                let zeta = (-self.h * ez).exp();
                let pole = (-self.h * ep).exp();
                let dz = Complex64::new(1.0, 0.0) - w * zeta;
                let dp = Complex64::new(1.0, 0.0) - w * pole;
                lh += dz.ln() - dp.ln();
                if let Some(j) = jac.as_deref_mut() {
                    let gz = w * zeta * self.h * ez / dz;
                    let gp = -(w * pole * self.h * ep / dp);
                    j[(2 * k, 1 + i)] = gz.re;
                    j[(2 * k + 1, 1 + i)] = gz.im;
                    j[(2 * k, 1 + self.n + i)] = gp.re;
                    j[(2 * k + 1, 1 + self.n + i)] = gp.im;
                }
            }
            let d = lh - self.target[k];
            r[2 * k] = d.re;
            r[2 * k + 1] = d.im;
            if let Some(j) = jac.as_deref_mut() {
                j[(2 * k, 0)] = 1.0;
                j[(2 * k + 1, 0)] = 0.0;
            }
        }
        if let Some((p0, weight)) = self.prior {
            let sw = weight.sqrt();
            for i in 0..2 * self.n {
                r[2 * g + i] = sw * (p[1 + i] - p0[1 + i]);
                if let Some(j) = jac.as_deref_mut() {
                    j[(2 * g + i, 1 + i)] = sw;
                }
            }
        }
        r
    }

    fn levenberg_marquardt(&self, p0: &[f64], max_iter: usize) -> Vec<f64> {
        let np = p0.len();
        let rows = 2 * self.grid.len() + if self.prior.is_some() { 2 * self.n } else { 0 };
        let mut p = p0.to_vec();
        let mut jac = DMatrix::zeros(rows, np);
        let mut r = self.residual(&p, Some(&mut jac));
        let mut cost = r.norm_squared();
        let mut mu = 1e-3;
        for _ in 0..max_iter {
            let jt = jac.transpose();
            let a = &jt * &jac;
            let grad = &jt * &r;
            let mut improved = false;
            while mu < 1e12 {
                let mut am = a.clone();
                for i in 0..np {
                    am[(i, i)] += mu * a[(i, i)].max(1e-12);
                }
                let Some(ch) = am.cholesky() else {
                    mu *= 4.0;
                    continue;
                };
                let delta = ch.solve(&(-&grad));
                let cand: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
                let rc = self.residual(&cand, None);
                let cc = rc.norm_squared();
                if cc.is_finite() && cc < cost {
                    let rel = (cost - cc) / cost.max(f64::MIN_POSITIVE);
                    p = cand;
                    r = self.residual(&p, Some(&mut jac));
                    cost = cc;
                    mu = (mu / 3.0).max(1e-12);
                    improved = rel > 1e-12;
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        p
    }
}

/// Initial corners: integer part as differentiator/integrator sections, the
/// fractional remainder as an Oustaloup distribution over a widened band.
fn initial_guess(alpha: f64, order: usize, band: (f64, f64)) -> Vec<f64> {
    let k = alpha.floor();
    let f = alpha - k;
    let ki = (k.abs() as usize).min(order);
    let (lo, hi) = band;
    let mut zeros = Vec::with_capacity(order);
    let mut poles = Vec::with_capacity(order);
    for _ in 0..ki {
        let (slow, fast) = (lo / 100.0, 20.0 * hi);
        if k > 0.0 {
            zeros.push(slow);
            poles.push(fast);
        } else {
            zeros.push(fast);
            poles.push(slow);
        }
    }
    let m = order - ki;
    let (wb, wh) = (lo / 3.0, hi * 3.0);
    let ratio = wh / wb;
    for i in 0..m {
        let i = i as f64;
        let m = m as f64;
        if f > 0.0 {
            zeros.push(wb * ratio.powf((i + (1.0 - f) / 2.0) / m));
            poles.push(wb * ratio.powf((i + (1.0 + f) / 2.0) / m));
        } else {
            let c = wb * ratio.powf((i + 0.5) / m);
            zeros.push(c);
            poles.push(c * 1.01);
        }
    }
    let mut p = vec![0.0];
    p.extend(zeros.iter().map(|v| v.ln()));
    p.extend(poles.iter().map(|v| v.ln()));
    p
}

/// [`iir_fit`] with explicit options.
pub fn iir_fit_with(alpha: f64, fs: f64, order: usize, band: (f64, f64), opts: &FitOptions) -> Result<DigitalFilter> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("order {alpha} is not finite")));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample rate {fs} must be positive")));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("filter order must be at least 1".into()));
    }
    let (lo, hi) = band;
    if !(lo > 0.0 && lo < hi && hi < PI * fs) {
        return Err(Error::InvalidArgument(format!(
            "band ({lo}, {hi}) must satisfy 0 < lo < hi < π·fs"
        )));
    }
    if alpha == 0.0 {
        return DigitalFilter::identity(fs);
    }

    let h = 1.0 / fs;
    let decades = (hi / lo).log10();
    let npts = ((decades * opts.points_per_decade as f64).ceil() as usize).max(4 * order + 2);
    let grid = log_grid(lo, hi, npts);
    let target: Vec<Complex64> = grid
        .iter()
        .map(|w| Complex64::new(alpha * w.ln(), alpha * FRAC_PI_2))
        .collect();

    let mut p0 = initial_guess(alpha, order, band);
    let base = Fit {
        h,
        n: order,
        grid: &grid,
        target: &target,
        prior: None,
    };
    // least-squares gain for the initial corners
    let r0 = base.residual(&p0, None);
    p0[0] = -(0..npts).map(|k| r0[2 * k]).sum::<f64>() / npts as f64;

    let mut p = base.levenberg_marquardt(&p0, opts.max_iter);
    if !stable_params(&p, order, h) {
        let reg = Fit {
            prior: Some((&p0, 1e-2)),
            ..base
        };
        p = reg.levenberg_marquardt(&p0, opts.max_iter);
    }
    if !stable_params(&p, order, h) {
        return Err(Error::FitFailure {
            residual: f64::INFINITY,
            threshold: opts.max_rms,
        });
    }

    let r = base.residual(&p, None);
    let rms = (r.norm_squared() / npts as f64).sqrt();
    if !(rms <= opts.max_rms) {
        return Err(Error::FitFailure {
            residual: rms,
            threshold: opts.max_rms,
        });
    }

    let sections = (0..order)
        .map(|i| {
            let zeta = (-h * p[1 + i].exp()).exp();
            let pole = (-h * p[1 + order + i].exp()).exp();
            Section::new(vec![1.0, -zeta], vec![1.0, -pole])
        })
        .collect();
    Ok(DigitalFilter {
        gain: p[0].exp(),
        sections,
        fs,
        poisoned: false,
    })
}

fn stable_params(p: &[f64], n: usize, h: f64) -> bool {
    p.iter().all(|v| v.is_finite())
        && (0..n).all(|i| {
            let pole = (-h * p[1 + n + i].exp()).exp();
            pole < 1.0 - 1e-13
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gl_fir_examples() {
        assert_eq!(gl_fir(1.0, 1.0, 2).unwrap().b(), vec![1.0, -1.0]);
        let id = gl_fir(0.0, 50.0, 5).unwrap().b();
        assert_eq!(id, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let half = gl_fir(0.5, 1.0, 4).unwrap().b();
        for (x, y) in half.iter().zip([1.0, -0.5, -0.125, -0.0625]) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(gl_fir(0.5, 0.0, 4).is_err());
        assert!(gl_fir(0.5, 1.0, 1).is_err());
    }

    #[test]
    fn step_examples() {
        let mut id = DigitalFilter::identity(1.0).unwrap();
        assert_eq!(filter_step(&mut id, 3.7).unwrap(), 3.7);
        let mut d = gl_fir(1.0, 1.0, 2).unwrap();
        let out: Vec<f64> = [1.0, 1.0, 1.0].iter().map(|&u| d.step(u).unwrap()).collect();
        assert_eq!(out, vec![1.0, 0.0, 0.0]);
        let mut g = gl_fir(0.5, 1.0, 64).unwrap();
        let b = g.b();
        for (k, bk) in b.iter().enumerate() {
            let u = if k == 0 { 1.0 } else { 0.0 };
            assert_eq!(g.step(u).unwrap(), *bk);
        }
    }

    #[test]
    fn poisoning_and_reset() {
        let mut f = gl_fir(0.5, 1.0, 8).unwrap();
        f.step(1.0).unwrap();
        assert_eq!(f.step(f64::NAN), Err(Error::PoisonedState));
        assert_eq!(f.step(1.0), Err(Error::PoisonedState));
        f.reset();
        assert_eq!(f.step(1.0).unwrap(), 1.0);
    }

    #[test]
    fn peek_predicts_step() {
        let mut f = iir_fit(0.8, 8000.0, 6, (1.0, 2513.0)).unwrap();
        for k in 0..50 {
            let u = (k as f64 * 0.37).sin();
            let (g, fr) = f.peek();
            let y = f.step(u).unwrap();
            assert!((g * u + fr - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn identity_fit_for_zero_order() {
        let f = iir_fit(0.0, 1000.0, 5, (1.0, 100.0)).unwrap();
        assert_eq!(f.b(), vec![1.0]);
        assert_eq!(f.a(), vec![1.0]);
    }

    #[test]
    fn fit_08_matches_ideal() {
        let f = iir_fit(0.8, 8000.0, 6, (1.0, 2513.0)).unwrap();
        let rep = deviation_from_ideal(&f, 0.8, (1.0, 2513.0), 400);
        assert!(rep.max_mag_db <= 1.0 && rep.max_phase_deg <= 3.0, "{rep:?}");
        assert!(f.poles().iter().all(|p| p.norm() < 1.0));
    }

    #[test]
    fn fit_integrator() {
        let f = iir_fit(-1.0, 100.0, 2, (0.1, 10.0)).unwrap();
        for w in log_grid(0.1, 10.0, 50) {
            let want = 1.0 / w;
            let db = 20.0 * (f.response(w).norm() / want).log10();
            assert!(db.abs() <= 0.5, "ω={w}: {db} dB");
        }
    }

    #[test]
    fn fit_rejects_bad_band() {
        assert!(iir_fit(0.5, 100.0, 3, (0.0, 10.0)).is_err());
        assert!(iir_fit(0.5, 100.0, 3, (10.0, 1.0)).is_err());
        assert!(iir_fit(0.5, 100.0, 3, (1.0, 400.0)).is_err());
        assert!(iir_fit(0.5, 100.0, 0, (1.0, 10.0)).is_err());
    }

    #[test]
    fn fit_failure_reports_residual() {
        // one section cannot hold a half-order slope over nine decades
        let opts = FitOptions {
            max_rms: 1e-3,
            ..FitOptions::default()
        };
        match iir_fit_with(0.5, 1e6, 1, (1e-3, 1e6), &opts) {
            Err(Error::FitFailure { residual, threshold }) => {
                assert!(residual > threshold);
            }
            other => panic!("expected fit failure, got {other:?}"),
        }
    }

    #[test]
    fn expanded_coefficients_reproduce_cascade() {
        let f = iir_fit(1.2, 1000.0, 5, (1.0, 300.0)).unwrap();
        let flat = DigitalFilter::from_coeffs(f.b(), f.a(), 1000.0).unwrap();
        // the expanded form drifts near DC where the poles crowd z = 1
        for w in [1.0, 10.0, 100.0, 300.0] {
            let (x, y) = (f.response(w), flat.response(w));
            assert!((x - y).norm() <= 1e-4 * x.norm(), "ω={w}");
        }
        let csv = f.to_csv();
        assert!(csv.starts_with("vector,index,value\nb,0,"));
        assert_eq!(csv.lines().count(), 1 + 6 + 6);
    }

    fn smooth(n: usize, h: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 * h;
                t * t * (-t).exp()
            })
            .collect()
    }

    fn run(f: &mut DigitalFilter, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&x| f.step(x).unwrap()).collect()
    }

    #[test]
    fn gl_semigroup_error_shrinks_with_memory() {
        let fs = 100.0;
        let u = smooth(3000, 1.0 / fs);
        let mut errs = Vec::new();
        for mem in [64, 256, 1024] {
            let a = run(&mut gl_fir(0.3, fs, mem).unwrap(), &u);
            let ab = run(&mut gl_fir(0.4, fs, mem).unwrap(), &a);
            let direct = run(&mut gl_fir(0.7, fs, mem).unwrap(), &u);
            let e = ab.iter().zip(&direct).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    proptest! {
        #[test]
        fn fir_step_equals_convolution(
            alpha in -1.5f64..1.5,
            mem in 2usize..40,
            u in proptest::collection::vec(-10.0f64..10.0, 1..120),
        ) {
            let mut f = gl_fir(alpha, 10.0, mem).unwrap();
            let b = f.b();
            let y = run(&mut f, &u);
            for k in 0..u.len() {
                let conv: f64 = (0..b.len().min(k + 1)).map(|j| b[j] * u[k - j]).sum();
                prop_assert!((y[k] - conv).abs() <= 1e-12 * (1.0 + conv.abs()));
            }
        }
    }
}
