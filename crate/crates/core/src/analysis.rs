//! Frequency-domain diagnostics and step-response metrics.

use std::fmt::Write as _;

use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::adrc::SimResult;
use crate::error::{Error, Result};
use crate::fracnum::{jw_pow, FracPoly, FracRational, Order};
use crate::plant::DisturbanceProfile;
use crate::report::fmt_g;

/// Log-spaced frequency axis in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqGrid {
    pub omegas: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub points_per_decade: usize,
}

impl FreqGrid {
    pub fn new(lo: f64, hi: f64, points_per_decade: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid frequency range ({lo}, {hi})")));
        }
        if points_per_decade == 0 {
            return Err(Error::InvalidArgument("points per decade must be positive".into()));
        }
        let decades = (hi / lo).log10();
        let n = (decades * points_per_decade as f64).round().max(1.0) as usize;
        let omegas = (0..=n)
            .map(|k| lo * 10f64.powf(decades * k as f64 / n as f64))
            .collect();
        Ok(FreqGrid {
            omegas,
            lo,
            hi,
            points_per_decade,
        })
    }

    /// `[0.1, 1e4]` rad/s at 100 points per decade.
    pub fn default_mse() -> Self {
        Self::new(0.1, 1e4, 100).expect("valid default grid")
    }
}

/// Phase of `g` as `ω → 0`, in degrees.
fn low_frequency_phase(g: &FracRational) -> f64 {
    let lowest = |p: &FracPoly| p.terms().last().copied();
    match (lowest(g.num()), lowest(g.den())) {
        (Some(n), Some(d)) => {
            let k = (n.order - d.order).to_f64().unwrap_or(0.0);
            let sign = if n.coeff / d.coeff < 0.0 { -180.0 } else { 0.0 };
            k * 90.0 + sign
        }
        _ => 0.0,
    }
}

fn wrap_deg(x: f64) -> f64 {
    let mut y = x % 360.0;
    if y > 180.0 {
        y -= 360.0;
    } else if y <= -180.0 {
        y += 360.0;
    }
    y
}

/// Bode data point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodePoint {
    pub omega: f64,
    pub mag_db: f64,
    /// Continuous phase anchored at the low-frequency asymptote.
    pub phase_deg: f64,
}

/// Magnitude and unwrapped phase on `omegas`; undefined points are skipped.
pub fn bode(g: &FracRational, omegas: &[f64]) -> Vec<BodePoint> {
    let mut out: Vec<BodePoint> = Vec::with_capacity(omegas.len());
    let mut prev_raw = 0.0;
    let mut prev = low_frequency_phase(g);
    for &w in omegas {
        let Some(v) = g.eval_jw(w).filter(|v| v.is_finite() && v.norm() > 0.0) else {
            continue;
        };
        let raw = v.arg().to_degrees();
        let phase = if out.is_empty() {
            prev + wrap_deg(raw - prev)
        } else {
            prev + wrap_deg(raw - prev_raw)
        };
        prev_raw = raw;
        prev = phase;
        out.push(BodePoint {
            omega: w,
            mag_db: 20.0 * v.norm().log10(),
            phase_deg: phase,
        });
    }
    out
}

/// `omega,mag_db,phase_deg`.
pub fn bode_csv(points: &[BodePoint]) -> String {
    let mut s = String::from("omega,mag_db,phase_deg\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", fmt_g(p.omega), fmt_g(p.mag_db), fmt_g(p.phase_deg));
    }
    s
}

/// Gain crossover and phase margin.
#[derive(Clone, Debug, PartialEq)]
pub struct Margins {
    /// First crossover.
    pub omega_gc: f64,
    /// Degrees.
    pub phase_margin: f64,
    /// Every `(ω, PM)` crossing found on the interval.
    pub crossings: Vec<(f64, f64)>,
    /// More than one crossing was found.
    pub multiple: bool,
}

/// Default crossover search interval.
pub const MARGIN_SEARCH: (f64, f64) = (1e-3, 1e7);

/// [`margins_in`] over [`MARGIN_SEARCH`].
pub fn margins(g: &FracRational) -> Result<Margins> {
    margins_in(g, MARGIN_SEARCH)
}

/// Crossovers of `|g(jω)| = 1` by bisection on `log|g|`; `PM = 180° + ∠g`.
pub fn margins_in(g: &FracRational, search: (f64, f64)) -> Result<Margins> {
    let grid = FreqGrid::new(search.0, search.1, 100)?;
    let pts = bode(g, &grid.omegas);
    let logmag = |w: f64| g.eval_jw(w).map(|v| v.norm().ln()).unwrap_or(f64::NAN);
    let mut crossings = Vec::new();
    for pair in pts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a.mag_db > 0.0) == (b.mag_db > 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (a.omega.ln(), b.omega.ln());
        let above_lo = a.mag_db > 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let m = logmag(mid.exp());
            if m.is_nan() {
                break;
            }
            if (m > 0.0) == above_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let wc = (0.5 * (lo + hi)).exp();
        let v = g
            .eval_jw(wc)
            .ok_or_else(|| Error::Indeterminate(format!("loop undefined at {wc} rad/s")))?;
        let phase = a.phase_deg + wrap_deg(v.arg().to_degrees() - (a.phase_deg));
        crossings.push((wc, 180.0 + phase));
    }
    let (omega_gc, phase_margin) = *crossings
        .first()
        .ok_or_else(|| Error::NotFound(format!("no gain crossover in [{}, {}] rad/s", search.0, search.1)))?;
    Ok(Margins {
        omega_gc,
        phase_margin,
        multiple: crossings.len() > 1,
        crossings,
    })
}

/// Estimation error `Δ(ω) = 1 − (jω)^order P(jω)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MseDelta {
    pub omegas: Vec<f64>,
    pub delta: Vec<Complex64>,
    pub mse: f64,
    /// Grid points where `P` was undefined.
    pub excluded: usize,
}

impl MseDelta {
    /// `omega,re,im,abs2`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega,re,im,abs2\n");
        for (w, d) in self.omegas.iter().zip(&self.delta) {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_g(*w),
                fmt_g(d.re),
                fmt_g(d.im),
                fmt_g(d.norm_sqr())
            );
        }
        s
    }
}

/// Mean of `|Δ(ω_k)|²` over the grid.
pub fn mse_delta(p: &FracRational, ideal_order: Order, grid: &FreqGrid) -> Result<MseDelta> {
    if grid.omegas.is_empty() || grid.omegas.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidArgument(
            "frequency grid must be non-empty and positive".into(),
        ));
    }
    let mut omegas = Vec::with_capacity(grid.omegas.len());
    let mut delta = Vec::with_capacity(grid.omegas.len());
    for &w in &grid.omegas {
        if let Some(v) = p.eval_jw(w).filter(|v| v.is_finite()) {
            omegas.push(w);
            delta.push(1.0 - jw_pow(w, ideal_order) * v);
        }
    }
    let excluded = grid.omegas.len() - omegas.len();
    if excluded * 100 > grid.omegas.len() {
        return Err(Error::Indeterminate(format!(
            "transfer undefined at {excluded} of {} grid points",
            grid.omegas.len()
        )));
    }
    if delta.is_empty() {
        return Err(Error::Indeterminate("no valid grid points".into()));
    }
    let mse = delta.iter().map(|d| d.norm_sqr()).sum::<f64>() / delta.len() as f64;
    Ok(MseDelta {
        omegas,
        delta,
        mse,
        excluded,
    })
}

/// Time-domain step and disturbance metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    /// 10–90 % rise time, s.
    pub rise_time: Option<f64>,
    pub peak_time: f64,
    /// Largest output before the disturbance onset.
    pub peak_value: f64,
    /// Percent of `|r|`, clipped at 0.
    pub overshoot: f64,
    /// Entry into the settling band for good; `None` if never held.
    pub settling_time: Option<f64>,
    /// Percent of `|r|`.
    pub steady_state_error: f64,
    /// Largest `|y − y_ss|` after the onset; 0 without disturbance.
    pub dist_max_deviation: f64,
    /// Time from onset until the output re-enters the band for good.
    pub dist_recovery_time: Option<f64>,
}

impl StepMetrics {
    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_g).unwrap_or_else(|| "not_settled".into());
        format!(
            "rise_time={}\npeak_time={}\npeak_value={}\novershoot={}\nsettling_time={}\nsteady_state_error={}\ndist_max_deviation={}\ndist_recovery_time={}\n",
            opt(self.rise_time),
            fmt_g(self.peak_time),
            fmt_g(self.peak_value),
            fmt_g(self.overshoot),
            opt(self.settling_time),
            fmt_g(self.steady_state_error),
            fmt_g(self.dist_max_deviation),
            match self.dist_recovery_time {
                None if self.dist_max_deviation == 0.0 => "none".into(),
                v => opt(v),
            }
        )
    }
}

/// Settling band as a fraction of `|r|`.
pub const SETTLING_BAND: f64 = 0.02;

/// [`step_metrics_with`] at the 2 % band.
pub fn step_metrics(sim: &SimResult, r: f64, dist: &DisturbanceProfile) -> Result<StepMetrics> {
    step_metrics_with(&sim.t, &sim.y, r, dist.onset(), SETTLING_BAND)
}

fn crossing_time(t: &[f64], y: &[f64], level: f64, rising: bool) -> Option<f64> {
    for k in 1..y.len() {
        let hit = if rising { y[k] >= level } else { y[k] <= level };
        if hit {
            let (y0, y1) = (y[k - 1], y[k]);
            if y1 == y0 {
                return Some(t[k]);
            }
            return Some(t[k - 1] + (level - y0) / (y1 - y0) * (t[k] - t[k - 1]));
        }
    }
    None
}

/// Time of the last exit from `|y − centre| ≤ tol`, interpolated; `Some(t[0])`
/// if always inside, `None` if the final sample is outside.
fn entry_for_good(t: &[f64], y: &[f64], centre: f64, tol: f64) -> Option<f64> {
    let inside = |v: f64| (v - centre).abs() <= tol;
    if !inside(*y.last()?) {
        return None;
    }
    let Some(k) = (0..y.len()).rev().find(|&k| !inside(y[k])) else {
        return Some(t[0]);
    };
    // crossing of the band edge between k and k+1
    let edge = if y[k] > centre { centre + tol } else { centre - tol };
    let (y0, y1) = (y[k], y[k + 1]);
    let frac = if y1 == y0 {
        1.0
    } else {
        ((edge - y0) / (y1 - y0)).clamp(0.0, 1.0)
    };
    Some(t[k] + frac * (t[k + 1] - t[k]))
}

/// Metrics on samples `(t, y)` for reference `r`; the disturbance segment
/// starts at `onset`.
pub fn step_metrics_with(t: &[f64], y: &[f64], r: f64, onset: Option<f64>, band: f64) -> Result<StepMetrics> {
    if t.len() != y.len() || t.len() < 3 {
        return Err(Error::InvalidArgument("need at least three matching samples".into()));
    }
    if r == 0.0 || !r.is_finite() {
        return Err(Error::InvalidArgument("reference must be finite and non-zero".into()));
    }
    if !(band > 0.0) {
        return Err(Error::InvalidArgument("settling band must be positive".into()));
    }
    let split = onset.map(|t_on| t.partition_point(|&x| x < t_on)).unwrap_or(t.len());
    if split < 3 {
        return Err(Error::InvalidArgument(
            "disturbance onset leaves no step segment".into(),
        ));
    }
    let (tp, yp) = (&t[..split], &y[..split]);
    let y_ss = yp[split - 1];
    let y0 = yp[0];
    let rising = r > y0;
    let span = y_ss - y0;
    let rise_time = match (
        crossing_time(tp, yp, y0 + 0.1 * span, rising),
        crossing_time(tp, yp, y0 + 0.9 * span, rising),
    ) {
        (Some(a), Some(b)) if span != 0.0 => Some(b - a),
        _ => None,
    };
    let (kpk, peak_value) = if rising {
        yp.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
        )
    } else {
        yp.iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc })
    };
    let overshoot = (100.0 * (peak_value - y_ss) * r.signum() / r.abs()).max(0.0);
    let tol = band * r.abs();
    let held_min = 0.1 * (tp[split - 1] - tp[0]);
    let settling_time = entry_for_good(tp, yp, y_ss, tol)
        .filter(|&ts| tp[split - 1] - ts >= held_min)
        .map(|ts| ts - tp[0]);
    let steady_state_error = 100.0 * (r - y_ss).abs() / r.abs();

    let (dist_max_deviation, dist_recovery_time) = if split < t.len() {
        let (td, yd) = (&t[split..], &y[split..]);
        let dev = yd.iter().map(|v| (v - y_ss).abs()).fold(0.0, f64::max);
        let t_on = onset.unwrap_or(td[0]);
        (dev, entry_for_good(td, yd, y_ss, tol).map(|x| (x - t_on).max(0.0)))
    } else {
        (0.0, None)
    };
    Ok(StepMetrics {
        rise_time,
        peak_time: tp[kpk] - tp[0],
        peak_value,
        overshoot,
        settling_time,
        steady_state_error,
        dist_max_deviation,
        dist_recovery_time,
    })
}

/// `(max_K M_K − min_K M_K)/|r| · 100` with `M_K` the peak output.
pub fn overshoot_fluctuation(metrics_by_k: &[(f64, StepMetrics)], reference: f64) -> Result<f64> {
    if metrics_by_k.is_empty() {
        return Err(Error::InvalidArgument("no gain multipliers".into()));
    }
    if reference == 0.0 || !reference.is_finite() {
        return Err(Error::InvalidArgument("reference must be finite and non-zero".into()));
    }
    let peaks = metrics_by_k.iter().map(|(_, m)| m.peak_value);
    let hi = peaks.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = peaks.fold(f64::INFINITY, f64::min);
    Ok((hi - lo) / reference.abs() * 100.0)
}

/// Maximum of `|y − r|/|r|` over samples with `t ∈ [from, to)`.
pub fn max_tracking_error(t: &[f64], y: &[f64], r: f64, from: f64, to: f64) -> f64 {
    t.iter()
        .zip(y)
        .filter(|(tt, _)| **tt >= from && **tt < to)
        .map(|(_, v)| (v - r).abs() / r.abs())
        .fold(0.0, f64::max)
}
