//! Integer-order SISO plants `y^(m) + a_{m−1} y^(m−1) + … + a_0 y = b·u + d`
//! and their exact zero-order-hold simulation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fracnum::{FracPoly, FracRational};

/// Plant coefficients, denominator in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantModel {
    a: Vec<f64>,
    b: f64,
}

impl PlantModel {
    pub fn new(a: Vec<f64>, b: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("plant order must be at least 1".into()));
        }
        if a.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::InvalidArgument("plant coefficients must be finite".into()));
        }
        Ok(PlantModel { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// Characteristic polynomial `s^m + Σ a_i s^i`.
    pub fn denominator(&self) -> FracPoly {
        let mut c = self.a.clone();
        c.push(1.0);
        FracPoly::from_ascending(&c)
    }

    /// `b / (s^m + Σ a_i s^i)`.
    pub fn transfer(&self) -> FracRational {
        FracRational::new(FracPoly::constant(self.b), self.denominator()).expect("monic denominator is non-zero")
    }

    fn companion(&self) -> DMatrix<f64> {
        let m = self.order();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for (i, &ai) in self.a.iter().enumerate() {
            a[(m - 1, i)] = -ai;
        }
        a
    }
}

/// Additive disturbance `d(t)` entering next to `b·u`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum DisturbanceProfile {
    #[default]
    None,
    /// Constant `amplitude` from `t_on` to the end of the run.
    Step { t_on: f64, amplitude: f64 },
}

impl DisturbanceProfile {
    pub fn step(t_on: f64, amplitude: f64) -> Result<Self> {
        if !(t_on >= 0.0) || !t_on.is_finite() || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step disturbance needs finite t_on ≥ 0, got {t_on}"
            )));
        }
        Ok(DisturbanceProfile::Step { t_on, amplitude })
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            DisturbanceProfile::None => 0.0,
            DisturbanceProfile::Step { t_on, amplitude } => {
                if t >= t_on {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    pub fn onset(&self) -> Option<f64> {
        match *self {
            DisturbanceProfile::None => None,
            DisturbanceProfile::Step { t_on, .. } => Some(t_on),
        }
    }
}

/// `x_{k+1} = F x_k + G v_k` with `v = b·u + d` and `y = x_1`.
#[derive(Clone, Debug)]
pub struct DiscretePlant {
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
    pub dt: f64,
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(s);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.amax() <= 1e-18 * result.amax() {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Exact ZOH discretization of `p` at step `dt`.
pub fn plant_discretize(p: &PlantModel, dt: f64) -> Result<DiscretePlant> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    let m = p.order();
    let mut aug = DMatrix::zeros(m + 1, m + 1);
    aug.view_mut((0, 0), (m, m)).copy_from(&p.companion());
    aug[(m - 1, m)] = 1.0;
    let e = expm(&(aug * dt));
    let f = e.view((0, 0), (m, m)).into_owned();
    let g = e.view((0, m), (m, 1)).column(0).into_owned();
    Ok(DiscretePlant { f, g, dt })
}

/// Running plant state for closed-loop use.
#[derive(Clone, Debug)]
pub struct PlantSim {
    model: PlantModel,
    disc: DiscretePlant,
    x: DVector<f64>,
}

impl PlantSim {
    pub fn new(model: &PlantModel, dt: f64) -> Result<Self> {
        let disc = plant_discretize(model, dt)?;
        Ok(PlantSim {
            x: DVector::zeros(model.order()),
            model: model.clone(),
            disc,
        })
    }

    pub fn output(&self) -> f64 {
        self.x[0]
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    /// `y^(m)` for a given total input `v = b·u + d`.
    pub fn top_derivative(&self, v: f64) -> f64 {
        v - self.model.a.iter().zip(self.x.iter()).map(|(a, x)| a * x).sum::<f64>()
    }

    /// Holds `v` over one step.
    pub fn step(&mut self, v: f64) {
        self.x = &self.disc.f * &self.x + &self.disc.g * v;
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

fn steps_for(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !dt.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and T ≥ 0, got dt={dt}, T={t_end}"
        )));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::InvalidArgument(format!("dt={dt} does not divide T={t_end}")));
    }
    Ok(n as usize)
}

/// Number of grid intervals for a run of length `t_end`.
pub fn grid_steps(dt: f64, t_end: f64) -> Result<usize> {
    steps_for(dt, t_end)
}

/// Output samples `y(k·dt)`, `k = 0 … T/dt`, under ZOH input `u`.
pub fn simulate_plant(p: &PlantModel, u: &[f64], d: &DisturbanceProfile, dt: f64, t_end: f64) -> Result<Vec<f64>> {
    let n = steps_for(dt, t_end)?;
    if u.len() < n {
        return Err(Error::InvalidArgument(format!(
            "input has {} samples, grid needs {n}",
            u.len()
        )));
    }
    let mut sim = PlantSim::new(p, dt)?;
    let mut y = Vec::with_capacity(n + 1);
    y.push(sim.output());
    for (k, &uk) in u.iter().take(n).enumerate() {
        let v = p.b * uk + d.value(k as f64 * dt);
        sim.step(v);
        let yk = sim.output();
        if !sim.is_finite() {
            return Err(Error::NonFinite { index: k + 1 });
        }
        y.push(yk);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn pmsm() -> PlantModel {
        PlantModel::new(vec![1642.0, 116.4], 1364.1).unwrap()
    }

    #[test]
    fn integrator_discretization() {
        let p = PlantModel::new(vec![0.0], 1.0).unwrap();
        let d = plant_discretize(&p, 0.01).unwrap();
        assert!((d.f[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((d.g[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn small_step_is_first_order_expansion() {
        let p = PlantModel::new(vec![10.0, 10.0], 5.0).unwrap();
        let a = p.companion();
        let mut prev = f64::INFINITY;
        for &dt in &[1e-2, 1e-3, 1e-4] {
            let d = plant_discretize(&p, dt).unwrap();
            let err = (&d.f - (DMatrix::identity(2, 2) + &a * dt)).amax();
            assert!(err < 100.0 * dt * dt);
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn expm_matches_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]);
        let e = expm(&m);
        assert!((e[(0, 0)] - 3f64.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - 3f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn step_steady_states() {
        let dt = 1e-3;
        let p = PlantModel::new(vec![10.0, 10.0], 5.0).unwrap();
        let y = simulate_plant(&p, &vec![1.0; 20_000], &DisturbanceProfile::None, dt, 20.0).unwrap();
        assert!((y.last().unwrap() - 0.5).abs() < 1e-9);
        let y = simulate_plant(&pmsm(), &vec![1.0; 2000], &DisturbanceProfile::None, dt, 2.0).unwrap();
        assert!((y.last().unwrap() - 1364.1 / 1642.0).abs() < 1e-9);
        assert!((1364.1f64 / 1642.0 - 0.8307).abs() < 1e-4);
    }

    #[test]
    fn zero_input_zero_output() {
        let y = simulate_plant(&pmsm(), &[0.0; 100], &DisturbanceProfile::None, 0.01, 1.0).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_underdamped_closed_form() {
        let (wn, zeta) = (20.0f64, 0.3f64);
        let p = PlantModel::new(vec![wn * wn, 2.0 * zeta * wn], wn * wn).unwrap();
        let dt = 1e-4;
        let y = simulate_plant(&p, &vec![1.0; 10_000], &DisturbanceProfile::None, dt, 1.0).unwrap();
        let wd = wn * (1.0 - zeta * zeta).sqrt();
        let worst = y
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let t = k as f64 * dt;
                let exact = 1.0
                    - (-zeta * wn * t).exp() * ((wd * t).cos() + zeta / (1.0 - zeta * zeta).sqrt() * (wd * t).sin());
                (v - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn sinusoidal_steady_state_matches_frequency_response() {
        let p = pmsm();
        let dt = 1e-4;
        let t_end = 3.0;
        let n = (t_end / dt) as usize;
        for &w in &[5.0, 40.0, 200.0] {
            // ZOH input sampled at the midpoint of each hold interval
            let u: Vec<f64> = (0..n).map(|k| ((k as f64 + 0.5) * dt * w).sin()).collect();
            let y = simulate_plant(&p, &u, &DisturbanceProfile::None, dt, t_end).unwrap();
            let g = p.transfer().eval_jw(w).unwrap();
            let tail = n / 2;
            let (mut err, mut peak) = (0.0f64, 0.0f64);
            for (k, &yk) in y.iter().enumerate().skip(tail) {
                let t = k as f64 * dt;
                let want = (Complex64::new(0.0, w * t).exp() * g).im;
                err = err.max((yk - want).abs());
                peak = peak.max(want.abs());
            }
            assert!(err <= 1e-3 * peak, "ω={w}: {err} vs {peak}");
        }
    }

    #[test]
    fn disturbance_enters_with_input() {
        let p = PlantModel::new(vec![10.0, 10.0], 5.0).unwrap();
        let dt = 1e-3;
        let d = DisturbanceProfile::step(0.0, 5.0).unwrap();
        let y1 = simulate_plant(&p, &vec![0.0; 1000], &d, dt, 1.0).unwrap();
        let y2 = simulate_plant(&p, &vec![1.0; 1000], &DisturbanceProfile::None, dt, 1.0).unwrap();
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn errors() {
        assert!(PlantModel::new(vec![], 1.0).is_err());
        assert!(PlantModel::new(vec![f64::NAN], 1.0).is_err());
        assert!(plant_discretize(&pmsm(), 0.0).is_err());
        assert!(simulate_plant(&pmsm(), &[1.0; 3], &DisturbanceProfile::None, 0.3, 1.0).is_err());
        // unstable plant overflows to infinity
        let p = PlantModel::new(vec![-1e4, -1e3], 1.0).unwrap();
        match simulate_plant(&p, &vec![1.0; 100_000], &DisturbanceProfile::None, 0.1, 10_000.0) {
            Err(Error::NonFinite { index }) => assert!(index > 0),
            other => panic!("expected non-finite, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn linearity(
            u1 in proptest::collection::vec(-5.0f64..5.0, 50),
            u2 in proptest::collection::vec(-5.0f64..5.0, 50),
            a0 in 0.1f64..100.0, a1 in 0.1f64..50.0,
        ) {
            let p = PlantModel::new(vec![a0, a1], 3.0).unwrap();
            let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
            let none = DisturbanceProfile::None;
            let y1 = simulate_plant(&p, &u1, &none, 0.01, 0.5).unwrap();
            let y2 = simulate_plant(&p, &u2, &none, 0.01, 0.5).unwrap();
            let y = simulate_plant(&p, &sum, &none, 0.01, 0.5).unwrap();
            for k in 0..y.len() {
                prop_assert!((y[k] - y1[k] - y2[k]).abs() <= 1e-10 * (1.0 + y[k].abs()));
            }
        }
    }
}
