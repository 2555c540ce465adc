//! Observer and controller synthesis for integer, fractional and improved
//! fractional ADRC, their discrete runtime forms, and the loop algebra.
//!
//! Every observer variant shares one structure. With state vector `z` of
//! length `N`, order vector `q` and estimation error `e = y − z_1`,
//!
//! ```text
//! D^{q_i} z_i = z_{i+1} + β_i e            (i < N, plus b0·u on row N−1)
//! D^{q_N} z_N = β_N e
//! ```
//!
//! and the controller is `u = (u0 − z_N)/b0` with
//! `u0 = kp(r − z_1) − Σ kd_i z_{i+1}`.
//!
//! Writing `Q_i = s^{q_i}`, `S_i = Q_1⋯Q_i` and `Φ_0 = 1`,
//! `Φ_i = Q_i Φ_{i−1} + β_i`, the observer characteristic polynomial is
//! `cp = Q_N Φ_{N−1} + β_N` and the intermediate estimates satisfy
//! `Z_{i+1} = S_i Y − Φ_i E`. All transfer functions below follow from these
//! two identities.

use nalgebra::{DMatrix, DVector};
use num_integer::binomial;
use num_traits::{One, ToPrimitive, Zero};

use crate::discretize::{default_band, gl_fir, iir_fit, DigitalFilter, DEFAULT_MEMORY_LEN};
use crate::error::{Error, Result};
use crate::fracnum::{order_from_f64, order_to_f64, FracPoly, FracRational, Order};
use crate::plant::{DisturbanceProfile, PlantModel, PlantSim};

/// Order bookkeeping `χ + (n−1)γ = m`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdrcOrders {
    pub m: usize,
    pub chi: Order,
    pub gamma: Order,
    pub nu: Order,
    pub n: usize,
    /// Non-fatal notes, e.g. `ν` on the boundary of its admissible range.
    pub warnings: Vec<String>,
}

/// Derives `n` and `γ` from the plant order and `χ`, rationalizing inputs.
pub fn derive_orders(m: usize, chi: f64, nu: f64) -> Result<AdrcOrders> {
    derive_orders_exact(m, order_from_f64(chi)?, order_from_f64(nu)?)
}

/// [`derive_orders`] on exact rationals.
pub fn derive_orders_exact(m: usize, chi: Order, nu: Order) -> Result<AdrcOrders> {
    if m < 2 {
        return Err(Error::OrderConstraint(format!("plant order m={m} must be at least 2")));
    }
    let one = Order::one();
    let two = Order::from_integer(2);
    if !(chi > one && chi < two) {
        return Err(Error::OrderConstraint(format!("χ={chi} must lie in (1, 2)")));
    }
    let mm = Order::from_integer(m as i64);
    let n = (mm / chi).floor().to_integer() as usize + 1;
    let gamma = (mm - chi) / Order::from_integer(n as i64 - 1);
    let mut warnings = Vec::new();
    if nu < gamma || nu > chi {
        return Err(Error::OrderConstraint(format!(
            "ν={nu} must lie in [γ, χ] = [{gamma}, {chi}]"
        )));
    }
    if nu == gamma {
        warnings.push(format!("ν = γ = {gamma}: boundary of the admissible range"));
    }
    if nu == chi {
        warnings.push(format!("ν = χ = {chi}: boundary of the admissible range"));
    }
    Ok(AdrcOrders {
        m,
        chi,
        gamma,
        nu,
        n,
        warnings,
    })
}

/// `β_i = C(count, i) ω0^i`, `i = 1 … count`.
pub fn eso_gains(state_count: usize, omega0: f64) -> Result<Vec<f64>> {
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::InvalidArgument(format!("ω0={omega0} must be positive")));
    }
    Ok((1..=state_count)
        .map(|i| binomial(state_count as u64, i as u64) as f64 * omega0.powi(i as i32))
        .collect())
}

/// Observer family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Io,
    Fo,
    Ifo,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Io => "io",
            Variant::Fo => "fo",
            Variant::Ifo => "ifo",
        }
    }
}

/// How fractional derivatives are realized at run time.
#[derive(Clone, Debug, PartialEq)]
pub enum FilterBank {
    /// Fitted IIR of the given order over `band` (default band when `None`).
    Fitted { order: usize, band: Option<(f64, f64)> },
    /// Truncated GL FIR.
    Oracle { memory_len: usize },
}

impl FilterBank {
    pub fn oracle() -> Self {
        FilterBank::Oracle {
            memory_len: DEFAULT_MEMORY_LEN,
        }
    }

    fn build(&self, alpha: Order, fs: f64) -> Result<DigitalFilter> {
        let a = order_to_f64(alpha);
        if alpha.is_integer() {
            // integer orders get the exact backward difference
            let k = alpha.to_integer() as usize;
            return gl_fir(a, fs, k + 1);
        }
        match self {
            FilterBank::Fitted { order, band } => iir_fit(a, fs, *order, band.unwrap_or_else(|| default_band(fs))),
            FilterBank::Oracle { memory_len } => gl_fir(a, fs, *memory_len),
        }
    }
}

/// Observer configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct EsoConfig {
    pub variant: Variant,
    /// Per-state derivative orders.
    pub q: Vec<Order>,
    pub omega0: f64,
    pub b0: f64,
    pub gains: Vec<f64>,
    pub fs: f64,
    pub bank: FilterBank,
}

impl EsoConfig {
    /// IFO observer with `q = [χ, γ, …, γ, ν]` and binomial gains.
    pub fn ifo(orders: &AdrcOrders, omega0: f64, b0: f64, fs: f64, bank: FilterBank) -> Result<Self> {
        let mut q = vec![orders.chi];
        q.extend(std::iter::repeat_n(orders.gamma, orders.n - 1));
        q.push(orders.nu);
        Self::assemble(Variant::Ifo, q, omega0, b0, fs, bank)
    }

    /// Classical observer with `m + 1` unit-order states.
    pub fn io(m: usize, omega0: f64, b0: f64, fs: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidArgument("plant order must be at least 1".into()));
        }
        let q = vec![Order::one(); m + 1];
        Self::assemble(Variant::Io, q, omega0, b0, fs, FilterBank::oracle())
    }

    /// Four-state fractional observer for `m = 2` with `q = [χ, σ, 1−σ, 1]`.
    ///
    /// `split` is `σ`; `None` selects `σ = χ − 1`.
    pub fn fo(
        m: usize,
        chi: Order,
        split: Option<Order>,
        omega0: f64,
        b0: f64,
        fs: f64,
        bank: FilterBank,
    ) -> Result<Self> {
        if m != 2 {
            return Err(Error::Unsupported(format!(
                "FO observer is defined for m = 2 only, got m = {m}"
            )));
        }
        let one = Order::one();
        if !(chi > one && chi < Order::from_integer(2)) {
            return Err(Error::OrderConstraint(format!("χ={chi} must lie in (1, 2)")));
        }
        let sigma = split.unwrap_or(chi - one);
        if !(sigma > Order::zero() && sigma < one) {
            return Err(Error::OrderConstraint(format!("split σ={sigma} must lie in (0, 1)")));
        }
        let q = vec![chi, sigma, one - sigma, one];
        Self::assemble(Variant::Fo, q, omega0, b0, fs, bank)
    }

    fn assemble(variant: Variant, q: Vec<Order>, omega0: f64, b0: f64, fs: f64, bank: FilterBank) -> Result<Self> {
        let gains = eso_gains(q.len(), omega0)?;
        let cfg = EsoConfig {
            variant,
            q,
            omega0,
            b0,
            gains,
            fs,
            bank,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.len() < 2 {
            return Err(Error::InvalidArgument("observer needs at least two states".into()));
        }
        if self.gains.len() != self.q.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gains for {} states",
                self.gains.len(),
                self.q.len()
            )));
        }
        if self.q.iter().any(|q| *q <= Order::zero()) {
            return Err(Error::OrderConstraint("state orders must be positive".into()));
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::InvalidArgument(format!("ω0={} must be positive", self.omega0)));
        }
        if self.b0 == 0.0 || !self.b0.is_finite() {
            return Err(Error::InvalidArgument("b0 must be finite and non-zero".into()));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::InvalidArgument(format!("fs={} must be positive", self.fs)));
        }
        if self.gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument("observer gains must be finite".into()));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.q.len()
    }

    /// Row that receives `b0·u`.
    pub fn control_index(&self) -> usize {
        self.q.len() - 2
    }

    /// Sum of all but the last order; the order the observer assumes for the plant.
    pub fn model_order(&self) -> Order {
        self.q[..self.q.len() - 1].iter().fold(Order::zero(), |a, b| a + b)
    }

    pub fn with_bank(mut self, bank: FilterBank) -> Self {
        self.bank = bank;
        self
    }
}

/// Which tracking-gain formula to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GainConvention {
    /// `k_{d_i} = C(n−1, i−1) ω_c^{n−i}`.
    #[default]
    Corrected,
    /// `k_{d_i} = C(n−1, i) ω_c^{n−1−i}` as printed.
    Literal,
}

/// Tracking controller gains.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingConfig {
    pub kp: f64,
    pub kd: Vec<f64>,
    pub omega_c: f64,
    pub omega_g: f64,
}

impl TrackingConfig {
    /// Gains given directly; `ω_c` is recovered from the last `k_d`.
    pub fn from_gains(kp: f64, kd: Vec<f64>, chi: Order) -> Result<Self> {
        if !(kp > 0.0 && kp.is_finite()) {
            return Err(Error::InvalidArgument(format!("kp={kp} must be positive")));
        }
        if kd.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument("kd entries must be finite".into()));
        }
        let k = kd.len();
        let omega_c = if k == 0 { 1.0 } else { kd[k - 1] / k as f64 };
        let omega_g = if omega_c > 0.0 {
            (kp / omega_c.powi(k as i32)).powf(1.0 / order_to_f64(chi))
        } else {
            f64::NAN
        };
        Ok(TrackingConfig {
            kp,
            kd,
            omega_c,
            omega_g,
        })
    }

    /// PD gains `k_ip(1 + k_id s)` of the integer-order baseline.
    pub fn io(kip: f64, kid: f64) -> Result<Self> {
        if !(kip > 0.0 && kip.is_finite() && kid.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid PD gains kip={kip}, kid={kid}")));
        }
        Ok(TrackingConfig {
            kp: kip,
            kd: vec![kip * kid],
            omega_c: 1.0 / kid,
            omega_g: kip.sqrt(),
        })
    }

    /// Scales `kp` by `k`, the gain-variation experiment.
    pub fn scaled_kp(&self, k: f64) -> Self {
        TrackingConfig {
            kp: self.kp * k,
            ..self.clone()
        }
    }
}

/// `k_{d_i}` and `k_p = ω_g^χ ω_c^{n−1}`.
pub fn tracking_gains(orders: &AdrcOrders, omega_c: f64, omega_g: f64) -> Result<TrackingConfig> {
    tracking_gains_with(orders, omega_c, omega_g, GainConvention::Corrected)
}

/// [`tracking_gains`] with an explicit formula choice.
pub fn tracking_gains_with(
    orders: &AdrcOrders,
    omega_c: f64,
    omega_g: f64,
    convention: GainConvention,
) -> Result<TrackingConfig> {
    if !(omega_c > 0.0 && omega_g > 0.0 && omega_c.is_finite() && omega_g.is_finite()) {
        return Err(Error::InvalidArgument("ω_c and ω_g must be positive".into()));
    }
    let n = orders.n as u64;
    let kd = (1..n)
        .map(|i| match convention {
            GainConvention::Corrected => binomial(n - 1, i - 1) as f64 * omega_c.powi((n - i) as i32),
            GainConvention::Literal => binomial(n - 1, i) as f64 * omega_c.powi((n - 1 - i) as i32),
        })
        .collect();
    let kp = omega_g.powf(order_to_f64(orders.chi)) * omega_c.powi(n as i32 - 1);
    Ok(TrackingConfig {
        kp,
        kd,
        omega_c,
        omega_g,
    })
}

/// Observer plus tracking controller.
#[derive(Clone, Debug, PartialEq)]
pub struct AdrcDesign {
    pub eso: EsoConfig,
    pub trk: TrackingConfig,
}

impl AdrcDesign {
    pub fn new(eso: EsoConfig, trk: TrackingConfig) -> Result<Self> {
        eso.validate()?;
        if trk.kd.len() > eso.control_index() {
            return Err(Error::InvalidArgument(format!(
                "{} derivative gains but only {} intermediate states",
                trk.kd.len(),
                eso.control_index()
            )));
        }
        Ok(AdrcDesign { eso, trk })
    }

    pub fn with_kp_scaled(&self, k: f64) -> Self {
        AdrcDesign {
            eso: self.eso.clone(),
            trk: self.trk.scaled_kp(k),
        }
    }
}

fn check_b0(b0: f64) -> Result<()> {
    if b0 == 0.0 || !b0.is_finite() {
        return Err(Error::InvalidArgument("b0 must be finite and non-zero".into()));
    }
    Ok(())
}

/// `u = (u0 − z_N)/b0` with `u0 = kp(r − z_1) − Σ kd_i z_{i+1}`.
pub fn control_law(z: &[f64], r: f64, trk: &TrackingConfig, b0: f64) -> Result<f64> {
    check_b0(b0)?;
    if z.len() < trk.kd.len() + 2 {
        return Err(Error::InvalidArgument(format!(
            "estimate of length {} too short",
            z.len()
        )));
    }
    let u0 = trk.kp * (r - z[0]) - trk.kd.iter().zip(&z[1..]).map(|(k, v)| k * v).sum::<f64>();
    Ok((u0 - z[z.len() - 1]) / b0)
}

/// PD baseline: `u0 = k_ip(r − z_1) − k_ip k_id z_2`.
pub fn io_control_law(z: &[f64], r: f64, kip: f64, kid: f64, b0: f64) -> Result<f64> {
    control_law(z, r, &TrackingConfig::io(kip, kid)?, b0)
}

/// Discrete observer: per-state derivative filters solved implicitly each sample.
#[derive(Clone, Debug)]
pub struct ObserverRealization {
    cfg: EsoConfig,
    filters: Vec<DigitalFilter>,
    z: Vec<f64>,
    open: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    poisoned: bool,
}

/// Builds the runtime observer for `cfg`.
pub fn build_observer(cfg: &EsoConfig) -> Result<ObserverRealization> {
    cfg.validate()?;
    let filters = cfg
        .q
        .iter()
        .map(|&q| cfg.bank.build(q, cfg.fs))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.q.len();
    let mut obs = ObserverRealization {
        cfg: cfg.clone(),
        filters,
        z: vec![0.0; n],
        open: DMatrix::<f64>::identity(1, 1).lu(),
        poisoned: false,
    };
    obs.open = obs.factor(&vec![0.0; n])?;
    Ok(obs)
}

impl ObserverRealization {
    pub fn config(&self) -> &EsoConfig {
        &self.cfg
    }

    pub fn estimate(&self) -> &[f64] {
        &self.z
    }

    pub fn reset(&mut self) {
        self.filters.iter_mut().for_each(DigitalFilter::reset);
        self.z.iter_mut().for_each(|v| *v = 0.0);
        self.poisoned = false;
    }

    /// LU of the per-sample system with control feedback `u = g·z + c`.
    fn factor(&self, g: &[f64]) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let n = self.cfg.q.len();
        let ci = self.cfg.control_index();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.filters[i].peek().0;
            if i + 1 < n {
                m[(i, i + 1)] -= 1.0;
            }
            m[(i, 0)] += self.cfg.gains[i];
        }
        for j in 0..n {
            m[(ci, j)] -= self.cfg.b0 * g[j];
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::DegenerateSystem("observer update matrix is singular".into()));
        }
        Ok(lu)
    }

    fn advance(&mut self, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, y: f64, c: f64) -> Result<()> {
        if self.poisoned {
            return Err(Error::PoisonedState);
        }
        if !y.is_finite() || !c.is_finite() {
            self.poisoned = true;
            return Err(Error::PoisonedState);
        }
        let n = self.cfg.q.len();
        let ci = self.cfg.control_index();
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            rhs[i] = self.cfg.gains[i] * y - self.filters[i].peek().1;
        }
        rhs[ci] += self.cfg.b0 * c;
        let z = lu
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateSystem("observer solve failed".into()))?;
        if z.iter().any(|v| !v.is_finite()) {
            self.poisoned = true;
            return Err(Error::PoisonedState);
        }
        for (f, &zi) in self.filters.iter_mut().zip(z.iter()) {
            f.step(zi)?;
        }
        self.z.copy_from_slice(z.as_slice());
        Ok(())
    }

    /// One sample with known input `u` and measurement `y`.
    pub fn step(&mut self, u: f64, y: f64) -> Result<&[f64]> {
        let lu = self.open.clone();
        self.advance(&lu, y, u)?;
        Ok(&self.z)
    }
}

/// Advances the observer one sample and returns the new estimate.
pub fn observer_step(obs: &mut ObserverRealization, u: f64, y: f64) -> Result<Vec<f64>> {
    obs.step(u, y).map(<[f64]>::to_vec)
}

/// Sampled closed-loop trajectories.
#[derive(Clone, Debug, Default)]
pub struct SimResult {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    /// `z[i][k]`: state `i` at sample `k`.
    pub z: Vec<Vec<f64>>,
    pub f_hat: Vec<f64>,
    pub f_true: Vec<f64>,
    pub d: Vec<f64>,
    /// Sample index at which the run was aborted as divergent.
    pub diverged_at: Option<usize>,
}

impl SimResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Threshold on `|y|` beyond which a run counts as divergent.
pub fn divergence_bound(r: f64) -> f64 {
    1e6 * r.abs().max(1.0)
}

/// Runs plant, observer and controller on the grid `k·dt`, `k = 0 … T/dt`.
pub fn closed_loop_simulate(
    p: &PlantModel,
    design: &AdrcDesign,
    r: f64,
    dist: &DisturbanceProfile,
    dt: f64,
    t_end: f64,
) -> Result<SimResult> {
    let eso = &design.eso;
    if ((1.0 / dt) - eso.fs).abs() > 1e-9 * eso.fs {
        return Err(Error::InvalidArgument(format!(
            "observer rate {} Hz does not match 1/dt = {} Hz",
            eso.fs,
            1.0 / dt
        )));
    }
    if !r.is_finite() {
        return Err(Error::InvalidArgument("reference must be finite".into()));
    }
    if t_end <= 0.0 {
        return Err(Error::InvalidArgument("duration must be positive".into()));
    }
    let steps = crate::plant::grid_steps(dt, t_end)?;
    let mut obs = build_observer(eso)?;
    let mut plant = PlantSim::new(p, dt)?;
    let n = eso.state_count();
    let trk = &design.trk;

    // u = g·z + c
    let mut g = vec![0.0; n];
    g[0] = -trk.kp / eso.b0;
    for (i, k) in trk.kd.iter().enumerate() {
        g[i + 1] -= k / eso.b0;
    }
    g[n - 1] -= 1.0 / eso.b0;
    let c = trk.kp * r / eso.b0;
    let lu = obs.factor(&g)?;

    let mut out = SimResult {
        z: vec![Vec::with_capacity(steps + 1); n],
        ..SimResult::default()
    };
    let bound = divergence_bound(r);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let y = plant.output();
        if !y.is_finite() || y.abs() > bound {
            out.diverged_at = Some(k);
            break;
        }
        let d = dist.value(t);
        match obs.advance(&lu, y, c) {
            Ok(()) => {}
            Err(Error::PoisonedState) => {
                out.diverged_at = Some(k);
                break;
            }
            Err(e) => return Err(e),
        }
        let z = obs.estimate();
        let u: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + c;
        let v = p.b() * u + d;
        out.t.push(t);
        out.r.push(r);
        out.y.push(y);
        out.u.push(u);
        for (col, &zi) in out.z.iter_mut().zip(z) {
            col.push(zi);
        }
        out.f_hat.push(z[n - 1]);
        out.f_true.push(plant.top_derivative(v) - eso.b0 * u);
        out.d.push(d);
        plant.step(v);
    }
    Ok(out)
}

/// Polynomials shared by every loop transfer function.
#[derive(Clone, Debug)]
pub struct LoopPolys {
    /// `Q_N`.
    pub q_last: FracPoly,
    /// `S_0 … S_N`.
    pub s: Vec<FracPoly>,
    /// `Φ_0 … Φ_{N−1}`.
    pub phi: Vec<FracPoly>,
    /// Observer characteristic polynomial.
    pub cp: FracPoly,
}

/// Builds `S_i`, `Φ_i` and the observer characteristic polynomial.
pub fn loop_polys(cfg: &EsoConfig) -> LoopPolys {
    let n = cfg.q.len();
    let mut s = vec![FracPoly::one()];
    let mut acc = Order::zero();
    for q in &cfg.q {
        acc += *q;
        s.push(FracPoly::s_pow(acc));
    }
    let mut phi = vec![FracPoly::one()];
    for i in 0..n - 1 {
        let next = &(&FracPoly::s_pow(cfg.q[i]) * &phi[i]) + &FracPoly::constant(cfg.gains[i]);
        phi.push(next);
    }
    let q_last = FracPoly::s_pow(cfg.q[n - 1]);
    let cp = &(&q_last * &phi[n - 1]) + &FracPoly::constant(cfg.gains[n - 1]);
    LoopPolys { q_last, s, phi, cp }
}

/// Observer characteristic polynomial `cp`.
pub fn observer_char_poly(cfg: &EsoConfig) -> FracPoly {
    loop_polys(cfg).cp
}

/// Block decomposition `Y = G_n(k_p R + G_m E)`, `E = −H_m H_n Y`.
#[derive(Clone, Debug)]
pub struct LoopBlocks {
    pub g_m: FracRational,
    pub g_n: FracRational,
    pub h_m: FracRational,
    pub h_n: FracRational,
}

struct LoopParts {
    lp: LoopPolys,
    dg_n: FracPoly,
    g_m: FracPoly,
    h_n: FracPoly,
}

fn loop_parts(p: &PlantModel, design: &AdrcDesign) -> LoopParts {
    let eso = &design.eso;
    let trk = &design.trk;
    let lp = loop_polys(eso);
    let n = eso.q.len();
    let kp = FracPoly::constant(trk.kp);
    let mut dg_n = &lp.s[n - 1] + &kp;
    let mut g_m = &lp.phi[n - 1] + &kp;
    for (i, k) in trk.kd.iter().enumerate() {
        dg_n = &dg_n + &lp.s[i + 1].scale(*k);
        g_m = &g_m + &lp.phi[i + 1].scale(*k);
    }
    let kappa = eso.b0 / p.b();
    let h_n = &lp.s[n] - &(&lp.q_last * &p.denominator()).scale(kappa);
    LoopParts { lp, dg_n, g_m, h_n }
}

/// The four blocks of the closed loop.
pub fn loop_blocks(p: &PlantModel, design: &AdrcDesign) -> Result<LoopBlocks> {
    let parts = loop_parts(p, design);
    Ok(LoopBlocks {
        g_m: FracRational::from_poly(parts.g_m),
        g_n: FracRational::new(FracPoly::one(), parts.dg_n)?,
        h_m: FracRational::new(FracPoly::constant(-1.0), parts.lp.cp)?,
        h_n: FracRational::from_poly(parts.h_n),
    })
}

/// Numerator of `1 + G_m G_n H_m H_n`, the closed-loop characteristic polynomial.
pub fn closed_loop_char_poly(p: &PlantModel, design: &AdrcDesign) -> FracPoly {
    let parts = loop_parts(p, design);
    &(&parts.dg_n * &parts.lp.cp) - &(&parts.g_m * &parts.h_n)
}

/// Reference-to-output transfer `Y/R`.
pub fn closed_loop_tf(p: &PlantModel, design: &AdrcDesign) -> Result<FracRational> {
    let parts = loop_parts(p, design);
    let num = parts.lp.cp.scale(design.trk.kp);
    FracRational::new(num, closed_loop_char_poly(p, design))
}

/// Exact and approximate open loops.
#[derive(Clone, Debug)]
pub struct OpenLoop {
    pub exact: FracRational,
    pub approx: FracRational,
}

/// Open loop broken at `e0 = r − z_1`; for the integer-order baseline the
/// break is at the PD input, so both gains act on the error.
pub fn open_loop_tf(p: &PlantModel, design: &AdrcDesign) -> Result<OpenLoop> {
    let parts = loop_parts(p, design);
    let kp = design.trk.kp;
    let exact = if design.eso.variant == Variant::Io {
        // Z_1/U_0 = b(cp − H_n) / (b0·A·Q_N·Φ_{N−1} + b·β_N·S_{N−1})
        let n = design.eso.q.len();
        let lp = &parts.lp;
        let num = (&lp.cp - &parts.h_n).scale(p.b());
        let den = &(&(&p.denominator() * &lp.q_last) * &lp.phi[n - 1]).scale(design.eso.b0)
            + &lp.s[n - 1].scale(p.b() * design.eso.gains[n - 1]);
        let mut pd = FracPoly::constant(kp);
        for (i, k) in design.trk.kd.iter().enumerate() {
            pd = &pd + &lp.s[i + 1].scale(*k);
        }
        FracRational::new(&pd * &num, den)?
    } else {
        let kpp = FracPoly::constant(kp);
        let num = (&parts.lp.cp - &parts.h_n).scale(kp);
        let den = &(&(&parts.dg_n - &kpp) * &parts.lp.cp) - &(&(&parts.g_m - &kpp) * &parts.h_n);
        FracRational::new(num, den)?
    };
    Ok(OpenLoop {
        exact,
        approx: approx_open_loop(design)?,
    })
}

/// `(ω_g/s)^χ`.
pub fn bitf(omega_g: f64, chi: Order) -> Result<FracRational> {
    let c = order_to_f64(chi);
    FracRational::new(FracPoly::constant(omega_g.powf(c)), FracPoly::s_pow(chi))
}

/// `K / (s^χ (s^γ/ω_c + 1)^κ)`.
pub fn wbitf(k: f64, chi: Order, gamma: Order, omega_c: f64, kappa: u32) -> Result<FracRational> {
    if !(omega_c > 0.0) {
        return Err(Error::InvalidArgument(format!("ω_c={omega_c} must be positive")));
    }
    let filt = &FracPoly::monomial(1.0 / omega_c, gamma) + &FracPoly::one();
    FracRational::new(FracPoly::constant(k), &FracPoly::s_pow(chi) * &filt.pow(kappa))
}

/// Loop shape the controller targets when estimation is perfect.
pub fn approx_open_loop(design: &AdrcDesign) -> Result<FracRational> {
    let eso = &design.eso;
    let trk = &design.trk;
    match eso.variant {
        Variant::Ifo => {
            let chi = eso.q[0];
            let n = eso.q.len() - 1;
            let gamma = if n > 1 { eso.q[1] } else { Order::zero() };
            if trk.kd.is_empty() {
                return FracRational::new(FracPoly::constant(trk.kp), FracPoly::s_pow(chi));
            }
            let k = trk.kp / trk.omega_c.powi(n as i32 - 1);
            wbitf(k, chi, gamma, trk.omega_c, n as u32 - 1)
        }
        Variant::Fo => {
            let chi = eso.q[0];
            let kd = trk.kd.first().copied().unwrap_or(0.0);
            if kd == 0.0 {
                return FracRational::new(FracPoly::constant(trk.kp), FracPoly::s_pow(chi + Order::one()));
            }
            wbitf(trk.kp / kd, chi, Order::one(), kd, 1)
        }
        Variant::Io => {
            let m = eso.model_order();
            let mut num = vec![trk.kp];
            num.extend(trk.kd.iter().copied());
            FracRational::new(FracPoly::from_ascending(&num), FracPoly::s_pow(m))
        }
    }
}

/// Observer and compensated-plant transfers.
#[derive(Clone, Debug)]
pub struct EsoTransfer {
    /// `u → z_N`.
    pub u_to_ext: FracRational,
    /// `y → z_N`.
    pub y_to_ext: FracRational,
    /// `u0 → y` with the compensation loop closed around the plant.
    pub p: FracRational,
}

/// Observer transfers and the compensated plant.
pub fn eso_transfer(cfg: &EsoConfig, p: &PlantModel) -> Result<EsoTransfer> {
    cfg.validate()?;
    let lp = loop_polys(cfg);
    let n = cfg.q.len();
    let beta = cfg.gains[n - 1];
    let u_to_ext = FracRational::new(FracPoly::constant(-beta * cfg.b0), lp.cp.clone())?;
    let y_to_ext = FracRational::new(lp.s[n - 1].scale(beta), lp.cp.clone())?;
    let a = p.denominator();
    let den = &(&(&a * &lp.q_last) * &lp.phi[n - 1]).scale(cfg.b0) + &lp.s[n - 1].scale(p.b() * beta);
    let comp = FracRational::new(lp.cp.scale(p.b()), den)?;
    Ok(EsoTransfer {
        u_to_ext,
        y_to_ext,
        p: comp,
    })
}

/// Estimation error `Δ(ω) = 1 − (jω)^order P(jω)` of a compensated plant.
pub fn ideal_order(cfg: &EsoConfig) -> Order {
    cfg.model_order()
}

/// `ω_c` corner conventions of a WBITF filter `(s^γ/ω_c + 1)`: the value of
/// `ω_c` itself and the frequency where `|s^γ/ω_c| = 1`.
pub fn corner_frequencies(omega_c: f64, gamma: Order) -> (f64, f64) {
    (omega_c, omega_c.powf(1.0 / order_to_f64(gamma)))
}

/// Ratio `k_p/k_{d_1}`, the low-frequency gain of the two-state loops.
pub fn low_frequency_gain(trk: &TrackingConfig) -> Option<f64> {
    trk.kd.first().filter(|k| **k != 0.0).map(|k| trk.kp / k)
}

/// Exponent of `ω` in `Order` as `f64`; convenience for reporting.
pub fn order_f64(o: Order) -> f64 {
    o.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Per-frequency complex linear solves of the raw loop equations.

    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    use crate::fracnum::jw_pow;

    pub struct Point {
        pub z: Vec<Complex64>,
        pub u: Complex64,
        pub y: Complex64,
    }

    /// Inputs of the interconnection; `None` for `y` puts the plant in the loop.
    pub struct Drive {
        pub y: Option<Complex64>,
        pub r: Complex64,
        /// Replaces `kp(r − z_1)` with `kp·e0` when set.
        pub e0: Option<Complex64>,
        /// Replaces the whole controller with `b0·u = u0 − z_N` when set.
        pub u0: Option<Complex64>,
        /// Drives `u` directly, bypassing the controller.
        pub u: Option<Complex64>,
    }

    pub fn solve(cfg: &EsoConfig, trk: &TrackingConfig, plant: &PlantModel, w: f64, drive: &Drive) -> Point {
        let n = cfg.q.len();
        let ci = n - 2;
        let iu = n;
        let iy = n + 1;
        let dim = n + 2;
        let one = Complex64::new(1.0, 0.0);
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
        for i in 0..n {
            m[(i, i)] += jw_pow(w, cfg.q[i]);
            if i + 1 < n {
                m[(i, i + 1)] -= one;
            }
            // −β_i (y − z_1)
            m[(i, 0)] += cfg.gains[i];
            m[(i, iy)] -= cfg.gains[i];
            if i == ci {
                m[(i, iu)] -= cfg.b0;
            }
        }
        if let Some(u) = drive.u {
            m[(iu, iu)] = one;
            rhs[iu] = u;
        } else if let Some(u0) = drive.u0 {
            m[(iu, iu)] += cfg.b0;
            m[(iu, n - 1)] += one;
            rhs[iu] = u0;
        } else {
            // b0 u − kp(r − z1) + Σ kd z_{i+1} + z_N = 0
            m[(iu, iu)] += cfg.b0;
            m[(iu, n - 1)] += one;
            for (k, kd) in trk.kd.iter().enumerate() {
                m[(iu, k + 1)] += *kd;
            }
            match drive.e0 {
                Some(e0) => rhs[iu] = e0 * trk.kp,
                None => {
                    m[(iu, 0)] += trk.kp;
                    rhs[iu] = drive.r * trk.kp;
                }
            }
        }
        match drive.y {
            Some(y) => {
                m[(iy, iy)] = one;
                rhs[iy] = y;
            }
            None => {
                let s = Complex64::new(0.0, w);
                let a = plant.denominator().eval(s);
                m[(iy, iy)] = a;
                m[(iy, iu)] = Complex64::new(-plant.b(), 0.0);
            }
        }
        let x = m
            .lu()
            .solve(&nalgebra::DVector::from_vec(rhs))
            .expect("regular interconnection");
        Point {
            z: x.iter().take(n).copied().collect(),
            u: x[iu],
            y: x[iy],
        }
    }
}
