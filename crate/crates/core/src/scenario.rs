//! Scenario files: plant, controller designs, simulation settings and sweeps.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! name = "example"
//!
//! [plant]
//! a = [10.0, 10.0]      # a0, a1, … of s^m + … + a1 s + a0
//! b = 5.0
//!
//! [sim]                 # optional
//! dt = 0.000125
//! t_end = 0.6
//! reference = 1.0
//! disturbance = { t_on = 0.3, amplitude = 100.0 }
//!
//! [sweep]               # optional
//! k = [0.5, 1.0, 1.5]
//!
//! [[design]]
//! name = "ifo"
//! variant = "ifo"       # ifo | fo | io
//! chi = 1.2
//! nu = 1.2
//! omega0 = 1200.0
//! b0 = 5.0
//! kp = 1.2e6
//! kd = [4000.0]
//! filter_order = 6
//! band = [1.0, 2513.2741228718346]
//! ```
//!
//! The observer rate is `1/dt`; a `fs` key, when present, must agree.

use std::path::Path;

use serde::Deserialize;

use crate::adrc::{derive_orders, tracking_gains, AdrcDesign, EsoConfig, FilterBank, TrackingConfig, Variant};
use crate::error::{Error, Result};
use crate::fracnum::order_from_f64;
use crate::plant::{DisturbanceProfile, PlantModel};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub plant: PlantSection,
    pub sim: Option<SimSection>,
    pub sweep: Option<SweepSection>,
    pub freq: Option<FreqSection>,
    #[serde(rename = "design")]
    pub designs: Vec<DesignSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub reference: f64,
    pub disturbance: Option<DisturbanceSection>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub t_on: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub k: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqSection {
    pub lo: f64,
    pub hi: f64,
    pub points_per_decade: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub name: String,
    pub variant: String,
    pub omega0: f64,
    pub b0: f64,
    pub chi: Option<f64>,
    pub nu: Option<f64>,
    /// FO split order `σ`.
    pub split: Option<f64>,
    pub kp: Option<f64>,
    pub kd: Option<Vec<f64>>,
    pub omega_c: Option<f64>,
    pub omega_g: Option<f64>,
    pub kip: Option<f64>,
    pub kid: Option<f64>,
    pub filter_order: Option<usize>,
    pub band: Option<[f64; 2]>,
    pub fs: Option<f64>,
}

/// Validated simulation settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSpec {
    pub dt: f64,
    pub t_end: f64,
    pub reference: f64,
    pub disturbance: DisturbanceProfile,
}

/// Validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub plant: PlantModel,
    pub designs: Vec<NamedDesign>,
    pub sim: Option<SimSpec>,
    pub sweep: Option<Vec<f64>>,
    pub freq: Option<(f64, f64, usize)>,
}

#[derive(Clone, Debug)]
pub struct NamedDesign {
    pub name: String,
    pub design: AdrcDesign,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(f: ScenarioFile) -> Result<Self> {
        let plant = PlantModel::new(f.plant.a.clone(), f.plant.b).map_err(|e| field("plant", e))?;
        let sim = match &f.sim {
            Some(s) => Some(sim_spec(s)?),
            None => None,
        };
        // without a simulation grid the observer rate is taken from the design
        let fs_sim = sim.as_ref().map(|s| 1.0 / s.dt);
        if f.designs.is_empty() {
            return Err(Error::Config("at least one [[design]] is required".into()));
        }
        let mut designs = Vec::with_capacity(f.designs.len());
        for d in &f.designs {
            if designs.iter().any(|n: &NamedDesign| n.name == d.name) {
                return Err(Error::Config(format!("duplicate design name `{}`", d.name)));
            }
            let design =
                build_design(d, plant.order(), fs_sim).map_err(|e| field(&format!("design `{}`", d.name), e))?;
            designs.push(NamedDesign {
                name: d.name.clone(),
                design,
            });
        }
        let sweep = match &f.sweep {
            Some(s) => {
                if s.k.is_empty() || s.k.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                    return Err(Error::Config(
                        "sweep.k must be a non-empty list of positive multipliers".into(),
                    ));
                }
                Some(s.k.clone())
            }
            None => None,
        };
        let freq = match &f.freq {
            Some(q) => {
                if !(q.lo > 0.0 && q.hi > q.lo && q.points_per_decade > 0) {
                    return Err(Error::Config("freq needs 0 < lo < hi and points_per_decade > 0".into()));
                }
                Some((q.lo, q.hi, q.points_per_decade))
            }
            None => None,
        };
        Ok(Scenario {
            name: f.name,
            description: f.description,
            plant,
            designs,
            sim,
            sweep,
            freq,
        })
    }

    /// Every design with its fitted filters replaced by exact-from-rest GL filters.
    pub fn with_oracle_filters(&self) -> Self {
        let memory_len = match &self.sim {
            Some(s) => crate::plant::grid_steps(s.dt, s.t_end)
                .map(|n| n + 1)
                .unwrap_or(4096)
                .max(2),
            None => 4096,
        };
        let mut out = self.clone();
        for d in &mut out.designs {
            d.design.eso.bank = FilterBank::Oracle { memory_len };
        }
        out
    }
}

fn field(name: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{name}: {m}")),
        other => Error::Config(format!("{name}: {other}")),
    }
}

fn sim_spec(s: &SimSection) -> Result<SimSpec> {
    if !(s.dt > 0.0 && s.dt.is_finite()) {
        return Err(Error::Config(format!("sim.dt = {} must be positive", s.dt)));
    }
    if !(s.t_end > 0.0 && s.t_end.is_finite()) {
        return Err(Error::Config(format!("sim.t_end = {} must be positive", s.t_end)));
    }
    if !(s.reference.is_finite() && s.reference != 0.0) {
        return Err(Error::Config("sim.reference must be finite and non-zero".into()));
    }
    let disturbance = match &s.disturbance {
        Some(d) => DisturbanceProfile::step(d.t_on, d.amplitude).map_err(|e| field("sim.disturbance", e))?,
        None => DisturbanceProfile::None,
    };
    Ok(SimSpec {
        dt: s.dt,
        t_end: s.t_end,
        reference: s.reference,
        disturbance,
    })
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

fn build_design(d: &DesignSection, m: usize, fs_sim: Option<f64>) -> Result<AdrcDesign> {
    let fs = match (d.fs, fs_sim) {
        (Some(a), Some(b)) if (a - b).abs() > 1e-9 * b => {
            return Err(Error::Config(format!("fs = {a} disagrees with 1/dt = {b}")));
        }
        (_, Some(b)) => b,
        (Some(a), None) => a,
        (None, None) => return Err(Error::Config("`fs` is required when there is no [sim] section".into())),
    };
    let bank = match d.filter_order {
        Some(order) => FilterBank::Fitted {
            order,
            band: d.band.map(|b| (b[0], b[1])),
        },
        None => FilterBank::oracle(),
    };
    let variant = match d.variant.as_str() {
        "ifo" => Variant::Ifo,
        "fo" => Variant::Fo,
        "io" => Variant::Io,
        other => return Err(Error::Config(format!("variant `{other}` is not one of ifo, fo, io"))),
    };
    let positive = |v: f64, key: &str| -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("`{key}` = {v} must be positive")))
        }
    };
    positive(d.omega0, "omega0")?;
    if let Some(kd) = &d.kd {
        if let Some(k) = kd.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::Config(format!("`kd` entries must be positive, got {k}")));
        }
    }
    match variant {
        Variant::Io => {
            let eso = EsoConfig::io(m, d.omega0, d.b0, fs)?;
            let trk = match (d.kip, d.kid) {
                (Some(kip), Some(kid)) => {
                    positive(kip, "kip")?;
                    positive(kid, "kid")?;
                    TrackingConfig::io(kip, kid)?
                }
                _ => {
                    let kp = need(d.kp, "kp")?;
                    positive(kp, "kp")?;
                    TrackingConfig::from_gains(kp, d.kd.clone().unwrap_or_default(), num_traits::One::one())?
                }
            };
            AdrcDesign::new(eso, trk)
        }
        Variant::Ifo => {
            let orders = derive_orders(m, need(d.chi, "chi")?, need(d.nu, "nu")?)?;
            let eso = EsoConfig::ifo(&orders, d.omega0, d.b0, fs, bank)?;
            let trk = match (d.kp, d.omega_c, d.omega_g) {
                (Some(kp), None, None) => {
                    positive(kp, "kp")?;
                    TrackingConfig::from_gains(kp, d.kd.clone().unwrap_or_default(), orders.chi)?
                }
                (None, Some(wc), Some(wg)) => tracking_gains(&orders, wc, wg)?,
                _ => return Err(Error::Config("give either `kp`/`kd` or `omega_c`/`omega_g`".into())),
            };
            AdrcDesign::new(eso, trk)
        }
        Variant::Fo => {
            let chi = order_from_f64(need(d.chi, "chi")?)?;
            let split = d.split.map(order_from_f64).transpose()?;
            let eso = EsoConfig::fo(m, chi, split, d.omega0, d.b0, fs, bank)?;
            let kp = need(d.kp, "kp")?;
            positive(kp, "kp")?;
            AdrcDesign::new(
                eso,
                TrackingConfig::from_gains(kp, d.kd.clone().unwrap_or_default(), chi)?,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
[plant]
a = [10.0, 10.0]
b = 5.0
[sim]
dt = 0.000125
t_end = 0.1
[[design]]
name = "ifo"
variant = "ifo"
chi = 1.2
nu = 1.2
omega0 = 1200.0
b0 = 5.0
kp = 1.2e6
kd = [4000.0]
[[design]]
name = "io"
variant = "io"
omega0 = 1200.0
b0 = 5.0
kip = 4466.16
kid = 0.02562
"#;

    #[test]
    fn parses_and_validates() {
        let s = Scenario::parse(BASE).unwrap();
        assert_eq!(s.designs.len(), 2);
        assert_eq!(s.designs[0].design.eso.fs, 8000.0);
        assert_eq!(s.designs[1].design.trk.kd, vec![4466.16 * 0.02562]);
        assert_eq!(s.sim.as_ref().unwrap().reference, 1.0);
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = BASE.replace("kd = [4000.0]", "kd = [0.0]");
        let e = Scenario::parse(&bad).unwrap_err();
        assert!(
            matches!(&e, Error::Config(m) if m.contains("design `ifo`") && m.contains("kd")),
            "{e}"
        );
        let bad = BASE.replace("variant = \"io\"", "variant = \"pid\"");
        assert!(matches!(Scenario::parse(&bad), Err(Error::Config(m)) if m.contains("pid")));
        let bad = BASE.replace("b = 5.0", "b = 5.0\nc = 1.0");
        let e = Scenario::parse(&bad).unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("line")), "{e}");
        let bad = BASE.replace(
            "omega0 = 1200.0\nb0 = 5.0\nkip",
            "omega0 = 1200.0\nb0 = 5.0\nfs = 1000.0\nkip",
        );
        assert!(matches!(Scenario::parse(&bad), Err(Error::Config(m)) if m.contains("1/dt")));
        let bad = BASE.replace("t_end = 0.1", "t_end = 0.0");
        assert!(matches!(Scenario::parse(&bad), Err(Error::Config(m)) if m.contains("t_end")));
    }

    #[test]
    fn oracle_filters_cover_the_run() {
        let s = Scenario::parse(BASE).unwrap().with_oracle_filters();
        assert_eq!(s.designs[0].design.eso.bank, FilterBank::Oracle { memory_len: 801 });
    }
}
