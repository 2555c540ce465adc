//! Command-line scenario runner.
//!
//! Every command loads a scenario file, works on each `[[design]]` in
//! parallel and writes its artifacts into `--out` in declaration order.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::adrc::{
    closed_loop_simulate, corner_frequencies, eso_transfer, ideal_order, low_frequency_gain, open_loop_tf, order_f64,
    AdrcDesign, SimResult,
};
use crate::analysis::{bode, bode_csv, margins, mse_delta, overshoot_fluctuation, step_metrics, FreqGrid, StepMetrics};
use crate::error::Error;
use crate::plant::PlantModel;
use crate::report::{fmt_g, svg_plot, write_atomic, Series};
use crate::scenario::{NamedDesign, Scenario, SimSpec};
use crate::stability::{char_poly_closed, sector_check, LambdaConvention, StabilityReport, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "fradrc",
    version,
    about = "Fractional-order ADRC design, simulation and stability runner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Gains, orders, loop margins and sector verdict per design.
    Design(Common),
    /// Closed-loop step runs, metrics and estimation-error curves.
    Simulate(Common),
    /// Open-loop Bode data and margins.
    Freq(Common),
    /// Closed-loop roots and sector verdict.
    Stability(Common),
    /// Step runs with `kp` scaled by each sweep multiplier.
    Sweep(Common),
    /// One-line-per-design comparison table.
    Compare(Common),
}

#[derive(clap::Args, Debug, Clone, PartialEq, Eq)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace fitted filters by GL FIR filters spanning the whole run.
    #[arg(long)]
    pub oracle_filters: bool,
    #[arg(long, value_enum, default_value_t = LambdaArg::Lcm)]
    pub lambda_convention: LambdaArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaArg {
    Lcm,
    Paper,
}

impl From<LambdaArg> for LambdaConvention {
    fn from(a: LambdaArg) -> Self {
        match a {
            LambdaArg::Lcm => LambdaConvention::Lcm,
            LambdaArg::Paper => LambdaConvention::Paper,
        }
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::OrderConstraint(_)
            | Error::Precondition(_)
            | Error::Unsupported(_)
            | Error::IncommensurateOrder { .. } => EXIT_VALIDATION,
            Error::Indeterminate(_) => EXIT_UNSTABLE,
            Error::DegenerateSystem(_)
            | Error::FitFailure { .. }
            | Error::PoisonedState
            | Error::NonFinite { .. }
            | Error::NotFound(_) => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: format!("output: {e}"),
        }
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

/// Text for stdout and the exit code of a successful run.
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli.command) {
        Ok(o) => {
            print!("{}", o.stdout);
            o.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cmd: &Command) -> CmdResult {
    let (Command::Design(c)
    | Command::Simulate(c)
    | Command::Freq(c)
    | Command::Stability(c)
    | Command::Sweep(c)
    | Command::Compare(c)) = cmd;
    let mut sc = Scenario::load(&c.config)?;
    if c.oracle_filters {
        sc = sc.with_oracle_filters();
    }
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
    }
    let out = c.out.clone();
    let ctx = Ctx {
        sc,
        out,
        conv: c.lambda_convention.into(),
    };
    match cmd {
        Command::Design(_) => cmd_design(&ctx),
        Command::Simulate(_) => cmd_simulate(&ctx),
        Command::Freq(_) => cmd_freq(&ctx),
        Command::Stability(_) => cmd_stability(&ctx),
        Command::Sweep(_) => cmd_sweep(&ctx),
        Command::Compare(_) => cmd_compare(&ctx),
    }
}

struct Ctx {
    sc: Scenario,
    out: Option<PathBuf>,
    conv: LambdaConvention,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> std::io::Result<()> {
        match &self.out {
            Some(dir) => write_atomic(&dir.join(name), contents),
            None => Ok(()),
        }
    }

    fn sim(&self) -> std::result::Result<&SimSpec, Failure> {
        self.sc.sim.as_ref().ok_or_else(|| Failure {
            code: EXIT_VALIDATION,
            message: "scenario has no [sim] section".into(),
        })
    }

    /// Runs `f` on every design in parallel; results keep declaration order.
    fn per_design<T: Send>(
        &self,
        f: impl Fn(&NamedDesign) -> std::result::Result<T, Failure> + Sync + Send,
    ) -> std::result::Result<Vec<T>, Failure> {
        self.sc
            .designs
            .par_iter()
            .map(f)
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }
}

fn verdict_code(reports: &[&StabilityReport]) -> i32 {
    if reports.iter().all(|r| r.verdict == Verdict::Stable) {
        EXIT_OK
    } else {
        EXIT_UNSTABLE
    }
}

fn stability_of(p: &PlantModel, d: &AdrcDesign, conv: LambdaConvention) -> crate::Result<StabilityReport> {
    sector_check(&char_poly_closed(p, d, conv)?)
}

struct DesignSummary {
    text: String,
    report: StabilityReport,
}

fn summarize(ctx: &Ctx, nd: &NamedDesign) -> std::result::Result<DesignSummary, Failure> {
    let d = &nd.design;
    let p = &ctx.sc.plant;
    let mut s = String::new();
    let _ = writeln!(s, "[{}]", nd.name);
    let _ = writeln!(s, "variant={}", d.eso.variant.name());
    let q: Vec<String> = d.eso.q.iter().map(|o| o.to_string()).collect();
    let _ = writeln!(s, "orders={}", q.join(","));
    let _ = writeln!(s, "model_order={}", d.eso.model_order());
    let _ = writeln!(s, "eso_gains={}", join(&d.eso.gains));
    let _ = writeln!(s, "b0={}", fmt_g(d.eso.b0));
    let _ = writeln!(s, "fs={}", fmt_g(d.eso.fs));
    let _ = writeln!(s, "kp={}", fmt_g(d.trk.kp));
    let _ = writeln!(s, "kd={}", join(&d.trk.kd));
    let _ = writeln!(s, "omega_c={}", fmt_g(d.trk.omega_c));
    let _ = writeln!(s, "omega_g={}", fmt_g(d.trk.omega_g));
    if let Some(g) = d.eso.q.get(1) {
        let (c, w) = corner_frequencies(d.trk.omega_c, *g);
        let _ = writeln!(s, "wbitf_corner={},{}", fmt_g(c), fmt_g(w));
    }
    if let Some(k) = low_frequency_gain(&d.trk) {
        let _ = writeln!(s, "low_frequency_gain={}", fmt_g(k));
    }
    let ol = open_loop_tf(p, d)?;
    for (label, g) in [("exact", &ol.exact), ("approx", &ol.approx)] {
        match margins(g) {
            Ok(m) => {
                let _ = writeln!(s, "crossover_{label}={}", fmt_g(m.omega_gc));
                let _ = writeln!(s, "phase_margin_{label}={}", fmt_g(m.phase_margin));
            }
            Err(_) => {
                let _ = writeln!(s, "crossover_{label}=none");
            }
        }
    }
    let report = stability_of(p, d, ctx.conv)?;
    let _ = writeln!(s, "verdict={}", report.verdict.name());
    let _ = writeln!(s, "min_arg_margin={}", fmt_g(report.min_arg_margin));
    if report.condition_warning {
        let _ = writeln!(s, "condition_warning=true");
    }
    Ok(DesignSummary { text: s, report })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_g(*x)).collect::<Vec<_>>().join(",")
}

fn cmd_design(ctx: &Ctx) -> CmdResult {
    let sums = ctx.per_design(|nd| summarize(ctx, nd))?;
    let text: String = sums.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n");
    ctx.write("design.txt", &text)?;
    let reports: Vec<_> = sums.iter().map(|s| &s.report).collect();
    Ok(Outcome {
        stdout: text,
        code: verdict_code(&reports),
    })
}

fn cmd_stability(ctx: &Ctx) -> CmdResult {
    let reports = ctx.per_design(|nd| Ok(stability_of(&ctx.sc.plant, &nd.design, ctx.conv)?))?;
    let mut text = String::new();
    for (nd, r) in ctx.sc.designs.iter().zip(&reports) {
        ctx.write(&format!("{}_roots.csv", nd.name), &r.to_csv())?;
        let _ = writeln!(text, "[{}]\n{}", nd.name, r.summary());
    }
    ctx.write("stability.txt", &text)?;
    let refs: Vec<_> = reports.iter().collect();
    Ok(Outcome {
        stdout: text,
        code: verdict_code(&refs),
    })
}

fn freq_grid(ctx: &Ctx) -> crate::Result<FreqGrid> {
    match ctx.sc.freq {
        Some((lo, hi, ppd)) => FreqGrid::new(lo, hi, ppd),
        None => Ok(FreqGrid::default_mse()),
    }
}

fn cmd_freq(ctx: &Ctx) -> CmdResult {
    let grid = freq_grid(ctx)?;
    let rows = ctx.per_design(|nd| {
        let ol = open_loop_tf(&ctx.sc.plant, &nd.design)?;
        let exact = bode(&ol.exact, &grid.omegas);
        let approx = bode(&ol.approx, &grid.omegas);
        let m = margins(&ol.exact)?;
        Ok((exact, approx, m))
    })?;
    let mut text = String::new();
    let mut mags = Vec::new();
    for (nd, (exact, approx, m)) in ctx.sc.designs.iter().zip(&rows) {
        ctx.write(&format!("{}_bode.csv", nd.name), &bode_csv(exact))?;
        ctx.write(&format!("{}_bode_approx.csv", nd.name), &bode_csv(approx))?;
        let _ = writeln!(
            text,
            "{}: crossover={} phase_margin={}{}",
            nd.name,
            fmt_g(m.omega_gc),
            fmt_g(m.phase_margin),
            if m.multiple { " multiple_crossings" } else { "" }
        );
        mags.push(exact.iter().map(|b| b.mag_db).collect::<Vec<_>>());
    }
    let series: Vec<Series> = ctx
        .sc
        .designs
        .iter()
        .zip(&mags)
        .map(|(nd, y)| Series {
            name: &nd.name,
            x: &grid.omegas,
            y,
        })
        .collect();
    ctx.write(
        "bode.svg",
        &svg_plot(&ctx.sc.name, "omega [rad/s]", "|L| [dB]", &series, true),
    )?;
    ctx.write("freq.txt", &text)?;
    Ok(Outcome {
        stdout: text,
        code: EXIT_OK,
    })
}

fn trajectory_csv(s: &SimResult) -> String {
    let n = s.z.len();
    let mut header: Vec<String> = ["t", "r", "y", "u"].iter().map(|h| h.to_string()).collect();
    header.extend((1..=n).map(|i| format!("z{i}")));
    header.extend(["f_hat", "f_true", "d"].iter().map(|h| h.to_string()));
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..s.len() {
        let mut row = vec![fmt_g(s.t[k]), fmt_g(s.r[k]), fmt_g(s.y[k]), fmt_g(s.u[k])];
        row.extend(s.z.iter().map(|z| fmt_g(z[k])));
        row.extend([fmt_g(s.f_hat[k]), fmt_g(s.f_true[k]), fmt_g(s.d[k])]);
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn run_sim(ctx: &Ctx, d: &AdrcDesign, sim: &SimSpec) -> std::result::Result<(SimResult, StepMetrics), Failure> {
    let s = closed_loop_simulate(&ctx.sc.plant, d, sim.reference, &sim.disturbance, sim.dt, sim.t_end)?;
    let m = step_metrics(&s, sim.reference, &sim.disturbance)?;
    Ok((s, m))
}

fn cmd_simulate(ctx: &Ctx) -> CmdResult {
    let grid = freq_grid(ctx)?;
    let mut text = String::new();
    let mut code = EXIT_OK;

    let deltas = ctx.per_design(|nd| {
        let tf = eso_transfer(&nd.design.eso, &ctx.sc.plant)?;
        Ok(mse_delta(&tf.p, ideal_order(&nd.design.eso), &grid)?)
    })?;
    for (nd, dl) in ctx.sc.designs.iter().zip(&deltas) {
        ctx.write(&format!("{}_delta.csv", nd.name), &dl.to_csv())?;
        let _ = writeln!(
            text,
            "{}: model_order={} mse_delta={} excluded={}",
            nd.name,
            order_f64(ideal_order(&nd.design.eso)),
            fmt_g(dl.mse),
            dl.excluded
        );
    }
    let abs: Vec<Vec<f64>> = deltas
        .iter()
        .map(|d| d.delta.iter().map(|c| c.norm()).collect())
        .collect();
    let series: Vec<Series> = ctx
        .sc
        .designs
        .iter()
        .zip(deltas.iter().zip(&abs))
        .map(|(nd, (d, y))| Series {
            name: &nd.name,
            x: &d.omegas,
            y,
        })
        .collect();
    ctx.write(
        "delta.svg",
        &svg_plot(&ctx.sc.name, "omega [rad/s]", "|delta|", &series, true),
    )?;

    if let Some(sim) = &ctx.sc.sim {
        let runs = ctx.per_design(|nd| run_sim(ctx, &nd.design, sim))?;
        for (nd, (s, m)) in ctx.sc.designs.iter().zip(&runs) {
            ctx.write(&format!("{}_trajectory.csv", nd.name), &trajectory_csv(s))?;
            let mut mt = m.to_text();
            let _ = writeln!(mt, "diverged={}", s.diverged());
            ctx.write(&format!("{}_metrics.txt", nd.name), &mt)?;
            let _ = writeln!(text, "[{}]\n{}", nd.name, mt);
            if s.diverged() {
                code = EXIT_UNSTABLE;
            }
        }
        let series: Vec<Series> = ctx
            .sc
            .designs
            .iter()
            .zip(&runs)
            .map(|(nd, (s, _))| Series {
                name: &nd.name,
                x: &s.t,
                y: &s.y,
            })
            .collect();
        ctx.write("step.svg", &svg_plot(&ctx.sc.name, "t [s]", "y", &series, false))?;
    }
    ctx.write("simulate.txt", &text)?;
    Ok(Outcome { stdout: text, code })
}

fn cmd_sweep(ctx: &Ctx) -> CmdResult {
    let sim = ctx.sim()?;
    let ks = ctx.sc.sweep.clone().ok_or_else(|| Failure {
        code: EXIT_VALIDATION,
        message: "scenario has no [sweep] section".into(),
    })?;
    let jobs: Vec<(usize, f64)> = (0..ctx.sc.designs.len())
        .flat_map(|i| ks.iter().map(move |k| (i, *k)))
        .collect();
    let results: Vec<(usize, f64, SimResult, StepMetrics)> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let d = ctx.sc.designs[i].design.with_kp_scaled(k);
            run_sim(ctx, &d, sim).map(|(s, m)| (i, k, s, m))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<std::result::Result<_, _>>()?;

    let mut csv = String::from("design,k,peak_value,overshoot,rise_time,settling_time,steady_state_error,diverged\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), fmt_g);
    for (i, k, s, m) in &results {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            ctx.sc.designs[*i].name,
            fmt_g(*k),
            fmt_g(m.peak_value),
            fmt_g(m.overshoot),
            opt(m.rise_time),
            opt(m.settling_time),
            fmt_g(m.steady_state_error),
            s.diverged()
        );
    }
    ctx.write("sweep.csv", &csv)?;
    let mut text = String::new();
    let mut code = EXIT_OK;
    for (i, nd) in ctx.sc.designs.iter().enumerate() {
        let mine: Vec<(f64, StepMetrics)> = results.iter().filter(|r| r.0 == i).map(|r| (r.1, r.3)).collect();
        if results.iter().any(|r| r.0 == i && r.2.diverged()) {
            code = EXIT_UNSTABLE;
        }
        let f = overshoot_fluctuation(&mine, sim.reference)?;
        let _ = writeln!(text, "{}: overshoot_fluctuation={}", nd.name, fmt_g(f));
    }
    ctx.write("sweep.txt", &text)?;
    Ok(Outcome { stdout: text, code })
}

fn cmd_compare(ctx: &Ctx) -> CmdResult {
    let grid = freq_grid(ctx)?;
    let rows = ctx.per_design(|nd| {
        let d = &nd.design;
        let ol = open_loop_tf(&ctx.sc.plant, d)?;
        let m = margins(&ol.exact).ok();
        let rep = stability_of(&ctx.sc.plant, d, ctx.conv)?;
        let tf = eso_transfer(&d.eso, &ctx.sc.plant)?;
        let mse = mse_delta(&tf.p, ideal_order(&d.eso), &grid)
            .map(|x| x.mse)
            .unwrap_or(f64::NAN);
        let step = match &ctx.sc.sim {
            Some(sim) => Some(run_sim(ctx, d, sim)?),
            None => None,
        };
        Ok((m, rep, mse, step))
    })?;
    let mut csv = String::from(
        "design,variant,crossover,phase_margin,verdict,mse_delta,overshoot,settling_time,steady_state_error,dist_max_deviation\n",
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), fmt_g);
    for (nd, (m, rep, mse, step)) in ctx.sc.designs.iter().zip(&rows) {
        let sm = step.as_ref().map(|(_, m)| m);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            nd.name,
            nd.design.eso.variant.name(),
            opt(m.as_ref().map(|m| m.omega_gc)),
            opt(m.as_ref().map(|m| m.phase_margin)),
            rep.verdict.name(),
            fmt_g(*mse),
            opt(sm.map(|m| m.overshoot)),
            opt(sm.and_then(|m| m.settling_time)),
            opt(sm.map(|m| m.steady_state_error)),
            opt(sm.map(|m| m.dist_max_deviation)),
        );
    }
    ctx.write("compare.csv", &csv)?;
    let reports: Vec<_> = rows.iter().map(|r| &r.1).collect();
    Ok(Outcome {
        stdout: csv,
        code: verdict_code(&reports),
    })
}
