use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use polyshare::harness::{RoleMetrics, RunMetrics, Session, SessionConfig};
use polyshare::plant::{run_closed_loop, ClosedLoop, EvaluatorConfig, PlantModel, SimConfig};
use polyshare::scheme::scheme;
use polyshare::sharing::ZeroShareMode;
use polyshare::{
    encode_state, evaluate_plaintext, evaluate_secure, plan_evaluation, quantize_law, ConstantMode, QuantizedLaw,
};

use crate::lawfile::{FormatSection, LawFile};

pub const SCHEMES: [&str; 2] = ["three-party", "n-party"];

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Law definition file (TOML).
    #[arg(long)]
    pub law: PathBuf,
    /// Radix; overrides the law file.
    #[arg(long)]
    pub beta: Option<u64>,
    /// Fractional digits; overrides the law file.
    #[arg(long = "xpost")]
    pub x_post: Option<u32>,
    /// Integer digits of the result; overrides the law file.
    #[arg(long = "upre")]
    pub u_pre: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// in-memory | framed-stream
    #[arg(long, default_value = "in-memory")]
    pub transport: String,
    /// correlated | communication
    #[arg(long, default_value = "correlated")]
    pub zero_sharing_mode: ZeroShareMode,
    /// Split a constant term over the servers instead of handing it to the collector.
    #[arg(long)]
    pub share_constants: bool,
    /// Write the report (or trajectory) here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn quantized_law(&self) -> Result<QuantizedLaw> {
        let file = LawFile::load(&self.law)?;
        let law = file.law()?;
        let overrides = FormatSection { beta: self.beta, x_post: self.x_post, u_pre: self.u_pre, degree: None };
        let fmt = file.format(overrides, &law)?;
        let q = quantize_law(&law, &fmt)?;
        for w in q.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(q)
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            seed: self.seed,
            transport: self.transport.clone(),
            zero_sharing: self.zero_sharing_mode,
            ..SessionConfig::default()
        }
    }

    pub fn constant_mode(&self) -> ConstantMode {
        if self.share_constants {
            ConstantMode::Shared
        } else {
            ConstantMode::Direct
        }
    }

    fn open(&self, q: &QuantizedLaw, scheme_name: &str, config: SessionConfig) -> Result<Session> {
        let s = scheme(scheme_name)?;
        let plan = plan_evaluation(q, s.as_ref(), self.constant_mode())?;
        Ok(Session::open(&plan, config)?)
    }
}

fn check_scheme(name: &str) -> Result<()> {
    ensure!(SCHEMES.contains(&name), "unknown scheme '{name}', expected one of {SCHEMES:?}");
    Ok(())
}

fn metrics_csv(rows: impl IntoIterator<Item = (Option<u32>, RunMetrics)>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step"];
    header.extend(RunMetrics::CSV_HEADER);
    w.write_record(&header)?;
    for (step, m) in rows {
        let mut rec = vec![step.map_or_else(|| "-".to_string(), |s| s.to_string())];
        rec.extend(m.csv_row().iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// three-party | n-party
    #[arg(long, default_value = "three-party")]
    pub scheme: String,
    /// Comma-separated state vector.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub state: Vec<f64>,
    /// Corrupt one share in transit to show that the mismatch check fires.
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub text: String,
    pub matched: bool,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    check_scheme(&args.scheme)?;
    let q = args.common.quantized_law()?;
    ensure!(args.state.len() == q.n_x(), "the law has {} states, --state gave {}", q.n_x(), args.state.len());
    let config = SessionConfig { inject_fault: args.inject_fault, ..args.common.session_config() };
    let mut session = args.common.open(&q, &args.scheme, config)?;
    let x = encode_state(&args.state, q.format())?;
    let secure = evaluate_secure(&q, &mut session, &x)?;
    let plain = evaluate_plaintext(&q, &x)?;
    let matched = secure == plain;
    let ring = q.ring();
    let mut text = String::new();
    writeln!(text, "scheme: {}", args.scheme)?;
    writeln!(text, "transport: {}", args.common.transport)?;
    writeln!(text, "zero_sharing: {}", args.common.zero_sharing_mode)?;
    writeln!(text, "constants: {}", args.common.constant_mode())?;
    writeln!(text, "modulus: {}", ring.modulus())?;
    let state: Vec<String> = args.state.iter().map(f64::to_string).collect();
    writeln!(text, "state: {}", state.join(","))?;
    writeln!(text, "u_secure: {}", q.decode(secure))?;
    writeln!(text, "u_plaintext: {}", q.decode(plain))?;
    writeln!(text, "u_units: {} (scale {})", ring.signed(secure.value), secure.scale)?;
    writeln!(text, "match: {matched}")?;
    if args.inject_fault {
        writeln!(text, "fault_injected: true")?;
    }
    writeln!(text, "pool_size: {}", session.plan().pool_size)?;
    text.push_str(&metrics_csv([(Some(1), session.step_metrics().clone())])?);
    Ok(EvalReport { text, matched })
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// three-party | n-party | plaintext
    #[arg(long, default_value = "three-party")]
    pub scheme: String,
    /// Control steps to simulate.
    #[arg(long, default_value_t = 1000)]
    pub steps: u32,
    /// Sample period in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub ts: f64,
    /// RK4 substeps per sample period.
    #[arg(long, default_value_t = 10)]
    pub substeps: u32,
    /// Initial state.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "2,-2")]
    pub x0: Vec<f64>,
    /// Per-step metrics CSV; defaults to `<out>.metrics.csv` when --out is given.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub run: ClosedLoop,
    pub trajectory_csv: String,
    pub metrics_csv: String,
    pub summary: String,
}

pub fn metrics_path(out: &Path) -> PathBuf {
    out.with_extension("metrics.csv")
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulateReport> {
    if args.scheme != EvaluatorConfig::PLAINTEXT {
        check_scheme(&args.scheme)?;
    }
    let [a, b] = args.x0[..] else { bail!("--x0 needs two values, got {}", args.x0.len()) };
    let q = args.common.quantized_law()?;
    let cfg =
        SimConfig { ts: args.ts, substeps: args.substeps, horizon: args.steps, x0: [a, b], ..SimConfig::default() };
    let evaluator = EvaluatorConfig {
        scheme: args.scheme.clone(),
        session: args.common.session_config(),
        constant_mode: args.common.constant_mode(),
    };
    let run = run_closed_loop(&q, &PlantModel::default(), &cfg, &evaluator)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "t", "x1", "x2", "u_quantized", "u_decoded"])?;
    for r in &run.rows {
        w.write_record([
            r.step.to_string(),
            r.t.to_string(),
            r.x1.to_string(),
            r.x2.to_string(),
            r.u_quantized.to_string(),
            r.u_decoded.to_string(),
        ])?;
    }
    let trajectory_csv = String::from_utf8(w.into_inner()?)?;
    let metrics_csv = metrics_csv(run.step_metrics.iter().enumerate().map(|(i, m)| (Some(i as u32), m.clone())))?;

    let mut summary = String::new();
    writeln!(summary, "scheme: {}", args.scheme)?;
    writeln!(summary, "steps: {}", run.rows.len())?;
    writeln!(summary, "x0: {},{}", a, b)?;
    writeln!(summary, "final_state: {},{}", run.final_state[0], run.final_state[1])?;
    writeln!(summary, "max_abs_u: {}", run.max_abs_u())?;
    writeln!(summary, "diverged: {}", run.diverged)?;
    Ok(SimulateReport { run, trajectory_csv, metrics_csv, summary })
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of random states evaluated per scheme.
    #[arg(long, default_value_t = 100)]
    pub steps: u32,
}

#[derive(Debug, Clone)]
pub struct SchemeBench {
    pub scheme: &'static str,
    pub pool_size: usize,
    /// Counters of the first step.
    pub per_step: RunMetrics,
    /// Whether every step produced exactly the same counters.
    pub stable: bool,
    pub all_exact: bool,
    pub wall_micros: u128,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub schemes: Vec<SchemeBench>,
    /// Reproducible part: counts only.
    pub counts: String,
    /// Wall-clock section; depends on the machine.
    pub timing: String,
}

impl BenchReport {
    pub fn render(&self) -> String {
        format!("{}\n{}", self.counts, self.timing)
    }
}

fn role_row(w: &mut csv::Writer<Vec<u8>>, b: &SchemeBench, role: &str, m: &RoleMetrics) -> Result<()> {
    w.write_record([
        b.scheme.to_string(),
        b.pool_size.to_string(),
        role.to_string(),
        m.ops.additions.to_string(),
        m.ops.multiplications.to_string(),
        m.ops.draws.to_string(),
        m.messages_sent.to_string(),
        m.bytes_sent.to_string(),
    ])?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    ensure!(args.steps > 0, "--steps must be positive");
    let q = args.common.quantized_law()?;
    let mut rng = ChaCha20Rng::seed_from_u64(args.common.seed);
    let units = (q.format().units_per_one() as i64) * 6 - 1;
    let states: Vec<Vec<f64>> = (0..args.steps)
        .map(|_| {
            (0..q.n_x()).map(|_| rng.gen_range(-units..=units) as f64 / q.format().units_per_one() as f64).collect()
        })
        .collect();
    let mut schemes = Vec::new();
    for name in SCHEMES {
        let mut session = args.common.open(&q, name, args.common.session_config())?;
        let mut first: Option<RunMetrics> = None;
        let mut stable = true;
        let mut all_exact = true;
        let started = Instant::now();
        for x in &states {
            let enc = encode_state(x, q.format())?;
            let u = evaluate_secure(&q, &mut session, &enc)?;
            all_exact &= u == evaluate_plaintext(&q, &enc)?;
            let m = session.step_metrics().clone();
            match &first {
                None => first = Some(m),
                Some(f) => stable &= *f == m,
            }
        }
        let wall_micros = started.elapsed().as_micros();
        schemes.push(SchemeBench {
            scheme: session.scheme().name(),
            pool_size: session.plan().pool_size,
            per_step: first.context("no steps ran")?,
            stable,
            all_exact,
            wall_micros,
        });
    }

    let mut counts = String::new();
    writeln!(counts, "# law: {} terms, degree {}, modulus {}", q.terms().len(), q.degree(), q.ring().modulus())?;
    writeln!(counts, "# per-step counts, {} random states, seed {}", args.steps, args.common.seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "pool_size", "role", "additions", "multiplications", "draws", "messages", "bytes"])?;
    for b in &schemes {
        let m = &b.per_step;
        role_row(&mut w, b, "distributor", &m.distributor)?;
        role_row(&mut w, b, "servers", &m.server)?;
        for (i, s) in m.per_server.iter().enumerate() {
            role_row(&mut w, b, &format!("server-{i}"), s)?;
        }
        role_row(&mut w, b, "collector", &m.collector)?;
    }
    counts.push_str(&String::from_utf8(w.into_inner()?)?);
    writeln!(counts, "# per-step traffic")?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scheme",
        "server_to_server",
        "reshare_messages",
        "zero_share_messages",
        "total_messages",
        "counts_stable",
        "all_exact",
    ])?;
    for b in &schemes {
        let m = &b.per_step;
        w.write_record([
            b.scheme.to_string(),
            m.server_to_server.to_string(),
            m.reshare_messages.to_string(),
            m.zero_share_messages.to_string(),
            m.total_messages().to_string(),
            b.stable.to_string(),
            b.all_exact.to_string(),
        ])?;
    }
    counts.push_str(&String::from_utf8(w.into_inner()?)?);

    let mut timing = String::from("# wall time (machine-specific, not reproducible)\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "steps", "total_us", "per_step_us"])?;
    for b in &schemes {
        w.write_record([
            b.scheme.to_string(),
            args.steps.to_string(),
            b.wall_micros.to_string(),
            (b.wall_micros / args.steps as u128).to_string(),
        ])?;
    }
    timing.push_str(&String::from_utf8(w.into_inner()?)?);
    Ok(BenchReport { schemes, counts, timing })
}
