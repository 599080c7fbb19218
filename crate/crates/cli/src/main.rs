//! `qsimcost` command-line driver.
//!
//! Exit codes: 0 success, 1 failed check or certificate not achieved, 2 unreadable input or
//! bad arguments, 3 enumeration guard exceeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qsimcost::error::Error;
use qsimcost::exact::{certify, replay_certificate, to_decimal, DEFAULT_DENOMINATOR};
use qsimcost::geometry::{octahedron, snub_cube, snub_cube_unrotated, thomson};
use qsimcost::harness::{estimate_bell, estimate_pm, estimate_singlet, EstimationReport, PmVariant};
use qsimcost::lp::DenseRevisedSimplex;
use qsimcost::qstate::{decompose_povm, BlochVector, HermitianMatrix, Rank1Povm, TwoPartyState};
use qsimcost::scenario::Scenario;
use qsimcost::witness::{
    check_violation, classical_bound_with_strategy, visibility_primal_with, witness_dual, Behavior, Side,
    VisibilityOptions, Witness,
};
use qsimcost::DEFAULT_SEED;

#[derive(Parser, Debug)]
#[command(
    name = "qsimcost",
    version,
    about = "Classical simulation cost of qubit correlations"
)]
struct Cli {
    /// Print the machine-readable report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, env = "QSIMCOST_SEED", default_value_t = DEFAULT_SEED, value_parser = parse_u64)]
    seed: u64,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write the JSON report to this file.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a classical simulation protocol and compare frequencies with the Born rule.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Critical visibility, classical bounds and dual witnesses.
    #[command(subcommand)]
    Witness(WitnessCmd),
    /// Exact rational certificate of a witness violation.
    Certify(CertifyArgs),
    /// Emit direction sets.
    #[command(subcommand)]
    Geometry(GeometryCmd),
}

#[derive(Subcommand, Debug)]
enum Simulate {
    /// Prepare-and-measure protocol with two bits.
    Pm {
        /// `x+`, `x-`, `y+`, `y-`, `z+`, `z-`, `a,b,c`, or a JSON file with a Bloch triple.
        #[arg(long)]
        state: String,
        /// `x`, `y`, `z`, `trine`, or a JSON file (rank-1 POVM or element matrices).
        #[arg(long)]
        povm: String,
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
        #[arg(long, value_enum, default_value_t = Variant::TwoBit)]
        variant: Variant,
    },
    /// One-bit simulation of the singlet.
    Singlet {
        /// Alice's measurement direction.
        #[arg(long)]
        alice: String,
        /// Bob's POVM.
        #[arg(long)]
        bob: String,
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
    },
    /// Two-bit simulation of a general two-party state.
    Bell {
        /// `singlet` or a JSON file `{"dA": .., "joint": {"re": .., "im": ..}}`.
        #[arg(long)]
        state: String,
        /// `x`, `y`, `z` or a JSON list of Alice's element matrices.
        #[arg(long)]
        alice: String,
        #[arg(long)]
        bob: String,
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variant {
    TwoBit,
    Interactive,
}

#[derive(Args, Debug)]
struct BehaviorInput {
    /// Scenario JSON file.
    #[arg(long, group = "input")]
    scenario: Option<PathBuf>,
    /// Behavior JSON file `{"IA", "IB", "OB", "p"}`.
    #[arg(long, group = "input")]
    behavior: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, group = "input", value_enum)]
    preset: Option<Preset>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// Octahedron states with snub-cube measurements.
    Snubcube,
    /// Octahedron states with the eleven Thomson measurements.
    Thomson11,
}

#[derive(Subcommand, Debug)]
enum WitnessCmd {
    /// Critical visibility `η⋆` against white noise.
    Visibility {
        #[command(flatten)]
        input: BehaviorInput,
        #[arg(long)]
        dc: usize,
        /// Enumerate this side's deterministic strategies.
        #[arg(long, value_enum)]
        side: Option<SideArg>,
        /// Write the dual witness here.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    /// Classical bound `C_d` of a witness file.
    Bound {
        #[arg(long)]
        witness: PathBuf,
        /// Override the witness's message dimension.
        #[arg(long)]
        dc: Option<usize>,
        /// Also evaluate the witness on this input.
        #[command(flatten)]
        input: BehaviorInput,
    },
    /// Dual witness with strong-duality checks.
    Dual {
        #[command(flatten)]
        input: BehaviorInput,
        #[arg(long)]
        dc: usize,
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SideArg {
    Alice,
    Bob,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long, group = "scen")]
    scenario: Option<PathBuf>,
    #[arg(long, group = "scen", value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    witness: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DENOMINATOR)]
    denominator: u64,
    /// Re-verify an existing certificate file instead of building one.
    #[arg(long, conflicts_with_all = ["scenario", "preset", "witness"])]
    replay: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum GeometryCmd {
    Octahedron,
    Snubcube {
        /// Skip the global 60° rotation.
        #[arg(long)]
        unrotated: bool,
    },
    Thomson {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
    },
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("'{s}': {e}"))
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
    report: Option<Value>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
            report: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::GuardExceeded { .. } => 3,
            Error::Json(_)
            | Error::Io(_)
            | Error::InvalidArgument(_)
            | Error::InvalidVector(_)
            | Error::InvalidPovm(_)
            | Error::InvalidState(_)
            | Error::InvalidMatrix(_)
            | Error::ShapeMismatch(_)
            | Error::DimensionMismatch { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
            report: None,
        }
    }
}

type Outcome = Result<Report, Failure>;

/// JSON report plus its text rendering; `ok = false` maps to exit code 1.
struct Report {
    json: Value,
    text: String,
    ok: bool,
}

/// 17 significant digits.
fn g17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Failure::from(Error::from(e)))?;
    fs::write(path, s + "\n").map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn parse_state(spec: &str) -> Result<BlochVector, Failure> {
    let named = match spec {
        "x+" => Some([1.0, 0.0, 0.0]),
        "x-" => Some([-1.0, 0.0, 0.0]),
        "y+" => Some([0.0, 1.0, 0.0]),
        "y-" => Some([0.0, -1.0, 0.0]),
        "z+" => Some([0.0, 0.0, 1.0]),
        "z-" => Some([0.0, 0.0, -1.0]),
        _ => None,
    };
    let v = match named {
        Some(v) => v,
        None if spec.contains(',') => {
            let parts: Vec<f64> = spec
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::input(format!("state '{spec}': {e}")))?;
            <[f64; 3]>::try_from(parts).map_err(|_| Failure::input(format!("state '{spec}' needs three components")))?
        }
        None => read_json::<[f64; 3]>(Path::new(spec))?,
    };
    BlochVector::try_from(v).map_err(Failure::from)
}

fn parse_povm(spec: &str) -> Result<Rank1Povm, Failure> {
    match spec {
        "x" => return Ok(Rank1Povm::projective(BlochVector::PLUS_X)),
        "y" => return Ok(Rank1Povm::projective(BlochVector::PLUS_Y)),
        "z" => return Ok(Rank1Povm::projective(BlochVector::PLUS_Z)),
        "trine" => return Ok(Rank1Povm::trine()),
        _ => {}
    }
    let text = read(Path::new(spec))?;
    if let Ok(p) = serde_json::from_str::<Rank1Povm>(&text) {
        return Ok(p);
    }
    let ms: Vec<HermitianMatrix> =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{spec}: not a POVM file: {e}")))?;
    decompose_povm(&ms).map_err(Failure::from)
}

fn parse_alice_povm(spec: &str) -> Result<Vec<HermitianMatrix>, Failure> {
    match spec {
        "x" | "y" | "z" => Ok(parse_povm(spec)?.to_matrices()),
        _ => read_json(Path::new(spec)),
    }
}

fn preset_scenario(p: Preset) -> Result<Scenario, Failure> {
    let name = match p {
        Preset::Snubcube => "snubcube",
        Preset::Thomson11 => "thomson11",
    };
    Scenario::preset(name).map_err(Failure::from)
}

fn load_behavior(input: &BehaviorInput) -> Result<Option<Behavior>, Failure> {
    if let Some(p) = &input.behavior {
        return read_json::<Behavior>(p).map(Some);
    }
    let scenario = match (&input.scenario, input.preset) {
        (Some(p), _) => read_json::<Scenario>(p)?,
        (None, Some(p)) => preset_scenario(p)?,
        (None, None) => return Ok(None),
    };
    scenario.behavior().map(Some).map_err(Failure::from)
}

fn require_behavior(input: &BehaviorInput) -> Result<Behavior, Failure> {
    load_behavior(input)?.ok_or_else(|| Failure::input("one of --scenario, --behavior or --preset is required"))
}

fn estimation(report: EstimationReport) -> Outcome {
    let mut text = format!(
        "{}: {} rounds, seed {:#x}, max |p̂ - p| = {}\n",
        report.protocol,
        report.rounds,
        report.seed,
        g17(report.max_deviation)
    );
    for c in &report.cells {
        text += &format!(
            "  {:?}: frequency {} target {} z {}\n",
            c.outcome,
            g17(c.frequency),
            g17(c.target),
            g17(c.z)
        );
    }
    text += if report.pass { "PASS" } else { "FAIL" };
    Ok(Report {
        ok: report.pass,
        json: serde_json::to_value(&report).expect("serializable"),
        text,
    })
}

fn cmd_simulate(cmd: &Simulate, seed: u64) -> Outcome {
    match cmd {
        Simulate::Pm {
            state,
            povm,
            rounds,
            variant,
        } => {
            let variant = match variant {
                Variant::TwoBit => PmVariant::TwoBit,
                Variant::Interactive => PmVariant::Interactive,
            };
            estimation(estimate_pm(
                &parse_state(state)?,
                &parse_povm(povm)?,
                *rounds,
                seed,
                variant,
            )?)
        }
        Simulate::Singlet { alice, bob, rounds } => estimation(estimate_singlet(
            &parse_state(alice)?,
            &parse_povm(bob)?,
            *rounds,
            seed,
        )?),
        Simulate::Bell {
            state,
            alice,
            bob,
            rounds,
        } => {
            let st = if state == "singlet" {
                TwoPartyState::singlet()
            } else {
                read_json(Path::new(state))?
            };
            estimation(estimate_bell(
                &st,
                &parse_alice_povm(alice)?,
                &parse_povm(bob)?,
                *rounds,
                seed,
            )?)
        }
    }
}

fn cmd_witness(cmd: &WitnessCmd) -> Outcome {
    let backend = DenseRevisedSimplex::new();
    match cmd {
        WitnessCmd::Visibility {
            input,
            dc,
            side,
            witness_out,
        } => {
            let behavior = require_behavior(input)?;
            let opts = VisibilityOptions {
                side: side.map(|s| match s {
                    SideArg::Alice => Side::Alice,
                    SideArg::Bob => Side::Bob,
                }),
                ..VisibilityOptions::default()
            };
            let r = visibility_primal_with(&behavior, *dc, &backend, &opts)?;
            let witness = r.witness();
            if let (Some(path), Some(w)) = (witness_out, &witness) {
                write_json(path, w)?;
            }
            let json = json!({
                "dC": r.d_c,
                "eta_star": if r.unbounded { Value::Null } else { json!(r.eta_star) },
                "unbounded": r.unbounded,
                "simulable": r.is_simulable(),
                "duality_gap": r.duality_gap(),
                "side": r.side,
                "rounds": r.rounds,
                "columns": r.columns,
                "lp_iterations": r.lp_iterations,
                "witness": witness,
            });
            let eta = if r.unbounded {
                "unbounded (white noise)".to_string()
            } else {
                g17(r.eta_star)
            };
            let text = format!(
                "d_C = {}\nη⋆ = {eta}\n{}\nduality gap = {}",
                r.d_c,
                if r.is_simulable() {
                    "classical model found"
                } else {
                    "no classical model: η⋆ < 1"
                },
                r.duality_gap().map_or("n/a".into(), g17),
            );
            Ok(Report { json, text, ok: true })
        }
        WitnessCmd::Bound { witness, dc, input } => {
            let mut w: Witness = read_json(witness)?;
            if let Some(d) = dc {
                w.d_c = *d;
            }
            let bf = w.to_bound_form()?;
            let (cd, enc, dec) = classical_bound_with_strategy(&bf.gamma, bf.d_c)?;
            let mut json = json!({
                "dC": bf.d_c,
                "Cd": cd,
                "encoding": enc.map,
                "decoding": dec,
                "convention": "bound",
            });
            let mut text = format!("d_C = {}\nC_d = {} (bound form: classical Σγp ≤ C_d)", bf.d_c, g17(cd));
            if let Some(b) = load_behavior(input)? {
                let check = check_violation(&bf, &b)?;
                json["value"] = json!(check.value);
                json["margin"] = json!(check.margin);
                json["violated"] = json!(check.violated);
                text += &format!(
                    "\nΣγp = {}\nmargin = {}\n{}",
                    g17(check.value),
                    g17(check.margin),
                    if check.violated { "violated" } else { "not violated" }
                );
            }
            Ok(Report { json, text, ok: true })
        }
        WitnessCmd::Dual { input, dc, witness_out } => {
            let behavior = require_behavior(input)?;
            let d = witness_dual(&behavior, *dc, &backend)?;
            if let Some(path) = witness_out {
                write_json(path, &d.witness)?;
            }
            let json = json!({
                "dC": dc,
                "eta_star": d.eta_star,
                "dual_objective": d.objective,
                "explicit_dual_objective": d.explicit_objective,
                "witness": d.witness,
            });
            let text = format!(
                "η⋆ = {}\ndual objective = {}\nΣγp = {} (classical behaviors: Σγq ≥ 0)",
                g17(d.eta_star),
                g17(d.objective),
                g17(d.objective - 1.0)
            );
            Ok(Report { json, text, ok: true })
        }
    }
}

fn cmd_certify(args: &CertifyArgs) -> Outcome {
    if let Some(path) = &args.replay {
        let c = replay_certificate(&read(path)?)?;
        let json = json!({"verified": true, "margin": {"num": c.margin.numer().to_string(), "den": c.margin.denom().to_string()}});
        let text = format!(
            "certificate verified; margin = {} ≈ {}",
            c.margin,
            to_decimal(&c.margin, 12)
        );
        return Ok(Report { json, text, ok: true });
    }
    let scenario = match (&args.scenario, args.preset) {
        (Some(p), _) => read_json::<Scenario>(p)?,
        (None, Some(p)) => preset_scenario(p)?,
        (None, None) => return Err(Failure::input("--scenario or --preset is required")),
    };
    let witness: Witness = read_json(
        args.witness
            .as_deref()
            .ok_or_else(|| Failure::input("--witness is required"))?,
    )?;
    match certify(
        &scenario.state_matrices(),
        &scenario.povm_matrices(),
        &witness,
        args.denominator,
    ) {
        Ok(c) => {
            let text = format!(
                "certificate achieved with D = {}\nC_d = {}\nΣγp = {}\nmargin = {} ≈ {}",
                args.denominator,
                c.classical_bound,
                c.quantum_value,
                c.margin,
                to_decimal(&c.margin, 12)
            );
            Ok(Report {
                json: serde_json::to_value(&c).expect("serializable"),
                text,
                ok: true,
            })
        }
        Err(Error::CertificateNotAchieved { denominator, margin }) => {
            let message =
                format!("certificate not achieved with D = {denominator}: margin {margin}; try a larger denominator");
            Err(Failure {
                code: 1,
                report: Some(json!({"achieved": false, "denominator": denominator, "margin": margin})),
                message,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_geometry(cmd: &GeometryCmd, seed: u64) -> Outcome {
    let (set, extra) = match cmd {
        GeometryCmd::Octahedron => (octahedron(), None),
        GeometryCmd::Snubcube { unrotated } => (if *unrotated { snub_cube_unrotated() } else { snub_cube() }, None),
        GeometryCmd::Thomson { n, restarts } => {
            let t = thomson(*n, *restarts, seed)?;
            let extra = json!({
                "energy": t.energy,
                "gradient_norm": t.gradient_norm,
                "converged": t.converged,
                "iterations": t.iterations,
                "restart": t.restart,
            });
            (t.set, Some(extra))
        }
    };
    let mut text = format!("{} ({} vectors)\n", set.label, set.len());
    for v in &set.vectors {
        let c = v.components();
        text += &format!("  {} {} {}\n", g17(c[0]), g17(c[1]), g17(c[2]));
    }
    let mut json = serde_json::to_value(&set).expect("serializable");
    if let Some(e) = extra {
        text += &format!("energy {}", g17(e["energy"].as_f64().unwrap_or(f64::NAN)));
        json["thomson"] = e;
    }
    Ok(Report {
        json,
        text: text.trim_end().to_string(),
        ok: true,
    })
}

fn run(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(format!("--threads {n}: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(s) => cmd_simulate(s, cli.seed),
        Command::Witness(w) => cmd_witness(w),
        Command::Certify(c) => cmd_certify(c),
        Command::Geometry(g) => cmd_geometry(g, cli.seed),
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(s: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, code, message) = match run(&cli) {
        Ok(r) => {
            let code = if r.ok { 0 } else { 1 };
            (Some((r.json, r.text)), code, None)
        }
        Err(f) => (f.report.map(|j| (j, String::new())), f.code, Some(f.message)),
    };
    if let (Some(path), Some((json, _))) = (&cli.output, &report) {
        if let Err(f) = write_json(path, json) {
            eprintln!("error: {}", f.message);
            return ExitCode::from(2);
        }
    }
    if let Some((json, text)) = &report {
        if cli.json {
            emit(&serde_json::to_string_pretty(json).expect("serializable"));
        } else if !text.is_empty() {
            emit(text);
        }
    }
    if let Some(m) = message {
        eprintln!("error: {m}");
    }
    ExitCode::from(code)
}
