use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use syncflow::approx::{
    approx_report, cycle_homogeneity_check, heavy_load_sums, ApproxReport, CycleHomogeneity, Flavor,
};
use syncflow::experiment::{parse_pf_spec, run_experiment, ExperimentConfig, ExperimentId};
use syncflow::feasibility::{
    max_flow_feasible, partition_check, FeasibilityCertificate, PartitionReport, PARTITION_LIMIT,
};
use syncflow::graph::{cycle_basis, BasisKind, CycleBasis};
use syncflow::io::{
    case30, format_float, network_from_json, parse_matpower, records_from_report, sha256_hex,
    write_csv, write_results_csv, CASE30_TEXT,
};
use syncflow::solver::{
    find_all_normal_states, recover_phases, solve_base, stability_check, winding_count,
    Classification, Gauge, SolveOutcome, WindingVector, DEFAULT_ENUMERATION_CAP,
};
use syncflow::{Error, Network};

/// Normal synchronized states of lossless power grids.
#[derive(Parser)]
#[command(name = "syncflow", version, about)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// MATPOWER case file; `case30` selects the bundled 30-bus case.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Network in the native JSON format.
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Args)]
struct Input {
    #[command(flatten)]
    source: Source,
    /// Scaling factor applied to all injections.
    #[arg(long, default_value_t = 1.0)]
    pf: f64,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the state with winding vector zero, or all normal states.
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = BasisKind::Fundamental)]
        basis: BasisKind,
        /// Enumerate every winding vector and report all fixed points.
        #[arg(long)]
        all_states: bool,
        /// Phase gauge: `zero-mean` or `slack:<node>`.
        #[arg(long, default_value = "zero-mean", value_parser = parse_gauge)]
        gauge: Gauge,
        /// Maximum number of winding vectors to enumerate.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Solve every admissible winding vector and classify each outcome.
    Enumerate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = BasisKind::Fundamental)]
        basis: BasisKind,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Per-edge linear flow, improved approximation and nonlinear flow as CSV.
    Approx {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = BasisKind::Minimal)]
        basis: BasisKind,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Error bounds of the linear flow and loading checks.
    Bounds {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = BasisKind::Minimal)]
        basis: BasisKind,
        #[command(flatten)]
        output: Output,
    },
    /// Max-flow feasibility certificate.
    Feasibility {
        #[command(flatten)]
        input: Input,
        /// Also check every bipartition (at most 20 nodes).
        #[arg(long)]
        partitions: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Reproduce one of the numerical experiments as CSV.
    Experiment {
        /// fig1-approx-error, fig2-bound-tightness, fig3-gradient-step or fig4-ring-maxload.
        experiment: ExperimentId,
        /// Random samples per configuration (default 10000).
        #[arg(long)]
        samples: Option<usize>,
        /// Master seed (default 1).
        #[arg(long)]
        seed: Option<u64>,
        /// Scaling factors: `1.5`, `1,2,5` or `start:stop:count`.
        #[arg(long, value_parser = parse_pf_list)]
        pf: Option<PfList>,
        /// Ring sizes, e.g. `3,4,20`.
        #[arg(long, value_delimiter = ',')]
        rings: Option<Vec<usize>>,
        /// Half-width of the uniform injection distribution.
        #[arg(long)]
        scale: Option<f64>,
        /// Cycle basis for the approximation (default minimal).
        #[arg(long)]
        basis: Option<BasisKind>,
        /// MATPOWER case for the case experiments (default: bundled case30).
        #[arg(long)]
        case: Option<PathBuf>,
        /// Output CSV path; companion files are written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone)]
struct PfList(Vec<f64>);

fn parse_pf_list(s: &str) -> Result<PfList, String> {
    parse_pf_spec(s).map(PfList)
}

fn parse_gauge(s: &str) -> Result<Gauge, String> {
    match s {
        "zero-mean" => Ok(Gauge::ZeroMean),
        _ => s
            .strip_prefix("slack:")
            .and_then(|n| n.parse().ok())
            .map(Gauge::Slack)
            .ok_or_else(|| format!("`{s}` is neither `zero-mean` nor `slack:<node>`")),
    }
}

/// Error carrying an exit code after its report was already printed.
#[derive(Debug)]
struct Exit(u8);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CAP: u8 = 4;
const EXIT_NUMERIC: u8 = 5;

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(Exit(code)) = err.downcast_ref::<Exit>() {
        return *code;
    }
    for cause in err.chain() {
        if cause.is::<std::io::Error>() {
            return EXIT_PARSE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Infeasible(_) => EXIT_INFEASIBLE,
                Error::EnumerationCap { .. } => EXIT_CAP,
                Error::Numeric(_) | Error::NoNormalState | Error::CycleConditionViolated { .. } => {
                    EXIT_NUMERIC
                }
                _ => EXIT_PARSE,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if !err.is::<Exit>() {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load(input: &Input) -> anyhow::Result<Network> {
    if !(input.pf >= 0.0 && input.pf.is_finite()) {
        bail!(Error::InvalidNetwork(format!(
            "--pf must be nonnegative, got {}",
            input.pf
        )));
    }
    if let Some(path) = &input.source.case {
        let case = if path.as_os_str() == "case30" && !path.exists() {
            case30()
        } else {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_matpower(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        return Ok(case.to_network(input.pf)?);
    }
    let path = input
        .source
        .network
        .as_ref()
        .expect("clap requires a source");
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let net = network_from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    if input.pf == 1.0 {
        return Ok(net);
    }
    let p = net.injections().iter().map(|v| v * input.pf).collect();
    Ok(net.with_injections(p)?)
}

fn emit(output: &Output, text: &str) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct StateReport {
    winding: WindingVector,
    classification: Classification,
    flows: Option<Vec<f64>>,
    /// Phases in the requested gauge.
    phases: Option<Vec<f64>>,
    /// Phases with node 0 as slack.
    phases_slack: Option<Vec<f64>>,
    is_normal: Option<bool>,
    /// Second smallest Jacobian eigenvalue; positive for a stable state.
    algebraic_connectivity: Option<f64>,
    max_eigenvalue: Option<f64>,
    upper_multipliers: Vec<f64>,
    lower_multipliers: Vec<f64>,
    iterations: usize,
    gradient_norm: f64,
}

fn state_report(net: &Network, o: &SolveOutcome, gauge: Gauge) -> anyhow::Result<StateReport> {
    let (mut phases, mut slack, mut normal, mut conn, mut max) = (None, None, None, None, None);
    if let Some(flows) = &o.flows {
        phases = Some(recover_phases(net, flows, gauge)?);
        slack = Some(recover_phases(net, flows, Gauge::Slack(0))?);
        let theta = recover_phases(net, flows, Gauge::ZeroMean)?;
        let stab = stability_check(net, &theta)?;
        normal = Some(stab.is_normal);
        conn = stab.eigenvalues.get(1).copied();
        max = stab.eigenvalues.last().copied();
    }
    Ok(StateReport {
        winding: o.winding.clone(),
        classification: o.classification,
        flows: o.flows.clone(),
        phases,
        phases_slack: slack,
        is_normal: normal,
        algebraic_connectivity: conn,
        max_eigenvalue: max,
        upper_multipliers: o.upper_multipliers.clone(),
        lower_multipliers: o.lower_multipliers.clone(),
        iterations: o.iterations,
        gradient_norm: o.gradient_norm,
    })
}

#[derive(Serialize)]
struct SolveReport {
    nodes: usize,
    edges: usize,
    basis: BasisKind,
    cycles: usize,
    states: Vec<StateReport>,
}

#[derive(Serialize)]
struct InfeasibleReport<'a> {
    classification: Classification,
    certificate: &'a FeasibilityCertificate,
}

fn infeasible(output: &Output, cert: &FeasibilityCertificate) -> anyhow::Result<()> {
    emit(
        output,
        &to_json(&InfeasibleReport {
            classification: Classification::Infeasible,
            certificate: cert,
        }),
    )?;
    if let Some(cut) = &cert.cut {
        eprintln!(
            "infeasible: cut with |p1| = {:.6} exceeds K12 = {:.6}",
            cut.injection.abs(),
            cut.capacity
        );
    }
    Err(Exit(EXIT_INFEASIBLE).into())
}

fn states_csv(net: &Network, states: &[StateReport]) -> anyhow::Result<String> {
    let mut rows = Vec::new();
    for s in states {
        let Some(flows) = &s.flows else { continue };
        for (i, e) in net.edges().iter().enumerate() {
            rows.push(vec![
                s.winding.to_string(),
                s.classification.to_string(),
                i.to_string(),
                e.tail.to_string(),
                e.head.to_string(),
                format_float(e.coupling),
                format_float(flows[i]),
                format_float(flows[i].abs() / e.coupling),
            ]);
        }
    }
    let header = [
        "winding",
        "classification",
        "edge",
        "tail",
        "head",
        "K",
        "flow",
        "loading",
    ];
    Ok(write_csv(&[], &header, rows)?)
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Solve {
            input,
            basis,
            all_states,
            gauge,
            cap,
            format,
            output,
        } => {
            let net = load(&input)?;
            let cb = cycle_basis(
                &net,
                if all_states {
                    basis
                } else {
                    BasisKind::Fundamental
                },
            );
            let outcomes: Vec<SolveOutcome> = if all_states {
                let states = find_all_normal_states(&net, &cb, cap)?;
                if let Some(cert) = &states.certificate {
                    return infeasible(&output, cert);
                }
                states.fixed_points().map(|(_, o)| o.clone()).collect()
            } else {
                let o = solve_base(&net)?;
                if let Some(cert) = o.certificate.as_ref().filter(|c| !c.feasible) {
                    return infeasible(&output, cert);
                }
                vec![o]
            };
            let states = outcomes
                .iter()
                .map(|o| state_report(&net, o, gauge))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let text = match format {
                Format::Json => to_json(&SolveReport {
                    nodes: net.node_count(),
                    edges: net.edge_count(),
                    basis: cb.kind(),
                    cycles: cb.len(),
                    states,
                }),
                Format::Csv => states_csv(&net, &states)?,
            };
            emit(&output, &text)
        }
        Command::Enumerate {
            input,
            basis,
            cap,
            output,
        } => {
            let net = load(&input)?;
            let cb = cycle_basis(&net, basis);
            let states = find_all_normal_states(&net, &cb, cap)?;
            if let Some(cert) = &states.certificate {
                return infeasible(&output, cert);
            }
            #[derive(Serialize)]
            struct Entry<'a> {
                winding: &'a WindingVector,
                classification: Classification,
                flows: &'a Option<Vec<f64>>,
            }
            #[derive(Serialize)]
            struct Report<'a> {
                basis: BasisKind,
                winding_bounds: Vec<i64>,
                candidates: String,
                fixed_points: usize,
                outcomes: Vec<Entry<'a>>,
            }
            emit(
                &output,
                &to_json(&Report {
                    basis: cb.kind(),
                    winding_bounds: cb.winding_bounds(),
                    candidates: winding_count(&cb).to_string(),
                    fixed_points: states.count(),
                    outcomes: states
                        .outcomes
                        .iter()
                        .map(|(z, o)| Entry {
                            winding: z,
                            classification: o.classification,
                            flows: &o.flows,
                        })
                        .collect(),
                }),
            )
        }
        Command::Approx {
            input,
            basis,
            seed,
            output,
        } => {
            let net = load(&input)?;
            let cb = cycle_basis(&net, basis);
            let report = solve_report(&net, &cb, &output)?;
            let mut meta = vec![
                ("pf".to_string(), input.pf.to_string()),
                ("basis".to_string(), basis.to_string()),
                ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ];
            if let Some(seed) = seed {
                meta.push(("seed".into(), seed.to_string()));
            }
            if input.source.case.is_some() {
                meta.push((
                    "case_sha256".into(),
                    case_hash(input.source.case.as_deref())?,
                ));
            }
            meta.push(("xi_norm".into(), format_float(report.xi_norm)));
            meta.push((
                "bound_projected".into(),
                format_float(report.bound_projected),
            ));
            meta.push(("bound_simple".into(), format_float(report.bound_simple)));
            let text = write_results_csv(&meta, &records_from_report(&net, &report))?;
            emit(&output, &text)
        }
        Command::Bounds {
            input,
            basis,
            output,
        } => {
            let net = load(&input)?;
            let cb = cycle_basis(&net, basis);
            let report = solve_report(&net, &cb, &output)?;
            let (heavy_rp, heavy_lin) = heavy_load_sums(&net, &report.f_rp, &report.f_lin)?;
            #[derive(Serialize)]
            struct Bounds {
                xi_norm: f64,
                bound_projected: f64,
                bound_simple: f64,
                per_line: Vec<f64>,
                heavy_load_rp: f64,
                heavy_load_lin: f64,
                homogeneity_rp: Vec<CycleHomogeneity>,
                homogeneity_lin: Vec<CycleHomogeneity>,
            }
            emit(
                &output,
                &to_json(&Bounds {
                    xi_norm: report.xi_norm,
                    bound_projected: report.bound_projected,
                    bound_simple: report.bound_simple,
                    heavy_load_rp: heavy_rp,
                    heavy_load_lin: heavy_lin,
                    homogeneity_rp: cycle_homogeneity_check(&net, &cb, &report.f_rp, Flavor::Rp)?,
                    homogeneity_lin: cycle_homogeneity_check(
                        &net,
                        &cb,
                        &report.f_lin,
                        Flavor::Lin,
                    )?,
                    per_line: report.per_line,
                }),
            )
        }
        Command::Feasibility {
            input,
            partitions,
            output,
        } => {
            let net = load(&input)?;
            let cert = max_flow_feasible(&net);
            let partitions: Option<PartitionReport> = if partitions {
                Some(partition_check(&net, PARTITION_LIMIT)?)
            } else {
                None
            };
            #[derive(Serialize)]
            struct Report {
                #[serde(flatten)]
                certificate: FeasibilityCertificate,
                #[serde(skip_serializing_if = "Option::is_none")]
                partitions: Option<PartitionReport>,
            }
            let feasible = cert.feasible;
            emit(
                &output,
                &to_json(&Report {
                    certificate: cert,
                    partitions,
                }),
            )?;
            if feasible {
                Ok(())
            } else {
                Err(Exit(EXIT_INFEASIBLE).into())
            }
        }
        Command::Experiment {
            experiment,
            samples,
            seed,
            pf,
            rings,
            scale,
            basis,
            case,
            out,
        } => {
            let mut config = ExperimentConfig::new(experiment);
            if let Some(v) = samples {
                config.samples = v;
            }
            if let Some(v) = seed {
                config.seed = v;
            }
            if let Some(PfList(v)) = pf {
                config.pf = v;
            }
            if let Some(v) = rings {
                config.ring_sizes = v;
            }
            if let Some(v) = scale {
                config.scale = v;
            }
            if let Some(v) = basis {
                config.basis = v;
            }
            if let Some(path) = &case {
                config.case_text = Some(
                    fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?,
                );
            }
            let outputs = run_experiment(&config)?;
            match &out {
                Some(base) => {
                    for o in &outputs {
                        let path = o.path_for(base);
                        fs::write(&path, &o.text)
                            .with_context(|| format!("writing {}", path.display()))?;
                        log::info!("wrote {}", path.display());
                    }
                }
                None => print!("{}", outputs[0].text),
            }
            Ok(())
        }
    }
}

fn case_hash(path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) if p.as_os_str() == "case30" && !p.exists() => Ok(sha256_hex(CASE30_TEXT)),
        Some(p) => Ok(sha256_hex(&fs::read_to_string(p)?)),
        None => Ok(String::new()),
    }
}

/// Approximation report, or the infeasibility certificate and exit code 3.
fn solve_report(net: &Network, cb: &CycleBasis, output: &Output) -> anyhow::Result<ApproxReport> {
    match approx_report(net, cb) {
        Err(Error::Infeasible(cert)) => {
            infeasible(output, &cert)?;
            unreachable!("infeasible always returns an error")
        }
        other => Ok(other?),
    }
}
