//! `mpuforge` — compile matrix-product unitaries into circuits and verify
//! them by exact simulation.
//!
//! Exit codes: 0 success, 2 validation failure (including I/O and
//! non-unitary inputs), 3 resource cap exceeded, 4 unsupported MPU
//! (bond-rank check failed).

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpuforge_core::circuit::{circuit_from_json, circuit_to_json, RegisterKind};
use mpuforge_core::compiler::{
    compile_nonuniform, depth_scaling_report, CompileOptions, UniformCompiler,
};
use mpuforge_core::corpus;
use mpuforge_core::isometry::compute_caps_uniform;
use mpuforge_core::linalg::phase_invariant_metric;
use mpuforge_core::mpu::{
    assumption1_blocking, chain_from_json, check_assumption1, choi_canonicalize, contract,
    MpoChain, UniformMpu,
};
use mpuforge_core::{sampling, Error};

#[derive(Parser)]
#[command(
    name = "mpuforge",
    version,
    about = "MPU circuit compiler and verifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Corpus name (identity[:d], multicontrol-z, lee-yang[:alpha,beta],
    /// redundant-bond, product-random[:n], perturbed-mcz[:n],
    /// two-site-random) or a path to MPO-chain JSON.
    #[arg(long)]
    input: String,
    /// Number of sites for uniform-bulk inputs.
    #[arg(long)]
    n: Option<usize>,
    /// Relative tolerance for rank/PSD/truncation decisions.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Dense-dimension cap (overridden by MPUFORGE_DIM_CAP).
    #[arg(long)]
    dim_cap: Option<usize>,
    /// Seed for the randomized corpus inputs.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Unitarity, bond-rank and Schmidt-spectrum report for an MPU.
    Verify(VerifyArgs),
    /// Compile an MPU into a circuit.
    Compile(CompileArgs),
    /// Simulate a compiled circuit against its source MPU.
    Simulate(SimulateArgs),
    /// Depth-scaling table over a list of system sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Write the resolved chain in the MPO-chain JSON format.
    #[arg(long)]
    export_chain: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Cap window length for the uniform path (default: escalate 1..=3).
    #[arg(long)]
    blocking_m: Option<usize>,
    /// Density operator weighting the left cap window (JSON matrix:
    /// { "dim": d, "entries": [[re, im], ...] } row-major).
    #[arg(long)]
    sigma: Option<std::path::PathBuf>,
    /// Density operator weighting the right cap window (same format).
    #[arg(long)]
    tau: Option<std::path::PathBuf>,
    /// Output path for the circuit JSON.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Print the cap pair as JSON.
    #[arg(long)]
    dump_caps: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Path to the circuit JSON produced by `compile`.
    #[arg(long)]
    circuit: std::path::PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated corpus names.
    #[arg(long, default_value = "identity,multicontrol-z,lee-yang")]
    mpus: String,
    /// Comma-separated system sizes.
    #[arg(long, default_value = "4,8,16,32,64")]
    n_list: String,
    /// Ratio spread bound for the pass/fail column.
    #[arg(long, default_value_t = 4.0)]
    bound: f64,
    /// Worker threads across MPUs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

enum Input {
    Uniform(UniformMpu),
    Chain(MpoChain),
}

fn parse_input(spec: &str, seed: u64) -> Result<Input, Error> {
    let spec = spec.strip_prefix("corpus:").unwrap_or(spec);
    let mut parts = spec.splitn(2, ':');
    let name = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts
        .next()
        .map(|a| a.split(',').collect())
        .unwrap_or_default();
    let num = |k: usize, default: f64| -> f64 {
        args.get(k).and_then(|s| s.parse().ok()).unwrap_or(default)
    };
    match name {
        "identity" => Ok(Input::Uniform(corpus::mpu_identity(num(0, 2.0) as usize))),
        "multicontrol-z" | "mcz" => Ok(Input::Uniform(corpus::mpu_multicontrol_z())),
        "redundant-bond" => Ok(Input::Uniform(corpus::mpu_multicontrol_z_redundant())),
        "lee-yang" => {
            let alpha = num(0, std::f64::consts::FRAC_PI_2);
            let beta = num(1, 0.0);
            Ok(Input::Uniform(corpus::lee_yang_open(alpha, beta)?))
        }
        "product-random" => {
            let n = num(0, 4.0) as usize;
            let mut rng = sampling::rng(seed);
            Ok(Input::Chain(corpus::random_product_chain(&mut rng, n, 2)))
        }
        "perturbed-mcz" => {
            let n = num(0, 3.0) as usize;
            let mut rng = sampling::rng(seed);
            let u = sampling::random_unitary(&mut rng, 2);
            Ok(Input::Chain(corpus::mpu_perturbed_mcz(n, n / 2, &u)?))
        }
        "two-site-random" => {
            let mut rng = sampling::rng(seed);
            let u = sampling::random_unitary(&mut rng, 4);
            Ok(Input::Chain(corpus::mpu_from_two_site_unitary(&u, 2)?))
        }
        _ => {
            let text = std::fs::read_to_string(spec)
                .map_err(|e| Error::Validation(format!("cannot read {spec}: {e}")))?;
            Ok(Input::Chain(chain_from_json(&text)?))
        }
    }
}

fn dim_cap(common: &CommonOpts) -> usize {
    common
        .dim_cap
        .or_else(|| {
            std::env::var("MPUFORGE_DIM_CAP")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(mpuforge_core::mpu::DEFAULT_DIM_CAP)
}

fn options(common: &CommonOpts, blocking: Option<usize>) -> CompileOptions {
    CompileOptions {
        blocking,
        tol: common.tol,
        dim_cap: dim_cap(common),
        ..CompileOptions::default()
    }
}

#[derive(serde::Deserialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

fn read_matrix(path: &std::path::Path) -> Result<mpuforge_core::CMatrix, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    let doc: MatrixJson = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("bad matrix JSON {}: {e}", path.display())))?;
    if doc.entries.len() != doc.dim * doc.dim {
        return Err(Error::Validation("matrix entry count != dim^2".into()));
    }
    Ok(mpuforge_core::CMatrix::from_fn(doc.dim, doc.dim, |r, c| {
        let [re, im] = doc.entries[r * doc.dim + c];
        mpuforge_core::linalg::c(re, im)
    }))
}

fn chain_for(input: &Input, n: Option<usize>) -> Result<MpoChain, Error> {
    match input {
        Input::Uniform(mpu) => {
            let n = n.ok_or_else(|| Error::Validation("--n required for uniform inputs".into()))?;
            mpu.chain(n)
        }
        Input::Chain(chain) => Ok(chain.clone()),
    }
}

#[derive(serde::Serialize)]
struct VerifyReport {
    unitary_residual: f64,
    unitary: bool,
    assumption1: Option<Assumption1Report>,
    schmidt: Vec<Vec<f64>>,
    s_min: f64,
    q: f64,
    bound_sqrt_d_over_smin: f64,
}

#[derive(serde::Serialize)]
struct Assumption1Report {
    single_site: bool,
    full_rank_window: Option<usize>,
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Error> {
    let input = parse_input(&args.common.input, args.common.seed)?;
    let cap = dim_cap(&args.common);
    let chain = chain_for(&input, args.common.n)?;
    if let Some(path) = &args.export_chain {
        std::fs::write(path, mpuforge_core::mpu::chain_to_json(&chain))
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
        eprintln!("chain written to {}", path.display());
    }
    let (unitary, residual) = mpuforge_core::mpu::is_unitary(&chain, 1e-9, cap)?;
    let assumption1 = match &input {
        Input::Uniform(mpu) => Some(Assumption1Report {
            single_site: check_assumption1(mpu, args.common.tol)?,
            full_rank_window: assumption1_blocking(mpu, args.common.tol, 3)?,
        }),
        Input::Chain(_) => None,
    };
    if !unitary {
        let report = serde_json::json!({ "unitary": false, "unitary_residual": residual });
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
        return Err(Error::Validation(format!(
            "input is not unitary (residual {residual:.3e})"
        )));
    }
    let data = choi_canonicalize(&chain, args.common.tol)?;
    let bound = mpuforge_core::mpu::schmidt_bound_q(&data);
    let report = VerifyReport {
        unitary_residual: residual,
        unitary,
        assumption1,
        schmidt: data.per_cut.clone(),
        s_min: data.s_min,
        q: bound.q,
        bound_sqrt_d_over_smin: bound.crude_bound,
    };
    match args.common.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        _ => {
            println!("unitary: residual {residual:.3e}");
            if let Some(a1) = &report.assumption1 {
                println!(
                    "bond rank: single-site {} / full-rank window {:?}",
                    a1.single_site, a1.full_rank_window
                );
            }
            for (k, s) in report.schmidt.iter().enumerate() {
                let q_k: f64 = s.iter().map(|x| 1.0 / (x * x)).sum::<f64>().sqrt();
                println!(
                    "cut {}: D = {}, q_k = {:.6}, s = {:?}",
                    k + 1,
                    s.len(),
                    q_k,
                    s.iter()
                        .map(|x| (x * 1e6).round() / 1e6)
                        .collect::<Vec<_>>()
                );
            }
            println!(
                "s_min = {:.6}, q = {:.6} <= sqrt(D)/s_min = {:.6}",
                report.s_min, report.q, report.bound_sqrt_d_over_smin
            );
        }
    }
    Ok(())
}

fn cmd_compile(args: &CompileArgs) -> Result<(), Error> {
    let input = parse_input(&args.common.input, args.common.seed)?;
    let sigma = args.sigma.as_deref().map(read_matrix).transpose()?;
    let tau = args.tau.as_deref().map(read_matrix).transpose()?;
    if args.dump_caps {
        if let Input::Uniform(mpu) = &input {
            let opts = options(&args.common, args.blocking_m);
            let mut caps = None;
            for m in args.blocking_m.map(|m| vec![m]).unwrap_or(vec![1, 2, 3]) {
                let c = compute_caps_uniform(mpu, m, sigma.as_ref(), tau.as_ref(), opts.tol)?;
                if c.full_rank {
                    caps = Some((m, c));
                    break;
                }
            }
            if let Some((m, c)) = caps {
                let dump = serde_json::json!({
                    "blocking": m,
                    "left": c.left.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
                    "right": c.right.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
                    "dims": c.bond_dims().0,
                });
                eprintln!("{}", serde_json::to_string(&dump).unwrap());
            }
        }
    }
    let mut opts = options(&args.common, args.blocking_m);
    opts.sigma = sigma;
    opts.tau = tau;
    let result = match &input {
        Input::Uniform(mpu) => {
            let n = args
                .common
                .n
                .ok_or_else(|| Error::Validation("--n required for uniform inputs".into()))?;
            UniformCompiler::new(mpu, &opts)?.compile(n)?
        }
        Input::Chain(chain) => compile_nonuniform(chain, &opts)?,
    };
    let summary = serde_json::json!({
        "n_sites": result.n_sites,
        "q_report": result.q_report,
        "depth": result.depth.depth,
        "accounted_depth": result.accounted_depth,
        "merges": result.merges,
        "registers": result.circuit.registers.len(),
        "ancillas": result.ancillas,
    });
    match args.common.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary).unwrap()),
        _ => {
            println!(
                "compiled N={} ({} mode): depth {}, accounted {:.1}, q = {:.6}, q_used = {:.6}",
                result.n_sites,
                result.q_report.mode,
                result.depth.depth,
                result.accounted_depth,
                result.q_report.q,
                result.q_report.q_used
            );
            for m in &result.merges {
                println!(
                    "  merge level {} cut {}: C {:.4} -> C' {:.4}, rotations {}, pads {}, H {}",
                    m.level,
                    m.cut,
                    m.c_raw,
                    m.c_padded,
                    m.rotations,
                    m.pad_phases.len(),
                    m.lcu_terms
                );
            }
        }
    }
    if let Some(path) = &args.out {
        std::fs::write(path, circuit_to_json(&result.circuit))
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
        eprintln!("circuit written to {}", path.display());
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.circuit)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", args.circuit.display())))?;
    let circuit = circuit_from_json(&text)?;
    let input = parse_input(&args.common.input, args.common.seed)?;
    let chain = chain_for(&input, args.common.n)?;
    let reference = contract(&chain, dim_cap(&args.common))?;

    // reconstruct the physical/ancilla split from register kinds
    let physical: Vec<usize> = circuit
        .registers
        .iter()
        .filter(|r| r.kind == RegisterKind::Physical)
        .map(|r| r.id)
        .collect();
    let ancillas: Vec<usize> = circuit
        .registers
        .iter()
        .filter(|r| r.kind != RegisterKind::Physical)
        .map(|r| r.id)
        .collect();
    let regs = &circuit.registers;
    let phys_dims: Vec<usize> = physical
        .iter()
        .map(|&id| regs.iter().find(|r| r.id == id).unwrap().dim)
        .collect();
    let dim: usize = phys_dims.iter().product();
    if reference.nrows() != dim {
        return Err(Error::Shape(format!(
            "circuit physical dimension {dim} != reference {}",
            reference.nrows()
        )));
    }
    let mut effective = mpuforge_core::CMatrix::zeros(dim, dim);
    let mut leakage = 0.0f64;
    for col in 0..dim {
        let mut assignment = vec![0usize; regs.len()];
        let mut rem = col;
        for (k, _) in physical.iter().enumerate().rev() {
            assignment[k] = rem % phys_dims[k];
            rem /= phys_dims[k];
        }
        let mut state = mpuforge_core::circuit::basis_state(regs, &assignment);
        mpuforge_core::circuit::apply_state(regs, &circuit.root, &mut state)?;
        let (sector, leak) = mpuforge_core::circuit::zero_sector(regs, &ancillas, &state);
        leakage = leakage.max(leak);
        for (row, amp) in sector.iter().enumerate() {
            effective[(row, col)] = *amp;
        }
    }
    let metric = phase_invariant_metric(&effective, &reference);
    let report = serde_json::json!({
        "equivalence_metric": metric,
        "ancilla_leakage": leakage,
    });
    match args.common.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        _ => println!("equivalence metric {metric:.3e}, ancilla leakage {leakage:.3e}"),
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Error> {
    let n_list: Vec<usize> = args
        .n_list
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Validation(format!("bad --n-list: {e}")))?;
    let names: Vec<String> = args.mpus.split(',').map(|s| s.trim().to_string()).collect();
    let jobs = args.jobs.max(1);
    let queue = std::sync::Arc::new(std::sync::Mutex::new(names.clone()));
    let results = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for _ in 0..jobs.min(names.len()).max(1) {
            let queue = queue.clone();
            let results = results.clone();
            let n_list = n_list.clone();
            let bound = args.bound;
            handles.push(scope.spawn(move || loop {
                let name = { queue.lock().unwrap().pop() };
                let Some(name) = name else { break };
                let outcome = (|| -> Result<_, Error> {
                    let input = parse_input(&name, 7)?;
                    let Input::Uniform(mpu) = input else {
                        return Err(Error::Validation(format!(
                            "bench needs a uniform MPU: {name}"
                        )));
                    };
                    depth_scaling_report(&mpu, &n_list, &CompileOptions::default(), bound)
                })();
                results.lock().unwrap().push((name, outcome));
            }));
        }
        for h in handles {
            let _ = h.join();
        }
    });
    let mut results = std::sync::Arc::try_unwrap(results)
        .map_err(|_| Error::Validation("bench thread state leak".into()))?
        .into_inner()
        .unwrap();
    results.sort_by_key(|(name, _)| names.iter().position(|n| n == name).unwrap_or(usize::MAX));
    let mut all_bounded = true;
    match args.format {
        Format::Json => {
            let mut out = serde_json::Map::new();
            for (name, rep) in &results {
                let rep = rep.as_ref().map_err(|e| Error::Validation(e.to_string()))?;
                all_bounded &= rep.bounded;
                out.insert(name.clone(), serde_json::to_value(rep).unwrap());
            }
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        _ => {
            println!("mpu,n,depth,accounted,reference,ratio,q,q_used,spread,bounded");
            for (name, rep) in &results {
                let rep = rep.as_ref().map_err(|e| Error::Validation(e.to_string()))?;
                all_bounded &= rep.bounded;
                for row in &rep.rows {
                    println!(
                        "{name},{},{},{:.2},{:.2},{:.4},{:.4},{:.4},{:.3},{}",
                        row.n,
                        row.depth,
                        row.accounted,
                        row.reference,
                        row.ratio,
                        rep.q,
                        rep.q_used,
                        rep.ratio_spread,
                        rep.bounded
                    );
                }
            }
        }
    }
    if !all_bounded {
        return Err(Error::Validation(
            "depth scaling ratio spread exceeded the bound".into(),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
