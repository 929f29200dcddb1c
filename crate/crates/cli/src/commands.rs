use std::fs::File;
use std::io::BufWriter;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ringsim::cost::{self, GoldenRow, Mesh, ModelPreset, TmsRow};
use ringsim::report::RunReport;
use ringsim::sim::{simulate as run_sim, Algo, Executor, Precision, SimConfig};
use ringsim::verify::{self, VerifyOptions, TMS_GOLDEN_TOL};

use crate::{AlgoArg, ExecutorArg, PrecisionArg, SimulateArgs, TmsArgs, VerifyArgs};

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Usage errors wrapped so `main` can map them to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if err.downcast_ref::<UsageError>().is_some() {
        return ExitCode::from(EXIT_USAGE);
    }
    match err.downcast_ref::<ringsim::Error>() {
        Some(
            ringsim::Error::NotDivisible { .. }
            | ringsim::Error::RaggedTile { .. }
            | ringsim::Error::InvalidConfig(_)
            | ringsim::Error::UnknownPreset(_)
            | ringsim::Error::PresetParse(_)
            | ringsim::Error::EmptySequence,
        ) => ExitCode::from(EXIT_USAGE),
        _ => ExitCode::from(EXIT_CHECK_FAILED),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    if args.devices == 0 {
        return Err(usage("--devices must be positive"));
    }
    let block = args.seq_len / args.devices;
    let algos = match args.algo {
        AlgoArg::Ring => vec![Algo::Ring],
        AlgoArg::Striped => vec![Algo::Striped],
        AlgoArg::Both => vec![Algo::Ring, Algo::Striped],
    };
    let mut config = SimConfig::new(algos[0], args.devices, args.seq_len, args.d_head)
        .with_tiles(args.tile_q.unwrap_or(block), args.tile_k.unwrap_or(block))
        .with_seed(args.seed);
    config.precision = match args.precision {
        PrecisionArg::Single => Precision::Single,
        PrecisionArg::Double => Precision::Double,
    };
    config.check_oracle = args.check_oracle;
    config.scaled = args.scaled;
    config.executor = match args.executor {
        ExecutorArg::Threaded => Executor::Threaded,
        ExecutorArg::Sequential => Executor::Sequential,
    };
    config.data_parallel = !args.no_data_parallel;
    config.layout()?;

    let runs =
        algos.iter().map(|&algo| run_sim(&config.clone().with_algo(algo))).collect::<ringsim::Result<Vec<_>>>()?;
    let report = RunReport { config: config.clone(), runs, tolerance: config.precision.oracle_tolerance() };
    print!("{report}");

    if let Some(path) = &args.csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        report.write_csv(BufWriter::new(file))?;
    }
    if !report.oracle_ok() {
        eprintln!("oracle check failed (tolerance {:.0e})", report.tolerance);
        return Ok(ExitCode::from(EXIT_CHECK_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}

fn load_golden(source: &str) -> Result<Vec<GoldenRow>> {
    if source == "builtin" {
        return Ok(cost::builtin_golden());
    }
    let file = File::open(source).with_context(|| format!("opening golden table {source}"))?;
    Ok(cost::read_golden(file)?)
}

pub fn tms(args: &TmsArgs) -> Result<ExitCode> {
    if let Some(golden) = &args.golden {
        return tms_golden(args, golden);
    }
    let Some(model) = &args.model else {
        return Err(usage("--model is required unless --golden is given"));
    };
    let Some(sp) = args.sp else {
        return Err(usage("--sp is required unless --golden is given"));
    };
    if args.seq_len.is_empty() {
        return Err(usage("--seq-len needs at least one value"));
    }
    let preset = ModelPreset::resolve(model)?;
    let mesh = Mesh { model_parallel: args.mesh_mp, sequence_parallel: sp };
    let rows = cost::tms_table(std::slice::from_ref(&preset), &[mesh], &args.seq_len, args.flop_weight)?;
    println!("model={} mesh={mesh} flop_weight={}", preset.name, args.flop_weight);
    println!("{:>10} {:>6} {:>10}", "n_seq", "TMS", "raw");
    for r in &rows {
        println!("{:>10} {:>6.2} {:>10.6}", r.n_seq, cost::round2(r.tms), r.tms);
    }
    if let Some(path) = &args.csv {
        write_tms_csv(path, &rows)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn write_tms_csv(path: &std::path::Path, rows: &[TmsRow]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    cost::write_tms_csv(BufWriter::new(file), rows)?;
    Ok(())
}

fn tms_golden(args: &TmsArgs, source: &str) -> Result<ExitCode> {
    let custom = match &args.model {
        Some(m) => Some(ModelPreset::resolve(m)?),
        None => None,
    };
    let rows: Vec<GoldenRow> = load_golden(source)?
        .into_iter()
        .filter(|r| custom.as_ref().is_none_or(|p| p.name.eq_ignore_ascii_case(&r.model)))
        .filter(|r| args.sp.is_none_or(|sp| r.mesh_sp == sp))
        .filter(|r| args.seq_len.is_empty() || args.seq_len.contains(&r.n_seq))
        .collect();
    let resolve = |name: &str| match &custom {
        Some(p) => Ok(p.clone()),
        None => ModelPreset::resolve(name),
    };
    let cmp = cost::compare_golden(&rows, resolve)?;
    println!(
        "{:<8} {:<5} {:>5} {:>8} {:>6} {:>7} {:>8} {:>7}",
        "hardware", "model", "mesh", "n_seq", "table", "model", "delta", "status"
    );
    for c in &cmp {
        println!(
            "{:<8} {:<5} {:>5} {:>8} {:>6.2} {:>7.4} {:>+8.2} {:>7}",
            c.row.hardware,
            c.row.model,
            format!("{}x{}", c.row.mesh_mp, c.row.mesh_sp),
            c.row.n_seq,
            c.row.tms,
            c.computed,
            c.delta,
            if c.within(TMS_GOLDEN_TOL) { "ok" } else { "OUT" }
        );
    }
    let outside = cmp.iter().filter(|c| !c.within(TMS_GOLDEN_TOL)).count();
    let exact = cmp.iter().filter(|c| c.delta.abs() < 1e-9).count();
    let worst = cmp.iter().map(|c| c.delta.abs()).fold(0.0, f64::max);
    println!("{} rows, {exact} exact, {outside} outside ±{TMS_GOLDEN_TOL}, max |delta| {worst:.2}", cmp.len());
    if let Some(path) = &args.csv {
        let rows: Vec<TmsRow> = cmp
            .iter()
            .map(|c| TmsRow {
                model: c.row.model.clone(),
                mesh_mp: c.row.mesh_mp,
                mesh_sp: c.row.mesh_sp,
                n_seq: c.row.n_seq,
                flop_weight: c.row.flop_weight,
                tms: c.computed,
            })
            .collect();
        write_tms_csv(path, &rows)?;
    }
    if cmp.is_empty() {
        bail!("no golden rows matched the filters");
    }
    Ok(if outside == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK_FAILED) })
}

pub fn verify(args: &VerifyArgs) -> ExitCode {
    let results = verify::run_all(VerifyOptions { quick: args.quick });
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} properties, {failed} failed", results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
