mod args;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use wald_cpd::harness::{run_experiment, table1_config, ExperimentConfig};
use wald_cpd::{
    run_test_with, simulate, ComponentDist, CvCache, Error, ModelSpec, Result, ScenarioSpec,
    TestOptions, TimeSeries,
};

use args::{CalibrateArgs, Cli, Command, Component, DetectArgs, Family, SimulateArgs, Table1Args};

const EXIT_REJECT: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // exit code 2 is reserved for a rejection
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::Calibrate(a) => calibrate(a).map(|_| ExitCode::SUCCESS),
        Command::Table1(a) => table1(a).map(|_| ExitCode::SUCCESS),
    }
}

fn init_workers(workers: Option<usize>) -> Result<()> {
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::InvalidArgument("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn cache(dir: Option<PathBuf>) -> CvCache {
    dir.map(CvCache::new).unwrap_or_else(CvCache::from_env)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes to `path`, or standard output when `None`.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn detect_spec(a: &DetectArgs, m: usize) -> Result<ModelSpec> {
    match a.model {
        Family::Var1 => {
            if !a.components.is_empty() {
                return Err(Error::InvalidArgument(
                    "--components applies to ingarch1 only".into(),
                ));
            }
            Ok(ModelSpec::var1(m))
        }
        Family::Ingarch1 => {
            let comps = if a.components.is_empty() {
                vec![Component::Poisson; m]
            } else {
                a.components.clone()
            };
            if comps.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "--components",
                    expected: m,
                    got: comps.len(),
                });
            }
            let comps = comps
                .into_iter()
                .map(|c| match c {
                    Component::Poisson => ComponentDist::Poisson,
                    Component::Nb => ComponentDist::NegBinomial { r: a.r },
                })
                .collect();
            Ok(ModelSpec::ingarch1(comps))
        }
    }
}

fn detect(a: DetectArgs) -> Result<ExitCode> {
    init_workers(a.workers)?;
    let series = TimeSeries::read_csv(open(&a.input)?, a.model == Family::Ingarch1)?;
    let model = detect_spec(&a, series.m())?.build()?;
    let table = cache(a.cv.cache_dir.clone()).get_or_compute(
        model.n_params(),
        &[a.alpha],
        a.cv.cv_grid,
        a.cv.cv_reps,
        a.cv.cv_seed,
    )?;
    let opts = TestOptions {
        weight: a.weight.into(),
        ..TestOptions::default()
    };
    let scan = run_test_with(model.as_ref(), &series, a.alpha, &table, &opts)?;
    write_json(&scan, a.out.as_deref())?;
    if let Some(path) = &a.emit_qk {
        let mut w = output(Some(path))?;
        scan.write_qk_csv(&mut w)?;
        w.flush()?;
    }
    Ok(if scan.reject {
        ExitCode::from(EXIT_REJECT)
    } else {
        ExitCode::SUCCESS
    })
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let sc: ScenarioSpec = serde_json::from_reader(open(&a.scenario)?)?;
    let series = simulate(&sc)?;
    let mut w = output(a.out.as_deref())?;
    series.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    init_workers(a.workers)?;
    if a.alpha_list.is_empty() {
        return Err(Error::InvalidArgument("--alpha-list is empty".into()));
    }
    let cache = cache(a.cache_dir);
    let table = cache.get_or_compute(a.d, &a.alpha_list, a.grid, a.reps, a.seed)?;
    let mut out = io::stdout().lock();
    writeln!(out, "d\talpha\tcritical_value")?;
    for (alpha, c) in table.alphas.iter().zip(&table.values) {
        writeln!(out, "{}\t{alpha}\t{c:.6}", table.d)?;
    }
    eprintln!("cache: {}", cache.path(a.d).display());
    Ok(())
}

fn table1(a: Table1Args) -> Result<()> {
    let mut config: ExperimentConfig = match &a.config {
        Some(p) => serde_json::from_reader(open(p)?)?,
        None => table1_config(),
    };
    if a.print_config {
        return write_json(&config, a.out.as_deref());
    }
    if let Some(reps) = a.reps {
        config.reps = reps;
    }
    if let Some(r) = a.r {
        for e in &mut config.scenarios {
            for c in e.scenario.model.components.iter_mut().flatten() {
                if let ComponentDist::NegBinomial { r: size } = c {
                    *size = r;
                }
            }
        }
    }
    if let Some(w) = a.weight {
        config.weight = w.into();
    }
    config.select(&a.scenarios)?;
    config.validate()?;
    init_workers(a.workers.or(config.workers))?;

    let cache = cache(a.cache_dir);
    let cv = &config.critical_values;
    let mut tables = BTreeMap::new();
    for d in config.dims() {
        tables.insert(
            d,
            cache.get_or_compute(d, &[config.alpha], cv.grid, cv.reps, cv.seed)?,
        );
    }
    let (report, timings) = run_experiment(&config, &tables)?;
    for (s, secs) in report.scenarios.iter().zip(&timings) {
        let reference = s
            .reference_rejection
            .map(|r| format!(" (reference {r:.3})"))
            .unwrap_or_default();
        eprintln!(
            "{:<20} rejection {:.3} +/- {:.3}{reference}  {secs:.1}s",
            s.id, s.rejection_rate, s.half_width
        );
    }
    let out = a.out.or_else(|| config.output.clone().map(PathBuf::from));
    write_json(&report, out.as_deref())
}
