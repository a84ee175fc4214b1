//! `fpfunnel`: runs scenario configs, checks and compares run records.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use fpfunnel::diagnostics::{check_record, cross_checks, cross_validate, CheckOutcome, CrossReport};
use fpfunnel::{Backend, RunRecord, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "fpfunnel", version, about = "Fokker-Planck funnel control runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario configs and check the resulting records.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Backend to run; defaults to the config's `solver.backends`.
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// Output directory. With several configs each gets `DIR/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads across configs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Cross-validate two records of the same scenario.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Report path; defaults to `compare_<a>_vs_<b>.json` next to DIR_A.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-run the diagnostic checks on a record.
    Check { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Spectral,
    Fd,
    Ode,
    All,
}

/// Exit status: 0 all checks passed, 1 a check failed, 2 an error occurred.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            configs,
            backend,
            out,
            jobs,
        } => cmd_run(&configs, backend, out.as_deref(), jobs),
        Command::Compare { dir_a, dir_b, report } => cmd_compare(&dir_a, &dir_b, report.as_deref()),
        Command::Check { dir } => cmd_check(&dir),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_json_str(&text).with_context(|| format!("in {}", path.display()))
}

fn select_backends(config: &ScenarioConfig, arg: Option<BackendArg>) -> Vec<Backend> {
    let ode_ok = config.disturbance.shape.is_none() || config.disturbance.zero_mass;
    match arg {
        None => config.backends(),
        Some(BackendArg::Spectral) => vec![Backend::Spectral],
        Some(BackendArg::Fd) => vec![Backend::Fd],
        Some(BackendArg::Ode) => vec![Backend::Ode],
        Some(BackendArg::All) => Backend::ALL
            .into_iter()
            .filter(|b| match b {
                Backend::Fd => config.dim() == 1,
                Backend::Ode => ode_ok,
                Backend::Spectral => true,
            })
            .collect(),
    }
}

fn cmd_run(paths: &[PathBuf], backend: Option<BackendArg>, out: Option<&Path>, jobs: usize) -> anyhow::Result<bool> {
    // every config is parsed and validated before anything is solved or written
    let mut prepared = Vec::new();
    for path in paths {
        let config = load_config(path)?;
        let root = match out {
            Some(dir) if paths.len() == 1 => dir.to_path_buf(),
            Some(dir) => dir.join(&config.name),
            None => PathBuf::from(config.output_dir()),
        };
        let backends = select_backends(&config, backend);
        let scenario = Scenario::new(config).with_context(|| format!("in {}", path.display()))?;
        prepared.push((scenario, backends, root));
    }

    let jobs = jobs.clamp(1, prepared.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<ScenarioOutcome>>> = Mutex::new((0..prepared.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((scenario, backends, root)) = prepared.get(i) else { break };
                let outcome = run_scenario(scenario, backends, root);
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });

    let mut all_pass = true;
    let mut first_error = None;
    for result in results.into_inner().expect("results lock").into_iter().flatten() {
        match result {
            Ok((text, pass)) => {
                print!("{text}");
                all_pass &= pass;
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(all_pass),
    }
}

/// Printed summary and whether every check passed.
type ScenarioOutcome = anyhow::Result<(String, bool)>;

fn run_scenario(scenario: &Scenario, backends: &[Backend], root: &Path) -> ScenarioOutcome {
    let name = &scenario.config.name;
    let mut text = String::new();
    let mut pass = true;
    let mut records = Vec::new();
    for &b in backends {
        let start = Instant::now();
        let record = scenario.run(b).with_context(|| format!("{name} [{b}]"))?;
        let elapsed = start.elapsed().as_secs_f64();
        let dir = root.join(b.name());
        record.write(&dir).with_context(|| format!("writing {}", dir.display()))?;
        text += &format!("{name} [{b}] -> {} ({elapsed:.2} s)\n", dir.display());
        let checks = check_record(&record)?;
        pass &= append_checks(&mut text, &checks);
        records.push(record);
    }
    for i in 0..records.len() {
        for j in i + 1..records.len() {
            let report = cross_validate(&records[i], &records[j])?;
            let path = root.join(format!("compare_{}_vs_{}.json", report.backend_a, report.backend_b));
            write_report(&report, &path)?;
            text += &format!("{name} [{} vs {}] -> {}\n", report.backend_a, report.backend_b, path.display());
            pass &= append_checks(&mut text, &cross_checks(&report));
        }
    }
    Ok((text, pass))
}

fn append_checks(text: &mut String, checks: &[CheckOutcome]) -> bool {
    for c in checks {
        let tag = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        text.push_str(&format!("  {tag}  {:<18} {}\n", c.name, c.detail));
    }
    !checks.iter().any(CheckOutcome::failed)
}

fn write_report(report: &CrossReport, path: &Path) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_compare(a: &Path, b: &Path, report_path: Option<&Path>) -> anyhow::Result<bool> {
    let ra = RunRecord::read(a).with_context(|| format!("reading {}", a.display()))?;
    let rb = RunRecord::read(b).with_context(|| format!("reading {}", b.display()))?;
    let report = cross_validate(&ra, &rb)?;
    let path = match report_path {
        Some(p) => p.to_path_buf(),
        None => {
            let parent = a.canonicalize()?.parent().map(Path::to_path_buf).unwrap_or_default();
            parent.join(format!("compare_{}_vs_{}.json", report.backend_a, report.backend_b))
        }
    };
    write_report(&report, &path)?;
    let mut text = format!(
        "{} [{} vs {}] -> {}\n  mean gap {:.3e}, mass gap {:.3e}, {} snapshots compared",
        report.scenario,
        report.backend_a,
        report.backend_b,
        path.display(),
        report.mean_gap,
        report.mass_gap,
        report.snapshot_gaps.len()
    );
    if let Some(g) = report.max_snapshot_gap_late {
        text += &format!(", max late L2 gap {g:.3e}");
    }
    text.push('\n');
    let pass = append_checks(&mut text, &cross_checks(&report));
    print!("{text}");
    Ok(pass)
}

fn cmd_check(dir: &Path) -> anyhow::Result<bool> {
    let record = RunRecord::read(dir).with_context(|| format!("reading {}", dir.display()))?;
    if record.series.is_empty() {
        bail!("{} has an empty series", dir.display());
    }
    let mut text = format!("{} [{}] {}\n", record.meta.scenario, record.meta.backend, dir.display());
    let pass = append_checks(&mut text, &check_record(&record)?);
    print!("{text}");
    Ok(pass)
}
