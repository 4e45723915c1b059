use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bitesim::harness::{export_trajectory, run_suite, run_trial, Method, Outcome, Scenario, Suite, TrialLog};
use bitesim::perception::{compute_offsets, food_bounding_box, PointCloud};
use bitesim::study::StudyConfig;
use bitesim::Error;

#[derive(Parser)]
#[command(name = "bitesim", about = "Simulated in-mouth bite transfer")]
struct Cli {
    /// Override the seed from the input file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports, logs and CSV output.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Controller preset: ours, less-reactive, more-reactive, fixed-pose.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial from a scenario file.
    Trial { scenario: PathBuf },
    /// Run a batch of trials and print outcome counts per method.
    Suite { suite: PathBuf },
    /// Compare arm motion and comfort with and without the wrist.
    WristStudy { study: PathBuf },
    /// Print fork-frame food offsets for a scanned point cloud.
    Offsets { cloud: PathBuf },
    /// Convert a saved trial log to trajectory CSV.
    Export { log: PathBuf, out: PathBuf },
}

fn read_json(path: &Path) -> bitesim::Result<serde_json::Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn method(preset: &Option<String>) -> bitesim::Result<Option<Method>> {
    preset
        .as_deref()
        .map(|p| Method::from_name(p).map_err(|e| Error::Config(e.to_string())))
        .transpose()
}

fn out_dir(dir: &Option<PathBuf>) -> bitesim::Result<Option<&Path>> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
    }
    Ok(dir.as_deref())
}

fn trial(cli: &Cli, path: &Path) -> bitesim::Result<ExitCode> {
    let mut v = read_json(path)?;
    if let Some(seed) = cli.seed {
        v.as_object_mut()
            .ok_or_else(|| Error::Config("scenario must be a JSON object".into()))?
            .insert("seed".into(), seed.into());
    }
    let mut scenario: Scenario = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(m) = method(&cli.preset)? {
        scenario = scenario.with_method(m);
    }
    let result = run_trial(&scenario)?;
    let r = &result.report;
    println!(
        "outcome={} seed={} peak_force={:.3} N mean_deviation={:.6} m",
        r.outcome.name(),
        r.seed,
        r.peak_force,
        r.mean_deviation
    );
    if let Some(dir) = out_dir(&cli.out_dir)? {
        std::fs::write(dir.join("trial_report.json"), serde_json::to_string_pretty(r)?)?;
        result.log.save(&dir.join("trial_log.json"))?;
        export_trajectory(&result.log.rows, &dir.join("trajectory.csv"))?;
    }
    Ok(if r.abort_time.is_some() || r.outcome == Outcome::Aborted {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn suite(cli: &Cli, path: &Path) -> bitesim::Result<ExitCode> {
    let mut suite = Suite::load(path)?;
    if let Some(seed) = cli.seed {
        suite.seed = seed;
    }
    if let Some(m) = method(&cli.preset)? {
        for e in &mut suite.entries {
            e.method = m;
        }
    }
    let report = run_suite(&suite)?;
    print!("{}", report.table());
    if let Some(dir) = out_dir(&cli.out_dir)? {
        std::fs::write(dir.join("suite_report.json"), report.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn wrist_study(cli: &Cli, path: &Path) -> bitesim::Result<ExitCode> {
    let mut cfg: StudyConfig =
        serde_json::from_value(read_json(path)?).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let report = cfg.run(path.parent())?;
    println!(
        "samples={} included={} convergence={:.4}",
        report.sample_count, report.included_count, report.convergence_rate
    );
    for (name, s) in [("with_wrist", &report.with_wrist), ("without_wrist", &report.without_wrist)] {
        println!(
            "{name}: mean_displacement={:.6} rad mean_cost={:.6}",
            s.mean_displacement, s.mean_cost
        );
    }
    println!(
        "displacement p={:.3e} cost p={:.3e}",
        report.displacement_test.p_value, report.cost_test.p_value
    );
    if let Some(dir) = out_dir(&cli.out_dir)? {
        report.write(dir)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn offsets(path: &Path) -> bitesim::Result<ExitCode> {
    let cloud = PointCloud::load(path)?;
    let o = compute_offsets(&food_bounding_box(&cloud)?);
    println!("{}", serde_json::to_string(&o)?);
    Ok(ExitCode::SUCCESS)
}

fn export(log: &Path, out: &Path) -> bitesim::Result<ExitCode> {
    let log = TrialLog::load(log)?;
    export_trajectory(&log.rows, out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Trial { scenario } => trial(&cli, scenario),
        Command::Suite { suite: s } => suite(&cli, s),
        Command::WristStudy { study } => wrist_study(&cli, study),
        Command::Offsets { cloud } => offsets(cloud),
        Command::Export { log, out } => export(log, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::StudyInvalid { .. } => ExitCode::from(4),
                _ => ExitCode::from(2),
            }
        }
    }
}
