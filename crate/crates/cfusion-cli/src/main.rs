use std::process::ExitCode;

use cfusion_cli::{run, write_artifacts, Cli, ExperimentConfig, HarnessError};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> Result<(), HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cli.command.apply(&mut cfg);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let out = run(&cli.command, &cfg)?;
    print!("{}", out.report);
    write_artifacts(&out, &cli.out)?;
    for a in &out.artifacts {
        println!("wrote {}", cli.out.join(&a.name).display());
    }
    Ok(())
}
