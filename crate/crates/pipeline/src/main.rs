use clap::Parser;
use nilm_pipeline::cli::{execute, Cli, LOG_ENV};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    for p in execute(&cli)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}
