use std::net::SocketAddr;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context as _, Result};
use clap::Parser;
use mscbench::args::{Cli, Command, ReviewCommand, ServeArgs, TaxonomyCommand};
use mscbench::commands;
use mscbench::exit::{self, UsageError};
use mscbench::review::{self, ReviewState};
use mscbench_core::store::RunStore;
use mscbench_core::Taxonomy;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit::exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let taxonomy = commands::load_taxonomy(cli.taxonomy.as_deref())?;
    match &cli.command {
        Command::Taxonomy(TaxonomyCommand::Stats) | Command::TaxonomyStats => {
            println!("{}", commands::taxonomy_stats(taxonomy));
            return Ok(());
        }
        Command::Taxonomy(TaxonomyCommand::Check { codes }) => {
            for line in commands::taxonomy_check(taxonomy, codes) {
                println!("{line}");
            }
            return Ok(());
        }
        _ => {}
    }

    let store = RunStore::open(&cli.store)
        .with_context(|| format!("opening store {}", cli.store.display()))?;
    match cli.command {
        Command::Sample(args) => commands::sample(&store, taxonomy, &args).map(drop),
        Command::Classify(args) => commands::classify(&store, taxonomy, &args).map(drop),
        Command::Evaluate(args) => commands::evaluate(&store, &args).map(drop),
        Command::Report(args) => commands::report(&store, &args).map(drop),
        Command::Runs => {
            for line in commands::list_runs(&store)? {
                println!("{line}");
            }
            Ok(())
        }
        Command::Review(ReviewCommand::Serve(args)) => serve(store, taxonomy, args),
        Command::Taxonomy(_) | Command::TaxonomyStats => unreachable!(),
    }
}

fn serve(store: RunStore, taxonomy: &'static Taxonomy, args: ServeArgs) -> Result<()> {
    let token =
        match &args.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                UsageError(format!("--auth-token-env names {var}, which is not set"))
            })?),
            None => None,
        };
    let addr: SocketAddr = format!("{}:{}", args.bind, args.port)
        .parse()
        .map_err(|e| UsageError(format!("bad bind address: {e}")))?;
    let state = Arc::new(ReviewState::new(store, taxonomy, token));
    let app = review::router(state, args.ui_dir);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("review server on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
