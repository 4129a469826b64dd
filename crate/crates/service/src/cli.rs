//! The `lob` command line.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lob_core::{Bundle, Ident, State};
use lob_dsl::{format_source, parse_document, print_bundle, Diagnostic, SourceText};
use lob_engine::{Engine, EngineConfig, Refraction, Registry};
use lob_profiles::casmas::Casmas;
use lob_profiles::flow::{export_rows, Workspace};

use crate::api::{router, AppState};
use crate::store::Store;

/// Exit status when a source does not parse or validate.
pub const EXIT_INVALID: i32 = 1;
/// Exit status when a file or socket cannot be used.
pub const EXIT_IO: i32 = 2;
/// Exit status when a run fails or is cut short.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lob", version, about = "Parse, check, run and serve logic-of-behavior definitions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a `.lob` file.
    Validate { file: PathBuf },
    /// Run a file's rules on its state to quiescence, then print the final state.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = EngineConfig::default().max_iterations)]
        max_iter: usize,
        /// Print the run trace before the final state.
        #[arg(long)]
        trace: bool,
    },
    /// Print a file in canonical form. Comments are dropped.
    Fmt {
        file: PathBuf,
        /// Report whether the file is already canonical instead of printing it.
        #[arg(long)]
        check: bool,
    },
    /// Simulate a file's communities or workspaces.
    Scenario {
        file: PathBuf,
        /// Round cap for communities.
        #[arg(long, default_value_t = 100)]
        rounds: usize,
    },
    /// Serve the HTTP API over a project store.
    Serve {
        #[arg(long, env = "LOB_HOST", default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port.
        #[arg(long, env = "LOB_PORT", default_value_t = 7878)]
        port: u16,
        #[arg(long, env = "LOB_STORE", default_value = "lob-store")]
        store: PathBuf,
        /// Required in the `x-lob-token` header when set.
        #[arg(long, env = "LOB_TOKEN")]
        token: Option<String>,
    },
}

struct Failure(i32, String);

type Outcome = Result<(), Failure>;

fn read_source(file: &Path) -> Result<SourceText, Failure> {
    let bytes = std::fs::read(file).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", file.display())))?;
    SourceText::from_bytes(file.display().to_string(), &bytes).map_err(|d| diagnostics(file, &[d]))
}

fn diagnostics(file: &Path, ds: &[Diagnostic]) -> Failure {
    let text = ds.iter().map(|d| format!("{}:{d}", file.display())).collect::<Vec<_>>().join("\n");
    Failure(EXIT_INVALID, text)
}

fn load(file: &Path) -> Result<Bundle, Failure> {
    let src = read_source(file)?;
    parse_document(&src, &lob_profiles::registry()).map_err(|ds| diagnostics(file, &ds))
}

fn registry_for(bundle: &Bundle) -> Result<Registry, Failure> {
    let mut r = lob_profiles::registry();
    r.register_bundle(&Bundle { operators: bundle.operators.clone(), ..Bundle::default() }).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
    Ok(r)
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_RUNTIME, e.to_string())
}

/// Runs one command, writing results to `out`. Returns the exit status.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Validate { file } => validate(&file, out),
        Command::Run { file, max_iter, trace } => run_file(&file, max_iter, trace, out),
        Command::Fmt { file, check } => fmt(&file, check, out),
        Command::Scenario { file, rounds } => scenario(&file, rounds, out),
        Command::Serve { host, port, store, token } => serve(&host, port, store, token, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "{message}");
            code
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes()).map_err(|e| Failure(EXIT_IO, e.to_string()))
}

fn validate(file: &Path, out: &mut dyn Write) -> Outcome {
    let b = load(file)?;
    emit(out, &format!("{}: ok ({} items)\n", file.display(), b.item_count()))
}

fn run_file(file: &Path, max_iter: usize, trace: bool, out: &mut dyn Write) -> Outcome {
    let b = load(file)?;
    let registry = registry_for(&b)?;
    let default_scope = b.states.first().map(|s| s.scope.clone()).unwrap_or_else(|| Ident::new("app").expect("identifier"));
    let mut state = State::new(default_scope);
    for decl in &b.states {
        for (name, v) in &decl.entries {
            state.set(decl.scope.clone(), name.clone(), v.clone());
        }
    }
    let engine = Engine::with_config(&registry, EngineConfig { max_iterations: max_iter });
    let report = engine.run(&mut state, &b.controls, &mut Refraction::default()).map_err(runtime)?;
    if trace {
        emit(out, &lob_engine::write_trace(&report.trace))?;
    }
    let finals = state.scopes().map(|(scope, entries)| lob_core::bundle::StateDecl { scope: scope.clone(), entries: entries.clone() }).collect();
    emit(out, &print_bundle(&Bundle { states: finals, ..Bundle::default() }))?;
    if report.halt == lob_engine::HaltReason::CapReached {
        return Err(Failure(EXIT_RUNTIME, format!("stopped after {max_iter} iterations with rules still enabled")));
    }
    Ok(())
}

fn fmt(file: &Path, check: bool, out: &mut dyn Write) -> Outcome {
    let src = read_source(file)?;
    let formatted = format_source(&src).map_err(|ds| diagnostics(file, &ds))?;
    if check {
        if formatted != src.text {
            return Err(Failure(EXIT_INVALID, format!("{}: not in canonical form", file.display())));
        }
        return emit(out, &format!("{}: canonical\n", file.display()));
    }
    emit(out, &formatted)
}

fn scenario(file: &Path, rounds: usize, out: &mut dyn Write) -> Outcome {
    let b = load(file)?;
    let registry = registry_for(&b)?;
    let mut simulated = false;
    if !b.entities.is_empty() {
        simulated = true;
        let mut society = Casmas::from_bundle(&b, registry.clone()).map_err(runtime)?;
        let q = society.run(rounds).map_err(runtime)?;
        for r in &q.rounds {
            emit(out, &r.summary().iter().map(|l| l.clone() + "\n").collect::<String>())?;
        }
        for c in society.calls() {
            emit(out, &format!("call\t{}\n", c.to_line()))?;
        }
        if !q.quiescent {
            return Err(Failure(EXIT_RUNTIME, format!("still active after {rounds} rounds")));
        }
    }
    for decl in &b.workspaces {
        simulated = true;
        let mut w = Workspace::from_decl(decl, &b.components, registry.clone()).map_err(runtime)?;
        let p = w.propagate();
        emit(out, &p.records.iter().map(|r| r.to_line() + "\n").collect::<String>())?;
        for (viewer, rows) in w.data_view() {
            emit(out, &format!("# {viewer}\n{}", export_rows(rows)))?;
        }
        if p.capped {
            return Err(Failure(EXIT_RUNTIME, format!("workspace {} hit the delivery cap", decl.name)));
        }
    }
    if !simulated {
        return Err(Failure(EXIT_INVALID, format!("{}: no entities or workspaces to simulate", file.display())));
    }
    Ok(())
}

fn serve(host: &str, port: u16, store: PathBuf, token: Option<String>, out: &mut dyn Write) -> Outcome {
    let io = |e: &dyn std::fmt::Display| Failure(EXIT_IO, e.to_string());
    let store = Store::open(store).map_err(|e| io(&e))?;
    let state = AppState::new(store, token).map_err(|e| io(&e))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| io(&e))?;
    rt.block_on(async {
        let addr: SocketAddr =
            tokio::net::lookup_host((host, port)).await.map_err(|e| io(&e))?.next().ok_or_else(|| Failure(EXIT_IO, format!("cannot resolve {host}")))?;
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| io(&e))?;
        let local = listener.local_addr().map_err(|e| io(&e))?;
        emit(out, &format!("listening on http://{local}\n"))?;
        out.flush().map_err(|e| io(&e))?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| io(&e))
    })
}
