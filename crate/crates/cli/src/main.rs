mod args;
mod bench;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure classes and their exit statuses.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(pin_twsvm::Error),
}

impl From<pin_twsvm::Error> for Failure {
    fn from(e: pin_twsvm::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code_and_kind(&self) -> (u8, &'static str) {
        use pin_twsvm::Error as E;
        match self {
            Failure::Usage(_) => (2, "usage"),
            Failure::Core(e) => match e {
                E::InvalidParameter(_) => (2, "usage"),
                E::Io { .. } => (3, "io"),
                E::Parse { .. } => (3, "parse"),
                E::DimensionMismatch { .. } => (3, "dimension"),
                E::DegenerateDataset(_) => (3, "data"),
                E::Serialization(_) => (3, "model_file"),
                E::NotConverged { .. } => (4, "not_converged"),
                E::Infeasible(_)
                | E::NotPositiveSemidefinite { .. }
                | E::Unbounded
                | E::Singular(_)
                | E::DegenerateModel(_) => (4, "solver"),
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(u8::try_from(code).unwrap_or(2));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Cv(a) => commands::cv(a),
        Command::Bench(a) => bench::run(a),
        Command::ExtractPi(a) => commands::extract_pi(a),
        Command::DetectEval(a) => commands::detect_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind) = f.code_and_kind();
            let msg = f.message().replace('\n', " ");
            eprintln!("error[{kind}]: {msg}");
            ExitCode::from(code)
        }
    }
}
