use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rvsum::diagnostics::{
    ae_pointwise_check, almost_sure_profile, black_box_from_steps, in_probability_profile,
    lp_profile, materialize, mc_almost_sure_profile, mc_in_probability_profile, mc_lp_profile,
    Assessment, MaterializedSequence, McOptions, ModeKind, DEFAULT_MC_SAMPLES,
};
use rvsum::dyadic::DyadicRational;
use rvsum::error::Error;
use rvsum::experiment::{
    self, profile_csv, write_report, ExperimentConfig, FamilySpec, MatrixSpec, ProfileOutcome,
    ENV_OUT_DIR,
};
use rvsum::sequences::{RateSpec, SupportSpec};
use rvsum::step_rv::{PExponent, DEFAULT_PIECE_CAP};
use rvsum::summability::{ApplyOptions, SummabilityMatrix};

#[derive(Parser)]
#[command(
    name = "rvsum",
    version,
    about = "Summability matrices on sequences of step random variables: \
             exact convergence diagnostics and counterexample experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct FamilyArgs {
    /// Builtin family name (see `list-families`)
    #[arg(long)]
    family: String,
    /// Dyadic epsilon for example2, e.g. "1/4"
    #[arg(long)]
    epsilon: Option<String>,
    /// Decay rate for synthetic_as: "1/n", "1/n^2", or "zero"
    #[arg(long)]
    decay: Option<String>,
    /// Norm target for synthetic_lp: "1/n", "1/n^2", or "zero"
    #[arg(long)]
    norm_target: Option<String>,
    /// Support shape for synthetic_as: "full" or "shrinking"
    #[arg(long)]
    support: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the three regularity conditions of a matrix at finite depth
    Regularity {
        /// Builtin matrix name (cesaro, identity, first-column-ones) or a
        /// path to a matrix spec JSON file
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = 1000)]
        depth: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Emit the full report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Apply one matrix row to a family prefix and print the step function
    Apply {
        #[arg(long)]
        matrix: String,
        #[command(flatten)]
        family: FamilyArgs,
        /// Row index i: prints (Ax)_i
        #[arg(long)]
        row: usize,
        #[arg(long, default_value_t = 1e-9)]
        precision: f64,
        /// Uniform bound on the tail terms, for l1-bounded tails
        #[arg(long)]
        tail_value_bound: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_PIECE_CAP)]
        piece_cap: usize,
    },
    /// Run one convergence diagnostic over an index range
    Profile {
        /// One of: in-probability, almost-sure, lp, ae-pointwise
        #[arg(long)]
        mode: String,
        /// When set, profile the transformed sequence (Ax) instead of x
        #[arg(long)]
        matrix: Option<String>,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 1)]
        start: usize,
        #[arg(long)]
        end: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long)]
        lambda: Option<f64>,
        /// L_p exponent: a number >= 1 or "inf"
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        window: Option<usize>,
        /// Comma-separated dyadic sample points for ae-pointwise
        #[arg(long)]
        omegas: Option<String>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Verdict bound: statistics must fall below this to count as
        /// converging
        #[arg(long, default_value_t = 1e-3)]
        verdict_epsilon: f64,
        /// Verdict start index
        #[arg(long, default_value_t = 1)]
        from_index: usize,
        /// Use the Monte Carlo estimator instead of the exact path
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long)]
        samples: Option<usize>,
        /// Seed for the Monte Carlo path (required with --monte-carlo)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_PIECE_CAP)]
        piece_cap: usize,
        /// Print CSV instead of JSON
        #[arg(long)]
        csv: bool,
    },
    /// Run a full experiment from a JSON config and write report files
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: config output_dir, then $RVSUM_OUT_DIR,
        /// then the current directory)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed for the Monte Carlo path
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List builtin sequence families and their parameters
    ListFamilies,
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::MalformedRow(_)
        | Error::MalformedStepFunction(_)
        | Error::LengthMismatch { .. }
        | Error::EmptyFamily
        | Error::NanCoefficient
        | Error::DyadicOutOfRange(_) => 2,
        Error::GuardRange { .. } | Error::Unrealizable(_) | Error::OmegaOutOfRange { .. } => 3,
        Error::PieceCapExceeded { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    // Die quietly when the downstream consumer closes the pipe, as line
    // tools expect (`rvsum ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}

fn matrix_from_arg(arg: &str) -> Result<SummabilityMatrix<f64>, Error> {
    let spec = match arg {
        "cesaro" | "identity" | "first-column-ones" | "first_column_ones" => {
            MatrixSpec::builtin(arg)
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_string(),
                message: e.to_string(),
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
    };
    spec.build()
}

fn parse_rate(arg: &str) -> Result<RateSpec, Error> {
    match arg {
        "1/n" => Ok(RateSpec::InverseN),
        "1/n^2" => Ok(RateSpec::InverseNSquared),
        "zero" => Ok(RateSpec::Zero),
        other => Err(Error::Config(format!(
            "unknown rate {other:?}; known: 1/n, 1/n^2, zero"
        ))),
    }
}

fn parse_support(arg: &str) -> Result<SupportSpec, Error> {
    match arg {
        "full" => Ok(SupportSpec::Full),
        "shrinking" => Ok(SupportSpec::Shrinking),
        other => Err(Error::Config(format!(
            "unknown support {other:?}; known: full, shrinking"
        ))),
    }
}

fn family_spec(args: &FamilyArgs) -> Result<FamilySpec, Error> {
    Ok(FamilySpec {
        family: args.family.clone(),
        epsilon: args
            .epsilon
            .as_deref()
            .map(str::parse::<DyadicRational>)
            .transpose()?,
        decay: args.decay.as_deref().map(parse_rate).transpose()?,
        norm_target: args.norm_target.as_deref().map(parse_rate).transpose()?,
        support: args.support.as_deref().map(parse_support).transpose()?,
    })
}

fn parse_p(arg: &str) -> Result<PExponent<f64>, Error> {
    if arg == "inf" {
        return Ok(PExponent::Infinity);
    }
    let p: f64 = arg.parse().map_err(|_| Error::Parse {
        what: "p exponent",
        input: arg.to_string(),
        reason: "expected a number or \"inf\"".to_string(),
    })?;
    PExponent::finite(p)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Regularity {
            matrix,
            depth,
            tol,
            json,
        } => {
            let report = matrix_from_arg(&matrix)?.check_regularity(depth, tol);
            if json {
                print_json(&report)?;
            } else {
                println!(
                    "matrix {}: {:?} at depth {} (checked {}), norm M = {}",
                    report.matrix, report.overall, report.depth, report.checked_depth,
                    report.norm()
                );
                println!("  condition 1 (bounded abs row sums): {:?}", report.condition1);
                println!("  condition 2 (column limits zero):   {:?}", report.condition2);
                println!("  condition 3 (row sums to one):      {:?}", report.condition3);
            }
            Ok(())
        }
        Command::Apply {
            matrix,
            family,
            row,
            precision,
            tail_value_bound,
            piece_cap,
        } => {
            let matrix = matrix_from_arg(&matrix)?;
            let family = family_spec(&family)?.build()?;
            let needed = matrix
                .row(row)
                .ok_or_else(|| Error::RowUnavailable {
                    name: matrix.name().to_string(),
                    index: row,
                })?
                .support_len();
            let prefix = materialize(&family, needed)?;
            let opts = ApplyOptions {
                precision,
                tail_value_bound,
                piece_cap,
            };
            let result = matrix.apply_row(row, prefix.terms(), &opts)?;
            print_json(&result)
        }
        Command::Profile {
            mode,
            matrix,
            family,
            start,
            end,
            step,
            lambda,
            p,
            window,
            omegas,
            horizon,
            verdict_epsilon,
            from_index,
            monte_carlo,
            samples,
            seed,
            piece_cap,
            csv,
        } => {
            let mode = match mode.as_str() {
                "in-probability" => ModeKind::InProbability,
                "almost-sure" => ModeKind::AlmostSure,
                "lp" => ModeKind::Lp,
                "ae-pointwise" => ModeKind::AePointwise,
                other => {
                    return Err(Error::Config(format!(
                        "unknown mode {other:?}; known: in-probability, almost-sure, lp, \
                         ae-pointwise"
                    )))
                }
            };
            let family = family_spec(&family)?.build()?;
            let indices: Vec<usize> = (start..=end).step_by(step.max(1)).collect();
            if indices.is_empty() {
                return Err(Error::Config("empty index range".into()));
            }
            let assessment = Assessment::new(verdict_epsilon, from_index)?;
            let window_span = window.unwrap_or(0);
            let needed = end.max(horizon.unwrap_or(0)) + window_span;
            let input = materialize(&family, needed)?;
            let sequence: MaterializedSequence<f64> = match matrix {
                None => input,
                Some(matrix) => {
                    let matrix = matrix_from_arg(&matrix)?;
                    let opts = ApplyOptions {
                        piece_cap,
                        ..ApplyOptions::default()
                    };
                    let terms = (1..=needed)
                        .map(|i| matrix.apply_row(i, input.terms(), &opts))
                        .collect::<Result<Vec<_>, _>>()?;
                    MaterializedSequence::new(terms)
                }
            };
            let limit = family.limit();

            let require_lambda = || {
                lambda.ok_or_else(|| Error::Config("this mode needs --lambda".into()))
            };
            let outcome: ProfileOutcome = if monte_carlo {
                let seed = seed.ok_or_else(|| {
                    Error::Config("the Monte Carlo path requires --seed".into())
                })?;
                let mc = McOptions {
                    samples: samples.unwrap_or(DEFAULT_MC_SAMPLES),
                    seed,
                };
                let black_box = black_box_from_steps(&sequence, limit);
                let profile = match mode {
                    ModeKind::InProbability => mc_in_probability_profile(
                        &black_box,
                        require_lambda()?,
                        &indices,
                        &mc,
                        &assessment,
                    )?,
                    ModeKind::AlmostSure => mc_almost_sure_profile(
                        &black_box,
                        require_lambda()?,
                        window.ok_or_else(|| {
                            Error::Config("mode almost-sure needs --window".into())
                        })?,
                        &indices,
                        &mc,
                        &assessment,
                    )?,
                    ModeKind::Lp => {
                        let p = parse_p(&p.ok_or_else(|| {
                            Error::Config("mode lp needs --p".into())
                        })?)?;
                        mc_lp_profile(&black_box, p, &indices, &mc, &assessment)?
                    }
                    ModeKind::AePointwise => {
                        return Err(Error::Config(
                            "ae-pointwise has no Monte Carlo estimator".into(),
                        ))
                    }
                };
                ProfileOutcome::Profile(profile)
            } else {
                match mode {
                    ModeKind::InProbability => {
                        ProfileOutcome::Profile(in_probability_profile(
                            &sequence,
                            limit,
                            require_lambda()?,
                            &indices,
                            piece_cap,
                            &assessment,
                        )?)
                    }
                    ModeKind::AlmostSure => ProfileOutcome::Profile(almost_sure_profile(
                        &sequence,
                        limit,
                        require_lambda()?,
                        window.ok_or_else(|| {
                            Error::Config("mode almost-sure needs --window".into())
                        })?,
                        &indices,
                        piece_cap,
                        &assessment,
                    )?),
                    ModeKind::Lp => {
                        let p = parse_p(&p.ok_or_else(|| {
                            Error::Config("mode lp needs --p".into())
                        })?)?;
                        ProfileOutcome::Profile(lp_profile(
                            &sequence,
                            limit,
                            p,
                            &indices,
                            piece_cap,
                            &assessment,
                        )?)
                    }
                    ModeKind::AePointwise => {
                        let omegas = omegas
                            .ok_or_else(|| {
                                Error::Config("mode ae-pointwise needs --omegas".into())
                            })?
                            .split(',')
                            .map(|s| s.trim().parse::<DyadicRational>())
                            .collect::<Result<Vec<_>, _>>()?;
                        let horizon = horizon.unwrap_or(end);
                        let checked: Vec<usize> =
                            indices.iter().copied().filter(|&n| n <= horizon).collect();
                        if checked.is_empty() {
                            return Err(Error::Config(
                                "no profile index lies at or below the horizon".into(),
                            ));
                        }
                        ProfileOutcome::Pointwise(ae_pointwise_check(
                            &sequence,
                            Some(limit),
                            &omegas,
                            horizon,
                            &checked,
                            &assessment,
                        )?)
                    }
                }
            };
            if csv {
                print!("{}", profile_csv(&outcome));
            } else {
                print_json(&outcome)?;
            }
            Ok(())
        }
        Command::Experiment { config, out, seed } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = Some(seed);
            }
            let out_dir = out
                .or_else(|| config.output_dir.clone())
                .or_else(|| std::env::var_os(ENV_OUT_DIR).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let report = experiment::run(&config)?;
            let paths = write_report(&report, Path::new(&out_dir))?;
            for mode in &report.modes {
                println!("{}: {:?}", mode.label, mode.preservation);
            }
            for path in paths {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::ListFamilies => {
            for info in experiment::list_families() {
                println!("{}", info.name);
                println!("  parameters:     {}", info.parameters);
                println!("  declared modes: {}", info.declared_modes);
            }
            Ok(())
        }
    }
}
