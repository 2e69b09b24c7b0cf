use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use spinsense::experiments::{
    run_dsl_source, run_fid_appendix, run_noise_decay, run_phase_sweep, run_spectrum_theory, ExperimentConfig,
};
use spinsense::noise::DecouplingMode;
use spinsense::pulseprog::{builtin_sequence, parse, print, Builtin, BuiltinParams};

/// Entangled spin-register field sensing: simulations and spectra.
#[derive(Debug, Parser)]
#[command(name = "spinsense", version)]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Experiment config (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated θ values in degrees.
    #[arg(long = "theta", global = true, value_delimiter = ',', allow_negative_numbers = true)]
    thetas: Option<Vec<f64>>,
    /// Sample preset (sample1..sample4), sample file, or `none`.
    #[arg(long, global = true)]
    sample: Option<String>,
    /// Decoupling mode: none, selective or full.
    #[arg(long, global = true)]
    decoupling: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectra of the closed-form signals.
    SpectrumTheory,
    /// Line phases against θ from the simulated pipeline.
    PhaseSweep,
    /// Signal amplitude against sensing time in three noise environments.
    NoiseDecay,
    /// Relaxation FIDs of the four sample presets.
    FidAppendix,
    /// Parse and run a pulse program.
    Run {
        /// Program file; falls back to `program` in the config.
        program: Option<PathBuf>,
    },
    /// Parse a pulse program and print it in canonical form.
    Check { program: PathBuf },
    /// Print a built-in sequence as a pulse program. Uses the first θ, the
    /// echo length, acquisition and decoupling settings of the config.
    Builtin {
        /// field_on_cc, field_on_cs, echo_sense or xy8_sense.
        name: String,
        /// XY-8 cycles.
        #[arg(long, default_value_t = 1)]
        cycles: u32,
    },
}

/// An error whose message is already fully rendered.
#[derive(Debug)]
struct Rendered(String);

impl std::fmt::Display for Rendered {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Rendered {}

fn absolute(p: &Path) -> anyhow::Result<PathBuf> {
    if p.is_absolute() {
        Ok(p.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(p))
    }
}

fn load_config(o: &Overrides) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            let base = absolute(path)?.parent().map(Path::to_path_buf).unwrap_or_default();
            ExperimentConfig::from_toml_str(&text, base).map_err(|e| Rendered(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::from_toml_str("", std::env::current_dir()?)?,
    };
    if let Some(out) = &o.out {
        cfg.output_dir = absolute(out)?;
    }
    if let Some(t) = &o.thetas {
        cfg.thetas_deg = t.clone();
    }
    if let Some(s) = &o.sample {
        // a file named on the command line is relative to the working dir
        cfg.sample = if Path::new(s).is_file() { absolute(Path::new(s))?.display().to_string() } else { s.clone() };
    }
    if let Some(d) = &o.decoupling {
        cfg.decoupling = Some(d.parse::<DecouplingMode>()?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_program(path: &Path) -> anyhow::Result<(String, spinsense::pulseprog::PulseProgram)> {
    let source = std::fs::read_to_string(path).with_context(|| format!("cannot read program {}", path.display()))?;
    match parse(&source) {
        Ok(p) => Ok((source, p)),
        Err(diags) => Err(Rendered(diags.render(&source, &path.display().to_string())).into()),
    }
}

fn list_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Command::Check { program } = &cli.command {
        let (_, p) = read_program(program)?;
        print!("{}", print(&p));
        return Ok(());
    }
    let cfg = load_config(&cli.opts)?;
    match cli.command {
        Command::SpectrumTheory => {
            let r = run_spectrum_theory(&cfg)?;
            for p in &r.panels {
                let ph: Vec<String> = p.peaks.iter().map(|k| format!("{:.2}", k.phase.to_degrees())).collect();
                println!("{} theta={} phases_deg=[{}]", p.kind.as_str(), p.theta_deg, ph.join(", "));
            }
            list_files(&r.files);
        }
        Command::PhaseSweep => {
            let r = run_phase_sweep(&cfg)?;
            for row in &r.rows {
                println!(
                    "{} theta={} {}: measured {:.3} deg, expected {:.3} deg",
                    row.sequence, row.theta_deg, row.line, row.measured_deg, row.expected_deg
                );
            }
            println!("max phase error {:.4} deg", r.max_error_deg);
            list_files(&r.files);
        }
        Command::NoiseDecay => {
            let r = run_noise_decay(&cfg)?;
            for c in &r.curves {
                println!(
                    "{}: T = {:.2} ms ({}), score {:.3}, loss over 50 ms {:.2}%",
                    c.curve,
                    c.fit.exponential.time_constant * 1e3,
                    c.fit.model.as_str(),
                    c.fit.score,
                    100.0 * c.loss_50ms
                );
            }
            list_files(&r.files);
        }
        Command::FidAppendix => {
            let r = run_fid_appendix(&cfg)?;
            for run in &r.runs {
                println!(
                    "sample {} {}: T = {:.2} ms ({}), score {:.3}",
                    run.sample,
                    run.mode,
                    run.fit.exponential.time_constant * 1e3,
                    run.fit.model.as_str(),
                    run.fit.score
                );
            }
            list_files(&r.files);
        }
        Command::Run { program } => {
            let path = match program {
                Some(p) => p,
                None => cfg.program.as_ref().map(|p| cfg.resolve(p)).ok_or_else(|| anyhow!("no program given"))?,
            };
            let (source, _) = read_program(&path)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("program");
            let r = run_dsl_source(&source, stem, &cfg)?;
            println!("register: {}", r.output.register.labels().join(" "));
            println!("first sample: {} {}", r.output.first_sample.re, r.output.first_sample.im);
            for (name, p) in spinsense::experiments::LINE_NAMES.iter().zip(&r.peaks) {
                println!("{name}: phase {:.3} deg, amplitude {}", p.phase.to_degrees(), p.amplitude);
            }
            list_files(&r.files);
        }
        Command::Builtin { name, cycles } => {
            let which: Builtin = name.parse()?;
            let params = BuiltinParams {
                theta_deg: cfg.thetas_deg[0],
                tau_ms: cfg.tau_ms,
                n_cycles: cycles,
                entangling: cfg.entangling,
                decoupling: cfg.decoupling.unwrap_or(DecouplingMode::Full),
                points: cfg.points,
                dwell_ms: cfg.dwell_ms,
            };
            print!("{}", print(&builtin_sequence(&cfg.molecule()?, which, &params)?));
        }
        Command::Check { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(r) = e.downcast_ref::<Rendered>() {
                eprint!("{r}");
                if !r.0.ends_with('\n') {
                    eprintln!();
                }
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
