use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use heatkkt::experiment::{self, ChartAxis, RunRecord, SweepOutput};
use heatkkt::{CoarseOrder, CoarseVariant, JhatSign, PrecondKind, ProblemConfig, TwoLevelForm};

#[derive(Parser)]
#[command(name = "heatkkt", version, about = "Space-time KKT solves for heat-equation control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write a JSON record.
    Solve {
        #[command(flatten)]
        opts: ConfigOpts,
        /// Write the stacked solution [u, z, w] as JSON.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Nt sweep at fixed steps per subdomain; writes CSV.
    WeakScaling {
        #[command(flatten)]
        opts: ConfigOpts,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_NT_LIST)]
        nt_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_WEAK_OMEGAS)]
        omega_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["one-level", "two-level"])]
        precond_list: Vec<PrecondKind>,
    },
    /// Regularization sweep at fixed Nt and Nd; writes CSV.
    OmegaSweep {
        #[command(flatten)]
        opts: ConfigOpts,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_SWEEP_OMEGAS)]
        omega_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values = ["one-level", "two-level"])]
        precond_list: Vec<PrecondKind>,
    },
    /// Render a results CSV as an SVG chart.
    Chart {
        csv: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Nt,
    InverseOmega,
}

#[derive(Args)]
struct ConfigOpts {
    /// JSON file with a problem configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nd: Option<usize>,
    /// Sets nd = nt / steps (required for weak-scaling).
    #[arg(long)]
    steps_per_subdomain: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    precond: Option<PrecondKind>,
    #[arg(long)]
    coarse: Option<CoarseVariant>,
    #[arg(long)]
    two_level_form: Option<TwoLevelForm>,
    #[arg(long)]
    coarse_order: Option<CoarseOrder>,
    #[arg(long)]
    jhat_sign: Option<JhatSign>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    restart: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigOpts {
    fn build(&self) -> Result<ProblemConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ProblemConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            nt => c.nt,
            nd => c.nd,
            omega => c.omega,
            nu => c.nu,
            nx => c.nx,
            ny => c.ny,
            precond => c.precond,
            coarse => c.coarse_variant,
            two_level_form => c.two_level_form,
            coarse_order => c.coarse_order,
            jhat_sign => c.jhat_sign,
            tol => c.gmres.tol,
            max_iters => c.gmres.max_iters,
        );
        if self.restart.is_some() {
            c.gmres.restart = self.restart;
        }
        if let Some(steps) = self.steps_per_subdomain {
            if steps == 0 || c.nt % steps != 0 {
                bail!("nt={} is not a positive multiple of {} steps per subdomain", c.nt, steps);
            }
            c.nd = c.nt / steps;
        }
        Ok(c)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn progress(r: &RunRecord) {
    let c = &r.config;
    eprintln!(
        "{} nt={} nd={} omega={} iters={} converged={}{}",
        c.precond,
        c.nt,
        c.nd,
        c.omega,
        r.iterations,
        r.converged,
        r.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default()
    );
}

fn finish_sweep(sweep: SweepOutput, out: Option<&Path>) -> Result<()> {
    for s in &sweep.skipped {
        eprintln!("skipped {} nt={} omega={}: {}", s.precond, s.nt, s.omega, s.reason);
    }
    let mut w = output(out)?;
    experiment::write_csv(&sweep.rows(), &mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { opts, snapshot } => {
            let config = opts.build()?;
            config.validate()?;
            let outcome = experiment::run_solve(&config);
            let (record, solution) = match outcome {
                Ok(o) => (o.record, Some(o.solution)),
                Err(heatkkt::Error::Divergence { .. }) => (experiment::run_record(&config), None),
                Err(e) => return Err(e.into()),
            };
            progress(&record);
            let mut w = output(opts.out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &record)?;
            writeln!(w)?;
            w.flush()?;
            if let (Some(path), Some(sol)) = (snapshot, solution) {
                let n = sol.len() / 3;
                let json = serde_json::json!({
                    "nt": config.nt,
                    "nx_interior": config.nx_interior(),
                    "ny_interior": config.ny_interior(),
                    "u": &sol[..n],
                    "z": &sol[n..2 * n],
                    "w": &sol[2 * n..],
                });
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                serde_json::to_writer(BufWriter::new(f), &json)?;
            }
        }
        Command::WeakScaling {
            opts,
            nt_list,
            omega_list,
            precond_list,
        } => {
            let Some(steps) = opts.steps_per_subdomain else {
                bail!("weak-scaling needs --steps-per-subdomain");
            };
            let out = opts.out.clone();
            let base = ConfigOpts {
                steps_per_subdomain: None,
                ..opts
            }
            .build()?;
            let sweep = experiment::weak_scaling(&base, steps, &nt_list, &omega_list, &precond_list, progress)?;
            finish_sweep(sweep, out.as_deref())?;
        }
        Command::OmegaSweep {
            opts,
            omega_list,
            precond_list,
        } => {
            let base = opts.build()?;
            let sweep = experiment::omega_sweep(&base, &omega_list, &precond_list, progress)?;
            finish_sweep(sweep, opts.out.as_deref())?;
        }
        Command::Chart { csv, output: svg, axis } => {
            let f = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let rows = experiment::read_csv(f).with_context(|| format!("reading {}", csv.display()))?;
            let axis = match axis {
                Some(AxisArg::Nt) => ChartAxis::Nt,
                Some(AxisArg::InverseOmega) => ChartAxis::InverseOmega,
                None => ChartAxis::infer(&rows),
            };
            std::fs::write(&svg, experiment::render_chart(&rows, axis)).with_context(|| format!("writing {}", svg.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
