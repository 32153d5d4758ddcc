use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use bbo_client::{Client, DEFAULT_SERVER};
use bbo_core::harness::config::RunSettings;
use bbo_core::harness::report::RECORDS_FILE;
use bbo_core::harness::{load_records, save_records, ReportFile};

#[derive(Parser, Debug)]
#[command(name = "bbo", version, about = "Run and report surrogate-based optimization experiments")]
struct Cli {
    /// Base URL of a running bbo-server.
    #[arg(long, global = true, env = "BBO_SERVER", default_value = DEFAULT_SERVER)]
    server: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment grid on the server and write records and CSVs.
    Run(RunArgs),
    /// Regenerate CSV reports from stored records.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// rastrigin, rosenbrock, levy or external (comma-separated for a grid)
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    /// Acquisition name, e.g. EEPA+, DYCORS, sEI, qKG (comma-separated for a grid)
    #[arg(long)]
    acq: Option<String>,
    /// uniform, sobol or dynamic (comma-separated for a grid)
    #[arg(long)]
    disc: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    parallel: Option<String>,
    #[arg(long)]
    external_cmd: Option<String>,
    /// Seconds per external evaluation.
    #[arg(long)]
    timeout: Option<String>,
    /// Candidate-set size.
    #[arg(long)]
    candidates: Option<String>,
    /// Lower bound of every coordinate (external problems).
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<String>,
    /// Upper bound of every coordinate (external problems).
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<String>,
    /// minimize or maximize (external problems).
    #[arg(long)]
    sense: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Result<RunSettings> {
        let mut base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                RunSettings::from_kv_text(&text)
                    .with_context(|| format!("in {}", path.display()))?
            }
            None => RunSettings::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("dim", &self.dim),
            ("acq", &self.acq),
            ("disc", &self.disc),
            ("budget", &self.budget),
            ("batch", &self.batch),
            ("init", &self.init),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("out", &self.out),
            ("parallel", &self.parallel),
            ("external-cmd", &self.external_cmd),
            ("timeout", &self.timeout),
            ("candidates", &self.candidates),
            ("lower", &self.lower),
            ("upper", &self.upper),
            ("sense", &self.sense),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                base.set(key, v).with_context(|| format!("--{key}"))?;
            }
        }
        Ok(base)
    }
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory holding records.json; reports are written here.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Records file, if not `<out>/records.json`.
    #[arg(long)]
    records: Option<PathBuf>,
}

fn write_files(dir: &Path, files: &[ReportFile]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

async fn run(client: &Client, args: &RunArgs) -> Result<bool> {
    let mut settings = args.settings()?;
    let out = settings.out_dir();
    // resolve relative external commands here, where the user typed them
    if let Some(cmd) = &settings.external_cmd {
        if cmd.components().count() > 1 && cmd.is_relative() {
            settings.external_cmd = Some(std::fs::canonicalize(cmd).unwrap_or(cmd.clone()));
        }
    }
    let submitted = client.submit(&settings).await?;
    eprintln!("run {} submitted: {} cells", submitted.id, submitted.cells);

    let mut last = usize::MAX;
    let view = client
        .wait(&submitted.id, Duration::from_millis(500), |v| {
            if v.cells_done != last {
                last = v.cells_done;
                eprint!("\r{}/{} cells, {} failed", v.cells_done, v.cells, v.cells_failed);
                let _ = std::io::stderr().flush();
            }
        })
        .await?;
    eprintln!();
    if let Some(e) = &view.error {
        anyhow::bail!("run {} failed: {e}", view.id);
    }
    let records = view.records.unwrap_or_default();
    save_records(&records, &out.join(RECORDS_FILE))?;
    for r in records.iter().filter(|r| !r.is_ok()) {
        if let bbo_core::harness::RunStatus::Failed(reason) = &r.status {
            eprintln!("{} d={} {} {} rep {}: {reason}", r.problem, r.dim, r.acq, r.disc, r.replication);
        }
    }
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed < records.len() {
        let files = client.run_report(&submitted.id).await?;
        write_files(&out, &files)?;
    }
    eprintln!("wrote {} ({} of {} cells failed)", out.display(), failed, records.len());
    Ok(failed == 0)
}

async fn report(client: &Client, args: &ReportArgs) -> Result<bool> {
    let path = args.records.clone().unwrap_or_else(|| args.out.join(RECORDS_FILE));
    let records =
        load_records(&path).with_context(|| format!("cannot load {}", path.display()))?;
    let files = client.report(records).await?;
    write_files(&args.out, &files)?;
    eprintln!("wrote {} files to {}", files.len(), args.out.display());
    Ok(true)
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let client = Client::new(&cli.server);
    let result = match &cli.command {
        Command::Run(args) => run(&client, args).await,
        Command::Report(args) => report(&client, args).await,
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
