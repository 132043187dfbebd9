//! `sheetaudit`: batch front end for the spreadsheet analyses.
//!
//! Every subcommand prints one JSON envelope (or writes it to `--out`).
//! Exit status is 0 on a clean run, 1 when the report carries diagnostics,
//! and 2 on fatal errors or, with `--strict`, on any diagnostic.

use std::fs;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sheetaudit::report::Analysis;
use sheetaudit::{
    classes, modules, parse_a1, to_dot, CellAddr, ClassParams, DotStyle, EqLevel, Error, GeometryParams, Report,
    SrgMode, SrgRequest, WorkbookFormat,
};

#[derive(Parser)]
#[command(
    name = "sheetaudit",
    version,
    about = "Audit spreadsheet programs for irregular formulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sheet summary, DDG size, sinks and cycle check.
    Inspect {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        dot: DotArgs,
    },
    /// Logical areas at one equivalence level.
    Areas {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = Level::Copy)]
        level: Level,
    },
    /// Semantic units and classes.
    Classes {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        class: ClassArgs,
        #[command(flatten)]
        dot: DotArgs,
        /// Write a `cell,class_id,unit_id` CSV here.
        #[arg(long, value_name = "PATH")]
        highlight: Option<PathBuf>,
    },
    /// Data modules after excluding sinks in order.
    Modules {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        curation: CurationArgs,
        #[command(flatten)]
        dot: DotArgs,
        /// Write a `cell,module_id` CSV here.
        #[arg(long, value_name = "PATH")]
        highlight: Option<PathBuf>,
    },
    /// Set-relation graph over units or modules.
    Srg {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = Mode::Modules)]
        mode: Mode,
        /// Module to show as cells; repeatable.
        #[arg(long, value_name = "ID")]
        fisheye: Vec<String>,
        #[command(flatten)]
        class: ClassArgs,
        #[command(flatten)]
        curation: CurationArgs,
        #[command(flatten)]
        dot: DotArgs,
    },
    /// How areas at a coarse level split at a finer one.
    DiffEq {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = Level::Copy)]
        fine: Level,
        #[arg(long, value_enum, default_value_t = Level::Logical)]
        coarse: Level,
    },
    /// Literal constants inside formulas.
    Constants {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Predecessor modules to check when a module's result is wrong.
    Trace {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_name = "ID")]
        module: String,
        #[command(flatten)]
        curation: CurationArgs,
    },
    /// Every analysis in one document, with timings.
    Report {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        class: ClassArgs,
        #[command(flatten)]
        curation: CurationArgs,
        #[command(flatten)]
        dot: DotArgs,
    },
    /// Run the HTTP audit service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args)]
struct IoArgs {
    /// Workbook file, or `-` for standard input.
    workbook: PathBuf,
    /// Defaults to the file extension, then to sniffing the content.
    #[arg(long, value_enum)]
    input_format: Option<InputFormat>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Treat diagnostics as fatal.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct DotArgs {
    /// Also write Graphviz files next to `--out`.
    #[arg(long, requires = "out")]
    dot: bool,
}

#[derive(Args)]
struct ClassArgs {
    #[arg(long, default_value_t = 1)]
    dh: u32,
    #[arg(long, default_value_t = 1)]
    dv: u32,
    /// Defaults to dh + dv.
    #[arg(long)]
    dman: Option<u32>,
    #[arg(long, value_enum, default_value_t = Level::Copy)]
    eq_start: Level,
    #[arg(long, value_enum, default_value_t = Level::Copy)]
    eq_rest: Level,
}

#[derive(Args)]
struct CurationArgs {
    /// Sink to drop from the result list; repeatable, applied in order.
    #[arg(long, value_name = "CELL")]
    exclude: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Copy,
    Logical,
    Structural,
}

impl From<Level> for EqLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::Copy => EqLevel::Copy,
            Level::Logical => EqLevel::Logical,
            Level::Structural => EqLevel::Structural,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Units,
    Modules,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Csv,
    Json,
}

impl ClassArgs {
    fn params(&self) -> Result<ClassParams, Error> {
        Ok(ClassParams {
            geometry: GeometryParams::new(self.dh, self.dv, self.dman)?,
            eq_start: self.eq_start.into(),
            eq_rest: self.eq_rest.into(),
        })
    }
}

impl CurationArgs {
    fn cells(&self) -> Result<Vec<CellAddr>, Error> {
        self.exclude.iter().map(|c| parse_a1(c)).collect()
    }
}

/// A report plus side files.
struct Output {
    report: Report,
    artifacts: Vec<(PathBuf, String)>,
}

fn load(io: &IoArgs) -> Result<Analysis, Error> {
    let text = if io.workbook.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::MalformedWorkbook(format!("standard input: {e}")))?;
        s
    } else {
        fs::read_to_string(&io.workbook)
            .map_err(|e| Error::MalformedWorkbook(format!("{}: {e}", io.workbook.display())))?
    };
    let format = match io.input_format {
        Some(InputFormat::Csv) => WorkbookFormat::Csv,
        Some(InputFormat::Json) => WorkbookFormat::Json,
        None => match io.workbook.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => WorkbookFormat::Json,
            Some(e) if e.eq_ignore_ascii_case("csv") => WorkbookFormat::Csv,
            _ if text.trim_start().starts_with('{') => WorkbookFormat::Json,
            _ => WorkbookFormat::Csv,
        },
    };
    Analysis::load(&text, format)
}

/// `report.json` + `units` -> `report.units.dot`.
fn sibling(out: &Path, tag: Option<&str>, ext: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match tag {
        Some(t) => format!("{stem}.{t}.{ext}"),
        None => format!("{stem}.{ext}"),
    };
    out.with_file_name(name)
}

fn dot_artifacts(io: &IoArgs, dot: &DotArgs, files: Vec<(Option<&str>, String)>) -> Vec<(PathBuf, String)> {
    match (&io.out, dot.dot) {
        (Some(out), true) => files
            .into_iter()
            .map(|(tag, text)| (sibling(out, tag, "dot"), text))
            .collect(),
        _ => Vec::new(),
    }
}

fn execute(command: &Command) -> Result<Output, Error> {
    let plain = |report| Output {
        report,
        artifacts: Vec::new(),
    };
    Ok(match command {
        Command::Inspect { io, dot } => {
            let a = load(io)?;
            Output {
                report: a.inspect(),
                artifacts: dot_artifacts(io, dot, vec![(None, a.ddg().to_dot())]),
            }
        }
        Command::Areas { io, level } => plain(load(io)?.areas((*level).into())),
        Command::Classes {
            io,
            class,
            dot,
            highlight,
        } => {
            let a = load(io)?;
            let params = class.params()?;
            let report = a.classes(&params);
            let req = SrgRequest {
                mode: SrgMode::Units,
                fisheye: Vec::new(),
                classes: params,
            };
            let mut artifacts = Vec::new();
            if dot.dot {
                let srg = a.srg_graph(&req, &[])?;
                artifacts = dot_artifacts(io, dot, vec![(None, to_dot(&srg, DotStyle::Audit))]);
            }
            if let Some(path) = highlight {
                let list = sheetaudit::grow_classes(a.parsed(), &params);
                artifacts.push((path.clone(), classes::highlight_csv(&list)));
            }
            Output { report, artifacts }
        }
        Command::Modules {
            io,
            curation,
            dot,
            highlight,
        } => {
            let a = load(io)?;
            let exclusions = curation.cells()?;
            let report = a.modules(&exclusions)?;
            let mut artifacts = Vec::new();
            if dot.dot {
                let req = SrgRequest {
                    mode: SrgMode::Modules,
                    fisheye: Vec::new(),
                    classes: ClassParams::default(),
                };
                let srg = a.srg_graph(&req, &exclusions)?;
                artifacts = dot_artifacts(io, dot, vec![(None, to_dot(&srg, DotStyle::Audit))]);
            }
            if let Some(path) = highlight {
                let cur = a.curation(&exclusions)?;
                let set = sheetaudit::recover_modules(a.ddg(), cur.active())?;
                artifacts.push((path.clone(), modules::highlight_csv(&set.modules)));
            }
            Output { report, artifacts }
        }
        Command::Srg {
            io,
            mode,
            fisheye,
            class,
            curation,
            dot,
        } => {
            let a = load(io)?;
            let req = SrgRequest {
                mode: match mode {
                    Mode::Units => SrgMode::Units,
                    Mode::Modules => SrgMode::Modules,
                },
                fisheye: fisheye.clone(),
                classes: class.params()?,
            };
            let exclusions = curation.cells()?;
            let report = a.srg(&req, &exclusions)?;
            let artifacts = if dot.dot {
                let srg = a.srg_graph(&req, &exclusions)?;
                dot_artifacts(io, dot, vec![(None, to_dot(&srg, DotStyle::Audit))])
            } else {
                Vec::new()
            };
            Output { report, artifacts }
        }
        Command::DiffEq { io, fine, coarse } => plain(load(io)?.diff((*fine).into(), (*coarse).into())?),
        Command::Constants { io } => plain(load(io)?.constants()),
        Command::Trace { io, module, curation } => {
            let a = load(io)?;
            plain(a.trace(module, &curation.cells()?)?)
        }
        Command::Report {
            io,
            class,
            curation,
            dot,
        } => {
            let a = load(io)?;
            let params = class.params()?;
            let exclusions = curation.cells()?;
            let report = a.full(&params, &exclusions)?;
            let mut files = vec![(Some("ddg"), a.ddg().to_dot())];
            if dot.dot {
                let units = SrgRequest {
                    mode: SrgMode::Units,
                    fisheye: Vec::new(),
                    classes: params,
                };
                files.push((Some("units"), to_dot(&a.srg_graph(&units, &[])?, DotStyle::Audit)));
                if a.cycle().is_none() {
                    let modules = SrgRequest {
                        mode: SrgMode::Modules,
                        ..units
                    };
                    files.push((
                        Some("modules"),
                        to_dot(&a.srg_graph(&modules, &exclusions)?, DotStyle::Audit),
                    ));
                }
            }
            Output {
                artifacts: dot_artifacts(io, dot, files),
                report,
            }
        }
        Command::Serve { .. } => unreachable!("handled before analysis"),
    })
}

fn io_args(command: &Command) -> Option<&IoArgs> {
    match command {
        Command::Inspect { io, .. }
        | Command::Areas { io, .. }
        | Command::Classes { io, .. }
        | Command::Modules { io, .. }
        | Command::Srg { io, .. }
        | Command::DiffEq { io, .. }
        | Command::Constants { io }
        | Command::Trace { io, .. }
        | Command::Report { io, .. } => Some(io),
        Command::Serve { .. } => None,
    }
}

fn write_file(path: &Path, text: &str) -> io::Result<()> {
    fs::write(path, text).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn serve(host: &str, port: u16) -> ExitCode {
    let addr: SocketAddr = match format!("{host}:{port}").parse() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: invalid address {host}:{port}: {e}");
            return ExitCode::from(2);
        }
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    eprintln!("listening on http://{addr}");
    match runtime.block_on(sheetaudit_service::serve(addr, sheetaudit_service::AppState::default())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Serve { port, host } = &cli.command {
        return serve(host, *port);
    }
    let io = io_args(&cli.command).expect("analysis commands carry io arguments");
    let output = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            return ExitCode::from(2);
        }
    };
    let text = output.report.to_pretty();
    let written = match &io.out {
        Some(path) => write_file(path, &text),
        None => io::stdout().write_all(text.as_bytes()),
    }
    .and_then(|()| output.artifacts.iter().try_for_each(|(p, t)| write_file(p, t)));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    for d in &output.report.diagnostics {
        eprintln!("{} {}", d.code, d.message);
    }
    match (output.report.diagnostics.is_empty(), io.strict) {
        (true, _) => ExitCode::SUCCESS,
        (false, false) => ExitCode::from(1),
        (false, true) => ExitCode::from(2),
    }
}
