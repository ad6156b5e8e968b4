//! Command-line front end. [`run`] parses an argument list, executes the
//! subcommand and returns the exit code together with what would go to
//! standard output and standard error, so it can be driven in-process.
//!
//! Reports are line-oriented `key: value` text in fixed order, versioned
//! `mac-report/1`. Information quantities appear twice, as `*_nats` and
//! `*_bits`. Users are numbered from 1 in keys; input symbols keep the
//! 0-based numbering of channel files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::elementary::{enumerate_master_faces, is_elementary, master_face_count, DEFAULT_FACE_CAP};
use crate::error::{Error, Result};
use crate::info::{all_orders, mutual_information};
use crate::model::{load_channel, ChannelMatrix, IpdProduct, MacType};
use crate::optimize::{capacity, kt_check, InnerSolver, KtReport, OptimizeOptions};
use crate::region::region_from_orders;
use crate::suites::{run_suite, ChannelSource, Suite, SuiteConfig};
use crate::verify::{grid_capacity, GridSpec};

pub const REPORT_FORMAT: &str = "mac-report/1";
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_GUARD: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Parser, Debug)]
#[command(name = "maccap", version, about = "Capacity of discrete memoryless multiple-access channels")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity by optimization over the master elementary faces.
    Capacity(CapacityArgs),
    /// Kuhn-Tucker conditions at a given input distribution.
    KtCheck(KtArgs),
    /// List the master elementary faces.
    Faces(FacesArgs),
    /// Run a randomized verification suite.
    Verify(VerifyArgs),
    /// Sample the capacity region and its convex hull.
    Region(RegionArgs),
    /// Brute-force grid capacity.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InnerArg {
    FixedPoint,
    Pg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrdersArg {
    All,
    #[value(name = "1")]
    One,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum FormatArg {
    Report,
    Csv,
}

#[derive(Args, Debug)]
struct OptArgs {
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    kt_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
    #[arg(long, value_enum, default_value_t = InnerArg::FixedPoint)]
    inner: InnerArg,
    /// Skip the starts with all users but one at a vertex.
    #[arg(long)]
    no_vertex_starts: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl OptArgs {
    fn options(&self) -> OptimizeOptions {
        OptimizeOptions {
            max_sweeps: self.max_sweeps,
            rel_tol: self.rel_tol,
            kt_tol: self.kt_tol,
            starts: self.starts,
            vertex_starts: !self.no_vertex_starts,
            seed: self.seed,
            inner: match self.inner {
                InnerArg::FixedPoint => InnerSolver::FixedPoint,
                InnerArg::Pg => InnerSolver::ProjectedGradient,
            },
        }
    }

    fn echo(&self, r: &mut Report) {
        r.kv("starts", self.starts);
        r.kv("rel_tol", fmt_f(self.rel_tol));
        r.kv("kt_tol", fmt_f(self.kt_tol));
        r.kv("max_sweeps", self.max_sweeps);
        r.kv(
            "inner",
            match self.inner {
                InnerArg::FixedPoint => "fixed-point",
                InnerArg::Pg => "pg",
            },
        );
        r.kv("vertex_starts", !self.no_vertex_starts);
        r.kv("seed", self.seed);
    }
}

#[derive(Args, Debug)]
struct CapacityArgs {
    file: PathBuf,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long, default_value_t = DEFAULT_FACE_CAP)]
    face_cap: usize,
    /// Cross-check against the grid oracle at this resolution.
    #[arg(long)]
    oracle: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KtArgs {
    file: PathBuf,
    /// `uniform`, `vertex:i1,...,iN`, or per-user lists such as `0.5,0.5;0.2,0.8`.
    #[arg(long, default_value = "uniform")]
    ipd: String,
    #[arg(long, default_value_t = 1e-6)]
    kt_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FacesArgs {
    file: Option<PathBuf>,
    /// MAC type such as `3,2:2` when no file is given.
    #[arg(long = "type")]
    mac_type: Option<String>,
    #[arg(long, default_value_t = DEFAULT_FACE_CAP)]
    face_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Single channel to check; otherwise random channels of `--type`.
    file: Option<PathBuf>,
    #[arg(long)]
    suite: String,
    #[arg(long = "type", default_value = "2,2:2")]
    mac_type: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Grid resolution (default 101 for connect, 21 otherwise).
    #[arg(long)]
    resolution: Option<usize>,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegionArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 21)]
    resolution: usize,
    #[arg(long, value_enum, default_value_t = OrdersArg::All)]
    orders: OrdersArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Report)]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fixed-order report writer.
struct Report {
    text: String,
}

impl Report {
    fn new(command: &str) -> Self {
        let mut r = Self { text: String::new() };
        r.kv("format", REPORT_FORMAT);
        r.kv("artifact", concat!("mac-capacity ", env!("CARGO_PKG_VERSION")));
        r.kv("command", command);
        r
    }

    fn section(&mut self, name: &str) {
        let _ = writeln!(self.text, "[{name}]");
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}: {value}");
    }

    fn info(&mut self, key: &str, nats: f64) {
        self.kv(&format!("{key}_nats"), fmt_f(nats));
        self.kv(&format!("{key}_bits"), fmt_f(nats / std::f64::consts::LN_2));
    }

    fn line(&mut self, line: &str) {
        let _ = writeln!(self.text, "{line}");
    }

    fn ipd(&mut self, prefix: &str, p: &IpdProduct) {
        for (k, part) in p.parts().iter().enumerate() {
            self.kv(&format!("{prefix}.user{}", k + 1), fmt_vec(part));
        }
    }

    fn diagnostics(&mut self, diags: &[String]) {
        self.section("diagnostics");
        self.kv("count", diags.len());
        for d in diags {
            self.line(&format!("- {d}"));
        }
    }
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:e}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| fmt_f(x)).collect();
    format!("[{}]", items.join(", "))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Outcome { code: EXIT_OK, stdout: text, stderr: String::new() }
                }
                _ => Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: text },
            };
        }
    };
    let exec = || dispatch(&cli.command);
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} worker threads: {e}")))
            .and_then(|pool| pool.install(exec)),
        None => exec(),
    };
    match result {
        Ok((code, stdout)) => Outcome { code, stdout, stderr: String::new() },
        Err(e) => Outcome {
            code: match e {
                Error::GuardExceeded { .. } => EXIT_GUARD,
                _ => EXIT_VALIDATION,
            },
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn dispatch(cmd: &Command) -> Result<(i32, String)> {
    let (code, text, out) = match cmd {
        Command::Capacity(a) => (EXIT_OK, cmd_capacity(a)?, a.out.as_deref()),
        Command::KtCheck(a) => (EXIT_OK, cmd_kt(a)?, a.out.as_deref()),
        Command::Faces(a) => (EXIT_OK, cmd_faces(a)?, a.out.as_deref()),
        Command::Verify(a) => {
            let (ok, text) = cmd_verify(a)?;
            (if ok { EXIT_OK } else { EXIT_VERIFY_FAILED }, text, a.out.as_deref())
        }
        Command::Region(a) => (EXIT_OK, cmd_region(a)?, a.out.as_deref()),
        Command::Oracle(a) => (EXIT_OK, cmd_oracle(a)?, a.out.as_deref()),
    };
    if let Some(path) = out {
        fs::write(path, &text)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok((code, text))
}

fn read_channel(path: &Path) -> Result<ChannelMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    load_channel(&text)
}

fn echo_channel(r: &mut Report, path: &Path, ch: &ChannelMatrix) {
    r.kv("file", path.display());
    r.kv("type", ch.mac_type());
}

/// Parses `uniform`, `vertex:i1,...,iN` or `a,b;c,d` per user.
pub fn parse_ipd(text: &str, mac_type: &MacType) -> Result<IpdProduct> {
    let text = text.trim();
    if text == "uniform" {
        return Ok(IpdProduct::uniform(mac_type));
    }
    if let Some(rest) = text.strip_prefix("vertex:") {
        let symbols = rest
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad vertex `{rest}`: {e}")))?;
        return IpdProduct::vertex(mac_type, &symbols);
    }
    let parts = text
        .split(';')
        .map(|user| {
            user.split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad IPD `{text}`: {e}")))?;
    if parts.len() != mac_type.users()
        || parts.iter().zip(mac_type.inputs()).any(|(p, &n)| p.len() != n)
    {
        return Err(Error::SizeMismatch {
            expected: format!("one list per user with sizes {:?}", mac_type.inputs()),
            found: format!("{:?}", parts.iter().map(Vec::len).collect::<Vec<_>>()),
        });
    }
    IpdProduct::new(parts)
}

fn kt_section(r: &mut Report, kt: &KtReport) {
    r.kv("kt.satisfied", kt.satisfied);
    r.kv("kt.max_equality_residual", fmt_f(kt.max_equality_residual));
    r.kv("kt.max_inequality_violation", fmt_f(kt.max_inequality_violation));
    for (k, js) in kt.scores.iter().enumerate() {
        r.kv(&format!("kt.scores.user{}", k + 1), fmt_vec(js));
    }
}

fn cmd_capacity(a: &CapacityArgs) -> Result<String> {
    let ch = read_channel(&a.file)?;
    let opts = a.opt.options();
    let mut r = Report::new("capacity");
    r.section("inputs");
    echo_channel(&mut r, &a.file, &ch);
    a.opt.echo(&mut r);
    r.kv("face_cap", a.face_cap);
    r.kv("oracle", a.oracle.map_or("none".to_string(), |v| v.to_string()));
    let res = capacity(&ch, &opts, a.face_cap)?;
    let mut diags = res.full_kt.diagnostics.clone();
    r.section("results");
    r.info("capacity", res.capacity_nats);
    r.ipd("optimal_ipd", &res.optimal_ipd);
    r.kv("achieving_face", &res.achieving_face);
    r.kv("elementary", res.elementary);
    r.kv("truncated", res.truncated);
    r.kv("faces", res.per_face.len());
    kt_section(&mut r, &res.full_kt);
    let co: Vec<String> = res.co_achievers.iter().map(|i| (i + 1).to_string()).collect();
    r.kv("co_achievers", format!("[{}]", co.join(", ")));
    r.section("faces");
    for (f, fo) in res.per_face.iter().enumerate() {
        r.line(&format!(
            "face{}: {} value_nats={} value_bits={} converged={} kt={}",
            f + 1,
            fo.face,
            fmt_f(fo.value),
            fmt_f(fo.value / std::f64::consts::LN_2),
            fo.converged,
            fo.kt.satisfied
        ));
        if !fo.converged {
            diags.push(format!("face {} did not converge", f + 1));
        }
    }
    if let Some(res_grid) = a.oracle {
        let g = grid_capacity(&ch, &GridSpec::for_type(res_grid, ch.mac_type())?, None)?;
        r.section("oracle");
        r.kv("resolution", res_grid);
        r.info("grid_value", g.value);
        r.info("grid_bound", g.bound);
        r.ipd("grid_argmax", &g.argmax);
        let consistent = res.capacity_nats >= g.value - 1e-12 && res.capacity_nats <= g.value + g.bound;
        r.kv("consistent", consistent);
        if !consistent {
            diags.push("capacity outside the grid oracle's interval".into());
        }
    }
    r.diagnostics(&diags);
    Ok(r.text)
}

fn cmd_kt(a: &KtArgs) -> Result<String> {
    let ch = read_channel(&a.file)?;
    let p = parse_ipd(&a.ipd, ch.mac_type())?;
    let mut r = Report::new("kt-check");
    r.section("inputs");
    echo_channel(&mut r, &a.file, &ch);
    r.kv("ipd", &a.ipd);
    r.kv("kt_tol", fmt_f(a.kt_tol));
    let kt = kt_check(&ch, &p, a.kt_tol)?;
    r.section("results");
    r.ipd("ipd", &p);
    r.info("mutual_information", mutual_information(&ch, &p)?);
    kt_section(&mut r, &kt);
    r.diagnostics(&kt.diagnostics);
    Ok(r.text)
}

fn cmd_faces(a: &FacesArgs) -> Result<String> {
    let mut r = Report::new("faces");
    r.section("inputs");
    let mac_type = match (&a.file, &a.mac_type) {
        (Some(path), None) => {
            let ch = read_channel(path)?;
            echo_channel(&mut r, path, &ch);
            ch.mac_type().clone()
        }
        (None, Some(t)) => {
            let t: MacType = t.parse()?;
            r.kv("type", &t);
            t
        }
        _ => {
            return Err(Error::InvalidArgument(
                "faces needs exactly one of a channel file or --type".into(),
            ))
        }
    };
    r.kv("face_cap", a.face_cap);
    let set = enumerate_master_faces(&mac_type, a.face_cap);
    r.section("results");
    r.kv("elementary", is_elementary(&mac_type));
    r.kv("master_face_count", master_face_count(&mac_type));
    r.kv("listed", set.faces.len());
    r.kv("truncated", set.truncated);
    for (f, face) in set.faces.iter().enumerate() {
        r.kv(&format!("face{}", f + 1), face);
    }
    let diags = if set.truncated {
        vec![format!("listing capped at {} faces", a.face_cap)]
    } else {
        Vec::new()
    };
    r.diagnostics(&diags);
    Ok(r.text)
}

fn cmd_verify(a: &VerifyArgs) -> Result<(bool, String)> {
    let suite: Suite = a.suite.parse()?;
    let resolution = a.resolution.unwrap_or(suite.default_resolution());
    let mut r = Report::new("verify");
    r.section("inputs");
    r.kv("suite", suite);
    let source = match &a.file {
        Some(path) => {
            let ch = read_channel(path)?;
            echo_channel(&mut r, path, &ch);
            ChannelSource::Fixed(ch)
        }
        None => {
            let t: MacType = a.mac_type.parse()?;
            r.kv("type", &t);
            r.kv("trials", a.trials);
            ChannelSource::Random(t)
        }
    };
    r.kv("resolution", resolution);
    a.opt.echo(&mut r);
    let report = run_suite(&SuiteConfig {
        suite,
        source,
        trials: a.trials,
        resolution,
        seed: a.opt.seed,
        opts: a.opt.options(),
    })?;
    let (pass, fail, skip) = report.counts();
    r.section("results");
    r.kv("passed", report.passed());
    r.kv("pass", pass);
    r.kv("fail", fail);
    r.kv("skipped", skip);
    if let Some(w) = report.worst() {
        r.kv("worst_trial", w.trial + 1);
        r.kv("worst_metric", fmt_f(w.metric));
        r.kv("worst_detail", &w.detail);
    }
    r.section("table");
    r.line("trial,result,metric,detail");
    for row in &report.rows {
        let result = match row.passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        r.line(&format!(
            "{},{result},{},\"{}\"",
            row.trial + 1,
            fmt_f(row.metric),
            row.detail.replace('"', "'")
        ));
    }
    r.diagnostics(&[]);
    Ok((report.passed(), r.text))
}

fn order_label(order: &[usize]) -> String {
    order.iter().map(|u| (u + 1).to_string()).collect::<Vec<_>>().join("-")
}

fn cmd_region(a: &RegionArgs) -> Result<String> {
    let ch = read_channel(&a.file)?;
    let users = ch.mac_type().users();
    let orders = match a.orders {
        OrdersArg::All => all_orders(users),
        OrdersArg::One => vec![(0..users).collect()],
    };
    let grid = GridSpec::for_type(a.resolution, ch.mac_type())?;
    let est = region_from_orders(&ch, &grid, &orders)?;
    let rate_header: Vec<String> = (1..=users).map(|k| format!("R{k}")).collect();
    let mut table = String::new();
    let _ = writeln!(table, "order,{}", rate_header.join(","));
    for s in &est.samples {
        let rates: Vec<String> = s.user_rates().iter().map(|&x| fmt_f(x)).collect();
        let _ = writeln!(table, "{},{}", order_label(&s.order), rates.join(","));
    }
    let mut hull_rows = String::new();
    if let Some(h) = &est.hull {
        let _ = writeln!(hull_rows, "{}", rate_header.join(","));
        for v in &h.vertices {
            let cells: Vec<String> = v.iter().map(|&x| fmt_f(x)).collect();
            let _ = writeln!(hull_rows, "{}", cells.join(","));
        }
    }
    if a.format == FormatArg::Csv {
        let mut out = table;
        if est.hull.is_some() {
            out.push_str("\n# hull vertices\n");
            out.push_str(&hull_rows);
        }
        return Ok(out);
    }
    let mut r = Report::new("region");
    r.section("inputs");
    echo_channel(&mut r, &a.file, &ch);
    r.kv("resolution", a.resolution);
    r.kv(
        "orders",
        orders.iter().map(|o| order_label(o)).collect::<Vec<_>>().join(" "),
    );
    r.section("results");
    r.kv("units", "nats");
    r.kv("samples", est.samples.len());
    match &est.hull {
        Some(h) => {
            r.kv("hull_vertices", h.vertices.len());
            r.kv("hull_facets", h.facets.len());
            r.info("max_sum_rate", h.max_linear(&vec![1.0; users]));
        }
        None => r.kv("hull_vertices", "none"),
    }
    r.section("points");
    r.text.push_str(&table);
    if est.hull.is_some() {
        r.section("hull");
        r.text.push_str(&hull_rows);
    }
    r.diagnostics(&est.diagnostics);
    Ok(r.text)
}

fn cmd_oracle(a: &OracleArgs) -> Result<String> {
    let ch = read_channel(&a.file)?;
    let grid = GridSpec::for_type(a.resolution, ch.mac_type())?;
    let mut r = Report::new("oracle");
    r.section("inputs");
    echo_channel(&mut r, &a.file, &ch);
    r.kv("resolution", a.resolution);
    let g = grid_capacity(&ch, &grid, None)?;
    r.section("results");
    r.kv("points", g.points);
    r.info("grid_value", g.value);
    r.info("grid_bound", g.bound);
    r.kv("lipschitz", fmt_f(g.lipschitz));
    r.ipd("argmax", &g.argmax);
    r.diagnostics(&[]);
    Ok(r.text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FaceProduct;

    #[test]
    fn ipd_specs() {
        let t: MacType = "2,3:2".parse().unwrap();
        assert_eq!(parse_ipd("uniform", &t).unwrap(), IpdProduct::uniform(&t));
        let v = parse_ipd("vertex:1,2", &t).unwrap();
        assert_eq!(v.part(1), &[0.0, 0.0, 1.0]);
        let l = parse_ipd("0.25,0.75; 0.5,0.5,0", &t).unwrap();
        assert_eq!(l.part(0), &[0.25, 0.75]);
        assert!(parse_ipd("0.5,0.5", &t).is_err());
        assert!(parse_ipd("vertex:2,0", &t).is_err());
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["maccap", "frobnicate"]).code, EXIT_USAGE);
        assert_eq!(run(["maccap"]).code, EXIT_USAGE);
        assert_eq!(run(["maccap", "--help"]).code, EXIT_OK);
        assert_eq!(run(["maccap", "--version"]).code, EXIT_OK);
        assert_eq!(run(["maccap", "capacity"]).code, EXIT_USAGE);
    }

    #[test]
    fn faces_by_type() {
        let o = run(["maccap", "faces", "--type", "3,2:2"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        assert!(o.stdout.contains("listed: 3\n"));
        assert!(o.stdout.contains("face3: {1,2} x {0,1}\n"), "{}", o.stdout);
    }

    #[test]
    fn float_format_is_round_trip() {
        let x = 1.5 * std::f64::consts::LN_2;
        assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
        assert_eq!(fmt_f(f64::INFINITY), "inf");
    }

    #[test]
    fn face_display_matches_listing() {
        let f = FaceProduct::new(vec![vec![0, 1], vec![0]]).unwrap();
        assert_eq!(f.to_string(), "{0,1} x {0}");
    }
}
