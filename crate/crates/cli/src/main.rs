//! `srcomp`: parameter sweeps and the verification report.

mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use srcomp::qhf_geodesics::{conjugate_time, sublaplacian_along};
use srcomp::sasakian_curvature::VerticalVector;
use srcomp::scalar_models::{
    blowup_time_kab, blowup_time_kc, finiteness_predicate, upper_bound_kab, BlowUpTime,
};
use srcomp::verify::{jacobi_blowup_kab, linspace, run_all, Fault, VerifyConfig, DEFAULT_SEED};

use table::{Cell, Table};

/// Integration tolerance for every ODE solve; recorded in each row.
const INT_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "srcomp", version, about = "Comparison bounds for sub-Riemannian Riccati equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blow-up times of the scalar models over a (κa, κb) grid.
    Blowup(BlowupArgs),
    /// First conjugate time on the quaternionic Hopf fibration against its upper bounds.
    Conjugate(ConjugateArgs),
    /// Sub-Laplacian of the distance along an extremal against the comparison bound.
    Laplacian(LaplacianArgs),
    /// Runs all twelve verification criteria.
    VerifyAll(VerifyArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Pass tolerance for margins and cross-checks.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output file; defaults to `<out-dir>/<command>.<format>` or standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "SRCOMP_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; 0 uses every core. Does not affect the output.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A non-empty list of values.
#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

/// `x`, `a,b,c` or `lo:hi:n`.
fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|e| format!("`{x}`: {e}"))
            .and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("`{x}` is not finite")) })
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, n] => {
            let n: usize = n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?;
            linspace(num(lo)?, num(hi)?, n)
        }
        [_] => s.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("`{s}`: expected x, a,b,c or lo:hi:n")),
    };
    if grid.is_empty() {
        return Err(format!("`{s}` gives an empty grid"));
    }
    Ok(Grid(grid))
}

fn parse_v(s: &str) -> Result<VerticalVector, String> {
    let c: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    match c.as_slice() {
        [a, b, c] if a.is_finite() && b.is_finite() && c.is_finite() => {
            Ok(VerticalVector::new(*a, *b, *c))
        }
        _ => Err(format!("`{s}`: expected three finite numbers vI,vJ,vK")),
    }
}

#[derive(Args)]
struct BlowupArgs {
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    ka: Grid,
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    kb: Grid,
    /// Also report `t̄` of the one-parameter model for these κc.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    kc: Option<Grid>,
    /// Cross-check against the first singular time of the 2×2 Jacobi system.
    #[arg(long)]
    verify: bool,
    /// Jacobi search horizon when the scalar model never blows up.
    #[arg(long, default_value_t = 1e3)]
    tmax: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerticalSelect {
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// `‖v‖`, along the direction of `--v` (or `v_I`).
    #[arg(long, conflicts_with = "sweep")]
    vnorm: Option<f64>,
    /// Vertical vector `vI,vJ,vK`; with `--vnorm` or `--sweep` only its direction is used.
    #[arg(long, value_parser = parse_v, allow_hyphen_values = true)]
    v: Option<VerticalVector>,
    /// Grid of `‖v‖` values, `lo:hi:n`.
    #[arg(long, value_parser = parse_grid)]
    sweep: Option<Grid>,
}

#[derive(Args)]
struct ConjugateArgs {
    #[command(flatten)]
    sel: VerticalSelect,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct LaplacianArgs {
    #[command(flatten)]
    sel: VerticalSelect,
    /// Radii `lo:hi:n`, all below the first conjugate time.
    #[arg(long, value_parser = parse_grid)]
    rgrid: Grid,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    CurvatureSign,
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl From<srcomp::Error> for CliError {
    fn from(e: srcomp::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl Common {
    fn check(&self) -> CliResult<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(usage(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    fn header(&self, cmd: &str, table: &mut Table) {
        table.meta("tool", format!("srcomp {}", env!("CARGO_PKG_VERSION")));
        table.meta("command", cmd);
        table.meta("tol", self.tol);
        table.meta("int_tol", INT_TOL);
        table.meta("seed", self.seed);
    }

    fn map_rows<T, R, F>(&self, items: &[T], f: F) -> CliResult<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> CliResult<R> + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| usage(format!("--jobs: {e}")))?;
        // `collect` keeps input order whatever the completion order.
        pool.install(|| items.par_iter().map(&f).collect())
    }

    fn emit(&self, cmd: &str, table: &Table) -> CliResult<()> {
        let path = match (&self.out, &self.out_dir) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => {
                std::fs::create_dir_all(dir)
                    .map_err(|e| usage(format!("{}: {e}", dir.display())))?;
                Some(dir.join(format!("{cmd}.{}", self.format.ext())))
            }
            (None, None) => None,
        };
        let res = match &path {
            Some(p) => {
                let f = File::create(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                self.write(table, BufWriter::new(f))
            }
            None => self.write(table, io::stdout().lock()),
        };
        res.map_err(|e| CliError::Failure(format!("writing output: {e}")))?;
        if let Some(p) = path {
            eprintln!("{cmd}: {} rows written to {}", table.rows.len(), p.display());
        }
        Ok(())
    }

    fn write<W: Write>(&self, table: &Table, out: W) -> io::Result<()> {
        match self.format {
            Format::Csv => table.write_csv(out),
            Format::Json => table.write_json(out),
        }
    }
}

impl VerticalSelect {
    fn vectors(&self) -> CliResult<Vec<VerticalVector>> {
        if self.d == 0 {
            return Err(usage("--d must be at least 1"));
        }
        let dir = match self.v {
            Some(v) if self.vnorm.is_some() || self.sweep.is_some() => {
                if v.norm() == 0.0 {
                    return Err(usage("--v must be non-zero when it only sets a direction"));
                }
                v.scaled(1.0 / v.norm())
            }
            _ => VerticalVector::along_i(1.0),
        };
        let norms = match (&self.sweep, self.vnorm, self.v) {
            (Some(g), _, _) => g.0.clone(),
            (None, Some(x), _) => vec![x],
            (None, None, Some(v)) => return Ok(vec![v]),
            (None, None, None) => return Err(usage("give one of --v, --vnorm or --sweep")),
        };
        if let Some(x) = norms.iter().find(|x| **x < 0.0) {
            return Err(usage(format!("‖v‖ must be non-negative, got {x}")));
        }
        Ok(norms.iter().map(|&x| dir.scaled(x)).collect())
    }

    fn describe(&self, table: &mut Table) {
        table.meta("d", self.d);
        if let Some(v) = self.v {
            let c = v.components();
            table.meta("v", format!("{},{},{}", c.x, c.y, c.z));
        }
        if let Some(x) = self.vnorm {
            table.meta("vnorm", x);
        }
        if let Some(Grid(g)) = &self.sweep {
            table.meta("sweep", format!("{}:{}:{}", g[0], g[g.len() - 1], g.len()));
        }
    }
}

fn blowup(args: &BlowupArgs) -> CliResult<bool> {
    let c = &args.common;
    c.check()?;
    if !(args.tmax > 0.0 && args.tmax.is_finite()) {
        return Err(usage("--tmax must be positive"));
    }
    let kcs: Vec<Option<f64>> = match &args.kc {
        Some(g) => g.0.iter().map(|&x| Some(x)).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for &ka in &args.ka.0 {
        for &kb in &args.kb.0 {
            for &kc in &kcs {
                points.push((ka, kb, kc));
            }
        }
    }
    let mut cols = vec!["ka", "kb", "predicate", "tbar", "bound", "margin"];
    if args.kc.is_some() {
        cols.extend(["kc", "tbar_c"]);
    }
    if args.verify {
        cols.extend(["tbar_jacobi", "jacobi_diff"]);
    }
    cols.extend(["tol", "int_tol", "pass"]);
    let mut table = Table::new(cols);
    c.header("blowup", &mut table);
    table.meta("ka", format!("{:?}", args.ka.0));
    table.meta("kb", format!("{:?}", args.kb.0));
    if let Some(g) = &args.kc {
        table.meta("kc", format!("{:?}", g.0));
    }
    table.meta("verify", args.verify);
    table.meta("tmax", args.tmax);

    let rows = c.map_rows(&points, |&(ka, kb, kc)| {
        let pred = finiteness_predicate(ka, kb);
        let tbar = blowup_time_kab(ka, kb);
        let bound = upper_bound_kab(ka, kb);
        let margin = tbar.finite().map(|t| bound - t);
        let mut pass = margin.is_none_or(|m| m >= -c.tol) && pred == tbar.is_finite();
        let mut row: Vec<Cell> = vec![
            ka.into(),
            kb.into(),
            pred.into(),
            tbar.value().into(),
            bound.into(),
            margin.into(),
        ];
        if let Some(kc) = kc {
            row.push(kc.into());
            row.push(blowup_time_kc(kc).value().into());
        }
        if args.verify {
            let (j, diff) = match tbar {
                BlowUpTime::Finite(t) => {
                    let j = jacobi_blowup_kab(ka, kb, 1.1 * t, INT_TOL)?;
                    (j, Some((j.value() - t).abs()))
                }
                BlowUpTime::Infinite => (jacobi_blowup_kab(ka, kb, args.tmax, INT_TOL)?, None),
            };
            pass &= match diff {
                Some(d) => d <= c.tol,
                None => !j.is_finite(),
            };
            row.push(j.value().into());
            row.push(diff.into());
        }
        row.extend([c.tol.into(), INT_TOL.into(), pass.into()]);
        Ok((row, pass))
    })?;
    finish("blowup", c, table, rows)
}

fn conjugate(args: &ConjugateArgs) -> CliResult<bool> {
    let c = &args.common;
    c.check()?;
    let vs = args.sel.vectors()?;
    let d = args.sel.d;
    let mut cols = vec!["d", "v_i", "v_j", "v_k", "vnorm", "t_star"];
    if d >= 2 {
        cols.extend(["bound_sphere", "margin_sphere"]);
    }
    cols.extend(["bound_kab", "margin_kab", "tol", "int_tol", "pass"]);
    let mut table = Table::new(cols);
    c.header("conjugate", &mut table);
    args.sel.describe(&mut table);

    let rows = c.map_rows(&vs, |v| {
        let res = conjugate_time(d, v, INT_TOL)?;
        let comp = v.components();
        let mut row: Vec<Cell> = vec![
            d.into(),
            comp.x.into(),
            comp.y.into(),
            comp.z.into(),
            v.norm().into(),
            res.t_star.into(),
        ];
        if d >= 2 {
            row.push(res.bound_sphere.into());
            row.push(res.margin_sphere.into());
        }
        let pass = res.passes(c.tol);
        row.extend([
            res.bound_kab.value().into(),
            res.margin_kab.into(),
            c.tol.into(),
            INT_TOL.into(),
            pass.into(),
        ]);
        Ok((row, pass))
    })?;
    finish("conjugate", c, table, rows)
}

fn laplacian(args: &LaplacianArgs) -> CliResult<bool> {
    let c = &args.common;
    c.check()?;
    let vs = args.sel.vectors()?;
    let [v] = vs.as_slice() else {
        return Err(usage("laplacian takes a single vertical vector (--v or --vnorm)"));
    };
    let d = args.sel.d;
    let t_star = conjugate_time(d, v, INT_TOL)?.t_star;
    let rgrid = &args.rgrid.0;
    if let Some(r) = rgrid.iter().find(|&&r| !(r > 0.0 && r < t_star)) {
        return Err(usage(format!("radius {r} outside (0, t*) = (0, {t_star})")));
    }
    let mut table = Table::new(vec![
        "d", "vnorm", "r", "delta_r", "rhs", "margin", "r_delta_r", "small_r_limit", "tol",
        "int_tol", "pass",
    ]);
    c.header("laplacian", &mut table);
    args.sel.describe(&mut table);
    table.meta(
        "rgrid",
        format!("{}:{}:{}", rgrid[0], rgrid[rgrid.len() - 1], rgrid.len()),
    );
    table.meta("t_star", t_star);

    let rows = c.map_rows(rgrid, |&r| {
        let rep = sublaplacian_along(d, v, &[r], INT_TOL)?;
        let row = rep.rows[0];
        // Both sides grow like 1/r; compare on their own scale.
        let pass = row.margin >= -c.tol * row.rhs.abs().max(1.0);
        Ok((
            vec![
                d.into(),
                v.norm().into(),
                r.into(),
                row.delta_r.into(),
                row.rhs.into(),
                row.margin.into(),
                row.r_delta_r.into(),
                ((4 * d + 8) as f64).into(),
                c.tol.into(),
                INT_TOL.into(),
                pass.into(),
            ],
            pass,
        ))
    })?;
    finish("laplacian", c, table, rows)
}

fn verify_all(args: &VerifyArgs) -> CliResult<bool> {
    let c = &args.common;
    c.check()?;
    let cfg = VerifyConfig {
        seed: c.seed,
        fault: match args.inject_fault {
            Some(FaultArg::CurvatureSign) => Fault::CurvatureSign,
            None => Fault::None,
        },
    };
    let outcomes = run_all(&cfg);
    let mut table = Table::new(vec!["id", "name", "worst", "detail", "pass"]);
    c.header("verify-all", &mut table);
    if cfg.fault != Fault::None {
        table.meta("fault", format!("{:?}", cfg.fault));
    }
    let mut all = true;
    for o in &outcomes {
        eprintln!(
            "{} [{:>2}] {} ({:.2?})",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.elapsed
        );
        all &= o.passed;
        table.push(vec![
            (o.id as usize).into(),
            Cell::Text(o.name.to_string()),
            o.worst.into(),
            Cell::Text(o.detail.clone()),
            o.passed.into(),
        ]);
    }
    c.emit("verify-all", &table)?;
    eprintln!(
        "verify-all: {}/{} criteria pass",
        outcomes.iter().filter(|o| o.passed).count(),
        outcomes.len()
    );
    Ok(all)
}

fn finish(cmd: &str, c: &Common, mut table: Table, rows: Vec<(Vec<Cell>, bool)>) -> CliResult<bool> {
    let failing = rows.iter().filter(|r| !r.1).count();
    for (row, _) in rows {
        table.push(row);
    }
    c.emit(cmd, &table)?;
    if failing > 0 {
        eprintln!("{cmd}: {failing} of {} rows fail", table.rows.len());
    }
    Ok(failing == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Blowup(a) => blowup(a),
        Command::Conjugate(a) => conjugate(a),
        Command::Laplacian(a) => laplacian(a),
        Command::VerifyAll(a) => verify_all(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap().0, vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("-3").unwrap().0, vec![-3.0]);
        assert_eq!(parse_grid("1,2.5").unwrap().0, vec![1.0, 2.5]);
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("inf").is_err());
    }

    #[test]
    fn vertical_vectors() {
        let v = parse_v("1,-2,0.5").unwrap();
        assert_eq!(v, VerticalVector::new(1.0, -2.0, 0.5));
        assert!(parse_v("1,2").is_err());
    }

    #[test]
    fn cli_definition() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
