//! Command-line grammar.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mrd::classical::Order;
use mrd::linops::MatrixJson;
use mrd::povm::MeasClass;
use mrd::states::Family;
use mrd::Error;

use crate::output::{Format, LogBase};

#[derive(Parser, Debug)]
#[command(name = "mrd", version, about = "Measured Rényi divergences of bipartite quantum states")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Logarithm base of displayed values: 2, e or 10.
    #[arg(long, global = true, default_value = "2")]
    pub log_base: LogBase,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for every randomized search.
    #[arg(long, global = true, default_value_t = 0x6d72_6400)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bounds on D_α^M(ρ‖σ).
    Divergence(DivergenceArgs),
    /// PPT primal and dual bounds on the measured max-divergence.
    Maxdiv(MaxdivArgs),
    /// Explicit dual certificate for a named family.
    Certify(CertifyArgs),
    /// Stein or strong-converse exponent.
    Exponent(ExponentArgs),
    /// Grid evaluation over family parameters.
    Sweep(SweepArgs),
    /// Run the built-in validation scorecard.
    Reproduce(ReproduceArgs),
}

/// A state on the command line: a family name or `raw:<file>`.
#[derive(Clone, Debug)]
pub struct StateArg {
    pub spec: String,
    pub family: Family,
}

impl StateArg {
    pub fn is_raw(&self) -> bool {
        matches!(self.family, Family::Raw(_))
    }
}

impl fmt::Display for StateArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

impl FromStr for StateArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let family = match s.strip_prefix("raw:") {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{path}: {e}")))?;
                Family::Raw(MatrixJson::parse(&text)?)
            }
            None => s.parse()?,
        };
        let spec = match &family {
            Family::Raw(_) => s.to_string(),
            f => f.to_string(),
        };
        Ok(Self { spec, family })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Lower,
    Upper,
    Sandwich,
    Closedform,
}

#[derive(Args, Debug, Clone)]
pub struct Budget {
    /// Restarts of the measurement search.
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Function evaluations per restart.
    #[arg(long, default_value_t = 2000)]
    pub max_evals: usize,
    /// Iterations of the variational solver.
    #[arg(long, default_value_t = 3000)]
    pub max_iter: usize,
    /// JSON file {delta, max_iter, tol, restarts, seed} replacing the flags above.
    #[arg(long, conflicts_with_all = ["restarts", "max_evals", "max_iter"])]
    pub solver_config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DivergenceArgs {
    #[arg(long)]
    pub rho: StateArg,
    #[arg(long)]
    pub sigma: StateArg,
    /// Local dimension of each party.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Number of copies.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Orders, comma separated; `inf` allowed.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub alpha: Vec<Order>,
    #[arg(long, default_value = "ppt")]
    pub class: MeasClass,
    #[arg(long, value_enum, default_value_t = Mode::Sandwich)]
    pub mode: Mode,
    #[command(flatten)]
    pub budget: Budget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CertKind {
    PhiPerp,
    Iso,
    AntiSym,
    Werner,
}

#[derive(Args, Debug, Clone)]
pub struct MaxdivArgs {
    #[arg(long)]
    pub rho: StateArg,
    #[arg(long)]
    pub sigma: StateArg,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Eigenvalue floor of the primal cone.
    #[arg(long, default_value_t = 1e-8)]
    pub delta: f64,
    /// Relative bisection width of the dual.
    #[arg(long, default_value_t = 1e-6)]
    pub width: f64,
    /// Also build and check the explicit certificate of this family.
    #[arg(long, value_enum)]
    pub certify: Option<CertKind>,
}

#[derive(Args, Debug, Clone)]
pub struct CertifyArgs {
    #[arg(long, value_enum)]
    pub family: CertKind,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExponentKind {
    Stein,
    Sc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetKind {
    /// Φ vs i(q).
    PhiIso,
    /// Φ vs Φ⊥.
    PhiPerp,
    /// Θ⊥ vs w(q).
    AntiWerner,
}

#[derive(Args, Debug, Clone)]
pub struct ExponentArgs {
    #[arg(long, value_enum)]
    pub kind: ExponentKind,
    #[arg(long, value_enum, conflicts_with = "curve", required_unless_present = "curve")]
    pub preset: Option<PresetKind>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub q: Option<f64>,
    /// Rate in nats for the strong-converse exponent.
    #[arg(long)]
    pub r: Option<f64>,
    /// File of `alpha,value_nats` samples of a divergence curve.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Treat the curve as additive, so the result is the exponent itself.
    #[arg(long, requires = "curve")]
    pub attested: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepFamily {
    Iso,
    Werner,
}

/// Either `a,b,c` or `start:stop:step`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Parse(format!("bad grid '{s}'"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [a, b, h] => {
                let (a, b, h) = (num(a)?, num(b)?, num(h)?);
                if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                    return Err(bad());
                }
                let k = ((b - a) / h + 1e-9).floor() as usize;
                if k > 100_000 {
                    return Err(Error::Parse(format!("grid '{s}' has too many points")));
                }
                Ok(Grid((0..=k).map(|i| ((a + i as f64 * h) * 1e12).round() / 1e12).collect()))
            }
            [_] => Ok(Grid(s.split(',').map(num).collect::<Result<_, _>>()?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub family: SweepFamily,
    /// Local dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub d: Vec<usize>,
    /// Parameter grid of ρ.
    #[arg(long)]
    pub p: Grid,
    /// Parameter grid of σ.
    #[arg(long)]
    pub q: Grid,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub alpha: Vec<Order>,
    #[arg(long, default_value = "ppt")]
    pub class: MeasClass,
    #[arg(long, value_enum, default_value_t = Mode::Closedform)]
    pub mode: Mode,
    #[command(flatten)]
    pub budget: Budget,
}

#[derive(Args, Debug, Clone)]
pub struct ReproduceArgs {
    /// Criteria to run; all when empty.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<usize>,
    /// Print every check, not just the summaries.
    #[arg(long)]
    pub verbose: bool,
}
