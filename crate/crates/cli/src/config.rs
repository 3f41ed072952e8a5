//! Command-line configuration and its validation into [`ModelParams`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tl_bethe_core::{c64, Branch, ModelParams, C64};

#[derive(Debug, Clone, Parser)]
#[command(name = "tl-bethe", version, about = "Verification engine and Bethe solver for the open Temperley-Lieb spin-1 chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run the full identity suite.
    Check(RunConfig),
    /// Solve the Bethe equations by multi-start Newton.
    Solve(RunConfig),
    /// Spectra of the Hamiltonian and the transfer matrix.
    Diagonalize(RunConfig),
    /// Compare the determinant formula with direct scalar products.
    Slavnov(RunConfig),
    /// Model summary and empirical answers to the open questions.
    Report(RunConfig),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Solve(_) => "solve",
            Command::Diagonalize(_) => "diagonalize",
            Command::Slavnov(_) => "slavnov",
            Command::Report(_) => "report",
        }
    }

    pub fn config(&self) -> &RunConfig {
        match self {
            Command::Check(c)
            | Command::Solve(c)
            | Command::Diagonalize(c)
            | Command::Slavnov(c)
            | Command::Report(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Plus => Branch::Plus,
            BranchArg::Minus => Branch::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

/// Everything that determines a run. Identical configs give identical
/// output bytes.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Number of sites.
    #[arg(long = "N", default_value_t = 3)]
    pub n: usize,

    /// Deformation parameter, "re" or "re,im".
    #[arg(long = "Q", default_value = "1.1", value_parser = parse_complex, allow_hyphen_values = true)]
    pub q: C64,

    #[arg(long, value_enum, default_value_t = BranchArg::Plus)]
    pub branch: BranchArg,

    /// Number of Bethe roots.
    #[arg(long = "M", default_value_t = 1)]
    pub m: usize,

    /// Newton starting points.
    #[arg(long, default_value_t = tl_bethe_core::bethe::DEFAULT_SEEDS)]
    pub seeds: usize,

    /// Random draws per check (and off-shell v̄ per ū for `slavnov`).
    #[arg(long, default_value_t = 20)]
    pub samples: usize,

    #[arg(long = "rng-seed", default_value_t = 0)]
    pub rng_seed: u64,

    #[arg(long = "tol-identity", default_value_t = ModelParams::DEFAULT_TOL_IDENTITY)]
    pub tol_identity: f64,

    #[arg(long = "tol-derivative", default_value_t = ModelParams::DEFAULT_TOL_DERIVATIVE)]
    pub tol_derivative: f64,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// On-shell rapidities for `slavnov`, as "re,im;re,im;…".
    #[arg(long, value_parser = parse_rapidities, allow_hyphen_values = true)]
    pub ubar: Option<Rapidities>,

    /// Spectral parameter for `diagonalize`, "re" or "re,im".
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub u: Option<C64>,

    /// Skip exact diagonalization in `solve`.
    #[arg(long = "skip-ed")]
    pub skip_ed: bool,
}

/// A parsed rapidity list.
#[derive(Debug, Clone, PartialEq)]
pub struct Rapidities(pub Vec<C64>);

pub fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("cannot parse {t:?} as a real number: {e}"));
    let z = match parts.as_slice() {
        [re] => c64(num(re)?, 0.0),
        [re, im] => c64(num(re)?, num(im)?),
        _ => return Err(format!("expected \"re\" or \"re,im\", got {s:?}")),
    };
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(z)
}

pub fn parse_rapidities(s: &str) -> Result<Rapidities, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_complex).collect::<Result<_, _>>().map(Rapidities)
}

impl RunConfig {
    /// Validated model parameters; the error names the violated invariant.
    pub fn params(&self) -> Result<ModelParams, String> {
        if !(self.tol_identity > 0.0 && self.tol_derivative > 0.0) {
            return Err("tolerances must be positive".into());
        }
        ModelParams::new(self.n, self.q, self.branch.into())
            .and_then(|p| p.with_tolerances(self.tol_identity, self.tol_derivative))
            .map(|p| p.with_seed(self.rng_seed))
            .map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("1.1").unwrap(), c64(1.1, 0.0));
        assert_eq!(parse_complex("-0.5, 2").unwrap(), c64(-0.5, 2.0));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
        assert!(parse_complex("inf").is_err());
        let r = parse_rapidities("0.1,0.2;-0.3,0.4").unwrap();
        assert_eq!(r.0, vec![c64(0.1, 0.2), c64(-0.3, 0.4)]);
    }

    #[test]
    fn zero_q_names_the_invariant() {
        let cli = Cli::try_parse_from(["tl-bethe", "check", "--Q", "0"]).unwrap();
        let err = cli.command.config().params().unwrap_err();
        assert!(err.contains("Q"), "{err}");
    }
}
