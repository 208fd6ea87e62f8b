use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dirichlet_ball::ballquad::{seminorm, QuadratureGrid, SeminormEstimate};
use dirichlet_ball::boundary::{
    branch_gamma, classify_zero_set_with, lojasiewicz_fit_with, ClassifyOptions, ZeroSetClass, ZeroSetReport,
    LOJASIEWICZ_SAMPLES,
};
use dirichlet_ball::capacity::{capacity_scan, SupportSet};
use dirichlet_ball::dilation::{default_r_grid, dilation_sweep_with, DEFAULT_TOL};
use dirichlet_ball::opa::opa_curve;
use dirichlet_ball::parse::parse_poly;
use dirichlet_ball::report::{to_csv, to_json};
use dirichlet_ball::verdict::{classify_with, Advisory};
use dirichlet_ball::{AlphaWeight, Error, Poly2, SpherePoint, C64};

const THREADS_VAR: &str = "DIRICHLET_BALL_THREADS";

#[derive(Parser)]
#[command(name = "dirichlet-ball", version, about = "Cyclicity of polynomials in Dirichlet-type spaces on the ball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Polynomial text such as "1-2*z*w", or @path to a JSON coefficient list.
    #[arg(long)]
    poly: Option<String>,
    /// Space parameter.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Squared D_α norm from coefficients.
    Norm {
        #[command(flatten)]
        common: Common,
        /// Also estimate the integral seminorm by quadrature (α in (-1, 1)).
        #[arg(long)]
        quadrature: bool,
    },
    /// Distances of optimal polynomial approximants of 1/p.
    Opa {
        #[command(flatten)]
        common: Common,
        /// Largest approximant degree.
        #[arg(long, default_value_t = 20)]
        degree: u32,
    },
    /// Norms of p/p_r for r = 1 - 2^-k.
    Dilate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        k_max: u32,
    },
    /// Zero set of p on the sphere.
    Zeros {
        #[command(flatten)]
        common: Common,
        /// Newton starts on the sphere.
        #[arg(long, default_value_t = 1024)]
        samples: usize,
    },
    /// Second-order coefficient of the zero branch through a boundary zero.
    Gamma {
        #[command(flatten)]
        common: Common,
        /// Boundary zero as "re_zeta,im_zeta,re_eta,im_eta"; the first
        /// detected zero when omitted.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
    },
    /// Exponent q in |p| >= C dist^q near the boundary zeros.
    Lojasiewicz {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = LOJASIEWICZ_SAMPLES)]
        samples: usize,
    },
    /// Minimal discrete Riesz energies on the model curve or on Z(p).
    Capacity {
        #[command(flatten)]
        common: Common,
        /// Point counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024")]
        n: Vec<usize>,
    },
    /// Cyclicity verdict.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Attach OPA, dilation and capacity evidence.
        #[arg(long)]
        advisory: bool,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Norm { common, .. }
            | Command::Opa { common, .. }
            | Command::Dilate { common, .. }
            | Command::Zeros { common, .. }
            | Command::Gamma { common, .. }
            | Command::Lojasiewicz { common, .. }
            | Command::Capacity { common, .. }
            | Command::Classify { common, .. } => common,
        }
    }
}

impl Common {
    fn poly(&self) -> anyhow::Result<Poly2> {
        let text = self.poly.as_deref().ok_or_else(|| anyhow!("--poly is required"))?;
        match text.strip_prefix('@') {
            Some(path) => {
                let json = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                Ok(Poly2::from_json(&json)?)
            }
            None => Ok(parse_poly(text)?),
        }
    }

    fn alpha(&self) -> anyhow::Result<f64> {
        self.alpha.ok_or_else(|| anyhow!("--alpha is required"))
    }

    fn zero_set(&self, p: &Poly2, samples: usize) -> anyhow::Result<ZeroSetReport> {
        let opts = ClassifyOptions {
            seed: self.seed,
            n_samples: samples,
            ..ClassifyOptions::default()
        };
        Ok(classify_zero_set_with(p, &opts)?)
    }
}

/// Serialized output in either format.
struct Output {
    json: String,
    csv: String,
}

impl Output {
    fn new<T: Serialize, R: Serialize>(kind: &str, result: &T, rows: &[R]) -> anyhow::Result<Self> {
        Ok(Self {
            json: to_json(kind, result)?,
            csv: to_csv(rows)?,
        })
    }
}

#[derive(Serialize)]
struct NormResult {
    p: Poly2,
    alpha: f64,
    norm_sq: f64,
    seminorm: Option<SeminormEstimate>,
}

#[derive(Serialize)]
struct NormRow {
    alpha: f64,
    norm_sq: f64,
}

#[derive(Serialize)]
struct ClassRow<'a> {
    class: &'a str,
    points: usize,
    closed: bool,
}

#[derive(Serialize)]
struct GammaRow {
    re_gamma: f64,
    im_gamma: f64,
    first_order: f64,
    residual: f64,
}

#[derive(Serialize)]
struct LojasiewiczRow {
    exponent: f64,
    constant: f64,
    residual: f64,
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    alpha: f64,
    cyclic: String,
    rule: &'a str,
    class: &'a str,
}

fn parse_point(text: &str) -> anyhow::Result<SpherePoint> {
    let xs = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .context("--point expects four comma-separated reals")?;
    if xs.len() != 4 {
        bail!("--point expects four comma-separated reals, got {}", xs.len());
    }
    Ok(SpherePoint::new(C64::new(xs[0], xs[1]), C64::new(xs[2], xs[3]))?)
}

fn run(cmd: &Command) -> anyhow::Result<Output> {
    let c = cmd.common();
    match cmd {
        Command::Norm { quadrature, .. } => {
            let p = c.poly()?;
            let alpha = c.alpha.unwrap_or(0.0);
            let aw = AlphaWeight::with_degree(alpha, p.degree().max(1));
            let norm_sq = aw.norm_sq(&p);
            let seminorm = if *quadrature {
                Some(seminorm(&p, alpha, &QuadratureGrid::for_degree(p.degree()))?)
            } else {
                None
            };
            let res = NormResult {
                p,
                alpha,
                norm_sq,
                seminorm,
            };
            Output::new("norm", &res, &[NormRow { alpha, norm_sq }])
        }
        Command::Opa { degree, .. } => {
            let p = c.poly()?;
            let curve = opa_curve(&p, &AlphaWeight::new(c.alpha()?), *degree)?;
            Output::new("opa", &curve, &curve.rows())
        }
        Command::Dilate { k_max, .. } => {
            let p = c.poly()?;
            let tol = c.tol.unwrap_or(DEFAULT_TOL);
            let curve = dilation_sweep_with(&p, &AlphaWeight::new(c.alpha()?), &default_r_grid(*k_max), tol)?;
            Output::new("dilate", &curve, &curve.rows())
        }
        Command::Zeros { samples, .. } => {
            let p = c.poly()?;
            let report = c.zero_set(&p, *samples)?;
            if report.points.is_empty() {
                let row = ClassRow {
                    class: report.class.as_str(),
                    points: 0,
                    closed: report.closed,
                };
                Output::new("zeros", &report, &[row])
            } else {
                Output::new("zeros", &report, &report.sample_rows())
            }
        }
        Command::Gamma { point, .. } => {
            let p = c.poly()?;
            let at = match point {
                Some(text) => parse_point(text)?,
                None => {
                    let report = c.zero_set(&p, ClassifyOptions::default().n_samples)?;
                    match report.class {
                        ZeroSetClass::Finite | ZeroSetClass::Curve => report.points[0],
                        other => bail!("no boundary zero to expand around (zero set is {})", other.as_str()),
                    }
                }
            };
            let fit = branch_gamma(&p, &at)?;
            let row = GammaRow {
                re_gamma: fit.gamma.re,
                im_gamma: fit.gamma.im,
                first_order: fit.first_order.norm(),
                residual: fit.residual,
            };
            Output::new("gamma", &fit, &[row])
        }
        Command::Lojasiewicz { samples, .. } => {
            let p = c.poly()?;
            let report = c.zero_set(&p, ClassifyOptions::default().n_samples)?;
            let fit = lojasiewicz_fit_with(&p, &report, *samples, c.seed)?;
            let row = LojasiewiczRow {
                exponent: fit.exponent,
                constant: fit.constant,
                residual: fit.residual,
            };
            Output::new("lojasiewicz", &fit, &[row])
        }
        Command::Capacity { n, .. } => {
            let alpha = c.alpha()?;
            let set = match &c.poly {
                None => SupportSet::ModelCurve,
                Some(_) => {
                    let p = c.poly()?;
                    let report = c.zero_set(&p, ClassifyOptions::default().n_samples)?;
                    match report.class {
                        ZeroSetClass::Curve => SupportSet::Curve(report.points),
                        ZeroSetClass::Finite => SupportSet::Points(report.points),
                        other => bail!("capacity needs boundary zeros (zero set is {})", other.as_str()),
                    }
                }
            };
            let report = capacity_scan(&set, alpha, n)?;
            Output::new("capacity", &report, &report.rows())
        }
        Command::Classify { advisory, .. } => {
            let p = c.poly()?;
            let alpha = c.alpha()?;
            let opts = ClassifyOptions {
                seed: c.seed,
                ..ClassifyOptions::default()
            };
            let adv = if *advisory {
                Advisory {
                    opa_degree: Some(20),
                    dilation_k_max: Some(8),
                    capacity_grid: Some(vec![128, 256, 512]),
                }
            } else {
                Advisory::default()
            };
            let v = classify_with(&p, alpha, &opts, &adv)?;
            let class = v.evidence.zero_set.as_ref().map_or("not_computed", |z| z.class.as_str());
            let row = VerdictRow {
                alpha,
                cyclic: serde_json::to_value(v.cyclic)?.as_str().unwrap_or_default().to_string(),
                rule: v.rule.as_str(),
                class,
            };
            Output::new("verdict", &v, &[row])
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_VAR}={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| {
        let out = run(&cli.command)?;
        let common = cli.command.common();
        let text = match common.format {
            Format::Json => out.json,
            Format::Csv => out.csv,
        };
        match &common.out {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Inconclusive(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
