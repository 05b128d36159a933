//! `nullcover`: build and re-verify small sumset complements.
//!
//! Exit status is 0 when every certificate passes, 1 when a certificate or
//! threshold fails, 2 on a usage or input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use nullcover::construction::{full_measure_run, rrp_run, verify_trace, ConstructionTrace, FullMeasureConfig, RrpConfig};
use nullcover::covering::{random_cover_complement, verify_grid_cover, CoverOptions, SetFamily};
use nullcover::fractal::{
    generate_cantor, log_dimension_estimate, uniform_large_subset, CantorRule, DimensionVariant, GaugeFunction,
    LogDimensionReport, UniformLargeCertificate,
};
use nullcover::large_sumset::{build_bias_complement, select_parameters, PropositionParams, DEFAULT_Q_CAP};
use nullcover::sumset::{linear_bias, LinearBias};
use nullcover::{Error, GroupSubset, PointSet, Rational, ThresholdPolicy, SCHEMA};

#[derive(Parser)]
#[command(name = "nullcover", version, about = "Small complements of sumsets, built and verified exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gauss-sum complement in a binary field, with its exact bias.
    BiasSet(BiasSetArgs),
    /// Random complement covering every member of a grid family.
    Cover(CoverArgs),
    /// Logarithmic dimension estimates and largeness certificates.
    Dimension(DimensionArgs),
    /// Multiscale construction against a family of maps.
    Rrp(RrpArgs),
    /// Full-measure construction on a uniformly large test set.
    FullMeasure(FullMeasureArgs),
    /// Re-validate a stored artifact.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Write here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct BiasSetArgs {
    /// Comma-separated list; every combination with `--m0` is built.
    #[arg(long, value_delimiter = ',', required = true)]
    eta: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    m0: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = DEFAULT_Q_CAP)]
    cap: u64,
    /// Also build and measure the digit image in `Z_m^d`.
    #[arg(long)]
    digit_image: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long = "N", alias = "n")]
    n: u64,
    #[arg(long)]
    eps: String,
    /// JSON array of members, each an array of points.
    #[arg(long)]
    family: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Record a failed size threshold instead of stopping.
    #[arg(long)]
    report_only: bool,
    #[arg(long, default_value_t = 1000)]
    max_draws: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DimensionArgs {
    /// JSON file holding a generator rule; overrides `--base/--digits`.
    #[arg(long)]
    rule: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    base: u64,
    /// Digits kept on every axis.
    #[arg(long, value_delimiter = ',')]
    digits: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    depth: u32,
    /// `power:ALPHA` or `log:S`; requests a largeness certificate.
    #[arg(long)]
    gauge: Option<String>,
    #[arg(long, default_value = "1/10")]
    eta: String,
    /// Scale exponents for the certificate.
    #[arg(long, value_delimiter = ',')]
    schedule: Vec<u32>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RrpArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the seed stored in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report_only: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FullMeasureArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    report_only: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    artifact: PathBuf,
}

enum Failure {
    Usage(String),
    Certificate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Threshold { what, measured, required } => {
                Failure::Certificate(format!("threshold violated: {what}: measured {measured}, required > {required:.2} ({required})"))
            }
            Error::RetryBudgetExhausted { .. } | Error::Invariant { .. } | Error::BudgetExceeded { .. } => {
                Failure::Certificate(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// `p/q`, an integer, or a finite decimal, kept exact.
fn parse_rational(s: &str) -> std::result::Result<Rational, Failure> {
    let s = s.trim();
    if let Some((whole, frac)) = s.split_once('.') {
        let digits = format!("{whole}{frac}");
        let num: u64 = digits.parse().map_err(|_| usage(format!("cannot parse {s:?} as a rational")))?;
        let den = 10u64
            .checked_pow(frac.len() as u32)
            .ok_or_else(|| usage(format!("{s:?} has too many decimals")))?;
        return Ok(Rational::new(num, den));
    }
    let r: Rational = s.parse().map_err(|_| usage(format!("cannot parse {s:?} as a rational")))?;
    if *r.denom() == 0 {
        return Err(usage("zero denominator"));
    }
    Ok(r)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes through a sibling temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn emit(output: &OutputArgs, bytes: Vec<u8>) -> std::result::Result<(), Failure> {
    match &output.out {
        Some(p) => write_atomic(p, &bytes).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(&bytes).map_err(|e| usage(e.to_string())),
    }
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| usage(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn to_csv(header: &[&str], rows: Vec<Vec<String>>) -> std::result::Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| usage(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| usage(e.to_string()))?;
    }
    w.into_inner().map_err(|e| usage(e.to_string()))
}

fn json_only(output: &OutputArgs, what: &str) -> std::result::Result<(), Failure> {
    if output.format == Format::Csv {
        return Err(usage(format!("{what} has no CSV form")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BiasSetRecord {
    params: PropositionParams,
    set: GroupSubset,
    size: usize,
    bias: LinearBias,
    /// `q^{-1/2}`
    bias_bound: f64,
    size_ok: bool,
    bias_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    digit_image_bias: Option<LinearBias>,
    pass: bool,
}

#[derive(Serialize, Deserialize)]
struct BiasSetArtifact {
    schema: String,
    artifact: String,
    cap: u64,
    results: Vec<BiasSetRecord>,
    pass: bool,
}

fn bias_set(args: &BiasSetArgs) -> Outcome {
    let etas = args.eta.iter().map(|s| parse_rational(s)).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut results = Vec::new();
    for &eta in &etas {
        for &m0 in &args.m0 {
            let params = select_parameters(eta, m0, args.d, args.cap)?;
            let b = build_bias_complement(&params, args.digit_image, args.cap)?;
            results.push(BiasSetRecord {
                bias_bound: (params.q as f64).sqrt().recip(),
                size: b.set.len(),
                pass: b.size_ok && b.bias_ok,
                params,
                set: b.set,
                bias: b.bias,
                size_ok: b.size_ok,
                bias_ok: b.bias_ok,
                digit_image_bias: b.digit_image.map(|i| i.bias),
            });
        }
    }
    let pass = results.iter().all(|r| r.pass);
    let bytes = match args.output.format {
        Format::Json => to_json(&BiasSetArtifact {
            schema: SCHEMA.into(),
            artifact: "bias-set".into(),
            cap: args.cap,
            results,
            pass,
        })?,
        Format::Csv => to_csv(
            &["eta", "m0", "d", "k", "s", "m", "q", "size", "bias", "bias_bound", "size_ok", "bias_ok", "pass"],
            results
                .iter()
                .map(|r| {
                    let p = &r.params;
                    vec![
                        p.eta.to_string(),
                        p.m0.to_string(),
                        p.d.to_string(),
                        p.k.to_string(),
                        p.s.to_string(),
                        p.m.to_string(),
                        p.q.to_string(),
                        r.size.to_string(),
                        r.bias.value.to_string(),
                        r.bias_bound.to_string(),
                        r.size_ok.to_string(),
                        r.bias_ok.to_string(),
                        r.pass.to_string(),
                    ]
                })
                .collect(),
        )?,
    };
    emit(&args.output, bytes)?;
    Ok(pass)
}

fn verify_bias_set(a: &BiasSetArtifact) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, r) in a.results.iter().enumerate() {
        let rebuilt = select_parameters(r.params.eta, r.params.m0, r.params.d, a.cap)
            .and_then(|p| build_bias_complement(&p, r.digit_image_bias.is_some(), a.cap).map(|b| (p, b)));
        match rebuilt {
            Ok((p, b)) => {
                if p != r.params {
                    problems.push(format!("result {i}: parameters differ"));
                }
                if b.set != r.set {
                    problems.push(format!("result {i}: stored set is not the k-th power set"));
                }
            }
            Err(e) => problems.push(format!("result {i}: {e}")),
        }
        match linear_bias(&r.set) {
            Ok(bias) => {
                if bias != r.bias {
                    problems.push(format!("result {i}: bias {} recomputes to {}", r.bias.value, bias.value));
                }
                if bias.below_inverse_sqrt(r.params.q) != r.bias_ok {
                    problems.push(format!("result {i}: bias_ok flag is wrong"));
                }
            }
            Err(e) => problems.push(format!("result {i}: {e}")),
        }
        if r.size != r.set.len() {
            problems.push(format!("result {i}: size {} but the set has {}", r.size, r.set.len()));
        }
        if !r.pass {
            problems.push(format!("result {i} is marked failing"));
        }
    }
    if !a.pass {
        problems.push("artifact is marked failing".into());
    }
    problems
}

#[derive(Serialize, Deserialize)]
struct CoverArtifact {
    schema: String,
    artifact: String,
    family: SetFamily,
    set: GroupSubset,
    certificate: nullcover::covering::RandomCoverCertificate,
    pass: bool,
}

fn cover(args: &CoverArgs) -> Outcome {
    json_only(&args.output, "cover")?;
    let eps = parse_rational(&args.eps)?;
    let raw: Vec<Vec<Vec<i64>>> = read_json(&args.family)?;
    let d = raw
        .iter()
        .flat_map(|m| m.first())
        .map(|p| p.len())
        .next()
        .ok_or_else(|| usage("family has no points"))?;
    let members = raw
        .into_iter()
        .map(|m| PointSet::new(d, 0, m))
        .collect::<nullcover::Result<Vec<_>>>()?;
    let family = SetFamily::grid(args.n, d, members)?;
    let mut opts = CoverOptions::new(args.seed);
    opts.max_draws = args.max_draws;
    if args.report_only {
        opts = opts.report_only();
    }
    let c = random_cover_complement(&family, eps, opts)?;
    let pass = c.certificate.verified;
    emit(
        &args.output,
        to_json(&CoverArtifact {
            schema: SCHEMA.into(),
            artifact: "cover".into(),
            family,
            set: c.set,
            certificate: c.certificate,
            pass,
        })?,
    )?;
    Ok(pass)
}

fn verify_cover(a: &CoverArtifact) -> Vec<String> {
    let mut problems = Vec::new();
    match verify_grid_cover(&a.family, &a.set) {
        Ok(true) => {}
        Ok(false) => problems.push("some member A has A + B != Z_N^d".into()),
        Err(e) => problems.push(e.to_string()),
    }
    if a.set.len() != a.certificate.size {
        problems.push(format!("|B| = {} but the certificate says {}", a.set.len(), a.certificate.size));
    }
    let eps = a.certificate.eps;
    let order = a.set.group().order() as u128;
    if a.set.len() as u128 * *eps.denom() as u128 > order * *eps.numer() as u128 {
        problems.push(format!("|B| = {} exceeds eps N^d", a.set.len()));
    }
    if !a.pass {
        problems.push("artifact is marked failing".into());
    }
    problems
}

#[derive(Serialize, Deserialize)]
struct DimensionArtifact {
    schema: String,
    artifact: String,
    d: usize,
    rule: CantorRule,
    depth: u32,
    cells: usize,
    estimates: Vec<LogDimensionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certificate: Option<UniformLargeCertificate>,
    pass: bool,
}

fn parse_gauge(s: &str) -> std::result::Result<GaugeFunction, Failure> {
    let (kind, v) = s.split_once(':').ok_or_else(|| usage("gauge must be power:ALPHA or log:S"))?;
    let v: f64 = v.parse().map_err(|_| usage(format!("bad gauge parameter {v:?}")))?;
    let g = match kind {
        "power" => GaugeFunction::Power { alpha: v },
        "log" => GaugeFunction::LogPower { s: v },
        _ => return Err(usage(format!("unknown gauge {kind:?}"))),
    };
    g.validate()?;
    Ok(g)
}

fn build_dimension(d: usize, rule: CantorRule, depth: u32, cert: Option<(GaugeFunction, f64, Vec<u32>)>) -> nullcover::Result<DimensionArtifact> {
    let set = generate_cantor(d, &rule, depth)?;
    let estimates = vec![
        log_dimension_estimate(&set, DimensionVariant::Hausdorff)?,
        log_dimension_estimate(&set, DimensionVariant::Packing)?,
    ];
    let certificate = match cert {
        Some((g, eta, schedule)) => Some(uniform_large_subset(&set.to_dyadic()?, &g, eta, &schedule)?.2),
        None => None,
    };
    Ok(DimensionArtifact {
        schema: SCHEMA.into(),
        artifact: "dimension".into(),
        d,
        cells: set.cells.len(),
        pass: certificate.as_ref().is_none_or(|c| c.pass),
        rule,
        depth,
        estimates,
        certificate,
    })
}

fn dimension(args: &DimensionArgs) -> Outcome {
    let rule = match &args.rule {
        Some(p) => read_json(p)?,
        None => {
            if args.digits.is_empty() {
                return Err(usage("give --rule or --digits"));
            }
            CantorRule::Digits {
                base: args.base,
                digits: vec![args.digits.clone()],
            }
        }
    };
    let cert = match &args.gauge {
        Some(g) => {
            let eta = parse_rational(&args.eta)?;
            if args.schedule.is_empty() {
                return Err(usage("a certificate needs --schedule"));
            }
            Some((parse_gauge(g)?, *eta.numer() as f64 / *eta.denom() as f64, args.schedule.clone()))
        }
        None => None,
    };
    let a = build_dimension(args.d, rule, args.depth, cert)?;
    let pass = a.pass;
    let bytes = match args.output.format {
        Format::Json => to_json(&a)?,
        Format::Csv => to_csv(
            &["variant", "log_inverse_delta", "count"],
            a.estimates
                .iter()
                .flat_map(|r| {
                    let v = match r.variant {
                        DimensionVariant::Hausdorff => "hausdorff",
                        DimensionVariant::Packing => "packing",
                    };
                    r.scales.iter().map(move |(x, n)| vec![v.to_string(), x.to_string(), n.to_string()])
                })
                .collect(),
        )?,
    };
    emit(&args.output, bytes)?;
    Ok(pass)
}

fn verify_dimension(a: &DimensionArtifact) -> Vec<String> {
    let cert = a
        .certificate
        .as_ref()
        .map(|c| (c.gauge.clone(), c.eta, c.levels.iter().map(|l| l.scale).collect::<Vec<_>>()));
    let mut problems = Vec::new();
    match build_dimension(a.d, a.rule.clone(), a.depth, cert) {
        Ok(b) => {
            if b.cells != a.cells {
                problems.push(format!("cell count {} recomputes to {}", a.cells, b.cells));
            }
            if b.estimates != a.estimates {
                problems.push("estimates differ from the recomputed ones".into());
            }
            if b.certificate != a.certificate {
                problems.push("largeness certificate differs from the recomputed one".into());
            }
        }
        Err(e) => problems.push(e.to_string()),
    }
    if !a.pass {
        problems.push("artifact is marked failing".into());
    }
    problems
}

fn policy(report_only: bool) -> ThresholdPolicy {
    if report_only {
        ThresholdPolicy::ReportOnly
    } else {
        ThresholdPolicy::Enforce
    }
}

fn rrp(args: &RrpArgs) -> Outcome {
    json_only(&args.output, "rrp")?;
    let mut config: RrpConfig = read_json(&args.config)?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.report_only {
        config.policy = policy(true);
    }
    let trace = ConstructionTrace::Rrp(rrp_run(&config)?);
    emit(&args.output, to_json(&trace)?)?;
    Ok(trace.pass())
}

fn full_measure(args: &FullMeasureArgs) -> Outcome {
    json_only(&args.output, "full-measure")?;
    let mut config: FullMeasureConfig = read_json(&args.config)?;
    if args.report_only {
        config.policy = policy(true);
    }
    let trace = ConstructionTrace::FullMeasure(full_measure_run(&config)?);
    emit(&args.output, to_json(&trace)?)?;
    Ok(trace.pass())
}

fn parse_as<T: for<'de> Deserialize<'de>>(v: Value) -> std::result::Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| usage(format!("artifact does not parse: {e}")))
}

fn verify(args: &VerifyArgs) -> Outcome {
    let text = fs::read_to_string(&args.artifact).map_err(|e| usage(format!("{}: {e}", args.artifact.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.artifact.display())))?;
    let schema_ok = value.get("schema").and_then(Value::as_str) == Some(SCHEMA);
    let mut problems = if value.get("construction").is_some() {
        // parsed from text: traces carry integers wider than a JSON value holds
        let trace: ConstructionTrace = serde_json::from_str(&text).map_err(|e| usage(format!("trace does not parse: {e}")))?;
        verify_trace(&trace)?
    } else {
        match value.get("artifact").and_then(Value::as_str) {
            Some("bias-set") => verify_bias_set(&parse_as(value)?),
            Some("cover") => verify_cover(&parse_as(value)?),
            Some("dimension") => verify_dimension(&parse_as(value)?),
            other => return Err(usage(format!("unknown artifact kind {other:?}"))),
        }
    };
    if !schema_ok && !problems.iter().any(|p| p.starts_with("schema")) {
        problems.push(format!("schema is not {SCHEMA}"));
    }
    for p in &problems {
        eprintln!("{p}");
    }
    if problems.is_empty() {
        println!("ok");
    }
    Ok(problems.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::BiasSet(a) => bias_set(a),
        Command::Cover(a) => cover(a),
        Command::Dimension(a) => dimension(a),
        Command::Rrp(a) => rrp(a),
        Command::FullMeasure(a) => full_measure(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certificate failed");
            ExitCode::from(1)
        }
        Err(Failure::Certificate(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
