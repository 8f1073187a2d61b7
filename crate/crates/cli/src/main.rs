use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use mdcms_core::io::{fmt_sig, load_model, rates_json, round_json, ModelFile};
use mdcms_core::lattice::{self, DescriptionSet};
use mdcms_core::regions::{AuxModel, DistortionSpec, RateAllocation, Scheme};
use mdcms_core::search::{
    cross_section_ec, cross_section_zb, separation_l3, separation_l4, separation_zb, AuxAlphabets,
    SearchConfig, SeparationReport,
};
use mdcms_core::shannon::{rd_binary, rd_blahut_arimoto};
use mdcms_core::sim::run_trials;
use mdcms_core::Error;

const DIGITS: usize = 12;

#[derive(Parser, Debug)]
#[command(
    name = "mdcms",
    version,
    about = "Multiple-description rate region tools"
)]
struct Cli {
    /// Worker threads for search restarts and simulation trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Minimum weighted rates of a model over its scheme's region.
    Eval(EvalArgs),
    /// Optimal per-letter decoders and their distortions.
    Decoders(ModelArgs),
    /// Rate-distortion function of a source.
    Rd(RdArgs),
    /// Two-description cross-section value at one distortion.
    CrossSection(CrossArgs),
    /// Separation experiments between schemes.
    Separation(SeparationArgs),
    /// Random-coding simulation of a model.
    Sim(SimArgs),
    /// Prints subset tiers and sharing sets.
    Lattice(LatticeArgs),
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated weights, one per description (default all ones).
    #[arg(long)]
    weights: Option<String>,
    /// Solve the program in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RdArgs {
    /// `bss` for the fair binary source, or a JSON file with `probs` and `matrix`.
    #[arg(long, default_value = "bss")]
    source: String,
    #[arg(long = "D")]
    d: Option<f64>,
    /// Distortion grid `a:b:step`; output is CSV.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CrossKind {
    Ec,
    Zb,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    restarts: usize,
    #[arg(long, default_value_t = 3)]
    shared_alphabet: usize,
    #[arg(long, default_value_t = 2)]
    private_alphabet: usize,
    /// Resolution of the exhaustive EC grid (0 disables it).
    #[arg(long, default_value_t = 32)]
    ec_grid: usize,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            seed: self.seed,
            restarts: self.restarts,
            alphabets: AuxAlphabets {
                shared: self.shared_alphabet,
                private: self.private_alphabet,
            },
            ec_grid: self.ec_grid,
            ..SearchConfig::default()
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct CrossArgs {
    #[arg(value_enum)]
    scheme: CrossKind,
    #[arg(long = "D")]
    d: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SeparationKind {
    Zb,
    L3,
    L4,
}

#[derive(Args, Debug, Serialize)]
struct SeparationArgs {
    #[arg(value_enum)]
    kind: SeparationKind,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value = "0.05:0.45:0.05")]
    grid: String,
    #[arg(long, default_value_t = 0.2)]
    d3: f64,
    #[arg(long, default_value_t = 0.1)]
    d34: f64,
    /// Distortion of the `{1,3}` refinement (default half the witness `D_1`).
    #[arg(long)]
    d13: Option<f64>,
    /// Also write the scan as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0.08)]
    epsilon: f64,
    /// Added to every rate of the minimum-rate allocation.
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    #[arg(long)]
    weights: Option<String>,
    /// Also write per-trial results as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct LatticeArgs {
    #[arg(long = "L")]
    l: usize,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: Value,
    input_digests: Vec<(String, String)>,
    seed: Option<u64>,
    tool_version: &'static str,
    started: String,
    finished: String,
}

struct Run {
    subcommand: &'static str,
    config: Value,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    started: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

fn digest(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl Run {
    /// Writes the primary output (and its manifest) or prints it.
    fn emit(&self, out: Option<&Path>, body: &str) -> Result<(), Error> {
        let Some(path) = out else {
            print!("{body}");
            return Ok(());
        };
        fs::write(path, body).map_err(|e| io_err(path, e))?;
        self.manifest_for(path)
    }

    fn manifest_for(&self, path: &Path) -> Result<(), Error> {
        let input_digests = self
            .inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), digest(p)?)))
            .collect::<Result<_, Error>>()?;
        let m = RunManifest {
            subcommand: self.subcommand.to_string(),
            config: self.config.clone(),
            input_digests,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            started: self.started.clone(),
            finished: now(),
        };
        let mut name = path.as_os_str().to_owned();
        name.push(".manifest.json");
        let mpath = PathBuf::from(name);
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
        fs::write(&mpath, text).map_err(|e| io_err(&mpath, e))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let value = round_json(serde_json::to_value(v).expect("serializable"), DIGITS);
    serde_json::to_string_pretty(&value).expect("json") + "\n"
}

fn parse_weights(s: Option<&str>, l: usize) -> Result<Vec<f64>, Error> {
    let Some(s) = s else {
        return Ok(vec![1.0; l]);
    };
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad weight `{w}`")))
        })
        .collect()
}

/// `a:b:step`, both ends included.
fn parse_grid(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidArgument(format!("grid must be a:b:step, got `{s}`"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [a, b, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(Error::Limit("grid has too many points".into()));
    }
    Ok((0..count)
        .map(|i| mdcms_core::io::round_sig(a + i as f64 * step, DIGITS))
        .collect())
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    let fail = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

fn eval(run: &Run, a: &EvalArgs) -> Result<(), Error> {
    let (m, spec) = load_model::<f64>(&a.model)?;
    let w = parse_weights(a.weights.as_deref(), m.l())?;
    let dspec = (!spec.measures.is_empty()).then_some(&spec);
    let r = if a.exact {
        m.min_rates_exact(&w, dspec, &[])?
    } else {
        m.min_rates(&w, dspec)?
    };
    let body = serde_json::to_string_pretty(&rates_json(&r)).expect("json") + "\n";
    run.emit(a.out.as_deref(), &body)
}

fn decoders(run: &Run, a: &ModelArgs) -> Result<(), Error> {
    let (m, spec) = load_model::<f64>(&a.model)?;
    if spec.measures.is_empty() {
        return Err(Error::InvalidArgument(
            "model declares no distortion measures".into(),
        ));
    }
    let (table, dist) = m.synthesize_decoders(&spec)?;
    let names = m.joint().vars();
    let decs: serde_json::Map<String, Value> = table
        .decoders
        .iter()
        .map(|(k, d)| {
            let inputs: Vec<&str> = d.inputs.iter().map(|&i| names[i].name.as_str()).collect();
            (
                k.key(),
                json!({"inputs": inputs, "radices": d.radices, "table": d.table}),
            )
        })
        .collect();
    let body = to_json(&json!({"decoders": decs, "distortions": dist}));
    run.emit(a.out.as_deref(), &body)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceFile {
    probs: Vec<f64>,
    matrix: Vec<Vec<f64>>,
}

fn rd(run: &Run, a: &RdArgs) -> Result<(), Error> {
    let eval: Box<dyn Fn(f64) -> Result<f64, Error>> = if a.source == "bss" {
        Box::new(rd_binary::<f64>)
    } else {
        let path = Path::new(&a.source);
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let src: SourceFile =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        Box::new(move |d| Ok(rd_blahut_arimoto(&src.probs, &src.matrix, d)?.rate))
    };
    let body = match (&a.grid, a.d) {
        (Some(g), None) => {
            let rows = parse_grid(g)?
                .into_iter()
                .map(|d| Ok(vec![fmt_sig(d, DIGITS), fmt_sig(eval(d)?, DIGITS)]))
                .collect::<Result<Vec<_>, Error>>()?;
            csv_text(&["D", "rate"], &rows)?
        }
        (None, Some(d)) => format!("{}\n", fmt_sig(eval(d)?, DIGITS)),
        _ => {
            return Err(Error::InvalidArgument(
                "give exactly one of --D and --grid".into(),
            ))
        }
    };
    run.emit(a.out.as_deref(), &body)
}

fn cross(run: &Run, a: &CrossArgs) -> Result<(), Error> {
    let cfg = a.search.config();
    let (value, model) = match a.scheme {
        CrossKind::Ec => cross_section_ec(a.d, &cfg)?,
        CrossKind::Zb => cross_section_zb(a.d, &cfg)?,
    };
    let s = |m: &[usize]| DescriptionSet::new(2, m).expect("static");
    let spec = DistortionSpec::hamming(2, &[s(&[1]), s(&[2]), s(&[1, 2])]);
    let body = to_json(&json!({
        "scheme": a.scheme,
        "D": a.d,
        "value": value,
        "model": ModelFile::from_model(&model, &spec),
        "config": cfg,
    }));
    run.emit(a.out.as_deref(), &body)
}

fn scan_csv(r: &SeparationReport) -> Result<String, Error> {
    let rows: Vec<Vec<String>> = r
        .scan
        .iter()
        .map(|s| {
            [s.d, s.value_ec, s.value_zb, s.gap]
                .iter()
                .map(|&x| fmt_sig(x, DIGITS))
                .collect()
        })
        .collect();
    csv_text(&["D", "value_ec", "value_zb", "gap"], &rows)
}

fn separation(run: &Run, a: &SeparationArgs) -> Result<(), Error> {
    let cfg = a.search.config();
    let grid = parse_grid(&a.grid)?;
    let report = separation_zb(&cfg, &grid)?;
    if let Some(path) = &a.csv {
        let text = scan_csv(&report)?;
        fs::write(path, text).map_err(|e| io_err(path, e))?;
        run.manifest_for(path)?;
    }
    let summary = json!({
        "D_star": report.d_star,
        "value_ec": report.value_ec,
        "value_cms_or_zb": report.value_cms_or_zb,
        "gap": report.gap,
    });
    let body = match a.kind {
        SeparationKind::Zb => to_json(&report),
        SeparationKind::L3 => {
            to_json(&json!({"separation": summary, "l3": separation_l3(&report, a.d13)?}))
        }
        SeparationKind::L4 => {
            to_json(&json!({"separation": summary, "l4": separation_l4(&report, a.d3, a.d34)?}))
        }
    };
    run.emit(a.out.as_deref(), &body)
}

/// Minimum-rate allocation plus `margin` on every rate.
fn sim_allocation(
    m: &AuxModel<f64>,
    weights: &[f64],
    margin: f64,
) -> Result<RateAllocation<f64>, Error> {
    let r = m.min_rates(weights, None)?;
    let mut alloc = match (m.scheme(), r.allocation) {
        (_, Some(a)) => a,
        (Scheme::EC, None) => RateAllocation {
            private: r.rates.rates.clone(),
            ..RateAllocation::zero(2)
        },
        _ => {
            return Err(Error::Scheme(
                "simulation needs an EC, ZB or CMS model".into(),
            ))
        }
    };
    alloc.private.iter_mut().for_each(|p| *p += margin);
    alloc.shared.values_mut().for_each(|p| *p += margin);
    Ok(alloc)
}

fn sim(run: &Run, a: &SimArgs) -> Result<(), Error> {
    let (m, spec) = load_model::<f64>(&a.model)?;
    let w = parse_weights(a.weights.as_deref(), m.l())?;
    let alloc = sim_allocation(&m, &w, a.margin)?;
    let report = run_trials(&m, &alloc, &spec, a.n, a.trials, a.epsilon, a.seed)?;
    if let Some(path) = &a.csv {
        let keys: Vec<String> = report.analytic_distortions.keys().cloned().collect();
        let mut header = vec!["trial".to_string(), "success".to_string()];
        header.extend(keys.iter().map(|k| format!("D{k}")));
        let rows: Vec<Vec<String>> = report
            .per_trial
            .iter()
            .map(|t| {
                let mut row = vec![t.trial.to_string(), t.success.to_string()];
                row.extend(keys.iter().map(|k| {
                    t.distortions
                        .get(k)
                        .map(|&d| fmt_sig(d, DIGITS))
                        .unwrap_or_default()
                }));
                row
            })
            .collect();
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        fs::write(path, csv_text(&h, &rows)?).map_err(|e| io_err(path, e))?;
        run.manifest_for(path)?;
    }
    let body = to_json(&json!({"allocation": alloc, "report": report}));
    run.emit(a.out.as_deref(), &body)
}

fn lattice_dump(a: &LatticeArgs) -> Result<(), Error> {
    let full = DescriptionSet::full(a.l)?;
    for w in 1..=a.l {
        let t = lattice::tier(a.l, w)?;
        let sets: Vec<String> = t.iter().map(|s| s.to_string()).collect();
        println!("I_{w}: {}", sets.join(" "));
    }
    for k in full.nonempty_subsets() {
        let j = lattice::sharing_sets(a.l, k)?;
        let sets: Vec<String> = j.iter().map(|s| s.to_string()).collect();
        println!("J({k}): {}", sets.join(" "));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let (subcommand, inputs, seed): (&'static str, Vec<PathBuf>, Option<u64>) = match &cli.cmd {
        Command::Eval(a) => ("eval", vec![a.model.clone()], None),
        Command::Decoders(a) => ("decoders", vec![a.model.clone()], None),
        Command::Rd(a) => {
            let inputs = if a.source == "bss" {
                vec![]
            } else {
                vec![PathBuf::from(&a.source)]
            };
            ("rd", inputs, None)
        }
        Command::CrossSection(a) => ("cross-section", vec![], Some(a.search.seed)),
        Command::Separation(a) => ("separation", vec![], Some(a.search.seed)),
        Command::Sim(a) => ("sim", vec![a.model.clone()], Some(a.seed)),
        Command::Lattice(_) => ("lattice", vec![], None),
    };
    let run = Run {
        subcommand,
        config: serde_json::to_value(&cli.cmd).expect("args serialize"),
        inputs,
        seed,
        started: now(),
    };
    match &cli.cmd {
        Command::Eval(a) => eval(&run, a),
        Command::Decoders(a) => decoders(&run, a),
        Command::Rd(a) => rd(&run, a),
        Command::CrossSection(a) => cross(&run, a),
        Command::Separation(a) => separation(&run, a),
        Command::Sim(a) => sim(&run, a),
        Command::Lattice(a) => lattice_dump(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
