use std::env;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use anyhow::Context;
use cheeger_core::cheeger::{boundary_size, cheeger_exact, cheeger_naive};
use cheeger_core::estimators::{deviation, mean};
use cheeger_core::experiments::{
    build_dataset, default_count, default_degrees, dnn_experiment, dnn_figures, emit_charts,
    regression_experiment, regression_figures, table1_figures, table1_report, table1_table,
    DnnConfig, SizePlan,
};
use cheeger_core::graph::{check_parameters, generate_regular, Graph};
use cheeger_core::spectral::{spectrum, Spectrum, DEFAULT_TOLERANCE};
use cheeger_core::{
    bounds, fit_linear, train, Dataset, Error, ExperimentConfig, LinearModel, MlpModel, Regime,
    Seed,
};
use serde_json::json;

use crate::{
    BoundsArgs, Command, Failure, FitArgs, Format, GenerateArgs, GraphArgs, PredictArgs,
    ReportArgs, TrainArgs, VerifyArgs,
};

type Outcome = Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

pub(crate) fn run(command: Command) -> Outcome {
    match command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Spectrum(a) => print_spectrum(a),
        Command::Bounds(a) => print_bounds(a),
        Command::Fit(a) => fit(a),
        Command::Train(a) => train_model(a),
        Command::Predict(a) => predict(a),
        Command::Report(a) => report(a),
        Command::Verify(a) => verify(a),
    }
}

/// `$CHEEGER_LAB_DIR`, or `./cheeger-lab`.
fn lab_root() -> PathBuf {
    env::var_os("CHEEGER_LAB_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("cheeger-lab"))
}

fn dataset_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| lab_root().join("data"))
}

fn load_dataset(flag: Option<PathBuf>) -> Result<Dataset, Failure> {
    let path = dataset_dir(flag);
    if !path.exists() {
        return Err(Failure::Data(anyhow::anyhow!(
            "dataset {} does not exist; run `cheeger-lab generate` first",
            path.display()
        )));
    }
    let ds = Dataset::load(&path)?;
    if ds.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!(
            "dataset {} has no records",
            path.display()
        )));
    }
    Ok(ds)
}

fn write_file(path: &Path, body: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes `text` to stdout; a closed pipe (as with `| head`) is not an error.
fn emit(text: &str) -> Outcome {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Data(
            anyhow::Error::new(e).context("writing to stdout"),
        )),
        _ => Ok(()),
    }
}

fn generate(a: GenerateArgs) -> Outcome {
    let (sizes, size_flag) = match a.n {
        Some(n) => (vec![n], "--n"),
        None if !a.sizes.is_empty() => (a.sizes, "--sizes"),
        None => return usage("generate needs --n or --sizes"),
    };
    if a.threads == 0 {
        return usage("--threads must be at least 1");
    }
    if a.count == Some(0) {
        return usage("--count must be at least 1");
    }
    let plans = sizes
        .iter()
        .map(|&n| {
            let degrees = a.k.map_or_else(|| default_degrees(n), |k| vec![k]);
            SizePlan::new(n, degrees, a.count.unwrap_or_else(|| default_count(n)))
        })
        .collect();
    let out = dataset_dir(a.out);
    let config = ExperimentConfig::new(plans, a.seed, &out);
    if let Err(e) = config.validate() {
        let flag = if a.k.is_some() { "--k" } else { size_flag };
        return usage(format!("{flag}: {e}"));
    }
    let summary = build_dataset(&config, a.threads)?;
    for (path, plan) in summary.files.iter().zip(&config.sizes) {
        println!(
            "{} ({} records, k in {:?})",
            path.display(),
            plan.count,
            plan.degrees
        );
    }
    println!("generated {}, reused {}", summary.generated, summary.reused);
    Ok(())
}

fn load_graph(a: &GraphArgs) -> Result<Graph, Failure> {
    match (&a.file, a.n, a.k) {
        (Some(path), _, _) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(Graph::parse_edge_list(&text)
                .with_context(|| format!("parsing {}", path.display()))?)
        }
        (None, Some(n), Some(k)) => {
            if let Err(e) = check_parameters(n, k) {
                return usage(format!("--n/--k: {e}"));
            }
            Ok(generate_regular(n, k, Seed::new(a.seed, 0))?)
        }
        _ => usage("give an edge-list FILE or both --n and --k"),
    }
}

fn solve(a: GraphArgs) -> Outcome {
    let g = load_graph(&a)?;
    let c = cheeger_exact(&g)?;
    let witness = c.witness_vertices();
    match a.format {
        None => {
            println!("h = {} (= {}/{})", c.h(), c.boundary, c.size);
            let vs: Vec<String> = witness.iter().map(ToString::to_string).collect();
            println!("witness = {}", vs.join(" "));
        }
        Some(Format::Json) => {
            let v = json!({
                "n": g.n(), "k": g.k(), "h": c.h(),
                "boundary": c.boundary, "size": c.size, "witness": witness,
            });
            println!("{v}");
        }
        Some(Format::Csv) => {
            let vs: Vec<String> = witness.iter().map(ToString::to_string).collect();
            println!("n,k,boundary,size,h,witness");
            println!(
                "{},{},{},{},{},{}",
                g.n(),
                g.k(),
                c.boundary,
                c.size,
                c.h(),
                vs.join(" ")
            );
        }
    }
    Ok(())
}

fn print_spectrum(a: GraphArgs) -> Outcome {
    let g = load_graph(&a)?;
    let s = spectrum(&g, DEFAULT_TOLERANCE)?;
    let mut text = String::new();
    match a.format {
        None => s.values().iter().for_each(|x| {
            let _ = writeln!(text, "{x}");
        }),
        Some(Format::Json) => {
            let _ = writeln!(text, "{}", json!(s.values()));
        }
        Some(Format::Csv) => {
            text.push_str("index,eigenvalue\n");
            for (i, x) in s.values().iter().enumerate() {
                let _ = writeln!(text, "{i},{x}");
            }
        }
    }
    emit(&text)
}

fn print_bounds(a: BoundsArgs) -> Outcome {
    let b = match bounds(a.k, a.n, a.lambda1) {
        Ok(b) => b,
        Err(e @ Error::InvalidSpectrum { .. }) => return usage(format!("--lambda1: {e}")),
        Err(e) => return usage(format!("--k/--n: {e}")),
    };
    let spec = b
        .upper_mohar_spec
        .map_or("-".to_string(), |x| x.to_string());
    match a.format {
        None => {
            println!("lower             {}", b.lower);
            println!("upper_gap         {}", b.upper_gap);
            println!("upper_mohar_size  {}", b.upper_mohar_size);
            println!("upper_mohar_spec  {spec}");
            println!("upper             {}", b.upper);
        }
        Some(Format::Json) => println!("{}", serde_json::to_string(&b).context("encoding bounds")?),
        Some(Format::Csv) => {
            println!("lower,upper_gap,upper_mohar_size,upper_mohar_spec,upper");
            let spec = b.upper_mohar_spec.map_or(String::new(), |x| x.to_string());
            println!(
                "{},{},{},{},{}",
                b.lower, b.upper_gap, b.upper_mohar_size, spec, b.upper
            );
        }
    }
    Ok(())
}

fn check_eigs(eigs: usize, n: usize) -> Outcome {
    if eigs == 0 || eigs > n {
        return usage(format!("--eigs must be between 1 and n={n}"));
    }
    Ok(())
}

fn fit(a: FitArgs) -> Outcome {
    check_eigs(a.eigs, a.n)?;
    let ds = load_dataset(a.dataset)?;
    let samples = ds.samples(a.n, a.eigs)?;
    let model = fit_linear(&samples)?;
    let devs = samples
        .iter()
        .map(|s| deviation(model.predict(&s.features)?, s.target))
        .collect::<Result<Vec<_>, _>>()?;
    let out = a
        .out
        .unwrap_or_else(|| lab_root().join(format!("models/linear_n{:02}_m{}.txt", a.n, a.eigs)));
    write_file(&out, &model.to_text())?;
    let coeffs: Vec<String> = model.coeffs.iter().map(|c| format!("{c:.6}")).collect();
    println!(
        "coefficients [{}], intercept {:.6}",
        coeffs.join(", "),
        model.intercept
    );
    println!(
        "mean deviation {:.4} over {} records",
        mean(&devs),
        samples.len()
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn train_model(a: TrainArgs) -> Outcome {
    check_eigs(a.eigs, a.n)?;
    if a.epochs == Some(0) {
        return usage("--epochs must be at least 1");
    }
    let ds = load_dataset(a.dataset)?;
    let samples = ds.samples(a.n, a.eigs)?;
    let regime = Regime::from(a.regime);
    let mut config = regime.config(Seed::new(a.seed, 0));
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    let (model, report) = train(&samples, &config)?;
    let tag = match regime {
        Regime::Moderate => "moderate",
        Regime::Full => "full",
    };
    let out = a
        .out
        .unwrap_or_else(|| lab_root().join(format!("models/mlp_n{:02}_{tag}.txt", a.n)));
    let report_path = out.with_extension("report.json");
    write_file(&out, &model.to_text())?;
    write_file(&report_path, &report.to_json())?;
    println!(
        "{} epochs (kept {}), mean deviation train {:.4} validation {:.4}",
        report.epochs_run, report.best_epoch, report.mean_dev_train, report.mean_dev_val
    );
    println!("wrote {} and {}", out.display(), report_path.display());
    Ok(())
}

enum AnyModel {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl AnyModel {
    fn load(path: &Path) -> Result<Self, Failure> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = if text.starts_with("# cheeger linear model") {
            LinearModel::from_text(&text).map(AnyModel::Linear)
        } else {
            MlpModel::from_text(&text).map(AnyModel::Mlp)
        };
        Ok(parsed.with_context(|| format!("parsing {}", path.display()))?)
    }

    fn arity(&self) -> usize {
        match self {
            AnyModel::Linear(m) => m.m(),
            AnyModel::Mlp(m) => m.input_arity(),
        }
    }

    fn predict(&self, x: &[f64]) -> cheeger_core::Result<f64> {
        match self {
            AnyModel::Linear(m) => m.predict(x),
            AnyModel::Mlp(m) => m.predict(x),
        }
    }
}

fn predict(a: PredictArgs) -> Outcome {
    let model = AnyModel::load(&a.model)?;
    let ds = load_dataset(a.dataset)?;
    let m = model.arity();
    let records: Vec<_> = ds
        .records()
        .iter()
        .filter(|r| a.sizes.is_empty() || a.sizes.contains(&r.n))
        .collect();
    if records.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!(
            "no records of sizes {:?}",
            a.sizes
        )));
    }
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        if r.n < m {
            return Err(Failure::Data(anyhow::anyhow!(
                "record n={} has fewer than {m} eigenvalues",
                r.n
            )));
        }
        let est = model.predict(&r.spectrum[..m])?;
        rows.push((r, est, deviation(est, r.h)?));
    }
    let mut text = String::new();
    match a.format {
        Format::Csv => {
            text.push_str("n,k,index,h,estimate,deviation\n");
            for (r, est, dev) in &rows {
                let _ = writeln!(text, "{},{},{},{},{est},{dev}", r.n, r.k, r.index, r.h);
            }
        }
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|(r, est, dev)| {
                    json!({"n": r.n, "k": r.k, "index": r.index, "h": r.h, "estimate": est, "deviation": dev})
                })
                .collect();
            let _ = writeln!(text, "{}", serde_json::Value::Array(items));
        }
    }
    emit(&text)?;
    let devs: Vec<f64> = rows.iter().map(|(_, _, d)| *d).collect();
    eprintln!("{} records, mean deviation {:.4}", devs.len(), mean(&devs));
    Ok(())
}

/// Smallest even and smallest odd size, the training sizes for
/// cross-size prediction.
fn parity_seeds(sizes: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = [0, 1]
        .iter()
        .filter_map(|&p| sizes.iter().copied().filter(|n| n % 2 == p).min())
        .collect();
    out.sort_unstable();
    out
}

fn report(a: ReportArgs) -> Outcome {
    let ds = load_dataset(a.dataset)?;
    let sizes = if a.sizes.is_empty() {
        ds.sizes()
    } else {
        a.sizes
    };
    if let Some(&n) = sizes.iter().find(|&&n| ds.of_size(n).is_empty()) {
        return usage(format!("--sizes: the dataset has no records with n={n}"));
    }
    check_eigs(a.eigs, sizes.iter().copied().min().unwrap_or(0))?;
    let out = a.out.unwrap_or_else(|| lab_root().join("report"));

    let rows = table1_report(&ds, &sizes)?;
    print!("{}", table1_table(&rows).to_text());
    let mut figures = table1_figures(&rows);

    let max_m = sizes.iter().copied().min().unwrap_or(0).min(4);
    let ms: Vec<usize> = (1..=max_m).collect();
    let train_sizes = parity_seeds(&sizes);
    let reg = regression_experiment(&ds, &ms, &sizes, &train_sizes, &sizes)?;
    for f in reg.in_sample.iter().filter(|f| f.m == 2) {
        println!(
            "linear n={} (lambda0, lambda1): coefficients [{:.4}, {:.4}] intercept {:.4}, mean deviation {:.4}",
            f.n, f.model.coeffs[0], f.model.coeffs[1], f.model.intercept, f.mean_dev
        );
    }
    figures.extend(regression_figures(&reg));

    if let Some(regime) = a.regime {
        let regime = Regime::from(regime);
        let mut config = DnnConfig::new(regime, a.seed);
        config.eigs = a.eigs;
        let train_sizes = match regime {
            Regime::Moderate => train_sizes,
            Regime::Full => sizes.clone(),
        };
        let dnn = dnn_experiment(&ds, &train_sizes, &sizes, &config)?;
        for f in &dnn.fits {
            println!(
                "network n={}: mean deviation train {:.4} validation {:.4} (linear {:.4})",
                f.n, f.report.mean_dev_train, f.report.mean_dev_val, f.linear_mean_dev
            );
        }
        for p in &dnn.predictions {
            println!(
                "network n={} -> n={}: mean deviation {:.4} (linear {:.4})",
                p.train_n, p.target_n, p.dnn_mean_dev, p.linear_mean_dev
            );
        }
        figures.extend(dnn_figures(&dnn));
    }
    let written = emit_charts(&figures, &out)?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

/// Known exact values and closed-form spectra.
fn known_value_problems() -> Vec<String> {
    let mut out = Vec::new();
    let mut expect = |name: String, g: &Graph, num: u64, den: u64| match cheeger_exact(g) {
        Ok(c) if c.reduced() == (num, den) => {}
        Ok(c) => out.push(format!(
            "h({name}) = {}/{}, expected {num}/{den}",
            c.boundary, c.size
        )),
        Err(e) => out.push(format!("h({name}): {e}")),
    };
    for n in 3..=10 {
        expect(
            format!("K{n}"),
            &Graph::complete(n).expect("complete graph"),
            (n - n / 2) as u64,
            1,
        );
    }
    for n in 3..=12 {
        let half = (n / 2) as u64;
        let g = Graph::cycle(n).expect("cycle");
        let (num, den) = if half.is_multiple_of(2) {
            (1, half / 2)
        } else {
            (2, half)
        };
        expect(format!("C{n}"), &g, num, den);
    }
    let p = Graph::petersen();
    expect("Petersen".into(), &p, 1, 1);
    match cheeger_naive(&p) {
        Ok(c) if c.reduced() == (1, 1) => {}
        other => out.push(format!("naive h(Petersen) = {other:?}")),
    }

    let mut spectra: Vec<(&str, Graph, Vec<f64>)> = vec![
        (
            "K4",
            Graph::complete(4).expect("K4"),
            vec![3.0, -1.0, -1.0, -1.0],
        ),
        (
            "C6",
            Graph::cycle(6).expect("C6"),
            vec![2.0, 1.0, 1.0, -1.0, -1.0, -2.0],
        ),
    ];
    let mut pv = vec![3.0];
    pv.extend([1.0; 5]);
    pv.extend([-2.0; 4]);
    spectra.push(("Petersen", Graph::petersen(), pv));
    for (name, g, want) in spectra {
        match spectrum(&g, DEFAULT_TOLERANCE) {
            Ok(s)
                if s.values()
                    .iter()
                    .zip(&want)
                    .all(|(a, b)| (a - b).abs() <= 1e-8) => {}
            Ok(s) => out.push(format!("spectrum of {name} is {:?}", s.values())),
            Err(e) => out.push(format!("spectrum of {name}: {e}")),
        }
    }
    out
}

/// Exact against naive search, spectral invariants and the bound sandwich on
/// one random graph.
fn graph_problems(g: &Graph) -> Vec<String> {
    let mut out = Vec::new();
    let (exact, naive) = match (cheeger_exact(g), cheeger_naive(g)) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return vec![format!("solver error: {a:?} / {b:?}")],
    };
    if !exact.same_ratio(&naive) {
        out.push(format!(
            "exact {}/{} but naive {}/{}",
            exact.boundary, exact.size, naive.boundary, naive.size
        ));
    }
    if boundary_size(g, exact.witness) != exact.boundary {
        out.push("witness boundary mismatch".into());
    }
    let s: Spectrum = match spectrum(g, DEFAULT_TOLERANCE) {
        Ok(s) => s,
        Err(e) => return vec![e.to_string()],
    };
    out.extend(s.regular_violations(g.k()));
    match s.lambda1().map(|l1| bounds(g.k(), g.n(), l1)) {
        Some(Ok(b)) if b.lower - 1e-9 <= exact.h() && exact.h() <= b.upper + 1e-9 => {}
        Some(Ok(b)) => out.push(format!(
            "h = {} outside [{}, {}]",
            exact.h(),
            b.lower,
            b.upper
        )),
        Some(Err(e)) => out.push(e.to_string()),
        None => out.push("spectrum too short".into()),
    }
    out
}

fn verify(a: VerifyArgs) -> Outcome {
    if !(6..=16).contains(&a.max_n) {
        return usage("--max-n must be between 6 and 16");
    }
    if a.samples == 0 {
        return usage("--samples must be at least 1");
    }
    let mut problems = known_value_problems();
    println!("known values and spectra: {}", status(problems.len()));

    let sizes: Vec<usize> = (6..=a.max_n).collect();
    let mut sweep = Vec::new();
    for i in 0..a.samples {
        let n = sizes[i % sizes.len()];
        let degrees: Vec<usize> = (2..n).filter(|k| (n * k).is_multiple_of(2)).collect();
        let k = degrees[(i / sizes.len()) % degrees.len()];
        let g = generate_regular(n, k, Seed::new(a.seed, i as u64))?;
        sweep.extend(
            graph_problems(&g)
                .into_iter()
                .map(|p| format!("n={n} k={k} #{i}: {p}")),
        );
    }
    println!(
        "oracle sweep over {} graphs, n in 6..={}: {}",
        a.samples,
        a.max_n,
        status(sweep.len())
    );
    problems.extend(sweep);

    if let Some(path) = a.dataset {
        let ds = Dataset::load(&path)?;
        let mut bad = Vec::new();
        for r in ds.records() {
            let found = r.check_full();
            bad.extend(
                found
                    .into_iter()
                    .map(|p| format!("record n={} k={} #{}: {p}", r.n, r.k, r.index)),
            );
        }
        println!("{} dataset records: {}", ds.len(), status(bad.len()));
        problems.extend(bad);
    }

    if problems.is_empty() {
        return Ok(());
    }
    for p in problems.iter().take(20) {
        eprintln!("  {p}");
    }
    Err(Failure::Data(anyhow::anyhow!(
        "{} verification problems",
        problems.len()
    )))
}

fn status(problems: usize) -> String {
    if problems == 0 {
        "ok".into()
    } else {
        format!("{problems} problems")
    }
}
