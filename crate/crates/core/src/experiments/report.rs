//! Aggregate reports over a [`Dataset`]: bound deviations, linear
//! regression sweeps and cross-size neural predictions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::charts::{histogram, render_svg, Chart, Series};
use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{bounds, deviation, fit_linear, mean, std_dev, LinearModel, Sample};
use crate::nn::{self, model_select, MlpModel, Regime, TrainReport};
use crate::seed::Seed;

/// Histogram bin width for deviation plots (0.5%).
pub const DEVIATION_BIN: f64 = 0.005;

/// A named numeric table with a fixed column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Decimal places used when rendering.
    pub precision: usize,
}

impl ReportTable {
    pub fn new(name: &str, columns: &[&str], precision: usize) -> Self {
        ReportTable {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            precision,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn cell(&self, x: f64) -> String {
        if x.fract() == 0.0 && x.abs() < 1e15 {
            format!("{x:.0}")
        } else {
            format!("{x:.*}", self.precision)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| self.cell(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Right-aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&x| self.cell(x)).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| cells.iter().map(|r| r[j].len()).fold(c.len(), usize::max))
            .collect();
        let mut out = String::new();
        let line = |cols: &[String]| {
            cols.iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", line(&self.columns));
        for r in &cells {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }

    /// Values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub n: usize,
    pub count: usize,
    pub mean_dev_lower: f64,
    pub mean_dev_upper: f64,
}

/// Mean relative deviation of the spectral lower bound and of the tightest
/// upper bound from the exact `h`, per size.
pub fn table1_report(dataset: &Dataset, sizes: &[usize]) -> Result<Vec<Table1Row>> {
    sizes
        .iter()
        .map(|&n| {
            let records = dataset.require(n)?;
            let mut lower = Vec::with_capacity(records.len());
            let mut upper = Vec::with_capacity(records.len());
            for r in &records {
                let b = bounds(r.k, r.n, r.lambda1())?;
                lower.push(deviation(b.lower, r.h)?);
                upper.push(deviation(b.upper, r.h)?);
            }
            Ok(Table1Row {
                n,
                count: records.len(),
                mean_dev_lower: mean(&lower),
                mean_dev_upper: mean(&upper),
            })
        })
        .collect()
}

pub fn table1_table(rows: &[Table1Row]) -> ReportTable {
    let mut t = ReportTable::new(
        "table1",
        &["n", "graphs", "mean_dev_lower", "mean_dev_upper"],
        2,
    );
    for r in rows {
        t.push(vec![
            r.n as f64,
            r.count as f64,
            r.mean_dev_lower,
            r.mean_dev_upper,
        ]);
    }
    t
}

/// Mean and standard deviation of `|model(x) − h| / h` over `samples`.
pub fn linear_deviation(model: &LinearModel, samples: &[Sample]) -> Result<(f64, f64)> {
    let devs = samples
        .iter()
        .map(|s| deviation(model.predict(&s.features)?, s.target))
        .collect::<Result<Vec<_>>>()?;
    Ok((mean(&devs), std_dev(&devs)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InSampleFit {
    pub n: usize,
    pub m: usize,
    pub model: LinearModel,
    pub mean_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossPrediction {
    pub train_n: usize,
    pub target_n: usize,
    pub mean_dev: f64,
    pub std_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub in_sample: Vec<InSampleFit>,
    /// Fits on `(λ0, λ1)` from each training size applied to other sizes.
    pub predictions: Vec<CrossPrediction>,
}

impl RegressionReport {
    pub fn fit(&self, n: usize, m: usize) -> Option<&InSampleFit> {
        self.in_sample.iter().find(|f| f.n == n && f.m == m)
    }

    pub fn prediction(&self, train_n: usize, target_n: usize) -> Option<&CrossPrediction> {
        self.predictions
            .iter()
            .find(|p| p.train_n == train_n && p.target_n == target_n)
    }
}

/// For every size in `fit_sizes` and `m` in `ms`, fits on all records of that
/// size and reports the in-sample deviation. Then fits `(λ0, λ1)` on each of
/// `train_sizes` and evaluates it on each of `predict_sizes`.
pub fn regression_experiment(
    dataset: &Dataset,
    ms: &[usize],
    fit_sizes: &[usize],
    train_sizes: &[usize],
    predict_sizes: &[usize],
) -> Result<RegressionReport> {
    let mut in_sample = Vec::new();
    for &n in fit_sizes {
        for &m in ms {
            let samples = dataset.samples(n, m)?;
            let model = fit_linear(&samples)?;
            let (mean_dev, _) = linear_deviation(&model, &samples)?;
            in_sample.push(InSampleFit {
                n,
                m,
                model,
                mean_dev,
            });
        }
    }
    let mut predictions = Vec::new();
    for &train_n in train_sizes {
        let model = fit_linear(&dataset.samples(train_n, 2)?)?;
        for &target_n in predict_sizes.iter().filter(|&&t| t != train_n) {
            let (mean_dev, std_dev) = linear_deviation(&model, &dataset.samples(target_n, 2)?)?;
            predictions.push(CrossPrediction {
                train_n,
                target_n,
                mean_dev,
                std_dev,
            });
        }
    }
    Ok(RegressionReport {
        in_sample,
        predictions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnnConfig {
    pub regime: Regime,
    /// Independent trainings per size; the best on validation is kept.
    pub trials: usize,
    /// Number of leading eigenvalues fed to the network.
    pub eigs: usize,
    pub master_seed: u64,
    /// Overrides the regime's batch size when set.
    pub batch_size: Option<usize>,
}

impl DnnConfig {
    pub fn new(regime: Regime, master_seed: u64) -> Self {
        DnnConfig {
            regime,
            trials: 3,
            eigs: 2,
            master_seed,
            batch_size: None,
        }
    }

    pub fn train_config(&self, n: usize, trial: usize) -> nn::TrainConfig {
        let mut c = self
            .regime
            .config(Seed::new(self.master_seed, (n as u64) << 32 | trial as u64));
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DnnFit {
    pub n: usize,
    pub selected_trial: usize,
    pub model: MlpModel,
    pub report: TrainReport,
    /// Per-record deviations on the training and validation splits.
    pub train_devs: Vec<f64>,
    pub val_devs: Vec<f64>,
    /// In-sample mean deviation of the `(λ0, λ1)` linear fit on all records.
    pub linear_mean_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnnPrediction {
    pub train_n: usize,
    pub target_n: usize,
    pub dnn_mean_dev: f64,
    pub dnn_std_dev: f64,
    pub linear_mean_dev: f64,
    pub linear_std_dev: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DnnReport {
    pub config: DnnConfig,
    pub fits: Vec<DnnFit>,
    pub predictions: Vec<DnnPrediction>,
}

impl DnnReport {
    pub fn fit(&self, n: usize) -> Option<&DnnFit> {
        self.fits.iter().find(|f| f.n == n)
    }

    pub fn prediction(&self, train_n: usize, target_n: usize) -> Option<&DnnPrediction> {
        self.predictions
            .iter()
            .find(|p| p.train_n == train_n && p.target_n == target_n)
    }
}

/// Trains `config.trials` networks per training size on a 40/60 split, keeps
/// the one with the lowest validation deviation, and compares its
/// predictions on other sizes with a linear fit on the same size.
pub fn dnn_experiment(
    dataset: &Dataset,
    train_sizes: &[usize],
    predict_sizes: &[usize],
    config: &DnnConfig,
) -> Result<DnnReport> {
    let mut fits = Vec::new();
    let mut predictions = Vec::new();
    for &n in train_sizes {
        let samples = dataset.samples(n, config.eigs)?;
        let mut candidates = Vec::with_capacity(config.trials);
        let mut splits = Vec::with_capacity(config.trials);
        for trial in 0..config.trials.max(1) {
            let tc = config.train_config(n, trial);
            if samples.len() < nn::MIN_DATASET {
                return Err(Error::InsufficientData(format!(
                    "n={n}: {} records",
                    samples.len()
                )));
            }
            let (tr, va) = nn::split_indices(samples.len(), tc.split_fraction, tc.seed);
            let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
            let (train_set, val_set) = (pick(&tr), pick(&va));
            candidates.push(nn::train_split(&train_set, &val_set, &tc)?);
            splits.push((train_set, val_set));
        }
        let best = model_select(&candidates)?;
        let (model, report) = candidates.swap_remove(best);
        let (train_set, val_set) = &splits[best];
        let train_devs = nn::deviations(&model, train_set)?;
        let val_devs = nn::deviations(&model, val_set)?;

        let lin_samples = dataset.samples(n, 2)?;
        let linear = fit_linear(&lin_samples)?;
        let (linear_mean_dev, _) = linear_deviation(&linear, &lin_samples)?;

        for &target_n in predict_sizes.iter().filter(|&&t| t != n) {
            let target = dataset.samples(target_n, config.eigs)?;
            let devs = nn::deviations(&model, &target)?;
            let (lm, ls) = linear_deviation(&linear, &dataset.samples(target_n, 2)?)?;
            predictions.push(DnnPrediction {
                train_n: n,
                target_n,
                dnn_mean_dev: mean(&devs),
                dnn_std_dev: std_dev(&devs),
                linear_mean_dev: lm,
                linear_std_dev: ls,
            });
        }
        fits.push(DnnFit {
            n,
            selected_trial: best,
            model,
            report,
            train_devs,
            val_devs,
            linear_mean_dev,
        });
    }
    Ok(DnnReport {
        config: config.clone(),
        fits,
        predictions,
    })
}

/// A chart and the table it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub name: String,
    pub chart: Chart,
    pub table: ReportTable,
}

pub fn table1_figures(rows: &[Table1Row]) -> Vec<Figure> {
    let table = table1_table(rows);
    let pts = |f: fn(&Table1Row) -> f64| rows.iter().map(|r| (r.n as f64, f(r))).collect();
    let chart = Chart::line(
        "Mean deviation of spectral bounds",
        "n",
        "mean relative deviation",
        vec![
            Series::new("lower bound", pts(|r| r.mean_dev_lower)),
            Series::new("upper bound", pts(|r| r.mean_dev_upper)),
        ],
    );
    vec![Figure {
        name: "table1".into(),
        chart,
        table,
    }]
}

fn parity_name(even: bool) -> &'static str {
    if even {
        "even"
    } else {
        "odd"
    }
}

pub fn regression_figures(report: &RegressionReport) -> Vec<Figure> {
    let mut figs = Vec::new();

    let mut ms: Vec<usize> = report.in_sample.iter().map(|f| f.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let mut ns: Vec<usize> = report.in_sample.iter().map(|f| f.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let cols: Vec<String> = std::iter::once("n".to_string())
        .chain(ms.iter().map(|m| format!("m{m}")))
        .collect();
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = ReportTable::new("fig1_linear_fit", &col_refs, 4);
    for &n in &ns {
        let mut row = vec![n as f64];
        row.extend(
            ms.iter()
                .map(|&m| report.fit(n, m).map_or(f64::NAN, |f| f.mean_dev)),
        );
        t.push(row);
    }
    let series = ms
        .iter()
        .map(|&m| {
            Series::new(
                format!("top {m}"),
                ns.iter()
                    .filter_map(|&n| report.fit(n, m).map(|f| (n as f64, f.mean_dev)))
                    .collect(),
            )
        })
        .collect();
    figs.push(Figure {
        name: "fig1_linear_fit".into(),
        chart: Chart::line(
            "Linear fit on leading eigenvalues",
            "n",
            "mean deviation",
            series,
        )
        .log_y(),
        table: t,
    });

    let two: Vec<&InSampleFit> = report.in_sample.iter().filter(|f| f.m == 2).collect();
    let mut t = ReportTable::new("fig2_coefficients", &["n", "a", "b", "c"], 4);
    for f in &two {
        t.push(vec![
            f.n as f64,
            f.model.coeffs[0],
            f.model.coeffs[1],
            f.model.intercept,
        ]);
    }
    let span: Vec<f64> = two.iter().map(|f| f.n as f64).collect();
    let (lo, hi) = (
        span.iter().copied().fold(f64::MAX, f64::min),
        span.iter().copied().fold(f64::MIN, f64::max),
    );
    let mut series = vec![
        Series::new(
            "a (λ0)",
            two.iter()
                .map(|f| (f.n as f64, f.model.coeffs[0]))
                .collect(),
        ),
        Series::new(
            "b (λ1)",
            two.iter()
                .map(|f| (f.n as f64, f.model.coeffs[1]))
                .collect(),
        ),
    ];
    if !two.is_empty() {
        series.push(Series::reference("1/2", vec![(lo, 0.5), (hi, 0.5)]));
        series.push(Series::reference(
            "-1/3",
            vec![(lo, -1.0 / 3.0), (hi, -1.0 / 3.0)],
        ));
    }
    figs.push(Figure {
        name: "fig2_coefficients".into(),
        chart: Chart::line(
            "Coefficients of a·λ0 + b·λ1 + c",
            "n",
            "coefficient",
            series,
        ),
        table: t,
    });

    for even in [true, false] {
        let preds: Vec<&CrossPrediction> = report
            .predictions
            .iter()
            .filter(|p| (p.target_n % 2 == 0) == even)
            .collect();
        let mut t = ReportTable::new(
            &format!("fig3_prediction_{}", parity_name(even)),
            &["train_n", "target_n", "mean_dev", "std_dev"],
            4,
        );
        for p in &preds {
            t.push(vec![
                p.train_n as f64,
                p.target_n as f64,
                p.mean_dev,
                p.std_dev,
            ]);
        }
        let mut trains: Vec<usize> = preds.iter().map(|p| p.train_n).collect();
        trains.sort_unstable();
        trains.dedup();
        let series = trains
            .iter()
            .map(|&tn| {
                Series::new(
                    format!("trained on n={tn}"),
                    preds
                        .iter()
                        .filter(|p| p.train_n == tn)
                        .map(|p| (p.target_n as f64, p.mean_dev))
                        .collect(),
                )
            })
            .collect();
        figs.push(Figure {
            name: t.name.clone(),
            chart: Chart::line(
                &format!("Linear prediction, {} n", parity_name(even)),
                "target n",
                "mean deviation",
                series,
            ),
            table: t,
        });
    }
    figs
}

pub fn dnn_figures(report: &DnnReport) -> Vec<Figure> {
    let mut figs = Vec::new();
    for f in &report.fits {
        let tr = histogram(&f.train_devs, DEVIATION_BIN);
        let va = histogram(&f.val_devs, DEVIATION_BIN);
        let mut t = ReportTable::new(
            &format!("fig5_histogram_n{}", f.n),
            &["bin_left", "train_count", "val_count"],
            3,
        );
        for i in 0..tr.len().max(va.len()) {
            t.push(vec![
                i as f64 * DEVIATION_BIN,
                tr.get(i).map_or(0.0, |p| p.1),
                va.get(i).map_or(0.0, |p| p.1),
            ]);
        }
        figs.push(Figure {
            name: t.name.clone(),
            chart: Chart::histogram(
                &format!("Network deviations, n={}", f.n),
                "relative deviation",
                DEVIATION_BIN,
                vec![Series::new("training", tr), Series::new("validation", va)],
            ),
            table: t,
        });
    }

    let mut t = ReportTable::new(
        "fig6_in_sample",
        &[
            "n",
            "mean_train",
            "std_train",
            "mean_val",
            "std_val",
            "linear_mean",
        ],
        4,
    );
    for f in &report.fits {
        t.push(vec![
            f.n as f64,
            f.report.mean_dev_train,
            f.report.std_dev_train,
            f.report.mean_dev_val,
            f.report.std_dev_val,
            f.linear_mean_dev,
        ]);
    }
    let pts = |g: fn(&DnnFit) -> f64| report.fits.iter().map(|f| (f.n as f64, g(f))).collect();
    figs.push(Figure {
        name: "fig6_in_sample".into(),
        chart: Chart::line(
            "Network fit by size",
            "n",
            "deviation",
            vec![
                Series::new("train mean", pts(|f| f.report.mean_dev_train)),
                Series::new("train std", pts(|f| f.report.std_dev_train)),
                Series::new("validation mean", pts(|f| f.report.mean_dev_val)),
                Series::new("validation std", pts(|f| f.report.std_dev_val)),
            ],
        ),
        table: t,
    });

    for even in [true, false] {
        let preds: Vec<&DnnPrediction> = report
            .predictions
            .iter()
            .filter(|p| (p.target_n % 2 == 0) == even)
            .collect();
        let mut t = ReportTable::new(
            &format!("fig7_dnn_vs_linear_{}", parity_name(even)),
            &[
                "train_n",
                "target_n",
                "dnn_mean",
                "dnn_std",
                "linear_mean",
                "linear_std",
            ],
            4,
        );
        for p in &preds {
            t.push(vec![
                p.train_n as f64,
                p.target_n as f64,
                p.dnn_mean_dev,
                p.dnn_std_dev,
                p.linear_mean_dev,
                p.linear_std_dev,
            ]);
        }
        let mut trains: Vec<usize> = preds.iter().map(|p| p.train_n).collect();
        trains.sort_unstable();
        trains.dedup();
        let mut cmp = Vec::new();
        let mut spread = Vec::new();
        for &tn in &trains {
            let mine: Vec<&&DnnPrediction> = preds.iter().filter(|p| p.train_n == tn).collect();
            cmp.push(Series::new(
                format!("DNN n={tn}"),
                mine.iter()
                    .map(|p| (p.target_n as f64, p.dnn_mean_dev))
                    .collect(),
            ));
            cmp.push(Series::new(
                format!("LR n={tn}"),
                mine.iter()
                    .map(|p| (p.target_n as f64, p.linear_mean_dev))
                    .collect(),
            ));
            spread.push(Series::new(
                format!("mean n={tn}"),
                mine.iter()
                    .map(|p| (p.target_n as f64, p.dnn_mean_dev))
                    .collect(),
            ));
            spread.push(Series::new(
                format!("std n={tn}"),
                mine.iter()
                    .map(|p| (p.target_n as f64, p.dnn_std_dev))
                    .collect(),
            ));
        }
        let name = t.name.clone();
        figs.push(Figure {
            name: name.clone(),
            chart: Chart::line(
                &format!("Network vs linear prediction, {} n", parity_name(even)),
                "target n",
                "mean deviation",
                cmp,
            ),
            table: t.clone(),
        });
        let mut t8 = t;
        t8.name = format!("fig8_prediction_spread_{}", parity_name(even));
        figs.push(Figure {
            name: t8.name.clone(),
            chart: Chart::line(
                &format!("Network prediction statistics, {} n", parity_name(even)),
                "target n",
                "deviation",
                spread,
            ),
            table: t8,
        });
    }
    figs
}

/// Writes `<name>.svg` and `<name>.csv` per figure plus `manifest.txt`.
/// Figures with no data are skipped and listed as warnings.
pub fn emit_charts(figures: &[Figure], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut manifest = String::new();
    for fig in figures {
        if fig.chart.is_empty() {
            let _ = writeln!(manifest, "warning: {} skipped (empty series)", fig.name);
            continue;
        }
        for (ext, body) in [("svg", render_svg(&fig.chart)), ("csv", fig.table.to_csv())] {
            let path = dir.join(format!("{}.{ext}", fig.name));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            let _ = writeln!(manifest, "{}", path.file_name().unwrap().to_string_lossy());
            written.push(path);
        }
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
