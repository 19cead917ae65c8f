use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thinlab::diagnostics::{mismatch_sweep, TrueLaw};
use thinlab::eval::{cv_select_k, CvMethod, LossKind, Task};
use thinlab::sim::{run_selection_sim, run_split_comparison, RegressionSimConfig, SelectionSimConfig, SelectionTask, SimReport};
use thinlab::{thin_dataset, Error, Family, RandomStream, ThinMode, ThinPlan};

use crate::args::*;
use crate::config::{load_input, RunConfig};
use crate::io::{finite, loss_curve_csv, write_json, write_matrix, write_text};

/// How a failed command should exit: bad invocations get 2, failures while
/// running get 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

/// Errors while checking the invocation; unreadable or malformed files are
/// still runtime failures.
fn setup(e: Error) -> Failure {
    match e {
        Error::Io(_) | Error::Parse { .. } | Error::NonFinite(_) | Error::Support(_) => Failure::Runtime(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn runtime(e: Error) -> Failure {
    match e {
        Error::Usage(_) | Error::Plan(_) => Failure::Usage(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

type Outcome = std::result::Result<(), Failure>;

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Parsed flags for the manifest; flags that were not given are left out.
fn options<T: Serialize>(args: &T) -> serde_json::Value {
    fn prune(v: &mut serde_json::Value) {
        if let serde_json::Value::Object(m) = v {
            m.retain(|_, x| !x.is_null());
            m.values_mut().for_each(prune);
        }
    }
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    prune(&mut v);
    v
}

struct Writer {
    written: Vec<String>,
}

impl Writer {
    fn new() -> Self {
        Writer { written: Vec::new() }
    }

    fn record(&mut self, path: &Path) {
        self.written.push(path.display().to_string());
    }

    fn text(&mut self, path: PathBuf, text: &str) -> Outcome {
        write_text(&path, text).map_err(runtime)?;
        self.record(&path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Outcome {
        write_json(&path, value).map_err(runtime)?;
        self.record(&path);
        Ok(())
    }

    /// Write the manifest last so it can list every other output.
    fn manifest(mut self, path: PathBuf, mut run: RunConfig) -> Outcome {
        run.outputs = self.written.clone();
        self.json(path, &run)?;
        for p in &self.written {
            println!("wrote {p}");
        }
        Ok(())
    }
}

pub fn thin(a: &ThinArgs, argv: &[String]) -> Outcome {
    let plan = ThinPlan::two_fold(a.eps).map_err(setup)?;
    thin_to_files(&a.family, plan, a.seed, &a.io, RunConfig::new("thin", argv, a.seed, options(a)))
}

pub fn multithin(a: &MultithinArgs, argv: &[String]) -> Outcome {
    let plan = match (&a.eps, a.folds) {
        (Some(eps), None) => ThinPlan::new(eps.clone()),
        (None, Some(m)) if m >= 2 => ThinPlan::equal(m),
        (None, Some(m)) => Err(Error::Plan(format!("need at least 2 folds, got {m}"))),
        _ => Err(Error::Usage("give exactly one of --eps and --folds".into())),
    }
    .map_err(setup)?;
    thin_to_files(&a.family, plan, a.seed, &a.io, RunConfig::new("multithin", argv, a.seed, options(a)))
}

fn thin_to_files(fam: &FamilyArgs, plan: ThinPlan, seed: u64, io: &IoArgs, mut run: RunConfig) -> Outcome {
    let (x, info) = load_input(&io.input, fam.value_kind()).map_err(setup)?;
    let family = fam.resolve(x.ncols()).map_err(setup)?;
    plan.check_for(&family).map_err(setup)?;
    let mode = if family.is_multivariate() { ThinMode::Rowwise } else { ThinMode::Elementwise };
    let folds = thin_dataset(&x, &family, &plan, mode, &RandomStream::new(seed)).map_err(runtime)?;

    let mut w = Writer::new();
    for (m, f) in folds.folds.iter().enumerate() {
        let path = with_suffix(&io.out, &format!(".fold{}.csv", m + 1));
        write_matrix(&path, f).map_err(runtime)?;
        w.record(&path);
    }
    run.family = Some(family);
    run.plan = Some(plan);
    run.input = Some(info);
    w.manifest(with_suffix(&io.out, ".json"), run)
}

fn law_of(a: &DiagnoseArgs) -> Result<TrueLaw, Error> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Error::Usage(format!("--law needs --{flag}")));
    let law = match a.law {
        LawName::Gaussian => TrueLaw::Gaussian { mean: need(a.mean, "mean")?, var: need(a.var, "var")? },
        LawName::Negbin => TrueLaw::NegativeBinomial { size: need(a.size, "size")?, prob: need(a.prob, "prob")? },
        LawName::Gamma => TrueLaw::Gamma { shape: need(a.shape, "shape")?, rate: need(a.rate, "rate")? },
    };
    law.validate()?;
    Ok(law)
}

pub fn diagnose(a: &DiagnoseArgs, argv: &[String]) -> Outcome {
    let law = law_of(a).map_err(setup)?;
    let truth = law.true_nuisance();
    let lo = a.grid_min.unwrap_or(0.1 * truth);
    let hi = a.grid_max.unwrap_or(2.0 * truth);
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Failure::Usage(format!("invalid nuisance grid [{lo}, {hi}]")));
    }
    if a.grid_points == 0 {
        return Err(Failure::Usage("--grid-points must be positive".into()));
    }
    let grid: Vec<f64> = if a.grid_points == 1 {
        vec![lo]
    } else {
        (0..a.grid_points).map(|i| lo + (hi - lo) * i as f64 / (a.grid_points - 1) as f64).collect()
    };
    let rows = mismatch_sweep(law, a.eps, &grid, a.reps, &RandomStream::new(a.seed)).map_err(runtime)?;

    let mut csv = String::from("nuisance,corr_theory,corr_hat\n");
    for r in &rows {
        let cells = [finite(r.nuisance, "nuisance"), finite(r.corr_theory, "corr_theory"), finite(r.corr_hat, "corr_hat")];
        let cells: Vec<String> = cells.into_iter().collect::<Result<_, _>>().map_err(runtime)?;
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let mut w = Writer::new();
    w.text(with_suffix(&a.out, ".csv"), &csv)?;
    let mut run = RunConfig::new("diagnose", argv, a.seed, options(a));
    run.options["law_resolved"] = serde_json::to_value(law).expect("law serializes");
    w.manifest(with_suffix(&a.out, ".json"), run)
}

#[derive(Serialize)]
struct CvSummary<'a> {
    method: String,
    loss: LossKind,
    task: Task,
    selected_k: usize,
    candidate_ks: &'a [usize],
    mean_loss: &'a [f64],
    rescaled_mean_loss: Vec<f64>,
    run: &'a RunConfig,
}

pub fn cv(a: &CvArgs, argv: &[String]) -> Outcome {
    if a.kmin == 0 || a.kmax < a.kmin {
        return Err(Failure::Usage(format!("invalid K range {}..={}", a.kmin, a.kmax)));
    }
    let method = match a.method {
        MethodName::Naive => CvMethod::Naive,
        MethodName::Single => {
            if !(a.eps > 0.0 && a.eps < 1.0) {
                return Err(Failure::Usage(format!("--eps must lie in (0, 1), got {}", a.eps)));
            }
            CvMethod::Single { eps_train: a.eps }
        }
        MethodName::Multifold => {
            if a.folds < 2 {
                return Err(Failure::Usage(format!("--folds must be at least 2, got {}", a.folds)));
            }
            CvMethod::Multifold { folds: a.folds }
        }
    };
    let kind = match a.loss {
        LossName::Nll => LossKind::Nll,
        LossName::Mse => LossKind::Mse,
    };
    let (x, info) = load_input(&a.io.input, a.family.value_kind()).map_err(setup)?;
    let family = a.family.resolve(x.ncols()).map_err(setup)?;
    let task = match (a.task, &family) {
        (Some(TaskName::Pca), _) => Task::Pca,
        (Some(TaskName::Cluster), _) => Task::Cluster,
        (None, Family::Binomial { .. }) => Task::Pca,
        (None, Family::Gamma { .. } | Family::Exponential) => Task::Cluster,
        (None, f) => return Err(Failure::Usage(format!("no cross-validation task for the {} family", f.name()))),
    };
    let ks: Vec<usize> = (a.kmin..=a.kmax).collect();
    let curve = cv_select_k(&x, &family, &ks, method, kind, task, &RandomStream::new(a.seed)).map_err(runtime)?;

    let mut run = RunConfig::new("cv", argv, a.seed, options(a));
    run.family = Some(family);
    run.input = Some(info);
    let mut w = Writer::new();
    w.text(with_suffix(&a.io.out, ".csv"), &loss_curve_csv(&curve).map_err(runtime)?)?;
    let summary_path = with_suffix(&a.io.out, ".json");
    run.outputs = vec![w.written[0].clone(), summary_path.display().to_string()];
    let summary = CvSummary {
        method: method.label(),
        loss: kind,
        task,
        selected_k: curve.selected_k,
        candidate_ks: &curve.candidate_ks,
        mean_loss: &curve.mean_loss,
        rescaled_mean_loss: curve.rescale().mean_loss,
        run: &run,
    };
    w.json(summary_path, &summary)?;
    println!("selected K = {}", curve.selected_k);
    for p in &w.written {
        println!("wrote {p}");
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs, argv: &[String]) -> Outcome {
    if let Some(e) = a.eps_grid.iter().flatten().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Failure::Usage(format!("--eps-grid values must lie in (0, 1), got {e}")));
    }
    let stream = RandomStream::new(a.seed);
    let report = match a.experiment {
        Experiment::SplitIid | Experiment::SplitLeverage => {
            let leverage = a.experiment == Experiment::SplitLeverage;
            let reps = a.reps.unwrap_or(1000);
            let grid = a.eps_grid.clone().unwrap_or(if leverage { vec![0.5, 0.8] } else { vec![0.2, 0.8] });
            let cfgs: Vec<RegressionSimConfig> = grid
                .iter()
                .map(|&e| {
                    if leverage {
                        RegressionSimConfig::high_leverage(a.beta_star, e, reps)
                    } else {
                        RegressionSimConfig::iid(a.beta_star, e, reps)
                    }
                })
                .collect();
            for c in &cfgs {
                c.validate().map_err(setup)?;
            }
            let mut methods = Vec::new();
            let mut experiment = String::new();
            // every ε sees the same replicate data
            for c in &cfgs {
                let r = run_split_comparison(c, &stream).map_err(runtime)?;
                experiment = r.experiment;
                methods.extend(r.methods);
            }
            SimReport {
                experiment,
                seed: a.seed,
                n_reps: reps,
                config: json!({ "runs": cfgs }),
                methods,
            }
        }
        Experiment::Pca | Experiment::GammaSmall | Experiment::GammaLarge => {
            let task = match a.experiment {
                Experiment::Pca => SelectionTask::BinomialPca,
                Experiment::GammaSmall => SelectionTask::GammaSmall,
                _ => SelectionTask::GammaLarge,
            };
            let mut methods = Vec::new();
            if !a.no_naive {
                methods.push(CvMethod::Naive);
            }
            for &e in a.eps_grid.as_deref().unwrap_or(&[0.5, 0.8]) {
                methods.push(CvMethod::Single { eps_train: e });
            }
            match a.folds {
                0 => {}
                1 => return Err(Failure::Usage("--folds must be 0 or at least 2".into())),
                m => methods.push(CvMethod::Multifold { folds: m }),
            }
            if methods.is_empty() {
                return Err(Failure::Usage("no methods left to run".into()));
            }
            let losses = match a.loss {
                LossChoice::Nll => vec![LossKind::Nll],
                LossChoice::Mse => vec![LossKind::Mse],
                LossChoice::Both => vec![LossKind::Nll, LossKind::Mse],
            };
            let cfg = SelectionSimConfig {
                task,
                methods,
                losses,
                candidates: task.default_candidates(),
                n_reps: a.reps.unwrap_or(200),
            };
            run_selection_sim(&cfg, &stream).map_err(runtime)?
        }
    };

    let mut w = Writer::new();
    w.json(with_suffix(&a.out, ".json"), &report)?;
    if matches!(a.experiment, Experiment::SplitIid | Experiment::SplitLeverage) {
        w.text(with_suffix(&a.out, ".csv"), &split_csv(&report).map_err(runtime)?)?;
    } else {
        let (curves, hist) = selection_csvs(&report).map_err(runtime)?;
        w.text(with_suffix(&a.out, ".curves.csv"), &curves)?;
        w.text(with_suffix(&a.out, ".hist.csv"), &hist)?;
    }
    w.manifest(with_suffix(&a.out, ".manifest.json"), RunConfig::new("simulate", argv, a.seed, options(a)))
}

fn split_csv(r: &SimReport) -> thinlab::Result<String> {
    let mut out = String::from("method,eps,detection,power,power_denominator,flagged\n");
    for m in &r.methods {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.method,
            finite(m.eps.unwrap_or(f64::NAN), "eps")?,
            finite(m.detection.unwrap_or(f64::NAN), "detection")?,
            finite(m.power.unwrap_or(f64::NAN), "power")?,
            m.power_denominator.unwrap_or(0),
            m.flagged.unwrap_or(0)
        ));
    }
    Ok(out)
}

/// Long-format mean curves and selection histograms, one row per
/// (method, loss, K).
fn selection_csvs(r: &SimReport) -> thinlab::Result<(String, String)> {
    let mut curves = String::from("method,loss,K,mean_loss,mean_rescaled_loss\n");
    let mut hist = String::from("method,loss,K,count\n");
    for m in &r.methods {
        let loss = m.loss.map_or("", |l| l.name());
        let ks = m.candidates.as_deref().unwrap_or(&[]);
        let mean = m.mean_curve.as_deref().unwrap_or(&[]);
        let resc = m.mean_rescaled_curve.as_deref().unwrap_or(&[]);
        let counts = m.histogram.as_deref().unwrap_or(&[]);
        for (c, &k) in ks.iter().enumerate() {
            curves.push_str(&format!(
                "{},{loss},{k},{},{}\n",
                m.method,
                finite(mean[c], "mean_curve")?,
                finite(resc[c], "mean_rescaled_curve")?
            ));
            hist.push_str(&format!("{},{loss},{k},{}\n", m.method, counts[c]));
        }
    }
    Ok((curves, hist))
}
