use std::fmt::Write as _;
use std::io::Write;
use std::path::Path as FsPath;

use indexmap::IndexMap;
use serde::Serialize;

use super::{Cli, CliError, Command, DagCommand, DagFile, EffectArgs, FitArgs, Format, SimulateArgs};
use crate::causal::{estimate_total_effect, test_implied_independencies};
use crate::dag::{parse_dag, AdjustmentVerdict, Dag, ImpliedIndependence, NodeRole};
use crate::glm::{fit, Dataset, Family, FittedGlm, ModelSpec, Term};
use crate::predict::{
    best_subsets, cross_validate, evaluate, lasso_select, lasso_then_backward, stepwise, Direction,
    EvalReport, EvalSource, LambdaRule, LassoCv, LassoOptions, Method, Metric, SelectionResult,
    TraceEntry,
};
use crate::sim::{builtin_scenario, AnalyticValue, Sem};

pub(super) fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Dag(cmd) => cmd_dag(cmd, cli.format, out),
        Command::Fit(args) => cmd_fit(args, cli.format, cli.seed, out),
        Command::Effect(args) => cmd_effect(args, cli.format, out),
        Command::Simulate(args) => cmd_simulate(args, cli.format, cli.seed, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(CliError::io)
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::new(1, e.to_string()))?;
    s.push('\n');
    emit(out, &s)
}

fn read_text(path: &FsPath) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::new(2, format!("cannot read {}: {e}", path.display())))
}

fn read_csv(path: &FsPath) -> Result<Dataset, CliError> {
    Dataset::read_csv_path(path).map_err(|e| CliError::new(2, format!("{}: {e}", path.display())))
}

fn load_dag(file: &DagFile) -> Result<Dag, CliError> {
    let text = read_text(&file.dag)?;
    let dag = parse_dag(&text).map_err(|e| CliError::new(2, format!("{}: {e}", file.dag.display())))?;
    if file.exposure.is_none() && file.outcome.is_none() {
        return Ok(dag);
    }
    let exposure = file.exposure.as_deref().or(dag.exposure());
    let outcome = file.outcome.as_deref().or(dag.outcome());
    match (exposure, outcome) {
        (Some(x), Some(y)) => Ok(dag.with_roles(x, y)?),
        _ => Err(CliError::new(
            2,
            "both an exposure and an outcome are needed (annotate the DAG or pass --exposure and --outcome)",
        )),
    }
}

fn set_text(set: &[String]) -> String {
    format!("{{{}}}", set.join(", "))
}

// ---------------------------------------------------------------- dag

#[derive(Serialize)]
struct PathOut {
    path: String,
    nodes: Vec<String>,
    kind: &'static str,
    colliders: Vec<String>,
    open: bool,
}

#[derive(Serialize)]
struct PathsOut {
    from: String,
    to: String,
    paths: Vec<PathOut>,
}

#[derive(Serialize)]
struct OffendingOut {
    condition: u8,
    description: &'static str,
    path: String,
}

#[derive(Serialize)]
struct VerdictOut {
    set: Vec<String>,
    valid: bool,
    condition1_blocked_confounding: bool,
    condition2_no_causal_blocked: bool,
    condition3_no_collider_opened: bool,
    offending_paths: Vec<OffendingOut>,
}

impl VerdictOut {
    fn new(set: Vec<String>, v: &AdjustmentVerdict) -> Self {
        Self {
            set,
            valid: v.valid,
            condition1_blocked_confounding: v.condition1_blocked_confounding,
            condition2_no_causal_blocked: v.condition2_no_causal_blocked,
            condition3_no_collider_opened: v.condition3_no_collider_opened,
            offending_paths: v
                .offending_paths
                .iter()
                .map(|o| OffendingOut {
                    condition: o.condition.number(),
                    description: o.condition.describe(),
                    path: o.path.to_string(),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct AdjustOut {
    exposure: String,
    outcome: String,
    minimal_sets: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<VerdictOut>,
}

#[derive(Serialize)]
struct IndependenciesOut {
    independencies: Vec<ImpliedIndependence>,
}

#[derive(Serialize)]
struct TestsOut {
    alpha: f64,
    n: usize,
    tests: Vec<crate::causal::IndependenceTestResult>,
}

pub fn cmd_dag(cmd: &DagCommand, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        DagCommand::Paths {
            file,
            from,
            to,
            max_length,
        } => {
            let g = load_dag(file)?;
            let from = from
                .as_deref()
                .or(g.exposure())
                .ok_or_else(|| CliError::new(2, "no --from given and the DAG has no exposure"))?;
            let to = to
                .as_deref()
                .or(g.outcome())
                .ok_or_else(|| CliError::new(2, "no --to given and the DAG has no outcome"))?;
            let paths = g.enumerate_paths(from, to, max_length.unwrap_or(g.len()))?;
            let report = PathsOut {
                from: from.into(),
                to: to.into(),
                paths: paths
                    .iter()
                    .map(|p| {
                        Ok(PathOut {
                            path: p.to_string(),
                            nodes: p.nodes().to_vec(),
                            kind: if p.is_directed() {
                                "causal"
                            } else if p.is_backdoor() {
                                "backdoor"
                            } else {
                                "non-causal"
                            },
                            colliders: p
                                .junctions()
                                .filter(|(_, j)| *j == crate::dag::Junction::Collider)
                                .map(|(v, _)| v.to_string())
                                .collect(),
                            open: g.path_open(p, std::iter::empty::<&str>())?,
                        })
                    })
                    .collect::<Result<_, CliError>>()?,
            };
            match format {
                Format::Json => emit_json(out, &report),
                Format::Text => {
                    let mut s = format!("Paths from {} to {} ({}):\n", report.from, report.to, report.paths.len());
                    for p in &report.paths {
                        let state = if p.open { "open" } else { "blocked" };
                        let _ = writeln!(s, "  {}  [{}, {} given {{}}]", p.path, p.kind, state);
                    }
                    emit(out, &s)
                }
            }
        }
        DagCommand::Adjust { file, set } => {
            let g = load_dag(file)?;
            let (x, y) = match (g.exposure(), g.outcome()) {
                (Some(x), Some(y)) => (x.to_string(), y.to_string()),
                _ => return Err(CliError::new(2, "the DAG needs exposure and outcome annotations")),
            };
            let minimal = g.minimal_adjustment_sets()?;
            let verdict = match set {
                Some(s) => {
                    let s: Vec<String> = s.iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
                    let v = g.check_adjustment(&s)?;
                    Some((s, v))
                }
                None => None,
            };
            let report = AdjustOut {
                exposure: x.clone(),
                outcome: y.clone(),
                minimal_sets: minimal.clone(),
                verdict: verdict.as_ref().map(|(s, v)| VerdictOut::new(s.clone(), v)),
            };
            match format {
                Format::Json => emit_json(out, &report)?,
                Format::Text => {
                    let mut s = format!("Minimal adjustment sets for {x} -> {y}:\n");
                    if minimal.is_empty() {
                        s.push_str("  (none)\n");
                    }
                    for m in &minimal {
                        let _ = writeln!(s, "  {}", set_text(m));
                    }
                    if let Some(v) = &report.verdict {
                        let _ = writeln!(
                            s,
                            "\nSet {}: {}",
                            set_text(&v.set),
                            if v.valid { "valid" } else { "invalid" }
                        );
                        let (_, full) = verdict.as_ref().expect("verdict present");
                        for cond in [
                            crate::dag::Condition::BlocksConfounding,
                            crate::dag::Condition::NoCausalBlocked,
                            crate::dag::Condition::NoColliderOpened,
                        ] {
                            match full.witness(cond) {
                                Some(p) => {
                                    let _ = writeln!(s, "  {cond}: failed, path {p}");
                                }
                                None => {
                                    let _ = writeln!(s, "  condition {}: satisfied", cond.number());
                                }
                            }
                        }
                    }
                    emit(out, &s)?;
                }
            }
            if let Some((s, v)) = &verdict {
                if !v.valid {
                    let detail: Vec<String> = v
                        .offending_paths
                        .iter()
                        .map(|o| format!("{} fails, path {}", o.condition, o.path))
                        .collect();
                    return Err(CliError::new(
                        3,
                        format!("adjustment set {} is not valid: {}", set_text(s), detail.join("; ")),
                    ));
                }
            } else if minimal.is_empty() {
                return Err(CliError::new(3, format!("no valid adjustment set exists for {x} -> {y}")));
            }
            Ok(())
        }
        DagCommand::Independencies {
            file,
            max_set_size,
            data,
            alpha,
        } => {
            let g = load_dag(file)?;
            match data {
                None => {
                    let list = g.implied_independencies(*max_set_size);
                    match format {
                        Format::Json => emit_json(out, &IndependenciesOut { independencies: list }),
                        Format::Text => {
                            let mut s = String::new();
                            if list.is_empty() {
                                s.push_str("No testable independencies.\n");
                            }
                            for t in &list {
                                let _ = writeln!(s, "{t}");
                            }
                            emit(out, &s)
                        }
                    }
                }
                Some(path) => {
                    let d = read_csv(path)?;
                    let tests = test_implied_independencies(&g, &d, *alpha, *max_set_size)?;
                    let report = TestsOut {
                        alpha: *alpha,
                        n: d.n_rows(),
                        tests,
                    };
                    match format {
                        Format::Json => emit_json(out, &report),
                        Format::Text => {
                            let ok = report.tests.iter().filter(|t| t.consistent).count();
                            let mut s = format!(
                                "{ok} of {} implied independencies consistent with the data (alpha {}, n {})\n",
                                report.tests.len(),
                                report.alpha,
                                report.n
                            );
                            for t in &report.tests {
                                let _ = writeln!(
                                    s,
                                    "  {} _||_ {} | {}  r = {:.4}, z = {:.3}, p = {:.4}  {}",
                                    t.x,
                                    t.y,
                                    set_text(&t.given),
                                    t.partial_correlation,
                                    t.statistic,
                                    t.p_value,
                                    if t.consistent { "consistent" } else { "INCONSISTENT" }
                                );
                            }
                            emit(out, &s)
                        }
                    }
                }
            }
        }
        DagCommand::Classify { file, node } => {
            let g = load_dag(file)?;
            let nodes: Vec<String> = match node {
                Some(n) => vec![n.clone()],
                None => g.nodes().to_vec(),
            };
            let mut roles: IndexMap<String, Vec<NodeRole>> = IndexMap::new();
            for n in nodes {
                let r = g.classify_node(&n)?;
                roles.insert(n, r.into_iter().collect());
            }
            match format {
                Format::Json => emit_json(out, &roles),
                Format::Text => {
                    let width = roles.keys().map(String::len).max().unwrap_or(0);
                    let mut s = String::new();
                    for (n, r) in &roles {
                        let names: Vec<String> = r.iter().map(ToString::to_string).collect();
                        let _ = writeln!(s, "{n:<width$}  {}", names.join(", "));
                    }
                    emit(out, &s)
                }
            }
        }
    }
}

// ---------------------------------------------------------------- fit

#[derive(Serialize)]
struct CoefOut {
    name: String,
    estimate: f64,
    se: Option<f64>,
}

#[derive(Serialize)]
struct FitOut {
    outcome: String,
    family: Family,
    method: String,
    criterion: Option<String>,
    criterion_value: Option<f64>,
    formula: String,
    terms: Vec<String>,
    coefficients: Vec<CoefOut>,
    log_likelihood: f64,
    aic: f64,
    bic: f64,
    n: usize,
    p: usize,
    iterations: usize,
    evaluations: Vec<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lasso: Option<LassoCv>,
    trace: Vec<TraceEntry>,
    warnings: Vec<String>,
}

pub fn cmd_fit(args: &FitArgs, format: Format, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let data = read_csv(&args.data)?;
    if !data.has_column(&args.outcome) {
        return Err(CliError::new(
            2,
            format!("outcome column {} not found in {}", args.outcome, args.data.display()),
        ));
    }
    let candidates: Vec<Term> = match &args.candidates {
        Some(c) => c
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Term>().map_err(|e| CliError::new(2, e)))
            .collect::<Result<_, _>>()?,
        None => data
            .names()
            .iter()
            .filter(|n| **n != args.outcome)
            .map(Term::new)
            .collect(),
    };
    let lasso_opts = LassoOptions {
        k: args.cv.unwrap_or(10).min(data.n_rows()),
        seed,
        rule: if args.one_se { LambdaRule::OneSe } else { LambdaRule::Min },
        lambdas: None,
    };
    let (o, fam, crit) = (args.outcome.as_str(), args.family, args.criterion);
    let selection: Option<SelectionResult> = match args.select.method() {
        None => None,
        Some(Method::BestSubsets) => Some(best_subsets(&data, o, &candidates, fam, crit)?),
        Some(Method::Forward) => Some(stepwise(&data, o, &candidates, fam, Direction::Forward, crit)?),
        Some(Method::Backward) => Some(stepwise(&data, o, &candidates, fam, Direction::Backward, crit)?),
        Some(Method::Lasso) => Some(lasso_select(&data, o, &candidates, fam, &lasso_opts)?),
        Some(Method::LassoBackward) => {
            Some(lasso_then_backward(&data, o, &candidates, fam, crit, &lasso_opts)?)
        }
    };
    let spec = match &selection {
        Some(s) => s.chosen.clone(),
        None => ModelSpec::new(o, candidates.clone(), fam),
    };
    let model = fit(&data, &spec)?;

    let metric = args.metric.unwrap_or(match fam {
        Family::Binomial => Metric::Auc,
        _ => Metric::Rmse,
    });
    let mut evaluations = vec![evaluate(&model, &data, metric, EvalSource::Training)?];
    if fam == Family::Gaussian && metric != Metric::AdjustedR2 {
        evaluations.push(evaluate(&model, &data, Metric::AdjustedR2, EvalSource::Training)?);
    }
    if let Some(k) = args.cv {
        evaluations.push(cross_validate(&data, &spec, k, seed, metric)?);
    }
    if let Some(path) = &args.holdout {
        let held = read_csv(path)?;
        let id = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        evaluations.push(evaluate(&model, &held, metric, EvalSource::HeldOut { id })?);
    }

    let se = model.std_errors();
    let report = FitOut {
        outcome: o.to_string(),
        family: fam,
        method: selection.as_ref().map_or("none".into(), |s| s.method.to_string()),
        criterion: selection.as_ref().map(|s| s.criterion.clone()),
        criterion_value: selection.as_ref().map(|s| s.value),
        formula: spec.formula(),
        terms: spec.term_labels(),
        coefficients: model
            .columns
            .iter()
            .enumerate()
            .map(|(j, name)| CoefOut {
                name: name.clone(),
                estimate: model.coefficients[j],
                se: se.as_ref().map(|s| s[j]),
            })
            .collect(),
        log_likelihood: model.log_likelihood,
        aic: model.aic(),
        bic: model.bic(),
        n: model.n,
        p: model.p,
        iterations: model.convergence.iterations,
        evaluations,
        lasso: selection.as_ref().and_then(|s| s.lasso.clone()),
        trace: selection.as_ref().map_or_else(Vec::new, |s| s.trace.clone()),
        warnings: selection
            .as_ref()
            .map_or_else(Vec::new, |s| s.warnings.clone())
            .into_iter()
            .chain(model.warnings.iter().cloned())
            .collect(),
    };
    match format {
        Format::Json => emit_json(out, &report),
        Format::Text => emit(out, &fit_text(&report, &model)),
    }
}

fn source_text(s: &EvalSource) -> String {
    match s {
        EvalSource::Training => "training".into(),
        EvalSource::CrossValidation { k, seed } => format!("{k}-fold CV, seed {seed}"),
        EvalSource::HeldOut { id } => format!("held out: {id}"),
    }
}

fn fit_text(r: &FitOut, model: &FittedGlm) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Model: {}  ({} family, {} link)", r.formula, r.family, r.family.link_name());
    match (&r.criterion, r.criterion_value) {
        (Some(c), Some(v)) => {
            let failed = r.trace.iter().filter(|t| t.error.is_some()).count();
            let _ = writeln!(s, "Selection: {} by {c} = {v:.4}", r.method);
            let _ = writeln!(s, "Candidates evaluated: {} ({failed} failed)", r.trace.len());
        }
        _ => {
            let _ = writeln!(s, "Selection: none (all candidate terms)");
        }
    }
    if let Some(l) = &r.lasso {
        let _ = writeln!(
            s,
            "Lambda path: {} values from {:.6} to {:.6}",
            l.lambdas.len(),
            l.lambdas.first().copied().unwrap_or(f64::NAN),
            l.lambdas.last().copied().unwrap_or(f64::NAN)
        );
        let _ = writeln!(
            s,
            "CV-best lambda ({}): {:.6} with CV RMSE {:.6} and {} active columns",
            match l.rule {
                LambdaRule::Min => "minimum",
                LambdaRule::OneSe => "one standard error",
            },
            l.selected_lambda,
            l.cv_rmse[l.selected_index],
            l.n_active[l.selected_index]
        );
    }
    let _ = writeln!(s, "\nCoefficients ({} scale):", r.family.coefficient_scale());
    let width = r.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &r.coefficients {
        match c.se {
            Some(se) => {
                let _ = writeln!(s, "  {:<width$}  {:>12.6}  (SE {:.6})", c.name, c.estimate, se);
            }
            None => {
                let _ = writeln!(s, "  {:<width$}  {:>12.6}", c.name, c.estimate);
            }
        }
    }
    let _ = writeln!(
        s,
        "\nlogLik {:.4}  AIC {:.4}  BIC {:.4}  n {}  p {}  iterations {}",
        r.log_likelihood, r.aic, r.bic, r.n, r.p, model.convergence.iterations
    );
    let _ = writeln!(s, "\nEvaluation:");
    for e in &r.evaluations {
        let _ = writeln!(s, "  {} ({}): {:.6}", e.metric, source_text(&e.source), e.value);
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "\nWarnings:");
        for w in &r.warnings {
            let _ = writeln!(s, "  - {w}");
        }
    }
    s
}

// ---------------------------------------------------------------- effect

pub fn cmd_effect(args: &EffectArgs, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let g = load_dag(&args.file)?;
    let data = read_csv(&args.data)?;
    let set: Option<Vec<String>> = args.set.as_ref().map(|s| {
        s.iter()
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect()
    });
    let report = estimate_total_effect(&g, &data, args.family, set.as_deref())?;
    match format {
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            emit(out, &s)
        }
        Format::Text => emit(out, &report.render_text()),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateOut {
    source: String,
    n: usize,
    seed: u64,
    out: String,
    columns: Vec<String>,
    exposure: Option<String>,
    outcome: Option<String>,
    true_total_effect: Option<f64>,
    analytic: Vec<AnalyticValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

pub fn cmd_simulate(args: &SimulateArgs, format: Format, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::new(2, "--n must be at least 1"));
    }
    let (source, sem, analytic, truth) = match (&args.scenario, &args.sem) {
        (Some(name), _) => {
            let sc = builtin_scenario(name)?;
            (name.clone(), sc.sem, sc.analytic, Ok(sc.true_total_effect))
        }
        (None, Some(path)) => {
            let sem = Sem::from_json(&read_text(path)?)
                .map_err(|e| CliError::new(2, format!("{}: {e}", path.display())))?;
            let truth = sem.true_total_effect();
            (path.display().to_string(), sem, vec![], truth)
        }
        (None, None) => return Err(CliError::new(2, "pass --scenario or --sem")),
    };
    let data = sem.simulate(args.n, seed);
    let Some(path) = &args.out else {
        return data.write_csv(out).map_err(|e| CliError::new(1, e.to_string()));
    };
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::new(1, format!("cannot write {}: {e}", path.display())))?;
    data.write_csv(std::io::BufWriter::new(file))
        .map_err(|e| CliError::new(1, format!("{}: {e}", path.display())))?;

    let report = SimulateOut {
        source,
        n: args.n,
        seed,
        out: path.display().to_string(),
        columns: data.names().to_vec(),
        exposure: sem.dag().exposure().map(str::to_string),
        outcome: sem.dag().outcome().map(str::to_string),
        true_total_effect: truth.as_ref().ok().copied(),
        analytic,
        note: truth.err().map(|e| e.to_string()),
    };
    match format {
        Format::Json => emit_json(out, &report),
        Format::Text => {
            let mut s = format!(
                "Wrote {} rows ({}) to {} from {} with seed {}\n",
                report.n,
                report.columns.join(", "),
                report.out,
                report.source,
                report.seed
            );
            if let (Some(x), Some(y), Some(t)) = (&report.exposure, &report.outcome, report.true_total_effect) {
                let _ = writeln!(s, "True total effect of {x} on {y}: {t:.6}");
            }
            for a in &report.analytic {
                let _ = writeln!(
                    s,
                    "  population coefficient, {} {}: {:.6}",
                    a.description,
                    set_text(&a.adjusted_for),
                    a.value
                );
            }
            if let Some(n) = &report.note {
                let _ = writeln!(s, "Note: {n}");
            }
            emit(out, &s)
        }
    }
}
