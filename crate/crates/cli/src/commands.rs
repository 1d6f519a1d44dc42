use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use scpo::baseline::train_multinomial;
use scpo::conformity::ConformityMeasure;
use scpo::data::{
    add_intercept, apply_normalizer, fit_normalizer, impute_means, load_csv, load_csv_with_schema,
    load_features_csv, split, Dataset, Normalizer, SplitSpec,
};
use scpo::icp::{CalibrationScores, IcpModel, PredictionSet};
use scpo::metrics::{binomial_compare, change_in_inefficiency, evaluate_icp, ComparisonRow, EvalReport, InefficiencyMeasure};
use scpo::search::{gradient_descent, grid_search, grid_search_with_jobs, training_icp_score, GridResult, GridSpec};
use scpo::surrogate::{Hyperparams, DEFAULT_Q};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::model::{ModelFile, ModelKind, SCHEMA_VERSION};

/// Training data after imputation, normalization and intercept, plus what is
/// needed to repeat those steps on new data.
struct Prepared {
    data: Dataset,
    normalizer: Normalizer,
    raw_feature_names: Vec<String>,
}

fn load_training(input: &DataArgs) -> CliResult<Prepared> {
    let raw = load_csv(&input.data, &input.label_col)?;
    let imputed = impute_means(&raw, &[])?;
    if imputed.dropped_rows > 0 {
        eprintln!("warning: dropped {} rows with no observed features", imputed.dropped_rows);
    }
    let normalizer = fit_normalizer(&imputed.train)?;
    let data = add_intercept(&apply_normalizer(&normalizer, &imputed.train)?)?;
    Ok(Prepared {
        data,
        normalizer,
        raw_feature_names: raw.feature_names().to_vec(),
    })
}

fn model_file(
    kind: ModelKind,
    matrix: ndarray::Array2<f64>,
    prepared: &Prepared,
    label_column: &str,
    hyperparams: Option<Hyperparams>,
    ineff: InefficiencyMeasure,
) -> ModelFile {
    ModelFile {
        schema_version: SCHEMA_VERSION,
        model_kind: kind,
        matrix,
        normalizer: prepared.normalizer.clone(),
        label_column: label_column.to_string(),
        label_names: prepared.data.label_names().to_vec(),
        feature_names: prepared.raw_feature_names.clone(),
        q: hyperparams.map_or(DEFAULT_Q, |hp| hp.q),
        hyperparams,
        ineff,
        calibration_alphas: None,
    }
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let hp = Hyperparams::new(args.epsilon, args.lambda, args.gamma, args.eta, args.transform).with_iters(args.iters);
    hp.validate()?;
    if args.eta == 0.0 {
        eprintln!("warning: --eta 0 leaves the parameters at zero; the model admits labels by calibration rank only");
    }
    let prepared = load_training(&args.input)?;
    let run = gradient_descent(&prepared.data, &hp, args.ineff)?;
    if run.diverged {
        return Err(CliError::Diverged {
            iterations: run.iterations,
        });
    }
    let score = training_icp_score(&run.theta, &prepared.data, args.epsilon, args.ineff)?;
    println!("iterations: {}", run.iterations);
    println!("final loss: {}", run.final_loss());
    println!("training ICP inefficiency: {:.6}", score.ineff);
    println!("training ICP accuracy: {:.6}", score.accuracy);
    let model = model_file(
        ModelKind::ScpoLinear,
        run.theta.entries().clone(),
        &prepared,
        &args.input.label_col,
        Some(hp),
        args.ineff,
    );
    model.save(&args.out)
}

fn run_grid(train: &Dataset, grid: &GridSpec, jobs: Option<usize>) -> CliResult<GridResult> {
    Ok(match jobs {
        Some(j) => grid_search_with_jobs(train, grid, j)?,
        None => grid_search(train, grid)?,
    })
}

/// Rejects bad grid settings before any data is read.
fn check_grid(grid: &GridSpec) -> CliResult<()> {
    grid.validate()?;
    if let Some(cell) = grid.cells().first() {
        cell.validate()?;
    }
    Ok(())
}

pub fn gridsearch(args: &GridArgs) -> CliResult<()> {
    let grid = GridSpec {
        lambdas: args.lambdas.clone(),
        gammas: args.gammas.clone(),
        etas: args.etas.clone(),
        max_iters: args.iters,
        ..GridSpec::default_for(args.epsilon, args.transform, args.ineff)
    };
    check_grid(&grid)?;
    let prepared = load_training(&args.input)?;
    let result = run_grid(&prepared.data, &grid, args.jobs)?;
    if let Some(path) = &args.grid_csv {
        let file = File::create(path).map_err(CliError::io(path))?;
        let mut out = BufWriter::new(file);
        result.write_csv(&mut out).and_then(|_| out.flush()).map_err(CliError::io(path))?;
    }
    let diverged = result.cells.iter().filter(|c| c.diverged).count();
    let best = result.winner();
    println!("cells: {} ({diverged} diverged)", result.cells.len());
    println!(
        "winner: lambda={} gamma={} eta={} final loss {} training ICP inefficiency {:.6} accuracy {:.6}",
        best.hp.lambda, best.hp.gamma, best.hp.eta, best.final_loss, best.train_icp_ineff, best.train_icp_acc
    );
    let model = model_file(
        ModelKind::ScpoLinear,
        best.theta.entries().clone(),
        &prepared,
        &args.input.label_col,
        Some(best.hp),
        args.ineff,
    );
    model.save(&args.out)
}

pub fn baseline(args: &BaselineArgs) -> CliResult<()> {
    let prepared = load_training(&args.input)?;
    let fit = train_multinomial(&prepared.data, args.iters, args.tol)?;
    println!("iterations: {}", fit.iterations);
    println!("mean negative log-likelihood: {}", fit.final_nll);
    let model = model_file(
        ModelKind::Multinomial,
        fit.weights,
        &prepared,
        &args.input.label_col,
        None,
        args.ineff,
    );
    model.save(&args.out)
}

pub fn calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let mut model = ModelFile::load(&args.model)?;
    let label_col = args.label_col.as_deref().unwrap_or(&model.label_column);
    let raw = load_csv_with_schema(&args.calib, label_col, &model.schema())?;
    if raw.is_empty() {
        return Err(scpo::Error::EmptyDataset.into());
    }
    let calib = model.prepare(&raw)?;
    let scores = CalibrationScores::from_measure(&model.scorer()?, &calib)?;
    println!("calibration examples: {}", scores.len());
    model.calibration_alphas = Some(scores.sorted().to_vec());
    model.save(&args.out)
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model = ModelFile::load(&args.model)?;
    let icp = model.icp(args.epsilon)?;
    let x = model.prepare_matrix(load_features_csv(&args.data, &model.feature_names)?)?;
    let sets = icp.predict(x.view())?;

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(CliError::io(path))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let target = args.out.as_deref().unwrap_or(Path::new("<stdout>"));
    write_predictions(&mut out, &sets, args.epsilon, &model.label_names)
        .and_then(|_| out.flush())
        .map_err(CliError::io(target))
}

fn write_predictions(out: &mut dyn Write, sets: &[PredictionSet], epsilon: f64, names: &[String]) -> io::Result<()> {
    writeln!(out, "id,epsilon,labels,size")?;
    for (id, set) in sets.iter().enumerate() {
        let members: Vec<&str> = set.iter().map(|y| names[y].as_str()).collect();
        writeln!(out, "{id},{epsilon},{},{}", csv_field(&members.join("|")), set.len())?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    let a = ModelFile::load(&args.model_a)?;
    let b = ModelFile::load(&args.model_b)?;
    if a.label_names != b.label_names {
        return Err(CliError::Usage(format!(
            "models disagree on classes: {:?} vs {:?}",
            a.label_names, b.label_names
        )));
    }
    let label_col = args.labels.as_deref().unwrap_or(&a.label_column);
    let evaluate = |m: &ModelFile| -> CliResult<(EvalReport, Vec<PredictionSet>)> {
        let test = m.prepare(&load_csv_with_schema(&args.data, label_col, &m.schema())?)?;
        let icp = m.icp(args.epsilon)?;
        let sets = icp.predict(test.features())?;
        let report = EvalReport::from_sets(&sets, test.labels(), icp.n_classes(), args.epsilon, args.ineff)?;
        Ok((report, sets))
    };
    let (ra, sa) = evaluate(&a)?;
    let (rb, sb) = evaluate(&b)?;
    let test = binomial_compare(&sa, &sb)?;
    let change = change_in_inefficiency(ra.mean_ineff, rb.mean_ineff)?;

    println!("{:<8} {:>10} {:>12}", "model", "accuracy", "inefficiency");
    println!("{:<8} {:>10.4} {:>12.4}", "a", ra.accuracy, ra.mean_ineff);
    println!("{:<8} {:>10.4} {:>12.4}", "b", rb.accuracy, rb.mean_ineff);
    println!("Ch.: {change:.2}%");
    println!("wins: a {} b {} ties {}", test.wins_a, test.wins_b, sa.len() - test.wins_a - test.wins_b);
    match test.p_value {
        Some(p) => println!("p: {p:.6e}"),
        None => println!("p: n/a (all pairs tied)"),
    }
    Ok(())
}

pub fn experiment(args: &ExperimentArgs) -> CliResult<()> {
    let mut raw = load_csv(&args.input.data, &args.input.label_col)?;
    if let Some(threshold) = args.binarize_at {
        raw = binarize(&raw, threshold)?;
    }
    let spec = match &args.split {
        Some(c) => SplitSpec::new(c[0], c[1], c[2], args.seed),
        None => SplitSpec::thirds(raw.n_rows(), args.seed),
    };
    let (train, calib, test) = split(&raw, spec)?;
    let imputed = impute_means(&train, &[calib, test])?;
    let normalizer = fit_normalizer(&imputed.train)?;
    let prep = |d: &Dataset| -> CliResult<Dataset> { Ok(add_intercept(&apply_normalizer(&normalizer, d)?)?) };
    let (train, calib, test) = (prep(&imputed.train)?, prep(&imputed.others[0])?, prep(&imputed.others[1])?);
    println!(
        "rows: train {} calibration {} test {}; features {}; classes {}",
        train.n_rows(),
        calib.n_rows(),
        test.n_rows(),
        train.n_features() - 1,
        train.n_classes()
    );

    let base = train_multinomial(&train, 500, 1e-8)?;
    let name = args
        .input
        .data
        .file_stem()
        .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    let mut rows = Vec::new();
    for &eps in &args.epsilons {
        let grid = GridSpec {
            lambdas: args.lambdas.clone(),
            gammas: args.gammas.clone(),
            etas: args.etas.clone(),
            max_iters: args.iters,
            ..GridSpec::default_for(eps, args.transform, args.ineff)
        };
        check_grid(&grid)?;
        let best = run_grid(&train, &grid, args.jobs)?.into_winner();
        let (scpo_report, scpo_sets) = evaluate_sets(&best.theta, &calib, &test, eps, args.ineff)?;
        let (base_report, base_sets) = evaluate_sets(&base, &calib, &test, eps, args.ineff)?;
        rows.push(ComparisonRow {
            dataset: name.clone(),
            lambda: best.hp.lambda,
            gamma: best.hp.gamma,
            test: binomial_compare(&scpo_sets, &base_sets)?,
            scpo: scpo_report,
            baseline: base_report,
        });
    }

    println!("{}", ComparisonRow::header());
    for row in &rows {
        println!("{row}");
    }
    if let Some(path) = &args.report_csv {
        let mut text = format!("dataset,method,{}\n", EvalReport::csv_header());
        for row in &rows {
            text += &format!("{},scpo,{}\n", row.dataset, row.scpo.csv_row());
            text += &format!("{},baseline,{}\n", row.dataset, row.baseline.csv_row());
        }
        std::fs::write(path, text).map_err(CliError::io(path))?;
    }
    Ok(())
}

fn evaluate_sets<M: ConformityMeasure>(
    scorer: M,
    calib: &Dataset,
    test: &Dataset,
    eps: f64,
    ineff: InefficiencyMeasure,
) -> CliResult<(EvalReport, Vec<PredictionSet>)> {
    let icp = IcpModel::fit(scorer, calib, eps)?;
    let report = evaluate_icp(&icp, test, ineff)?;
    Ok((report, icp.predict(test.features())?))
}

fn binarize(data: &Dataset, threshold: f64) -> CliResult<Dataset> {
    let values = data
        .label_names()
        .iter()
        .map(|n| {
            n.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--binarize-at needs numeric labels, found {n:?}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let labels = data.labels().iter().map(|&l| usize::from(values[l] >= threshold)).collect();
    Ok(Dataset::new(
        data.features().to_owned(),
        labels,
        vec!["low".to_string(), "high".to_string()],
        data.feature_names().to_vec(),
    )?)
}
