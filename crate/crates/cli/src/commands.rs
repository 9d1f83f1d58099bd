//! Subcommand implementations. Each writes its artifacts into the output
//! directory and returns their file names.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use obliq::data::{export_beta_image, export_leaf_map, read_pgm, sliding_window_features, Border};
use obliq::{predict_class, Model, TrainReport};

use crate::args::{Command, DataArgs, EvalArgs, ReplayArgs, SweepArgs, TrainArgs, VisualizeArgs};
use crate::manifest::{sha256_file, FileDigest, Manifest, FILE_NAME};
use crate::pipeline::{depth_sweep, fit, prepare, select_epochs};
use crate::source::align_labels;
use crate::ReproducibilityError;

/// Run a command, then record its manifest when it has an output directory.
pub fn execute(command: &Command) -> anyhow::Result<()> {
    if let Command::Replay(args) = command {
        return replay(args);
    }
    let (out, artifacts) = match command {
        Command::Train(a) => (Some(a.out.clone()), train(a)?),
        Command::Eval(a) => (a.out.clone(), eval(a)?),
        Command::DepthSweep(a) => (Some(a.out.clone()), sweep(a)?),
        Command::Visualize(a) => (Some(a.out.clone()), visualize(a)?),
        Command::Replay(_) => unreachable!(),
    };
    if let Some(out) = out {
        write_manifest(command, &out, &artifacts)?;
    }
    Ok(())
}

fn input_files(command: &Command) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = Vec::new();
    match command {
        Command::Train(a) => {
            files.extend(a.data.dataset.files().into_iter().map(Path::to_path_buf));
            if let Some(t) = &a.data.test {
                files.extend(t.files().into_iter().map(Path::to_path_buf));
            }
        }
        Command::DepthSweep(a) => {
            files.extend(a.data.dataset.files().into_iter().map(Path::to_path_buf));
            if let Some(t) = &a.data.test {
                files.extend(t.files().into_iter().map(Path::to_path_buf));
            }
        }
        Command::Eval(a) => {
            files.push(a.model.clone());
            files.extend(a.dataset.files().into_iter().map(Path::to_path_buf));
        }
        Command::Visualize(a) => {
            files.push(a.model.clone());
            files.extend(a.leaf_map.iter().cloned());
        }
        Command::Replay(_) => {}
    }
    files
}

fn write_manifest(command: &Command, out: &Path, artifacts: &[String]) -> anyhow::Result<()> {
    let inputs = input_files(command)
        .iter()
        .map(|p| FileDigest::of(p, p.display().to_string()))
        .collect::<std::io::Result<Vec<_>>>()?;
    let outputs = artifacts
        .iter()
        .map(|name| FileDigest::of(&out.join(name), name.clone()))
        .collect::<std::io::Result<Vec<_>>>()?;
    Manifest::new(command.clone(), inputs, outputs).save(&out.join(FILE_NAME))
}

fn with_out(command: &Command, out: PathBuf) -> anyhow::Result<Command> {
    let mut c = command.clone();
    match &mut c {
        Command::Train(a) => a.out = out,
        Command::DepthSweep(a) => a.out = out,
        Command::Visualize(a) => a.out = out,
        Command::Eval(a) => a.out = Some(out),
        Command::Replay(_) => bail!(obliq::Error::Format("a manifest cannot record a replay".into())),
    }
    Ok(c)
}

fn replay(args: &ReplayArgs) -> anyhow::Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    for input in &manifest.inputs {
        let found = sha256_file(Path::new(&input.path)).with_context(|| format!("reading input {}", input.path))?;
        if found != input.sha256 {
            bail!(ReproducibilityError(format!(
                "input {} changed since the recorded run",
                input.path
            )));
        }
    }
    let command = with_out(&manifest.command, args.out.clone())?;
    execute(&command)?;
    let mut differing = Vec::new();
    for artifact in &manifest.artifacts {
        let found = sha256_file(&args.out.join(&artifact.path))?;
        let status = if found == artifact.sha256 {
            "identical"
        } else {
            "differs"
        };
        println!("{status} {}", artifact.path);
        if found != artifact.sha256 {
            differing.push(artifact.path.clone());
        }
    }
    if !differing.is_empty() {
        bail!(ReproducibilityError(format!(
            "artifacts differ: {}",
            differing.join(", ")
        )));
    }
    Ok(())
}

fn data_context(data: &DataArgs) -> String {
    match &data.test {
        Some(t) => format!("loading {} and {}", data.dataset, t),
        None => format!("loading {}", data.dataset),
    }
}

fn create_dir(out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn train(args: &TrainArgs) -> anyhow::Result<Vec<String>> {
    create_dir(&args.out)?;
    let prepared = prepare(&args.data, args.model.seed).with_context(|| data_context(&args.data))?;
    let mut growth = args.model.growth_config();
    growth.validate()?;
    growth.stump.validate(prepared.train.dim())?;
    let refine = !args.model.no_finetune;
    let mut artifacts = Vec::new();

    if let Some(candidates) = &args.epochs_sweep {
        let (best, scores) = select_epochs(&prepared.train, candidates, &growth, refine, args.validation_split)?;
        let mut w = csv_writer(&args.out.join("epochs_sweep.csv"))?;
        w.write_record(["epochs", "validation_accuracy", "selected"])?;
        for (e, acc) in &scores {
            w.write_record([e.to_string(), acc.to_string(), u8::from(*e == best).to_string()])?;
        }
        w.flush()?;
        artifacts.push("epochs_sweep.csv".to_string());
        println!("selected {best} epochs");
        growth.stump.epochs = best;
    }

    let result = fit(&prepared.train, &prepared.test, &growth, refine)?;
    let model = Model::new(
        result.tree.clone(),
        prepared.labels.clone(),
        prepared.normalization.clone(),
    )?;
    model.save(args.out.join("model.txt"))?;
    artifacts.push("model.txt".into());

    let mut w = csv_writer(&args.out.join("training.csv"))?;
    w.write_record(TrainReport::CSV_HEADER)?;
    for (node, report) in &result.trace.stump_reports {
        report.write_csv_rows(&mut w, &format!("stump-{node}"), args.model.timing)?;
    }
    if let Some((report, _)) = &result.finetune {
        report.write_csv_rows(&mut w, "finetune", args.model.timing)?;
    }
    w.flush()?;
    artifacts.push("training.csv".into());

    result.trace.write_csv(fs::File::create(args.out.join("growth.csv"))?)?;
    artifacts.push("growth.csv".into());

    let final_acc = result.accuracies();
    let mut rows = vec![
        ("train_samples", prepared.train.len().to_string()),
        ("test_samples", prepared.test.len().to_string()),
        ("leaves", result.tree.num_leaves().to_string()),
        ("depth", result.tree.depth().to_string()),
        ("epochs", growth.stump.epochs.to_string()),
        ("greedy_train_accuracy", result.greedy.train.to_string()),
        ("greedy_test_accuracy", result.greedy.test.to_string()),
    ];
    if result.finetune.is_some() {
        rows.push(("finetuned_train_accuracy", final_acc.train.to_string()));
        rows.push(("finetuned_test_accuracy", final_acc.test.to_string()));
    }
    write_metrics(&args.out.join("metrics.csv"), &rows)?;
    artifacts.push("metrics.csv".into());

    println!(
        "{} leaves, depth {}: train accuracy {:.4}, test accuracy {:.4}",
        result.tree.num_leaves(),
        result.tree.depth(),
        final_acc.train,
        final_acc.test
    );
    Ok(artifacts)
}

fn write_metrics(path: &Path, rows: &[(&str, String)]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([*k, v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

fn eval(args: &EvalArgs) -> anyhow::Result<Vec<String>> {
    let model = Model::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let (raw, labels) = args
        .dataset
        .load(Some(&model.labels), args.samples, args.seed)
        .with_context(|| format!("loading {}", args.dataset))?;
    let (raw, merged) = align_labels(&raw, &labels, &model.labels)?;
    if merged.len() != model.labels.len() {
        let unknown: Vec<&str> = merged.tokens()[model.labels.len()..]
            .iter()
            .map(String::as_str)
            .collect();
        bail!(obliq::Error::InvalidArgument(format!(
            "labels not known to the model: {}",
            unknown.join(" ")
        )));
    }
    if raw.is_empty() {
        bail!(obliq::Error::InvalidArgument("dataset is empty".into()));
    }
    let data = model.prepare(&raw)?;
    let k = model.labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0usize;
    for (x, &y) in data.rows().zip(data.labels()) {
        let c = predict_class(&model.tree, x)?;
        confusion[y][c] += 1;
        correct += usize::from(c == y);
    }
    let acc = correct as f64 / data.len() as f64;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "accuracy {acc} ({correct}/{})", data.len())?;
    writeln!(out, "true\\predicted {}", model.labels.tokens().join(" "))?;
    for (t, row) in confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        writeln!(out, "{} {}", model.labels.token(t), cells.join(" "))?;
    }

    let Some(dir) = &args.out else {
        return Ok(Vec::new());
    };
    create_dir(dir)?;
    write_metrics(
        &dir.join("metrics.csv"),
        &[
            ("samples", data.len().to_string()),
            ("correct", correct.to_string()),
            ("accuracy", acc.to_string()),
        ],
    )?;
    let mut w = csv_writer(&dir.join("confusion.csv"))?;
    w.write_record(["true", "predicted", "count"])?;
    for (t, row) in confusion.iter().enumerate() {
        for (p, n) in row.iter().enumerate() {
            w.write_record([model.labels.token(t), model.labels.token(p), &n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(vec!["metrics.csv".into(), "confusion.csv".into()])
}

fn sweep(args: &SweepArgs) -> anyhow::Result<Vec<String>> {
    if args.depths.is_empty() {
        bail!(obliq::Error::InvalidArgument("depth list is empty".into()));
    }
    create_dir(&args.out)?;
    let prepared = prepare(&args.data, args.model.seed).with_context(|| data_context(&args.data))?;
    let growth = args.model.growth_config();
    growth.stump.validate(prepared.train.dim())?;
    let rows = depth_sweep(&prepared.train, &prepared.test, &args.depths, &growth);
    let mut w = csv_writer(&args.out.join("depth_sweep.csv"))?;
    w.write_record([
        "depth",
        "greedy_train_accuracy",
        "greedy_test_accuracy",
        "finetuned_train_accuracy",
        "finetuned_test_accuracy",
        "error",
    ])?;
    for row in &rows {
        match &row.outcome {
            Ok((g, f)) => {
                println!(
                    "depth {}: greedy test {:.4}, finetuned test {:.4}",
                    row.depth, g.test, f.test
                );
                w.write_record([
                    row.depth.to_string(),
                    g.train.to_string(),
                    g.test.to_string(),
                    f.train.to_string(),
                    f.test.to_string(),
                    String::new(),
                ])?;
            }
            Err(e) => {
                eprintln!("depth {}: {e}", row.depth);
                let mut rec = vec![row.depth.to_string()];
                rec.extend(std::iter::repeat_n(String::new(), 4));
                rec.push(e.clone());
                w.write_record(rec)?;
            }
        }
    }
    w.flush()?;
    Ok(vec!["depth_sweep.csv".into()])
}

fn visualize(args: &VisualizeArgs) -> anyhow::Result<Vec<String>> {
    let model = Model::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let tree = &model.tree;
    let (h, w) = (args.image_shape.height, args.image_shape.width);
    if h * w != tree.feature_dim() {
        bail!(obliq::Error::InvalidArgument(format!(
            "image shape {} has {} pixels but the model has {} features",
            args.image_shape,
            h * w,
            tree.feature_dim()
        )));
    }
    create_dir(&args.out)?;
    let mut artifacts = Vec::new();
    for (i, &node) in tree.split_order().iter().enumerate() {
        let name = format!("split_node{node}_depth{}.pgm", tree.node_depth(node));
        export_beta_image(tree.split_beta(i), h, w, args.out.join(&name))?;
        artifacts.push(name);
    }

    let mut wr = csv_writer(&args.out.join("leaves.csv"))?;
    let mut header = vec!["leaf".to_string(), "node".to_string()];
    header.extend(model.labels.tokens().iter().cloned());
    wr.write_record(&header)?;
    for leaf in 0..tree.num_leaves() {
        let mut rec = vec![leaf.to_string(), tree.leaf_node(leaf).to_string()];
        rec.extend(tree.leaf_pi(leaf).iter().map(f64::to_string));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    artifacts.push("leaves.csv".into());

    if let Some(image_path) = &args.leaf_map {
        if h != w || h % 2 == 0 {
            bail!(obliq::Error::InvalidArgument(format!(
                "leaf maps need an odd square window, got {}",
                args.image_shape
            )));
        }
        let border: Border = args.border.parse()?;
        let image = read_pgm(image_path)?;
        let grid = image.to_unit_grid();
        let pixels = sliding_window_features(&grid, image.height(), image.width(), h, border, None)?;
        let pixels = model.prepare(&pixels)?;
        export_leaf_map(
            tree,
            &pixels,
            image.height(),
            image.width(),
            args.out.join("leaf_map.pgm"),
        )?;
        artifacts.push("leaf_map.pgm".into());
    }
    println!("wrote {} files to {}", artifacts.len(), args.out.display());
    Ok(artifacts)
}
