//! The four subcommands: dataset generation, training, evaluation, and
//! stage inspection.

use std::path::{Path, PathBuf};

use serde::Serialize;

use pqcnn_core::data::{
    attach_angles_json, gen_bas, gen_custom_bas, load_csv, load_mnist8, save_angles_json, save_csv,
    split, DatasetSplit, Sample,
};
use pqcnn_core::train::{
    build_model_seeded, encode_sample, metrics_csv, mse_loss, predict, run_stages, train,
    train_readout, Confusion, PqcnnModel, ReadoutSearch, TrainReport,
};

use crate::config::{write_echo, ConfigEcho, ExperimentConfig};
use crate::CliError;

pub struct RunContext {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub nearest_rank1: bool,
}

impl RunContext {
    /// Validate the architecture accounting and write the resolved settings;
    /// every command goes through this before doing any work.
    fn echo(&self, command: &str) -> Result<(), CliError> {
        let (conv, dense) = self
            .config
            .architecture(self.nearest_rank1)
            .expected_params()?;
        if let Some(expected) = self.config.architecture.expected_params {
            if conv + dense != expected {
                return Err(CliError::Config(format!(
                    "architecture exposes {} trainable angles, config expects {expected}",
                    conv + dense
                )));
            }
        }
        write_echo(&ConfigEcho {
            command,
            dataset: &self.config.dataset,
            architecture: &self.config.architecture,
            train: &self.config.train,
            output_dir: &self.out_dir,
            nearest_rank1: self.nearest_rank1,
            params_conv: conv,
            params_dense: dense,
            params_total: conv + dense,
        })
    }

    /// Print the trainable-angle decomposition.
    fn print_params(&self) -> Result<(usize, usize), CliError> {
        let (conv, dense) = self
            .config
            .architecture(self.nearest_rank1)
            .expected_params()?;
        println!("parameters: {} = conv {conv} + dense {dense}", conv + dense);
        Ok((conv, dense))
    }

    /// Materialize the sample list from the config: load from file when a
    /// path is set, generate otherwise.
    fn samples(&self) -> Result<Vec<Sample<f64>>, CliError> {
        let d = &self.config.dataset;
        let (d1, d2) = self.config.image_shape();
        if let Some(path) = &d.path {
            let mut samples = if d.kind == "mnist8" {
                load_mnist8::<f64>(path, d.digit_pair)?
            } else {
                load_csv::<f64>(path, d1, d2)?
            };
            if let Some(angles) = &d.angles_path {
                attach_angles_json(&mut samples, angles)?;
            }
            return Ok(samples);
        }
        match d.kind.as_str() {
            "bas" => {
                if d.n == 0 {
                    return Err(CliError::Config("dataset.n must be positive".into()));
                }
                Ok(gen_bas::<f64>(d1, d2, d.n, d.seed))
            }
            "custom-bas" => {
                if d.n == 0 {
                    return Err(CliError::Config("dataset.n must be positive".into()));
                }
                if (d1, d2) != (4, 4) {
                    return Err(CliError::Config(
                        "custom-bas is defined for 4x4 registers".into(),
                    ));
                }
                Ok(gen_custom_bas::<f64>(d.n, d.sigma, d.seed)?)
            }
            other => Err(CliError::Config(format!(
                "dataset kind {other:?} has no generator"
            ))),
        }
    }

    fn split(&self, samples: &[Sample<f64>]) -> Result<DatasetSplit<f64>, CliError> {
        Ok(split(
            samples,
            self.config.dataset.train_n,
            self.config.dataset.test_n,
            self.config.dataset.seed,
        )?)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn cmd_generate(ctx: &RunContext) -> Result<(), CliError> {
    ctx.echo("generate")?;
    let samples = ctx.samples()?;
    let csv_path = ctx.out_dir.join("dataset.csv");
    save_csv(&samples, &csv_path)?;
    let mut wrote_angles = None;
    if samples.iter().any(|s| s.qdl_angles.is_some()) {
        let sidecar = ctx.out_dir.join("dataset_angles.json");
        save_angles_json(&samples, &sidecar)?;
        wrote_angles = Some(sidecar);
    }
    let counts = DatasetSplit::class_counts(&samples);
    println!(
        "wrote {} samples ({} stripes / label 0, {} bars / label 1) to {}",
        samples.len(),
        counts[0],
        counts[1],
        csv_path.display()
    );
    if let Some(p) = wrote_angles {
        println!("loader-angle sidecar: {}", p.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    train_loss: f64,
    train_acc: f64,
    test_loss: f64,
    test_acc: f64,
    diverged: bool,
    confusion: Confusion,
}

#[derive(Serialize)]
struct ReadoutSummary {
    strategy: String,
    train_accuracy: f64,
    test_accuracy: f64,
    candidates_evaluated: usize,
    binning: pqcnn_core::layers::ReadoutBinning,
}

#[derive(Serialize)]
struct TrainSummary {
    params_count: usize,
    params_conv: usize,
    params_dense: usize,
    decomposition: String,
    mean_train_acc: f64,
    std_train_acc: f64,
    mean_test_acc: f64,
    std_test_acc: f64,
    best_seed: u64,
    train_class_counts: [usize; 2],
    test_class_counts: [usize; 2],
    seeds: Vec<SeedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    readout_search: Option<ReadoutSummary>,
}

pub fn cmd_train(ctx: &RunContext, epochs_override: Option<usize>) -> Result<(), CliError> {
    ctx.echo("train")?;
    let (conv, dense) = ctx.print_params()?;
    let samples = ctx.samples()?;
    let data = ctx.split(&samples)?;
    let arch = ctx.config.architecture(ctx.nearest_rank1);
    let mut cfg = ctx.config.train_config();
    if let Some(epochs) = epochs_override {
        cfg.epochs = epochs;
    }

    let report: TrainReport<f64> = train(&arch, &data, &cfg)?;

    for run in &report.runs {
        ctx.write(
            &format!("metrics_seed{}.csv", run.seed),
            &metrics_csv(&run.epochs),
        )?;
        let model_json = serde_json::to_string_pretty(&run.model).expect("model serialization");
        ctx.write(&format!("model_seed{}.json", run.seed), &model_json)?;
        let fin = run.final_record();
        println!(
            "seed {}: train acc {:.4}, test acc {:.4}{}",
            run.seed,
            fin.train_acc,
            fin.test_acc,
            if run.diverged { " [diverged]" } else { "" }
        );
    }
    let best = report
        .runs
        .iter()
        .find(|r| r.seed == report.best_seed)
        .expect("best seed present");
    ctx.write(
        "model_best.json",
        &serde_json::to_string_pretty(&best.model).expect("model serialization"),
    )?;
    println!(
        "mean train acc {:.4} +- {:.4}, mean test acc {:.4} +- {:.4} (best seed {})",
        report.mean_train_acc,
        report.std_train_acc,
        report.mean_test_acc,
        report.std_test_acc,
        report.best_seed
    );

    let readout_search = match ctx.config.train.readout_search {
        Some(strategy) => Some(run_readout_search(&best.model, &data, strategy)?),
        None => None,
    };
    if let Some(rs) = &readout_search {
        println!(
            "readout search ({}): train acc {:.4}, test acc {:.4} over {} candidates",
            rs.strategy, rs.train_accuracy, rs.test_accuracy, rs.candidates_evaluated
        );
    }

    let summary = TrainSummary {
        params_count: conv + dense,
        params_conv: conv,
        params_dense: dense,
        decomposition: format!("{conv}+{dense}"),
        mean_train_acc: report.mean_train_acc,
        std_train_acc: report.std_train_acc,
        mean_test_acc: report.mean_test_acc,
        std_test_acc: report.std_test_acc,
        best_seed: report.best_seed,
        train_class_counts: DatasetSplit::class_counts(&data.train),
        test_class_counts: DatasetSplit::class_counts(&data.test),
        seeds: report
            .runs
            .iter()
            .map(|r| {
                let fin = r.final_record();
                SeedSummary {
                    seed: r.seed,
                    train_loss: fin.train_loss,
                    train_acc: fin.train_acc,
                    test_loss: fin.test_loss,
                    test_acc: fin.test_acc,
                    diverged: r.diverged,
                    confusion: r.confusion.clone(),
                }
            })
            .collect(),
        readout_search,
    };
    ctx.write(
        "summary.json",
        &serde_json::to_string_pretty(&summary).expect("summary serialization"),
    )?;

    if report.runs.iter().any(|r| r.diverged) {
        return Err(CliError::Numerical(
            "at least one seed diverged (non-finite loss); see summary.json".into(),
        ));
    }
    Ok(())
}

fn run_readout_search(
    model: &PqcnnModel<f64>,
    data: &DatasetSplit<f64>,
    strategy: pqcnn_core::train::ReadoutStrategy,
) -> Result<ReadoutSummary, CliError> {
    let dists = |samples: &[Sample<f64>]| -> Result<Vec<ndarray::Array1<f64>>, CliError> {
        samples
            .iter()
            .map(|s| Ok(run_stages(model, s)?.distribution))
            .collect()
    };
    let train_dists = dists(&data.train)?;
    let train_labels: Vec<u8> = data.train.iter().map(|s| s.label).collect();
    let basis = pqcnn_core::fock::SubspaceBasis::enumerate(model.dense_modes(), 2)
        .map_err(CliError::from)?;
    let search: ReadoutSearch = train_readout(&train_dists, &train_labels, strategy, &basis)?;

    // Score the found binning on the test set.
    let test_dists = dists(&data.test)?;
    let mut correct = 0usize;
    for (d, s) in test_dists.iter().zip(&data.test) {
        let p = pqcnn_core::layers::readout(&d.view(), &search.binning, &basis)?;
        if predict(p) == s.label {
            correct += 1;
        }
    }
    Ok(ReadoutSummary {
        strategy: format!("{strategy:?}"),
        train_accuracy: search.train_accuracy,
        test_accuracy: correct as f64 / data.test.len() as f64,
        candidates_evaluated: search.candidates_evaluated,
        binning: search.binning,
    })
}

#[derive(Serialize)]
struct EvalSummary {
    samples: usize,
    accuracy: f64,
    mean_loss: f64,
    class_counts: [usize; 2],
    confusion: Confusion,
    confusion_normalized: [[f64; 2]; 2],
}

pub fn cmd_eval(ctx: &RunContext, model_path: &Path) -> Result<(), CliError> {
    ctx.echo("eval")?;
    let model = load_model(model_path)?;
    let (d1, d2) = ctx.config.image_shape();
    if model.layout.sizes() != [d1, d2] {
        return Err(CliError::Config(format!(
            "model registers {:?} do not match the configured image shape {d1}x{d2}",
            model.layout.sizes()
        )));
    }
    let samples = ctx.samples()?;
    let data = ctx.split(&samples)?;

    let compiled = model.compile()?;
    let mut preds = Vec::with_capacity(data.test.len());
    let mut loss = 0.0;
    for s in &data.test {
        let psi = encode_sample(&model, s, &compiled.in_basis)?;
        let p = compiled.probabilities(psi.amplitudes())?;
        loss += mse_loss(p, s.label);
        preds.push(predict(p));
    }
    let labels: Vec<u8> = data.test.iter().map(|s| s.label).collect();
    let confusion = Confusion::tally(&preds, &labels);
    let summary = EvalSummary {
        samples: data.test.len(),
        accuracy: confusion.accuracy(),
        mean_loss: loss / data.test.len() as f64,
        class_counts: DatasetSplit::class_counts(&data.test),
        confusion: confusion.clone(),
        confusion_normalized: confusion.normalized_columns(),
    };
    ctx.write(
        "eval.json",
        &serde_json::to_string_pretty(&summary).expect("eval serialization"),
    )?;

    let norm = confusion.normalized_columns();
    let mut csv = String::from("pred\\true,T0,T1\n");
    for p in 0..2 {
        csv.push_str(&format!(
            "P{p},{},{}\n",
            confusion.counts[p][0], confusion.counts[p][1]
        ));
    }
    for p in 0..2 {
        csv.push_str(&format!("P{p}_norm,{},{}\n", norm[p][0], norm[p][1]));
    }
    ctx.write("confusion.csv", &csv)?;
    println!(
        "evaluated {} test samples: accuracy {:.4}, mean loss {:.5}",
        summary.samples, summary.accuracy, summary.mean_loss
    );
    println!(
        "confusion (pred x true): [[{}, {}], [{}, {}]]",
        confusion.counts[0][0],
        confusion.counts[0][1],
        confusion.counts[1][0],
        confusion.counts[1][1]
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<PqcnnModel<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read model {}: {e}", path.display())))?;
    let model: PqcnnModel<f64> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad model file {}: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}

#[derive(Serialize)]
struct InspectDump {
    stage: String,
    index: usize,
    label: u8,
    /// Occupation vectors of the basis the probabilities refer to.
    basis: Vec<String>,
    probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_probs: Option<[f64; 2]>,
}

pub fn cmd_inspect(
    ctx: &RunContext,
    index: usize,
    stage: &str,
    model_path: Option<&Path>,
) -> Result<(), CliError> {
    ctx.echo("inspect")?;
    const STAGES: [&str; 5] = ["qdl", "conv", "pooling", "dense", "readout"];
    if !STAGES.contains(&stage) {
        return Err(CliError::Config(format!(
            "unknown stage {stage:?} (expected one of {STAGES:?})"
        )));
    }
    let samples = ctx.samples()?;
    let sample = samples.get(index).ok_or_else(|| {
        CliError::Data(format!(
            "sample index {index} out of range (dataset has {})",
            samples.len()
        ))
    })?;
    let model = match model_path {
        Some(p) => load_model(p)?,
        None => {
            let arch = ctx.config.architecture(ctx.nearest_rank1);
            build_model_seeded::<f64>(
                &arch,
                ctx.config.train.init_max_angle,
                ctx.config.train.seed,
            )?
        }
    };
    let trace = run_stages(&model, sample)?;
    let (basis_states, probabilities, class_probs) = match stage {
        "qdl" => (
            basis_labels(trace.qdl.basis()),
            trace.qdl.probabilities().to_vec(),
            None,
        ),
        "conv" => (
            basis_labels(trace.conv.basis()),
            trace.conv.probabilities().to_vec(),
            None,
        ),
        "pooling" => (
            basis_labels(trace.pooled.basis()),
            pqcnn_core::layers::measure_distribution(&trace.pooled).to_vec(),
            None,
        ),
        "dense" => (
            basis_labels(trace.dense.basis()),
            trace.distribution.to_vec(),
            None,
        ),
        "readout" => (
            basis_labels(trace.dense.basis()),
            trace.distribution.to_vec(),
            Some(trace.class_probs),
        ),
        _ => unreachable!(),
    };
    let total: f64 = probabilities.iter().sum();
    let dump = InspectDump {
        stage: stage.to_string(),
        index,
        label: sample.label,
        basis: basis_states,
        probabilities,
        class_probs,
    };
    let json = serde_json::to_string_pretty(&dump).expect("inspect serialization");
    let path = ctx.write(&format!("inspect_{stage}_{index}.json"), &json)?;
    println!(
        "stage {stage} of sample {index} (label {}): {} basis states, total probability {total:.6}",
        sample.label,
        dump.basis.len()
    );
    if let Some(p) = dump.class_probs {
        println!("class probabilities: [{:.6}, {:.6}]", p[0], p[1]);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn basis_labels(basis: &pqcnn_core::fock::SubspaceBasis) -> Vec<String> {
    basis.states().iter().map(|s| s.to_string()).collect()
}
