//! Config-driven orchestration: load, filter, pretrain, fine-tune,
//! synthesize, select, train, evaluate and ablate.
//!
//! Every command recomputes the cheap deterministic stages (load, split,
//! encode, filter) and reads the expensive artifacts of earlier commands
//! from the output directory, so `run` and a chain of single commands
//! produce the same files.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{stage_seed, PipelineConfig, StageToggles, SynthesisConfig};
pub use manifest::{Manifest, StageTiming};

use crate::archive::{self, sha256_hex, ArchiveKind};
use crate::boruta::boruta_select;
use crate::data::{
    load_dataset, preprocess, split_stratified, Dataset, DatasetSchema, PreprocessPlan, Provenance,
};
use crate::error::{Error, Result};
use crate::filter::{filter_minority, FilterOutput};
use crate::gan::{
    build_gan, default_synthesis_count, finetune, finetune_from_scratch, pretrain, synthesize_encoded, GanArchive,
    GanConfig, GanModel, TrainTrace,
};
use crate::gbdt::{fit, Ensemble};
use crate::metrics::{ablation_report, evaluate, AblationReport, EvalReport};

/// Loaded, split, encoded and filtered data.
pub struct Prepared {
    pub schema: DatasetSchema,
    pub plan: PreprocessPlan,
    pub train: Dataset,
    pub test: Dataset,
    pub filtered: FilterOutput<Dataset>,
}

/// Trained classifier and the encoded columns it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub selected: Vec<usize>,
    pub ensemble: Ensemble,
}

impl Classifier {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.ensemble.predict_dataset(&data.select_features(&self.selected)?)
    }
}

pub struct FinetuneResult {
    pub class: usize,
    pub model: GanModel,
    pub trace: TrainTrace,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out: PathBuf,
    pub eval: Option<EvalReport>,
    pub ablation: Option<AblationReport>,
    pub manifest: Manifest,
    /// Content hash of the classifier archive.
    pub model_hash: Option<String>,
}

/// Class name usable as a file stem.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    serde_json::to_vec_pretty(value).map_err(|e| Error::Archive(e.to_string()))
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    command: String,
    seeds: BTreeMap<String, u64>,
    timings: Vec<StageTiming>,
    artifacts: BTreeMap<String, String>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, command: &str) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            command: command.into(),
            seeds: BTreeMap::new(),
            timings: Vec::new(),
            artifacts: BTreeMap::new(),
        })
    }

    pub fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn seed(&mut self, stage: &str) -> u64 {
        let s = stage_seed(self.cfg.seed, stage);
        self.seeds.insert(stage.into(), s);
        s
    }

    fn timed<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self).map_err(|e| e.in_stage(stage));
        self.timings.push(StageTiming {
            stage: stage.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.cfg.out.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.artifacts.insert(rel.into(), sha256_hex(bytes));
        Ok(())
    }

    fn write_archive<T: Serialize>(&mut self, rel: &str, kind: ArchiveKind, value: &T) -> Result<()> {
        let bytes = archive::encode(kind, value)?;
        self.write(rel, &bytes)
    }

    fn read_archive<T: serde::de::DeserializeOwned>(&self, rel: &str, kind: ArchiveKind) -> Result<T> {
        archive::read(&self.cfg.out.join(rel), kind)
    }

    fn read_gan(&self, path: &Path) -> Result<GanModel> {
        GanModel::from_archive(GanArchive::read(path)?, &self.cfg.gan)
    }

    fn gan_config(&self, seed: u64, stop_delta: f64) -> GanConfig {
        GanConfig {
            seed,
            stop_delta,
            ..self.cfg.gan.clone()
        }
    }

    /// Load, split, encode and filter. Writes the plan, census and routing.
    pub fn prepare(&mut self) -> Result<Prepared> {
        let split_seed = self.seed("split");
        let prepared = self.timed("load", |p| {
            let schema = DatasetSchema::from_file(p.cfg.schema_path())?;
            let raw = load_dataset(p.cfg.train_path(), &schema)?;
            let (raw_train, raw_test) = match &p.cfg.test {
                Some(path) => (raw, load_dataset(path, &schema)?),
                None => split_stratified(&raw, p.cfg.train_fraction, split_seed)?,
            };
            let (train, plan) = preprocess(&raw_train, None)?;
            let (test, _) = preprocess(&raw_test, Some(&plan))?;
            Ok((schema, plan, train, test))
        })?;
        let (schema, plan, train, test) = prepared;
        let filtered = self.timed("filter", |p| {
            let filtered = filter_minority(&train, p.cfg.gamma)?;
            p.write_archive("plan.bin", ArchiveKind::Plan, &plan)?;
            p.write("census.json", &json(&filtered.census)?)?;
            p.write("census.csv", filtered.census.to_csv().as_bytes())?;
            let routing = RoutingReport::new(&filtered);
            p.write("filter.json", &json(&routing)?)?;
            p.write("filter.csv", routing.to_csv().as_bytes())?;
            Ok(filtered)
        })?;
        Ok(Prepared {
            schema,
            plan,
            train,
            test,
            filtered,
        })
    }

    fn fresh_model(&mut self, p: &Prepared) -> Result<GanModel> {
        let seed = self.seed("pretrain");
        build_gan(p.train.width, &self.gan_config(seed, self.cfg.gan.stop_delta))
    }

    pub fn pretrain(&mut self, p: &Prepared) -> Result<GanModel> {
        let fresh = self.fresh_model(p)?;
        let cfg = self.gan_config(self.seeds["pretrain"], self.cfg.gan.stop_delta);
        self.timed("pretrain", |s| {
            let (model, trace) = pretrain(fresh, &p.filtered.normal, &cfg)?;
            s.write_archive("gan/pretrained.bin", ArchiveKind::Gan, &model.archive())?;
            s.write("gan/pretrained_trace.csv", trace.to_csv().as_bytes())?;
            s.write("gan/pretrained_trace.json", &json(&trace)?)?;
            Ok(model)
        })
    }

    pub fn load_pretrained(&self) -> Result<GanModel> {
        let path = self.cfg.out.join("gan/pretrained.bin");
        self.read_gan(&path).map_err(|e| e.in_stage("pretrain"))
    }

    /// Fine-tune one model per minority class, from `pretrained` or, when
    /// `None`, from the fresh initialization. Artifacts go under `dir`.
    pub fn finetune(&mut self, p: &Prepared, pretrained: Option<&GanModel>, dir: &str) -> Result<Vec<FinetuneResult>> {
        let fresh = match pretrained {
            Some(_) => None,
            None => Some(self.fresh_model(p)?),
        };
        let classes: Vec<usize> = p.filtered.minority_classes();
        let seeds: Vec<u64> = classes
            .iter()
            .map(|&c| self.seed(&format!("finetune:{}", p.train.class_names[c])))
            .collect();
        self.timed("finetune", |s| {
            let mut out = Vec::new();
            for ((class, data), seed) in p.filtered.minority.iter().zip(seeds) {
                let cfg = s.gan_config(seed, s.cfg.finetune_stop_delta);
                let (model, trace) = match (pretrained, &fresh) {
                    (Some(pre), _) => finetune(pre, data, &cfg)?,
                    (None, Some(f)) => finetune_from_scratch(f.clone(), data, &cfg)?,
                    (None, None) => unreachable!(),
                };
                let name = slug(&p.train.class_names[*class]);
                s.write_archive(&format!("{dir}/{name}.bin"), ArchiveKind::Gan, &model.archive())?;
                s.write(&format!("{dir}/{name}_trace.csv"), trace.to_csv().as_bytes())?;
                s.write(&format!("{dir}/{name}_trace.json"), &json(&trace)?)?;
                out.push(FinetuneResult {
                    class: *class,
                    model,
                    trace,
                });
            }
            Ok(out)
        })
    }

    pub fn load_finetuned(&self, p: &Prepared, dir: &str) -> Result<Vec<GanModel>> {
        p.filtered
            .minority_classes()
            .iter()
            .map(|&c| {
                let path = self.cfg.out.join(format!("{dir}/{}.bin", slug(&p.train.class_names[c])));
                self.read_gan(&path)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("finetune"))
    }

    /// Synthetic rows per minority class, tagged `Synthetic`.
    pub fn synthesize(&mut self, p: &Prepared, models: &[GanModel], dir: &str) -> Result<Vec<Dataset>> {
        let classes = p.filtered.minority_classes();
        let seeds: Vec<u64> = classes
            .iter()
            .map(|&c| self.seed(&format!("synthesize:{}", p.train.class_names[c])))
            .collect();
        self.timed("synthesize", |s| {
            let mut out = Vec::new();
            for ((&class, model), seed) in classes.iter().zip(models).zip(seeds) {
                let n_class = p.filtered.census.count(class);
                let mut n = default_synthesis_count(p.filtered.census.normal_count, n_class, s.cfg.gamma);
                if let Some(cap) = s.cfg.synthesis.max_rows_per_class {
                    n = n.min(cap);
                }
                let features = synthesize_encoded(model, n, seed)?;
                let mut data = Dataset::new(
                    features,
                    p.train.width,
                    vec![class; n],
                    p.train.feature_names.clone(),
                    p.train.class_names.clone(),
                    p.train.normal_class,
                )?;
                data.provenance = vec![Provenance::Synthetic; n];
                let name = slug(&p.train.class_names[class]);
                s.write_archive(&format!("{dir}/{name}.bin"), ArchiveKind::Dataset, &data)?;
                let raw = p.plan.inverse(
                    &data.features,
                    data.labels.clone(),
                    data.class_names.clone(),
                    data.normal_class,
                    Provenance::Synthetic,
                )?;
                s.write(&format!("{dir}/{name}.csv"), raw_csv(&raw, &p.schema).as_bytes())?;
                out.push(data);
            }
            Ok(out)
        })
    }

    pub fn load_synthesized(&self, p: &Prepared, dir: &str) -> Result<Vec<Dataset>> {
        p.filtered
            .minority_classes()
            .iter()
            .map(|&c| {
                let rel = format!("{dir}/{}.bin", slug(&p.train.class_names[c]));
                self.read_archive(&rel, ArchiveKind::Dataset)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("synthesize"))
    }

    /// Augment, select features and fit the classifier; files go to `prefix`.
    pub fn train(&mut self, p: &Prepared, synthetic: &[Dataset], prefix: &str) -> Result<Classifier> {
        let boruta_seed = self.seed("boruta");
        let boost_seed = self.seed("boost");
        let augmented = self.timed("augment", |s| {
            let mut data = p.train.clone();
            if !s.cfg.stages.skip_augment {
                for syn in synthetic {
                    data = data.concat(syn)?;
                }
            }
            Ok(data)
        })?;
        let selected = self.timed("select", |s| {
            if s.cfg.stages.skip_boruta {
                return Ok((0..augmented.width).collect());
            }
            let sample = match s.cfg.boruta.max_rows {
                Some(m) if m < augmented.rows() => {
                    split_stratified(&augmented, m as f64 / augmented.rows() as f64, boruta_seed)?.0
                }
                _ => augmented.clone(),
            };
            let params = crate::gbdt::BoostParams {
                seed: boruta_seed,
                ..s.cfg.boruta.boost.clone()
            };
            let decision = boruta_select(&sample, s.cfg.boruta.rounds, s.cfg.boruta.alpha, &params, boruta_seed)?;
            s.write(&format!("{prefix}boruta.json"), &json(&decision)?)?;
            s.write(&format!("{prefix}boruta.csv"), decision.to_csv().as_bytes())?;
            let mut selected = decision.selected(s.cfg.boruta.include_tentative);
            if selected.is_empty() {
                selected = (0..augmented.width).collect();
            }
            Ok(selected)
        })?;
        self.timed("train", |s| {
            let data = augmented.select_features(&selected)?;
            let params = crate::gbdt::BoostParams {
                seed: boost_seed,
                ..s.cfg.boost.clone()
            };
            let clf = Classifier {
                selected,
                ensemble: fit(&data, &params)?,
            };
            s.write_archive(&format!("{prefix}model.bin"), ArchiveKind::Ensemble, &clf)?;
            s.write(&format!("{prefix}importance.csv"), clf.ensemble.importance_csv().as_bytes())?;
            Ok(clf)
        })
    }

    pub fn load_classifier(&self, prefix: &str) -> Result<Classifier> {
        self.read_archive(&format!("{prefix}model.bin"), ArchiveKind::Ensemble)
            .map_err(|e| e.in_stage("train"))
    }

    /// Score the classifier on the real test rows.
    pub fn evaluate(&mut self, p: &Prepared, clf: &Classifier, prefix: &str) -> Result<EvalReport> {
        self.timed("evaluate", |s| {
            if p.test.provenance.iter().any(|&v| v != Provenance::Real) {
                return Err(Error::Schema("synthetic rows in the test set".into()));
            }
            let predicted = clf.predict(&p.test)?;
            let report =
                evaluate(&predicted, &p.test.labels, p.test.num_classes())?.with_names(&p.test.class_names);
            s.write(&format!("{prefix}eval.json"), &json(&report)?)?;
            s.write(&format!("{prefix}eval.csv"), report.to_csv().as_bytes())?;
            s.write(&format!("{prefix}confusion.csv"), report.confusion_csv().as_bytes())?;
            Ok(report)
        })
    }

    fn pretrained_or_none(&mut self, p: &Prepared) -> Result<Option<GanModel>> {
        if self.cfg.stages.skip_pretrain {
            Ok(None)
        } else {
            self.pretrain(p).map(Some)
        }
    }

    /// Every stage in order.
    pub fn run(&mut self) -> Result<RunArtifacts> {
        let p = self.prepare()?;
        let pretrained = self.pretrained_or_none(&p)?;
        let tuned = self.finetune(&p, pretrained.as_ref(), "gan/finetuned")?;
        let models: Vec<GanModel> = tuned.into_iter().map(|t| t.model).collect();
        let synthetic = self.synthesize(&p, &models, "synth")?;
        let clf = self.train(&p, &synthetic, "")?;
        let eval = self.evaluate(&p, &clf, "")?;
        self.finish(Some(eval), None, Some(&clf))
    }

    /// Fine-tune every minority class from the pretrained model and from
    /// the fresh initialization and compare; with `ablation_metrics`, also
    /// train and evaluate the pipeline on each variant's synthetic rows.
    pub fn ablate(&mut self) -> Result<RunArtifacts> {
        let p = self.prepare()?;
        let pretrained = match self.load_pretrained() {
            Ok(m) => {
                self.seed("pretrain");
                m
            }
            Err(_) => self.pretrain(&p)?,
        };
        let with = self.finetune(&p, Some(&pretrained), "ablation/with/gan")?;
        let without = self.finetune(&p, None, "ablation/without/gan")?;
        let names = &p.train.class_names;
        let traces = |runs: &[FinetuneResult]| -> BTreeMap<String, TrainTrace> {
            runs.iter().map(|r| (names[r.class].clone(), r.trace.clone())).collect()
        };
        let (tw, two) = (traces(&with), traces(&without));
        let mut first: Option<Classifier> = None;
        let reports = if self.cfg.ablation_metrics {
            let mut evals = Vec::new();
            for (runs, tag) in [(&with, "with"), (&without, "without")] {
                let models: Vec<GanModel> = runs.iter().map(|r| r.model.clone()).collect();
                let synthetic = self.synthesize(&p, &models, &format!("ablation/{tag}/synth"))?;
                let clf = self.train(&p, &synthetic, &format!("ablation/{tag}/"))?;
                evals.push(self.evaluate(&p, &clf, &format!("ablation/{tag}/"))?);
                first.get_or_insert(clf);
            }
            Some(evals)
        } else {
            None
        };
        let report = self.timed("ablate", |s| {
            let r = ablation_report(&tw, &two, reports.as_ref().map(|e| (&e[0], &e[1])))?;
            s.write("ablation.json", r.to_json()?.as_bytes())?;
            s.write("ablation.csv", r.to_csv().as_bytes())?;
            Ok(r)
        })?;
        let eval = reports.map(|mut e| e.swap_remove(0));
        self.finish(eval, Some(report), first.as_ref())
    }

    fn finish(
        &mut self,
        eval: Option<EvalReport>,
        ablation: Option<AblationReport>,
        clf: Option<&Classifier>,
    ) -> Result<RunArtifacts> {
        let model_hash = clf.map(|c| archive::content_hash(ArchiveKind::Ensemble, c)).transpose()?;
        let manifest = self.write_manifest()?;
        Ok(RunArtifacts {
            out: self.cfg.out.clone(),
            eval,
            ablation,
            manifest,
            model_hash,
        })
    }

    pub fn write_manifest(&mut self) -> Result<Manifest> {
        let manifest = Manifest {
            command: self.command.clone(),
            config_hash: self.cfg.hash(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            archive_format: archive::FORMAT_VERSION,
            parallel: crate::par::exec_mode() == crate::par::ExecMode::Parallel,
            seeds: self.seeds.clone(),
            timings: self.timings.clone(),
            artifacts: self.artifacts.clone(),
        };
        let path = self.cfg.out.join("manifest.json");
        std::fs::create_dir_all(&self.cfg.out).map_err(|e| Error::io(&self.cfg.out, e))?;
        std::fs::write(&path, json(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Which classes the filter routed where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub gamma: f64,
    pub normal: String,
    pub minority: Vec<String>,
    pub passthrough: Vec<String>,
}

impl RoutingReport {
    pub fn new(f: &FilterOutput<Dataset>) -> Self {
        let names = &f.census.classes;
        let minority = f.minority_classes();
        Self {
            gamma: f.gamma,
            normal: names[f.census.normal_class].name.clone(),
            minority: minority.iter().map(|&c| names[c].name.clone()).collect(),
            passthrough: names
                .iter()
                .filter(|c| c.class != f.census.normal_class && !minority.contains(&c.class) && c.count > 0)
                .map(|c| c.name.clone())
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,route\n");
        out.push_str(&format!("{},normal\n", self.normal));
        for c in &self.minority {
            out.push_str(&format!("{c},minority\n"));
        }
        for c in &self.passthrough {
            out.push_str(&format!("{c},passthrough\n"));
        }
        out
    }
}

/// Raw rows in schema column order, with the label column filled in.
fn raw_csv(raw: &crate::data::RawDataset, schema: &DatasetSchema) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = raw.names.iter().map(String::as_str).chain(["label"]).collect();
    w.write_record(&header).expect("in-memory write");
    for i in 0..raw.rows() {
        let mut rec: Vec<String> = raw.row(i).iter().map(ToString::to_string).collect();
        rec.push(schema.classes[raw.labels[i]].clone());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
