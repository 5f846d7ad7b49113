use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use minority_ids::pipeline::{Pipeline, PipelineConfig, Prepared, RoutingReport};

#[derive(Parser)]
#[command(name = "minority-ids", version, about = "Minority-class intrusion detection with pretrained WGAN-GP augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-class counts and imbalance ratios of the training split.
    Census(Common),
    /// Route classes to the normal, minority and passthrough streams.
    Filter(Common),
    /// Pretrain the GAN on normal traffic.
    Pretrain(Common),
    /// Fine-tune one GAN per minority class.
    Finetune(Common),
    /// Generate synthetic minority rows from the fine-tuned GANs.
    Synthesize(Common),
    /// Augment, select features and fit the classifier.
    Train(Common),
    /// Score the classifier on the test split.
    Evaluate(Common),
    /// Compare fine-tuning with and without pretraining.
    Ablate(Common),
    /// Every stage in order.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fine-tune from a fresh model instead of the pretrained one.
    #[arg(long)]
    skip_pretrain: bool,
    /// Override the imbalance threshold.
    #[arg(long)]
    gamma: Option<f64>,
}

impl Common {
    fn pipeline(&self, name: &str) -> anyhow::Result<Pipeline> {
        let mut cfg = PipelineConfig::from_file(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        cfg.stages.skip_pretrain |= self.skip_pretrain;
        Ok(Pipeline::new(cfg, name)?)
    }
}

fn print_census(p: &Prepared) {
    println!("{:<28} {:>9} {:>12}", "class", "samples", "ratio");
    for c in &p.filtered.census.classes {
        println!("{:<28} {:>9} {:>12}", c.name, c.count, c.display_ratio().unwrap_or_else(|| "-".into()));
    }
}

fn print_eval(report: &minority_ids::metrics::EvalReport) {
    println!("accuracy {:.4}  macro F1 {:.4}", report.accuracy, report.macro_f1);
    for m in &report.classes {
        println!(
            "  {:<28} support {:>6}  precision {:.4}  recall {:.4}  F1 {:.4}",
            m.name, m.support, m.precision, m.recall, m.f1
        );
    }
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    let (common, name) = match &cmd {
        Command::Census(c) => (c, "census"),
        Command::Filter(c) => (c, "filter"),
        Command::Pretrain(c) => (c, "pretrain"),
        Command::Finetune(c) => (c, "finetune"),
        Command::Synthesize(c) => (c, "synthesize"),
        Command::Train(c) => (c, "train"),
        Command::Evaluate(c) => (c, "evaluate"),
        Command::Ablate(c) => (c, "ablate"),
        Command::Run(c) => (c, "run"),
    };
    let mut pl = common.pipeline(name)?;
    match cmd {
        Command::Census(_) => print_census(&pl.prepare()?),
        Command::Filter(_) => {
            let p = pl.prepare()?;
            let r = RoutingReport::new(&p.filtered);
            println!("gamma {}: minority {:?}, passthrough {:?}", r.gamma, r.minority, r.passthrough);
        }
        Command::Pretrain(_) => {
            let p = pl.prepare()?;
            pl.pretrain(&p)?;
        }
        Command::Finetune(_) => {
            let p = pl.prepare()?;
            let pre = if pl.cfg.stages.skip_pretrain {
                None
            } else {
                Some(pl.load_pretrained()?)
            };
            for r in pl.finetune(&p, pre.as_ref(), "gan/finetuned")? {
                println!(
                    "{}: {} steps ({:?})",
                    p.train.class_names[r.class], r.trace.steps_to_stop, r.trace.stop_reason
                );
            }
        }
        Command::Synthesize(_) => {
            let p = pl.prepare()?;
            let models = pl.load_finetuned(&p, "gan/finetuned")?;
            for d in pl.synthesize(&p, &models, "synth")? {
                if let Some(&c) = d.labels.first() {
                    println!("{}: {} rows", p.train.class_names[c], d.rows());
                }
            }
        }
        Command::Train(_) => {
            let p = pl.prepare()?;
            let synth = if pl.cfg.stages.skip_augment {
                Vec::new()
            } else {
                pl.load_synthesized(&p, "synth")?
            };
            let clf = pl.train(&p, &synth, "")?;
            println!("{} features selected of {}", clf.selected.len(), p.train.width);
        }
        Command::Evaluate(_) => {
            let p = pl.prepare()?;
            let clf = pl.load_classifier("")?;
            print_eval(&pl.evaluate(&p, &clf, "")?);
        }
        Command::Ablate(_) => {
            let art = pl.ablate()?;
            if let Some(a) = &art.ablation {
                print!("{}", a.to_csv());
            }
            println!("wrote {}", art.out.display());
            return Ok(());
        }
        Command::Run(_) => {
            let art = pl.run()?;
            if let Some(e) = &art.eval {
                print_eval(e);
            }
            println!("wrote {}", art.out.display());
            return Ok(());
        }
    }
    pl.write_manifest()?;
    println!("wrote {}", pl.out().display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::FAILURE
        }
    }
}
