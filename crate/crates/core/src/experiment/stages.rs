use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelEntry};
use super::report::{MetricsReport, MetricsRow, NlpRow, NlpSummary, RecSummary, SourceKind};
use super::tsv;
use crate::corpus::{self, BaselineIndex, BaselineKind, FilterReport, ReviewRecord, SplitManifest};
use crate::encoding::{build_vocab, IdTables, Level, Vocabulary};
use crate::error::{Error, Result};
use crate::genmodels::{load_checkpoint, Generator, ModelSpec};
use crate::hashing::{sha256_hex, sha256_parts, short};
use crate::par;
use crate::recsys::{compare_conditions, ConditionTexts, Evaluator};
use crate::textmetrics::{bleu4_text, histogram, mean, pearson, polarity, readability, Lexicons, ReadabilityIndex};
use crate::training::{examples, train, CheckpointTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Prepare,
    Train,
    Generate,
    EvalNlp,
    EvalRec,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Prepare,
        Stage::Train,
        Stage::Generate,
        Stage::EvalNlp,
        Stage::EvalRec,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Train => "train",
            Stage::Generate => "generate",
            Stage::EvalNlp => "eval-nlp",
            Stage::EvalRec => "eval-rec",
            Stage::Report => "report",
        }
    }

    fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Prepare => &[],
            Stage::Train => &[Stage::Prepare],
            Stage::Generate => &[Stage::Train],
            Stage::EvalNlp | Stage::EvalRec => &[Stage::Generate],
            Stage::Report => &[Stage::EvalNlp, Stage::EvalRec],
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
    pub input_hash: String,
}

/// Filtered, split corpus plus the counts behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedCorpus {
    pub config_hash: String,
    pub corpus_hash: String,
    pub lines: usize,
    pub malformed: usize,
    pub filter: FilterReport,
    pub manifest: SplitManifest,
    pub train: Vec<ReviewRecord>,
    pub validate: Vec<ReviewRecord>,
    pub test: Vec<ReviewRecord>,
}

impl PreparedCorpus {
    pub fn all(&self) -> Vec<ReviewRecord> {
        self.train.iter().chain(&self.validate).chain(&self.test).cloned().collect()
    }
}

/// Candidate texts for the TEST records from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTexts {
    pub name: String,
    pub kind: SourceKind,
    pub checkpoint_hash: Option<String>,
    pub texts: Vec<String>,
}

const STAMP: &str = "STAMP";
const BASELINES: [BaselineKind; 3] = [BaselineKind::Rand, BaselineKind::UserNn, BaselineKind::ItemNn];

/// One experiment rooted at an output directory.
pub struct Experiment {
    cfg: ExperimentConfig,
    out: PathBuf,
    config_hash: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("config values serialize")
}

impl Experiment {
    /// Validate `cfg`, create the output directory and echo the effective config.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let out = cfg.output_dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let config_hash = cfg.hash();
        let echo = out.join("effective_config.toml");
        std::fs::write(&echo, format!("# config {}\n{}", short(&config_hash), cfg.to_toml()?))
            .map_err(|e| Error::io(&echo, e))?;
        Ok(Experiment { cfg, out, config_hash })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name())
    }

    fn artifact(&self, stage: Stage, file: &str) -> Result<PathBuf> {
        let p = self.stage_dir(stage).join(file);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact { path: p, stage: stage.name() })
        }
    }

    fn stamp(&self, stage: Stage) -> Option<String> {
        std::fs::read_to_string(self.stage_dir(stage).join(STAMP)).ok()
    }

    fn input_hash(&self, stage: Stage) -> Result<String> {
        let mut parts: Vec<Vec<u8>> = vec![stage.name().as_bytes().to_vec()];
        for &up in stage.upstream() {
            let s = self.stamp(up).ok_or_else(|| Error::MissingArtifact {
                path: self.stage_dir(up).join(STAMP),
                stage: up.name(),
            })?;
            parts.push(s.into_bytes());
        }
        let c = &self.cfg;
        match stage {
            Stage::Prepare => {
                parts.push(json(&c.data));
                parts.push(json(&c.filter));
                parts.push(json(&c.split_proportions));
                parts.push(json(&c.seeds.corpus));
                if let Some(p) = &c.data.input {
                    parts.push(file_hash(p)?.into_bytes());
                }
            }
            Stage::Train => {
                parts.push(json(&c.encoder));
                parts.push(json(&c.models));
                parts.push(json(&c.train));
            }
            Stage::Generate => {
                parts.push(json(&c.generate));
                parts.push(json(&c.seeds.eval));
            }
            Stage::EvalNlp => {
                for p in [&c.data.easy_words, &c.data.polarity_lexicon].into_iter().flatten() {
                    parts.push(file_hash(p)?.into_bytes());
                }
            }
            Stage::EvalRec => parts.push(json(&c.recsys)),
            Stage::Report => {}
        }
        Ok(sha256_parts(parts.iter().map(|p| p.as_slice())))
    }

    /// Run one stage unless its stamp shows the inputs are unchanged.
    pub fn run(&self, stage: Stage) -> Result<StageOutcome> {
        let input_hash = self.input_hash(stage)?;
        let dir = self.stage_dir(stage);
        if self.stamp(stage).as_deref() == Some(input_hash.as_str()) {
            log::info!("{}: inputs unchanged, skipping", stage.name());
            return Ok(StageOutcome { stage, skipped: true, input_hash });
        }
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        log::info!("{}: running", stage.name());
        match stage {
            Stage::Prepare => self.prepare()?,
            Stage::Train => self.train()?,
            Stage::Generate => self.generate()?,
            Stage::EvalNlp => self.eval_nlp()?,
            Stage::EvalRec => self.eval_rec()?,
            Stage::Report => {
                self.report()?;
            }
        }
        let stamp = dir.join(STAMP);
        std::fs::write(&stamp, &input_hash).map_err(|e| Error::io(&stamp, e))?;
        Ok(StageOutcome { stage, skipped: false, input_hash })
    }

    /// Run every stage in order.
    pub fn run_all(&self) -> Result<Vec<StageOutcome>> {
        Stage::ALL.into_iter().map(|s| self.run(s)).collect()
    }

    fn provenance(&self, corpus_hash: &str) -> String {
        tsv::provenance(short(&self.config_hash), short(corpus_hash))
    }

    pub fn load_corpus(&self) -> Result<PreparedCorpus> {
        let p = self.artifact(Stage::Prepare, "corpus.json")?;
        let s = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    fn prepare(&self) -> Result<()> {
        let c = &self.cfg;
        let (records, lines, malformed) = match (&c.data.input, &c.data.synthetic) {
            (Some(path), _) => {
                let o = corpus::ingest_path(path, &c.data.fields, &c.encoder.tokenizer()?)?;
                (o.records, o.total_lines, o.malformed)
            }
            (None, Some(world)) => {
                let w = crate::synth::generate(world)?;
                let n = w.records.len();
                (w.records, n, 0)
            }
            (None, None) => unreachable!("validated"),
        };
        let (kept, filter) = corpus::filter(records, &c.filter);
        if filter.is_empty_warning() {
            log::warn!("prepare: the filter removed every review");
        }
        let split = corpus::split(kept, c.seeds.corpus, c.split_proportions)?;
        let corpus_hash = sha256_hex(&json(&(&split.train, &split.validate, &split.test)));
        let prepared = PreparedCorpus {
            config_hash: self.config_hash.clone(),
            corpus_hash,
            lines,
            malformed,
            filter,
            manifest: split.manifest,
            train: split.train,
            validate: split.validate,
            test: split.test,
        };
        let f = &prepared.filter;
        let m = &prepared.manifest;
        let mut body = String::from("quantity\tcount\n");
        for (k, v) in [
            ("lines", prepared.lines),
            ("malformed", prepared.malformed),
            ("ingested", f.input),
            ("dropped_length", f.dropped_length),
            ("dropped_votes", f.dropped_votes),
            ("dropped_occurrence", f.dropped_occurrence),
            ("filter_iterations", f.iterations),
            ("retained", f.output),
            ("train", m.train),
            ("validate", m.validate),
            ("test", m.test),
        ] {
            body.push_str(&format!("{k}\t{v}\n"));
        }
        let dir = self.stage_dir(Stage::Prepare);
        tsv::write(&dir.join("manifest.tsv"), &self.provenance(&prepared.corpus_hash), &body)?;
        write_json(&dir.join("corpus.json"), &prepared)
    }

    fn vocab_path(&self, level: Level) -> PathBuf {
        self.stage_dir(Stage::Train).join(format!("vocab-{}.txt", level.name()))
    }

    fn checkpoint_path(&self, m: &ModelEntry) -> PathBuf {
        self.stage_dir(Stage::Train).join(m.label()).join("model.ckpt")
    }

    fn train(&self) -> Result<()> {
        let c = &self.cfg;
        let corpus = self.load_corpus()?;
        let tables = IdTables::from_records(&corpus.all());
        let texts: Vec<&str> = corpus.train.iter().map(|r| r.text.as_str()).collect();
        let mut vocabs = BTreeMap::new();
        for m in &c.models {
            if let std::collections::btree_map::Entry::Vacant(e) = vocabs.entry(m.level) {
                let v = build_vocab(&texts, m.level, &c.encoder)?;
                v.save(&self.vocab_path(m.level))?;
                e.insert(v);
            }
        }
        let prov = self.provenance(&corpus.corpus_hash);
        let train_one = |m: &ModelEntry| -> Result<String> {
            let vocab = &vocabs[&m.level];
            let spec = ModelSpec::new(
                m.architecture,
                m.level,
                m.use_helpful,
                &c.encoder,
                vocab.len(),
                tables.users.len(),
                tables.items.len(),
            )
            .with_hidden_dim(m.hidden_dim);
            let dir = self.stage_dir(Stage::Train).join(m.label());
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut model = Generator::new(spec, c.seeds.train)?;
            let target = CheckpointTarget {
                path: self.checkpoint_path(m),
                vocab_hash: vocab.hash(),
                config_hash: short(&self.config_hash).to_string(),
            };
            let tr = examples(&corpus.train, vocab, &tables)?;
            let va = examples(&corpus.validate, vocab, &tables)?;
            let report = train(&mut model, &tr, &va, &c.train, Some(&target))?;
            tsv::write(&dir.join("log.tsv"), &prov, &report.to_tsv())?;
            log::info!(
                "train: {} best epoch {} validation loss {:.4}",
                m.label(),
                report.best_epoch,
                report.best_validation_loss
            );
            Ok(format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\n",
                m.label(),
                m.architecture.name(),
                m.level.name(),
                m.use_helpful,
                m.hidden_dim,
                report.best_epoch,
                report.best_validation_loss,
                file_hash(&target.path)?
            ))
        };
        let rows = par::with_workers(c.workers, || par::map(&c.models, train_one));
        let mut body = String::from("model\tarchitecture\tlevel\tuse_helpful\thidden_dim\tbest_epoch\tvalidation_loss\tcheckpoint_sha256\n");
        for r in rows {
            body.push_str(&r?);
        }
        tsv::write(&self.stage_dir(Stage::Train).join("models.tsv"), &prov, &body)
    }

    fn generate(&self) -> Result<()> {
        let c = &self.cfg;
        let corpus = self.load_corpus()?;
        let tables = IdTables::from_records(&corpus.all());
        let bundles = corpus.test.iter().map(|r| tables.bundle(r)).collect::<Result<Vec<_>>>()?;
        let prov = self.provenance(&corpus.corpus_hash);
        let dir = self.stage_dir(Stage::Generate);
        let mut sources = String::from("source\tkind\tcheckpoint_sha256\n");
        for m in &c.models {
            let ckpt = self.checkpoint_path(m);
            if !ckpt.exists() {
                return Err(Error::MissingArtifact { path: ckpt, stage: Stage::Train.name() });
            }
            let vocab = Vocabulary::load(&self.artifact(Stage::Train, &format!("vocab-{}.txt", m.level.name()))?)?;
            let (model, meta) = load_checkpoint(&ckpt)?;
            if meta.vocab_hash != vocab.hash() {
                return Err(Error::Mismatch(format!("{}: checkpoint vocabulary differs from {}", m.label(), m.level.name())));
            }
            let samples = model.greedy_decode_all(&bundles, c.generate.max_len(m.level), c.generate.batch_size, |t| vocab.decode(t))?;
            let mut body = String::from("user_id\titem_id\trating\ttext\tlog_likelihood\n");
            for (r, s) in corpus.test.iter().zip(&samples) {
                body.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{:.6}\n",
                    tsv::escape(&r.user_id),
                    tsv::escape(&r.item_id),
                    r.rating,
                    tsv::escape(&s.text),
                    s.log_likelihood
                ));
            }
            tsv::write(&dir.join(format!("{}.tsv", m.label())), &prov, &body)?;
            sources.push_str(&format!("{}\tmodel\t{}\n", m.label(), file_hash(&ckpt)?));
        }
        if corpus.train.is_empty() {
            return Err(Error::Evaluation("baselines need a non-empty TRAIN split".into()));
        }
        let index = BaselineIndex::new(&corpus.train)?;
        for (k, kind) in BASELINES.into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seeds.eval.wrapping_add(k as u64));
            let mut body = String::from("user_id\titem_id\trating\ttext\tfallback\n");
            for r in &corpus.test {
                let pick = index.select(kind, r, &mut rng);
                body.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{:?}\n",
                    tsv::escape(&r.user_id),
                    tsv::escape(&r.item_id),
                    r.rating,
                    tsv::escape(&pick.text),
                    pick.fallback
                ));
            }
            tsv::write(&dir.join(format!("{}.tsv", kind.name())), &prov, &body)?;
            sources.push_str(&format!("{}\tbaseline\t\n", kind.name()));
        }
        tsv::write(&dir.join("sources.tsv"), &prov, &sources)
    }

    /// The human texts followed by every baseline and model, aligned with TEST.
    pub fn load_sources(&self, corpus: &PreparedCorpus) -> Result<Vec<SourceTexts>> {
        let mut out = vec![SourceTexts {
            name: BaselineKind::TestPair.name().to_string(),
            kind: SourceKind::Human,
            checkpoint_hash: None,
            texts: corpus.test.iter().map(|r| r.text.clone()).collect(),
        }];
        let (prov, _, rows) = tsv::read(&self.artifact(Stage::Generate, "sources.tsv")?)?;
        self.check_corpus(&prov, corpus, "sources.tsv")?;
        for row in rows {
            let file = format!("{}.tsv", row[0]);
            let (prov, header, texts) = tsv::read(&self.artifact(Stage::Generate, &file)?)?;
            self.check_corpus(&prov, corpus, &file)?;
            let col = header.iter().position(|h| h == "text").ok_or_else(|| Error::Format(format!("{file}: no text column")))?;
            if texts.len() != corpus.test.len()
                || texts.iter().zip(&corpus.test).any(|(t, r)| t[0] != r.user_id || t[1] != r.item_id)
            {
                return Err(Error::Mismatch(format!("{file} is not aligned with the TEST split")));
            }
            let kind = if row[1] == "model" { SourceKind::Model } else { SourceKind::Baseline };
            out.push(SourceTexts {
                name: row[0].clone(),
                kind,
                checkpoint_hash: (!row[2].is_empty()).then(|| row[2].clone()),
                texts: texts.into_iter().map(|mut t| t.swap_remove(col)).collect(),
            });
        }
        Ok(out)
    }

    fn check_corpus(&self, prov: &(String, String), corpus: &PreparedCorpus, what: &str) -> Result<()> {
        if prov.1 != short(&corpus.corpus_hash) {
            return Err(Error::Mismatch(format!(
                "{what} was built from corpus {}, the prepared corpus is {}",
                prov.1,
                short(&corpus.corpus_hash)
            )));
        }
        Ok(())
    }

    fn lexicons(&self) -> Result<Lexicons> {
        match (&self.cfg.data.easy_words, &self.cfg.data.polarity_lexicon) {
            (Some(e), Some(p)) => Lexicons::load(e, p),
            _ => Ok(Lexicons::bundled()),
        }
    }

    fn eval_nlp(&self) -> Result<()> {
        let corpus = self.load_corpus()?;
        let sources = self.load_sources(&corpus)?;
        let lex = self.lexicons()?;
        let ratings: Vec<f64> = corpus.test.iter().map(|r| f64::from(r.rating)).collect();
        let rows = par::map(&sources, |s| nlp_row(s, &corpus.test, &ratings, &lex));
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let prov = self.provenance(&corpus.corpus_hash);
        let dir = self.stage_dir(Stage::EvalNlp);

        let mut summary = String::from("source\tkind\tbleu4\tcoleman_liau\tflesch\tsmog\tdale_chall\tscored\tpolarity_pearson\n");
        let mut hist = String::from("source\tindex\tbin_low\tbin_high\tcount\n");
        let mut pol = String::from("source\trating\tcount\tmean_polarity\n");
        for r in &rows {
            summary.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.source,
                r.kind.name(),
                r.bleu4,
                fmt_opt(r.readability[0]),
                fmt_opt(r.readability[1]),
                fmt_opt(r.readability[2]),
                fmt_opt(r.readability[3]),
                r.scored,
                fmt_opt(r.polarity_pearson)
            ));
            for (index, h) in ReadabilityIndex::ALL.iter().zip(&r.histograms) {
                for (k, count) in h.counts.iter().enumerate() {
                    hist.push_str(&format!("{}\t{}\t{}\t{}\t{count}\n", r.source, index.name(), h.edges[k], h.edges[k + 1]));
                }
            }
            for (rating, (n, m)) in r.polarity_by_rating.iter().enumerate() {
                pol.push_str(&format!("{}\t{}\t{n}\t{}\n", r.source, rating + 1, fmt_opt(*m)));
            }
        }
        tsv::write(&dir.join("summary.tsv"), &prov, &summary)?;
        tsv::write(&dir.join("readability_hist.tsv"), &prov, &hist)?;
        tsv::write(&dir.join("polarity_by_rating.tsv"), &prov, &pol)?;
        write_json(
            &dir.join("summary.json"),
            &NlpSummary {
                config_hash: short(&self.config_hash).to_string(),
                corpus_hash: short(&corpus.corpus_hash).to_string(),
                rows,
            },
        )
    }

    fn eval_rec(&self) -> Result<()> {
        let corpus = self.load_corpus()?;
        let sources = self.load_sources(&corpus)?;
        let evaluator = Evaluator::train(&corpus.test, &self.cfg.recsys, self.cfg.seeds.eval)?;
        let conditions: Vec<(String, ConditionTexts)> = sources
            .iter()
            .filter(|s| s.kind != SourceKind::Human)
            .map(|s| {
                let texts = corpus
                    .test
                    .iter()
                    .zip(&s.texts)
                    .map(|(r, t)| ((r.user_id.clone(), r.item_id.clone()), t.clone()))
                    .collect();
                (s.name.clone(), texts)
            })
            .collect();
        let report = compare_conditions(&evaluator, &conditions)?;
        let prov = self.provenance(&corpus.corpus_hash);
        let dir = self.stage_dir(Stage::EvalRec);
        tsv::write(&dir.join("rmse.tsv"), &prov, &report.to_tsv())?;
        tsv::write(&dir.join("delta_hist.tsv"), &prov, &report.delta_histogram_tsv()?)?;
        let mut fit = String::from("epoch\ttrain_mse\tvalidation_rmse\n");
        for f in &evaluator.fit_log {
            fit.push_str(&format!("{}\t{:.6}\t{:.6}\n", f.epoch, f.train_mse, f.validation_rmse));
        }
        tsv::write(&dir.join("fit_log.tsv"), &prov, &fit)?;
        write_json(
            &dir.join("summary.json"),
            &RecSummary {
                config_hash: short(&self.config_hash).to_string(),
                corpus_hash: short(&corpus.corpus_hash).to_string(),
                report,
            },
        )
    }

    /// Merge the evaluation summaries into the metrics report.
    pub fn report(&self) -> Result<MetricsReport> {
        let read = |stage: Stage| -> Result<String> {
            let p = self.artifact(stage, "summary.json")?;
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let nlp: NlpSummary = serde_json::from_str(&read(Stage::EvalNlp)?)?;
        let rec: RecSummary = serde_json::from_str(&read(Stage::EvalRec)?)?;
        let corpus = self.load_corpus()?;
        for (what, h) in [("eval-nlp", &nlp.corpus_hash), ("eval-rec", &rec.corpus_hash)] {
            if h != short(&corpus.corpus_hash) {
                return Err(Error::Mismatch(format!(
                    "{what} results come from corpus {h}, the prepared corpus is {}",
                    short(&corpus.corpus_hash)
                )));
            }
        }
        if !nlp.rows.iter().any(|r| r.kind == SourceKind::Model) {
            return Err(Error::Usage("report needs at least one trained model; add [[models]] and run `train`".into()));
        }
        let mut rows = Vec::with_capacity(nlp.rows.len());
        for n in &nlp.rows {
            let r = rec.report.row(&n.source).ok_or_else(|| {
                Error::Mismatch(format!("source {} has no rating-prediction result; rerun `eval-rec`", n.source))
            })?;
            rows.push(MetricsRow::merge(n, r, &nlp.config_hash));
        }
        let report = MetricsReport {
            config_hash: nlp.config_hash.clone(),
            corpus_hash: nlp.corpus_hash.clone(),
            test_pairs: rec.report.test_pairs,
            cold_pairs: rec.report.cold_pairs,
            mean_baseline_rmse: rec.report.mean_baseline_rmse,
            rows,
        };
        let dir = self.stage_dir(Stage::Report);
        tsv::write(&dir.join("metrics.tsv"), &tsv::provenance(&report.config_hash, &report.corpus_hash), &report.to_tsv())?;
        write_json(&dir.join("metrics.json"), &report)?;
        Ok(report)
    }

    /// The report written by the last `report` run.
    pub fn load_report(&self) -> Result<MetricsReport> {
        let p = self.artifact(Stage::Report, "metrics.json")?;
        Ok(serde_json::from_str(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn nlp_row(s: &SourceTexts, test: &[ReviewRecord], ratings: &[f64], lex: &Lexicons) -> Result<NlpRow> {
    let bleu: Vec<f64> = s.texts.iter().zip(test).map(|(c, r)| bleu4_text(c, &r.text)).collect();
    let scores: Vec<_> = s.texts.iter().filter_map(|t| readability(t, lex).ok()).collect();
    let mut means = [None; 4];
    let mut histograms = Vec::with_capacity(4);
    for (k, index) in ReadabilityIndex::ALL.into_iter().enumerate() {
        let v: Vec<f64> = scores.iter().map(|r| r.get(index)).collect();
        means[k] = mean(&v);
        histograms.push(histogram(&v, &index.edges())?);
    }
    let pols: Vec<f64> = s.texts.iter().map(|t| polarity(t, lex)).collect();
    let mut by_rating = [(0usize, None); 5];
    for (rating, slot) in by_rating.iter_mut().enumerate() {
        let v: Vec<f64> = pols
            .iter()
            .zip(ratings)
            .filter(|(_, &r)| r as usize == rating + 1)
            .map(|(p, _)| *p)
            .collect();
        *slot = (v.len(), mean(&v));
    }
    Ok(NlpRow {
        source: s.name.clone(),
        kind: s.kind,
        checkpoint_hash: s.checkpoint_hash.clone(),
        bleu4: mean(&bleu).unwrap_or(0.0),
        readability: means,
        scored: scores.len(),
        histograms,
        polarity_pearson: pearson(&pols, ratings).ok(),
        polarity_by_rating: by_rating.to_vec(),
    })
}
