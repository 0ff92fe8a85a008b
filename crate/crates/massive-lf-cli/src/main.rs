//! Command-line front end for the semantic-parsing toolkit. Each subcommand
//! wires files through one library stage; file outputs are written
//! atomically, so a failed run never leaves partial results behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use massive_lf::convert::{from_compact, to_compact};
use massive_lf::io::{
    atomic_write, load_filler_outputs, load_massive_strict, load_predictions, load_translations,
    write_jsonl, write_report, DatasetExample, DatasetIoError, Partition, Rejection, ReportFormat,
};
use massive_lf::lf::parse_annot;
use massive_lf::metrics::{evaluate, intents_by_ascending_ia, EvalReport};
use massive_lf::nmt_match::{match_report, render_match_tsv, NormalizationForm};
use massive_lf::taf::{make_signature, project_corpus, LanguageConfigError, LanguageConfigMap};
use massive_lf::transfer::{render_rankings_tsv, TransferMatrix};

#[derive(Parser)]
#[command(
    name = "massive-lf",
    version,
    about = "Convert, canonicalize, and score logical forms for multilingual semantic parsing"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit (id, locale, utterance, compact LF) training pairs as TSV
    Convert {
        /// Corpus JSONL with inline-annotated examples
        #[arg(long)]
        input: PathBuf,
        /// Output TSV path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Turn predicted compact LFs back into inline annotations
    Invert {
        /// Predictions JSONL with id, locale, and lf fields
        #[arg(long)]
        predictions: PathBuf,
        /// Corpus JSONL supplying the utterance for each prediction
        #[arg(long)]
        gold: PathBuf,
        /// Output JSONL path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Where to write predictions that could not be inverted; without
        /// this flag any failure aborts the run
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Emit each example's LF signature (slot values removed)
    Signature {
        /// Corpus JSONL with inline-annotated examples
        #[arg(long)]
        input: PathBuf,
        /// Output JSONL path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Join translations with filler outputs into a synthetic training corpus
    Canonicalize {
        /// Translated utterances JSONL (id, source_locale, target_locale, text)
        #[arg(long)]
        translations: PathBuf,
        /// Filler outputs JSONL (id, target_locale, lf)
        #[arg(long)]
        filler: PathBuf,
        /// Locale tokenization config JSON; falls back to the built-in table
        #[arg(long, env = "MASSIVE_LF_LANG_CONFIG")]
        lang_config: Option<PathBuf>,
        /// Output JSONL path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Where to write rejected pairs; without this flag any rejection
        /// aborts the run
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Score predictions against gold logical forms
    Evaluate {
        /// Predictions JSONL with id, locale, and lf fields
        #[arg(long)]
        predictions: PathBuf,
        /// Corpus JSONL with gold annotations
        #[arg(long)]
        gold: PathBuf,
        /// Gold partition to score against
        #[arg(long, default_value = "test")]
        partition: Partition,
        /// Write the full report here (format from the extension)
        #[arg(long)]
        report: Option<PathBuf>,
        /// Report format override: json, tsv, or text
        #[arg(long)]
        format: Option<ReportFormat>,
        /// Also print per-intent accuracy, worst intents first
        #[arg(long)]
        per_intent: bool,
        /// Also print localized vs translated-only accuracy
        #[arg(long)]
        split_localization: bool,
    },
    /// Build the cross-lingual transfer matrix from per-donor reports
    TransferMap {
        /// Directory of <donor-locale>.json evaluation reports
        #[arg(long)]
        reports: PathBuf,
        /// Output CSV path for the matrix
        #[arg(long)]
        output: PathBuf,
        /// Output TSV path for donor and receiver rankings
        #[arg(long)]
        rankings: PathBuf,
        /// Drop each language's self-transfer cell from the rankings
        #[arg(long)]
        exclude_self: bool,
    },
    /// Count verbatim matches between machine and gold translations
    NmtMatch {
        /// Machine translations JSONL (id, source_locale, target_locale, text)
        #[arg(long)]
        nmt: PathBuf,
        /// Corpus JSONL with gold utterances
        #[arg(long)]
        gold: PathBuf,
        /// Locales aggregated separately as Indic
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "bn_BD,hi_IN,kn_IN,ml_IN,ta_IN,te_IN"
        )]
        indic_locales: Vec<String>,
        /// Gold partition to compare against
        #[arg(long, default_value = "train")]
        partition: Partition,
        /// Unicode normalization form: nfc, nfd, nfkc, or nfkd
        #[arg(long, default_value = "nfkc")]
        form: NormalizationForm,
        /// Output TSV path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes: validation problems exit 1, I/O
/// problems exit 2. Argument errors exit 2 via clap itself.
enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl From<DatasetIoError> for CliError {
    fn from(e: DatasetIoError) -> Self {
        match e {
            DatasetIoError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<LanguageConfigError> for CliError {
    fn from(e: LanguageConfigError) -> Self {
        match e {
            LanguageConfigError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Convert { input, output } => cmd_convert(&input, output.as_deref()),
        Command::Invert {
            predictions,
            gold,
            output,
            rejects,
        } => cmd_invert(&predictions, &gold, output.as_deref(), rejects.as_deref()),
        Command::Signature { input, output } => cmd_signature(&input, output.as_deref()),
        Command::Canonicalize {
            translations,
            filler,
            lang_config,
            output,
            rejects,
        } => cmd_canonicalize(
            &translations,
            &filler,
            lang_config.as_deref(),
            output.as_deref(),
            rejects.as_deref(),
        ),
        Command::Evaluate {
            predictions,
            gold,
            partition,
            report,
            format,
            per_intent,
            split_localization,
        } => cmd_evaluate(
            &predictions,
            &gold,
            partition,
            report.as_deref(),
            format,
            per_intent,
            split_localization,
        ),
        Command::TransferMap {
            reports,
            output,
            rankings,
            exclude_self,
        } => cmd_transfer_map(&reports, &output, &rankings, exclude_self),
        Command::NmtMatch {
            nmt,
            gold,
            indic_locales,
            partition,
            form,
            output,
        } => cmd_nmt_match(
            &nmt,
            &gold,
            &indic_locales,
            partition,
            form,
            output.as_deref(),
        ),
    }
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn emit_text(output: Option<&Path>, content: &str) -> Result<(), CliError> {
    match output {
        Some(path) => atomic_write(path, content).map_err(Into::into),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn emit_jsonl<T: Serialize>(output: Option<&Path>, records: &[T]) -> Result<(), CliError> {
    match output {
        Some(path) => write_jsonl(path, records).map_err(Into::into),
        None => {
            for record in records {
                println!(
                    "{}",
                    serde_json::to_string(record).expect("output records serialize")
                );
            }
            Ok(())
        }
    }
}

fn cmd_convert(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let (examples, warnings) = load_massive_strict(input)?;
    print_warnings(&warnings);
    let mut out = String::new();
    for ex in &examples {
        let lf = to_compact(ex).map_err(|e| CliError::Validation(e.to_string()))?;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            ex.id,
            ex.locale,
            ex.utt,
            lf.as_str()
        ));
    }
    emit_text(output, &out)
}

#[derive(Serialize)]
struct InvertedPrediction<'a> {
    id: &'a str,
    locale: &'a str,
    annot_utt: String,
}

fn cmd_invert(
    predictions: &Path,
    gold: &Path,
    output: Option<&Path>,
    rejects: Option<&Path>,
) -> Result<(), CliError> {
    let preds = load_predictions(predictions)?;
    let (gold_examples, warnings) = load_massive_strict(gold)?;
    print_warnings(&warnings);
    let utterances: BTreeMap<(&str, &str), &str> = gold_examples
        .iter()
        .map(|g| ((g.id.as_str(), g.locale.as_str()), g.utt.as_str()))
        .collect();

    let mut inverted = Vec::new();
    let mut failures: Vec<Rejection> = Vec::new();
    for pred in &preds {
        let reason = match utterances.get(&(pred.id.as_str(), pred.locale.as_str())) {
            None => "no gold example with this id and locale".to_string(),
            Some(utt) => match from_compact(&pred.lf, utt) {
                Ok(annot_utt) => {
                    inverted.push(InvertedPrediction {
                        id: &pred.id,
                        locale: &pred.locale,
                        annot_utt,
                    });
                    continue;
                }
                Err(e) => e.to_string(),
            },
        };
        failures.push(Rejection {
            id: pred.id.clone(),
            target_locale: pred.locale.clone(),
            reason,
        });
    }

    handle_rejects(rejects, &failures, "predictions could not be inverted")?;
    emit_jsonl(output, &inverted)
}

/// Writes failures to the rejects file when one was given; otherwise any
/// failure is fatal so bad records can never vanish silently.
fn handle_rejects(
    rejects: Option<&Path>,
    failures: &[Rejection],
    what: &str,
) -> Result<(), CliError> {
    match rejects {
        Some(path) => write_jsonl(path, failures).map_err(Into::into),
        None if !failures.is_empty() => Err(CliError::Validation(format!(
            "{} {what} (first: {} {}: {}); pass --rejects to capture them",
            failures.len(),
            failures[0].id,
            failures[0].target_locale,
            failures[0].reason
        ))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct SignatureRecord<'a> {
    id: &'a str,
    locale: &'a str,
    utt: &'a str,
    signature: String,
}

fn cmd_signature(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let (examples, warnings) = load_massive_strict(input)?;
    print_warnings(&warnings);
    let mut records = Vec::new();
    for ex in &examples {
        let (_, lf) = parse_annot(&ex.annot_utt, &ex.intent)
            .map_err(|e| CliError::Validation(format!("example {:?}: {e}", ex.id)))?;
        records.push(SignatureRecord {
            id: &ex.id,
            locale: &ex.locale,
            utt: &ex.utt,
            signature: make_signature(&lf).into_string(),
        });
    }
    emit_jsonl(output, &records)
}

fn cmd_canonicalize(
    translations: &Path,
    filler: &Path,
    lang_config: Option<&Path>,
    output: Option<&Path>,
    rejects: Option<&Path>,
) -> Result<(), CliError> {
    let translations = load_translations(translations)?;
    let filler = load_filler_outputs(filler)?;
    let config = match lang_config {
        Some(path) => LanguageConfigMap::load(path)?,
        None => LanguageConfigMap::builtin(),
    };
    let outcome = project_corpus(&translations, &filler, &config)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    handle_rejects(rejects, &outcome.rejections, "pairs were rejected")?;
    emit_jsonl(output, &outcome.examples)
}

fn cmd_evaluate(
    predictions: &Path,
    gold: &Path,
    partition: Partition,
    report_path: Option<&Path>,
    format: Option<ReportFormat>,
    per_intent: bool,
    split_localization: bool,
) -> Result<(), CliError> {
    let preds = load_predictions(predictions)?;
    let (all_gold, warnings) = load_massive_strict(gold)?;
    print_warnings(&warnings);
    let gold_subset: Vec<DatasetExample> = all_gold
        .into_iter()
        .filter(|g| g.partition == partition)
        .collect();
    if gold_subset.is_empty() {
        return Err(CliError::Validation(format!(
            "no gold examples in the {partition} partition"
        )));
    }
    let report = evaluate(&preds, &gold_subset).map_err(|e| CliError::Validation(e.to_string()))?;

    let overall = report.overall;
    println!("examples: {}", overall.n);
    println!("intent accuracy: {:.4}", overall.ia());
    println!("exact match: {:.4}", overall.em());
    println!();
    println!("locale\tn\tia\tem");
    for (locale, stats) in &report.per_locale {
        println!(
            "{locale}\t{}\t{:.4}\t{:.4}",
            stats.n,
            stats.ia(),
            stats.em()
        );
    }
    if per_intent {
        println!();
        println!("intent\tsupport\tia");
        for (intent, stats) in intents_by_ascending_ia(&report) {
            println!("{intent}\t{}\t{:.4}", stats.support, stats.ia());
        }
    }
    if split_localization {
        let split = &report.split;
        println!();
        println!("split\tn\tia\tem");
        for (label, stats) in [
            ("localized", &split.localized),
            ("translated_only", &split.translated_only),
        ] {
            println!("{label}\t{}\t{:.4}\t{:.4}", stats.n, stats.ia(), stats.em());
        }
    }

    if let Some(path) = report_path {
        let resolved = match format.or_else(|| ReportFormat::from_path(path)) {
            Some(f) => f,
            None => {
                return Err(CliError::Validation(format!(
                    "cannot infer a report format from {:?}; pass --format json, tsv, or text",
                    path.display()
                )))
            }
        };
        write_report(&report, path, resolved)?;
    }
    Ok(())
}

fn cmd_transfer_map(
    reports_dir: &Path,
    output: &Path,
    rankings: &Path,
    exclude_self: bool,
) -> Result<(), CliError> {
    let entries = std::fs::read_dir(reports_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", reports_dir.display())))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io(format!("{}: {e}", reports_dir.display())))?;
        let path = entry.path();
        if path.extension().is_some_and(|ext| ext == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Validation(format!(
            "no .json report files in {}",
            reports_dir.display()
        )));
    }

    let mut reports: BTreeMap<String, EvalReport> = BTreeMap::new();
    for path in &paths {
        let donor = path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| {
            CliError::Validation(format!("{}: file stem is not valid UTF-8", path.display()))
        })?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let report: EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        reports.insert(donor.to_string(), report);
    }

    let matrix =
        TransferMatrix::from_reports(&reports).map_err(|e| CliError::Validation(e.to_string()))?;
    atomic_write(output, &matrix.to_csv())?;
    let tsv = render_rankings_tsv(
        &matrix.donor_scores(exclude_self),
        &matrix.receiver_scores(exclude_self),
    );
    atomic_write(rankings, &tsv)?;
    Ok(())
}

fn cmd_nmt_match(
    nmt: &Path,
    gold: &Path,
    indic_locales: &[String],
    partition: Partition,
    form: NormalizationForm,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let nmt_records = load_translations(nmt)?;
    let (all_gold, warnings) = load_massive_strict(gold)?;
    print_warnings(&warnings);
    let gold_subset: Vec<DatasetExample> = all_gold
        .into_iter()
        .filter(|g| g.partition == partition)
        .collect();
    if gold_subset.is_empty() {
        return Err(CliError::Validation(format!(
            "no gold examples in the {partition} partition"
        )));
    }
    if gold_subset.iter().any(|g| g.locale == "pt_PT") {
        eprintln!(
            "warning: pt_PT gold is European Portuguese while machine translation typically targets Brazilian Portuguese; expect a low match rate"
        );
    }

    let indic_set: BTreeSet<String> = indic_locales.iter().cloned().collect();
    let report = match_report(&nmt_records, &gold_subset, &indic_set, form);
    if !report.missing.is_empty() {
        eprintln!(
            "warning: {} candidate(s) had no machine translation and were counted as non-matches (first: {} {})",
            report.missing.len(),
            report.missing[0].0,
            report.missing[0].1
        );
    }
    emit_text(output, &render_match_tsv(&report))
}
