use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use pmds_core::codec::{
    decode_erasures, repair_single, CodecError, CodewordArray, Encoder, ErasurePattern, PatternClass,
};
use pmds_core::verifier::{
    audit_repair_bandwidth, recheck_witness, verify_local_mds, verify_pmds, verify_sd, Property,
    VerificationReport, VerifyError, VerifyOptions,
};
use pmds_core::FieldElement;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{validate_report, BuiltCode, CodeConfig, ConstructionKind};
use crate::error::CliError;
use crate::shard::{pack, payload_of, shard_path, unpack, ShardFile, ShardHeader};

#[derive(Debug, Parser)]
#[command(name = "pmds", version, about = "Locally regenerating PMDS / SD array codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatternKind {
    /// One random node.
    Single,
    /// Up to r random nodes in every group.
    Local,
    /// r common positions in every group plus s more.
    Sd,
    /// r random nodes per group plus s more.
    Pmds,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve a configuration and report field sizes.
    GenParams {
        #[arg(long)]
        config: PathBuf,
        /// Directory for params.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compact single-line JSON.
        #[arg(long)]
        json: bool,
    },
    /// Encode a file into one shard per node.
    Encode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Delete or truncate shards to simulate node failures.
    Corrupt {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<usize>,
        /// Pick a random pattern of this kind instead of listing nodes.
        #[arg(long, value_enum)]
        pattern: Option<PatternKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Truncate the files to zero bytes instead of deleting them.
        #[arg(long)]
        erase: bool,
        #[arg(long)]
        json: bool,
    },
    /// Regenerate one lost shard from helpers in its group.
    Repair {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        node: usize,
        /// Where to write the rebuilt shard (defaults to --dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Recover the original file from the surviving shards.
    Decode {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Certify the code's properties by exhaustive search.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Run exhaustively past the rank-check budget.
        #[arg(long)]
        allow_large: bool,
        /// Check this many random (pattern, row) pairs instead.
        #[arg(long)]
        sample: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Time encoding, decoding and repair.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Bytes of random input.
        #[arg(long, default_value_t = 1 << 16)]
        size: usize,
        #[arg(long, default_value_t = 3)]
        iterations: usize,
        #[arg(long)]
        json: bool,
    },
}

fn emit(value: &Value, compact: bool) {
    let text = if compact {
        serde_json::to_string(value)
    } else {
        serde_json::to_string_pretty(value)
    };
    println!("{}", text.expect("JSON values serialize"));
}

fn load_config(path: &Path) -> Result<CodeConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    CodeConfig::from_json(&text)
}

fn codec_error(e: CodecError) -> CliError {
    match e {
        CodecError::RankDeficient { .. } | CodecError::SingularParity { .. } => CliError::Property(e.to_string()),
        _ => CliError::Io(e.to_string()),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenParams { config, out, json } => gen_params(&config, out.as_deref(), json),
        Command::Encode { config, input, out, json } => encode(&config, &input, &out, json),
        Command::Corrupt { dir, nodes, pattern, seed, erase, json } => {
            corrupt(&dir, &nodes, pattern, seed, erase, json)
        }
        Command::Repair { dir, node, out, json } => repair(&dir, node, out.as_deref(), json),
        Command::Decode { dir, output, json } => decode(&dir, &output, json),
        Command::Verify { config, allow_large, sample, seed, json } => {
            let opts = VerifyOptions {
                allow_large,
                sample,
                seed,
                ..VerifyOptions::default()
            };
            verify(&config, &opts, json)
        }
        Command::Bench { config, size, iterations, json } => bench(&config, size, iterations, json),
    }
}

fn gen_params(config: &Path, out: Option<&Path>, json: bool) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let built = cfg.build()?;
    let report = built.report();
    let doc = json!({
        "config": cfg.resolved(&built),
        "report": report,
    });
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
        fs::write(dir.join("params.json"), text)?;
    }
    eprintln!(
        "{}: q = {}, M = {}, field size {}, ell = {}",
        cfg.construction.name(),
        report.q,
        report.ext_degree,
        report.field_size,
        report.ell
    );
    emit(&doc, json);
    Ok(())
}

fn encode(config: &Path, input: &Path, out: &Path, json: bool) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    if cfg.sabotage.is_some() {
        return Err(CliError::Usage("sabotaged configurations are for verification only".into()));
    }
    let built = cfg.build()?;
    let code = built.code();
    let field = code.field();
    let shape = code.shape();
    let enc = Encoder::new(code).map_err(codec_error)?;
    let data = fs::read(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let stripes = pack(field, &data, enc.info_nodes(), shape.ell)?;
    let mut columns: Vec<Vec<Vec<FieldElement>>> = vec![Vec::with_capacity(stripes.len()); shape.length()];
    for stripe in &stripes {
        let cw = enc.encode(stripe).map_err(codec_error)?;
        for (node, col) in columns.iter_mut().enumerate() {
            col.push(cw.column(node));
        }
    }
    fs::create_dir_all(out)?;
    let resolved = cfg.resolved(&built);
    for (node, cols) in columns.iter().enumerate() {
        let header = ShardHeader::new(&built, &resolved, node, stripes.len(), data.len() as u64);
        ShardFile {
            header,
            payload: payload_of(field, cols),
        }
        .write(&shard_path(out, node))?;
    }
    eprintln!(
        "encoded {} bytes into {} shards x {} stripes",
        data.len(),
        shape.length(),
        stripes.len()
    );
    emit(
        &json!({
            "construction": cfg.construction.name(),
            "data_len": data.len(),
            "nodes": shape.length(),
            "stripes": stripes.len(),
            "symbol_bits": field.data_bits(),
            "shard_payload_bytes": stripes.len() * shape.ell * field.element_byte_width(),
        }),
        json,
    );
    Ok(())
}

/// The shards present in a directory plus the code they describe.
struct ShardSet {
    config: CodeConfig,
    built: BuiltCode,
    header: ShardHeader,
    present: BTreeMap<usize, ShardFile>,
}

impl ShardSet {
    fn load(dir: &Path) -> Result<ShardSet, CliError> {
        let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut present = BTreeMap::new();
        for entry in entries {
            let path = entry?.path();
            let is_shard = path.extension().is_some_and(|e| e == "shard");
            if !is_shard || fs::metadata(&path)?.len() == 0 {
                continue;
            }
            let shard = ShardFile::read(&path)?;
            present.insert(shard.header.node as usize, shard);
        }
        let first = present
            .values()
            .next()
            .ok_or_else(|| CliError::Io(format!("no shards in {}", dir.display())))?;
        let header = first.header.clone();
        let (config, built) = header.build()?;
        for (node, shard) in &present {
            let mut h = shard.header.clone();
            h.node = header.node;
            if h != header {
                return Err(CliError::Io(format!("shard {node} disagrees with the other shards")));
            }
        }
        if let Some(&node) = present.keys().find(|&&n| n >= built.code().shape().length()) {
            return Err(CliError::Io(format!("shard names node {node}, beyond the code length")));
        }
        Ok(ShardSet {
            config,
            built,
            header,
            present,
        })
    }

    fn missing(&self) -> BTreeSet<usize> {
        (0..self.built.code().shape().length())
            .filter(|n| !self.present.contains_key(n))
            .collect()
    }

    fn stripes(&self) -> usize {
        self.header.stripe_count as usize
    }

    /// Stripe `k` with missing columns zeroed.
    fn array(&self, stripe: usize) -> Result<CodewordArray, CliError> {
        let code = self.built.code();
        let shape = code.shape();
        let field = code.field();
        let columns = (0..shape.length())
            .map(|node| match self.present.get(&node) {
                Some(s) => s.stripe_symbols(field, stripe),
                None => Ok(vec![field.zero(); shape.ell]),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CodewordArray::from_columns(&columns))
    }
}

fn pick_pattern(
    built: &BuiltCode,
    kind: PatternKind,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<usize> {
    let shape = built.code().shape();
    match kind {
        PatternKind::Single => BTreeSet::from([rng.gen_range(0..shape.length())]),
        PatternKind::Local => (0..shape.mu)
            .flat_map(|g| {
                let mut cols: Vec<usize> = shape.group_columns(g).collect();
                cols.shuffle(rng);
                let k = rng.gen_range(0..=shape.r);
                cols.into_iter().take(k).collect::<Vec<_>>()
            })
            .collect(),
        PatternKind::Pmds => ErasurePattern::random_pmds(&shape, rng).erased().clone(),
        PatternKind::Sd => {
            let mut pos: Vec<usize> = (0..shape.n).collect();
            pos.shuffle(rng);
            let mut set: BTreeSet<usize> = (0..shape.mu)
                .flat_map(|g| pos[..shape.r].iter().map(move |p| g * shape.n + p))
                .collect();
            let mut rest: Vec<usize> = (0..shape.length()).filter(|c| !set.contains(c)).collect();
            rest.shuffle(rng);
            set.extend(rest.into_iter().take(shape.s));
            set
        }
    }
}

fn corrupt(
    dir: &Path,
    nodes: &[usize],
    pattern: Option<PatternKind>,
    seed: u64,
    erase: bool,
    json: bool,
) -> Result<(), CliError> {
    let set = ShardSet::load(dir)?;
    let shape = set.built.code().shape();
    let chosen: BTreeSet<usize> = match (pattern, nodes.is_empty()) {
        (Some(kind), true) => pick_pattern(&set.built, kind, &mut ChaCha8Rng::seed_from_u64(seed)),
        (None, false) => nodes.iter().copied().collect(),
        _ => return Err(CliError::Usage("give either --nodes or --pattern".into())),
    };
    let erased = ErasurePattern::new(&shape, chosen.iter().copied())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    for &node in &chosen {
        let path = shard_path(dir, node);
        if !path.exists() {
            continue;
        }
        if erase {
            fs::write(&path, [])?;
        } else {
            fs::remove_file(&path)?;
        }
    }
    let lost: BTreeSet<usize> = set.missing().union(&chosen).copied().collect();
    let class = ErasurePattern::new(&shape, lost.iter().copied())
        .map_err(|e| CliError::Usage(e.to_string()))?
        .classify(&shape);
    eprintln!("removed nodes {:?}; {} lost in total", erased.erased(), lost.len());
    emit(
        &json!({
            "removed": chosen,
            "lost": lost,
            "class": class,
            "mode": if erase { "erase" } else { "delete" },
        }),
        json,
    );
    Ok(())
}

fn repair(dir: &Path, node: usize, out: Option<&Path>, json: bool) -> Result<(), CliError> {
    let set = ShardSet::load(dir)?;
    let code = set.built.code();
    let shape = code.shape();
    if node >= shape.length() {
        return Err(CliError::Usage(format!("node {node} is beyond the code length {}", shape.length())));
    }
    let unavailable: BTreeSet<usize> = set.missing().into_iter().filter(|&n| n != node).collect();
    let mut columns = Vec::with_capacity(set.stripes());
    let mut downloaded = 0;
    let mut last = None;
    for stripe in 0..set.stripes() {
        let arr = set.array(stripe)?;
        let outcome = repair_single(code, &arr, node, &unavailable).map_err(codec_error)?;
        downloaded += outcome.downloaded;
        columns.push(outcome.column.clone());
        last = Some(outcome);
    }
    let outcome = last.expect("at least one stripe");
    let mut header = set.header.clone();
    header.node = node as u32;
    let target = out.unwrap_or(dir);
    fs::create_dir_all(target)?;
    ShardFile {
        header,
        payload: payload_of(code.field(), &columns),
    }
    .write(&shard_path(target, node))?;
    let bound = *outcome.bound.numer() as f64 / *outcome.bound.denom() as f64;
    let ratio = outcome.downloaded as f64 / outcome.naive as f64;
    eprintln!(
        "repaired node {node}: {} symbols per stripe (naive {}, bound {}){}",
        outcome.downloaded,
        outcome.naive,
        outcome.bound,
        if outcome.regenerated { "" } else { ", NO_REGEN fallback" }
    );
    emit(
        &json!({
            "node": node,
            "group": shape.group_of(node),
            "regenerated": outcome.regenerated,
            "flag": if outcome.regenerated { Value::Null } else { json!("NO_REGEN") },
            "helpers": outcome.helpers,
            "stripes": set.stripes(),
            "downloaded_symbols": outcome.downloaded,
            "naive_symbols": outcome.naive,
            "bound_symbols": bound,
            "savings_ratio": ratio,
            "total_downloaded_symbols": downloaded,
        }),
        json,
    );
    Ok(())
}

fn decode(dir: &Path, output: &Path, json: bool) -> Result<(), CliError> {
    let set = ShardSet::load(dir)?;
    let code = set.built.code();
    let shape = code.shape();
    let missing = set.missing();
    let pattern = ErasurePattern::new(&shape, missing.iter().copied()).map_err(codec_error)?;
    let enc = Encoder::new(code).map_err(codec_error)?;
    let mut stripes = Vec::with_capacity(set.stripes());
    for stripe in 0..set.stripes() {
        let arr = set.array(stripe)?;
        let full = decode_erasures(code, &arr, &pattern).map_err(codec_error)?;
        stripes.push(enc.extract_info(&full).map_err(codec_error)?);
    }
    let data = unpack(code.field(), &stripes, shape.ell)?;
    if data.len() as u64 != set.header.data_len {
        return Err(CliError::Io("decoded length disagrees with the shard headers".into()));
    }
    fs::write(output, &data).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
    let class = pattern.classify(&shape);
    eprintln!("decoded {} bytes with {} nodes missing", data.len(), missing.len());
    emit(
        &json!({
            "construction": set.config.construction.name(),
            "erased": missing,
            "class": class,
            "stripes": set.stripes(),
            "bytes": data.len(),
        }),
        json,
    );
    Ok(())
}

fn report_value(code: &dyn pmds_core::ArrayCode, report: &VerificationReport) -> Value {
    let mut v = serde_json::to_value(report).expect("reports serialize");
    let rechecked = match (&report.witness, report.property) {
        (Some(w), Property::LocalMds | Property::Pmds | Property::Sd) => {
            Value::Bool(recheck_witness(code, report.property, w))
        }
        _ => Value::Null,
    };
    v["witness_rechecked"] = rechecked;
    v
}

fn verify_error(e: VerifyError) -> CliError {
    match e {
        VerifyError::BudgetExceeded { .. } => CliError::Usage(e.to_string()),
        VerifyError::Codec(c) => codec_error(c),
        VerifyError::InvalidBound(_) => CliError::Config(e.to_string()),
    }
}

/// Runs the property checks for a configuration and returns the JSON
/// document `verify` prints.
pub fn verify_document(cfg: &CodeConfig, opts: &VerifyOptions) -> Result<Value, CliError> {
    let built = cfg.build()?;
    let code = built.code();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let local = verify_local_mds(code, opts).map_err(verify_error)?;
    let local_ok = local.passed();
    reports.push(local);
    let global = match cfg.construction {
        ConstructionKind::S2Sd => verify_sd(code, opts),
        _ => verify_pmds(code, opts),
    }
    .map_err(verify_error)?;
    reports.push(global);
    if local_ok {
        reports.push(audit_repair_bandwidth(code, opts.seed).map_err(verify_error)?);
    } else {
        skipped.push(Property::MsrBandwidth);
    }
    let passed = reports.iter().all(VerificationReport::passed);
    let mut doc = json!({
        "construction": cfg.construction.name(),
        "params": built.report(),
        "passed": passed,
        "skipped": skipped,
        "reports": reports.iter().map(|r| report_value(code, r)).collect::<Vec<_>>(),
    });
    if let BuiltCode::General(g) = &built {
        let ind = &g.params().independence;
        doc["independence"] = json!({
            "t": ind.t,
            "subsets_checked": ind.subsets_checked,
            "passed": ind.passed(),
        });
    }
    debug_assert!(validate_report(&doc).is_ok());
    Ok(doc)
}

fn verify(config: &Path, opts: &VerifyOptions, json: bool) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let doc = verify_document(&cfg, opts)?;
    for r in doc["reports"].as_array().expect("reports array") {
        eprintln!(
            "{}: {} ({} patterns x {} rows)",
            r["property"].as_str().unwrap_or("?"),
            r["result"].as_str().unwrap_or("?"),
            r["patterns_checked"],
            r["rows_checked"]
        );
    }
    emit(&doc, json);
    if doc["passed"].as_bool() == Some(true) {
        Ok(())
    } else {
        Err(CliError::Property("verification failed".into()))
    }
}

fn bench(config: &Path, size: usize, iterations: usize, json: bool) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let built = cfg.build()?;
    let code = built.code();
    let shape = code.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data: Vec<u8> = (0..size).map(|_| rng.gen()).collect();
    let t = Instant::now();
    let enc = Encoder::new(code).map_err(codec_error)?;
    let setup = t.elapsed().as_secs_f64();
    let stripes = pack(code.field(), &data, enc.info_nodes(), shape.ell)?;
    let iterations = iterations.max(1);
    let mut encode_s = 0.0;
    let mut decode_s = 0.0;
    let mut repair_s = 0.0;
    for _ in 0..iterations {
        let t = Instant::now();
        let arrays = stripes
            .iter()
            .map(|s| enc.encode(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(codec_error)?;
        encode_s += t.elapsed().as_secs_f64();
        let pattern = ErasurePattern::random_pmds(&shape, &mut rng);
        debug_assert!(pattern.classify(&shape) != PatternClass::Uncorrectable);
        let t = Instant::now();
        for arr in &arrays {
            decode_erasures(code, arr, &pattern).map_err(codec_error)?;
        }
        decode_s += t.elapsed().as_secs_f64();
        let node = rng.gen_range(0..shape.length());
        let t = Instant::now();
        for arr in &arrays {
            repair_single(code, arr, node, &BTreeSet::new()).map_err(codec_error)?;
        }
        repair_s += t.elapsed().as_secs_f64();
    }
    let n = iterations as f64;
    let mb = size as f64 / 1e6;
    eprintln!("encode {:.1} MB/s over {} stripes", mb * n / encode_s, stripes.len());
    emit(
        &json!({
            "construction": cfg.construction.name(),
            "bytes": size,
            "stripes": stripes.len(),
            "iterations": iterations,
            "threads": rayon::current_num_threads(),
            "encoder_setup_s": setup,
            "encode_s": encode_s / n,
            "decode_s": decode_s / n,
            "repair_s": repair_s / n,
            "encode_mb_per_s": mb * n / encode_s,
            "decode_mb_per_s": mb * n / decode_s,
        }),
        json,
    );
    Ok(())
}
