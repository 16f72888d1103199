use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hhe_cli::bench::{self, UploadMode};
use hhe_cli::ecg::{self, RunConfig};
use hhe_cli::files::{self, seed32, KeyDir, Results};
use hhe_cli::report::{self, BenchReport};
use hhe_cli::{parse_list, resolve_profile, CliError, Result, PROFILE_ENV};
use hhe_core::bfv::{BfvProfile, Decryptor, Encryptor, Evaluator};
use hhe_core::data::{self, EcgRecord};
use hhe_core::hhe::{hhe_dec, hhe_decomp_prepared, hhe_enc_many, hhe_eval, hhe_keygen, hhe_prepare_key, LinearLayerCircuit};
use hhe_core::ml::{self, evaluate_accuracy, plain_reports, IntegerFcModel, PredictionReport};
use hhe_core::pasta::{CipherProfile, PASTA3_LIKE, TEST};
use hhe_protocol::messages::Upload;
use hhe_protocol::PartyId;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

#[derive(Parser)]
#[command(name = "hhe", version, about = "Hybrid homomorphic encryption toolkit")]
struct Cli {
    /// BFV parameter set; HHE_PROFILE overrides it.
    #[arg(long, global = true, default_value = "test-8192", value_parser = ["paper-16384", "test-8192"])]
    profile: String,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0: one per core). One thread keeps transcripts
    /// reproducible byte for byte.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate HE keys into a directory.
    Keygen {
        #[arg(long, default_value = "test", value_parser = ["test", "pasta3-like"])]
        cipher: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt integer vectors (one comma-separated row each) under a fresh
    /// cipher key and write the upload message.
    Upload {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transcipher an upload into BFV ciphertexts (evaluation key only).
    Decomp {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        upload: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply an encrypted linear layer to transciphered inputs.
    Eval {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Plain integer weights (JSON), encrypted under the public key.
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        weights: Option<PathBuf>,
        /// An already encrypted model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt results and print signed scores as CSV.
    Decrypt {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic labelled ECG beats as CSV.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantize ECG features to 0..=15.
    EcgQuantize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify ECG beats in float, integer, mod-p and encrypted arithmetic.
    EcgInfer {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "all", value_parser = ["float", "integer", "mod-p", "encrypted", "all"])]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Setup, upload, evaluation and classification over the signed
    /// message bus, in three-party or TEE mode.
    RunProtocol {
        #[arg(long, default_value = "3party", value_parser = ["3party", "three-party", "tee"])]
        mode: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1)]
        users: u8,
        /// Include full envelopes (hex) in transcript.jsonl.
        #[arg(long)]
        envelopes: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Upload bytes of HHE against one BFV ciphertext per input.
    BenchUpload {
        /// Input counts, comma-separated.
        #[arg(long, default_value = "1,50,300")]
        n: String,
        #[arg(long, default_value = "both", value_parser = ["hhe", "plain-bfv", "both"])]
        mode: String,
        #[arg(long, default_value = "test", value_parser = ["test", "pasta3-like"])]
        cipher: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Times and operation counts of SKE.Enc, Decomp, Eval and Dec.
    BenchPipeline {
        #[arg(long, default_value = "1,2,4")]
        grid: String,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        #[arg(long, default_value = "test", value_parser = ["test", "pasta3-like"])]
        cipher: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect run reports as JSON or CSV.
    #[command(long_about = "Collect run reports as JSON or CSV.\n\n\
        CSV columns: scenario,table,key,inputs,field,value. One row per number.\n\
        table is meta, ops, times, bytes or metrics. key is the phase (ops,\n\
        times), edge (bytes) or metric name; meta rows leave key and inputs\n\
        empty. ops fields: rotations, ct_ct_muls, ct_pt_muls, additions,\n\
        key_switches, mod_switches. times fields: runs, mean_s, min_s, max_s\n\
        (wall clock, informational). bytes field: bytes. metrics field: value.")]
    Report {
        /// Directory with *.report.json files.
        #[arg(long, required_unless_present_any = ["from_csv", "from_json"])]
        run: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["run", "from_json"])]
        from_csv: Option<PathBuf>,
        #[arg(long, conflicts_with = "run")]
        from_json: Option<PathBuf>,
        #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
        format: String,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// ECG CSV (128 features and a label per row). Without it, synthetic
    /// beats are drawn from --seed.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Integer weights JSON; defaults to the shipped model.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Cumulative input counts, comma-separated.
    #[arg(long, default_value = "10,50")]
    counts: String,
    /// Downsample the larger class first.
    #[arg(long)]
    balance: bool,
}

struct Loaded {
    records: Vec<EcgRecord>,
    model: IntegerFcModel,
    counts: Vec<usize>,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<Loaded> {
        let counts = parse_list(&self.counts)?;
        let need = counts.iter().copied().max().unwrap_or(0);
        let mut records = match &self.dataset {
            Some(p) => {
                let l = data::load_csv(p).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
                if l.clipped > 0 {
                    eprintln!("{}: clipped {} feature values into [0, 1]", p.display(), l.clipped);
                }
                l.records
            }
            None => data::synth_generate(need, seed)?,
        };
        if self.balance {
            records = data::balance(&records, seed)?;
        }
        let model = match &self.weights {
            Some(p) => IntegerFcModel::load(p).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?,
            None => IntegerFcModel::fixture(),
        };
        Ok(Loaded { records, model, counts })
    }
}

fn cipher(name: &str) -> Result<CipherProfile> {
    Ok(CipherProfile::by_name(name)?)
}

/// The block must hold a whole sample.
fn cipher_for(in_dim: usize) -> CipherProfile {
    if in_dim <= TEST.t {
        TEST
    } else {
        PASTA3_LIKE
    }
}

fn cmd_keygen(bfv: BfvProfile, seed: u64, cipher_name: &str, out: &Path) -> Result<()> {
    let bundle = hhe_keygen(bfv, cipher(cipher_name)?, &seed32(seed, "keygen"))?;
    KeyDir::create(out, &bundle)?;
    println!("keys for {} / {} written to {}", bfv.name, cipher_name, out.display());
    Ok(())
}

fn cmd_upload(keys: &Path, input: &Path, out: &Path, seed: u64) -> Result<()> {
    let k = KeyDir::open(keys)?;
    let xs = files::read_vectors(input, k.cipher.p)?;
    if let Some(x) = xs.iter().find(|x| x.len() > k.cipher.t) {
        return Err(CliError::invalid(format!(
            "a vector of {} words exceeds the block size {}",
            x.len(),
            k.cipher.t
        )));
    }
    let enc = Encryptor::new(&k.ctx, &k.public_key()?);
    let (inputs, key) = hhe_enc_many(&enc, &k.cipher, &xs, &seed32(seed, "upload"))?;
    let up = Upload {
        user: PartyId::user(0)?,
        inputs,
        key,
    };
    let bytes = up.encode(&k.ctx);
    files::write(out, &bytes)?;
    println!(
        "{} vectors: {} symmetric bytes + {} key bytes = {} bytes",
        xs.len(),
        up.symmetric_len(),
        up.key.to_bytes(&k.ctx).len(),
        bytes.len()
    );
    Ok(())
}

fn evaluator(k: &KeyDir) -> Result<Evaluator> {
    Ok(Evaluator::new(&k.ctx, std::sync::Arc::new(k.eval_key()?)))
}

fn cmd_decomp(keys: &Path, upload: &Path, out: &Path) -> Result<()> {
    let k = KeyDir::open(keys)?;
    let up = Upload::decode(&k.ctx, &files::read(upload)?)?;
    let ev = evaluator(&k)?;
    let key = hhe_prepare_key(&ev, &up.key)?;
    let mut items = Vec::new();
    for c in &up.inputs {
        for b in hhe_decomp_prepared(&ev, c, &key)? {
            items.push((b.len, b.ct));
        }
    }
    files::write(out, files::encode_transciphered(&k.ctx, &items))?;
    println!("{} blocks transciphered; {:?}", items.len(), ev.counters().snapshot());
    Ok(())
}

fn cmd_eval(keys: &Path, input: &Path, weights: Option<&Path>, model: Option<&Path>, out: &Path, seed: u64) -> Result<()> {
    let k = KeyDir::open(keys)?;
    let circuit = match (weights, model) {
        (Some(w), _) => {
            let m = IntegerFcModel::load(w).map_err(|e| CliError::invalid(format!("{}: {e}", w.display())))?;
            let enc = Encryptor::new(&k.ctx, &k.public_key()?);
            m.encrypt(&enc, &k.cipher, &mut ChaCha20Rng::from_seed(seed32(seed, "model")))?
        }
        (None, Some(m)) => LinearLayerCircuit::from_bytes(&k.ctx, &files::read(m)?)?,
        (None, None) => return Err(CliError::invalid("--weights or --model is required")),
    };
    let ev = evaluator(&k)?;
    let items = files::decode_transciphered(&k.ctx, &files::read(input)?)?;
    let mut cts = Vec::with_capacity(items.len());
    for (len, ct) in items {
        if len > circuit.in_dim {
            return Err(CliError::invalid(format!("input of {len} words, model takes {}", circuit.in_dim)));
        }
        let t = hhe_core::hhe::TranscipheredInput {
            ct,
            nonce: [0; 16],
            block: 0,
            len,
        };
        cts.push(hhe_eval(&ev, &circuit, &t)?);
    }
    let res = Results {
        out_dim: circuit.out_dim,
        window: circuit.window,
        cts,
    };
    files::write(out, res.encode(&k.ctx))?;
    println!("{} results; {:?}", res.cts.len(), ev.counters().snapshot());
    Ok(())
}

fn cmd_decrypt(keys: &Path, results: &Path, out: Option<&Path>) -> Result<()> {
    let k = KeyDir::open(keys)?;
    let dec = Decryptor::new(&k.ctx, &k.secret_key()?);
    let res = Results::decode(&k.ctx, &files::read(results)?)?;
    let field = k.cipher.field();
    let mut header = vec!["input".to_string()];
    header.extend((0..res.out_dim).map(|r| format!("score_{r}")));
    header.push("class".into());
    let mut rows = Vec::new();
    for (i, ct) in res.cts.iter().enumerate() {
        let slots = hhe_dec(&dec, ct)?;
        let scores: Vec<i64> = (0..res.out_dim).map(|r| field.lift_signed(slots[r * res.window])).collect();
        let mut row = vec![i.to_string()];
        row.extend(scores.iter().map(i64::to_string));
        row.push(ml::argmax(&scores).to_string());
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    match out {
        Some(p) => files::write_table(p, &header, &rows)?,
        None => {
            println!("{}", header.join(","));
            for r in rows {
                println!("{}", r.join(","));
            }
        }
    }
    Ok(())
}

fn cmd_synth(n: usize, seed: u64, out: &Path) -> Result<()> {
    let records = data::synth_generate(n, seed)?;
    let f = std::fs::File::create(out).map_err(|e| CliError::file(out, e))?;
    data::write_csv(std::io::BufWriter::new(f), &records)?;
    let c = data::label_counts(&records);
    println!("{n} beats written to {} (N {} L {} R {} A {} V {})", out.display(), c[0], c[1], c[2], c[3], c[4]);
    Ok(())
}

fn cmd_quantize(input: &Path, out: &Path) -> Result<()> {
    let l = data::load_csv(input).map_err(|e| CliError::invalid(format!("{}: {e}", input.display())))?;
    let mut text = String::from("# features quantized to 0..=15, then the label\n");
    for r in &l.records {
        let (q, _) = ml::quantize(&r.features)?;
        for v in q {
            text.push_str(&v.to_string());
            text.push(',');
        }
        text.push_str(&r.label.to_string());
        text.push('\n');
    }
    files::write(out, text)?;
    println!("{} rows quantized, {} values clipped on load", l.records.len(), l.clipped);
    Ok(())
}

fn predictions_table(path: &Path, reports: &[&PredictionReport]) -> Result<()> {
    let mut header = vec!["sample".to_string(), "truth".to_string()];
    header.extend(reports.iter().map(|r| r.mode.to_string()));
    let n = reports[0].rows.len();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row = vec![i.to_string(), reports[0].rows[i].truth.to_string()];
            row.extend(reports.iter().map(|r| r.rows[i].class.to_string()));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    files::write_table(path, &header, &rows)
}

fn accuracy_table(path: &Path, rows: &[ml::AccuracyRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|a| {
            vec![
                a.inputs.to_string(),
                format!("{:.4}", a.float),
                format!("{:.4}", a.integer),
                format!("{:.4}", a.encrypted),
            ]
        })
        .collect();
    files::write_table(path, &["inputs", "float", "integer", "encrypted"], &rows)
}

fn cmd_ecg_infer(bfv: BfvProfile, seed: u64, d: &DataArgs, mode: &str, out: &Path) -> Result<()> {
    let l = d.load(seed)?;
    let need = l.counts.iter().copied().max().unwrap_or(0);
    if need == 0 || need > l.records.len() {
        return Err(CliError::invalid(format!("{need} samples requested, {} available", l.records.len())));
    }
    let records = &l.records[..need];
    files::ensure_dir(out)?;
    let cipher = cipher_for(l.model.in_dim);
    let samples = ecg::quantized(records)?;
    let (float, integer) = plain_reports(&l.model, records)?;
    let modp = ecg::oracle_report(&l.model, &cipher, &samples)?;
    let mut report = BenchReport::new(&format!("ecg-infer/{mode}"), bfv.name, cipher.name, seed, &l.counts);
    let mut shown: Vec<&PredictionReport> = Vec::new();
    let encrypted;
    if mode == "encrypted" || mode == "all" {
        let bundle = hhe_keygen(bfv, cipher, &seed32(seed, "keygen"))?;
        encrypted = ecg::infer_encrypted(&bundle, &l.model, &samples, seed)?;
        let agree = encrypted.rows.iter().zip(&modp.rows).filter(|(e, o)| e.scores == o.scores).count();
        report.metric("oracle-agreement", need, agree as f64 / need as f64);
        accuracy_table(&out.join("accuracy.csv"), &evaluate_accuracy(&float, &integer, &encrypted, &l.counts)?)?;
        println!("encrypted scores equal the mod-p oracle on {agree}/{need} samples");
    } else {
        encrypted = PredictionReport::new(ml::Mode::Encrypted);
    }
    for (name, r) in [("float", &float), ("integer", &integer), ("mod-p", &modp), ("encrypted", &encrypted)] {
        if (mode == name || mode == "all") && !r.rows.is_empty() {
            for &n in &l.counts {
                report.metric(&format!("accuracy/{name}"), n, r.accuracy_at(n));
            }
            println!("{name:>9}: accuracy {:.2}% over {} samples", 100.0 * r.accuracy(), r.rows.len());
            shown.push(r);
        }
    }
    predictions_table(&out.join("predictions.csv"), &shown)?;
    report.save(out)?;
    Ok(())
}

fn cmd_run_protocol(bfv: BfvProfile, seed: u64, mode: &str, d: &DataArgs, users: u8, envelopes: bool, out: &Path) -> Result<()> {
    let l = d.load(seed)?;
    let cfg = RunConfig {
        mode: mode.parse()?,
        bfv,
        cipher: cipher_for(l.model.in_dim),
        seed,
        users,
        counts: l.counts.clone(),
        keep_bytes: envelopes,
    };
    files::ensure_dir(out)?;
    let run = ecg::run_protocol(&cfg, &l.model, &l.records)?;
    files::write(&out.join("transcript.jsonl"), run.session.transcript().to_json_lines(envelopes))?;
    accuracy_table(&out.join("accuracy.csv"), &run.accuracy)?;
    let mut edges: Vec<String> = run.edges.iter().flat_map(|(_, e)| e.keys().cloned()).collect();
    edges.sort();
    edges.dedup();
    let rows: Vec<Vec<String>> = run
        .edges
        .iter()
        .map(|(n, e)| {
            let mut row = vec![n.to_string()];
            row.extend(edges.iter().map(|k| e.get(k).copied().unwrap_or(0).to_string()));
            row
        })
        .collect();
    let mut header = vec!["inputs"];
    header.extend(edges.iter().map(String::as_str));
    files::write_table(&out.join("edges.csv"), &header, &rows)?;
    predictions_table(&out.join("predictions.csv"), &[&run.float, &run.integer, &run.modp, &run.encrypted])?;
    run.report(&cfg).save(out)?;
    for a in &run.accuracy {
        println!(
            "{:>5} inputs: float {:.2}%  integer {:.2}%  encrypted {:.2}%",
            a.inputs,
            100.0 * a.float,
            100.0 * a.integer,
            100.0 * a.encrypted
        );
    }
    let n = run.encrypted.rows.len();
    println!("encrypted scores equal the mod-p oracle on {}/{n} samples", run.oracle_agreement());
    if let Some((_, e)) = run.edges.last() {
        for (k, v) in e {
            println!("{k:>14}: {v} bytes");
        }
    }
    Ok(())
}

fn cmd_bench_upload(bfv: BfvProfile, seed: u64, n: &str, mode: &str, cipher_name: &str, out: &Path) -> Result<()> {
    let grid = parse_list(n)?;
    let bundle = hhe_keygen(bfv, cipher(cipher_name)?, &seed32(seed, "keygen"))?;
    let (report, costs) = bench::upload_report(&bundle, &grid, seed, mode.parse::<UploadMode>()?)?;
    files::ensure_dir(out)?;
    let rows: Vec<Vec<String>> = costs
        .iter()
        .map(|c| {
            vec![
                c.inputs.to_string(),
                c.symmetric.to_string(),
                c.key.to_string(),
                c.hhe_total.to_string(),
                c.plain.to_string(),
            ]
        })
        .collect();
    files::write_table(
        &out.join("upload.csv"),
        &["inputs", "symmetric_bytes", "key_bytes", "hhe_total_bytes", "plain_bfv_bytes"],
        &rows,
    )?;
    report.save(out)?;
    for c in &costs {
        print!("n={:>4}: hhe {} B (key {} B)  plain-bfv {} B", c.inputs, c.hhe_total, c.key, c.plain);
        if c.plain > 0 && c.hhe_total > 0 {
            print!("  symmetric/plain {:.2e}  total/plain {:.4}", c.symmetric_ratio(), c.total_ratio());
        }
        println!();
    }
    Ok(())
}

fn cmd_bench_pipeline(bfv: BfvProfile, seed: u64, grid: &str, repeat: usize, cipher_name: &str, out: &Path) -> Result<()> {
    let grid = parse_list(grid)?;
    let bundle = hhe_keygen(bfv, cipher(cipher_name)?, &seed32(seed, "keygen"))?;
    let report = bench::pipeline_report(&bundle, &grid, repeat, seed)?;
    files::ensure_dir(out)?;
    let rows: Vec<Vec<String>> = report
        .times
        .iter()
        .map(|t| {
            let ops = report.ops_of(&t.phase, t.inputs as usize).cloned().unwrap_or_default();
            vec![
                t.phase.clone(),
                t.inputs.to_string(),
                t.mean_s.to_string(),
                t.min_s.to_string(),
                t.max_s.to_string(),
                ops.rotations.to_string(),
                ops.ct_ct_muls.to_string(),
                ops.ct_pt_muls.to_string(),
            ]
        })
        .collect();
    files::write_table(
        &out.join("pipeline.csv"),
        &["phase", "inputs", "mean_s", "min_s", "max_s", "rotations", "ct_ct_muls", "ct_pt_muls"],
        &rows,
    )?;
    report.save(out)?;
    for t in &report.times {
        println!("{:>9} n={:<4} {:>9.4} s", t.phase, t.inputs, t.mean_s);
    }
    for m in report.metrics.iter().filter(|m| m.name.starts_with("linearity")) {
        println!("{} at n={}: {}", m.name, m.inputs, m.value);
    }
    Ok(())
}

fn cmd_report(run: Option<&Path>, from_csv: Option<&Path>, from_json: Option<&Path>, format: &str, out: Option<&Path>) -> Result<()> {
    let reports = match (run, from_csv, from_json) {
        (Some(d), _, _) => report::load_dir(d)?,
        (_, Some(p), _) => report::read_csv(std::fs::File::open(p).map_err(|e| CliError::file(p, e))?)?,
        (_, _, Some(p)) => report::from_json(&files::read_text(p)?)?,
        _ => return Err(CliError::invalid("--run, --from-csv or --from-json is required")),
    };
    let mut buf = Vec::new();
    match format {
        "csv" => report::write_csv(&mut buf, &reports)?,
        _ => buf = report::to_json(&reports)?.into_bytes(),
    }
    match out {
        Some(p) => files::write(p, buf),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::invalid(format!("stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    let env = std::env::var(PROFILE_ENV).ok();
    let bfv = resolve_profile(&cli.profile, env.as_deref())?;
    let seed = cli.seed;
    match &cli.cmd {
        Cmd::Keygen { cipher, out } => cmd_keygen(bfv, seed, cipher, out),
        Cmd::Upload { keys, input, out } => cmd_upload(keys, input, out, seed),
        Cmd::Decomp { keys, upload, out } => cmd_decomp(keys, upload, out),
        Cmd::Eval {
            keys,
            input,
            weights,
            model,
            out,
        } => cmd_eval(keys, input, weights.as_deref(), model.as_deref(), out, seed),
        Cmd::Decrypt { keys, results, out } => cmd_decrypt(keys, results, out.as_deref()),
        Cmd::Synth { n, out } => cmd_synth(*n, seed, out),
        Cmd::EcgQuantize { input, out } => cmd_quantize(input, out),
        Cmd::EcgInfer { data, mode, out } => cmd_ecg_infer(bfv, seed, data, mode, out),
        Cmd::RunProtocol {
            mode,
            data,
            users,
            envelopes,
            out,
        } => cmd_run_protocol(bfv, seed, mode, data, *users, *envelopes, out),
        Cmd::BenchUpload { n, mode, cipher, out } => cmd_bench_upload(bfv, seed, n, mode, cipher, out),
        Cmd::BenchPipeline {
            grid,
            repeat,
            cipher,
            out,
        } => cmd_bench_pipeline(bfv, seed, grid, *repeat, cipher, out),
        Cmd::Report {
            run,
            from_csv,
            from_json,
            format,
            out,
        } => cmd_report(run.as_deref(), from_csv.as_deref(), from_json.as_deref(), format, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match hhe_core::par::with_threads(threads, move || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
