//! The `oamfso` command-line front end: reproducible physics generation,
//! analysis, and Monte Carlo runs communicating through bank files.
//!
//! Subcommands: `rytov`, `gen-screens`, `gen-channels`, `mdl-map`,
//! `select-modes`, `ber`, `mindet`. Every run writes a JSON manifest
//! beside its primary output with the resolved configuration, master
//! seed, input fingerprints, and tool version — enough to reproduce the
//! run bit for bit. All randomness flows from `--seed`; no entropy source
//! is consulted.

use crate::field::{BeamParams, GridSpec, ModeIndex};
use crate::mdl::{ensemble_mdl_stderr, pairwise_mdl_map, select_modes, ChannelEnsemble, ModeSet};
use crate::propagate::{
    gen_channel_ensemble, read_channel_bank, write_channel_bank, ChannelSynth, LinkParams,
};
use crate::sim::{
    normalize_ensemble, run_sweep, write_ber_csv, NormalizationPolicy, SimConfig,
};
use crate::stcode::{codebook_energy_per_use, min_determinant, min_determinant_sampled, CodeSpec, Constellation};
use crate::turbulence::{
    classify_regime, gen_screen_stack_with, rytov_variance, write_screen_bank, Regime,
    TurbulenceParams,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Exit status for completed runs that raised an acceptance-relevant flag
/// (cap-hit, rank-deficiency) without `--allow-flags`.
pub const EXIT_FLAGGED: i32 = 2;

#[derive(Parser)]
#[command(
    name = "oamfso",
    version,
    about = "OAM free-space optics: turbulent channel synthesis, mode selection, space-time coding, BER"
)]
struct Cli {
    /// Worker threads for ensemble generation and Monte Carlo (results
    /// are schedule-independent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit 0 even when a run raises cap-hit or rank-deficiency flags.
    #[arg(long, global = true)]
    allow_flags: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Rytov variance and classify the turbulence regime.
    Rytov(RytovArgs),
    /// Generate a phase-screen stack and write it as a screen bank.
    GenScreens(GenScreensArgs),
    /// Generate a channel-matrix ensemble and write it as a channel bank.
    GenChannels(GenChannelsArgs),
    /// Pairwise average-MDL map (CSV) from a channel bank.
    MdlMap(MdlMapArgs),
    /// Exhaustive MDL-minimizing subset search over a channel bank.
    SelectModes(SelectModesArgs),
    /// Monte Carlo BER sweep over a channel bank or the identity channel.
    Ber(BerArgs),
    /// Brute-force minimum determinant of a space-time codebook.
    Mindet(MindetArgs),
}

#[derive(Args)]
struct RytovArgs {
    /// Refractive-index structure parameter in m^(-2/3).
    #[arg(long)]
    cn2: f64,
    /// Wavelength in meters.
    #[arg(long, default_value_t = 1550e-9)]
    lambda: f64,
    /// Path length in meters.
    #[arg(long, default_value_t = 1000.0)]
    z: f64,
}

#[derive(Args)]
struct GenScreensArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 5e-3)]
    dx: f64,
    #[arg(long, default_value_t = 1e-14)]
    cn2: f64,
    #[arg(long, default_value_t = 5e-3)]
    l0: f64,
    #[arg(long, default_value_t = 20.0)]
    big_l0: f64,
    #[arg(long, default_value_t = 1550e-9)]
    lambda: f64,
    #[arg(long, default_value_t = 1000.0)]
    z: f64,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    subharmonics: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct GenChannelsArgs {
    #[arg(long)]
    out: PathBuf,
    /// key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    cn2: Option<f64>,
    #[arg(long)]
    l0: Option<f64>,
    #[arg(long)]
    big_l0: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    screens: Option<usize>,
    #[arg(long)]
    subharmonics: Option<u32>,
    /// Mode charges: comma list ("-10,-5,0,5,10") or range ("-10..10").
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MdlMapArgs {
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectModesArgs {
    #[arg(long)]
    bank: PathBuf,
    /// Subset size M.
    #[arg(short, long)]
    m: usize,
    /// Bootstrap resamples for the reported standard error.
    #[arg(long, default_value_t = 50)]
    resamples: usize,
}

#[derive(Args)]
struct BerArgs {
    /// Channel bank; omit for the turbulence-free identity channel.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Identity-channel dimension when no bank is given.
    #[arg(long, default_value_t = 2)]
    identity_modes: usize,
    /// Restrict the bank to these charges (comma list or range).
    #[arg(long)]
    subset: Option<String>,
    /// key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Space-time code: uncoded | golden | silver | tast3.
    #[arg(long, default_value = "uncoded")]
    code: String,
    /// SNR grid in dB: comma list ("0,5,10") or "start:step:stop".
    #[arg(long, default_value = "0:2:20")]
    snr: String,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    max_bits: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Transmit codewords exactly as published instead of normalizing
    /// radiated energy per channel use.
    #[arg(long)]
    as_printed: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MindetArgs {
    /// golden | silver | tast3
    #[arg(long)]
    code: String,
    /// Random pairs for codes too large to enumerate (tast3).
    #[arg(long, default_value_t = 100_000)]
    pairs: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: BTreeMap<String, String>,
    master_seed: Option<u64>,
    inputs: Vec<FileFingerprint>,
    outputs: Vec<String>,
    tool_version: String,
    created_unix: u64,
}

#[derive(Serialize)]
struct FileFingerprint {
    path: String,
    sha256: String,
}

fn fingerprint(path: &Path) -> Result<FileFingerprint, String> {
    let data = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    Ok(FileFingerprint {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
    })
}

fn write_manifest(
    primary_output: &Path,
    command: &str,
    config: BTreeMap<String, String>,
    master_seed: Option<u64>,
    inputs: Vec<FileFingerprint>,
) -> Result<(), String> {
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        master_seed,
        inputs,
        outputs: vec![primary_output.display().to_string()],
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = manifest_path(primary_output);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    fs::write(&path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

/// `<output>.manifest.json` beside the primary output.
pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut os = primary_output.as_os_str().to_owned();
    os.push(".manifest.json");
    PathBuf::from(os)
}

/// Parse a charge list: "-10,-5,0,5,10" or "-10..10".
pub fn parse_charges(s: &str) -> Result<Vec<i32>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let lo: i32 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let hi: i32 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if lo > hi {
            return Err(format!("empty range {lo}..{hi}"));
        }
        Ok((lo..=hi).collect())
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|e| format!("bad charge '{t}': {e}")))
            .collect()
    }
}

/// Parse an SNR grid: "0,5,10" or "start:step:stop" (inclusive).
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().map_err(|e| format!("bad start: {e}"))?;
        let step: f64 = parts[1].trim().parse().map_err(|e| format!("bad step: {e}"))?;
        let stop: f64 = parts[2].trim().parse().map_err(|e| format!("bad stop: {e}"))?;
        if !(step > 0.0) || stop < start {
            return Err("need step > 0 and stop >= start".into());
        }
        let mut grid = Vec::new();
        let mut v = start;
        while v <= stop + 1e-9 {
            grid.push(v);
            v += step;
        }
        Ok(grid)
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|e| format!("bad SNR '{t}': {e}")))
            .collect()
    }
}

/// Flat key=value config file: one pair per line, '#' comments.
pub fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn code_spec(name: &str, modes: usize) -> Result<CodeSpec, String> {
    match name {
        "uncoded" => Ok(CodeSpec::Uncoded { modes }),
        "golden" => Ok(CodeSpec::Golden),
        "silver" => Ok(CodeSpec::Silver),
        "tast3" => Ok(CodeSpec::Tast3),
        other => Err(format!("unknown code '{other}' (uncoded|golden|silver|tast3)")),
    }
}

fn kv_get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match kv.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| format!("config key '{key}': {e}")),
    }
}

/// Run the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore the error if a pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command, cli.allow_flags) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(command: Command, allow_flags: bool) -> Result<i32, String> {
    match command {
        Command::Rytov(args) => cmd_rytov(args),
        Command::GenScreens(args) => cmd_gen_screens(args),
        Command::GenChannels(args) => cmd_gen_channels(args),
        Command::MdlMap(args) => cmd_mdl_map(args),
        Command::SelectModes(args) => cmd_select_modes(args),
        Command::Ber(args) => cmd_ber(args, allow_flags),
        Command::Mindet(args) => cmd_mindet(args),
    }
}

fn cmd_rytov(args: RytovArgs) -> Result<i32, String> {
    if !(args.cn2 > 0.0) {
        return Err(format!("cn2 = {} must be > 0", args.cn2));
    }
    let params = TurbulenceParams::new(args.cn2, 5e-3, 20.0).map_err(|e| e.to_string())?;
    let sigma2 = rytov_variance(&params, args.lambda, args.z);
    let label = match classify_regime(sigma2) {
        Regime::Weak => "weak",
        Regime::Strong => "strong",
    };
    if sigma2 == 1.0 {
        println!("rytov_variance = {sigma2:.6e} -> exactly at the weak/strong boundary");
    } else {
        println!("rytov_variance = {sigma2:.6e} -> {label} turbulence regime");
    }
    Ok(0)
}

fn cmd_gen_screens(args: GenScreensArgs) -> Result<i32, String> {
    let grid = GridSpec::new(args.n, args.dx).map_err(|e| e.to_string())?;
    let turb = TurbulenceParams::new(args.cn2, args.l0, args.big_l0).map_err(|e| e.to_string())?;
    if args.count == 0 {
        return Err("count must be >= 1".into());
    }
    let stack = gen_screen_stack_with(
        grid,
        turb,
        args.lambda,
        args.z,
        args.count,
        args.subharmonics,
        args.seed,
    )
    .map_err(|e| e.to_string())?;
    let file = fs::File::create(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_screen_bank(&mut w, &stack, args.seed, &turb).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;

    let mut config = BTreeMap::new();
    config.insert("n".into(), args.n.to_string());
    config.insert("dx".into(), args.dx.to_string());
    config.insert("cn2".into(), args.cn2.to_string());
    config.insert("l0".into(), args.l0.to_string());
    config.insert("big_l0".into(), args.big_l0.to_string());
    config.insert("lambda".into(), args.lambda.to_string());
    config.insert("z".into(), args.z.to_string());
    config.insert("count".into(), args.count.to_string());
    config.insert("subharmonics".into(), args.subharmonics.to_string());
    write_manifest(&args.out, "gen-screens", config, Some(args.seed), vec![])?;
    println!(
        "wrote {} screens ({}x{}) spaced {} m to {}",
        stack.count(),
        args.n,
        args.n,
        stack.spacing(),
        args.out.display()
    );
    Ok(0)
}

struct ResolvedChannelConfig {
    n: usize,
    dx: f64,
    cn2: f64,
    l0: f64,
    big_l0: f64,
    lambda: f64,
    w0: f64,
    z: f64,
    screens: usize,
    subharmonics: u32,
    charges: Vec<i32>,
    realizations: usize,
    seed: u64,
}

fn resolve_channel_config(args: &GenChannelsArgs) -> Result<ResolvedChannelConfig, String> {
    let kv = match &args.config {
        Some(path) => parse_kv_file(path)?,
        None => BTreeMap::new(),
    };
    let charges = match args
        .modes
        .clone()
        .or_else(|| kv.get("modes").cloned())
    {
        Some(s) => parse_charges(&s)?,
        None => (-10..=10).collect(),
    };
    Ok(ResolvedChannelConfig {
        n: args.n.or(kv_get(&kv, "n")?).unwrap_or(512),
        dx: args.dx.or(kv_get(&kv, "dx")?).unwrap_or(5e-3),
        cn2: args.cn2.or(kv_get(&kv, "cn2")?).unwrap_or(1e-14),
        l0: args.l0.or(kv_get(&kv, "l0")?).unwrap_or(5e-3),
        big_l0: args.big_l0.or(kv_get(&kv, "big_l0")?).unwrap_or(20.0),
        lambda: args.lambda.or(kv_get(&kv, "lambda")?).unwrap_or(1550e-9),
        w0: args.w0.or(kv_get(&kv, "w0")?).unwrap_or(1.6e-2),
        z: args.z.or(kv_get(&kv, "z")?).unwrap_or(1000.0),
        screens: args.screens.or(kv_get(&kv, "screens")?).unwrap_or(20),
        subharmonics: args.subharmonics.or(kv_get(&kv, "subharmonics")?).unwrap_or(0),
        charges,
        realizations: args
            .realizations
            .or(kv_get(&kv, "realizations")?)
            .unwrap_or(1000),
        seed: args.seed.or(kv_get(&kv, "seed")?).unwrap_or(1),
    })
}

fn cmd_gen_channels(args: GenChannelsArgs) -> Result<i32, String> {
    let cfg = resolve_channel_config(&args)?;
    if cfg.realizations == 0 {
        return Err("realizations must be >= 1".into());
    }
    let grid = GridSpec::new(cfg.n, cfg.dx).map_err(|e| e.to_string())?;
    let beam = BeamParams::new(cfg.w0, cfg.lambda).map_err(|e| e.to_string())?;
    let turb = TurbulenceParams::new(cfg.cn2, cfg.l0, cfg.big_l0).map_err(|e| e.to_string())?;
    let link = LinkParams::new(cfg.z, beam, grid).map_err(|e| e.to_string())?;
    let modes: Vec<ModeIndex> = cfg.charges.iter().map(|&c| ModeIndex::oam(c)).collect();
    let synth = ChannelSynth::new(&modes, link).map_err(|e| e.to_string())?;
    log::info!(
        "generating {} realizations of a {}-mode channel at N={} ...",
        cfg.realizations,
        modes.len(),
        cfg.n
    );
    let ensemble = gen_channel_ensemble(
        &synth,
        turb,
        cfg.screens,
        cfg.subharmonics,
        cfg.realizations,
        cfg.seed,
    )
    .map_err(|e| e.to_string())?;

    let file = fs::File::create(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_channel_bank(&mut w, &ensemble, cfg.cn2, cfg.z, cfg.seed).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;

    let mut config = BTreeMap::new();
    config.insert("n".into(), cfg.n.to_string());
    config.insert("dx".into(), cfg.dx.to_string());
    config.insert("cn2".into(), cfg.cn2.to_string());
    config.insert("l0".into(), cfg.l0.to_string());
    config.insert("big_l0".into(), cfg.big_l0.to_string());
    config.insert("lambda".into(), cfg.lambda.to_string());
    config.insert("w0".into(), cfg.w0.to_string());
    config.insert("z".into(), cfg.z.to_string());
    config.insert("screens".into(), cfg.screens.to_string());
    config.insert("subharmonics".into(), cfg.subharmonics.to_string());
    config.insert(
        "modes".into(),
        cfg.charges.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
    );
    config.insert("realizations".into(), cfg.realizations.to_string());
    config.insert("placement".into(), "slab-end".into());
    write_manifest(&args.out, "gen-channels", config, Some(cfg.seed), vec![])?;
    println!(
        "wrote {} realizations of a {}x{} channel to {}",
        cfg.realizations,
        modes.len(),
        modes.len(),
        args.out.display()
    );
    Ok(0)
}

fn load_bank(path: &Path) -> Result<(ChannelEnsemble, crate::propagate::ChannelBankHeader), String> {
    let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut r = BufReader::new(file);
    let (reals, header) = read_channel_bank(&mut r).map_err(|e| e.to_string())?;
    let ensemble = ChannelEnsemble::new(reals).map_err(|e| e.to_string())?;
    Ok((ensemble, header))
}

fn cmd_mdl_map(args: MdlMapArgs) -> Result<i32, String> {
    let (ensemble, header) = load_bank(&args.bank)?;
    let map = pairwise_mdl_map(&ensemble).map_err(|e| e.to_string())?;
    let charges = ensemble.charges();
    let mut out = String::new();
    out.push_str("p\\q");
    for c in charges {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for (i, ci) in charges.iter().enumerate() {
        out.push_str(&ci.to_string());
        for j in 0..charges.len() {
            if i == j {
                out.push(',');
            } else {
                out.push_str(&format!(",{:.6}", map[(i, j)]));
            }
        }
        out.push('\n');
    }
    fs::write(&args.out, out).map_err(|e| format!("{}: {e}", args.out.display()))?;

    let mut config = BTreeMap::new();
    config.insert("bank".into(), args.bank.display().to_string());
    config.insert("cn2".into(), header.cn2.to_string());
    config.insert("realizations".into(), header.count.to_string());
    write_manifest(
        &args.out,
        "mdl-map",
        config,
        Some(header.master_seed),
        vec![fingerprint(&args.bank)?],
    )?;
    println!("wrote {}x{} MDL map to {}", charges.len(), charges.len(), args.out.display());
    Ok(0)
}

fn cmd_select_modes(args: SelectModesArgs) -> Result<i32, String> {
    let (ensemble, header) = load_bank(&args.bank)?;
    let selection = select_modes(&ensemble, args.m).map_err(|e| e.to_string())?;
    let stderr = ensemble_mdl_stderr(&ensemble, &selection.modes, args.resamples, header.master_seed)
        .map_err(|e| e.to_string())?;
    // One-line result record.
    println!(
        "select-modes M={} cn2={:e} modes={} mdl_db={:.4} stderr_db={:.4} realizations={} searched={}",
        args.m,
        header.cn2,
        selection.modes,
        selection.mdl_db,
        stderr,
        ensemble.len(),
        selection.subsets_searched,
    );
    Ok(0)
}

fn cmd_ber(args: BerArgs, allow_flags: bool) -> Result<i32, String> {
    let kv = match &args.config {
        Some(path) => parse_kv_file(path)?,
        None => BTreeMap::new(),
    };
    let mut inputs = Vec::new();
    let (channels, bank_desc) = match &args.bank {
        Some(path) => {
            inputs.push(fingerprint(path)?);
            let (ensemble, header) = load_bank(path)?;
            let reals = match &args.subset {
                Some(s) => {
                    let subset = ModeSet::new(parse_charges(s)?);
                    ensemble
                        .realizations()
                        .iter()
                        .map(|h| crate::mdl::submatrix(h, &subset))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| e.to_string())?
                }
                None => ensemble.realizations().to_vec(),
            };
            let (normalized, scale) = normalize_ensemble(&reals).map_err(|e| e.to_string())?;
            log::info!("ensemble of {} realizations, normalization scale {scale:.6e}", normalized.len());
            (
                normalized,
                format!("{} (cn2={:e}, count={})", path.display(), header.cn2, header.count),
            )
        }
        None => {
            let modes: Vec<ModeIndex> = (0..args.identity_modes as i32).map(ModeIndex::oam).collect();
            (
                vec![crate::propagate::ChannelMatrix::identity(modes)],
                "identity".to_string(),
            )
        }
    };
    let m = channels[0].dim();
    let code_name = kv.get("code").cloned().unwrap_or_else(|| args.code.clone());
    let code = code_spec(&code_name, m)?;
    if code.modes() != m {
        return Err(format!(
            "code {} expects {} modes but the channel has {m}",
            code.name(),
            code.modes()
        ));
    }
    let snr_spec = kv.get("snr").cloned().unwrap_or_else(|| args.snr.clone());
    let grid = parse_snr_grid(&snr_spec)?;
    let seed = args.seed.or(kv_get(&kv, "seed")?).unwrap_or(1);
    let min_errors = args.min_errors.or(kv_get(&kv, "min_errors")?).unwrap_or(100);
    let max_bits = args.max_bits.or(kv_get(&kv, "max_bits")?).unwrap_or(10_000_000);

    let mut cfg = SimConfig::new(code, grid, seed)
        .map_err(|e| e.to_string())?
        .with_min_errors(min_errors)
        .with_max_codewords((max_bits / code.bits_per_codeword() as u64).max(1));
    if args.as_printed {
        cfg.normalization = NormalizationPolicy::AsPrinted;
    }

    let points = run_sweep(&cfg, &channels).map_err(|e| e.to_string())?;
    let file = fs::File::create(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_ber_csv(&mut w, &points).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;

    let capped = points.iter().filter(|p| p.capped).count();
    let rank_deficient: u64 = points.iter().map(|p| p.rank_deficient).sum();
    let mut config = BTreeMap::new();
    config.insert("code".into(), code.name().to_string());
    config.insert("snr".into(), snr_spec);
    config.insert("min_errors".into(), min_errors.to_string());
    config.insert("max_bits".into(), max_bits.to_string());
    config.insert("channel".into(), bank_desc);
    config.insert(
        "normalization".into(),
        match cfg.normalization {
            NormalizationPolicy::CodebookEnergy => "codebook-energy".into(),
            NormalizationPolicy::AsPrinted => "as-printed".into(),
        },
    );
    if let Some(subset) = &args.subset {
        config.insert("subset".into(), subset.clone());
    }
    write_manifest(&args.out, "ber", config, Some(seed), inputs)?;

    for p in &points {
        println!(
            "snr {:6.2} dB: ber {:.3e} ({} errors / {} bits){}",
            p.snr_db,
            p.ber,
            p.errors,
            p.bits,
            if p.capped { " [capped]" } else { "" }
        );
    }
    if (capped > 0 || rank_deficient > 0) && !allow_flags {
        eprintln!(
            "flags raised: {capped} capped points, {rank_deficient} rank-deficient trials \
             (pass --allow-flags to exit 0)"
        );
        return Ok(EXIT_FLAGGED);
    }
    Ok(0)
}

fn cmd_mindet(args: MindetArgs) -> Result<i32, String> {
    let constellation = Constellation::qpsk();
    let code = code_spec(&args.code, 2)?;
    let report = match code {
        CodeSpec::Golden | CodeSpec::Silver => min_determinant(&code, &constellation),
        CodeSpec::Tast3 => min_determinant_sampled(&code, &constellation, args.pairs, args.seed),
        CodeSpec::Uncoded { .. } => return Err("mindet applies to golden|silver|tast3".into()),
    };
    println!(
        "{}: min|det|={:.9} min|det|^2={:.9} normalized={:.9} energy/use={:.6} pairs={}",
        code.name(),
        report.min_abs_det,
        report.min_det_sq,
        report.normalized,
        codebook_energy_per_use(&code),
        report.pairs_scanned,
    );
    Ok(0)
}

// Re-exported for integration tests of parsing helpers.
#[doc(hidden)]
pub mod parse {
    pub use super::{parse_charges, parse_kv_file, parse_snr_grid};
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charge_parsing() {
        assert_eq!(parse_charges("-2..2").unwrap(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(parse_charges("-10, -5,0 ,5,10").unwrap(), vec![-10, -5, 0, 5, 10]);
        assert!(parse_charges("5..1").is_err());
        assert!(parse_charges("a,b").is_err());
    }

    #[test]
    fn snr_parsing() {
        assert_eq!(parse_snr_grid("0:5:10").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_snr_grid("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_snr_grid("10:0:1").is_err());
    }

    #[test]
    fn kv_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "# comment\nseed = 7\ncn2=1e-13\n\n").unwrap();
        let kv = parse_kv_file(&path).unwrap();
        assert_eq!(kv.get("seed").unwrap(), "7");
        assert_eq!(kv.get("cn2").unwrap(), "1e-13");
    }

    #[test]
    fn manifest_path_appends() {
        assert_eq!(
            manifest_path(Path::new("out/bank.oamh")),
            PathBuf::from("out/bank.oamh.manifest.json")
        );
    }
}
