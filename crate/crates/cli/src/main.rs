use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hfloquet::compile::compile_stats;
use hfloquet::config::{ExperimentConfig, JGrid, Limits, PatchSpec};
use hfloquet::estimators::{collision_entropy, collision_estimate_batched, EntropyBase, StderrMode, DEFAULT_BATCHES};
use hfloquet::io::{emit_plot_data, read_counts_file, read_record, write_counts, write_counts_file, write_record};
use hfloquet::mitigation::{
    apply_bitflip_channel, fit_pflip, lec_calibrate_global, FlipModel, MitigationOptions, MitigationReport,
    MitigatorRegistry, PatchSeries, ReportRow, DEFAULT_LEC_ANCHOR,
};
use hfloquet::rmt::{gap_ratios, write_refs_table, HaarRefs, MeanSe, CUE_MEAN_R, POISSON_MEAN_R};
use hfloquet::rng::realization_seed;
use hfloquet::spectrum::floquet_eigenphases_with_cap;
use hfloquet::state::neel_bits;
use hfloquet::sweep::run_sweep;
use hfloquet::estimators::DiagnosticCurve;
use hfloquet::{Error, FloquetCircuit, LatticeSpec, Patch, Result, SampleSet, SectorState};

/// Disordered Heisenberg Floquet circuits: simulation, spectra, marginal
/// collision entropies and readout-noise mitigation.
///
/// Couplings are given as J/pi. Resource caps come from HFLOQUET_MAX_QUBITS,
/// HFLOQUET_MAX_SECTOR_DIM and HFLOQUET_MAX_SPECTRUM_DIM.
#[derive(Parser)]
#[command(name = "hfloquet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the Neel state and write sampled bitstring counts.
    Simulate(SimulateArgs),
    /// Mean gap ratio of the Floquet operator over disorder realizations.
    Spectrum(SpectrumArgs),
    /// Collision moments and entropies of patches from a counts file.
    Estimate(EstimateArgs),
    /// Apply a mitigation strategy to a counts file or a sweep record.
    Mitigate(MitigateArgs),
    /// Print random-matrix reference values.
    Benchmark(BenchmarkArgs),
    /// Run a parameter sweep from a TOML config and/or flags.
    Sweep(Box<SweepArgs>),
    /// Validate a counts file and summarize it.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long)]
    lx: usize,
    #[arg(long)]
    ly: usize,
}

impl LatticeArgs {
    fn build(&self, limits: &Limits) -> Result<LatticeSpec> {
        LatticeSpec::with_budget(self.lx, self.ly, limits.max_qubits)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Coupling J/pi.
    #[arg(long)]
    j: f64,
    #[arg(long, default_value_t = 1)]
    n_f: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    n_s: usize,
    /// Terminal bit-flip probability applied to the samples.
    #[arg(long, default_value_t = 0.0)]
    noise_p: f64,
    /// Counts file to write; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the final state as a binary checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Print CZ count and depth of the compiled circuit to stderr.
    #[arg(long)]
    compile_stats: bool,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Coupling J/pi.
    #[arg(long)]
    j: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    /// Excitation number of the sector; half filling when omitted.
    #[arg(long)]
    sector: Option<usize>,
    /// Drop the spacing that wraps around the circle.
    #[arg(long)]
    no_wrap: bool,
}

#[derive(Args)]
struct PatchArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Patch as `WxH` (central), `WxH:x,y`, `WxH:all` or `WxH:all:N`. Repeatable.
    #[arg(long = "patch", default_value = "1x1")]
    patches: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PatchArgs {
    fn resolve(&self, limits: &Limits) -> Result<(LatticeSpec, Vec<Patch>)> {
        let lattice = self.lattice.build(limits)?;
        let mut out = Vec::new();
        for p in &self.patches {
            let (shape, placement) = p.split_once(':').unwrap_or((p, "central"));
            out.extend(PatchSpec::new(shape, placement).resolve(&lattice, self.seed)?);
        }
        Ok((lattice, out))
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    counts: PathBuf,
    #[command(flatten)]
    patches: PatchArgs,
    /// Renyi orders k, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCHES)]
    batches: usize,
    #[arg(long, default_value = "batch")]
    stderr_mode: StderrMode,
    #[arg(long, default_value = "bits")]
    base: EntropyBase,
}

#[derive(Args)]
struct MitigateArgs {
    /// none | hamming | parseval-hamming | lec
    #[arg(long)]
    mitigation: String,
    /// Counts file (point-wise strategies).
    #[arg(long, conflicts_with = "record")]
    counts: Option<PathBuf>,
    /// Sweep record (curve strategies such as lec).
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    lx: Option<usize>,
    #[arg(long)]
    ly: Option<usize>,
    #[arg(long = "patch", default_value = "1x1")]
    patches: Vec<String>,
    /// Coupling J/pi the counts were taken at; only labels the output.
    #[arg(long, default_value_t = 0.0)]
    j: f64,
    #[arg(long, default_value_t = DEFAULT_BATCHES)]
    batches: usize,
    /// LEC anchor J0/pi; must be a grid point of the record.
    #[arg(long, default_value_t = DEFAULT_LEC_ANCHOR / PI)]
    lec_anchor_over_pi: f64,
    /// per-patch | global
    #[arg(long, default_value = "per-patch")]
    lec_mode: String,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Largest total qubit count in the table.
    #[arg(long, default_value_t = 16)]
    n_max: u64,
    /// Restrict to one patch size.
    #[arg(long)]
    n_a: Option<u64>,
    /// Also print the reference gap-ratio means.
    #[arg(long)]
    gap_ratios: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lx: Option<usize>,
    #[arg(long)]
    ly: Option<usize>,
    #[arg(long)]
    j_start: Option<f64>,
    #[arg(long)]
    j_stop: Option<f64>,
    #[arg(long)]
    j_count: Option<usize>,
    #[arg(long)]
    n_f: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Patch as `WxH[:placement]`. Repeatable; replaces the config list.
    #[arg(long = "patch")]
    patches: Vec<String>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    n_s: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    stderr_mode: Option<StderrMode>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long)]
    base: Option<EntropyBase>,
    #[arg(long)]
    mitigation: Option<String>,
    #[arg(long)]
    noise_p: Option<f64>,
    #[arg(long)]
    lec_anchor_over_pi: Option<f64>,
    #[arg(long)]
    lec_mode: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    spectrum: bool,
    #[arg(long)]
    porter_thomas: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    counts: PathBuf,
    /// Rewrite the file in canonical form.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Ideal Hamming weight for the bit-flip fit; n/2 when omitted.
    #[arg(long)]
    weight: Option<usize>,
}

fn stdout() -> BufWriter<io::StdoutLock<'static>> {
    BufWriter::new(io::stdout().lock())
}

fn simulate(a: SimulateArgs, limits: Limits) -> Result<()> {
    let lattice = a.lattice.build(&limits)?;
    let circuit = FloquetCircuit::build(&lattice, a.j * PI, a.n_f, a.seed)?;
    if a.compile_stats {
        let s = compile_stats(&circuit);
        eprintln!("cz_count {} cz_depth {} one_qubit {}", s.cz_count, s.cz_depth, s.one_qubit_count);
    }
    let mut state = SectorState::neel_with_cap(&lattice, limits.max_sector_dim)?;
    state.evolve(&circuit)?;
    if let Some(path) = &a.checkpoint {
        let mut w = BufWriter::new(File::create(path)?);
        state.write_checkpoint(&mut w)?;
        w.flush()?;
    }
    let mut samples = state.sample(a.n_s, a.seed)?;
    if a.noise_p > 0.0 {
        samples = apply_bitflip_channel(&samples, a.noise_p, a.seed)?;
    }
    match &a.output {
        Some(path) => write_counts_file(path, &samples),
        None => {
            let mut w = stdout();
            write_counts(&mut w, &samples)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn spectrum(a: SpectrumArgs, limits: Limits) -> Result<()> {
    let lattice = a.lattice.build(&limits)?;
    let m = a.sector.unwrap_or(lattice.n() / 2);
    let mut w = stdout();
    writeln!(w, "realization\tJ_over_pi\tdim\tmean_r")?;
    let mut means = Vec::new();
    for r in 0..a.realizations {
        let c = FloquetCircuit::build(&lattice, a.j * PI, 1, realization_seed(a.seed, r as u64))?;
        let set = floquet_eigenphases_with_cap(&c, m, limits.max_spectrum_dim)?;
        let stats = gap_ratios(&set.phases, !a.no_wrap)?;
        writeln!(w, "{r}\t{:?}\t{}\t{:?}", a.j, set.phases.len(), stats.mean)?;
        means.push(stats.mean);
    }
    let s = MeanSe::of(&means);
    writeln!(w, "# mean_r {:?} stderr {:?} poisson {POISSON_MEAN_R:?} cue {CUE_MEAN_R:?}", s.mean, s.stderr)?;
    w.flush()?;
    Ok(())
}

fn estimate(a: EstimateArgs, limits: Limits) -> Result<()> {
    let samples = read_counts_file(&a.counts)?;
    let (lattice, patches) = a.patches.resolve(&limits)?;
    check_width(&samples, &lattice, &a.counts)?;
    let mut w = stdout();
    writeln!(w, "patch\tk\tn_s\tvalue\tstderr\tentropy")?;
    for p in &patches {
        let restricted = samples.restrict(p)?;
        for &k in &a.orders {
            let b = a.batches.min(samples.len() / k.max(1)).max(1);
            let est = collision_estimate_batched(&restricted, k, b)?;
            let entropy = collision_entropy(est.value, k, a.base).unwrap_or(f64::NAN);
            writeln!(w, "{}\t{k}\t{}\t{:?}\t{:?}\t{entropy:?}", p.label(), est.n_s, est.value, est.stderr(a.stderr_mode))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_width(samples: &SampleSet, lattice: &LatticeSpec, path: &Path) -> Result<()> {
    if samples.n() != lattice.n() {
        return Err(Error::format(path, 0, format!("bitstrings have {} qubits, lattice has {}", samples.n(), lattice.n())));
    }
    Ok(())
}

fn mitigate(a: MitigateArgs, limits: Limits) -> Result<()> {
    let registry = MitigatorRegistry::with_defaults();
    let mut report = MitigationReport { mode: a.mitigation.clone(), params: Default::default(), rows: Vec::new() };
    match (&a.counts, &a.record) {
        (Some(path), None) => {
            let mitigator = registry.create(&a.mitigation, &MitigationOptions::default())?;
            if !mitigator.per_point() {
                return Err(Error::param(format!("`{}` needs a sweep record (--record)", a.mitigation)));
            }
            let (lx, ly) = a.lx.zip(a.ly).ok_or_else(|| Error::param("--lx and --ly are required with --counts"))?;
            let lattice = LatticeSpec::with_budget(lx, ly, limits.max_qubits)?;
            let samples = read_counts_file(path)?;
            check_width(&samples, &lattice, path)?;
            let weight = neel_bits(&lattice)?.count_ones() as usize;
            let j = a.j * PI;
            for spec in &a.patches {
                let (shape, placement) = spec.split_once(':').unwrap_or((spec, "central"));
                for patch in PatchSpec::new(shape, placement).resolve(&lattice, 0)? {
                    let b = a.batches.min(samples.len() / 2).max(1);
                    let est = collision_estimate_batched(&samples.restrict(&patch)?, 2, b)?;
                    let raw = DiagnosticCurve::new(vec![j], vec![est.value], vec![est.batch_stderr])?;
                    let sets = std::slice::from_ref(&samples);
                    let series = PatchSeries {
                        patch: &patch,
                        raw: &raw,
                        samples: Some(sets),
                        weight,
                        exact_anchor: None,
                        batches: a.batches,
                    };
                    let out = mitigator.mitigate(&series)?;
                    for (k, v) in &out.params {
                        report.params.insert(k.clone(), v[0]);
                    }
                    report.rows.push(ReportRow {
                        patch: patch.label(),
                        j,
                        raw: est.value,
                        mitigated: out.values[0],
                        stderr: out.stderr[0],
                        flags: out.flags[0].clone(),
                    });
                }
            }
        }
        (None, Some(path)) => {
            let record = read_record(path)?;
            let j0 = a.lec_anchor_over_pi * PI;
            let mut curves = Vec::new();
            for info in &record.patches {
                let entries = record.series(&info.label, 2);
                let raw = DiagnosticCurve::new(
                    entries.iter().map(|e| e.j_over_pi * PI).collect(),
                    entries.iter().map(|e| e.raw).collect(),
                    entries.iter().map(|e| e.raw_stderr).collect(),
                )?;
                let anchor = entries.iter().find(|e| (e.j_over_pi * PI - j0).abs() < 1e-12).map(|e| e.exact);
                let patch = Patch::from_qubits(info.qubits.clone(), record.n)?;
                curves.push((info.label.clone(), patch, raw, anchor));
            }
            let global = match a.lec_mode.as_str() {
                "per-patch" => None,
                "global" => {
                    let inputs: Vec<(&DiagnosticCurve, f64, usize)> = curves
                        .iter()
                        .map(|(_, p, raw, anchor)| {
                            anchor.map(|x| (raw, x, p.len())).ok_or_else(|| Error::Calibration("J0 is not on the grid".into()))
                        })
                        .collect::<Result<_>>()?;
                    Some(lec_calibrate_global(&inputs, j0)?)
                }
                other => return Err(Error::param(format!("unknown lec mode `{other}` (per-patch | global)"))),
            };
            let mitigator = registry.create(&a.mitigation, &MitigationOptions { lec_anchor: j0, lec_global: global })?;
            for (label, patch, raw, anchor) in &curves {
                let series =
                    PatchSeries { patch, raw, samples: None, weight: record.weight, exact_anchor: *anchor, batches: a.batches };
                let out = mitigator.mitigate(&series)?;
                for (k, v) in &out.params {
                    if let Some(x) = v.first() {
                        report.params.insert(format!("{label}.{k}"), *x);
                    }
                }
                for i in 0..raw.len() {
                    report.rows.push(ReportRow {
                        patch: label.clone(),
                        j: raw.j[i],
                        raw: raw.values[i],
                        mitigated: out.values[i],
                        stderr: out.stderr[i],
                        flags: out.flags[i].clone(),
                    });
                }
            }
        }
        _ => return Err(Error::param("exactly one of --counts or --record is required")),
    }
    let mut w = stdout();
    report.write_tsv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut rows = Vec::new();
    for n in 2..=a.n_max {
        for n_a in 1..n {
            if a.n_a.is_some_and(|x| x != n_a) {
                continue;
            }
            rows.push(HaarRefs::compute(n_a, n - n_a, n / 2)?);
        }
    }
    let mut w = stdout();
    write_refs_table(&mut w, &rows)?;
    if a.gap_ratios {
        writeln!(w, "# mean_r poisson {POISSON_MEAN_R:?} cue {CUE_MEAN_R:?}")?;
    }
    w.flush()?;
    Ok(())
}

fn sweep(a: SweepArgs, limits: Limits) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_toml(&fs::read_to_string(path)?)?,
        None => {
            let need = |x: Option<usize>, name: &str| x.ok_or_else(|| Error::param(format!("--{name} is required without --config")));
            let grid = JGrid {
                start: a.j_start.ok_or_else(|| Error::param("--j-start is required without --config"))?,
                stop: a.j_stop.unwrap_or(a.j_start.unwrap_or(0.0)),
                count: a.j_count.unwrap_or(1),
            };
            ExperimentConfig::new(need(a.lx, "lx")?, need(a.ly, "ly")?, grid, need(a.n_f, "n-f")?)
        }
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field.clone() { cfg.$field = v; } )* };
    }
    set!(lx, ly, n_f, seed, realizations, source, n_s, batches, stderr_mode, orders, base, mitigation, noise_p);
    set!(lec_anchor_over_pi, lec_mode, epsilon);
    if let Some(v) = a.j_start {
        cfg.j_grid.start = v;
    }
    if let Some(v) = a.j_stop {
        cfg.j_grid.stop = v;
    }
    if let Some(v) = a.j_count {
        cfg.j_grid.count = v;
    }
    if !a.patches.is_empty() {
        cfg.patches = a
            .patches
            .iter()
            .map(|p| {
                let (shape, placement) = p.split_once(':').unwrap_or((p, "central"));
                PatchSpec::new(shape, placement)
            })
            .collect();
    }
    cfg.spectrum |= a.spectrum;
    cfg.porter_thomas |= a.porter_thomas;
    if a.output_dir.is_some() {
        cfg.output_dir = a.output_dir.clone();
    }
    let record = run_sweep(&cfg, limits)?;
    match &cfg.output_dir {
        Some(dir) => {
            write_record(&dir.join("record.json"), &record)?;
            for path in emit_plot_data(&record, dir)? {
                log::info!("wrote {}", path.display());
            }
            let mut w = stdout();
            writeln!(w, "record {}", dir.join("record.json").display())?;
            writeln!(w, "config_hash {}", record.config_hash)?;
            w.flush()?;
        }
        None => {
            let mut w = stdout();
            writeln!(w, "{}", record.to_json()?)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let samples = read_counts_file(&a.counts)?;
    let histogram = samples.weight_histogram();
    let weight = a.weight.unwrap_or(samples.n() / 2);
    let h: Vec<f64> = histogram.iter().map(|&c| c as f64).collect();
    let fit: FlipModel = fit_pflip(&h, samples.n(), weight)?;
    let mut w = stdout();
    writeln!(w, "n\t{}", samples.n())?;
    writeln!(w, "n_s\t{}", samples.len())?;
    writeln!(w, "distinct\t{}", samples.counts().len())?;
    writeln!(w, "fitted_p\t{:?}", fit.p)?;
    if fit.at_boundary {
        writeln!(w, "# fit at the p = 1/2 boundary")?;
    }
    writeln!(w, "weight\tcount")?;
    for (h, c) in histogram.iter().enumerate() {
        writeln!(w, "{h}\t{c}")?;
    }
    w.flush()?;
    if let Some(out) = &a.output {
        write_counts_file(out, &samples)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let limits = Limits::from_env()?;
    match cli.command {
        Command::Simulate(a) => simulate(a, limits),
        Command::Spectrum(a) => spectrum(a, limits),
        Command::Estimate(a) => estimate(a, limits),
        Command::Mitigate(a) => mitigate(a, limits),
        Command::Benchmark(a) => benchmark(a),
        Command::Sweep(a) => sweep(*a, limits),
        Command::Ingest(a) => ingest(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
