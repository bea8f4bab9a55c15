use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

use nearfield_ca::baselines::Method;
use nearfield_ca::bench::{parse_snr_list, run_monte_carlo, MonteCarloConfig};
use nearfield_ca::covariance::CovarianceBundle;
use nearfield_ca::geometry::{
    build_coprime_layout, difference_coarray, max_targets, wavelength_from_ghz, CoprimeParams, SegmentPolicy,
};
use nearfield_ca::music::{localize_from_bundle, LocalizerConfig, PseudoSpectrum};
use nearfield_ca::scenario::Scenario;
use nearfield_ca::Execution;

#[derive(Parser)]
#[command(name = "nfca", version, about = "Near-field localization with symmetric coprime arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the array layout, coarray and field boundaries
    Geometry(GeometryArgs),
    /// Synthesize snapshots and write them as CSV (sensor, t, re, im)
    Simulate(SimulateArgs),
    /// Run the localizer and write its spectra and classified targets
    Spectrum(SpectrumArgs),
    /// Monte Carlo RMSE sweep over SNR and methods
    Montecarlo(MonteCarloArgs),
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Unit spacing in millimetres (defaults to a quarter wavelength)
    #[arg(long)]
    d_mm: Option<f64>,
    /// Carrier frequency in GHz (defaults to a wavelength of 4 d)
    #[arg(long)]
    freq_ghz: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario SNR
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON file with localizer settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Declared target count; defaults to the scenario's
    #[arg(long)]
    k: Option<usize>,
    /// Do not declare the target count
    #[arg(long, conflicts_with = "k")]
    unknown_k: bool,
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write R_hat, R_d and R_v as CSV (row, col, re, im)
    #[arg(long)]
    dump_covariance: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// SNR list as lo:step:hi or comma separated values
    #[arg(long, allow_hyphen_values = true, default_value = "-10:5:20")]
    snr: String,
    #[arg(long, default_value_t = 100)]
    q: usize,
    #[arg(long, value_delimiter = ',', default_value = "proposed,dense,farfield,subarray")]
    methods: Vec<Method>,
    /// Summary CSV
    #[arg(long)]
    out: PathBuf,
    /// Per-trial JSON lines
    #[arg(long)]
    trials_out: Option<PathBuf>,
    /// Optional JSON file with localizer settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; defaults to the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sequential: bool,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Geometry(a) => geometry(a),
        Command::Simulate(a) => simulate(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Montecarlo(a) => montecarlo(a),
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("reading scenario {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<LocalizerConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(LocalizerConfig::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn geometry(a: GeometryArgs) -> Result<()> {
    let (d, lambda) = match (a.d_mm, a.freq_ghz) {
        (Some(d), Some(f)) => (d * 1e-3, wavelength_from_ghz(f)),
        (Some(d), None) => (d * 1e-3, 4e-3 * d),
        (None, Some(f)) => (wavelength_from_ghz(f) / 4.0, wavelength_from_ghz(f)),
        (None, None) => bail!("one of --d-mm or --freq-ghz is required"),
    };
    let params = CoprimeParams::new(a.m, a.n, d, lambda)?;
    let layout = build_coprime_layout(&params);
    let coarray = difference_coarray(&layout, SegmentPolicy::Nominal);
    let (kv, kp) = max_targets(params.m, params.n);
    if a.json {
        let v = json!({
            "M": params.m,
            "N": params.n,
            "d_m": d,
            "lambda_m": lambda,
            "U": layout.len(),
            "indices": layout.indices(),
            "positions_m": layout.positions(),
            "aperture_m": layout.aperture(),
            "fresnel_distance_m": layout.fresnel_distance(),
            "rayleigh_distance_m": layout.rayleigh_distance(),
            "coarray_lags": coarray.lags,
            "coarray_multiplicity": coarray.multiplicity,
            "consecutive_half_width": coarray.run_half_width,
            "segment_length": coarray.segment_length(),
            "k_virtual": kv,
            "k_physical": kp,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("M = {}, N = {}, d = {} m, lambda = {} m", params.m, params.n, d, lambda);
        println!("U = {}", layout.len());
        println!("sensors (units of d): {:?}", layout.indices());
        println!("aperture D = {} m", layout.aperture());
        println!("Z_F = {} m, Z_R = {} m", layout.fresnel_distance(), layout.rayleigh_distance());
        println!("coarray: {} distinct lags, consecutive run -{h}..{h}", coarray.lags.len(), h = coarray.run_half_width);
        println!("smoothing segment length = {}", coarray.segment_length());
        println!("K_v = {kv}, K_p = {kp}");
    }
    Ok(())
}

fn with_overrides(mut s: Scenario, snr: Option<f64>, seed: Option<u64>) -> Scenario {
    if snr.is_some() {
        s.snr_db = snr;
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let s = with_overrides(load_scenario(&a.scenario)?, a.snr, a.seed);
    let (_, snaps) = s.simulate()?;
    let mut w = create(&a.out)?;
    writeln!(w, "sensor,t,re,im")?;
    for t in 0..snaps.y.ncols() {
        for u in 0..snaps.y.nrows() {
            let v = snaps.y[(u, t)];
            writeln!(w, "{u},{t},{},{}", v.re, v.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum(path: &Path, header: &str, spec: &PseudoSpectrum) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header},p_db")?;
    for (x, p) in spec.axis.iter().zip(spec.to_db()) {
        writeln!(w, "{x},{p}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix(path: &Path, m: &DMatrix<Complex64>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "row,col,re,im")?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            writeln!(w, "{i},{j},{},{}", v.re, v.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let s = with_overrides(load_scenario(&a.scenario)?, a.snr, a.seed);
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.execution = execution(a.sequential);
    if a.unknown_k {
        cfg.num_targets = None;
    } else {
        cfg.num_targets = Some(a.k.or(cfg.num_targets).unwrap_or(s.targets.len()));
    }
    let (layout, snaps) = s.simulate()?;
    let coarray = difference_coarray(&layout, cfg.segment);
    let bundle = CovarianceBundle::build(&snaps, &layout, &coarray, cfg.estimator, cfg.reduction)?;
    let grid = cfg.grid_for(&layout)?;
    let spacing = coarray.step as f64 * layout.d();
    let result = localize_from_bundle(&bundle, &layout, spacing, &grid, &cfg)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if let Some(spec) = &result.angle_spectrum {
        write_spectrum(&a.out.join("angle_spectrum.csv"), "theta_deg", spec)?;
    }
    for (i, spec) in result.range_spectra.iter().enumerate() {
        write_spectrum(&a.out.join(format!("range_spectrum_{i:02}.csv")), "range_m", spec)?;
    }
    let mut w = create(&a.out.join("result.json"))?;
    serde_json::to_writer_pretty(&mut w, &result)?;
    writeln!(w)?;
    w.flush()?;
    if a.dump_covariance {
        write_matrix(&a.out.join("r_hat.csv"), &bundle.r_hat)?;
        write_matrix(&a.out.join("r_d.csv"), &bundle.r_d)?;
        write_matrix(&a.out.join("r_v.csv"), &bundle.r_v)?;
    }
    for c in &result.classified {
        println!("{:>8.3} deg  {:>8.3} m  {:?}  {:.1} dB", c.theta_deg, c.r_m, c.label, c.significance_db);
    }
    Ok(())
}

fn montecarlo(a: MonteCarloArgs) -> Result<()> {
    let s = load_scenario(&a.scenario)?;
    if a.q == 0 {
        bail!("--q must be at least 1");
    }
    let cfg = MonteCarloConfig {
        trials: a.q,
        snr_db: parse_snr_list(&a.snr)?,
        methods: a.methods,
        base_seed: a.seed.unwrap_or(s.seed),
        localizer: load_config(a.config.as_deref())?,
        execution: execution(a.sequential),
        ..MonteCarloConfig::default()
    };
    let report = run_monte_carlo(&s, &cfg)?;
    report.write_csv(create(&a.out)?)?;
    if let Some(path) = &a.trials_out {
        let mut w = create(path)?;
        report.write_trials_jsonl(&mut w)?;
        w.flush()?;
    }
    let failures: usize = report.rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        log::warn!("{failures} trials failed; see the per-trial dump");
    }
    Ok(())
}
