use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::json;

use pfrecon::fft::{fft_centered, ifft_centered};
use pfrecon::io::{read_volume, write_magnitude_pgm, write_volume};
use pfrecon::metrics::recon_error;
use pfrecon::parallel::{parallel_pipeline, ParallelConfig, ParallelMethod};
use pfrecon::pcmra::{pcmra_pipeline, real_map_volume, FlowPhase, PcmraConfig, PcmraMethod, SpeedWeighting};
use pfrecon::phantoms::{coil_maps, disc_support, phantom_image, FlowPhantomSpec, PhantomSpec};
use pfrecon::recon::{reconstruct, Method, ReconConfig};
use pfrecon::sampling::{acquisition_mask, apply_mask, AcquiredSide, AxisSampling, SamplingSpec};
use pfrecon::sweep::{
    fraction_csv, gamma_csv, intensity_vs_gamma, sweep_fraction, sweep_fraction_pcmra, write_bytes,
};
use pfrecon::{ComplexVolume, Error, Result, Space};

#[derive(Parser)]
#[command(name = "pfrecon", version, about = "Partial-Fourier MRI reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Fraction,
    Gamma,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a disc phantom image (and optionally its k-space).
    PhantomGen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write `<out>_k.cplx`.
        #[arg(long)]
        kspace: bool,
    },
    /// Apply a sampling mask to a k-space.
    Truncate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct an image from a partial k-space.
    Recon {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
        /// Full k-space or image used to report the reconstruction error.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Simulate a multichannel acquisition with GRAPPA and phase correction.
    ParallelSim {
        #[arg(long)]
        phantom: PathBuf,
        #[arg(long, default_value_t = 4)]
        coils: usize,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a four-point phase-contrast angiogram.
    PcmraSim {
        #[arg(long)]
        phantom: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        /// compensated | restored | zero_filled
        #[arg(long)]
        flow_phase: Option<String>,
        /// plain | proton_density
        #[arg(long)]
        speed_weighting: Option<String>,
    },
    /// Run an error-vs-fraction or intensity-vs-gamma sweep.
    Sweep {
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Comma-separated fractions or gammas.
        #[arg(long)]
        grid: String,
        /// Comma-separated method names.
        #[arg(long)]
        methods: String,
        #[arg(long)]
        out: PathBuf,
        /// Phantom spec JSON (disc phantom, or flow phantom with --pcmra).
        #[arg(long)]
        phantom: Option<PathBuf>,
        /// Reconstruction config JSON; its sampling selects truncated axes and sides.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Boost factor for fraction sweeps.
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Fraction for gamma sweeps.
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,
        /// Sweep the 3D PC-MRA pipeline instead of the 2D phantom.
        #[arg(long)]
        pcmra: bool,
        /// Add a runtime column (makes the CSV run-dependent).
        #[arg(long)]
        with_timing: bool,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn report_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_report(out: &Path, value: &impl serde::Serialize) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    write_bytes(&bytes, report_path(out))
}

fn parse_list<T>(text: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::InvalidSpec(format!("not a number: {s:?}")))
}

fn parse_named<T: DeserializeOwned>(s: &str) -> Result<T> {
    Ok(serde_json::from_value(serde_json::Value::String(s.to_string()))?)
}

fn default_2d_sampling() -> SamplingSpec {
    SamplingSpec::new(vec![
        AxisSampling::truncated(1, AcquiredSide::Positive),
        AxisSampling::truncated(1, AcquiredSide::Negative),
    ])
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::PhantomGen { spec, out, kspace } => {
            let start = Instant::now();
            let phantom: PhantomSpec = read_json(&spec)?;
            if pfrecon::io::cplx_paths(&with_suffix(&out, ".cplx")).0 == spec {
                return Err(Error::InvalidSpec(format!(
                    "output sidecar would overwrite the spec file {}",
                    spec.display()
                )));
            }
            let image = phantom_image(&phantom)?;
            write_volume(&image, with_suffix(&out, ".cplx"))?;
            if kspace {
                write_volume(&fft_centered(&image)?, with_suffix(&out, "_k.cplx"))?;
            }
            write_report(
                &out,
                &json!({
                    "command": "phantom-gen",
                    "config": phantom,
                    "kspace": kspace,
                    "runtime_ms": start.elapsed().as_secs_f64() * 1e3,
                }),
            )
        }
        Command::Truncate { input, spec, out } => {
            let start = Instant::now();
            let k = read_volume(&input)?;
            let sampling: SamplingSpec = read_json(&spec)?;
            let mask = acquisition_mask(k.dims(), &sampling)?;
            write_volume(&apply_mask(&k, &mask)?, &out)?;
            write_report(
                &out,
                &json!({
                    "command": "truncate",
                    "input": input,
                    "config": sampling,
                    "kept_fraction": mask.kept_fraction(),
                    "band_fraction": sampling.band_fraction(k.dims()),
                    "runtime_ms": start.elapsed().as_secs_f64() * 1e3,
                }),
            )
        }
        Command::Recon {
            input,
            method,
            config,
            out,
            pgm,
            reference,
        } => {
            let start = Instant::now();
            let kpk = read_volume(&input)?;
            let method: Method = method.parse()?;
            let cfg: ReconConfig = read_json(&config)?;
            let recon = reconstruct(&kpk, method, &cfg)?;
            write_volume(&recon.image, &out)?;
            if let Some(p) = &pgm {
                write_magnitude_pgm(&recon.image, p)?;
            }
            let error = match &reference {
                Some(path) => {
                    let r = read_volume(path)?;
                    let r = match r.space() {
                        Space::Kspace => ifft_centered(&r)?,
                        Space::Image => r,
                    };
                    Some(recon_error(&r, &recon.image)?)
                }
                None => None,
            };
            write_report(
                &out,
                &json!({
                    "command": "recon",
                    "method": method.name(),
                    "input": input,
                    "spec": cfg.sampling,
                    "error": error,
                    "runtime_ms": start.elapsed().as_secs_f64() * 1e3,
                    "config": cfg,
                    "details": recon.details,
                }),
            )
        }
        Command::ParallelSim {
            phantom,
            coils,
            spec,
            method,
            out,
        } => {
            let phantom: PhantomSpec = read_json(&phantom)?;
            let sampling: SamplingSpec = read_json(&spec)?;
            let method: ParallelMethod = method.parse()?;
            let image = phantom_image(&phantom)?;
            let coil_set = coil_maps(&phantom.grid, coils)?;
            let cfg = ParallelConfig::new(sampling);
            let outcome = parallel_pipeline(&image, &coil_set, &cfg, method, Some(&disc_support(&phantom)))?;
            let combined = ComplexVolume::from_real(&outcome.combined, Space::Image)?;
            write_volume(&combined, with_suffix(&out, ".cplx"))?;
            if combined.ndim() == 2 {
                write_magnitude_pgm(&combined, with_suffix(&out, ".pgm"))?;
            }
            write_report(
                &out,
                &json!({
                    "command": "parallel-sim",
                    "phantom": phantom,
                    "coils": coils,
                    "report": outcome.report,
                }),
            )
        }
        Command::PcmraSim {
            phantom,
            spec,
            method,
            out,
            flow_phase,
            speed_weighting,
        } => {
            let flow: FlowPhantomSpec = read_json(&phantom)?;
            let sampling: SamplingSpec = read_json(&spec)?;
            let method: PcmraMethod = method.parse()?;
            let mut cfg = PcmraConfig::new(sampling);
            if let Some(s) = flow_phase {
                cfg.flow_phase = parse_named::<FlowPhase>(&s)?;
            }
            if let Some(s) = speed_weighting {
                cfg.speed_weighting = parse_named::<SpeedWeighting>(&s)?;
            }
            let outcome = pcmra_pipeline(&flow, &cfg, method)?;
            for (name, map) in ["_vx", "_vy", "_vz"].iter().zip(&outcome.flow.velocity) {
                write_volume(&real_map_volume(map)?, with_suffix(&out, &format!("{name}.cplx")))?;
            }
            write_volume(&real_map_volume(&outcome.speed)?, with_suffix(&out, "_speed.cplx"))?;
            let projected = real_map_volume(&outcome.mip)?;
            write_volume(&projected, with_suffix(&out, "_mip.cplx"))?;
            write_magnitude_pgm(&projected, with_suffix(&out, "_mip.pgm"))?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            write_report(
                &out,
                &json!({
                    "command": "pcmra-sim",
                    "report": outcome.report,
                }),
            )
        }
        Command::Sweep {
            mode,
            grid,
            methods,
            out,
            phantom,
            config,
            gamma,
            fraction,
            pcmra,
            with_timing,
        } => {
            let start = Instant::now();
            let values = parse_list(&grid, parse_f64)?;
            let (csv, echo) = if pcmra {
                if matches!(mode, SweepMode::Gamma) {
                    return Err(Error::InvalidSpec("gamma sweeps use the 2D phantom".into()));
                }
                let flow: FlowPhantomSpec = match &phantom {
                    Some(p) => read_json(p)?,
                    None => FlowPhantomSpec::default_3d(),
                };
                let template: PcmraConfig = match &config {
                    Some(p) => read_json(p)?,
                    None => PcmraConfig::eighth_truncation(&flow.grid),
                };
                let methods = parse_list(&methods, |s| s.parse::<PcmraMethod>())?;
                let rows = sweep_fraction_pcmra(&flow, &template, &methods, &values)?;
                (
                    fraction_csv(&rows, with_timing)?,
                    json!({"phantom": flow, "config": template}),
                )
            } else {
                let base: PhantomSpec = match &phantom {
                    Some(p) => read_json(p)?,
                    None => PhantomSpec::default_2d(),
                };
                let template: ReconConfig = match &config {
                    Some(p) => read_json(p)?,
                    None => ReconConfig::new(default_2d_sampling()),
                };
                let methods = parse_list(&methods, |s| s.parse::<Method>())?;
                match mode {
                    SweepMode::Fraction => {
                        let p = base.with_gamma(gamma);
                        let rows = sweep_fraction(&p, &template, &methods, &values)?;
                        (fraction_csv(&rows, with_timing)?, json!({"phantom": p, "config": template}))
                    }
                    SweepMode::Gamma => {
                        let rows = intensity_vs_gamma(&base, &template, &methods, &values, fraction)?;
                        (
                            gamma_csv(&rows, with_timing)?,
                            json!({"phantom": base, "config": template, "fraction": fraction}),
                        )
                    }
                }
            };
            write_bytes(&csv, &out)?;
            write_report(
                &out,
                &json!({
                    "command": "sweep",
                    "mode": match mode { SweepMode::Fraction => "fraction", SweepMode::Gamma => "gamma" },
                    "grid": values,
                    "methods": methods,
                    "pcmra": pcmra,
                    "with_timing": with_timing,
                    "echo": echo,
                    "runtime_ms": start.elapsed().as_secs_f64() * 1e3,
                }),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
