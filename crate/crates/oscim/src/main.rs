//! `oscim` command line: instance generation, single trials, experiment
//! presets, and the fast identity suite.
//!
//! Human-readable progress goes to stderr; machine output goes to files (or
//! stdout for `gen` without `--out`). Exit code is 0 only when all requested
//! work succeeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use oscim::energy::{heterogeneity_report, spin_readout};
use oscim::error::{OscimError, Result};
use oscim::experiment::{
    derive_seed, run_experiment, ExperimentConfig, Preset,
};
use oscim::graph::{cut_value, generate_er_graph, generate_regular_graph, ising_energy, IsingInstance};
use oscim::integrate::{
    integrate_trial, random_initial_state, IntegratorConfig, Method, ModelKind, NoiseChannels,
    NoiseConfig, RunMetadata, Schedule, TrialSpec,
};
use oscim::model::{split_couplings, DopoParams, OscillatorParams};
use oscim::validate::run_validation_suite;

#[derive(Parser)]
#[command(name = "oscim", version, about = "Oscillator Ising machine simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance and write it as JSON.
    Gen {
        /// Instance family: er | regular
        #[arg(long)]
        kind: String,
        /// Node count.
        #[arg(long)]
        n: usize,
        /// Edge probability (er).
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        /// Node degree (regular).
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; the instance lands in <out>/instance.json.
        /// Without it the JSON goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one trial of one model and write trace + result files.
    Run {
        /// sl | ampphase | poim-phase | oim | stationary | dopo
        #[arg(long)]
        model: String,
        /// Instance JSON path (not needed for dopo).
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Oscillator count for instance-free models (dopo).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        tstop: f64,
        /// Gaussian noise strength; 0 selects the deterministic RK4 stepper.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Normal/conjugate split fraction (default 0.5).
        #[arg(long)]
        gamma: Option<f64>,
        /// Coupling gain for the amplitude models (default 0.1).
        #[arg(long)]
        xi: Option<f64>,
        /// Second-harmonic gain for the phase models.
        #[arg(long, default_value_t = 0.5)]
        ks: f64,
        /// Coupling gain for the phase models.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Normalized pump rate (dopo).
        #[arg(long, default_value_t = 2.0)]
        p0: f64,
        /// JSON parameter file: {mu, alpha, kappa, phi_p, gamma, xi},
        /// scalars broadcast to length n.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Parameter overrides key=value (mu, alpha, kappa, phi_p).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run an experiment preset: fig1 | fig2 | frame_demo | oracle_small.
    Experiment {
        preset: String,
        /// Comma-separated node counts.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tstop: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Edge probability for generated instances.
        #[arg(long)]
        p: Option<f64>,
        /// Regular-graph degree for the heterogeneity sweep.
        #[arg(long)]
        degree: Option<usize>,
        /// Gain dispersion for the heterogeneity sweep.
        #[arg(long)]
        dispersion: Option<f64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fast identity suite and report each property.
    Validate,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn broadcast(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; n]),
            ScalarOrVec::Vec(v) if v.len() == n => Ok(v.clone()),
            ScalarOrVec::Vec(v) => Err(OscimError::InvalidParameter(format!(
                "{what} has length {}, expected {n}",
                v.len()
            ))),
        }
    }
}

/// On-disk parameter file; every field optional, scalars broadcast.
#[derive(Debug, Default, Deserialize)]
struct ParamFile {
    mu: Option<ScalarOrVec>,
    alpha: Option<ScalarOrVec>,
    kappa: Option<ScalarOrVec>,
    phi_p: Option<f64>,
    gamma: Option<f64>,
    xi: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

/// Print to stdout, tolerating a closed pipe (e.g. `oscim gen | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            kind,
            n,
            p,
            degree,
            seed,
            out,
        } => cmd_gen(&kind, n, p, degree, seed, out),
        Command::Run {
            model,
            instance,
            n,
            seed,
            dt,
            tstop,
            noise,
            gamma,
            xi,
            ks,
            k,
            p0,
            params,
            set,
            out,
        } => cmd_run(RunArgs {
            model,
            instance,
            n,
            seed,
            dt,
            tstop,
            noise,
            gamma,
            xi,
            ks,
            k,
            p0,
            params,
            set,
            out,
        }),
        Command::Experiment {
            preset,
            sizes,
            instances,
            trials,
            n,
            seed,
            dt,
            tstop,
            noise,
            xi,
            gamma,
            p,
            degree,
            dispersion,
            jobs,
            out,
        } => cmd_experiment(ExperimentArgs {
            preset,
            sizes,
            instances,
            trials,
            n,
            seed,
            dt,
            tstop,
            noise,
            xi,
            gamma,
            p,
            degree,
            dispersion,
            jobs,
            out,
        }),
        Command::Validate => cmd_validate(),
    }
}

fn cmd_gen(
    kind: &str,
    n: usize,
    p: f64,
    degree: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let instance = match kind {
        "er" => generate_er_graph(n, p, seed)?,
        "regular" => generate_regular_graph(n, degree, seed)?,
        other => {
            return Err(OscimError::InvalidParameter(format!(
                "unknown kind '{other}', expected er or regular"
            )))
        }
    };
    let text = instance.to_json()?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("instance.json");
            std::fs::write(&path, &text)?;
            eprintln!(
                "wrote {} ({} nodes, {} edges)",
                path.display(),
                instance.n,
                instance.num_edges()
            );
        }
        None => emit(&text),
    }
    Ok(())
}

struct RunArgs {
    model: String,
    instance: Option<PathBuf>,
    n: Option<usize>,
    seed: u64,
    dt: f64,
    tstop: f64,
    noise: f64,
    gamma: Option<f64>,
    xi: Option<f64>,
    ks: f64,
    k: f64,
    p0: f64,
    params: Option<PathBuf>,
    set: Vec<String>,
    out: PathBuf,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let model = ModelKind::parse(&args.model).ok_or_else(|| {
        OscimError::InvalidParameter(format!("unknown model tag '{}'", args.model))
    })?;

    // precedence: built-in defaults < params file < --set < dedicated flags
    let file: ParamFile = match &args.params {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => ParamFile::default(),
    };
    let mut gamma = file.gamma.unwrap_or(0.5);
    let mut xi = file.xi.unwrap_or(0.1);

    let (instance, n) = match (&args.instance, model) {
        (Some(path), _) => {
            let inst = IsingInstance::read_file(path)?;
            let n = inst.n;
            (Some(inst), n)
        }
        (None, ModelKind::Dopo) => (None, args.n.unwrap_or(1)),
        (None, _) => {
            return Err(OscimError::InvalidParameter(
                "this model needs --instance".into(),
            ))
        }
    };

    let mut mu = file
        .mu
        .as_ref()
        .map(|v| v.broadcast(n, "mu"))
        .transpose()?
        .unwrap_or_else(|| vec![0.6; n]);
    let mut alpha = file
        .alpha
        .as_ref()
        .map(|v| v.broadcast(n, "alpha"))
        .transpose()?
        .unwrap_or_else(|| vec![1.0; n]);
    let mut kappa = file
        .kappa
        .as_ref()
        .map(|v| v.broadcast(n, "kappa"))
        .transpose()?
        .unwrap_or_else(|| vec![0.05; n]);
    let mut phi_p = file.phi_p.unwrap_or(0.0);

    for kv in &args.set {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            OscimError::InvalidParameter(format!("--set expects KEY=VALUE, got '{kv}'"))
        })?;
        let value: f64 = value.parse().map_err(|_| {
            OscimError::InvalidParameter(format!("--set {key}: '{value}' is not a number"))
        })?;
        match key {
            "mu" => mu = vec![value; n],
            "alpha" => alpha = vec![value; n],
            "kappa" => kappa = vec![value; n],
            "phi_p" => phi_p = value,
            "gamma" => gamma = value,
            "xi" => xi = value,
            other => {
                return Err(OscimError::InvalidParameter(format!(
                    "unknown --set key '{other}'"
                )))
            }
        }
    }
    if let Some(v) = args.gamma {
        gamma = v;
    }
    if let Some(v) = args.xi {
        xi = v;
    }

    let params = OscillatorParams::new(mu, alpha, kappa, phi_p)?;
    let coupling = instance
        .as_ref()
        .map(|inst| split_couplings(inst, gamma, xi))
        .transpose()?;

    let method = if args.noise > 0.0 {
        Method::EulerMaruyama
    } else {
        Method::Rk4Deterministic
    };
    let channels = match model {
        ModelKind::Sl | ModelKind::Dopo => NoiseChannels::ComplexAdditive,
        ModelKind::AmpPhase => NoiseChannels::AmpAndPhase,
        _ => NoiseChannels::PhaseOnly,
    };
    let record_every = ((args.tstop / args.dt / 1000.0).round() as usize).max(1);

    let spec = TrialSpec {
        model,
        params: Some(params.clone()),
        coupling: coupling.clone(),
        ks: Schedule::constant(args.ks),
        k: Schedule::constant(args.k),
        dopo: Some(DopoParams {
            p0: args.p0,
            gamma_s: 1.0,
            alpha_nl: 1.0,
            phi_p,
        }),
        noise: NoiseConfig {
            amplitude: args.noise,
            seed: derive_seed(args.seed, "noise", 0, 0),
            channels,
        },
        integrator: IntegratorConfig {
            dt: args.dt,
            t_stop: args.tstop,
            method,
            record_every,
        },
    };

    let initial = random_initial_state(model, n, derive_seed(args.seed, "ic", 0, 0));
    eprintln!("running {} on n = {n}, t_stop = {}", model.label(), args.tstop);
    let trace = integrate_trial(&spec, &initial)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("trace.csv"), trace.to_csv())?;

    let instance_hash = instance
        .as_ref()
        .map(|inst| inst.content_hash())
        .transpose()?;
    let meta = RunMetadata {
        model: model.label().to_string(),
        seed: args.seed,
        dt: args.dt,
        t_stop: args.tstop,
        method,
        record_every,
        ks_schedule: spec.ks.clone(),
        k_schedule: spec.k.clone(),
        noise_amplitude: args.noise,
        noise_channels: channels,
        instance_hash: instance_hash.clone(),
        clamp_events: trace.clamp_events,
    };
    std::fs::write(
        args.out.join("meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;

    let spins = spin_readout(&trace.readout_phases());
    let mut result = json!({
        "model": model.label(),
        "seed": args.seed,
        "n": n,
        "spins": spins.as_slice(),
        "clamp_events": trace.clamp_events,
        "instance_hash": instance_hash,
        "config": {
            "dt": args.dt, "tstop": args.tstop, "noise": args.noise,
            "gamma": gamma, "xi": xi, "ks": args.ks, "k": args.k,
            "params": {
                "mu": params.mu, "alpha": params.alpha,
                "kappa": params.kappa, "phi_p": params.phi_p,
            },
        },
    });
    if let (Some(inst), Some(coupling)) = (&instance, &coupling) {
        let w_eff = coupling.w_eff();
        result["ising_energy"] = json!(ising_energy(&w_eff, &spins)?);
        result["cut"] = json!(cut_value(inst, &spins)?);
    }
    if let Some(r) = trace.final_amplitudes() {
        result["final_amplitudes"] = json!(r);
        if let Some(r_star) = trace.r_star_average(0.1) {
            if let Some(coupling) = &coupling {
                result["ah"] = json!(heterogeneity_report(&r_star, &coupling.w_eff())?.ah);
            }
        }
    }
    std::fs::write(
        args.out.join("result.json"),
        serde_json::to_string_pretty(&result)?,
    )?;
    eprintln!("wrote {}", args.out.join("result.json").display());
    Ok(())
}

struct ExperimentArgs {
    preset: String,
    sizes: Option<String>,
    instances: Option<usize>,
    trials: Option<usize>,
    n: Option<usize>,
    seed: u64,
    dt: Option<f64>,
    tstop: Option<f64>,
    noise: Option<f64>,
    xi: Option<f64>,
    gamma: Option<f64>,
    p: Option<f64>,
    degree: Option<usize>,
    dispersion: Option<f64>,
    jobs: usize,
    out: Option<PathBuf>,
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let preset = Preset::parse(&args.preset).ok_or_else(|| {
        OscimError::InvalidParameter(format!(
            "unknown preset '{}', expected fig1 | fig2 | frame_demo | oracle_small",
            args.preset
        ))
    })?;
    let mut config = ExperimentConfig::preset_default(preset);
    config.master_seed = args.seed;
    config.jobs = args.jobs;
    if let Some(sizes) = &args.sizes {
        config.sizes = sizes
            .split(',')
            .map(|s| {
                s.trim().parse::<usize>().map_err(|_| {
                    OscimError::InvalidParameter(format!("bad size '{s}' in --sizes"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(n) = args.n {
        config.sizes = vec![n];
    }
    if let Some(v) = args.instances {
        config.instances_per_size = v;
    }
    if let Some(v) = args.trials {
        config.trials_per_instance = v;
    }
    if let Some(v) = args.dt {
        config.dt = v;
    }
    if let Some(v) = args.tstop {
        config.t_stop_override = Some(v);
    }
    if let Some(v) = args.noise {
        config.noise_override = Some(v);
    }
    if let Some(v) = args.xi {
        config.xi = v;
    }
    if let Some(v) = args.gamma {
        config.gamma = v;
    }
    if let Some(v) = args.p {
        config.er_p = v;
    }
    if let Some(v) = args.degree {
        config.regular_degree = v;
    }
    if let Some(v) = args.dispersion {
        config.dispersion = v;
    }

    let out_dir = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}_out", preset.label())));
    eprintln!(
        "running preset {} (sizes {:?}, {} instances x {} trials, master seed {})",
        preset.label(),
        config.sizes,
        config.instances_per_size,
        config.trials_per_instance,
        config.master_seed
    );
    let output = run_experiment(&config)?;
    output.write(&out_dir)?;
    eprintln!(
        "wrote {} rows to {}",
        output.rows.len(),
        out_dir.join("results.csv").display()
    );
    Ok(())
}

fn cmd_validate() -> Result<()> {
    let results = run_validation_suite();
    let mut all_ok = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        emit(&format!("{tag}  {} ({})", r.name, r.detail));
        all_ok &= r.passed;
    }
    if all_ok {
        Ok(())
    } else {
        Err(OscimError::InvalidParameter(
            "validation suite reported failures".into(),
        ))
    }
}
