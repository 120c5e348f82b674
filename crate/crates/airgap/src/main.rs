use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airgap::checkpoint::Checkpoint;
use airgap::config::{env_hash, load_run_config, parse_env_config, parse_template, read_json, Algo, RunConfig};
use airgap::error::CliError;
use airgap::hilnet::{Client, Server};
use airgap::mitigate::{mitigate, GapReportFile, MitigateOptions, Target};
use airgap::profile::{latency_sweep, profile_inference, write_sweep_csv, Transport};
use airgap::report::{gap_table, mitigation_table, qof_table, trajectory_svg};
use airgap::run::{
    already_complete, evaluate_parallel, report_from_records, train, write_episode_csv, write_json, RunManifest,
};
use airgap::trace::{parse_latency_flag, LatencyTrace};
use airgap_core::agents::{eval_episode_indices, EvalOptions};
use airgap_core::dynamics::NUM_DISCRETE_ACTIONS;
use airgap_core::envgen::{generate, CurriculumZone, EnvironmentInstance};
use airgap_core::nn::{AblationMask, InputSpec, OutputSpec, PolicyNetwork};
use airgap_core::qof::{perf_gap, GapReport, QofReport};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "airgap", version, about = "Latency-aware navigation policy training and evaluation")]
struct Cli {
    /// Overrides every seed in the resolved config.
    #[arg(long, env = "AIRGAP_SEED", global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Full run config, or a bare environment document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment document replacing the config's `env` section.
    #[arg(long)]
    env: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Modality {
    Depth,
    Velocity,
    Position,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write environment instances as JSON.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long, default_value_t = 10)]
        n: u64,
        /// Curriculum zone to sample goals from.
        #[arg(long)]
        zone: Option<u8>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy into a run directory.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        algo: Option<Algo>,
        /// Network size as LxF, e.g. 5x32.
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        curriculum: bool,
        #[arg(long)]
        steps: Option<u64>,
        /// Latency injected during training.
        #[arg(long)]
        latency: Option<String>,
        /// Steps between validation runs for best-policy selection.
        #[arg(long)]
        select_every: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a checkpoint on the shared episode set.
    Evaluate {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum)]
        ablate: Vec<Modality>,
        /// Earlier eval_report.json to compute a gap against.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Evaluate with input modalities zeroed, next to the unablated policy.
    Ablate {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, required = true)]
        ablate: Vec<Modality>,
    },
    /// Capture an inference latency trace.
    Profile {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Profile a fresh network of this size instead of a checkpoint.
        #[arg(long)]
        template: Option<String>,
        #[arg(long, default_value_t = 32)]
        rays: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// host:port of an `airgap serve` instance.
        #[arg(long)]
        remote: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        t3: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inference latency across network sizes.
    Sweep {
        /// Comma-separated LxF templates.
        #[arg(long, default_value = "2x32,3x32,4x32,5x32,6x32,7x32,8x32,9x32")]
        grid: String,
        #[arg(long, default_value_t = 32)]
        rays: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        remote: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Latency-aware training against a target, with a control policy.
    Mitigate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        steps: Option<u64>,
        /// Target latency trace file.
        #[arg(long, group = "target")]
        trace: Option<PathBuf>,
        /// Target latency as a flag spec, e.g. constant:396.
        #[arg(long, group = "target")]
        latency: Option<String>,
        /// Profile a live target at host:port.
        #[arg(long, group = "target")]
        remote: Option<String>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: bool,
    },
    /// Render JSON reports as tables, and trajectories as SVG.
    Report {
        /// eval_report.json or gap_report.json files.
        files: Vec<PathBuf>,
        /// Trajectory CSVs to overlay.
        #[arg(long)]
        trajectory: Vec<PathBuf>,
        /// Environment instance JSON drawn under the trajectories.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// With two eval reports, write the gap of the second against the first.
        #[arg(long)]
        gap_out: Option<PathBuf>,
    },
    /// Answer inference requests over TCP.
    Serve {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Injected latency, e.g. constant:300.
    #[arg(long)]
    latency: Option<String>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write one trajectory CSV per episode.
    #[arg(long)]
    trajectories: bool,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(args: &ConfigArgs, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => load_run_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.env {
        cfg.env = parse_env_config(read_json(p)?)?;
    }
    cfg.apply_seed_override(seed);
    Ok(cfg)
}

fn mask_for(mods: &[Modality]) -> AblationMask {
    let mut m = AblationMask::NONE;
    for x in mods {
        match x {
            Modality::Depth => m.zero_depth = true,
            Modality::Velocity => m.zero_velocity = true,
            Modality::Position => m.zero_position = true,
        }
    }
    m
}

fn modality_name(m: Modality) -> &'static str {
    match m {
        Modality::Depth => "depth",
        Modality::Velocity => "velocity",
        Modality::Position => "position",
    }
}

fn cmd_generate(cfg: &RunConfig, n: u64, zone: Option<u8>, out: &Path) -> Result<(), CliError> {
    let snapshot = serde_json::json!({ "env": cfg.env, "n": n, "zone": zone });
    if already_complete(out, "generate", &snapshot)? {
        return Ok(());
    }
    cfg.env.validate().map_err(airgap::config::env_errors)?;
    let mut manifest = RunManifest::begin("generate", snapshot, vec![cfg.env.seed]);
    manifest.save(out)?;
    let zone = zone.map(|k| CurriculumZone::for_arena(k, cfg.env.arena_size[0]));
    let mut outputs = Vec::new();
    for i in 0..n {
        let inst = generate(&cfg.env, i, zone)?;
        let name = format!("instance_{i}.json");
        write_json(&out.join(&name), &inst)?;
        outputs.push(name);
    }
    manifest.finish(out, outputs)?;
    println!("wrote {n} instances to {}", out.display());
    Ok(())
}

struct Evaluated {
    report: QofReport,
}

fn run_eval(args: &EvalArgs, cfg: &RunConfig, mask: AblationMask, sub: &Path) -> Result<Evaluated, CliError> {
    let ckpt = Checkpoint::load_for(&args.checkpoint, InputSpec::new(cfg.dynamics.n_rays))?;
    let mut opts = EvalOptions::zero_latency(cfg.dynamics.t3);
    if let Some(spec) = &args.latency {
        opts.latency = parse_latency_flag(spec, cfg.dynamics.t3)?;
    }
    opts.latency_seed = cfg.agent.seed;
    opts.mask = mask;
    let traj_dir = args.trajectories.then(|| sub.join("trajectories"));
    fs::create_dir_all(sub)?;
    let records = evaluate_parallel(
        &ckpt.net,
        &cfg.settings(),
        &cfg.env,
        &eval_episode_indices(args.episodes),
        &opts,
        args.workers,
        traj_dir.as_deref(),
    )?;
    let report = report_from_records(&records, &env_hash(&cfg.env), &ckpt.id());
    write_json(&sub.join("eval_report.json"), &report)?;
    write_episode_csv(&sub.join("episodes.csv"), &records)?;
    Ok(Evaluated { report })
}

fn eval_snapshot(args: &EvalArgs, cfg: &RunConfig, extra: serde_json::Value) -> Result<serde_json::Value, CliError> {
    let ckpt = fs::read(&args.checkpoint).map_err(|e| CliError::Checkpoint(format!("{}: {e}", args.checkpoint.display())))?;
    Ok(serde_json::json!({
        "config": cfg,
        "checkpoint": airgap::config::sha256_hex(&ckpt),
        "episodes": args.episodes,
        "latency": args.latency,
        "trajectories": args.trajectories,
        "extra": extra,
    }))
}

fn cmd_evaluate(args: &EvalArgs, cfg: &RunConfig, ablate: &[Modality], baseline: Option<&Path>) -> Result<(), CliError> {
    let names: Vec<&str> = ablate.iter().map(|&m| modality_name(m)).collect();
    let snapshot = eval_snapshot(args, cfg, serde_json::json!({ "ablate": names, "baseline": baseline }))?;
    if already_complete(&args.out, "evaluate", &snapshot)? {
        return Ok(());
    }
    let mut manifest = RunManifest::begin("evaluate", snapshot, vec![cfg.agent.seed, cfg.env.seed]);
    manifest.save(&args.out)?;
    let ev = run_eval(args, cfg, mask_for(ablate), &args.out)?;
    print!("{}", qof_table(&[("evaluation", &ev.report)]));
    let mut outputs = vec!["eval_report.json".to_string(), "episodes.csv".into()];
    if let Some(b) = baseline {
        let base: QofReport = serde_json::from_value(read_json(b)?)?;
        let gap = perf_gap(&base, &ev.report).map_err(|e| CliError::Config(e.to_string()))?;
        write_json(&args.out.join("gap_report.json"), &gap)?;
        print!("{}", gap_table(&[("perf gap vs baseline", &gap)]));
        outputs.push("gap_report.json".into());
    }
    manifest.finish(&args.out, outputs)
}

fn cmd_ablate(args: &EvalArgs, cfg: &RunConfig, ablate: &[Modality]) -> Result<(), CliError> {
    let names: Vec<&str> = ablate.iter().map(|&m| modality_name(m)).collect();
    let snapshot = eval_snapshot(args, cfg, serde_json::json!({ "ablate": names }))?;
    if already_complete(&args.out, "ablate", &snapshot)? {
        return Ok(());
    }
    let mut manifest = RunManifest::begin("ablate", snapshot, vec![cfg.agent.seed, cfg.env.seed]);
    manifest.save(&args.out)?;
    let mut runs = vec![("none".to_string(), AblationMask::NONE)];
    runs.extend(ablate.iter().map(|&m| (modality_name(m).to_string(), mask_for(&[m]))));
    let mut reports = Vec::new();
    let mut outputs = Vec::new();
    for (name, mask) in &runs {
        let ev = run_eval(args, cfg, *mask, &args.out.join(name))?;
        outputs.push(format!("{name}/eval_report.json"));
        reports.push((name.clone(), ev.report));
    }
    let summary: serde_json::Map<String, serde_json::Value> = reports
        .iter()
        .map(|(n, r)| Ok((n.clone(), serde_json::to_value(r)?)))
        .collect::<Result<_, CliError>>()?;
    write_json(&args.out.join("ablation_report.json"), &summary)?;
    outputs.push("ablation_report.json".into());
    let rows: Vec<(&str, &QofReport)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    print!("{}", qof_table(&rows));
    manifest.finish(&args.out, outputs)
}

fn discrete_net(template: &str, rays: usize, seed: u64) -> Result<PolicyNetwork, CliError> {
    let t = parse_template(template).map_err(CliError::Config)?;
    PolicyNetwork::build(
        t,
        InputSpec::new(rays),
        OutputSpec::Discrete {
            actions: NUM_DISCRETE_ACTIONS,
        },
        seed,
    )
    .map_err(|e| CliError::Config(e.to_string()))
}

fn print_files(files: &[PathBuf], gap_out: Option<&Path>) -> Result<(), CliError> {
    let mut evals: Vec<(String, QofReport)> = Vec::new();
    for f in files {
        let v = read_json(f)?;
        let label = f.display().to_string();
        if v.get("control_target").is_some() {
            let m: GapReportFile = serde_json::from_value(v)?;
            println!("{label}\n{}", mitigation_table(&m));
        } else if v.get("n_episodes").is_some() {
            evals.push((label, serde_json::from_value(v)?));
        } else if v.get("success_rate_points").is_some() {
            let g: GapReport = serde_json::from_value(v)?;
            println!("{}", gap_table(&[(label.as_str(), &g)]));
        } else {
            return Err(CliError::Config(format!("{label}: not a recognized report")));
        }
    }
    if !evals.is_empty() {
        let rows: Vec<(&str, &QofReport)> = evals.iter().map(|(n, r)| (n.as_str(), r)).collect();
        println!("{}", qof_table(&rows));
    }
    if let Some(out) = gap_out {
        let [(_, base), (_, target)] = evals.as_slice() else {
            return Err(CliError::Config("--gap-out needs exactly two eval reports".into()));
        };
        let gap = perf_gap(base, target).map_err(|e| CliError::Config(e.to_string()))?;
        println!("{}", gap_table(&[("perf gap", &gap)]));
        write_json(out, &gap)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Generate { cfg, n, zone, out } => cmd_generate(&load_config(&cfg, seed)?, n, zone, &out),
        Cmd::Train {
            cfg,
            algo,
            template,
            curriculum,
            steps,
            latency,
            select_every,
            out,
            resume,
        } => {
            let mut c = load_config(&cfg, seed)?;
            if let Some(a) = algo {
                c.agent.algo = a;
            }
            if let Some(t) = template {
                c.agent.template = parse_template(&t).map_err(CliError::Config)?;
            }
            if curriculum {
                c.agent.curriculum = true;
            }
            if let Some(n) = steps {
                c.agent.set_total_steps(n);
            }
            if let Some(l) = latency {
                c.latency = Some(parse_latency_flag(&l, c.dynamics.t3)?);
            }
            if let Some(e) = select_every {
                c.agent.selection.every = e;
            }
            let s = train(&c, &out, resume)?;
            if !s.noop {
                println!(
                    "trained {} steps over {} episodes; policy at {}",
                    s.final_step,
                    s.episodes,
                    s.policy().display()
                );
            }
            Ok(())
        }
        Cmd::Evaluate { eval, ablate, baseline } => {
            let cfg = load_config(&eval.cfg, seed)?;
            cmd_evaluate(&eval, &cfg, &ablate, baseline.as_deref())
        }
        Cmd::Ablate { eval, ablate } => {
            let cfg = load_config(&eval.cfg, seed)?;
            cmd_ablate(&eval, &cfg, &ablate)
        }
        Cmd::Profile {
            checkpoint,
            template,
            rays,
            samples,
            remote,
            t3,
            out,
        } => {
            let net = match (checkpoint, template) {
                (Some(p), _) => Checkpoint::load(&p)?.net,
                (None, Some(t)) => discrete_net(&t, rays, seed.unwrap_or(0))?,
                (None, None) => return Err(CliError::Config("profile needs --checkpoint or --template".into())),
            };
            let trace = match remote {
                Some(addr) => {
                    let mut c = Client::connect(addr.as_str())?;
                    c.load_checkpoint(&Checkpoint::new(net.clone(), Default::default()).to_bytes())?;
                    profile_inference(&net, samples, Transport::Remote(&mut c), 20.0, t3, seed.unwrap_or(0))?
                }
                None => profile_inference(&net, samples, Transport::InProcess, 20.0, t3, seed.unwrap_or(0))?,
            };
            trace.save(&out)?;
            let mean = trace.t2_samples.iter().sum::<f64>() / trace.t2_samples.len() as f64;
            println!("{} samples, mean t2 {:.3} ms -> {}", trace.t2_samples.len(), mean * 1e3, out.display());
            Ok(())
        }
        Cmd::Sweep {
            grid,
            rays,
            samples,
            remote,
            out,
        } => {
            let templates = grid
                .split(',')
                .map(|t| parse_template(t.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::Config)?;
            let mut client = remote.map(|a| Client::connect(a.as_str())).transpose()?;
            let rows = latency_sweep(
                &templates,
                InputSpec::new(rays),
                OutputSpec::Discrete {
                    actions: NUM_DISCRETE_ACTIONS,
                },
                samples,
                client.as_mut(),
                seed.unwrap_or(0),
            )?;
            write_sweep_csv(fs::File::create(&out)?, &rows)?;
            for r in &rows {
                println!(
                    "{}x{}: mean {:.3} ms, p95 {:.3} ms, {} parameters",
                    r.num_layers, r.num_filters, r.mean_t2_ms, r.p95_t2_ms, r.parameters
                );
            }
            Ok(())
        }
        Cmd::Mitigate {
            cfg,
            template,
            steps,
            trace,
            latency,
            remote,
            episodes,
            workers,
            out,
            resume,
        } => {
            let mut c = load_config(&cfg, seed)?;
            if let Some(t) = template {
                c.agent.template = parse_template(&t).map_err(CliError::Config)?;
            }
            if let Some(n) = steps {
                c.agent.set_total_steps(n);
            }
            let target = match (trace, latency, remote) {
                (Some(p), _, _) => Target::Trace(LatencyTrace::load(&p)?),
                (_, Some(spec), _) => {
                    let m = parse_latency_flag(&spec, c.dynamics.t3)?;
                    Target::Trace(model_trace(&m))
                }
                (_, _, Some(addr)) => Target::Remote(addr),
                _ => return Err(CliError::Config("mitigate needs --trace, --latency or --remote".into())),
            };
            let r = mitigate(
                &c,
                target,
                &out,
                &MitigateOptions {
                    eval_episodes: episodes,
                    workers,
                    resume,
                },
            )?;
            print!("{}", mitigation_table(&r));
            Ok(())
        }
        Cmd::Report {
            files,
            trajectory,
            instance,
            svg,
            gap_out,
        } => {
            print_files(&files, gap_out.as_deref())?;
            if let Some(out) = svg {
                let inst: Option<EnvironmentInstance> =
                    instance.map(|p| read_json(&p).and_then(|v| Ok(serde_json::from_value(v)?))).transpose()?;
                let mut runs = Vec::new();
                for p in &trajectory {
                    let rows = airgap::trajectory::read_csv(BufReader::new(fs::File::open(p)?))?;
                    runs.push((p.display().to_string(), rows));
                }
                let refs: Vec<(&str, &[_])> = runs.iter().map(|(n, r)| (n.as_str(), r.as_slice())).collect();
                fs::write(&out, trajectory_svg(inst.as_ref(), &refs))?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Cmd::Serve { checkpoint, listen } => {
            let net = checkpoint.map(|p| Checkpoint::load(&p)).transpose()?.map(|c| c.net);
            let mut server = Server::bind(listen.as_str(), net)
                .map_err(|e| CliError::Transport(format!("{listen}: {e}")))?;
            log::info!("serving on {}", server.local_addr()?);
            server.run().map_err(|e| CliError::Transport(e.to_string()))
        }
    }
}

/// A flag-specified model written out as a trace: parametric kinds are
/// sampled, constants stored as a single value.
fn model_trace(m: &airgap_core::LatencyModel) -> LatencyTrace {
    use airgap_core::latency::LatencyDist;
    let samples = |d: &LatencyDist, tag: u64| -> Vec<f64> {
        match d {
            LatencyDist::Constant { value } if *value == 0.0 => Vec::new(),
            LatencyDist::Constant { value } => vec![*value],
            LatencyDist::Empirical { samples } => samples.clone(),
            LatencyDist::Gaussian { .. } => {
                let mut r = airgap_core::rng::stream(0, tag, airgap_core::rng::tag::PROFILE);
                (0..1000).map(|_| d.sample(&mut r)).collect()
            }
        }
    };
    LatencyTrace::new("flag", samples(&m.t1, 1), samples(&m.t2, 2), m.t3)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
