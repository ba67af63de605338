use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use keybench::config::BenchConfig;
use keybench::env::PianoEnv;
use keybench::metrics::EpisodeReport;
use keybench::planner::MpcPolicy;
use keybench::policy::{Policy, RandomPolicy, ScriptedPolicy, ZeroPolicy};
use keybench::score::{to_piano_roll, Score};
use keybench::service::{
    log_trajectories, read_trajectories, record_episode, serve_stream, Server, ServiceContext, TrajectoryHeader,
    TrajectoryWriter,
};
use keybench::songs::{load_score, SongLibrary};
use keybench::Diagnostic;

use crate::output::{roll_csv, roll_summary, FRAMES_CSV_VERSION, SWEEP_CSV_HEADER};
use crate::{
    Cli, Command, EvalArgs, LogArgs, PlayArgs, PolicyKind, RollArgs, ServeArgs, SettingsArgs, SongArgs, SweepArgs,
    SweepAxis,
};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Roll(args) => roll(args),
        Command::Play(args) => play(args),
        Command::Sweep(args) => sweep(args),
        Command::Log(args) => log_episodes(args),
        Command::Eval(args) => eval(args),
        Command::Serve(args) => serve(args),
    }
}

fn report_diagnostics(diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        eprintln!("{d}");
    }
}

fn load_song(source: &SongArgs) -> Result<(String, Score)> {
    match (&source.song, &source.midi) {
        (Some(name), None) => {
            let library = SongLibrary::builtin();
            Ok((name.clone(), library.get(name)?.clone()))
        }
        (None, Some(path)) => {
            let parsed =
                load_score(path, source.fingering.as_deref()).with_context(|| format!("loading {}", path.display()))?;
            report_diagnostics(&parsed.diagnostics);
            let name = path
                .file_stem()
                .map_or_else(|| "midi".into(), |s| s.to_string_lossy().into_owned());
            Ok((name, parsed.value))
        }
        _ => bail!("pass exactly one of --song or --midi"),
    }
}

fn load_settings(settings: &SettingsArgs) -> Result<BenchConfig> {
    let mut config = match &settings.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    if let Some(dt) = settings.dt {
        config.env.dt_control = dt;
    }
    if let Some(l) = settings.lookahead {
        config.env.lookahead = l;
    }
    if let Some(n) = settings.iters {
        config.planner.iterations = n;
    }
    if let Some(b) = settings.budget {
        config.planner.budget = Some(b);
    }
    if let Some(t) = settings.threads {
        config.planner.threads = t;
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn roll(args: RollArgs) -> Result<()> {
    let (_, score) = load_song(&args.source)?;
    let roll = to_piano_roll(&score, args.dt)?;
    let csv = roll_csv(&roll);
    let summary = roll_summary(&score, &roll);
    match &args.out_dir {
        Some(dir) => {
            create_dir(dir)?;
            fs::write(dir.join("roll.csv"), csv)?;
            fs::write(dir.join("roll_summary.txt"), &summary)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

/// Plays one MPC episode, writing its trajectory to `trajectory` when given.
fn play_once(
    config: &BenchConfig,
    song: &str,
    score: &Score,
    seed: u64,
    trajectory: Option<&Path>,
) -> Result<EpisodeReport> {
    let mut env = PianoEnv::new(config.env.clone(), song, score)?;
    let mut policy = MpcPolicy::new(config.planner.clone())?;
    let report = match trajectory {
        Some(path) => {
            let file = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
            let mut writer = TrajectoryWriter::new(file, &TrajectoryHeader::for_config(&config.env))?;
            let report = match record_episode(&mut env, &mut policy, 0, seed, Some(&mut writer)) {
                Ok(r) => r,
                Err(e) => {
                    writer.mark_partial(&e.to_string());
                    return Err(e.into());
                }
            };
            writer.finish()?;
            report
        }
        None => record_episode::<std::io::Sink>(&mut env, &mut policy, 0, seed, None)?,
    };
    Ok(report)
}

fn play(args: PlayArgs) -> Result<()> {
    let (song, score) = load_song(&args.source)?;
    let config = load_settings(&args.settings)?;
    create_dir(&args.out_dir)?;
    let start = Instant::now();
    let report = play_once(
        &config,
        &song,
        &score,
        args.seed,
        Some(&args.out_dir.join("trajectory.jsonl")),
    )?;
    report_diagnostics(&report.diagnostics);
    let record = format!("song={song}\nseed={}\n{}", args.seed, report.to_record());
    fs::write(args.out_dir.join("report.txt"), &record)?;
    fs::write(
        args.out_dir.join("frames.csv"),
        format!("{FRAMES_CSV_VERSION}\n{}", report.to_frame_csv()),
    )?;
    print!("{record}");
    eprintln!("played {} frames in {:.2?}", report.per_frame.len(), start.elapsed());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (song, score) = load_song(&args.source)?;
    let base = load_settings(&args.settings)?;
    if args.values.is_empty() {
        bail!("--values needs at least one value");
    }
    let mut seen = BTreeSet::new();
    let mut values = Vec::new();
    for v in &args.values {
        if seen.insert(v.to_bits()) {
            values.push(*v);
        } else {
            eprintln!("warning: duplicate sweep value {v} ignored");
        }
    }
    let mut configs = Vec::with_capacity(values.len());
    for &value in &values {
        let mut config = base.clone();
        match args.axis {
            SweepAxis::Dt => config.env.dt_control = value,
            SweepAxis::Lookahead => {
                if value < 0.0 || value.fract() != 0.0 {
                    bail!("lookahead values must be non-negative integers, got {value}");
                }
                config.env.lookahead = value as usize;
            }
        }
        config.validate().with_context(|| format!("sweep value {value}"))?;
        configs.push((value, config));
    }

    create_dir(&args.out_dir)?;
    let axis = match args.axis {
        SweepAxis::Dt => "dt",
        SweepAxis::Lookahead => "lookahead",
    };
    let mut csv = format!("{SWEEP_CSV_HEADER}\n");
    for (value, config) in &configs {
        for &seed in &args.seeds {
            let start = Instant::now();
            let report = play_once(config, &song, &score, seed, None)?;
            let wall = start.elapsed().as_secs_f64();
            csv.push_str(&format!(
                "{axis},{value},{seed},{},{},{},{},{wall:.6}\n",
                report.f1,
                report.precision,
                report.recall,
                report.per_frame.len()
            ));
            eprintln!("{axis}={value} seed={seed} f1={:.4} ({wall:.2}s)", report.f1);
        }
    }
    fs::write(args.out_dir.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn make_policy(kind: PolicyKind, config: &BenchConfig, env: &PianoEnv) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        PolicyKind::Zero => Box::new(ZeroPolicy),
        PolicyKind::Random => Box::new(RandomPolicy::default()),
        PolicyKind::Scripted => Box::new(ScriptedPolicy::plan(env)?),
        PolicyKind::Mpc => Box::new(MpcPolicy::new(config.planner.clone())?),
    })
}

fn log_episodes(args: LogArgs) -> Result<()> {
    let (song, score) = load_song(&args.source)?;
    let config = load_settings(&args.settings)?;
    let env = PianoEnv::new(config.env.clone(), &song, &score)?;
    let mut policy = make_policy(args.policy, &config, &env)?;
    let seeds: Vec<u64> = (0..args.episodes).map(|i| args.seed.wrapping_add(i)).collect();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let summary = log_trajectories(
        &config.env,
        &song,
        &score,
        policy.as_mut(),
        &seeds,
        BufWriter::new(file),
    )?;
    println!("episodes={}", summary.episodes);
    println!("total_steps={}", summary.total_steps);
    println!("mean_f1={}", summary.mean_f1);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let file =
        fs::File::open(&args.trajectories).with_context(|| format!("opening {}", args.trajectories.display()))?;
    let data = read_trajectories(BufReader::new(file))?;
    if let Some(reason) = &data.partial {
        eprintln!("warning: file is partial: {reason}");
    }
    let mut sum = 0.0;
    println!("episode,song,seed,steps,f1");
    for ep in &data.episodes {
        let f1 = ep.f1()?;
        sum += f1;
        println!("{},{},{},{},{f1}", ep.id, ep.song, ep.seed, ep.records.len());
    }
    if data.episodes.is_empty() {
        bail!("no episodes in {}", args.trajectories.display());
    }
    println!("mean_f1={}", sum / data.episodes.len() as f64);
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = load_settings(&args.settings)?;
    let mut library = SongLibrary::builtin();
    if let Some(dir) = &args.midi_dir {
        let diagnostics = library
            .load_dir(dir)
            .with_context(|| format!("loading songs from {}", dir.display()))?;
        report_diagnostics(&diagnostics);
    }
    let mut ctx = ServiceContext::new(config.env, library)?;
    if let Some(dir) = &args.log_dir {
        create_dir(dir)?;
        ctx = ctx.with_log_dir(dir.clone());
    }
    if args.stdio {
        let stdin = std::io::stdin().lock();
        let stdout = std::io::stdout().lock();
        serve_stream(Arc::new(ctx), stdin, stdout)?;
        return Ok(());
    }
    let server = Server::bind(args.addr.as_str(), ctx).with_context(|| format!("binding {}", args.addr))?;
    eprintln!("listening on {}", server.local_addr()?);
    server.run(Arc::new(AtomicBool::new(false)))?;
    Ok(())
}
