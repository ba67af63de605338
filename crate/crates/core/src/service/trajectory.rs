//! Trajectory files: newline-delimited JSON with a versioned header line,
//! one line per environment step, and an optional trailing marker when
//! writing was cut short.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, PianoEnv, RewardBreakdown};
use crate::error::{Error, Result};
use crate::keys::KeySet;
use crate::metrics::{episode_prf, EpisodeReport};
use crate::policy::Policy;
use crate::score::Score;

pub const TRAJECTORY_FORMAT: &str = "keybench-trajectory";
pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    pub format: String,
    pub version: u32,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub dt: f64,
    pub lookahead: usize,
}

impl TrajectoryHeader {
    pub fn for_config(config: &EnvConfig) -> Self {
        TrajectoryHeader {
            format: TRAJECTORY_FORMAT.into(),
            version: TRAJECTORY_VERSION,
            obs_dim: config.obs_layout().total,
            action_dim: crate::hands::ACTION_DIM,
            dt: config.dt_control,
            lookahead: config.lookahead,
        }
    }
}

/// One environment step. `observation` is what the policy saw before
/// acting; `goal` and `played` are the frame's goal keys and the keys
/// played by the end of the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub song: String,
    pub seed: u64,
    pub step: usize,
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub goal: Vec<usize>,
    pub played: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(TrajectoryHeader),
    Step(TrajectoryRecord),
    Partial { reason: String },
}

/// Borrowing twin of [`Line`] for writing without copies.
#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LineOut<'a> {
    Header(&'a TrajectoryHeader),
    Step(&'a TrajectoryRecord),
    Partial { reason: &'a str },
}

/// Streams records to a sink, header first.
pub struct TrajectoryWriter<W: Write> {
    sink: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut sink: W, header: &TrajectoryHeader) -> Result<Self> {
        write_line(&mut sink, &LineOut::Header(header))?;
        Ok(TrajectoryWriter { sink })
    }

    pub fn write(&mut self, record: &TrajectoryRecord) -> Result<()> {
        write_line(&mut self.sink, &LineOut::Step(record))
    }

    /// Appends the partial-file marker, best effort.
    pub fn mark_partial(&mut self, reason: &str) {
        let _ = write_line(&mut self.sink, &LineOut::Partial { reason });
        let _ = self.sink.flush();
    }

    pub fn finish(mut self) -> Result<W> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

fn write_line<W: Write>(sink: &mut W, line: &LineOut<'_>) -> Result<()> {
    let mut text = serde_json::to_string(line).map_err(|e| Error::Protocol(e.to_string()))?;
    text.push('\n');
    sink.write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEpisode {
    pub id: usize,
    pub song: String,
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
}

impl LoggedEpisode {
    pub fn actions(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.action.clone()).collect()
    }

    pub fn f1(&self) -> Result<f64> {
        let goal: Vec<KeySet> = self.records.iter().map(|r| r.goal.iter().copied().collect()).collect();
        let played: Vec<KeySet> = self
            .records
            .iter()
            .map(|r| r.played.iter().copied().collect())
            .collect();
        Ok(episode_prf(&goal, &played)?.f1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    pub episodes: Vec<LoggedEpisode>,
    /// Reason given by a partial-file marker, if present.
    pub partial: Option<String>,
}

/// Reads and validates a trajectory file: the header must come first with a
/// known version, step indices run contiguously from 0 within each episode,
/// and every complete episode ends with exactly one `done` record.
pub fn read_trajectories<R: BufRead>(reader: R) -> Result<TrajectoryFile> {
    let mut lines = reader.lines().enumerate();
    let bad = |n: usize, msg: String| Error::Protocol(format!("trajectory line {}: {msg}", n + 1));
    let header = match lines.next() {
        Some((n, line)) => match serde_json::from_str::<Line>(&line?) {
            Ok(Line::Header(h)) => {
                if h.format != TRAJECTORY_FORMAT || h.version != TRAJECTORY_VERSION {
                    return Err(bad(n, format!("unsupported format {} version {}", h.format, h.version)));
                }
                h
            }
            Ok(_) => return Err(bad(n, "expected header".into())),
            Err(e) => return Err(bad(n, e.to_string())),
        },
        None => return Err(Error::Protocol("empty trajectory file".into())),
    };
    let mut episodes: Vec<LoggedEpisode> = Vec::new();
    let mut partial = None;
    for (n, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if partial.is_some() {
            return Err(bad(n, "data after partial-file marker".into()));
        }
        match serde_json::from_str::<Line>(&line).map_err(|e| bad(n, e.to_string()))? {
            Line::Header(_) => return Err(bad(n, "repeated header".into())),
            Line::Partial { reason } => partial = Some(reason),
            Line::Step(record) => {
                if record.observation.len() != header.obs_dim || record.action.len() != header.action_dim {
                    return Err(bad(n, "vector length differs from header".into()));
                }
                let open = episodes.last().filter(|e| !e.records.last().is_some_and(|r| r.done));
                match open {
                    Some(ep) if ep.id == record.episode => {
                        let expected = ep.records.len();
                        if record.step != expected {
                            return Err(bad(n, format!("step {} where {expected} was expected", record.step)));
                        }
                    }
                    Some(ep) => {
                        return Err(bad(
                            n,
                            format!("episode {} started before episode {} ended", record.episode, ep.id),
                        ));
                    }
                    None => {
                        if record.step != 0 {
                            return Err(bad(
                                n,
                                format!("episode {} starts at step {}", record.episode, record.step),
                            ));
                        }
                        episodes.push(LoggedEpisode {
                            id: record.episode,
                            song: record.song.clone(),
                            seed: record.seed,
                            records: Vec::new(),
                        });
                    }
                }
                episodes.last_mut().expect("pushed above").records.push(record);
            }
        }
    }
    if partial.is_none()
        && episodes
            .last()
            .is_some_and(|e| !e.records.last().is_some_and(|r| r.done))
    {
        return Err(Error::Protocol(
            "last episode has no done record and no partial marker".into(),
        ));
    }
    Ok(TrajectoryFile {
        header,
        episodes,
        partial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub episodes: usize,
    pub total_steps: usize,
    pub mean_f1: f64,
    pub f1: Vec<f64>,
}

/// Runs one episode per seed under `policy` and logs every step.
///
/// On a sink failure the partial-file marker is appended (best effort) and
/// the error is returned.
pub fn log_trajectories<W: Write>(
    config: &EnvConfig,
    song: &str,
    score: &Score,
    policy: &mut dyn Policy,
    seeds: &[u64],
    sink: W,
) -> Result<DatasetSummary> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one episode"));
    }
    let mut writer = TrajectoryWriter::new(sink, &TrajectoryHeader::for_config(config))?;
    let template = PianoEnv::new(config.clone(), song, score)?;
    let mut f1 = Vec::with_capacity(seeds.len());
    let mut total_steps = 0;
    for (episode, &seed) in seeds.iter().enumerate() {
        let mut env = template.clone();
        let result = record_episode(&mut env, policy, episode, seed, Some(&mut writer));
        if let Err(e) = result {
            writer.mark_partial(&e.to_string());
            return Err(e);
        }
        total_steps += env.num_frames();
        f1.push(env.report().f1);
    }
    writer.finish()?;
    Ok(DatasetSummary {
        episodes: seeds.len(),
        total_steps,
        mean_f1: f1.iter().sum::<f64>() / f1.len() as f64,
        f1,
    })
}

/// Plays one episode from reset under `policy`, logging each step to
/// `writer` when given, and returns the episode report.
pub fn record_episode<W: Write>(
    env: &mut PianoEnv,
    policy: &mut dyn Policy,
    episode: usize,
    seed: u64,
    mut writer: Option<&mut TrajectoryWriter<W>>,
) -> Result<EpisodeReport> {
    let mut observation = env.reset(seed);
    policy.reset(env, seed)?;
    while !env.is_done() {
        let step = env.frame();
        let action = policy.act(env)?;
        let out = env.step(&action)?;
        let Some(writer) = writer.as_deref_mut() else {
            observation = out.observation;
            continue;
        };
        writer.write(&TrajectoryRecord {
            episode,
            song: env.song().to_string(),
            seed,
            step,
            observation,
            action,
            reward: out.reward,
            done: out.done,
            goal: env.roll().goal(step).iter().collect(),
            played: env.played()[step].iter().collect(),
        })?;
        observation = out.observation;
    }
    Ok(env.report())
}
