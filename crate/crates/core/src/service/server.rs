use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::protocol::{ErrorCode, ErrorReply, Handshake, Reply, Request, PROTOCOL_VERSION};
use super::trajectory::{TrajectoryHeader, TrajectoryRecord, TrajectoryWriter};
use crate::env::{EnvConfig, PianoEnv};
use crate::error::{Error, Result};
use crate::hands::ACTION_DIM;
use crate::songs::SongLibrary;

/// Read-only state shared by all sessions.
#[derive(Debug)]
pub struct ServiceContext {
    pub config: EnvConfig,
    pub library: SongLibrary,
    /// Directory receiving one trajectory file per session, when set.
    pub log_dir: Option<PathBuf>,
    next_session: AtomicUsize,
}

impl ServiceContext {
    pub fn new(config: EnvConfig, library: SongLibrary) -> Result<Self> {
        config.validate()?;
        Ok(ServiceContext {
            config,
            library,
            log_dir: None,
            next_session: AtomicUsize::new(0),
        })
    }

    pub fn with_log_dir(mut self, dir: PathBuf) -> Self {
        self.log_dir = Some(dir);
        self
    }

    pub fn handshake(&self) -> Handshake {
        Handshake {
            version: PROTOCOL_VERSION,
            obs_dim: self.config.obs_layout().total,
            action_dim: ACTION_DIM,
            action_low: -1.0,
            action_high: 1.0,
            dt: self.config.dt_control,
            lookahead: self.config.lookahead,
            songs: self.library.names(),
        }
    }
}

struct Episode {
    env: PianoEnv,
    id: usize,
    seed: u64,
    observation: Vec<f64>,
}

/// One client's view: at most one environment, requests handled in order.
pub struct Session {
    ctx: Arc<ServiceContext>,
    episode: Option<Episode>,
    episodes_started: usize,
    log: Option<TrajectoryWriter<BufWriter<std::fs::File>>>,
}

impl Session {
    pub fn new(ctx: Arc<ServiceContext>) -> Result<Self> {
        let id = ctx.next_session.fetch_add(1, Ordering::Relaxed);
        let log = match &ctx.log_dir {
            Some(dir) => {
                let file = std::fs::File::create(dir.join(format!("session-{id:04}.jsonl")))?;
                Some(TrajectoryWriter::new(
                    BufWriter::new(file),
                    &TrajectoryHeader::for_config(&ctx.config),
                )?)
            }
            None => None,
        };
        Ok(Session {
            ctx,
            episode: None,
            episodes_started: 0,
            log,
        })
    }

    /// Handles one request line. The flag is false once the client closed.
    pub fn handle_line(&mut self, line: &str) -> (Reply, bool) {
        match Request::parse(line) {
            Ok(request) => self.handle(request),
            Err(e) => (Reply::error(ErrorCode::Malformed, e.to_string()), true),
        }
    }

    pub fn handle(&mut self, request: Request) -> (Reply, bool) {
        match request {
            Request::Handshake { version } => {
                if version != PROTOCOL_VERSION {
                    let msg = format!("client speaks version {version}, server speaks {PROTOCOL_VERSION}");
                    return (Reply::error(ErrorCode::VersionMismatch, msg), true);
                }
                (Reply::Handshake(self.ctx.handshake()), true)
            }
            Request::Reset { song, seed } => (self.reset(&song, seed), true),
            Request::Step { action } => (self.step(&action), true),
            Request::Close => {
                self.finish_log(None);
                (Reply::Close, false)
            }
        }
    }

    fn reset(&mut self, song: &str, seed: u64) -> Reply {
        let score = match self.ctx.library.get(song) {
            Ok(score) => score,
            Err(Error::UnknownSong { name, available }) => {
                let mut reply = ErrorReply::new(ErrorCode::UnknownSong, format!("unknown song {name:?}"));
                reply.available = Some(available);
                return Reply::Error(reply);
            }
            Err(e) => return Reply::error(ErrorCode::Internal, e.to_string()),
        };
        let mut env = match PianoEnv::new(self.ctx.config.clone(), song, score) {
            Ok(env) => env,
            Err(e) => return Reply::error(ErrorCode::Internal, e.to_string()),
        };
        let observation = env.reset(seed);
        let frames = env.num_frames();
        self.episode = Some(Episode {
            env,
            id: self.episodes_started,
            seed,
            observation: observation.clone(),
        });
        self.episodes_started += 1;
        Reply::Reset { observation, frames }
    }

    fn step(&mut self, action: &[f64]) -> Reply {
        let Some(episode) = self.episode.as_mut() else {
            return Reply::error(ErrorCode::NotReset, "step before reset");
        };
        if action.len() != ACTION_DIM {
            let mut reply = ErrorReply::new(
                ErrorCode::BadAction,
                format!("action has {} values, expected {ACTION_DIM}", action.len()),
            );
            reply.expected_dim = Some(ACTION_DIM);
            return Reply::Error(reply);
        }
        if let Some(i) = action.iter().position(|a| !a.is_finite()) {
            return Reply::error(ErrorCode::BadAction, format!("action[{i}] is not finite"));
        }
        if episode.env.is_done() {
            return Reply::error(ErrorCode::EpisodeDone, "episode is done; reset to continue");
        }
        let step = episode.env.frame();
        let out = match episode.env.step(action) {
            Ok(out) => out,
            Err(e) => return Reply::error(ErrorCode::Internal, e.to_string()),
        };
        if let Some(log) = self.log.as_mut() {
            let record = TrajectoryRecord {
                episode: episode.id,
                song: episode.env.song().to_string(),
                seed: episode.seed,
                step,
                observation: std::mem::take(&mut episode.observation),
                action: action.to_vec(),
                reward: out.reward,
                done: out.done,
                goal: episode.env.roll().goal(step).iter().collect(),
                played: episode.env.played()[step].iter().collect(),
            };
            if let Err(e) = log.write(&record) {
                log::warn!("trajectory log failed: {e}");
                log.mark_partial(&e.to_string());
                self.log = None;
            }
        }
        episode.observation = out.observation.clone();
        Reply::Step {
            observation: out.observation,
            reward: out.reward,
            done: out.done,
            info: out.info,
        }
    }

    fn finish_log(&mut self, reason: Option<&str>) {
        if let Some(mut log) = self.log.take() {
            if let Some(reason) = reason {
                log.mark_partial(reason);
            }
            if let Err(e) = log.finish() {
                log::warn!("trajectory log flush failed: {e}");
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let unfinished = self.episode.as_ref().is_some_and(|e| !e.env.is_done());
        self.finish_log(unfinished.then_some("connection ended mid-episode"));
    }
}

/// Serves one session over a line-oriented byte stream until the client
/// closes or the stream ends.
pub fn serve_stream<R: BufRead, W: Write>(ctx: Arc<ServiceContext>, reader: R, mut writer: W) -> Result<()> {
    let mut session = Session::new(ctx)?;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (reply, open) = session.handle_line(&line);
        writer.write_all(reply.to_line().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if !open {
            break;
        }
    }
    Ok(())
}

/// TCP server running one thread per connection.
pub struct Server {
    listener: TcpListener,
    ctx: Arc<ServiceContext>,
}

/// Stops a running [`Server`] and waits for its accept loop.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, ctx: ServiceContext) -> Result<Self> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            ctx: Arc::new(ctx),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until `stop` is set; blocks the caller.
    pub fn run(self, stop: Arc<AtomicBool>) -> Result<()> {
        for stream in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let ctx = Arc::clone(&self.ctx);
            std::thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = handle_connection(ctx, stream) {
                    log::info!("session {peer:?} ended: {e}");
                }
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = std::thread::spawn(move || {
            if let Err(e) = self.run(flag) {
                log::error!("server stopped: {e}");
            }
        });
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

fn handle_connection(ctx: Arc<ServiceContext>, stream: TcpStream) -> Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(ctx, reader, BufWriter::new(stream))
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the blocking accept
            let _ = TcpStream::connect(self.addr);
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}
