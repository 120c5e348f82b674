use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::JoinHandle;
use std::time::Instant;

use airgap_core::agents::{greedy_action, Action};
use airgap_core::nn::{AblationMask, PolicyNetwork};

use super::protocol::{code, read_message, write_message, Message, ProtocolError, WireAction};
use crate::checkpoint::Checkpoint;

/// Sequential inference server: one connection at a time, one request in
/// flight.
pub struct Server {
    listener: TcpListener,
    net: Option<PolicyNetwork>,
}

fn to_wire(a: Action) -> WireAction {
    match a {
        Action::Discrete(id) => WireAction::Discrete(id as u16),
        Action::Continuous(v) => WireAction::Continuous([v[0] as f32, v[1] as f32]),
    }
}

/// Greedy action for a wire observation, as the server computes it.
pub fn infer_local(net: &PolicyNetwork, obs: &[f32]) -> Result<WireAction, String> {
    let x: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
    greedy_action(net, &x, AblationMask::NONE)
        .map(to_wire)
        .map_err(|e| e.to_string())
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, net: Option<PolicyNetwork>) -> io::Result<Self> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            net,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts and serves connections until the listener fails.
    pub fn run(&mut self) -> io::Result<()> {
        loop {
            let (stream, peer) = self.listener.accept()?;
            log::info!("client {peer} connected");
            if let Err(e) = self.serve_connection(stream) {
                log::warn!("client {peer}: {e}");
            }
        }
    }

    /// Serves on a background thread; returns the bound address.
    pub fn spawn<A: ToSocketAddrs>(addr: A, net: Option<PolicyNetwork>) -> io::Result<(SocketAddr, JoinHandle<()>)> {
        let mut s = Server::bind(addr, net)?;
        let local = s.local_addr()?;
        let h = std::thread::spawn(move || {
            let _ = s.run();
        });
        Ok((local, h))
    }

    pub fn serve_connection(&mut self, stream: TcpStream) -> io::Result<()> {
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        loop {
            let reply = match read_message(&mut reader) {
                Ok(m) => self.handle(m),
                Err(ProtocolError::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
                Err(ProtocolError::Io(e)) => return Err(e),
                Err(e @ ProtocolError::TooLarge(_)) => {
                    let m = Message::Err {
                        code: code::MALFORMED,
                        reason: e.to_string(),
                    };
                    write_message(&mut writer, &m)?;
                    return Ok(());
                }
                Err(e) => Message::Err {
                    code: e.code(),
                    reason: e.to_string(),
                },
            };
            write_message(&mut writer, &reply)?;
        }
    }

    fn handle(&mut self, m: Message) -> Message {
        match m {
            Message::Ping(p) => Message::Ping(p),
            Message::Obs(obs) => {
                let Some(net) = &self.net else {
                    return Message::Err {
                        code: code::NO_CHECKPOINT,
                        reason: "no checkpoint loaded".into(),
                    };
                };
                if obs.len() != net.input.len() {
                    return Message::Err {
                        code: code::INPUT_SIZE,
                        reason: format!("expected {} values, got {}", net.input.len(), obs.len()),
                    };
                }
                let t0 = Instant::now();
                let action = infer_local(net, &obs);
                let t2_ns = (t0.elapsed().as_nanos() as u64).max(1);
                match action {
                    Ok(action) => Message::Act { action, t2_ns },
                    Err(reason) => Message::Err {
                        code: code::INPUT_SIZE,
                        reason,
                    },
                }
            }
            Message::LoadCkpt(bytes) => match Checkpoint::from_bytes(&bytes) {
                Ok(c) => {
                    self.net = Some(c.net);
                    Message::LoadCkpt(Vec::new())
                }
                Err(e) => Message::Err {
                    code: code::BAD_CHECKPOINT,
                    reason: e.to_string(),
                },
            },
            Message::Act { .. } | Message::Err { .. } => Message::Err {
                code: code::UNEXPECTED,
                reason: "server accepts PING, OBS and LOAD_CKPT only".into(),
            },
        }
    }
}
