use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use airgap_core::agents::Action;

use super::protocol::{read_message, write_message, Message, ProtocolError, WireAction};
use crate::error::CliError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemoteInference {
    pub action: WireAction,
    /// Round trip minus server compute, s.
    pub t1: f64,
    /// Server-reported compute time, s.
    pub t2: f64,
    pub round_trip: f64,
}

impl RemoteInference {
    pub fn action(&self) -> Action {
        match self.action {
            WireAction::Discrete(id) => Action::Discrete(id as usize),
            WireAction::Continuous(a) => Action::Continuous([a[0] as f64, a[1] as f64]),
        }
    }
}

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

fn transport(e: impl std::fmt::Display) -> CliError {
    CliError::Transport(e.to_string())
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, CliError> {
        Self::connect_timeout(addr, DEFAULT_TIMEOUT)
    }

    pub fn connect_timeout<A: ToSocketAddrs>(addr: A, timeout: Duration) -> Result<Self, CliError> {
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs().map_err(transport)?.collect();
        let mut last = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(s) => {
                    s.set_read_timeout(Some(timeout)).map_err(transport)?;
                    s.set_write_timeout(Some(timeout)).map_err(transport)?;
                    s.set_nodelay(true).map_err(transport)?;
                    return Ok(Client {
                        reader: BufReader::new(s.try_clone().map_err(transport)?),
                        writer: BufWriter::new(s),
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(transport(last.map_or("no address".to_string(), |e| e.to_string())))
    }

    fn call(&mut self, m: &Message) -> Result<Message, CliError> {
        write_message(&mut self.writer, m).map_err(transport)?;
        match read_message(&mut self.reader) {
            Ok(Message::Err { code, reason }) => Err(CliError::Transport(format!("server error {code}: {reason}"))),
            Ok(r) => Ok(r),
            Err(ProtocolError::Io(e)) => Err(transport(e)),
            Err(e) => Err(transport(e)),
        }
    }

    /// Echo round trip of `payload`, s.
    pub fn ping(&mut self, payload: &[u8]) -> Result<f64, CliError> {
        let t0 = Instant::now();
        match self.call(&Message::Ping(payload.to_vec()))? {
            Message::Ping(p) if p == payload => Ok(t0.elapsed().as_secs_f64()),
            _ => Err(CliError::Transport("unexpected reply to PING".into())),
        }
    }

    pub fn infer(&mut self, obs: &[f64]) -> Result<RemoteInference, CliError> {
        let wire: Vec<f32> = obs.iter().map(|&v| v as f32).collect();
        let t0 = Instant::now();
        let reply = self.call(&Message::Obs(wire))?;
        let rtt = t0.elapsed().as_secs_f64();
        match reply {
            Message::Act { action, t2_ns } => {
                let t2 = t2_ns as f64 * 1e-9;
                Ok(RemoteInference {
                    action,
                    t1: (rtt - t2).max(0.0),
                    t2,
                    round_trip: rtt,
                })
            }
            _ => Err(CliError::Transport("unexpected reply to OBS".into())),
        }
    }

    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<(), CliError> {
        match self.call(&Message::LoadCkpt(bytes.to_vec()))? {
            Message::LoadCkpt(_) => Ok(()),
            _ => Err(CliError::Transport("unexpected reply to LOAD_CKPT".into())),
        }
    }
}
