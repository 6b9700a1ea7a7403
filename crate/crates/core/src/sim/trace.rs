//! Simulation traces and their on-disk forms.
//!
//! # Binary frame log
//!
//! A compact little-endian log for renderers:
//!
//! ```text
//! header   magic "SFFL" | version u32 (=1) | agent_count u32 | frame_count u32 | dt f64
//! agents   agent_count x ( class u8 | reserved [u8; 3] | id_len u32 | id bytes (UTF-8) )
//! frames   frame_count x ( time f64 | agent_count x record )
//! record   x f64 | y f64 | heading f64 | speed f64 | length f32 | width f32
//!          | class u8 | active u8 | reserved [u8; 6]          (48 bytes)
//! ```
//!
//! Class codes: car 0, truck 1, pedestrian 2, bicycle 3.

use super::collision::{classify_collision, ClassifierConfig, CollisionKind, Contact};
use super::geometry::Face;
use super::{AgentState, SimState};
use crate::dsl::AgentClass;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Collision,
    Timeout,
    ScriptTerminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u64,
    pub time: f64,
    pub agents: Vec<AgentState>,
}

impl Frame {
    pub fn from_state(state: &SimState, dt: f64) -> Frame {
        Frame { index: state.frame, time: state.time(dt), agents: state.agents.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub frame: u64,
    pub time: f64,
    pub agent_a: String,
    pub agent_b: String,
    pub impact_point: [f64; 2],
    /// Degrees in [0, 180].
    pub relative_heading: f64,
    pub contact_faces: (Face, Face),
    pub classification: CollisionKind,
}

impl CollisionEvent {
    pub fn new(contact: &Contact, state: &SimState, dt: f64, config: &ClassifierConfig) -> CollisionEvent {
        CollisionEvent {
            frame: state.frame,
            time: state.time(dt),
            agent_a: state.agents[contact.a].id.clone(),
            agent_b: state.agents[contact.b].id.clone(),
            impact_point: [contact.impact_point.x, contact.impact_point.y],
            relative_heading: contact.relative_heading,
            contact_faces: contact.faces,
            classification: classify_collision(contact, &state.agents, config),
        }
    }

    pub fn involves(&self, id: &str) -> bool {
        self.agent_a == id || self.agent_b == id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub dt: f64,
    pub frames: Vec<Frame>,
    pub events: Vec<CollisionEvent>,
    pub termination_reason: TerminationReason,
}

impl SimTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<SimTrace> {
        serde_json::from_str(text)
    }

    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.time)
    }

    pub fn first_collision(&self) -> Option<&CollisionEvent> {
        self.events.first()
    }

    pub fn to_frame_log(&self) -> Vec<u8> {
        let agents: &[AgentState] = self.frames.first().map_or(&[], |f| &f.agents);
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(agents.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        for a in agents {
            out.push(class_code(a.class));
            out.extend_from_slice(&[0; 3]);
            out.extend_from_slice(&(a.id.len() as u32).to_le_bytes());
            out.extend_from_slice(a.id.as_bytes());
        }
        for f in &self.frames {
            out.extend_from_slice(&f.time.to_le_bytes());
            for a in &f.agents {
                for v in [a.pose.x, a.pose.y, a.pose.heading, a.speed] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&(a.length as f32).to_le_bytes());
                out.extend_from_slice(&(a.width as f32).to_le_bytes());
                out.push(class_code(a.class));
                out.push(a.active as u8);
                out.extend_from_slice(&[0; 6]);
            }
        }
        out
    }
}

const MAGIC: &[u8; 4] = b"SFFL";
const VERSION: u32 = 1;
pub const RECORD_BYTES: usize = 48;

pub fn class_code(c: AgentClass) -> u8 {
    match c {
        AgentClass::Car => 0,
        AgentClass::Truck => 1,
        AgentClass::Pedestrian => 2,
        AgentClass::Bicycle => 3,
    }
}

pub fn class_from_code(code: u8) -> Option<AgentClass> {
    Some(match code {
        0 => AgentClass::Car,
        1 => AgentClass::Truck,
        2 => AgentClass::Pedestrian,
        3 => AgentClass::Bicycle,
        _ => return None,
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameLogError {
    #[error("not a frame log (bad magic)")]
    BadMagic,
    #[error("unsupported frame log version {0}")]
    Version(u32),
    #[error("frame log truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown class code {0}")]
    Class(u8),
    #[error("agent id is not UTF-8")]
    Utf8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f32,
    pub width: f32,
    pub class: AgentClass,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogFrame {
    pub time: f64,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameLog {
    pub dt: f64,
    pub ids: Vec<String>,
    pub classes: Vec<AgentClass>,
    pub frames: Vec<LogFrame>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameLogError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(FrameLogError::Truncated(self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FrameLogError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FrameLogError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, FrameLogError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn class(&mut self) -> Result<AgentClass, FrameLogError> {
        let c = self.take(1)?[0];
        class_from_code(c).ok_or(FrameLogError::Class(c))
    }
}

impl FrameLog {
    pub fn parse(bytes: &[u8]) -> Result<FrameLog, FrameLogError> {
        let mut c = Cursor { buf: bytes, pos: 0 };
        if c.take(4).map_err(|_| FrameLogError::BadMagic)? != MAGIC {
            return Err(FrameLogError::BadMagic);
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(FrameLogError::Version(version));
        }
        let n_agents = c.u32()? as usize;
        let n_frames = c.u32()? as usize;
        let dt = c.f64()?;
        let mut ids = Vec::new();
        let mut classes = Vec::new();
        for _ in 0..n_agents {
            classes.push(c.class()?);
            c.take(3)?;
            let len = c.u32()? as usize;
            ids.push(String::from_utf8(c.take(len)?.to_vec()).map_err(|_| FrameLogError::Utf8)?);
        }
        let mut frames = Vec::new();
        for _ in 0..n_frames {
            let time = c.f64()?;
            let mut agents = Vec::with_capacity(n_agents);
            for _ in 0..n_agents {
                let (x, y, heading, speed) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
                let (length, width) = (c.f32()?, c.f32()?);
                let class = c.class()?;
                let active = c.take(1)?[0] != 0;
                c.take(6)?;
                agents.push(AgentRecord { x, y, heading, speed, length, width, class, active });
            }
            frames.push(LogFrame { time, agents });
        }
        Ok(FrameLog { dt, ids, classes, frames })
    }
}
