//! Newline-delimited JSON wire messages. One object per line, tagged by
//! `"t"`, fields in schema order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Idle,
    Loaded,
    Printing,
    Paused,
    Stopping,
    Done,
    Faulted,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Loaded => "loaded",
            Phase::Printing => "printing",
            Phase::Paused => "paused",
            Phase::Stopping => "stopping",
            Phase::Done => "done",
            Phase::Faulted => "faulted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t")]
pub enum Message {
    #[serde(rename = "LOAD")]
    Load { seq: u64, program: String },
    #[serde(rename = "START")]
    Start { seq: u64 },
    #[serde(rename = "PAUSE")]
    Pause { seq: u64 },
    #[serde(rename = "RESUME")]
    Resume { seq: u64 },
    #[serde(rename = "STOP")]
    Stop { seq: u64 },
    #[serde(rename = "SET_FLOW")]
    SetFlow { seq: u64, mult: f64 },
    #[serde(rename = "CMD")]
    Cmd { seq: u64, idx: u64, line: String },
    #[serde(rename = "ACK")]
    Ack { seq: u64, idx: u64 },
    #[serde(rename = "STATUS")]
    Status {
        seq: u64,
        progress: f64,
        layer: usize,
        elapsed: f64,
        eta: Option<f64>,
        defects: usize,
        phase: Phase,
    },
    #[serde(rename = "DEFECT")]
    Defect { seq: u64, entry: serde_json::Value },
    #[serde(rename = "DONE")]
    Done { seq: u64 },
    #[serde(rename = "ERROR")]
    Error { seq: u64, reason: String },
}

impl Message {
    pub fn seq(&self) -> u64 {
        match self {
            Message::Load { seq, .. }
            | Message::Start { seq }
            | Message::Pause { seq }
            | Message::Resume { seq }
            | Message::Stop { seq }
            | Message::SetFlow { seq, .. }
            | Message::Cmd { seq, .. }
            | Message::Ack { seq, .. }
            | Message::Status { seq, .. }
            | Message::Defect { seq, .. }
            | Message::Done { seq }
            | Message::Error { seq, .. } => *seq,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Message::Load { .. } => "LOAD",
            Message::Start { .. } => "START",
            Message::Pause { .. } => "PAUSE",
            Message::Resume { .. } => "RESUME",
            Message::Stop { .. } => "STOP",
            Message::SetFlow { .. } => "SET_FLOW",
            Message::Cmd { .. } => "CMD",
            Message::Ack { .. } => "ACK",
            Message::Status { .. } => "STATUS",
            Message::Defect { .. } => "DEFECT",
            Message::Done { .. } => "DONE",
            Message::Error { .. } => "ERROR",
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(
            self,
            Message::Load { .. }
                | Message::Start { .. }
                | Message::Pause { .. }
                | Message::Resume { .. }
                | Message::Stop { .. }
                | Message::SetFlow { .. }
        )
    }

    /// One wire line without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Message, serde_json::Error> {
        serde_json::from_str(line.trim())
    }
}
