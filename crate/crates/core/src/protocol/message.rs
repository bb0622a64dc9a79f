use serde::{Deserialize, Serialize};

use crate::quantization::QuantExponent;
use crate::scalar::Scalar;

/// A round's broadcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Message<T> {
    /// Heartbeat of a passive agent.
    Null,
    Min {
        x: T,
    },
    /// Full sample-minimum vectors.
    R {
        x: Vec<T>,
        y: Vec<T>,
    },
    /// One entry pair of the quantized vectors, at position `cursor`.
    Rbar {
        cursor: usize,
        x: QuantExponent,
        y: QuantExponent,
    },
    /// Firing counter and full quantized vectors.
    Rbard {
        c: u64,
        x: Vec<QuantExponent>,
        y: Vec<QuantExponent>,
    },
}

impl<T> Message<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Null => "null",
            Message::Min { .. } => "min",
            Message::R { .. } => "r",
            Message::Rbar { .. } => "rbar",
            Message::Rbard { .. } => "rbard",
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Message::Null)
    }

    pub fn shape(&self) -> MessageShape {
        let mut s = MessageShape::default();
        match self {
            Message::Null => s.null = true,
            Message::Min { .. } => s.reals = 1,
            Message::R { x, y } => s.reals = x.len() + y.len(),
            Message::Rbar { .. } => {
                s.exponents = 2;
                s.cursor = true;
            }
            Message::Rbard { c, x, y } => {
                s.exponents = x.len() + y.len();
                s.counter = Some(*c);
            }
        }
        s
    }
}

/// What a message carries, for size accounting. Widths are fixed after the
/// trial, once the global exponent and counter ranges are known.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageShape {
    pub null: bool,
    pub reals: usize,
    pub exponents: usize,
    pub cursor: bool,
    pub counter: Option<u64>,
}
