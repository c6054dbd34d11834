//! Binary wire codec for the E2-style message set exchanged between the
//! E2 node and the xApp.
//!
//! Frame layout: magic `ARGO` (0x41 0x52 0x47 0x4F), version byte 0x01,
//! message type byte, payload length as u32 little-endian, then the
//! payload. All integers are little-endian. Signal values travel as
//! signed 16-bit centi-dB. UE ids are 1-byte length-prefixed ASCII;
//! sequences are a 16-bit count followed by the elements.
//!
//! Message types: 1 SetupRequest, 2 SetupResponse, 3 SubscriptionRequest,
//! 4 SubscriptionResponse, 5 RicIndication. Types 6-8 are reserved for
//! the Insert/Control/Policy services and rejected by the decoder.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::types::{CellIdentity, CellMeasurement, Rat, TypeError};

pub const MAGIC: [u8; 4] = [0x41, 0x52, 0x47, 0x4F];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 10;

/// Upper bound on a payload read from a stream, where no caller-supplied
/// buffer bounds the allocation. A maximal indication (65535 measurements)
/// is ~1.4 MB, so this leaves ample headroom.
pub const MAX_STREAM_PAYLOAD: usize = 4 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("not an ARGOS frame (offset {offset})")]
    BadMagic { offset: usize },
    #[error("unsupported version 0x{version:02x} (offset {offset})")]
    UnsupportedVersion { version: u8, offset: usize },
    #[error("truncated: need {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("malformed payload at offset {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("cannot encode: {0}")]
    Encode(String),
}

/// One cell sample as it travels on the wire. Signal values are stored
/// pre-quantized so encode/decode round-trips bit-exactly; conversion to
/// and from dB happens only at the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireMeasurement {
    pub rat: Rat,
    pub arfcn: u32,
    pub pci: u16,
    pub rsrp_cdb: i16,
    pub rsrq_cdb: i16,
    pub sinr_cdb: i16,
    pub timestamp_ms: u64,
}

impl WireMeasurement {
    pub fn from_measurement(m: &CellMeasurement) -> Self {
        Self {
            rat: m.cell.rat,
            arfcn: m.cell.arfcn,
            pci: m.cell.pci,
            rsrp_cdb: to_centi_db(m.rsrp),
            rsrq_cdb: to_centi_db(m.rsrq),
            sinr_cdb: to_centi_db(m.sinr),
            timestamp_ms: m.timestamp_ms,
        }
    }

    /// Back to the domain type; fails if the identity fields are not a
    /// valid cell (the wire format is structurally permissive there).
    pub fn to_measurement(&self) -> Result<CellMeasurement, TypeError> {
        let cell = CellIdentity::new(self.rat, self.arfcn, self.pci)?;
        Ok(CellMeasurement::new(
            cell,
            from_centi_db(self.rsrp_cdb),
            from_centi_db(self.rsrq_cdb),
            from_centi_db(self.sinr_cdb),
            self.timestamp_ms,
        ))
    }
}

/// Quantizes a dB value to centi-dB, rounding to nearest and saturating
/// at ±327.67 dB.
pub fn to_centi_db(db: f64) -> i16 {
    (db * 100.0).round().clamp(-32767.0, 32767.0) as i16
}

pub fn from_centi_db(cdb: i16) -> f64 {
    cdb as f64 / 100.0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    SetupRequest {
        node_id: u32,
        capabilities: Vec<String>,
    },
    SetupResponse {
        accepted: bool,
    },
    SubscriptionRequest {
        subscription_id: u32,
        report_period_ms: u32,
    },
    SubscriptionResponse {
        subscription_id: u32,
        accepted: bool,
    },
    RicIndication {
        subscription_id: u32,
        ue_id: String,
        second_index: u64,
        measurements: Vec<WireMeasurement>,
    },
}

impl WireMessage {
    fn type_code(&self) -> u8 {
        match self {
            WireMessage::SetupRequest { .. } => 1,
            WireMessage::SetupResponse { .. } => 2,
            WireMessage::SubscriptionRequest { .. } => 3,
            WireMessage::SubscriptionResponse { .. } => 4,
            WireMessage::RicIndication { .. } => 5,
        }
    }
}

fn check_tag(kind: &str, s: &str) -> Result<(), CodecError> {
    if s.is_empty() || s.len() > 255 || !s.is_ascii() {
        return Err(CodecError::Encode(format!(
            "{kind} {s:?} must be non-empty ASCII of at most 255 bytes"
        )));
    }
    Ok(())
}

fn put_tag(out: &mut Vec<u8>, s: &str) {
    out.push(s.len() as u8);
    out.extend_from_slice(s.as_bytes());
}

/// Encodes one message into a framed byte string. Validation happens
/// before any bytes are produced, so a failed encode emits nothing.
pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, CodecError> {
    let mut payload = Vec::new();
    match msg {
        WireMessage::SetupRequest { node_id, capabilities } => {
            if capabilities.len() > u16::MAX as usize {
                return Err(CodecError::Encode(format!(
                    "{} capability tags exceed the 16-bit sequence bound",
                    capabilities.len()
                )));
            }
            for tag in capabilities {
                check_tag("capability tag", tag)?;
            }
            payload.extend_from_slice(&node_id.to_le_bytes());
            payload.extend_from_slice(&(capabilities.len() as u16).to_le_bytes());
            for tag in capabilities {
                put_tag(&mut payload, tag);
            }
        }
        WireMessage::SetupResponse { accepted } => {
            payload.push(*accepted as u8);
        }
        WireMessage::SubscriptionRequest { subscription_id, report_period_ms } => {
            payload.extend_from_slice(&subscription_id.to_le_bytes());
            payload.extend_from_slice(&report_period_ms.to_le_bytes());
        }
        WireMessage::SubscriptionResponse { subscription_id, accepted } => {
            payload.extend_from_slice(&subscription_id.to_le_bytes());
            payload.push(*accepted as u8);
        }
        WireMessage::RicIndication { subscription_id, ue_id, second_index, measurements } => {
            check_tag("ue_id", ue_id)?;
            if measurements.len() > u16::MAX as usize {
                return Err(CodecError::Encode(format!(
                    "{} measurements exceed the 16-bit sequence bound",
                    measurements.len()
                )));
            }
            payload.extend_from_slice(&subscription_id.to_le_bytes());
            put_tag(&mut payload, ue_id);
            payload.extend_from_slice(&second_index.to_le_bytes());
            payload.extend_from_slice(&(measurements.len() as u16).to_le_bytes());
            for m in measurements {
                payload.push(match m.rat {
                    Rat::Eutra => 0,
                    Rat::Nr => 1,
                });
                payload.extend_from_slice(&m.arfcn.to_le_bytes());
                payload.extend_from_slice(&m.pci.to_le_bytes());
                payload.extend_from_slice(&m.rsrp_cdb.to_le_bytes());
                payload.extend_from_slice(&m.rsrq_cdb.to_le_bytes());
                payload.extend_from_slice(&m.sinr_cdb.to_le_bytes());
                payload.extend_from_slice(&m.timestamp_ms.to_le_bytes());
            }
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.type_code());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], pos: usize) -> Self {
        Self { buf, pos }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(CodecError::Malformed {
                offset: self.pos,
                message: format!("field of {n} bytes overruns payload"),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn i16(&mut self) -> Result<i16, CodecError> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bool(&mut self) -> Result<bool, CodecError> {
        let offset = self.pos;
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(CodecError::Malformed {
                offset,
                message: format!("flag byte must be 0 or 1, got {other}"),
            }),
        }
    }

    fn rat(&mut self) -> Result<Rat, CodecError> {
        let offset = self.pos;
        match self.u8()? {
            0 => Ok(Rat::Eutra),
            1 => Ok(Rat::Nr),
            other => Err(CodecError::Malformed {
                offset,
                message: format!("unknown RAT tag {other}"),
            }),
        }
    }

    fn tag(&mut self, kind: &str) -> Result<String, CodecError> {
        let offset = self.pos;
        let len = self.u8()? as usize;
        if len == 0 {
            return Err(CodecError::Malformed {
                offset,
                message: format!("empty {kind}"),
            });
        }
        let bytes = self.take(len)?;
        if !bytes.is_ascii() {
            return Err(CodecError::Malformed {
                offset,
                message: format!("non-ASCII {kind}"),
            });
        }
        Ok(String::from_utf8(bytes.to_vec()).unwrap())
    }
}

/// Decodes exactly one message from the front of `bytes`, returning it
/// with the number of bytes consumed; the rest of the buffer is the
/// caller's stream remainder. Allocations are bounded by the actual
/// buffer length, never by declared counts.
pub fn decode(bytes: &[u8]) -> Result<(WireMessage, usize), CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            offset: bytes.len(),
            needed: HEADER_LEN - bytes.len(),
        });
    }
    if bytes[0..4] != MAGIC {
        let offset = (0..4).find(|&i| bytes[i] != MAGIC[i]).unwrap();
        return Err(CodecError::BadMagic { offset });
    }
    if bytes[4] != VERSION {
        return Err(CodecError::UnsupportedVersion {
            version: bytes[4],
            offset: 4,
        });
    }
    let msg_type = bytes[5];
    let payload_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let available = bytes.len() - HEADER_LEN;
    if payload_len > available {
        return Err(CodecError::Truncated {
            offset: bytes.len(),
            needed: payload_len - available,
        });
    }
    let frame_len = HEADER_LEN + payload_len;
    let mut r = Reader::new(&bytes[..frame_len], HEADER_LEN);
    let msg = match msg_type {
        1 => {
            let node_id = r.u32()?;
            let count = r.u16()? as usize;
            let mut capabilities = Vec::with_capacity(count.min(available));
            for _ in 0..count {
                capabilities.push(r.tag("capability tag")?);
            }
            WireMessage::SetupRequest { node_id, capabilities }
        }
        2 => WireMessage::SetupResponse { accepted: r.bool()? },
        3 => WireMessage::SubscriptionRequest {
            subscription_id: r.u32()?,
            report_period_ms: r.u32()?,
        },
        4 => WireMessage::SubscriptionResponse {
            subscription_id: r.u32()?,
            accepted: r.bool()?,
        },
        5 => {
            let subscription_id = r.u32()?;
            let ue_id = r.tag("ue_id")?;
            let second_index = r.u64()?;
            let count = r.u16()? as usize;
            // 21 bytes per element; cap the preallocation by what the
            // payload could actually hold.
            let mut measurements = Vec::with_capacity(count.min(available / 21 + 1));
            for _ in 0..count {
                measurements.push(WireMeasurement {
                    rat: r.rat()?,
                    arfcn: r.u32()?,
                    pci: r.u16()?,
                    rsrp_cdb: r.i16()?,
                    rsrq_cdb: r.i16()?,
                    sinr_cdb: r.i16()?,
                    timestamp_ms: r.u64()?,
                });
            }
            WireMessage::RicIndication {
                subscription_id,
                ue_id,
                second_index,
                measurements,
            }
        }
        6..=8 => {
            return Err(CodecError::Malformed {
                offset: 5,
                message: format!("reserved message type {msg_type} (Insert/Control/Policy) not implemented"),
            })
        }
        other => {
            return Err(CodecError::Malformed {
                offset: 5,
                message: format!("unknown message type {other}"),
            })
        }
    };
    if r.pos != frame_len {
        return Err(CodecError::Malformed {
            offset: r.pos,
            message: format!("{} unconsumed payload bytes", frame_len - r.pos),
        });
    }
    Ok((msg, frame_len))
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Writes one framed message to a reliable ordered byte stream.
pub fn write_message<W: Write>(w: &mut W, msg: &WireMessage) -> Result<(), TransportError> {
    let bytes = encode(msg)?;
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads one framed message from a stream. Returns `Ok(None)` on a clean
/// end-of-stream at a frame boundary; EOF inside a frame is an error.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<WireMessage>, TransportError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        let n = r.read(&mut header[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(CodecError::Truncated {
                offset: filled,
                needed: HEADER_LEN - filled,
            }
            .into());
        }
        filled += n;
    }
    let payload_len = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    if payload_len > MAX_STREAM_PAYLOAD {
        return Err(CodecError::Malformed {
            offset: 6,
            message: format!("declared payload of {payload_len} bytes exceeds stream limit"),
        }
        .into());
    }
    let mut frame = vec![0u8; HEADER_LEN + payload_len];
    frame[..HEADER_LEN].copy_from_slice(&header);
    r.read_exact(&mut frame[HEADER_LEN..])?;
    let (msg, consumed) = decode(&frame)?;
    debug_assert_eq!(consumed, frame.len());
    Ok(Some(msg))
}
