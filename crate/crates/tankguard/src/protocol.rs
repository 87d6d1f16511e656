//! Byte-exact Modbus/TCP framing for the sensor/actuator traffic.
//!
//! Only the subset the control loop needs is supported: function 0x03
//! (read holding registers) for sensor polls and 0x06 (write single
//! register) for actuator commands. Every frame is an MBAP header
//! (transaction id, protocol id 0, length, unit id) followed by the PDU,
//! all big-endian. Analog readings ride in holding registers as
//! fixed-point values.

use thiserror::Error;

use crate::config::{Config, ConfigError};

pub const READ_HOLDING_REGISTERS: u8 = 0x03;
pub const WRITE_SINGLE_REGISTER: u8 = 0x06;

/// Max registers in one 0x03 transaction, per the Modbus spec.
pub const MAX_READ_COUNT: usize = 125;

const MBAP_LEN: usize = 7;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("buffer truncated: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("protocol id must be 0, got {0:#06x}")]
    ProtocolId(u16),
    #[error("declared length {declared} does not match PDU structure ({detail})")]
    LengthMismatch { declared: usize, detail: String },
    #[error("unsupported function code {0:#04x}")]
    UnsupportedFunction(u8),
    #[error("register count {0} outside 1..=125")]
    RegisterCount(usize),
    #[error("value {value} out of range for a register at scale {scale}")]
    ValueOutOfRange { value: f64, scale: u32 },
}

/// Whether a PDU travels PLC-to-field (request) or field-to-PLC
/// (response). Write echoes are byte-identical to their requests, so
/// decoding needs the direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Request,
    Response,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Request => "request",
            Direction::Response => "response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pdu {
    ReadHoldingRegistersRequest { start_address: u16, count: u16 },
    ReadHoldingRegistersResponse { values: Vec<u16> },
    WriteSingleRegisterRequest { address: u16, value: u16 },
    WriteSingleRegisterResponse { address: u16, value: u16 },
}

impl Pdu {
    pub fn direction(&self) -> Direction {
        match self {
            Pdu::ReadHoldingRegistersRequest { .. } | Pdu::WriteSingleRegisterRequest { .. } => {
                Direction::Request
            }
            Pdu::ReadHoldingRegistersResponse { .. } | Pdu::WriteSingleRegisterResponse { .. } => {
                Direction::Response
            }
        }
    }

    pub fn function_code(&self) -> u8 {
        match self {
            Pdu::ReadHoldingRegistersRequest { .. } | Pdu::ReadHoldingRegistersResponse { .. } => {
                READ_HOLDING_REGISTERS
            }
            Pdu::WriteSingleRegisterRequest { .. } | Pdu::WriteSingleRegisterResponse { .. } => {
                WRITE_SINGLE_REGISTER
            }
        }
    }
}

/// Decoded Modbus/TCP application frame. The protocol id is always 0 on
/// the wire and is checked on decode rather than stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModbusFrame {
    pub transaction_id: u16,
    pub unit_id: u8,
    pub pdu: Pdu,
}

impl ModbusFrame {
    pub fn direction(&self) -> Direction {
        self.pdu.direction()
    }
}

/// Encodes a frame: MBAP header, function code, PDU body.
pub fn encode(frame: &ModbusFrame) -> Result<Vec<u8>, FrameError> {
    let mut pdu = Vec::with_capacity(8);
    pdu.push(frame.pdu.function_code());
    match &frame.pdu {
        Pdu::ReadHoldingRegistersRequest { start_address, count } => {
            let n = *count as usize;
            if n == 0 || n > MAX_READ_COUNT {
                return Err(FrameError::RegisterCount(n));
            }
            pdu.extend_from_slice(&start_address.to_be_bytes());
            pdu.extend_from_slice(&count.to_be_bytes());
        }
        Pdu::ReadHoldingRegistersResponse { values } => {
            if values.is_empty() || values.len() > MAX_READ_COUNT {
                return Err(FrameError::RegisterCount(values.len()));
            }
            pdu.push((values.len() * 2) as u8);
            for value in values {
                pdu.extend_from_slice(&value.to_be_bytes());
            }
        }
        Pdu::WriteSingleRegisterRequest { address, value }
        | Pdu::WriteSingleRegisterResponse { address, value } => {
            pdu.extend_from_slice(&address.to_be_bytes());
            pdu.extend_from_slice(&value.to_be_bytes());
        }
    }

    let mut out = Vec::with_capacity(MBAP_LEN + pdu.len());
    out.extend_from_slice(&frame.transaction_id.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&((1 + pdu.len()) as u16).to_be_bytes());
    out.push(frame.unit_id);
    out.extend_from_slice(&pdu);
    Ok(out)
}

/// Decodes one frame from the front of `bytes`.
///
/// Returns the frame and the number of bytes consumed; trailing bytes
/// beyond the declared length are left for the caller. `direction`
/// disambiguates write echoes from write requests.
pub fn decode(bytes: &[u8], direction: Direction) -> Result<(ModbusFrame, usize), FrameError> {
    if bytes.len() < MBAP_LEN {
        return Err(FrameError::Truncated {
            needed: MBAP_LEN,
            got: bytes.len(),
        });
    }
    let transaction_id = u16::from_be_bytes([bytes[0], bytes[1]]);
    let protocol_id = u16::from_be_bytes([bytes[2], bytes[3]]);
    if protocol_id != 0 {
        return Err(FrameError::ProtocolId(protocol_id));
    }
    let declared = u16::from_be_bytes([bytes[4], bytes[5]]) as usize;
    let total = 6 + declared;
    if bytes.len() < total {
        return Err(FrameError::Truncated {
            needed: total,
            got: bytes.len(),
        });
    }
    if declared < 2 {
        return Err(FrameError::LengthMismatch {
            declared,
            detail: "too short for unit id and function code".to_string(),
        });
    }
    let unit_id = bytes[6];
    let function = bytes[7];
    let body = &bytes[8..total];

    let pdu = match (function, direction) {
        (READ_HOLDING_REGISTERS, Direction::Request) => {
            if body.len() != 4 {
                return Err(FrameError::LengthMismatch {
                    declared,
                    detail: format!("read request body is {} bytes, expected 4", body.len()),
                });
            }
            let start_address = u16::from_be_bytes([body[0], body[1]]);
            let count = u16::from_be_bytes([body[2], body[3]]);
            let n = count as usize;
            if n == 0 || n > MAX_READ_COUNT {
                return Err(FrameError::RegisterCount(n));
            }
            Pdu::ReadHoldingRegistersRequest { start_address, count }
        }
        (READ_HOLDING_REGISTERS, Direction::Response) => {
            if body.is_empty() {
                return Err(FrameError::LengthMismatch {
                    declared,
                    detail: "read response missing byte count".to_string(),
                });
            }
            let byte_count = body[0] as usize;
            if !byte_count.is_multiple_of(2) || body.len() != 1 + byte_count {
                return Err(FrameError::LengthMismatch {
                    declared,
                    detail: format!(
                        "byte count {} inconsistent with body of {} bytes",
                        byte_count,
                        body.len()
                    ),
                });
            }
            let n = byte_count / 2;
            if n == 0 || n > MAX_READ_COUNT {
                return Err(FrameError::RegisterCount(n));
            }
            let values = body[1..]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect();
            Pdu::ReadHoldingRegistersResponse { values }
        }
        (WRITE_SINGLE_REGISTER, _) => {
            if body.len() != 4 {
                return Err(FrameError::LengthMismatch {
                    declared,
                    detail: format!("write body is {} bytes, expected 4", body.len()),
                });
            }
            let address = u16::from_be_bytes([body[0], body[1]]);
            let value = u16::from_be_bytes([body[2], body[3]]);
            match direction {
                Direction::Request => Pdu::WriteSingleRegisterRequest { address, value },
                Direction::Response => Pdu::WriteSingleRegisterResponse { address, value },
            }
        }
        (other, _) => return Err(FrameError::UnsupportedFunction(other)),
    };

    Ok((
        ModbusFrame {
            transaction_id,
            unit_id,
            pdu,
        },
        total,
    ))
}

/// Fixed-point encoding of an analog reading into one holding register.
pub fn encode_level(value: f64, scale: u32) -> Result<u16, FrameError> {
    let scaled = value * f64::from(scale);
    if !scaled.is_finite() || !(-0.5..65535.5).contains(&scaled) {
        return Err(FrameError::ValueOutOfRange { value, scale });
    }
    Ok(scaled.round().max(0.0) as u16)
}

/// Inverse of [`encode_level`] up to the quantization step `1/scale`.
pub fn decode_level(raw: u16, scale: u32) -> f64 {
    f64::from(raw) / f64::from(scale)
}

/// Where each process variable lives in the holding-register space, and
/// the fixed-point scales used to carry the analog values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMap {
    pub level_register: u16,
    pub inflow_register: u16,
    pub outflow_register: u16,
    pub pump_coil_register: u16,
    pub valve_coil_register: u16,
    /// Level units per meter (1000 = millimeters).
    pub fixed_point_scale: u32,
    /// Flow units per m^3/s.
    pub flow_scale: u32,
}

impl Default for RegisterMap {
    fn default() -> Self {
        Self {
            level_register: 0,
            inflow_register: 1,
            outflow_register: 2,
            pump_coil_register: 10,
            valve_coil_register: 11,
            fixed_point_scale: 1000,
            flow_scale: 10_000,
        }
    }
}

impl RegisterMap {
    pub fn validate(&self) -> Result<(), FrameError> {
        let addrs = [
            self.level_register,
            self.inflow_register,
            self.outflow_register,
            self.pump_coil_register,
            self.valve_coil_register,
        ];
        for (i, a) in addrs.iter().enumerate() {
            for b in &addrs[i + 1..] {
                if a == b {
                    return Err(FrameError::LengthMismatch {
                        declared: 0,
                        detail: format!("register address {a} assigned twice"),
                    });
                }
            }
        }
        if self.fixed_point_scale == 0 || self.flow_scale == 0 {
            return Err(FrameError::ValueOutOfRange {
                value: 0.0,
                scale: 0,
            });
        }
        let (start, count) = self.sensor_block();
        if count as usize > MAX_READ_COUNT {
            return Err(FrameError::RegisterCount(count as usize));
        }
        let _ = start;
        Ok(())
    }

    /// Contiguous read window covering the three sensor registers.
    pub fn sensor_block(&self) -> (u16, u16) {
        let lo = self
            .level_register
            .min(self.inflow_register)
            .min(self.outflow_register);
        let hi = self
            .level_register
            .max(self.inflow_register)
            .max(self.outflow_register);
        (lo, hi - lo + 1)
    }

    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let mut map = Self::default();
        config.override_u16("registers.level", &mut map.level_register)?;
        config.override_u16("registers.inflow", &mut map.inflow_register)?;
        config.override_u16("registers.outflow", &mut map.outflow_register)?;
        config.override_u16("registers.pump", &mut map.pump_coil_register)?;
        config.override_u16("registers.valve", &mut map.valve_coil_register)?;
        let mut level_scale = map.fixed_point_scale as u64;
        let mut flow_scale = map.flow_scale as u64;
        config.override_u64("registers.level_scale", &mut level_scale)?;
        config.override_u64("registers.flow_scale", &mut flow_scale)?;
        map.fixed_point_scale = level_scale as u32;
        map.flow_scale = flow_scale as u32;
        Ok(map)
    }
}
