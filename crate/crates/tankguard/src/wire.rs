//! Simulated sensor/PLC channel with a man-in-the-middle hook.
//!
//! All traffic between the field devices and the PLC passes through a
//! [`Channel`]. With no interceptor installed the channel is the
//! identity on every byte sequence. An installed [`AttackConfig`]
//! applies false data injection to read responses inside its active
//! window: each targeted register value is scaled by `1 ± intensity`,
//! re-rounded, and clamped to the u16 range. Requests, writes, and
//! frames the attacker cannot parse are forwarded verbatim. Every
//! transmission is recorded in the channel log.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::protocol::{self, Direction, ModbusFrame, Pdu};

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("attack session already active")]
    AttackAlreadyActive,
    #[error("attack intensity {0} outside [0, 1]")]
    IntensityOutOfRange(f64),
    #[error("attack target register set is empty")]
    EmptyTargets,
    #[error("attack window start {0} is not before end {1}")]
    EmptyWindow(u64, u64),
}

/// Sign of the value modification applied to targeted registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPolicy {
    /// One fair coin flip per modified frame.
    RandomPerFrame,
    AlwaysPositive,
    AlwaysNegative,
}

impl SignPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignPolicy::RandomPerFrame => "random_per_frame",
            SignPolicy::AlwaysPositive => "always_positive",
            SignPolicy::AlwaysNegative => "always_negative",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "random_per_frame" => Some(SignPolicy::RandomPerFrame),
            "always_positive" => Some(SignPolicy::AlwaysPositive),
            "always_negative" => Some(SignPolicy::AlwaysNegative),
            _ => None,
        }
    }
}

/// False-data-injection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Fractional modification magnitude, in [0, 1].
    pub intensity: f64,
    pub sign_policy: SignPolicy,
    /// Register addresses whose values are modified.
    pub targets: Vec<u16>,
    /// Steps during which the interceptor is live: [start, end).
    pub active_window: (u64, u64),
}

impl AttackConfig {
    /// Attack on the level register only, live on every step.
    pub fn level_only(intensity: f64, registers: &protocol::RegisterMap) -> Self {
        Self {
            intensity,
            sign_policy: SignPolicy::RandomPerFrame,
            targets: vec![registers.level_register],
            active_window: (0, u64::MAX),
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(WireError::IntensityOutOfRange(self.intensity));
        }
        if self.targets.is_empty() {
            return Err(WireError::EmptyTargets);
        }
        if self.active_window.0 >= self.active_window.1 {
            return Err(WireError::EmptyWindow(self.active_window.0, self.active_window.1));
        }
        Ok(())
    }

    pub fn from_config(config: &Config, registers: &protocol::RegisterMap) -> Result<Self, ConfigError> {
        let mut attack = Self::level_only(0.1, registers);
        config.override_f64("attack.intensity", &mut attack.intensity)?;
        if let Some(raw) = config.get("attack.sign") {
            attack.sign_policy = SignPolicy::parse(raw).ok_or_else(|| ConfigError::BadValue {
                key: "attack.sign".to_string(),
                value: raw.to_string(),
                expected: "one of random_per_frame, always_positive, always_negative",
            })?;
        }
        config.override_u16_list("attack.targets", &mut attack.targets)?;
        config.override_u64("attack.window_start", &mut attack.active_window.0)?;
        config.override_u64("attack.window_end", &mut attack.active_window.1)?;
        Ok(attack)
    }

    fn window_contains(&self, step: u64) -> bool {
        step >= self.active_window.0 && step < self.active_window.1
    }
}

/// One transmission as seen by the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEntry {
    pub step: u64,
    pub direction: Direction,
    pub original: Vec<u8>,
    pub delivered: Vec<u8>,
    pub modified: bool,
    /// The interceptor was live but could not parse the frame.
    pub undecodable: bool,
}

/// Point-to-point channel between the field devices and the PLC.
pub struct Channel {
    rng: ChaCha8Rng,
    interceptor: Option<AttackConfig>,
    log: Vec<ChannelEntry>,
    /// Window of the most recent read request, used by the attacker to
    /// map response values back to register addresses.
    pending_read: Option<(u16, u16)>,
}

impl Channel {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            interceptor: None,
            log: Vec::new(),
            pending_read: None,
        }
    }

    /// Installs the interceptor for its configured window.
    pub fn start_attack(&mut self, config: AttackConfig) -> Result<(), WireError> {
        if self.interceptor.is_some() {
            return Err(WireError::AttackAlreadyActive);
        }
        config.validate()?;
        self.interceptor = Some(config);
        Ok(())
    }

    /// Removes the interceptor; the channel is pass-through again.
    pub fn stop_attack(&mut self) {
        self.interceptor = None;
    }

    pub fn attack_active(&self) -> bool {
        self.interceptor.is_some()
    }

    pub fn log(&self) -> &[ChannelEntry] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<ChannelEntry> {
        std::mem::take(&mut self.log)
    }

    /// Carries one frame across the channel and logs the transmission.
    pub fn transmit(&mut self, bytes: &[u8], direction: Direction, step: u64) -> Vec<u8> {
        let (delivered, undecodable) = self.intercept(bytes, direction, step);
        let modified = delivered != bytes;
        self.log.push(ChannelEntry {
            step,
            direction,
            original: bytes.to_vec(),
            delivered: delivered.clone(),
            modified,
            undecodable,
        });
        delivered
    }

    fn intercept(&mut self, bytes: &[u8], direction: Direction, step: u64) -> (Vec<u8>, bool) {
        // Track the latest read window so responses can be mapped back
        // to register addresses.
        if let Ok((frame, used)) = protocol::decode(bytes, direction) {
            if used == bytes.len() {
                if let Pdu::ReadHoldingRegistersRequest { start_address, count } = frame.pdu {
                    self.pending_read = Some((start_address, count));
                }
            }
        }

        let live = match &self.interceptor {
            Some(config) => config.window_contains(step),
            None => false,
        };
        if !live {
            return (bytes.to_vec(), false);
        }

        let parsed = match protocol::decode(bytes, direction) {
            Ok((frame, used)) if used == bytes.len() => frame,
            // attacker cannot parse; forwards verbatim
            _ => return (bytes.to_vec(), true),
        };
        if !matches!(parsed.pdu, Pdu::ReadHoldingRegistersResponse { .. }) {
            return (bytes.to_vec(), false);
        }
        let Some((start_address, _)) = self.pending_read else {
            return (bytes.to_vec(), false);
        };

        let config = self.interceptor.as_ref().expect("interceptor checked live");
        let modified = fdi_modify(&parsed, start_address, config, &mut self.rng);
        let delivered = protocol::encode(&modified)
            .expect("re-encoding a decoded frame cannot fail");
        (delivered, false)
    }

    /// Writes the log as CSV: step, direction, modified flag, original
    /// and delivered frames hex-encoded.
    pub fn export_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "step,direction,modified,original,delivered")?;
        for entry in &self.log {
            writeln!(
                out,
                "{},{},{},{},{}",
                entry.step,
                entry.direction.as_str(),
                u8::from(entry.modified),
                hex(&entry.original),
                hex(&entry.delivered),
            )?;
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Applies the value modification to every targeted register of a read
/// response. `start_address` is the address of the first value, taken
/// from the request the response answers.
pub fn fdi_modify(
    frame: &ModbusFrame,
    start_address: u16,
    config: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> ModbusFrame {
    let Pdu::ReadHoldingRegistersResponse { values } = &frame.pdu else {
        return frame.clone();
    };
    let targeted: Vec<usize> = values
        .iter()
        .enumerate()
        .filter_map(|(i, _)| {
            let address = start_address.checked_add(i as u16)?;
            config.targets.contains(&address).then_some(i)
        })
        .collect();
    if targeted.is_empty() {
        return frame.clone();
    }

    let sign = match config.sign_policy {
        SignPolicy::AlwaysPositive => 1.0,
        SignPolicy::AlwaysNegative => -1.0,
        SignPolicy::RandomPerFrame => {
            if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        }
    };
    let factor = 1.0 + sign * config.intensity;

    let mut new_values = values.clone();
    for i in targeted {
        new_values[i] = (f64::from(new_values[i]) * factor)
            .round()
            .clamp(0.0, 65535.0) as u16;
    }
    ModbusFrame {
        transaction_id: frame.transaction_id,
        unit_id: frame.unit_id,
        pdu: Pdu::ReadHoldingRegistersResponse { values: new_values },
    }
}
