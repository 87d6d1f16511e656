//! Scenario execution and dataset assembly.
//!
//! [`collect`] runs the full control loop (plant step, sensor read over
//! the channel, PLC decode, control decision, actuator writes) and
//! records what the PLC observes, one sample per stride. Samples taken
//! while the interceptor is live are labeled anomalous. The builders
//! assemble the balanced training sets and the mixed-intensity test set,
//! and everything round-trips through CSV.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::plant::{self, PlantError, PlantParams, PlantState, SafetyStatus, Thresholds};
use crate::protocol::{self, Direction, FrameError, ModbusFrame, Pdu, RegisterMap};
use crate::seeds;
use crate::wire::{AttackConfig, Channel, WireError};

const SENSOR_UNIT: u8 = 1;
const ACTUATOR_UNIT: u8 = 2;

/// Upper bound on warm-up length; a validated plant always cycles well
/// within this.
const WARMUP_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{status:?} at step {step} (level {level:.4}) during an unattacked run; the normal baseline must be safe")]
    SafetyAlarm {
        step: u64,
        level: f64,
        status: SafetyStatus,
    },
    #[error("control loop completed no fill/drain cycle within {0} steps")]
    WarmupTimeout(u64),
    #[error("sampling stride must satisfy duration >= stride >= 1 (duration {duration}, stride {stride})")]
    BadScenario { duration: u64, stride: u64 },
    #[error("need {needed} records of class {class}, found only {got}")]
    Insufficient {
        class: u8,
        needed: usize,
        got: usize,
    },
    #[error("no dataset provided for attack intensity {0}")]
    MissingIntensity(Intensity),
    #[error("{count} record(s) appear in both training and test sets (first: {first})")]
    TrainTestOverlap { count: usize, first: String },
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Behavior class of a sample: 0 normal, 1 anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Anomalous => 1,
        }
    }

    pub fn from_u8(value: u8) -> Option<Self> {
        match value {
            0 => Some(Label::Normal),
            1 => Some(Label::Anomalous),
            _ => None,
        }
    }
}

/// Attack intensity as an exact fraction, stored in basis points so it
/// can key maps and compare exactly (0.10 == 1000 bp).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Intensity(u32);

impl Intensity {
    pub fn from_fraction(fraction: f64) -> Option<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return None;
        }
        Some(Self((fraction * 10_000.0).round() as u32))
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.0) / 10_000.0
    }

    /// Percent value with trailing zeros trimmed, e.g. "1", "12.5".
    pub fn percent_label(self) -> String {
        format!("{}", f64::from(self.0) / 100.0)
    }
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fraction())
    }
}

/// Which scenario produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScenarioTag {
    Normal,
    Attack(Intensity),
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioTag::Normal => write!(f, "normal"),
            ScenarioTag::Attack(intensity) => write!(f, "fdi:{intensity}"),
        }
    }
}

/// Identity of one record: the scenario it came from plus its ordinal
/// within that scenario. Train/test disjointness is checked on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Provenance {
    pub scenario: ScenarioTag,
    pub index: u32,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.scenario, self.index)
    }
}

impl Provenance {
    fn parse(text: &str) -> Option<Self> {
        let (scenario, index) = text.rsplit_once(':')?;
        let index: u32 = index.parse().ok()?;
        let scenario = if scenario == "normal" {
            ScenarioTag::Normal
        } else {
            let fraction: f64 = scenario.strip_prefix("fdi:")?.parse().ok()?;
            ScenarioTag::Attack(Intensity::from_fraction(fraction)?)
        };
        Some(Self { scenario, index })
    }
}

/// One labeled observation from the PLC's point of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    /// Tank level as decoded from the sensor response, m.
    pub level: f64,
    /// Inlet flow as decoded, m^3/s.
    pub inflow: f64,
    /// Outlet flow as decoded, m^3/s.
    pub outflow: f64,
    /// Pump state in force when the reading was taken.
    pub pump: bool,
    /// Valve state in force when the reading was taken.
    pub valve: bool,
    pub label: Label,
}

impl SampleRecord {
    /// Feature vector handed to the classifier.
    pub fn features(&self) -> [f64; 5] {
        [
            self.level,
            self.inflow,
            self.outflow,
            f64::from(u8::from(self.pump)),
            f64::from(u8::from(self.valve)),
        ]
    }
}

/// Ordered records with per-record provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<SampleRecord>,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: SampleRecord, provenance: Provenance) {
        self.records.push(record);
        self.provenance.push(provenance);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SampleRecord, &Provenance)> {
        self.records.iter().zip(self.provenance.iter())
    }

    /// (normal, anomalous) record counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let anomalous = self
            .records
            .iter()
            .filter(|r| r.label == Label::Anomalous)
            .count();
        (self.records.len() - anomalous, anomalous)
    }

    /// Record counts per source scenario.
    pub fn scenario_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for p in &self.provenance {
            *counts.entry(p.scenario.to_string()).or_insert(0) += 1;
        }
        counts
    }

    /// Splits off the first `n` records; returns (head, tail).
    pub fn split_at(mut self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.records.len());
        let tail_records = self.records.split_off(n);
        let tail_provenance = self.provenance.split_off(n);
        (
            self,
            Dataset {
                records: tail_records,
                provenance: tail_provenance,
            },
        )
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label.as_u8()).collect()
    }

    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features().to_vec()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "level,inflow,outflow,pump,valve,label,provenance")?;
        for (record, provenance) in self.iter() {
            writeln!(
                out,
                "{:.8e},{:.8e},{:.8e},{},{},{},{}",
                record.level,
                record.inflow,
                record.outflow,
                u8::from(record.pump),
                u8::from(record.valve),
                record.label.as_u8(),
                provenance,
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut buffer = Vec::new();
        self.write_csv(&mut buffer).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, buffer).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(BufReader::new(file), &path.display().to_string())
    }

    pub fn read_csv<R: BufRead>(reader: R, path: &str) -> Result<Self, DataError> {
        let parse_err = |line: usize, detail: String| DataError::Parse {
            path: path.to_string(),
            line,
            detail,
        };
        let mut dataset = Dataset::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| DataError::Io {
                path: path.to_string(),
                source,
            })?;
            if line_no == 1 {
                if line != "level,inflow,outflow,pump,valve,label,provenance" {
                    return Err(parse_err(1, format!("unexpected header `{line}`")));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(parse_err(line_no, format!("expected 7 fields, got {}", fields.len())));
            }
            let float = |i: usize, name: &str| -> Result<f64, DataError> {
                fields[i]
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad {name} `{}`", fields[i])))
            };
            let binary = |i: usize, name: &str| -> Result<bool, DataError> {
                match fields[i] {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(parse_err(line_no, format!("bad {name} `{other}`"))),
                }
            };
            let label_raw: u8 = fields[5]
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad label `{}`", fields[5])))?;
            let label = Label::from_u8(label_raw)
                .ok_or_else(|| parse_err(line_no, format!("bad label `{label_raw}`")))?;
            let provenance = Provenance::parse(fields[6])
                .ok_or_else(|| parse_err(line_no, format!("bad provenance `{}`", fields[6])))?;
            dataset.push(
                SampleRecord {
                    level: float(0, "level")?,
                    inflow: float(1, "inflow")?,
                    outflow: float(2, "outflow")?,
                    pump: binary(3, "pump")?,
                    valve: binary(4, "valve")?,
                    label,
                },
                provenance,
            );
        }
        Ok(dataset)
    }
}

/// One scenario run: how long to sample, under which attack, how often.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    /// Steps in the sampling phase (after warm-up).
    pub duration: u64,
    /// Interceptor to install for the sampling phase; window is relative
    /// to the start of sampling.
    pub attack: Option<AttackConfig>,
    /// Steps per recorded sample.
    pub sampling_stride: u64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn normal(duration: u64, seed: u64) -> Self {
        Self {
            duration,
            attack: None,
            sampling_stride: 1,
            seed,
        }
    }

    pub fn attacked(duration: u64, attack: AttackConfig, seed: u64) -> Self {
        Self {
            duration,
            attack: Some(attack),
            sampling_stride: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.sampling_stride == 0 || self.duration < self.sampling_stride {
            return Err(DataError::BadScenario {
                duration: self.duration,
                stride: self.sampling_stride,
            });
        }
        if let Some(attack) = &self.attack {
            attack.validate()?;
        }
        Ok(())
    }

    fn tag(&self) -> ScenarioTag {
        match &self.attack {
            None => ScenarioTag::Normal,
            Some(attack) => ScenarioTag::Attack(
                Intensity::from_fraction(attack.intensity)
                    .expect("validated attack intensity is in [0, 1]"),
            ),
        }
    }
}

/// What the PLC saw in one loop iteration.
struct Observed {
    level: f64,
    inflow: f64,
    outflow: f64,
    pump: bool,
    valve: bool,
}

struct Loop<'a> {
    state: PlantState,
    channel: Channel,
    params: &'a PlantParams,
    thresholds: &'a Thresholds,
    registers: &'a RegisterMap,
    txn: u16,
    step: u64,
}

impl<'a> Loop<'a> {
    fn new(
        params: &'a PlantParams,
        thresholds: &'a Thresholds,
        registers: &'a RegisterMap,
        channel_seed: u64,
    ) -> Self {
        Self {
            state: PlantState::initial(),
            channel: Channel::new(channel_seed),
            params,
            thresholds,
            registers,
            txn: 0,
            step: 0,
        }
    }

    fn next_txn(&mut self) -> u16 {
        self.txn = self.txn.wrapping_add(1);
        self.txn
    }

    /// Runs one full loop iteration: physics, sensor poll over the
    /// channel, control on the decoded level, actuator writes back.
    fn exchange(&mut self) -> Result<Observed, DataError> {
        self.state = plant::step(&self.state, self.params);
        let pump_used = self.state.pump;
        let valve_used = self.state.valve;

        // PLC polls the sensor block.
        let (start, count) = self.registers.sensor_block();
        let poll = ModbusFrame {
            transaction_id: self.next_txn(),
            unit_id: SENSOR_UNIT,
            pdu: Pdu::ReadHoldingRegistersRequest {
                start_address: start,
                count,
            },
        };
        let poll_bytes = protocol::encode(&poll)?;
        let poll_delivered = self.channel.transmit(&poll_bytes, Direction::Request, self.step);

        // Sensor host answers from the true plant state.
        let (poll_seen, _) = protocol::decode(&poll_delivered, Direction::Request)?;
        let response = match poll_seen.pdu {
            Pdu::ReadHoldingRegistersRequest { start_address, count } => {
                let mut values = vec![0u16; count as usize];
                let mut put = |register: u16, raw: u16| {
                    let offset = register.wrapping_sub(start_address) as usize;
                    if offset < values.len() {
                        values[offset] = raw;
                    }
                };
                let scale = self.registers.fixed_point_scale;
                let flow_scale = self.registers.flow_scale;
                put(
                    self.registers.level_register,
                    protocol::encode_level(self.state.level, scale)?,
                );
                put(
                    self.registers.inflow_register,
                    protocol::encode_level(self.state.inflow, flow_scale)?,
                );
                put(
                    self.registers.outflow_register,
                    protocol::encode_level(self.state.outflow, flow_scale)?,
                );
                ModbusFrame {
                    transaction_id: poll_seen.transaction_id,
                    unit_id: SENSOR_UNIT,
                    pdu: Pdu::ReadHoldingRegistersResponse { values },
                }
            }
            _ => unreachable!("sensor host only receives read requests"),
        };
        let response_bytes = protocol::encode(&response)?;
        let response_delivered =
            self.channel
                .transmit(&response_bytes, Direction::Response, self.step);

        // PLC decodes the (possibly falsified) readings.
        let (seen, _) = protocol::decode(&response_delivered, Direction::Response)?;
        let Pdu::ReadHoldingRegistersResponse { values } = seen.pdu else {
            unreachable!("sensor host only sends read responses")
        };
        let at = |register: u16| -> u16 {
            values
                .get(register.wrapping_sub(start) as usize)
                .copied()
                .unwrap_or(0)
        };
        let observed = Observed {
            level: protocol::decode_level(
                at(self.registers.level_register),
                self.registers.fixed_point_scale,
            ),
            inflow: protocol::decode_level(
                at(self.registers.inflow_register),
                self.registers.flow_scale,
            ),
            outflow: protocol::decode_level(
                at(self.registers.outflow_register),
                self.registers.flow_scale,
            ),
            pump: pump_used,
            valve: valve_used,
        };

        // Control acts on what the PLC decoded, then commands both
        // actuators over the channel.
        let (pump_cmd, valve_cmd) = plant::control(
            observed.level,
            self.thresholds,
            (self.state.pump, self.state.valve),
        );
        for (register, command) in [
            (self.registers.pump_coil_register, pump_cmd),
            (self.registers.valve_coil_register, valve_cmd),
        ] {
            let write = ModbusFrame {
                transaction_id: self.next_txn(),
                unit_id: ACTUATOR_UNIT,
                pdu: Pdu::WriteSingleRegisterRequest {
                    address: register,
                    value: u16::from(command),
                },
            };
            let write_bytes = protocol::encode(&write)?;
            let write_delivered =
                self.channel
                    .transmit(&write_bytes, Direction::Request, self.step);

            // Actuator host applies whatever arrives and echoes it.
            let (write_seen, _) = protocol::decode(&write_delivered, Direction::Request)?;
            if let Pdu::WriteSingleRegisterRequest { address, value } = write_seen.pdu {
                if address == self.registers.pump_coil_register {
                    self.state.pump = value != 0;
                } else if address == self.registers.valve_coil_register {
                    self.state.valve = value != 0;
                }
                let echo = ModbusFrame {
                    transaction_id: write_seen.transaction_id,
                    unit_id: ACTUATOR_UNIT,
                    pdu: Pdu::WriteSingleRegisterResponse { address, value },
                };
                let echo_bytes = protocol::encode(&echo)?;
                self.channel
                    .transmit(&echo_bytes, Direction::Response, self.step);
            }
        }

        self.step += 1;
        Ok(observed)
    }
}

/// Runs one scenario and returns what the PLC recorded.
///
/// The first full fill/drain cycle is a warm-up: it runs unattacked and
/// unsampled so records reflect steady cycling. The interceptor, if
/// configured, is installed when sampling starts, with its window taken
/// relative to that point; records outside the window are discarded.
/// A sample is labeled anomalous exactly when the attack was live as its
/// sensor frame crossed the channel.
pub fn collect(
    scenario: &ScenarioConfig,
    params: &PlantParams,
    thresholds: &Thresholds,
    registers: &RegisterMap,
) -> Result<Dataset, DataError> {
    scenario.validate()?;
    params.validate_against(thresholds)?;
    registers.validate()?;

    let tag = scenario.tag();
    let mut sim = Loop::new(
        params,
        thresholds,
        registers,
        seeds::derive_seed(scenario.seed, "channel"),
    );

    let guard_safety = |step: u64, level: f64| -> Result<(), DataError> {
        if scenario.attack.is_none() {
            let status = plant::safety_check(level, thresholds);
            if status != SafetyStatus::Ok {
                return Err(DataError::SafetyAlarm { step, level, status });
            }
        }
        Ok(())
    };

    // Warm-up: run until the controller completes fill -> drain -> fill.
    let mut seen_drain = false;
    let mut warmup = 0u64;
    loop {
        sim.exchange()?;
        guard_safety(sim.step, sim.state.level)?;
        if !sim.state.pump {
            seen_drain = true;
        } else if seen_drain {
            break;
        }
        warmup += 1;
        if warmup >= WARMUP_CAP {
            return Err(DataError::WarmupTimeout(WARMUP_CAP));
        }
    }

    let sampling_start = sim.step;
    let window = match &scenario.attack {
        Some(attack) => {
            let absolute = (
                sampling_start.saturating_add(attack.active_window.0),
                sampling_start.saturating_add(attack.active_window.1),
            );
            sim.channel.start_attack(AttackConfig {
                active_window: absolute,
                ..attack.clone()
            })?;
            Some(absolute)
        }
        None => None,
    };

    let mut dataset = Dataset::new();
    let mut next_index = 0u32;
    for k in 0..scenario.duration {
        let attack_live = window
            .map(|(start, end)| sim.step >= start && sim.step < end)
            .unwrap_or(false);
        let observed = sim.exchange()?;
        guard_safety(sim.step, sim.state.level)?;
        if k % scenario.sampling_stride != 0 {
            continue;
        }
        let label = if scenario.attack.is_some() {
            if !attack_live {
                // pre/post-window traffic of an attack scenario is
                // neither clean nor attacked; drop it
                continue;
            }
            Label::Anomalous
        } else {
            Label::Normal
        };
        dataset.push(
            SampleRecord {
                level: observed.level,
                inflow: observed.inflow,
                outflow: observed.outflow,
                pump: observed.pump,
                valve: observed.valve,
                label,
            },
            Provenance {
                scenario: tag,
                index: next_index,
            },
        );
        next_index += 1;
    }
    Ok(dataset)
}

/// Takes the first `needed` records of `label` from `source`.
fn take_class(
    source: &Dataset,
    label: Label,
    needed: usize,
) -> Result<Vec<(SampleRecord, Provenance)>, DataError> {
    let taken: Vec<_> = source
        .iter()
        .filter(|(r, _)| r.label == label)
        .take(needed)
        .map(|(r, p)| (*r, *p))
        .collect();
    if taken.len() < needed {
        return Err(DataError::Insufficient {
            class: label.as_u8(),
            needed,
            got: taken.len(),
        });
    }
    Ok(taken)
}

/// Builds one balanced training set: `size_per_class` normal records
/// plus `size_per_class` anomalous records, shuffled.
pub fn build_training_set(
    normal: &Dataset,
    attacked: &Dataset,
    size_per_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset, DataError> {
    let mut rows = take_class(normal, Label::Normal, size_per_class)?;
    rows.extend(take_class(attacked, Label::Anomalous, size_per_class)?);
    rows.shuffle(rng);
    let mut out = Dataset::new();
    for (record, provenance) in rows {
        out.push(record, provenance);
    }
    Ok(out)
}

/// Assembles the mixed test set: `normal_count` held-out normal records
/// plus `per_intensity` anomalous records for every expected intensity.
/// Provenance identity must be disjoint from every given training set.
pub fn build_test_set(
    normal: &Dataset,
    attacked_by_intensity: &BTreeMap<Intensity, Dataset>,
    intensities: &[Intensity],
    normal_count: usize,
    per_intensity: usize,
    training_sets: &[&Dataset],
) -> Result<Dataset, DataError> {
    let mut rows = take_class(normal, Label::Normal, normal_count)?;
    for intensity in intensities {
        let source = attacked_by_intensity
            .get(intensity)
            .ok_or(DataError::MissingIntensity(*intensity))?;
        rows.extend(take_class(source, Label::Anomalous, per_intensity)?);
    }

    let train_identity: BTreeSet<Provenance> = training_sets
        .iter()
        .flat_map(|d| d.provenance().iter().copied())
        .collect();
    let overlaps: Vec<&Provenance> = rows
        .iter()
        .map(|(_, p)| p)
        .filter(|p| train_identity.contains(p))
        .collect();
    if let Some(first) = overlaps.first() {
        return Err(DataError::TrainTestOverlap {
            count: overlaps.len(),
            first: first.to_string(),
        });
    }

    let mut out = Dataset::new();
    for (record, provenance) in rows {
        out.push(record, provenance);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn defaults() -> (PlantParams, Thresholds, RegisterMap) {
        (
            PlantParams::default(),
            Thresholds::default(),
            RegisterMap::default(),
        )
    }

    fn run_normal(samples: u64, seed: u64) -> Dataset {
        let (params, thresholds, registers) = defaults();
        collect(
            &ScenarioConfig::normal(samples, seed),
            &params,
            &thresholds,
            &registers,
        )
        .unwrap()
    }

    fn run_attacked(samples: u64, intensity: f64, seed: u64) -> Dataset {
        let (params, thresholds, registers) = defaults();
        let attack = AttackConfig::level_only(intensity, &registers);
        collect(
            &ScenarioConfig::attacked(samples, attack, seed),
            &params,
            &thresholds,
            &registers,
        )
        .unwrap()
    }

    #[test]
    fn normal_scenario_yields_requested_label_zero_samples() {
        let dataset = run_normal(1000, 1);
        assert_eq!(dataset.len(), 1000);
        assert_eq!(dataset.class_counts(), (1000, 0));
        assert!(dataset
            .provenance()
            .iter()
            .enumerate()
            .all(|(i, p)| p.scenario == ScenarioTag::Normal && p.index == i as u32));
    }

    #[test]
    fn attacked_scenario_yields_label_one_samples() {
        let dataset = run_attacked(600, 0.20, 2);
        assert_eq!(dataset.len(), 600);
        assert_eq!(dataset.class_counts(), (0, 600));
    }

    #[test]
    fn zero_intensity_attack_matches_normal_run_numerically() {
        let normal = run_normal(300, 9);
        let silent = run_attacked(300, 0.0, 9);
        assert_eq!(normal.len(), silent.len());
        for ((a, _), (b, _)) in normal.iter().zip(silent.iter()) {
            assert_eq!(a.level, b.level);
            assert_eq!(a.inflow, b.inflow);
            assert_eq!(a.outflow, b.outflow);
            assert_eq!(a.pump, b.pump);
            assert_eq!(a.valve, b.valve);
        }
        // labels still reflect that the attack session was live
        assert_eq!(silent.class_counts(), (0, 300));
    }

    #[test]
    fn collection_is_deterministic() {
        assert_eq!(run_attacked(200, 0.10, 7), run_attacked(200, 0.10, 7));
    }

    #[test]
    fn normal_readings_track_physics() {
        let dataset = run_normal(500, 3);
        let registers = RegisterMap::default();
        let level_step = 1.0 / f64::from(registers.fixed_point_scale);
        let flow_step = 1.0 / f64::from(registers.flow_scale);
        let params = PlantParams::default();
        for (record, _) in dataset.iter() {
            let expected_inflow = if record.pump { params.pump_max_flow } else { 0.0 };
            assert!((record.inflow - expected_inflow).abs() <= 0.5 * flow_step);
            if record.valve {
                let expected = params.outlet_section
                    * (2.0 * params.gravity * record.level).sqrt();
                // level and outflow are quantized independently
                assert!((record.outflow - expected).abs() <= flow_step + level_step);
            } else {
                assert_eq!(record.outflow, 0.0);
            }
        }
    }

    #[test]
    fn attack_window_drops_out_of_window_records() {
        let (params, thresholds, registers) = defaults();
        let mut attack = AttackConfig::level_only(0.2, &registers);
        attack.active_window = (50, 150);
        let dataset = collect(
            &ScenarioConfig::attacked(300, attack, 5),
            &params,
            &thresholds,
            &registers,
        )
        .unwrap();
        assert_eq!(dataset.len(), 100);
        assert_eq!(dataset.class_counts(), (0, 100));
    }

    #[test]
    fn unattacked_alarm_is_an_error() {
        let (params, _, registers) = defaults();
        // HH barely above H: the fill overshoot trips the alarm
        let thresholds = Thresholds {
            hh: 0.8005,
            ..Thresholds::default()
        };
        let err = collect(
            &ScenarioConfig::normal(100, 1),
            &params,
            &thresholds,
            &registers,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            DataError::SafetyAlarm {
                status: SafetyStatus::OverflowAlarm,
                ..
            }
        ));
    }

    #[test]
    fn training_set_is_balanced_and_shuffled() {
        let normal = run_normal(600, 11);
        let attacked = run_attacked(600, 0.10, 12);
        let mut rng = seeds::stream(0, "trainset");
        let set = build_training_set(&normal, &attacked, 500, &mut rng).unwrap();
        assert_eq!(set.len(), 1000);
        assert_eq!(set.class_counts(), (500, 500));
        // shuffled: both classes appear in the first fifty records
        let head_labels: BTreeSet<u8> = set.records()[..50].iter().map(|r| r.label.as_u8()).collect();
        assert_eq!(head_labels.len(), 2);
        // deterministic under the same stream
        let mut rng2 = seeds::stream(0, "trainset");
        assert_eq!(build_training_set(&normal, &attacked, 500, &mut rng2).unwrap(), set);
    }

    #[test]
    fn training_set_insufficient_records_error() {
        let normal = run_normal(100, 13);
        let attacked = run_attacked(100, 0.10, 14);
        let mut rng = seeds::stream(0, "trainset");
        let err = build_training_set(&normal, &attacked, 500, &mut rng).unwrap_err();
        assert!(matches!(err, DataError::Insufficient { needed: 500, got: 100, .. }));
    }

    fn intensity_map(pairs: &[(f64, &Dataset)]) -> BTreeMap<Intensity, Dataset> {
        pairs
            .iter()
            .map(|(f, d)| (Intensity::from_fraction(*f).unwrap(), (*d).clone()))
            .collect()
    }

    #[test]
    fn test_set_composition_and_histogram() {
        let normal = run_normal(1000, 21);
        let (train_normal, held_normal) = normal.split_at(500);
        let intensities: Vec<f64> = vec![0.01, 0.05, 0.10, 0.15, 0.20];
        let attacked: Vec<Dataset> = intensities
            .iter()
            .enumerate()
            .map(|(i, eps)| run_attacked(100, *eps, 30 + i as u64))
            .collect();
        let refs: Vec<(f64, &Dataset)> = intensities
            .iter()
            .copied()
            .zip(attacked.iter())
            .collect();
        let keys: Vec<Intensity> = intensities
            .iter()
            .map(|f| Intensity::from_fraction(*f).unwrap())
            .collect();
        let set = build_test_set(
            &held_normal,
            &intensity_map(&refs),
            &keys,
            500,
            100,
            &[&train_normal],
        )
        .unwrap();
        assert_eq!(set.len(), 1000);
        assert_eq!(set.class_counts(), (500, 500));
        let histogram = set.scenario_counts();
        assert_eq!(histogram["normal"], 500);
        for eps in ["0.01", "0.05", "0.1", "0.15", "0.2"] {
            assert_eq!(histogram[&format!("fdi:{eps}")], 100);
        }
    }

    #[test]
    fn test_set_missing_intensity_error() {
        let normal = run_normal(500, 22);
        let attacked = run_attacked(100, 0.01, 23);
        let refs = [(0.01, &attacked)];
        let keys = [
            Intensity::from_fraction(0.01).unwrap(),
            Intensity::from_fraction(0.05).unwrap(),
        ];
        let err = build_test_set(&normal, &intensity_map(&refs), &keys, 500, 100, &[]).unwrap_err();
        assert!(matches!(err, DataError::MissingIntensity(i) if i == keys[1]));
    }

    #[test]
    fn test_set_overlap_with_training_detected() {
        let normal = run_normal(600, 24);
        let attacked = run_attacked(100, 0.10, 25);
        let refs = [(0.10, &attacked)];
        let keys = [Intensity::from_fraction(0.10).unwrap()];
        // training set reuses the same normal records -> overlap
        let mut rng = seeds::stream(0, "overlap");
        let training = build_training_set(&normal, &attacked, 100, &mut rng).unwrap();
        let err = build_test_set(
            &normal,
            &intensity_map(&refs),
            &keys,
            500,
            100,
            &[&training],
        )
        .unwrap_err();
        assert!(matches!(err, DataError::TrainTestOverlap { .. }));
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let dataset = run_attacked(50, 0.15, 31);
        let mut bytes = Vec::new();
        dataset.write_csv(&mut bytes).unwrap();
        let reloaded =
            Dataset::read_csv(std::io::BufReader::new(bytes.as_slice()), "mem").unwrap();
        assert_eq!(reloaded, dataset);
    }

    #[test]
    fn csv_empty_dataset_is_header_only() {
        let mut bytes = Vec::new();
        Dataset::new().write_csv(&mut bytes).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "level,inflow,outflow,pump,valve,label,provenance\n"
        );
    }

    #[test]
    fn csv_bad_label_names_line() {
        let text = "level,inflow,outflow,pump,valve,label,provenance\n\
                    5.0e-1,0.0e0,0.0e0,1,0,2,normal:0\n";
        let err =
            Dataset::read_csv(std::io::BufReader::new(text.as_bytes()), "bad.csv").unwrap_err();
        match err {
            DataError::Parse { path, line, detail } => {
                assert_eq!(path, "bad.csv");
                assert_eq!(line, 2);
                assert!(detail.contains("label"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn csv_bytes_reproducible() {
        let a = run_normal(100, 41);
        let b = run_normal(100, 41);
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        a.write_csv(&mut bytes_a).unwrap();
        b.write_csv(&mut bytes_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn intensity_formatting() {
        let i = Intensity::from_fraction(0.10).unwrap();
        assert_eq!(i.to_string(), "0.1");
        assert_eq!(i.percent_label(), "10");
        assert_eq!(Intensity::from_fraction(0.125).unwrap().percent_label(), "12.5");
        assert!(Intensity::from_fraction(1.5).is_none());
    }

    #[test]
    fn provenance_parse_round_trip() {
        let p = Provenance {
            scenario: ScenarioTag::Attack(Intensity::from_fraction(0.05).unwrap()),
            index: 42,
        };
        assert_eq!(Provenance::parse(&p.to_string()), Some(p));
        let n = Provenance {
            scenario: ScenarioTag::Normal,
            index: 7,
        };
        assert_eq!(Provenance::parse(&n.to_string()), Some(n));
        assert_eq!(Provenance::parse("garbage"), None);
    }
}
