//! Man-in-the-middle false data injection on the sensor channel: polls
//! pass untouched, responses get their level register scaled by ±20%,
//! and the channel log records every transmission.
//!
//! ```text
//! cargo run -p tankguard --example mitm_channel
//! ```

use tankguard::protocol::{decode, encode, Direction, ModbusFrame, Pdu, RegisterMap};
use tankguard::wire::{AttackConfig, Channel};

fn main() {
    let registers = RegisterMap::default();
    let mut channel = Channel::new(7);
    channel
        .start_attack(AttackConfig::level_only(0.20, &registers))
        .unwrap();

    println!("attack: 20% modification of the level register, random sign per frame\n");
    println!("step  true level  delivered level  modified");
    for step in 0..8u64 {
        let level_raw = 700 + 2 * step as u16; // tank slowly filling

        let poll = ModbusFrame {
            transaction_id: step as u16,
            unit_id: 1,
            pdu: Pdu::ReadHoldingRegistersRequest {
                start_address: registers.level_register,
                count: 1,
            },
        };
        channel.transmit(&encode(&poll).unwrap(), Direction::Request, step);

        let response = ModbusFrame {
            transaction_id: step as u16,
            unit_id: 1,
            pdu: Pdu::ReadHoldingRegistersResponse {
                values: vec![level_raw],
            },
        };
        let delivered = channel.transmit(&encode(&response).unwrap(), Direction::Response, step);
        let (frame, _) = decode(&delivered, Direction::Response).unwrap();
        let Pdu::ReadHoldingRegistersResponse { values } = frame.pdu else {
            unreachable!()
        };
        println!(
            "{step:>4}  {:>10.3}  {:>15.3}  {}",
            f64::from(level_raw) / 1000.0,
            f64::from(values[0]) / 1000.0,
            level_raw != values[0],
        );
    }

    channel.stop_attack();

    println!("\nchannel log as CSV:");
    let mut csv = Vec::new();
    channel.export_csv(&mut csv).unwrap();
    for line in String::from_utf8(csv).unwrap().lines().take(5) {
        println!("  {line}");
    }
    println!("  ... ({} entries total)", channel.log().len());
}
