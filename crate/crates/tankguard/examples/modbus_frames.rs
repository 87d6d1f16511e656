//! Modbus/TCP framing: encode the sensor poll and its response byte for
//! byte, round-trip them, and show how malformed traffic is rejected.
//!
//! ```text
//! cargo run -p tankguard --example modbus_frames
//! ```

use tankguard::protocol::{decode, encode, encode_level, Direction, ModbusFrame, Pdu, RegisterMap};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x} ")).collect::<String>().trim_end().to_string()
}

fn main() {
    let registers = RegisterMap::default();
    let (start, count) = registers.sensor_block();

    let poll = ModbusFrame {
        transaction_id: 1,
        unit_id: 1,
        pdu: Pdu::ReadHoldingRegistersRequest {
            start_address: start,
            count,
        },
    };
    let poll_bytes = encode(&poll).unwrap();
    println!("sensor poll   ({count} registers from {start}):");
    println!("  {}", hex(&poll_bytes));

    // level 0.73 m, inflow 0.05 m3/s, outflow 0 (valve closed)
    let values = vec![
        encode_level(0.73, registers.fixed_point_scale).unwrap(),
        encode_level(0.05, registers.flow_scale).unwrap(),
        encode_level(0.0, registers.flow_scale).unwrap(),
    ];
    let response = ModbusFrame {
        transaction_id: 1,
        unit_id: 1,
        pdu: Pdu::ReadHoldingRegistersResponse { values },
    };
    let response_bytes = encode(&response).unwrap();
    println!("sensor response (level 0.73 m, inflow 0.05, outflow 0.0):");
    println!("  {}", hex(&response_bytes));

    let (decoded, used) = decode(&response_bytes, Direction::Response).unwrap();
    assert_eq!(decoded, response);
    println!("round-trip ok, {used} bytes consumed");

    let command = ModbusFrame {
        transaction_id: 2,
        unit_id: 2,
        pdu: Pdu::WriteSingleRegisterRequest {
            address: registers.pump_coil_register,
            value: 1,
        },
    };
    println!("pump-on command:");
    println!("  {}", hex(&encode(&command).unwrap()));

    println!();
    println!("malformed traffic is rejected with a specific error:");
    let mut bad = poll_bytes.clone();
    bad[2] = 0xFF; // protocol id must be zero
    println!("  nonzero protocol id -> {}", decode(&bad, Direction::Request).unwrap_err());
    let mut unknown = poll_bytes.clone();
    unknown[7] = 0x2B;
    println!("  function 0x2B       -> {}", decode(&unknown, Direction::Request).unwrap_err());
    println!("  empty buffer        -> {}", decode(&[], Direction::Request).unwrap_err());
}
