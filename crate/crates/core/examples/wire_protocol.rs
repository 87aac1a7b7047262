//! The parameter-server framing, byte by byte.

use streamlda::dsgs::WireMessage;
use streamlda::stats::SparseEntry;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let messages = [
        WireMessage::Fetch,
        WireMessage::Push {
            entries: vec![SparseEntry::new(1, 2, 3.0)],
        },
        WireMessage::Snapshot {
            topics: 2,
            vocab: 3,
            lambda: 0.7,
            entries: vec![SparseEntry::new(1, 2, 2.1)],
        },
        WireMessage::Ack { applied: true },
    ];
    for msg in messages {
        let frame = msg.encode();
        println!("{msg:?}\n  {} bytes: {}", frame.len(), hex(&frame));
        assert_eq!(WireMessage::decode(&frame).unwrap(), msg);
    }
    println!("{:?}", WireMessage::decode(&[1, 0, 0, 0, 9]).unwrap_err());
}
