use cpg_actor::actors::ActorKind;
use cpg_actor::checkpoint::{decode_f64s, encode_f64s, Checkpoint, SCHEMA_VERSION};
use cpg_actor::normalize::RunningNorm;
use cpg_actor::Error;
use proptest::prelude::*;

fn sample() -> Checkpoint {
    Checkpoint {
        schema_version: SCHEMA_VERSION,
        actor: ActorKind::CpgInEnv,
        steps: 114_688,
        update: 7,
        actor_params: vec![0.1, -0.0, f64::MIN_POSITIVE / 8.0, 1e300, -2.5e-12],
        log_std: vec![-1.0, -0.75],
        critic_params: vec![std::f64::consts::PI; 3],
        obs_norm: RunningNorm {
            count: 16384.0001,
            mean: vec![0.3; 8],
            var: vec![1.7; 8],
        },
    }
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn text_round_trip_is_bitwise() {
    let c = sample();
    let back = Checkpoint::from_text(&c.to_text()).unwrap();
    assert_eq!(bits(&back.actor_params), bits(&c.actor_params));
    assert_eq!(back, c);
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.ckpt");
    sample().save(&p).unwrap();
    assert_eq!(Checkpoint::load(&p).unwrap(), sample());
}

#[test]
fn newer_schema_is_refused() {
    let text = sample().to_text().replace(
        &format!("schema_version = {SCHEMA_VERSION}"),
        &format!("schema_version = {}", SCHEMA_VERSION + 1),
    );
    match Checkpoint::from_text(&text) {
        Err(Error::SchemaVersion { found, supported }) => {
            assert_eq!(found, SCHEMA_VERSION + 1);
            assert_eq!(supported, SCHEMA_VERSION);
        }
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn malformed_text_is_a_parse_error() {
    let good = sample().to_text();
    let truncated: String = good
        .lines()
        .filter(|l| !l.starts_with("log_std"))
        .collect::<Vec<_>>()
        .join("\n");
    assert!(matches!(Checkpoint::from_text(&truncated), Err(Error::Parse { .. })));
    let bad_hex = good.replace("log_std = 2:", "log_std = 3:");
    assert!(matches!(Checkpoint::from_text(&bad_hex), Err(Error::Parse { .. })));
    assert!(Checkpoint::from_text("schema_version 1").is_err());
}

proptest! {
    #[test]
    fn arrays_round_trip_bitwise(raw in prop::collection::vec(any::<u64>(), 0..64)) {
        let xs: Vec<f64> = raw.iter().map(|&b| f64::from_bits(b)).collect();
        let back = decode_f64s(&encode_f64s(&xs), 1).unwrap();
        prop_assert_eq!(bits(&back), raw);
    }
}
