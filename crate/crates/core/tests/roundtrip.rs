use proptest::prelude::*;

use plcprep_core::dataset::{
    parse_event_csv_reader, write_csv_rows, Columns, EventSeries, FeatureColumn,
};
use plcprep_core::synth::{generate, SynthConfig};

fn event_series() -> impl Strategy<Value = EventSeries> {
    (1usize..40, 1usize..6).prop_flat_map(|(n, c)| {
        (
            prop::collection::vec(1i64..5000, n),
            -1_000_000i64..1_000_000,
            prop::collection::vec(prop::collection::vec(-1e12f64..1e12, n), c),
        )
            .prop_map(|(gaps, t0, cols)| {
                let ts = gaps
                    .iter()
                    .scan(t0, |t, g| {
                        *t += g;
                        Some(*t)
                    })
                    .collect();
                let cols = cols
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| FeatureColumn::new(format!("f{i}"), v))
                    .collect();
                EventSeries::new("p", ts, cols).unwrap()
            })
    })
}

fn to_csv(s: &EventSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv_rows(&mut buf, s.timestamps(), s.columns()).unwrap();
    buf
}

proptest! {
    #[test]
    fn write_then_parse_is_lossless(s in event_series()) {
        let text = to_csv(&s);
        let back = parse_event_csv_reader(text.as_slice(), "p").unwrap();
        prop_assert_eq!(back.timestamps(), s.timestamps());
        prop_assert_eq!(back.columns(), s.columns());
        prop_assert_eq!(to_csv(&back), text);
    }
}

#[test]
fn synthetic_dataset_roundtrips() {
    let cfg = SynthConfig { duration_s: 600.0, seed: 9, ..SynthConfig::default() };
    let (s, _) = generate(&cfg).unwrap();
    let text = to_csv(&s);
    let back = parse_event_csv_reader(text.as_slice(), s.name()).unwrap();
    assert_eq!(back, s);
}
