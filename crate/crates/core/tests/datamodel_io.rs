mod common;

use common::{group, item};
use ltrkit::datamodel::{
    read_dataset, write_dataset, Channel, Dataset, EngagementOutcome, FeatureDef, Latent, Schema,
};
use proptest::prelude::*;

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    let channels = prop::collection::vec(0usize..3, 1..5);
    (channels, any::<bool>()).prop_flat_map(|(channels, latent)| {
        let d = channels.len();
        let groups = prop::collection::vec(
            prop::collection::vec(
                (
                    prop::collection::vec(-1e6f64..1e6, d),
                    0usize..4,
                    0.0f64..=1.0,
                    0.0f64..=1.0,
                ),
                2..6,
            ),
            1..5,
        );
        groups.prop_map(move |groups| {
            let schema = Schema::new(
                channels
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| {
                        FeatureDef::new(
                            format!("f{i}"),
                            [
                                Channel::SparseContent,
                                Channel::XeDense,
                                Channel::Engagement,
                            ][c],
                        )
                    })
                    .collect(),
            )
            .unwrap();
            let groups = groups
                .into_iter()
                .enumerate()
                .map(|(g, items)| {
                    let items = items
                        .into_iter()
                        .enumerate()
                        .map(|(i, (x, o, rho, pi))| {
                            item(
                                &format!("p{i}"),
                                x,
                                EngagementOutcome::ALL[o],
                                latent.then_some(Latent { rho, pi }),
                            )
                        })
                        .collect();
                    group(g, items)
                })
                .collect();
            Dataset::new(schema, groups).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(d in arb_dataset()) {
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &d);
        let mut again = Vec::new();
        write_dataset(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}

#[test]
fn malformed_rows_name_their_line() {
    let text = "group_id,query_id,segment,product_id,outcome,f0:sparse-content\ng0,q0,head,p0,clicked,0.5\ng0,q0,head,p1,clicked,abc\n";
    let err = read_dataset(text.as_bytes()).unwrap_err();
    assert_eq!(err.code(), "parse");
    assert!(err.to_string().contains('3'), "{err}");
    let nan = text.replace("abc", "NaN");
    assert_eq!(
        read_dataset(nan.as_bytes()).unwrap_err().code(),
        "schema_violation"
    );
}
