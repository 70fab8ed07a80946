//! Properties of transaction parsing, windowing and aggregation.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use proptest::prelude::*;

use paynet::graph::io::{read_graph, write_edges, write_nodes};
use paynet::ingest::{build_network, parse_amount, parse_transactions, Granularity, TimeWindow, TransactionRecord};

fn granularity() -> impl Strategy<Value = Granularity> {
    prop_oneof![Just(Granularity::Daily), Just(Granularity::Weekly), Just(Granularity::Monthly)]
}

fn records() -> impl Strategy<Value = Vec<TransactionRecord>> {
    let base = NaiveDate::from_ymd_opt(2013, 11, 20).unwrap();
    proptest::collection::vec((0u8..8, 0u8..8, 0i64..500, 0u64..100_000, 1u32..4), 1..80).prop_map(move |rows| {
        rows.into_iter()
            .map(|(a, b, day, cents, count)| TransactionRecord {
                payer: format!("f{a}"),
                payee: format!("f{b}"),
                date: base + Duration::days(day),
                amount: cents as f64 / 100.0,
                count,
                kind: "wire".into(),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn amounts_round_trip_through_text(cents in 0u64..10_000_000_000) {
        let text = format!("{}.{:02}", cents / 100, cents % 100);
        prop_assert_eq!(parse_amount(&text).unwrap(), cents as f64 / 100.0);
        let (longer, negative) = (format!("{text}1"), format!("-{text}"));
        prop_assert!(parse_amount(&longer).is_err());
        prop_assert!(parse_amount(&negative).is_err());
    }

    #[test]
    fn windows_tile_the_span(recs in records(), g in granularity()) {
        let windows = TimeWindow::spanning(&recs, g);
        prop_assert!(windows.windows(2).all(|w| w[1] == w[0].next()));
        for r in &recs {
            prop_assert_eq!(windows.iter().filter(|w| w.contains(r.date)).count(), 1);
        }
        // a window starts on its own first day
        for w in &windows {
            prop_assert!(w.contains(w.start()));
            prop_assert!(!w.contains(w.start() - Duration::days(1)));
        }
    }

    #[test]
    fn aggregation_conserves_volume(recs in records(), g in granularity()) {
        for w in TimeWindow::spanning(&recs, g) {
            let inside: Vec<&TransactionRecord> = recs.iter().filter(|r| w.contains(r.date)).collect();
            let (graph, diag) = build_network(&recs, &[], w).unwrap();
            prop_assert_eq!(diag.records_in_window, inside.len() as u64);
            let loops: Vec<_> = inside.iter().filter(|r| r.payer == r.payee).collect();
            prop_assert_eq!(diag.self_loops_dropped, loops.len() as u64);

            let mut pairs: BTreeMap<(&str, &str), f64> = BTreeMap::new();
            for r in inside.iter().filter(|r| r.payer != r.payee) {
                *pairs.entry((&r.payer, &r.payee)).or_default() += r.amount;
            }
            pairs.retain(|_, v| *v > 0.0);
            prop_assert_eq!(graph.m(), pairs.len());
            let ids: BTreeSet<&str> = pairs.keys().flat_map(|&(a, b)| [a, b]).collect();
            prop_assert_eq!(graph.n(), ids.len());
            for ((a, b), v) in &pairs {
                let (u, x) = (graph.index_of(a).unwrap(), graph.index_of(b).unwrap());
                prop_assert!((graph.weight(u, x).unwrap() - v).abs() <= 1e-9 * v);
            }
            prop_assert_eq!(diag.firms_without_metadata, ids.len() as u64);
        }
    }

    #[test]
    fn graph_files_round_trip(recs in records()) {
        let w = TimeWindow::containing(recs[0].date, Granularity::Monthly);
        let (g, _) = build_network(&recs, &[], w).unwrap();
        let (mut e, mut n) = (Vec::new(), Vec::new());
        write_edges(&g, &mut e).unwrap();
        write_nodes(&g, &mut n).unwrap();
        prop_assert_eq!(read_graph(&e[..], &n[..]).unwrap(), g);
    }

    #[test]
    fn parsed_rows_match_written_rows(recs in records()) {
        let mut text = String::from("kind,payer,payee,date,amount,count\n");
        for r in &recs {
            text.push_str(&format!("{},{},{},{},{:.2},{}\n", r.kind, r.payer, r.payee, r.date, r.amount, r.count));
        }
        text.push_str("wire,f1,f2,2014-02-30,1.00,1\n");
        let parsed = parse_transactions(text.as_bytes()).unwrap();
        prop_assert_eq!(&parsed.records, &recs);
        prop_assert_eq!(parsed.rejected.len(), 1);
        prop_assert_eq!(parsed.rejected[0].line, recs.len() as u64 + 2);
    }
}
