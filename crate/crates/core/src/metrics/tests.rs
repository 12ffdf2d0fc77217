use super::*;
use proptest::prelude::*;
use Direction::{Downstream as D, Upstream as U};

fn seq(domain: &str, packets: &[(Direction, u32)]) -> PacketSequence {
    let domain = match domain.parse() {
        Ok(ip) => DomainLabel::ip(ip),
        Err(_) => DomainLabel::sni(domain).unwrap(),
    };
    PacketSequence {
        event_id: 1,
        sample_id: 1,
        stream_id: 0,
        start_position: 1,
        domain,
        packets: packets.iter().map(|&(direction, size)| SeqPacket { direction, size }).collect(),
    }
}

#[test]
fn sdbf_examples() {
    let a = seq("x.example.com", &[(U, 100), (D, 200), (U, 300)]);
    let b = seq("y.example.com", &[(U, 110), (D, 200), (U, 295)]);
    let c = seq("x.example.com", &[(U, 100), (U, 200), (U, 300)]);
    assert_eq!(sdbf_distance(&a, &a).unwrap(), Distance::ZERO);
    assert_eq!(sdbf_distance(&a, &b).unwrap(), Distance::Finite(15.0));
    assert_eq!(sdbf_distance(&a, &c).unwrap(), Distance::Maximal);
    assert!(sdbf_distance(&a, &seq("x.example.com", &[(U, 1)])).is_err());
}

#[test]
fn slack_threshold() {
    let a = seq("x.example.com", &[(U, 100), (D, 200)]);
    let b = seq("x.example.com", &[(U, 104), (D, 199)]);
    assert_eq!(sdbf_distance_h(&a, &b, 5).unwrap(), Distance::ZERO);
    assert_eq!(sdbf_distance_h(&a, &b, 4).unwrap(), Distance::Finite(5.0));
}

#[test]
fn esdbf_examples() {
    let p = [(U, 100), (D, 200)];
    let x = seq("x.example.com", &p);
    assert_eq!(esdbf_distance(&x, &x).unwrap(), Distance::ZERO);
    assert_eq!(esdbf_distance(&x, &seq("y.example.com", &p)).unwrap(), Distance::Maximal);
    assert_eq!(esdbf_distance(&x, &seq("203.0.113.7", &p)).unwrap(), Distance::Maximal);
}

#[test]
fn endpoint_examples() {
    let x = seq("x.example.com", &[(U, 1)]);
    let y = seq("y.example.com", &[(D, 9)]);
    let ip = seq("203.0.113.7", &[(U, 1)]);
    assert_eq!(endpoint_distance(&x, &y, Granularity::Esld), Distance::ZERO);
    assert_eq!(endpoint_distance(&x, &y, Granularity::FqdnOrIp), Distance::Maximal);
    assert_eq!(endpoint_distance(&ip, &ip, Granularity::FqdnOrIp), Distance::ZERO);
    assert_eq!(endpoint_distance(&ip, &ip, Granularity::Fqdn), Distance::Maximal);
    assert_eq!(endpoint_distance(&ip, &ip, Granularity::Esld), Distance::Maximal);
}

#[test]
fn maximal_exceeds_everything() {
    assert!(Distance::Maximal > Distance::Finite(f64::MAX));
    assert!(Distance::Finite(1.0) < Distance::Finite(2.0));
    assert!(!Distance::Maximal.within(f64::INFINITY));
}

#[test]
fn technique_names() {
    for s in ["sdbf", "esdbf", "ebf", "fqdnbf", "esldbf", "custom:jaccard"] {
        assert_eq!(s.parse::<TechniqueKind>().unwrap().to_string(), s);
    }
    assert!("pls".parse::<TechniqueKind>().is_err());
    assert!("custom:".parse::<TechniqueKind>().is_err());
}

#[test]
fn public_suffix_host_keeps_identity_under_esld() {
    let a = seq("co.uk", &[(U, 1)]);
    let b = seq("example.co.uk", &[(U, 1)]);
    assert_eq!(endpoint_distance(&a, &a, Granularity::Esld), Distance::ZERO);
    assert_eq!(endpoint_distance(&a, &b, Granularity::Esld), Distance::Maximal);
}

struct Scaled;

impl CustomMetric for Scaled {
    fn distance(&self, p1: &PacketSequence, p2: &PacketSequence, h: u32) -> Result<Distance, MetricError> {
        Ok(match sdbf_distance_h(p1, p2, h)? {
            Distance::Finite(d) => Distance::Finite(d * 2.0),
            m => m,
        })
    }
}

#[test]
fn custom_metric_by_name() {
    let mut reg = MetricRegistry::new();
    reg.register("scaled", Arc::new(Scaled));
    let t = Technique::new("custom:scaled".parse().unwrap());
    let m = Metric::resolve(t.clone(), &reg).unwrap();
    let a = seq("x.example.com", &[(U, 100)]);
    let b = seq("x.example.com", &[(U, 103)]);
    assert_eq!(m.distance(&a, &b).unwrap(), Distance::Finite(6.0));
    assert!(m.canonical_key(&a).is_none());
    assert!(matches!(Metric::builtin(t), Err(MetricError::UnknownCustom(_))));
}

fn arb_domain() -> impl Strategy<Value = DomainLabel> {
    prop_oneof![
        prop::sample::select(vec![
            "a.example.com",
            "b.example.com",
            "example.com",
            "x.example.co.uk",
            "y.example.co.uk",
            "co.uk",
            "tuner.pandora.com",
        ])
        .prop_map(|h| DomainLabel::sni(h).unwrap()),
        prop::sample::select(vec!["203.0.113.7", "198.51.100.2"])
            .prop_map(|ip| DomainLabel::ip(ip.parse().unwrap())),
    ]
}

fn arb_seq(n: usize) -> impl Strategy<Value = PacketSequence> {
    (arb_domain(), prop::collection::vec((any::<bool>(), 0u32..4), n)).prop_map(|(domain, ps)| PacketSequence {
        event_id: 1,
        sample_id: 1,
        stream_id: 0,
        start_position: 1,
        domain,
        packets: ps
            .into_iter()
            .map(|(up, s)| SeqPacket {
                direction: if up { U } else { D },
                size: 100 + s * 10,
            })
            .collect(),
    })
}

fn all_metrics() -> Vec<Metric> {
    [Technique::sdbf(), Technique::esdbf(), Technique::ebf(), Technique::fqdnbf(), Technique::esldbf()]
        .into_iter()
        .map(|t| Metric::builtin(t).unwrap())
        .collect()
}

fn triple() -> impl Strategy<Value = (PacketSequence, PacketSequence, PacketSequence)> {
    (1usize..4).prop_flat_map(|n| (arb_seq(n), arb_seq(n), arb_seq(n)))
}

proptest! {
    #[test]
    fn symmetric_and_reflexive((a, b, _) in triple()) {
        for m in all_metrics() {
            prop_assert_eq!(m.distance(&a, &b).unwrap(), m.distance(&b, &a).unwrap());
            if m.has_identity(&a) {
                prop_assert!(m.distance(&a, &a).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn zero_distance_is_an_equivalence((a, b, c) in triple()) {
        for m in all_metrics() {
            let z = |x: &PacketSequence, y: &PacketSequence| m.distance(x, y).unwrap().is_zero();
            if z(&a, &b) && z(&b, &c) {
                prop_assert!(z(&a, &c));
            }
            // Zero distance coincides with canonical-key equality.
            let (ka, kb) = (m.canonical_key(&a).unwrap(), m.canonical_key(&b).unwrap());
            let same = ka.is_some() && ka == kb;
            prop_assert_eq!(z(&a, &b), same);
        }
    }

    #[test]
    fn esdbf_refines_sdbf((a, b, _) in triple(), h in 0u32..30) {
        prop_assert!(esdbf_distance_h(&a, &b, h).unwrap() >= sdbf_distance_h(&a, &b, h).unwrap());
    }

    #[test]
    fn fqdn_identity_implies_esld_identity((a, b, _) in triple()) {
        if endpoint_distance(&a, &b, Granularity::Fqdn).is_zero() {
            prop_assert!(endpoint_distance(&a, &b, Granularity::Esld).is_zero());
            prop_assert!(endpoint_distance(&a, &b, Granularity::FqdnOrIp).is_zero());
        }
    }
}
