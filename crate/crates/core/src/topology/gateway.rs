use super::{ClusterConfig, DeviceId, FogDevice, Topology, TopologyError};

pub fn euclidean_distance(a: &FogDevice, b: &FogDevice) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Connects every orphan (non-root device without a parent) to the nearest
/// device one level closer to the cloud.
///
/// The search starts at `cfg.max_number`; ties go to the lower device id.
/// Returns the `(orphan, chosen parent)` pairs in ascending orphan id order.
pub fn select_gateways(
    topo: &mut Topology,
    cfg: &ClusterConfig,
) -> Result<Vec<(DeviceId, DeviceId)>, TopologyError> {
    let orphans: Vec<DeviceId> = topo
        .devices
        .iter()
        .filter(|d| d.parent.is_none() && d.level > 0)
        .map(|d| d.id)
        .collect();
    let mut chosen = Vec::with_capacity(orphans.len());
    for orphan in orphans {
        let device = &topo.devices[orphan.0];
        let mut best: Option<DeviceId> = None;
        let mut min_distance = cfg.max_number;
        for candidate in topo.devices.iter().filter(|c| c.level + 1 == device.level) {
            let distance = euclidean_distance(device, candidate);
            if distance < min_distance {
                min_distance = distance;
                best = Some(candidate.id);
            }
        }
        let parent = best.ok_or_else(|| TopologyError::NoCandidateParent(device.name.clone()))?;
        topo.devices[orphan.0].parent = Some(parent);
        chosen.push((orphan, parent));
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::tests::spec;

    fn at(name: &str, level: u32, parent: Option<DeviceId>, x: f64, y: f64) -> crate::topology::DeviceSpec {
        let mut s = spec(name, 1000.0, level, parent);
        s.x = x;
        s.y = y;
        s
    }

    #[test]
    fn distances() {
        let mut t = Topology::new();
        let a = t.add_device(at("a", 0, None, 0.0, 0.0)).unwrap();
        let b = t.add_device(at("b", 1, Some(a), 0.0, 0.0)).unwrap();
        let c = t.add_device(at("c", 1, Some(a), 3.0, 4.0)).unwrap();
        let d = t.add_device(at("d", 1, Some(a), 10.2, 15.7)).unwrap();
        let e = t.add_device(at("e", 1, Some(a), 11.0, 16.1)).unwrap();
        let dev = |id: DeviceId| t.device(id).unwrap();
        assert_eq!(euclidean_distance(dev(a), dev(b)), 0.0);
        assert_eq!(euclidean_distance(dev(a), dev(c)), 5.0);
        // sqrt(0.8^2 + 0.4^2) = sqrt(0.8)
        let expected = 0.8f64.sqrt();
        assert!((euclidean_distance(dev(d), dev(e)) - expected).abs() < 1e-12);
        assert!((expected - 0.894_427_191).abs() < 1e-9);
    }

    fn with_candidates(coords: &[(f64, f64)], orphan: (f64, f64)) -> (Topology, Vec<DeviceId>, DeviceId) {
        let mut t = Topology::new();
        let cloud = t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
        let gws: Vec<DeviceId> = coords
            .iter()
            .enumerate()
            .map(|(i, (x, y))| t.add_device(at(&format!("g{i}"), 1, Some(cloud), *x, *y)).unwrap())
            .collect();
        let o = t.add_device(at("orphan", 2, None, orphan.0, orphan.1)).unwrap();
        (t, gws, o)
    }

    #[test]
    fn nearest_candidate_wins() {
        let (mut t, gws, o) = with_candidates(&[(1.0, 0.0), (5.0, 5.0)], (0.0, 0.0));
        let chosen = select_gateways(&mut t, &ClusterConfig::default()).unwrap();
        assert_eq!(chosen, vec![(o, gws[0])]);
        assert_eq!(t.device(o).unwrap().parent, Some(gws[0]));
        assert!(t.validate().is_empty());
    }

    #[test]
    fn single_candidate_far_away() {
        let (mut t, gws, o) = with_candidates(&[(900.0, -300.0)], (0.0, 0.0));
        select_gateways(&mut t, &ClusterConfig::default()).unwrap();
        assert_eq!(t.device(o).unwrap().parent, Some(gws[0]));
    }

    #[test]
    fn equidistant_lower_id_wins() {
        let (mut t, gws, o) = with_candidates(&[(-2.0, 0.0), (2.0, 0.0), (0.0, 2.0)], (0.0, 0.0));
        select_gateways(&mut t, &ClusterConfig::default()).unwrap();
        assert_eq!(t.device(o).unwrap().parent, Some(gws[0]));
    }

    #[test]
    fn no_candidates_is_error() {
        let mut t = Topology::new();
        t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
        t.add_device(at("lonely", 2, None, 0.0, 0.0)).unwrap();
        assert_eq!(
            select_gateways(&mut t, &ClusterConfig::default()).unwrap_err(),
            TopologyError::NoCandidateParent("lonely".into())
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn chosen_parent_is_nearest(
                gws in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..12),
                orphans in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..12),
            ) {
                let mut t = Topology::new();
                let cloud = t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
                for (i, (x, y)) in gws.iter().enumerate() {
                    t.add_device(at(&format!("g{i}"), 1, Some(cloud), *x, *y)).unwrap();
                }
                for (i, (x, y)) in orphans.iter().enumerate() {
                    t.add_device(at(&format!("o{i}"), 2, None, *x, *y)).unwrap();
                }
                let chosen = select_gateways(&mut t, &ClusterConfig::default()).unwrap();
                prop_assert_eq!(chosen.len(), orphans.len());
                for (o, p) in chosen {
                    let od = t.device(o).unwrap();
                    let best = euclidean_distance(od, t.device(p).unwrap());
                    for c in t.devices_at_level(1) {
                        prop_assert!(best <= euclidean_distance(od, c));
                    }
                }
                prop_assert!(t.validate().is_empty());
            }
        }
    }
}
