use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{euclidean_distance, ClusterConfig, DeviceId, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub usize);

pub type Clusters = BTreeMap<ClusterId, Vec<DeviceId>>;

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Partitions the devices at `level` into clusters.
///
/// Two devices are neighbours when they share a parent and lie strictly
/// closer than `cfg.cluster_distance`; clusters are the connected components
/// of that relation, so chains merge. Every device at the level lands in
/// exactly one cluster. Cluster ids follow the smallest member id and members
/// are listed in ascending id order.
pub fn form_clusters(topo: &Topology, level: u32, cfg: &ClusterConfig) -> Clusters {
    let members: Vec<&super::FogDevice> = topo.devices_at_level(level).collect();
    let mut sets = DisjointSet::new(members.len());
    for i in 0..members.len() {
        for j in (i + 1)..members.len() {
            let (a, b) = (members[i], members[j]);
            if a.parent == b.parent && euclidean_distance(a, b) < cfg.cluster_distance {
                sets.union(i, j);
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<DeviceId>> = BTreeMap::new();
    for (i, d) in members.iter().enumerate() {
        by_root.entry(sets.find(i)).or_default().push(d.id);
    }
    let mut groups: Vec<Vec<DeviceId>> = by_root.into_values().collect();
    for g in &mut groups {
        g.sort();
    }
    groups.sort_by_key(|g| g[0]);
    groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| (ClusterId(i), g))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::tests::spec;
    use crate::topology::DeviceSpec;

    fn at(name: &str, level: u32, parent: Option<DeviceId>, x: f64, y: f64) -> DeviceSpec {
        let mut s = spec(name, 1000.0, level, parent);
        s.x = x;
        s.y = y;
        s
    }

    fn groups(c: &Clusters) -> Vec<Vec<usize>> {
        c.values().map(|g| g.iter().map(|d| d.0).collect()).collect()
    }

    #[test]
    fn threshold_split() {
        let mut t = Topology::new();
        let cloud = t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
        let a = t.add_device(at("A", 1, Some(cloud), 0.0, 0.0)).unwrap();
        let b = t.add_device(at("B", 1, Some(cloud), 1.0, 0.0)).unwrap();
        let c = t.add_device(at("C", 1, Some(cloud), 10.0, 0.0)).unwrap();
        let cl = form_clusters(&t, 1, &ClusterConfig::default());
        assert_eq!(groups(&cl), vec![vec![a.0, b.0], vec![c.0]]);
    }

    #[test]
    fn chaining_merges() {
        let mut t = Topology::new();
        let cloud = t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
        // insert out of spatial order so a single pass without merging would split them
        let c = t.add_device(at("C", 1, Some(cloud), 3.0, 0.0)).unwrap();
        let a = t.add_device(at("A", 1, Some(cloud), 0.0, 0.0)).unwrap();
        let b = t.add_device(at("B", 1, Some(cloud), 1.5, 0.0)).unwrap();
        let cl = form_clusters(&t, 1, &ClusterConfig::default());
        assert_eq!(groups(&cl), vec![vec![c.0, a.0, b.0]]);
    }

    #[test]
    fn different_parents_stay_apart() {
        let mut t = Topology::new();
        let cloud = t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
        let g0 = t.add_device(at("g0", 1, Some(cloud), 0.0, 0.0)).unwrap();
        let g1 = t.add_device(at("g1", 1, Some(cloud), 50.0, 0.0)).unwrap();
        let a = t.add_device(at("A", 2, Some(g0), 0.0, 0.0)).unwrap();
        let b = t.add_device(at("B", 2, Some(g1), 0.5, 0.0)).unwrap();
        let cl = form_clusters(&t, 2, &ClusterConfig::default());
        assert_eq!(groups(&cl), vec![vec![a.0], vec![b.0]]);
    }

    #[test]
    fn exactly_at_threshold_is_not_neighbour() {
        let mut t = Topology::new();
        let cloud = t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
        t.add_device(at("A", 1, Some(cloud), 0.0, 0.0)).unwrap();
        t.add_device(at("B", 1, Some(cloud), 2.0, 0.0)).unwrap();
        assert_eq!(form_clusters(&t, 1, &ClusterConfig::default()).len(), 2);
    }

    #[test]
    fn empty_level() {
        let mut t = Topology::new();
        t.add_device(at("cloud", 0, None, 0.0, 0.0)).unwrap();
        assert!(form_clusters(&t, 3, &ClusterConfig::default()).is_empty());
    }
}
