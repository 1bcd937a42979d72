//! Encoding of four-person household contact networks.
//!
//! A household has four members in fixed roles: two children ordered by age
//! and two adults distinguished by sex. The six unordered pairs of members
//! are *dyads*; a contact network assigns contact / no-contact to each dyad,
//! giving 2^6 = 64 possible networks. An egocentric survey observes only the
//! three dyads incident to the respondent, so each report is consistent with
//! exactly 8 complete networks.

use std::fmt;
use std::sync::LazyLock;

use thiserror::Error;

/// Number of household roles.
pub const ROLE_COUNT: usize = 4;
/// Number of dyads in a four-person household.
pub const DYAD_COUNT: usize = 6;
/// Number of possible contact networks.
pub const NETWORK_COUNT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("network index {0} out of range 0..=63")]
    IndexOutOfRange(u8),
    #[error("observation for {role} must report exactly its 3 incident dyads: {detail}")]
    InvalidReports { role: Role, detail: String },
    #[error("unknown role token {0:?} (expected C1, C2, A1 or A2)")]
    UnknownRole(String),
}

/// Household position of a member (and hence of a respondent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Younger child.
    YoungerChild,
    /// Older child.
    OlderChild,
    /// Female adult.
    FemaleAdult,
    /// Male adult.
    MaleAdult,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::YoungerChild,
        Role::OlderChild,
        Role::FemaleAdult,
        Role::MaleAdult,
    ];

    pub fn index(self) -> usize {
        match self {
            Role::YoungerChild => 0,
            Role::OlderChild => 1,
            Role::FemaleAdult => 2,
            Role::MaleAdult => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Role> {
        Role::ALL.get(i).copied()
    }

    /// Short token used in observation files: C1, C2, A1, A2.
    pub fn token(self) -> &'static str {
        match self {
            Role::YoungerChild => "C1",
            Role::OlderChild => "C2",
            Role::FemaleAdult => "A1",
            Role::MaleAdult => "A2",
        }
    }

    pub fn parse_token(s: &str) -> Result<Role, NetworkError> {
        match s.trim() {
            "C1" => Ok(Role::YoungerChild),
            "C2" => Ok(Role::OlderChild),
            "A1" => Ok(Role::FemaleAdult),
            "A2" => Ok(Role::MaleAdult),
            other => Err(NetworkError::UnknownRole(other.to_string())),
        }
    }

    /// The three dyads this role participates in.
    pub fn incident_dyads(self) -> [Dyad; 3] {
        match self {
            Role::YoungerChild => [Dyad::C1C2, Dyad::C1A1, Dyad::C1A2],
            Role::OlderChild => [Dyad::C1C2, Dyad::C2A1, Dyad::C2A2],
            Role::FemaleAdult => [Dyad::C1A1, Dyad::C2A1, Dyad::A1A2],
            Role::MaleAdult => [Dyad::C1A2, Dyad::C2A2, Dyad::A1A2],
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One of the six unordered member pairs, in fixed column order.
///
/// The order matches the reporting tables: child-child first, then each
/// child against the female ("m") and male ("d") adult, then adult-adult.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dyad {
    C1C2,
    C1A1,
    C1A2,
    C2A1,
    C2A2,
    A1A2,
}

impl Dyad {
    pub const ALL: [Dyad; 6] = [
        Dyad::C1C2,
        Dyad::C1A1,
        Dyad::C1A2,
        Dyad::C2A1,
        Dyad::C2A2,
        Dyad::A1A2,
    ];

    pub fn index(self) -> usize {
        match self {
            Dyad::C1C2 => 0,
            Dyad::C1A1 => 1,
            Dyad::C1A2 => 2,
            Dyad::C2A1 => 3,
            Dyad::C2A2 => 4,
            Dyad::A1A2 => 5,
        }
    }

    pub fn from_index(i: usize) -> Option<Dyad> {
        Dyad::ALL.get(i).copied()
    }

    /// Column label as printed in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Dyad::C1C2 => "c1-c2",
            Dyad::C1A1 => "c1-m",
            Dyad::C1A2 => "c1-d",
            Dyad::C2A1 => "c2-m",
            Dyad::C2A2 => "c2-d",
            Dyad::A1A2 => "m-d",
        }
    }

    pub fn endpoints(self) -> (Role, Role) {
        match self {
            Dyad::C1C2 => (Role::YoungerChild, Role::OlderChild),
            Dyad::C1A1 => (Role::YoungerChild, Role::FemaleAdult),
            Dyad::C1A2 => (Role::YoungerChild, Role::MaleAdult),
            Dyad::C2A1 => (Role::OlderChild, Role::FemaleAdult),
            Dyad::C2A2 => (Role::OlderChild, Role::MaleAdult),
            Dyad::A1A2 => (Role::FemaleAdult, Role::MaleAdult),
        }
    }

    /// The dyad joining two distinct roles.
    pub fn between(a: Role, b: Role) -> Option<Dyad> {
        Dyad::ALL.into_iter().find(|d| {
            let (x, y) = d.endpoints();
            (x == a && y == b) || (x == b && y == a)
        })
    }
}

impl fmt::Display for Dyad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A complete contact network as six contact indicators, indexed by [`Dyad`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadVector([bool; DYAD_COUNT]);

impl DyadVector {
    pub fn new(bits: [bool; DYAD_COUNT]) -> Self {
        DyadVector(bits)
    }

    pub fn bit(&self, d: Dyad) -> bool {
        self.0[d.index()]
    }

    pub fn bits(&self) -> &[bool; DYAD_COUNT] {
        &self.0
    }

    /// Number of contacts present.
    pub fn contact_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Integer code of this network; dyad 0 is the least-significant bit.
    pub fn to_index(&self) -> NetworkIndex {
        let mut k = 0u8;
        for (j, &b) in self.0.iter().enumerate() {
            if b {
                k |= 1 << j;
            }
        }
        NetworkIndex(k)
    }
}

impl fmt::Display for DyadVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// Integer code of a contact network, in `0..=63`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetworkIndex(u8);

impl NetworkIndex {
    /// The empty network (no contacts).
    pub const EMPTY: NetworkIndex = NetworkIndex(0);
    /// The complete network (all six contacts).
    pub const COMPLETE: NetworkIndex = NetworkIndex(63);

    pub fn new(k: u8) -> Result<Self, NetworkError> {
        if usize::from(k) < NETWORK_COUNT {
            Ok(NetworkIndex(k))
        } else {
            Err(NetworkError::IndexOutOfRange(k))
        }
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    pub fn bit(self, d: Dyad) -> bool {
        self.0 >> d.index() & 1 == 1
    }

    /// Binary expansion into per-dyad contact indicators.
    pub fn to_vector(self) -> DyadVector {
        let mut bits = [false; DYAD_COUNT];
        for (j, bit) in bits.iter_mut().enumerate() {
            *bit = self.0 >> j & 1 == 1;
        }
        DyadVector(bits)
    }

    pub fn all() -> impl Iterator<Item = NetworkIndex> {
        (0..NETWORK_COUNT as u8).map(NetworkIndex)
    }
}

impl fmt::Display for NetworkIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One respondent's report: their role plus contact indicators on the three
/// dyads they can observe.
///
/// Reports are keyed by dyad so masks stay explicit; the constructor rejects
/// anything but exactly the incident set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialObservation {
    respondent: Role,
    reports: [(Dyad, bool); 3],
}

impl PartialObservation {
    pub fn new(respondent: Role, reports: &[(Dyad, bool)]) -> Result<Self, NetworkError> {
        let incident = respondent.incident_dyads();
        if reports.len() != 3 {
            return Err(NetworkError::InvalidReports {
                role: respondent,
                detail: format!("got {} reports", reports.len()),
            });
        }
        let mut sorted: [(Dyad, bool); 3] = [(incident[0], false); 3];
        for (slot, &d) in sorted.iter_mut().zip(incident.iter()) {
            let mut found = reports.iter().filter(|(rd, _)| *rd == d);
            match (found.next(), found.next()) {
                (Some(&(_, v)), None) => *slot = (d, v),
                (None, _) => {
                    return Err(NetworkError::InvalidReports {
                        role: respondent,
                        detail: format!("missing report on {d}"),
                    })
                }
                (Some(_), Some(_)) => {
                    return Err(NetworkError::InvalidReports {
                        role: respondent,
                        detail: format!("duplicate report on {d}"),
                    })
                }
            }
        }
        // Any report on a non-incident dyad implies one of the above failures
        // already fired (count or coverage), so sorted now holds exactly the
        // incident set.
        Ok(PartialObservation {
            respondent,
            reports: sorted,
        })
    }

    /// What `respondent` would report if the household's true network is `net`.
    pub fn from_network(respondent: Role, net: NetworkIndex) -> Self {
        let incident = respondent.incident_dyads();
        let reports = [
            (incident[0], net.bit(incident[0])),
            (incident[1], net.bit(incident[1])),
            (incident[2], net.bit(incident[2])),
        ];
        PartialObservation {
            respondent,
            reports,
        }
    }

    pub fn respondent(&self) -> Role {
        self.respondent
    }

    /// The three reports, in dyad-index order.
    pub fn reports(&self) -> &[(Dyad, bool); 3] {
        &self.reports
    }

    pub fn report_on(&self, d: Dyad) -> Option<bool> {
        self.reports.iter().find(|(rd, _)| *rd == d).map(|&(_, v)| v)
    }

    /// True iff network `k` agrees with every reported dyad.
    pub fn is_consistent(&self, k: NetworkIndex) -> bool {
        self.reports.iter().all(|&(d, v)| k.bit(d) == v)
    }

    /// Bitset over `0..64` with bit `k` set iff network `k` is consistent.
    pub fn consistency_mask(&self) -> u64 {
        let mut mask = 0u64;
        let mut required = 0u8;
        let mut values = 0u8;
        for &(d, v) in &self.reports {
            required |= 1 << d.index();
            if v {
                values |= 1 << d.index();
            }
        }
        for k in 0..NETWORK_COUNT as u8 {
            if k & required == values {
                mask |= 1 << k;
            }
        }
        mask
    }

    /// The 8 network indices consistent with this report, ascending.
    pub fn consistent_indices(&self) -> [NetworkIndex; 8] {
        let mut out = [NetworkIndex::EMPTY; 8];
        let mut n = 0;
        for k in NetworkIndex::all() {
            if self.is_consistent(k) {
                out[n] = k;
                n += 1;
            }
        }
        debug_assert_eq!(n, 8);
        out
    }
}

/// Number of distinct (respondent role, report pattern) configurations.
pub fn distinct_configurations() -> usize {
    ROLE_COUNT * (1 << 3)
}

/// All 32 distinct observation configurations, role-major then pattern order.
pub fn enumerate_configurations() -> Vec<PartialObservation> {
    let mut out = Vec::with_capacity(distinct_configurations());
    for role in Role::ALL {
        let incident = role.incident_dyads();
        for pattern in 0u8..8 {
            let reports = [
                (incident[0], pattern & 1 == 1),
                (incident[1], pattern >> 1 & 1 == 1),
                (incident[2], pattern >> 2 & 1 == 1),
            ];
            out.push(PartialObservation::new(role, &reports).expect("incident reports"));
        }
    }
    out
}

// Action of the exchangeability group on dyads. Entry j is the image of
// dyad j after relabeling.
const CHILD_SWAP: [usize; DYAD_COUNT] = [0, 3, 4, 1, 2, 5];
const ADULT_SWAP: [usize; DYAD_COUNT] = [0, 2, 1, 4, 3, 5];

fn permute_network(k: u8, perm: &[usize; DYAD_COUNT]) -> u8 {
    let mut out = 0u8;
    for (j, &image) in perm.iter().enumerate() {
        if k >> j & 1 == 1 {
            out |= 1 << image;
        }
    }
    out
}

static ORBITS: LazyLock<Vec<Vec<NetworkIndex>>> = LazyLock::new(|| {
    let mut seen = [false; NETWORK_COUNT];
    let mut orbits = Vec::new();
    for k in 0..NETWORK_COUNT as u8 {
        if seen[k as usize] {
            continue;
        }
        let c = permute_network(k, &CHILD_SWAP);
        let a = permute_network(k, &ADULT_SWAP);
        let ca = permute_network(c, &ADULT_SWAP);
        let mut orbit = vec![k, c, a, ca];
        orbit.sort_unstable();
        orbit.dedup();
        for &m in &orbit {
            seen[m as usize] = true;
        }
        orbits.push(orbit.into_iter().map(NetworkIndex).collect());
    }
    orbits
});

/// Partition of the 64 networks into orbits under swapping the two children
/// and/or the two adults. There are 28 orbits.
pub fn exchangeability_orbits() -> &'static [Vec<NetworkIndex>] {
    &ORBITS
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn index_to_vector_cases() {
        assert_eq!(
            NetworkIndex::new(0).unwrap().to_vector().bits(),
            &[false; 6]
        );
        assert_eq!(
            NetworkIndex::new(63).unwrap().to_vector().bits(),
            &[true; 6]
        );
        // 5 = 2^0 + 2^2
        assert_eq!(
            NetworkIndex::new(5).unwrap().to_vector().bits(),
            &[true, false, true, false, false, false]
        );
    }

    #[test]
    fn vector_to_index_cases() {
        assert_eq!(DyadVector::new([true; 6]).to_index().value(), 63);
        assert_eq!(
            DyadVector::new([false, false, false, false, false, true])
                .to_index()
                .value(),
            32
        );
    }

    #[test]
    fn index_vector_round_trip_exhaustive() {
        for k in NetworkIndex::all() {
            assert_eq!(k.to_vector().to_index(), k);
        }
    }

    #[test]
    fn index_out_of_range_rejected() {
        assert_eq!(
            NetworkIndex::new(64),
            Err(NetworkError::IndexOutOfRange(64))
        );
    }

    #[test]
    fn incident_dyads_structure() {
        assert_eq!(
            Role::YoungerChild.incident_dyads(),
            [Dyad::C1C2, Dyad::C1A1, Dyad::C1A2]
        );
        assert_eq!(
            Role::MaleAdult.incident_dyads(),
            [Dyad::C1A2, Dyad::C2A2, Dyad::A1A2]
        );
        // Union over roles covers each dyad exactly twice.
        let mut cover = [0usize; DYAD_COUNT];
        for role in Role::ALL {
            for d in role.incident_dyads() {
                cover[d.index()] += 1;
            }
        }
        assert_eq!(cover, [2; DYAD_COUNT]);
    }

    #[test]
    fn dyad_endpoints_match_incidence() {
        for d in Dyad::ALL {
            let (a, b) = d.endpoints();
            assert!(a.incident_dyads().contains(&d));
            assert!(b.incident_dyads().contains(&d));
            assert_eq!(Dyad::between(a, b), Some(d));
            assert_eq!(Dyad::between(b, a), Some(d));
        }
        assert_eq!(Dyad::between(Role::YoungerChild, Role::YoungerChild), None);
    }

    #[test]
    fn consistency_basic_cases() {
        for role in Role::ALL {
            let all_ones = PartialObservation::from_network(role, NetworkIndex::COMPLETE);
            assert!(all_ones.is_consistent(NetworkIndex::COMPLETE));
            // The empty network disagrees with any reported contact.
            assert!(!all_ones.is_consistent(NetworkIndex::EMPTY));
        }
    }

    #[test]
    fn consistency_set_for_child_all_ones() {
        let obs = PartialObservation::from_network(Role::YoungerChild, NetworkIndex::COMPLETE);
        let set: Vec<u8> = NetworkIndex::all()
            .filter(|&k| obs.is_consistent(k))
            .map(|k| k.value())
            .collect();
        assert_eq!(set.len(), 8);
        assert!(set.contains(&7));
        assert!(set.contains(&63));
        // Bits 0..2 fixed to 1, bits 3..5 free.
        assert_eq!(set, vec![7, 15, 23, 31, 39, 47, 55, 63]);
    }

    #[test]
    fn every_configuration_has_eight_consistent_networks() {
        let configs = enumerate_configurations();
        assert_eq!(configs.len(), distinct_configurations());
        assert_eq!(configs.len(), 32);
        let unique: HashSet<_> = configs.iter().cloned().collect();
        assert_eq!(unique.len(), 32);
        for obs in &configs {
            assert_eq!(obs.consistency_mask().count_ones(), 8);
            assert_eq!(obs.consistent_indices().len(), 8);
        }
    }

    #[test]
    fn observation_constructor_rejects_bad_reports() {
        let err = PartialObservation::new(
            Role::YoungerChild,
            &[(Dyad::C1C2, true), (Dyad::C1A1, true), (Dyad::A1A2, true)],
        );
        assert!(err.is_err());
        let err = PartialObservation::new(Role::YoungerChild, &[(Dyad::C1C2, true)]);
        assert!(err.is_err());
        let err = PartialObservation::new(
            Role::YoungerChild,
            &[(Dyad::C1C2, true), (Dyad::C1C2, false), (Dyad::C1A1, true)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn orbit_count_and_partition() {
        let orbits = exchangeability_orbits();
        assert_eq!(orbits.len(), 28);
        let total: usize = orbits.iter().map(|o| o.len()).sum();
        assert_eq!(total, NETWORK_COUNT);
        let mut seen = HashSet::new();
        for orbit in orbits {
            for &k in orbit {
                assert!(seen.insert(k), "orbit cells must be disjoint");
            }
        }
        assert_eq!(seen.len(), NETWORK_COUNT);
    }

    #[test]
    fn empty_and_complete_networks_are_singleton_orbits() {
        let orbits = exchangeability_orbits();
        for target in [NetworkIndex::EMPTY, NetworkIndex::COMPLETE] {
            let orbit = orbits.iter().find(|o| o.contains(&target)).unwrap();
            assert_eq!(orbit.len(), 1);
        }
    }

    /// Re-derive the group action from role relabelings (independent of the
    /// hardcoded dyad permutation tables) and check the orbits elementwise.
    #[test]
    fn orbits_match_brute_force_group_action() {
        fn relabel(role: Role, swap_children: bool, swap_adults: bool) -> Role {
            match role {
                Role::YoungerChild if swap_children => Role::OlderChild,
                Role::OlderChild if swap_children => Role::YoungerChild,
                Role::FemaleAdult if swap_adults => Role::MaleAdult,
                Role::MaleAdult if swap_adults => Role::FemaleAdult,
                r => r,
            }
        }
        let apply = |k: NetworkIndex, sc: bool, sa: bool| -> NetworkIndex {
            let mut bits = [false; DYAD_COUNT];
            for d in Dyad::ALL {
                let (a, b) = d.endpoints();
                let image = Dyad::between(relabel(a, sc, sa), relabel(b, sc, sa)).unwrap();
                bits[image.index()] = k.bit(d);
            }
            DyadVector::new(bits).to_index()
        };
        for k in NetworkIndex::all() {
            let mut expected: Vec<NetworkIndex> = vec![
                apply(k, false, false),
                apply(k, true, false),
                apply(k, false, true),
                apply(k, true, true),
            ];
            expected.sort_unstable();
            expected.dedup();
            let orbit = exchangeability_orbits()
                .iter()
                .find(|o| o.contains(&k))
                .unwrap();
            assert_eq!(orbit, &expected, "orbit of network {k}");
        }
    }

    #[test]
    fn from_network_round_trip() {
        for role in Role::ALL {
            for k in NetworkIndex::all() {
                let obs = PartialObservation::from_network(role, k);
                assert!(obs.is_consistent(k));
                for (d, v) in obs.reports() {
                    assert_eq!(*v, k.bit(*d));
                }
            }
        }
    }

    #[test]
    fn role_token_round_trip() {
        for role in Role::ALL {
            assert_eq!(Role::parse_token(role.token()), Ok(role));
        }
        assert!(Role::parse_token("X9").is_err());
    }
}
