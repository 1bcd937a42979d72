//! Ingestion of diary-format survey files.
//!
//! Respondents did not flag which contacts were household members, so
//! membership is inferred: a diary row counts as a household contact iff it
//! happened at home, at daily frequency, and its reported age matches an
//! unmatched roster member within the configured tolerance. Households are
//! filtered to size four of a requested age composition, roster slots are
//! mapped to the four roles, and each respondent's first reported diary day
//! becomes one partial observation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::network::{Dyad, PartialObservation, Role};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} is missing required column {column:?}")]
    MissingColumn { path: String, column: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    fn parse(s: &str) -> Result<Option<Sex>, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "na" => Ok(None),
            "f" | "female" => Ok(Some(Sex::Female)),
            "m" | "male" => Ok(Some(Sex::Male)),
            other => Err(format!("unknown sex {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactLocation {
    Home,
    Work,
    School,
    Leisure,
    Transport,
    Other,
}

impl ContactLocation {
    fn parse(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "home" => Ok(Self::Home),
            "work" => Ok(Self::Work),
            "school" => Ok(Self::School),
            "leisure" => Ok(Self::Leisure),
            "transport" => Ok(Self::Transport),
            "other" => Ok(Self::Other),
            other => Err(format!("unknown location {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactFrequency {
    Daily,
    Weekly,
    Monthly,
    Rarely,
    FirstTime,
}

impl ContactFrequency {
    fn parse(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "daily" => Ok(Self::Daily),
            "weekly" => Ok(Self::Weekly),
            "monthly" => Ok(Self::Monthly),
            "rarely" => Ok(Self::Rarely),
            "first_time" | "first-time" => Ok(Self::FirstTime),
            other => Err(format!("unknown frequency {other:?}")),
        }
    }
}

/// One diary row: a person the respondent contacted on a given day.
#[derive(Debug, Clone, PartialEq)]
pub struct DiaryRecord {
    pub respondent_id: String,
    pub day_index: u32,
    pub contact_age: Option<u32>,
    pub contact_sex: Option<Sex>,
    pub location: ContactLocation,
    pub frequency: ContactFrequency,
    pub physical: bool,
}

/// One household row: the respondent plus the ages of everyone at home.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRoster {
    pub respondent_id: String,
    pub respondent_age: u32,
    pub respondent_sex: Option<Sex>,
    pub member_ages: Vec<u32>,
    pub survey_date: String,
}

/// Age bands expected to exhibit distinct contact behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AgeCategory {
    Age0To5,
    Age6To11,
    Age12To18,
    Age19To35,
    Age36Plus,
}

impl AgeCategory {
    pub fn label(self) -> &'static str {
        match self {
            AgeCategory::Age0To5 => "0-5",
            AgeCategory::Age6To11 => "6-11",
            AgeCategory::Age12To18 => "12-18",
            AgeCategory::Age19To35 => "19-35",
            AgeCategory::Age36Plus => "36+",
        }
    }
}

impl fmt::Display for AgeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The band containing an age; bands are closed on both ends except the
/// open-ended last one.
pub fn age_category(age: u32) -> AgeCategory {
    match age {
        0..=5 => AgeCategory::Age0To5,
        6..=11 => AgeCategory::Age6To11,
        12..=18 => AgeCategory::Age12To18,
        19..=35 => AgeCategory::Age19To35,
        _ => AgeCategory::Age36Plus,
    }
}

/// Requirement on one member slot of a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotBand {
    Exact(AgeCategory),
    /// Either adult band (19-35 or 36+); used where the two adult groups
    /// are collapsed for sample size.
    Adult,
}

impl SlotBand {
    fn matches(self, age: u32) -> bool {
        match self {
            SlotBand::Exact(cat) => age_category(age) == cat,
            SlotBand::Adult => age >= 19,
        }
    }

    fn label(self) -> &'static str {
        match self {
            SlotBand::Exact(cat) => cat.label(),
            SlotBand::Adult => "19+",
        }
    }
}

/// The six analyzed four-person household compositions, each a pattern of
/// age bands over the members ordered youngest to oldest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionType {
    Type1,
    Type2,
    Type3,
    Type4,
    Type5,
    Type6,
}

impl CompositionType {
    pub const ALL: [CompositionType; 6] = [
        CompositionType::Type1,
        CompositionType::Type2,
        CompositionType::Type3,
        CompositionType::Type4,
        CompositionType::Type5,
        CompositionType::Type6,
    ];

    pub fn from_code(code: u8) -> Option<CompositionType> {
        CompositionType::ALL.get(code.checked_sub(1)? as usize).copied()
    }

    pub fn code(self) -> u8 {
        CompositionType::ALL
            .iter()
            .position(|c| *c == self)
            .expect("member of ALL") as u8
            + 1
    }

    fn pattern(self) -> [SlotBand; 4] {
        use AgeCategory::*;
        use SlotBand::*;
        match self {
            CompositionType::Type1 => [Exact(Age0To5), Exact(Age0To5), Adult, Adult],
            CompositionType::Type2 => [Exact(Age0To5), Exact(Age6To11), Adult, Adult],
            CompositionType::Type3 => [Exact(Age6To11), Exact(Age6To11), Adult, Adult],
            CompositionType::Type4 => [
                Exact(Age12To18),
                Exact(Age12To18),
                Exact(Age36Plus),
                Exact(Age36Plus),
            ],
            CompositionType::Type5 => [
                Exact(Age12To18),
                Exact(Age19To35),
                Exact(Age36Plus),
                Exact(Age36Plus),
            ],
            CompositionType::Type6 => [
                Exact(Age19To35),
                Exact(Age19To35),
                Exact(Age36Plus),
                Exact(Age36Plus),
            ],
        }
    }

    /// Whether four ages, sorted ascending, fit this composition.
    pub fn matches(self, sorted_ages: &[u32; 4]) -> bool {
        self.pattern()
            .iter()
            .zip(sorted_ages.iter())
            .all(|(band, &age)| band.matches(age))
    }

    pub fn describe(self) -> String {
        self.pattern()
            .iter()
            .map(|b| b.label())
            .collect::<Vec<_>>()
            .join("/")
    }
}

impl fmt::Display for CompositionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "type{}", self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionReason {
    ParseError,
    Duplicate,
    WrongSize,
    RosterInconsistent,
    WrongComposition,
}

impl ExclusionReason {
    pub fn code(self) -> &'static str {
        match self {
            ExclusionReason::ParseError => "parse",
            ExclusionReason::Duplicate => "duplicate",
            ExclusionReason::WrongSize => "size",
            ExclusionReason::RosterInconsistent => "roster",
            ExclusionReason::WrongComposition => "composition",
        }
    }
}

/// A household dropped during ingestion.
#[derive(Debug, Clone)]
pub struct Exclusion {
    pub respondent_id: String,
    pub reason: ExclusionReason,
    pub detail: String,
}

/// A household kept despite an ambiguity, with the convention applied.
#[derive(Debug, Clone)]
pub struct MatchWarning {
    pub respondent_id: String,
    pub detail: String,
}

/// Outcome bookkeeping: which households were dropped and why, plus
/// non-fatal warnings for households that were kept.
#[derive(Debug, Clone, Default)]
pub struct ExclusionReport {
    pub exclusions: Vec<Exclusion>,
    pub warnings: Vec<MatchWarning>,
}

/// Parsed survey inputs. Row-level parse failures are kept aside so they
/// can surface in the exclusion report without aborting ingestion.
#[derive(Debug, Default)]
pub struct Survey {
    pub households: Vec<HouseholdRoster>,
    pub contacts: Vec<DiaryRecord>,
    pub household_row_errors: Vec<Exclusion>,
    pub contact_row_errors: Vec<Exclusion>,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Maximum |reported age - roster age| for a household-contact match.
    pub age_tolerance: u32,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { age_tolerance: 0 }
    }
}

fn header_index(
    headers: &csv::StringRecord,
    path: &str,
    column: &'static str,
) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(column))
        .ok_or(IngestError::MissingColumn {
            path: path.to_string(),
            column,
        })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|source| match source.kind() {
            csv::ErrorKind::Io(_) => IngestError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(source.to_string()),
            },
            _ => IngestError::Csv {
                path: path.display().to_string(),
                source,
            },
        })
}

/// Read the contacts file
/// (`respondent_id,day_index,contact_age,contact_sex,location,frequency,physical`).
pub fn read_contacts(path: &Path) -> Result<(Vec<DiaryRecord>, Vec<Exclusion>), IngestError> {
    let mut reader = csv_reader(path)?;
    let path_str = path.display().to_string();
    let headers = reader
        .headers()
        .map_err(|source| IngestError::Csv {
            path: path_str.clone(),
            source,
        })?
        .clone();
    let id_col = header_index(&headers, &path_str, "respondent_id")?;
    let day_col = header_index(&headers, &path_str, "day_index")?;
    let age_col = header_index(&headers, &path_str, "contact_age")?;
    let sex_col = header_index(&headers, &path_str, "contact_sex")?;
    let loc_col = header_index(&headers, &path_str, "location")?;
    let freq_col = header_index(&headers, &path_str, "frequency")?;
    let phys_col = header_index(&headers, &path_str, "physical")?;

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let line = row + 2;
        let push_err = |errors: &mut Vec<Exclusion>, id: &str, detail: String| {
            errors.push(Exclusion {
                respondent_id: id.to_string(),
                reason: ExclusionReason::ParseError,
                detail: format!("contacts line {line}: {detail}"),
            });
        };
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                push_err(&mut errors, "", e.to_string());
                continue;
            }
        };
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let id = field(id_col).to_string();
        let parsed = (|| -> Result<DiaryRecord, String> {
            if id.is_empty() {
                return Err("empty respondent_id".to_string());
            }
            let day_index: u32 = field(day_col)
                .parse()
                .map_err(|_| format!("bad day_index {:?}", field(day_col)))?;
            let contact_age = match field(age_col) {
                "" | "na" | "NA" => None,
                s => Some(
                    s.parse::<u32>()
                        .map_err(|_| format!("bad contact_age {s:?}"))?,
                ),
            };
            Ok(DiaryRecord {
                respondent_id: id.clone(),
                day_index,
                contact_age,
                contact_sex: Sex::parse(field(sex_col))?,
                location: ContactLocation::parse(field(loc_col))?,
                frequency: ContactFrequency::parse(field(freq_col))?,
                physical: parse_bool(field(phys_col))?,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(detail) => push_err(&mut errors, &id, detail),
        }
    }
    Ok((records, errors))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(format!("bad boolean {other:?}")),
    }
}

/// Read the households file
/// (`respondent_id,respondent_age,respondent_sex,member_ages,weight,survey_date`);
/// `member_ages` is semicolon-separated and the weight column is ignored.
pub fn read_households(
    path: &Path,
) -> Result<(Vec<HouseholdRoster>, Vec<Exclusion>), IngestError> {
    let mut reader = csv_reader(path)?;
    let path_str = path.display().to_string();
    let headers = reader
        .headers()
        .map_err(|source| IngestError::Csv {
            path: path_str.clone(),
            source,
        })?
        .clone();
    let id_col = header_index(&headers, &path_str, "respondent_id")?;
    let age_col = header_index(&headers, &path_str, "respondent_age")?;
    let sex_col = header_index(&headers, &path_str, "respondent_sex")?;
    let members_col = header_index(&headers, &path_str, "member_ages")?;
    let date_col = header_index(&headers, &path_str, "survey_date")?;

    let mut rosters = Vec::new();
    let mut errors = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let line = row + 2;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                errors.push(Exclusion {
                    respondent_id: String::new(),
                    reason: ExclusionReason::ParseError,
                    detail: format!("households line {line}: {e}"),
                });
                continue;
            }
        };
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let id = field(id_col).to_string();
        let parsed = (|| -> Result<HouseholdRoster, String> {
            if id.is_empty() {
                return Err("empty respondent_id".to_string());
            }
            let respondent_age: u32 = field(age_col)
                .parse()
                .map_err(|_| format!("bad respondent_age {:?}", field(age_col)))?;
            let member_ages = field(members_col)
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<u32>()
                        .map_err(|_| format!("bad member age {s:?}"))
                })
                .collect::<Result<Vec<u32>, String>>()?;
            Ok(HouseholdRoster {
                respondent_id: id.clone(),
                respondent_age,
                respondent_sex: Sex::parse(field(sex_col))?,
                member_ages,
                survey_date: field(date_col).to_string(),
            })
        })();
        match parsed {
            Ok(r) => rosters.push(r),
            Err(detail) => errors.push(Exclusion {
                respondent_id: id,
                reason: ExclusionReason::ParseError,
                detail: format!("households line {line}: {detail}"),
            }),
        }
    }
    Ok((rosters, errors))
}

/// Load both survey files.
pub fn load_survey(contacts: &Path, households: &Path) -> Result<Survey, IngestError> {
    let (contacts, contact_row_errors) = read_contacts(contacts)?;
    let (households, household_row_errors) = read_households(households)?;
    Ok(Survey {
        households,
        contacts,
        household_row_errors,
        contact_row_errors,
    })
}

/// Match one respondent's diary records against their roster.
///
/// A record qualifies iff location is home, frequency is daily, and its age
/// is within `tolerance` of an unmatched roster member other than the
/// respondent. Duplicate qualifying rows with the same age and sex collapse
/// to one contact. Assignment is greedy by smallest age gap; gap ties go to
/// the younger member (then roster order) and are flagged as warnings.
///
/// Returns indices into `roster.member_ages` of the matched members.
pub fn classify_household_contacts(
    records: &[DiaryRecord],
    roster: &HouseholdRoster,
    respondent_slot: usize,
    tolerance: u32,
) -> (Vec<usize>, Vec<MatchWarning>) {
    let mut candidates: Vec<(u32, Option<Sex>)> = Vec::new();
    for r in records {
        if r.location != ContactLocation::Home || r.frequency != ContactFrequency::Daily {
            continue;
        }
        let Some(age) = r.contact_age else { continue };
        if candidates.iter().any(|&(a, s)| a == age && s == r.contact_sex) {
            continue;
        }
        candidates.push((age, r.contact_sex));
    }

    // All feasible (gap, member age, slot, candidate) pairs, best first.
    let mut pairs: Vec<(u32, u32, usize, usize)> = Vec::new();
    for (ci, &(age, _)) in candidates.iter().enumerate() {
        for (slot, &member_age) in roster.member_ages.iter().enumerate() {
            if slot == respondent_slot {
                continue;
            }
            let gap = age.abs_diff(member_age);
            if gap <= tolerance {
                pairs.push((gap, member_age, slot, ci));
            }
        }
    }
    pairs.sort();

    let mut matched_slots = Vec::new();
    let mut used_candidates = vec![false; candidates.len()];
    let mut used_slots = vec![false; roster.member_ages.len()];
    let mut warnings = Vec::new();
    for &(gap, _, slot, ci) in &pairs {
        if used_candidates[ci] || used_slots[slot] {
            continue;
        }
        let ties = pairs
            .iter()
            .filter(|&&(g, _, s, c)| {
                g == gap && c == ci && s != slot && !used_slots[s]
            })
            .count();
        if ties > 0 {
            warnings.push(MatchWarning {
                respondent_id: roster.respondent_id.clone(),
                detail: format!(
                    "contact aged {} matches {} roster members at gap {}; assigned the youngest",
                    candidates[ci].0,
                    ties + 1,
                    gap
                ),
            });
        }
        used_candidates[ci] = true;
        used_slots[slot] = true;
        matched_slots.push(slot);
    }
    matched_slots.sort_unstable();
    (matched_slots, warnings)
}

/// Slot-to-role assignment for a qualifying household: members sorted by
/// age (ties by roster order) map onto younger child, older child, female
/// adult, male adult. When the respondent is one of the adults and reported
/// a sex, that fixes which adult is which; otherwise adults stay in age
/// order and a warning records the convention.
fn assign_roles(
    roster: &HouseholdRoster,
    respondent_slot: usize,
    order: &[usize; 4],
) -> ([Role; 4], Option<MatchWarning>) {
    let mut roles = [Role::YoungerChild; 4];
    roles[order[0]] = Role::YoungerChild;
    roles[order[1]] = Role::OlderChild;
    roles[order[2]] = Role::FemaleAdult;
    roles[order[3]] = Role::MaleAdult;

    let adult_slots = [order[2], order[3]];
    if adult_slots.contains(&respondent_slot) {
        match roster.respondent_sex {
            Some(sex) => {
                let other = if respondent_slot == adult_slots[0] {
                    adult_slots[1]
                } else {
                    adult_slots[0]
                };
                let (own, partner) = match sex {
                    Sex::Female => (Role::FemaleAdult, Role::MaleAdult),
                    Sex::Male => (Role::MaleAdult, Role::FemaleAdult),
                };
                roles[respondent_slot] = own;
                roles[other] = partner;
                return (roles, None);
            }
            None => {
                return (
                    roles,
                    Some(MatchWarning {
                        respondent_id: roster.respondent_id.clone(),
                        detail: "adult respondent has no reported sex; adult roles assigned by age order".to_string(),
                    }),
                )
            }
        }
    }
    (
        roles,
        Some(MatchWarning {
            respondent_id: roster.respondent_id.clone(),
            detail: "respondent is a child; adult roles assigned by age order".to_string(),
        }),
    )
}

/// Build partial observations for one composition from a parsed survey.
///
/// Every household row in the input is either emitted as an observation or
/// listed in the exclusion report with a reason, so the counts always add
/// up. Row-level parse errors from loading are folded into the report.
pub fn build_observations(
    survey: &Survey,
    composition: CompositionType,
    options: &IngestOptions,
) -> (Vec<PartialObservation>, ExclusionReport) {
    let mut report = ExclusionReport::default();
    report
        .exclusions
        .extend(survey.household_row_errors.iter().cloned());
    report
        .exclusions
        .extend(survey.contact_row_errors.iter().cloned());

    // First diary day per respondent, preserving file order of rows.
    let mut first_day: BTreeMap<&str, u32> = BTreeMap::new();
    for r in &survey.contacts {
        first_day
            .entry(r.respondent_id.as_str())
            .and_modify(|d| *d = (*d).min(r.day_index))
            .or_insert(r.day_index);
    }

    let mut seen_ids = Vec::new();
    let mut observations = Vec::new();
    for roster in &survey.households {
        let id = roster.respondent_id.clone();
        if seen_ids.contains(&id) {
            report.exclusions.push(Exclusion {
                respondent_id: id,
                reason: ExclusionReason::Duplicate,
                detail: "respondent_id already seen".to_string(),
            });
            continue;
        }
        seen_ids.push(id.clone());

        if roster.member_ages.len() != 4 {
            report.exclusions.push(Exclusion {
                respondent_id: id,
                reason: ExclusionReason::WrongSize,
                detail: format!("household size {}", roster.member_ages.len()),
            });
            continue;
        }
        let Some(respondent_slot) = roster
            .member_ages
            .iter()
            .position(|&a| a == roster.respondent_age)
        else {
            report.exclusions.push(Exclusion {
                respondent_id: id,
                reason: ExclusionReason::RosterInconsistent,
                detail: format!(
                    "respondent age {} not among member ages",
                    roster.respondent_age
                ),
            });
            continue;
        };

        // Stable age order: sort slot indices by (age, slot).
        let mut order = [0usize, 1, 2, 3];
        order.sort_by_key(|&i| (roster.member_ages[i], i));
        let sorted_ages = order.map(|i| roster.member_ages[i]);
        if !composition.matches(&sorted_ages) {
            report.exclusions.push(Exclusion {
                respondent_id: id,
                reason: ExclusionReason::WrongComposition,
                detail: format!(
                    "ages {sorted_ages:?} do not fit {} ({})",
                    composition,
                    composition.describe()
                ),
            });
            continue;
        }

        let (roles, role_warning) = assign_roles(roster, respondent_slot, &order);
        report.warnings.extend(role_warning);

        let day = first_day.get(id.as_str()).copied();
        let records: Vec<DiaryRecord> = survey
            .contacts
            .iter()
            .filter(|r| r.respondent_id == id && Some(r.day_index) == day)
            .cloned()
            .collect();
        let (matched, match_warnings) = classify_household_contacts(
            &records,
            roster,
            respondent_slot,
            options.age_tolerance,
        );
        report.warnings.extend(match_warnings);

        let respondent_role = roles[respondent_slot];
        let reports: Vec<(Dyad, bool)> = (0..4)
            .filter(|&slot| slot != respondent_slot)
            .map(|slot| {
                let dyad = Dyad::between(respondent_role, roles[slot])
                    .expect("distinct roles in one household");
                (dyad, matched.contains(&slot))
            })
            .collect();
        let obs = PartialObservation::new(respondent_role, &reports)
            .expect("three reports on incident dyads");
        observations.push(obs);
    }
    (observations, report)
}
