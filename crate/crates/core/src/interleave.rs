//! Team-draft interleaving and simulated online comparisons.

use std::collections::HashSet;
use std::hash::Hash;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Latent, Segment};
use crate::error::{Error, Result};
use crate::eval::{paired_t_test, TTest};
use crate::ranker::{rank_group, TreeEnsemble};
use crate::seed;
use crate::synthgen::{session_with_rng, UserModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Team {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleavedList<T> {
    pub items: Vec<T>,
    pub teams: Vec<Team>,
}

impl<T> InterleavedList<T> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.items.truncate(n);
        self.teams.truncate(n);
    }
}

/// Team-draft interleaving. Each round a fair coin picks which team drafts
/// first; each team then appends its highest-ranked item not yet taken.
pub fn team_draft<T, R>(list_a: &[T], list_b: &[T], rng: &mut R) -> Result<InterleavedList<T>>
where
    T: Clone + Eq + Hash,
    R: Rng + ?Sized,
{
    let set_a: HashSet<&T> = list_a.iter().collect();
    let set_b: HashSet<&T> = list_b.iter().collect();
    if set_a.len() != list_a.len() || set_b.len() != list_b.len() || set_a != set_b {
        return Err(Error::MismatchedCandidates);
    }
    let n = list_a.len();
    let mut taken: HashSet<&T> = HashSet::with_capacity(n);
    let mut items = Vec::with_capacity(n);
    let mut teams = Vec::with_capacity(n);
    let (mut next_a, mut next_b) = (0usize, 0usize);
    while items.len() < n {
        let order = if rng.random::<bool>() {
            [Team::A, Team::B]
        } else {
            [Team::B, Team::A]
        };
        for team in order {
            let (list, next) = match team {
                Team::A => (list_a, &mut next_a),
                Team::B => (list_b, &mut next_b),
            };
            while *next < n && taken.contains(&list[*next]) {
                *next += 1;
            }
            if *next < n {
                taken.insert(&list[*next]);
                items.push(list[*next].clone());
                teams.push(team);
            }
        }
    }
    Ok(InterleavedList { items, teams })
}

pub fn team_draft_seeded<T: Clone + Eq + Hash>(
    list_a: &[T],
    list_b: &[T],
    seed: u64,
) -> Result<InterleavedList<T>> {
    team_draft(list_a, list_b, &mut seed::rng(seed))
}

/// Positions credited by the add-to-cart metric.
pub const ATC_DEPTH: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterleaveReport {
    pub n_sessions: usize,
    /// Cart adds (or orders) credited to the baseline team.
    pub atc_baseline: u64,
    /// Cart adds (or orders) credited to the variant team.
    pub atc_variant: u64,
    /// `100 * (variant - baseline) / baseline`; `None` if the baseline got no credit.
    pub pct_change: Option<f64>,
    pub test: TTest,
}

impl InterleaveReport {
    pub const CSV_HEADER: &'static str =
        "metric,n_sessions,atc_baseline,atc_variant,pct_change,t,p,degenerate";

    pub fn csv_row(&self) -> String {
        format!(
            "atc@{},{},{},{},{},{:.4},{:.6},{}",
            ATC_DEPTH,
            self.n_sessions,
            self.atc_baseline,
            self.atc_variant,
            self.pct_change
                .map_or("NA".to_string(), |v| format!("{v:.4}")),
            self.test.t,
            self.test.p,
            self.test.degenerate
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        writeln!(out, "{}", self.csv_row())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterleaveConfig {
    pub n_sessions: usize,
    /// Head / torso / tail share of sampled sessions.
    pub segment_weights: [f64; 3],
}

impl Default for InterleaveConfig {
    fn default() -> Self {
        InterleaveConfig {
            n_sessions: 20_000,
            segment_weights: [0.2, 0.3, 0.5],
        }
    }
}

/// Samples a group index: a segment by weight (among segments present), then
/// a group uniformly within it.
fn sample_group(by_segment: &[Vec<usize>; 3], weights: &[f64; 3], rng: &mut impl Rng) -> usize {
    let total: f64 = (0..3)
        .filter(|&s| !by_segment[s].is_empty())
        .map(|s| weights[s])
        .sum();
    let mut pick = 0;
    if total > 0.0 {
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for s in (0..3).filter(|&s| !by_segment[s].is_empty()) {
            pick = s;
            acc += weights[s];
            if u < acc {
                break;
            }
        }
    } else {
        pick = (0..3)
            .find(|&s| !by_segment[s].is_empty())
            .expect("non-empty dataset");
    }
    let groups = &by_segment[pick];
    groups[rng.random_range(0..groups.len())]
}

/// Interleaves `baseline` (team A) with `variant` (team B) over simulated
/// sessions and credits cart adds within the top [`ATC_DEPTH`] positions.
pub fn run_interleaving_experiment(
    baseline: &TreeEnsemble,
    variant: &TreeEnsemble,
    queries: &Dataset,
    user: &UserModelParams,
    config: &InterleaveConfig,
    seed: u64,
) -> Result<InterleaveReport> {
    user.validate()?;
    if config.n_sessions == 0 {
        return Err(Error::InvalidConfig("n_sessions must be at least 1".into()));
    }
    if queries.groups().is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !queries.has_latent() {
        return Err(Error::InvalidDataset(
            "interleaving needs latent truth to simulate users".into(),
        ));
    }
    baseline.check_schema(queries.schema())?;
    variant.check_schema(queries.schema())?;

    let rankings: Vec<(Vec<usize>, Vec<usize>)> = queries
        .groups()
        .par_iter()
        .map(|g| Ok((rank_group(baseline, g)?, rank_group(variant, g)?)))
        .collect::<Result<_>>()?;
    let mut by_segment: [Vec<usize>; 3] = Default::default();
    for (i, g) in queries.groups().iter().enumerate() {
        by_segment[g.query.segment.index()].push(i);
    }
    debug_assert_eq!(Segment::ALL.len(), by_segment.len());

    let credits: Vec<(u32, u32)> = (0..config.n_sessions)
        .into_par_iter()
        .map(|s| {
            let mut rng = seed::rng(seed::derive(seed, s as u64));
            let gi = sample_group(&by_segment, &config.segment_weights, &mut rng);
            let group = &queries.groups()[gi];
            let (ra, rb) = &rankings[gi];
            let mut list = team_draft(ra, rb, &mut rng).expect("both rankings cover the group");
            list.truncate(ATC_DEPTH);
            let shown: Vec<Latent> = list
                .items
                .iter()
                .map(|&i| group.items[i].latent.expect("checked above"))
                .collect();
            let outcomes = session_with_rng(&shown, user, &mut rng);
            let mut credit = (0u32, 0u32);
            for (o, team) in outcomes.iter().zip(&list.teams) {
                if o.is_cart_add() {
                    match team {
                        Team::A => credit.0 += 1,
                        Team::B => credit.1 += 1,
                    }
                }
            }
            credit
        })
        .collect();
    let atc_baseline: u64 = credits.iter().map(|c| u64::from(c.0)).sum();
    let atc_variant: u64 = credits.iter().map(|c| u64::from(c.1)).sum();
    let deltas: Vec<f64> = credits
        .iter()
        .map(|&(a, b)| f64::from(b) - f64::from(a))
        .collect();
    let test = paired_t_test(&deltas).unwrap_or_else(|_| TTest::degenerate(deltas.len()));
    let pct_change = (atc_baseline > 0)
        .then(|| 100.0 * (atc_variant as f64 - atc_baseline as f64) / atc_baseline as f64);
    Ok(InterleaveReport {
        n_sessions: config.n_sessions,
        atc_baseline,
        atc_variant,
        pct_change,
        test,
    })
}
