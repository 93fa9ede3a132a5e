//! Core domain types and the line-delimited dataset file format.
//!
//! A dataset file is CSV. The header names the fixed columns, then one column
//! per feature written as `name:channel`, then optionally `latent.rho` and
//! `latent.pi`. Each following line is one item; consecutive lines sharing a
//! `group_id` form a query group.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 5] = ["group_id", "query_id", "segment", "product_id", "outcome"];
const LATENT_RHO: &str = "latent.rho";
const LATENT_PI: &str = "latent.pi";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Head,
    Torso,
    Tail,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::Head, Segment::Torso, Segment::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Head => "head",
            Segment::Torso => "torso",
            Segment::Tail => "tail",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Segment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "head" => Ok(Segment::Head),
            "torso" => Ok(Segment::Torso),
            "tail" => Ok(Segment::Tail),
            other => Err(format!("unknown segment {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub id: String,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Product {
    pub id: String,
}

impl Product {
    pub fn new(id: impl Into<String>) -> Self {
        Product { id: id.into() }
    }
}

/// Logged engagement, totally ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementOutcome {
    NonEngaged,
    Clicked,
    AddedToCart,
    Ordered,
}

impl EngagementOutcome {
    pub const ALL: [EngagementOutcome; 4] = [
        EngagementOutcome::NonEngaged,
        EngagementOutcome::Clicked,
        EngagementOutcome::AddedToCart,
        EngagementOutcome::Ordered,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EngagementOutcome::NonEngaged => "non_engaged",
            EngagementOutcome::Clicked => "clicked",
            EngagementOutcome::AddedToCart => "added_to_cart",
            EngagementOutcome::Ordered => "ordered",
        }
    }

    /// True for add-to-cart and anything further down the funnel.
    pub fn is_cart_add(self) -> bool {
        self >= EngagementOutcome::AddedToCart
    }
}

impl FromStr for EngagementOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EngagementOutcome::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown outcome {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "sparse-content")]
    SparseContent,
    #[serde(rename = "xe-dense")]
    XeDense,
    #[serde(rename = "engagement")]
    Engagement,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::SparseContent => "sparse-content",
            Channel::XeDense => "xe-dense",
            Channel::Engagement => "engagement",
        }
    }

    pub fn is_content(self) -> bool {
        matches!(self, Channel::SparseContent | Channel::XeDense)
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sparse-content" => Ok(Channel::SparseContent),
            "xe-dense" => Ok(Channel::XeDense),
            "engagement" => Ok(Channel::Engagement),
            other => Err(format!("unknown channel tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub channel: Channel,
}

impl FeatureDef {
    pub fn new(name: impl Into<String>, channel: Channel) -> Self {
        FeatureDef {
            name: name.into(),
            channel,
        }
    }
}

/// Ordered feature names with channel tags.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<FeatureDef>,
}

impl Schema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() || f.name.contains(':') {
                return Err(Error::InvalidDataset(format!(
                    "bad feature name {:?}",
                    f.name
                )));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate feature {:?}",
                    f.name
                )));
            }
        }
        Ok(Schema { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn channel(&self, index: usize) -> Channel {
        self.features[index].channel
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Indices of all features whose channel satisfies `keep`, in schema order.
    pub fn indices_where(&self, keep: impl Fn(Channel) -> bool) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| keep(f.channel))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn indices_of(&self, channel: Channel) -> Vec<usize> {
        self.indices_where(|c| c == channel)
    }

    /// Stable fingerprint of names and channels, used to pair models with data.
    pub fn fingerprint(&self) -> String {
        let mut text = String::new();
        for f in &self.features {
            text.push_str(&f.name);
            text.push(':');
            text.push_str(f.channel.as_str());
            text.push('\n');
        }
        format!("{:016x}", crate::seed::hash_str(&text))
    }
}

/// Feature values for one query-product pair. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "feature {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Synthetic ground truth: content relevance and engagement propensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latent {
    pub rho: f64,
    pub pi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub product: Product,
    pub features: FeatureVector,
    pub outcome: EngagementOutcome,
    pub latent: Option<Latent>,
}

/// One logged search event.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub group_id: String,
    pub query: Query,
    pub items: Vec<Item>,
}

impl QueryGroup {
    pub fn new(group_id: impl Into<String>, query: Query, items: Vec<Item>) -> Result<Self> {
        let group = QueryGroup {
            group_id: group_id.into(),
            query,
            items,
        };
        group.validate()?;
        Ok(group)
    }

    fn validate(&self) -> Result<()> {
        if self.group_id.is_empty() || self.query.id.is_empty() {
            return Err(Error::InvalidDataset("empty group or query id".into()));
        }
        if self.items.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "group {} has {} item(s), need at least 2",
                self.group_id,
                self.items.len()
            )));
        }
        let mut seen = HashSet::new();
        for item in &self.items {
            if item.product.id.is_empty() {
                return Err(Error::InvalidDataset(format!(
                    "empty product id in group {}",
                    self.group_id
                )));
            }
            if !seen.insert(item.product.id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate product {} in group {}",
                    item.product.id, self.group_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn has_latent(&self) -> bool {
        self.items.iter().all(|i| i.latent.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    groups: Vec<QueryGroup>,
}

impl Dataset {
    pub fn new(schema: Schema, groups: Vec<QueryGroup>) -> Result<Self> {
        let mut group_ids = HashSet::new();
        let mut query_ids = HashSet::new();
        for g in &groups {
            g.validate()?;
            if !group_ids.insert(g.group_id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate group id {}",
                    g.group_id
                )));
            }
            if !query_ids.insert(g.query.id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate query id {}",
                    g.query.id
                )));
            }
            for item in &g.items {
                if item.features.len() != schema.len() {
                    return Err(Error::SchemaMismatch(format!(
                        "item {} in group {} has {} features, schema has {}",
                        item.product.id,
                        g.group_id,
                        item.features.len(),
                        schema.len()
                    )));
                }
            }
        }
        let with_latent = groups
            .iter()
            .flat_map(|g| &g.items)
            .filter(|i| i.latent.is_some())
            .count();
        let total: usize = groups.iter().map(|g| g.items.len()).sum();
        if with_latent != 0 && with_latent != total {
            return Err(Error::InvalidDataset(
                "latent truth present on only some items".into(),
            ));
        }
        Ok(Dataset { schema, groups })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn into_groups(self) -> Vec<QueryGroup> {
        self.groups
    }

    pub fn n_items(&self) -> usize {
        self.groups.iter().map(|g| g.items.len()).sum()
    }

    pub fn has_latent(&self) -> bool {
        !self.groups.is_empty() && self.groups.iter().all(QueryGroup::has_latent)
    }

    pub fn items(&self) -> impl Iterator<Item = (&QueryGroup, &Item)> {
        self.groups
            .iter()
            .flat_map(|g| g.items.iter().map(move |i| (g, i)))
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} groups, {} items, {} features",
            self.groups.len(),
            self.n_items(),
            self.schema.len()
        )
    }
}

fn header_row(schema: &Schema, latent: bool) -> Vec<String> {
    let mut row: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    row.extend(
        schema
            .features()
            .iter()
            .map(|f| format!("{}:{}", f.name, f.channel.as_str())),
    );
    if latent {
        row.push(LATENT_RHO.into());
        row.push(LATENT_PI.into());
    }
    row
}

pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let latent = dataset.has_latent();
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
    let wrap = |e: csv::Error| Error::InvalidDataset(format!("csv write failed: {e}"));
    w.write_record(header_row(dataset.schema(), latent))
        .map_err(wrap)?;
    let mut row: Vec<String> = Vec::new();
    for g in dataset.groups() {
        for item in &g.items {
            row.clear();
            row.push(g.group_id.clone());
            row.push(g.query.id.clone());
            row.push(g.query.segment.as_str().into());
            row.push(item.product.id.clone());
            row.push(item.outcome.as_str().into());
            row.extend(item.features.values().iter().map(|v| v.to_string()));
            if let (true, Some(l)) = (latent, item.latent) {
                row.push(l.rho.to_string());
                row.push(l.pi.to_string());
            }
            w.write_record(&row).map_err(wrap)?;
        }
    }
    w.flush()
        .map_err(|e| Error::InvalidDataset(format!("flush failed: {e}")))?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, BufWriter::new(file)).map_err(|e| match e {
        Error::InvalidDataset(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

fn parse_header(fields: &csv::StringRecord) -> Result<(Schema, bool)> {
    let fields: Vec<&str> = fields.iter().collect();
    let line = 1;
    if fields.len() < FIXED_COLUMNS.len() || fields[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::Parse {
            line,
            message: format!("header must start with {}", FIXED_COLUMNS.join(",")),
        });
    }
    let mut rest = &fields[FIXED_COLUMNS.len()..];
    let latent = rest.len() >= 2 && rest[rest.len() - 2..] == [LATENT_RHO, LATENT_PI];
    if latent {
        rest = &rest[..rest.len() - 2];
    }
    let mut defs = Vec::with_capacity(rest.len());
    for col in rest {
        let (name, tag) = col.rsplit_once(':').ok_or_else(|| Error::Parse {
            line,
            message: format!("feature column {col:?} lacks a channel tag"),
        })?;
        let channel = tag
            .parse()
            .map_err(|message| Error::Parse { line, message })?;
        defs.push(FeatureDef::new(name, channel));
    }
    let schema = Schema::new(defs).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    Ok((schema, latent))
}

fn parse_float(text: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: {text:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::SchemaViolation {
            line,
            message: format!("column {column}: non-finite value {text}"),
        });
    }
    Ok(v)
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
        Some(r) => r.map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?,
    };
    let (schema, latent) = parse_header(&header)?;
    let names: Vec<String> = schema.features().iter().map(|f| f.name.clone()).collect();
    let width = FIXED_COLUMNS.len() + schema.len() + if latent { 2 } else { 0 };

    // (line of first row, group) in file order
    let mut groups: Vec<(u64, QueryGroup)> = Vec::new();
    let mut closed: HashSet<String> = HashSet::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        let group_id = &rec[0];
        let segment: Segment = rec[2]
            .parse()
            .map_err(|message| Error::Parse { line, message })?;
        let outcome: EngagementOutcome = rec[4]
            .parse()
            .map_err(|message| Error::Parse { line, message })?;
        let mut values = Vec::with_capacity(schema.len());
        for (j, name) in names.iter().enumerate() {
            values.push(parse_float(&rec[FIXED_COLUMNS.len() + j], line, name)?);
        }
        let latent_truth = if latent {
            let base = FIXED_COLUMNS.len() + schema.len();
            let rho = parse_float(&rec[base], line, LATENT_RHO)?;
            let pi = parse_float(&rec[base + 1], line, LATENT_PI)?;
            if !(0.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&pi) {
                return Err(Error::SchemaViolation {
                    line,
                    message: "latent values must lie in [0,1]".into(),
                });
            }
            Some(Latent { rho, pi })
        } else {
            None
        };
        let item = Item {
            product: Product::new(&rec[3]),
            features: FeatureVector(values),
            outcome,
            latent: latent_truth,
        };
        match groups.last_mut() {
            Some((_, g)) if g.group_id == group_id => {
                if g.query.id != rec[1] || g.query.segment != segment {
                    return Err(Error::Parse {
                        line,
                        message: format!("group {group_id} changes query mid-group"),
                    });
                }
                if g.items.iter().any(|i| i.product.id == item.product.id) {
                    return Err(Error::InvalidDataset(format!(
                        "duplicate product {} in group {group_id} (line {line})",
                        item.product.id
                    )));
                }
                g.items.push(item);
            }
            _ => {
                if let Some((_, prev)) = groups.last() {
                    closed.insert(prev.group_id.clone());
                }
                if closed.contains(group_id) {
                    return Err(Error::Parse {
                        line,
                        message: format!("rows of group {group_id} are not contiguous"),
                    });
                }
                groups.push((
                    line,
                    QueryGroup {
                        group_id: group_id.to_string(),
                        query: Query {
                            id: rec[1].to_string(),
                            segment,
                        },
                        items: vec![item],
                    },
                ));
            }
        }
    }
    for (line, g) in &groups {
        g.validate()
            .map_err(|e| Error::InvalidDataset(format!("{e} (group starting line {line})")))?;
    }
    Dataset::new(schema, groups.into_iter().map(|(_, g)| g).collect())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_schema() -> Schema {
        Schema::new(vec![
            FeatureDef::new("bm25", Channel::SparseContent),
            FeatureDef::new("xe", Channel::XeDense),
            FeatureDef::new("ctr", Channel::Engagement),
        ])
        .unwrap()
    }

    fn item(id: &str, v: [f64; 3], outcome: EngagementOutcome, latent: Option<Latent>) -> Item {
        Item {
            product: Product::new(id),
            features: FeatureVector::new(v.to_vec()).unwrap(),
            outcome,
            latent,
        }
    }

    fn fixture(latent: bool) -> Dataset {
        let l = |rho, pi| latent.then_some(Latent { rho, pi });
        let g1 = QueryGroup::new(
            "g1",
            Query {
                id: "q1".into(),
                segment: Segment::Head,
            },
            vec![
                item(
                    "p1",
                    [0.1, 0.2, 0.3],
                    EngagementOutcome::Ordered,
                    l(0.9, 0.1),
                ),
                item(
                    "p2",
                    [1.5, -2.0, 0.0],
                    EngagementOutcome::NonEngaged,
                    l(0.2, 0.4),
                ),
            ],
        )
        .unwrap();
        let g2 = QueryGroup::new(
            "g2",
            Query {
                id: "q2".into(),
                segment: Segment::Tail,
            },
            vec![
                item(
                    "p1",
                    [0.0, 0.0, 0.0],
                    EngagementOutcome::Clicked,
                    l(0.0, 1.0),
                ),
                item(
                    "p3",
                    [1e-17, 3.25, 7.0],
                    EngagementOutcome::AddedToCart,
                    l(1.0, 0.5),
                ),
                item(
                    "p4",
                    [2.0, 2.0, 2.0],
                    EngagementOutcome::NonEngaged,
                    l(0.3, 0.3),
                ),
            ],
        )
        .unwrap();
        Dataset::new(tiny_schema(), vec![g1, g2]).unwrap()
    }

    fn round_trip(ds: &Dataset) -> (String, Dataset) {
        let mut buf = Vec::new();
        write_dataset(ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = read_dataset(text.as_bytes()).unwrap();
        (text, back)
    }

    #[test]
    fn outcome_order_matches_funnel() {
        use EngagementOutcome::*;
        assert!(NonEngaged < Clicked && Clicked < AddedToCart && AddedToCart < Ordered);
        assert!(Ordered.is_cart_add() && AddedToCart.is_cart_add() && !Clicked.is_cart_add());
    }

    #[test]
    fn two_group_fixture_round_trips() {
        let ds = fixture(false);
        let (text, back) = round_trip(&ds);
        assert_eq!(back, ds);
        assert_eq!(back.groups().len(), 2);
        assert!(text.starts_with("group_id,query_id,segment,product_id,outcome,bm25:sparse-content,xe:xe-dense,ctr:engagement\n"));
    }

    #[test]
    fn latent_columns_are_preserved() {
        let ds = fixture(true);
        let (text, back) = round_trip(&ds);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .ends_with("latent.rho,latent.pi"));
        assert_eq!(back, ds);
        assert!(back.has_latent());
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let ds = Dataset::new(tiny_schema(), vec![]).unwrap();
        let (text, back) = round_trip(&ds);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(back, ds);
    }

    #[test]
    fn nan_feature_names_its_line() {
        let text = "group_id,query_id,segment,product_id,outcome,a:sparse-content\n\
                    g,q,head,p1,clicked,0.5\n\
                    g,q,head,p2,clicked,NaN\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::SchemaViolation { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_parse_error_line() {
        let text = "group_id,query_id,segment,product_id,outcome,a:sparse-content\n\
                    g,q,head,p1,clicked,abc\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_product_in_group_is_rejected() {
        let text = "group_id,query_id,segment,product_id,outcome,a:sparse-content\n\
                    g,q,head,p1,clicked,0.1\n\
                    g,q,head,p1,ordered,0.2\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn singleton_group_and_bad_channel_are_rejected() {
        let single = "group_id,query_id,segment,product_id,outcome,a:sparse-content\n\
                      g,q,head,p1,clicked,0.1\n";
        assert!(matches!(
            read_dataset(single.as_bytes()),
            Err(Error::InvalidDataset(_))
        ));
        let bad = "group_id,query_id,segment,product_id,outcome,a:dense\n";
        assert!(matches!(
            read_dataset(bad.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn split_group_is_rejected() {
        let text = "group_id,query_id,segment,product_id,outcome,a:sparse-content\n\
                    g,q,head,p1,clicked,0.1\n\
                    g,q,head,p2,clicked,0.1\n\
                    h,r,head,p1,clicked,0.1\n\
                    h,r,head,p2,clicked,0.1\n\
                    g,q,head,p3,clicked,0.1\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Parse { line: 6, .. })
        ));
    }

    #[test]
    fn file_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let ds = fixture(true);
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
        assert!(matches!(
            load_dataset(dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }
}
