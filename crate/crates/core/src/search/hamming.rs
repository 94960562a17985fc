use std::collections::HashMap;

use crate::codes::hamming;
use crate::{CodeSet, Error, Result};

/// One ranked database item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ranked {
    pub id: u64,
    /// Position in the database code set.
    pub position: usize,
    pub distance: u32,
}

fn check_query(db: &CodeSet, query: &[u64]) -> Result<()> {
    if query.len() != db.words_per_code() {
        return Err(Error::DimensionMismatch {
            expected: db.words_per_code(),
            found: query.len(),
        });
    }
    let r = db.r();
    if r % 64 != 0 && query[query.len() - 1] >> (r % 64) != 0 {
        return Err(Error::invalid(format!("query code has bits set beyond r = {r}")));
    }
    Ok(())
}

/// Database items by ascending Hamming distance to `query`, ties by
/// ascending id; at most `top_k` items when given.
pub fn hamming_rank(db: &CodeSet, query: &[u64], top_k: Option<usize>) -> Result<Vec<Ranked>> {
    check_query(db, query)?;
    let mut buckets: Vec<Vec<Ranked>> = vec![Vec::new(); db.r() + 1];
    for (position, &id) in db.ids().iter().enumerate() {
        let distance = db.distance_to(position, query);
        buckets[distance as usize].push(Ranked { id, position, distance });
    }
    let limit = top_k.unwrap_or(usize::MAX);
    let mut out = Vec::with_capacity(db.len().min(limit));
    for mut b in buckets {
        if out.len() >= limit {
            break;
        }
        b.sort_unstable_by_key(|x| x.id);
        let take = (limit - out.len()).min(b.len());
        out.extend_from_slice(&b[..take]);
    }
    Ok(out)
}

/// Ids within Hamming distance `radius` of `query`, ascending, by linear scan.
pub fn hamming_lookup(db: &CodeSet, query: &[u64], radius: usize) -> Result<Vec<u64>> {
    check_query(db, query)?;
    check_radius(db, radius)?;
    let mut ids: Vec<u64> = (0..db.len())
        .filter(|&j| db.distance_to(j, query) as usize <= radius)
        .map(|j| db.ids()[j])
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

fn check_radius(db: &CodeSet, radius: usize) -> Result<()> {
    if radius > db.r() {
        return Err(Error::invalid(format!("radius {radius} exceeds code length {}", db.r())));
    }
    Ok(())
}

/// Number of codes within `radius` of a fixed `r`-bit code, saturating.
pub fn probe_count(r: usize, radius: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for i in 0..=radius.min(r) {
        total = total.saturating_add(c);
        c = c.saturating_mul(r - i) / (i + 1);
    }
    total
}

/// Exact-code table over a database for radius lookups.
///
/// Lookups enumerate every probe code within the radius when that is fewer
/// probes than database items, and scan otherwise; both give the same set.
#[derive(Debug, Clone)]
pub struct HammingIndex<'a> {
    db: &'a CodeSet,
    table: HashMap<&'a [u64], Vec<usize>>,
}

impl<'a> HammingIndex<'a> {
    pub fn new(db: &'a CodeSet) -> Self {
        let mut table: HashMap<&[u64], Vec<usize>> = HashMap::new();
        for j in 0..db.len() {
            table.entry(db.code(j)).or_default().push(j);
        }
        Self { db, table }
    }

    pub fn uses_probes(&self, radius: usize) -> bool {
        probe_count(self.db.r(), radius) < self.db.len()
    }

    pub fn lookup(&self, query: &[u64], radius: usize) -> Result<Vec<u64>> {
        if !self.uses_probes(radius) {
            return hamming_lookup(self.db, query, radius);
        }
        check_query(self.db, query)?;
        check_radius(self.db, radius)?;
        let mut ids = Vec::new();
        let mut probe = query.to_vec();
        self.probe(&mut probe, 0, radius, &mut ids);
        ids.sort_unstable();
        Ok(ids)
    }

    fn probe(&self, code: &mut [u64], from: usize, left: usize, out: &mut Vec<u64>) {
        if let Some(hits) = self.table.get(&*code) {
            out.extend(hits.iter().map(|&j| self.db.ids()[j]));
        }
        if left == 0 {
            return;
        }
        for b in from..self.db.r() {
            code[b / 64] ^= 1 << (b % 64);
            self.probe(code, b + 1, left - 1, out);
            code[b / 64] ^= 1 << (b % 64);
        }
    }
}

/// Hamming distances from a query to every database item.
pub(crate) fn distances(db: &CodeSet, query: &[u64]) -> Vec<u32> {
    (0..db.len()).map(|j| hamming(db.code(j), query)).collect()
}
