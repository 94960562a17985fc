use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hamming::{distances, hamming_rank};
use super::truth::GroundTruth;
use crate::{CodeSet, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Hamming radius of the hash-lookup protocol.
    pub radius: usize,
    /// Truncate average precision at this rank; `None` uses the full ranking.
    pub ap_cutoff: Option<usize>,
    /// Result counts at which precision@N and recall@N are reported.
    pub precision_at: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            radius: 2,
            ap_cutoff: None,
            precision_at: vec![1, 10, 50, 100, 200, 500, 1000, 2000, 5000, 10000],
        }
    }
}

/// Precision and recall of everything within Hamming distance `distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub distance: u32,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall of the top `n` ranked items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrAtN {
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Retrieval quality of query codes against a database.
///
/// Averages are over scored queries (those with at least one relevant
/// database item). On the distance-threshold curve, precision averages only
/// the queries that retrieve something at that threshold and thresholds at
/// which no query retrieves anything are omitted. Lookup F1 is the harmonic
/// mean of the mean precision and mean recall at the lookup radius, with
/// empty lookups scoring zero precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub r: usize,
    pub radius: usize,
    pub queries: usize,
    pub scored_queries: usize,
    pub excluded_queries: usize,
    pub map: f64,
    pub precision_at_radius: f64,
    pub recall_at_radius: f64,
    pub f1_at_radius: f64,
    pub lookup_fail_rate: f64,
    pub pr_curve: Vec<PrPoint>,
    pub precision_at_n: Vec<PrAtN>,
    pub mean_query_seconds: f64,
    pub query_seconds: Vec<f64>,
}

impl RetrievalReport {
    /// Both curves as CSV with columns `curve,parameter,precision,recall`;
    /// `curve` is `hamming_distance` or `top_n`.
    pub fn curves_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::invalid(e.to_string());
        w.write_record(["curve", "parameter", "precision", "recall"]).map_err(to_err)?;
        for p in &self.pr_curve {
            w.serialize(("hamming_distance", p.distance as usize, p.precision, p.recall)).map_err(to_err)?;
        }
        for p in &self.precision_at_n {
            w.serialize(("top_n", p.n, p.precision, p.recall)).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Average precision of one ranking: the sum, over relevant items found,
/// of the precision at their ranks, divided by `total_relevant`.
///
/// The sum is carried in double-double arithmetic so the result is the
/// correctly rounded value of the exact rational in all but pathological
/// cases.
pub fn average_precision(ranked_relevance: &[bool], total_relevant: usize) -> f64 {
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = Dd::ZERO;
    for (i, &rel) in ranked_relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum = sum.add(Dd::quotient(hits as f64, (i + 1) as f64));
        }
    }
    sum.div(total_relevant as f64).to_f64()
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn renorm(s: f64, e: f64) -> Dd {
        let hi = s + e;
        Dd { hi, lo: e - (hi - s) }
    }

    fn quotient(a: f64, b: f64) -> Dd {
        let q = a / b;
        Dd::renorm(q, (-q).mul_add(b, a) / b)
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (o.hi - bb);
        Dd::renorm(s, err + self.lo + o.lo)
    }

    fn div(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let rem = (-q1).mul_add(b, self.hi) + self.lo;
        Dd::renorm(q1, rem / b)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

struct QueryResult {
    ap: f64,
    lookup_precision: f64,
    lookup_recall: f64,
    lookup_failed: bool,
    /// Per distance 0..=r: (retrieved, relevant retrieved), cumulative.
    cumulative: Vec<(usize, usize)>,
    at_n: Vec<(f64, f64)>,
    seconds: f64,
}

pub fn evaluate(db: &CodeSet, queries: &CodeSet, gt: &GroundTruth, opts: &EvalOptions) -> Result<RetrievalReport> {
    if queries.is_empty() {
        return Err(Error::invalid("evaluation needs at least one query"));
    }
    if db.r() != queries.r() {
        return Err(Error::DimensionMismatch {
            expected: db.r(),
            found: queries.r(),
        });
    }
    if gt.query_ids != queries.ids() {
        return Err(Error::invalid("ground truth query ids do not match the query codes"));
    }
    if opts.radius > db.r() {
        return Err(Error::invalid(format!("radius {} exceeds code length {}", opts.radius, db.r())));
    }
    let r = db.r();
    let pos: HashMap<u64, usize> = db.ids().iter().enumerate().map(|(p, &id)| (id, p)).collect();
    let ns: Vec<usize> = opts.precision_at.iter().copied().filter(|&n| n >= 1 && n <= db.len()).collect();

    let results: Vec<Option<QueryResult>> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let start = Instant::now();
            let mut relevant = vec![false; db.len()];
            let mut total = 0usize;
            for id in &gt.relevant[q] {
                if let Some(&p) = pos.get(id) {
                    relevant[p] = true;
                    total += 1;
                }
            }
            if total == 0 {
                return None;
            }
            let query = queries.code(q);
            let ranked = hamming_rank(db, query, opts.ap_cutoff).expect("query validated");
            let flags: Vec<bool> = ranked.iter().map(|x| relevant[x.position]).collect();
            let ap = match opts.ap_cutoff {
                None => average_precision(&flags, total),
                Some(_) => {
                    let found = flags.iter().filter(|&&f| f).count();
                    if found == 0 {
                        0.0
                    } else {
                        average_precision(&flags, found)
                    }
                }
            };
            let dist = distances(db, query);
            let mut hist = vec![(0usize, 0usize); r + 1];
            for (d, &rel) in dist.iter().zip(&relevant) {
                hist[*d as usize].0 += 1;
                hist[*d as usize].1 += rel as usize;
            }
            let mut cumulative = Vec::with_capacity(r + 1);
            let (mut a, mut b) = (0, 0);
            for (ret, rel) in hist {
                a += ret;
                b += rel;
                cumulative.push((a, b));
            }
            let (ret, rel) = cumulative[opts.radius];
            let full = if opts.ap_cutoff.is_some() {
                hamming_rank(db, query, None).expect("query validated")
            } else {
                ranked
            };
            let mut at_n = Vec::with_capacity(ns.len());
            let mut hits = 0usize;
            let mut next = 0usize;
            for (i, x) in full.iter().enumerate() {
                hits += relevant[x.position] as usize;
                while next < ns.len() && ns[next] == i + 1 {
                    at_n.push((hits as f64 / ns[next] as f64, hits as f64 / total as f64));
                    next += 1;
                }
            }
            Some(QueryResult {
                ap,
                lookup_precision: if ret > 0 { rel as f64 / ret as f64 } else { 0.0 },
                lookup_recall: rel as f64 / total as f64,
                lookup_failed: ret == 0,
                cumulative,
                at_n,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect();

    let scored: Vec<&QueryResult> = results.iter().flatten().collect();
    let excluded = results.len() - scored.len();
    if scored.is_empty() {
        return Err(Error::invalid("no query has a relevant database item"));
    }
    let s = scored.len() as f64;
    let mean = |f: &dyn Fn(&QueryResult) -> f64| scored.iter().map(|q| f(q)).sum::<f64>() / s;
    let map = mean(&|q| q.ap);
    let p_rad = mean(&|q| q.lookup_precision);
    let r_rad = mean(&|q| q.lookup_recall);
    let f1 = if p_rad + r_rad > 0.0 { 2.0 * p_rad * r_rad / (p_rad + r_rad) } else { 0.0 };
    let fail = scored.iter().filter(|q| q.lookup_failed).count() as f64 / s;

    let mut pr_curve = Vec::new();
    for d in 0..=r {
        let mut psum = 0.0;
        let mut pcount = 0usize;
        let mut rsum = 0.0;
        for q in &scored {
            let (ret, rel) = q.cumulative[d];
            let total = q.cumulative[r].1;
            if ret > 0 {
                psum += rel as f64 / ret as f64;
                pcount += 1;
            }
            rsum += rel as f64 / total as f64;
        }
        if pcount > 0 {
            pr_curve.push(PrPoint {
                distance: d as u32,
                precision: psum / pcount as f64,
                recall: rsum / s,
            });
        }
    }
    let precision_at_n = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| PrAtN {
            n,
            precision: scored.iter().map(|q| q.at_n[i].0).sum::<f64>() / s,
            recall: scored.iter().map(|q| q.at_n[i].1).sum::<f64>() / s,
        })
        .collect();
    let query_seconds: Vec<f64> = scored.iter().map(|q| q.seconds).collect();
    Ok(RetrievalReport {
        r,
        radius: opts.radius,
        queries: queries.len(),
        scored_queries: scored.len(),
        excluded_queries: excluded,
        map,
        precision_at_radius: p_rad,
        recall_at_radius: r_rad,
        f1_at_radius: f1,
        lookup_fail_rate: fail,
        pr_curve,
        precision_at_n,
        mean_query_seconds: query_seconds.iter().sum::<f64>() / s,
        query_seconds,
    })
}
