use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingStrategy {
    Renewal,
    Random,
    None,
}

/// Ordered partition of the unlabeled indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingPlan {
    pub groups: Vec<Vec<usize>>,
    pub strategy: GroupingStrategy,
}

impl GroupingPlan {
    /// Everything in one group.
    pub fn single(u: usize) -> Self {
        Self { groups: vec![(0..u).collect()], strategy: GroupingStrategy::None }
    }

    /// Checks that the groups are disjoint and cover `0..u`.
    pub fn validate(&self, u: usize) -> Result<()> {
        let mut seen = vec![false; u];
        for g in &self.groups {
            if g.is_empty() {
                return Err(Error::InvalidParameter("grouping plan has an empty group".into()));
            }
            for &i in g {
                if i >= u || seen[i] {
                    return Err(Error::InvalidParameter(format!("index {i} repeated or out of range")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("grouping plan does not cover every sample".into()));
        }
        Ok(())
    }
}

/// Sorts by decision value, largest first, and deals equal slices from both
/// ends: group `g` gets the `g`-th block of `u/(2m)` from the top and the
/// `g`-th block from the bottom. The middle remainder joins the last group.
pub fn renewal_plan(f: &[f64], m: usize) -> Result<GroupingPlan> {
    let u = f.len();
    if m < 1 || 2 * m > u {
        return Err(Error::InvalidParameter(format!("cannot form {m} renewal groups from {u} samples")));
    }
    let mut order: Vec<usize> = (0..u).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    let s = u / (2 * m);
    let mut groups = Vec::with_capacity(m);
    for g in 0..m {
        let mut grp: Vec<usize> = order[g * s..(g + 1) * s].to_vec();
        grp.extend((0..s).map(|k| order[u - 1 - g * s - k]));
        if g + 1 == m {
            grp.extend_from_slice(&order[m * s..u - m * s]);
        }
        groups.push(grp);
    }
    Ok(GroupingPlan { groups, strategy: GroupingStrategy::Renewal })
}

/// Uniformly random partition into `m` groups whose sizes differ by at
/// most one.
pub fn random_plan<R: Rng>(u: usize, m: usize, rng: &mut R) -> Result<GroupingPlan> {
    if m < 1 || m > u {
        return Err(Error::InvalidParameter(format!("cannot form {m} groups from {u} samples")));
    }
    let mut idx: Vec<usize> = (0..u).collect();
    idx.shuffle(rng);
    let (base, extra) = (u / m, u % m);
    let mut groups = Vec::with_capacity(m);
    let mut start = 0;
    for g in 0..m {
        let len = base + usize::from(g < extra);
        groups.push(idx[start..start + len].to_vec());
        start += len;
    }
    let strategy = if m == 1 { GroupingStrategy::None } else { GroupingStrategy::Random };
    Ok(GroupingPlan { groups, strategy })
}

/// The three prediction protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    /// One pass over the whole unlabeled set.
    #[serde(rename = "s4vm")]
    S4vm,
    /// Random groups predicted in turn.
    #[serde(rename = "svm-s4vm")]
    SvmS4vm,
    /// Groups dealt from both ends of the decision-value ranking.
    #[serde(rename = "renewal")]
    Renewal,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::S4vm, Protocol::SvmS4vm, Protocol::Renewal];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::S4vm => "s4vm",
            Protocol::SvmS4vm => "svm-s4vm",
            Protocol::Renewal => "renewal",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}
