//! Customer-link configurations and the table partitions they induce.
//!
//! The sampler state is the link vector `c`, where `c[i]` is the customer
//! that `i` sits with and `c[i] == i` is a self-link. Two customers share a
//! table iff they are connected in the undirected graph with an edge
//! `{i, c[i]}` for every non-self link; cycles therefore collapse into one
//! table. Table ids are canonicalized as the minimum member index so that
//! states compare bit-exactly across samplers and oracles.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("link target {target} for customer {customer} is outside 0..{n}")]
    OutOfRange {
        customer: usize,
        target: usize,
        n: usize,
    },
    #[error("links vector is empty")]
    Empty,
}

/// The link vector `c`; `c[i] == i` denotes a self-link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CustomerLinks {
    c: Vec<usize>,
}

impl CustomerLinks {
    /// Everyone linked to themselves: the all-singletons configuration, valid
    /// under every distance/decay combination.
    pub fn all_self(n: usize) -> Self {
        Self {
            c: (0..n).collect(),
        }
    }

    pub fn from_vec(c: Vec<usize>) -> Result<Self, LinkError> {
        if c.is_empty() {
            return Err(LinkError::Empty);
        }
        let n = c.len();
        for (customer, &target) in c.iter().enumerate() {
            if target >= n {
                return Err(LinkError::OutOfRange {
                    customer,
                    target,
                    n,
                });
            }
        }
        Ok(Self { c })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.c[i]
    }

    pub fn set(&mut self, i: usize, target: usize) {
        debug_assert!(target < self.c.len());
        self.c[i] = target;
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.c.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.c
    }

    /// Number of self-links; equals the table count when distances are
    /// sequential (backward links cannot form cycles).
    pub fn self_link_count(&self) -> usize {
        self.c.iter().enumerate().filter(|&(i, &j)| i == j).count()
    }
}

/// A partition of the customers into tables, labels canonicalized to the
/// minimum member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableAssignment {
    labels: Vec<usize>,
    tables: BTreeMap<usize, Vec<usize>>,
}

impl TableAssignment {
    fn from_labels(labels: Vec<usize>) -> Self {
        let mut tables: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &label) in labels.iter().enumerate() {
            tables.entry(label).or_default().push(i);
        }
        Self { labels, tables }
    }

    pub fn n_customers(&self) -> usize {
        self.labels.len()
    }

    pub fn n_tables(&self) -> usize {
        self.tables.len()
    }

    #[inline]
    pub fn label_of(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn members(&self, label: usize) -> &[usize] {
        &self.tables[&label]
    }

    pub fn tables(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.tables.iter().map(|(&label, m)| (label, m.as_slice()))
    }

    /// Restricted-growth-string encoding: table ids renumbered 0,1,2,... in
    /// order of first appearance. Canonical key for comparing partitions
    /// regardless of labeling.
    pub fn as_rgs(&self) -> Vec<usize> {
        rgs_from_labels(&self.labels)
    }
}

/// Renumbers arbitrary labels into a restricted growth string.
pub fn rgs_from_labels(labels: &[usize]) -> Vec<usize> {
    let mut next = 0usize;
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|&label| {
            *seen.entry(label).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}

/// Derives the table partition from a link configuration: connected
/// components of the undirected link graph.
pub fn tables_from_links(links: &CustomerLinks) -> TableAssignment {
    let n = links.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let j = links.get(i);
        if j != i {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        // collect the component, then label it by its minimum member
        let mut component = Vec::new();
        stack.push(start);
        labels[start] = start;
        while let Some(u) = stack.pop() {
            component.push(u);
            for &v in &adjacency[u] {
                if labels[v] == usize::MAX {
                    labels[v] = start;
                    stack.push(v);
                }
            }
        }
        let label = *component.iter().min().expect("component is non-empty");
        for &u in &component {
            labels[u] = label;
        }
    }
    TableAssignment::from_labels(labels)
}

/// The partition `z(c_{-i})` with customer `i`'s outgoing link deleted
/// (incoming links to `i` are kept). Either the old table splits in two or
/// nothing changes.
pub fn remove_link(links: &CustomerLinks, i: usize) -> TableAssignment {
    let mut detached = links.clone();
    detached.set(i, i);
    tables_from_links(&detached)
}

/// Effect of pointing customer `i` at candidate `j` on top of `z(c_{-i})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinEffect {
    /// Self-link, or `j` already sits at `i`'s table.
    NoChange,
    /// The link merges `i`'s table with `j`'s table.
    Joins { table_i: usize, table_j: usize },
}

pub fn join_effect(z_minus: &TableAssignment, i: usize, j: usize) -> JoinEffect {
    if i == j {
        return JoinEffect::NoChange;
    }
    let table_i = z_minus.label_of(i);
    let table_j = z_minus.label_of(j);
    if table_i == table_j {
        JoinEffect::NoChange
    } else {
        JoinEffect::Joins { table_i, table_j }
    }
}

/// What [`LinkState::detach`] did to the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetachOutcome {
    /// The link was already a self-link.
    AlreadySelf,
    /// The edge was redundant; the table is unchanged.
    NoSplit,
    /// The table with label `old` split into `kept` (containing `i`) and
    /// `other`. One of the two new labels equals `old`.
    Split {
        old: usize,
        kept: usize,
        other: usize,
    },
}

/// What [`LinkState::attach`] did to the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachOutcome {
    /// Self-link or a target already at `i`'s table.
    NoChange,
    /// Tables `absorbed` and `merged` fused; `merged` is the surviving label
    /// (the minimum member of the union).
    Merged { merged: usize, absorbed: usize },
}

/// Incremental link-configuration state for the Gibbs sampler.
///
/// Maintains per-customer incoming-link lists so a detach only traverses the
/// affected table instead of recomputing all components. Owned by exactly one
/// chain; never shared mutably.
#[derive(Debug, Clone)]
pub struct LinkState {
    links: CustomerLinks,
    incoming: Vec<Vec<usize>>,
    labels: Vec<usize>,
    tables: BTreeMap<usize, Vec<usize>>,
    // scratch for table-local traversal
    visit_mark: Vec<u64>,
    visit_epoch: u64,
}

impl LinkState {
    pub fn new(links: CustomerLinks) -> Self {
        let n = links.len();
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let j = links.get(i);
            if j != i {
                incoming[j].push(i);
            }
        }
        let assignment = tables_from_links(&links);
        let labels = (0..n).map(|i| assignment.label_of(i)).collect();
        let tables = assignment
            .tables()
            .map(|(label, members)| (label, members.to_vec()))
            .collect();
        Self {
            links,
            incoming,
            labels,
            tables,
            visit_mark: vec![0; n],
            visit_epoch: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &CustomerLinks {
        &self.links
    }

    pub fn n_tables(&self) -> usize {
        self.tables.len()
    }

    #[inline]
    pub fn label_of(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn table_members(&self, label: usize) -> &[usize] {
        &self.tables[&label]
    }

    pub fn table_labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.tables.keys().copied()
    }

    pub fn assignment(&self) -> TableAssignment {
        TableAssignment::from_labels(self.labels.clone())
    }

    /// Deletes `i`'s outgoing link (`c[i] := i`), splitting its table if that
    /// link was the only connection between the two halves.
    pub fn detach(&mut self, i: usize) -> DetachOutcome {
        let target = self.links.get(i);
        if target == i {
            return DetachOutcome::AlreadySelf;
        }
        self.links.set(i, i);
        let pos = self.incoming[target]
            .iter()
            .position(|&x| x == i)
            .expect("incoming list tracks links");
        self.incoming[target].swap_remove(pos);

        let old_label = self.labels[i];
        // everyone still reachable from i inside the old table
        let side = self.component_of(i);
        let old_members = self.tables.get(&old_label).expect("label is live");
        if side.len() == old_members.len() {
            return DetachOutcome::NoSplit;
        }

        let mut kept: Vec<usize> = side;
        kept.sort_unstable();
        let other: Vec<usize> = old_members
            .iter()
            .copied()
            .filter(|&m| !self.is_marked(m))
            .collect();
        let kept_label = kept[0];
        let other_label = other[0];
        for &m in &kept {
            self.labels[m] = kept_label;
        }
        for &m in &other {
            self.labels[m] = other_label;
        }
        self.tables.remove(&old_label);
        self.tables.insert(kept_label, kept);
        self.tables.insert(other_label, other);
        DetachOutcome::Split {
            old: old_label,
            kept: kept_label,
            other: other_label,
        }
    }

    /// Points `i` (currently self-linked) at `j`, merging their tables when
    /// they differ.
    pub fn attach(&mut self, i: usize, j: usize) -> AttachOutcome {
        debug_assert_eq!(self.links.get(i), i, "attach requires a detached link");
        if i == j {
            return AttachOutcome::NoChange;
        }
        self.links.set(i, j);
        self.incoming[j].push(i);
        let label_i = self.labels[i];
        let label_j = self.labels[j];
        if label_i == label_j {
            return AttachOutcome::NoChange;
        }
        let members_i = self.tables.remove(&label_i).expect("label is live");
        let members_j = self.tables.remove(&label_j).expect("label is live");
        let merged_label = label_i.min(label_j);
        let absorbed_label = label_i.max(label_j);
        let mut merged = merge_sorted(&members_i, &members_j);
        debug_assert_eq!(merged[0], merged_label);
        for &m in &merged {
            self.labels[m] = merged_label;
        }
        merged.shrink_to_fit();
        self.tables.insert(merged_label, merged);
        AttachOutcome::Merged {
            merged: merged_label,
            absorbed: absorbed_label,
        }
    }

    /// BFS over undirected link edges starting at `i`, marking visited
    /// customers; bounded by `i`'s table.
    fn component_of(&mut self, i: usize) -> Vec<usize> {
        self.visit_epoch += 1;
        let epoch = self.visit_epoch;
        let mut component = vec![i];
        self.visit_mark[i] = epoch;
        let mut cursor = 0;
        while cursor < component.len() {
            let u = component[cursor];
            cursor += 1;
            let out = self.links.get(u);
            if out != u && self.visit_mark[out] != epoch {
                self.visit_mark[out] = epoch;
                component.push(out);
            }
            for idx in 0..self.incoming[u].len() {
                let v = self.incoming[u][idx];
                if self.visit_mark[v] != epoch {
                    self.visit_mark[v] = epoch;
                    component.push(v);
                }
            }
        }
        component
    }

    fn is_marked(&self, i: usize) -> bool {
        self.visit_mark[i] == self.visit_epoch
    }
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        if a[x] < b[y] {
            out.push(a[x]);
            x += 1;
        } else {
            out.push(b[y]);
            y += 1;
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
    out
}
