//! Provenance semirings over derived tuples, and exact probability/gradient
//! extraction from retained proof sets by weighted model counting.

use crate::logic::FactGroupKind;
use std::collections::BTreeMap;
use thiserror::Error;

/// Identifies one probabilistic fact: a member of a fact group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactId {
    pub group: usize,
    pub member: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProvenanceError {
    #[error("weighted model counting over {count} variables exceeds the cap of {cap}")]
    TooManyFacts { count: usize, cap: usize },
    #[error("no weight recorded for fact {0:?}")]
    MissingWeight(FactId),
}

/// Per-fact probabilities plus the exclusivity structure of their groups.
#[derive(Debug, Clone, Default)]
pub struct WeightTable {
    /// probs[group][member]
    pub probs: Vec<Vec<f64>>,
    pub kinds: Vec<FactGroupKind>,
}

impl WeightTable {
    pub fn prob(&self, id: FactId) -> Result<f64, ProvenanceError> {
        self.probs
            .get(id.group)
            .and_then(|g| g.get(id.member))
            .copied()
            .ok_or(ProvenanceError::MissingWeight(id))
    }

    pub fn kind(&self, group: usize) -> FactGroupKind {
        self.kinds.get(group).copied().unwrap_or(FactGroupKind::Independent)
    }

    pub fn is_ad(&self, group: usize) -> bool {
        self.kind(group) == FactGroupKind::CategoricalAd
    }
}

/// A conjunction of facts. Kept sorted and duplicate-free; construction
/// fails if two members pick different values of one annotated disjunction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Proof {
    facts: Vec<FactId>,
}

impl Proof {
    pub fn empty() -> Self {
        Proof { facts: Vec::new() }
    }

    pub fn singleton(id: FactId) -> Self {
        Proof { facts: vec![id] }
    }

    /// Builds a proof from arbitrary facts; `None` if contradictory.
    pub fn from_facts(mut facts: Vec<FactId>, weights: &WeightTable) -> Option<Self> {
        facts.sort();
        facts.dedup();
        for w in facts.windows(2) {
            if w[0].group == w[1].group && weights.is_ad(w[0].group) {
                return None; // two distinct members of one exclusive group
            }
        }
        Some(Proof { facts })
    }

    /// Conjunction of two proofs; `None` if the union is contradictory.
    pub fn union(&self, other: &Proof, weights: &WeightTable) -> Option<Proof> {
        let mut facts = Vec::with_capacity(self.facts.len() + other.facts.len());
        facts.extend_from_slice(&self.facts);
        facts.extend_from_slice(&other.facts);
        Proof::from_facts(facts, weights)
    }

    pub fn facts(&self) -> &[FactId] {
        &self.facts
    }

    pub fn is_subset_of(&self, other: &Proof) -> bool {
        // Both sides sorted; merge walk.
        let mut it = other.facts.iter();
        'outer: for f in &self.facts {
            for g in it.by_ref() {
                match g.cmp(f) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    /// Ranking weight used during top-k pruning: the product of member
    /// probabilities, treating all facts as independent. A heuristic only;
    /// extraction stays exact over whatever is retained.
    pub fn rank_weight(&self, weights: &WeightTable) -> f64 {
        self.facts.iter().map(|&f| weights.prob(f).unwrap_or(0.0)).product()
    }
}

/// An antichain of proofs (no proof contains another), optionally pruned to
/// the `k` highest-ranked ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofSet {
    proofs: Vec<Proof>,
    pub k: Option<usize>,
}

impl ProofSet {
    pub fn empty(k: Option<usize>) -> Self {
        ProofSet { proofs: Vec::new(), k }
    }

    pub fn one(k: Option<usize>) -> Self {
        ProofSet { proofs: vec![Proof::empty()], k }
    }

    pub fn from_proofs(proofs: Vec<Proof>, k: Option<usize>, weights: &WeightTable) -> Self {
        let mut set = ProofSet { proofs, k };
        set.normalize(weights);
        set
    }

    pub fn proofs(&self) -> &[Proof] {
        &self.proofs
    }

    pub fn is_empty(&self) -> bool {
        self.proofs.is_empty()
    }

    fn normalize(&mut self, weights: &WeightTable) {
        self.proofs.sort();
        self.proofs.dedup();
        // Absorption: drop strict supersets.
        let kept: Vec<Proof> = self
            .proofs
            .iter()
            .filter(|p| !self.proofs.iter().any(|q| q != *p && q.is_subset_of(p)))
            .cloned()
            .collect();
        self.proofs = kept;
        if let Some(k) = self.k {
            if self.proofs.len() > k {
                // Highest rank weight first; ties broken by the lexicographic
                // order of the sorted fact lists for determinism.
                let mut ranked: Vec<(f64, Proof)> =
                    self.proofs.drain(..).map(|p| (p.rank_weight(weights), p)).collect();
                ranked.sort_by(|a, b| {
                    b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.1.cmp(&b.1))
                });
                self.proofs = ranked.into_iter().take(k).map(|(_, p)| p).collect();
                self.proofs.sort();
            }
        }
    }

    pub fn add(&self, other: &ProofSet, weights: &WeightTable) -> ProofSet {
        let mut proofs = self.proofs.clone();
        proofs.extend(other.proofs.iter().cloned());
        ProofSet::from_proofs(proofs, self.k.or(other.k), weights)
    }

    pub fn mul(&self, other: &ProofSet, weights: &WeightTable) -> ProofSet {
        let mut proofs = Vec::with_capacity(self.proofs.len() * other.proofs.len());
        for a in &self.proofs {
            for b in &other.proofs {
                if let Some(p) = a.union(b, weights) {
                    proofs.push(p);
                }
            }
        }
        ProofSet::from_proofs(proofs, self.k.or(other.k), weights)
    }
}

/// Which semiring an evaluation runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemiringSpec {
    Boolean,
    MaxMin,
    AddMultProb,
    /// `None` means unbounded retention (exact over all proofs).
    TopKProofs(Option<usize>),
    TopKProofsGrad(Option<usize>),
}

impl SemiringSpec {
    pub fn is_proof_based(&self) -> bool {
        matches!(self, SemiringSpec::TopKProofs(_) | SemiringSpec::TopKProofsGrad(_))
    }

    pub fn wants_gradients(&self) -> bool {
        matches!(self, SemiringSpec::TopKProofsGrad(_))
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            SemiringSpec::TopKProofs(k) | SemiringSpec::TopKProofsGrad(k) => *k,
            _ => None,
        }
    }
}

/// A provenance tag attached to a derived tuple.
#[derive(Debug, Clone, PartialEq)]
pub enum Tag {
    Bool(bool),
    Scalar(f64),
    Proofs(ProofSet),
}

impl Tag {
    /// Canonical equality used for fixpoint detection: scalars compare with
    /// absolute tolerance 1e-12, proof sets after absorption/pruning.
    pub fn converged(&self, other: &Tag) -> bool {
        match (self, other) {
            (Tag::Bool(a), Tag::Bool(b)) => a == b,
            (Tag::Scalar(a), Tag::Scalar(b)) => (a - b).abs() <= 1e-12,
            (Tag::Proofs(a), Tag::Proofs(b)) => a.proofs() == b.proofs(),
            _ => false,
        }
    }
}

pub fn sr_zero(spec: SemiringSpec) -> Tag {
    match spec {
        SemiringSpec::Boolean => Tag::Bool(false),
        SemiringSpec::MaxMin | SemiringSpec::AddMultProb => Tag::Scalar(0.0),
        SemiringSpec::TopKProofs(k) | SemiringSpec::TopKProofsGrad(k) => Tag::Proofs(ProofSet::empty(k)),
    }
}

pub fn sr_one(spec: SemiringSpec) -> Tag {
    match spec {
        SemiringSpec::Boolean => Tag::Bool(true),
        SemiringSpec::MaxMin | SemiringSpec::AddMultProb => Tag::Scalar(1.0),
        SemiringSpec::TopKProofs(k) | SemiringSpec::TopKProofsGrad(k) => Tag::Proofs(ProofSet::one(k)),
    }
}

pub fn sr_add(spec: SemiringSpec, a: &Tag, b: &Tag, weights: &WeightTable) -> Tag {
    match (spec, a, b) {
        (SemiringSpec::Boolean, Tag::Bool(x), Tag::Bool(y)) => Tag::Bool(*x || *y),
        (SemiringSpec::MaxMin, Tag::Scalar(x), Tag::Scalar(y)) => Tag::Scalar(x.max(*y)),
        (SemiringSpec::AddMultProb, Tag::Scalar(x), Tag::Scalar(y)) => Tag::Scalar(x + y - x * y),
        (SemiringSpec::TopKProofs(_) | SemiringSpec::TopKProofsGrad(_), Tag::Proofs(x), Tag::Proofs(y)) => {
            Tag::Proofs(x.add(y, weights))
        }
        _ => panic!("tag/semiring mismatch in sr_add"),
    }
}

pub fn sr_mul(spec: SemiringSpec, a: &Tag, b: &Tag, weights: &WeightTable) -> Tag {
    match (spec, a, b) {
        (SemiringSpec::Boolean, Tag::Bool(x), Tag::Bool(y)) => Tag::Bool(*x && *y),
        (SemiringSpec::MaxMin, Tag::Scalar(x), Tag::Scalar(y)) => Tag::Scalar(x.min(*y)),
        (SemiringSpec::AddMultProb, Tag::Scalar(x), Tag::Scalar(y)) => Tag::Scalar(x * y),
        (SemiringSpec::TopKProofs(_) | SemiringSpec::TopKProofsGrad(_), Tag::Proofs(x), Tag::Proofs(y)) => {
            Tag::Proofs(x.mul(y, weights))
        }
        _ => panic!("tag/semiring mismatch in sr_mul"),
    }
}

/// A probability with its exact partial derivatives with respect to the
/// probabilities of the involved facts.
#[derive(Debug, Clone, PartialEq)]
pub struct GradProb {
    pub value: f64,
    pub grad: BTreeMap<FactId, f64>,
}

impl GradProb {
    pub fn constant(value: f64) -> Self {
        GradProb { value, grad: BTreeMap::new() }
    }
}

/// Hard cap on the number of enumerated variables (independent facts plus
/// involved exclusive groups): 2^24 world skeletons worst case.
pub const WMC_VAR_CAP: usize = 24;

enum WmcVar {
    /// One independent fact: true with probability p.
    Independent { fact: FactId, p: f64 },
    /// One annotated-disjunction group: choose an involved member, or "none
    /// of the involved members" with the leftover mass.
    Group { members: Vec<(FactId, f64)>, other: f64 },
}

fn involved_vars(proofs: &ProofSet, weights: &WeightTable) -> Result<Vec<WmcVar>, ProvenanceError> {
    use std::collections::BTreeSet;
    let mut independents: BTreeSet<FactId> = BTreeSet::new();
    let mut ad_members: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for proof in proofs.proofs() {
        for &f in proof.facts() {
            if weights.is_ad(f.group) {
                ad_members.entry(f.group).or_default().insert(f.member);
            } else {
                independents.insert(f);
            }
        }
    }
    let mut vars = Vec::new();
    for fact in independents {
        vars.push(WmcVar::Independent { fact, p: weights.prob(fact)? });
    }
    for (group, involved) in ad_members {
        let members: Vec<(FactId, f64)> = involved
            .iter()
            .map(|&m| {
                let id = FactId { group, member: m };
                weights.prob(id).map(|p| (id, p))
            })
            .collect::<Result<_, _>>()?;
        // Mass of the uninvolved members; fixed when an involved member's
        // probability is perturbed, so partials stay well-defined.
        let all = weights.probs.get(group).ok_or(ProvenanceError::MissingWeight(FactId { group, member: 0 }))?;
        let other: f64 = all
            .iter()
            .enumerate()
            .filter(|(m, _)| !involved.contains(m))
            .map(|(_, p)| *p)
            .sum();
        vars.push(WmcVar::Group { members, other });
    }
    if vars.len() > WMC_VAR_CAP {
        return Err(ProvenanceError::TooManyFacts { count: vars.len(), cap: WMC_VAR_CAP });
    }
    Ok(vars)
}

/// Exact probability that at least one retained proof holds, by enumerating
/// joint assignments of the involved variables.
pub fn wmc(proofs: &ProofSet, weights: &WeightTable) -> Result<f64, ProvenanceError> {
    Ok(wmc_grad_inner(proofs, weights, false)?.value)
}

/// `wmc` plus exact partials with respect to each involved fact probability.
/// For independent facts this is `P(q | f) - P(q | not f)`; for exclusive
/// group members it is the derivative holding sibling probabilities fixed.
pub fn wmc_grad(proofs: &ProofSet, weights: &WeightTable) -> Result<GradProb, ProvenanceError> {
    wmc_grad_inner(proofs, weights, true)
}

fn wmc_grad_inner(
    proofs: &ProofSet,
    weights: &WeightTable,
    want_grad: bool,
) -> Result<GradProb, ProvenanceError> {
    let vars = involved_vars(proofs, weights)?;
    if proofs.is_empty() {
        return Ok(GradProb::constant(0.0));
    }
    // Index facts for bitmask satisfaction checks.
    let mut fact_index: BTreeMap<FactId, usize> = BTreeMap::new();
    for proof in proofs.proofs() {
        for &f in proof.facts() {
            let next = fact_index.len();
            fact_index.entry(f).or_insert(next);
        }
    }
    let proof_masks: Vec<u64> = proofs
        .proofs()
        .iter()
        .map(|p| p.facts().iter().fold(0u64, |m, f| m | (1 << fact_index[f])))
        .collect();

    // Per-variable branches: (fact bits set, probability factor, fact whose
    // probability this branch's weight is linear in, sign of that linearity).
    struct Branch {
        bits: u64,
        p: f64,
        grad_target: Option<(FactId, f64)>,
    }
    let var_branches: Vec<Vec<Branch>> = vars
        .iter()
        .map(|v| match v {
            WmcVar::Independent { fact, p } => vec![
                Branch { bits: 1 << fact_index[fact], p: *p, grad_target: Some((*fact, 1.0)) },
                Branch { bits: 0, p: 1.0 - p, grad_target: Some((*fact, -1.0)) },
            ],
            WmcVar::Group { members, other, .. } => {
                let mut branches: Vec<Branch> = members
                    .iter()
                    .map(|(id, p)| Branch {
                        bits: 1 << fact_index[id],
                        p: *p,
                        grad_target: Some((*id, 1.0)),
                    })
                    .collect();
                branches.push(Branch { bits: 0, p: *other, grad_target: None });
                branches
            }
        })
        .collect();

    let mut grad: BTreeMap<FactId, f64> = BTreeMap::new();
    if want_grad {
        for (&f, _) in &fact_index {
            grad.insert(f, 0.0);
        }
    }

    // Depth-first enumeration tracking the product of nonzero factors and a
    // zero count, so each world yields every partial in one pass.
    struct Frame<'a> {
        branches: &'a [Vec<Branch>],
        masks: &'a [u64],
        want_grad: bool,
        value: f64,
        grad: BTreeMap<FactId, f64>,
    }
    fn descend(
        fr: &mut Frame<'_>,
        depth: usize,
        bits: u64,
        prod_nonzero: f64,
        zeros: u32,
        zero_target: Option<(FactId, f64)>,
        targets: &mut Vec<(FactId, f64, f64)>, // fact, sign, factor
    ) {
        if depth == fr.branches.len() {
            let sat = fr.masks.iter().any(|m| bits & m == *m);
            if !sat {
                return;
            }
            if zeros == 0 {
                fr.value += prod_nonzero;
            }
            if fr.want_grad {
                match zeros {
                    0 => {
                        for &(f, sign, factor) in targets.iter() {
                            *fr.grad.get_mut(&f).unwrap() += sign * prod_nonzero / factor;
                        }
                    }
                    1 => {
                        if let Some((f, sign)) = zero_target {
                            *fr.grad.get_mut(&f).unwrap() += sign * prod_nonzero;
                        }
                    }
                    _ => {}
                }
            }
            return;
        }
        for b in &fr.branches[depth] {
            if b.p == 0.0 {
                if zeros >= 1 {
                    // Two zero factors: neither the value nor any first-order
                    // partial gets a contribution.
                    continue;
                }
                descend(fr, depth + 1, bits | b.bits, prod_nonzero, zeros + 1, b.grad_target, targets);
            } else {
                let pushed = if let Some((f, sign)) = b.grad_target {
                    targets.push((f, sign, b.p));
                    true
                } else {
                    false
                };
                descend(fr, depth + 1, bits | b.bits, prod_nonzero * b.p, zeros, zero_target, targets);
                if pushed {
                    targets.pop();
                }
            }
        }
    }

    let mut fr = Frame { branches: &var_branches, masks: &proof_masks, want_grad, value: 0.0, grad };
    let mut targets = Vec::new();
    descend(&mut fr, 0, 0, 1.0, 0, None, &mut targets);
    let value = fr.value;

    let grad = if want_grad { fr.grad } else { BTreeMap::new() };
    // Snap float-summation noise back into [0,1]; genuine excursions (from
    // deliberately perturbed, unnormalized weights) pass through untouched.
    let value = if value < 0.0 && value > -1e-9 {
        0.0
    } else if value > 1.0 && value < 1.0 + 1e-9 {
        1.0
    } else {
        value
    };
    Ok(GradProb { value, grad })
}
