//! Structural edits to a [`BasisSet`]: AWR splitting, IBFDD conjunction
//! discovery, and the MAWB controller that alternates the two. Every edit
//! leaves the represented value function unchanged at the instant it is made:
//! splits redistribute weight through the refinement mask, combines enter
//! with zero weight.

use std::collections::{HashMap, HashSet};

use crate::basis::{BasisSet, FunctionForm, FunctionId};
use crate::error::{Error, Result};
use crate::relevance::RelevanceStats;
use crate::wavelet::refinement_mask;

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    /// Split tolerance `tau_s`; a feature is split when its criterion `C`
    /// exceeds this. Infinity disables splitting.
    pub tau_split: f64,
    /// Combine tolerance `tau_c`; a candidate conjunction is added when its
    /// `|rho|` exceeds this. Infinity disables combining.
    pub tau_combine: f64,
    /// Relevance decay `eps`.
    pub eps: f64,
    /// Steps between structural-change checks.
    pub check_interval: u64,
    /// Cap on the scale `j` any atom may reach.
    pub max_scale: u32,
    /// Cap on the basis size.
    pub max_features: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            tau_split: f64::INFINITY,
            tau_combine: f64::INFINITY,
            eps: 0.99,
            check_interval: 100,
            max_scale: 10,
            max_features: 1000,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidDecay(self.eps));
        }
        if self.tau_split < 0.0 || self.tau_combine < 0.0 {
            return Err(Error::InvalidConfig("thresholds must be nonnegative".into()));
        }
        if self.check_interval == 0 {
            return Err(Error::InvalidConfig("check_interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which structural mechanism runs on top of the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveMode {
    /// No statistics, no edits.
    Fixed,
    /// Split-only refinement over a full basis.
    Awr,
    /// Combine-only dependency discovery over a decoupled basis.
    Ibfdd,
    /// Alternation of both.
    Mawb,
}

#[derive(Debug, Clone)]
pub enum EditKind {
    Split {
        parent: FunctionId,
        dim: usize,
        children: Vec<FunctionId>,
        criterion: f64,
    },
    Combine {
        parents: (FunctionId, FunctionId),
        added: FunctionId,
        relevance: f64,
    },
}

#[derive(Debug, Clone)]
pub struct EditRecord {
    pub step: u64,
    pub episode: u64,
    pub kind: EditKind,
    pub basis_size_after: usize,
}

impl EditRecord {
    /// CSV row: step,episode,kind,detail,value,basis_size_after
    pub fn csv_row(&self) -> String {
        match &self.kind {
            EditKind::Split { parent, dim, children, criterion } => {
                let kids: Vec<String> = children.iter().map(|c| c.to_string()).collect();
                format!(
                    "{},{},split,parent={} dim={} children={},{},{}",
                    self.step,
                    self.episode,
                    parent,
                    dim,
                    kids.join("|"),
                    criterion,
                    self.basis_size_after
                )
            }
            EditKind::Combine { parents, added, relevance } => format!(
                "{},{},combine,parents={}|{} added={},{},{}",
                self.step, self.episode, parents.0, parents.1, added, relevance, self.basis_size_after
            ),
        }
    }
}

/// Replaces the atom of function `id` in dimension `dim` by its children at
/// the next scale, redistributing weights and traces through the refinement
/// mask so the represented value function is unchanged on the unit box.
///
/// Children whose support does not meet the interior of [0, 1] are zero on
/// the whole domain and are discarded. If a child's form already exists in
/// the basis, the weight is merged into it instead of inserting a duplicate.
/// Returns the ids carrying the redistribution, in mask order.
pub fn split_feature(
    basis: &mut BasisSet,
    id: FunctionId,
    dim: usize,
    max_scale: u32,
) -> Result<Vec<FunctionId>> {
    let f = basis.function(id).ok_or(Error::UnknownFunction(id.0))?;
    let atoms = f.atoms().ok_or(Error::NotWaveletKind(id.0))?.to_vec();
    let pos = atoms
        .iter()
        .position(|a| a.dim == dim)
        .ok_or(Error::NoAtomInDimension { id: id.0, dim })?;
    let target = atoms[pos];
    if target.scale >= max_scale {
        return Err(Error::ScaleCapReached { id: id.0, dim, max_scale });
    }
    let mask = refinement_mask(target.order)?;
    let (weights, traces) = basis.remove_function(id)?;
    let mut new_ids = Vec::new();
    for (coeff, child) in mask.coeffs.iter().zip(target.children()) {
        let (lo, hi) = child.support();
        if hi <= 0.0 || lo >= 1.0 {
            continue;
        }
        let mut child_atoms = atoms.clone();
        child_atoms[pos] = child;
        let form = FunctionForm::wavelet_product(child_atoms)?;
        let w: Vec<f64> = weights.iter().map(|x| x * coeff).collect();
        let t: Vec<f64> = traces.iter().map(|x| x * coeff).collect();
        match basis.find_form(&form) {
            Some(existing) => {
                basis.merge_into(existing, &w, &t)?;
                new_ids.push(existing);
            }
            None => new_ids.push(basis.push_function_weighted(form, &w, &t)),
        }
    }
    Ok(new_ids)
}

#[derive(Debug, Clone)]
struct Candidate {
    form: FunctionForm,
    parents: (FunctionId, FunctionId),
    stats: RelevanceStats,
}

/// Owns the relevance bookkeeping and performs structural edits between
/// environment steps. One controller per agent; never shared.
#[derive(Debug, Clone)]
pub struct AdaptiveController {
    mode: AdaptiveMode,
    config: AdaptiveConfig,
    /// Per-function stats for split decisions (AWR / MAWB).
    stats: HashMap<FunctionId, RelevanceStats>,
    /// Candidate conjunctions keyed by parent id pair (IBFDD / MAWB).
    candidates: HashMap<(FunctionId, FunctionId), Candidate>,
    /// Forms currently in the basis, to avoid proposing duplicates.
    in_basis: HashSet<FunctionForm>,
    checks: u64,
}

impl AdaptiveController {
    pub fn new(mode: AdaptiveMode, config: AdaptiveConfig, basis: &BasisSet) -> Result<Self> {
        config.validate()?;
        let mut ctrl = AdaptiveController {
            mode,
            config,
            stats: HashMap::new(),
            candidates: HashMap::new(),
            in_basis: HashSet::new(),
            checks: 0,
        };
        if ctrl.tracks_function_stats() {
            for f in basis.functions().iter().filter(|f| f.is_wavelet()) {
                let stats = ctrl.fresh_stats(f.support_volume()?);
                ctrl.stats.insert(f.id(), stats);
            }
        }
        if ctrl.tracks_candidates() {
            for f in basis.functions().iter().filter(|f| f.is_wavelet()) {
                ctrl.in_basis.insert(f.form().clone());
            }
        }
        Ok(ctrl)
    }

    pub fn mode(&self) -> AdaptiveMode {
        self.mode
    }

    pub fn config(&self) -> &AdaptiveConfig {
        &self.config
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    fn tracks_function_stats(&self) -> bool {
        matches!(self.mode, AdaptiveMode::Awr | AdaptiveMode::Mawb)
    }

    fn tracks_candidates(&self) -> bool {
        matches!(self.mode, AdaptiveMode::Ibfdd | AdaptiveMode::Mawb)
    }

    fn fresh_stats(&self, omega: f64) -> RelevanceStats {
        RelevanceStats::new(omega, self.config.eps).expect("decay validated at construction")
    }

    /// Feeds one step's TD error to the statistics of the active features and
    /// of the candidate pool, then performs at most one structural edit if
    /// this step falls on a check boundary. `active` holds (index, value)
    /// pairs as returned by [`BasisSet::activations`] for the step's state.
    pub fn on_step(
        &mut self,
        basis: &mut BasisSet,
        active: &[(usize, f64)],
        delta: f64,
        global_step: u64,
        episode: u64,
    ) -> Option<EditRecord> {
        if self.mode == AdaptiveMode::Fixed {
            return None;
        }
        self.observe(basis, active, delta);
        if global_step % self.config.check_interval != 0 {
            return None;
        }
        let check_index = self.checks;
        self.checks += 1;
        match self.mode {
            AdaptiveMode::Fixed => None,
            AdaptiveMode::Awr => self.awr_check(basis, global_step, episode),
            AdaptiveMode::Ibfdd => self.ibfdd_check(basis, global_step, episode),
            AdaptiveMode::Mawb => {
                // even checks try IBFDD first, odd checks AWR first; at most
                // one edit per check either way
                if check_index % 2 == 0 {
                    self.ibfdd_check(basis, global_step, episode)
                        .or_else(|| self.awr_check(basis, global_step, episode))
                } else {
                    self.awr_check(basis, global_step, episode)
                        .or_else(|| self.ibfdd_check(basis, global_step, episode))
                }
            }
        }
    }

    fn observe(&mut self, basis: &BasisSet, active: &[(usize, f64)], delta: f64) {
        if self.tracks_function_stats() {
            for &(idx, value) in active {
                let f = &basis.functions()[idx];
                if !f.is_wavelet() {
                    continue;
                }
                let id = f.id();
                if let Some(stats) = self.stats.get_mut(&id) {
                    stats.record(value, delta);
                } else {
                    let omega = f.support_volume().expect("wavelet kind checked");
                    let mut stats = self.fresh_stats(omega);
                    stats.record(value, delta);
                    self.stats.insert(id, stats);
                }
            }
        }
        if self.tracks_candidates() {
            self.update_candidates(basis, active, delta);
        }
    }

    fn update_candidates(&mut self, basis: &BasisSet, active: &[(usize, f64)], delta: f64) {
        for (i, &(ia, va)) in active.iter().enumerate() {
            let fa = &basis.functions()[ia];
            let Some(atoms_a) = fa.atoms() else { continue };
            for &(ib, vb) in &active[i + 1..] {
                let fb = &basis.functions()[ib];
                let Some(atoms_b) = fb.atoms() else { continue };
                if !disjoint_dims(atoms_a.iter().map(|a| a.dim), atoms_b.iter().map(|a| a.dim)) {
                    continue;
                }
                let key = ordered_pair(fa.id(), fb.id());
                if let Some(cand) = self.candidates.get_mut(&key) {
                    cand.stats.record(va * vb, delta);
                    continue;
                }
                let mut atoms = atoms_a.to_vec();
                atoms.extend_from_slice(atoms_b);
                let form = FunctionForm::wavelet_product(atoms).expect("disjoint dims checked");
                if self.in_basis.contains(&form) {
                    continue;
                }
                let omega = form_support_volume(&form);
                let mut stats = self.fresh_stats(omega);
                stats.record(va * vb, delta);
                self.candidates.insert(key, Candidate { form, parents: key, stats });
            }
        }
    }

    /// Splits the feature with the largest criterion `C` if it exceeds
    /// `tau_split` and the caps permit.
    fn awr_check(&mut self, basis: &mut BasisSet, step: u64, episode: u64) -> Option<EditRecord> {
        let mut best: Option<(FunctionId, f64)> = None;
        for (&id, stats) in &self.stats {
            let c = stats.criterion();
            match best {
                None => best = Some((id, c)),
                Some((bid, bc)) => {
                    if c > bc || (c == bc && id < bid) {
                        best = Some((id, c));
                    }
                }
            }
        }
        let (id, criterion) = best?;
        if !(criterion > self.config.tau_split) {
            return None;
        }
        let f = basis.function(id).expect("stats track live functions");
        let atoms = f.atoms().expect("stats only cover wavelet functions");
        // refine the coarsest direction first; ties break to the lowest dim
        let target = atoms.iter().min_by_key(|a| (a.scale, a.dim)).copied().expect("nonempty");
        if target.scale >= self.config.max_scale {
            log::debug!("awr: feature {id} hit scale cap {} in dim {}", self.config.max_scale, target.dim);
            return None;
        }
        let growth = target.order as usize + 1;
        if basis.len() + growth > self.config.max_features {
            log::debug!("awr: feature cap {} would be exceeded", self.config.max_features);
            return None;
        }
        let parent_form = f.form().clone();
        let children = split_feature(basis, id, target.dim, self.config.max_scale)
            .expect("preconditions checked above");
        self.after_parent_removed(id, &parent_form);
        for &child in &children {
            let cf = basis.function(child).expect("just inserted");
            self.stats
                .entry(child)
                .or_insert_with(|| {
                    RelevanceStats::new(cf.support_volume().expect("wavelet"), self.config.eps)
                        .expect("validated decay")
                });
            self.in_basis.insert(cf.form().clone());
        }
        Some(EditRecord {
            step,
            episode,
            kind: EditKind::Split { parent: id, dim: target.dim, children, criterion },
            basis_size_after: basis.len(),
        })
    }

    /// Adds the candidate conjunction with the largest `|rho|` if it exceeds
    /// `tau_combine` and the caps permit. The new feature enters with zero
    /// weight, so the value function is unchanged.
    fn ibfdd_check(&mut self, basis: &mut BasisSet, step: u64, episode: u64) -> Option<EditRecord> {
        let mut best: Option<((FunctionId, FunctionId), f64)> = None;
        for (&key, cand) in &self.candidates {
            let r = cand.stats.rho().abs();
            match best {
                None => best = Some((key, r)),
                Some((bkey, br)) => {
                    if r > br || (r == br && key < bkey) {
                        best = Some((key, r));
                    }
                }
            }
        }
        let (key, relevance) = best?;
        if !(relevance > self.config.tau_combine) {
            return None;
        }
        if basis.len() + 1 > self.config.max_features {
            log::debug!("ibfdd: feature cap {} would be exceeded", self.config.max_features);
            return None;
        }
        let cand = self.candidates.remove(&key).expect("key from iteration");
        if basis.find_form(&cand.form).is_some() {
            // already materialized through another route; drop the candidate
            return None;
        }
        let added = basis.push_function(cand.form.clone());
        if self.tracks_function_stats() {
            let omega = basis
                .function(added)
                .expect("just inserted")
                .support_volume()
                .expect("wavelet");
            self.stats.insert(added, self.fresh_stats(omega));
        }
        self.in_basis.insert(cand.form);
        Some(EditRecord {
            step,
            episode,
            kind: EditKind::Combine { parents: cand.parents, added, relevance },
            basis_size_after: basis.len(),
        })
    }

    /// Drops bookkeeping referring to a removed function.
    fn after_parent_removed(&mut self, id: FunctionId, form: &FunctionForm) {
        self.stats.remove(&id);
        self.in_basis.remove(form);
        self.candidates.retain(|&(a, b), _| a != id && b != id);
    }

    /// Sorted per-function `(id, T, rho, obs, criterion)` rows for the
    /// diagnostics dump.
    pub fn stats_rows(&self) -> Vec<(FunctionId, u64, f64, f64, f64)> {
        let mut rows: Vec<_> = self
            .stats
            .iter()
            .map(|(&id, s)| (id, s.samples(), s.rho(), s.obs(), s.criterion()))
            .collect();
        rows.sort_by_key(|r| r.0);
        rows
    }
}

fn ordered_pair(a: FunctionId, b: FunctionId) -> (FunctionId, FunctionId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn disjoint_dims(a: impl Iterator<Item = usize>, b: impl Iterator<Item = usize> + Clone) -> bool {
    for da in a {
        if b.clone().any(|db| db == da) {
            return false;
        }
    }
    true
}

fn form_support_volume(form: &FunctionForm) -> f64 {
    match form {
        FunctionForm::WaveletProduct { atoms } => {
            atoms.iter().map(|a| a.support_length_clipped()).product()
        }
        FunctionForm::Fourier { .. } => 1.0,
    }
}
