//! Feature vectors over the unit box: tensor-product wavelet bases (coupled),
//! per-dimension wavelet bases (decoupled), and the Fourier baseline, plus the
//! mutable [`BasisSet`] that adaptive methods grow.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::wavelet::{WaveletAtom, ONE_BELOW};

/// Default cap on the number of functions a builder will materialize.
pub const DEFAULT_SIZE_CAP: usize = 1_000_000;

/// Stable identifier of a basis function. Ids are append-only and never
/// reused after structural edits, so logs stay interpretable across splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionId(pub u64);

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Structural identity of a basis function, independent of its id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionForm {
    /// Product of atoms over pairwise-distinct dimensions, sorted by
    /// dimension. Dimensions without an atom contribute factor 1.
    WaveletProduct { atoms: Vec<WaveletAtom> },
    /// `cos(pi * c . s)` with one integer coefficient per dimension.
    Fourier { coeffs: Vec<u32> },
}

impl FunctionForm {
    pub fn wavelet_product(mut atoms: Vec<WaveletAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidConfig("wavelet product needs at least one atom".into()));
        }
        atoms.sort_by_key(|a| a.dim);
        if atoms.windows(2).any(|w| w[0].dim == w[1].dim) {
            return Err(Error::InvalidConfig(
                "wavelet product atoms must have pairwise-distinct dimensions".into(),
            ));
        }
        Ok(FunctionForm::WaveletProduct { atoms })
    }

    pub fn fourier(coeffs: Vec<u32>) -> Self {
        FunctionForm::Fourier { coeffs }
    }

    pub fn is_wavelet(&self) -> bool {
        matches!(self, FunctionForm::WaveletProduct { .. })
    }
}

// Wavelet features use the half-open top boundary so that the order-0 basis
// tiles [0, 1] with the dyadic partition; the top tile absorbs x = 1.
#[inline]
fn clamp_wavelet(x: f64) -> f64 {
    x.clamp(0.0, ONE_BELOW)
}

#[inline]
fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// A single feature: a wavelet product or a Fourier term, with its support
/// box and a stable id.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    id: FunctionId,
    form: FunctionForm,
    /// Per-dimension support interval; the whole domain for Fourier terms
    /// and for dimensions without an atom.
    support_box: Vec<(f64, f64)>,
}

impl BasisFunction {
    fn new(id: FunctionId, form: FunctionForm, d: usize) -> Self {
        let mut support_box = vec![(0.0, 1.0); d];
        if let FunctionForm::WaveletProduct { atoms } = &form {
            for a in atoms {
                support_box[a.dim] = a.support();
            }
        }
        BasisFunction { id, form, support_box }
    }

    pub fn id(&self) -> FunctionId {
        self.id
    }

    pub fn form(&self) -> &FunctionForm {
        &self.form
    }

    pub fn is_wavelet(&self) -> bool {
        self.form.is_wavelet()
    }

    pub fn atoms(&self) -> Option<&[WaveletAtom]> {
        match &self.form {
            FunctionForm::WaveletProduct { atoms } => Some(atoms),
            FunctionForm::Fourier { .. } => None,
        }
    }

    pub fn support_box(&self) -> &[(f64, f64)] {
        &self.support_box
    }

    /// Dense evaluation at a state in `[0, 1]^d` (coordinates are clamped).
    pub fn value(&self, s: &[f64]) -> f64 {
        match &self.form {
            FunctionForm::WaveletProduct { atoms } => atoms
                .iter()
                .map(|a| a.eval(clamp_wavelet(s[a.dim])))
                .product(),
            FunctionForm::Fourier { coeffs } => {
                let dot: f64 = coeffs
                    .iter()
                    .zip(s)
                    .map(|(&c, &x)| c as f64 * clamp_unit(x))
                    .sum();
                (std::f64::consts::PI * dot).cos()
            }
        }
    }

    /// Volume of the region of `[0, 1]^d` where the function is nonzero.
    /// Only defined for wavelet-kind functions.
    pub fn support_volume(&self) -> Result<f64> {
        match &self.form {
            FunctionForm::WaveletProduct { atoms } => {
                Ok(atoms.iter().map(|a| a.support_length_clipped()).product())
            }
            FunctionForm::Fourier { .. } => Err(Error::NotWaveletKind(self.id.0)),
        }
    }

    /// Per-feature learning-rate scale: `1/||c||_2` for Fourier terms (1 for
    /// the constant term), 1 for wavelet products.
    pub fn lr_scale(&self) -> f64 {
        match &self.form {
            FunctionForm::WaveletProduct { .. } => 1.0,
            FunctionForm::Fourier { coeffs } => {
                let norm = coeffs.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
                if norm == 0.0 {
                    1.0
                } else {
                    1.0 / norm
                }
            }
        }
    }

    #[inline]
    fn in_support_box(&self, s: &[f64]) -> bool {
        self.support_box.iter().zip(s).all(|(&(lo, hi), &x)| {
            let x = clamp_wavelet(x);
            x >= lo && x <= hi
        })
    }
}

/// Ordered collection of basis functions with per-action weight and trace
/// vectors. Single-writer: one agent owns and mutates it.
#[derive(Debug, Clone)]
pub struct BasisSet {
    d: usize,
    n_actions: usize,
    functions: Vec<BasisFunction>,
    /// `weights[action][function_index]`
    weights: Vec<Vec<f64>>,
    /// `traces[action][function_index]`
    traces: Vec<Vec<f64>>,
    lr_scales: Vec<f64>,
    index_of: HashMap<FunctionId, usize>,
    next_id: u64,
}

fn checked_count(base: usize, exp: u32, cap: usize) -> Result<usize> {
    let mut total: u128 = 1;
    for _ in 0..exp {
        total = total.saturating_mul(base as u128);
        if total > cap as u128 {
            return Err(Error::BasisTooLarge { requested: total, cap });
        }
    }
    Ok(total as usize)
}

impl BasisSet {
    fn empty(d: usize, n_actions: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("state dimension must be at least 1".into()));
        }
        if n_actions == 0 {
            return Err(Error::InvalidConfig("need at least one action".into()));
        }
        Ok(BasisSet {
            d,
            n_actions,
            functions: Vec::new(),
            weights: vec![Vec::new(); n_actions],
            traces: vec![Vec::new(); n_actions],
            lr_scales: Vec::new(),
            index_of: HashMap::new(),
            next_id: 0,
        })
    }

    #[cfg(test)]
    pub(crate) fn empty_for_tests(d: usize, n_actions: usize) -> Self {
        Self::empty(d, n_actions).unwrap()
    }

    /// Per-dimension atoms at the given order and scale: translations
    /// `-n <= k < 2^j`, giving `n + 2^j` atoms per dimension.
    fn dimension_atoms(dim: usize, order: u32, scale: u32) -> Result<Vec<WaveletAtom>> {
        (-(order as i64)..(1i64 << scale))
            .map(|k| WaveletAtom::new(order, scale, k, dim))
            .collect()
    }

    /// Full tensor-product basis: every combination of one atom per
    /// dimension, `(n + 2^j)^d` functions in total.
    pub fn fixed_coupled(d: usize, order: u32, scale: u32, n_actions: usize) -> Result<Self> {
        Self::fixed_coupled_with_cap(d, order, scale, n_actions, DEFAULT_SIZE_CAP)
    }

    pub fn fixed_coupled_with_cap(
        d: usize,
        order: u32,
        scale: u32,
        n_actions: usize,
        cap: usize,
    ) -> Result<Self> {
        let mut set = Self::empty(d, n_actions)?;
        let per_dim = (order as u64 + (1u64 << scale)) as usize;
        checked_count(per_dim, d as u32, cap)?;
        let columns: Vec<Vec<WaveletAtom>> = (0..d)
            .map(|dim| Self::dimension_atoms(dim, order, scale))
            .collect::<Result<_>>()?;
        // odometer over one atom index per dimension, last dimension fastest
        let mut picks = vec![0usize; d];
        loop {
            let atoms: Vec<WaveletAtom> = picks.iter().enumerate().map(|(dim, &i)| columns[dim][i]).collect();
            set.push_function(FunctionForm::wavelet_product(atoms)?);
            let mut dim = d;
            loop {
                if dim == 0 {
                    return Ok(set);
                }
                dim -= 1;
                picks[dim] += 1;
                if picks[dim] < per_dim {
                    break;
                }
                picks[dim] = 0;
            }
        }
    }

    /// Decoupled basis: one function per single atom, `(n + 2^j) * d`
    /// functions, no cross-dimension products.
    pub fn decoupled(d: usize, order: u32, scale: u32, n_actions: usize) -> Result<Self> {
        let mut set = Self::empty(d, n_actions)?;
        for dim in 0..d {
            for atom in Self::dimension_atoms(dim, order, scale)? {
                set.push_function(FunctionForm::wavelet_product(vec![atom])?);
            }
        }
        Ok(set)
    }

    /// Fourier basis of the given order: all `(order + 1)^d` coefficient
    /// vectors with entries in `[0, order]`.
    pub fn fourier(d: usize, order: u32, n_actions: usize) -> Result<Self> {
        Self::fourier_with_cap(d, order, n_actions, DEFAULT_SIZE_CAP)
    }

    pub fn fourier_with_cap(d: usize, order: u32, n_actions: usize, cap: usize) -> Result<Self> {
        let mut set = Self::empty(d, n_actions)?;
        checked_count(order as usize + 1, d as u32, cap)?;
        let mut coeffs = vec![0u32; d];
        loop {
            set.push_function(FunctionForm::fourier(coeffs.clone()));
            let mut dim = d;
            loop {
                if dim == 0 {
                    return Ok(set);
                }
                dim -= 1;
                coeffs[dim] += 1;
                if coeffs[dim] <= order {
                    break;
                }
                coeffs[dim] = 0;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn function(&self, id: FunctionId) -> Option<&BasisFunction> {
        self.index_of.get(&id).map(|&i| &self.functions[i])
    }

    pub fn index_of(&self, id: FunctionId) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    /// Finds a function structurally identical to `form`, if present.
    pub fn find_form(&self, form: &FunctionForm) -> Option<FunctionId> {
        self.functions.iter().find(|f| &f.form == form).map(|f| f.id)
    }

    pub fn weights(&self, action: usize) -> &[f64] {
        &self.weights[action]
    }

    pub fn weights_mut(&mut self, action: usize) -> &mut [f64] {
        &mut self.weights[action]
    }

    pub fn traces(&self, action: usize) -> &[f64] {
        &self.traces[action]
    }

    pub fn traces_mut(&mut self, action: usize) -> &mut [f64] {
        &mut self.traces[action]
    }

    pub fn lr_scales(&self) -> &[f64] {
        &self.lr_scales
    }

    pub fn reset_traces(&mut self) {
        for tr in &mut self.traces {
            tr.fill(0.0);
        }
    }

    pub fn decay_traces(&mut self, factor: f64) {
        for tr in &mut self.traces {
            for t in tr.iter_mut() {
                *t *= factor;
            }
        }
    }

    /// Appends a function with zero weights and traces, returning its id.
    pub fn push_function(&mut self, form: FunctionForm) -> FunctionId {
        let zeros = vec![0.0; self.n_actions];
        self.push_function_weighted(form, &zeros, &zeros)
    }

    /// Appends a function with the given per-action weight and trace values.
    pub fn push_function_weighted(
        &mut self,
        form: FunctionForm,
        weights: &[f64],
        traces: &[f64],
    ) -> FunctionId {
        assert_eq!(weights.len(), self.n_actions);
        assert_eq!(traces.len(), self.n_actions);
        let id = FunctionId(self.next_id);
        self.next_id += 1;
        let f = BasisFunction::new(id, form, self.d);
        self.lr_scales.push(f.lr_scale());
        self.functions.push(f);
        for (a, w) in weights.iter().enumerate() {
            self.weights[a].push(*w);
        }
        for (a, t) in traces.iter().enumerate() {
            self.traces[a].push(*t);
        }
        self.index_of.insert(id, self.functions.len() - 1);
        id
    }

    /// Adds the given weights and traces into an existing function
    /// (deduplicated insert after a split collision).
    pub fn merge_into(&mut self, id: FunctionId, weights: &[f64], traces: &[f64]) -> Result<()> {
        let idx = self.index_of(id).ok_or(Error::UnknownFunction(id.0))?;
        for a in 0..self.n_actions {
            self.weights[a][idx] += weights[a];
            self.traces[a][idx] += traces[a];
        }
        Ok(())
    }

    /// Removes a function, returning its per-action `(weights, traces)`.
    pub fn remove_function(&mut self, id: FunctionId) -> Result<(Vec<f64>, Vec<f64>)> {
        let idx = self.index_of(id).ok_or(Error::UnknownFunction(id.0))?;
        let w = self.weights.iter_mut().map(|row| row.swap_remove(idx)).collect();
        let t = self.traces.iter_mut().map(|row| row.swap_remove(idx)).collect();
        self.functions.swap_remove(idx);
        self.lr_scales.swap_remove(idx);
        self.index_of.remove(&id);
        if idx < self.functions.len() {
            self.index_of.insert(self.functions[idx].id, idx);
        }
        Ok((w, t))
    }

    /// Sparse evaluation: index/value pairs of exactly the functions that are
    /// nonzero at `s` (Fourier terms are always included).
    pub fn activations_into(&self, s: &[f64], out: &mut Vec<(usize, f64)>) -> Result<()> {
        if s.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: s.len() });
        }
        out.clear();
        for (i, f) in self.functions.iter().enumerate() {
            match &f.form {
                FunctionForm::Fourier { .. } => out.push((i, f.value(s))),
                FunctionForm::WaveletProduct { .. } => {
                    if f.in_support_box(s) {
                        let v = f.value(s);
                        if v != 0.0 {
                            out.push((i, v));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn activations(&self, s: &[f64]) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        self.activations_into(s, &mut out)?;
        Ok(out)
    }

    /// Sparse evaluation keyed by stable function id.
    pub fn active_features(&self, s: &[f64]) -> Result<Vec<(FunctionId, f64)>> {
        Ok(self
            .activations(s)?
            .into_iter()
            .map(|(i, v)| (self.functions[i].id, v))
            .collect())
    }

    /// Checks the structural invariant relating functions, weights and
    /// traces; used by tests and after structural edits in debug builds.
    pub fn check_consistency(&self) {
        let n = self.functions.len();
        assert_eq!(self.lr_scales.len(), n);
        for a in 0..self.n_actions {
            assert_eq!(self.weights[a].len(), n);
            assert_eq!(self.traces[a].len(), n);
        }
        assert_eq!(self.index_of.len(), n);
        for (i, f) in self.functions.iter().enumerate() {
            assert_eq!(self.index_of[&f.id], i);
        }
    }

    // ---- serialization -----------------------------------------------

    /// Writes the basis in a line-oriented text format: a header, then one
    /// function per line with its kind, structure and per-action weights.
    pub fn save_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# wavebasis-basis v1 d={} actions={}", self.d, self.n_actions)?;
        for (i, f) in self.functions.iter().enumerate() {
            match &f.form {
                FunctionForm::WaveletProduct { atoms } => {
                    let atoms_s: Vec<String> = atoms
                        .iter()
                        .map(|a| format!("({},{},{},{})", a.order, a.scale, a.translation, a.dim))
                        .collect();
                    write!(w, "wavelet id={} atoms={}", f.id, atoms_s.join(";"))?;
                }
                FunctionForm::Fourier { coeffs } => {
                    let cs: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                    write!(w, "fourier id={} coeffs={}", f.id, cs.join(","))?;
                }
            }
            let ws: Vec<String> = (0..self.n_actions).map(|a| self.weights[a][i].to_string()).collect();
            writeln!(w, " w={}", ws.join(","))?;
        }
        Ok(())
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save_to(&mut file)
    }

    /// Reads a basis saved by [`save_to`](Self::save_to). Traces are
    /// transient and come back zeroed.
    pub fn load_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::BasisParse("empty file".into()))??;
        let (d, n_actions) = parse_header(&header)?;
        let mut set = Self::empty(d, n_actions)?;
        let mut max_id = None::<u64>;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, form, weights) = parse_function_line(&line, d, n_actions)?;
            if set.index_of.contains_key(&FunctionId(id)) {
                return Err(Error::BasisParse(format!("duplicate function id {id}")));
            }
            let f = BasisFunction::new(FunctionId(id), form, d);
            set.lr_scales.push(f.lr_scale());
            set.functions.push(f);
            for (a, w) in weights.iter().enumerate() {
                set.weights[a].push(*w);
                set.traces[a].push(0.0);
            }
            set.index_of.insert(FunctionId(id), set.functions.len() - 1);
            max_id = Some(max_id.map_or(id, |m: u64| m.max(id)));
        }
        set.next_id = max_id.map_or(0, |m| m + 1);
        Ok(set)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::load_from(file)
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = || Error::BasisParse(format!("bad header line {line:?}"));
    if !line.starts_with("# wavebasis-basis v1") {
        return Err(bad());
    }
    let mut d = None;
    let mut actions = None;
    for tok in line.split_whitespace() {
        if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("actions=") {
            actions = v.parse().ok();
        }
    }
    match (d, actions) {
        (Some(d), Some(a)) => Ok((d, a)),
        _ => Err(bad()),
    }
}

fn parse_function_line(line: &str, d: usize, n_actions: usize) -> Result<(u64, FunctionForm, Vec<f64>)> {
    let bad = |why: &str| Error::BasisParse(format!("{why} in line {line:?}"));
    let mut kind = None;
    let mut id = None;
    let mut atoms_field = None;
    let mut coeffs_field = None;
    let mut weights_field = None;
    for (i, tok) in line.split_whitespace().enumerate() {
        if i == 0 {
            kind = Some(tok.to_string());
        } else if let Some(v) = tok.strip_prefix("id=") {
            id = v.parse::<u64>().ok();
        } else if let Some(v) = tok.strip_prefix("atoms=") {
            atoms_field = Some(v.to_string());
        } else if let Some(v) = tok.strip_prefix("coeffs=") {
            coeffs_field = Some(v.to_string());
        } else if let Some(v) = tok.strip_prefix("w=") {
            weights_field = Some(v.to_string());
        }
    }
    let id = id.ok_or_else(|| bad("missing id"))?;
    let weights: Vec<f64> = weights_field
        .ok_or_else(|| bad("missing weights"))?
        .split(',')
        .map(|t| t.parse::<f64>().map_err(|_| bad("bad weight")))
        .collect::<Result<_>>()?;
    if weights.len() != n_actions {
        return Err(bad("weight count does not match action count"));
    }
    let form = match kind.as_deref() {
        Some("wavelet") => {
            let field = atoms_field.ok_or_else(|| bad("missing atoms"))?;
            let mut atoms = Vec::new();
            for part in field.split(';') {
                let inner = part
                    .strip_prefix('(')
                    .and_then(|p| p.strip_suffix(')'))
                    .ok_or_else(|| bad("bad atom tuple"))?;
                let nums: Vec<&str> = inner.split(',').collect();
                if nums.len() != 4 {
                    return Err(bad("atom tuple needs 4 fields"));
                }
                let order = nums[0].parse().map_err(|_| bad("bad atom order"))?;
                let scale = nums[1].parse().map_err(|_| bad("bad atom scale"))?;
                let translation = nums[2].parse().map_err(|_| bad("bad atom translation"))?;
                let dim: usize = nums[3].parse().map_err(|_| bad("bad atom dim"))?;
                if dim >= d {
                    return Err(bad("atom dimension out of range"));
                }
                atoms.push(WaveletAtom::new(order, scale, translation, dim)?);
            }
            FunctionForm::wavelet_product(atoms)?
        }
        Some("fourier") => {
            let field = coeffs_field.ok_or_else(|| bad("missing coeffs"))?;
            let coeffs: Vec<u32> = field
                .split(',')
                .map(|t| t.parse::<u32>().map_err(|_| bad("bad coefficient")))
                .collect::<Result<_>>()?;
            if coeffs.len() != d {
                return Err(bad("coefficient count does not match dimension"));
            }
            FunctionForm::fourier(coeffs)
        }
        _ => return Err(bad("unknown function kind")),
    };
    Ok((id, form, weights))
}
