//! Implicit graph families with canonical vertex encodings.
//!
//! Every vertex is packed into a single `u128` code so that equality, hashing
//! and ordering are O(1) and BFS stays cache-friendly:
//!
//! * hypercube: one bit per coordinate,
//! * star products / products: fixed-width digits, coordinate 0 in the low
//!   bits (digit 0 is the star centre),
//! * permutahedron: the image word of the permutation, one fixed-width digit
//!   per position, values `1..=n+1`,
//! * middle layers: the characteristic vector of the subset.
//!
//! Handles are immutable and cheap to clone; a handle may carry a constraint
//! that restricts it to a projection subgraph (a face or a coset) of the base
//! family.

mod ball;
mod inversion;

pub use ball::BallView;
pub use inversion::{inversion_vector, InversionVector};

use crate::error::{Error, Result};
use crate::rng;
use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

/// Default explicit-scale cap: operations that must enumerate or materialise
/// all vertices refuse beyond this many.
pub const DEFAULT_MAX_VERTICES: u64 = 1 << 24;

/// Canonically encoded vertex. Two values are equal iff they denote the same
/// vertex of the same graph.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex(pub u128);

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vertex({:#x})", self.0)
    }
}

/// A named graph family plus parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphSpec {
    Hypercube { n: u32 },
    GeneralisedHypercube { n: u32, k: u32 },
    Permutahedron { n: u32 },
    StarProduct { n: u32, q: u32 },
    CartesianProduct { factors: Vec<GraphSpec> },
    MiddleLayers { k: u32 },
}

impl GraphSpec {
    /// Parse the CLI syntax, e.g. `hypercube:n=10`, `stars:n=10,q=2`,
    /// `product:q3^4`, `middlelayers:k=3`.
    pub fn parse(text: &str) -> Result<GraphSpec> {
        let bad = |msg: &str| Error::InvalidSpec(format!("{msg} in `{text}`"));
        let (name, rest) = text
            .split_once(':')
            .ok_or_else(|| bad("missing `family:params`"))?;
        let mut params: Vec<(&str, &str)> = Vec::new();
        if name != "product" {
            for item in rest.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                params.push((k, v));
            }
        }
        let get = |key: &str| -> Result<u32> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| bad(&format!("missing parameter `{key}`")))
                .and_then(|(_, v)| {
                    v.parse::<u32>()
                        .map_err(|_| bad(&format!("parameter `{key}` is not a number")))
                })
        };
        match name {
            "hypercube" => Ok(GraphSpec::Hypercube { n: get("n")? }),
            "genhypercube" => Ok(GraphSpec::GeneralisedHypercube { n: get("n")?, k: get("k")? }),
            "permutahedron" => Ok(GraphSpec::Permutahedron { n: get("n")? }),
            "stars" => Ok(GraphSpec::StarProduct { n: get("n")?, q: get("q")? }),
            "middlelayers" => Ok(GraphSpec::MiddleLayers { k: get("k")? }),
            "product" => {
                let mut factors = Vec::new();
                for token in rest.split(',').filter(|s| !s.is_empty()) {
                    let (head, reps) = match token.split_once('^') {
                        Some((h, r)) => (
                            h,
                            r.parse::<u32>().map_err(|_| bad("bad repetition count"))?,
                        ),
                        None => (token, 1),
                    };
                    if reps == 0 {
                        return Err(bad("repetition count must be positive"));
                    }
                    let factor = if let Some(q) = head.strip_prefix('q') {
                        let q = q.parse::<u32>().map_err(|_| bad("bad star factor"))?;
                        GraphSpec::StarProduct { n: 1, q }
                    } else if let Some(m) = head.strip_prefix('p') {
                        let m = m.parse::<u32>().map_err(|_| bad("bad permutahedron factor"))?;
                        GraphSpec::Permutahedron { n: m }
                    } else {
                        return Err(bad("factor tokens are q<leaves> or p<dim>"));
                    };
                    for _ in 0..reps {
                        factors.push(factor.clone());
                    }
                }
                if factors.is_empty() {
                    return Err(bad("product needs at least one factor"));
                }
                Ok(GraphSpec::CartesianProduct { factors })
            }
            _ => Err(bad("unknown family")),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Hypercube { n } => write!(f, "hypercube:n={n}"),
            GraphSpec::GeneralisedHypercube { n, k } => write!(f, "genhypercube:n={n},k={k}"),
            GraphSpec::Permutahedron { n } => write!(f, "permutahedron:n={n}"),
            GraphSpec::StarProduct { n, q } => write!(f, "stars:n={n},q={q}"),
            GraphSpec::MiddleLayers { k } => write!(f, "middlelayers:k={k}"),
            GraphSpec::CartesianProduct { factors } => {
                write!(f, "product:")?;
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    match factor {
                        GraphSpec::StarProduct { n: 1, q } => write!(f, "q{q}")?,
                        GraphSpec::Permutahedron { n } => write!(f, "p{n}")?,
                        other => write!(f, "<{other}>")?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Restriction of a handle to a projection subgraph.
#[derive(Clone, Debug)]
pub(crate) enum ConstraintKind {
    /// Digit-level: coordinate `i` frozen to the anchor's digit.
    FrozenCoords(Box<[bool]>),
    /// Permutahedron: only these adjacent-swap positions may be used.
    AllowedSwaps(Box<[bool]>),
    /// The whole component is frozen to the anchor.
    Whole,
    /// Cartesian product: per-factor sub-constraints.
    PerFactor(Vec<Option<ConstraintKind>>),
}

#[derive(Clone, Debug)]
pub(crate) struct Constraint {
    pub(crate) anchor: Vertex,
    pub(crate) kind: ConstraintKind,
}

#[derive(Debug)]
struct Inner {
    spec: GraphSpec,
    shape: Shape,
    constraint: Option<Constraint>,
    cap: u64,
}

/// Immutable handle exposing degree, neighbours, enumeration and the
/// typicality classifier for one graph. Cloning is cheap and thread-safe.
#[derive(Clone, Debug)]
pub struct GraphHandle(Arc<Inner>);

#[derive(Debug)]
pub(crate) enum Shape {
    Hypercube { n: u32 },
    GenHypercube { n: u32, k: u32, degree: u32 },
    StarProduct { n: u32, q: u32, width: u32 },
    Permutahedron { n: u32, width: u32 },
    MiddleLayers { k: u32 },
    Product { factors: Vec<GraphHandle>, offsets: Vec<u32> },
}

fn bit_width(max_value: u32) -> u32 {
    32 - max_value.leading_zeros()
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn effective_cap() -> u64 {
    std::env::var("PERCOLAB_MAX_VERTICES")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_MAX_VERTICES)
}

/// Build an immutable handle for `spec`, validating the parameters.
pub fn make_graph(spec: GraphSpec) -> Result<GraphHandle> {
    make_graph_with_cap(spec, effective_cap())
}

pub fn make_graph_with_cap(spec: GraphSpec, cap: u64) -> Result<GraphHandle> {
    let shape = build_shape(&spec, cap)?;
    Ok(GraphHandle(Arc::new(Inner { spec, shape, constraint: None, cap })))
}

fn build_shape(spec: &GraphSpec, cap: u64) -> Result<Shape> {
    let invalid = |msg: String| Err(Error::InvalidSpec(msg));
    match spec {
        GraphSpec::Hypercube { n } => {
            if *n < 1 || *n > 127 {
                return invalid(format!("hypercube needs 1 <= n <= 127, got {n}"));
            }
            Ok(Shape::Hypercube { n: *n })
        }
        GraphSpec::GeneralisedHypercube { n, k } => {
            if *n < 1 || *n > 127 {
                return invalid(format!("genhypercube needs 1 <= n <= 127, got n={n}"));
            }
            if *k < 1 || k > n {
                return invalid(format!("genhypercube needs 1 <= k <= n, got k={k}, n={n}"));
            }
            let degree: u128 = (1..=*k as u64).map(|i| binomial(*n as u64, i)).sum();
            if degree > (1 << 31) {
                return invalid(format!("genhypercube degree {degree} too large"));
            }
            Ok(Shape::GenHypercube { n: *n, k: *k, degree: degree as u32 })
        }
        GraphSpec::StarProduct { n, q } => {
            if *n < 1 || *q < 1 {
                return invalid(format!("stars needs n >= 1 and q >= 1, got n={n}, q={q}"));
            }
            let width = bit_width(*q);
            if *n as u64 * width as u64 > 128 {
                return invalid(format!("stars word does not fit 128 bits (n={n}, q={q})"));
            }
            Ok(Shape::StarProduct { n: *n, q: *q, width })
        }
        GraphSpec::Permutahedron { n } => {
            if *n < 1 || *n > 24 {
                return invalid(format!("permutahedron needs 1 <= n <= 24, got {n}"));
            }
            let width = bit_width(*n + 1);
            Ok(Shape::Permutahedron { n: *n, width })
        }
        GraphSpec::MiddleLayers { k } => {
            if *k < 1 || *k > 60 {
                return invalid(format!("middlelayers needs 1 <= k <= 60, got {k}"));
            }
            Ok(Shape::MiddleLayers { k: *k })
        }
        GraphSpec::CartesianProduct { factors } => {
            if factors.is_empty() {
                return invalid("product needs at least one factor".into());
            }
            let mut handles = Vec::with_capacity(factors.len());
            let mut offsets = Vec::with_capacity(factors.len());
            let mut offset = 0u32;
            for factor in factors {
                if matches!(factor, GraphSpec::CartesianProduct { .. }) {
                    return invalid("nested products are not supported; flatten the factor list".into());
                }
                let handle = make_graph_with_cap(factor.clone(), cap)?;
                offsets.push(offset);
                offset += handle.code_bits();
                if offset > 128 {
                    return invalid("product word does not fit 128 bits".into());
                }
                handles.push(handle);
            }
            Ok(Shape::Product { factors: handles, offsets })
        }
    }
}

impl Shape {
    fn code_bits(&self) -> u32 {
        match self {
            Shape::Hypercube { n } | Shape::GenHypercube { n, .. } => *n,
            Shape::StarProduct { n, width, .. } => n * width,
            Shape::Permutahedron { n, width } => (n + 1) * width,
            Shape::MiddleLayers { k } => 2 * k + 1,
            Shape::Product { factors, offsets } => {
                offsets.last().unwrap() + factors.last().unwrap().code_bits()
            }
        }
    }
}

fn mask(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

impl GraphHandle {
    pub fn spec(&self) -> &GraphSpec {
        &self.0.spec
    }

    /// CLI-syntax description of the handle (the base family; constrained
    /// views append a `+projection` marker).
    pub fn spec_string(&self) -> String {
        if self.0.constraint.is_some() {
            format!("{}+projection", self.0.spec)
        } else {
            self.0.spec.to_string()
        }
    }

    pub fn cap(&self) -> u64 {
        self.0.cap
    }

    pub fn is_constrained(&self) -> bool {
        self.0.constraint.is_some()
    }

    pub fn code_bits(&self) -> u32 {
        self.0.shape.code_bits()
    }

    fn family_name(&self) -> &'static str {
        match self.0.shape {
            Shape::Hypercube { .. } => "hypercube",
            Shape::GenHypercube { .. } => "genhypercube",
            Shape::StarProduct { .. } => "stars",
            Shape::Permutahedron { .. } => "permutahedron",
            Shape::MiddleLayers { .. } => "middlelayers",
            Shape::Product { .. } => "product",
        }
    }

    /// Number of vertices (of the constrained view when present).
    pub fn vertex_count(&self) -> u128 {
        match &self.0.constraint {
            None => shape_count(&self.0.shape),
            Some(c) => constrained_count(&self.0.shape, &c.kind),
        }
    }

    /// Exact minimum degree of the family.
    pub fn min_degree(&self) -> u64 {
        match &self.0.shape {
            Shape::Hypercube { n } => *n as u64,
            Shape::GenHypercube { degree, .. } => *degree as u64,
            // layer 0 (all leaves) has degree n
            Shape::StarProduct { n, .. } => *n as u64,
            Shape::Permutahedron { n, .. } => *n as u64,
            Shape::MiddleLayers { k } => *k as u64 + 1,
            Shape::Product { factors, .. } => factors.iter().map(|f| f.min_degree()).sum(),
        }
    }

    /// True iff `v` is a valid vertex of this handle (including any
    /// projection constraint).
    pub fn contains(&self, v: Vertex) -> bool {
        shape_contains(&self.0.shape, v)
            && match &self.0.constraint {
                None => true,
                Some(c) => constraint_member(&self.0.shape, c, v),
            }
    }

    fn check_vertex(&self, v: Vertex) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::InvalidVertex(format!(
                "{:#x} is not a vertex of {}",
                v.0,
                self.spec_string()
            )))
        }
    }

    /// `|N(v)|` in this handle.
    pub fn degree(&self, v: Vertex) -> Result<u32> {
        self.check_vertex(v)?;
        match &self.0.constraint {
            None => Ok(shape_degree(&self.0.shape, v)),
            Some(_) => Ok(self.neighbors(v)?.len() as u32),
        }
    }

    /// Exact adjacency list, deduplicated, sorted by canonical code.
    pub fn neighbors(&self, v: Vertex) -> Result<Vec<Vertex>> {
        self.check_vertex(v)?;
        let mut out = Vec::new();
        shape_neighbors(&self.0.shape, v, &mut out);
        if let Some(c) = &self.0.constraint {
            out.retain(|&w| constraint_member(&self.0.shape, c, w));
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Enumerate every vertex, sorted by canonical code. Refuses above the
    /// explicit-scale cap.
    pub fn enumerate(&self) -> Result<Vec<Vertex>> {
        let count = self.vertex_count();
        if count > self.0.cap as u128 {
            return Err(Error::ExplicitScaleExceeded { needed: count, cap: self.0.cap });
        }
        let mut out = match &self.0.constraint {
            None => shape_enumerate(&self.0.shape),
            Some(c) => {
                // projections are connected; BFS from the anchor
                let mut seen = std::collections::HashSet::new();
                let mut queue = VecDeque::new();
                seen.insert(c.anchor);
                queue.push_back(c.anchor);
                while let Some(v) = queue.pop_front() {
                    for w in self.neighbors(v)? {
                        if seen.insert(w) {
                            queue.push_back(w);
                        }
                    }
                }
                seen.into_iter().collect()
            }
        };
        out.sort_unstable();
        debug_assert_eq!(out.len() as u128, count);
        Ok(out)
    }

    /// Exact graph distance, from the family's closed form where one exists
    /// (BFS for middle layers).
    pub fn distance(&self, x: Vertex, y: Vertex) -> Result<u32> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        shape_distance(&self.0.shape, x, y)
    }

    /// Whether `y` is a typical vertex seen from `x` (i.e. `y` is outside the
    /// exceptional set `D` of root `x`).
    pub fn is_typical(&self, x: Vertex, y: Vertex) -> Result<bool> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        shape_typical(&self.0.shape, x, y)
    }

    /// The typicality classifier rooted at `x`.
    pub fn typicality_oracle(&self, root: Vertex) -> Result<TypicalityOracle> {
        self.check_vertex(root)?;
        // probe support up front so the oracle itself cannot fail
        shape_typical(&self.0.shape, root, root)?;
        Ok(TypicalityOracle { graph: self.clone(), root })
    }

    /// Canonical base vertex: all-zero word, identity permutation, or the
    /// bottom k-subset.
    pub fn root(&self) -> Vertex {
        shape_root(&self.0.shape)
    }

    /// BFS ball of radius `r` around `x` with exact distance labels.
    pub fn ball(&self, x: Vertex, r: u32) -> Result<BallView> {
        self.check_vertex(x)?;
        ball::bfs_ball(self, x, r, self.0.cap)
    }

    /// Star products only: the number of coordinates at the star centre.
    pub fn layer_index(&self, v: Vertex) -> Result<u32> {
        self.check_vertex(v)?;
        match &self.0.shape {
            Shape::StarProduct { n, width, .. } => {
                let mut zeros = 0;
                for i in 0..*n {
                    if (v.0 >> (i * width)) & mask(*width) == 0 {
                        zeros += 1;
                    }
                }
                Ok(zeros)
            }
            _ => Err(Error::UnsupportedFamily(format!(
                "layer_index needs a star product, got {}",
                self.family_name()
            ))),
        }
    }

    /// Star products only: the canonical representative of layer `i`
    /// (centres in the first `i` coordinates, leaf 1 elsewhere).
    pub fn star_layer_vertex(&self, i: u32) -> Result<Vertex> {
        match &self.0.shape {
            Shape::StarProduct { n, width, .. } => {
                if i > *n {
                    return Err(Error::InvalidVertex(format!("layer {i} > n = {n}")));
                }
                let mut code = 0u128;
                for coord in i..*n {
                    code |= 1u128 << (coord * width);
                }
                Ok(Vertex(code))
            }
            _ => Err(Error::UnsupportedFamily(
                "star_layer_vertex needs a star product".into(),
            )),
        }
    }

    /// A uniformly random vertex keyed on `(seed, index)`.
    pub fn random_vertex(&self, seed: u64, index: u64) -> Result<Vertex> {
        if self.0.constraint.is_some() {
            // constrained views are small; sample from the enumeration
            let verts = self.enumerate()?;
            let pick = rng::derive(seed, index) as usize % verts.len();
            return Ok(verts[pick]);
        }
        Ok(shape_random(&self.0.shape, rng::derive(seed, index)))
    }

    /// Human-readable vertex word.
    pub fn format_vertex(&self, v: Vertex) -> String {
        shape_format(&self.0.shape, v)
    }

    /// Parse the output of [`format_vertex`], or the literal `root`.
    pub fn parse_vertex(&self, text: &str) -> Result<Vertex> {
        if text == "root" {
            return Ok(self.root());
        }
        let v = shape_parse(&self.0.shape, text)?;
        self.check_vertex(v)?;
        Ok(v)
    }

    pub(crate) fn shape(&self) -> &Shape {
        &self.0.shape
    }

    pub(crate) fn constrained(&self, constraint: Constraint) -> GraphHandle {
        GraphHandle(Arc::new(Inner {
            spec: self.0.spec.clone(),
            shape: build_shape(&self.0.spec, self.0.cap).expect("spec was already validated"),
            constraint: Some(constraint),
            cap: self.0.cap,
        }))
    }
}

/// Classifier `Vertex -> {typical, non-typical}` for a fixed root.
#[derive(Clone)]
pub struct TypicalityOracle {
    graph: GraphHandle,
    root: Vertex,
}

impl TypicalityOracle {
    pub fn root(&self) -> Vertex {
        self.root
    }

    pub fn is_typical(&self, y: Vertex) -> bool {
        self.graph
            .is_typical(self.root, y)
            .expect("oracle support was checked at construction")
    }

    /// The typical part of a sphere: `S_0(x, l) = S(x, l) \ D`.
    pub fn typical_sphere(&self, ball: &BallView, ell: u32) -> Vec<Vertex> {
        ball.sphere(ell)
            .iter()
            .copied()
            .filter(|&y| self.is_typical(y))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// per-family implementations
// ---------------------------------------------------------------------------

fn shape_count(shape: &Shape) -> u128 {
    match shape {
        Shape::Hypercube { n } | Shape::GenHypercube { n, .. } => 1u128 << n,
        Shape::StarProduct { n, q, .. } => {
            let mut acc: u128 = 1;
            for _ in 0..*n {
                acc = acc.saturating_mul((*q + 1) as u128);
            }
            acc
        }
        Shape::Permutahedron { n, .. } => (1..=(*n as u128 + 1)).product(),
        Shape::MiddleLayers { k } => {
            2 * binomial(2 * *k as u64 + 1, *k as u64)
        }
        Shape::Product { factors, .. } => factors
            .iter()
            .map(|f| f.vertex_count())
            .fold(1u128, |a, b| a.saturating_mul(b)),
    }
}

fn constrained_count(shape: &Shape, kind: &ConstraintKind) -> u128 {
    match (shape, kind) {
        (_, ConstraintKind::Whole) => 1,
        (Shape::Hypercube { n }, ConstraintKind::FrozenCoords(frozen)) => {
            1u128 << (*n as usize - frozen.iter().filter(|&&f| f).count())
        }
        (Shape::StarProduct { n, q, .. }, ConstraintKind::FrozenCoords(frozen)) => {
            let free = *n as usize - frozen.iter().filter(|&&f| f).count();
            (0..free).fold(1u128, |a, _| a.saturating_mul((*q + 1) as u128))
        }
        (Shape::Permutahedron { .. }, ConstraintKind::AllowedSwaps(allowed)) => {
            swap_blocks(allowed)
                .into_iter()
                .map(|(start, end)| (1..=(end - start + 1) as u128).product::<u128>())
                .product()
        }
        (Shape::Product { factors, .. }, ConstraintKind::PerFactor(parts)) => factors
            .iter()
            .zip(parts)
            .map(|(f, part)| match part {
                None => f.vertex_count(),
                Some(kind) => constrained_count(f.shape(), kind),
            })
            .fold(1u128, |a, b| a.saturating_mul(b)),
        _ => unreachable!("constraint kind does not match family"),
    }
}

/// Maximal runs of allowed swap positions, as inclusive position ranges
/// `(start, end)` of the touched word positions.
fn swap_blocks(allowed: &[bool]) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < allowed.len() {
        if allowed[i] {
            let start = i;
            while i < allowed.len() && allowed[i] {
                i += 1;
            }
            blocks.push((start, i)); // positions start..=i
        } else {
            i += 1;
        }
    }
    blocks
}

fn shape_contains(shape: &Shape, v: Vertex) -> bool {
    match shape {
        Shape::Hypercube { n } | Shape::GenHypercube { n, .. } => v.0 <= mask(*n),
        Shape::StarProduct { n, q, width } => {
            if v.0 > mask(n * width) {
                return false;
            }
            (0..*n).all(|i| ((v.0 >> (i * width)) & mask(*width)) as u32 <= *q)
        }
        Shape::Permutahedron { n, width } => {
            let m = *n as usize + 1;
            if v.0 > mask((*n + 1) * width) {
                return false;
            }
            let mut seen = [false; 26];
            for p in 0..m {
                let digit = ((v.0 >> (p as u32 * width)) & mask(*width)) as usize;
                if digit < 1 || digit > m || seen[digit] {
                    return false;
                }
                seen[digit] = true;
            }
            true
        }
        Shape::MiddleLayers { k } => {
            let bits = 2 * k + 1;
            if v.0 > mask(bits) {
                return false;
            }
            let pop = v.0.count_ones();
            pop == *k || pop == *k + 1
        }
        Shape::Product { factors, offsets } => factors.iter().zip(offsets).all(|(f, off)| {
            f.contains(Vertex((v.0 >> off) & mask(f.code_bits())))
        }),
    }
}

fn constraint_member(shape: &Shape, c: &Constraint, v: Vertex) -> bool {
    kind_member(shape, &c.kind, c.anchor, v)
}

fn kind_member(shape: &Shape, kind: &ConstraintKind, anchor: Vertex, v: Vertex) -> bool {
    match (shape, kind) {
        (_, ConstraintKind::Whole) => v == anchor,
        (Shape::Hypercube { .. }, ConstraintKind::FrozenCoords(frozen)) => frozen
            .iter()
            .enumerate()
            .all(|(i, &f)| !f || (v.0 >> i) & 1 == (anchor.0 >> i) & 1),
        (Shape::StarProduct { width, .. }, ConstraintKind::FrozenCoords(frozen)) => {
            frozen.iter().enumerate().all(|(i, &f)| {
                !f || (v.0 >> (i as u32 * width)) & mask(*width)
                    == (anchor.0 >> (i as u32 * width)) & mask(*width)
            })
        }
        (Shape::Permutahedron { n, width }, ConstraintKind::AllowedSwaps(allowed)) => {
            let m = *n as usize + 1;
            let digit = |code: u128, p: usize| ((code >> (p as u32 * width)) & mask(*width)) as u8;
            let blocks = swap_blocks(allowed);
            let mut covered = vec![false; m];
            for &(start, end) in &blocks {
                let mut a: Vec<u8> = (start..=end).map(|p| digit(v.0, p)).collect();
                let mut b: Vec<u8> = (start..=end).map(|p| digit(anchor.0, p)).collect();
                a.sort_unstable();
                b.sort_unstable();
                if a != b {
                    return false;
                }
                for p in start..=end {
                    covered[p] = true;
                }
            }
            (0..m).all(|p| covered[p] || digit(v.0, p) == digit(anchor.0, p))
        }
        (Shape::Product { factors, offsets }, ConstraintKind::PerFactor(parts)) => factors
            .iter()
            .zip(offsets)
            .zip(parts)
            .all(|((f, off), part)| match part {
                None => true,
                Some(kind) => {
                    let sub = Vertex((v.0 >> off) & mask(f.code_bits()));
                    let sub_anchor = Vertex((anchor.0 >> off) & mask(f.code_bits()));
                    kind_member(f.shape(), kind, sub_anchor, sub)
                }
            }),
        _ => unreachable!("constraint kind does not match family"),
    }
}

fn shape_degree(shape: &Shape, v: Vertex) -> u32 {
    match shape {
        Shape::Hypercube { n } => *n,
        Shape::GenHypercube { degree, .. } => *degree,
        Shape::StarProduct { n, q, width } => {
            let zeros: u32 = (0..*n)
                .map(|i| u32::from((v.0 >> (i * width)) & mask(*width) == 0))
                .sum();
            zeros * q + (n - zeros)
        }
        Shape::Permutahedron { n, .. } => *n,
        Shape::MiddleLayers { k } => *k + 1,
        Shape::Product { factors, offsets } => factors
            .iter()
            .zip(offsets)
            .map(|(f, off)| shape_degree(f.shape(), Vertex((v.0 >> off) & mask(f.code_bits()))))
            .sum(),
    }
}

fn shape_neighbors(shape: &Shape, v: Vertex, out: &mut Vec<Vertex>) {
    match shape {
        Shape::Hypercube { n } => {
            for i in 0..*n {
                out.push(Vertex(v.0 ^ (1u128 << i)));
            }
        }
        Shape::GenHypercube { n, k, .. } => {
            // all words within Hamming distance k: choose 1..=k coordinates
            let mut coords = Vec::new();
            fn rec(n: u32, k: u32, start: u32, v: u128, coords: &mut Vec<u32>, out: &mut Vec<Vertex>) {
                if !coords.is_empty() {
                    let flip: u128 = coords.iter().map(|&c| 1u128 << c).sum();
                    out.push(Vertex(v ^ flip));
                }
                if coords.len() as u32 == k {
                    return;
                }
                for c in start..n {
                    coords.push(c);
                    rec(n, k, c + 1, v, coords, out);
                    coords.pop();
                }
            }
            rec(*n, *k, 0, v.0, &mut coords, out);
        }
        Shape::StarProduct { n, q, width } => {
            for i in 0..*n {
                let shift = i * width;
                let digit = (v.0 >> shift) & mask(*width);
                let cleared = v.0 & !(mask(*width) << shift);
                if digit == 0 {
                    for leaf in 1..=*q as u128 {
                        out.push(Vertex(cleared | (leaf << shift)));
                    }
                } else {
                    out.push(Vertex(cleared));
                }
            }
        }
        Shape::Permutahedron { n, width } => {
            for p in 0..*n {
                let lo = p * width;
                let hi = (p + 1) * width;
                let a = (v.0 >> lo) & mask(*width);
                let b = (v.0 >> hi) & mask(*width);
                let cleared = v.0 & !(mask(*width) << lo) & !(mask(*width) << hi);
                out.push(Vertex(cleared | (b << lo) | (a << hi)));
            }
        }
        Shape::MiddleLayers { k } => {
            let bits = 2 * k + 1;
            if v.0.count_ones() == *k {
                for i in 0..bits {
                    if (v.0 >> i) & 1 == 0 {
                        out.push(Vertex(v.0 | (1u128 << i)));
                    }
                }
            } else {
                for i in 0..bits {
                    if (v.0 >> i) & 1 == 1 {
                        out.push(Vertex(v.0 & !(1u128 << i)));
                    }
                }
            }
        }
        Shape::Product { factors, offsets } => {
            for (f, off) in factors.iter().zip(offsets) {
                let bits = f.code_bits();
                let sub = Vertex((v.0 >> off) & mask(bits));
                let cleared = v.0 & !(mask(bits) << off);
                let mut sub_nbrs = Vec::new();
                shape_neighbors(f.shape(), sub, &mut sub_nbrs);
                for w in sub_nbrs {
                    out.push(Vertex(cleared | (w.0 << off)));
                }
            }
        }
    }
}

fn shape_enumerate(shape: &Shape) -> Vec<Vertex> {
    match shape {
        Shape::Hypercube { n } | Shape::GenHypercube { n, .. } => {
            (0..1u128 << n).map(Vertex).collect()
        }
        Shape::StarProduct { n, q, width } => {
            let total = shape_count(shape) as usize;
            let mut out = Vec::with_capacity(total);
            let mut digits = vec![0u32; *n as usize];
            loop {
                let mut code = 0u128;
                for (i, &d) in digits.iter().enumerate() {
                    code |= (d as u128) << (i as u32 * width);
                }
                out.push(Vertex(code));
                let mut i = 0;
                loop {
                    if i == digits.len() {
                        return out;
                    }
                    if digits[i] < *q {
                        digits[i] += 1;
                        break;
                    }
                    digits[i] = 0;
                    i += 1;
                }
            }
        }
        Shape::Permutahedron { n, width } => {
            let m = *n as usize + 1;
            let mut word: Vec<u8> = (1..=m as u8).collect();
            let mut out = Vec::new();
            loop {
                let mut code = 0u128;
                for (p, &d) in word.iter().enumerate() {
                    code |= (d as u128) << (p as u32 * width);
                }
                out.push(Vertex(code));
                // lexicographic next permutation
                let Some(i) = (0..m - 1).rev().find(|&i| word[i] < word[i + 1]) else {
                    return out;
                };
                let j = (i + 1..m).rev().find(|&j| word[j] > word[i]).unwrap();
                word.swap(i, j);
                word[i + 1..].reverse();
            }
        }
        Shape::MiddleLayers { k } => {
            let bits = 2 * k + 1;
            let mut out = Vec::new();
            for code in 0..1u128 << bits {
                let pop = code.count_ones();
                if pop == *k || pop == *k + 1 {
                    out.push(Vertex(code));
                }
            }
            out
        }
        Shape::Product { factors, offsets } => {
            let lists: Vec<Vec<Vertex>> = factors
                .iter()
                .map(|f| shape_enumerate(f.shape()))
                .collect();
            let mut out = Vec::new();
            let mut idx = vec![0usize; lists.len()];
            loop {
                let mut code = 0u128;
                for ((list, &i), off) in lists.iter().zip(&idx).zip(offsets) {
                    code |= list[i].0 << off;
                }
                out.push(Vertex(code));
                let mut pos = 0;
                loop {
                    if pos == lists.len() {
                        return out;
                    }
                    if idx[pos] + 1 < lists[pos].len() {
                        idx[pos] += 1;
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
            }
        }
    }
}

fn shape_distance(shape: &Shape, x: Vertex, y: Vertex) -> Result<u32> {
    match shape {
        Shape::Hypercube { .. } => Ok((x.0 ^ y.0).count_ones()),
        Shape::GenHypercube { k, .. } => {
            let h = (x.0 ^ y.0).count_ones();
            Ok(h.div_ceil(*k))
        }
        Shape::StarProduct { n, width, .. } => {
            let mut d = 0;
            for i in 0..*n {
                let a = (x.0 >> (i * width)) & mask(*width);
                let b = (y.0 >> (i * width)) & mask(*width);
                if a != b {
                    d += if a == 0 || b == 0 { 1 } else { 2 };
                }
            }
            Ok(d)
        }
        Shape::Permutahedron { n, width } => {
            let sigma = relative_word(*n, *width, x, y);
            let mut inv = 0;
            for p in 0..sigma.len() {
                for r in p + 1..sigma.len() {
                    if sigma[p] > sigma[r] {
                        inv += 1;
                    }
                }
            }
            Ok(inv)
        }
        Shape::MiddleLayers { .. } => {
            // no closed form needed at this scale; plain BFS
            if x == y {
                return Ok(0);
            }
            let mut dist = std::collections::HashMap::new();
            dist.insert(x, 0u32);
            let mut queue = VecDeque::new();
            queue.push_back(x);
            while let Some(v) = queue.pop_front() {
                let d = dist[&v];
                let mut nbrs = Vec::new();
                shape_neighbors(shape, v, &mut nbrs);
                for w in nbrs {
                    if !dist.contains_key(&w) {
                        if w == y {
                            return Ok(d + 1);
                        }
                        dist.insert(w, d + 1);
                        queue.push_back(w);
                    }
                }
            }
            Err(Error::InvalidVertex("vertices are not connected".into()))
        }
        Shape::Product { factors, offsets } => {
            let mut d = 0;
            for (f, off) in factors.iter().zip(offsets) {
                let bits = f.code_bits();
                d += shape_distance(
                    f.shape(),
                    Vertex((x.0 >> off) & mask(bits)),
                    Vertex((y.0 >> off) & mask(bits)),
                )?;
            }
            Ok(d)
        }
    }
}

/// 0-based word of the displacement `sigma = x^{-1} y` of a permutahedron:
/// `y = x . sigma` under the right action on positions.
fn relative_word(n: u32, width: u32, x: Vertex, y: Vertex) -> Vec<u8> {
    let m = n as usize + 1;
    let mut xpos = [0u8; 26];
    for p in 0..m {
        let val = ((x.0 >> (p as u32 * width)) & mask(width)) as usize;
        xpos[val] = p as u8;
    }
    (0..m)
        .map(|p| {
            let val = ((y.0 >> (p as u32 * width)) & mask(width)) as usize;
            xpos[val]
        })
        .collect()
}

fn shape_typical(shape: &Shape, x: Vertex, y: Vertex) -> Result<bool> {
    match shape {
        Shape::Hypercube { .. } => Ok(true),
        Shape::GenHypercube { .. } => Err(Error::UnsupportedFamily(
            "no exceptional set is defined for genhypercube".into(),
        )),
        // the exceptional set is taken to be empty for middle layers
        Shape::MiddleLayers { .. } => Ok(true),
        Shape::StarProduct { n, width, .. } => {
            for i in 0..*n {
                let a = (x.0 >> (i * width)) & mask(*width);
                let b = (y.0 >> (i * width)) & mask(*width);
                if a != b && a != 0 && b != 0 {
                    return Ok(false); // leaf-to-leaf displacement
                }
            }
            Ok(true)
        }
        Shape::Permutahedron { n, width } => {
            // typical iff the displacement is an involution built from
            // pairwise-disjoint adjacent transpositions
            let sigma = relative_word(*n, *width, x, y);
            for (p, &s) in sigma.iter().enumerate() {
                let s = s as usize;
                if s == p {
                    continue;
                }
                if s.abs_diff(p) != 1 || sigma[s] as usize != p {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Shape::Product { factors, offsets } => {
            for (f, off) in factors.iter().zip(offsets) {
                let bits = f.code_bits();
                let sub_x = Vertex((x.0 >> off) & mask(bits));
                let sub_y = Vertex((y.0 >> off) & mask(bits));
                if !shape_typical(f.shape(), sub_x, sub_y)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

fn shape_root(shape: &Shape) -> Vertex {
    match shape {
        Shape::Hypercube { .. }
        | Shape::GenHypercube { .. }
        | Shape::StarProduct { .. } => Vertex(0),
        Shape::Permutahedron { n, width } => {
            let mut code = 0u128;
            for p in 0..=*n {
                code |= ((p + 1) as u128) << (p * width);
            }
            Vertex(code)
        }
        Shape::MiddleLayers { k } => Vertex(mask(*k)),
        Shape::Product { factors, offsets } => {
            let mut code = 0u128;
            for (f, off) in factors.iter().zip(offsets) {
                code |= f.root().0 << off;
            }
            Vertex(code)
        }
    }
}

fn shape_random(shape: &Shape, seed: u64) -> Vertex {
    let draw = |i: u64| rng::derive(seed, i);
    match shape {
        Shape::Hypercube { n } | Shape::GenHypercube { n, .. } => {
            let mut code = 0u128;
            for i in 0..*n {
                if draw(i as u64) & 1 == 1 {
                    code |= 1u128 << i;
                }
            }
            Vertex(code)
        }
        Shape::StarProduct { n, q, width } => {
            let mut code = 0u128;
            for i in 0..*n {
                let d = draw(i as u64) % (*q as u64 + 1);
                code |= (d as u128) << (i * width);
            }
            Vertex(code)
        }
        Shape::Permutahedron { n, width } => {
            let m = *n as usize + 1;
            let mut word: Vec<u8> = (1..=m as u8).collect();
            for i in (1..m).rev() {
                let j = (draw(i as u64) % (i as u64 + 1)) as usize;
                word.swap(i, j);
            }
            let mut code = 0u128;
            for (p, &d) in word.iter().enumerate() {
                code |= (d as u128) << (p as u32 * width);
            }
            Vertex(code)
        }
        Shape::MiddleLayers { k } => {
            let bits = 2 * k + 1;
            let mut counter = 0u64;
            loop {
                let code = (draw(counter) as u128) & mask(bits);
                let pop = code.count_ones();
                if pop == *k || pop == *k + 1 {
                    return Vertex(code);
                }
                counter += 1;
            }
        }
        Shape::Product { factors, offsets } => {
            let mut code = 0u128;
            for (i, (f, off)) in factors.iter().zip(offsets).enumerate() {
                code |= shape_random(f.shape(), draw(1_000_003 + i as u64)).0 << off;
            }
            Vertex(code)
        }
    }
}

fn shape_format(shape: &Shape, v: Vertex) -> String {
    match shape {
        Shape::Hypercube { n } | Shape::GenHypercube { n, .. } => (0..*n)
            .map(|i| if (v.0 >> i) & 1 == 1 { '1' } else { '0' })
            .collect(),
        Shape::MiddleLayers { k } => (0..2 * k + 1)
            .map(|i| if (v.0 >> i) & 1 == 1 { '1' } else { '0' })
            .collect(),
        Shape::StarProduct { n, q, width } => {
            let digits: Vec<String> = (0..*n)
                .map(|i| (((v.0 >> (i * width)) & mask(*width)) as u32).to_string())
                .collect();
            if *q <= 9 {
                digits.concat()
            } else {
                digits.join(",")
            }
        }
        Shape::Permutahedron { n, width } => {
            let digits: Vec<String> = (0..=*n)
                .map(|p| (((v.0 >> (p * width)) & mask(*width)) as u32).to_string())
                .collect();
            if *n + 1 <= 9 {
                digits.concat()
            } else {
                digits.join(",")
            }
        }
        Shape::Product { factors, offsets } => {
            let parts: Vec<String> = factors
                .iter()
                .zip(offsets)
                .map(|(f, off)| {
                    shape_format(f.shape(), Vertex((v.0 >> off) & mask(f.code_bits())))
                })
                .collect();
            parts.join("|")
        }
    }
}

fn parse_digits(text: &str) -> Result<Vec<u32>> {
    if text.contains(',') {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidVertex(format!("bad digit in `{text}`")))
            })
            .collect()
    } else {
        text.chars()
            .map(|c| {
                c.to_digit(10)
                    .ok_or_else(|| Error::InvalidVertex(format!("bad digit in `{text}`")))
            })
            .collect()
    }
}

fn shape_parse(shape: &Shape, text: &str) -> Result<Vertex> {
    let expect_len = |digits: &[u32], len: usize| -> Result<()> {
        if digits.len() == len {
            Ok(())
        } else {
            Err(Error::InvalidVertex(format!(
                "expected {len} coordinates, got {} in `{text}`",
                digits.len()
            )))
        }
    };
    match shape {
        Shape::Hypercube { n } | Shape::GenHypercube { n, .. } => {
            let digits = parse_digits(text)?;
            expect_len(&digits, *n as usize)?;
            let mut code = 0u128;
            for (i, &d) in digits.iter().enumerate() {
                if d > 1 {
                    return Err(Error::InvalidVertex(format!("bit digit > 1 in `{text}`")));
                }
                code |= (d as u128) << i;
            }
            Ok(Vertex(code))
        }
        Shape::MiddleLayers { k } => {
            let digits = parse_digits(text)?;
            expect_len(&digits, 2 * *k as usize + 1)?;
            let mut code = 0u128;
            for (i, &d) in digits.iter().enumerate() {
                if d > 1 {
                    return Err(Error::InvalidVertex(format!("bit digit > 1 in `{text}`")));
                }
                code |= (d as u128) << i;
            }
            Ok(Vertex(code))
        }
        Shape::StarProduct { n, width, .. } => {
            let digits = parse_digits(text)?;
            expect_len(&digits, *n as usize)?;
            let mut code = 0u128;
            for (i, &d) in digits.iter().enumerate() {
                code |= (d as u128) << (i as u32 * width);
            }
            Ok(Vertex(code))
        }
        Shape::Permutahedron { n, width } => {
            let digits = parse_digits(text)?;
            expect_len(&digits, *n as usize + 1)?;
            let mut code = 0u128;
            for (p, &d) in digits.iter().enumerate() {
                code |= (d as u128) << (p as u32 * width);
            }
            Ok(Vertex(code))
        }
        Shape::Product { factors, offsets } => {
            let parts: Vec<&str> = text.split('|').collect();
            if parts.len() != factors.len() {
                return Err(Error::InvalidVertex(format!(
                    "expected {} `|`-separated factor words in `{text}`",
                    factors.len()
                )));
            }
            let mut code = 0u128;
            for ((f, off), part) in factors.iter().zip(offsets).zip(parts) {
                code |= shape_parse(f.shape(), part)?.0 << off;
            }
            Ok(Vertex(code))
        }
    }
}

// ---------------------------------------------------------------------------
// projection subgraphs
// ---------------------------------------------------------------------------

/// The projection subgraph `G(y)` for `y` at distance `ell` from `x`:
/// a face of the product (coordinates where `x` and `y` differ are frozen to
/// `y`'s values) or, for the permutahedron, the coset generated by the
/// adjacent swaps whose support avoids every inverted pair of the
/// displacement.
pub fn projection_subgraph(
    g: &GraphHandle,
    x: Vertex,
    y: Vertex,
    ell: u32,
) -> Result<GraphHandle> {
    if g.is_constrained() {
        return Err(Error::UnsupportedFamily(
            "nested projections are not supported".into(),
        ));
    }
    let found = g.distance(x, y)?;
    if found != ell {
        return Err(Error::InvalidDistance { expected: ell, found });
    }
    let kind = projection_kind(g.shape(), x, y)?;
    Ok(g.constrained(Constraint { anchor: y, kind }))
}

fn projection_kind(shape: &Shape, x: Vertex, y: Vertex) -> Result<ConstraintKind> {
    match shape {
        Shape::Hypercube { n } => {
            let diff = x.0 ^ y.0;
            Ok(ConstraintKind::FrozenCoords(
                (0..*n).map(|i| (diff >> i) & 1 == 1).collect(),
            ))
        }
        Shape::StarProduct { n, width, .. } => Ok(ConstraintKind::FrozenCoords(
            (0..*n)
                .map(|i| {
                    (x.0 >> (i * width)) & mask(*width) != (y.0 >> (i * width)) & mask(*width)
                })
                .collect(),
        )),
        Shape::Permutahedron { n, width } => {
            Ok(ConstraintKind::AllowedSwaps(permutahedron_allowed_swaps(
                *n, *width, x, y,
            )))
        }
        Shape::Product { factors, offsets } => {
            let mut parts = Vec::with_capacity(factors.len());
            for (f, off) in factors.iter().zip(offsets) {
                let bits = f.code_bits();
                let sub_x = Vertex((x.0 >> off) & mask(bits));
                let sub_y = Vertex((y.0 >> off) & mask(bits));
                if sub_x == sub_y {
                    parts.push(None);
                } else if let Shape::Permutahedron { n, width } = f.shape() {
                    parts.push(Some(ConstraintKind::AllowedSwaps(
                        permutahedron_allowed_swaps(*n, *width, sub_x, sub_y),
                    )));
                } else {
                    parts.push(Some(ConstraintKind::Whole));
                }
            }
            Ok(ConstraintKind::PerFactor(parts))
        }
        Shape::GenHypercube { .. } | Shape::MiddleLayers { .. } => Err(Error::UnsupportedFamily(
            "no projection construction for this family".into(),
        )),
    }
}

/// Swap positions whose support avoids every position occurring in an
/// inverted pair of the displacement `x^{-1} y`.
fn permutahedron_allowed_swaps(n: u32, width: u32, x: Vertex, y: Vertex) -> Box<[bool]> {
    let sigma = relative_word(n, width, x, y);
    let m = sigma.len();
    let mut touched = vec![false; m];
    for p in 0..m {
        for r in p + 1..m {
            if sigma[p] > sigma[r] {
                touched[p] = true;
                touched[r] = true;
            }
        }
    }
    // swap j acts on positions {j, j+1} (0-based)
    (0..m - 1).map(|j| !touched[j] && !touched[j + 1]).collect()
}
