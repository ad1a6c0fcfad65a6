//! Exact algebra of strictly monotone piecewise-linear bijections of the real
//! line, closed under composition and inversion.
//!
//! Two representations live here:
//!
//! * [`MonotoneMap`] — finitely many anchors with affine tails on both sides.
//! * [`QuasiPeriodicMap`] — a fundamental piece on `[0, 1]` extended by the
//!   rule `f(x + 1) = f(x) + c`; the carrier of descent conditions on the
//!   cylinder.
//!
//! Every constructor canonicalizes its data (collinear anchors removed,
//! affine maps re-anchored at `x = 0, 1`), so structural equality of two
//! values is equality of the functions they denote.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rational::Rational;

/// Monotonicity direction of a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    /// Direction of a composition: decreasing ∘ decreasing is increasing.
    pub fn product(self, other: Direction) -> Direction {
        if self == other {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    }

    fn matches_sign(self, r: &Rational) -> bool {
        match self {
            Direction::Increasing => r.is_positive(),
            Direction::Decreasing => r.is_negative(),
        }
    }
}

/// Errors from constructing or combining piecewise-linear maps.
#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("invalid anchors: {0}")]
    InvalidAnchors(String),
    #[error("anchor values are not strictly monotone")]
    NotMonotone,
    #[error("fundamental endpoint values differ by {found}, expected quasi-period {expected}")]
    EndpointMismatch { expected: Rational, found: Rational },
    #[error("quasi-period must be nonzero")]
    ZeroPeriod,
    #[error("tail slope must be nonzero")]
    ZeroSlope,
    #[error("tail slope sign contradicts anchor direction")]
    SlopeDirection,
    #[error("inner quasi-period {0} is not an integer; composite is not quasi-periodic in general")]
    NonIntegerInnerPeriod(Rational),
    #[error("inverse of quasi-period {0} map is not representable in this class")]
    NotInvertibleInClass(Rational),
    #[error("composition of a plain and a quasi-periodic map is not representable here")]
    NotComposable,
}

/// Anchor list plus tail slopes: a general piecewise-linear function with
/// finitely many breakpoints. No monotonicity is assumed; [`MonotoneMap`]
/// layers the bijection invariants on top.
#[derive(Clone, PartialEq, Eq)]
pub struct PlFunc {
    anchors: Vec<(Rational, Rational)>,
    left_slope: Rational,
    right_slope: Rational,
}

impl PlFunc {
    pub fn new(
        anchors: Vec<(Rational, Rational)>,
        left_slope: Rational,
        right_slope: Rational,
    ) -> Result<Self, MapError> {
        if anchors.len() < 2 {
            return Err(MapError::InvalidAnchors(format!(
                "need at least 2 anchors, got {}",
                anchors.len()
            )));
        }
        for w in anchors.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(MapError::InvalidAnchors(
                    "anchor x-values must be strictly increasing".into(),
                ));
            }
        }
        Ok(PlFunc {
            anchors,
            left_slope,
            right_slope,
        }
        .canonicalize())
    }

    /// Constant function, useful for domain bounds.
    pub fn constant(y: Rational) -> Self {
        PlFunc {
            anchors: vec![(Rational::zero(), y.clone()), (Rational::one(), y)],
            left_slope: Rational::zero(),
            right_slope: Rational::zero(),
        }
    }

    /// `x ↦ a·x + b`.
    pub fn affine(a: Rational, b: Rational) -> Self {
        PlFunc {
            anchors: vec![(Rational::zero(), b.clone()), (Rational::one(), &a + &b)],
            left_slope: a.clone(),
            right_slope: a,
        }
    }

    pub fn anchors(&self) -> &[(Rational, Rational)] {
        &self.anchors
    }

    pub fn left_slope(&self) -> &Rational {
        &self.left_slope
    }

    pub fn right_slope(&self) -> &Rational {
        &self.right_slope
    }

    fn segment_slope(&self, i: usize) -> Rational {
        let (x0, y0) = &self.anchors[i];
        let (x1, y1) = &self.anchors[i + 1];
        &(y1 - y0) / &(x1 - x0)
    }

    /// Keep only true breakpoints; re-anchor by convention when the function
    /// is affine (anchors at x = 0, 1) or has a single breakpoint b
    /// (anchors at b, b+1). This makes the representation canonical:
    /// equal functions have identical data.
    fn canonicalize(self) -> Self {
        let n = self.anchors.len();
        let mut kept = Vec::with_capacity(n);
        for i in 0..n {
            let before = if i == 0 {
                self.left_slope.clone()
            } else {
                self.segment_slope(i - 1)
            };
            let after = if i == n - 1 {
                self.right_slope.clone()
            } else {
                self.segment_slope(i)
            };
            if before != after {
                kept.push(self.anchors[i].clone());
            }
        }
        match kept.len() {
            0 => {
                // Globally affine with slope = left_slope.
                let y0 = self.eval(&Rational::zero());
                let y1 = &y0 + &self.left_slope;
                PlFunc {
                    anchors: vec![(Rational::zero(), y0), (Rational::one(), y1)],
                    left_slope: self.left_slope.clone(),
                    right_slope: self.left_slope,
                }
            }
            1 => {
                let (bx, by) = kept.pop().unwrap();
                let x1 = &bx + &Rational::one();
                let y1 = &by + &self.right_slope;
                PlFunc {
                    anchors: vec![(bx, by), (x1, y1)],
                    left_slope: self.left_slope,
                    right_slope: self.right_slope,
                }
            }
            _ => PlFunc {
                anchors: kept,
                left_slope: self.left_slope,
                right_slope: self.right_slope,
            },
        }
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let first = &self.anchors[0];
        if *x <= first.0 {
            return &first.1 + &(&self.left_slope * &(x - &first.0));
        }
        let last = self.anchors.last().unwrap();
        if *x >= last.0 {
            return &last.1 + &(&self.right_slope * &(x - &last.0));
        }
        // Index of the segment containing x.
        let i = self.anchors.partition_point(|(ax, _)| ax < x) - 1;
        let (x0, y0) = &self.anchors[i];
        if x == x0 {
            return y0.clone();
        }
        y0 + &(&self.segment_slope(i) * &(x - x0))
    }

    /// All finite solutions of `f(w) = y`, one per strictly-sloped piece
    /// that attains `y`. Pieces on which `f` is constantly `y` contribute
    /// nothing (they hold no isolated crossing).
    pub fn preimages(&self, y: &Rational) -> Vec<Rational> {
        let mut out = Vec::new();
        let first = &self.anchors[0];
        if !self.left_slope.is_zero() {
            let w = &first.0 + &(&(y - &first.1) / &self.left_slope);
            if w <= first.0 {
                out.push(w);
            }
        }
        for i in 0..self.anchors.len() - 1 {
            let (x0, y0) = &self.anchors[i];
            let (x1, y1) = &self.anchors[i + 1];
            if y0 == y1 {
                continue;
            }
            let s = self.segment_slope(i);
            let w = x0 + &(&(y - y0) / &s);
            if &w >= x0 && &w <= x1 {
                out.push(w);
            }
        }
        let last = self.anchors.last().unwrap();
        if !self.right_slope.is_zero() {
            let w = &last.0 + &(&(y - &last.1) / &self.right_slope);
            if w >= last.0 {
                out.push(w);
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

impl fmt::Debug for PlFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PlFunc({:?}, tails {:?}/{:?})",
            self.anchors, self.left_slope, self.right_slope
        )
    }
}

/// A strictly monotone piecewise-linear bijection of the real line:
/// linear interpolation between anchors, affine extrapolation beyond them.
#[derive(Clone, PartialEq, Eq)]
pub struct MonotoneMap {
    func: PlFunc,
    direction: Direction,
}

impl MonotoneMap {
    pub fn new(
        anchors: Vec<(Rational, Rational)>,
        left_slope: Rational,
        right_slope: Rational,
    ) -> Result<Self, MapError> {
        if left_slope.is_zero() || right_slope.is_zero() {
            return Err(MapError::ZeroSlope);
        }
        let direction = infer_direction(&anchors)?;
        if !direction.matches_sign(&left_slope) || !direction.matches_sign(&right_slope) {
            return Err(MapError::SlopeDirection);
        }
        let func = PlFunc::new(anchors, left_slope, right_slope)?;
        Ok(MonotoneMap { func, direction })
    }

    /// `x ↦ a·x + b` with `a ≠ 0`.
    pub fn affine(a: Rational, b: Rational) -> Result<Self, MapError> {
        if a.is_zero() {
            return Err(MapError::ZeroSlope);
        }
        let direction = if a.is_positive() {
            Direction::Increasing
        } else {
            Direction::Decreasing
        };
        Ok(MonotoneMap {
            func: PlFunc::affine(a, b),
            direction,
        })
    }

    pub fn identity() -> Self {
        Self::affine(Rational::one(), Rational::zero()).unwrap()
    }

    pub fn translation(b: Rational) -> Self {
        Self::affine(Rational::one(), b).unwrap()
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn is_increasing(&self) -> bool {
        self.direction == Direction::Increasing
    }

    pub fn anchors(&self) -> &[(Rational, Rational)] {
        self.func.anchors()
    }

    pub fn left_slope(&self) -> &Rational {
        self.func.left_slope()
    }

    pub fn right_slope(&self) -> &Rational {
        self.func.right_slope()
    }

    pub fn as_pl_func(&self) -> &PlFunc {
        &self.func
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.func.eval(x)
    }

    /// Exact inverse evaluation: the unique `x` with `f(x) = y`.
    pub fn inverse_eval(&self, y: &Rational) -> Rational {
        let mut sols = self.func.preimages(y);
        debug_assert_eq!(sols.len(), 1, "monotone bijection has one preimage");
        sols.pop().expect("monotone bijection attains every value")
    }

    /// The exact piecewise-linear representation of `self ∘ inner`.
    ///
    /// Candidate anchors are `inner`'s anchors together with the preimages
    /// under `inner` of `self`'s anchors; canonicalization then discards
    /// the ones where no slope actually changes.
    pub fn compose(&self, inner: &MonotoneMap) -> MonotoneMap {
        let mut xs: BTreeSet<Rational> = BTreeSet::new();
        for (ax, _) in inner.anchors() {
            xs.insert(ax.clone());
        }
        for (bx, _) in self.anchors() {
            xs.insert(inner.inverse_eval(bx));
        }
        let anchors: Vec<(Rational, Rational)> = xs
            .into_iter()
            .map(|x| {
                let y = self.eval(&inner.eval(&x));
                (x, y)
            })
            .collect();
        // Beyond the extreme candidates the composite is affine, so two
        // sample points pin each tail slope exactly.
        let first_x = &anchors[0].0;
        let last_x = &anchors.last().unwrap().0;
        let one = Rational::one();
        let left_slope = &anchors[0].1 - &self.eval(&inner.eval(&(first_x - &one)));
        let right_slope = &self.eval(&inner.eval(&(last_x + &one))) - &anchors.last().unwrap().1;
        MonotoneMap::new(anchors, left_slope, right_slope)
            .expect("composition of monotone bijections is a monotone bijection")
    }

    /// Swap anchor coordinates (reversing when decreasing) and reciprocate
    /// the tail slopes.
    pub fn invert(&self) -> MonotoneMap {
        let mut anchors: Vec<(Rational, Rational)> = self
            .anchors()
            .iter()
            .map(|(x, y)| (y.clone(), x.clone()))
            .collect();
        let (ls, rs) = match self.direction {
            Direction::Increasing => (
                self.left_slope().recip().unwrap(),
                self.right_slope().recip().unwrap(),
            ),
            Direction::Decreasing => {
                anchors.reverse();
                (
                    self.right_slope().recip().unwrap(),
                    self.left_slope().recip().unwrap(),
                )
            }
        };
        MonotoneMap::new(anchors, ls, rs).expect("inverse of a monotone bijection is one")
    }

    /// The constant `c` with `f(x+1) = f(x) + c` for all `x`, if any.
    ///
    /// A plain map with a true breakpoint can never satisfy this (the
    /// breakpoint pattern would have to repeat forever), so the answer is
    /// `Some` exactly for affine maps; the check below verifies the
    /// identity at every point where either side can change slope.
    pub fn quasi_period(&self) -> Option<Rational> {
        if self.left_slope() != self.right_slope() {
            return None;
        }
        let c = self.left_slope().clone();
        let one = Rational::one();
        for (ax, _) in self.anchors() {
            for x in [ax - &one, ax.clone()] {
                if &self.eval(&(&x + &one)) - &self.eval(&x) != c {
                    return None;
                }
            }
        }
        Some(c)
    }
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonotoneMap({:?}, {:?})", self.direction, self.func)
    }
}

fn infer_direction(anchors: &[(Rational, Rational)]) -> Result<Direction, MapError> {
    if anchors.len() < 2 {
        return Err(MapError::InvalidAnchors("need at least 2 anchors".into()));
    }
    let increasing = anchors.windows(2).all(|w| w[0].1 < w[1].1);
    let decreasing = anchors.windows(2).all(|w| w[0].1 > w[1].1);
    match (increasing, decreasing) {
        (true, false) => Ok(Direction::Increasing),
        (false, true) => Ok(Direction::Decreasing),
        _ => Err(MapError::NotMonotone),
    }
}

/// A strictly monotone bijection of the line satisfying
/// `f(x + 1) = f(x) + c` for a fixed nonzero rational `c`, stored as its
/// fundamental piece on `[0, 1]`.
#[derive(Clone, PartialEq, Eq)]
pub struct QuasiPeriodicMap {
    /// Anchors spanning exactly `[0, 1]`, canonical (no collinear interior).
    anchors: Vec<(Rational, Rational)>,
    c: Rational,
    direction: Direction,
}

impl QuasiPeriodicMap {
    /// Builds the map from its fundamental anchors and quasi-period `c`.
    pub fn from_fundamental(
        anchors: Vec<(Rational, Rational)>,
        c: Rational,
    ) -> Result<Self, MapError> {
        if c.is_zero() {
            return Err(MapError::ZeroPeriod);
        }
        if anchors.len() < 2 {
            return Err(MapError::InvalidAnchors("need at least 2 anchors".into()));
        }
        if anchors[0].0 != Rational::zero() || anchors.last().unwrap().0 != Rational::one() {
            return Err(MapError::InvalidAnchors(
                "fundamental anchors must span [0, 1]".into(),
            ));
        }
        for w in anchors.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(MapError::InvalidAnchors(
                    "anchor x-values must be strictly increasing".into(),
                ));
            }
        }
        let direction = infer_direction(&anchors)?;
        if !direction.matches_sign(&c) {
            // Impossible once the endpoint check passes, but a mismatched
            // sign should not slip through as EndpointMismatch noise.
            return Err(MapError::NotMonotone);
        }
        let found = &anchors.last().unwrap().1 - &anchors[0].1;
        if found != c {
            return Err(MapError::EndpointMismatch { expected: c, found });
        }
        Ok(QuasiPeriodicMap {
            anchors: canonical_fundamental(anchors),
            c,
            direction,
        })
    }

    /// `x ↦ a·x + b` viewed quasi-periodically (`c = a`).
    pub fn affine(a: Rational, b: Rational) -> Result<Self, MapError> {
        Self::from_fundamental(
            vec![(Rational::zero(), b.clone()), (Rational::one(), &a + &b)],
            a,
        )
    }

    /// `x ↦ x + b`, quasi-period 1.
    pub fn translation(b: Rational) -> Self {
        Self::affine(Rational::one(), b).unwrap()
    }

    pub fn identity() -> Self {
        Self::translation(Rational::zero())
    }

    pub fn c(&self) -> &Rational {
        &self.c
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn fundamental_anchors(&self) -> &[(Rational, Rational)] {
        &self.anchors
    }

    /// True when the fundamental piece is a single affine segment; such
    /// maps are globally affine and convert losslessly to [`MonotoneMap`].
    pub fn is_affine(&self) -> bool {
        self.anchors.len() == 2
    }

    pub fn to_plain(&self) -> Option<MonotoneMap> {
        if self.is_affine() {
            Some(MonotoneMap::affine(self.c.clone(), self.anchors[0].1.clone()).unwrap())
        } else {
            None
        }
    }

    /// Converts a plain map that satisfies the translation identity
    /// (necessarily affine) into quasi-periodic form.
    pub fn from_plain(m: &MonotoneMap) -> Option<Self> {
        m.quasi_period()
            .map(|c| Self::affine(c, m.eval(&Rational::zero())).unwrap())
    }

    fn eval_fundamental(&self, z: &Rational) -> Rational {
        debug_assert!(*z >= Rational::zero() && *z <= Rational::one());
        let i = self.anchors.partition_point(|(ax, _)| ax < z);
        if i < self.anchors.len() && &self.anchors[i].0 == z {
            return self.anchors[i].1.clone();
        }
        let (x0, y0) = &self.anchors[i - 1];
        let (x1, y1) = &self.anchors[i];
        y0 + &(&(&(y1 - y0) / &(x1 - x0)) * &(z - x0))
    }

    /// `f(x) = f(x - ⌊x⌋) + ⌊x⌋·c`.
    pub fn eval(&self, x: &Rational) -> Rational {
        let n = x.floor();
        let z = x - &n;
        &self.eval_fundamental(&z) + &(&n * &self.c)
    }

    /// Exact inverse evaluation.
    pub fn inverse_eval(&self, y: &Rational) -> Rational {
        let f0 = &self.anchors[0].1;
        let n = (&(y - f0) / &self.c).floor();
        let target = y - &(&n * &self.c);
        // target lies in the fundamental value range; solve on one segment.
        let z = self.fundamental_inverse(&target);
        z + n
    }

    fn fundamental_inverse(&self, y: &Rational) -> Rational {
        for i in 0..self.anchors.len() - 1 {
            let (x0, y0) = &self.anchors[i];
            let (x1, y1) = &self.anchors[i + 1];
            let inside = match self.direction {
                Direction::Increasing => y0 <= y && y <= y1,
                Direction::Decreasing => y1 <= y && y <= y0,
            };
            if inside {
                let s = &(y1 - y0) / &(x1 - x0);
                return x0 + &(&(y - y0) / &s);
            }
        }
        unreachable!("value outside fundamental range: {y:?} for {self:?}")
    }

    /// `self ∘ inner`, defined when `inner`'s quasi-period is an integer;
    /// the composite then has quasi-period `c_inner · c_outer`.
    pub fn compose(&self, inner: &QuasiPeriodicMap) -> Result<QuasiPeriodicMap, MapError> {
        if !inner.c.is_integer() {
            return Err(MapError::NonIntegerInnerPeriod(inner.c.clone()));
        }
        let mut xs: BTreeSet<Rational> = inner.anchors.iter().map(|(x, _)| x.clone()).collect();
        // Pull back every breakpoint of self's periodic extension that the
        // inner fundamental's value range crosses.
        let v0 = inner.eval(&Rational::zero());
        let v1 = inner.eval(&Rational::one());
        let (lo, hi) = if v0 <= v1 {
            (v0, v1)
        } else {
            (v1, v0)
        };
        for (bx, _) in &self.anchors {
            if *bx == Rational::one() {
                continue; // same breakpoint family as x = 0
            }
            let mut k = (&lo - bx).floor_int();
            loop {
                let beta = bx + &Rational::from_bigint(k.clone());
                if beta > hi {
                    break;
                }
                if beta >= lo {
                    let x = inner.inverse_eval(&beta);
                    if x >= Rational::zero() && x <= Rational::one() {
                        xs.insert(x);
                    }
                }
                k += 1;
            }
        }
        let anchors: Vec<(Rational, Rational)> = xs
            .into_iter()
            .map(|x| {
                let y = self.eval(&inner.eval(&x));
                (x, y)
            })
            .collect();
        QuasiPeriodicMap::from_fundamental(anchors, &inner.c * &self.c)
    }

    /// Inverse within the quasi-periodic class. Exists when `1/c` is an
    /// integer (the inverse then has quasi-period `1/c`) or when the map is
    /// affine; otherwise the inverse fails `f(x+1) = f(x) + const`.
    pub fn invert(&self) -> Result<QuasiPeriodicMap, MapError> {
        let recip = self.c.recip().expect("quasi-period is nonzero");
        if let Some(k) = recip.to_integer() {
            let zero = Rational::zero();
            let one = Rational::one();
            let mut xs: BTreeSet<Rational> = BTreeSet::new();
            xs.insert(zero.clone());
            xs.insert(one.clone());
            // Breakpoints of the inverse are the values f(b) + n·c that
            // land in [0, 1].
            for (_, by) in &self.anchors {
                let mut n = (&(&zero - by) / &self.c).floor_int() - 1;
                let end = (&(&one - by) / &self.c).floor_int() + 1;
                while n <= end {
                    let y = by + &(&Rational::from_bigint(n.clone()) * &self.c);
                    if y > zero && y < one {
                        xs.insert(y);
                    }
                    n += 1;
                }
            }
            let anchors: Vec<(Rational, Rational)> = xs
                .into_iter()
                .map(|y| {
                    let x = self.inverse_eval(&y);
                    (y, x)
                })
                .collect();
            QuasiPeriodicMap::from_fundamental(anchors, Rational::from_bigint(k))
        } else if self.is_affine() {
            let f0 = &self.anchors[0].1;
            QuasiPeriodicMap::affine(recip.clone(), &(-f0) / &self.c)
        } else {
            Err(MapError::NotInvertibleInClass(self.c.clone()))
        }
    }
}

impl fmt::Debug for QuasiPeriodicMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QuasiPeriodicMap({:?}, c = {:?})", self.anchors, self.c)
    }
}

/// Interior collinear anchors dropped; the endpoints at 0 and 1 always stay.
fn canonical_fundamental(anchors: Vec<(Rational, Rational)>) -> Vec<(Rational, Rational)> {
    let n = anchors.len();
    let slope = |i: usize| -> Rational {
        let (x0, y0) = &anchors[i];
        let (x1, y1) = &anchors[i + 1];
        &(y1 - y0) / &(x1 - x0)
    };
    let mut kept = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 || i == n - 1 || slope(i - 1) != slope(i) {
            kept.push(anchors[i].clone());
        }
    }
    kept
}

/// Either representation of a strictly monotone PL bijection, so that
/// automorphism components can be plain maps or quasi-periodic ones.
#[derive(Clone, PartialEq, Eq)]
pub enum PlMap {
    Plain(MonotoneMap),
    Periodic(QuasiPeriodicMap),
}

impl PlMap {
    pub fn identity() -> Self {
        PlMap::Plain(MonotoneMap::identity())
    }

    pub fn direction(&self) -> Direction {
        match self {
            PlMap::Plain(m) => m.direction(),
            PlMap::Periodic(q) => q.direction(),
        }
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        match self {
            PlMap::Plain(m) => m.eval(x),
            PlMap::Periodic(q) => q.eval(x),
        }
    }

    pub fn inverse_eval(&self, y: &Rational) -> Rational {
        match self {
            PlMap::Plain(m) => m.inverse_eval(y),
            PlMap::Periodic(q) => q.inverse_eval(y),
        }
    }

    /// `c` with `f(x+1) = f(x) + c`, when the identity holds.
    pub fn quasi_period(&self) -> Option<Rational> {
        match self {
            PlMap::Plain(m) => m.quasi_period(),
            PlMap::Periodic(q) => Some(q.c().clone()),
        }
    }

    /// `self ∘ inner`. Mixed representations compose when the affine side
    /// converts into the other's class.
    pub fn compose(&self, inner: &PlMap) -> Result<PlMap, MapError> {
        match (self, inner) {
            (PlMap::Plain(g), PlMap::Plain(f)) => Ok(PlMap::Plain(g.compose(f))),
            (PlMap::Periodic(g), PlMap::Periodic(f)) => g.compose(f).map(PlMap::Periodic),
            (PlMap::Plain(g), PlMap::Periodic(f)) => {
                if let Some(fp) = f.to_plain() {
                    return Ok(PlMap::Plain(g.compose(&fp)));
                }
                if let Some(gq) = QuasiPeriodicMap::from_plain(g) {
                    return gq.compose(f).map(PlMap::Periodic);
                }
                Err(MapError::NotComposable)
            }
            (PlMap::Periodic(g), PlMap::Plain(f)) => {
                if let Some(fq) = QuasiPeriodicMap::from_plain(f) {
                    if let Ok(r) = g.compose(&fq) {
                        return Ok(PlMap::Periodic(r));
                    }
                }
                if let Some(gp) = g.to_plain() {
                    return Ok(PlMap::Plain(gp.compose(f)));
                }
                Err(MapError::NotComposable)
            }
        }
    }

    pub fn invert(&self) -> Result<PlMap, MapError> {
        match self {
            PlMap::Plain(m) => Ok(PlMap::Plain(m.invert())),
            PlMap::Periodic(q) => q.invert().map(PlMap::Periodic),
        }
    }
}

impl fmt::Debug for PlMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlMap::Plain(m) => write!(f, "{m:?}"),
            PlMap::Periodic(q) => write!(f, "{q:?}"),
        }
    }
}

// ---------------------------------------------------------------------------
// JSON encoding
//
// {"anchors": [["0","0"],["1","2"]], "left_slope":"1", "right_slope":"3",
//  "direction":"inc"}            — plain map
// {"anchors": [...], "c":"1/2", "direction":"inc"}   — quasi-periodic map
// {"anchors": [...], "left_slope":..., "right_slope":...} — raw PL function
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MapJson {
    anchors: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left_slope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right_slope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<String>,
}

fn parse_rat<E: DeError>(s: &str, field: &str) -> Result<Rational, E> {
    s.parse()
        .map_err(|_| E::custom(format!("field `{field}`: invalid rational {s:?}")))
}

fn parse_anchors<E: DeError>(raw: &[[String; 2]]) -> Result<Vec<(Rational, Rational)>, E> {
    raw.iter()
        .map(|[x, y]| Ok((parse_rat(x, "anchors")?, parse_rat(y, "anchors")?)))
        .collect()
}

fn direction_str(d: Direction) -> &'static str {
    match d {
        Direction::Increasing => "inc",
        Direction::Decreasing => "dec",
    }
}

fn check_direction<E: DeError>(stated: Option<&str>, actual: Direction) -> Result<(), E> {
    match stated {
        None => Ok(()),
        Some(s) if s == direction_str(actual) => Ok(()),
        Some(s) => Err(E::custom(format!(
            "field `direction`: {s:?} contradicts anchors ({})",
            direction_str(actual)
        ))),
    }
}

impl Serialize for MonotoneMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MapJson {
            anchors: self
                .anchors()
                .iter()
                .map(|(x, y)| [x.to_string(), y.to_string()])
                .collect(),
            left_slope: Some(self.left_slope().to_string()),
            right_slope: Some(self.right_slope().to_string()),
            direction: Some(direction_str(self.direction).to_owned()),
            c: None,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MonotoneMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MapJson::deserialize(deserializer)?;
        monotone_from_json::<D::Error>(&raw)
    }
}

fn monotone_from_json<E: DeError>(raw: &MapJson) -> Result<MonotoneMap, E> {
    if raw.c.is_some() {
        return Err(E::custom("field `c`: unexpected on a plain map"));
    }
    let anchors = parse_anchors(&raw.anchors)?;
    let ls = raw
        .left_slope
        .as_deref()
        .ok_or_else(|| E::custom("missing field `left_slope`"))?;
    let rs = raw
        .right_slope
        .as_deref()
        .ok_or_else(|| E::custom("missing field `right_slope`"))?;
    let m = MonotoneMap::new(
        anchors,
        parse_rat(ls, "left_slope")?,
        parse_rat(rs, "right_slope")?,
    )
    .map_err(|e| E::custom(format!("field `anchors`: {e}")))?;
    check_direction(raw.direction.as_deref(), m.direction())?;
    Ok(m)
}

impl Serialize for QuasiPeriodicMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MapJson {
            anchors: self
                .anchors
                .iter()
                .map(|(x, y)| [x.to_string(), y.to_string()])
                .collect(),
            left_slope: None,
            right_slope: None,
            direction: Some(direction_str(self.direction).to_owned()),
            c: Some(self.c.to_string()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuasiPeriodicMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MapJson::deserialize(deserializer)?;
        periodic_from_json::<D::Error>(&raw)
    }
}

fn periodic_from_json<E: DeError>(raw: &MapJson) -> Result<QuasiPeriodicMap, E> {
    let c = raw
        .c
        .as_deref()
        .ok_or_else(|| E::custom("missing field `c`"))?;
    let anchors = parse_anchors(&raw.anchors)?;
    let q = QuasiPeriodicMap::from_fundamental(anchors, parse_rat(c, "c")?)
        .map_err(|e| E::custom(format!("field `anchors`: {e}")))?;
    check_direction(raw.direction.as_deref(), q.direction())?;
    Ok(q)
}

impl Serialize for PlMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PlMap::Plain(m) => m.serialize(serializer),
            PlMap::Periodic(q) => q.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for PlMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MapJson::deserialize(deserializer)?;
        if raw.c.is_some() {
            periodic_from_json::<D::Error>(&raw).map(PlMap::Periodic)
        } else {
            monotone_from_json::<D::Error>(&raw).map(PlMap::Plain)
        }
    }
}

impl Serialize for PlFunc {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MapJson {
            anchors: self
                .anchors
                .iter()
                .map(|(x, y)| [x.to_string(), y.to_string()])
                .collect(),
            left_slope: Some(self.left_slope.to_string()),
            right_slope: Some(self.right_slope.to_string()),
            direction: None,
            c: None,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PlFunc {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MapJson::deserialize(deserializer)?;
        let anchors = parse_anchors(&raw.anchors)?;
        let ls = raw
            .left_slope
            .as_deref()
            .ok_or_else(|| DeError::custom("missing field `left_slope`"))?;
        let rs = raw
            .right_slope
            .as_deref()
            .ok_or_else(|| DeError::custom("missing field `right_slope`"))?;
        PlFunc::new(
            anchors,
            parse_rat(ls, "left_slope")?,
            parse_rat(rs, "right_slope")?,
        )
        .map_err(|e| DeError::custom(format!("field `anchors`: {e}")))
    }
}

pub(crate) fn bigint_to_rational(n: &BigInt) -> Rational {
    Rational::from_bigint(n.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn ri(n: i64) -> Rational {
        Rational::from_int(n)
    }

    fn demo_map() -> MonotoneMap {
        // anchors [(0,0),(1,2)], tails 1 and 3
        MonotoneMap::new(vec![(ri(0), ri(0)), (ri(1), ri(2))], ri(1), ri(3)).unwrap()
    }

    #[test]
    fn eval_interpolates_and_extrapolates() {
        let f = demo_map();
        assert_eq!(f.eval(&r(1, 2)), ri(1));
        assert_eq!(f.eval(&ri(-2)), ri(-2));
        assert_eq!(f.eval(&ri(2)), ri(5));
        let id = MonotoneMap::identity();
        assert_eq!(id.eval(&r(7, 3)), r(7, 3));
    }

    /// Independent route for the quasi-periodic rule: walk x back into
    /// [0, 1) one unit step at a time, adding c per step.
    fn qp_eval_by_steps(f: &QuasiPeriodicMap, x: &Rational) -> Rational {
        let mut x = x.clone();
        let mut shift = Rational::zero();
        while x >= Rational::one() {
            x = x - Rational::one();
            shift += f.c().clone();
        }
        while x < Rational::zero() {
            x = x + Rational::one();
            shift -= f.c().clone();
        }
        &f.eval(&x) + &shift
    }

    #[test]
    fn qp_eval_matches_step_oracle() {
        // identity on [0,1] scaled so f(1) = 1/2
        let f =
            QuasiPeriodicMap::from_fundamental(vec![(ri(0), ri(0)), (ri(1), r(1, 2))], r(1, 2))
                .unwrap();
        assert_eq!(qp_eval_by_steps(&f, &r(5, 2)), r(5, 4));
        assert_eq!(f.eval(&r(5, 2)), r(5, 4));
        for num in -9..=9 {
            let x = Rational::new(num, 4);
            assert_eq!(f.eval(&x), qp_eval_by_steps(&f, &x));
        }
    }

    #[test]
    fn compose_examples() {
        let g = MonotoneMap::translation(ri(1));
        let f = MonotoneMap::translation(ri(2));
        assert_eq!(g.compose(&f), MonotoneMap::translation(ri(3)));

        let g = MonotoneMap::affine(ri(2), ri(0)).unwrap();
        let f = demo_map();
        let gf = g.compose(&f);
        assert_eq!(gf.anchors(), &[(ri(0), ri(0)), (ri(1), ri(4))]);
        assert_eq!(gf.left_slope(), &ri(2));
        assert_eq!(gf.right_slope(), &ri(6));
    }

    #[test]
    fn inverse_examples() {
        let two_x = MonotoneMap::affine(ri(2), ri(0)).unwrap();
        assert_eq!(two_x.invert(), MonotoneMap::affine(r(1, 2), ri(0)).unwrap());

        let f = demo_map();
        let inv = f.invert();
        assert_eq!(inv.anchors(), &[(ri(0), ri(0)), (ri(2), ri(1))]);
        assert_eq!(inv.left_slope(), &ri(1));
        assert_eq!(inv.right_slope(), &r(1, 3));

        let neg = MonotoneMap::affine(ri(-1), ri(0)).unwrap();
        assert_eq!(neg.invert(), neg);

        assert_eq!(f.compose(&f.invert()), MonotoneMap::identity());
        assert_eq!(f.invert().compose(&f), MonotoneMap::identity());
    }

    #[test]
    fn from_fundamental_examples() {
        let id = QuasiPeriodicMap::from_fundamental(vec![(ri(0), ri(0)), (ri(1), ri(1))], ri(1))
            .unwrap();
        assert_eq!(id, QuasiPeriodicMap::identity());

        let halving =
            QuasiPeriodicMap::from_fundamental(vec![(ri(0), ri(0)), (ri(1), r(1, 2))], r(1, 2))
                .unwrap();
        for num in -6..=6 {
            let x = Rational::new(num, 3);
            assert_eq!(
                halving.eval(&(&x + &ri(1))),
                &halving.eval(&x) + &r(1, 2)
            );
        }

        let err =
            QuasiPeriodicMap::from_fundamental(vec![(ri(0), ri(0)), (ri(1), ri(1))], r(1, 2));
        assert!(matches!(err, Err(MapError::EndpointMismatch { .. })));

        let err = QuasiPeriodicMap::from_fundamental(vec![(ri(0), ri(0)), (ri(1), ri(0))], ri(0));
        assert!(matches!(err, Err(MapError::ZeroPeriod)));

        let err = QuasiPeriodicMap::from_fundamental(
            vec![(ri(0), ri(0)), (r(1, 2), ri(2)), (ri(1), ri(1))],
            ri(1),
        );
        assert!(matches!(err, Err(MapError::NotMonotone)));
    }

    #[test]
    fn quasi_period_detection() {
        assert_eq!(MonotoneMap::identity().quasi_period(), Some(ri(1)));
        let halving = MonotoneMap::affine(r(1, 2), ri(0)).unwrap();
        assert_eq!(halving.quasi_period(), Some(r(1, 2)));
        let f = MonotoneMap::new(vec![(ri(0), ri(0)), (ri(1), ri(2))], ri(1), ri(1)).unwrap();
        assert_eq!(f.quasi_period(), None);
        assert_eq!(&f.eval(&ri(2)) - &f.eval(&ri(1)), ri(1));
        assert_eq!(&f.eval(&ri(1)) - &f.eval(&ri(0)), ri(2));
    }

    #[test]
    fn qp_inverse_round_trip() {
        let f = QuasiPeriodicMap::from_fundamental(
            vec![(ri(0), ri(0)), (r(1, 3), r(3, 4)), (ri(1), ri(1))],
            ri(1),
        )
        .unwrap();
        let inv = f.invert().unwrap();
        for num in -8..=8 {
            let x = Rational::new(num, 5);
            assert_eq!(inv.eval(&f.eval(&x)), x);
            assert_eq!(f.inverse_eval(&f.eval(&x)), x);
        }
        assert_eq!(f.compose(&inv).unwrap(), QuasiPeriodicMap::identity());
    }

    #[test]
    fn qp_compose_periods_multiply() {
        let doubling = QuasiPeriodicMap::affine(ri(2), ri(0)).unwrap();
        let halving = QuasiPeriodicMap::affine(r(1, 2), ri(0)).unwrap();
        // affine halving ∘ halving stays quasi-periodic with c = 1/4
        let hh = PlMap::Periodic(halving.clone())
            .compose(&PlMap::Periodic(halving.clone()))
            .unwrap();
        assert_eq!(hh.quasi_period(), Some(r(1, 4)));
        // integer inner period composes in-class
        let dd = doubling.compose(&doubling).unwrap();
        assert_eq!(dd.c(), &ri(4));
        // non-integer inner period is rejected for non-affine data
        assert!(matches!(
            halving.compose(&halving),
            Err(MapError::NonIntegerInnerPeriod(_))
        ));
    }

    #[test]
    fn non_affine_half_period_composition_is_not_quasi_periodic() {
        // Non-affine fundamental with c = 1/2; the square of the function
        // violates f(x+1) = f(x) + const.
        let f = QuasiPeriodicMap::from_fundamental(
            vec![(ri(0), ri(0)), (r(1, 2), r(3, 8)), (ri(1), r(1, 2))],
            r(1, 2),
        )
        .unwrap();
        let sq = |x: &Rational| f.eval(&f.eval(x));
        let mut increments = BTreeSet::new();
        for num in 0..8 {
            let x = Rational::new(num, 4);
            increments.insert(&sq(&(&x + &ri(1))) - &sq(&x));
        }
        assert!(increments.len() > 1, "found no counterexample");
    }

    #[test]
    fn canonical_form_is_stable() {
        // Interior collinear anchor disappears.
        let f = MonotoneMap::new(
            vec![(ri(0), ri(0)), (ri(1), ri(1)), (ri(2), ri(2)), (ri(3), ri(5))],
            ri(1),
            ri(3),
        )
        .unwrap();
        assert_eq!(f.anchors().len(), 2);
        // A fully affine anchor list reduces to the 0/1 convention.
        let g = MonotoneMap::new(vec![(ri(3), ri(6)), (ri(5), ri(10))], ri(2), ri(2)).unwrap();
        assert_eq!(g, MonotoneMap::affine(ri(2), ri(0)).unwrap());
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            MonotoneMap::new(vec![(ri(0), ri(0)), (ri(1), ri(0))], ri(1), ri(1)),
            Err(MapError::NotMonotone)
        ));
        assert!(matches!(
            MonotoneMap::new(vec![(ri(0), ri(0)), (ri(1), ri(1))], ri(0), ri(1)),
            Err(MapError::ZeroSlope)
        ));
        assert!(matches!(
            MonotoneMap::new(vec![(ri(0), ri(0)), (ri(1), ri(1))], ri(-1), ri(1)),
            Err(MapError::SlopeDirection)
        ));
        assert!(matches!(
            MonotoneMap::new(vec![(ri(0), ri(0))], ri(1), ri(1)),
            Err(MapError::InvalidAnchors(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let f = demo_map();
        let js = serde_json::to_string(&f).unwrap();
        assert!(js.contains("\"direction\":\"inc\""));
        let back: MonotoneMap = serde_json::from_str(&js).unwrap();
        assert_eq!(back, f);

        let q =
            QuasiPeriodicMap::from_fundamental(vec![(ri(0), ri(0)), (ri(1), r(1, 2))], r(1, 2))
                .unwrap();
        let js = serde_json::to_string(&PlMap::Periodic(q.clone())).unwrap();
        assert!(js.contains("\"c\":\"1/2\""));
        let back: PlMap = serde_json::from_str(&js).unwrap();
        assert_eq!(back, PlMap::Periodic(q));

        let err: Result<MonotoneMap, _> =
            serde_json::from_str(r#"{"anchors":[["0","0"],["1","1"]],"right_slope":"1"}"#);
        assert!(err.unwrap_err().to_string().contains("left_slope"));
    }
}
