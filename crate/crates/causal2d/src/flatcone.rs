//! Events, causal order, and causal automorphisms of two-dimensional
//! Minkowski space, in both `(x, t)` and null coordinates.
//!
//! Null coordinates are `u = x + t`, `v = x - t`; a future-directed causal
//! step increases `u` and decreases `v`, which turns the cone inequality
//! `Δt ≥ |Δx|` into the pair `Δu ≥ 0 ∧ Δv ≤ 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exactmaps::{Direction, PlMap};
use crate::rational::Rational;
use crate::sample::SampleSpec;

/// A point of the plane in `(x, t)` coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Event {
    pub x: Rational,
    pub t: Rational,
}

impl Event {
    pub fn new(x: Rational, t: Rational) -> Self {
        Event { x, t }
    }

    pub fn to_null(&self) -> NullEvent {
        null_coords(self)
    }
}

/// The same point in null coordinates.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct NullEvent {
    pub u: Rational,
    pub v: Rational,
}

impl NullEvent {
    pub fn new(u: Rational, v: Rational) -> Self {
        NullEvent { u, v }
    }

    pub fn to_event(&self) -> Event {
        event_coords(self)
    }
}

/// `u = x + t`, `v = x - t`.
pub fn null_coords(e: &Event) -> NullEvent {
    NullEvent {
        u: &e.x + &e.t,
        v: &e.x - &e.t,
    }
}

/// Inverse of [`null_coords`]: `x = (u+v)/2`, `t = (u-v)/2`.
pub fn event_coords(n: &NullEvent) -> Event {
    let half = Rational::new(1, 2);
    Event {
        x: &(&n.u + &n.v) * &half,
        t: &(&n.u - &n.v) * &half,
    }
}

/// Causal relation `p ≤ q`: `q` lies in the closed future cone of `p`.
pub fn causally_leq(p: &Event, q: &Event) -> bool {
    let du = &(&q.x + &q.t) - &(&p.x + &p.t);
    let dv = &(&q.x - &q.t) - &(&p.x - &p.t);
    !du.is_negative() && !dv.is_positive()
}

/// Chronological relation `p ≪ q`: the open cone interior.
pub fn chronologically_ll(p: &Event, q: &Event) -> bool {
    let du = &(&q.x + &q.t) - &(&p.x + &p.t);
    let dv = &(&q.x - &q.t) - &(&p.x - &p.t);
    du.is_positive() && dv.is_negative()
}

/// Orientation kind of a causal automorphism.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Both component maps increasing; null families are preserved.
    Proper,
    /// Both component maps decreasing; null families are exchanged.
    Flip,
}

impl Kind {
    pub fn compose(self, other: Kind) -> Kind {
        if self == other {
            Kind::Proper
        } else {
            Kind::Flip
        }
    }

    fn required_direction(self) -> Direction {
        match self {
            Kind::Proper => Direction::Increasing,
            Kind::Flip => Direction::Decreasing,
        }
    }
}

/// Errors from building or combining automorphisms.
#[derive(Debug, thiserror::Error)]
pub enum FlatconeError {
    #[error("component map directions contradict the stated kind")]
    DirectionMismatch,
    #[error(transparent)]
    Map(#[from] crate::exactmaps::MapError),
}

/// A causal automorphism of the plane: a monotone-map pair acting on null
/// coordinates, `(u, v) ↦ (φ(u), ψ(v))` for `Proper` and
/// `(u, v) ↦ (φ(v), ψ(u))` for `Flip`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "AutoJson", into = "AutoJson")]
pub struct CausalAutomorphism {
    kind: Kind,
    phi: PlMap,
    psi: PlMap,
}

#[derive(Serialize, Deserialize, Clone)]
struct AutoJson {
    kind: Kind,
    phi: PlMap,
    psi: PlMap,
}

impl From<CausalAutomorphism> for AutoJson {
    fn from(a: CausalAutomorphism) -> Self {
        AutoJson {
            kind: a.kind,
            phi: a.phi,
            psi: a.psi,
        }
    }
}

impl TryFrom<AutoJson> for CausalAutomorphism {
    type Error = FlatconeError;

    fn try_from(raw: AutoJson) -> Result<Self, Self::Error> {
        CausalAutomorphism::new(raw.kind, raw.phi, raw.psi)
    }
}

impl CausalAutomorphism {
    pub fn new(kind: Kind, phi: PlMap, psi: PlMap) -> Result<Self, FlatconeError> {
        let want = kind.required_direction();
        if phi.direction() != want || psi.direction() != want {
            return Err(FlatconeError::DirectionMismatch);
        }
        Ok(CausalAutomorphism { kind, phi, psi })
    }

    pub fn identity() -> Self {
        CausalAutomorphism {
            kind: Kind::Proper,
            phi: PlMap::identity(),
            psi: PlMap::identity(),
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn phi(&self) -> &PlMap {
        &self.phi
    }

    pub fn psi(&self) -> &PlMap {
        &self.psi
    }

    pub fn apply_null(&self, n: &NullEvent) -> NullEvent {
        match self.kind {
            Kind::Proper => NullEvent {
                u: self.phi.eval(&n.u),
                v: self.psi.eval(&n.v),
            },
            Kind::Flip => NullEvent {
                u: self.phi.eval(&n.v),
                v: self.psi.eval(&n.u),
            },
        }
    }

    pub fn apply(&self, e: &Event) -> Event {
        self.apply_null(&e.to_null()).to_event()
    }

    /// `self ∘ inner`, exact: applying the result equals applying `inner`
    /// first and `self` second. The kind table is the ℤ₂ product.
    pub fn compose(&self, inner: &CausalAutomorphism) -> Result<Self, FlatconeError> {
        let (phi, psi) = match self.kind {
            Kind::Proper => (
                self.phi.compose(&inner.phi)?,
                self.psi.compose(&inner.psi)?,
            ),
            Kind::Flip => (
                self.phi.compose(&inner.psi)?,
                self.psi.compose(&inner.phi)?,
            ),
        };
        Ok(CausalAutomorphism {
            kind: self.kind.compose(inner.kind),
            phi,
            psi,
        })
    }

    pub fn invert(&self) -> Result<Self, FlatconeError> {
        let (phi, psi) = match self.kind {
            Kind::Proper => (self.phi.invert()?, self.psi.invert()?),
            Kind::Flip => (self.psi.invert()?, self.phi.invert()?),
        };
        Ok(CausalAutomorphism {
            kind: self.kind,
            phi,
            psi,
        })
    }
}

/// One violating pair found by [`verify_order_iso`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderViolation {
    pub p: Event,
    pub q: Event,
}

/// Outcome of an order-isomorphism check over sampled pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub checked: usize,
    pub failures: Vec<OrderViolation>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks, for every sampled pair, that the point map preserves both the
/// causal and the chronological relation in both directions. Works on raw
/// point maps so order-breaking candidates can be fed through the same
/// path as genuine automorphisms.
pub fn verify_order_iso<F>(map: F, spec: &SampleSpec) -> Report
where
    F: Fn(&Event) -> Event + Sync,
{
    let pairs = spec.event_pairs();
    let mut failures: Vec<(usize, OrderViolation)> = pairs
        .par_iter()
        .enumerate()
        .filter_map(|(i, (p, q))| {
            let fp = map(p);
            let fq = map(q);
            let ok = causally_leq(p, q) == causally_leq(&fp, &fq)
                && causally_leq(q, p) == causally_leq(&fq, &fp)
                && chronologically_ll(p, q) == chronologically_ll(&fp, &fq)
                && chronologically_ll(q, p) == chronologically_ll(&fq, &fp);
            if ok {
                None
            } else {
                Some((
                    i,
                    OrderViolation {
                        p: p.clone(),
                        q: q.clone(),
                    },
                ))
            }
        })
        .collect();
    failures.sort_by_key(|(i, _)| *i);
    Report {
        checked: pairs.len(),
        failures: failures.into_iter().map(|(_, f)| f).collect(),
    }
}
