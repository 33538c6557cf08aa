//! Regions U and their essentially interior families.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::oracle::SetOracle;

#[derive(Debug, Clone)]
pub enum Region {
    OpenBall { center: Point, radius: f64 },
    ClosedBall { center: Point, radius: f64 },
    /// closed axis box
    Box { lo: Point, hi: Point },
    Whole { dim: usize },
    Set(SetOracle),
    /// {x : dist(x, inner) < eps}
    Fattened { inner: std::boxed::Box<Region>, eps: f64 },
    /// {x in parent : dist(x, complement of parent) >= gap}
    Inset { parent: std::boxed::Box<Region>, gap: f64 },
}

impl Region {
    pub fn open_ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidRegion(format!("radius {radius} must be positive")));
        }
        Ok(Region::OpenBall { center, radius })
    }

    pub fn closed_ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidRegion(format!("radius {radius} must be positive")));
        }
        Ok(Region::ClosedBall { center, radius })
    }

    pub fn boxed(lo: Point, hi: Point) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidRegion("box needs lo <= hi componentwise".into()));
        }
        Ok(Region::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::OpenBall { center, .. } | Region::ClosedBall { center, .. } => center.len(),
            Region::Box { lo, .. } => lo.len(),
            Region::Whole { dim } => *dim,
            Region::Set(s) => s.dim,
            Region::Fattened { inner, .. } => inner.dim(),
            Region::Inset { parent, .. } => parent.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::OpenBall { center, radius } => geometry::dist(x, center) < *radius,
            Region::ClosedBall { center, radius } => geometry::dist(x, center) <= *radius,
            Region::Box { lo, hi } => x.iter().zip(lo).zip(hi).all(|((v, l), h)| v >= l && v <= h),
            Region::Whole { .. } => true,
            Region::Set(s) => s.contains(x),
            Region::Fattened { inner, eps } => inner.dist(x) < *eps,
            Region::Inset { parent, gap } => parent.contains(x) && parent.dist_to_complement(x) >= *gap,
        }
    }

    /// Distance to the region (its closure).
    pub fn dist(&self, x: &[f64]) -> f64 {
        match self {
            Region::OpenBall { center, radius } | Region::ClosedBall { center, radius } => {
                (geometry::dist(x, center) - radius).max(0.0)
            }
            Region::Box { lo, hi } => {
                x.iter().zip(lo).zip(hi).map(|((v, l), h)| (l - v).max(v - h).max(0.0).powi(2)).sum::<f64>().sqrt()
            }
            Region::Whole { .. } => 0.0,
            Region::Set(s) => s.dist(x),
            Region::Fattened { inner, eps } => (inner.dist(x) - eps).max(0.0),
            // lower bound: the inset lies inside the parent
            Region::Inset { parent, gap } => {
                if self.contains(x) {
                    0.0
                } else if parent.contains(x) {
                    (gap - parent.dist_to_complement(x)).max(0.0)
                } else {
                    parent.dist(x) + gap
                }
            }
        }
    }

    /// Distance from x to the complement (0 outside). Lower bound for derived regions.
    pub fn dist_to_complement(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            Region::OpenBall { center, radius } | Region::ClosedBall { center, radius } => {
                (radius - geometry::dist(x, center)).max(0.0)
            }
            Region::Box { lo, hi } => {
                x.iter().zip(lo).zip(hi).map(|((v, l), h)| (v - l).min(h - v)).fold(f64::INFINITY, f64::min).max(0.0)
            }
            Region::Whole { .. } => f64::INFINITY,
            Region::Set(s) => s.interior_dist(x).unwrap_or(0.0),
            Region::Fattened { inner, eps } => (eps - inner.dist(x)).max(0.0),
            Region::Inset { parent, gap } => (parent.dist_to_complement(x) - gap).max(0.0),
        }
    }

    pub fn has_interior(&self) -> bool {
        match self {
            Region::Box { lo, hi } => lo.iter().zip(hi).all(|(l, h)| l < h),
            Region::Set(s) => s.has_interior_dist(),
            Region::Inset { parent, .. } => parent.has_interior(),
            _ => true,
        }
    }

    /// Bounding box; `window` is used (and required) for unbounded kinds.
    pub fn bbox(&self, window: Option<&(Point, Point)>) -> Result<(Point, Point)> {
        match self {
            Region::OpenBall { center, radius } | Region::ClosedBall { center, radius } => {
                Ok((center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect()))
            }
            Region::Box { lo, hi } => Ok((lo.clone(), hi.clone())),
            Region::Whole { .. } | Region::Set(_) => {
                window.cloned().ok_or_else(|| Error::Unbounded("whole-space or set region".into()))
            }
            Region::Fattened { inner, eps } => {
                let (lo, hi) = inner.bbox(window)?;
                Ok((lo.iter().map(|v| v - eps).collect(), hi.iter().map(|v| v + eps).collect()))
            }
            Region::Inset { parent, .. } => parent.bbox(window),
        }
    }

    /// Characteristic size: the largest half-width of the bounding box.
    pub fn scale(&self, window: Option<&(Point, Point)>) -> Result<f64> {
        let (lo, hi) = self.bbox(window)?;
        let s = lo.iter().zip(&hi).map(|(l, h)| (h - l) / 2.0).fold(0.0, f64::max);
        Ok(if s > 0.0 { s } else { 1.0 })
    }

    /// The open eps-fattening B_eps(U).
    pub fn fatten(&self, eps: f64) -> Region {
        match self {
            Region::OpenBall { center, radius } | Region::ClosedBall { center, radius } => {
                Region::OpenBall { center: center.clone(), radius: radius + eps }
            }
            Region::Whole { dim } => Region::Whole { dim: *dim },
            r => Region::Fattened { inner: std::boxed::Box::new(r.clone()), eps },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Region::OpenBall { center, radius } => format!("open ball({center:?}; {radius})"),
            Region::ClosedBall { center, radius } => format!("closed ball({center:?}; {radius})"),
            Region::Box { lo, hi } => format!("box({lo:?}; {hi:?})"),
            Region::Whole { dim } => format!("R^{dim}"),
            Region::Set(s) => format!("set {}", s.label),
            Region::Fattened { inner, eps } => format!("B_{eps}({})", inner.describe()),
            Region::Inset { parent, gap } => format!("inset {gap} of {}", parent.describe()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EIMember {
    pub region: Region,
    /// ball radius, or the per-axis shrink for boxes
    pub radius: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct EIFamily {
    pub parent: Region,
    pub members: Vec<EIMember>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EIMemberSummary {
    pub radius: f64,
    pub gap: f64,
    pub region: String,
}

impl EIFamily {
    pub fn summary(&self) -> Vec<EIMemberSummary> {
        self.members
            .iter()
            .map(|m| EIMemberSummary { radius: m.radius, gap: m.gap, region: m.region.describe() })
            .collect()
    }
}

/// Nested essentially interior members with certified gaps.
///
/// Balls: B_rho with rho_i = delta (1 - 2^-i), gap delta 2^-i. Boxes shrink each
/// axis by halfwidth 2^-i. Sets use insets by scale 2^-i (needs a window for the scale).
pub fn ei_family_for(region: &Region, stages: usize, window: Option<&(Point, Point)>) -> Result<EIFamily> {
    if !region.has_interior() {
        return Err(Error::EmptyInterior);
    }
    let stages = stages.max(1);
    let mut members = Vec::with_capacity(stages);
    for i in 1..=stages {
        let f = 0.5f64.powi(i as i32);
        let m = match region {
            Region::OpenBall { center, radius } | Region::ClosedBall { center, radius } => EIMember {
                region: Region::OpenBall { center: center.clone(), radius: radius * (1.0 - f) },
                radius: radius * (1.0 - f),
                gap: radius * f,
            },
            Region::Box { lo, hi } => {
                let shrink: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / 2.0 * f).collect();
                EIMember {
                    region: Region::Box {
                        lo: lo.iter().zip(&shrink).map(|(l, s)| l + s).collect(),
                        hi: hi.iter().zip(&shrink).map(|(h, s)| h - s).collect(),
                    },
                    radius: shrink.iter().cloned().fold(f64::INFINITY, f64::min),
                    gap: shrink.iter().cloned().fold(f64::INFINITY, f64::min),
                }
            }
            Region::Whole { .. } => {
                members.push(EIMember { region: region.clone(), radius: f64::INFINITY, gap: f64::INFINITY });
                break;
            }
            other => {
                let s = other.scale(window)?;
                EIMember {
                    region: Region::Inset { parent: std::boxed::Box::new(other.clone()), gap: s * f },
                    radius: s * f,
                    gap: s * f,
                }
            }
        };
        members.push(m);
    }
    Ok(EIFamily { parent: region.clone(), members })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_family() {
        let r = Region::open_ball(vec![0.0, 0.0], 1.0).unwrap();
        let fam = ei_family_for(&r, 3, None).unwrap();
        let radii: Vec<f64> = fam.members.iter().map(|m| m.radius).collect();
        let gaps: Vec<f64> = fam.members.iter().map(|m| m.gap).collect();
        assert_eq!(radii, vec![0.5, 0.75, 0.875]);
        assert_eq!(gaps, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn unit_interval_family() {
        let r = Region::boxed(vec![0.0], vec![1.0]).unwrap();
        let fam = ei_family_for(&r, 2, None).unwrap();
        match (&fam.members[0].region, &fam.members[1].region) {
            (Region::Box { lo: a, hi: b }, Region::Box { lo: c, hi: d }) => {
                assert_eq!((a[0], b[0], c[0], d[0]), (0.25, 0.75, 0.125, 0.875));
            }
            _ => panic!("box members expected"),
        }
        assert_eq!(fam.members[0].gap, 0.25);
        assert_eq!(fam.members[1].gap, 0.125);
    }

    #[test]
    fn singleton_has_no_interior() {
        let r = Region::boxed(vec![0.3, 0.3], vec![0.3, 0.3]).unwrap();
        assert_eq!(ei_family_for(&r, 3, None).unwrap_err(), Error::EmptyInterior);
    }

    #[test]
    fn invalid_regions_rejected() {
        assert!(Region::open_ball(vec![0.0], 0.0).is_err());
        assert!(Region::boxed(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn fattened_box_membership() {
        let r = Region::boxed(vec![0.0], vec![1.0]).unwrap().fatten(0.1);
        assert!(r.contains(&[-0.05]) && r.contains(&[1.09]) && !r.contains(&[1.1]));
    }
}
