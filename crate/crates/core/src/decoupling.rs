//! Uniform and quasiuniform infima of decoupled sums, the diamond coupling and the
//! firm coupling quantities, all read off refinement traces.
//!
//! One "pass" walks the level schedule for a given x1-region: at level j it forms the
//! pairs (x1, x2) with d(x1, x2) < eta_j, records the least decoupled sum and, when asked,
//! the largest diamond value. Quantities that must be compared (the liminf and limsup of
//! the same pair family, the infimum of the sum) share clouds so the textbook inequalities
//! hold level by level and not only in the limit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::geometry::{self, Point};
use crate::oracle::FnOracle;
use crate::region::{ei_family_for, Region};
use crate::sampling::{domain_boundary_points, local_grid, SampleScheme, SpatialHash};
use crate::verdict::{classify_trace, trace_verdict, Diagnostics, Trace, TraceClass, Verdict};

const LIMINF_NOTE: &str = "liminf sampled from above: the estimate can only decrease under refinement";
const LIMSUP_NOTE: &str = "limsup sampled from below: the estimate can only increase under refinement";

/// Per-level base data on U shared by every pass.
struct LevelBase {
    eta: f64,
    spacing: f64,
    cloud: Vec<Point>,
    dpts: Vec<Point>,
    dsums: Vec<f64>,
    dhash: SpatialHash,
    inf: f64,
    inf_interior: f64,
}

pub(crate) struct Ctx<'a> {
    pub f1: &'a FnOracle,
    pub f2: &'a FnOracle,
    pub u: &'a Region,
    pub scheme: &'a SampleScheme,
    levels: Vec<LevelBase>,
}

#[derive(Clone)]
struct Extremal {
    x1: Point,
    x2: Point,
}

/// Recoupling test attached to a pass: for every pair and every eps, look for a point x
/// whose sum undercuts f1(x1) + f2(x2) + eps (inside B_eps(x1) when `firm`).
#[derive(Debug, Clone)]
pub(crate) struct CheckSpec {
    pub eps: Vec<f64>,
    pub firm: bool,
    pub x_in_u: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct WorstPair {
    pub deficit: f64,
    pub d12: f64,
    pub x1: Point,
    pub x2: Point,
    pub sum12: f64,
}

impl WorstPair {
    /// Larger deficit first, then the closer pair, then lexicographic order.
    pub(crate) fn beats(&self, o: &WorstPair) -> bool {
        if self.deficit != o.deficit {
            return self.deficit > o.deficit;
        }
        if self.d12 != o.d12 {
            return self.d12 < o.d12;
        }
        geometry::lex_cmp(&self.x1, &o.x1).then(geometry::lex_cmp(&self.x2, &o.x2)).is_lt()
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LevelCheck {
    pub eta: f64,
    pub pairs: usize,
    pub fails: usize,
    pub worst: Option<WorstPair>,
}

impl LevelCheck {
    pub(crate) fn absorb(&mut self, o: LevelCheck) {
        self.pairs += o.pairs;
        self.fails += o.fails;
        if let Some(w) = o.worst {
            if self.worst.as_ref().is_none_or(|b| w.beats(b)) {
                self.worst = Some(w);
            }
        }
    }
}

pub(crate) struct PassSpec<'s> {
    pub label: String,
    pub regions: Vec<Region>,
    pub use_base: bool,
    pub x2_within: bool,
    pub eta_factor: f64,
    pub want_theta: bool,
    pub alphas: Vec<f64>,
    pub alpha_x2_within: bool,
    pub extra: Option<&'s [Vec<Point>]>,
    pub keep_clouds: bool,
    pub check: Option<CheckSpec>,
}

pub(crate) struct PassOut {
    pub lambda: Trace,
    pub theta: Trace,
    pub theta_alpha: Vec<Trace>,
    pub sum_sup: Trace,
    pub clouds: Vec<Vec<Point>>,
    pub argmin: Option<(Point, Point, f64)>,
    pub argmax: Option<(Point, Point, f64)>,
    /// [eps index][level]
    pub checks: Vec<Vec<LevelCheck>>,
}

struct Agg {
    min: f64,
    min_pair: Option<(Point, Point)>,
    max: f64,
    max_pair: Option<(Point, Point)>,
    alpha_max: Vec<f64>,
    sum_sup: f64,
    checks: Vec<LevelCheck>,
    pairs: usize,
    new_x1: Vec<Point>,
}

impl Agg {
    fn new(alphas: usize, checks: usize) -> Self {
        Agg {
            min: f64::INFINITY,
            min_pair: None,
            max: f64::NEG_INFINITY,
            max_pair: None,
            alpha_max: vec![f64::NEG_INFINITY; alphas],
            sum_sup: f64::NEG_INFINITY,
            checks: vec![LevelCheck::default(); checks],
            pairs: 0,
            new_x1: vec![],
        }
    }
}

fn check_dims(f1: &FnOracle, f2: &FnOracle, u: &Region) -> Result<()> {
    let d = u.dim();
    for f in [f1, f2] {
        if f.dim != d {
            return Err(Error::DimensionMismatch { expected: d, got: f.dim });
        }
    }
    Ok(())
}

fn finite_sum(f1: &FnOracle, f2: &FnOracle, x: &[f64]) -> f64 {
    let (a, b) = (f1.value(x), f2.value(x));
    if a.is_finite() && b.is_finite() {
        a + b
    } else {
        f64::INFINITY
    }
}

impl<'a> Ctx<'a> {
    pub(crate) fn new(f1: &'a FnOracle, f2: &'a FnOracle, u: &'a Region, scheme: &'a SampleScheme) -> Result<Self> {
        check_dims(f1, f2, u)?;
        let scale = u.scale(scheme.window.as_ref())?;
        let mut levels = Vec::with_capacity(scheme.levels);
        for j in 0..scheme.levels {
            let spacing = scheme.spacing(u, j)?;
            let mut cloud = scheme.sample(u, j)?;
            let h = if spacing > 0.0 { spacing } else { scheme.eta(scale, j) };
            let b1 = domain_boundary_points(f1, &cloud, h, u);
            let b2 = domain_boundary_points(f2, &cloud, h, u);
            cloud.extend(b1);
            cloud.extend(b2);
            let mut dpts = Vec::new();
            let mut dsums = Vec::new();
            let (mut inf, mut inf_interior) = (f64::INFINITY, f64::INFINITY);
            for p in &cloud {
                let s = finite_sum(f1, f2, p);
                if s.is_finite() {
                    inf = inf.min(s);
                    if u.dist_to_complement(p) > 0.0 {
                        inf_interior = inf_interior.min(s);
                    }
                    dpts.push(p.clone());
                    dsums.push(s);
                }
            }
            let dhash = SpatialHash::new(&dpts, (2.0 * h).max(1e-12));
            levels.push(LevelBase { eta: scheme.eta(scale, j), spacing: h, cloud, dpts, dsums, dhash, inf, inf_interior });
        }
        Ok(Ctx { f1, f2, u, scheme, levels })
    }

    pub(crate) fn common_domain_seen(&self) -> bool {
        self.levels.iter().any(|l| !l.dpts.is_empty())
    }

    fn require_common_domain(&self) -> Result<()> {
        if self.common_domain_seen() {
            Ok(())
        } else {
            Err(Error::PreconditionFailed(
                "no sampled point of U lies in the common domain of the two functions".into(),
            ))
        }
    }

    /// inf over the level's common-domain cloud of max{d(x,x1), d(x,x2), sum(x) - base}.
    fn diamond_at(&self, lvl: &LevelBase, x1: &[f64], x2: &[f64], base: f64) -> f64 {
        diamond_over(&lvl.dpts, &lvl.dsums, &lvl.dhash, lvl.spacing, x1, x2, base)
    }

    fn consider(&self, spec: &PassSpec, lvl: &LevelBase, reg: &Region, agg: &mut Agg, x1: &Point, v1: f64, x2: &Point, v2: f64) {
        let sum = v1 + v2;
        agg.pairs += 1;
        agg.sum_sup = agg.sum_sup.max(sum);
        if sum < agg.min {
            agg.min = sum;
            agg.min_pair = Some((x1.clone(), x2.clone()));
        }
        if spec.want_theta {
            let d = self.diamond_at(lvl, x1, x2, sum);
            if d > agg.max {
                agg.max = d;
                agg.max_pair = Some((x1.clone(), x2.clone()));
            }
            for (k, a) in spec.alphas.iter().enumerate() {
                if sum < *a && (!spec.alpha_x2_within || reg.contains(x2)) && d > agg.alpha_max[k] {
                    agg.alpha_max[k] = d;
                }
            }
        }
        if let Some(c) = &spec.check {
            let d12 = geometry::dist(x1, x2);
            for (k, eps) in c.eps.iter().enumerate() {
                let deficit = self.recouple_deficit(lvl, c, x1, x2, sum, *eps);
                let lc = &mut agg.checks[k];
                lc.pairs += 1;
                if deficit >= 0.0 {
                    lc.fails += 1;
                    let w = WorstPair { deficit, d12, x1: x1.clone(), x2: x2.clone(), sum12: sum };
                    if lc.worst.as_ref().is_none_or(|b| w.beats(b)) {
                        lc.worst = Some(w);
                    }
                }
            }
        }
    }

    /// (least admissible sum) - (sum12 + eps); negative means the pair recouples.
    fn recouple_deficit(&self, lvl: &LevelBase, c: &CheckSpec, x1: &[f64], x2: &[f64], sum12: f64, eps: f64) -> f64 {
        let target = sum12 + eps;
        let mut best = f64::INFINITY;
        let mid = geometry::lerp(x1, x2, 0.5);
        for x in [x1, x2, &mid[..]] {
            if (c.x_in_u && !self.u.contains(x)) || (c.firm && geometry::dist(x, x1) >= eps) {
                continue;
            }
            best = best.min(finite_sum(self.f1, self.f2, x));
        }
        if best < target {
            return best - target;
        }
        if !c.firm {
            return best.min(lvl.inf) - target;
        }
        let mut r = (2.0 * lvl.spacing).max(1e-12).min(eps);
        loop {
            let Some(cand) = lvl.dhash.candidates(x1, r) else {
                for (i, p) in lvl.dpts.iter().enumerate() {
                    if geometry::dist(p, x1) < eps {
                        best = best.min(lvl.dsums[i]);
                    }
                }
                return best - target;
            };
            for i in cand {
                if geometry::dist(&lvl.dpts[i], x1) < r.min(eps) {
                    let s = lvl.dsums[i];
                    if s < target {
                        return s - target;
                    }
                    best = best.min(s);
                }
            }
            if r >= eps {
                return best - target;
            }
            r = (4.0 * r).min(eps);
        }
    }

    pub(crate) fn run_pass(&self, spec: &PassSpec) -> Result<PassOut> {
        let s = self.scheme;
        let dim = self.u.dim();
        let n_eps = spec.check.as_ref().map_or(0, |c| c.eps.len());
        let mut out = PassOut {
            lambda: Trace::new(format!("{} liminf", spec.label)),
            theta: Trace::new(format!("{} limsup diamond", spec.label)),
            theta_alpha: spec.alphas.iter().map(|a| Trace::new(format!("{} limsup diamond, sum < {a}", spec.label))).collect(),
            sum_sup: Trace::new(format!("{} limsup of decoupled sums", spec.label)),
            clouds: vec![],
            argmin: None,
            argmax: None,
            checks: vec![vec![]; n_eps],
        };
        let mut prev: Vec<Extremal> = vec![];
        for (j, lvl) in self.levels.iter().enumerate() {
            let reg = &spec.regions[j];
            let eta = lvl.eta * spec.eta_factor;
            let mut pts: Vec<Point> = if spec.use_base {
                lvl.cloud.clone()
            } else {
                let mut p = s.sample(reg, j)?;
                let h = s.spacing(reg, j)?.max(f64::MIN_POSITIVE);
                let b1 = domain_boundary_points(self.f1, &p, h, reg);
                let b2 = domain_boundary_points(self.f2, &p, h, reg);
                p.extend(b1);
                p.extend(b2);
                p
            };
            if let Some(extra) = spec.extra {
                pts.extend(extra[j].iter().filter(|p| reg.contains(p)).cloned());
            }
            if s.refine {
                let hl = 0.3 * eta;
                let whole = Region::Whole { dim };
                for e in &prev {
                    let g1 = local_grid(&e.x1, hl, 2, reg);
                    let g2 = local_grid(&e.x2, hl, 2, if spec.x2_within { reg } else { &whole });
                    let mut local = g1;
                    local.extend(g2);
                    let b1 = domain_boundary_points(self.f1, &local, hl, reg);
                    let b2 = domain_boundary_points(self.f2, &local, hl, reg);
                    pts.extend(local);
                    pts.extend(b1);
                    pts.extend(b2);
                }
            }
            let x1s: Vec<(Point, f64)> = pts
                .iter()
                .filter(|p| reg.contains(p))
                .filter_map(|p| {
                    let v = self.f1.value(p);
                    v.is_finite().then(|| (p.clone(), v))
                })
                .collect();
            let x2s: Vec<(Point, f64)> = pts
                .iter()
                .filter(|p| !spec.x2_within || reg.contains(p))
                .filter_map(|p| {
                    let v = self.f2.value(p);
                    v.is_finite().then(|| (p.clone(), v))
                })
                .collect();
            let x2pts: Vec<Point> = x2s.iter().map(|(p, _)| p.clone()).collect();
            let hash = SpatialHash::new(&x2pts, eta);
            let stencil = s.stencil(dim, eta);
            let fresh = || Agg::new(spec.alphas.len(), n_eps);

            let forward = x1s.par_iter().map(|(x1, v1)| {
                let mut agg = fresh();
                let near: Vec<usize> = match hash.candidates(x1, eta) {
                    Some(c) => c,
                    None => (0..x2s.len()).collect(),
                };
                for i in near {
                    if geometry::dist(x1, &x2s[i].0) < eta {
                        self.consider(spec, lvl, reg, &mut agg, x1, *v1, &x2s[i].0, x2s[i].1);
                    }
                }
                for off in &stencil[1..] {
                    let x2 = geometry::add(x1, off);
                    if (spec.x2_within && !reg.contains(&x2)) || geometry::dist(x1, &x2) >= eta {
                        continue;
                    }
                    let v2 = self.f2.value(&x2);
                    if v2.is_finite() {
                        self.consider(spec, lvl, reg, &mut agg, x1, *v1, &x2, v2);
                    }
                }
                agg
            });
            // x1 generated around sampled x2, so pairs hugging a sampled point of dom f2 are seen
            let reverse = x2s.par_iter().map(|(x2, v2)| {
                let mut agg = fresh();
                for off in &stencil[1..] {
                    let x1 = geometry::sub(x2, off);
                    if !reg.contains(&x1) || geometry::dist(&x1, x2) >= eta {
                        continue;
                    }
                    let v1 = self.f1.value(&x1);
                    if v1.is_finite() {
                        self.consider(spec, lvl, reg, &mut agg, &x1, v1, x2, *v2);
                        agg.new_x1.push(x1);
                    }
                }
                agg
            });
            let per: Vec<Agg> = forward.collect::<Vec<_>>().into_iter().chain(reverse.collect::<Vec<_>>()).collect();

            let mut total = fresh();
            for r in per {
                total.pairs += r.pairs;
                total.sum_sup = total.sum_sup.max(r.sum_sup);
                if r.min_pair.is_some() && r.min < total.min {
                    total.min = r.min;
                    total.min_pair = r.min_pair;
                }
                if r.max_pair.is_some() && r.max > total.max {
                    total.max = r.max;
                    total.max_pair = r.max_pair;
                }
                for k in 0..total.alpha_max.len() {
                    total.alpha_max[k] = total.alpha_max[k].max(r.alpha_max[k]);
                }
                for (k, c) in r.checks.into_iter().enumerate() {
                    total.checks[k].absorb(c);
                }
                total.new_x1.extend(r.new_x1);
            }
            let pairs = total.pairs;
            out.lambda.push(j, eta, ExtReal::from(total.min), pairs);
            out.sum_sup.push(j, eta, ExtReal::from(total.sum_sup), pairs);
            for (k, mut c) in total.checks.into_iter().enumerate() {
                c.eta = eta;
                out.checks[k].push(c);
            }
            prev.clear();
            if let Some((x1, x2)) = total.min_pair {
                out.argmin = Some((x1.clone(), x2.clone(), total.min));
                prev.push(Extremal { x1, x2 });
            }
            if spec.want_theta {
                let th = if total.max_pair.is_some() { total.max.max(0.0) } else { 0.0 };
                out.theta.push(j, eta, ExtReal::from(th), pairs);
                for (k, t) in out.theta_alpha.iter_mut().enumerate() {
                    t.push(j, eta, ExtReal::from(total.alpha_max[k].max(0.0)), pairs);
                }
                if let Some((x1, x2)) = total.max_pair {
                    out.argmax = Some((x1.clone(), x2.clone(), total.max));
                    prev.push(Extremal { x1, x2 });
                }
            }
            if spec.keep_clouds {
                let mut c = pts;
                c.extend(total.new_x1);
                out.clouds.push(c);
            }
        }
        Ok(out)
    }

    fn u_pass(&self, want_theta: bool, alphas: Vec<f64>, keep: bool) -> Result<PassOut> {
        self.run_pass(&PassSpec {
            label: "U".into(),
            regions: vec![self.u.clone(); self.levels.len()],
            use_base: true,
            x2_within: true,
            eta_factor: 1.0,
            want_theta,
            alphas,
            alpha_x2_within: true,
            extra: None,
            keep_clouds: keep,
            check: None,
        })
    }

    fn fattened_pass(&self, extra: Option<&[Vec<Point>]>) -> Result<PassOut> {
        let regions = self.levels.iter().map(|l| self.u.fatten(l.eta)).collect();
        self.run_pass(&PassSpec {
            label: "B_eta(U)".into(),
            regions,
            use_base: false,
            x2_within: true,
            eta_factor: 1.0,
            want_theta: false,
            alphas: vec![],
            alpha_x2_within: true,
            extra,
            keep_clouds: false,
            check: None,
        })
    }

    /// One pass per essentially interior member, x2 free, coupling distance scaled by 4^-i.
    pub(crate) fn member_passes(&self, want_theta: bool, alphas: &[f64], check: Option<CheckSpec>) -> Result<Option<Vec<PassOut>>> {
        let fam = match ei_family_for(self.u, self.scheme.stages, self.scheme.window.as_ref()) {
            Ok(f) => f,
            Err(Error::EmptyInterior) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut outs = Vec::with_capacity(fam.members.len());
        for (i, m) in fam.members.iter().enumerate() {
            outs.push(self.run_pass(&PassSpec {
                label: format!("member {} ({})", i + 1, m.region.describe()),
                regions: vec![m.region.clone(); self.levels.len()],
                use_base: false,
                x2_within: false,
                eta_factor: 0.25f64.powi(i as i32 + 1),
                want_theta,
                alphas: alphas.to_vec(),
                alpha_x2_within: true,
                extra: None,
                keep_clouds: false,
                check: check.clone(),
            })?);
        }
        Ok(Some(outs))
    }

    /// Passes carrying a recoupling check: the U pass, or one pass per member.
    pub(crate) fn check_passes(&self, quasi: bool, check: CheckSpec) -> Result<Option<Vec<PassOut>>> {
        if quasi {
            return self.member_passes(false, &[], Some(check));
        }
        Ok(Some(vec![self.run_pass(&PassSpec {
            label: "U".into(),
            regions: vec![self.u.clone(); self.levels.len()],
            use_base: true,
            x2_within: true,
            eta_factor: 1.0,
            want_theta: false,
            alphas: vec![],
            alpha_x2_within: true,
            extra: None,
            keep_clouds: false,
            check: Some(check),
        })?]))
    }

    pub(crate) fn require_common(&self) -> Result<()> {
        self.require_common_domain()
    }

    fn inf_traces(&self) -> (Trace, Trace) {
        let mut a = Trace::new("inf of the sum over U");
        let mut b = Trace::new("inf of the sum over Int U");
        for (j, l) in self.levels.iter().enumerate() {
            a.push(j, l.spacing, ExtReal::from(l.inf), l.dpts.len());
            b.push(j, l.spacing, ExtReal::from(l.inf_interior), l.dpts.len());
        }
        (a, b)
    }

    fn classify(&self, t: &Trace) -> (ExtReal, TraceClass) {
        classify_trace(t, self.scheme.trace_tol, self.scheme.diverge)
    }

    fn liminf_result(&self, t: Trace) -> (ExtReal, Verdict) {
        let (v, c) = self.classify(&t);
        (v, trace_verdict(t, c, LIMINF_NOTE))
    }

    fn limsup_result(&self, t: Trace) -> (ExtReal, Verdict) {
        let (v, c) = self.classify(&t);
        (v.max(ExtReal::Finite(0.0)), trace_verdict(t, c, LIMSUP_NOTE))
    }

    /// min over members (liminf) or max over members (limsup) of the classified traces.
    fn combine_members(&self, traces: Vec<Trace>, lower: bool) -> (ExtReal, Verdict) {
        let mut best: Option<(ExtReal, TraceClass, usize)> = None;
        for (i, t) in traces.iter().enumerate() {
            let (v, c) = self.classify(t);
            let v = if lower { v } else { v.max(ExtReal::Finite(0.0)) };
            let better = match best {
                None => true,
                Some((b, _, _)) => (lower && v < b) || (!lower && v > b),
            };
            if better {
                best = Some((v, c, i));
            }
        }
        let (v, c, i) = best.expect("at least one member");
        let note = if lower { LIMINF_NOTE } else { LIMSUP_NOTE };
        let mut verdict = trace_verdict(traces[i].clone(), c, note);
        verdict.diagnostics.notes.push(format!("extremal member index {}", i + 1));
        for (k, t) in traces.into_iter().enumerate() {
            if k != i {
                verdict.diagnostics.traces.push(t);
            }
        }
        (v, verdict)
    }
}

/// Ring search over a cloud: grow the radius around x1 until the current best is
/// provably optimal, falling back to a full scan.
fn diamond_over(pts: &[Point], sums: &[f64], hash: &SpatialHash, spacing: f64, x1: &[f64], x2: &[f64], base: f64) -> f64 {
    if pts.is_empty() {
        return f64::INFINITY;
    }
    let val = |i: usize| {
        let x = &pts[i];
        geometry::dist(x, x1).max(geometry::dist(x, x2)).max(sums[i] - base)
    };
    let mut best = f64::INFINITY;
    let mut r = 2.0 * geometry::dist(x1, x2).max(spacing).max(1e-12);
    for _ in 0..64 {
        match hash.candidates(x1, r) {
            Some(c) => {
                for i in c {
                    if geometry::dist(&pts[i], x1) <= r {
                        best = best.min(val(i));
                    }
                }
                if best <= r {
                    return best;
                }
                r *= 4.0;
            }
            None => break,
        }
    }
    (0..pts.len()).map(val).fold(best, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiamondEstimate {
    pub value: ExtReal,
    pub verdict: Verdict,
}

/// (f1 diamond f2)_U(x1, x2) as an upper estimate. The candidate set at each level is the
/// level cloud of U plus a fine segment [x1, x2] and small grids around both points.
pub fn diamond(f1: &FnOracle, f2: &FnOracle, u: &Region, x1: &[f64], x2: &[f64], scheme: &SampleScheme) -> Result<DiamondEstimate> {
    check_dims(f1, f2, u)?;
    let (v1, v2) = (f1.value(x1), f2.value(x2));
    if !v1.is_finite() || !v2.is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let base = v1 + v2;
    let dim = u.dim();
    let mut extras: Vec<Point> = (0..=1024).map(|k| geometry::lerp(x1, x2, k as f64 / 1024.0)).collect();
    let scale = u.scale(scheme.window.as_ref())?;
    let mut trace = Trace::new("diamond upper estimate");
    let mut best = f64::INFINITY;
    let mut seen = 0;
    for j in 0..scheme.levels {
        let h = scheme.spacing(u, j)?.max(1e-12);
        let mut pts = scheme.sample(u, j)?;
        pts.extend(domain_boundary_points(f1, &pts, h, u));
        pts.extend(domain_boundary_points(f2, &pts.clone(), h, u));
        let fine = scheme.eta(scale, j) * 0.1;
        let whole = Region::Whole { dim };
        for c in [x1, x2] {
            extras.extend(local_grid(c, fine, 2, &whole));
        }
        pts.extend(extras.iter().cloned());
        let mut level_best = f64::INFINITY;
        for p in pts.iter().filter(|p| u.contains(p)) {
            let s = finite_sum(f1, f2, p);
            if s.is_finite() {
                seen += 1;
                let v = geometry::dist(p, x1).max(geometry::dist(p, x2)).max(s - base);
                level_best = level_best.min(v);
            }
        }
        best = best.min(level_best);
        trace.push(j, h, ExtReal::from(best), pts.len());
    }
    if seen == 0 {
        let v = Verdict::inconclusive(
            crate::verdict::Resolution { level: scheme.levels.saturating_sub(1), samples: 0, trend: trace.trend() },
            Diagnostics { traces: vec![trace], notes: vec!["no sampled point of U has a finite sum".into()] },
        );
        return Ok(DiamondEstimate { value: ExtReal::PosInf, verdict: v });
    }
    let (value, class) = classify_trace(&trace, scheme.trace_tol, scheme.diverge);
    let verdict = trace_verdict(trace, class, "upper estimate: infimum over sampled points");
    Ok(DiamondEstimate { value: value.max(ExtReal::Finite(0.0)), verdict })
}

pub fn lambda_circ(f1: &FnOracle, f2: &FnOracle, u: &Region, scheme: &SampleScheme) -> Result<(ExtReal, Verdict)> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common_domain()?;
    let p = ctx.u_pass(false, vec![], false)?;
    Ok(ctx.liminf_result(p.lambda))
}

/// Limit of the uniform infimum over the fattenings B_eta(U) as eta -> 0.
pub fn lambda(f1: &FnOracle, f2: &FnOracle, u: &Region, scheme: &SampleScheme) -> Result<(ExtReal, Verdict)> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common_domain()?;
    let up = ctx.u_pass(false, vec![], true)?;
    let p = ctx.fattened_pass(Some(&up.clouds))?;
    Ok(ctx.liminf_result(p.lambda))
}

pub fn lambda_dag(f1: &FnOracle, f2: &FnOracle, u: &Region, scheme: &SampleScheme) -> Result<(ExtReal, Verdict)> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common_domain()?;
    match ctx.member_passes(false, &[], None)? {
        None => Ok((ExtReal::PosInf, Verdict::holds(Diagnostics::default()).note("U has empty interior: +inf by definition"))),
        Some(outs) => Ok(ctx.combine_members(outs.into_iter().map(|o| o.lambda).collect(), true)),
    }
}

pub fn theta_circ(f1: &FnOracle, f2: &FnOracle, u: &Region, scheme: &SampleScheme) -> Result<(ExtReal, Verdict)> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common_domain()?;
    let p = ctx.u_pass(true, vec![], false)?;
    Ok(ctx.limsup_result(p.theta))
}

pub fn theta_dag(f1: &FnOracle, f2: &FnOracle, u: &Region, scheme: &SampleScheme) -> Result<(ExtReal, Verdict)> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common_domain()?;
    match ctx.member_passes(true, &[], None)? {
        None => Ok((ExtReal::Finite(0.0), Verdict::holds(Diagnostics::default()).note("U has empty interior: 0 by the sup convention"))),
        Some(outs) => Ok(ctx.combine_members(outs.into_iter().map(|o| o.theta).collect(), false)),
    }
}

/// Lower-bound forms of the two firm quantities: limsups restricted to pairs whose
/// decoupled sum stays below alpha (and, for the member form, x2 in the member too).
/// Returns (restricted circ, restricted dag) per alpha, computed on the same pair
/// families as the unrestricted quantities.
pub fn theta_alpha_restricted(
    f1: &FnOracle,
    f2: &FnOracle,
    u: &Region,
    alphas: &[f64],
    scheme: &SampleScheme,
) -> Result<Vec<(f64, ExtReal, ExtReal, ExtReal, ExtReal)>> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common_domain()?;
    let up = ctx.u_pass(true, alphas.to_vec(), false)?;
    let members = ctx.member_passes(true, alphas, None)?;
    let last = |t: &Trace| t.last().unwrap_or(ExtReal::Finite(0.0));
    let mut out = Vec::new();
    for (k, a) in alphas.iter().enumerate() {
        let circ_r = last(&up.theta_alpha[k]);
        let circ = last(&up.theta);
        let (dag_r, dag) = match &members {
            None => (ExtReal::Finite(0.0), ExtReal::Finite(0.0)),
            Some(ms) => (
                ms.iter().map(|m| last(&m.theta_alpha[k])).fold(ExtReal::Finite(0.0), ExtReal::max),
                ms.iter().map(|m| last(&m.theta)).fold(ExtReal::Finite(0.0), ExtReal::max),
            ),
        };
        out.push((*a, circ_r, circ, dag_r, dag));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantityVerdicts {
    pub lambda: Verdict,
    pub lambda_circ: Verdict,
    pub lambda_dag: Verdict,
    pub theta_circ: Verdict,
    pub theta_dag: Verdict,
    pub inf_sum: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecouplingReport {
    pub lambda: ExtReal,
    pub lambda_circ: ExtReal,
    pub lambda_dag: ExtReal,
    pub theta_circ: ExtReal,
    pub theta_dag: ExtReal,
    pub inf_sum: ExtReal,
    pub inf_interior: ExtReal,
    pub traces: Vec<Trace>,
    pub verdicts: QuantityVerdicts,
    pub invariant_notes: Vec<String>,
}

impl DecouplingReport {
    pub fn get(&self, name: &str) -> Option<ExtReal> {
        Some(match name {
            "lambda" => self.lambda,
            "lambda_circ" => self.lambda_circ,
            "lambda_dag" => self.lambda_dag,
            "theta_circ" => self.theta_circ,
            "theta_dag" => self.theta_dag,
            "inf_sum" => self.inf_sum,
            "inf_interior" => self.inf_interior,
            _ => return None,
        })
    }

    /// Every ordering relation between the reported numbers, with its slack (negative
    /// slack = violated by that much). Relations whose sides are undefined are skipped.
    pub fn invariant_slacks(&self) -> Vec<(&'static str, f64)> {
        let le = |a: ExtReal, b: ExtReal| -> Option<f64> {
            match (a, b) {
                (ExtReal::NegInf, _) | (_, ExtReal::PosInf) => Some(f64::INFINITY),
                (ExtReal::PosInf, _) | (_, ExtReal::NegInf) => Some(f64::NEG_INFINITY),
                (ExtReal::Finite(x), ExtReal::Finite(y)) => Some(y - x),
            }
        };
        let gap = |inf: ExtReal, lam: ExtReal| -> Option<ExtReal> { inf.checked_add(-lam).ok() };
        let mut out = vec![];
        let mut push = |name, s: Option<f64>| {
            if let Some(s) = s {
                out.push((name, s));
            }
        };
        push("lambda <= lambda_circ", le(self.lambda, self.lambda_circ));
        push("lambda_circ <= inf_sum", le(self.lambda_circ, self.inf_sum));
        push("lambda_circ <= lambda_dag", le(self.lambda_circ, self.lambda_dag));
        push("lambda_dag <= inf over Int U", le(self.lambda_dag, self.inf_interior));
        push("0 <= theta_dag", le(ExtReal::Finite(0.0), self.theta_dag));
        push("theta_dag <= theta_circ", le(self.theta_dag, self.theta_circ));
        if self.inf_sum.is_finite() || self.lambda_circ > ExtReal::NegInf {
            push("inf - lambda_circ <= theta_circ", gap(self.inf_sum, self.lambda_circ).and_then(|g| le(g, self.theta_circ)));
        }
        if self.inf_sum.is_finite() || self.lambda_dag > ExtReal::NegInf {
            push("inf - lambda_dag <= theta_dag", gap(self.inf_sum, self.lambda_dag).and_then(|g| le(g, self.theta_dag)));
        }
        out
    }
}

/// All five quantities and the sampled infimum of the sum. Each ordering relation is
/// checked with `tol`; a violation downgrades the estimate that sits on the wrong side
/// (an upper estimate found too large, or a lower estimate found too small).
pub fn full_report(f1: &FnOracle, f2: &FnOracle, u: &Region, scheme: &SampleScheme, tol: f64) -> Result<DecouplingReport> {
    let ctx = Ctx::new(f1, f2, u, scheme)?;
    ctx.require_common_domain()?;
    let up = ctx.u_pass(true, vec![], true)?;
    let fp = ctx.fattened_pass(Some(&up.clouds))?;
    let members = ctx.member_passes(true, &[], None)?;
    let (inf_t, inf_int_t) = ctx.inf_traces();

    let (lambda, v_lambda) = ctx.liminf_result(fp.lambda);
    let (lambda_circ, v_lc) = ctx.liminf_result(up.lambda);
    let (theta_circ, v_tc) = ctx.limsup_result(up.theta);
    let (inf_sum, inf_class) = ctx.classify(&inf_t);
    let v_inf = trace_verdict(inf_t, inf_class, "infimum over sampled points: an upper estimate");
    let inf_interior = inf_int_t.last().unwrap_or(ExtReal::PosInf);
    let ((lambda_dag, v_ld), (theta_dag, v_td)) = match members {
        None => (
            (ExtReal::PosInf, Verdict::holds(Diagnostics::default()).note("U has empty interior: +inf by definition")),
            (ExtReal::Finite(0.0), Verdict::holds(Diagnostics::default()).note("U has empty interior: 0 by the sup convention")),
        ),
        Some(outs) => {
            let (lt, tt): (Vec<Trace>, Vec<Trace>) = outs.into_iter().map(|o| (o.lambda, o.theta)).unzip();
            (ctx.combine_members(lt, true), ctx.combine_members(tt, false))
        }
    };
    let mut report = DecouplingReport {
        lambda,
        lambda_circ,
        lambda_dag,
        theta_circ,
        theta_dag,
        inf_sum,
        inf_interior,
        traces: vec![],
        verdicts: QuantityVerdicts { lambda: v_lambda, lambda_circ: v_lc, lambda_dag: v_ld, theta_circ: v_tc, theta_dag: v_td, inf_sum: v_inf },
        invariant_notes: vec![],
    };
    report.traces.push(inf_int_t);
    for (name, slack) in report.invariant_slacks() {
        if slack >= -tol {
            continue;
        }
        let msg = format!("ordering '{name}' violated by {:.3e}", -slack);
        report.invariant_notes.push(msg.clone());
        let v = &mut report.verdicts;
        let target = match name {
            "lambda <= lambda_circ" => &mut v.lambda,
            "lambda_circ <= inf_sum" | "lambda_circ <= lambda_dag" => &mut v.lambda_circ,
            "lambda_dag <= inf over Int U" => &mut v.lambda_dag,
            "theta_dag <= theta_circ" | "inf - lambda_circ <= theta_circ" => &mut v.theta_circ,
            _ => &mut v.theta_dag,
        };
        *target = target.clone().downgrade(msg);
    }
    let all = [
        &report.verdicts.lambda,
        &report.verdicts.lambda_circ,
        &report.verdicts.lambda_dag,
        &report.verdicts.theta_circ,
        &report.verdicts.theta_dag,
        &report.verdicts.inf_sum,
    ];
    report.traces.extend(all.iter().flat_map(|v| v.diagnostics.traces.iter().cloned()).collect::<Vec<_>>());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> FnOracle {
        FnOracle::new(1, "step", |x| if x[0] <= 0.0 { 0.0 } else { 1.0 })
    }

    fn zero(d: usize) -> FnOracle {
        FnOracle::constant(d, 0.0)
    }

    fn unit() -> Region {
        Region::boxed(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn diamond_closed_form_on_the_step() {
        let s = SampleScheme::default().with_levels(4);
        let d = diamond(&step(), &zero(1), &unit(), &[0.0], &[0.4], &s).unwrap();
        assert!((d.value.to_f64() - 0.4).abs() < 1e-12);
        let d = diamond(&step(), &zero(1), &unit(), &[0.2], &[0.4], &s).unwrap();
        assert!((d.value.to_f64() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn diamond_of_constants_vanishes() {
        let s = SampleScheme::default().with_levels(3);
        let u = Region::boxed(vec![-1.0], vec![1.0]).unwrap();
        let d = diamond(&zero(1), &zero(1), &u, &[0.3], &[0.3], &s).unwrap();
        assert_eq!(d.value, ExtReal::Finite(0.0));
    }

    #[test]
    fn diamond_rejects_infinite_base() {
        let f = FnOracle::new(1, "ind", |x| if x[0] < 0.0 { 0.0 } else { f64::INFINITY });
        let s = SampleScheme::default().with_levels(2);
        assert_eq!(diamond(&f, &zero(1), &unit(), &[0.5], &[0.5], &s).unwrap_err(), Error::InfiniteAtBase);
    }

    #[test]
    fn step_quantities() {
        let s = SampleScheme::default().with_levels(8);
        let r = full_report(&step(), &zero(1), &unit(), &s, 5e-2).unwrap();
        assert!(r.lambda.approx_eq(ExtReal::Finite(0.0), 5e-2));
        assert!(r.lambda_circ.approx_eq(ExtReal::Finite(0.0), 5e-2));
        assert!(r.lambda_dag.approx_eq(ExtReal::Finite(1.0), 5e-2), "{:?}", r.lambda_dag);
        assert!(r.theta_circ.approx_eq(ExtReal::Finite(0.0), 5e-2));
        assert!(r.theta_dag.approx_eq(ExtReal::Finite(0.0), 5e-2));
        assert!(r.invariant_notes.is_empty(), "{:?}", r.invariant_notes);
    }

    #[test]
    fn empty_common_domain_fails_precondition() {
        let f1 = FnOracle::new(1, "ind", |x| if x[0] <= 0.0 { 0.0 } else { f64::INFINITY });
        let f2 = FnOracle::new(1, "1/x", |x| if x[0] > 0.0 { 1.0 / x[0] } else { f64::INFINITY });
        let u = Region::open_ball(vec![0.0], 1.0).unwrap();
        let s = SampleScheme::default().with_levels(3);
        assert!(matches!(full_report(&f1, &f2, &u, &s, 5e-2), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn empty_interior_conventions() {
        let u = Region::boxed(vec![0.5], vec![0.5]).unwrap();
        let s = SampleScheme::default().with_levels(2);
        assert_eq!(lambda_dag(&zero(1), &zero(1), &u, &s).unwrap().0, ExtReal::PosInf);
        assert_eq!(theta_dag(&zero(1), &zero(1), &u, &s).unwrap().0, ExtReal::Finite(0.0));
    }
}
