//! Discrete geodesic flow on `Γ\PSL(2,R)`, nested spherical targets and the
//! per-trajectory distance ledger.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{reduce_frame, Center, CurveGeometry, CurveMeasure, HPoint, Mobius, QuotientPoint};
use crate::scalar::Real;

/// Flows `p` for time `t` by right multiplication with `g_t` and re-reduces.
pub fn flow_step<T: Real>(geom: &CurveGeometry<T>, p: &QuotientPoint<T>, t: T) -> Result<QuotientPoint<T>> {
    let m = p.frame().mul(&Mobius::diagonal(t));
    let (coset, m) = reduce_frame(geom.action(), p.coset, m)?;
    Ok(QuotientPoint::from_frame(coset, &m))
}

/// Unit-time orbit `g_1 ξ, g_2 ξ, …` of a start point.
pub struct Trajectory<'a, T> {
    geom: &'a CurveGeometry<T>,
    coset: usize,
    frame: Mobius<T>,
    e: T,
    e_inv: T,
}

impl<'a, T: Real> Trajectory<'a, T> {
    pub fn new(geom: &'a CurveGeometry<T>, start: &QuotientPoint<T>) -> Self {
        let e = T::one().exp();
        Self { geom, coset: start.coset, frame: start.frame(), e, e_inv: e.recip() }
    }

    /// Advances one unit of time and returns the reduced position.
    #[inline]
    pub fn advance(&mut self) -> Result<(usize, HPoint<T>)> {
        let m = Mobius {
            a: self.frame.a * self.e,
            b: self.frame.b * self.e_inv,
            c: self.frame.c * self.e,
            d: self.frame.d * self.e_inv,
        };
        let (coset, m) = reduce_frame(self.geom.action(), self.coset, m)?;
        self.coset = coset;
        self.frame = m;
        Ok((coset, m.base_point()))
    }

    pub fn point(&self) -> QuotientPoint<T> {
        QuotientPoint::from_frame(self.coset, &self.frame)
    }
}

/// How the target measures `μ(B_n)` shrink.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// `μ(B_n) = c·n^{−κ}`
    PowerLaw { c: f64, kappa: f64 },
    /// Radii `r_1, r_2, …` in Teichmüller units.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub kind: ScheduleKind,
    pub horizon: usize,
}

impl RadiusSchedule {
    pub fn power_law(c: f64, kappa: f64, horizon: usize) -> Self {
        Self { kind: ScheduleKind::PowerLaw { c, kappa }, horizon }
    }

    pub fn explicit(radii: Vec<f64>) -> Self {
        let horizon = radii.len();
        Self { kind: ScheduleKind::Explicit(radii), horizon }
    }

    /// Target measure of `B_n` for a power law.
    pub fn target_measure(&self, n: usize) -> Option<f64> {
        match self.kind {
            ScheduleKind::PowerLaw { c, kappa } => Some(c * (n as f64).powf(-kappa)),
            ScheduleKind::Explicit(_) => None,
        }
    }
}

/// Radii `r_1..r_N` of a schedule, inverting the exact ball measure.
pub fn radii_of(schedule: &RadiusSchedule, measure: &CurveMeasure<f64>, r_emb: f64) -> Result<Vec<f64>> {
    if schedule.horizon == 0 {
        return Err(Error::Config("schedule horizon must be at least 1".into()));
    }
    let radii = match &schedule.kind {
        ScheduleKind::PowerLaw { c, kappa } => {
            if !(*c > 0.0) || !(*kappa >= 0.0) {
                return Err(Error::Config(format!("power law needs c > 0 and κ ≥ 0, got c={c}, κ={kappa}")));
            }
            let max = measure.disk_fraction(r_emb);
            if *c > max {
                return Err(Error::OutOfRange { radius: measure.radius_for_measure(*c), bound: r_emb });
            }
            (1..=schedule.horizon).map(|n| measure.radius_for_measure(c * (n as f64).powf(-kappa))).collect::<Vec<_>>()
        }
        ScheduleKind::Explicit(r) => {
            if r.len() != schedule.horizon {
                return Err(Error::Config("explicit radii do not match the horizon".into()));
            }
            if r.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::Config("explicit radii must be positive".into()));
            }
            if r.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Config("explicit radii must be non-increasing".into()));
            }
            if r[0] > r_emb {
                return Err(Error::OutOfRange { radius: r[0], bound: r_emb });
            }
            r.clone()
        }
    };
    Ok(radii)
}

/// Nested spherical targets `B_n = π⁻¹(B(X₀, r_n))`.
#[derive(Clone, Debug)]
pub struct TargetFamily {
    pub center: Center<f64>,
    pub schedule: RadiusSchedule,
    pub measure: CurveMeasure<f64>,
    radii: Vec<f64>,
}

impl TargetFamily {
    pub fn new(center: Center<f64>, schedule: RadiusSchedule, measure: CurveMeasure<f64>) -> Result<Self> {
        let radii = radii_of(&schedule, &measure, center.r_emb())?;
        Ok(Self { center, schedule, measure, radii })
    }

    pub fn horizon(&self) -> usize {
        self.radii.len()
    }

    /// `r_1..r_N`, 0-based storage.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radius(&self, n: usize) -> f64 {
        self.radii[n - 1]
    }

    /// Exact `μ(B_n)`.
    pub fn measure_of(&self, n: usize) -> f64 {
        self.measure.disk_fraction(self.radius(n))
    }
}

/// Distances `d_i = d_T(π(g_i ξ), X₀)` for `i = 1..N` along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceLedger {
    pub trajectory_id: u64,
    pub start: QuotientPoint<f64>,
    distances: Vec<f64>,
}

impl DistanceLedger {
    pub fn from_distances(trajectory_id: u64, start: QuotientPoint<f64>, distances: Vec<f64>) -> Self {
        Self { trajectory_id, start, distances }
    }

    pub fn horizon(&self) -> usize {
        self.distances.len()
    }

    /// `d_1..d_N`, 0-based storage.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn d(&self, i: usize) -> f64 {
        self.distances[i - 1]
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (k, d) in self.distances.iter().enumerate() {
            writeln!(out, "{},{},{:.16e}", self.trajectory_id, k + 1, d)?;
        }
        Ok(())
    }
}

/// Flows `start` for `n` unit steps, recording the distance to `center` after each.
pub fn run_trajectory<T: Real>(
    geom: &CurveGeometry<T>,
    center: &Center<T>,
    start: &QuotientPoint<T>,
    n: usize,
    trajectory_id: u64,
) -> Result<DistanceLedger> {
    if n == 0 {
        return Err(Error::Config("trajectory length must be at least 1".into()));
    }
    let mut traj = Trajectory::new(geom, start);
    let mut distances = Vec::with_capacity(n);
    for _ in 0..n {
        let (c, z) = traj.advance()?;
        distances.push(center.distance(c, z).as_f64());
    }
    let start64 = QuotientPoint {
        coset: start.coset,
        z: HPoint { x: start.z.x.as_f64(), y: start.z.y.as_f64() },
        theta: start.theta.as_f64(),
    };
    Ok(DistanceLedger { trajectory_id, start: start64, distances })
}

/// `#{1 ≤ i ≤ n : d_i ≤ r_n}` by a direct scan.
pub fn hits_upto(ledger: &DistanceLedger, radii: &[f64], n: usize) -> usize {
    let r = radii[n - 1];
    ledger.distances[..n].iter().filter(|&&d| d <= r).count()
}

/// Answers `#{1 ≤ i ≤ n : d_i ≤ r}` for many `(n, r)` pairs in
/// `O((N + Q) log N)` with a Fenwick tree over time, sweeping radii upward.
pub fn hits_on_grid(distances: &[f64], queries: &[(usize, f64)]) -> Vec<usize> {
    let n = distances.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let mut qorder: Vec<usize> = (0..queries.len()).collect();
    qorder.sort_by(|&a, &b| queries[a].1.total_cmp(&queries[b].1));
    let mut tree = vec![0u32; n + 1];
    let mut out = vec![0usize; queries.len()];
    let mut inserted = 0;
    for q in qorder {
        let (upto, r) = queries[q];
        while inserted < n && distances[order[inserted]] <= r {
            let mut i = order[inserted] + 1;
            while i <= n {
                tree[i] += 1;
                i += i & i.wrapping_neg();
            }
            inserted += 1;
        }
        let mut i = upto.min(n);
        let mut acc = 0usize;
        while i > 0 {
            acc += tree[i] as usize;
            i -= i & i.wrapping_neg();
        }
        out[q] = acc;
    }
    out
}

/// Running minima `min_{i ≤ n} d_i` for `n = 1..N`.
pub fn prefix_minima(distances: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(distances.len());
    let mut m = f64::INFINITY;
    for &d in distances {
        if d < m {
            m = d;
        }
        out.push(m);
    }
    out
}
