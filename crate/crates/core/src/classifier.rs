//! Reduction of collision trajectories to outcome records.
//!
//! Solitons are followed through the topological charge density
//! `J^0 = phi_x / 2`: the positive part locates kinks, the negative part
//! antikinks. Each centroid is taken over the connected lump around the
//! largest `|J^0|` of that sign, so radiation elsewhere does not drag it.

use rayon::prelude::*;

use crate::evolve::{compose_collision, lorentz_gamma, run, CollisionSetup, EvolveConfig, Trajectory};
use crate::interp::UniformSpline;
use crate::lattice::{charge_density, energy_density, topological_charge, trapezoid, FieldState, Grid};
use crate::model::ModelParams;
use crate::static_solver::StaticProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `|J^0|` below this counts as no charged object.
    pub noise_floor: f64,
    /// Smallest `|integral J^0|` of a lump that counts as a soliton rather
    /// than a radiation ripple.
    pub min_lump_charge: f64,
    /// Capture radius in units of the larger rest half-width.
    pub capture_half_widths: f64,
    /// Trailing fraction of the run used to judge persistence.
    pub persistence_fraction: f64,
    /// Field deviation from the boosted static profile that counts as an
    /// internal excitation.
    pub oscillation_amplitude: f64,
    pub min_capture_oscillations: usize,
    /// An excitation has decayed when its late amplitude is below this
    /// fraction of its post-collision peak.
    pub decay_ratio: f64,
    /// Radiated energy fraction needed to call the emission a neutral packet.
    pub min_radiated_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            noise_floor: 1e-3,
            min_lump_charge: 0.5,
            capture_half_widths: 4.0,
            persistence_fraction: 0.2,
            oscillation_amplitude: 0.05,
            min_capture_oscillations: 3,
            decay_ratio: 0.5,
            min_radiated_fraction: 1e-3,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("noise_floor", self.noise_floor),
            ("capture_half_widths", self.capture_half_widths),
            ("oscillation_amplitude", self.oscillation_amplitude),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.min_lump_charge > 0.0 && self.min_lump_charge <= 1.0) {
            return Err("min_lump_charge must lie in (0, 1]".into());
        }
        if !(self.persistence_fraction > 0.0 && self.persistence_fraction <= 1.0) {
            return Err("persistence_fraction must lie in (0, 1]".into());
        }
        if !(self.decay_ratio > 0.0 && self.decay_ratio < 1.0) {
            return Err("decay_ratio must lie in (0, 1)".into());
        }
        if !(self.min_radiated_fraction >= 0.0 && self.min_radiated_fraction <= 1.0) {
            return Err("min_radiated_fraction must lie in [0, 1]".into());
        }
        if self.min_capture_oscillations == 0 {
            return Err("min_capture_oscillations must be >= 1".into());
        }
        Ok(())
    }
}

/// Sign-split charge centroids per snapshot. `None` marks a sign with no
/// soliton: its peak `|J^0|` is below the noise floor or its lump carries too
/// little charge.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeTrack {
    pub times: Vec<f64>,
    pub positive: Vec<Option<f64>>,
    pub negative: Vec<Option<f64>>,
    pub positive_peak: Vec<f64>,
    pub negative_peak: Vec<f64>,
    pub positive_charge: Vec<f64>,
    pub negative_charge: Vec<f64>,
}

impl ChargeTrack {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `negative - positive` where both objects are present.
    pub fn separation(&self, k: usize) -> Option<f64> {
        Some(self.negative[k]? - self.positive[k]?)
    }
}

/// One sign of the charge density reduced to its dominant lump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lump {
    /// Charge-weighted centre; `None` when the lump is not a soliton.
    pub centroid: Option<f64>,
    pub peak: f64,
    /// `|integral of J^0|` over the lump.
    pub charge: f64,
}

/// The connected run of samples with `sign * j > floor` around the maximum
/// of `sign * j`. It counts as a soliton when it carries at least
/// `min_charge` of topological charge.
fn lump(j: &[f64], grid: &Grid, sign: f64, floor: f64, min_charge: f64) -> Lump {
    let (mut k, mut peak) = (0, 0.0_f64);
    for (i, &v) in j.iter().enumerate() {
        if sign * v > peak {
            peak = sign * v;
            k = i;
        }
    }
    if peak <= floor {
        return Lump {
            centroid: None,
            peak,
            charge: 0.0,
        };
    }
    let n = j.len();
    let mut lo = k;
    while lo > 0 && sign * j[lo - 1] > floor {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < n && sign * j[hi + 1] > floor {
        hi += 1;
    }
    let (mut w, mut wx) = (0.0, 0.0);
    for (i, &v) in j.iter().enumerate().take(hi + 1).skip(lo) {
        w += sign * v;
        wx += sign * v * grid.x(i);
    }
    let charge = w * grid.dx();
    Lump {
        centroid: (charge >= min_charge).then(|| wx / w),
        peak,
        charge,
    }
}

/// Dominant positive and negative charge lumps in `s`.
pub fn charge_lumps(s: &FieldState, th: &Thresholds) -> (Lump, Lump) {
    let j = charge_density(s);
    let f = |sign| lump(&j, &s.grid, sign, th.noise_floor, th.min_lump_charge);
    (f(1.0), f(-1.0))
}

pub fn track_charges(traj: &Trajectory, th: &Thresholds) -> ChargeTrack {
    let n = traj.snapshots.len();
    let mut track = ChargeTrack {
        times: Vec::with_capacity(n),
        positive: Vec::with_capacity(n),
        negative: Vec::with_capacity(n),
        positive_peak: Vec::with_capacity(n),
        negative_peak: Vec::with_capacity(n),
        positive_charge: Vec::with_capacity(n),
        negative_charge: Vec::with_capacity(n),
    };
    for s in &traj.snapshots {
        let (p, q) = charge_lumps(s, th);
        track.times.push(s.time);
        track.positive.push(p.centroid);
        track.negative.push(q.centroid);
        track.positive_peak.push(p.peak);
        track.negative_peak.push(q.peak);
        track.positive_charge.push(p.charge);
        track.negative_charge.push(q.charge);
    }
    track
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Scatter,
    Annihilate,
    Capture,
    ExcitationDecay,
    Undecided,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Scatter => "scatter",
            Outcome::Annihilate => "annihilate",
            Outcome::Capture => "capture",
            Outcome::ExcitationDecay => "excitation_decay",
            Outcome::Undecided => "undecided",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Outcome::Scatter,
            Outcome::Annihilate,
            Outcome::Capture,
            Outcome::ExcitationDecay,
            Outcome::Undecided,
        ]
        .into_iter()
        .find(|o| o.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    pub outcome: Outcome,
    pub initial_q: f64,
    pub final_q: f64,
    /// Fitted late-time speeds of the (positive, negative) charge centroids.
    pub outgoing_speeds: Option<(f64, f64)>,
    pub oscillation_period: Option<f64>,
    pub radiated_energy_fraction: f64,
    pub asymmetry_index: f64,
    /// The two charges swapped sides while bound.
    pub breather_like: bool,
    pub first_contact_time: Option<f64>,
    /// Largest post-collision deviation from the boosted static profiles.
    pub peak_excitation: f64,
    /// Largest deviation inside the persistence window.
    pub late_excitation: f64,
}

/// Rest half-width used to scale the capture radius.
pub fn rest_half_width(setup: &CollisionSetup) -> f64 {
    let w = |p: &StaticProfile| p.width().unwrap_or(0.0);
    0.5 * w(&setup.left).max(w(&setup.right))
}

/// Least-squares slope of `y` against `t`.
fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        num += (a - tm) * (b - ym);
        den += (a - tm) * (a - tm);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Profile resampler that centres a rest profile on its own charge centroid.
struct Template {
    phi: UniformSpline,
    psi: UniformSpline,
    centre: f64,
}

impl Template {
    fn new(p: &StaticProfile, th: &Thresholds) -> Self {
        let s = &p.state;
        let (pos, neg) = charge_lumps(s, th);
        let centre = if p.charge() >= 0.0 { pos } else { neg }.centroid.unwrap_or(0.0);
        Self {
            phi: UniformSpline::new(s.grid.x_min(), s.grid.dx(), &s.phi),
            psi: UniformSpline::new(s.grid.x_min(), s.grid.dx(), &s.psi),
            centre,
        }
    }

    /// Largest deviation of `s` within `half_window` of `c` from this profile
    /// boosted to `speed` and centred at `c`, minimized over the two psi
    /// branches.
    fn deviation(&self, s: &FieldState, c: f64, speed: f64, half_window: f64) -> f64 {
        let gamma = lorentz_gamma(speed.clamp(-0.99, 0.99));
        let g = s.grid;
        let lo = g.nearest_index(c - half_window);
        let hi = g.nearest_index(c + half_window);
        let (mut same, mut flipped) = (0.0_f64, 0.0_f64);
        for i in lo..=hi {
            let xi = self.centre + gamma * (g.x(i) - c);
            let f = self.phi.eval(xi).0;
            let h = self.psi.eval(xi).0;
            let dphi = (s.phi[i] - f).abs();
            same = same.max(dphi).max((s.psi[i] - h).abs());
            flipped = flipped.max(dphi).max((s.psi[i] + h).abs());
        }
        same.min(flipped)
    }
}

/// Energy fraction outside `radius` of the surviving charge centroids in the
/// final snapshot, relative to the initial total energy.
fn radiated_fraction(traj: &Trajectory, track: &ChargeTrack, radius: f64) -> f64 {
    let m = traj.model;
    let e0 = trapezoid(&energy_density(traj.initial(), m), traj.grid.dx());
    if !(e0 > 0.0) {
        return 0.0;
    }
    let k = track.len() - 1;
    let last = traj.last();
    let centres: Vec<f64> = [track.positive[k], track.negative[k]].into_iter().flatten().collect();
    if centres.is_empty() {
        return 1.0;
    }
    let lo = centres.iter().cloned().fold(f64::INFINITY, f64::min) - radius;
    let hi = centres.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + radius;
    let e = energy_density(last, m);
    let g = traj.grid;
    let inside: Vec<f64> = (0..g.len())
        .map(|i| if (lo..=hi).contains(&g.x(i)) { e[i] } else { 0.0 })
        .collect();
    let bound = trapezoid(&inside, g.dx());
    (1.0 - bound / e0).clamp(0.0, 1.0)
}

/// Max over snapshots of `|| e(x) - e(2c - x) ||_2 / E`, with `c` the midpoint
/// of the two start positions.
pub fn asymmetry_index(traj: &Trajectory, centre: f64) -> f64 {
    let g = traj.grid;
    let n = g.len();
    let dx = g.dx();
    let grid_centre = 0.5 * (g.x_min() + g.x_max());
    let exact_mirror = (centre - grid_centre).abs() <= 1e-12 * g.length();
    let mut worst = 0.0_f64;
    for s in &traj.snapshots {
        let e = energy_density(s, traj.model);
        let total = trapezoid(&e, dx);
        if !(total > 0.0) {
            continue;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let mirrored = if exact_mirror {
                e[n - 1 - i]
            } else {
                let t = (2.0 * centre - g.x(i) - g.x_min()) / dx;
                if t < 0.0 || t > (n - 1) as f64 {
                    continue;
                }
                let j = (t.floor() as usize).min(n - 2);
                let f = t - j as f64;
                e[j] * (1.0 - f) + e[j + 1] * f
            };
            let d = e[i] - mirrored;
            acc += d * d;
        }
        worst = worst.max((acc * dx).sqrt() / total);
    }
    worst
}

/// Number of full oscillations in `d` (half the count of crossings of its mean).
fn oscillation_count(d: &[f64]) -> (usize, Vec<usize>) {
    if d.len() < 3 {
        return (0, Vec::new());
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let mut crossings = Vec::new();
    let mut prev = d[0] - mean;
    for (k, &v) in d.iter().enumerate().skip(1) {
        let cur = v - mean;
        if (prev <= 0.0) != (cur <= 0.0) {
            crossings.push(k);
        }
        prev = cur;
    }
    (crossings.len() / 2, crossings)
}

/// Centroid velocity at snapshot `k` by central difference, falling back to
/// one-sided differences where a neighbour is missing.
fn local_speed(times: &[f64], c: &[Option<f64>], k: usize) -> f64 {
    let at = |i: usize| c.get(i).copied().flatten().map(|x| (times[i], x));
    let here = at(k);
    let prev = k.checked_sub(1).and_then(at);
    let next = at(k + 1);
    let pair = match (prev, here, next) {
        (Some(a), _, Some(b)) => Some((a, b)),
        (Some(a), Some(b), None) => Some((a, b)),
        (None, Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    pair.map_or(0.0, |((t0, x0), (t1, x1))| (x1 - x0) / (t1 - t0))
}

/// Per-snapshot deviation of the fields around each soliton from its boosted
/// static profile (the larger of the two solitons), for snapshots where both
/// solitons are present and isolated: farther apart than twice the capture
/// radius.
pub fn excitation_series(
    traj: &Trajectory,
    track: &ChargeTrack,
    setup: &CollisionSetup,
    th: &Thresholds,
) -> Vec<Option<f64>> {
    let hw = rest_half_width(setup);
    let radius = th.capture_half_widths * hw;
    let (pos_profile, neg_profile) = if setup.left.charge() >= 0.0 {
        (&setup.left, &setup.right)
    } else {
        (&setup.right, &setup.left)
    };
    let tp = Template::new(pos_profile, th);
    let tn = Template::new(neg_profile, th);
    let half_window = 3.0 * hw;
    (0..track.len())
        .map(|k| {
            let d = track.separation(k)?;
            if d.abs() < 2.0 * radius {
                return None;
            }
            let s = &traj.snapshots[k];
            let vp = local_speed(&track.times, &track.positive, k);
            let vn = local_speed(&track.times, &track.negative, k);
            let a = tp.deviation(s, track.positive[k]?, vp, half_window);
            let b = tn.deviation(s, track.negative[k]?, vn, half_window);
            Some(a.max(b))
        })
        .collect()
}

/// Classifies a collision run. The checks are tried in the order annihilate,
/// capture, scatter or excitation-decay; anything else is undecided.
pub fn classify_outcome(
    traj: &Trajectory,
    track: &ChargeTrack,
    setup: &CollisionSetup,
    th: &Thresholds,
) -> OutcomeRecord {
    let k_end = track.len() - 1;
    let initial_q = topological_charge(traj.initial());
    let final_q = topological_charge(traj.last());
    let hw = rest_half_width(setup);
    let radius = th.capture_half_widths * hw;
    let t0 = track.times[0];
    let t_end = track.times[k_end];
    let window_start = t_end - th.persistence_fraction * (t_end - t0);
    let window: Vec<usize> = (0..=k_end).filter(|&k| track.times[k] >= window_start).collect();

    let contact = (0..=k_end).find(|&k| match track.separation(k) {
        Some(d) => d.abs() < radius,
        None => true,
    });

    let mut rec = OutcomeRecord {
        outcome: Outcome::Undecided,
        initial_q,
        final_q,
        outgoing_speeds: None,
        oscillation_period: None,
        radiated_energy_fraction: radiated_fraction(traj, track, radius),
        asymmetry_index: asymmetry_index(traj, setup.centre()),
        breather_like: false,
        first_contact_time: contact.map(|k| track.times[k]),
        peak_excitation: 0.0,
        late_excitation: 0.0,
    };
    let Some(contact) = contact else {
        return rec;
    };

    // annihilation: no charge above the floor from some point after contact
    // through the whole persistence window
    let absent = |k: usize| track.positive[k].is_none() && track.negative[k].is_none();
    let gone_from = (contact..=k_end).rev().take_while(|&k| absent(k)).last();
    if let Some(k) = gone_from {
        if track.times[k] <= window_start {
            assert!(
                initial_q == 0.0,
                "a trajectory with Q = {initial_q} cannot annihilate"
            );
            rec.outcome = Outcome::Annihilate;
            return rec;
        }
    }

    let both_persist = window.iter().all(|&k| track.separation(k).is_some());
    if !both_persist {
        return rec;
    }

    let initial_side = track.separation(0).map(f64::signum).unwrap_or(1.0);
    let post: Vec<usize> = (contact..=k_end).collect();

    // bound pair
    if window.iter().all(|&k| track.separation(k).unwrap().abs() < radius) {
        let bound: Vec<usize> = post
            .iter()
            .copied()
            .filter(|&k| track.separation(k).is_some())
            .collect();
        let d: Vec<f64> = bound.iter().map(|&k| track.separation(k).unwrap()).collect();
        let (count, crossings) = oscillation_count(&d);
        rec.breather_like = d.iter().any(|&v| v * initial_side < -hw);
        if crossings.len() >= 3 {
            let first = track.times[bound[crossings[0]]];
            let last = track.times[bound[*crossings.last().unwrap()]];
            rec.oscillation_period = Some(2.0 * (last - first) / (crossings.len() - 1) as f64);
        }
        if count >= th.min_capture_oscillations && !rec.breather_like {
            rec.outcome = Outcome::Capture;
        }
        return rec;
    }

    // escaping pair
    let t: Vec<f64> = window.iter().map(|&k| track.times[k]).collect();
    let xp: Vec<f64> = window.iter().map(|&k| track.positive[k].unwrap()).collect();
    let xn: Vec<f64> = window.iter().map(|&k| track.negative[k].unwrap()).collect();
    let (vp, vn) = (slope(&t, &xp), slope(&t, &xn));
    let d_end = track.separation(k_end).unwrap();
    let receding = (vn - vp) * d_end.signum() > 0.0;
    if !(d_end.abs() >= radius && receding) {
        return rec;
    }
    rec.outgoing_speeds = Some((vp, vn));

    let series = excitation_series(traj, track, setup, th);
    let mut peak = 0.0_f64;
    let mut late = 0.0_f64;
    for &k in &post {
        let Some(dev) = series[k] else { continue };
        peak = peak.max(dev);
        if track.times[k] >= window_start {
            late = late.max(dev);
        }
    }
    rec.peak_excitation = peak;
    rec.late_excitation = late;
    let excited = peak >= th.oscillation_amplitude;
    let decayed = late <= th.decay_ratio * peak;
    let radiated = rec.radiated_energy_fraction >= th.min_radiated_fraction;
    rec.outcome = if excited && decayed && radiated {
        Outcome::ExcitationDecay
    } else {
        Outcome::Scatter
    };
    rec
}

/// One velocity of a scan.
#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub velocity: f64,
    pub record: Option<OutcomeRecord>,
    pub error: Option<String>,
}

impl ScanEntry {
    pub fn outcome(&self) -> Outcome {
        self.record.as_ref().map_or(Outcome::Undecided, |r| r.outcome)
    }
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub entries: Vec<ScanEntry>,
    /// Lowest velocity above a contiguous low-velocity annihilation band,
    /// with the scan spacing there as its uncertainty.
    pub v1: Option<(f64, f64)>,
}

/// Symmetric collision at `v` built from `template` (`v_left = v`,
/// `v_right = -v`).
pub fn symmetric_setup(template: &CollisionSetup, v: f64) -> CollisionSetup {
    CollisionSetup {
        v_left: v,
        v_right: -v,
        ..template.clone()
    }
}

pub fn collide(
    setup: &CollisionSetup,
    grid: Grid,
    cfg: &EvolveConfig,
    th: &Thresholds,
) -> Result<(Trajectory, ChargeTrack, OutcomeRecord), crate::evolve::EvolveError> {
    let s0 = compose_collision(setup, grid)?;
    let traj = run(&s0, setup.model, cfg)?;
    let track = track_charges(&traj, th);
    let rec = classify_outcome(&traj, &track, setup, th);
    Ok((traj, track, rec))
}

/// Runs one symmetric collision per velocity in parallel. Results are
/// returned in ascending velocity order.
pub fn velocity_scan(
    v_list: &[f64],
    m: ModelParams,
    template: &CollisionSetup,
    grid: Grid,
    cfg: &EvolveConfig,
    th: &Thresholds,
) -> ScanResult {
    let mut vs = v_list.to_vec();
    vs.sort_by(f64::total_cmp);
    let template = CollisionSetup {
        model: m,
        ..template.clone()
    };
    let entries: Vec<ScanEntry> = vs
        .par_iter()
        .map(|&v| {
            let setup = symmetric_setup(&template, v);
            match collide(&setup, grid, cfg, th) {
                Ok((_, _, rec)) => ScanEntry {
                    velocity: v,
                    record: Some(rec),
                    error: None,
                },
                Err(e) => ScanEntry {
                    velocity: v,
                    record: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let v1 = estimate_v1(&entries);
    ScanResult { entries, v1 }
}

/// Lowest velocity above the first contiguous annihilation band, with the
/// scan step below it as the error bar. Low velocities need not annihilate:
/// a repulsive pair can reflect before the band starts.
fn estimate_v1(entries: &[ScanEntry]) -> Option<(f64, f64)> {
    let start = entries.iter().position(|e| e.outcome() == Outcome::Annihilate)?;
    let end = start
        + entries[start..]
            .iter()
            .take_while(|e| e.outcome() == Outcome::Annihilate)
            .count();
    let v = entries.get(end)?.velocity;
    Some((v, v - entries[end - 1].velocity))
}
