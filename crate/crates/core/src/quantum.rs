//! Photodetection trajectories of two decaying qubits.
//!
//! The initial state `alpha |uu> + delta |dd>` decays by spontaneous emission
//! at rate `gamma` per qubit. A time step `dt` applies one of four Kraus
//! operators, selected with the Born probabilities `|K psi|^2`:
//!
//! * independent detection: `K_k = W_i (x) W_j` built from the single-qubit
//!   pair `W_0 = diag(q, 1)`, `W_1 = sqrt(1 - q^2) |d><u|`, `q = e^{-g t/2}`;
//! * interfering detection: the one-photon operators are replaced by
//!   `(K_1 +/- K_2)/sqrt(2)`, the channels behind a balanced beam splitter.
//!
//! Both sets resolve the same unconditional channel; only the trajectory
//! ensembles (and so the outcome statistics) differ.

use crate::error::{CoreError, Result};
use crate::linalg::{CMatrix, CVector};
use crate::rng::RngStream;
use crate::scalar::{from_f64, Scalar};
use crate::witness::concurrence_mixed;
use num_complex::Complex;
use num_traits::One;
use rayon::prelude::*;

/// Initial state and decay rate of the qubit pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayParams<T: Scalar> {
    /// Amplitude of `|uu>`.
    pub alpha: Complex<T>,
    /// Amplitude of `|dd>`.
    pub delta: Complex<T>,
    /// Spontaneous emission rate of each qubit.
    pub gamma: T,
}

impl<T: Scalar> DecayParams<T> {
    pub fn new(alpha: Complex<T>, delta: Complex<T>, gamma: T) -> Result<Self> {
        let params = Self { alpha, delta, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let norm_sq = self.alpha.norm_sqr() + self.delta.norm_sqr();
        if (norm_sq - T::one()).abs() > from_f64::<T>(1e-9) {
            return Err(CoreError::NotNormalized {
                norm: norm_sq.to_f64().unwrap_or(f64::NAN).sqrt(),
            });
        }
        if !(self.gamma > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "gamma",
                value: self.gamma.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive",
            });
        }
        Ok(())
    }

    /// `alpha |uu> + delta |dd>` as a 4-vector.
    pub fn initial_state(&self) -> CVector<T> {
        let mut psi = CVector::zeros(4).expect("dim 4 supported");
        psi[0] = self.alpha;
        psi[3] = self.delta;
        psi
    }
}

/// How the two emitted photons are resolved by the detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectionMode {
    /// Each qubit feeds its own detector.
    Independent,
    /// The emission modes interfere on a balanced beam splitter.
    Interacting,
}

/// Single-qubit amplitude-damping Kraus pair at accumulated time `t`.
pub fn single_qubit_kraus<T: Scalar>(gamma: T, t: T) -> Result<(CMatrix<T>, CMatrix<T>)> {
    if !(t >= T::zero()) {
        return Err(CoreError::InvalidParameter {
            name: "t",
            value: t.to_f64().unwrap_or(f64::NAN),
            constraint: "must be non-negative",
        });
    }
    if !(gamma > T::zero()) {
        return Err(CoreError::InvalidParameter {
            name: "gamma",
            value: gamma.to_f64().unwrap_or(f64::NAN),
            constraint: "must be positive",
        });
    }
    let q = (-gamma * t * from_f64::<T>(0.5)).exp();
    let jump_amp = (T::one() - q * q).max(T::zero()).sqrt();
    let mut no_jump = CMatrix::zeros(2)?;
    no_jump.set_entry(0, 0, Complex::new(q, T::zero()));
    no_jump.set_entry(1, 1, Complex::one());
    let mut jump = CMatrix::zeros(2)?;
    jump.set_entry(1, 0, Complex::new(jump_amp, T::zero()));
    Ok((no_jump, jump))
}

/// Four-operator Kraus set for the pair at accumulated time `t`.
///
/// Index semantics: 0 = no photon, 3 = both photons; 1 and 2 are the
/// one-photon channels (qubit 1 / qubit 2 when independent, plus / minus
/// when interfering).
#[derive(Clone, Debug)]
pub struct PairKraus<T: Scalar> {
    pub ops: [CMatrix<T>; 4],
    pub mode: DetectionMode,
}

fn kron2<T: Scalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    CMatrix::from_fn(4, |i, j| {
        a.get(i >> 1, j >> 1) * b.get(i & 1, j & 1)
    })
    .expect("dim 4 supported")
}

pub fn pair_kraus<T: Scalar>(gamma: T, t: T, mode: DetectionMode) -> Result<PairKraus<T>> {
    let (w0, w1) = single_qubit_kraus(gamma, t)?;
    let k0 = kron2(&w0, &w0);
    let k1 = kron2(&w1, &w0);
    let k2 = kron2(&w0, &w1);
    let k3 = kron2(&w1, &w1);
    let ops = match mode {
        DetectionMode::Independent => [k0, k1, k2, k3],
        DetectionMode::Interacting => {
            let inv = from_f64::<T>(std::f64::consts::FRAC_1_SQRT_2);
            let scale = Complex::new(inv, T::zero());
            let plus = k1.add(&k2).scale(scale);
            let minus = k1.sub(&k2).scale(scale);
            [k0, plus, minus, k3]
        }
    };
    Ok(PairKraus { ops, mode })
}

impl<T: Scalar> PairKraus<T> {
    /// Largest entry of `sum_k K_k^dag K_k - I`.
    pub fn completeness_defect(&self) -> T {
        let mut sum = CMatrix::zeros(4).expect("dim 4");
        for op in &self.ops {
            sum = sum.add(&op.adjoint().matmul(op));
        }
        sum.sub(&CMatrix::identity(4).expect("dim 4")).max_abs()
    }
}

/// Ensemble-averaged state at time `t`: `rho = sum_k K_k rho_0 K_k^dag`.
///
/// The result does not depend on the detection mode (the two Kraus sets are
/// unitarily related decompositions of one channel).
pub fn unconditional_state<T: Scalar>(params: &DecayParams<T>, t: T) -> Result<CMatrix<T>> {
    params.validate()?;
    let kraus = pair_kraus(params.gamma, t, DetectionMode::Independent)?;
    let rho0 = params.initial_state().outer();
    let mut rho = CMatrix::zeros(4)?;
    for op in &kraus.ops {
        rho = rho.add(&op.matmul(&rho0).matmul(&op.adjoint()));
    }
    Ok(rho)
}

/// Closed-form concurrence of the ensemble-averaged state.
///
/// The averaged state is an X state with
/// `C(t) = 2 e^{-g t} |alpha| max(0, |delta| - |alpha| (1 - e^{-g t}))`.
pub fn esd_concurrence<T: Scalar>(params: &DecayParams<T>, t: T) -> Result<T> {
    params.validate()?;
    if !(t >= T::zero()) {
        return Err(CoreError::InvalidParameter {
            name: "t",
            value: t.to_f64().unwrap_or(f64::NAN),
            constraint: "must be non-negative",
        });
    }
    let decay = (-params.gamma * t).exp();
    let a = params.alpha.norm();
    let d = params.delta.norm();
    let two = from_f64::<T>(2.0);
    Ok((two * decay * a * (d - a * (T::one() - decay))).max(T::zero()))
}

/// Time where the ensemble-averaged concurrence hits zero, if finite.
///
/// Sudden death happens only for `|delta| < |alpha|`; otherwise the
/// concurrence decays but stays positive and `None` is returned.
pub fn esd_time<T: Scalar>(params: &DecayParams<T>) -> Option<T> {
    let a = params.alpha.norm();
    let d = params.delta.norm();
    if d < a && a > T::zero() {
        Some(-(T::one() - d / a).ln() / params.gamma)
    } else {
        None
    }
}

/// Closed-form trajectory-ensemble mean concurrence.
///
/// Independent detection: `2 |alpha delta| e^{-g t}`. Interfering detection
/// gains the one-photon term: `+ 2 |alpha|^2 e^{-g t} (1 - e^{-g t})`.
pub fn mean_trajectory_concurrence<T: Scalar>(
    params: &DecayParams<T>,
    mode: DetectionMode,
    t: T,
) -> Result<T> {
    params.validate()?;
    let decay = (-params.gamma * t).exp();
    let a = params.alpha.norm();
    let d = params.delta.norm();
    let two = from_f64::<T>(2.0);
    let base = two * a * d * decay;
    Ok(match mode {
        DetectionMode::Independent => base,
        DetectionMode::Interacting => base + two * a * a * decay * (T::one() - decay),
    })
}

/// Which channel fired first, and how many photons were seen in total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JumpSummary {
    /// Total number of emitted photons (0, 1, or 2).
    pub count: u8,
    /// One-photon channel index (1 or 2) of the first jump; `None` if the
    /// first event was a same-step double emission.
    pub first_channel: Option<u8>,
    /// Step index of the first jump.
    pub first_step: Option<usize>,
}

/// Pure-state record of one trajectory at the requested steps.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord<T: Scalar> {
    pub states: Vec<CVector<T>>,
    pub jumps: JumpSummary,
}

/// Fixed-step trajectory sampler: per-step Kraus set prepared once.
#[derive(Clone, Debug)]
pub struct TrajectorySampler<T: Scalar> {
    kraus: PairKraus<T>,
    /// Diagonal of the no-photon operator (it is diagonal in this basis).
    no_jump_diag: [T; 4],
    dt: T,
}

impl<T: Scalar> TrajectorySampler<T> {
    pub fn new(gamma: T, dt: T, mode: DetectionMode) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "dt",
                value: dt.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive",
            });
        }
        if gamma * dt >= from_f64::<T>(0.1) {
            return Err(CoreError::ResolutionTooCoarse {
                product: (gamma * dt).to_f64().unwrap_or(f64::NAN),
            });
        }
        let kraus = pair_kraus(gamma, dt, mode)?;
        let q = (-gamma * dt * from_f64::<T>(0.5)).exp();
        Ok(Self {
            kraus,
            no_jump_diag: [q * q, q, q, T::one()],
            dt,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Advance one step. Returns the channel applied (0..=3).
    #[inline]
    fn step(&self, psi: &mut CVector<T>, stream: &mut RngStream) -> usize {
        let u: T = stream.uniform();
        // No-photon probability from the diagonal operator.
        let mut p0 = T::zero();
        for k in 0..4 {
            p0 += self.no_jump_diag[k] * self.no_jump_diag[k] * psi[k].norm_sqr();
        }
        if u < p0 {
            let inv = p0.sqrt().recip();
            for k in 0..4 {
                let w = self.no_jump_diag[k] * inv;
                psi[k] = psi[k].scale(w);
            }
            return 0;
        }
        // Rare branch: one of the photon channels fired.
        let mut candidates = [CVector::zeros(4).expect("dim 4"); 3];
        let mut probs = [T::zero(); 3];
        for c in 0..3 {
            candidates[c] = self.kraus.ops[c + 1].mul_vec(psi);
            probs[c] = candidates[c].norm().powi(2);
        }
        let mut target = u - p0;
        let mut chosen = None;
        for c in 0..3 {
            if target < probs[c] {
                chosen = Some(c);
                break;
            }
            target -= probs[c];
        }
        let chosen = chosen.unwrap_or_else(|| {
            // Rounding pushed u past the total; take the last live channel.
            (0..3).rev().find(|&c| probs[c] > T::zero()).unwrap_or(2)
        });
        let normalized = candidates[chosen]
            .normalized()
            .expect("selected channel has positive probability");
        *psi = normalized;
        chosen + 1
    }

    /// Run one trajectory, recording the state at the given ascending step
    /// indices (0 records the initial state).
    pub fn run(
        &self,
        params: &DecayParams<T>,
        record_steps: &[usize],
        stream: &mut RngStream,
    ) -> Result<TrajectoryRecord<T>> {
        params.validate()?;
        let mut psi = params.initial_state();
        let mut jumps = JumpSummary::default();
        let mut states = Vec::with_capacity(record_steps.len());
        let last = record_steps.last().copied().unwrap_or(0);
        let mut next_record = 0;
        while next_record < record_steps.len() && record_steps[next_record] == 0 {
            states.push(psi);
            next_record += 1;
        }
        for step in 1..=last {
            // Once both photons are out the state is |dd> and frozen.
            if jumps.count < 2 {
                let channel = self.step(&mut psi, stream);
                if channel > 0 {
                    let emitted: u8 = if channel == 3 { 2 } else { 1 };
                    if jumps.count == 0 {
                        jumps.first_step = Some(step);
                        if emitted == 1 {
                            jumps.first_channel = Some(channel as u8);
                        }
                    }
                    jumps.count = (jumps.count + emitted).min(2);
                }
            }
            while next_record < record_steps.len() && record_steps[next_record] == step {
                states.push(psi);
                next_record += 1;
            }
        }
        Ok(TrajectoryRecord { states, jumps })
    }
}

/// Trajectory-ensemble statistics of the pair concurrence.
#[derive(Clone, Debug)]
pub struct EnsembleStats<T: Scalar> {
    /// Record times (step index times dt).
    pub times: Vec<T>,
    /// Mean pure-state concurrence over trajectories.
    pub mean_concurrence: Vec<T>,
    /// Standard error of the mean.
    pub mean_concurrence_se: Vec<T>,
    /// One series per requested subensemble size.
    pub subensembles: Vec<SubensembleSeries<T>>,
}

/// Concurrence of `n`-trajectory averaged states, grouped in sampling order.
#[derive(Clone, Debug)]
pub struct SubensembleSeries<T: Scalar> {
    pub group_size: usize,
    pub n_groups: usize,
    pub mean: Vec<T>,
    pub se: Vec<T>,
}

struct RunningMoments<T: Scalar> {
    count: u64,
    mean: T,
    m2: T,
}

impl<T: Scalar> RunningMoments<T> {
    fn new() -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    fn push(&mut self, x: T) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / T::from_u64(self.count).expect("count fits scalar");
        self.m2 += delta * (x - self.mean);
    }

    fn standard_error(&self) -> T {
        if self.count < 2 {
            return T::zero();
        }
        let n = T::from_u64(self.count).expect("count fits scalar");
        (self.m2 / (n - T::one()) / n).sqrt()
    }
}

/// Monte Carlo ensemble sweep of the two-qubit decay.
///
/// Record steps are in units of `dt`. Trajectory `i` draws from stream
/// `(master_seed, i)`, and all reductions run in trajectory order, so the
/// result is independent of the worker count.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble<T: Scalar>(
    params: &DecayParams<T>,
    mode: DetectionMode,
    dt: T,
    record_steps: &[usize],
    n_traj: usize,
    group_sizes: &[usize],
    master_seed: u64,
) -> Result<EnsembleStats<T>> {
    if n_traj == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n_traj",
            value: 0.0,
            constraint: "must be at least 1",
        });
    }
    for &g in group_sizes {
        if g == 0 {
            return Err(CoreError::InvalidParameter {
                name: "group_size",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
    }
    let sampler = TrajectorySampler::new(params.gamma, dt, mode)?;
    params.validate()?;
    let n_rec = record_steps.len();
    let mut mean_moments: Vec<RunningMoments<T>> = (0..n_rec).map(|_| RunningMoments::new()).collect();
    struct GroupAcc<T: Scalar> {
        size: usize,
        fill: usize,
        sums: Vec<CMatrix<T>>,
        moments: Vec<RunningMoments<T>>,
    }
    let mut groups: Vec<GroupAcc<T>> = group_sizes
        .iter()
        .map(|&size| GroupAcc {
            size,
            fill: 0,
            sums: vec![CMatrix::zeros(4).expect("dim 4"); n_rec],
            moments: (0..n_rec).map(|_| RunningMoments::new()).collect(),
        })
        .collect();

    const CHUNK: usize = 512;
    let mut start = 0;
    while start < n_traj {
        let end = (start + CHUNK).min(n_traj);
        let records: Vec<TrajectoryRecord<T>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut stream = RngStream::new(master_seed, i as u64);
                sampler
                    .run(params, record_steps, &mut stream)
                    .expect("validated parameters")
            })
            .collect();
        for record in &records {
            for (k, psi) in record.states.iter().enumerate() {
                let c = pure_pair_concurrence(psi);
                mean_moments[k].push(c);
            }
            for group in groups.iter_mut() {
                for (k, psi) in record.states.iter().enumerate() {
                    group.sums[k] = group.sums[k].add(&psi.outer());
                }
                group.fill += 1;
                if group.fill == group.size {
                    let inv = Complex::new(
                        T::from_usize(group.size).expect("size fits scalar").recip(),
                        T::zero(),
                    );
                    for k in 0..n_rec {
                        let rho = group.sums[k].scale(inv);
                        let c = concurrence_mixed(&rho)?;
                        group.moments[k].push(c);
                        group.sums[k] = CMatrix::zeros(4)?;
                    }
                    group.fill = 0;
                }
            }
        }
        start = end;
    }

    let times = record_steps
        .iter()
        .map(|&s| T::from_usize(s).expect("step fits scalar") * dt)
        .collect();
    Ok(EnsembleStats {
        times,
        mean_concurrence: mean_moments.iter().map(|m| m.mean).collect(),
        mean_concurrence_se: mean_moments.iter().map(|m| m.standard_error()).collect(),
        subensembles: groups
            .into_iter()
            .map(|g| SubensembleSeries {
                group_size: g.size,
                n_groups: g.moments.first().map_or(0, |m| m.count as usize),
                mean: g.moments.iter().map(|m| m.mean).collect(),
                se: g.moments.iter().map(|m| m.standard_error()).collect(),
            })
            .collect(),
    })
}

/// `C = 2 |psi_0 psi_3 - psi_1 psi_2|` without validation (internal hot path;
/// trajectory states are normalized by construction).
#[inline]
fn pure_pair_concurrence<T: Scalar>(psi: &CVector<T>) -> T {
    let det = psi[0] * psi[3] - psi[1] * psi[2];
    det.norm() + det.norm()
}

/// Outcome statistics of a projective `S^2` measurement, split by detection
/// record: bin 0 = no photon, bins 1 and 2 = the one-photon channels, bin 3 =
/// two photons.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChannelBin {
    pub trajectories: u64,
    pub count_outcome0: u64,
    pub count_outcome2: u64,
    pub sum_s2_expectation: f64,
}

impl ChannelBin {
    pub fn mean_s2(&self) -> f64 {
        if self.trajectories == 0 {
            0.0
        } else {
            self.sum_s2_expectation / self.trajectories as f64
        }
    }
}

/// Evolve `n_traj` trajectories to `t_measure` and bin a terminal `S^2`
/// sample by the photon record.
pub fn channel_binned_s2<T: Scalar>(
    params: &DecayParams<T>,
    mode: DetectionMode,
    dt: T,
    t_measure: T,
    n_traj: usize,
    master_seed: u64,
) -> Result<[ChannelBin; 4]> {
    if n_traj == 0 {
        return Err(CoreError::InvalidParameter {
            name: "n_traj",
            value: 0.0,
            constraint: "must be at least 1",
        });
    }
    let sampler = TrajectorySampler::new(params.gamma, dt, mode)?;
    params.validate()?;
    let steps = (t_measure / dt).round().to_f64().unwrap_or(0.0) as usize;
    let record = [steps.max(1)];
    let ops = crate::spin::collective_operators::<T>(2)?;
    let per_traj: Vec<(usize, T, T)> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut stream = RngStream::new(master_seed, i as u64);
            let rec = sampler
                .run(params, &record, &mut stream)
                .expect("validated parameters");
            let psi = &rec.states[0];
            let s2 = crate::witness::s2_expectation(psi, &ops).expect("normalized state");
            let outcome = crate::witness::s2_sample(psi, &ops, &mut stream)
                .expect("normalized state");
            let bin = match (rec.jumps.count, rec.jumps.first_channel) {
                (0, _) => 0,
                (1, Some(ch)) => ch as usize,
                _ => 3,
            };
            (bin, outcome, s2)
        })
        .collect();
    let mut bins = [ChannelBin::default(); 4];
    for (bin, outcome, s2) in per_traj {
        let b = &mut bins[bin];
        b.trajectories += 1;
        if outcome > T::one() {
            b.count_outcome2 += 1;
        } else {
            b.count_outcome0 += 1;
        }
        b.sum_s2_expectation += s2.to_f64().unwrap_or(f64::NAN);
    }
    Ok(bins)
}

/// Fixed-step fourth-order Runge-Kutta integration of the Lindblad equation
/// `drho/dt = -i [H, rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)`.
pub fn lindblad_integrate<T: Scalar>(
    h: &CMatrix<T>,
    lindblad_ops: &[CMatrix<T>],
    rho0: &CMatrix<T>,
    t_end: T,
    dt: T,
) -> Result<CMatrix<T>> {
    if !(dt > T::zero()) || !(t_end >= T::zero()) {
        return Err(CoreError::InvalidParameter {
            name: "dt",
            value: dt.to_f64().unwrap_or(f64::NAN),
            constraint: "needs dt > 0 and t_end >= 0",
        });
    }
    let dim = rho0.dim();
    if h.dim() != dim || lindblad_ops.iter().any(|l| l.dim() != dim) {
        return Err(CoreError::DimensionMismatch {
            expected: dim,
            got: h.dim(),
        });
    }
    let trace0 = rho0.trace().re;
    if (trace0 - T::one()).abs() > from_f64::<T>(1e-9) {
        return Err(CoreError::TraceNotOne {
            trace: trace0.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = from_f64::<T>(0.5);
    let ldl: Vec<CMatrix<T>> = lindblad_ops
        .iter()
        .map(|l| l.adjoint().matmul(l))
        .collect();
    let rhs = |rho: &CMatrix<T>| -> CMatrix<T> {
        let mut out = h
            .matmul(rho)
            .sub(&rho.matmul(h))
            .scale(Complex::new(T::zero(), -T::one()));
        for (l, ll) in lindblad_ops.iter().zip(&ldl) {
            out = out.add(&l.matmul(rho).matmul(&l.adjoint()));
            out = out.sub(&ll.matmul(rho).add(&rho.matmul(ll)).scale(Complex::new(half, T::zero())));
        }
        out
    };
    let n_steps = (t_end / dt).ceil().to_f64().unwrap_or(0.0) as usize;
    let mut rho = *rho0;
    let mut t = T::zero();
    for step in 0..n_steps {
        // Shrink the final step to land exactly on t_end.
        let h_step = if (t + dt) > t_end { t_end - t } else { dt };
        if h_step <= T::zero() {
            break;
        }
        let k1 = rhs(&rho);
        let half_h = Complex::new(h_step * half, T::zero());
        let k2 = rhs(&rho.add(&k1.scale(half_h)));
        let k3 = rhs(&rho.add(&k2.scale(half_h)));
        let k4 = rhs(&rho.add(&k3.scale(Complex::new(h_step, T::zero()))));
        let sixth = Complex::new(h_step / from_f64::<T>(6.0), T::zero());
        let two = Complex::new(from_f64::<T>(2.0), T::zero());
        let incr = k1.add(&k2.scale(two)).add(&k3.scale(two)).add(&k4).scale(sixth);
        rho = rho.add(&incr);
        t += h_step;
        let trace = rho.trace().re;
        if !((trace - T::one()).abs() <= from_f64::<T>(1e-6)) {
            return Err(CoreError::TraceDrift {
                trace: trace.to_f64().unwrap_or(f64::NAN),
                t: (T::from_usize(step + 1).expect("fits") * dt)
                    .to_f64()
                    .unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rho)
}

/// Lowering operator of qubit `which` (1 or 2) in the pair space.
pub fn lowering_operator<T: Scalar>(which: usize) -> Result<CMatrix<T>> {
    let mut op = CMatrix::zeros(4)?;
    let one = Complex::<T>::one();
    match which {
        1 => {
            op.set_entry(2, 0, one);
            op.set_entry(3, 1, one);
        }
        2 => {
            op.set_entry(1, 0, one);
            op.set_entry(3, 2, one);
        }
        _ => {
            return Err(CoreError::InvalidParameter {
                name: "which",
                value: which as f64,
                constraint: "must be 1 or 2",
            })
        }
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::{concurrence_pure, s2_expectation};
    use crate::C64;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn reference_params() -> DecayParams<f64> {
        DecayParams::new(
            c(3.0 / 10.0_f64.sqrt(), 0.0),
            c(1.0 / 10.0_f64.sqrt(), 0.0),
            1.0,
        )
        .unwrap()
    }

    fn bell(sign: f64) -> CVector<f64> {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = CVector::zeros(4).unwrap();
        v[1] = c(inv, 0.0);
        v[2] = c(sign * inv, 0.0);
        v
    }

    #[test]
    fn single_qubit_kraus_limits() {
        let (k0, k1) = single_qubit_kraus::<f64>(1.0, 0.0).unwrap();
        assert!(k0.sub(&CMatrix::identity(2).unwrap()).max_abs() < 1e-15);
        assert!(k1.max_abs() < 1e-15);
        let t = std::f64::consts::LN_2;
        let (k0, k1) = single_qubit_kraus::<f64>(1.0, t).unwrap();
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(k0.get(0, 0).re, inv, epsilon = 1e-14);
        assert_relative_eq!(k1.get(1, 0).re, inv, epsilon = 1e-14);
        let (k0, k1) = single_qubit_kraus::<f64>(1.0, 200.0).unwrap();
        assert!(k0.get(0, 0).norm() < 1e-15);
        assert_relative_eq!(k1.get(1, 0).re, 1.0, epsilon = 1e-14);
        assert!(single_qubit_kraus::<f64>(1.0, -0.1).is_err());
        assert!(single_qubit_kraus::<f64>(0.0, 0.1).is_err());
    }

    #[test]
    fn kraus_completeness_both_modes() {
        for &t in &[0.1, 1.0, 10.0] {
            for mode in [DetectionMode::Independent, DetectionMode::Interacting] {
                let k = pair_kraus::<f64>(1.0, t, mode).unwrap();
                assert!(
                    k.completeness_defect() < 1e-12,
                    "defect {} at t {t} mode {mode:?}",
                    k.completeness_defect()
                );
            }
        }
        let (k0, k1) = single_qubit_kraus::<f64>(1.0, 0.7).unwrap();
        let sum = k0.adjoint().matmul(&k0).add(&k1.adjoint().matmul(&k1));
        assert!(sum.sub(&CMatrix::identity(2).unwrap()).max_abs() < 1e-15);
    }

    #[test]
    fn interfering_channels_select_bell_states() {
        let t = 0.8;
        let k = pair_kraus::<f64>(1.0, t, DetectionMode::Interacting).unwrap();
        // Minus channel annihilates |psi+>, plus channel annihilates |psi->.
        assert!(k.ops[2].mul_vec(&bell(1.0)).norm() < 1e-15);
        assert!(k.ops[1].mul_vec(&bell(-1.0)).norm() < 1e-15);
        // Plus channel sends |uu> to |psi+> with weight e^{-gt}(1 - e^{-gt}).
        let uu = CVector::basis(4, 0).unwrap();
        let out = k.ops[1].mul_vec(&uu);
        let expected_sq = (-t).exp() * (1.0 - (-t).exp());
        assert_relative_eq!(out.norm() * out.norm(), expected_sq, epsilon = 1e-13);
        let overlap = bell(1.0).dot(&out.normalized().unwrap()).norm();
        assert_relative_eq!(overlap, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn unconditional_state_is_decomposition_invariant() {
        let mut stream = RngStream::new(8, 0);
        for _ in 0..20 {
            let phase: f64 = stream.uniform();
            let weight: f64 = stream.uniform();
            let a = weight.sqrt();
            let d = (1.0 - weight).sqrt();
            let params = DecayParams::new(
                C64::from_polar(a, std::f64::consts::TAU * phase),
                c(d, 0.0),
                1.0,
            )
            .unwrap();
            let t: f64 = stream.uniform::<f64>() * 3.0 + 0.01;
            let rho_ind = unconditional_state(&params, t).unwrap();
            // Same channel resolved by interfering detectors.
            let kraus = pair_kraus(params.gamma, t, DetectionMode::Interacting).unwrap();
            let rho0 = params.initial_state().outer();
            let mut rho_int = CMatrix::zeros(4).unwrap();
            for op in &kraus.ops {
                rho_int = rho_int.add(&op.matmul(&rho0).matmul(&op.adjoint()));
            }
            assert!(rho_ind.sub(&rho_int).max_abs() < 1e-12);
            assert_relative_eq!(rho_ind.trace().re, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unconditional_state_closed_form_entries() {
        let params = reference_params();
        let t = 0.9;
        let rho = unconditional_state(&params, t).unwrap();
        let p = 1.0 - (-t).exp();
        let a2 = params.alpha.norm_sqr();
        let d2 = params.delta.norm_sqr();
        assert_relative_eq!(rho.get(0, 0).re, a2 * (1.0 - p) * (1.0 - p), epsilon = 1e-12);
        assert_relative_eq!(rho.get(1, 1).re, a2 * p * (1.0 - p), epsilon = 1e-12);
        assert_relative_eq!(rho.get(2, 2).re, a2 * p * (1.0 - p), epsilon = 1e-12);
        assert_relative_eq!(rho.get(3, 3).re, a2 * p * p + d2, epsilon = 1e-12);
        let r14 = (params.alpha * params.delta.conj()).scale((-t).exp());
        assert!((rho.get(0, 3) - r14).norm() < 1e-12);
    }

    #[test]
    fn unconditional_state_matches_lindblad_integration() {
        let params = reference_params();
        let t = 0.7;
        let h = CMatrix::<f64>::zeros(4).unwrap();
        let ls = [
            lowering_operator::<f64>(1).unwrap(),
            lowering_operator::<f64>(2).unwrap(),
        ];
        let rho_me = lindblad_integrate(&h, &ls, &params.initial_state().outer(), t, 1e-3)
            .unwrap();
        let rho_kraus = unconditional_state(&params, t).unwrap();
        assert!(rho_me.sub(&rho_kraus).max_abs() < 1e-6);
    }

    #[test]
    fn lindblad_single_qubit_decay_rate() {
        let mut rho0 = CMatrix::<f64>::zeros(2).unwrap();
        rho0.set_entry(0, 0, c(1.0, 0.0));
        let mut lower = CMatrix::<f64>::zeros(2).unwrap();
        lower.set_entry(1, 0, c(1.0, 0.0));
        let h = CMatrix::<f64>::zeros(2).unwrap();
        let t = 1.3;
        let rho = lindblad_integrate(&h, &[lower], &rho0, t, 1e-3).unwrap();
        assert_relative_eq!(rho.get(0, 0).re, (-t).exp(), epsilon = 1e-8);
        assert_relative_eq!(rho.trace().re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn lindblad_without_generators_is_constant() {
        let params = reference_params();
        let rho0 = params.initial_state().outer();
        let h = CMatrix::<f64>::zeros(4).unwrap();
        let rho = lindblad_integrate(&h, &[], &rho0, 2.0, 1e-2).unwrap();
        assert!(rho.sub(&rho0).max_abs() < 1e-12);
    }

    #[test]
    fn lindblad_rejects_bad_trace() {
        let rho0 = CMatrix::<f64>::identity(4).unwrap();
        let h = CMatrix::<f64>::zeros(4).unwrap();
        assert!(matches!(
            lindblad_integrate(&h, &[], &rho0, 1.0, 1e-2),
            Err(CoreError::TraceNotOne { .. })
        ));
    }

    #[test]
    fn esd_concurrence_reference_behaviour() {
        let params = reference_params();
        assert_relative_eq!(esd_concurrence(&params, 0.0).unwrap(), 0.6, epsilon = 1e-14);
        let t_esd = esd_time(&params).unwrap();
        assert_relative_eq!(t_esd, (1.5f64).ln(), epsilon = 1e-12);
        assert!(esd_concurrence(&params, t_esd - 1e-4).unwrap() > 0.0);
        assert_eq!(esd_concurrence(&params, t_esd + 1e-4).unwrap(), 0.0);
        // Against the generic mixed-state concurrence on a time grid. The
        // t = 0 point is rank one, where solver noise under the square
        // roots limits the generic routine to ~1e-8.
        for k in 0..30 {
            let t = 0.1 * k as f64;
            let rho = unconditional_state(&params, t).unwrap();
            let reference = concurrence_mixed(&rho).unwrap();
            assert_relative_eq!(
                esd_concurrence(&params, t).unwrap(),
                reference,
                epsilon = 1e-7
            );
        }
        // Majority weight on |dd>: no sudden death.
        let swapped = DecayParams::new(params.delta, params.alpha, 1.0).unwrap();
        assert!(esd_time(&swapped).is_none());
        assert!(esd_concurrence(&swapped, 50.0).unwrap() > 0.0);
    }

    #[test]
    fn mean_trajectory_concurrence_reference_values() {
        let params = reference_params();
        let c0 = 2.0 * params.alpha.norm() * params.delta.norm();
        for mode in [DetectionMode::Independent, DetectionMode::Interacting] {
            assert_relative_eq!(
                mean_trajectory_concurrence(&params, mode, 0.0).unwrap(),
                c0,
                epsilon = 1e-14
            );
        }
        assert_relative_eq!(
            mean_trajectory_concurrence(&params, DetectionMode::Independent, 1.0).unwrap(),
            0.6 / std::f64::consts::E,
            epsilon = 1e-14
        );
        // Pure |uu>: the interfering mean peaks at 1/2 when e^{-gt} = 1/2.
        let uu = DecayParams::new(c(1.0, 0.0), c(0.0, 0.0), 1.0).unwrap();
        let peak = mean_trajectory_concurrence(
            &uu,
            DetectionMode::Interacting,
            std::f64::consts::LN_2,
        )
        .unwrap();
        assert_relative_eq!(peak, 0.5, epsilon = 1e-14);
        let off_peak = mean_trajectory_concurrence(&uu, DetectionMode::Interacting, 0.5).unwrap();
        assert!(off_peak < peak);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let params = reference_params();
        let sampler = TrajectorySampler::new(1.0, 1e-3, DetectionMode::Interacting).unwrap();
        let record: Vec<usize> = (0..=20).map(|k| k * 50).collect();
        let mut s1 = RngStream::new(77, 5);
        let mut s2 = RngStream::new(77, 5);
        let r1 = sampler.run(&params, &record, &mut s1).unwrap();
        let r2 = sampler.run(&params, &record, &mut s2).unwrap();
        assert_eq!(r1.jumps, r2.jumps);
        for (a, b) in r1.states.iter().zip(&r2.states) {
            for k in 0..4 {
                assert_eq!(a[k], b[k]);
            }
        }
    }

    #[test]
    fn one_photon_interfering_trajectories_collapse_to_bell_plus() {
        let params = reference_params();
        let dt = 1e-3;
        let sampler = TrajectorySampler::new(1.0, dt, DetectionMode::Interacting).unwrap();
        let record: Vec<usize> = (1..=8).map(|k| k * 250).collect();
        let mut seen = 0;
        for idx in 0..400 {
            let mut stream = RngStream::new(31, idx);
            let rec = sampler.run(&params, &record, &mut stream).unwrap();
            if rec.jumps.count == 1 && rec.jumps.first_channel == Some(1) {
                seen += 1;
                let first_step = rec.jumps.first_step.unwrap();
                for (k, &step) in record.iter().enumerate() {
                    if step >= first_step {
                        let overlap = bell(1.0).dot(&rec.states[k]).norm();
                        assert!(
                            overlap > 1.0 - 1e-10,
                            "fidelity {overlap} at step {step}"
                        );
                    }
                }
            }
        }
        assert!(seen > 10, "only {seen} single-plus trajectories in 400");
    }

    #[test]
    fn one_photon_independent_trajectories_land_in_basis_states() {
        let params = reference_params();
        let sampler = TrajectorySampler::new(1.0, 1e-3, DetectionMode::Independent).unwrap();
        let record = [1200usize];
        let mut seen = 0;
        for idx in 0..400 {
            let mut stream = RngStream::new(37, idx);
            let rec = sampler.run(&params, &record, &mut stream).unwrap();
            if rec.jumps.count == 1 {
                seen += 1;
                // Qubit 1 emitted -> |du>, qubit 2 emitted -> |ud>.
                let target = match rec.jumps.first_channel {
                    Some(1) => 2,
                    Some(2) => 1,
                    other => panic!("single jump without channel: {other:?}"),
                };
                assert!(rec.states[0][target].norm() > 1.0 - 1e-10);
            }
        }
        assert!(seen > 20);
    }

    #[test]
    fn coarse_and_fine_channel_statistics_agree() {
        let params = reference_params();
        let t = 0.8;
        let dt = 1e-3;
        let n = 20_000;
        let sampler = TrajectorySampler::new(1.0, dt, DetectionMode::Independent).unwrap();
        let record = [(t / dt) as usize];
        let mut counts = [0u64; 4];
        for idx in 0..n {
            let mut stream = RngStream::new(41, idx);
            let rec = sampler.run(&params, &record, &mut stream).unwrap();
            let bin = match (rec.jumps.count, rec.jumps.first_channel) {
                (0, _) => 0,
                (1, Some(ch)) => ch as usize,
                _ => 3,
            };
            counts[bin] += 1;
        }
        // One-step Kraus probabilities |K_k psi|^2 at the full time t.
        let kraus = pair_kraus(params.gamma, t, DetectionMode::Independent).unwrap();
        let psi0 = params.initial_state();
        for k in 0..4 {
            let p = kraus.ops[k].mul_vec(&psi0).norm().powi(2);
            let observed = counts[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-4);
            assert!(
                (observed - p).abs() < 4.0 * se,
                "channel {k}: observed {observed}, expected {p}"
            );
        }
    }

    #[test]
    fn ensemble_mean_matches_closed_forms() {
        let params = reference_params();
        let dt = 1e-3;
        let record: Vec<usize> = vec![250, 500, 1000, 2000];
        for mode in [DetectionMode::Independent, DetectionMode::Interacting] {
            let stats =
                run_ensemble(&params, mode, dt, &record, 10_000, &[], 2024).unwrap();
            for (k, &steps) in record.iter().enumerate() {
                let t = steps as f64 * dt;
                let exact = mean_trajectory_concurrence(&params, mode, t).unwrap();
                let err = (stats.mean_concurrence[k] - exact).abs();
                let band = 3.0 * stats.mean_concurrence_se[k] + 1e-4;
                assert!(
                    err < band,
                    "mode {mode:?} t {t}: |{} - {exact}| > {band}",
                    stats.mean_concurrence[k]
                );
            }
        }
    }

    #[test]
    fn group_of_one_reproduces_the_mean_series() {
        let params = reference_params();
        let stats = run_ensemble(
            &params,
            DetectionMode::Interacting,
            1e-3,
            &[0, 400, 800],
            500,
            &[1],
            7,
        )
        .unwrap();
        let sub = &stats.subensembles[0];
        assert_eq!(sub.group_size, 1);
        assert_eq!(sub.n_groups, 500);
        // Size-1 groups route pure states through the rank-1 mixed-state
        // path, which carries ~1e-8 eigensolver noise.
        for k in 0..3 {
            assert_relative_eq!(sub.mean[k], stats.mean_concurrence[k], epsilon = 1e-7);
        }
    }

    #[test]
    fn small_subensembles_survive_past_sudden_death() {
        let params = reference_params();
        let t_esd = esd_time(&params).unwrap();
        let dt = 1e-3;
        let step = ((1.5 * t_esd) / dt).round() as usize;
        let stats = run_ensemble(
            &params,
            DetectionMode::Interacting,
            dt,
            &[step],
            2000,
            &[2, 50],
            404,
        )
        .unwrap();
        let t = step as f64 * dt;
        assert_eq!(esd_concurrence(&params, t).unwrap(), 0.0);
        let pairs = &stats.subensembles[0];
        let large = &stats.subensembles[1];
        assert!(
            pairs.mean[0] > 5.0 * pairs.se[0],
            "pair groups should stay entangled: {} +- {}",
            pairs.mean[0],
            pairs.se[0]
        );
        assert!(
            large.mean[0] < 0.05,
            "50-trajectory groups should approach the dead ensemble: {}",
            large.mean[0]
        );
    }

    #[test]
    fn channel_binned_s2_interfering_is_deterministic_per_bin() {
        let params = reference_params();
        let t = 2.0 * esd_time(&params).unwrap();
        let bins = channel_binned_s2(
            &params,
            DetectionMode::Interacting,
            1e-3,
            t,
            4000,
            909,
        )
        .unwrap();
        let total: u64 = bins.iter().map(|b| b.trajectories).sum();
        assert_eq!(total, 4000);
        // No photon or plus photon: triplet sector, outcome always 2.
        assert_eq!(bins[0].count_outcome0, 0);
        assert_relative_eq!(bins[0].mean_s2(), 2.0, epsilon = 1e-9);
        assert_eq!(bins[1].count_outcome0, 0);
        assert_relative_eq!(bins[1].mean_s2(), 2.0, epsilon = 1e-9);
        // Minus photon: singlet, outcome always 0.
        assert_eq!(bins[2].count_outcome2, 0);
        assert_relative_eq!(bins[2].mean_s2(), 0.0, epsilon = 1e-9);
        // Two photons: |dd> is a triplet state.
        assert_eq!(bins[3].count_outcome0, 0);
        assert!(bins[1].trajectories > 0 && bins[2].trajectories > 0);
    }

    #[test]
    fn channel_binned_s2_independent_splits_evenly() {
        let params = reference_params();
        let t = 2.0 * esd_time(&params).unwrap();
        let bins = channel_binned_s2(
            &params,
            DetectionMode::Independent,
            1e-3,
            t,
            5000,
            909,
        )
        .unwrap();
        for bin in [1, 2] {
            let b = &bins[bin];
            assert!(b.trajectories > 500);
            assert_relative_eq!(b.mean_s2(), 1.0, epsilon = 1e-9);
            let frac0 = b.count_outcome0 as f64 / b.trajectories as f64;
            let se = 0.5 / (b.trajectories as f64).sqrt();
            assert!((frac0 - 0.5).abs() < 4.0 * se, "fraction {frac0}");
        }
    }

    #[test]
    fn sampler_rejects_coarse_steps() {
        assert!(matches!(
            TrajectorySampler::<f64>::new(1.0, 0.2, DetectionMode::Independent),
            Err(CoreError::ResolutionTooCoarse { .. })
        ));
    }

    #[test]
    fn trajectory_norm_stays_unit_without_renormalization_tricks() {
        let params = reference_params();
        let sampler = TrajectorySampler::new(1.0, 1e-3, DetectionMode::Interacting).unwrap();
        let record: Vec<usize> = (0..=10).map(|k| k * 400).collect();
        for idx in 0..50 {
            let mut stream = RngStream::new(55, idx);
            let rec = sampler.run(&params, &record, &mut stream).unwrap();
            for psi in &rec.states {
                assert!((psi.norm() - 1.0).abs() < 1e-10);
                // Every recorded state is a valid argument downstream.
                concurrence_pure(psi).unwrap();
                let ops = crate::spin::collective_operators::<f64>(2).unwrap();
                s2_expectation(psi, &ops).unwrap();
            }
        }
    }
}
