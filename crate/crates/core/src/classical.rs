//! Two resonant spins coupled through a diffusing, detuned mediator spin.
//!
//! Spin 1 sits at 0, spin 2 at `length`, and spin 3 wanders between
//! reflecting walls at `epsilon * length` and `(1 - epsilon) * length`. Its
//! frequency tracks its position linearly, so it is always detuned from the
//! resonant pair. Over each step the Hamiltonian is frozen, the sector state
//! advances by the exact unitary `exp(-i H dt)` (eigendecomposition), and the
//! mediator position then takes one exact-in-law stochastic step.
//!
//! Each trajectory yields one realization of the susceptibility witness
//! `chi / beta` of the final pure state, the quantity whose distribution over
//! coupling histories separates entangled from separable records.

use crate::brownian::{overdamped_step, LangevinParams, OuStepper};
use crate::error::{CoreError, Result};
use crate::linalg::sym3_eig;
use crate::rng::RngStream;
use crate::scalar::{from_f64, Scalar};
use crate::spin::{collective_operators, embed_single_excitation, CollectiveOperators};
use crate::witness::{s2_expectation, susceptibility};
use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

/// Configuration of the stochastically coupled three-spin run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalNoiseConfig<T: Scalar> {
    /// Pair coupling at separation `length`.
    pub g0: T,
    /// Distance between the resonant pair.
    pub length: T,
    /// Frequency offset of spin 2; spin 3 carries `delta * r3 / length`.
    pub delta: T,
    /// Position diffusivity of the mediator.
    pub diffusivity: T,
    /// Velocity relaxation time; 0 selects the overdamped limit.
    pub tau: T,
    /// Wall inset: the mediator lives in `[eps L, (1 - eps) L]`.
    pub epsilon: T,
    /// Integration step.
    pub dt: T,
    /// Total evolution time (rounded to a whole number of steps).
    pub t_end: T,
    /// Initial mediator position.
    pub r3_init: T,
}

impl<T: Scalar> ClassicalNoiseConfig<T> {
    pub fn walls(&self) -> (T, T) {
        (
            self.epsilon * self.length,
            (T::one() - self.epsilon) * self.length,
        )
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt)
            .round()
            .to_f64()
            .map_or(0, |x| x as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g0 >= T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "g0",
                value: self.g0.to_f64().unwrap_or(f64::NAN),
                constraint: "must be non-negative",
            });
        }
        if !(self.length > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "length",
                value: self.length.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive",
            });
        }
        if !(self.epsilon > T::zero() && self.epsilon < from_f64::<T>(0.5)) {
            return Err(CoreError::InvalidParameter {
                name: "epsilon",
                value: self.epsilon.to_f64().unwrap_or(f64::NAN),
                constraint: "must lie strictly between 0 and 0.5",
            });
        }
        if !(self.dt > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "dt",
                value: self.dt.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive",
            });
        }
        if !(self.t_end > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "t_end",
                value: self.t_end.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive",
            });
        }
        let (lo, hi) = self.walls();
        if !(self.r3_init >= lo && self.r3_init <= hi) {
            return Err(CoreError::InvalidParameter {
                name: "r3_init",
                value: self.r3_init.to_f64().unwrap_or(f64::NAN),
                constraint: "must start between the walls",
            });
        }
        self.langevin_params().validate()?;
        // The frozen-Hamiltonian step must resolve the fastest scale, which
        // is the coupling at wall contact, g0 / epsilon^3.
        let eps3 = self.epsilon * self.epsilon * self.epsilon;
        let fastest = (self.g0 / eps3).max(self.delta.abs());
        if self.dt * fastest >= from_f64::<T>(0.1) {
            return Err(CoreError::ResolutionTooCoarse {
                product: (self.dt * fastest).to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    pub fn langevin_params(&self) -> LangevinParams<T> {
        let (lo, hi) = self.walls();
        LangevinParams {
            diffusivity: self.diffusivity,
            tau: self.tau,
            wall_lo: lo,
            wall_hi: hi,
        }
    }
}

/// Transfer probability of a static detuned pair after time `t`:
/// Rabi formula `P = (g0^2 / W^2) sin^2(W t / 2)`, `W = sqrt(delta^2 + g0^2)`.
fn static_transfer<T: Scalar>(g0: T, delta: T, t: T) -> T {
    let rabi_sq = delta * delta + g0 * g0;
    if rabi_sq == T::zero() {
        return T::zero();
    }
    let rabi = rabi_sq.sqrt();
    let s = (rabi * t * from_f64::<T>(0.5)).sin();
    (g0 * g0 / rabi_sq) * s * s
}

/// Concurrence of a static pair at time `t`, starting from spin 1 excited:
/// `C = 2 sqrt(P (1 - P))` with the Rabi transfer probability `P`.
pub fn static_pair_concurrence<T: Scalar>(g0: T, delta: T, t: T) -> T {
    let p = static_transfer(g0, delta, t);
    let two = from_f64::<T>(2.0);
    two * (p * (T::one() - p)).max(T::zero()).sqrt()
}

/// Largest concurrence a static pair reaches over time:
/// `2 g0 |delta| / W^2` for `|delta| >= g0`, saturating at 1 below.
pub fn static_pair_max_concurrence<T: Scalar>(g0: T, delta: T) -> T {
    if g0 == T::zero() {
        return T::zero();
    }
    let rabi_sq = delta * delta + g0 * g0;
    let p_max = g0 * g0 / rabi_sq;
    if p_max >= from_f64::<T>(0.5) {
        T::one()
    } else {
        from_f64::<T>(2.0) * g0 * delta.abs() / rabi_sq
    }
}

/// Output of a single stochastic-coupling trajectory.
#[derive(Clone, Debug)]
pub struct ClassicalTrajectory<T: Scalar> {
    /// Recorded times (empty when `record_stride` is 0).
    pub times: Vec<T>,
    /// Mediator position at the recorded times.
    pub r3: Vec<T>,
    /// Pair concurrence `C_12` at the recorded times.
    pub concurrence: Vec<T>,
    /// Time average of `C_12` after discarding the first tenth of the run.
    pub mean_concurrence: T,
    /// Susceptibility witness of the final pure state.
    pub chi: T,
    /// `<S^2>` of the final pure state.
    pub s2: T,
    /// Final sector state `(spin 1, spin 2, spin 3 excited)`.
    pub final_state: [Complex<T>; 3],
}

/// One witness realization, as collected in ensembles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSample<T: Scalar> {
    pub chi: T,
    pub s2: T,
    pub mean_concurrence: T,
}

/// Mean, standard error, and window statistics over chi samples.
#[derive(Clone, Debug)]
pub struct ChiRun<T: Scalar> {
    pub samples: Vec<ChiSample<T>>,
}

impl<T: Scalar> ChiRun<T> {
    pub fn mean_chi(&self) -> T {
        let n = T::from_usize(self.samples.len()).expect("count fits scalar");
        self.samples
            .iter()
            .fold(T::zero(), |acc, s| acc + s.chi)
            / n
    }

    pub fn stderr_chi(&self) -> T {
        let n = self.samples.len();
        if n < 2 {
            return T::zero();
        }
        let mean = self.mean_chi();
        let nf = T::from_usize(n).expect("count fits scalar");
        let var = self
            .samples
            .iter()
            .fold(T::zero(), |acc, s| acc + (s.chi - mean) * (s.chi - mean))
            / (nf - T::one());
        (var / nf).sqrt()
    }

    /// Fraction of samples strictly below `threshold`.
    pub fn tail_below(&self, threshold: T) -> T {
        let hits = self.samples.iter().filter(|s| s.chi < threshold).count();
        T::from_usize(hits).expect("count fits scalar")
            / T::from_usize(self.samples.len()).expect("count fits scalar")
    }

    /// Bin the chi samples over `[0.4, 3.6]`, a hair wider than the
    /// attainable `[0.5, 3.5]` so boundary mass is visible. Returns
    /// `(bin_lo, bin_hi, count)` rows; out-of-range values land in the
    /// nearest edge bin.
    pub fn histogram(&self, bin_width: T) -> Result<Vec<(T, T, u64)>> {
        let (lo, hi) = (from_f64::<T>(0.4), from_f64::<T>(3.6));
        if !(bin_width > T::zero() && bin_width <= hi - lo) {
            return Err(CoreError::InvalidParameter {
                name: "bin_width",
                value: bin_width.to_f64().unwrap_or(f64::NAN),
                constraint: "must lie in (0, 3.2]",
            });
        }
        let n_bins = ((hi - lo) / bin_width)
            .ceil()
            .to_usize()
            .expect("bin count fits usize");
        let mut counts = vec![0u64; n_bins];
        for s in &self.samples {
            let idx = ((s.chi - lo) / bin_width)
                .floor()
                .to_isize()
                .unwrap_or(0)
                .clamp(0, n_bins as isize - 1) as usize;
            counts[idx] += 1;
        }
        Ok(counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let b_lo = lo + bin_width * T::from_usize(k).expect("fits");
                (b_lo, b_lo + bin_width, c)
            })
            .collect())
    }
}

/// One sweep point: window-averaged concurrence, both absolute and
/// normalized by the static pair's ceiling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint<T: Scalar> {
    pub diffusivity: T,
    pub mean_c: T,
    pub mean_c_over_cmax: T,
    pub stderr: T,
}

enum Motion<T: Scalar> {
    Overdamped,
    Underdamped(OuStepper<T>),
}

/// Prepared trajectory engine for one configuration.
pub struct StochasticCouplingEngine<T: Scalar> {
    cfg: ClassicalNoiseConfig<T>,
    ops: CollectiveOperators<T>,
    motion: Motion<T>,
    n_steps: usize,
}

impl<T: Scalar> StochasticCouplingEngine<T> {
    pub fn new(cfg: ClassicalNoiseConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let motion = if cfg.tau > T::zero() {
            Motion::Underdamped(OuStepper::new(&cfg.langevin_params(), cfg.dt)?)
        } else {
            Motion::Overdamped
        };
        Ok(Self {
            cfg,
            ops: collective_operators(3)?,
            motion,
            n_steps: cfg.n_steps(),
        })
    }

    pub fn config(&self) -> &ClassicalNoiseConfig<T> {
        &self.cfg
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Frozen-coupling sector Hamiltonian at mediator position `r3`.
    /// Identical to projecting the full three-spin Hamiltonian onto the
    /// single-excitation sector (upper triangle; `sym3_eig` mirrors it).
    fn sector_hamiltonian(&self, r3: T) -> [[T; 3]; 3] {
        let cfg = &self.cfg;
        let half = from_f64::<T>(0.5);
        let w2 = cfg.delta;
        let w3 = cfg.delta * r3 / cfg.length;
        let shift = (w2 + w3) * half;
        let cube = |r: T| {
            let ratio = cfg.length / r;
            cfg.g0 * ratio * ratio * ratio
        };
        let g13 = cube(r3) * half;
        let g23 = cube(cfg.length - r3) * half;
        let g12 = cfg.g0 * half;
        [
            [-shift, g12, g13],
            [T::zero(), w2 - shift, g23],
            [T::zero(), T::zero(), w3 - shift],
        ]
    }

    /// Run one trajectory from `|spin 1 excited>`. When `record_stride > 0`
    /// the state is recorded every that many steps (plus the initial point).
    pub fn run_trajectory(
        &self,
        record_stride: usize,
        stream: &mut RngStream,
    ) -> Result<ClassicalTrajectory<T>> {
        let cfg = &self.cfg;
        let params = cfg.langevin_params();
        let mut psi = [
            Complex::new(T::one(), T::zero()),
            Complex::zero(),
            Complex::zero(),
        ];
        let mut r3 = cfg.r3_init;
        let mut vel = T::zero();
        // The window average discards the first tenth of the run so the
        // startup transient from the fixed initial condition drops out.
        let n_burn = self.n_steps / 10;
        let mut c_sum = T::zero();
        let n_rec = self.n_steps.checked_div(record_stride).map_or(0, |n| n + 1);
        let mut times = Vec::with_capacity(n_rec);
        let mut r3_rec = Vec::with_capacity(n_rec);
        let mut c_rec = Vec::with_capacity(n_rec);
        if record_stride > 0 {
            times.push(T::zero());
            r3_rec.push(r3);
            c_rec.push(T::zero());
        }
        for step in 1..=self.n_steps {
            let h = self.sector_hamiltonian(r3);
            let (vals, v) = sym3_eig(&h);
            // psi <- V e^{-i w dt} V^T psi (the eigenvector matrix is real).
            let mut y = [Complex::<T>::zero(); 3];
            for k in 0..3 {
                let acc = psi[0].scale(v[0][k]) + psi[1].scale(v[1][k]) + psi[2].scale(v[2][k]);
                let angle = -vals[k] * cfg.dt;
                let (s, c) = angle.sin_cos();
                y[k] = acc * Complex::new(c, s);
            }
            for i in 0..3 {
                psi[i] = y[0].scale(v[i][0]) + y[1].scale(v[i][1]) + y[2].scale(v[i][2]);
            }
            // Mediator takes its stochastic step over the same interval.
            match &self.motion {
                Motion::Overdamped => {
                    r3 = overdamped_step(r3, cfg.dt, &params, stream);
                }
                Motion::Underdamped(stepper) => {
                    let (nx, nv) = stepper.step(r3, vel, stream);
                    r3 = nx;
                    vel = nv;
                }
            }
            let c12 = {
                let prod = psi[0].norm_sqr() * psi[1].norm_sqr();
                from_f64::<T>(2.0) * prod.sqrt()
            };
            if step > n_burn {
                c_sum += c12;
            }
            if record_stride > 0 && step % record_stride == 0 {
                times.push(T::from_usize(step).expect("step fits scalar") * cfg.dt);
                r3_rec.push(r3);
                c_rec.push(c12);
            }
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
        if (norm - T::one()).abs() > from_f64::<T>(1e-6) {
            return Err(CoreError::NotNormalized {
                norm: norm.to_f64().unwrap_or(f64::NAN),
            });
        }
        // Rounding drift up to the abort threshold is benign; rescale so the
        // witness evaluation sees an exactly normalized state.
        let scaled = [psi[0] / norm, psi[1] / norm, psi[2] / norm];
        let sector = crate::linalg::CVector::from_slice(&scaled)?;
        let full = embed_single_excitation(&sector, 3)?;
        let chi = susceptibility(&full, &self.ops)?;
        let s2 = s2_expectation(&full, &self.ops)?;
        Ok(ClassicalTrajectory {
            times,
            r3: r3_rec,
            concurrence: c_rec,
            mean_concurrence: c_sum
                / T::from_usize((self.n_steps - n_burn).max(1)).expect("fits"),
            chi,
            s2,
            final_state: psi,
        })
    }

    /// Collect `n_traj` witness samples; trajectory `i` uses stream
    /// `(master_seed, stream_offset + i)`.
    pub fn chi_samples(
        &self,
        n_traj: usize,
        master_seed: u64,
        stream_offset: u64,
    ) -> Result<ChiRun<T>> {
        if n_traj == 0 {
            return Err(CoreError::InvalidParameter {
                name: "n_traj",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
        let samples: Result<Vec<ChiSample<T>>> = (0..n_traj)
            .into_par_iter()
            .map(|i| {
                let mut stream = RngStream::new(master_seed, stream_offset + i as u64);
                let traj = self.run_trajectory(0, &mut stream)?;
                Ok(ChiSample {
                    chi: traj.chi,
                    s2: traj.s2,
                    mean_concurrence: traj.mean_concurrence,
                })
            })
            .collect();
        Ok(ChiRun { samples: samples? })
    }
}

/// Sweep the mediator diffusivity, reporting the window-averaged pair
/// concurrence normalized by the static ceiling `static_pair_max_concurrence`.
pub fn sweep_diffusivity<T: Scalar>(
    base: &ClassicalNoiseConfig<T>,
    diffusivities: &[T],
    n_traj: usize,
    master_seed: u64,
) -> Result<Vec<SweepPoint<T>>> {
    let c_max = static_pair_max_concurrence(base.g0, base.delta);
    if c_max <= T::zero() {
        return Err(CoreError::InvalidParameter {
            name: "g0",
            value: base.g0.to_f64().unwrap_or(f64::NAN),
            constraint: "the static ceiling must be positive to normalize",
        });
    }
    let mut points = Vec::with_capacity(diffusivities.len());
    for (d_index, &d) in diffusivities.iter().enumerate() {
        let mut cfg = *base;
        cfg.diffusivity = d;
        let engine = StochasticCouplingEngine::new(cfg)?;
        let offset = (d_index * n_traj) as u64;
        let run = engine.chi_samples(n_traj, master_seed, offset)?;
        let n = T::from_usize(n_traj).expect("fits");
        let mean = run
            .samples
            .iter()
            .fold(T::zero(), |acc, s| acc + s.mean_concurrence)
            / n;
        let var = run
            .samples
            .iter()
            .fold(T::zero(), |acc, s| {
                acc + (s.mean_concurrence - mean) * (s.mean_concurrence - mean)
            })
            / (n - T::one()).max(T::one());
        points.push(SweepPoint {
            diffusivity: d,
            mean_c: mean,
            mean_c_over_cmax: mean / c_max,
            stderr: (var / n).sqrt() / c_max,
        });
    }
    Ok(points)
}
