use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::quantum::{build_hamiltonian, Complex64, FieldConfig, Propagator, PureState, SpinChainSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrapeConfig {
    pub n_segments: usize,
    pub lr: f64,
    pub max_iters: usize,
    pub field_min: f64,
    pub field_max: f64,
    /// Central-difference step.
    pub fd_step: f64,
    /// Stop as soon as this fidelity is reached.
    pub target_fidelity: f64,
    /// `None` starts from all-zero fields, `Some(seed)` from uniform random ones.
    pub init_seed: Option<u64>,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self {
            n_segments: 50,
            lr: 2.0,
            max_iters: 500,
            field_min: 0.0,
            field_max: 5.0,
            fd_step: 1e-4,
            target_fidelity: 1.0 - 1e-9,
            init_seed: None,
        }
    }
}

impl GrapeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::InvalidConfig("n_segments must be >= 1".into()));
        }
        if !(self.field_min <= self.field_max) || !self.field_min.is_finite() || !self.field_max.is_finite() {
            return Err(Error::InvalidConfig("field bounds must be finite and ordered".into()));
        }
        if !(self.fd_step > 0.0 && self.lr > 0.0) {
            return Err(Error::InvalidConfig("lr and fd_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrapeResult {
    /// Best schedule found, one field vector per segment.
    pub schedule: Vec<FieldConfig>,
    pub best_fidelity: f64,
    /// Best-so-far fidelity after each iteration, starting with the initial schedule.
    pub trace: Vec<f64>,
}

fn propagator(spec: &SpinChainSpec, fields: &[f64]) -> Result<Propagator> {
    Ok(Propagator::new(&build_hamiltonian(spec, &FieldConfig::new(fields.to_vec())?)?, spec.dt))
}

fn check_dims(spec: &SpinChainSpec, init: &PureState, target: &PureState, schedule: &[FieldConfig]) -> Result<()> {
    spec.validate()?;
    for d in [init.dim(), target.dim()] {
        if d != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), actual: d });
        }
    }
    for f in schedule {
        if f.len() != spec.n_spins {
            return Err(Error::DimensionMismatch { expected: spec.n_spins, actual: f.len() });
        }
    }
    Ok(())
}

/// `|⟨target| U_{K−1}⋯U_0 |init⟩|²` under the noiseless Hamiltonian.
pub fn schedule_fidelity(
    spec: &SpinChainSpec,
    init: &PureState,
    target: &PureState,
    schedule: &[FieldConfig],
) -> Result<f64> {
    check_dims(spec, init, target, schedule)?;
    let mut psi = init.as_vector().clone();
    for f in schedule {
        psi = propagator(spec, f.values())?.matrix() * psi;
    }
    let f = target.as_vector().dotc(&psi).norm_sqr();
    if !f.is_finite() {
        return Err(Error::NonFinite("grape fidelity"));
    }
    Ok(f)
}

/// Central finite-difference gradient of the final fidelity with respect to
/// every segment field. Forward states and backward-propagated targets are
/// cached, so each partial only re-exponentiates a single segment.
pub fn grape_gradient(
    spec: &SpinChainSpec,
    init: &PureState,
    target: &PureState,
    schedule: &[FieldConfig],
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    check_dims(spec, init, target, schedule)?;
    let k = schedule.len();
    let props = schedule.iter().map(|f| propagator(spec, f.values())).collect::<Result<Vec<_>>>()?;
    // forward[s]: state entering segment s
    let mut forward: Vec<DVector<Complex64>> = Vec::with_capacity(k);
    let mut psi = init.as_vector().clone();
    for p in &props {
        forward.push(psi.clone());
        psi = p.matrix() * psi;
    }
    // backward[s]: target pulled back through segments s+1..K
    let mut backward = vec![target.as_vector().clone(); k];
    for s in (0..k.saturating_sub(1)).rev() {
        backward[s] = props[s + 1].matrix().adjoint() * &backward[s + 1];
    }
    let mut grad = vec![vec![0.0; spec.n_spins]; k];
    for s in 0..k {
        for n in 0..spec.n_spins {
            let mut fields = schedule[s].values().to_vec();
            let base = fields[n];
            let mut eval = |value: f64| -> Result<f64> {
                fields[n] = value;
                let u = propagator(spec, &fields)?;
                Ok(backward[s].dotc(&(u.matrix() * &forward[s])).norm_sqr())
            };
            let g = (eval(base + h)? - eval(base - h)?) / (2.0 * h);
            if !g.is_finite() {
                return Err(Error::NonFinite("grape gradient"));
            }
            grad[s][n] = g;
        }
    }
    Ok(grad)
}

/// Projected gradient ascent on the final-state fidelity.
pub fn grape_optimize(
    spec: &SpinChainSpec,
    init: &PureState,
    target: &PureState,
    config: &GrapeConfig,
) -> Result<GrapeResult> {
    config.validate()?;
    let mut schedule: Vec<FieldConfig> = match config.init_seed {
        None => vec![FieldConfig::new(vec![config.field_min.max(0.0).min(config.field_max); spec.n_spins])?; config.n_segments],
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..config.n_segments)
                .map(|_| {
                    let v = (0..spec.n_spins).map(|_| rng.random_range(config.field_min..=config.field_max)).collect();
                    FieldConfig::new(v)
                })
                .collect::<Result<_>>()?
        }
    };
    let mut current = schedule_fidelity(spec, init, target, &schedule)?;
    let mut best = (current, schedule.clone());
    let mut trace = vec![current];
    for _ in 0..config.max_iters {
        if best.0 >= config.target_fidelity {
            break;
        }
        let grad = grape_gradient(spec, init, target, &schedule, config.fd_step)?;
        schedule = schedule
            .iter()
            .zip(&grad)
            .map(|(f, g)| {
                let v = f
                    .values()
                    .iter()
                    .zip(g)
                    .map(|(x, d)| (x + config.lr * d).clamp(config.field_min, config.field_max))
                    .collect();
                FieldConfig::new(v)
            })
            .collect::<Result<_>>()?;
        current = schedule_fidelity(spec, init, target, &schedule)?;
        if current > best.0 {
            best = (current, schedule.clone());
        }
        trace.push(best.0);
    }
    Ok(GrapeResult { schedule: best.1, best_fidelity: best.0.min(1.0), trace: trace.into_iter().map(|f| f.min(1.0)).collect() })
}

/// Writes `segment,spin,field` rows.
pub fn write_schedule_csv<W: Write>(schedule: &[FieldConfig], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment", "spin", "field"])?;
    for (s, f) in schedule.iter().enumerate() {
        for (n, v) in f.values().iter().enumerate() {
            w.serialize((s, n, v))?;
        }
    }
    w.flush()?;
    Ok(())
}
