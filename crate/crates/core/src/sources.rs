//! Where a marginal moment comes from: exact probabilities, the Parseval
//! sum, or sampled bitstrings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::estimators::{
    collision_estimate_batched, exact_marginal_moment, parseval_ipr, StderrMode,
};
use crate::samples::{Patch, SampleSet};
use crate::state::PureState;

/// Value and error bar of one marginal moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentValue {
    pub value: f64,
    pub stderr: f64,
}

/// Settings shared by the sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceOptions {
    pub batches: usize,
    pub stderr_mode: StderrMode,
}

/// A named way of obtaining `Σ_a p_A(a)^k` for a patch.
pub trait MomentSource: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether [`MomentSource::moment`] reads `samples`.
    fn needs_samples(&self) -> bool {
        false
    }

    fn moment(
        &self,
        state: &dyn PureState,
        samples: Option<&SampleSet>,
        patch: &Patch,
        k: usize,
        options: &SourceOptions,
    ) -> Result<MomentValue>;
}

pub struct ExactSource;

impl MomentSource for ExactSource {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn moment(&self, state: &dyn PureState, _: Option<&SampleSet>, patch: &Patch, k: usize, _: &SourceOptions) -> Result<MomentValue> {
        Ok(MomentValue { value: exact_marginal_moment(state, patch, k)?, stderr: 0.0 })
    }
}

pub struct ParsevalSource;

impl MomentSource for ParsevalSource {
    fn name(&self) -> &'static str {
        "parseval"
    }

    fn moment(&self, state: &dyn PureState, _: Option<&SampleSet>, patch: &Patch, k: usize, _: &SourceOptions) -> Result<MomentValue> {
        if k != 2 {
            return Err(Error::param("the Parseval source only provides k = 2"));
        }
        Ok(MomentValue { value: parseval_ipr(state, patch)?, stderr: 0.0 })
    }
}

pub struct SampledSource;

impl MomentSource for SampledSource {
    fn name(&self) -> &'static str {
        "sampled"
    }

    fn needs_samples(&self) -> bool {
        true
    }

    fn moment(
        &self,
        _: &dyn PureState,
        samples: Option<&SampleSet>,
        patch: &Patch,
        k: usize,
        options: &SourceOptions,
    ) -> Result<MomentValue> {
        let samples = samples.ok_or_else(|| Error::param("the sampled source needs a sample set"))?;
        let est = collision_estimate_batched(&samples.restrict(patch)?, k, options.batches)?;
        Ok(MomentValue { value: est.value, stderr: est.stderr(options.stderr_mode) })
    }
}

type SourceFactory = fn() -> Box<dyn MomentSource>;

/// Moment sources selectable by name.
pub struct SourceRegistry {
    factories: BTreeMap<&'static str, SourceFactory>,
}

impl SourceRegistry {
    pub fn with_defaults() -> Self {
        let mut factories: BTreeMap<&'static str, SourceFactory> = BTreeMap::new();
        factories.insert("exact", || Box::new(ExactSource));
        factories.insert("parseval", || Box::new(ParsevalSource));
        factories.insert("sampled", || Box::new(SampledSource));
        SourceRegistry { factories }
    }

    pub fn register(&mut self, name: &'static str, factory: SourceFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn MomentSource>> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::param(format!("unknown moment source `{name}` (available: {})", self.names().join(" | "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SectorBasis;
    use crate::state::SectorState;
    use std::sync::Arc;

    #[test]
    fn sources_agree_on_a_random_state() {
        let basis = Arc::new(SectorBasis::new(8, 4, 100).unwrap());
        let s = SectorState::haar_random(basis, 1);
        let patch = Patch::from_qubits(vec![0, 1, 2], 8).unwrap();
        let opts = SourceOptions { batches: 16, stderr_mode: StderrMode::Batch };
        let reg = SourceRegistry::with_defaults();
        let exact = reg.create("exact").unwrap().moment(&s, None, &patch, 2, &opts).unwrap();
        let pars = reg.create("parseval").unwrap().moment(&s, None, &patch, 2, &opts).unwrap();
        assert!((exact.value - pars.value).abs() < 1e-12);
        let samples = s.sample(200_000, 2).unwrap();
        let sampled = reg.create("sampled").unwrap().moment(&s, Some(&samples), &patch, 2, &opts).unwrap();
        assert!((sampled.value - exact.value).abs() < 4.0 * sampled.stderr);
        assert!(reg.create("sampled").unwrap().moment(&s, None, &patch, 2, &opts).is_err());
        assert!(reg.create("shadow").is_err());
    }
}
