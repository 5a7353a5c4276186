use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::{ingarch1, var1, ContrastModel, Ingarch1Poisson, ModelSpec, Var1Gaussian};
use crate::error::{Error, Result};

/// Builds a model family from its specification.
pub type ModelFactory = fn(&ModelSpec) -> Result<Box<dyn ContrastModel>>;

/// Model families keyed by name.
#[derive(Clone, Debug, Default)]
pub struct ModelRegistry {
    factories: BTreeMap<String, ModelFactory>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the built-in `var1` and `ingarch1` families.
    pub fn builtin() -> &'static ModelRegistry {
        static BUILTIN: OnceLock<ModelRegistry> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            let mut reg = ModelRegistry::new();
            reg.register(var1::NAME, |spec| {
                Ok(Box::new(Var1Gaussian::from_spec(spec)?))
            });
            reg.register(ingarch1::NAME, |spec| {
                Ok(Box::new(Ingarch1Poisson::from_spec(spec)?))
            });
            reg
        })
    }

    /// Adds or replaces a family.
    pub fn register(&mut self, name: &str, factory: ModelFactory) -> &mut Self {
        self.factories.insert(name.to_owned(), factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<Box<dyn ContrastModel>> {
        let factory = self
            .factories
            .get(&spec.family)
            .ok_or_else(|| Error::UnknownModel(spec.family.clone()))?;
        if spec.m == 0 {
            return Err(Error::InvalidModel("m must be >= 1".into()));
        }
        factory(spec)
    }
}
