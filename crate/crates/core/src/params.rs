//! Named, flat storage for every learnable scalar.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    start: usize,
    len: usize,
}

/// Parameter arrays laid out back to back in one buffer, each with a
/// matching gradient slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    values: Vec<f64>,
    grads: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::InvalidConfig("duplicate parameter array name"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { param: format!("{name}[{i}]") });
        }
        self.entries.push(Entry { name, start: self.values.len(), len: values.len() });
        self.grads.resize(self.grads.len() + values.len(), 0.0);
        self.values.extend(values);
        Ok(())
    }

    /// Total scalar count.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self, name: &str) -> Result<Range<usize>> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.start..e.start + e.len)
            .ok_or_else(|| Error::UnknownParam(name.into()))
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.values[self.range(name)?])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let r = self.range(name)?;
        Ok(&mut self.values[r])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grad(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.grads[self.range(name)?])
    }

    pub fn set_grads(&mut self, grads: &[f64]) -> Result<()> {
        if grads.len() != self.grads.len() {
            return Err(Error::LengthMismatch { expected: self.grads.len(), found: grads.len() });
        }
        self.grads.copy_from_slice(grads);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// `name[i]` for a flat index.
    pub fn describe(&self, flat: usize) -> String {
        self.entries
            .iter()
            .find(|e| (e.start..e.start + e.len).contains(&flat))
            .map(|e| format!("{}[{}]", e.name, flat - e.start))
            .unwrap_or_else(|| format!("#{flat}"))
    }

    pub fn arrays(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|e| (e.name.as_str(), &self.values[e.start..e.start + e.len]))
    }

    /// First non-finite value, if any, by name.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite { param: self.describe(i) }),
            None => Ok(()),
        }
    }
}

/// Hidden width of the recognition network.
pub const HIDDEN: usize = 16;
/// Recognition input `(a, d, r)`.
pub const INPUTS: usize = 3;

pub const W1: &str = "recognition.w1";
pub const B1: &str = "recognition.b1";
pub const W2: &str = "recognition.w2";
pub const B2: &str = "recognition.b2";
pub const MEAN_A: &str = "items.mean_a";
pub const LOGVAR_A: &str = "items.logvar_a";
pub const MEAN_D: &str = "items.mean_d";
pub const LOGVAR_D: &str = "items.logvar_d";

/// Flat offsets of the model's parameter arrays inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub outputs: usize,
    pub mean_a: usize,
    pub logvar_a: usize,
    pub mean_d: usize,
    pub logvar_d: usize,
    pub n_items: usize,
}

impl Layout {
    pub fn of(store: &ParamStore) -> Result<Self> {
        let w1 = store.range(W1)?;
        let b1 = store.range(B1)?;
        let w2 = store.range(W2)?;
        let b2 = store.range(B2)?;
        let mean_a = store.range(MEAN_A)?;
        let logvar_a = store.range(LOGVAR_A)?;
        let mean_d = store.range(MEAN_D)?;
        let logvar_d = store.range(LOGVAR_D)?;
        let outputs = b2.len();
        let n_items = mean_a.len();
        let shape_ok = w1.len() == HIDDEN * INPUTS
            && b1.len() == HIDDEN
            && w2.len() == outputs * HIDDEN
            && [&logvar_a, &mean_d, &logvar_d].iter().all(|r| r.len() == n_items);
        if !shape_ok {
            return Err(Error::InvalidConfig("parameter array shapes are inconsistent"));
        }
        Ok(Layout {
            w1: w1.start,
            b1: b1.start,
            w2: w2.start,
            b2: b2.start,
            outputs,
            mean_a: mean_a.start,
            logvar_a: logvar_a.start,
            mean_d: mean_d.start,
            logvar_d: logvar_d.start,
            n_items,
        })
    }
}
