//! Named trainable state.
//!
//! Parameter names follow a fixed scheme so checkpoints are portable:
//!
//! ```text
//! stem.conv.weight
//! stem.bn.{gamma,beta}                    buffers: stem.bn.{running_mean,running_var}
//! block{b}.dw.weight                      shared mode only
//! block{b}.pw.weight                      shared mode only
//! block{b}.reuse{r}.dw.weight             unrolled mode only
//! block{b}.reuse{r}.pw.weight             unrolled mode only
//! block{b}.reuse{r}.bn{1,2}.{gamma,beta}  buffers: ....bn{1,2}.{running_mean,running_var}
//! head.pw1.weight
//! head.pw2.weight
//! ```
//!
//! Entries are kept in that insertion order. Blocks are numbered from 0.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape4, Tensor4};

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Tensor4<T>,
    pub grad: Tensor4<T>,
    pub momentum: Tensor4<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor4<T>) -> Self {
        Param {
            grad: value.zeros_like(),
            momentum: value.zeros_like(),
            value,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: IndexMap<String, Param<T>>,
    buffers: IndexMap<String, Tensor4<T>>,
    grads_ready: bool,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: IndexMap::new(),
            buffers: IndexMap::new(),
            grads_ready: false,
        }
    }

    /// Registers a parameter and returns its index.
    pub fn add_param(&mut self, name: impl Into<String>, shape: Shape4) -> Result<usize> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter {name}")));
        }
        let (i, _) = self.params.insert_full(name, Param::new(Tensor4::zeros(shape)?));
        Ok(i)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: Tensor4<T>) -> Result<usize> {
        let name = name.into();
        if self.buffers.contains_key(&name) {
            return Err(Error::Config(format!("duplicate buffer {name}")));
        }
        let (i, _) = self.buffers.insert_full(name, value);
        Ok(i)
    }

    pub fn param(&self, index: usize) -> &Param<T> {
        &self.params[index]
    }

    pub fn param_mut(&mut self, index: usize) -> &mut Param<T> {
        &mut self.params[index]
    }

    pub fn buffer(&self, index: usize) -> &Tensor4<T> {
        &self.buffers[index]
    }

    pub fn buffer_mut(&mut self, index: usize) -> &mut Tensor4<T> {
        &mut self.buffers[index]
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.get_mut(name)
    }

    pub fn get_buffer(&self, name: &str) -> Option<&Tensor4<T>> {
        self.buffers.get(name)
    }

    pub fn get_buffer_mut(&mut self, name: &str) -> Option<&mut Tensor4<T>> {
        self.buffers.get_mut(name)
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&str, &Tensor4<T>)> {
        self.buffers.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn buffers_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor4<T>)> {
        self.buffers.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_buffers(&self) -> usize {
        self.buffers.len()
    }

    /// Total number of trainable scalars.
    pub fn total_len(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(T::ZERO);
        }
        self.grads_ready = false;
    }

    /// True once a backward pass has accumulated gradients that no optimizer
    /// step or [`ParamStore::zero_grads`] has consumed yet.
    pub fn grads_ready(&self) -> bool {
        self.grads_ready
    }

    pub(crate) fn mark_grads_ready(&mut self) {
        self.grads_ready = true;
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            value: p.value.cast(),
                            grad: p.grad.cast(),
                            momentum: p.momentum.cast(),
                        },
                    )
                })
                .collect(),
            buffers: self.buffers.iter().map(|(k, b)| (k.clone(), b.cast())).collect(),
            grads_ready: self.grads_ready,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffers_mirror_param_shapes() {
        let mut s = ParamStore::<f32>::new();
        let i = s.add_param("a.weight", Shape4::new(4, 2, 3, 3)).unwrap();
        let p = s.param(i);
        assert_eq!(p.grad.shape(), p.value.shape());
        assert_eq!(p.momentum.shape(), p.value.shape());
        assert!(s.add_param("a.weight", Shape4::new(1, 1, 1, 1)).is_err());
        assert_eq!(s.total_len(), 72);
    }

    #[test]
    fn insertion_order_is_kept() {
        let mut s = ParamStore::<f64>::new();
        for name in ["z", "a", "m"] {
            s.add_param(name, Shape4::new(1, 1, 1, 1)).unwrap();
        }
        let names: Vec<&str> = s.params().map(|(n, _)| n).collect();
        assert_eq!(names, ["z", "a", "m"]);
    }
}
