use std::collections::BTreeMap;

use ndarray::Array2;

use super::rng::Rng;
use super::NumError;

/// Dense row-major matrix with an optional gradient buffer. Vectors are
/// stored as `1 x n` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub data: Array2<f64>,
    pub requires_grad: bool,
    pub grad: Option<Array2<f64>>,
}

impl Tensor {
    pub fn new(data: Array2<f64>, requires_grad: bool) -> Self {
        Tensor {
            data,
            requires_grad,
            grad: None,
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        let (r, c) = self.data.dim();
        [r, c]
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn accumulate_grad(&mut self, g: &Array2<f64>) -> Result<(), NumError> {
        if g.dim() != self.data.dim() {
            return Err(NumError::ShapeMismatch {
                op: "accumulate_grad",
                left: self.shape().to_vec(),
                right: vec![g.nrows(), g.ncols()],
            });
        }
        match &mut self.grad {
            Some(acc) => *acc += g,
            None => self.grad = Some(g.clone()),
        }
        Ok(())
    }
}

/// Per-parameter Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub step: u64,
}

/// Named trainable weights. Iteration order is the sorted name order, which
/// fixes serialization and update order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet {
    tensors: BTreeMap<String, Tensor>,
    adam: BTreeMap<String, AdamState>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, data: Array2<f64>) -> Result<(), NumError> {
        if self.tensors.contains_key(name) {
            return Err(NumError::DuplicateParameter(name.to_string()));
        }
        self.tensors.insert(name.to_string(), Tensor::new(data, true));
        Ok(())
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weight matrix.
    pub fn insert_uniform(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut Rng,
    ) -> Result<(), NumError> {
        let bound = 1.0 / (rows as f64).sqrt();
        let data = Array2::from_shape_simple_fn((rows, cols), || rng.uniform_range(-bound, bound));
        self.insert(name, data)
    }

    pub fn insert_normal(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        std: f64,
        rng: &mut Rng,
    ) -> Result<(), NumError> {
        let data = Array2::from_shape_simple_fn((rows, cols), || rng.normal(0.0, std));
        self.insert(name, data)
    }

    pub fn insert_const(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        value: f64,
    ) -> Result<(), NumError> {
        self.insert(name, Array2::from_elem((rows, cols), value))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NumError> {
        self.tensors
            .get(name)
            .ok_or_else(|| NumError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, NumError> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| NumError::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in self.tensors.values_mut() {
            t.zero_grad();
        }
    }

    pub fn adam_state(&self, name: &str) -> Option<&AdamState> {
        self.adam.get(name)
    }

    pub(crate) fn adam_state_mut(&mut self, name: &str) -> &mut AdamState {
        let shape = self.tensors[name].data.dim();
        self.adam.entry(name.to_string()).or_insert_with(|| AdamState {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            step: 0,
        })
    }

    pub(crate) fn split_for_update(
        &mut self,
    ) -> (&mut BTreeMap<String, Tensor>, &mut BTreeMap<String, AdamState>) {
        (&mut self.tensors, &mut self.adam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParameterSet::new();
        p.insert_const("w", 2, 2, 0.0).unwrap();
        assert!(matches!(
            p.insert_const("w", 1, 1, 0.0),
            Err(NumError::DuplicateParameter(_))
        ));
    }

    #[test]
    fn uniform_init_respects_fan_in_bound() {
        let mut p = ParameterSet::new();
        let mut rng = Rng::new(1);
        p.insert_uniform("w", 16, 4, &mut rng).unwrap();
        let bound = 0.25;
        assert!(p.get("w").unwrap().data.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn grad_accumulates_and_checks_shape() {
        let mut t = Tensor::new(Array2::zeros((1, 2)), true);
        let g = Array2::from_elem((1, 2), 1.5);
        t.accumulate_grad(&g).unwrap();
        t.accumulate_grad(&g).unwrap();
        assert_eq!(t.grad.as_ref().unwrap()[[0, 1]], 3.0);
        assert!(t.accumulate_grad(&Array2::zeros((2, 1))).is_err());
    }
}
