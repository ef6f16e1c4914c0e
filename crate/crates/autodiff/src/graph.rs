use ndarray::IxDyn;

use crate::{Real, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Everything a backward closure may look at.
pub struct BackwardCtx<'a, F> {
    /// Gradient of the loss with respect to this node's output.
    pub grad: &'a Tensor<F>,
    /// Values of the node's inputs, in the order they were recorded.
    pub inputs: &'a [&'a Tensor<F>],
    /// The node's own forward value.
    pub output: &'a Tensor<F>,
    /// Which inputs require a gradient; closures may skip the others.
    pub needs: &'a [bool],
}

pub type BackwardFn<F> = Box<dyn Fn(&BackwardCtx<'_, F>) -> Vec<Option<Tensor<F>>>>;

struct Node<F> {
    value: Tensor<F>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<F>>,
    requires_grad: bool,
}

/// A tape of recorded operations.
///
/// Nodes are appended in topological order, so the reverse sweep is a plain
/// reverse iteration. When gradients are disabled no closures are stored and
/// the graph behaves as an eager evaluator.
pub struct Graph<F> {
    nodes: Vec<Node<F>>,
    grad_enabled: bool,
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A graph that never records backward closures.
    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a leaf. `requires_grad` is ignored on a no-grad graph.
    pub fn leaf(&mut self, value: Tensor<F>, requires_grad: bool) -> Var {
        let requires_grad = requires_grad && self.grad_enabled;
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.leaf(value, false)
    }

    pub fn scalar(&mut self, value: F) -> Var {
        self.constant(Tensor::from_elem(IxDyn(&[]), value))
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Takes a node's value out of the graph, consuming it.
    pub fn into_value(mut self, v: Var) -> Tensor<F> {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor::zeros(IxDyn(&[0])))
    }

    /// Records an operation. The closure is stored only when some input
    /// requires a gradient.
    pub fn record<B>(&mut self, inputs: &[Var], value: Tensor<F>, backward: B) -> Var
    where
        B: Fn(&BackwardCtx<'_, F>) -> Vec<Option<Tensor<F>>> + 'static,
    {
        let requires_grad =
            self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let (parents, backward): (Vec<usize>, Option<BackwardFn<F>>) = if requires_grad {
            (inputs.iter().map(|v| v.0).collect(), Some(Box::new(backward)))
        } else {
            (Vec::new(), None)
        };
        self.nodes.push(Node {
            value,
            parents,
            backward,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reverse sweep from a scalar output (seeded with one).
    pub fn backward(&self, loss: Var) -> Gradients<F> {
        let shape = self.nodes[loss.0].value.raw_dim();
        assert_eq!(
            self.nodes[loss.0].value.len(),
            1,
            "backward() needs a single-element output"
        );
        self.backward_with(loss, Tensor::ones(shape))
    }

    /// Reverse sweep from `out` with an explicit output cotangent.
    pub fn backward_with(&self, out: Var, seed: Tensor<F>) -> Gradients<F> {
        assert_eq!(seed.shape(), self.nodes[out.0].value.shape());
        let mut grads: Vec<Option<Tensor<F>>> = vec![None; out.0 + 1];
        if self.nodes[out.0].requires_grad {
            grads[out.0] = Some(seed);
        }
        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            let Some(backward) = node.backward.as_ref() else {
                continue;
            };
            let Some(grad) = grads[i].take() else {
                continue;
            };
            let inputs: Vec<&Tensor<F>> =
                node.parents.iter().map(|&p| &self.nodes[p].value).collect();
            let needs: Vec<bool> = node
                .parents
                .iter()
                .map(|&p| self.nodes[p].requires_grad)
                .collect();
            let ctx = BackwardCtx {
                grad: &grad,
                inputs: &inputs,
                output: &node.value,
                needs: &needs,
            };
            let parent_grads = backward(&ctx);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for ((&p, pg), &need) in node.parents.iter().zip(parent_grads).zip(&needs) {
                let (Some(pg), true) = (pg, need) else {
                    continue;
                };
                debug_assert_eq!(
                    pg.shape(),
                    self.nodes[p].value.shape(),
                    "gradient shape mismatch"
                );
                match &mut grads[p] {
                    Some(acc) => *acc += &pg,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Gradients { grads }
    }
}

/// Gradients of the leaves reached by a reverse sweep.
pub struct Gradients<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<F>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
