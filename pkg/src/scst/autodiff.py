"""Small reverse-mode autodiff over dense float64 numpy arrays.

Every operation returns a new :class:`Tensor`.  When at least one input
requires a gradient the output remembers its parents and a closure that maps
the output gradient to input gradients.  :func:`backward` replays those
closures in reverse creation order, which is always a valid reverse
topological order because a tensor can only consume tensors created before it.

Supported operations::

    matmul           (m,k)@(k,n), (m,k)@(k,), (k,)@(k,n), (k,)@(k,); optional b transpose
    add              equal shapes, or (m,n) + (n,) row broadcast
    tanh             elementwise
    embedding_lookup row gather from a 2-D table
    log_softmax      along the last axis, max-subtracted
    index_select     1-D gather, or (rows, cols) gather from a 2-D tensor
    scale            multiply by a python constant
    sum              sum of all entries -> scalar
    concat           along axis 0
"""

import itertools

import numpy as np

_counter = itertools.count()


class ShapeError(ValueError):
    """Raised when operation inputs have incompatible shapes."""


class Tensor:
    __slots__ = ("value", "requires_grad", "grad", "op", "_parents", "_backward", "_seq")

    def __init__(self, value, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = None
        self._parents = ()
        self._backward = None
        self._seq = next(_counter)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    def item(self):
        return float(self.value)

    def numpy(self):
        return self.value

    def detach(self):
        return Tensor(self.value.copy())

    def __repr__(self):
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(value, op, parents, backward_fn):
    out = Tensor(value)
    out.op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _shape_error(op, *tensors):
    shapes = ", ".join(str(t.shape) for t in tensors)
    return ShapeError(f"{op}: incompatible shapes {shapes}")


def matmul(a, b, trans_b=False):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or (trans_b and b.ndim != 2):
        raise _shape_error("matmul", a, b)
    bm = b.value.T if trans_b else b.value
    if a.value.shape[-1] != bm.shape[0]:
        raise _shape_error("matmul", a, b)
    av = a.value
    out = av @ bm

    def backward(g):
        if av.ndim == 2 and bm.ndim == 2:
            ga, gb = g @ bm.T, av.T @ g
        elif av.ndim == 2:
            ga, gb = np.outer(g, bm), av.T @ g
        elif bm.ndim == 2:
            ga, gb = bm @ g, np.outer(av, g)
        else:
            ga, gb = g * bm, g * av
        return ga, (gb.T if trans_b else gb)

    return _result(out, "matmul", (a, b), backward)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        def backward(g):
            return g, g
    elif a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        def backward(g):
            return g, g.sum(axis=0)
    else:
        raise _shape_error("add", a, b)
    return _result(a.value + b.value, "add", (a, b), backward)


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.value)

    def backward(g):
        return (g * (1.0 - y * y),)

    return _result(y, "tanh", (x,), backward)


def embedding_lookup(table, ids):
    """Gather rows ``table[ids]``; ``ids`` is an int or an int array."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.intp)
    if table.ndim != 2:
        raise _shape_error("embedding_lookup", table)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding_lookup: ids out of range for table of {table.shape[0]} rows")
    rows = table.shape[0]

    def backward(g):
        gt = np.zeros((rows, g.shape[-1]))
        np.add.at(gt, ids, g)
        return (gt,)

    return _result(table.value[ids], "embedding_lookup", (table,), backward)


def log_softmax(x):
    x = as_tensor(x)
    if x.ndim == 0:
        raise _shape_error("log_softmax", x)
    z = x.value - x.value.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _result(out, "log_softmax", (x,), backward)


def index_select(x, index):
    """Gather entries of ``x``.

    ``index`` is an int array for a 1-D ``x`` or a ``(rows, cols)`` pair of
    int arrays for a 2-D ``x``; the result is always 1-D.
    """
    x = as_tensor(x)
    if x.ndim == 1:
        idx = np.asarray(index, dtype=np.intp)
        if idx.ndim != 1:
            raise _shape_error("index_select", x, Tensor(np.zeros(idx.shape)))
    elif x.ndim == 2:
        rows, cols = (np.asarray(i, dtype=np.intp) for i in index)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ShapeError(f"index_select: row/col index shapes {rows.shape} and {cols.shape} differ")
        idx = (rows, cols)
    else:
        raise _shape_error("index_select", x)
    shape = x.shape

    def backward(g):
        gx = np.zeros(shape)
        np.add.at(gx, idx, g)
        return (gx,)

    return _result(x.value[idx], "index_select", (x,), backward)


def scale(x, c):
    x = as_tensor(x)
    c = float(c)

    def backward(g):
        return (c * g,)

    return _result(c * x.value, "scale", (x,), backward)


def sum_all(x):
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(g, shape),)

    return _result(x.value.sum(), "sum", (x,), backward)


def concat(tensors):
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise ShapeError("concat: no inputs")
    if any(t.ndim == 0 or t.shape[1:] != tensors[0].shape[1:] for t in tensors):
        raise _shape_error("concat", *tensors)
    splits = np.cumsum([t.shape[0] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=0))

    return _result(np.concatenate([t.value for t in tensors], axis=0), "concat", tensors, backward)


OPS = {
    "matmul": matmul,
    "add": add,
    "tanh": tanh,
    "embedding_lookup": embedding_lookup,
    "log_softmax": log_softmax,
    "index_select": index_select,
    "scale": scale,
    "sum": sum_all,
    "concat": concat,
}


def op_forward(kind, *inputs, **kwargs):
    """Dispatch an operation by name, e.g. ``op_forward("tanh", x)``."""
    try:
        fn = OPS[kind]
    except KeyError:
        raise ValueError(f"unknown operation {kind!r}") from None
    if kind == "concat":
        return fn(inputs)
    return fn(*inputs, **kwargs)


class Tape:
    """Operations reachable from a root, in the order backward visits them."""

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root):
        seen = {id(root): root}
        stack = [root]
        while stack:
            node = stack.pop()
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    seen[id(p)] = p
                    stack.append(p)
        return cls(sorted(seen.values(), key=lambda t: t._seq, reverse=True))

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def backward(root, wrt=()):
    """Populate ``.grad`` of every grad-requiring tensor reachable from ``root``.

    Gradients are overwritten, not accumulated across calls.  Tensors in
    ``wrt`` that are not reachable get a zero gradient.
    """
    if root.ndim != 0:
        raise ShapeError(f"backward: root must be a scalar, got shape {root.shape}")
    for t in wrt:
        t.grad = np.zeros(t.shape)
    if not root.requires_grad:
        return
    grads = {id(root): np.ones(())}
    for node in Tape.from_root(root):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = np.array(g, dtype=np.float64)
            continue
        node.grad = g
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
