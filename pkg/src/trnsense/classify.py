"""
Residual convolutional network for activity recognition and person
identification from micro-Doppler spectrograms

The network is written directly in numpy, arrays in (batch, channel, rows,
columns) order are the tensors. Every layer implements forward and backward,
and keeps what the backward pass needs from its last forward pass.

Architecture
------------
4 residual blocks, each
    conv 3x3 stride 2 -> ELU -> batch norm -> conv 3x3 -> ELU -> batch norm
    + conv 1x1 stride 2 of the block input
    -> ELU -> batch norm
then global average pooling, dropout 0.5, dense 64, ELU, dropout 0.2 and
the dense softmax head.
"""

import json
import logging
import os.path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import FileError
from .structures import NetworkSpec, TrainConfig
from .util import rng_stream

#:bytes: first bytes of every checkpoint
CHECKPOINT_MAGIC = b"AYNET1"


class TrainingError(RuntimeError):
    """ The training diverged """


class CheckpointError(FileError):
    """ A network checkpoint can not be read """


class Layer:
    """ Base class of all layers """

    #:str: name used in the parameter list
    name = "layer"

    def params(self):
        """list of (str, array): trainable parameters, in declaration order """
        return []

    def grads(self):
        """list of array: gradients matching params() """
        return []

    def buffers(self):
        """list of (str, array): non trainable state saved with the network """
        return []

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


class Conv2D(Layer):
    """ 2-D convolution with zero padding, output size ceil(input / stride) """

    def __init__(self, in_channels, out_channels, kernel=3, stride=1, rng=None, name="conv"):
        if kernel % 2 != 1:
            raise ValueError(f"Kernel size must be odd, got {kernel}")
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel * kernel
        self.name = name
        self.kernel = kernel
        self.stride = stride
        self.pad = kernel // 2
        self.w = rng.normal(0, np.sqrt(2 / fan_in), (out_channels, in_channels, kernel, kernel))
        self.b = np.zeros(out_channels)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)]

    def grads(self):
        return [self.dw, self.db]

    def forward(self, x, train=False, rng=None):
        n, c, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        if c != self.w.shape[1]:
            raise ValueError(f"{self.name} expects {self.w.shape[1]} channels, got {c}")
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        ho, wo = windows.shape[2], windows.shape[3]
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
        out = cols @ self.w.reshape(len(self.b), -1).T + self.b
        self._cache = (x.shape, cols, ho, wo)
        return out.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2)

    def backward(self, dout):
        (n, c, h, w), cols, ho, wo = self._cache
        k, s, p = self.kernel, self.stride, self.pad
        o = len(self.b)
        d2 = dout.transpose(0, 2, 3, 1).reshape(-1, o)
        self.dw[...] = (d2.T @ cols).reshape(self.w.shape)
        self.db[...] = d2.sum(axis=0)
        dcols = (d2 @ self.w.reshape(o, -1)).reshape(n, ho, wo, c, k, k)
        dxp = np.zeros((n, c, h + 2 * p, w + 2 * p))
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += dcols[..., i, j].transpose(
                    0, 3, 1, 2
                )
        return dxp[:, :, p : p + h, p : p + w]


class BatchNorm(Layer):
    """
    Batch normalization over the batch and both spatial axes

    Training uses the batch statistics and updates the running averages,
    evaluation uses the running averages.
    """

    def __init__(self, channels, momentum=0.9, eps=1e-5, name="bn"):
        self.name = name
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.dgamma = np.zeros(channels)
        self.dbeta = np.zeros(channels)
        self._cache = None

    def params(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]

    def grads(self):
        return [self.dgamma, self.dbeta]

    def buffers(self):
        return [
            (f"{self.name}.running_mean", self.running_mean),
            (f"{self.name}.running_var", self.running_var),
        ]

    @staticmethod
    def _expand(v, ndim):
        return v.reshape((1, -1) + (1,) * (ndim - 2))

    def forward(self, x, train=False, rng=None):
        axes = (0,) + tuple(range(2, x.ndim))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean[...] = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var[...] = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1 / np.sqrt(var + self.eps)
        xhat = (x - self._expand(mean, x.ndim)) * self._expand(inv_std, x.ndim)
        self._cache = (xhat, inv_std, train, axes)
        return self._expand(self.gamma, x.ndim) * xhat + self._expand(self.beta, x.ndim)

    def backward(self, dout):
        xhat, inv_std, train, axes = self._cache
        ndim = dout.ndim
        self.dgamma[...] = np.sum(dout * xhat, axis=axes)
        self.dbeta[...] = np.sum(dout, axis=axes)
        dxhat = dout * self._expand(self.gamma, ndim)
        if not train:
            return dxhat * self._expand(inv_std, ndim)
        m = dout.size / dout.shape[1]
        mean_dxhat = self._expand(dxhat.sum(axis=axes) / m, ndim)
        mean_dxhat_xhat = self._expand(np.sum(dxhat * xhat, axis=axes) / m, ndim)
        return (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * self._expand(inv_std, ndim)


class ELU(Layer):
    name = "elu"

    def __init__(self, alpha=1.0):
        self.alpha = alpha
        self._cache = None

    def forward(self, x, train=False, rng=None):
        out = np.where(x > 0, x, self.alpha * np.expm1(np.minimum(x, 0)))
        self._cache = (x, out)
        return out

    def backward(self, dout):
        x, out = self._cache
        return dout * np.where(x > 0, 1.0, out + self.alpha)


class Dropout(Layer):
    """ Inverted dropout, the identity during evaluation """

    name = "dropout"

    def __init__(self, rate):
        if not 0 <= rate < 1:
            raise ValueError(f"Dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("Dropout in training mode needs a random generator")
        self._mask = (rng.random(x.shape) >= self.rate) / (1 - self.rate)
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask


class GlobalAvgPool(Layer):
    name = "pool"

    def __init__(self):
        self._shape = None

    def forward(self, x, train=False, rng=None):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, dout):
        n, c, h, w = self._shape
        return np.broadcast_to(dout[:, :, None, None] / (h * w), self._shape).copy()


class Dense(Layer):
    """ Fully connected layer """

    def __init__(self, in_units, out_units, rng=None, name="dense"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.name = name
        self.w = rng.normal(0, np.sqrt(2 / in_units), (in_units, out_units))
        self.b = np.zeros(out_units)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)]

    def grads(self):
        return [self.dw, self.db]

    def forward(self, x, train=False, rng=None):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dout):
        self.dw[...] = self._x.T @ dout
        self.db[...] = dout.sum(axis=0)
        return dout @ self.w.T


class Sequential(Layer):
    """ Layers applied one after the other """

    def __init__(self, layers, name="seq"):
        self.name = name
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def buffers(self):
        return [b for layer in self.layers for b in layer.buffers()]

    def forward(self, x, train=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


class ResidualBlock(Layer):
    """
    Two convolutions, the first one with stride 2, plus a strided 1x1
    convolution on the shortcut so that both paths have the same shape
    """

    def __init__(self, in_channels, filters, kernel=3, rng=None, name="block"):
        self.name = name
        self.main = Sequential(
            [
                Conv2D(in_channels, filters, kernel, 2, rng, f"{name}.conv1"),
                ELU(),
                BatchNorm(filters, name=f"{name}.bn1"),
                Conv2D(filters, filters, kernel, 1, rng, f"{name}.conv2"),
                ELU(),
                BatchNorm(filters, name=f"{name}.bn2"),
            ]
        )
        self.shortcut = Conv2D(in_channels, filters, 1, 2, rng, f"{name}.shortcut")
        self.post = Sequential([ELU(), BatchNorm(filters, name=f"{name}.bn3")])

    def _parts(self):
        return [self.main, self.shortcut, self.post]

    def params(self):
        return [p for part in self._parts() for p in part.params()]

    def grads(self):
        return [g for part in self._parts() for g in part.grads()]

    def buffers(self):
        return [b for part in self._parts() for b in part.buffers()]

    def forward(self, x, train=False, rng=None):
        total = self.main.forward(x, train, rng) + self.shortcut.forward(x, train, rng)
        return self.post.forward(total, train, rng)

    def backward(self, dout):
        dtotal = self.post.backward(dout)
        return self.main.backward(dtotal) + self.shortcut.backward(dtotal)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class Network:
    """ The residual classifier described by a NetworkSpec """

    def __init__(self, spec=None):
        spec = spec if spec is not None else NetworkSpec()
        self.spec = spec
        rng = np.random.default_rng(spec.seed)

        blocks = []
        channels = 1
        for i, filters in enumerate(spec.filters):
            blocks.append(ResidualBlock(channels, filters, spec.kernel, rng, f"block{i}"))
            channels = filters
        self.body = Sequential(
            blocks
            + [
                GlobalAvgPool(),
                Dropout(spec.dropout_blocks),
                Dense(channels, spec.dense_units, rng, "dense"),
                ELU(),
                Dropout(spec.dropout_dense),
                Dense(spec.dense_units, spec.n_classes, rng, "head"),
            ]
        )
        #:Generator: source of the dropout masks
        self.rng = np.random.default_rng(spec.seed)

    @property
    def head(self):
        return self.body.layers[-1]

    @property
    def n_classes(self):
        return self.spec.n_classes

    @property
    def label_names(self):
        """list of str: class names, class0 ... if the spec does not name them """
        if self.spec.label_names:
            return list(self.spec.label_names)
        return [f"class{i}" for i in range(self.n_classes)]

    def parameters(self):
        """list of (str, array): all trainable parameters in declaration order """
        return self.body.params()

    def gradients(self):
        """list of array: gradients of the last backward pass, matching parameters() """
        return self.body.grads()

    def buffers(self):
        """list of (str, array): batch norm running statistics """
        return self.body.buffers()

    def _batch(self, x):
        x = np.asarray(x, dtype=float)
        rows, cols = self.spec.input_shape
        if x.ndim == 2:
            x = x[None, None]
        elif x.ndim == 3:
            x = x[:, None]
        if x.ndim != 4 or x.shape[1:] != (1, rows, cols):
            raise ValueError(
                f"Network input must have shape ({rows}, {cols}), got {np.shape(x)}"
            )
        return x

    def logits(self, x, mode="eval"):
        if mode not in ["train", "eval"]:
            raise ValueError(f"Expected one of ['train', 'eval'] got {mode}")
        return self.body.forward(self._batch(x), mode == "train", self.rng)

    def forward(self, x, mode="eval"):
        """ Class probabilities of a batch of shape (n, rows, columns) or a single input """
        return softmax(self.logits(x, mode))

    def backward(self, dlogits):
        self.body.backward(dlogits)
        return self.gradients()


def forward(net, x, mode="eval"):
    """
    Class probabilities

    Parameters
    ----------
    net : Network
    x : array
        a spectrogram of the network input shape, or a batch of them
    mode : str, optional
        "train" samples dropout masks and uses batch statistics,
        "eval" is deterministic (default: "eval")

    Returns
    -------
    c : array of shape (n, n_classes)
    """
    return net.forward(x, mode)


def loss_and_grads(net, batch, mode="train"):
    """
    Mean cross entropy of a batch and its gradient for every parameter

    Parameters
    ----------
    net : Network
    batch : tuple of (array, array)
        inputs of shape (n, rows, columns) and integer labels
    mode : str, optional
        forward mode, "eval" freezes dropout and batch norm (default: "train")

    Returns
    -------
    loss : float
    grads : list of array
        matching net.parameters()
    """
    x, labels = batch
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if labels.size == 0:
        raise ValueError("Can not compute the loss of an empty batch")
    if np.any(labels < 0) or np.any(labels >= net.n_classes):
        raise ValueError(f"Labels must be in [0, {net.n_classes}), got {labels}")
    logits = net.logits(x, mode)
    if logits.shape[0] != labels.size:
        raise ValueError(f"Got {logits.shape[0]} inputs for {labels.size} labels")
    p = softmax(logits)
    n = labels.size
    picked = p[np.arange(n), labels]
    loss = -np.mean(np.log(np.maximum(picked, np.finfo(float).tiny)))
    dlogits = p.copy()
    dlogits[np.arange(n), labels] -= 1
    grads = net.backward(dlogits / n)
    return float(loss), grads


class Adam:
    """ Adam optimizer """

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m[...] = self.beta1 * m + (1 - self.beta1) * g
            v[...] = self.beta2 * v + (1 - self.beta2) * g ** 2
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(net, dataset, cfg=None):
    """
    Train the network with Adam on the cross entropy loss

    Parameters
    ----------
    net : Network
        network to train, changed in place
    dataset : LabeledDataset
        training samples
    cfg : TrainConfig, optional
        learning rate, epochs, batch size and seed

    Returns
    -------
    net : Network
    history : list of float
        mean loss of every epoch

    Raises
    ------
    TrainingError
        if the loss becomes NaN or infinite
    """
    cfg = cfg if cfg is not None else TrainConfig()
    if len(dataset) == 0:
        raise ValueError("Can not train on an empty dataset")
    if len(dataset.label_names) > net.n_classes:
        raise ValueError(
            f"Dataset has {len(dataset.label_names)} labels, the network {net.n_classes} classes"
        )
    x, y = dataset.arrays()
    shuffle_rng = rng_stream(cfg.seed, 0)
    net.rng = rng_stream(cfg.seed, 1)
    optimizer = Adam([p for _, p in net.parameters()], lr=cfg.lr)

    history = []
    last = None
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(y))
        losses = []
        for b, start in enumerate(range(0, len(y), cfg.batch_size)):
            index = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(net, (x[index], y[index]))
            if not np.isfinite(loss):
                raise TrainingError(
                    f"Loss became {loss} in epoch {epoch}, batch {b}, last finite loss {last}"
                )
            last = loss
            optimizer.step(grads)
            losses.append(loss * len(index))
        history.append(float(np.sum(losses) / len(y)))
        logging.debug("Epoch %i: loss %.4f", epoch, history[-1])
    logging.info("Trained %i epochs, final loss %.4f", cfg.epochs, history[-1] if history else np.nan)
    return net, history


def predict(net, spectrogram):
    """
    Label and confidence of one spectrogram

    Parameters
    ----------
    net : Network
    spectrogram : Spectrogram or array
        preprocessed spectrogram

    Returns
    -------
    label : int
        most probable class, ties to the smaller index
    confidence : float
        its probability
    """
    values = getattr(spectrogram, "values", spectrogram)
    p = net.forward(values, "eval")[0]
    return decide(p)


def decide(p):
    """ Argmax and maximum of a probability vector """
    p = np.asarray(p, dtype=float)
    label = int(np.argmax(p))
    return label, float(p[label])


def accuracy(net, dataset, batch_size=32):
    """ Fraction of correctly classified samples and the predicted labels """
    x, y = dataset.arrays()
    predictions = []
    for start in range(0, len(y), batch_size):
        p = net.forward(x[start : start + batch_size], "eval")
        predictions.extend(np.argmax(p, axis=1).tolist())
    predictions = np.asarray(predictions, dtype=int)
    return float(np.mean(predictions == y)), predictions


def confusion_matrix(labels, predictions, n_classes):
    """ Counts of every (true label, predicted label) pair """
    labels = np.asarray(labels, dtype=int)
    predictions = np.asarray(predictions, dtype=int)
    matrix = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(matrix, (labels, predictions), 1)
    return matrix


def _arrays(net):
    return [a for _, a in net.parameters()] + [a for _, a in net.buffers()]


def save_checkpoint(net, filename):
    """
    Save the network

    Layout: b"AYNET1", uint32 length of the JSON encoded NetworkSpec, the
    JSON text, uint32 number of values, then all parameters followed by the
    batch norm running statistics as little endian float64, in declaration
    order. All integers are little endian.
    """
    descriptor = json.dumps(net.spec.to_dict(), sort_keys=True).encode("utf-8")
    values = np.concatenate([a.ravel() for a in _arrays(net)])
    logging.info("Saving network to %s", filename)
    with open(filename, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(np.array([len(descriptor)], dtype="<u4").tobytes())
        f.write(descriptor)
        f.write(np.array([values.size], dtype="<u4").tobytes())
        f.write(values.astype("<f8").tobytes())


def load_checkpoint(filename):
    """
    Load a network saved with save_checkpoint

    Raises
    ------
    CheckpointError
        if the file is not a valid checkpoint
    """
    if not os.path.exists(filename):
        raise CheckpointError(f"Checkpoint not found: {filename}")
    with open(filename, "rb") as f:
        data = f.read()
    logging.info("Loading network from %s", filename)

    magic = len(CHECKPOINT_MAGIC)
    if data[:magic] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{filename} is not a network checkpoint")
    try:
        (length,) = np.frombuffer(data, dtype="<u4", count=1, offset=magic)
        start = magic + 4
        spec = NetworkSpec(**json.loads(data[start : start + length].decode("utf-8")))
        start += int(length)
        (count,) = np.frombuffer(data, dtype="<u4", count=1, offset=start)
        start += 4
        values = np.frombuffer(data, dtype="<f8", count=int(count), offset=start)
    except (ValueError, TypeError, UnicodeDecodeError) as ex:
        raise CheckpointError(f"{filename} is corrupt: {ex}")
    if start + 8 * int(count) != len(data):
        raise CheckpointError(f"{filename} has {len(data) - start} bytes of values, expected {8 * count}")

    net = Network(spec)
    arrays = _arrays(net)
    expected = sum(a.size for a in arrays)
    if expected != count:
        raise CheckpointError(f"{filename} holds {count} values, the network needs {expected}")
    offset = 0
    for a in arrays:
        a[...] = values[offset : offset + a.size].reshape(a.shape)
        offset += a.size
    return net
