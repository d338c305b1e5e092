"""
Núcleo numérico: productos de matrices, perceptrones de una capa oculta,
entropía cruzada, Adam y comprobación de gradientes por diferencias finitas.

Las matrices son `numpy.ndarray` de `float64`. Los sesgos se guardan como
matrices fila `1 × n` para que todos los parámetros sean bidimensionales.
Los gradientes se derivan a mano para exactamente las operaciones que
necesita el modelo.
"""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

log = logging.getLogger(__name__)

# Parámetros (o gradientes) con nombre, en un orden fijo.
Params = dict[str, np.ndarray]

CHECKPOINT_HEADER = "ihgnn-checkpoint v1"


def matmul(a: np.ndarray, b: np.ndarray, deterministic: bool = False) -> np.ndarray:
    """
    Producto `a · b`.

    Con `deterministic` la suma se acumula en el orden fijo de los índices
    `k = 0, 1, ...`, de forma que cada fila del resultado depende únicamente
    de la fila correspondiente de `a`, y no de su posición.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise InputError(f"Formas incompatibles para el producto: {a.shape} · {b.shape}")
    if not deterministic:
        return a @ b
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += np.outer(a[:, k], b[k])
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass
class MLPCache:
    """Valores intermedios de `MLP.forward` que necesita `MLP.backward`."""

    x: np.ndarray
    pre: np.ndarray
    hidden: np.ndarray
    mask: np.ndarray | None


class MLP:
    """
    Perceptrón con una capa oculta: `y = ReLU(x·W1 + b1)·W2 + b2`, aplicado a
    cada fila de `x`. La salida no tiene activación.
    """

    def __init__(
        self, W1: np.ndarray, b1: np.ndarray, W2: np.ndarray, b2: np.ndarray
    ) -> None:
        assert W1.shape[1] == b1.shape[1] == W2.shape[0]
        assert W2.shape[1] == b2.shape[1]
        self.W1, self.b1, self.W2, self.b2 = W1, b1, W2, b2

    def __repr__(self) -> str:
        return f"<MLP {self.in_dim}→{self.hidden_dim}→{self.out_dim}>"

    @property
    def in_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[1]

    @staticmethod
    def init(
        in_dim: int, hidden_dim: int, out_dim: int, rng: np.random.Generator
    ) -> MLP:
        """
        Inicialización uniforme de Glorot: cada peso se toma de
        `U(-a, a)` con `a = sqrt(6 / (fan_in + fan_out))`. Sesgos a cero.
        """

        def glorot(fan_in: int, fan_out: int) -> np.ndarray:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_in, fan_out))

        return MLP(
            glorot(in_dim, hidden_dim),
            np.zeros((1, hidden_dim)),
            glorot(hidden_dim, out_dim),
            np.zeros((1, out_dim)),
        )

    @staticmethod
    def zeros(in_dim: int, hidden_dim: int, out_dim: int) -> MLP:
        return MLP(
            np.zeros((in_dim, hidden_dim)),
            np.zeros((1, hidden_dim)),
            np.zeros((hidden_dim, out_dim)),
            np.zeros((1, out_dim)),
        )

    def parameters(self) -> Params:
        """Referencias a los parámetros (no copias)."""
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def forward(
        self,
        x: np.ndarray,
        dropout: float = 0.0,
        training: bool = False,
        rng: np.random.Generator | None = None,
        deterministic: bool = False,
    ) -> tuple[np.ndarray, MLPCache]:
        """
        Aplica el perceptrón a cada fila de `x`.

        Durante el entrenamiento, si `dropout > 0`, se aplica dropout invertido
        sobre la capa oculta.

        Returns:
            la salida y la caché para `backward`.
        """
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise InputError(f"Entrada {x.shape} para un MLP de entrada {self.in_dim}")
        pre = matmul(x, self.W1, deterministic) + self.b1
        hidden = relu(pre)
        mask = None
        if training and dropout > 0.0:
            assert rng is not None, "El dropout necesita un generador"
            mask = (rng.random(hidden.shape) >= dropout) / (1.0 - dropout)
            hidden = hidden * mask
        y = matmul(hidden, self.W2, deterministic) + self.b2
        return y, MLPCache(x, pre, hidden, mask)

    def backward(self, cache: MLPCache, dy: np.ndarray) -> tuple[Params, np.ndarray]:
        """
        Gradientes exactos de `forward`.

        Returns:
            gradientes de los parámetros (mismas claves que `parameters`) y
            gradiente respecto a la entrada.
        """
        dW2 = cache.hidden.T @ dy
        db2 = dy.sum(axis=0, keepdims=True)
        dhidden = dy @ self.W2.T
        if cache.mask is not None:
            dhidden = dhidden * cache.mask
        dpre = dhidden * (cache.pre > 0)
        dW1 = cache.x.T @ dpre
        db1 = dpre.sum(axis=0, keepdims=True)
        dx = dpre @ self.W1.T
        return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}, dx


def mlp_forward(
    m: MLP,
    x: np.ndarray,
    dropout_p: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> tuple[np.ndarray, MLPCache]:
    return m.forward(x, dropout_p, training, rng, deterministic)


def mlp_backward(m: MLP, cache: MLPCache, upstream_grad: np.ndarray):
    return m.backward(cache, upstream_grad)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray | list[int]
) -> tuple[float, np.ndarray]:
    """
    Entropía cruzada media de las filas de `logits` respecto a `labels`.

    Returns:
        la pérdida y su gradiente `(softmax - one_hot) / B`.
    """
    labels = np.asarray(labels, dtype=int)
    batch, num_classes = logits.shape
    if labels.shape != (batch,):
        raise InputError(f"Se esperaban {batch} clases y hay {labels.shape}")
    if np.any((labels < 0) | (labels >= num_classes)):
        raise InputError(f"Clases fuera de [0, {num_classes}): {labels}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(batch)
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return loss, grad / batch


@dataclass
class AdamState:
    """
    Estado del optimizador Adam.

    La tasa de aprendizaje de la época `e` es
    `lr * decay_rate ** (e // decay_every)`; `epoch` la fija el bucle de
    entrenamiento.
    """

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_every: int = 50
    decay_rate: float = 0.5
    t: int = 0
    epoch: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    def learning_rate(self) -> float:
        if self.decay_every <= 0:
            return self.lr
        return self.lr * self.decay_rate ** (self.epoch // self.decay_every)


def adam_step(state: AdamState, params: Params, grads: Params) -> Params:
    """
    Actualiza `params` en el sitio con un paso de Adam con corrección de sesgo.

    Returns:
        los mismos `params`, ya actualizados.
    """
    state.t += 1
    lr = state.learning_rate()
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise InputError(f"Gradiente de {name} con forma {g.shape} != {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**state.t)
        v_hat = v / (1.0 - state.beta2**state.t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def grad_check(
    closure: Callable[[], tuple[float, Params]],
    params: Params,
    tolerance: float = 1e-4,
    num_samples: int = 10,
    rng: np.random.Generator | None = None,
    step: float = 1e-5,
    kink_tolerance: float = 1e-3,
) -> float:
    """
    Compara los gradientes analíticos con la diferencia finita centrada
    `(f(x + h) - f(x - h)) / 2h`.

    Una entrada cuyo intervalo `[x - h, x + h]` cruza un codo de una ReLU o un
    salto en el orden de los nodos no es derivable ahí: se detecta porque la
    diferencia centrada con paso `h` y con paso `h / 2` discrepan en más de
    `kink_tolerance`, y se descarta y se sustituye por otra entrada del mismo
    parámetro.

    Args:
        closure: calcula `(pérdida, gradientes)` con los valores actuales de
            `params`. Debe ser determinista (sin dropout).
        params: parámetros que se perturban en el sitio y se restauran.
        tolerance: solo se usa para avisar en el log si se supera.
        num_samples: entradas comprobadas por parámetro (todas si hay menos).
        rng: generador para elegir las entradas.
        step: paso `h`.
        kink_tolerance: discrepancia relativa entre los dos pasos a partir de
            la cual la entrada se descarta.

    Returns:
        el máximo error relativo `|a - n| / max(|a|, |n|, 1e-5)`.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    _, analytic = closure()

    def relative(a: float, b: float) -> float:
        return abs(a - b) / max(abs(a), abs(b), 1e-5)

    def central(flat: np.ndarray, i: int, h: float) -> float:
        original = flat[i]
        flat[i] = original + h
        plus, _ = closure()
        flat[i] = original - h
        minus, _ = closure()
        flat[i] = original
        return (plus - minus) / (2 * h)

    worst = 0.0
    worst_at = ""
    skipped = 0
    for name, p in params.items():
        flat = p.reshape(-1)
        count = min(num_samples, flat.size)
        checked = 0
        for i in rng.permutation(flat.size):
            if checked == count:
                break
            numeric = central(flat, i, step)
            if relative(numeric, central(flat, i, step / 2)) > kink_tolerance:
                log.debug("%s[%d] junto a un punto no derivable, se descarta", name, i)
                skipped += 1
                continue
            checked += 1
            error = relative(analytic[name].reshape(-1)[i], numeric)
            if error > worst:
                worst, worst_at = error, f"{name}[{i}]"
    if skipped:
        log.debug("%d entradas descartadas por no ser derivables", skipped)
    if worst > tolerance:
        log.warning("Error relativo %.3g en %s (tolerancia %g)", worst, worst_at, tolerance)
    return float(worst)


def save_checkpoint(params: Params, path: Path | str) -> None:
    """
    Guarda los parámetros en texto: una cabecera con la versión, el número de
    parámetros y, para cada uno, una línea `nombre filas columnas` seguida de
    sus filas con los valores separados por espacios.
    """
    lines = [CHECKPOINT_HEADER, str(len(params))]
    for name, p in params.items():
        assert p.ndim == 2
        lines.append(f"{name} {p.shape[0]} {p.shape[1]}")
        lines += [" ".join(format(x, ".17g") for x in row) for row in p]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf8")


def load_checkpoint(path: Path | str) -> Params:
    lines = Path(path).read_text(encoding="utf8").splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise InputError(f"{path} no es un checkpoint de la versión actual")
    params: Params = {}
    i = 2
    for _ in range(int(lines[1])):
        name, rows, cols = lines[i].split()
        rows, cols = int(rows), int(cols)
        values = [[float(x) for x in line.split()] for line in lines[i + 1 : i + 1 + rows]]
        params[name] = np.array(values, dtype=float).reshape(rows, cols)
        i += 1 + rows
    return params
