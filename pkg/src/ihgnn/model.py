"""
El modelo IHGNN.

Cada capa combina la integración (suma) y la separación (concatenación) del
embedding propio de cada nodo y del de sus vecinos:

    H(k) = MLP(k)( H(k-1) ‖ A·H(k-1) ‖ (H(k-1) + A·H(k-1)) )

Los embeddings de todas las capas se concatenan por nodo, los nodos se
ordenan por sus colores 1-WL continuos (el embedding de la última capa), se
rellenan con nodos ficticios nulos hasta el tamaño común `m` y el vector
resultante pasa por un perceptrón clasificador.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InputError
from .graph import Dataset, Graph
from .nn import MLP, MLPCache, Params, softmax_cross_entropy

log = logging.getLogger(__name__)


class Variant(Enum):
    """
    Variantes de ablación del modelo.

    - `FULL`: el modelo completo.
    - `NO_INTEGRATION`: sin la suma del embedding propio y el de los vecinos.
    - `NO_SEPARATION`: solo con esa suma.
    - `NO_INTERMEDIATE`: solo los embeddings de la última capa.
    - `SUM_READOUT`: suma de los embeddings de los nodos como readout.
    """

    FULL = "full"
    NO_INTEGRATION = "no_integration"
    NO_SEPARATION = "no_separation"
    NO_INTERMEDIATE = "no_intermediate"
    SUM_READOUT = "sum_readout"

    def __str__(self) -> str:
        return self.value

    @property
    def combine_width(self) -> int:
        """Número de bloques de la entrada de los MLP de combinación."""
        match self:
            case Variant.NO_INTEGRATION:
                return 2
            case Variant.NO_SEPARATION:
                return 1
            case _:
                return 3


def _parse_bool(value: str) -> bool:
    match value.strip().lower():
        case "1" | "true" | "yes":
            return True
        case "0" | "false" | "no":
            return False
        case _:
            raise ConfigurationError(f"Valor booleano inválido: {value!r}")


@dataclass(frozen=True)
class IHGNNConfig:
    """
    Hiperparámetros del modelo y del entrenamiento.

    `pad_size` (m), `num_features` (c) y `num_classes` (C) dependen del
    dataset; `for_dataset` los completa. Un `pad_size` de 0 significa "el
    tamaño del grafo más grande del dataset".
    """

    num_layers: int = 5
    embed_dim: int = 32
    classifier_hidden: int = 128
    dropout: float = 0.5
    batch_size: int = 32
    epochs: int = 350
    pad_size: int = 0
    num_features: int = 0
    num_classes: int = 2
    variant: Variant = Variant.FULL
    seed: int = 0
    lr: float = 0.01
    lr_decay_every: int = 50
    lr_decay_rate: float = 0.5
    num_folds: int = 10
    stratified: bool = True
    combine_dropout: bool = False
    deterministic: bool = False

    def validate(self) -> IHGNNConfig:
        checks = [
            (self.num_layers >= 1, f"num_layers debe ser >= 1: {self.num_layers}"),
            (self.embed_dim >= 1, "embed_dim debe ser positivo"),
            (self.classifier_hidden >= 1, "classifier_hidden debe ser positivo"),
            (0.0 <= self.dropout < 1.0, f"dropout fuera de [0, 1): {self.dropout}"),
            (self.batch_size >= 1, "batch_size debe ser positivo"),
            (self.epochs >= 1, "epochs debe ser positivo"),
            (self.pad_size >= 0, "pad_size no puede ser negativo"),
            (self.num_classes >= 1, "num_classes debe ser positivo"),
            (self.lr >= 0.0, "lr no puede ser negativo"),
            (self.num_folds >= 2, "num_folds debe ser >= 2"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        return self

    @property
    def node_dim(self) -> int:
        """Dimensión del embedding final de cada nodo."""
        if self.variant == Variant.NO_INTERMEDIATE:
            return self.embed_dim
        return self.num_layers * self.embed_dim

    @property
    def readout_dim(self) -> int:
        """Dimensión de h_G: m·K·r, o K·r con el readout de suma."""
        if self.variant == Variant.SUM_READOUT:
            return self.node_dim
        return self.pad_size * self.node_dim

    def replace(self, **changes) -> IHGNNConfig:
        return replace(self, **changes).validate()

    def for_dataset(self, d: Dataset, num_features: int) -> IHGNNConfig:
        """Completa las dimensiones que dependen del dataset."""
        pad_size = self.pad_size or d.max_nodes
        if pad_size < d.max_nodes:
            raise ConfigurationError(
                f"pad_size={pad_size} menor que el grafo más grande ({d.max_nodes})"
            )
        log.debug("%s: m=%d c=%d C=%d", d.name, pad_size, num_features, d.num_classes)
        return self.replace(
            pad_size=pad_size, num_features=num_features, num_classes=d.num_classes
        )

    def dump(self, path: Path | str | None = None) -> str:
        """Configuración como texto `clave=valor`; si hay `path`, se escribe."""
        text = "".join(f"{key}={value}\n" for key, value in self.as_dict().items())
        if path is not None:
            Path(path).write_text(text, encoding="utf8")
        return text

    def as_dict(self) -> dict[str, object]:
        return {key: str(value) for key, value in asdict(self).items()}

    @staticmethod
    def parse(text: str) -> IHGNNConfig:
        """Lee el formato de `dump`. Las líneas que empiezan por `#` se ignoran."""
        defaults = IHGNNConfig()
        kinds = {f.name: type(getattr(defaults, f.name)) for f in fields(IHGNNConfig)}
        values: dict[str, object] = {}
        for i, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in kinds:
                raise ConfigurationError(f"línea {i}: clave desconocida {key!r}")
            try:
                match kinds[key]:
                    case t if t is bool:
                        values[key] = _parse_bool(value)
                    case t if t is Variant:
                        values[key] = Variant(value)
                    case t:
                        values[key] = t(value)
            except ValueError as e:
                raise ConfigurationError(f"línea {i}: {key}={value!r}: {e}") from e
        return IHGNNConfig(**values).validate()  # type: ignore[arg-type]

    @staticmethod
    def load(path: Path | str) -> IHGNNConfig:
        return IHGNNConfig.parse(Path(path).read_text(encoding="utf8"))


@dataclass(frozen=True)
class GraphEmbedding:
    """Embedding h_G de un grafo y el orden de nodos usado para construirlo."""

    vector: np.ndarray
    node_order: np.ndarray
    num_real_nodes: int


@dataclass
class ForwardCache:
    A: np.ndarray
    layer_caches: list[MLPCache]
    layers: list[np.ndarray]
    perm: np.ndarray
    embedding: np.ndarray
    classifier_cache: MLPCache


class IHGNNModel:
    """
    Parámetros del modelo: el MLP que proyecta las etiquetas (c → r → r), los
    K−1 MLP de combinación (ancho·r → r → r) y el clasificador
    (dim(h_G) → r′ → C).
    """

    def __init__(
        self,
        config: IHGNNConfig,
        embed_mlp: MLP,
        combine_mlps: list[MLP],
        classifier: MLP,
    ) -> None:
        assert len(combine_mlps) == config.num_layers - 1
        for mlp in combine_mlps:
            assert mlp.in_dim == config.variant.combine_width * config.embed_dim
        assert classifier.in_dim == config.readout_dim
        self.config = config
        self.embed_mlp = embed_mlp
        self.combine_mlps = combine_mlps
        self.classifier = classifier

    def __repr__(self) -> str:
        c = self.config
        return f"<IHGNNModel K={c.num_layers} variant={c.variant} m={c.pad_size}>"

    @staticmethod
    def _build(config: IHGNNConfig, make) -> IHGNNModel:
        config.validate()
        if config.num_features < 1:
            raise ConfigurationError("num_features debe ser positivo")
        if config.variant != Variant.SUM_READOUT and config.pad_size < 1:
            raise ConfigurationError("pad_size debe ser positivo")
        r = config.embed_dim
        return IHGNNModel(
            config,
            make(config.num_features, r, r),
            [
                make(config.variant.combine_width * r, r, r)
                for _ in range(config.num_layers - 1)
            ],
            make(config.readout_dim, config.classifier_hidden, config.num_classes),
        )

    @staticmethod
    def init(config: IHGNNConfig, rng: np.random.Generator) -> IHGNNModel:
        return IHGNNModel._build(config, lambda i, h, o: MLP.init(i, h, o, rng))

    @staticmethod
    def zeros(config: IHGNNConfig) -> IHGNNModel:
        return IHGNNModel._build(config, MLP.zeros)

    def mlps(self) -> list[tuple[str, MLP]]:
        return (
            [("embed", self.embed_mlp)]
            + [(f"combine.{k}", mlp) for k, mlp in enumerate(self.combine_mlps)]
            + [("classifier", self.classifier)]
        )

    def parameters(self) -> Params:
        """Todos los parámetros, con nombres como `combine.0.W1`."""
        return {
            f"{prefix}.{name}": p
            for prefix, mlp in self.mlps()
            for name, p in mlp.parameters().items()
        }

    def load_parameters(self, params: Params) -> None:
        own = self.parameters()
        if set(own) != set(params):
            raise InputError("Los parámetros no corresponden a este modelo")
        for name, p in own.items():
            if p.shape != params[name].shape:
                raise InputError(f"{name}: forma {params[name].shape} != {p.shape}")
            np.copyto(p, params[name])

    def embed(self, g: Graph, X: np.ndarray) -> GraphEmbedding:
        _, cache = forward(self, g, X)
        return GraphEmbedding(cache.embedding, cache.perm, g.num_nodes)


def aggregate_neighbors(
    H: np.ndarray, A: np.ndarray, deterministic: bool = False
) -> np.ndarray:
    """
    Suma de los embeddings de los vecinos de cada nodo (A·H).

    Con `deterministic` las filas de los vecinos se suman ordenadas por su
    valor, de forma que el resultado no depende de la numeración de los nodos.
    """
    if A.shape != (H.shape[0], H.shape[0]):
        raise InputError(f"Adyacencia {A.shape} para {H.shape[0]} nodos")
    if not deterministic:
        return A @ H
    out = np.zeros_like(H)
    for v in range(H.shape[0]):
        rows = H[np.nonzero(A[v])[0]]
        if len(rows) == 0:
            continue
        for row in rows[np.lexsort(rows.T[::-1])]:
            out[v] = out[v] + row
    return out


def combine(h_self: np.ndarray, h_neigh: np.ndarray, variant: Variant) -> np.ndarray:
    """Entrada del MLP de combinación según la variante."""
    if h_self.shape != h_neigh.shape:
        raise InputError(f"Formas distintas: {h_self.shape} y {h_neigh.shape}")
    match variant:
        case Variant.NO_INTEGRATION:
            return np.concatenate([h_self, h_neigh], axis=1)
        case Variant.NO_SEPARATION:
            return h_self + h_neigh
        case Variant.FULL | Variant.NO_INTERMEDIATE | Variant.SUM_READOUT:
            return np.concatenate([h_self, h_neigh, h_self + h_neigh], axis=1)
        case _:
            raise ConfigurationError(f"Variante desconocida: {variant}")


def combine_backward(
    dZ: np.ndarray, variant: Variant
) -> tuple[np.ndarray, np.ndarray]:
    """Gradientes de `combine` respecto al embedding propio y al de los vecinos."""
    match variant:
        case Variant.NO_INTEGRATION:
            dS, dN = np.split(dZ, 2, axis=1)
            return dS, dN
        case Variant.NO_SEPARATION:
            return dZ, dZ
        case _:
            dS, dN, dSum = np.split(dZ, 3, axis=1)
            return dS + dSum, dN + dSum


def sort_nodes_by_color(H: np.ndarray, last_width: int | None = None) -> np.ndarray:
    """
    Orden ascendente de los nodos por sus colores 1-WL continuos.

    La clave principal es el bloque de la última capa (las últimas
    `last_width` columnas, dimensión 0 primero) y, en caso de empate, la fila
    completa. La ordenación es estable: filas idénticas conservan su orden.
    """
    D = H.shape[1]
    w = D if last_width is None else last_width
    keys = [H[:, D - w + j] for j in range(w)] + [H[:, j] for j in range(D)]
    if not keys:
        return np.arange(H.shape[0])
    # lexsort usa la última clave como la principal
    return np.lexsort(keys[::-1])


def pad_and_flatten(H_sorted: np.ndarray, m: int) -> np.ndarray:
    """Concatena las filas y añade `m - n` filas nulas al final."""
    n, D = H_sorted.shape
    if n > m:
        raise ConfigurationError(f"El grafo tiene {n} nodos y m={m}")
    out = np.zeros(m * D)
    out[: n * D] = H_sorted.reshape(-1)
    return out


def _sum_rows(H: np.ndarray, deterministic: bool) -> np.ndarray:
    if not deterministic:
        return H.sum(axis=0)
    out = np.zeros(H.shape[1])
    for row in H[sort_nodes_by_color(H)]:
        out = out + row
    return out


def forward(
    model: IHGNNModel,
    g: Graph,
    X: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """
    Logits de un grafo.

    Args:
        X: características one-hot de los nodos (n × c).
        training: activa el dropout.
        rng: generador para el dropout.

    Returns:
        vector de C logits y la caché para `backward`.
    """
    cfg = model.config
    n = g.num_nodes
    variant = cfg.variant
    if variant != Variant.SUM_READOUT and n > cfg.pad_size:
        raise ConfigurationError(f"El grafo tiene {n} nodos y m={cfg.pad_size}")
    inner_dropout = cfg.dropout if cfg.combine_dropout else 0.0
    det = cfg.deterministic
    A = g.adjacency

    H, c = model.embed_mlp.forward(X, inner_dropout, training, rng, det)
    layers, caches = [H], [c]
    for mlp in model.combine_mlps:
        prev = layers[-1]
        Z = combine(prev, aggregate_neighbors(prev, A, det), variant)
        H, c = mlp.forward(Z, inner_dropout, training, rng, det)
        layers.append(H)
        caches.append(c)

    H = layers[-1] if variant == Variant.NO_INTERMEDIATE else np.hstack(layers)
    if variant == Variant.SUM_READOUT:
        perm = np.arange(n)
        h_G = _sum_rows(H, det)
    else:
        perm = sort_nodes_by_color(H, cfg.embed_dim)
        h_G = pad_and_flatten(H[perm], cfg.pad_size)
    logits, classifier_cache = model.classifier.forward(
        h_G[None, :], cfg.dropout, training, rng, det
    )
    return logits[0], ForwardCache(A, caches, layers, perm, h_G, classifier_cache)


def backward(model: IHGNNModel, cache: ForwardCache, dlogits: np.ndarray) -> Params:
    """
    Gradientes de todos los parámetros a partir del gradiente de los logits.

    La permutación de la ordenación se trata como constante y las filas de
    relleno no propagan gradiente.
    """
    cfg = model.config
    r = cfg.embed_dim
    n = cache.layers[0].shape[0]
    grads: Params = {}

    def collect(prefix: str, g: Params) -> None:
        for name, value in g.items():
            grads[f"{prefix}.{name}"] = value

    g, dh_G = model.classifier.backward(cache.classifier_cache, dlogits[None, :])
    collect("classifier", g)
    dh_G = dh_G[0]
    if cfg.variant == Variant.SUM_READOUT:
        dH = np.tile(dh_G, (n, 1))
    else:
        dH = np.zeros((n, cfg.node_dim))
        dH[cache.perm] = dh_G.reshape(cfg.pad_size, cfg.node_dim)[:n]

    K = cfg.num_layers
    if cfg.variant == Variant.NO_INTERMEDIATE:
        dlayers = [np.zeros((n, r)) for _ in range(K - 1)] + [dH]
    else:
        dlayers = [dH[:, k * r : (k + 1) * r].copy() for k in range(K)]

    for k in reversed(range(1, K)):
        g, dZ = model.combine_mlps[k - 1].backward(cache.layer_caches[k], dlayers[k])
        collect(f"combine.{k - 1}", g)
        dS, dN = combine_backward(dZ, cfg.variant)
        dlayers[k - 1] += dS + cache.A.T @ dN
    g, _ = model.embed_mlp.backward(cache.layer_caches[0], dlayers[0])
    collect("embed", g)
    return grads


# Elemento de un lote: grafo, características y clase.
Sample = tuple[Graph, np.ndarray, int]


def loss_and_gradients(
    model: IHGNNModel,
    batch: Sequence[Sample],
    rng: np.random.Generator | None = None,
    training: bool = True,
) -> tuple[float, Params]:
    """
    Entropía cruzada media del lote y su gradiente exacto respecto a todos
    los parámetros del modelo.
    """
    if len(batch) == 0:
        raise InputError("Lote vacío")
    outputs = [forward(model, g, X, training, rng) for g, X, _ in batch]
    logits = np.stack([o[0] for o in outputs])
    loss, dlogits = softmax_cross_entropy(logits, [y for _, _, y in batch])
    total = {name: np.zeros_like(p) for name, p in model.parameters().items()}
    for (_, cache), dl in zip(outputs, dlogits):
        for name, grad in backward(model, cache, dl).items():
            total[name] += grad
    return loss, total


def predict(model: IHGNNModel, samples: Sequence[tuple[Graph, np.ndarray]]) -> np.ndarray:
    """Clase predicha para cada grafo, sin dropout."""
    return np.array(
        [int(np.argmax(forward(model, g, X)[0])) for g, X in samples], dtype=int
    )
