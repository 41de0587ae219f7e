"""
Predição de fluxo por trajetórias polinomiais.

Cada pixel de t_j segue f_{t_j→t} = Σ_{l=1..k} a_l (t − t_j)^l. Os
coeficientes saem de k fluxos estimados entre referências decodificadas;
o fluxo forward extrapolado é revertido por softmax splatting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from config import FLOW_PREDICTION_CONFIG, REVERSAL_CONFIG
from errors import DuplicateTimestamp, EmptyInput, MissingFrame, ShapeMismatch, SingularSystem, ZeroOffset
from flow_reversal import ImportanceConfig, importance_mask, softmax_splat_reverse
from tensor_io import FlowField2D, Frame


def _checar_timestamps(t_j, timestamps: Sequence) -> None:
    if len(set(timestamps)) != len(timestamps):
        raise DuplicateTimestamp(f"timestamps repetidos: {list(timestamps)}")
    if any(t == t_j for t in timestamps):
        raise ZeroOffset(f"timestamp igual à origem t_j={t_j}")


@dataclass(frozen=True)
class ReferenceFlowSet:
    """Origem t_j e pares (t_{j_i}, f_{t_j→t_{j_i}}), do mais próximo ao mais distante."""

    origin: int
    timestamps: Tuple[int, ...]
    flows: Tuple[FlowField2D, ...]

    def __post_init__(self):
        ts, fl = tuple(self.timestamps), tuple(self.flows)
        if len(ts) == 0:
            raise EmptyInput("ReferenceFlowSet exige ao menos um fluxo")
        if len(ts) != len(fl):
            raise ShapeMismatch(f"{len(ts)} timestamps para {len(fl)} fluxos")
        _checar_timestamps(self.origin, ts)
        if len({(f.height, f.width) for f in fl}) != 1:
            raise ShapeMismatch("fluxos de referência com formas distintas")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "flows", fl)

    @classmethod
    def from_available(cls, origin: int, available: Mapping[int, FlowField2D], k: int | None = None) -> "ReferenceFlowSet":
        """Seleciona os k timestamps mais próximos de `origin` (empate → anterior)."""
        candidatos = sorted((t for t in available if t != origin), key=lambda t: (abs(t - origin), t))
        if not candidatos:
            raise EmptyInput(f"nenhuma referência disponível além da origem {origin}")
        escolhidos = candidatos[: (k or len(candidatos))]
        return cls(origin, tuple(escolhidos), tuple(available[t] for t in escolhidos))

    def nearest(self, k: int) -> "ReferenceFlowSet":
        if not 1 <= k <= len(self):
            raise ShapeMismatch(f"ordem k={k} exige entre 1 e {len(self)} fluxos")
        ordem = sorted(range(len(self)), key=lambda i: (abs(self.timestamps[i] - self.origin), self.timestamps[i]))[:k]
        return ReferenceFlowSet(self.origin, tuple(self.timestamps[i] for i in ordem), tuple(self.flows[i] for i in ordem))

    @property
    def height(self) -> int:
        return self.flows[0].height

    @property
    def width(self) -> int:
        return self.flows[0].width

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class PolyMotionField:
    """Coeficientes a_1..a_k por pixel, forma (k, 2, H, W) (eixo 1: x, y)."""

    k: int
    origin: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if self.k < 1 or c.ndim != 4 or c.shape[:2] != (self.k, 2):
            raise ShapeMismatch(f"coeficientes {c.shape} incompatíveis com k={self.k}")
        object.__setattr__(self, "coeffs", c)


class PredictedFlow(NamedTuple):
    flow: FlowField2D      # f_{t→t_j}
    holes: np.ndarray      # bool (H, W)


def default_order(n_refs: int) -> int:
    """k = min(n − 1, 2) para n referências decodificadas (0 desliga a predição)."""
    return max(0, min(n_refs - 1, FLOW_PREDICTION_CONFIG["max_order"]))


def build_time_matrix(t_j, timestamps: Sequence) -> np.ndarray:
    """
    Matriz k×k com linhas [(t_i − t_j), (t_i − t_j)², …, (t_i − t_j)^k].

    Raises:
        DuplicateTimestamp: timestamps repetidos
        ZeroOffset: algum timestamp igual a t_j
    """
    _checar_timestamps(t_j, list(timestamps))
    d = np.asarray(timestamps, dtype=np.float64) - float(t_j)
    k = d.size
    return d[:, None] ** np.arange(1, k + 1, dtype=np.float64)[None, :]


def solve_time_system(matrix, rhs) -> np.ndarray:
    """
    Resolve matrix · A = rhs com uma única fatoração LU (pivoteamento parcial).

    Args:
        matrix: k×k
        rhs: (k, N), todos os pixels e eixos de uma vez

    Raises:
        SingularSystem: |pivô| < pivot_tol
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(np.asarray(matrix, dtype=np.float64))
    if np.min(np.abs(np.diag(lu))) < FLOW_PREDICTION_CONFIG["pivot_tol"]:
        raise SingularSystem(f"pivô abaixo de {FLOW_PREDICTION_CONFIG['pivot_tol']:g}")
    return lu_solve((lu, piv), np.asarray(rhs, dtype=np.float64))


def solve_poly_coeffs(refs: ReferenceFlowSet, k: int | None = None) -> PolyMotionField:
    """
    Coeficientes polinomiais por pixel a partir dos k fluxos mais próximos.

    Args:
        refs: origem e fluxos f_{t_j→t_{j_i}}
        k: ordem (padrão: todos os fluxos de refs)

    Raises:
        SingularSystem: matriz temporal mal condicionada
    """
    k = k or len(refs)
    usados = refs.nearest(k)
    matriz = build_time_matrix(usados.origin, usados.timestamps)
    f = np.stack([fl.as_array() for fl in usados.flows])  # (k, 2, H, W)
    a = solve_time_system(matriz, f.reshape(k, -1))
    return PolyMotionField(k, usados.origin, a.reshape(f.shape))


def eval_forward_flow(poly: PolyMotionField, t: float) -> FlowField2D:
    """f_{t_j→t} por Horner; t = t_j devolve o fluxo nulo."""
    d = float(t) - float(poly.origin)
    res = np.zeros(poly.coeffs.shape[1:])
    for l in range(poly.k - 1, -1, -1):
        res = (res + poly.coeffs[l]) * d
    return FlowField2D(res[0], res[1])


def predict_backward_flow(
    refs: ReferenceFlowSet,
    frames: Mapping[int, Frame],
    t: float,
    k: int | None = None,
    importance: ImportanceConfig | None = None,
    eps: float = REVERSAL_CONFIG["eps"],
) -> PredictedFlow:
    """
    Predição generalizada de fluxo: solve → eval(t) → softmax splatting.

    Args:
        refs: origem t_j e fluxos para as referências vizinhas
        frames: quadros decodificados por timestamp (origem e vizinhos usados)
        t: instante alvo
        k: ordem polinomial (padrão: todos os fluxos)
        importance: mapa afim da máscara de importância

    Returns:
        PredictedFlow(f_{t→t_j}, buracos)

    Raises:
        MissingFrame: quadro ausente para algum timestamp usado
        SingularSystem, ShapeMismatch: propagados
    """
    k = k or len(refs)
    usados = refs.nearest(k)
    faltando = [ts for ts in (usados.origin, *usados.timestamps) if ts not in frames]
    if faltando:
        raise MissingFrame(f"quadros ausentes para timestamps {faltando}")
    origem = frames[usados.origin]
    if (origem.height, origem.width) != (usados.height, usados.width):
        raise ShapeMismatch(f"quadro {origem.height}×{origem.width} ≠ fluxos {usados.height}×{usados.width}")

    poly = solve_poly_coeffs(usados, k)
    forward = eval_forward_flow(poly, t)
    mascara = importance_mask(origem, [frames[ts] for ts in usados.timestamps], list(usados.flows), importance)
    reverso = softmax_splat_reverse(forward, mascara, eps)
    return PredictedFlow(reverso.flow, reverso.holes)
