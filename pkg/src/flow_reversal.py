"""
Reversão de fluxo (forward → backward) por softmax splatting.

    f_{t→t_j} = Σ→(exp(Z)·(−f), f) / Σ→(exp(Z), f)

Σ→ é o summation splatting bilinear; Z é a máscara de importância derivada
do erro fotométrico da referência contra os vizinhos alinhados.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from pydantic import Field
from scipy import ndimage

from config import REVERSAL_CONFIG, ConfigModel
from errors import ShapeMismatch
from motion_compensation import backward_warp_bilinear
from tensor_io import FlowField2D, Frame


class ImportanceConfig(ConfigModel):
    """q(x̂, e) := alpha·e + beta. alpha age como temperatura do softmax."""

    alpha: float = Field(default=REVERSAL_CONFIG["alpha"], allow_inf_nan=False)
    beta: float = Field(default=REVERSAL_CONFIG["beta"], allow_inf_nan=False)


@dataclass(frozen=True)
class ImportanceMask:
    """Mapa Z (H, W); maior = pixel de origem mais confiável."""

    Z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.Z, dtype=np.float64)
        if z.ndim != 2:
            raise ShapeMismatch(f"máscara de importância exige H×W, recebeu {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ShapeMismatch("máscara de importância com valores não finitos")
        object.__setattr__(self, "Z", z)


class ReversedFlow(NamedTuple):
    flow: FlowField2D
    holes: np.ndarray  # bool (H, W)


# =========================
# SPLATTING
# =========================
def _alvos_bilineares(flow: FlowField2D):
    """Índices lineares (H·W, 4) e pesos dos 4 vizinhos de (x+dx, y+dy), na ordem da origem."""
    h, w = flow.height, flow.width
    xx, yy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    tx, ty = (xx + flow.dx).ravel(), (yy + flow.dy).ravel()
    x0, y0 = np.floor(tx), np.floor(ty)
    fx, fy = tx - x0, ty - y0

    xs = np.stack([x0, x0 + 1, x0, x0 + 1], axis=1)
    ys = np.stack([y0, y0, y0 + 1, y0 + 1], axis=1)
    pesos = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy], axis=1)
    valido = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)

    idx = np.where(valido, ys * w + xs, 0).astype(np.intp)
    return idx, pesos, valido


def summation_splat(values, flow: FlowField2D) -> np.ndarray:
    """
    Espalha cada pixel de origem para os 4 vizinhos inteiros de (x+dx, y+dy).

    Contribuições fora do quadro são descartadas. A acumulação segue a ordem
    row-major das origens (np.bincount), logo é determinística.

    Args:
        values: (C, H, W) ou (H, W)
        flow: deslocamento de cada origem

    Returns:
        array acumulado com a forma de `values`
    """
    v = np.asarray(values, dtype=np.float64)
    plano = v.ndim == 2
    if plano:
        v = v[None]
    if v.ndim != 3 or v.shape[1:] != (flow.height, flow.width):
        raise ShapeMismatch(f"valores {np.shape(values)} incompatíveis com fluxo {flow.height}×{flow.width}")

    idx, pesos, valido = _alvos_bilineares(flow)
    n = flow.height * flow.width
    alvos = idx[valido]
    saida = np.empty_like(v)
    for c in range(v.shape[0]):
        contrib = (pesos * v[c].reshape(-1, 1))[valido]
        saida[c] = np.bincount(alvos, weights=contrib, minlength=n).reshape(flow.height, flow.width)
    return saida[0] if plano else saida


# =========================
# MÁSCARA DE IMPORTÂNCIA
# =========================
def importance_mask(
    ref_frame: Frame,
    neighbor_frames: Sequence[Frame],
    flows: Sequence[FlowField2D],
    cfg: ImportanceConfig | None = None,
) -> ImportanceMask:
    """
    Z = alpha · e + beta, e = −média_i ‖x̂_{t_j} − w←(x̂_{t_i}, f_{t_j→t_i})‖₁ (média nos canais).

    Raises:
        ShapeMismatch: listas vazias ou de tamanhos diferentes, ou quadros incompatíveis
    """
    cfg = cfg or ImportanceConfig()
    if len(neighbor_frames) == 0 or len(neighbor_frames) != len(flows):
        raise ShapeMismatch(f"{len(neighbor_frames)} vizinhos para {len(flows)} fluxos (exige k ≥ 1 pares)")

    erro = np.zeros((ref_frame.height, ref_frame.width))
    for vizinho, fluxo in zip(neighbor_frames, flows):
        if vizinho.shape != ref_frame.shape:
            raise ShapeMismatch(f"vizinho {vizinho.shape} ≠ referência {ref_frame.shape}")
        alinhado = backward_warp_bilinear(vizinho, fluxo)
        erro += np.abs(ref_frame.data - alinhado.data).mean(axis=0)
    e = -erro / len(flows)
    return ImportanceMask(cfg.alpha * e + cfg.beta)


# =========================
# REVERSÃO
# =========================
def softmax_splat_reverse(
    forward_flow: FlowField2D,
    Z,
    eps: float = REVERSAL_CONFIG["eps"],
) -> ReversedFlow:
    """
    Reverte f_{t_j→t} em f_{t→t_j} por softmax splatting.

    Pixels com massa espalhada ≤ eps são buracos: fluxo 0 e marcados na máscara.

    Args:
        forward_flow: fluxo da referência para o alvo
        Z: ImportanceMask ou mapa H×W
        eps: limiar do denominador

    Returns:
        ReversedFlow(flow, holes)
    """
    z = Z.Z if isinstance(Z, ImportanceMask) else ImportanceMask(Z).Z
    if z.shape != (forward_flow.height, forward_flow.width):
        raise ShapeMismatch(f"Z {z.shape} ≠ fluxo {forward_flow.height}×{forward_flow.width}")

    peso = np.exp(z - z.max())
    numerador = summation_splat(-forward_flow.as_array() * peso, forward_flow)
    denominador = summation_splat(peso, forward_flow)

    holes = denominador <= eps
    saida = np.zeros_like(numerador)
    np.divide(numerador, denominador, out=saida, where=~holes)
    return ReversedFlow(FlowField2D(saida[0], saida[1]), holes)


def dilate_fill_holes(
    flow: FlowField2D,
    holes,
    max_iters: int = REVERSAL_CONFIG["fill_max_iters"],
) -> ReversedFlow:
    """
    Preenche buracos com a média dos vizinhos-4 já válidos, em camadas.

    Returns:
        ReversedFlow com o fluxo preenchido e os buracos que restaram
        (só sobram se o quadro inteiro for buraco ou max_iters esgotar)
    """
    restantes = np.asarray(holes, dtype=bool).copy()
    if restantes.shape != (flow.height, flow.width):
        raise ShapeMismatch(f"máscara {restantes.shape} ≠ fluxo {flow.height}×{flow.width}")

    cruz = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.float64)
    campo = np.where(restantes, 0.0, flow.as_array())
    for _ in range(max_iters):
        if not restantes.any():
            break
        validos = (~restantes).astype(np.float64)
        contagem = ndimage.convolve(validos, cruz, mode="constant", cval=0.0)
        novos = restantes & (contagem > 0)
        if not novos.any():
            break
        for c in range(2):
            soma = ndimage.convolve(campo[c] * validos, cruz, mode="constant", cval=0.0)
            campo[c] = np.where(novos, soma / np.maximum(contagem, 1.0), campo[c])
        restantes &= ~novos
    return ReversedFlow(FlowField2D(campo[0], campo[1]), restantes)
