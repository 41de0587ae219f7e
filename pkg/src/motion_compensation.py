"""
Compensação de movimento por múltiplos voxel flows.

Cada pixel do quadro predito é a soma ponderada (pesos softmax sobre os
logits g_w) de M amostras trilineares do volume de referências, tomadas em
(x + g_x, y + g_y, g_z). g_z é coordenada absoluta de profundidade.

Bordas: clamp-to-edge nos três eixos. Nos pontos de dobra (coordenada
inteira) a derivada segue a convenção da derivada à direita.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import Field, field_validator

from config import WARP_CONFIG, ConfigModel
from errors import EmptyStack, InvalidConfig, ShapeMismatch
from tensor_io import FlowField2D, Frame, FrameVolume, VoxelFlowStack


class WarpConfig(ConfigModel):
    """Opções do warp. Apenas clamp é suportado."""

    boundary_mode: str = Field(default=WARP_CONFIG["boundary_mode"])
    n_jobs: int = Field(default=WARP_CONFIG["n_jobs"], ge=1, description="Faixas de linhas processadas em paralelo")

    @field_validator("boundary_mode")
    @classmethod
    def _somente_clamp(cls, v: str) -> str:
        if v != "clamp":
            raise InvalidConfig(f"boundary_mode {v!r} não suportado (apenas 'clamp')")
        return v


@dataclass(frozen=True)
class WarpGradients:
    """∂L/∂g por campo, cada um (M, H, W), somado sobre os canais."""

    d_gx: np.ndarray
    d_gy: np.ndarray
    d_gz: np.ndarray
    d_gw_logit: np.ndarray

    def as_stack_array(self) -> np.ndarray:
        """Gradientes no layout (M, 4, H, W) do VoxelFlowStack."""
        return np.stack([self.d_gx, self.d_gy, self.d_gz, self.d_gw_logit], axis=1)


# =========================
# SOFTMAX
# =========================
def softmax_weights(logits) -> np.ndarray:
    """
    Normaliza logits (M, H, W) em pesos por pixel com subtração do máximo.

    Raises:
        EmptyStack: M = 0
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim < 1 or z.shape[0] == 0:
        raise EmptyStack("softmax_weights exige M ≥ 1")
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


# =========================
# AMOSTRAGEM TRILINEAR
# =========================
class _Eixo(NamedTuple):
    i0: np.ndarray
    i1: np.ndarray
    frac: np.ndarray
    dentro: np.ndarray  # onde d(clamp)/d(coord) = 1


def _eixo(coord: np.ndarray, tamanho: int) -> _Eixo:
    c = np.clip(coord, 0.0, tamanho - 1)
    i0 = np.floor(c).astype(np.intp)
    i1 = np.minimum(i0 + 1, tamanho - 1)
    return _Eixo(i0, i1, c - i0, (coord >= 0) & (coord < tamanho - 1))


def _amostrar(vol_dhwc: np.ndarray, x, y, z, com_derivadas: bool = False):
    """
    Amostra trilinear vetorizada.

    Args:
        vol_dhwc: volume (D, H, W, C)
        x, y, z: coordenadas de mesma forma S

    Returns:
        valores S+(C,) e, se pedido, (∂/∂x, ∂/∂y, ∂/∂z) de mesma forma
    """
    d, h, w, _ = vol_dhwc.shape
    ex, ey, ez = _eixo(np.asarray(x, dtype=np.float64), w), _eixo(np.asarray(y, dtype=np.float64), h), \
        _eixo(np.asarray(z, dtype=np.float64), d)

    valor = np.zeros(ex.frac.shape + (vol_dhwc.shape[3],))
    if com_derivadas:
        gx, gy, gz = np.zeros_like(valor), np.zeros_like(valor), np.zeros_like(valor)

    # ordem fixa dos cantos: z0y0x0, z0y0x1, z0y1x0, z0y1x1, z1...
    for iz, wz, sz in ((ez.i0, 1.0 - ez.frac, -1.0), (ez.i1, ez.frac, 1.0)):
        for iy, wy, sy in ((ey.i0, 1.0 - ey.frac, -1.0), (ey.i1, ey.frac, 1.0)):
            for ix, wx, sx in ((ex.i0, 1.0 - ex.frac, -1.0), (ex.i1, ex.frac, 1.0)):
                v = vol_dhwc[iz, iy, ix]
                valor += (wz * wy * wx)[..., None] * v
                if com_derivadas:
                    gx += (sx * wz * wy)[..., None] * v
                    gy += (sy * wz * wx)[..., None] * v
                    gz += (sz * wy * wx)[..., None] * v

    if not com_derivadas:
        return valor
    gx *= ex.dentro[..., None]
    gy *= ey.dentro[..., None]
    gz *= ez.dentro[..., None]
    return valor, (gx, gy, gz)


def trilinear_sample(volume: FrameVolume, x: float, y: float, z: float, channel: int = 0) -> float:
    """Amostra o canal `channel` do volume em (x, y, z) com clamp nos três eixos."""
    if not 0 <= channel < volume.channels:
        raise ShapeMismatch(f"canal {channel} fora de [0, {volume.channels})")
    vol = np.moveaxis(volume.data, 1, -1)
    return float(_amostrar(vol, np.array(x), np.array(y), np.array(z))[channel])


# =========================
# WARP PONDERADO
# =========================
def _checar_formas(volume: FrameVolume, flows: VoxelFlowStack) -> None:
    if (flows.height, flows.width) != (volume.height, volume.width):
        raise ShapeMismatch(
            f"voxel flows {flows.height}×{flows.width} ≠ volume {volume.height}×{volume.width}"
        )


def _faixas(altura: int, n_jobs: int) -> List[slice]:
    """Particiona as linhas de saída em faixas contíguas (independente de threads)."""
    n = max(1, min(n_jobs, altura))
    limites = np.linspace(0, altura, n + 1).astype(int)
    return [slice(a, b) for a, b in zip(limites[:-1], limites[1:]) if b > a]


def _grade(linhas: slice, largura: int) -> Tuple[np.ndarray, np.ndarray]:
    ys = np.arange(linhas.start, linhas.stop, dtype=np.float64)
    xx, yy = np.meshgrid(np.arange(largura, dtype=np.float64), ys)
    return xx, yy


def _warp_faixa(vol: np.ndarray, data: np.ndarray, pesos: np.ndarray, linhas: slice) -> np.ndarray:
    xx, yy = _grade(linhas, vol.shape[2])
    saida = np.zeros((linhas.stop - linhas.start, vol.shape[2], vol.shape[3]))
    for i in range(data.shape[0]):
        amostra = _amostrar(vol, xx + data[i, 0, linhas], yy + data[i, 1, linhas], data[i, 2, linhas])
        saida += pesos[i, linhas][..., None] * amostra
    return saida


def weighted_voxel_warp(volume: FrameVolume, flows: VoxelFlowStack, cfg: WarpConfig | None = None) -> Frame:
    """
    Warp trilinear ponderado por M voxel flows.

    saída[c, y, x] = Σ_i softmax(g_w)_i · X[g_z^i, y + g_y^i, x + g_x^i, c]

    Args:
        volume: referências empilhadas (D, C, H, W)
        flows: pilha (M, 4, H, W) com logits não normalizados em g_w
        cfg: WarpConfig (n_jobs > 1 divide as linhas em faixas; resultado bit a bit idêntico)

    Returns:
        Frame (C, H, W)

    Raises:
        ShapeMismatch: H×W dos fluxos difere do volume
    """
    cfg = cfg or WarpConfig()
    _checar_formas(volume, flows)
    vol = np.moveaxis(volume.data, 1, -1)
    # softmax antes do particionamento: pesos idênticos em qualquer partição
    pesos = softmax_weights(flows.gw)

    faixas = _faixas(volume.height, cfg.n_jobs)
    if len(faixas) == 1:
        partes = [_warp_faixa(vol, flows.data, pesos, faixas[0])]
    else:
        partes = Parallel(n_jobs=len(faixas), prefer="threads")(
            delayed(_warp_faixa)(vol, flows.data, pesos, f) for f in faixas
        )
    return Frame(np.moveaxis(np.concatenate(partes, axis=0), -1, 0))


def weighted_voxel_warp_backward(
    volume: FrameVolume,
    flows: VoxelFlowStack,
    cfg: WarpConfig | None,
    grad_output,
) -> WarpGradients:
    """
    Gradientes analíticos do warp ponderado.

    Com a_i = Σ_c G_c · s_i,c (G = ∂L/∂saída, s_i a amostra do fluxo i):
        ∂L/∂g_x^i = w_i · Σ_c G_c · ∂s_i,c/∂x   (idem y, z)
        ∂L/∂g_w^i = w_i · (a_i − Σ_j w_j a_j)

    Raises:
        ShapeMismatch: formas incompatíveis
    """
    _checar_formas(volume, flows)
    g = grad_output.data if isinstance(grad_output, Frame) else np.asarray(grad_output, dtype=np.float64)
    if g.shape != (volume.channels, volume.height, volume.width):
        raise ShapeMismatch(f"grad_output {g.shape} ≠ saída {(volume.channels, volume.height, volume.width)}")

    vol = np.moveaxis(volume.data, 1, -1)
    g_hwc = np.moveaxis(g, 0, -1)
    pesos = softmax_weights(flows.gw)
    xx, yy = _grade(slice(0, volume.height), volume.width)

    m = flows.M
    d_gx = np.zeros((m, volume.height, volume.width))
    d_gy, d_gz, a = np.zeros_like(d_gx), np.zeros_like(d_gx), np.zeros_like(d_gx)
    for i in range(m):
        s, (sx, sy, sz) = _amostrar(
            vol, xx + flows.gx[i], yy + flows.gy[i], flows.gz[i], com_derivadas=True
        )
        a[i] = (g_hwc * s).sum(axis=-1)
        d_gx[i] = pesos[i] * (g_hwc * sx).sum(axis=-1)
        d_gy[i] = pesos[i] * (g_hwc * sy).sum(axis=-1)
        d_gz[i] = pesos[i] * (g_hwc * sz).sum(axis=-1)

    media = (pesos * a).sum(axis=0, keepdims=True)
    return WarpGradients(d_gx, d_gy, d_gz, pesos * (a - media))


def backward_warp_bilinear(frame: Frame, flow: FlowField2D) -> Frame:
    """
    Backward warping bilinear: saída[y, x] = frame amostrado em (x + dx, y + dy).

    Equivale ao warp ponderado com D = 1, M = 1 e g_z = 0.

    Raises:
        ShapeMismatch: fluxo e quadro com H×W diferentes
    """
    if (flow.height, flow.width) != (frame.height, frame.width):
        raise ShapeMismatch(f"fluxo {flow.height}×{flow.width} ≠ quadro {frame.height}×{frame.width}")
    vol = np.moveaxis(frame.data, 0, -1)[None]
    xx, yy = _grade(slice(0, frame.height), frame.width)
    amostra = _amostrar(vol, xx + flow.dx, yy + flow.dy, np.zeros_like(xx))
    return Frame(np.moveaxis(amostra, -1, 0))
