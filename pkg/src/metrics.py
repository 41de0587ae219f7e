"""
Métricas de qualidade e proxies de taxa.

- psnr / ms_ssim para dados em [0, 1]
- residual_entropy_proxy: entropia do histograma do resíduo quantizado
- flow_entropy_proxy: bits dos voxel flows quantizados (1/16 px)
- total_variation: suavidade de campos de fluxo
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.signal import convolve2d

from config import METRICS_CONFIG, RD_CONFIG
from errors import InvalidConfig, ShapeMismatch, TooSmall
from tensor_io import FlowField2D, Frame, VoxelFlowStack


def _dados(x) -> np.ndarray:
    return x.data if isinstance(x, Frame) else np.asarray(x, dtype=np.float64)


def _mesma_forma(a, b) -> Tuple[np.ndarray, np.ndarray]:
    x, y = _dados(a), _dados(b)
    if x.shape != y.shape:
        raise ShapeMismatch(f"{x.shape} ≠ {y.shape}")
    return x, y


# =========================
# PSNR
# =========================
def psnr_from_mse(valor: float) -> float:
    teto = METRICS_CONFIG["psnr_cap"]
    if valor == 0.0:
        return teto
    return float(min(teto, -10.0 * np.log10(valor)))


def psnr(a, b) -> float:
    """−10·log10(MSE), limitado a 99 dB (quadros idênticos → 99)."""
    return psnr_from_mse(mse(a, b))


def mse(a, b) -> float:
    x, y = _mesma_forma(a, b)
    return float(np.mean((x - y) ** 2))


# =========================
# MS-SSIM
# =========================
@lru_cache(maxsize=4)
def _janela_gaussiana(tamanho: int, sigma: float) -> np.ndarray:
    eixo = np.arange(tamanho, dtype=np.float64) - (tamanho - 1) / 2.0
    g = np.exp(-(eixo ** 2) / (2.0 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ms_ssim_scales(height: int, width: int) -> int:
    """Maior S ≤ 5 com min(H, W) ≥ janela·2^(S−1); 0 se nem uma escala cabe."""
    janela = METRICS_CONFIG["ms_ssim_window"]
    menor = min(height, width)
    escalas = 0
    for s in range(1, len(METRICS_CONFIG["ms_ssim_weights"]) + 1):
        if menor >= janela * 2 ** (s - 1):
            escalas = s
    return escalas


def _ssim_cs(x: np.ndarray, y: np.ndarray, janela: np.ndarray) -> Tuple[float, float]:
    c1 = (METRICS_CONFIG["k1"] * METRICS_CONFIG["data_range"]) ** 2
    c2 = (METRICS_CONFIG["k2"] * METRICS_CONFIG["data_range"]) ** 2
    filtro = lambda img: convolve2d(img, janela, mode="valid")  # noqa: E731

    mu_x, mu_y = filtro(x), filtro(y)
    var_x = filtro(x * x) - mu_x ** 2
    var_y = filtro(y * y) - mu_y ** 2
    cov = filtro(x * y) - mu_x * mu_y

    cs_map = (2.0 * cov + c2) / (var_x + var_y + c2)
    lum = (2.0 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1)
    return float(np.mean(lum * cs_map)), float(np.mean(cs_map))


def _reduzir(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def _ms_ssim_canal(x: np.ndarray, y: np.ndarray, pesos: np.ndarray) -> float:
    janela = _janela_gaussiana(METRICS_CONFIG["ms_ssim_window"], METRICS_CONFIG["ms_ssim_sigma"])
    piso = METRICS_CONFIG["ms_ssim_floor"]
    valor = 1.0
    for j, peso in enumerate(pesos):
        ssim, cs = _ssim_cs(x, y, janela)
        if j == len(pesos) - 1:
            valor *= max(ssim, piso) ** peso
        else:
            valor *= max(cs, piso) ** peso
            x, y = _reduzir(x), _reduzir(y)
    return valor


def ms_ssim(a, b) -> float:
    """
    MS-SSIM multiescala (janela gaussiana 11×11, σ = 1.5), média sobre canais.

    Com menos de 5 escalas possíveis os pesos são renormalizados. Termos
    cs/ssim negativos (entradas anticorrelacionadas) são levados ao piso
    ms_ssim_floor, então o resultado fica sempre em (0, 1].

    Raises:
        ShapeMismatch: formas diferentes
        TooSmall: min(H, W) < 11
    """
    x, y = _mesma_forma(a, b)
    if x.ndim == 2:
        x, y = x[None], y[None]
    escalas = ms_ssim_scales(x.shape[-2], x.shape[-1])
    if escalas == 0:
        raise TooSmall(f"quadro {x.shape[-2]}×{x.shape[-1]} menor que a janela de {METRICS_CONFIG['ms_ssim_window']}")
    pesos = np.asarray(METRICS_CONFIG["ms_ssim_weights"][:escalas], dtype=np.float64)
    pesos = pesos / pesos.sum()
    return float(np.mean([_ms_ssim_canal(x[c], y[c], pesos) for c in range(x.shape[0])]))


# =========================
# PROXIES DE TAXA
# =========================
def _entropia(simbolos: np.ndarray) -> float:
    _, contagens = np.unique(simbolos, return_counts=True)
    p = contagens / contagens.sum()
    return float(-np.sum(p * np.log2(p))) + 0.0


def _quantizar(valores: np.ndarray, passo: float) -> np.ndarray:
    return np.floor(np.asarray(valores, dtype=np.float64) / passo + 0.5).astype(np.int64)


def residual_entropy_proxy(residual, quant_step: float = RD_CONFIG["quant_step"]) -> float:
    """
    Entropia empírica (bits/pixel) dos bins q = round(r / quant_step),
    calculada por canal sobre o quadro inteiro e promediada nos canais.
    """
    if not quant_step > 0:
        raise InvalidConfig(f"quant_step deve ser > 0, recebeu {quant_step}")
    r = _dados(residual)
    if r.ndim == 2:
        r = r[None]
    return float(np.mean([_entropia(_quantizar(r[c], quant_step)) for c in range(r.shape[0])]))


def flow_entropy_proxy(
    flows: VoxelFlowStack,
    predicted: Optional[FlowField2D] = None,
    step: float = RD_CONFIG["flow_quant_step"],
) -> float:
    """
    Bits/pixel para descrever os 4M canais dos voxel flows quantizados a `step`.

    Com fluxo predito (GFP), g_x e g_y são codificados como diferença em
    relação a ele.
    """
    if not step > 0:
        raise InvalidConfig(f"step deve ser > 0, recebeu {step}")
    dados = flows.data.copy()
    if predicted is not None:
        dados[:, 0] -= predicted.dx
        dados[:, 1] -= predicted.dy
    return float(sum(_entropia(_quantizar(canal, step)) for canal in dados.reshape(-1, flows.height, flows.width)))


def total_variation(field) -> float:
    """Média, sobre os mapas H×W iniciais, de (Σ|∂x| + Σ|∂y|) / (H·W)."""
    if isinstance(field, FlowField2D):
        f = field.as_array()
    elif isinstance(field, VoxelFlowStack):
        f = field.data[:, :2]
    else:
        f = np.asarray(field, dtype=np.float64)
    f = f.reshape(-1, f.shape[-2], f.shape[-1])
    tv = np.abs(np.diff(f, axis=2)).sum(axis=(1, 2)) + np.abs(np.diff(f, axis=1)).sum(axis=(1, 2))
    return float(np.mean(tv) / (f.shape[1] * f.shape[2]))
