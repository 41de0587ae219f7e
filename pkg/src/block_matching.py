"""
Estimação de fluxo entre quadros decodificados.

O estimador é plugável (protocolo FlowEstimator): busca exaustiva de blocos
por SAD ou fluxos pré-computados em arquivos .vten.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Protocol, Tuple

import numpy as np

from config import BLOCK_MATCHING_CONFIG
from errors import InvalidConfig, MissingFrame, ShapeMismatch
from tensor_io import FlowField2D, Frame, read_flow


def _candidatos(raio: int) -> List[Tuple[int, int]]:
    """Deslocamentos inteiros em ordem de preferência: |d|² crescente, depois (dx, dy)."""
    pares = [(dx, dy) for dx in range(-raio, raio + 1) for dy in range(-raio, raio + 1)]
    return sorted(pares, key=lambda p: (p[0] ** 2 + p[1] ** 2, p[0], p[1]))


def _sad_por_bloco(diff: np.ndarray, inicios_y: np.ndarray, inicios_x: np.ndarray) -> np.ndarray:
    return np.add.reduceat(np.add.reduceat(diff, inicios_y, axis=0), inicios_x, axis=1)


def estimate_flow_block_matching(
    src: Frame,
    dst: Frame,
    block: int = BLOCK_MATCHING_CONFIG["block"],
    search_radius: int = BLOCK_MATCHING_CONFIG["radius"],
) -> FlowField2D:
    """
    Fluxo src → dst por busca exaustiva de blocos não sobrepostos.

    Para cada bloco de src, escolhe o deslocamento inteiro (dx, dy) que
    minimiza Σ|src(x, y) − dst(x+dx, y+dy)|. Candidatos que saem do quadro
    são descartados. Empates: menor magnitude, depois lexicográfico.

    Args:
        src, dst: quadros de mesma forma
        block: lado do bloco (blocos de borda podem ser menores)
        search_radius: raio da janela de busca

    Returns:
        FlowField2D constante por bloco

    Raises:
        ShapeMismatch: quadros de formas diferentes
        InvalidConfig: block < 1 ou raio < 0
    """
    if src.shape != dst.shape:
        raise ShapeMismatch(f"src {src.shape} ≠ dst {dst.shape}")
    if block < 1 or search_radius < 0:
        raise InvalidConfig(f"block={block} e radius={search_radius} exigem block ≥ 1, radius ≥ 0")

    _, h, w = src.shape
    r = int(search_radius)
    alvo = np.pad(dst.data, ((0, 0), (r, r), (r, r)), mode="constant", constant_values=np.nan)
    inicios_y, inicios_x = np.arange(0, h, block), np.arange(0, w, block)

    melhor = np.full((inicios_y.size, inicios_x.size), np.inf)
    fx, fy = np.zeros_like(melhor), np.zeros_like(melhor)
    for dx, dy in _candidatos(r):
        deslocado = alvo[:, r + dy:r + dy + h, r + dx:r + dx + w]
        sad = _sad_por_bloco(np.abs(src.data - deslocado).sum(axis=0), inicios_y, inicios_x)
        melhora = sad < melhor  # NaN (fora do quadro) nunca melhora
        melhor = np.where(melhora, sad, melhor)
        fx[melhora], fy[melhora] = dx, dy

    expandir = lambda m: np.repeat(np.repeat(m, block, axis=0), block, axis=1)[:h, :w]  # noqa: E731
    return FlowField2D(expandir(fx), expandir(fy))


# =========================
# ESTIMADORES PLUGÁVEIS
# =========================
class FlowEstimator(Protocol):
    """Fornece f_{a→b} entre dois quadros (índices de exibição a, b)."""

    def estimate(self, src: Frame, dst: Frame, src_index: int, dst_index: int) -> FlowField2D:
        ...


class BlockMatchingEstimator:
    def __init__(self, block: int = BLOCK_MATCHING_CONFIG["block"], radius: int = BLOCK_MATCHING_CONFIG["radius"]):
        self.block = block
        self.radius = radius

    def estimate(self, src: Frame, dst: Frame, src_index: int, dst_index: int) -> FlowField2D:
        return estimate_flow_block_matching(src, dst, self.block, self.radius)

    def __repr__(self) -> str:
        return f"BlockMatchingEstimator(block={self.block}, radius={self.radius})"


class FileFlowEstimator:
    """Lê `flow_{a:03d}_{b:03d}.vten` (2×H×W, f_{a→b}) de um diretório."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def path_for(self, src_index: int, dst_index: int) -> Path:
        return self.directory / f"flow_{src_index:03d}_{dst_index:03d}.vten"

    def estimate(self, src: Frame, dst: Frame, src_index: int, dst_index: int) -> FlowField2D:
        caminho = self.path_for(src_index, dst_index)
        if not caminho.exists():
            raise MissingFrame(f"fluxo {src_index}→{dst_index} ausente: {caminho}")
        fluxo = read_flow(caminho)
        if (fluxo.height, fluxo.width) != (src.height, src.width):
            raise ShapeMismatch(f"{caminho.name}: {fluxo.height}×{fluxo.width} ≠ quadro {src.height}×{src.width}")
        return fluxo

    def __repr__(self) -> str:
        return f"FileFlowEstimator({str(self.directory)!r})"
