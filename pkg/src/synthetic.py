"""
Corpora sintéticos com movimento conhecido.

- static: quadros idênticos
- translation: deslocamento inteiro constante por quadro
- acceleration: p(t) = v·t + ½·a·t², com fluxos verdadeiros exatos
- occlusion: quadrado texturizado em movimento sobre fundo estático

Todos os quadros são projetados na grade de 255 níveis (idempotentes sob PPM).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from config import GOP_CONFIG, SYNTHETIC_CONFIG, log
from data_loader import frame_filename
from errors import InvalidConfig, IoError
from tensor_io import FlowField2D, Frame, quantize_frame, write_flow, write_frame_ppm


@dataclass
class SyntheticSequence:
    name: str
    frames: List[Frame]
    # posição global p(t) (x, y) quando o movimento é uniforme
    positions: Optional[List[Tuple[float, float]]] = None
    params: Dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frames)

    def as_dict(self) -> Dict[int, Frame]:
        return dict(enumerate(self.frames))

    def true_flow(self, a: int, b: int) -> FlowField2D:
        """Fluxo verdadeiro f_{a→b} (uniforme) para sequências de movimento global."""
        if self.positions is None:
            raise InvalidConfig(f"sequência {self.name!r} não tem movimento global conhecido")
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        h, w = self.frames[0].height, self.frames[0].width
        return FlowField2D(np.full((h, w), xb - xa), np.full((h, w), yb - ya))


def texture(rng: np.random.Generator, height: int, width: int, channels: int = 3,
            sigma: float = SYNTHETIC_CONFIG["texture_sigma"]) -> np.ndarray:
    """Ruído uniforme suavizado por gaussiana e reescalado para [0.1, 0.9]."""
    ruido = rng.random((channels, height, width))
    suave = np.stack([ndimage.gaussian_filter(ruido[c], sigma, mode="reflect") for c in range(channels)])
    lo, hi = suave.min(), suave.max()
    return 0.1 + 0.8 * (suave - lo) / max(hi - lo, 1e-12)


def _amostrar_canvas(canvas: np.ndarray, size: int, margem: int, px: float, py: float) -> np.ndarray:
    """Janela size×size do canvas com conteúdo deslocado de (px, py)."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    coords = [ys + margem - py, xs + margem - px]
    return np.stack([
        ndimage.map_coordinates(canvas[c], coords, order=1, mode="nearest") for c in range(canvas.shape[0])
    ])


def static_sequence(length: int = SYNTHETIC_CONFIG["length"], size: int = SYNTHETIC_CONFIG["size"],
                    seed: int = 0) -> SyntheticSequence:
    rng = np.random.default_rng(seed)
    quadro = quantize_frame(Frame(texture(rng, size, size)))
    return SyntheticSequence("static", [quadro] * length, [(0.0, 0.0)] * length, {"seed": seed})


def acceleration_sequence(
    length: int = 6,
    size: int = SYNTHETIC_CONFIG["size"],
    velocity: Tuple[float, float] = (0.5, 0.0),
    acceleration: Tuple[float, float] = (1.0, 0.0),
    seed: int = 0,
    margin: int = SYNTHETIC_CONFIG["canvas_margin"],
) -> SyntheticSequence:
    """
    Conteúdo global em p(t) = v·t + ½·a·t².

    Com os padrões, p(t) = t(t+1)/2 é inteiro e os fluxos verdadeiros
    entre quadros são exatos.
    """
    posicoes = [
        (velocity[0] * t + 0.5 * acceleration[0] * t * t, velocity[1] * t + 0.5 * acceleration[1] * t * t)
        for t in range(length)
    ]
    alcance = max(max(abs(px), abs(py)) for px, py in posicoes)
    if alcance > margin:
        raise InvalidConfig(f"deslocamento máximo {alcance:.1f} excede a margem do canvas ({margin})")

    rng = np.random.default_rng(seed)
    canvas = texture(rng, size + 2 * margin, size + 2 * margin)
    quadros = [quantize_frame(Frame(_amostrar_canvas(canvas, size, margin, px, py))) for px, py in posicoes]
    return SyntheticSequence(
        "acceleration", quadros, posicoes,
        {"seed": seed, "vx": velocity[0], "vy": velocity[1], "ax": acceleration[0], "ay": acceleration[1]},
    )


def translation_sequence(length: int = SYNTHETIC_CONFIG["length"], size: int = SYNTHETIC_CONFIG["size"],
                         velocity: Tuple[int, int] = (2, 0), seed: int = 0) -> SyntheticSequence:
    seq = acceleration_sequence(length, size, velocity=velocity, acceleration=(0.0, 0.0), seed=seed,
                                margin=max(SYNTHETIC_CONFIG["canvas_margin"], abs(velocity[0]) * length,
                                           abs(velocity[1]) * length))
    seq.name = "translation"
    return seq


def occlusion_sequence(
    length: int = SYNTHETIC_CONFIG["length"],
    size: int = SYNTHETIC_CONFIG["size"],
    square: int = SYNTHETIC_CONFIG["square"],
    velocity: int = SYNTHETIC_CONFIG["velocity"],
    seed: int = 0,
) -> SyntheticSequence:
    """Quadrado texturizado movendo-se `velocity` px/quadro na horizontal sobre fundo estático."""
    if square >= size or square + velocity * (length - 1) > size:
        raise InvalidConfig(f"quadrado {square} com velocidade {velocity} não cabe em {size}px por {length} quadros")
    rng = np.random.default_rng(seed)
    fundo = texture(rng, size, size)
    frente = texture(rng, square, square, sigma=1.0)
    x0 = int(rng.integers(0, size - square - velocity * (length - 1) + 1))
    y0 = int(rng.integers(0, size - square + 1))

    quadros = []
    for t in range(length):
        dados = fundo.copy()
        x = x0 + velocity * t
        dados[:, y0:y0 + square, x:x + square] = frente
        quadros.append(quantize_frame(Frame(dados)))
    return SyntheticSequence("occlusion", quadros, None,
                             {"seed": seed, "square": square, "velocity": velocity, "x0": x0, "y0": y0})


CORPORA: Dict[str, Callable[..., SyntheticSequence]] = {
    "static": static_sequence,
    "translation": translation_sequence,
    "acceleration": acceleration_sequence,
    "occlusion": occlusion_sequence,
}


def make_corpus(kind: str, count: int, seed: int = 0, **kwargs) -> List[SyntheticSequence]:
    """`count` sequências do tipo `kind`, sementes seed, seed+1, …"""
    if kind not in CORPORA:
        raise InvalidConfig(f"corpus {kind!r} desconhecido ({', '.join(CORPORA)})")
    return [CORPORA[kind](seed=seed + i, **kwargs) for i in range(count)]


def write_sequence(seq: SyntheticSequence, out_dir, max_flow_distance: int = GOP_CONFIG["intra_period"]) -> Path:
    """
    Grava frame_XXX.ppm e, com movimento global conhecido, os fluxos
    verdadeiros flow_aaa_bbb.vten para |a − b| ≤ max_flow_distance.
    """
    destino = Path(out_dir)
    try:
        destino.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"não foi possível criar {destino}: {e}") from e

    for t, quadro in enumerate(seq.frames):
        write_frame_ppm(quadro, destino / frame_filename(t))
    n_fluxos = 0
    if seq.positions is not None:
        for a in range(len(seq)):
            for b in range(len(seq)):
                if a != b and abs(a - b) <= max_flow_distance:
                    write_flow(seq.true_flow(a, b), destino / f"flow_{a:03d}_{b:03d}.vten")
                    n_fluxos += 1
    log(f"✓ Sequência '{seq.name}' gravada em {destino}: {len(seq)} quadros, {n_fluxos} fluxos")
    return destino
