"""
Ajuste direto de voxel flows por descida de gradiente (Adam).

Minimiza a MSE entre o warp ponderado e o quadro alvo usando os gradientes
analíticos de motion_compensation. É uma busca do lado do codificador: os
fluxos resultantes medem a capacidade da família de warps.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import Field

from config import FIT_CONFIG, ConfigModel
from errors import InvalidConfig, ShapeMismatch
from motion_compensation import WarpConfig, weighted_voxel_warp, weighted_voxel_warp_backward
from tensor_io import FlowField2D, Frame, FrameVolume, VoxelFlowStack


class FitConfig(ConfigModel):
    iters: int = Field(default=FIT_CONFIG["iters"], ge=0)
    lr_spatial: float = Field(default=FIT_CONFIG["lr_spatial"], gt=0)
    lr_temporal: float = Field(default=FIT_CONFIG["lr_temporal"], gt=0)
    lr_logit: float = Field(default=FIT_CONFIG["lr_logit"], gt=0)
    decay: float = Field(default=FIT_CONFIG["decay"], gt=0, le=1)
    beta1: float = Field(default=FIT_CONFIG["beta1"], ge=0, lt=1)
    beta2: float = Field(default=FIT_CONFIG["beta2"], ge=0, lt=1)
    adam_eps: float = Field(default=FIT_CONFIG["adam_eps"], gt=0)
    perturbation: float = Field(default=FIT_CONFIG["perturbation"], ge=0)
    perturbation_z: float = Field(default=FIT_CONFIG["perturbation_z"], ge=0)
    seed: int = FIT_CONFIG["seed"]


def expand_stack(stack: VoxelFlowStack, M: int) -> VoxelFlowStack:
    """
    Replica uma pilha em M posições (slot i ← fluxo i mod M_prev).

    Os logits de cada fluxo replicado n vezes recebem −log(n), de modo que a
    pilha expandida reproduz a mesma predição.
    """
    if M < stack.M:
        raise ShapeMismatch(f"expand_stack só expande: M={M} < {stack.M}")
    origem = np.arange(M) % stack.M
    contagem = np.bincount(origem, minlength=stack.M)
    dados = stack.data[origem].copy()
    dados[:, 3] -= np.log(contagem[origem])[:, None, None]
    return VoxelFlowStack(dados)


def _pilha_inicial(volume: FrameVolume, M: int, init: Optional[FlowField2D], init_depth: Optional[float]) -> np.ndarray:
    h, w = volume.height, volume.width
    profundidade = float(volume.depth - 1 if init_depth is None else init_depth)
    base = np.zeros((4, h, w))
    if init is not None:
        base[0], base[1] = init.dx, init.dy
    base[2] = np.clip(profundidade, 0.0, volume.depth - 1)
    return np.repeat(base[None], M, axis=0)


def _mse(saida: Frame, alvo: Frame) -> float:
    return float(np.mean((saida.data - alvo.data) ** 2))


def fit_voxel_flows(
    volume: FrameVolume,
    target: Frame,
    M: int,
    init: Optional[FlowField2D] = None,
    cfg: Optional[FitConfig] = None,
    init_depth: Optional[float] = None,
    warm_start: Optional[VoxelFlowStack] = None,
    warp_cfg: Optional[WarpConfig] = None,
) -> VoxelFlowStack:
    """
    Ajusta M voxel flows ao alvo.

    Inicialização: g_x, g_y de `init` (ou zero), g_z = init_depth (padrão:
    última fatia), logits zero. Com `warm_start`, a pilha anterior é
    expandida por expand_stack. A inicialização sem perturbação conta como
    iterado 0; os fluxos novos (índice ≥ 1, ou além da pilha anterior)
    recebem perturbações gaussianas semeadas antes da descida.

    Args:
        volume: referências empilhadas
        target: quadro a predizer
        M: número de fluxos
        init: fluxo 2D inicial (ex.: GFP)
        cfg: hiperparâmetros do Adam
        init_depth: profundidade inicial de g_z
        warm_start: pilha já ajustada com M' ≤ M fluxos

    Returns:
        iterado com menor MSE de predição

    Raises:
        ShapeMismatch: alvo, init ou warm_start incompatíveis com o volume
        InvalidConfig: M < 1
    """
    cfg = cfg or FitConfig()
    warp_cfg = warp_cfg or WarpConfig()
    if M < 1:
        raise InvalidConfig(f"M deve ser ≥ 1, recebeu {M}")
    if target.shape != (volume.channels, volume.height, volume.width):
        raise ShapeMismatch(f"alvo {target.shape} incompatível com volume {volume.data.shape}")
    if init is not None and (init.height, init.width) != (volume.height, volume.width):
        raise ShapeMismatch(f"init {init.height}×{init.width} ≠ volume {volume.height}×{volume.width}")

    if warm_start is not None:
        if (warm_start.height, warm_start.width) != (volume.height, volume.width):
            raise ShapeMismatch("warm_start com H×W diferente do volume")
        inicial = expand_stack(warm_start, M).data
        primeiro_novo = warm_start.M
    else:
        inicial = _pilha_inicial(volume, M, init, init_depth)
        primeiro_novo = 1

    melhor = inicial.copy()
    melhor_mse = _mse(weighted_voxel_warp(volume, VoxelFlowStack(melhor), warp_cfg), target)

    params = inicial.copy()
    novos = M - primeiro_novo
    if novos > 0:
        rng = np.random.default_rng(cfg.seed)
        forma = (novos, 2, volume.height, volume.width)
        params[primeiro_novo:, :2] += rng.normal(0.0, cfg.perturbation, forma)
        params[primeiro_novo:, 2] += rng.normal(0.0, cfg.perturbation_z, forma[:1] + forma[2:])
        params[:, 2] = np.clip(params[:, 2], 0.0, volume.depth - 1)

    taxas = np.array([cfg.lr_spatial, cfg.lr_spatial, cfg.lr_temporal, cfg.lr_logit])[None, :, None, None]
    m1 = np.zeros_like(params)
    m2 = np.zeros_like(params)
    for it in range(cfg.iters + 1):
        pilha = VoxelFlowStack(params)
        saida = weighted_voxel_warp(volume, pilha, warp_cfg)
        erro = _mse(saida, target)
        if erro < melhor_mse:
            melhor, melhor_mse = params.copy(), erro
        if it == cfg.iters:
            break

        g_saida = 2.0 * (saida.data - target.data) / volume.channels
        grad = weighted_voxel_warp_backward(volume, pilha, warp_cfg, g_saida).as_stack_array()

        passo = it + 1
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad ** 2
        m1_hat = m1 / (1.0 - cfg.beta1 ** passo)
        m2_hat = m2 / (1.0 - cfg.beta2 ** passo)
        params = params - taxas * (cfg.decay ** it) * m1_hat / (np.sqrt(m2_hat) + cfg.adam_eps)
        params[:, 2] = np.clip(params[:, 2], 0.0, volume.depth - 1)

    return VoxelFlowStack(melhor)


def prediction_mse(volume: FrameVolume, flows: VoxelFlowStack, target: Frame, warp_cfg: Optional[WarpConfig] = None) -> float:
    """MSE do warp ponderado contra o alvo."""
    return _mse(weighted_voxel_warp(volume, flows, warp_cfg), target)
