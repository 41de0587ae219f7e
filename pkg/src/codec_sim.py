"""
Simulação de codec em malha fechada sobre um plano de GOP.

Para cada quadro inter (em ordem de codificação):
1. GFP: fluxo backward predito a partir das referências decodificadas
2. ajuste de M voxel flows inicializado pelo GFP
3. warp ponderado → predição x̄
4. resíduo quantizado; reconstrução = clip(x̄ + resíduo quantizado)

Quadros intra passam direto (taxa e distorção 0). A agregação segue
(1/T) Σ_t [R_t + λ·d_t] sobre os quadros inter.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, field_validator

from block_matching import BlockMatchingEstimator, FileFlowEstimator, FlowEstimator
from config import BLOCK_MATCHING_CONFIG, RD_CONFIG, WARP_CONFIG, ConfigModel, log
from errors import EmptyInput, EmptyStack, InvalidConfig, IoError, MissingFrame, ShapeMismatch
from flow_prediction import ReferenceFlowSet, default_order, predict_backward_flow
from flow_reversal import ImportanceConfig, dilate_fill_holes
from gop_planner import GopPlan, PlanEntry, require_valid
from metrics import flow_entropy_proxy, ms_ssim, ms_ssim_scales, psnr, residual_entropy_proxy, total_variation
from motion_compensation import WarpConfig, backward_warp_bilinear, softmax_weights, weighted_voxel_warp
from tensor_io import FlowField2D, Frame, FrameVolume, VoxelFlowStack, write_frame_ppm, write_map, write_tensor, write_voxel_flows
from voxel_fit import FitConfig, fit_voxel_flows


# =========================
# CONFIGURAÇÃO
# =========================
class RdConfig(ConfigModel):
    """Compromisso taxa-distorção: custo = R + λ·d."""

    lambda_: float = Field(default=RD_CONFIG["lambda"], gt=0, alias="lambda")
    quant_step: float = Field(default=RD_CONFIG["quant_step"], gt=0)
    distortion_metric: str = RD_CONFIG["distortion_metric"]
    flow_quant_step: float = Field(default=RD_CONFIG["flow_quant_step"], gt=0)

    @field_validator("distortion_metric")
    @classmethod
    def _metrica(cls, v: str) -> str:
        normalizado = v.upper().replace("_", "-")
        if normalizado not in ("MSE", "MS-SSIM"):
            raise InvalidConfig(f"distortion_metric {v!r} inválida (MSE ou MS-SSIM)")
        return normalizado


class SimConfig(ConfigModel):
    """Opções do pipeline de simulação."""

    M: int = Field(default=WARP_CONFIG["default_flows"], ge=1)
    flow_source: str = "blockmatch"
    flows_dir: Optional[str] = None
    use_gfp: bool = True
    fill_holes: bool = True
    block: int = Field(default=BLOCK_MATCHING_CONFIG["block"], ge=1)
    radius: int = Field(default=BLOCK_MATCHING_CONFIG["radius"], ge=0)
    fit: FitConfig = Field(default_factory=FitConfig)
    importance: ImportanceConfig = Field(default_factory=ImportanceConfig)
    n_jobs: int = Field(default=WARP_CONFIG["n_jobs"], ge=1)

    @field_validator("flow_source")
    @classmethod
    def _fonte(cls, v: str) -> str:
        if v not in ("files", "blockmatch"):
            raise InvalidConfig(f"flow_source {v!r} inválida (files ou blockmatch)")
        return v

    def estimator(self) -> FlowEstimator:
        if self.flow_source == "files":
            if not self.flows_dir:
                raise InvalidConfig("flow_source 'files' exige flows_dir")
            return FileFlowEstimator(self.flows_dir)
        return BlockMatchingEstimator(self.block, self.radius)


# =========================
# TIPOS DE RESULTADO
# =========================
@dataclass(frozen=True)
class FrameReport:
    display_index: int
    coding_order: int = 0
    is_intra: bool = False
    prediction_psnr: float = 99.0
    residual_entropy_bits_per_pixel: float = 0.0
    flow_bits_per_pixel: float = 0.0
    rate_proxy: float = 0.0
    distortion: float = 0.0
    rd_cost: float = 0.0
    hole_fraction: float = 0.0
    reconstruction_psnr: float = 99.0
    flow_total_variation: float = 0.0
    gfp_psnr: Tuple[float, ...] = ()


@dataclass(frozen=True)
class DiagnosticMaps:
    """Centróide ponderado dos voxel flows: ḡ_z, média e desvio espacial, referência mais próxima."""

    mean_temporal_flow: np.ndarray    # (H, W)
    mean_spatial_flow: np.ndarray     # (2, H, W)
    std_spatial_flow: np.ndarray      # (2, H, W)
    nearest_reference: np.ndarray     # (H, W) int, profundidade arredondada de ḡ_z

    def as_array(self) -> np.ndarray:
        """Empilha em 6×H×W: ḡ_z, média x, média y, desvio x, desvio y, ref."""
        return np.concatenate([
            self.mean_temporal_flow[None], self.mean_spatial_flow, self.std_spatial_flow,
            self.nearest_reference[None].astype(np.float64),
        ])


@dataclass(frozen=True)
class RdSummary:
    frames: int
    mean_rate: float
    mean_distortion: float
    mean_cost: float


@dataclass
class SimulationResult:
    reports: List[FrameReport]
    reconstructions: Dict[int, Frame]
    predictions: Dict[int, Frame] = field(default_factory=dict)
    flows: Dict[int, VoxelFlowStack] = field(default_factory=dict)
    holes: Dict[int, np.ndarray] = field(default_factory=dict)
    diagnostics: Dict[int, DiagnosticMaps] = field(default_factory=dict)
    summary: Optional[RdSummary] = None

    def inter_reports(self) -> List[FrameReport]:
        return [r for r in self.reports if not r.is_intra]


# =========================
# DIAGNÓSTICO E AGREGAÇÃO
# =========================
def diagnostics(flows: VoxelFlowStack, depth: Optional[int] = None) -> DiagnosticMaps:
    """
    ḡ_z = Σ_i w_i·g_z^i com w = softmax(g_w); média e desvio ponderados de (g_x, g_y).

    Args:
        flows: pilha ajustada
        depth: D do volume; se informado, g_z é limitado a [0, D−1]

    Raises:
        EmptyStack: M = 0
    """
    if flows.M == 0:
        raise EmptyStack("diagnóstico de pilha vazia")
    w = softmax_weights(flows.gw)
    gz = flows.gz if depth is None else np.clip(flows.gz, 0.0, depth - 1)
    media_z = (w * gz).sum(axis=0)

    espacial = flows.data[:, :2]                      # (M, 2, H, W)
    media = (w[:, None] * espacial).sum(axis=0)
    variancia = (w[:, None] * (espacial - media[None]) ** 2).sum(axis=0)
    proxima = np.floor(media_z + 0.5).astype(np.int64)
    return DiagnosticMaps(media_z, media, np.sqrt(np.maximum(variancia, 0.0)), proxima)


def reports_to_frame(reports: Sequence[FrameReport]) -> pd.DataFrame:
    """Tabela por quadro (uma linha por FrameReport)."""
    linhas = []
    for r in reports:
        linha = asdict(r)
        linha["gfp_psnr"] = ";".join(repr(float(v)) for v in r.gfp_psnr)
        linhas.append(linha)
    return pd.DataFrame(linhas)


def rd_report(reports: Sequence[FrameReport], lam: float) -> RdSummary:
    """
    Média sobre os quadros de (taxa + λ·distorção), mais taxa e distorção médias.

    Raises:
        EmptyInput: lista vazia
    """
    if len(reports) == 0:
        raise EmptyInput("rd_report exige ao menos um quadro")
    df = pd.DataFrame({
        "rate": [float(r.rate_proxy) for r in reports],
        "distortion": [float(r.distortion) for r in reports],
    })
    custo = df["rate"] + lam * df["distortion"]
    return RdSummary(len(df), float(df["rate"].mean()), float(df["distortion"].mean()), float(custo.mean()))


# =========================
# PIPELINE
# =========================
def _origem_gfp(alvo: int, candidatos: Sequence[int]) -> int:
    """Referência mais próxima do alvo (empate → anterior)."""
    return min(candidatos, key=lambda t: (abs(t - alvo), t))


def _predizer_gfp(
    entry: PlanEntry,
    origem: int,
    recon: Mapping[int, Frame],
    estimador: FlowEstimator,
    sim: SimConfig,
) -> Tuple[FlowField2D, np.ndarray]:
    k = default_order(len(entry.pred_refs))
    vizinhos = [r for r in entry.pred_refs if r != origem]
    disponiveis = {r: estimador.estimate(recon[origem], recon[r], origem, r) for r in vizinhos}
    refs = ReferenceFlowSet.from_available(origem, disponiveis, k)
    predito = predict_backward_flow(refs, recon, entry.display_index, k, sim.importance)
    fluxo, buracos = predito.flow, predito.holes
    if sim.fill_holes and buracos.any():
        fluxo = dilate_fill_holes(fluxo, buracos).flow
    return fluxo, buracos


def _distorcao(original: Frame, recon: Frame, rd: RdConfig) -> float:
    if rd.distortion_metric == "MS-SSIM":
        return 1.0 - ms_ssim(original, recon)
    return float(np.mean((original.data - recon.data) ** 2))


def _quadro_inter(
    entry: PlanEntry,
    original: Frame,
    recon: Dict[int, Frame],
    estimador: FlowEstimator,
    rd: RdConfig,
    sim: SimConfig,
    warp_cfg: WarpConfig,
    resultado: SimulationResult,
) -> Tuple[Frame, FrameReport]:
    t = entry.display_index
    volume = FrameVolume.from_frames([recon[r] for r in entry.warp_refs], entry.warp_refs)

    init: Optional[FlowField2D] = None
    gfp_psnr: List[float] = []
    fracao_buracos = 0.0
    usar_gfp = sim.use_gfp and len(entry.pred_refs) > 1
    if usar_gfp:
        principal = _origem_gfp(t, entry.warp_refs)
        for origem in entry.warp_refs:
            fluxo, buracos = _predizer_gfp(entry, origem, recon, estimador, sim)
            gfp_psnr.append(psnr(original, backward_warp_bilinear(recon[origem], fluxo)))
            if origem == principal:
                init = fluxo
                fracao_buracos = float(buracos.mean())
                resultado.holes[t] = buracos
        profundidade = volume.depth_of(principal)
    else:
        profundidade = volume.nearest_depth(t)

    fit_cfg = sim.fit.model_copy(update={"seed": sim.fit.seed + t})
    pilha = fit_voxel_flows(volume, original, sim.M, init=init, cfg=fit_cfg, init_depth=profundidade, warp_cfg=warp_cfg)
    predicao = weighted_voxel_warp(volume, pilha, warp_cfg)

    residuo = original.data - predicao.data
    q = np.floor(residuo / rd.quant_step + 0.5)
    reconstruido = Frame(np.clip(predicao.data + q * rd.quant_step, 0.0, 1.0))

    taxa_residuo = residual_entropy_proxy(residuo, rd.quant_step)
    taxa_fluxo = flow_entropy_proxy(pilha, init, rd.flow_quant_step)
    taxa = taxa_residuo + taxa_fluxo
    distorcao = _distorcao(original, reconstruido, rd)

    resultado.predictions[t] = predicao
    resultado.flows[t] = pilha
    resultado.diagnostics[t] = diagnostics(pilha, volume.depth)
    relatorio = FrameReport(
        display_index=t,
        coding_order=entry.coding_order,
        is_intra=False,
        prediction_psnr=psnr(original, predicao),
        residual_entropy_bits_per_pixel=taxa_residuo,
        flow_bits_per_pixel=taxa_fluxo,
        rate_proxy=taxa,
        distortion=distorcao,
        rd_cost=taxa + rd.lambda_ * distorcao,
        hole_fraction=fracao_buracos,
        reconstruction_psnr=psnr(original, reconstruido),
        flow_total_variation=total_variation(pilha),
        gfp_psnr=tuple(gfp_psnr),
    )
    return reconstruido, relatorio


def simulate_sequence(
    frames: Mapping[int, Frame],
    plan: GopPlan,
    rd: Optional[RdConfig] = None,
    sim: Optional[SimConfig] = None,
    estimator: Optional[FlowEstimator] = None,
) -> SimulationResult:
    """
    Executa o plano em malha fechada.

    Args:
        frames: quadros originais por índice de exibição
        plan: plano de GOP (validado antes da execução)
        rd: parâmetros de taxa-distorção
        sim: parâmetros da simulação (M, fonte de fluxo, ajuste)
        estimator: estimador de fluxo (padrão: derivado de sim.flow_source)

    Returns:
        SimulationResult com relatórios em ordem de codificação

    Raises:
        InvalidPlan: plano com violações
        MissingFrame: quadro exigido pelo plano ausente
    """
    rd = rd or RdConfig()
    sim = sim or SimConfig()
    require_valid(plan)
    faltando = sorted(e.display_index for e in plan if e.display_index not in frames)
    if faltando:
        raise MissingFrame(f"quadros ausentes para o plano: {faltando}")
    formas = {frames[e.display_index].shape for e in plan}
    if len(formas) > 1:
        raise ShapeMismatch(f"quadros com formas distintas: {sorted(formas)}")
    if rd.distortion_metric == "MS-SSIM":
        c, h, w = next(iter(formas))
        log(f"📊 MS-SSIM com {ms_ssim_scales(h, w)} escala(s)")

    estimador = estimator or sim.estimator()
    warp_cfg = WarpConfig(n_jobs=sim.n_jobs)
    recon: Dict[int, Frame] = {}
    resultado = SimulationResult(reports=[], reconstructions=recon)

    for entry in plan:
        t = entry.display_index
        original = frames[t]
        if entry.is_intra:
            recon[t] = original
            resultado.reports.append(FrameReport(display_index=t, coding_order=entry.coding_order, is_intra=True))
            log(f"  [{entry.coding_order:3d}] quadro {t:3d} intra")
            continue
        recon[t], relatorio = _quadro_inter(entry, original, recon, estimador, rd, sim, warp_cfg, resultado)
        resultado.reports.append(relatorio)
        log(
            f"  [{entry.coding_order:3d}] quadro {t:3d} refs={list(entry.pred_refs)} "
            f"PSNR pred {relatorio.prediction_psnr:.2f} dB, taxa {relatorio.rate_proxy:.3f} bpp"
        )

    inter = resultado.inter_reports()
    resultado.summary = rd_report(inter or resultado.reports, rd.lambda_)
    log(
        f"✓ Simulação concluída: {len(inter)} quadros inter, custo médio {resultado.summary.mean_cost:.4f}"
    )
    return resultado


# =========================
# SAÍDAS
# =========================
def format_report(result: SimulationResult, rd: RdConfig) -> str:
    """Relatório linha a linha em key=value (floats em repr, bit-estáveis)."""
    linhas = []
    for r in result.reports:
        campos = asdict(r)
        campos["gfp_psnr"] = ",".join(repr(float(v)) for v in r.gfp_psnr)
        partes = []
        for chave, valor in campos.items():
            if isinstance(valor, bool):
                valor = int(valor)
            elif isinstance(valor, float):
                valor = repr(valor)
            partes.append(f"{chave}={valor}")
        linhas.append("frame " + " ".join(partes))
    s = result.summary
    if s is not None:
        linhas.append(
            f"aggregate frames={s.frames} mean_rate={s.mean_rate!r} mean_distortion={s.mean_distortion!r} "
            f"mean_cost={s.mean_cost!r} lambda={rd.lambda_!r} metric={rd.distortion_metric}"
        )
    return "\n".join(linhas) + "\n"


def write_simulation(result: SimulationResult, rd: RdConfig, out_dir) -> Path:
    """
    Grava reconstruções (PPM), voxel flows, buracos e diagnósticos (.vten)
    e o relatório report.txt / report.csv.
    """
    saida = Path(out_dir)
    try:
        saida.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"não foi possível criar {saida}: {e}") from e

    for t, quadro in sorted(result.reconstructions.items()):
        if quadro.channels == 3:
            write_frame_ppm(quadro, saida / f"recon_{t:03d}.ppm")
        else:
            write_tensor(quadro.data, quadro.shape, saida / f"recon_{t:03d}.vten")
    for t, pilha in sorted(result.flows.items()):
        write_voxel_flows(pilha, saida / f"flows_{t:03d}.vten")
    for t, buracos in sorted(result.holes.items()):
        write_map(buracos.astype(np.float64), saida / f"holes_{t:03d}.vten")
    for t, diag in sorted(result.diagnostics.items()):
        mapas = diag.as_array()
        write_tensor(mapas, mapas.shape, saida / f"diag_{t:03d}.vten")

    relatorio = saida / "report.txt"
    try:
        relatorio.write_text(format_report(result, rd), encoding="utf-8")
        reports_to_frame(result.reports).to_csv(saida / "report.csv", index=False)
    except OSError as e:
        raise IoError(f"não foi possível gravar o relatório em {saida}: {e}") from e
    log(f"✓ Saídas gravadas em {saida}")
    return relatorio
