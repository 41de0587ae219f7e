"""
Estudos de ablação em escala de bancada sobre corpora sintéticos.

- capacidade: MSE de predição ajustada para M ∈ {1, 4, 9, 25} com
  inicialização aninhada (cada M parte do ajuste anterior)
- GFP: simulação LDB com e sem predição de fluxo; erro de ponto final k=1 vs k=2
- modos: LDP, LDB, RA e RA com uma única referência de warping

Cada sequência é processada de forma independente (joblib); os resultados
são tabelas pandas, uma linha por (sequência, variante).
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from codec_sim import RdConfig, SimConfig, simulate_sequence
from config import EXPERIMENT_CONFIG, log
from errors import InvalidConfig, IoError
from flow_prediction import ReferenceFlowSet, predict_backward_flow
from gop_planner import GopConfig, plan_gop
from metrics import psnr, psnr_from_mse
from synthetic import SyntheticSequence, make_corpus
from tensor_io import FrameVolume
from voxel_fit import FitConfig, fit_voxel_flows, prediction_mse


def _paralelo(funcao, itens: Sequence, n_jobs: Optional[int]) -> List:
    n = n_jobs or EXPERIMENT_CONFIG["n_jobs"]
    if n <= 1 or len(itens) <= 1:
        return [funcao(item) for item in itens]
    return Parallel(n_jobs=n)(delayed(funcao)(item) for item in itens)


# =========================
# CAPACIDADE (M)
# =========================
def _capacidade_sequencia(args) -> List[Dict]:
    indice, seq, contagens, fit_cfg, alvo = args
    volume = FrameVolume.from_frames([seq.frames[alvo - 1], seq.frames[alvo + 1]], (alvo - 1, alvo + 1))
    target = seq.frames[alvo]
    linhas, anterior = [], None
    for m in contagens:
        pilha = fit_voxel_flows(volume, target, m, cfg=fit_cfg, init_depth=0, warm_start=anterior)
        erro = prediction_mse(volume, pilha, target)
        linhas.append({
            "sequence": indice, "M": m, "mse": erro,
            "psnr": psnr_from_mse(erro),
        })
        anterior = pilha
    return linhas


def capacity_study(
    corpus: Sequence[SyntheticSequence],
    flow_counts: Sequence[int] = tuple(EXPERIMENT_CONFIG["flow_counts"]),
    fit_cfg: Optional[FitConfig] = None,
    target_index: int = 2,
    n_jobs: Optional[int] = None,
) -> pd.DataFrame:
    """
    Ajusta o quadro `target_index` a partir das fatias vizinhas (t−1, t+1)
    para cada M em ordem crescente, com warm start aninhado.

    Returns:
        DataFrame (sequence, M, mse, psnr)
    """
    fit_cfg = fit_cfg or FitConfig()
    contagens = sorted(flow_counts)
    itens = [(i, seq, contagens, fit_cfg, target_index) for i, seq in enumerate(corpus)]
    linhas = [l for bloco in _paralelo(_capacidade_sequencia, itens, n_jobs) for l in bloco]
    return pd.DataFrame(linhas)


# =========================
# GFP
# =========================
def endpoint_error(seq: SyntheticSequence, t: int, origin: int, neighbors: Sequence[int], k: int) -> float:
    """
    Erro médio de ponto final do fluxo backward predito (com fluxos verdadeiros)
    contra f_{t→origin} verdadeiro, nos pixels cobertos.
    """
    disponiveis = {r: seq.true_flow(origin, r) for r in neighbors}
    refs = ReferenceFlowSet.from_available(origin, disponiveis, k)
    predito = predict_backward_flow(refs, seq.as_dict(), t, k)
    verdade = seq.true_flow(t, origin)
    erro = np.hypot(predito.flow.dx - verdade.dx, predito.flow.dy - verdade.dy)
    cobertos = ~predito.holes
    return float(erro[cobertos].mean()) if cobertos.any() else float("inf")


def _gfp_sequencia(args) -> List[Dict]:
    indice, seq, sim_base, rd = args
    plano = plan_gop(GopConfig(mode="LDB", sequence_length=len(seq), n_refs=3, warp_refs=2))
    linhas = []
    for usar in (True, False):
        sim = sim_base.model_copy(update={"use_gfp": usar})
        res = simulate_sequence(seq.as_dict(), plano, rd, sim)
        inter = res.inter_reports()
        linhas.append({
            "sequence": indice,
            "gfp": usar,
            "residual_entropy": float(np.mean([r.residual_entropy_bits_per_pixel for r in inter])),
            "flow_bits": float(np.mean([r.flow_bits_per_pixel for r in inter])),
            "flow_tv": float(np.mean([r.flow_total_variation for r in inter])),
            "prediction_psnr": float(np.mean([r.prediction_psnr for r in inter])),
            "mean_cost": res.summary.mean_cost,
        })
    t = len(seq) - 1
    vizinhos = [t - 2, t - 3]
    for linha in linhas:
        linha["endpoint_error_k1"] = endpoint_error(seq, t, t - 1, vizinhos, 1)
        linha["endpoint_error_k2"] = endpoint_error(seq, t, t - 1, vizinhos, 2)
    return linhas


def gfp_study(
    corpus: Sequence[SyntheticSequence],
    sim: Optional[SimConfig] = None,
    rd: Optional[RdConfig] = None,
    n_jobs: Optional[int] = None,
) -> pd.DataFrame:
    """
    Simulação LDB (3 referências, 2 de warping) com GFP ligado e desligado.

    Returns:
        DataFrame (sequence, gfp, residual_entropy, flow_bits, flow_tv,
        prediction_psnr, mean_cost, endpoint_error_k1, endpoint_error_k2)
    """
    sim = sim or SimConfig(M=4)
    rd = rd or RdConfig()
    itens = [(i, seq, sim, rd) for i, seq in enumerate(corpus)]
    return pd.DataFrame([l for bloco in _paralelo(_gfp_sequencia, itens, n_jobs) for l in bloco])


# =========================
# MODOS DE CODIFICAÇÃO
# =========================
MODE_VARIANTS: Dict[str, Dict] = {
    "LDP": {"mode": "LDP"},
    "LDB": {"mode": "LDB", "n_refs": 3, "warp_refs": 2},
    "RA": {"mode": "RA", "n_refs": 3, "warp_refs": 2},
    "RA-r1": {"mode": "RA", "n_refs": 3, "warp_refs": 1},
}


def _modos_sequencia(args) -> List[Dict]:
    indice, seq, variantes, intra_period, sim, rd = args
    linhas = []
    for nome in variantes:
        cfg = GopConfig(sequence_length=len(seq), intra_period=intra_period, **MODE_VARIANTS[nome])
        res = simulate_sequence(seq.as_dict(), plan_gop(cfg), rd, sim)
        inter = res.inter_reports()
        linhas.append({
            "sequence": indice,
            "mode": nome,
            "prediction_psnr": float(np.mean([r.prediction_psnr for r in inter])),
            "rate": res.summary.mean_rate,
            "mean_cost": res.summary.mean_cost,
            "recon_psnr": float(np.mean([psnr(seq.frames[t], f) for t, f in res.reconstructions.items()])),
        })
    return linhas


def modes_study(
    corpus: Sequence[SyntheticSequence],
    variants: Sequence[str] = tuple(MODE_VARIANTS),
    intra_period: int = 4,
    sim: Optional[SimConfig] = None,
    rd: Optional[RdConfig] = None,
    n_jobs: Optional[int] = None,
) -> pd.DataFrame:
    """Compara estruturas de GOP no mesmo corpus. Returns: DataFrame (sequence, mode, ...)."""
    sim = sim or SimConfig(M=4)
    rd = rd or RdConfig()
    itens = [(i, seq, list(variants), intra_period, sim, rd) for i, seq in enumerate(corpus)]
    return pd.DataFrame([l for bloco in _paralelo(_modos_sequencia, itens, n_jobs) for l in bloco])


# =========================
# EXECUÇÃO COMPLETA
# =========================
def summarize(df: pd.DataFrame, by: str, columns: Sequence[str]) -> pd.DataFrame:
    """Média do corpus por variante."""
    return df.groupby(by, sort=True)[list(columns)].mean()


def run_ablation(
    study: str,
    out_dir,
    sequences: int = EXPERIMENT_CONFIG["sequences"],
    seed: int = 0,
    fit_cfg: Optional[FitConfig] = None,
    M: int = 4,
    n_jobs: Optional[int] = None,
) -> pd.DataFrame:
    """
    Executa um estudo ('capacity', 'gfp' ou 'modes'), grava <study>.csv e
    imprime o resumo.
    """
    fit_cfg = fit_cfg or FitConfig()
    destino = Path(out_dir)
    try:
        destino.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"não foi possível criar {destino}: {e}") from e

    log(f"📊 Estudo '{study}' com {sequences} sequência(s)")
    if study == "capacity":
        df = capacity_study(make_corpus("occlusion", sequences, seed), fit_cfg=fit_cfg, n_jobs=n_jobs)
        resumo = summarize(df, "M", ["mse", "psnr"])
    elif study == "gfp":
        sim = SimConfig(M=M, fit=fit_cfg)
        df = gfp_study(make_corpus("acceleration", sequences, seed), sim=sim, n_jobs=n_jobs)
        resumo = summarize(df, "gfp", ["residual_entropy", "flow_tv", "prediction_psnr", "endpoint_error_k1", "endpoint_error_k2"])
    elif study == "modes":
        sim = SimConfig(M=M, fit=fit_cfg)
        df = modes_study(make_corpus("occlusion", sequences, seed, length=5), sim=sim, n_jobs=n_jobs)
        resumo = summarize(df, "mode", ["prediction_psnr", "rate", "mean_cost"])
    else:
        raise InvalidConfig(f"estudo desconhecido: {study!r} (capacity, gfp, modes)")

    try:
        df.to_csv(destino / f"{study}.csv", index=False)
    except OSError as e:
        raise IoError(f"não foi possível gravar {destino / f'{study}.csv'}: {e}") from e
    log(resumo.to_string())
    log(f"✓ Resultados em {destino / f'{study}.csv'}")
    return df
