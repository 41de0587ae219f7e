"""
Módulo de visualizações para diagnóstico de voxel flows e estudos de ablação.
Inclui mapas do centróide temporal, fluxo espacial médio/desvio e curvas
de capacidade por M.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from codec_sim import DiagnosticMaps  # noqa: E402
from errors import IoError  # noqa: E402

# Configura estilo
sns.set_style("whitegrid")
plt.rcParams['figure.figsize'] = (10, 6)
plt.rcParams['font.size'] = 10


def plot_diagnostic_maps(diag: DiagnosticMaps, titulo: str = "") -> plt.Figure:
    """
    Gera os mapas de diagnóstico de uma pilha ajustada.

    Args:
        diag: DiagnosticMaps de codec_sim.diagnostics
        titulo: Título geral da figura

    Returns:
        Figura matplotlib com ḡ_z, |média espacial| e |desvio espacial|
    """
    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))

    paineis = [
        (diag.mean_temporal_flow, "Fluxo temporal médio (ḡ_z)", "viridis"),
        (np.hypot(*diag.mean_spatial_flow), "Fluxo espacial médio |ḡ_xy| (px)", "magma"),
        (np.hypot(*diag.std_spatial_flow), "Desvio do fluxo espacial (px)", "magma"),
    ]
    for ax, (mapa, nome, cmap) in zip(axes, paineis):
        sns.heatmap(mapa, ax=ax, cmap=cmap, square=True, xticklabels=False, yticklabels=False,
                    cbar_kws={"shrink": 0.8})
        ax.set_title(nome, fontsize=12, fontweight='bold')

    if titulo:
        fig.suptitle(titulo, fontsize=14, fontweight='bold')
    plt.tight_layout()
    return fig


def plot_capacity_curve(df: pd.DataFrame) -> plt.Figure:
    """
    PSNR de predição ajustada por número de voxel flows.

    Args:
        df: Saída de experiments.capacity_study (colunas M, psnr, sequence)
    """
    fig, ax = plt.subplots(figsize=(10, 6))
    sns.lineplot(data=df, x="M", y="psnr", units="sequence", estimator=None, color="lightgray", ax=ax)
    media = df.groupby("M", sort=True)["psnr"].mean()
    ax.plot(media.index, media.values, 'bo-', linewidth=2, markersize=8, label="média do corpus")
    ax.set_xscale("log")
    ax.set_xticks(media.index)
    ax.set_xticklabels([str(m) for m in media.index])
    ax.set_xlabel('Número de voxel flows (M)', fontsize=12, fontweight='bold')
    ax.set_ylabel('PSNR de predição (dB)', fontsize=12, fontweight='bold')
    ax.set_title('Capacidade do warp com múltiplos fluxos', fontsize=14, fontweight='bold')
    ax.legend()

    for m, valor in media.items():
        ax.annotate(f'{valor:.2f}', xy=(m, valor), xytext=(5, 5), textcoords='offset points', fontsize=8, alpha=0.7)

    plt.tight_layout()
    return fig


def plot_study_bars(df: pd.DataFrame, by: str, value: str, titulo: str) -> plt.Figure:
    """
    Barras da média do corpus por variante (modos de GOP ou GFP on/off).

    Args:
        df: Tabela do estudo
        by: Coluna da variante ('mode', 'gfp')
        value: Coluna numérica
    """
    fig, ax = plt.subplots(figsize=(10, 6))
    sns.barplot(data=df, x=by, y=value, ax=ax, color='steelblue', alpha=0.8, errorbar="sd")
    ax.set_xlabel(by, fontsize=12, fontweight='bold')
    ax.set_ylabel(value, fontsize=12, fontweight='bold')
    ax.set_title(titulo, fontsize=14, fontweight='bold')
    ax.grid(axis='y', alpha=0.3)
    plt.tight_layout()
    return fig


def save_figure(fig: plt.Figure, caminho) -> Path:
    """
    Grava a figura em PNG e a fecha.

    Raises:
        IoError: falha de escrita
    """
    path = Path(caminho)
    try:
        fig.savefig(path, format='png', dpi=150, bbox_inches='tight')
    except OSError as e:
        raise IoError(f"não foi possível gravar {path}: {e}") from e
    finally:
        plt.close(fig)
    return path
