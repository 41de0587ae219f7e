"""
Utilitários para carregamento de sequências de quadros e listas de arquivos.
Quadros em PPM (P6) nomeados frame_XXX.ppm; fluxos e volumes em .vten.
"""

import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import pandas as pd

from config import log
from errors import EmptyInput, MissingFrame, ShapeMismatch
from tensor_io import Frame, read_frame_ppm

_PADRAO_QUADRO = re.compile(r"^frame_(\d+)\.ppm$", re.IGNORECASE)


def frame_filename(display_index: int) -> str:
    """Nome canônico do quadro de exibição `display_index`."""
    return f"frame_{display_index:03d}.ppm"


def indexar_quadros(diretorio) -> pd.DataFrame:
    """
    Monta a tabela (display, arquivo) dos quadros de um diretório.

    Arquivos frame_XXX.ppm usam o número do nome como índice de exibição;
    sem nenhum deles, todos os *.ppm são indexados em ordem alfabética.

    Args:
        diretorio: Pasta com os quadros

    Returns:
        DataFrame ordenado por 'display'

    Raises:
        MissingFrame: Se a pasta não existir ou não tiver PPMs
    """
    path = Path(diretorio)
    if not path.is_dir():
        raise MissingFrame(f"Diretório de quadros não encontrado: {diretorio}")

    nomeados = [(int(m.group(1)), p) for p in path.iterdir() if (m := _PADRAO_QUADRO.match(p.name))]
    if nomeados:
        linhas = nomeados
    else:
        # Fallback: qualquer PPM, em ordem alfabética
        linhas = list(enumerate(sorted(p for p in path.iterdir() if p.suffix.lower() == ".ppm")))
    if not linhas:
        raise MissingFrame(f"Nenhum quadro .ppm em {diretorio}")

    df = pd.DataFrame(linhas, columns=["display", "arquivo"])
    duplicados = df[df["display"].duplicated()]["display"].tolist()
    if duplicados:
        raise ShapeMismatch(f"Índices de quadro repetidos em {diretorio}: {duplicados}")
    return df.sort_values("display").reset_index(drop=True)


def carregar_quadros(diretorio, indices: Optional[Iterable[int]] = None) -> Dict[int, Frame]:
    """
    Lê os quadros de um diretório.

    Args:
        diretorio: Pasta com os quadros
        indices: Índices exigidos (None = todos)

    Returns:
        {display: Frame}

    Raises:
        MissingFrame: Se algum índice exigido não existir
        ShapeMismatch: Se os quadros tiverem formas diferentes
    """
    tabela = indexar_quadros(diretorio)
    disponiveis = dict(zip(tabela["display"], tabela["arquivo"]))
    alvo = sorted(disponiveis) if indices is None else sorted(set(indices))

    faltando = [i for i in alvo if i not in disponiveis]
    if faltando:
        raise MissingFrame(f"Quadros ausentes em {diretorio}: {faltando}")

    quadros = {i: read_frame_ppm(disponiveis[i]) for i in alvo}
    formas = {q.shape for q in quadros.values()}
    if len(formas) > 1:
        raise ShapeMismatch(f"Quadros com formas distintas: {sorted(formas)}")
    return quadros


def parse_lista_temporal(texto: str) -> List[Tuple[int, Path]]:
    """
    Converte "t=caminho,t=caminho" em [(t, Path)].

    Raises:
        EmptyInput: Se a lista estiver vazia
        ValueError: Se algum item não seguir o formato t=caminho
    """
    itens = [s.strip() for s in (texto or "").split(",") if s.strip()]
    if not itens:
        raise EmptyInput("Lista vazia: use t=caminho separados por vírgula")
    saida = []
    for item in itens:
        t, sep, caminho = item.partition("=")
        if not sep or not caminho:
            raise ValueError(f"Item inválido {item!r}: esperado t=caminho")
        saida.append((int(t), Path(caminho)))
    return saida


def carregar_e_preparar_sequencia(diretorio, indices: Optional[Iterable[int]] = None) -> Dict[int, Frame]:
    """
    Pipeline completo de carregamento de uma sequência.

    Returns:
        {display: Frame} pronto para a simulação
    """
    quadros = carregar_quadros(diretorio, indices)
    exemplo = next(iter(quadros.values()))
    log(f"✓ Sequência carregada: {len(quadros)} quadros {exemplo.height}×{exemplo.width}×{exemplo.channels}")
    return quadros
