"""
Planejamento de GOP: ordem de codificação, referências de predição e
subconjunto de warping por quadro, nos modos LDP, LDB e RA.

RA usa a decomposição hierárquica por ponto médio, em profundidade:
âncora final do período, depois ⌊(a+b)/2⌋ de cada intervalo delimitado por
quadros já decodificados (esquerda antes da direita).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import Field, model_validator

from config import GOP_CONFIG, ConfigModel
from errors import InvalidConfig, InvalidPlan, IoError


class GopMode(str, Enum):
    LDP = "LDP"
    LDB = "LDB"
    RA = "RA"


class GopConfig(ConfigModel):
    """
    Estrutura de GOP.

    LDP força n_refs = warp_refs = 1; valores explícitos diferentes de 1
    levantam InvalidConfig.
    """

    mode: GopMode
    sequence_length: int = Field(ge=1)
    intra_period: int = Field(default=GOP_CONFIG["intra_period"], ge=1)
    n_refs: int = Field(default=GOP_CONFIG["n_refs"], ge=1)
    warp_refs: int = Field(default=GOP_CONFIG["warp_refs"], ge=1)

    @model_validator(mode="before")
    @classmethod
    def _normalizar_modo(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        modo = data.get("mode")
        if isinstance(modo, str):
            try:
                data["mode"] = GopMode(modo.upper())
            except ValueError:
                raise InvalidConfig(f"modo {modo!r} desconhecido (use ldp, ldb ou ra)") from None
        if data.get("mode") == GopMode.LDP:
            for campo in ("n_refs", "warp_refs"):
                if data.get(campo) is None:
                    data[campo] = 1
                elif data[campo] != 1:
                    raise InvalidConfig(f"LDP exige {campo} = 1, recebeu {data[campo]}")
        return {k: v for k, v in data.items() if v is not None}

    @model_validator(mode="after")
    def _warp_dentro_das_refs(self):
        if self.warp_refs > self.n_refs:
            raise InvalidConfig(f"warp_refs ({self.warp_refs}) > n_refs ({self.n_refs})")
        return self


@dataclass(frozen=True)
class PlanEntry:
    display_index: int
    coding_order: int
    is_intra: bool
    pred_refs: Tuple[int, ...] = ()    # mais próxima primeiro
    warp_refs: Tuple[int, ...] = ()    # ordem de empilhamento (crescente)


@dataclass(frozen=True)
class GopPlan:
    """Entradas em ordem de codificação e metadados da configuração."""

    entries: Tuple[PlanEntry, ...]
    mode: Optional[str] = None
    intra_period: Optional[int] = None
    n_refs: Optional[int] = None
    warp_refs: Optional[int] = None

    def __iter__(self) -> Iterator[PlanEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def coding_order(self) -> List[int]:
        return [e.display_index for e in self.entries]

    def entry(self, display_index: int) -> PlanEntry:
        for e in self.entries:
            if e.display_index == display_index:
                return e
        raise KeyError(display_index)


@dataclass(frozen=True)
class Violation:
    kind: str  # permutation | decodability | periodicity | warp_subset | missing_refs | intra_refs
    display_index: Optional[int]
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.message}"


# =========================
# PLANEJAMENTO
# =========================
def _mais_proximos(alvo: int, candidatos, n: int) -> List[int]:
    """n candidatos mais próximos de `alvo` (empate → passado)."""
    return sorted(candidatos, key=lambda t: (abs(t - alvo), t))[:n]


def _plan_low_delay(cfg: GopConfig) -> List[Tuple[int, bool, List[int]]]:
    saida = []
    for t in range(cfg.sequence_length):
        if t % cfg.intra_period == 0:
            saida.append((t, True, []))
            continue
        ultimo_intra = (t // cfg.intra_period) * cfg.intra_period
        refs = list(range(t - 1, max(ultimo_intra, t - cfg.n_refs) - 1, -1))
        saida.append((t, False, refs))
    return saida


def _plan_random_access(cfg: GopConfig) -> List[Tuple[int, bool, List[int]]]:
    periodo, ultimo = cfg.intra_period, cfg.sequence_length - 1
    saida: List[Tuple[int, bool, List[int]]] = [(0, True, [])]
    decodificados = {0}

    def codificar(t: int, intra: bool, refs: List[int]) -> None:
        saida.append((t, intra, refs))
        decodificados.add(t)

    def dividir(a: int, b: int, inicio: int) -> None:
        if b - a < 2:
            return
        m = (a + b) // 2
        janela = [d for d in decodificados if inicio <= d <= inicio + periodo and d not in (a, b)]
        refs = _mais_proximos(m, [a, b], 2) + _mais_proximos(m, janela, cfg.n_refs)
        codificar(m, False, refs[: cfg.n_refs])
        dividir(a, m, inicio)
        dividir(m, b, inicio)

    for inicio in range(0, ultimo, periodo):
        fim = min(inicio + periodo, ultimo)
        if fim % periodo == 0:
            codificar(fim, True, [])
        else:
            # âncora de um período final incompleto: P referenciando o início
            codificar(fim, False, [inicio])
        dividir(inicio, fim, inicio)
    return saida


def plan_gop(cfg: GopConfig) -> GopPlan:
    """
    Gera o plano de codificação.

    LDP/LDB: ordem de exibição; refs = quadros anteriores mais próximos
    (sem atravessar o último intra). RA: hierárquico por ponto médio dentro
    de cada período intra.

    Returns:
        GopPlan com warp_refs = r referências mais próximas, em ordem crescente
    """
    if cfg.mode == GopMode.RA:
        bruto = _plan_random_access(cfg)
    else:
        bruto = _plan_low_delay(cfg)

    entradas = tuple(
        PlanEntry(t, pos, intra, tuple(refs), tuple(sorted(refs[: cfg.warp_refs])))
        for pos, (t, intra, refs) in enumerate(bruto)
    )
    return GopPlan(entradas, cfg.mode.value, cfg.intra_period, cfg.n_refs, cfg.warp_refs)


def validate_plan(plan: GopPlan) -> List[Violation]:
    """
    Verifica decodificabilidade, periodicidade intra, warp ⊆ pred e
    presença de referências. Nunca levanta exceção; lista vazia ⇔ válido.
    """
    violacoes: List[Violation] = []
    exibicao = [e.display_index for e in plan.entries]
    if sorted(exibicao) != list(range(len(exibicao))):
        violacoes.append(Violation("permutation", None, f"ordem de codificação não é permutação de 0..{len(exibicao) - 1}"))

    posicao: Dict[int, int] = {}
    for pos, e in enumerate(plan.entries):
        posicao.setdefault(e.display_index, pos)

    for pos, e in enumerate(plan.entries):
        for r in e.pred_refs:
            if r not in posicao or posicao[r] >= pos:
                violacoes.append(Violation(
                    "decodability", e.display_index,
                    f"quadro {e.display_index} referencia {r}, que não foi decodificado antes",
                ))
        fora = [w for w in e.warp_refs if w not in e.pred_refs]
        if fora:
            violacoes.append(Violation(
                "warp_subset", e.display_index, f"quadro {e.display_index}: warp {fora} ∉ pred_refs",
            ))
        if e.is_intra and e.pred_refs:
            violacoes.append(Violation("intra_refs", e.display_index, f"quadro intra {e.display_index} com referências"))
        if not e.is_intra and not e.pred_refs:
            violacoes.append(Violation("missing_refs", e.display_index, f"quadro inter {e.display_index} sem referências"))
        if plan.intra_period and e.display_index % plan.intra_period == 0 and not e.is_intra:
            violacoes.append(Violation(
                "periodicity", e.display_index,
                f"quadro {e.display_index} deveria ser intra (intra_period={plan.intra_period})",
            ))
    return violacoes


def require_valid(plan: GopPlan) -> GopPlan:
    """Levanta InvalidPlan com a primeira violação, se houver."""
    violacoes = validate_plan(plan)
    if violacoes:
        raise InvalidPlan(f"{len(violacoes)} violação(ões); primeira: {violacoes[0]}")
    return plan


# =========================
# SERIALIZAÇÃO
# =========================
def _lista(valores: Sequence[int]) -> str:
    return ",".join(str(v) for v in valores)


def format_plan(plan: GopPlan) -> str:
    """Texto de uma linha por entrada: `order display intra refs=a,b warp=a,b`."""
    meta = [f"{k}={v}" for k, v in (
        ("mode", plan.mode), ("intra_period", plan.intra_period),
        ("n_refs", plan.n_refs), ("warp_refs", plan.warp_refs),
    ) if v is not None]
    linhas = [f"# {' '.join(meta)}"] if meta else []
    for e in plan.entries:
        linhas.append(
            f"{e.coding_order} {e.display_index} {int(e.is_intra)} refs={_lista(e.pred_refs)} warp={_lista(e.warp_refs)}"
        )
    return "\n".join(linhas) + "\n"


def _ler_lista(token: str, chave: str, numero: int) -> Tuple[int, ...]:
    if not token.startswith(chave + "="):
        raise InvalidPlan(f"linha {numero}: esperado '{chave}=', encontrado {token!r}")
    corpo = token[len(chave) + 1:]
    try:
        return tuple(int(v) for v in corpo.split(",")) if corpo else ()
    except ValueError:
        raise InvalidPlan(f"linha {numero}: lista inválida {token!r}") from None


def parse_plan(texto: str) -> GopPlan:
    """
    Inverso de format_plan.

    Raises:
        InvalidPlan: linha malformada
    """
    meta: Dict[str, str] = {}
    entradas: List[PlanEntry] = []
    for numero, linha in enumerate(texto.splitlines(), start=1):
        linha = linha.strip()
        if not linha:
            continue
        if linha.startswith("#"):
            meta.update(p.split("=", 1) for p in linha[1:].split() if "=" in p)
            continue
        partes = linha.split()
        if len(partes) != 5:
            raise InvalidPlan(f"linha {numero}: esperados 5 campos, encontrados {len(partes)}")
        try:
            ordem, exib, intra = int(partes[0]), int(partes[1]), int(partes[2])
        except ValueError:
            raise InvalidPlan(f"linha {numero}: campos numéricos inválidos") from None
        if intra not in (0, 1):
            raise InvalidPlan(f"linha {numero}: intra deve ser 0 ou 1")
        entradas.append(PlanEntry(
            exib, ordem, bool(intra), _ler_lista(partes[3], "refs", numero), _ler_lista(partes[4], "warp", numero),
        ))

    entradas.sort(key=lambda e: e.coding_order)

    def inteiro(chave: str) -> Optional[int]:
        try:
            return int(meta[chave]) if chave in meta else None
        except ValueError:
            raise InvalidPlan(f"cabeçalho: {chave}={meta[chave]!r} inválido") from None

    return GopPlan(tuple(entradas), meta.get("mode"), inteiro("intra_period"), inteiro("n_refs"), inteiro("warp_refs"))


def write_plan(plan: GopPlan, path) -> None:
    try:
        Path(path).write_text(format_plan(plan), encoding="utf-8")
    except OSError as e:
        raise IoError(f"não foi possível gravar {path}: {e}") from e


def read_plan(path) -> GopPlan:
    try:
        texto = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"não foi possível ler {path}: {e}") from e
    return parse_plan(texto)
