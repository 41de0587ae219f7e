"""
Configurações centralizadas do VoxelMotion.
"""

import os
from pathlib import Path
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError

from errors import InvalidConfig

# Carrega variáveis de ambiente
load_dotenv()

# Diretórios
BASE_DIR = Path(__file__).parent
OUTPUT_DIR = Path(os.getenv("VOXELMOTION_OUTPUT_DIR", str(BASE_DIR.parent / "saidas")))

# Saída de console (0 silencia os logs do pipeline)
VERBOSE = os.getenv("VOXELMOTION_VERBOSE", "1").strip().lower() not in ("0", "false", "no")

_warnings_env: list = []


def _int_env(nome: str, padrao: int) -> int:
    valor = os.getenv(nome)
    if valor is None or valor.strip() == "":
        return padrao
    try:
        return int(valor)
    except ValueError:
        _warnings_env.append(f"⚠️  {nome}={valor!r} inválido - usando {padrao}")
        return padrao


# ---------------------------------------------------------------------------
# Formato .vten (bit-exato, little-endian)
# magic(4) | versão u8 | dtype u8 | ndim u8 | dims ndim × u32 | payload float32
# ---------------------------------------------------------------------------
TENSOR_FORMAT = {
    "magic": b"VTEN",
    "version": 1,
    "dtype_float32": 0,
}

# PPM binário (P6), único formato de imagem suportado
PPM_CONFIG = {
    "magic": b"P6",
    "maxval": 255,
}

# ---------------------------------------------------------------------------
# Compensação de movimento
# M = 25 é o ponto em que o ganho de múltiplos fluxos praticamente satura.
# ---------------------------------------------------------------------------
WARP_CONFIG = {
    "default_flows": 25,
    "boundary_mode": "clamp",
    "n_jobs": _int_env("VOXELMOTION_N_JOBS", 1),
}

# Predição de fluxo polinomial
FLOW_PREDICTION_CONFIG = {
    "pivot_tol": 1e-12,
    "max_order": 2,  # k = min(n - 1, 2)
}

# Reversão de fluxo por softmax splatting
REVERSAL_CONFIG = {
    "eps": 1e-9,
    "alpha": 1.0,
    "beta": 0.0,
    "fill_max_iters": 64,
}

# ---------------------------------------------------------------------------
# Estruturas GOP (IntraPeriod=12 e 3 referências, como nas configurações
# HM/VTM; subconjunto de warping r=2)
# ---------------------------------------------------------------------------
GOP_CONFIG = {
    "intra_period": 12,
    "n_refs": 3,
    "warp_refs": 2,
    "train_clip_length": 7,  # apenas informativo, não usado na simulação
}

# Taxa-distorção
RD_CONFIG = {
    "lambda": 256.0,
    "quant_step": 1.0 / 255.0,
    "distortion_metric": "MSE",
    "flow_quant_step": 1.0 / 16.0,
}

# Busca de blocos (substitui o estimador de fluxo óptico)
BLOCK_MATCHING_CONFIG = {
    "block": 8,
    "radius": 8,
}

# Ajuste dos voxel flows por descida de gradiente (Adam)
FIT_CONFIG = {
    "iters": 40,
    "lr_spatial": 0.25,
    "lr_temporal": 0.1,
    "lr_logit": 0.5,
    "decay": 0.95,
    "beta1": 0.9,
    "beta2": 0.999,
    "adam_eps": 1e-8,
    "perturbation": 0.5,
    "perturbation_z": 0.25,
    "seed": _int_env("VOXELMOTION_SEED", 0),
}

# Métricas
METRICS_CONFIG = {
    "psnr_cap": 99.0,
    "ms_ssim_weights": [0.0448, 0.2856, 0.3001, 0.2363, 0.1333],
    "ms_ssim_window": 11,
    "ms_ssim_sigma": 1.5,
    "k1": 0.01,
    "k2": 0.03,
    "data_range": 1.0,
    # piso dos termos cs/ssim (entradas anticorrelacionadas); mantém MS-SSIM em (0, 1]
    "ms_ssim_floor": 1e-12,
}

# Corpora sintéticos
SYNTHETIC_CONFIG = {
    "size": 64,
    "length": 9,
    "square": 20,
    "velocity": 2,
    "texture_sigma": 2.0,
    "canvas_margin": 32,
}

# Estudos de ablação em escala de bancada
EXPERIMENT_CONFIG = {
    "sequences": 10,
    "flow_counts": [1, 4, 9, 25],
    "n_jobs": _int_env("VOXELMOTION_N_JOBS", 1),
}


# ---------------------------------------------------------------------------
# Base dos modelos de configuração tipados
# ---------------------------------------------------------------------------
class ConfigModel(BaseModel):
    """Modelo pydantic imutável; qualquer falha de validação vira InvalidConfig."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    def __init__(self, **data):
        try:
            super().__init__(**data)
        except ValidationError as e:
            erro = e.errors()[0]
            campo = ".".join(str(p) for p in erro.get("loc", ())) or type(self).__name__
            raise InvalidConfig(f"{campo}: {erro.get('msg', 'valor inválido')}") from e


def log(msg: str) -> None:
    """Imprime mensagem do pipeline (respeita VOXELMOTION_VERBOSE)."""
    if VERBOSE:
        print(msg, flush=True)


# Validação
def validate_config():
    """Valida configurações essenciais."""
    warnings = list(_warnings_env)

    if WARP_CONFIG["n_jobs"] < 1:
        warnings.append("⚠️  VOXELMOTION_N_JOBS < 1 - usando execução serial")
        WARP_CONFIG["n_jobs"] = 1
        EXPERIMENT_CONFIG["n_jobs"] = 1

    if OUTPUT_DIR.exists() and not OUTPUT_DIR.is_dir():
        warnings.append(f"⚠️  VOXELMOTION_OUTPUT_DIR não é diretório: {OUTPUT_DIR}")

    return warnings


# Executa validação ao importar
_warnings = validate_config()
if _warnings:
    for warning in _warnings:
        print(warning)
