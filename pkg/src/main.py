"""
CLI do VoxelMotion.

Subcomandos: warp, predict-flow, reverse-flow, plan-gop, simulate, metrics,
diagnostics, synth, ablation. Código de saída 0 em sucesso; em erro, uma
linha no stderr e código 1.

Exemplo:
    python src/main.py plan-gop --mode ra --length 9 --intra-period 4 --out plan.txt
    python src/main.py simulate --frames seq/ --plan plan.txt --lambda 256 --m 4 \\
        --flow-source blockmatch --out-dir saida/
"""

import argparse
import sys
from pathlib import Path

# Garante que o diretório src/ esteja no path quando executado de fora.
_SRC = Path(__file__).resolve().parent
if str(_SRC) not in sys.path:
    sys.path.insert(0, str(_SRC))

from config import FIT_CONFIG, GOP_CONFIG, OUTPUT_DIR, RD_CONFIG, REVERSAL_CONFIG, WARP_CONFIG, log  # noqa: E402
from errors import ShapeMismatch, VoxelMotionError  # noqa: E402


# =========================
# SUBCOMANDOS
# =========================
def cmd_warp(args) -> None:
    from motion_compensation import WarpConfig, weighted_voxel_warp
    from tensor_io import read_voxel_flows, read_volume, write_frame_ppm, write_tensor

    volume = read_volume(args.volume)
    flows = read_voxel_flows(args.flows)
    saida = weighted_voxel_warp(volume, flows, WarpConfig(n_jobs=args.n_jobs))
    if str(args.out).lower().endswith(".vten"):
        write_tensor(saida.data, saida.shape, args.out)
    else:
        write_frame_ppm(saida, args.out)
    log(f"✓ Warp com M={flows.M} sobre D={volume.depth} gravado em {args.out}")


def cmd_predict_flow(args) -> None:
    from data_loader import parse_lista_temporal
    from flow_prediction import ReferenceFlowSet, default_order, predict_backward_flow
    from flow_reversal import ImportanceConfig
    from tensor_io import read_flow, read_frame_ppm, write_flow, write_map

    quadros = {t: read_frame_ppm(p) for t, p in parse_lista_temporal(args.refs)}
    fluxos = {t: read_flow(p) for t, p in parse_lista_temporal(args.flows)}
    k = args.order or default_order(len(fluxos) + 1)
    refs = ReferenceFlowSet.from_available(args.t_origin, fluxos)
    predito = predict_backward_flow(
        refs, quadros, args.t_target, k, ImportanceConfig(alpha=args.alpha, beta=args.beta),
    )
    write_flow(predito.flow, args.out)
    if args.holes:
        write_map(predito.holes, args.holes)
    log(f"✓ Fluxo f_{{{args.t_target}→{args.t_origin}}} (k={k}) gravado em {args.out}; "
        f"buracos: {predito.holes.mean():.1%}")


def cmd_reverse_flow(args) -> None:
    from flow_reversal import softmax_splat_reverse
    from tensor_io import read_flow, read_map, write_flow, write_map

    fluxo = read_flow(args.flow)
    reverso = softmax_splat_reverse(fluxo, read_map(args.mask), args.eps)
    write_flow(reverso.flow, args.out)
    write_map(reverso.holes, args.holes)
    log(f"✓ Fluxo revertido gravado em {args.out}; buracos: {reverso.holes.mean():.1%}")


def cmd_plan_gop(args) -> None:
    from gop_planner import GopConfig, plan_gop, require_valid, write_plan

    cfg = GopConfig(
        mode=args.mode, sequence_length=args.length, intra_period=args.intra_period,
        n_refs=args.n_refs, warp_refs=args.warp_refs,
    )
    plano = require_valid(plan_gop(cfg))
    write_plan(plano, args.out)
    log(f"✓ Plano {cfg.mode.value} com {len(plano)} quadros gravado em {args.out}")
    log(f"  Ordem de codificação: {plano.coding_order}")


def cmd_simulate(args) -> None:
    from codec_sim import RdConfig, SimConfig, simulate_sequence, write_simulation
    from data_loader import carregar_e_preparar_sequencia
    from gop_planner import read_plan
    from voxel_fit import FitConfig

    plano = read_plan(args.plan)
    quadros = carregar_e_preparar_sequencia(args.frames, [e.display_index for e in plano])
    rd = RdConfig(**{"lambda": args.lam, "quant_step": args.quant_step, "distortion_metric": args.metric})
    sim = SimConfig(
        M=args.m,
        flow_source=args.flow_source,
        flows_dir=args.flows_dir or args.frames,
        use_gfp=not args.no_gfp,
        fill_holes=not args.no_fill,
        fit=FitConfig(iters=args.iters, seed=args.seed),
        n_jobs=args.n_jobs,
    )
    resultado = simulate_sequence(quadros, plano, rd, sim)
    write_simulation(resultado, rd, args.out_dir)
    s = resultado.summary
    log(f"📊 Taxa média {s.mean_rate:.4f} bpp | distorção média {s.mean_distortion:.6f} | custo {s.mean_cost:.4f}")


def cmd_metrics(args) -> None:
    from metrics import ms_ssim, ms_ssim_scales, psnr
    from tensor_io import read_frame_ppm

    a, b = read_frame_ppm(args.a), read_frame_ppm(args.b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{args.a} {a.shape} ≠ {args.b} {b.shape}")
    escalas = ms_ssim_scales(a.height, a.width)
    linha = f"psnr={psnr(a, b)!r}"
    if escalas > 0:
        linha += f" ms_ssim={ms_ssim(a, b)!r} ms_ssim_scales={escalas}"
    else:
        log("⚠️  Quadro pequeno demais para MS-SSIM; apenas PSNR")
    print(linha)


def cmd_diagnostics(args) -> None:
    from codec_sim import diagnostics
    from tensor_io import read_voxel_flows, write_tensor

    pilha = read_voxel_flows(args.flows)
    diag = diagnostics(pilha, args.depth)
    mapas = diag.as_array()
    write_tensor(mapas, mapas.shape, args.out)
    if args.png:
        from visualizations import plot_diagnostic_maps, save_figure
        save_figure(plot_diagnostic_maps(diag, Path(args.flows).name), args.png)
    log(f"✓ Diagnóstico (6×{pilha.height}×{pilha.width}) gravado em {args.out}")


def cmd_synth(args) -> None:
    from synthetic import CORPORA, write_sequence

    kwargs = {"seed": args.seed, "size": args.size}
    if args.length:
        kwargs["length"] = args.length
    write_sequence(CORPORA[args.kind](**kwargs), args.out_dir)


def cmd_ablation(args) -> None:
    from experiments import run_ablation
    from voxel_fit import FitConfig

    df = run_ablation(
        args.study, args.out_dir, sequences=args.sequences, seed=args.seed,
        fit_cfg=FitConfig(iters=args.iters, seed=args.seed), M=args.m, n_jobs=args.n_jobs,
    )
    if args.png:
        from visualizations import plot_capacity_curve, plot_study_bars, save_figure
        if args.study == "capacity":
            fig = plot_capacity_curve(df)
        elif args.study == "gfp":
            fig = plot_study_bars(df, "gfp", "residual_entropy", "Entropia do resíduo com e sem GFP")
        else:
            fig = plot_study_bars(df, "mode", "prediction_psnr", "PSNR de predição por estrutura de GOP")
        save_figure(fig, Path(args.out_dir) / f"{args.study}.png")


# =========================
# PARSER
# =========================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxelmotion", description="Laboratório de compensação de movimento por voxel flows")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("warp", help="Warp trilinear ponderado (volume + voxel flows → quadro)")
    p.add_argument("--volume", required=True, help="Volume D×C×H×W (.vten)")
    p.add_argument("--flows", required=True, help="Voxel flows (4M)×H×W (.vten)")
    p.add_argument("--out", required=True, help="Quadro de saída (.ppm ou .vten)")
    p.add_argument("--n-jobs", type=int, default=WARP_CONFIG["n_jobs"], help="Faixas de linhas em paralelo")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("predict-flow", help="Predição de fluxo por trajetória polinomial + softmax splatting")
    p.add_argument("--refs", required=True, help="Quadros t=arquivo.ppm (inclui a origem); use --refs=... se t < 0")
    p.add_argument("--flows", required=True, help="Fluxos t=arquivo.vten com f_{t_j→t}")
    p.add_argument("--t-origin", type=int, required=True, help="Timestamp da origem t_j")
    p.add_argument("--t-target", type=float, required=True, help="Timestamp alvo t")
    p.add_argument("--order", type=int, default=None, help="Ordem k (padrão: min(n−1, 2))")
    p.add_argument("--out", required=True, help="Fluxo backward predito (.vten 2×H×W)")
    p.add_argument("--holes", default=None, help="Máscara de buracos (.vten 1×H×W)")
    p.add_argument("--alpha", type=float, default=REVERSAL_CONFIG["alpha"], help="Escala da máscara de importância")
    p.add_argument("--beta", type=float, default=REVERSAL_CONFIG["beta"], help="Deslocamento da máscara de importância")
    p.set_defaults(func=cmd_predict_flow)

    p = sub.add_parser("reverse-flow", help="Reversão forward → backward por softmax splatting")
    p.add_argument("--flow", required=True, help="Fluxo forward (.vten 2×H×W)")
    p.add_argument("--mask", required=True, help="Máscara de importância Z (.vten 1×H×W)")
    p.add_argument("--out", required=True, help="Fluxo backward (.vten)")
    p.add_argument("--holes", required=True, help="Máscara de buracos (.vten)")
    p.add_argument("--eps", type=float, default=REVERSAL_CONFIG["eps"], help="Limiar do denominador")
    p.set_defaults(func=cmd_reverse_flow)

    p = sub.add_parser("plan-gop", help="Plano de GOP (LDP, LDB, RA)")
    p.add_argument("--mode", required=True, choices=["ldp", "ldb", "ra"], type=str.lower)
    p.add_argument("--length", type=int, required=True, help="Número de quadros")
    p.add_argument("--intra-period", type=int, default=GOP_CONFIG["intra_period"])
    p.add_argument("--n-refs", type=int, default=None, help=f"Referências de predição (padrão {GOP_CONFIG['n_refs']}; LDP: 1)")
    p.add_argument("--warp-refs", type=int, default=None, help=f"Referências de warping (padrão {GOP_CONFIG['warp_refs']}; LDP: 1)")
    p.add_argument("--out", required=True, help="Arquivo do plano (texto)")
    p.set_defaults(func=cmd_plan_gop)

    p = sub.add_parser("simulate", help="Simulação de codec em malha fechada")
    p.add_argument("--frames", required=True, help="Diretório com frame_XXX.ppm")
    p.add_argument("--plan", required=True, help="Plano gerado por plan-gop")
    p.add_argument("--lambda", dest="lam", type=float, default=RD_CONFIG["lambda"], help="Peso λ da distorção")
    p.add_argument("--m", type=int, default=WARP_CONFIG["default_flows"], help="Número de voxel flows")
    p.add_argument("--flow-source", choices=["files", "blockmatch"], default="blockmatch")
    p.add_argument("--flows-dir", default=None, help="Diretório com flow_aaa_bbb.vten (padrão: --frames)")
    p.add_argument("--out-dir", required=True, help="Diretório de saída")
    p.add_argument("--seed", type=int, default=FIT_CONFIG["seed"])
    p.add_argument("--iters", type=int, default=FIT_CONFIG["iters"])
    p.add_argument("--metric", default=RD_CONFIG["distortion_metric"], help="MSE ou MS-SSIM")
    p.add_argument("--quant-step", type=float, default=RD_CONFIG["quant_step"])
    p.add_argument("--no-gfp", action="store_true", help="Desliga a predição de fluxo")
    p.add_argument("--no-fill", action="store_true", help="Não preenche buracos do fluxo predito")
    p.add_argument("--n-jobs", type=int, default=WARP_CONFIG["n_jobs"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="PSNR e MS-SSIM entre dois PPM")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("diagnostics", help="Mapas de centróide dos voxel flows")
    p.add_argument("--flows", required=True, help="Voxel flows (.vten)")
    p.add_argument("--depth", type=int, default=None, help="D do volume (limita g_z)")
    p.add_argument("--out", required=True, help="Mapas 6×H×W (.vten)")
    p.add_argument("--png", default=None, help="Figura opcional")
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("synth", help="Gera corpus sintético")
    p.add_argument("--kind", required=True, choices=["static", "translation", "acceleration", "occlusion"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablation", help="Estudos de ablação (capacity, gfp, modes)")
    p.add_argument("--study", required=True, choices=["capacity", "gfp", "modes"])
    p.add_argument("--out-dir", default=str(OUTPUT_DIR))
    p.add_argument("--sequences", type=int, default=10)
    p.add_argument("--seed", type=int, default=FIT_CONFIG["seed"])
    p.add_argument("--iters", type=int, default=FIT_CONFIG["iters"])
    p.add_argument("--m", type=int, default=4, help="Voxel flows nos estudos gfp/modes")
    p.add_argument("--n-jobs", type=int, default=None)
    p.add_argument("--png", action="store_true", help="Grava figura do estudo")
    p.set_defaults(func=cmd_ablation)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (VoxelMotionError, OSError, ValueError, KeyError) as e:
        mensagem = " ".join(str(e).split())
        print(f"❌ {type(e).__name__}: {mensagem}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
