"""
命令列介面 - 子命令解析與分派

結束碼：0 成功；1 數值前置條件失敗或 --strict 下的 ViolationCandidate；2 用法錯誤。
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from config import AppConfig, NumericsConfig
from core import GasModel, GridSpec, KeyValueConfigReader, SolverConfig, Verdict, WallEdge
from services.analysis_service import AnalysisService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# 值可能以負號開頭的選項（argparse 會把 "-0.5:0.5" 誤認為選項）
_SIGNED_VALUE_OPTIONS = {'--extent', '--v', '--aprime', '--ic', '--interval', '--v0',
                         '--center', '--A', '--r1'}


class UsageError(Exception):
    """命令列參數無法解析"""


def _normalize_signed_values(argv: List[str]) -> List[str]:
    result = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token in _SIGNED_VALUE_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith('-') \
                and len(argv[i + 1]) > 1 and (argv[i + 1][1].isdigit() or argv[i + 1][1] == '.'):
            result.append(f'{token}={argv[i + 1]}')
            i += 2
            continue
        result.append(token)
        i += 1
    return result


# ==================== 參數解析工具 ====================

def parse_floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise UsageError(f'無法解析數值列表: {text}')


def parse_grid_dims(text: str) -> List[int]:
    """'65x65' 或 '65'"""
    try:
        return [int(x) for x in text.lower().split('x')]
    except ValueError:
        raise UsageError(f'無法解析網格大小: {text}')


def parse_extent(text: str) -> List[tuple]:
    """'-0.5:0.5,-0.5:0.5'"""
    extent = []
    for part in text.split(','):
        try:
            lo, hi = part.split(':')
            extent.append((float(lo), float(hi)))
        except ValueError:
            raise UsageError(f'無法解析區域範圍: {text}')
    return extent


def parse_walls(text: Optional[str]) -> List[WallEdge]:
    if not text:
        return []
    try:
        return [WallEdge(x.strip()) for x in text.split(',') if x.strip()]
    except ValueError:
        raise UsageError(f'未知的牆邊: {text}（可用 left,right,bottom,top）')


def build_grid(args) -> GridSpec:
    dims = parse_grid_dims(args.grid)
    extent = parse_extent(args.extent)
    if len(dims) == 1 and len(extent) > 1:
        dims = dims * len(extent)
    if len(dims) != len(extent):
        raise UsageError(f'--grid {args.grid} 與 --extent {args.extent} 維度不一致')
    return GridSpec.from_extent(extent, dims, parse_walls(getattr(args, 'walls', None)))


def build_gas(args, required: bool = False) -> Optional[GasModel]:
    if args.gamma is None:
        if required:
            raise UsageError('需要 --gamma')
        return None
    return GasModel(gamma=args.gamma, c0=args.c0, rho0=args.rho0, bernoulli_A=args.A)


# ==================== 解析器 ====================

def _add_gas_args(p, required: bool = False):
    g = p.add_argument_group('氣體參數')
    g.add_argument('--gamma', type=float, required=required, help='多方指數 γ')
    g.add_argument('--c0', type=float, default=1.0, help='參考聲速（預設 1）')
    g.add_argument('--rho0', type=float, default=1.0, help='參考密度（預設 1）')
    g.add_argument('--A', type=float, default=0.0, help='Bernoulli 常數（預設 0）')


def _add_grid_args(p, required: bool = True):
    p.add_argument('--grid', required=required, help='節點數，例如 65x65')
    p.add_argument('--extent', required=required, help='區域範圍，例如 -0.5:0.5,-0.5:0.5')
    p.add_argument('--walls', default=None, help='slip 牆邊，例如 left,bottom')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=AppConfig.PROG_NAME, description=AppConfig.DESCRIPTION)
    parser.add_argument('--version', action='version', version=f'%(prog)s {AppConfig.VERSION}')
    parser.add_argument('--verbose', '-v', action='store_true', help='輸出除錯日誌')
    parser.add_argument('--quiet', '-q', action='store_true', help='不輸出進度訊息')
    sub = parser.add_subparsers(dest='command', required=True)

    # exact
    p_exact = sub.add_parser('exact', help='產生參考解')
    exact_sub = p_exact.add_subparsers(dest='kind', required=True)

    p = exact_sub.add_parser('uniform', help='均勻流 χ = v·ξ - |ξ|²/2 + A′')
    _add_gas_args(p, required=True)
    _add_grid_args(p)
    p.add_argument('--v', default=None, help='速度向量，逗號分隔（預設 0）')
    p.add_argument('--aprime', type=float, required=True, help='A′')
    p.add_argument('--out', required=True)

    p = exact_sub.add_parser('oned', help='一維方程的仿射或稀疏化分支')
    _add_gas_args(p, required=True)
    p.add_argument('--branch', choices=['affine', 'rarefaction'], required=True)
    p.add_argument('--sign', type=int, choices=[1, -1], default=1)
    p.add_argument('--ic', required=True, help='ξ₀,χ₀,χ′₀')
    p.add_argument('--interval', required=True, help='lo:hi')
    p.add_argument('--n', type=int, default=201)
    p.add_argument('--out', required=True)

    p = exact_sub.add_parser('radial', help='徑向約化的高精度積分')
    _add_gas_args(p, required=True)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--ic', required=True, help='r₀,χ₀,χ′₀')
    p.add_argument('--r1', type=float, required=True)
    p.add_argument('--n', type=int, default=201)
    _add_grid_args(p, required=False)
    p.add_argument('--center', default=None, help='取樣到網格時的中心（預設原點）')
    p.add_argument('--out', required=True)

    # solve
    p = sub.add_parser('solve', help='解 Dirichlet 問題')
    _add_gas_args(p)
    p.add_argument('--boundary', required=True, help='含邊界資料的場 CSV')
    p.add_argument('--config', default=None, help='key=value 求解設定檔')
    p.add_argument('--walls', default=None, help='覆寫中繼資料中的牆邊')
    p.add_argument('--initial-guess', default=None)
    p.add_argument('--out', required=True)
    p.add_argument('--report', default=None, help='求解報告 JSON（預設 <out>.report.json）')

    # classify / residual
    p = sub.add_parser('classify', help='逐節點型別分類')
    _add_gas_args(p)
    p.add_argument('--field', required=True)
    p.add_argument('--tol-L', type=float, default=NumericsConfig.TOL_L)
    p.add_argument('--out', default=None)

    p = sub.add_parser('residual', help='χ/ψ 方程殘差')
    _add_gas_args(p)
    p.add_argument('--field', required=True)
    p.add_argument('--out', default=None)

    # transform / reflect
    p = sub.add_parser('transform', help='平移、90° 旋轉或縮放')
    p.add_argument('--field', required=True)
    p.add_argument('--op', choices=['translate', 'rotate', 'scale'], required=True)
    p.add_argument('--v0', default=None, help='平移向量（translate）')
    p.add_argument('--turns', type=int, default=1, help='逆時針 90° 次數（rotate）')
    p.add_argument('--s', type=float, default=1.0, help='縮放倍率（scale）')
    p.add_argument('--out', required=True)

    p = sub.add_parser('reflect', help='跨牆偶反射')
    p.add_argument('--field', required=True)
    p.add_argument('--edge', choices=[e.value for e in WallEdge], required=True)
    p.add_argument('--out', required=True)

    # verify / sweep-delta / wall-check
    p = sub.add_parser('verify', help='L²+b 的最大值原理驗證')
    _add_gas_args(p)
    p.add_argument('--field', required=True)
    p.add_argument('--delta', type=float, required=True)
    p.add_argument('--chat', default='auto', help="ĉ 或 'auto'")
    p.add_argument('--k-ver', type=float, default=NumericsConfig.K_VER)
    p.add_argument('--wall-mode', choices=['reflect', 'interior'], default='reflect')
    p.add_argument('--diagnostics', action='store_true', help='違反時附上最大值點診斷')
    p.add_argument('--strict', action='store_true', help='ViolationCandidate 時結束碼為 1')
    p.add_argument('--out', default=None)

    p = sub.add_parser('sweep-delta', help='對多個 δ 驗證並回報經驗 δ 餘裕')
    _add_gas_args(p)
    p.add_argument('--field', required=True)
    p.add_argument('--deltas', default=','.join(str(d) for d in NumericsConfig.DELTA_SWEEP))
    p.add_argument('--chat', default='auto')
    p.add_argument('--k-ver', type=float, default=NumericsConfig.K_VER)
    p.add_argument('--wall-mode', choices=['reflect', 'interior'], default='reflect')
    p.add_argument('--strict', action='store_true')
    p.add_argument('--out', default=None)

    p = sub.add_parser('wall-check', help='牆面恆等式範數')
    _add_gas_args(p)
    p.add_argument('--field', required=True)
    p.add_argument('--edge', choices=[e.value for e in WallEdge], required=True)
    p.add_argument('--out', default=None)

    p = sub.add_parser('export', help='匯出 chi/psi/velocity/density')
    _add_gas_args(p)
    p.add_argument('--field', required=True)
    p.add_argument('--quantity', choices=['chi', 'psi', 'velocity', 'density'], required=True)
    p.add_argument('--out', required=True)
    return parser


def _default_out(field_path: str, suffix: str) -> str:
    path = Path(field_path)
    return str(path.with_name(path.stem + suffix))


def _chat(text: str):
    if text == 'auto':
        return 'auto'
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--chat 必須是數值或 'auto'，收到 {text}")


# ==================== 執行 ====================

class SspfCli:
    """子命令與處理函式的對應"""

    def __init__(self, argv: List[str], output_callback: Callable[[str], None]):
        self.argv = argv
        self.output_callback = output_callback
        self.service = AnalysisService(output_callback, argv)
        self.function_mapping: Dict[str, Callable] = {
            'exact uniform': self._exact_uniform,
            'exact oned': self._exact_oned,
            'exact radial': self._exact_radial,
            'solve': self._solve,
            'classify': self._classify,
            'residual': self._residual,
            'transform': self._transform,
            'reflect': self._reflect,
            'verify': self._verify,
            'sweep-delta': self._sweep_delta,
            'wall-check': self._wall_check,
            'export': self._export,
        }

    def dispatch(self, args) -> int:
        key = f'{args.command} {args.kind}' if args.command == 'exact' else args.command
        result = self.function_mapping[key](args)
        if not result['success']:
            return EXIT_USAGE if result.get('error_type') == 'usage' else EXIT_FAILURE
        return result.get('exit_code', EXIT_OK)

    def _exact_uniform(self, args):
        grid = build_grid(args)
        v = parse_floats(args.v) if args.v else [0.0] * grid.ndim
        return self.service.exact_uniform(v, args.aprime, build_gas(args, True), grid, args.out)

    def _exact_oned(self, args):
        ic = parse_floats(args.ic)
        interval = parse_extent(args.interval)
        if len(ic) != 3 or len(interval) != 1:
            raise UsageError('--ic 需三個數值，--interval 需一個 lo:hi')
        return self.service.exact_oned(build_gas(args, True), args.branch, tuple(ic), interval[0],
                                       args.n, args.sign, args.out)

    def _exact_radial(self, args):
        ic = parse_floats(args.ic)
        if len(ic) != 3:
            raise UsageError('--ic 需三個數值 r₀,χ₀,χ′₀')
        grid = build_grid(args) if args.grid and args.extent else None
        center = parse_floats(args.center) if args.center else None
        return self.service.exact_radial(build_gas(args, True), args.d, tuple(ic), args.r1, args.n,
                                         args.out, grid, center)

    def _solve(self, args):
        config = KeyValueConfigReader(args.config).to_solver_config() if args.config else SolverConfig()
        return self.service.solve(args.boundary, build_gas(args), config, args.out, args.report,
                                  args.initial_guess, parse_walls(args.walls))

    def _classify(self, args):
        out = args.out or _default_out(args.field, '.types.csv')
        return self.service.classify(args.field, build_gas(args), out, args.tol_L)

    def _residual(self, args):
        out = args.out or _default_out(args.field, '.residual.csv')
        return self.service.residual(args.field, build_gas(args), out)

    def _transform(self, args):
        v0 = parse_floats(args.v0) if args.v0 else None
        if args.op == 'translate' and not v0:
            raise UsageError('translate 需要 --v0')
        return self.service.transform(args.field, args.op, args.out, v0, args.turns, args.s)

    def _reflect(self, args):
        return self.service.reflect(args.field, WallEdge(args.edge), args.out)

    def _verify(self, args):
        out = args.out or _default_out(args.field, '.verify.json')
        result = self.service.verify(args.field, build_gas(args), args.delta, _chat(args.chat), out,
                                     args.k_ver, args.wall_mode, args.diagnostics)
        if result['success'] and args.strict and result['report'].verdict == Verdict.VIOLATION_CANDIDATE:
            result['exit_code'] = EXIT_FAILURE
        return result

    def _sweep_delta(self, args):
        out = args.out or _default_out(args.field, '.sweep.json')
        result = self.service.sweep_delta(args.field, build_gas(args), parse_floats(args.deltas),
                                          _chat(args.chat), out, args.k_ver, args.wall_mode)
        if result['success'] and args.strict and Verdict.VIOLATION_CANDIDATE in result['result'].verdicts:
            result['exit_code'] = EXIT_FAILURE
        return result

    def _wall_check(self, args):
        out = args.out or _default_out(args.field, f'.wall-{args.edge}.json')
        return self.service.wall_check(args.field, build_gas(args), WallEdge(args.edge), out)

    def _export(self, args):
        return self.service.export(args.field, args.quantity, build_gas(args), args.out)


def run(argv: Optional[List[str]] = None) -> int:
    """
    執行命令列

    Returns:
        結束碼（0 成功、1 前置條件失敗或嚴格模式違反、2 用法錯誤）
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_normalize_signed_values(argv))
    except SystemExit as e:
        # argparse 已將用法輸出到 stderr；--help/--version 為 0
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    output = (lambda text: None) if args.quiet else print

    try:
        code = SspfCli(argv, output).dispatch(args)
    except (UsageError, ValidationError, FileNotFoundError) as e:
        parser.print_usage(sys.stderr)
        print(f'{AppConfig.PROG_NAME}: 錯誤: {e}', file=sys.stderr)
        return EXIT_USAGE
    if code == EXIT_USAGE:
        parser.print_usage(sys.stderr)
    return code
