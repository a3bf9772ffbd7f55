"""
分析服務 - 整合數值核心與輸出，對應每個 CLI 子命令的處理流程

每個方法回傳 {'success': bool, 'message': str, ...}；失敗時附帶 error 與 error_type：
'usage'（輸入檔不存在、格式錯誤）或 'precondition'（數值前置條件不成立）。
"""

import logging
import traceback
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from core import (GasModel, GridSpec, Rotate, Scale, ScalarField, SolverConfig, SspfError,
                  Translate, Variable, Verdict, WallEdge)
from core import ellipticity, exact, field as fieldops, solver
from core.gas import density_from_chi
from .field_service import FieldService
from .report_service import ReportService

logger = logging.getLogger(__name__)


def _derived_path(out: str, suffix: str) -> str:
    """u.csv -> u<suffix>"""
    return (out[:-4] if out.endswith('.csv') else out) + suffix


def _failure(exc: Exception, output_callback: Callable) -> Dict[str, Any]:
    if isinstance(exc, (FileNotFoundError, ValidationError)):
        error_type = 'usage'
    elif isinstance(exc, SspfError):
        error_type = 'precondition'
    else:
        error_type = 'internal'
        logger.debug(traceback.format_exc())
    output_callback(f"[錯誤] {exc}")
    return {'success': False, 'message': str(exc), 'error': str(exc), 'error_type': error_type}


class AnalysisService:
    """分析流程服務"""

    def __init__(self, output_callback: Callable = None, argv: Optional[List[str]] = None):
        self.output_callback = output_callback or (lambda x: None)
        self.argv = list(argv or [])
        self.fields = FieldService(self.output_callback)
        self.reports = ReportService(self.output_callback)

    # ========== 共用 ==========

    def _load(self, path: str, gas: Optional[GasModel]) -> Tuple[ScalarField, GasModel]:
        """讀取場；命令列未給氣體參數時使用中繼資料中的氣體"""
        field, stored_gas = self.fields.read_field(path)
        gas = gas or stored_gas
        if gas is None:
            raise SspfError(f'{path} 沒有氣體參數，請以 --gamma/--c0 指定')
        for warning in gas.exponent_warnings():
            self.output_callback(f"[警告] {warning}")
        return field, gas

    def _manifest(self, out: str, subcommand: str, gas=None, grid=None, config=None, outputs=None):
        return self.fields.write_manifest(out, subcommand, self.argv, gas, grid, config, outputs)

    def _run(self, label: str, func, *args, **kwargs) -> Dict[str, Any]:
        self.output_callback("=" * 50)
        self.output_callback(f"開始執行: {label}")
        try:
            result = func(*args, **kwargs)
        except (SspfError, FileNotFoundError, ValidationError, ValueError) as e:
            return _failure(e, self.output_callback)
        self.output_callback(f"[成功] {result['message']}")
        return result

    # ========== exact ==========

    def exact_uniform(self, v: Sequence[float], A_prime: float, gas: GasModel,
                      grid: GridSpec, out: str) -> Dict[str, Any]:
        def work():
            field = exact.uniform_flow(v, A_prime, gas, grid)
            paths = self.fields.write_field(field, out, gas, extra={
                'source': 'uniform_flow', 'v': list(v), 'A_prime': A_prime})
            self._manifest(out, 'exact uniform', gas, grid, outputs=list(paths))
            c2 = exact.uniform_flow_c2(gas, v, A_prime)
            return {'success': True, 'message': f'均勻流 c² = {c2:.12g}', 'field': field, 'outputs': list(paths)}
        return self._run('均勻流', work)

    def exact_oned(self, gas: GasModel, branch: str, ic: Tuple[float, float, float],
                   interval: Tuple[float, float], n: int, sign: int, out: str) -> Dict[str, Any]:
        def work():
            profile = exact.solve_1d(gas, branch, ic, interval, n=n, sign=sign)
            paths = self.fields.write_profile(profile, out, gas)
            self._manifest(out, 'exact oned', gas, config={'branch': branch, 'ic': list(ic),
                                                           'interval': list(interval), 'n': n, 'sign': sign},
                           outputs=list(paths))
            note = '（於音速點截斷）' if profile.truncated else ''
            return {'success': True, 'message': f'一維 {branch} 解 {len(profile.xi)} 點{note}',
                    'profile': profile, 'outputs': list(paths)}
        return self._run('一維解', work)

    def exact_radial(self, gas: GasModel, d: int, ic: Tuple[float, float, float], r1: float,
                     n: int, out: str, grid: Optional[GridSpec] = None,
                     center: Optional[Sequence[float]] = None) -> Dict[str, Any]:
        """徑向解；給定 grid 時同時把剖面取樣到二維網格（out 為場，剖面寫到 <stem>.profile.csv）"""
        def work():
            profile = exact.solve_radial(gas, d, ic, r1, n=n)
            outputs = []
            if grid is None:
                outputs += self.fields.write_profile(profile, out, gas)
                field = None
            else:
                field = exact.sample_radial(profile, grid, center)
                outputs += self.fields.write_field(field, out, gas, extra={
                    'source': 'radial', 'center': list(center) if center is not None else None})
                profile_path = _derived_path(out, '.profile.csv')
                outputs += self.fields.write_profile(profile, profile_path, gas)
            self._manifest(out, 'exact radial', gas, grid,
                           config={'d': d, 'ic': list(ic), 'r1': r1, 'n': n}, outputs=outputs)
            msg = f'徑向解積分至 r = {profile.xi[-1]:.10g}'
            if profile.truncated:
                msg += f'（音速點 r = {profile.sonic_points[0]:.10g}）'
            return {'success': True, 'message': msg, 'profile': profile, 'field': field, 'outputs': outputs}
        return self._run('徑向解', work)

    # ========== solve ==========

    def solve(self, boundary_path: str, gas: Optional[GasModel], config: SolverConfig, out: str,
              report_out: Optional[str] = None, initial_guess_path: Optional[str] = None,
              wall_edges: Sequence[WallEdge] = ()) -> Dict[str, Any]:
        def work():
            boundary, g = self._load(boundary_path, gas)
            grid = boundary.grid
            if wall_edges:
                grid = GridSpec(**{**grid.model_dump(), 'wall_edges': tuple(wall_edges)})
                boundary = boundary.with_values(boundary.values, grid=grid)
            guess = None
            if initial_guess_path:
                guess, _ = self.fields.read_field(initial_guess_path)
            field, report = solver.solve_dirichlet(grid, boundary, g, config, guess,
                                                   output_callback=self.output_callback)
            outputs = list(self.fields.write_field(field, out, g, extra={'source': 'solve_dirichlet'}))
            report_path = report_out or _derived_path(out, '.report.json')
            outputs.append(self.reports.write_model(report, report_path))
            self._manifest(out, 'solve', g, grid, config.model_dump(mode='json'), outputs)
            status = '收斂' if report.converged else '未收斂'
            return {'success': True, 'message': f'{status}，{report.iterations} 步，殘差 {report.final_residual:.3e}',
                    'field': field, 'report': report, 'outputs': outputs}
        return self._run('Dirichlet 求解', work)

    # ========== classify / residual ==========

    def classify(self, field_path: str, gas: Optional[GasModel], out: str, tol_L: float) -> Dict[str, Any]:
        def work():
            field, g = self._load(field_path, gas)
            L, tags, summary = fieldops.classify_field(field, g, tol_L)
            self.reports.write_classification(field, L, tags, summary, out)
            self._manifest(out, 'classify', g, field.grid, {'tol_L': tol_L})
            counts = '，'.join(f'{k} {v}' for k, v in summary.counts.items())
            return {'success': True, 'message': f'型別統計：{counts}；max L = {summary.max_L:.8f}',
                    'summary': summary}
        return self._run('型別分類', work)

    def residual(self, field_path: str, gas: Optional[GasModel], out: str) -> Dict[str, Any]:
        def work():
            field, g = self._load(field_path, gas)
            if field.variable == Variable.PSI:
                R = fieldops.residual_psi(field, g)
            else:
                R = fieldops.residual_chi(field, g)
            norms = fieldops.residual_norms(R)
            self.reports.write_residual(R, norms, out, g)
            self._manifest(out, 'residual', g, field.grid)
            return {'success': True, 'message': f'殘差 ∞-範數 {norms[0]:.3e}，L² {norms[1]:.3e}',
                    'residual': R, 'norms': norms}
        return self._run('方程殘差', work)

    # ========== transform / reflect / export ==========

    def transform(self, field_path: str, kind: str, out: str, v0: Sequence[float] = None,
                  quarter_turns: int = 1, s: float = 1.0) -> Dict[str, Any]:
        def work():
            field, g = self.fields.read_field(field_path)
            op = {'translate': lambda: Translate(v0=tuple(v0 or ())),
                  'rotate': lambda: Rotate(quarter_turns=quarter_turns),
                  'scale': lambda: Scale(s=s)}[kind]()
            result = fieldops.transform(field, op)
            outputs = list(self.fields.write_field(result, out, g, extra={'transform': op.model_dump()}))
            self._manifest(out, 'transform', g, result.grid, op.model_dump(), outputs)
            return {'success': True, 'message': f'{kind} 完成：新網格 {result.grid.dims}', 'field': result}
        return self._run('對稱變換', work)

    def reflect(self, field_path: str, edge: WallEdge, out: str) -> Dict[str, Any]:
        def work():
            field, g = self.fields.read_field(field_path)
            result = fieldops.reflect_even(field, edge)
            outputs = list(self.fields.write_field(result, out, g, extra={'reflected_across': WallEdge(edge).value}))
            self._manifest(out, 'reflect', g, result.grid, outputs=outputs)
            return {'success': True, 'message': f'偶反射完成：{field.grid.dims} -> {result.grid.dims}',
                    'field': result}
        return self._run('偶反射', work)

    def export(self, field_path: str, quantity: str, gas: Optional[GasModel], out: str) -> Dict[str, Any]:
        """匯出 chi、psi（全節點）或 velocity、density（內部節點）"""
        def work():
            field, stored = self.fields.read_field(field_path)
            g = gas or stored
            if quantity in ('chi', 'psi'):
                target = Variable.CHI if quantity == 'chi' else Variable.PSI
                result = field if field.variable == target else fieldops.convert(field)
                outputs = list(self.fields.write_field(result, out, g))
            else:
                chi = field if field.variable == Variable.CHI else fieldops.convert(field)
                grid = chi.grid
                xi = grid.mesh()[fieldops.interior_slices(grid)].reshape(-1, grid.ndim)
                names = ['xi1', 'xi2'] if grid.ndim == 2 else ['xi']
                data = {name: xi[:, k] for k, name in enumerate(names)}
                if quantity == 'velocity':
                    v = fieldops.velocity_field(chi).reshape(-1, grid.ndim)
                    cols = [f'v{k + 1}' for k in range(grid.ndim)]
                    for k, name in enumerate(cols):
                        data[name] = v[:, k]
                else:
                    if g is None:
                        raise SspfError('匯出密度需要氣體參數')
                    grad, _ = fieldops.derivatives(chi)
                    rho = density_from_chi(g, chi.values[fieldops.interior_slices(grid)], grad)
                    cols = ['rho']
                    data['rho'] = np.asarray(rho).ravel()
                outputs = [self.fields.write_table(pd.DataFrame(data, columns=names + cols), out)]
            self._manifest(out, 'export', g, field.grid, {'quantity': quantity}, outputs)
            return {'success': True, 'message': f'已匯出 {quantity}'}
        return self._run('匯出', work)

    # ========== 橢圓性 ==========

    def _c_hat(self, field: ScalarField, gas: GasModel, c_hat) -> float:
        if c_hat in (None, 'auto'):
            value = ellipticity.auto_c_hat(field, gas)
            self.output_callback(f"ĉ 自動設定為 {value:.15g}")
            return value
        return float(c_hat)

    def verify(self, field_path: str, gas: Optional[GasModel], delta: float, c_hat, out: str,
               k_ver: float, wall_mode: str = 'reflect', diagnostics: bool = False) -> Dict[str, Any]:
        def work():
            field, g = self._load(field_path, gas)
            chat = self._c_hat(field, g, c_hat)
            barrier = ellipticity.make_barrier(field.grid, chat, delta)
            report = ellipticity.verify_max_principle(field, g, barrier, delta, k_ver, wall_mode)
            extra = {'barrier': barrier.model_dump(mode='json')}
            if diagnostics and report.verdict == Verdict.VIOLATION_CANDIDATE:
                try:
                    diag = ellipticity.maxpoint_diagnostics(field, g, barrier, report.argmax_index)
                    extra['maxpoint_diagnostics'] = diag.model_dump(mode='json')
                except SspfError as e:
                    extra['maxpoint_diagnostics'] = {'error': str(e)}
            outputs = [self.reports.write_model(report, out, extra)]
            self._manifest(out, 'verify', g, field.grid,
                           {'delta': delta, 'c_hat': chat, 'k_ver': k_ver, 'wall_mode': wall_mode}, outputs)
            return {'success': True, 'message': f'判定 {report.verdict.value}（δ = {delta:g}）',
                    'report': report}
        return self._run('最大值原理驗證', work)

    def sweep_delta(self, field_path: str, gas: Optional[GasModel], deltas: Sequence[float], c_hat,
                    out: str, k_ver: float, wall_mode: str = 'reflect') -> Dict[str, Any]:
        def work():
            field, g = self._load(field_path, gas)
            chat = self._c_hat(field, g, c_hat)
            result = ellipticity.sweep_delta(field, g, deltas, chat, k_ver, wall_mode,
                                             output_callback=self.output_callback)
            outputs = [self.reports.write_model(result, out)]
            self._manifest(out, 'sweep-delta', g, field.grid,
                           {'deltas': list(deltas), 'c_hat': chat, 'k_ver': k_ver}, outputs)
            margin = result.empirical_delta_margin
            msg = f'經驗 δ 餘裕 = {margin:g}' if margin is not None else '所有 δ 皆判定為 ViolationCandidate'
            return {'success': True, 'message': msg, 'result': result}
        return self._run('δ 掃描', work)

    def wall_check(self, field_path: str, gas: Optional[GasModel], edge: WallEdge, out: str) -> Dict[str, Any]:
        def work():
            field, g = self._load(field_path, gas)
            report = ellipticity.check_wall_conditions(field, g, edge)
            outputs = [self.reports.write_model(report, out)]
            self._manifest(out, 'wall-check', g, field.grid, {'wall_edge': WallEdge(edge).value}, outputs)
            flag = '，slip 不成立' if report.slip_violated else ''
            return {'success': True, 'message': f'max|χ_n| = {report.chi_n:.3e}{flag}', 'report': report}
        return self._run('牆面條件檢查', work)
