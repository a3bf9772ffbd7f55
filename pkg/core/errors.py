"""
例外定義 - 所有數值前置條件與狀態錯誤
"""

from typing import Optional, Tuple


class SspfError(ValueError):
    """本工具所有例外的基礎類別"""

    def __init__(self, message: str, node: Optional[Tuple[int, ...]] = None):
        self.node = tuple(int(i) for i in node) if node is not None else None
        if self.node is not None:
            message = f"{message}（節點 {self.node}）"
        super().__init__(message)


class InvalidStateError(SspfError):
    """熱力學狀態無效：密度或聲速平方非正、超出 π 的值域（真空）"""


class PreconditionError(SspfError):
    """運算的前置假設不成立"""


class ReflectionError(SspfError):
    """牆面未滿足 slip 條件，不可進行偶反射"""


class DegenerateStateError(SspfError):
    """求解器在過多節點持續將 c² 截斷於下限"""


class SonicPointError(SspfError):
    """一維常微分方程初始條件與所選分支不一致"""
