"""
命令列模組
"""

from .main_cli import run

__all__ = ['run']
