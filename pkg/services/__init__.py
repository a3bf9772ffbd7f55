"""
服務模組
"""

from .field_service import FieldService
from .report_service import ReportService
from .analysis_service import AnalysisService

__all__ = ['FieldService', 'ReportService', 'AnalysisService']
