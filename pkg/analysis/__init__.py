#!/usr/bin/env python3
"""
Analysis Package

Report tables and figures built from a finished experiment directory.
"""

from .report_builder import Report, ReportBuilder, make_reports

__all__ = ['Report', 'ReportBuilder', 'make_reports']
