"""
測試模組
"""
