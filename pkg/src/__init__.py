"""
Population Model Checker
Source code package
"""
