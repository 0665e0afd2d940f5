"""
Unit tests for the core library modules
"""
