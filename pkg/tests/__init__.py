"""
Tests package for the cavity-QED figure-of-merit toolkit
"""
