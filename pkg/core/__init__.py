"""
Core modules for the cavity-QED figure-of-merit toolkit
"""
