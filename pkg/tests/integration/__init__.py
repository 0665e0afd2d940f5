"""
Integration tests driving the cqed_fom command line
"""
