"""
Remote POVM app: remote generalized measurements via LOCC and a shared entangled resource.
"""
