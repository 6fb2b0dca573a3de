"""
Package experiments - Expériences exécutables et contrôles d'acceptation
"""
