# -*- coding: utf-8 -*-

"""Top-level package for OM_Lib."""

__author__ = """OM_Lib developers"""
__email__ = ""
__version__ = "0.1.0"
