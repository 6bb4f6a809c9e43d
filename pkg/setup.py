#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""setup.py for hopfduet."""

from setuptools import setup

if __name__ == "__main__":
    setup(
        install_requires=[
            "mcp>=1.6.0,<2",
            "numpy>=1.26",
            "scipy>=1.11",
            "matplotlib>=3.8",
        ],
    )
