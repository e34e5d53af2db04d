# This file makes the ctpp directory a Python package 