"""Unit test package for lptorus."""
