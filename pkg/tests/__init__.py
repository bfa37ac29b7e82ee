"""Tests for the levy-hjmm toolkit."""
