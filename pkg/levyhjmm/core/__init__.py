"""Core numerics for the levy-hjmm toolkit."""
