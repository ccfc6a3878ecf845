"""OU statistics and convergence-trading backtests."""
