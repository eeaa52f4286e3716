"""Trial orchestration, curve aggregation and plotting."""
