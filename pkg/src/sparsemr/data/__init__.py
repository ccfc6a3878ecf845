"""Panel ingestion, windowing, and synthetic fixtures."""
