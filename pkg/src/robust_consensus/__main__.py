"""Allow running as python -m robust_consensus."""

from robust_consensus.cli import app

if __name__ == "__main__":
    app()
