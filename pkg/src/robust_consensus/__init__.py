"""Maximum-consensus outlier removal with slack linear programs."""

__version__ = "0.1.1"
