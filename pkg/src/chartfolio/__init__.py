"""chartfolio: candlestick-chart datasets, classifier channels and trading analytics."""

__version__ = "0.1.0"
