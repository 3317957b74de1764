# Beltrami Field Laboratory
__version__ = "1.0.0"
