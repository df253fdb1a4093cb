"""Global solution of non-convex quartic problems through implicit convex duality."""
__version__ = "0.1.0"
