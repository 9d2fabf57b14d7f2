"""Energy storage planning and operation for regulation, contingency and peak-shaving markets."""

__version__ = "0.1.0"
