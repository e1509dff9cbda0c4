"""Virtual test drive middleware: keyed serialization, conference bus, scenario DSL, simulation."""

__version__ = "0.1.0"
