"""Shape of quotients f/g via monotone L'Hopital-type rules, with a sampling oracle."""

__version__ = "0.1.0"
