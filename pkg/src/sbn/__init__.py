"""Symbiotic blockchain network: backscatter-assisted PBFT, energy-planned sharding,
a service-credit ledger and an epoch simulator that ties them together."""

__version__ = "0.1.0"
