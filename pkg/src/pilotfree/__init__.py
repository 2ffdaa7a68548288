"""
pilotfree: link-level simulation of MIMO-OFDM downlink transmission without
demodulation reference signals.

A few data symbols per resource block are repeated on other resource
elements; the receiver recovers each layer blind by two-view canonical
correlation analysis of the two copies. Pilot-based and perfect-channel
receivers are included for comparison.
"""

__version__ = "0.1.0"
