"""Desk-scale simulation of a virtual power plant bidding into a day-ahead
market, with a projection shield that keeps accepted schedules deliverable
on the local network."""

__version__ = "0.1.0"
