"""Sustainability analytics for IoT-enhanced business processes.

Modules: metamodel (sustainability model + link queries), bpmn (process
graphs and fragments), eventlog (XES, statistics, conformance), sensors
(ingestion, hygiene episode detection, energy), indicators (MCFI, CFID,
compliance, classification bands), report, monitor/server (live feedback),
simulate (oracle scenario generator), cli.
"""

__version__ = "0.1.0"
