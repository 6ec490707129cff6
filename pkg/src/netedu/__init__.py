"""netedu: networking-education lab toolkit.

Modules cover the byte codecs, a pcap dissector, a mini transport protocol
over UDP, a deterministic link impairment simulator, a New Reno
send-timeline predictor, an auto-feedback exercise engine, an interop test
harness and peer-review allocation, plus an HTTP service and CLI.
"""

__version__ = "0.1.0"
