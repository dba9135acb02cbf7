"""flowscape: network traffic rendered as a live soundscape.

TCP/ICMP header activity is aggregated into per-window flow counters,
matched against threshold rules, and played back as recorded samples so an
operator can hear scans, floods and normal churn without watching a screen.
"""

__version__ = "0.1.0"
