"""Shared registry for acceptance result lines.

The gate decorator appends one line per check; a terminal-summary hook
replays them after capture ends so they are visible in any pytest mode.
"""

LINES: list[str] = []
