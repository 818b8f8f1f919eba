"""Joint flow-split, congestion control and scheduling (JFCS) simulator."""
