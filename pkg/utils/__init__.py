"""Models, planner and simulator for EPR distribution over a teleporter mesh."""
