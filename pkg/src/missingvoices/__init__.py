"""Deliberation assistant that surfaces missing voices in live group discussions.

Given a running transcript and a short description of the assembly, the
pipeline generates absent-stakeholder personas, first-person reflections
(agreement, disagreement, missing perspectives), and persona-voiced questions
for an expert panel. Ships as a FastAPI service with a thin CLI, plus survey
analytics for pre/post Likert evaluations.
"""

__version__ = "0.1.0"
