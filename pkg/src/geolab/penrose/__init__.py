"""Penrose plane-wave limit, Rosen/Brinkmann conversion and classification."""
