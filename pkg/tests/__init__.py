"""Tests for hopfduet."""
